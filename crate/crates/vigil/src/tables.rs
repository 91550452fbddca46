//! Delimited-text dataset and report formats.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a file
//! read back yields bit-identical values and reruns produce byte-identical
//! output.

use std::fmt::Write as _;
use std::path::Path;

use vigil_core::anomaly::AnomalyReport;
use vigil_core::classifier::{ConfusionMatrix, GridResult};
use vigil_core::features::{AxisSet, Label, LabeledWindow, SensorKind};
use vigil_core::sim::{MotorRecording, SensorSeries};

use crate::error::{CliError, Result};
use crate::fsutil;

/// Writes a window dataset: `feature_0..feature_k, rpm, label, sensor_kind,
/// axes`, one window per row.
pub fn write_windows(path: &Path, windows: &[LabeledWindow]) -> Result<()> {
    if windows.is_empty() {
        return Err(CliError::data("refusing to write an empty window dataset"));
    }
    let dim = windows[0].features.len();
    let mut text = String::new();
    for i in 0..dim {
        let _ = write!(text, "feature_{i},");
    }
    text.push_str("rpm,label,sensor_kind,axes\n");
    for w in windows {
        if w.features.len() != dim {
            return Err(CliError::data("window dataset has mixed dimensionality"));
        }
        for v in &w.features {
            let _ = write!(text, "{v},");
        }
        let _ = writeln!(
            text,
            "{},{},{},{}",
            w.rpm,
            w.label.name(),
            w.sensor.name(),
            w.axes.encode()
        );
    }
    fsutil::write_atomic(path, text.as_bytes())
}

/// Reads a window dataset written by [`write_windows`].
pub fn read_windows(path: &Path) -> Result<Vec<LabeledWindow>> {
    let text = fsutil::read_text(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::data(format!("{}: empty file", path.display())))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 5 || cols[cols.len() - 4] != "rpm" {
        return Err(CliError::data(format!(
            "{}: not a window dataset (unexpected header)",
            path.display()
        )));
    }
    let dim = cols.len() - 4;
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 4 {
            return Err(CliError::data(format!(
                "{}:{}: expected {} fields, found {}",
                path.display(),
                lineno + 2,
                dim + 4,
                fields.len()
            )));
        }
        let mut features = Vec::with_capacity(dim);
        for f in &fields[..dim] {
            features.push(parse_f64(f, path, lineno + 2)?);
        }
        let rpm: u32 = fields[dim]
            .parse()
            .map_err(|_| CliError::data(format!("{}:{}: bad rpm", path.display(), lineno + 2)))?;
        let label = Label::parse(fields[dim + 1]).map_err(|e| CliError::data(e.to_string()))?;
        let sensor = SensorKind::parse(fields[dim + 2]).map_err(|e| CliError::data(e.to_string()))?;
        let axes = AxisSet::parse(fields[dim + 3]).map_err(|e| CliError::data(e.to_string()))?;
        out.push(LabeledWindow {
            features,
            rpm,
            label,
            sensor,
            axes,
        });
    }
    if out.is_empty() {
        return Err(CliError::data(format!("{}: no windows", path.display())));
    }
    Ok(out)
}

fn parse_f64(s: &str, path: &Path, lineno: usize) -> Result<f64> {
    s.parse()
        .map_err(|_| CliError::data(format!("{}:{}: bad float '{s}'", path.display(), lineno)))
}

/// Writes a farm series: `timestamp_minutes,value,is_anomaly`.
pub fn write_series(path: &Path, series: &SensorSeries) -> Result<()> {
    let mut text = String::from("timestamp_minutes,value,is_anomaly\n");
    for (i, v) in series.values.iter().enumerate() {
        let flag = u8::from(series.anomaly_indices.binary_search(&i).is_ok());
        let _ = writeln!(text, "{},{v},{flag}", series.timestamp_minutes(i));
    }
    fsutil::write_atomic(path, text.as_bytes())
}

/// Reads a farm series written by [`write_series`]. The sensor type is
/// recovered from the file stem.
pub fn read_series(path: &Path) -> Result<SensorSeries> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| CliError::data(format!("{}: no file stem", path.display())))?;
    let sensor = vigil_core::sim::FarmSensor::parse(stem)
        .map_err(|_| CliError::data(format!("{}: file stem is not a sensor type", path.display())))?;
    let text = fsutil::read_text(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != "timestamp_minutes,value,is_anomaly" {
        return Err(CliError::data(format!(
            "{}: not a series file (unexpected header)",
            path.display()
        )));
    }
    let mut values = Vec::new();
    let mut anomalies = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(CliError::data(format!(
                "{}:{}: expected 3 fields",
                path.display(),
                lineno + 2
            )));
        }
        values.push(parse_f64(fields[1], path, lineno + 2)?);
        if fields[2] == "1" {
            anomalies.push(values.len() - 1);
        }
    }
    Ok(SensorSeries {
        sensor,
        cadence_minutes: vigil_core::sim::CADENCE_MINUTES,
        values,
        anomaly_indices: anomalies,
    })
}

/// Writes one raw motor recording: `t,x,y,z` with `t` in seconds.
pub fn write_recording(path: &Path, rec: &MotorRecording) -> Result<()> {
    let rate = rec.sensor.sample_rate_hz();
    let mut text = String::from("t,x,y,z\n");
    for i in 0..rec.x.len() {
        let t = i as f64 / rate;
        let _ = writeln!(text, "{t},{},{},{}", rec.x[i], rec.y[i], rec.z[i]);
    }
    fsutil::write_atomic(path, text.as_bytes())
}

/// Writes a per-series anomaly report: flagged rows then a summary line.
pub fn write_anomaly_report(path: &Path, report: &AnomalyReport, cadence_minutes: u32) -> Result<()> {
    let mut text = String::from("index,timestamp_minutes,predicted,actual,relative_error\n");
    for f in &report.flagged {
        let _ = writeln!(
            text,
            "{},{},{},{},{}",
            f.index,
            f.index as u64 * cadence_minutes as u64,
            f.predicted,
            f.actual,
            f.relative_error
        );
    }
    let _ = writeln!(
        text,
        "# forecaster={} train_len={} test_len={} rmse={} anomalies={}",
        report.forecaster,
        report.train_len,
        report.test_len,
        report.rmse,
        report.flagged.len()
    );
    fsutil::write_atomic(path, text.as_bytes())
}

/// Optional plot companion: one row per test index.
pub fn write_plot_data(
    path: &Path,
    first_index: usize,
    actuals: &[f64],
    predictions: &[f64],
) -> Result<()> {
    let mut text = String::from("index,actual,predicted\n");
    for (k, (a, p)) in actuals.iter().zip(predictions).enumerate() {
        let _ = writeln!(text, "{},{a},{p}", first_index + k);
    }
    fsutil::write_atomic(path, text.as_bytes())
}

/// One row of the per-sensor-type aggregate table.
pub struct AggregateRow {
    pub sensor_type: String,
    pub forecaster: String,
    pub series_count: usize,
    pub average_test_rmse: f64,
    pub anomaly_count: usize,
}

/// Writes the aggregate detection table, one row per sensor type.
pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut text = String::from("sensor_type,forecaster,series,average_test_rmse,anomaly_count\n");
    for r in rows {
        let _ = writeln!(
            text,
            "{},{},{},{},{}",
            r.sensor_type, r.forecaster, r.series_count, r.average_test_rmse, r.anomaly_count
        );
    }
    fsutil::write_atomic(path, text.as_bytes())
}

/// Writes the train-RPM x test-RPM accuracy grid with a trailing average
/// column; the augmented row is labeled `augmented`.
pub fn write_grid(path: &Path, grid: &GridResult) -> Result<()> {
    let mut text = String::from("train_rpm");
    for rpm in &grid.test_rpms {
        let _ = write!(text, ",rpm_{rpm}");
    }
    text.push_str(",average\n");
    for row in &grid.rows {
        match row.train_rpm {
            Some(rpm) => {
                let _ = write!(text, "rpm_{rpm}");
            }
            None => text.push_str("augmented"),
        }
        for acc in &row.accuracies {
            let _ = write!(text, ",{acc:.4}");
        }
        let _ = writeln!(text, ",{:.4}", row.average);
    }
    fsutil::write_atomic(path, text.as_bytes())
}

/// Writes confusion counts and row-normalized rates as row-labeled tables.
pub fn write_confusion(path: &Path, matrix: &ConfusionMatrix, accuracy: f64) -> Result<()> {
    let labels: Vec<&str> = matrix.classes.labels().iter().map(|l| l.name()).collect();
    let mut text = String::from("# counts (rows = true, columns = predicted)\n");
    text.push_str("true\\predicted");
    for l in &labels {
        let _ = write!(text, ",{l}");
    }
    text.push('\n');
    for (i, row) in matrix.counts().iter().enumerate() {
        let _ = write!(text, "{}", labels[i]);
        for c in row {
            let _ = write!(text, ",{c}");
        }
        text.push('\n');
    }
    text.push_str("# rates (row-normalized)\n");
    text.push_str("true\\predicted");
    for l in &labels {
        let _ = write!(text, ",{l}");
    }
    text.push('\n');
    for (i, row) in matrix.rates().iter().enumerate() {
        let _ = write!(text, "{}", labels[i]);
        for r in row {
            let _ = write!(text, ",{r:.4}");
        }
        text.push('\n');
    }
    let _ = writeln!(text, "# accuracy={accuracy}");
    fsutil::write_atomic(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use vigil_core::features::Axis;
    use vigil_core::rng::Rng;

    fn tmp_dir(tag: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("vigil-tables-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn windows_round_trip_bitwise() {
        let dir = tmp_dir("win");
        let path = dir.join("w.csv");
        let mut rng = Rng::seed_from(1);
        let axes = AxisSet::new(&[Axis::X, Axis::Z]).unwrap();
        let windows: Vec<LabeledWindow> = (0..20)
            .map(|i| LabeledWindow {
                features: (0..8).map(|_| rng.normal(0.0, 2.5)).collect(),
                rpm: 300,
                label: if i % 2 == 0 { Label::Normal } else { Label::Failure },
                sensor: SensorKind::Piezo,
                axes,
            })
            .collect();
        write_windows(&path, &windows).unwrap();
        let back = read_windows(&path).unwrap();
        assert_eq!(back.len(), windows.len());
        for (a, b) in windows.iter().zip(&back) {
            assert_eq!(a.rpm, b.rpm);
            assert_eq!(a.label, b.label);
            assert_eq!(a.axes, b.axes);
            for (x, y) in a.features.iter().zip(&b.features) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn series_round_trip_preserves_ground_truth() {
        let dir = tmp_dir("series");
        let path = dir.join("temperature.csv");
        let mut spec = vigil_core::sim::FarmSpec::new(vigil_core::sim::FarmSensor::Temperature, 3, 9);
        spec.anomalies = vigil_core::sim::AnomalySpec::spikes(3, 0.5);
        let series = vigil_core::sim::gen_farm(&spec).unwrap();
        write_series(&path, &series).unwrap();
        let back = read_series(&path).unwrap();
        assert_eq!(back.sensor, series.sensor);
        assert_eq!(back.anomaly_indices, series.anomaly_indices);
        for (a, b) in series.values.iter().zip(&back.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        std::fs::remove_dir_all(dir).ok();
    }
}
