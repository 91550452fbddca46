//! End-to-end runs behind the CLI commands.
//!
//! Everything here is a library function so the test suites drive the exact
//! code paths the binary does. All outputs are deterministic in the options
//! (no wall-clock timestamps anywhere), so reruns are byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use vigil_core::anomaly::{self, AnomalyRule, Forecaster, LstmForecast, RollingArima};
use vigil_core::arima::ArimaConfig;
use vigil_core::classifier::{
    self, binarize, confusion, rpm_generalization_grid, split_windows, train_dnn_r, transfer,
    ClassSet, ClassifierSpec, FineTune, FitOutcome, Preset,
};
use vigil_core::features::{decimate_windows, select_axes, AxisSet, LabeledWindow, SensorKind};
use vigil_core::lstm::WindowSpec;
use vigil_core::nn::{Loss, TrainConfig, TrainMeta};
use vigil_core::rng::derive_seed;
use vigil_core::sim::{
    self, dataset_bundle, AnomalyKind, AnomalySpec, BundleSpec, FarmSensor, MotorSpec,
};

use crate::config::{parse_list, parse_value, render_echo, KvConfig};
use crate::envelope::{self, Artifact};
use crate::error::{CliError, Result};
use crate::fsutil;
use crate::manifest::{Manifest, ManifestEntry};
use crate::tables;

/// Farm train/test convention for the slow agricultural streams.
pub const FARM_SPLIT: f64 = 0.66;
/// Motor corpus train/test convention.
pub const MOTOR_SPLIT: f64 = 0.5;

/// Dense stride for the low-rate piezo windows that feed the transfer path:
/// 1 s windows every 64 samples, decimated 320:1 onto the 10 Hz grid.
pub const LOW_RATE_WINDOW: WindowSpec = WindowSpec {
    window_len: 3200,
    stride: 64,
};
pub const LOW_RATE_TARGET_LEN: usize = 10;

// ---------------------------------------------------------------- generate

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub seed: u64,
    pub devices: u32,
    pub duration_days: u32,
    pub sensors: Vec<FarmSensor>,
    pub anomaly_count: usize,
    pub anomaly_magnitude: f64,
    pub anomaly_kind: AnomalyKind,
    /// Per-type generation profiles; starts at each type's defaults.
    pub profiles: Vec<(FarmSensor, sim::FarmProfile)>,
    pub rpm_list: Vec<u32>,
    pub piezo_recordings: u32,
    pub piezo_seconds: f64,
    pub mems_recordings: u32,
    pub mems_seconds: f64,
    pub noise_sigma: f64,
    pub health_scale: [f64; 3],
}

impl Default for GenerateOptions {
    fn default() -> Self {
        let bundle = BundleSpec::desk_scale(0);
        GenerateOptions {
            seed: 0,
            devices: bundle.devices,
            duration_days: bundle.duration_days,
            sensors: FarmSensor::ALL.to_vec(),
            anomaly_count: bundle.farm_anomalies.count,
            anomaly_magnitude: bundle.farm_anomalies.magnitude,
            anomaly_kind: bundle.farm_anomalies.kind,
            profiles: FarmSensor::ALL
                .into_iter()
                .map(|s| (s, s.default_profile()))
                .collect(),
            rpm_list: bundle.motor_piezo.rpm_list.clone(),
            piezo_recordings: bundle.motor_piezo.recordings_per_condition,
            piezo_seconds: bundle.motor_piezo.recording_seconds,
            mems_recordings: bundle.motor_mems.recordings_per_condition,
            mems_seconds: bundle.motor_mems.recording_seconds,
            noise_sigma: bundle.motor_piezo.noise_sigma,
            health_scale: bundle.motor_piezo.health_scale,
        }
    }
}

const PROFILE_KEYS: &[&str] = &[
    "base",
    "diurnal_amplitude",
    "trend_per_day",
    "noise_sigma",
    "shifts_per_day",
    "shift_sigma",
    "shift_decay",
];

const GENERATE_KEYS: &[(&str, &[&str])] = &[
    ("run", &["seed"]),
    ("profile.temperature", PROFILE_KEYS),
    ("profile.humidity", PROFILE_KEYS),
    ("profile.soil_conductivity", PROFILE_KEYS),
    ("profile.soil_dielectric", PROFILE_KEYS),
    ("profile.soil_temperature", PROFILE_KEYS),
    ("profile.water_nitrate", PROFILE_KEYS),
    ("profile.soil_nitrate", PROFILE_KEYS),
    (
        "farm",
        &[
            "devices",
            "duration_days",
            "sensors",
            "anomaly_count",
            "anomaly_magnitude",
            "anomaly_kind",
        ],
    ),
    (
        "motor",
        &[
            "rpm_list",
            "piezo_recordings",
            "piezo_seconds",
            "mems_recordings",
            "mems_seconds",
            "noise_sigma",
            "health_scale",
        ],
    ),
];

impl GenerateOptions {
    /// Overlays a config file onto the defaults; CLI flags come afterwards.
    pub fn apply_config(&mut self, cfg: &KvConfig) -> Result<()> {
        cfg.check_known(GENERATE_KEYS)?;
        if let Some(v) = cfg.get("run", "seed") {
            self.seed = parse_value("run", "seed", v)?;
        }
        if let Some(v) = cfg.get("farm", "devices") {
            self.devices = parse_value("farm", "devices", v)?;
        }
        if let Some(v) = cfg.get("farm", "duration_days") {
            self.duration_days = parse_value("farm", "duration_days", v)?;
        }
        if let Some(v) = cfg.get("farm", "sensors") {
            self.sensors = v
                .split(',')
                .map(|s| {
                    FarmSensor::parse(s.trim())
                        .map_err(|_| CliError::usage(format!("config key 'farm.sensors': unknown sensor type '{}'", s.trim())))
                })
                .collect::<Result<Vec<_>>>()?;
        }
        if let Some(v) = cfg.get("farm", "anomaly_count") {
            self.anomaly_count = parse_value("farm", "anomaly_count", v)?;
        }
        if let Some(v) = cfg.get("farm", "anomaly_magnitude") {
            self.anomaly_magnitude = parse_value("farm", "anomaly_magnitude", v)?;
        }
        if let Some(v) = cfg.get("farm", "anomaly_kind") {
            self.anomaly_kind = AnomalyKind::parse(v)
                .map_err(|_| CliError::usage(format!("config key 'farm.anomaly_kind': unknown kind '{v}'")))?;
        }
        for (sensor, profile) in self.profiles.iter_mut() {
            let section = format!("profile.{}", sensor.name());
            if let Some(v) = cfg.get(&section, "base") {
                profile.base = parse_value(&section, "base", v)?;
            }
            if let Some(v) = cfg.get(&section, "diurnal_amplitude") {
                profile.diurnal_amplitude = parse_value(&section, "diurnal_amplitude", v)?;
            }
            if let Some(v) = cfg.get(&section, "trend_per_day") {
                profile.trend_per_day = parse_value(&section, "trend_per_day", v)?;
            }
            if let Some(v) = cfg.get(&section, "noise_sigma") {
                profile.noise_sigma = parse_value(&section, "noise_sigma", v)?;
            }
            if let Some(v) = cfg.get(&section, "shifts_per_day") {
                profile.shifts_per_day = parse_value(&section, "shifts_per_day", v)?;
            }
            if let Some(v) = cfg.get(&section, "shift_sigma") {
                profile.shift_sigma = parse_value(&section, "shift_sigma", v)?;
            }
            if let Some(v) = cfg.get(&section, "shift_decay") {
                profile.shift_decay = parse_value(&section, "shift_decay", v)?;
            }
        }
        if let Some(v) = cfg.get("motor", "rpm_list") {
            self.rpm_list = parse_list("motor", "rpm_list", v)?;
        }
        if let Some(v) = cfg.get("motor", "piezo_recordings") {
            self.piezo_recordings = parse_value("motor", "piezo_recordings", v)?;
        }
        if let Some(v) = cfg.get("motor", "piezo_seconds") {
            self.piezo_seconds = parse_value("motor", "piezo_seconds", v)?;
        }
        if let Some(v) = cfg.get("motor", "mems_recordings") {
            self.mems_recordings = parse_value("motor", "mems_recordings", v)?;
        }
        if let Some(v) = cfg.get("motor", "mems_seconds") {
            self.mems_seconds = parse_value("motor", "mems_seconds", v)?;
        }
        if let Some(v) = cfg.get("motor", "noise_sigma") {
            self.noise_sigma = parse_value("motor", "noise_sigma", v)?;
        }
        if let Some(v) = cfg.get("motor", "health_scale") {
            let scales: Vec<f64> = parse_list("motor", "health_scale", v)?;
            if scales.len() != 3 {
                return Err(CliError::usage(
                    "config key 'motor.health_scale': expected three comma-separated values",
                ));
            }
            self.health_scale = [scales[0], scales[1], scales[2]];
        }
        Ok(())
    }

    fn bundle_spec(&self) -> BundleSpec {
        let motor_seed = derive_seed(self.seed, &[2]);
        let mut piezo = MotorSpec::new(SensorKind::Piezo, motor_seed);
        piezo.rpm_list = self.rpm_list.clone();
        piezo.recordings_per_condition = self.piezo_recordings;
        piezo.recording_seconds = self.piezo_seconds;
        piezo.noise_sigma = self.noise_sigma;
        piezo.health_scale = self.health_scale;
        let mut mems = MotorSpec::new(SensorKind::Mems, motor_seed);
        mems.rpm_list = self.rpm_list.clone();
        mems.recordings_per_condition = self.mems_recordings;
        mems.recording_seconds = self.mems_seconds;
        mems.noise_sigma = self.noise_sigma;
        mems.health_scale = self.health_scale;
        BundleSpec {
            seed: self.seed,
            devices: self.devices,
            duration_days: self.duration_days,
            farm_anomalies: AnomalySpec {
                count: self.anomaly_count,
                magnitude: self.anomaly_magnitude,
                kind: self.anomaly_kind,
                earliest_fraction: 0.7,
            },
            farm_profiles: self.profiles.clone(),
            motor_piezo: piezo,
            motor_mems: mems,
        }
    }

    fn echo(&self) -> String {
        let profile_sections: Vec<(String, Vec<(String, String)>)> = self
            .profiles
            .iter()
            .map(|(sensor, p)| {
                (
                    format!("profile.{}", sensor.name()),
                    vec![
                        ("base".into(), p.base.to_string()),
                        ("diurnal_amplitude".into(), p.diurnal_amplitude.to_string()),
                        ("trend_per_day".into(), p.trend_per_day.to_string()),
                        ("noise_sigma".into(), p.noise_sigma.to_string()),
                        ("shifts_per_day".into(), p.shifts_per_day.to_string()),
                        ("shift_sigma".into(), p.shift_sigma.to_string()),
                        ("shift_decay".into(), p.shift_decay.to_string()),
                    ],
                )
            })
            .collect();
        let mut sections: Vec<(&str, Vec<(String, String)>)> = vec![
                ("run", vec![("seed".into(), self.seed.to_string())]),
                (
                    "farm",
                    vec![
                        ("devices".into(), self.devices.to_string()),
                        ("duration_days".into(), self.duration_days.to_string()),
                        (
                            "sensors".into(),
                            self.sensors.iter().map(|s| s.name()).collect::<Vec<_>>().join(","),
                        ),
                        ("anomaly_count".into(), self.anomaly_count.to_string()),
                        ("anomaly_magnitude".into(), self.anomaly_magnitude.to_string()),
                        ("anomaly_kind".into(), self.anomaly_kind.name().into()),
                    ],
                ),
                (
                    "motor",
                    vec![
                        (
                            "rpm_list".into(),
                            self.rpm_list.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(","),
                        ),
                        ("piezo_recordings".into(), self.piezo_recordings.to_string()),
                        ("piezo_seconds".into(), self.piezo_seconds.to_string()),
                        ("mems_recordings".into(), self.mems_recordings.to_string()),
                        ("mems_seconds".into(), self.mems_seconds.to_string()),
                        ("noise_sigma".into(), self.noise_sigma.to_string()),
                        (
                            "health_scale".into(),
                            self.health_scale.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
                        ),
                    ],
                ),
        ];
        for (name, entries) in &profile_sections {
            sections.push((name.as_str(), entries.clone()));
        }
        render_echo("generate", &sections)
    }
}

/// Generates the dataset tree and its manifest under `out_dir`.
pub fn generate(out_dir: &Path, opts: &GenerateOptions) -> Result<Manifest> {
    let bundle_spec = opts.bundle_spec();
    let sensor_filter: Vec<usize> = FarmSensor::ALL
        .iter()
        .enumerate()
        .filter(|(_, s)| opts.sensors.contains(s))
        .map(|(i, _)| i)
        .collect();
    if sensor_filter.is_empty() {
        return Err(CliError::usage("no farm sensors selected"));
    }
    bundle_spec
        .motor_piezo
        .validate()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let bundle = dataset_bundle(&bundle_spec)?;

    let mut manifest = Manifest::new(opts.seed);
    let farm_series = bundle.spec.devices as usize * sensor_filter.len();
    manifest.header_line("farm_series", farm_series);
    manifest.header_line("farm_split_convention", "66/34");
    manifest.header_line("motor_split_convention", "50/50");

    for device in &bundle.farm {
        for &s_idx in &sensor_filter {
            let (fs, series) = &device.series[s_idx];
            let rel = format!("farm/device{}/{}.csv", device.device, series.sensor.name());
            tables::write_series(&out_dir.join(&rel), series)?;
            let n = series.values.len();
            let train = (n as f64 * FARM_SPLIT) as usize;
            manifest.entries.push(ManifestEntry {
                path: rel,
                rows: n,
                seed: fs.seed,
                extra: vec![
                    ("sensor_type".into(), series.sensor.name().into()),
                    ("anomalies".into(), series.anomaly_indices.len().to_string()),
                    ("train_rows_66".into(), train.to_string()),
                    ("test_rows_34".into(), (n - train).to_string()),
                ],
            });
        }
    }

    for (kind_name, recordings, motor_spec) in [
        ("piezo", &bundle.piezo, &bundle.spec.motor_piezo),
        ("mems", &bundle.mems, &bundle.spec.motor_mems),
    ] {
        for rec in recordings {
            let rel = format!(
                "motor/{kind_name}/rpm{}_{}_rec{}.csv",
                rec.rpm,
                rec.label.name(),
                rec.recording_index
            );
            tables::write_recording(&out_dir.join(&rel), rec)?;
            manifest.entries.push(ManifestEntry {
                path: rel,
                rows: rec.x.len(),
                seed: derive_seed(
                    motor_spec.seed,
                    &[
                        rec.rpm as u64,
                        health_index(rec.label) as u64,
                        rec.recording_index as u64,
                    ],
                ),
                extra: vec![
                    ("rpm".into(), rec.rpm.to_string()),
                    ("label".into(), rec.label.name().into()),
                ],
            });
        }
    }

    // Window datasets: native windows per sensor kind, plus the low-rate
    // piezo windows that align with the MEMS time base for transfer. The
    // low-rate set needs a full second per window, so it is skipped for
    // shorter recordings.
    let piezo_windows = sim::motor_windows(
        &bundle.piezo,
        SensorKind::Piezo.default_window(),
        AxisSet::XZY,
    )?;
    let mems_windows = sim::motor_windows(
        &bundle.mems,
        SensorKind::Mems.default_window(),
        AxisSet::XZY,
    )?;
    let low_rate = if bundle.spec.motor_piezo.samples_per_recording() >= LOW_RATE_WINDOW.window_len
    {
        decimate_windows(
            &sim::motor_windows(&bundle.piezo, LOW_RATE_WINDOW, AxisSet::XZY)?,
            LOW_RATE_TARGET_LEN,
        )?
    } else {
        Vec::new()
    };

    let mut window_files: Vec<(&str, &Vec<_>)> = vec![
        ("windows/piezo_windows.csv", &piezo_windows),
        ("windows/mems_windows.csv", &mems_windows),
    ];
    if !low_rate.is_empty() {
        window_files.push(("windows/piezo_low_rate_windows.csv", &low_rate));
    }
    for (rel, windows) in window_files {
        tables::write_windows(&out_dir.join(rel), windows)?;
        let train = (windows.len() as f64 * MOTOR_SPLIT) as usize;
        manifest.entries.push(ManifestEntry {
            path: rel.into(),
            rows: windows.len(),
            seed: bundle.spec.motor_piezo.seed,
            extra: vec![
                ("train_rows_50".into(), train.to_string()),
                ("test_rows_50".into(), (windows.len() - train).to_string()),
            ],
        });
    }

    fsutil::write_atomic(&out_dir.join("resolved.cfg"), opts.echo().as_bytes())?;
    manifest.save(&out_dir.join("manifest.txt"))?;
    Ok(manifest)
}

fn health_index(label: vigil_core::features::Label) -> usize {
    match label {
        vigil_core::features::Label::Normal => 0,
        vigil_core::features::Label::NearFailure => 1,
        vigil_core::features::Label::Failure => 2,
        vigil_core::features::Label::NotNormal => 1,
    }
}

// ------------------------------------------------------------------ detect

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForecasterKind {
    Arima,
    Lstm,
}

impl ForecasterKind {
    pub fn name(self) -> &'static str {
        match self {
            ForecasterKind::Arima => "arima",
            ForecasterKind::Lstm => "lstm",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "arima" => Ok(ForecasterKind::Arima),
            "lstm" => Ok(ForecasterKind::Lstm),
            other => Err(CliError::usage(format!("unknown forecaster '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DetectOptions {
    pub forecaster: ForecasterKind,
    pub split: f64,
    pub threshold: f64,
    pub one_sided: bool,
    pub seed: u64,
    pub arima_p: usize,
    pub arima_d: usize,
    pub lstm_window: usize,
    pub lstm_hidden: usize,
    pub lstm_epochs: u32,
    pub lstm_batch: usize,
    pub lstm_lr: f64,
    pub plot_data: bool,
}

impl Default for DetectOptions {
    fn default() -> Self {
        let lstm = LstmForecast::default();
        let arima = ArimaConfig::default();
        DetectOptions {
            forecaster: ForecasterKind::Arima,
            split: FARM_SPLIT,
            threshold: 0.2,
            one_sided: false,
            seed: 0,
            arima_p: arima.p,
            arima_d: arima.d,
            lstm_window: lstm.window.window_len,
            lstm_hidden: lstm.hidden_dim,
            lstm_epochs: lstm.train.epochs,
            lstm_batch: lstm.train.batch_size,
            lstm_lr: lstm.train.learning_rate,
            plot_data: false,
        }
    }
}

const DETECT_KEYS: &[(&str, &[&str])] = &[
    ("run", &["seed"]),
    (
        "detect",
        &[
            "forecaster",
            "split",
            "threshold",
            "one_sided",
            "arima_p",
            "arima_d",
            "lstm_window",
            "lstm_hidden",
            "lstm_epochs",
            "lstm_batch",
            "lstm_lr",
            "plot_data",
        ],
    ),
];

impl DetectOptions {
    pub fn apply_config(&mut self, cfg: &KvConfig) -> Result<()> {
        cfg.check_known(DETECT_KEYS)?;
        if let Some(v) = cfg.get("run", "seed") {
            self.seed = parse_value("run", "seed", v)?;
        }
        if let Some(v) = cfg.get("detect", "forecaster") {
            self.forecaster = ForecasterKind::parse(v)?;
        }
        if let Some(v) = cfg.get("detect", "split") {
            self.split = parse_value("detect", "split", v)?;
        }
        if let Some(v) = cfg.get("detect", "threshold") {
            self.threshold = parse_value("detect", "threshold", v)?;
        }
        if let Some(v) = cfg.get("detect", "one_sided") {
            self.one_sided = parse_value("detect", "one_sided", v)?;
        }
        if let Some(v) = cfg.get("detect", "arima_p") {
            self.arima_p = parse_value("detect", "arima_p", v)?;
        }
        if let Some(v) = cfg.get("detect", "arima_d") {
            self.arima_d = parse_value("detect", "arima_d", v)?;
        }
        if let Some(v) = cfg.get("detect", "lstm_window") {
            self.lstm_window = parse_value("detect", "lstm_window", v)?;
        }
        if let Some(v) = cfg.get("detect", "lstm_hidden") {
            self.lstm_hidden = parse_value("detect", "lstm_hidden", v)?;
        }
        if let Some(v) = cfg.get("detect", "lstm_epochs") {
            self.lstm_epochs = parse_value("detect", "lstm_epochs", v)?;
        }
        if let Some(v) = cfg.get("detect", "lstm_batch") {
            self.lstm_batch = parse_value("detect", "lstm_batch", v)?;
        }
        if let Some(v) = cfg.get("detect", "lstm_lr") {
            self.lstm_lr = parse_value("detect", "lstm_lr", v)?;
        }
        if let Some(v) = cfg.get("detect", "plot_data") {
            self.plot_data = parse_value("detect", "plot_data", v)?;
        }
        Ok(())
    }

    pub fn rule(&self) -> AnomalyRule {
        AnomalyRule {
            threshold: self.threshold,
            denominator_floor: 1e-6,
            two_sided: !self.one_sided,
        }
    }

    fn forecaster_for(&self, series_seed: u64) -> Box<dyn Forecaster> {
        match self.forecaster {
            ForecasterKind::Arima => Box::new(RollingArima {
                config: ArimaConfig::new(self.arima_p, self.arima_d),
            }),
            ForecasterKind::Lstm => Box::new(LstmForecast {
                window: WindowSpec {
                    window_len: self.lstm_window,
                    stride: 1,
                },
                hidden_dim: self.lstm_hidden,
                train: TrainConfig {
                    epochs: self.lstm_epochs,
                    batch_size: self.lstm_batch,
                    learning_rate: self.lstm_lr,
                    seed: series_seed,
                    loss: Loss::Mse,
                },
            }),
        }
    }

    fn echo(&self) -> String {
        render_echo(
            "detect",
            &[
                ("run", vec![("seed".into(), self.seed.to_string())]),
                (
                    "detect",
                    vec![
                        ("forecaster".into(), self.forecaster.name().into()),
                        ("split".into(), self.split.to_string()),
                        ("threshold".into(), self.threshold.to_string()),
                        ("one_sided".into(), self.one_sided.to_string()),
                        ("arima_p".into(), self.arima_p.to_string()),
                        ("arima_d".into(), self.arima_d.to_string()),
                        ("lstm_window".into(), self.lstm_window.to_string()),
                        ("lstm_hidden".into(), self.lstm_hidden.to_string()),
                        ("lstm_epochs".into(), self.lstm_epochs.to_string()),
                        ("lstm_batch".into(), self.lstm_batch.to_string()),
                        ("lstm_lr".into(), self.lstm_lr.to_string()),
                        ("plot_data".into(), self.plot_data.to_string()),
                    ],
                ),
            ],
        )
    }
}

/// Per-series outcome retained for the caller.
#[derive(Debug)]
pub struct SeriesOutcome {
    pub device: u32,
    pub sensor: FarmSensor,
    pub result: std::result::Result<vigil_core::anomaly::AnomalyReport, String>,
}

#[derive(Debug)]
pub struct DetectSummary {
    pub outcomes: Vec<SeriesOutcome>,
    pub aggregate_rows: usize,
}

impl DetectSummary {
    pub fn all_failed(&self) -> bool {
        self.outcomes.iter().all(|o| o.result.is_err())
    }

    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| o.result.is_err()).count()
    }
}

/// Runs detection over every farm series under `data_dir`, writing one
/// report per series plus the per-type aggregate table.
///
/// Per-series failures are reported and skipped; the run only fails as a
/// whole when every series fails.
pub fn detect_all(data_dir: &Path, out_dir: &Path, opts: &DetectOptions) -> Result<DetectSummary> {
    let farm_dir = data_dir.join("farm");
    let mut series_paths: Vec<(u32, PathBuf)> = Vec::new();
    let devices = std::fs::read_dir(&farm_dir).map_err(crate::error::at_path(&farm_dir))?;
    for entry in devices {
        let entry = entry.map_err(crate::error::at_path(&farm_dir))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(num) = name.strip_prefix("device") {
            if let Ok(device) = num.parse::<u32>() {
                let dir = entry.path();
                let files = std::fs::read_dir(&dir).map_err(crate::error::at_path(&dir))?;
                for f in files {
                    let f = f.map_err(crate::error::at_path(&dir))?;
                    if f.path().extension().is_some_and(|e| e == "csv") {
                        series_paths.push((device, f.path()));
                    }
                }
            }
        }
    }
    if series_paths.is_empty() {
        return Err(CliError::data(format!(
            "no farm series under {}",
            farm_dir.display()
        )));
    }
    series_paths.sort();

    let rule = opts.rule();
    rule.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let mut outcomes = Vec::new();
    for (device, path) in &series_paths {
        let outcome = match tables::read_series(path) {
            Err(e) => SeriesOutcome {
                device: *device,
                sensor: FarmSensor::Temperature,
                result: Err(e.to_string()),
            },
            Ok(series) => {
                let sensor_idx = FarmSensor::ALL.iter().position(|s| *s == series.sensor).unwrap();
                let series_seed = derive_seed(opts.seed, &[*device as u64, sensor_idx as u64]);
                let forecaster = opts.forecaster_for(series_seed);
                let result = anomaly::detect(&series.values, forecaster.as_ref(), opts.split, &rule);
                match result {
                    Ok(report) => {
                        let rel = format!("reports/device{}_{}.csv", device, series.sensor.name());
                        tables::write_anomaly_report(
                            &out_dir.join(&rel),
                            &report,
                            series.cadence_minutes,
                        )?;
                        if opts.plot_data {
                            let rel = format!("plots/device{}_{}.csv", device, series.sensor.name());
                            tables::write_plot_data(
                                &out_dir.join(&rel),
                                report.train_len,
                                &series.values[report.train_len..],
                                &report.predictions,
                            )?;
                        }
                        SeriesOutcome {
                            device: *device,
                            sensor: series.sensor,
                            result: Ok(report),
                        }
                    }
                    Err(e) => SeriesOutcome {
                        device: *device,
                        sensor: series.sensor,
                        result: Err(e.to_string()),
                    },
                }
            }
        };
        outcomes.push(outcome);
    }

    // Aggregate per sensor type, shaped like the per-deployment summaries:
    // sensor type, average test RMSE, anomaly count.
    let mut by_type: BTreeMap<&'static str, (usize, f64, usize)> = BTreeMap::new();
    for o in &outcomes {
        if let Ok(report) = &o.result {
            let slot = by_type.entry(o.sensor.name()).or_insert((0, 0.0, 0));
            slot.0 += 1;
            slot.1 += report.rmse;
            slot.2 += report.anomaly_count();
        }
    }
    let rows: Vec<tables::AggregateRow> = by_type
        .iter()
        .map(|(name, (count, rmse_sum, anomalies))| tables::AggregateRow {
            sensor_type: name.to_string(),
            forecaster: opts.forecaster.name().to_string(),
            series_count: *count,
            average_test_rmse: rmse_sum / *count as f64,
            anomaly_count: *anomalies,
        })
        .collect();
    tables::write_aggregate(&out_dir.join("aggregate.csv"), &rows)?;
    fsutil::write_atomic(&out_dir.join("resolved.cfg"), opts.echo().as_bytes())?;

    Ok(DetectSummary {
        outcomes,
        aggregate_rows: rows.len(),
    })
}

// ---------------------------------------------------------------- classify

#[derive(Debug, Clone)]
pub struct ClassifyOptions {
    pub windows_path: PathBuf,
    pub preset: Option<Preset>,
    pub axes: Option<AxisSet>,
    pub hidden: Option<Vec<usize>>,
    pub epochs: Option<u32>,
    pub batch: Option<usize>,
    pub learning_rate: Option<f64>,
    pub normalize: Option<bool>,
    pub seed: u64,
    pub binary: bool,
    pub augment: Option<usize>,
    pub grid: bool,
    pub rpms: Option<Vec<u32>>,
    pub decimate: Option<usize>,
    pub transfer_from: Option<PathBuf>,
    pub fine_tune_epochs: u32,
    pub freeze_hidden: bool,
}

impl ClassifyOptions {
    pub fn new(windows_path: PathBuf) -> Self {
        ClassifyOptions {
            windows_path,
            preset: None,
            axes: None,
            hidden: None,
            epochs: None,
            batch: None,
            learning_rate: None,
            normalize: None,
            seed: 0,
            binary: false,
            augment: None,
            grid: false,
            rpms: None,
            decimate: None,
            transfer_from: None,
            fine_tune_epochs: 10,
            freeze_hidden: false,
        }
    }

    /// Resolves preset + overrides into concrete pipeline settings.
    fn resolved(&self) -> (AxisSet, bool, Vec<usize>, TrainConfig) {
        let plan = self.preset.unwrap_or(Preset::Normalize).plan();
        let axes = self.axes.unwrap_or(plan.axes);
        let normalize = self.normalize.unwrap_or(plan.normalize);
        let hidden = self.hidden.clone().unwrap_or(plan.hidden);
        let cfg = TrainConfig {
            epochs: self.epochs.unwrap_or(plan.epochs),
            batch_size: self.batch.unwrap_or(plan.batch_size),
            learning_rate: self.learning_rate.unwrap_or(0.02),
            seed: self.seed,
            loss: Loss::CrossEntropy,
        };
        (axes, normalize, hidden, cfg)
    }

    fn echo(&self) -> String {
        let (axes, normalize, hidden, cfg) = self.resolved();
        render_echo(
            "classify",
            &[
                ("run", vec![("seed".into(), self.seed.to_string())]),
                (
                    "classify",
                    vec![
                        ("windows".into(), self.windows_path.display().to_string()),
                        (
                            "preset".into(),
                            self.preset.unwrap_or(Preset::Normalize).name().into(),
                        ),
                        ("axes".into(), axes.encode()),
                        ("normalize".into(), normalize.to_string()),
                        (
                            "hidden".into(),
                            hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","),
                        ),
                        ("epochs".into(), cfg.epochs.to_string()),
                        ("batch_size".into(), cfg.batch_size.to_string()),
                        ("learning_rate".into(), cfg.learning_rate.to_string()),
                        ("binary".into(), self.binary.to_string()),
                        (
                            "augment".into(),
                            self.augment.map(|a| a.to_string()).unwrap_or_else(|| "none".into()),
                        ),
                        ("grid".into(), self.grid.to_string()),
                        (
                            "rpms".into(),
                            self.rpms
                                .as_ref()
                                .map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))
                                .unwrap_or_else(|| "all".into()),
                        ),
                        (
                            "decimate".into(),
                            self.decimate.map(|d| d.to_string()).unwrap_or_else(|| "none".into()),
                        ),
                        (
                            "transfer_from".into(),
                            self.transfer_from
                                .as_ref()
                                .map(|p| p.display().to_string())
                                .unwrap_or_else(|| "none".into()),
                        ),
                        ("fine_tune_epochs".into(), self.fine_tune_epochs.to_string()),
                        ("freeze_hidden".into(), self.freeze_hidden.to_string()),
                    ],
                ),
            ],
        )
    }
}

#[derive(Debug)]
pub struct ClassifySummary {
    pub accuracy: Option<f64>,
    pub grid_rows: usize,
}

/// Runs one classification experiment and writes its artifacts.
pub fn classify(out_dir: &Path, opts: &ClassifyOptions) -> Result<ClassifySummary> {
    let (axes, normalize, hidden, cfg) = opts.resolved();
    let mut windows = tables::read_windows(&opts.windows_path)?;

    if let Some(rpms) = &opts.rpms {
        windows.retain(|w| rpms.contains(&w.rpm));
        if windows.is_empty() {
            return Err(CliError::data("rpm filter left no windows"));
        }
    }
    if windows[0].axes != axes {
        windows = select_axes(&windows, axes).map_err(|e| CliError::usage(e.to_string()))?;
    }
    if let Some(target) = opts.decimate {
        windows = decimate_windows(&windows, target).map_err(|e| CliError::usage(e.to_string()))?;
    }
    if opts.binary {
        windows = binarize(&windows);
    }
    let classes = if opts.binary { ClassSet::Binary } else { ClassSet::ThreeWay };
    let spec = ClassifierSpec {
        hidden,
        classes,
        normalize,
        train_fraction: 0.7,
    };

    // Clamp the batch size against the smallest training split this run
    // will create; the trainer itself rejects oversized batches.
    let mut cfg = cfg;
    let smallest_train = if opts.grid {
        let mut rpms: Vec<u32> = windows.iter().map(|w| w.rpm).collect();
        rpms.sort_unstable();
        rpms.dedup();
        rpms.iter()
            .map(|&rpm| {
                let n = windows.iter().filter(|w| w.rpm == rpm).count();
                (n as f64 * spec.train_fraction) as usize
            })
            .min()
            .unwrap_or(1)
    } else {
        (windows.len() as f64 * spec.train_fraction) as usize
    };
    cfg.batch_size = cfg.batch_size.min(smallest_train.max(1));

    // The echo ends inside [classify], so this lands in that section.
    let mut echo = opts.echo();
    let _ = writeln!(echo, "effective_batch_size = {}", cfg.batch_size);
    fsutil::write_atomic(&out_dir.join("resolved.cfg"), echo.as_bytes())?;

    if opts.grid {
        let mut rpms: Vec<u32> = windows.iter().map(|w| w.rpm).collect();
        rpms.sort_unstable();
        rpms.dedup();
        let groups: Vec<(u32, Vec<LabeledWindow>)> = rpms
            .iter()
            .map(|&rpm| {
                (
                    rpm,
                    windows.iter().filter(|w| w.rpm == rpm).cloned().collect(),
                )
            })
            .collect();
        let grid = rpm_generalization_grid(&groups, &cfg, &spec, opts.augment)?;
        tables::write_grid(&out_dir.join("grid.csv"), &grid)?;
        return Ok(ClassifySummary {
            accuracy: None,
            grid_rows: grid.rows.len(),
        });
    }

    let outcome: FitOutcome = if let Some(source_path) = &opts.transfer_from {
        let source = match envelope::load(source_path)? {
            Artifact::Classifier { classifier, .. } => classifier,
            other => {
                return Err(CliError::data(format!(
                    "{}: expected a defect_classifier artifact, found {}",
                    source_path.display(),
                    other.type_name()
                )))
            }
        };
        if source.classes != classes {
            return Err(CliError::usage(format!(
                "source classifier is {} but this run is {}",
                source.classes.name(),
                classes.name()
            )));
        }
        // Reconcile dimensionality through uniform decimation when the
        // target windows are wider than the source encoder.
        let src_dim = source.encoder.dim();
        let tgt_dim = windows[0].features.len();
        if tgt_dim != src_dim {
            let per_axis_src = src_dim / axes.len();
            let per_axis_tgt = tgt_dim / axes.len();
            if per_axis_tgt % per_axis_src.max(1) == 0 && per_axis_tgt > per_axis_src {
                windows = decimate_windows(&windows, per_axis_src)
                    .map_err(|e| CliError::usage(e.to_string()))?;
            } else {
                return Err(CliError::numeric(format!(
                    "irreconcilable dimensionality: target windows have {tgt_dim} features, source encoder expects {src_dim}"
                )));
            }
        }
        let fine_tune = if opts.fine_tune_epochs == 0 {
            None
        } else {
            Some(FineTune {
                cfg: TrainConfig {
                    epochs: opts.fine_tune_epochs,
                    learning_rate: cfg.learning_rate / 10.0,
                    ..cfg.clone()
                },
                freeze_hidden: opts.freeze_hidden,
            })
        };
        transfer(&source, &windows, fine_tune.as_ref())?
    } else if let Some(count) = opts.augment {
        // Split first so interpolants never straddle train and test.
        let (train, test) = split_windows(&windows, spec.train_fraction, cfg.seed);
        let augmented = vigil_core::features::augment(&train, count, derive_seed(cfg.seed, &[0xa]))?;
        let fit = classifier::fit_on(&augmented.windows, &cfg, &spec)?;
        FitOutcome {
            test_windows: test,
            ..fit
        }
    } else {
        train_dnn_r(&windows, &cfg, &spec)?
    };

    let meta = TrainMeta {
        seed: cfg.seed,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        loss: cfg.loss,
        final_loss: outcome.loss_history.last().copied().unwrap_or(f64::NAN),
    };
    envelope::save(
        &out_dir.join("model.vgl"),
        &Artifact::Classifier {
            classifier: outcome.classifier.clone(),
            meta,
        },
    )?;

    let accuracy = if outcome.test_windows.is_empty() {
        None
    } else {
        let (matrix, accuracy) = confusion(&outcome.classifier, &outcome.test_windows)?;
        tables::write_confusion(&out_dir.join("confusion.csv"), &matrix, accuracy)?;
        Some(accuracy)
    };
    if !outcome.loss_history.is_empty() {
        let mut text = String::from("epoch,loss\n");
        for (i, l) in outcome.loss_history.iter().enumerate() {
            let _ = writeln!(text, "{i},{l}");
        }
        fsutil::write_atomic(&out_dir.join("loss_history.csv"), text.as_bytes())?;
    }
    Ok(ClassifySummary {
        accuracy,
        grid_rows: 0,
    })
}

/// Loads any artifact and renders its metadata.
pub fn inspect(path: &Path) -> Result<String> {
    let artifact = envelope::load(path)?;
    Ok(envelope::describe(&artifact))
}
