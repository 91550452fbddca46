//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured numbers and asserting its tolerance and runtime budget.
//!
//! The suite combines exact property checks (gradients, least squares,
//! confusion tallies, byte-level determinism) with ordering claims measured
//! on the seeded synthetic corpus (forecaster ranking, transfer gain,
//! augmentation gain, feature selection, binary relaxation).

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use vigil_core::anomaly::{detect, AnomalyRule, LstmForecast, RollingArima};
use vigil_core::arima::{fit_ar, ArimaConfig};
use vigil_core::classifier::{
    confusion, rpm_generalization_grid, train_dnn_r, transfer, ClassSet, ClassifierSpec,
    ConfusionMatrix, FineTune,
};
use vigil_core::features::{decimate_windows, select_axes, AxisSet, SensorKind};
use vigil_core::lstm::{LstmModel, WindowSpec};
use vigil_core::nn::{DenseNetwork, Loss, OutputActivation, TrainConfig};
use vigil_core::rng::Rng;
use vigil_core::sim::{self, dataset_bundle, BundleSpec, DatasetBundle, BINARY_RPMS, GRID_RPMS};

const MASTER_SEED: u64 = 42;

fn bundle() -> &'static DatasetBundle {
    static BUNDLE: OnceLock<DatasetBundle> = OnceLock::new();
    BUNDLE.get_or_init(|| dataset_bundle(&BundleSpec::desk_scale(MASTER_SEED)).unwrap())
}

fn classify_hyper() -> TrainConfig {
    TrainConfig {
        epochs: 50,
        batch_size: 50,
        learning_rate: 0.01,
        seed: MASTER_SEED,
        loss: Loss::CrossEntropy,
    }
}

/// Grid models need a few more epochs to converge on every speed.
fn grid_hyper() -> TrainConfig {
    TrainConfig {
        epochs: 80,
        learning_rate: 0.02,
        ..classify_hyper()
    }
}

fn assert_budget(name: &str, elapsed: Duration, budget: Duration) {
    assert!(
        elapsed <= budget,
        "{name} took {elapsed:?}, over the {budget:?} budget"
    );
}

/// Test-local central-difference oracle, independent of the library's
/// gradient-check implementation.
fn fd_gradient(f: &mut dyn FnMut(&[f64]) -> f64, params: &[f64], h: f64) -> Vec<f64> {
    let mut scratch = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = scratch[i];
        scratch[i] = orig + h;
        let plus = f(&scratch);
        scratch[i] = orig - h;
        let minus = f(&scratch);
        scratch[i] = orig;
        out.push((plus - minus) / (2.0 * h));
    }
    out
}

fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

#[test]
fn acceptance_01_gradient_correctness() {
    let start = Instant::now();
    let mut rng = Rng::seed_from(101);
    let mut worst = 0.0f64;

    // 30 dense networks, up to 4 layers and 16 units.
    for case in 0..30u64 {
        let n_hidden = rng.below(3);
        let mut sizes = vec![2 + rng.below(6)];
        for _ in 0..n_hidden {
            sizes.push(2 + rng.below(15));
        }
        sizes.push(2 + rng.below(3));
        let (loss, act) = if case % 2 == 0 {
            (Loss::CrossEntropy, OutputActivation::Softmax)
        } else {
            (Loss::Mse, OutputActivation::Identity)
        };
        let net = DenseNetwork::seeded(&sizes, act, 500 + case).unwrap();
        let out_dim = *sizes.last().unwrap();
        let inputs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..sizes[0]).map(|_| rng.uniform(-1.0, 1.0)).collect())
            .collect();
        let targets: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                if loss == Loss::CrossEntropy {
                    let mut t = vec![0.0; out_dim];
                    t[rng.below(out_dim)] = 1.0;
                    t
                } else {
                    (0..out_dim).map(|_| rng.uniform(-1.0, 1.0)).collect()
                }
            })
            .collect();
        let analytic = net.flatten_grads(&net.backprop(&inputs, &targets, loss).unwrap());
        let params = net.params();
        let mut probe = net.clone();
        let numeric = fd_gradient(
            &mut |p| {
                probe.set_params(p).unwrap();
                probe.batch_loss(&inputs, &targets, loss).unwrap()
            },
            &params,
            1e-6,
        );
        worst = worst.max(max_rel_err(&analytic, &numeric));
    }

    // 20 LSTM models, window <= 8, hidden <= 8. The analytic gradient is
    // extracted through the public training step: with one window, one
    // epoch, and unit learning rate, the parameter delta equals minus the
    // squared-error gradient of that window.
    for case in 0..20u64 {
        let hidden = 2 + rng.below(7);
        let window_len = 2 + rng.below(7);
        let model = LstmModel::seeded(1, hidden, 900 + case).unwrap();
        // window_len inputs, one target, one pad sample; stride 2 leaves a
        // single training window starting at 0.
        let raw: Vec<f64> = (0..window_len + 2).map(|_| rng.uniform(-1.5, 1.5)).collect();
        let analytic = {
            let spec = WindowSpec::new(window_len, 2).unwrap();
            let cfg = TrainConfig {
                epochs: 1,
                batch_size: 1,
                learning_rate: 1.0,
                seed: 900 + case,
                loss: Loss::Mse,
            };
            let trained = vigil_core::lstm::train_lstm_sized(&raw, spec, hidden, &cfg).unwrap();
            let before = model.params();
            let after = trained.model.params();
            before.iter().zip(&after).map(|(b, a)| b - a).collect::<Vec<f64>>()
        };
        let params = model.params();
        // FD oracle in the same z-scored space the trainer uses.
        let n = raw.len() as f64;
        let mean = raw.iter().sum::<f64>() / n;
        let var = raw.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let std = if var.sqrt() < 1e-12 { 1.0 } else { var.sqrt() };
        let norm_w: Vec<f64> = raw[..window_len].iter().map(|&x| (x - mean) / std).collect();
        let norm_t = (raw[window_len] - mean) / std;
        let numeric = fd_gradient(
            &mut |p| {
                let probe = LstmModel::from_params(1, hidden, p).unwrap();
                let pred = probe.predict_window(&norm_w).unwrap();
                (pred - norm_t) * (pred - norm_t)
            },
            &params,
            1e-5,
        );
        worst = worst.max(max_rel_err(&analytic, &numeric));
    }

    let elapsed = start.elapsed();
    let pass = worst < 1e-4;
    println!(
        "acceptance 01 gradient correctness: {} (max relative error {worst:.3e} over 50 models, {elapsed:?})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "max relative error {worst}");
    assert_budget("acceptance 01", elapsed, Duration::from_secs(60));
}

#[test]
fn acceptance_02_ar_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = Rng::seed_from(202);
    let mut worst = 0.0f64;

    for _ in 0..100 {
        let p = 1 + rng.below(10);
        let len = (p + 50) + rng.below(2000 - p - 50);
        // Stationary AR-ish series with noise.
        let c1 = rng.uniform(-0.6, 0.6);
        let c2 = rng.uniform(-0.3, 0.3);
        let mut series = vec![rng.normal(0.0, 1.0), rng.normal(0.0, 1.0)];
        for t in 2..len {
            let v = c1 * series[t - 1] + c2 * series[t - 2] + rng.normal(0.5, 1.0);
            series.push(v);
        }

        let model = fit_ar(&series, &ArimaConfig::new(p, 0)).unwrap();

        // Independent oracle: explicit normal equations solved by Cholesky.
        let n_cols = p + 1;
        let rows = series.len() - p;
        let mut gram = vec![0.0; n_cols * n_cols];
        let mut rhs = vec![0.0; n_cols];
        for t in 0..rows {
            let mut row = vec![0.0; n_cols];
            for (j, slot) in row.iter_mut().enumerate().take(p) {
                *slot = series[t + p - 1 - j];
            }
            row[p] = 1.0;
            for i in 0..n_cols {
                rhs[i] += row[i] * series[t + p];
                for j in 0..n_cols {
                    gram[i * n_cols + j] += row[i] * row[j];
                }
            }
        }
        let n = n_cols;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = gram[i * n + j];
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = if i == j { sum.sqrt() } else { sum / l[j * n + j] };
            }
        }
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = rhs[i];
            for k in 0..i {
                acc -= l[i * n + k] * y[k];
            }
            y[i] = acc / l[i * n + i];
        }
        let mut beta = vec![0.0; n];
        for i in (0..n).rev() {
            let mut acc = y[i];
            for k in i + 1..n {
                acc -= l[k * n + i] * beta[k];
            }
            beta[i] = acc / l[i * n + i];
        }

        for (a, b) in model.coefficients.iter().zip(&beta[..p]) {
            worst = worst.max((a - b).abs());
        }
        worst = worst.max((model.intercept - beta[p]).abs());
    }

    let elapsed = start.elapsed();
    let pass = worst < 1e-9;
    println!(
        "acceptance 02 AR oracle equivalence: {} (max coefficient gap {worst:.3e} over 100 series, {elapsed:?})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "max coefficient gap {worst}");
    assert_budget("acceptance 02", elapsed, Duration::from_secs(60));
}

#[test]
fn acceptance_03_anomaly_recall_and_precision() {
    let start = Instant::now();
    let device = &bundle().farm[0];
    let rule = AnomalyRule::default();
    assert!((rule.threshold - 0.2).abs() < 1e-15);

    let mut pass = true;
    let mut detail = String::new();
    for (s_idx, (fs, series)) in device.series.iter().enumerate() {
        assert_eq!(series.anomaly_indices.len(), 5);
        let forecasters: [(&str, Box<dyn vigil_core::anomaly::Forecaster>); 2] = [
            ("arima", Box::new(RollingArima::default())),
            (
                "lstm",
                Box::new(LstmForecast {
                    train: TrainConfig {
                        seed: fs.seed,
                        ..LstmForecast::default().train
                    },
                    ..LstmForecast::default()
                }),
            ),
        ];
        for (name, forecaster) in forecasters {
            let report = detect(&series.values, forecaster.as_ref(), 0.66, &rule).unwrap();
            let recalled = series
                .anomaly_indices
                .iter()
                .filter(|idx| report.flagged.iter().any(|f| f.index == **idx))
                .count();
            let false_alarms = report
                .flagged
                .iter()
                .filter(|f| !series.anomaly_indices.contains(&f.index))
                .count();
            let clean = report.test_len - series.anomaly_indices.len();
            let fp_rate = false_alarms as f64 / clean as f64;
            let ok = recalled == 5 && fp_rate < 0.02;
            if !ok {
                pass = false;
            }
            detail = format!(
                "last: {} {} recall {recalled}/5 fp {fp_rate:.4}",
                series.sensor.name(),
                name
            );
            assert_eq!(recalled, 5, "{} {}: missed spikes", series.sensor.name(), name);
            assert!(
                fp_rate < 0.02,
                "{} {}: false-positive rate {fp_rate}",
                series.sensor.name(),
                name
            );
        }
        let _ = s_idx;
    }

    let elapsed = start.elapsed();
    println!(
        "acceptance 03 anomaly recall/precision: {} (7 sensors x 2 forecasters, {detail}, {elapsed:?})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
    assert_budget("acceptance 03", elapsed, Duration::from_secs(300));
}

#[test]
fn acceptance_04_forecaster_ordering() {
    let start = Instant::now();

    // Run the real detect pipeline over a generated dataset tree, once per
    // forecaster, and compare the per-type aggregates it writes.
    let base = std::env::temp_dir().join(format!("vigil-acc04-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&base);
    let data = base.join("data");
    let gen = vigil::pipeline::GenerateOptions {
        seed: MASTER_SEED,
        ..vigil::pipeline::GenerateOptions::default()
    };
    vigil::pipeline::generate(&data, &gen).unwrap();

    let mut averages: Vec<std::collections::BTreeMap<String, f64>> = Vec::new();
    for forecaster in [
        vigil::pipeline::ForecasterKind::Arima,
        vigil::pipeline::ForecasterKind::Lstm,
    ] {
        let opts = vigil::pipeline::DetectOptions {
            forecaster,
            seed: MASTER_SEED,
            ..vigil::pipeline::DetectOptions::default()
        };
        let out_dir = base.join(forecaster.name());
        let summary = vigil::pipeline::detect_all(&data, &out_dir, &opts).unwrap();
        assert_eq!(summary.failures(), 0);
        assert_eq!(summary.aggregate_rows, 7);

        let aggregate = std::fs::read_to_string(out_dir.join("aggregate.csv")).unwrap();
        let mut by_type = std::collections::BTreeMap::new();
        for line in aggregate.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            by_type.insert(fields[0].to_string(), fields[3].parse::<f64>().unwrap());
        }
        averages.push(by_type);
    }

    let (arima, lstm) = (&averages[0], &averages[1]);
    let mut wins = 0;
    let mut lines = Vec::new();
    for (name, arima_rmse) in arima {
        let lstm_rmse = lstm[name];
        if lstm_rmse < *arima_rmse {
            wins += 1;
        }
        lines.push(format!("{name}: arima {arima_rmse:.4} lstm {lstm_rmse:.4}"));
    }
    let _ = std::fs::remove_dir_all(&base);

    let elapsed = start.elapsed();
    let pass = wins >= 5;
    println!(
        "acceptance 04 forecaster ordering: {} (lstm wins {wins}/7; {}; {elapsed:?})",
        if pass { "PASS" } else { "FAIL" },
        lines.join("; ")
    );
    assert!(pass, "lstm wins only {wins}/7");
    assert_budget("acceptance 04", elapsed, Duration::from_secs(900));
}

#[test]
fn acceptance_05_transfer_ordering() {
    let start = Instant::now();
    let corpus = bundle();
    let hyper = classify_hyper();
    let spec = ClassifierSpec::default();

    // Source: piezo windows on the MEMS time base (1 s, decimated 320:1).
    let low_rate = decimate_windows(
        &sim::motor_windows(
            &corpus.piezo,
            WindowSpec { window_len: 3200, stride: 64 },
            AxisSet::XZ,
        )
        .unwrap(),
        10,
    )
    .unwrap();
    let source = train_dnn_r(&low_rate, &hyper, &spec).unwrap();

    // Target: a scarce MEMS subsample (<= 2000 windows).
    let mems = select_axes(
        &sim::motor_windows(&corpus.mems, SensorKind::Mems.default_window(), AxisSet::XZY).unwrap(),
        AxisSet::XZ,
    )
    .unwrap();
    let mut rng = Rng::seed_from(MASTER_SEED ^ 0x5a5a);
    let mut idx: Vec<usize> = (0..mems.len()).collect();
    rng.shuffle(&mut idx);
    let target: Vec<_> = idx[..600].iter().map(|&i| mems[i].clone()).collect();
    assert!(target.len() <= 2000);

    let dnn_r = train_dnn_r(&target, &hyper, &spec).unwrap();
    let (_, acc_r) = confusion(&dnn_r.classifier, &dnn_r.test_windows).unwrap();

    let tune = FineTune::from_fresh(&hyper, 10);
    let dnn_tl = transfer(&source.classifier, &target, Some(&tune)).unwrap();
    let (_, acc_tl) = confusion(&dnn_tl.classifier, &dnn_tl.test_windows).unwrap();

    let gain = acc_tl - acc_r;
    let elapsed = start.elapsed();
    let pass = gain >= 0.03;
    println!(
        "acceptance 05 transfer ordering: {} (DNN-R {acc_r:.4}, DNN-TL {acc_tl:.4}, gain {gain:+.4} on {} mems windows, {elapsed:?})",
        if pass { "PASS" } else { "FAIL" },
        target.len()
    );
    assert!(pass, "transfer gain {gain}");
    assert_budget("acceptance 05", elapsed, Duration::from_secs(600));
}

fn piezo_xz_windows() -> Vec<vigil_core::features::LabeledWindow> {
    select_axes(
        &sim::motor_windows(
            &bundle().piezo,
            SensorKind::Piezo.default_window(),
            AxisSet::XZY,
        )
        .unwrap(),
        AxisSet::XZ,
    )
    .unwrap()
}

#[test]
fn acceptance_06_augmentation_ordering() {
    let start = Instant::now();
    let windows = piezo_xz_windows();
    let groups: Vec<(u32, Vec<_>)> = GRID_RPMS
        .iter()
        .map(|&rpm| (rpm, windows.iter().filter(|w| w.rpm == rpm).cloned().collect()))
        .collect();

    let grid = rpm_generalization_grid(&groups, &grid_hyper(), &ClassifierSpec::default(), Some(100)).unwrap();
    let singles: Vec<f64> = grid
        .rows
        .iter()
        .filter(|r| r.train_rpm.is_some())
        .map(|r| r.average)
        .collect();
    let augmented = grid
        .rows
        .iter()
        .find(|r| r.train_rpm.is_none())
        .expect("augmented row")
        .average;
    let best = singles.iter().cloned().fold(f64::MIN, f64::max);
    let worst = singles.iter().cloned().fold(f64::MAX, f64::min);

    let elapsed = start.elapsed();
    let pass = augmented >= best - 0.02 && augmented > worst + 0.05;
    println!(
        "acceptance 06 augmentation ordering: {} (augmented {augmented:.4}, best single {best:.4}, worst single {worst:.4}, {elapsed:?})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(augmented >= best - 0.02, "augmented {augmented} vs best {best}");
    assert!(augmented > worst + 0.05, "augmented {augmented} vs worst {worst}");
    assert_budget("acceptance 06", elapsed, Duration::from_secs(1200));
}

#[test]
fn acceptance_07_feature_selection_direction() {
    let start = Instant::now();
    let all_axes = sim::motor_windows(
        &bundle().piezo,
        SensorKind::Piezo.default_window(),
        AxisSet::XZY,
    )
    .unwrap();
    let hyper = classify_hyper();
    let spec = ClassifierSpec::default();

    let xz = select_axes(&all_axes, AxisSet::XZ).unwrap();
    let out_xz = train_dnn_r(&xz, &hyper, &spec).unwrap();
    let (matrix_xz, acc_xz) = confusion(&out_xz.classifier, &out_xz.test_windows).unwrap();
    let out_xzy = train_dnn_r(&all_axes, &hyper, &spec).unwrap();
    let (_, acc_xzy) = confusion(&out_xzy.classifier, &out_xzy.test_windows).unwrap();

    // The XZ matrix feeds the confusion-validity criterion too.
    check_matrix_validity(&matrix_xz);

    let elapsed = start.elapsed();
    let pass = acc_xz >= acc_xzy;
    println!(
        "acceptance 07 feature selection direction: {} (XZ {acc_xz:.4} vs XZY {acc_xzy:.4}, {elapsed:?})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "XZ {acc_xz} < XZY {acc_xzy}");
    assert_budget("acceptance 07", elapsed, Duration::from_secs(600));
}

#[test]
fn acceptance_08_binary_relaxation_direction() {
    let start = Instant::now();
    let windows = piezo_xz_windows();
    let spec3 = ClassifierSpec::default();
    let spec2 = ClassifierSpec {
        classes: ClassSet::Binary,
        ..ClassifierSpec::default()
    };

    let mut groups3 = Vec::new();
    let mut groups2 = Vec::new();
    for &rpm in BINARY_RPMS.iter() {
        let g: Vec<_> = windows.iter().filter(|w| w.rpm == rpm).cloned().collect();
        groups2.push((rpm, vigil_core::classifier::binarize(&g)));
        groups3.push((rpm, g));
    }
    let grid3 = rpm_generalization_grid(&groups3, &grid_hyper(), &spec3, None).unwrap();
    let grid2 = rpm_generalization_grid(&groups2, &grid_hyper(), &spec2, None).unwrap();
    let avg3 = grid3.rows.iter().map(|r| r.average).sum::<f64>() / grid3.rows.len() as f64;
    let avg2 = grid2.rows.iter().map(|r| r.average).sum::<f64>() / grid2.rows.len() as f64;

    let elapsed = start.elapsed();
    let pass = avg2 > avg3;
    println!(
        "acceptance 08 binary relaxation direction: {} (binary {avg2:.4} vs three-class {avg3:.4} on the 5-RPM corpus, {elapsed:?})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "binary {avg2} vs three-class {avg3}");
    assert_budget("acceptance 08", elapsed, Duration::from_secs(600));
}

fn check_matrix_validity(matrix: &ConfusionMatrix) {
    for (counts, rates) in matrix.counts().iter().zip(matrix.rates()) {
        if counts.iter().sum::<u64>() > 0 {
            let sum: f64 = rates.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-9, "row rates sum to {sum}");
        }
    }
}

#[test]
fn acceptance_09_confusion_matrix_validity() {
    let start = Instant::now();

    // A real emitted matrix from a trained classifier.
    let windows = piezo_xz_windows();
    let subset: Vec<_> = windows.iter().filter(|w| w.rpm == 300).cloned().collect();
    let outcome = train_dnn_r(&subset, &classify_hyper(), &ClassifierSpec::default()).unwrap();
    let (matrix, accuracy) = confusion(&outcome.classifier, &outcome.test_windows).unwrap();
    check_matrix_validity(&matrix);

    // Brute-force tally oracle over the same test windows, bitwise.
    let mut oracle = vec![vec![0u64; 3]; 3];
    let mut correct = 0u64;
    for w in &outcome.test_windows {
        let truth = outcome.classifier.classes.index_of(w.label).unwrap();
        let pred = vigil_core::classifier::predict(&outcome.classifier, &w.features).unwrap();
        oracle[truth][pred.class_index] += 1;
        if truth == pred.class_index {
            correct += 1;
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(matrix.counts()[i][j], oracle[i][j], "cell ({i}, {j})");
        }
    }
    let oracle_accuracy = correct as f64 / outcome.test_windows.len() as f64;
    assert_eq!(accuracy.to_bits(), oracle_accuracy.to_bits());

    // And on randomized tallies across both class sets.
    let mut rng = Rng::seed_from(909);
    for classes in [ClassSet::ThreeWay, ClassSet::Binary] {
        let mut m = ConfusionMatrix::new(classes);
        for _ in 0..1000 {
            m.record(rng.below(classes.len()), rng.below(classes.len()));
        }
        check_matrix_validity(&m);
    }

    let elapsed = start.elapsed();
    println!(
        "acceptance 09 confusion-matrix validity: PASS (rows normalized, tally bitwise-equal, accuracy {accuracy:.4}, {elapsed:?})"
    );
    assert_budget("acceptance 09", elapsed, Duration::from_secs(300));
}

// ------------------------------------------------------------ determinism

fn run_cli_in(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_vigil"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn vigil")
}

fn collect_files(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut stack = vec![root.to_path_buf()];
    let mut files = Vec::new();
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                files.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn acceptance_10_pipeline_determinism() {
    let start = Instant::now();
    let base = std::env::temp_dir().join(format!("vigil-acc10-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&base);
    std::fs::create_dir_all(&base).unwrap();

    let cfg_path = base.join("run.cfg");
    std::fs::write(
        &cfg_path,
        "[run]\nseed = 11\n[farm]\ndevices = 1\nduration_days = 6\nanomaly_count = 2\n[motor]\nrpm_list = 300,400\npiezo_recordings = 2\npiezo_seconds = 1.0\nmems_recordings = 3\nmems_seconds = 10.0\n",
    )
    .unwrap();

    // Two runs with byte-identical configs and relative paths, from
    // different working directories.
    let mut trees = Vec::new();
    for run in ["a", "b"] {
        let root = base.join(run);
        std::fs::create_dir_all(&root).unwrap();
        std::fs::copy(&cfg_path, root.join("run.cfg")).unwrap();

        let out = run_cli_in(&root, &["generate", "--out", "data", "--config", "run.cfg"]);
        assert!(out.status.success(), "generate failed: {out:?}");

        let out = run_cli_in(
            &root,
            &[
                "detect",
                "--data",
                "data",
                "--out",
                "detect",
                "--forecaster",
                "arima",
                "--seed",
                "11",
            ],
        );
        assert!(out.status.success(), "detect failed: {out:?}");

        let out = run_cli_in(
            &root,
            &[
                "classify",
                "--windows",
                "data/windows/piezo_windows.csv",
                "--out",
                "classify",
                "--preset",
                "normalize",
                "--epochs",
                "10",
                "--seed",
                "11",
            ],
        );
        assert!(out.status.success(), "classify failed: {out:?}");

        trees.push(collect_files(&root));
    }

    let (a, b) = (&trees[0], &trees[1]);
    assert_eq!(a.len(), b.len(), "run trees differ in file count");
    let mut bytes = 0usize;
    for ((pa, ca), (pb, cb)) in a.iter().zip(b) {
        assert_eq!(pa, pb, "file sets diverge");
        assert_eq!(ca, cb, "{} differs between reruns", pa.display());
        bytes += ca.len();
    }

    let _ = std::fs::remove_dir_all(&base);
    let elapsed = start.elapsed();
    println!(
        "acceptance 10 pipeline determinism: PASS ({} files / {bytes} bytes byte-identical across reruns, {elapsed:?})",
        a.len()
    );
    assert_budget("acceptance 10", elapsed, Duration::from_secs(600));
}
