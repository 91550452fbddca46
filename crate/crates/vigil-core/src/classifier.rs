//! Defect-state classification and cross-sensor transfer.
//!
//! A [`DefectClassifier`] bundles a dense softmax network with the
//! [`FeatureEncoder`] it was trained behind. Training fresh ("DNN-R") fits
//! the encoder on the training split only; transferring ("DNN-TL")
//! initializes a new classifier with the source's weights and encoder and
//! optionally fine-tunes on target windows. The RPM generalization grid and
//! the binary relaxation reuse the same machinery.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::features::{augment, AxisSet, FeatureEncoder, Label, LabeledWindow};
use crate::math;
use crate::nn::{self, DenseNetwork, OutputActivation, TrainConfig};
use crate::rng::{derive_seed, Rng};

/// Which label set a classifier discriminates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassSet {
    /// Normal / NearFailure / Failure.
    ThreeWay,
    /// Normal / NotNormal.
    Binary,
}

impl ClassSet {
    pub fn labels(self) -> &'static [Label] {
        match self {
            ClassSet::ThreeWay => &[Label::Normal, Label::NearFailure, Label::Failure],
            ClassSet::Binary => &[Label::Normal, Label::NotNormal],
        }
    }

    pub fn len(self) -> usize {
        self.labels().len()
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn index_of(self, label: Label) -> Option<usize> {
        self.labels().iter().position(|&l| l == label)
    }

    pub fn label_at(self, index: usize) -> Option<Label> {
        self.labels().get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassSet::ThreeWay => "three_way",
            ClassSet::Binary => "binary",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "three_way" => Ok(ClassSet::ThreeWay),
            "binary" => Ok(ClassSet::Binary),
            other => Err(Error::invalid(format!("unknown class set '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    TrainedFresh,
    Transferred,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::TrainedFresh => "trained_fresh",
            Provenance::Transferred => "transferred",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "trained_fresh" => Ok(Provenance::TrainedFresh),
            "transferred" => Ok(Provenance::Transferred),
            other => Err(Error::invalid(format!("unknown provenance '{other}'"))),
        }
    }
}

/// Dense defect classifier plus the encoder it expects its inputs through.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectClassifier {
    pub network: DenseNetwork,
    pub encoder: FeatureEncoder,
    pub classes: ClassSet,
    pub provenance: Provenance,
}

impl DefectClassifier {
    pub fn validate(&self) -> Result<()> {
        if self.network.input_dim() != self.encoder.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.encoder.dim(),
                got: self.network.input_dim(),
            });
        }
        if self.network.output_dim() != self.classes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.classes.len(),
                got: self.network.output_dim(),
            });
        }
        Ok(())
    }
}

/// Architecture and pipeline switches for one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierSpec {
    /// Hidden layer widths; the baseline is two layers of 50.
    pub hidden: Vec<usize>,
    pub classes: ClassSet,
    /// Fit a z-score encoder on the training split (otherwise identity).
    pub normalize: bool,
    /// Share of windows used for training; the rest become the test split.
    pub train_fraction: f64,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec {
            hidden: vec![50, 50],
            classes: ClassSet::ThreeWay,
            normalize: true,
            train_fraction: 0.7,
        }
    }
}

/// A trained classifier with its held-out split and loss history.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub classifier: DefectClassifier,
    pub test_windows: Vec<LabeledWindow>,
    pub loss_history: Vec<f64>,
}

fn one_hot(index: usize, classes: usize) -> Vec<f64> {
    let mut t = vec![0.0; classes];
    t[index] = 1.0;
    t
}

/// Seeded shuffle + split at `floor(n * fraction)`.
pub fn split_windows(
    windows: &[LabeledWindow],
    fraction: f64,
    seed: u64,
) -> (Vec<LabeledWindow>, Vec<LabeledWindow>) {
    let mut shuffled = windows.to_vec();
    let mut rng = Rng::seed_from(derive_seed(seed, &[0x5011]));
    rng.shuffle(&mut shuffled);
    let cut = math::floor(shuffled.len() as f64 * fraction) as usize;
    let test = shuffled.split_off(cut);
    (shuffled, test)
}

/// Encoded inputs paired with one-hot targets.
type Dataset = (Vec<Vec<f64>>, Vec<Vec<f64>>);

fn dataset_from(
    windows: &[LabeledWindow],
    encoder: &FeatureEncoder,
    classes: ClassSet,
) -> Result<Dataset> {
    let mut inputs = Vec::with_capacity(windows.len());
    let mut targets = Vec::with_capacity(windows.len());
    for w in windows {
        let class = classes.index_of(w.label).ok_or_else(|| {
            Error::invalid(format!(
                "label '{}' is outside the {} class set",
                w.label.name(),
                classes.name()
            ))
        })?;
        inputs.push(encoder.encode_features(&w.features)?);
        targets.push(one_hot(class, classes.len()));
    }
    Ok((inputs, targets))
}

/// Trains a fresh classifier (DNN-R) on a 70/30 split of `windows`.
///
/// The encoder is fitted on the training split only; the test split is
/// returned untouched for evaluation. Deterministic under `hyper.seed`.
pub fn train_dnn_r(
    windows: &[LabeledWindow],
    hyper: &TrainConfig,
    spec: &ClassifierSpec,
) -> Result<FitOutcome> {
    if windows.is_empty() {
        return Err(Error::invalid("no windows to train on"));
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::invalid("train_fraction must lie in (0, 1)"));
    }
    let (train, test) = split_windows(windows, spec.train_fraction, hyper.seed);
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid("split leaves an empty train or test set"));
    }
    let distinct = {
        let mut labels: Vec<Label> = train.iter().map(|w| w.label).collect();
        labels.sort_unstable();
        labels.dedup();
        labels.len()
    };
    if distinct < 2 {
        return Err(Error::invalid("training data holds a single class"));
    }

    let dim = train[0].features.len();
    let window_spec = crate::lstm::WindowSpec {
        window_len: train[0].window_len(),
        stride: train[0].window_len(),
    };
    let encoder = if spec.normalize {
        FeatureEncoder::fit(&train, window_spec)?
    } else {
        FeatureEncoder::identity(dim, train[0].axes, window_spec)
    };

    let (inputs, targets) = dataset_from(&train, &encoder, spec.classes)?;
    let mut sizes = vec![dim];
    sizes.extend_from_slice(&spec.hidden);
    sizes.push(spec.classes.len());
    let net = DenseNetwork::seeded(&sizes, OutputActivation::Softmax, hyper.seed)?;
    let (artifact, history) = nn::train(net, &inputs, &targets, hyper)?;

    let classifier = DefectClassifier {
        network: artifact.network,
        encoder,
        classes: spec.classes,
        provenance: Provenance::TrainedFresh,
    };
    classifier.validate()?;
    Ok(FitOutcome {
        classifier,
        test_windows: test,
        loss_history: history,
    })
}

/// Fine-tuning switches for [`transfer`].
#[derive(Debug, Clone)]
pub struct FineTune {
    pub cfg: TrainConfig,
    /// Update only the output layer, keeping hidden layers frozen.
    pub freeze_hidden: bool,
}

impl FineTune {
    /// Default fine-tuning: all layers trainable at a tenth of the fresh
    /// learning rate.
    pub fn from_fresh(fresh: &TrainConfig, epochs: u32) -> Self {
        FineTune {
            cfg: TrainConfig {
                epochs,
                learning_rate: fresh.learning_rate / 10.0,
                ..fresh.clone()
            },
            freeze_hidden: false,
        }
    }
}

/// Builds a target classifier from a source's weights and encoder (DNN-TL).
///
/// Without `fine_tune` the result is a pure initialization: weights and
/// encoder equal the source's, bit for bit (the test split is then the whole
/// target set). With `fine_tune`, the target windows are split like
/// [`train_dnn_r`] and training continues from the transferred weights,
/// through the source encoder, which is never refitted. The source is never
/// mutated.
pub fn transfer(
    source: &DefectClassifier,
    target_windows: &[LabeledWindow],
    fine_tune: Option<&FineTune>,
) -> Result<FitOutcome> {
    source.validate()?;
    if let Some(w) = target_windows.first() {
        let got = w.features.len();
        let expected = source.encoder.dim();
        if got != expected {
            return Err(Error::invalid(format!(
                "target windows of dimension {got} cannot enter a source encoder of dimension {expected}"
            )));
        }
    }

    let mut classifier = DefectClassifier {
        network: source.network.clone(),
        encoder: source.encoder.clone(),
        classes: source.classes,
        provenance: Provenance::Transferred,
    };

    let Some(tune) = fine_tune else {
        return Ok(FitOutcome {
            classifier,
            test_windows: target_windows.to_vec(),
            loss_history: Vec::new(),
        });
    };

    if target_windows.is_empty() {
        return Err(Error::invalid("fine-tuning needs target windows"));
    }
    let (train, test) = split_windows(target_windows, 0.7, tune.cfg.seed);
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid("split leaves an empty train or test set"));
    }
    let (inputs, targets) = dataset_from(&train, &classifier.encoder, classifier.classes)?;

    let history = if tune.freeze_hidden {
        sgd_frozen_hidden(&mut classifier.network, &inputs, &targets, &tune.cfg)?
    } else {
        let (artifact, history) = nn::train(classifier.network, &inputs, &targets, &tune.cfg)?;
        classifier.network = artifact.network;
        history
    };

    Ok(FitOutcome {
        classifier,
        test_windows: test,
        loss_history: history,
    })
}

/// Minibatch SGD that only updates the output layer.
fn sgd_frozen_hidden(
    net: &mut DenseNetwork,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    let mut rng = Rng::seed_from(cfg.seed);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut history = Vec::new();
    let last = net.layer_sizes().len() - 2;
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let bx: Vec<Vec<f64>> = chunk.iter().map(|&i| inputs[i].clone()).collect();
            let bt: Vec<Vec<f64>> = chunk.iter().map(|&i| targets[i].clone()).collect();
            epoch_loss += net.batch_loss(&bx, &bt, cfg.loss)? * chunk.len() as f64;
            let mut grads = net.backprop(&bx, &bt, cfg.loss)?;
            for (k, layer) in grads.weights.iter_mut().enumerate() {
                if k != last {
                    layer.iter_mut().for_each(|g| *g = 0.0);
                }
            }
            for (k, layer) in grads.biases.iter_mut().enumerate() {
                if k != last {
                    layer.iter_mut().for_each(|g| *g = 0.0);
                }
            }
            net.sgd_step(&grads, cfg.learning_rate);
        }
        history.push(epoch_loss / inputs.len() as f64);
    }
    Ok(history)
}

/// Class decision with the full probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: Label,
    pub class_index: usize,
    pub probabilities: Vec<f64>,
}

/// Encodes one window's features and picks the argmax class.
///
/// Ties break toward the lower class index.
pub fn predict(classifier: &DefectClassifier, features: &[f64]) -> Result<Prediction> {
    let encoded = classifier.encoder.encode_features(features)?;
    let probabilities = classifier.network.forward(&encoded)?;
    let class_index = argmax(&probabilities);
    Ok(Prediction {
        label: classifier
            .classes
            .label_at(class_index)
            .expect("network output dim equals class count"),
        class_index,
        probabilities,
    })
}

/// First index of the maximum value (lowest index wins ties).
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Row-indexed-by-truth confusion counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
    pub classes: ClassSet,
}

impl ConfusionMatrix {
    pub fn new(classes: ClassSet) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; classes.len()]; classes.len()],
            classes,
        }
    }

    pub fn record(&mut self, true_class: usize, predicted_class: usize) {
        self.counts[true_class][predicted_class] += 1;
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Row-normalized rates; all-zero rows stay zero.
    pub fn rates(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let total: u64 = row.iter().sum();
                if total == 0 {
                    vec![0.0; row.len()]
                } else {
                    row.iter().map(|&c| c as f64 / total as f64).collect()
                }
            })
            .collect()
    }

    /// trace / total.
    pub fn accuracy(&self) -> f64 {
        let correct: u64 = (0..self.counts.len()).map(|i| self.counts[i][i]).sum();
        correct as f64 / self.total() as f64
    }
}

/// Tallies predictions over a labeled test set.
pub fn confusion(
    classifier: &DefectClassifier,
    test_windows: &[LabeledWindow],
) -> Result<(ConfusionMatrix, f64)> {
    if test_windows.is_empty() {
        return Err(Error::invalid("empty test set"));
    }
    let mut matrix = ConfusionMatrix::new(classifier.classes);
    for w in test_windows {
        let truth = classifier.classes.index_of(w.label).ok_or_else(|| {
            Error::invalid(format!(
                "label '{}' is outside the {} class set",
                w.label.name(),
                classifier.classes.name()
            ))
        })?;
        let pred = predict(classifier, &w.features)?;
        matrix.record(truth, pred.class_index);
    }
    let accuracy = matrix.accuracy();
    Ok((matrix, accuracy))
}

/// Collapses NearFailure and Failure into NotNormal; count preserved.
pub fn binarize(windows: &[LabeledWindow]) -> Vec<LabeledWindow> {
    windows
        .iter()
        .map(|w| LabeledWindow {
            label: w.label.binarized(),
            ..w.clone()
        })
        .collect()
}

/// One row of the cross-RPM accuracy grid.
#[derive(Debug, Clone)]
pub struct GridRow {
    /// Training speed, or `None` for the augmented all-RPM row.
    pub train_rpm: Option<u32>,
    pub accuracies: Vec<f64>,
    pub average: f64,
}

/// Train-speed x test-speed accuracy matrix.
#[derive(Debug, Clone)]
pub struct GridResult {
    pub test_rpms: Vec<u32>,
    pub rows: Vec<GridRow>,
}

/// Trains one model per RPM (and optionally one on the augmented union) and
/// evaluates each against every RPM.
///
/// Diagonal cells score a model on its own RPM's held-out 30%; off-diagonal
/// cells score it on the other RPM's full window set. The augmented row
/// trains on the union of every RPM's training split plus `count`
/// interpolants per RPM and is scored on each RPM's held-out split.
pub fn rpm_generalization_grid(
    groups: &[(u32, Vec<LabeledWindow>)],
    hyper: &TrainConfig,
    spec: &ClassifierSpec,
    augment_per_rpm: Option<usize>,
) -> Result<GridResult> {
    if groups.is_empty() {
        return Err(Error::invalid("no RPM groups"));
    }
    let mut rpms: Vec<u32> = groups.iter().map(|(rpm, _)| *rpm).collect();
    rpms.sort_unstable();
    rpms.dedup();
    if rpms.len() != groups.len() {
        return Err(Error::invalid("duplicate RPM groups"));
    }

    // Deterministic per-rpm splits reused by every row.
    let mut splits: Vec<(u32, Vec<LabeledWindow>, Vec<LabeledWindow>)> = Vec::new();
    for &rpm in &rpms {
        let windows = &groups.iter().find(|(r, _)| *r == rpm).unwrap().1;
        let (train, test) = split_windows(windows, spec.train_fraction, derive_seed(hyper.seed, &[rpm as u64]));
        splits.push((rpm, train, test));
    }

    let mut rows = Vec::new();
    for (rpm, train, test) in &splits {
        let outcome = fit_on(train, hyper, spec)
            .map_err(|e| Error::invalid(format!("training row rpm {rpm} failed: {e}")))?;
        let mut accuracies = Vec::with_capacity(rpms.len());
        for (other_rpm, _, _) in &splits {
            let eval: &[LabeledWindow] = if other_rpm == rpm {
                test
            } else {
                &groups.iter().find(|(r, _)| r == other_rpm).unwrap().1
            };
            let (_, acc) = confusion(&outcome.classifier, eval)?;
            accuracies.push(acc);
        }
        rows.push(GridRow {
            train_rpm: Some(*rpm),
            average: mean(&accuracies),
            accuracies,
        });
    }

    if let Some(count) = augment_per_rpm {
        let mut union: Vec<LabeledWindow> = Vec::new();
        for (_, train, _) in &splits {
            union.extend(train.iter().cloned());
        }
        let augmented = augment(&union, count, derive_seed(hyper.seed, &[0xau64, 0x9u64]))?;
        let outcome = fit_on(&augmented.windows, hyper, spec)
            .map_err(|e| Error::invalid(format!("training augmented row failed: {e}")))?;
        let mut accuracies = Vec::with_capacity(rpms.len());
        for (_, _, other_test) in &splits {
            let (_, acc) = confusion(&outcome.classifier, other_test)?;
            accuracies.push(acc);
        }
        rows.push(GridRow {
            train_rpm: None,
            average: mean(&accuracies),
            accuracies,
        });
    }

    Ok(GridResult { test_rpms: rpms, rows })
}

/// Trains on an explicit training set with no further splitting.
pub fn fit_on(
    train: &[LabeledWindow],
    hyper: &TrainConfig,
    spec: &ClassifierSpec,
) -> Result<FitOutcome> {
    if train.is_empty() {
        return Err(Error::invalid("no windows to train on"));
    }
    let dim = train[0].features.len();
    let window_spec = crate::lstm::WindowSpec {
        window_len: train[0].window_len(),
        stride: train[0].window_len(),
    };
    let encoder = if spec.normalize {
        FeatureEncoder::fit(train, window_spec)?
    } else {
        FeatureEncoder::identity(dim, train[0].axes, window_spec)
    };
    let (inputs, targets) = dataset_from(train, &encoder, spec.classes)?;
    let mut sizes = vec![dim];
    sizes.extend_from_slice(&spec.hidden);
    sizes.push(spec.classes.len());
    let net = DenseNetwork::seeded(&sizes, OutputActivation::Softmax, hyper.seed)?;
    let (artifact, history) = nn::train(net, &inputs, &targets, hyper)?;
    let classifier = DefectClassifier {
        network: artifact.network,
        encoder,
        classes: spec.classes,
        provenance: Provenance::TrainedFresh,
    };
    classifier.validate()?;
    Ok(FitOutcome {
        classifier,
        test_windows: Vec::new(),
        loss_history: history,
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Cumulative tuning ladder: each preset applies every step before it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// All three axes, raw features, 2x50 network, 50 epochs, batch 50.
    Baseline,
    /// Keep only the X and Z axes.
    SelectAxes,
    /// Fit the z-score feature encoder.
    Normalize,
    /// Widen the hidden layers to 100 units.
    Wide,
    /// Add a third hidden layer.
    Deep,
    /// Train for 100 epochs.
    LongTrain,
    /// Batch size 100.
    BigBatch,
}

/// Resolved pipeline settings for a preset.
#[derive(Debug, Clone, PartialEq)]
pub struct PresetPlan {
    pub axes: AxisSet,
    pub normalize: bool,
    pub hidden: Vec<usize>,
    pub epochs: u32,
    pub batch_size: usize,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Baseline,
        Preset::SelectAxes,
        Preset::Normalize,
        Preset::Wide,
        Preset::Deep,
        Preset::LongTrain,
        Preset::BigBatch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Baseline => "baseline",
            Preset::SelectAxes => "select-axes",
            Preset::Normalize => "normalize",
            Preset::Wide => "wide",
            Preset::Deep => "deep",
            Preset::LongTrain => "long-train",
            Preset::BigBatch => "big-batch",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == text)
            .ok_or_else(|| Error::invalid(format!("unknown preset '{text}'")))
    }

    pub fn plan(self) -> PresetPlan {
        let mut plan = PresetPlan {
            axes: AxisSet::XZY,
            normalize: false,
            hidden: vec![50, 50],
            epochs: 50,
            batch_size: 50,
        };
        let rank = Preset::ALL.iter().position(|&p| p == self).unwrap();
        if rank >= 1 {
            plan.axes = AxisSet::XZ;
        }
        if rank >= 2 {
            plan.normalize = true;
        }
        if rank >= 3 {
            plan.hidden = vec![100, 100];
        }
        if rank >= 4 {
            plan.hidden = vec![100, 100, 100];
        }
        if rank >= 5 {
            plan.epochs = 100;
        }
        if rank >= 6 {
            plan.batch_size = 100;
        }
        plan
    }
}
