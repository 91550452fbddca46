//! Feature extraction for vibration windows and the shareable encoder.
//!
//! Raw per-axis signals are sliced into fixed-length windows whose features
//! are the concatenated raw samples, axis segments in the canonical order
//! X, Z, Y. A [`FeatureEncoder`] holds per-feature normalization statistics
//! fitted on training data only; it is the artifact that moves between
//! sensors during transfer. Augmentation interpolates convex combinations
//! of same-label, same-RPM window pairs.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lstm::WindowSpec;
use crate::math;
use crate::rng::Rng;

/// Vibration axis. The canonical feature order is X, Z, then Y: the two
/// axes that carry the rotation signal come first, the shaft axis last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const CANONICAL: [Axis; 3] = [Axis::X, Axis::Z, Axis::Y];

    pub fn letter(self) -> char {
        match self {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }
}

/// An ordered subset of the three axes (canonical order X, Z, Y).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AxisSet {
    x: bool,
    y: bool,
    z: bool,
}

impl AxisSet {
    pub const XZY: AxisSet = AxisSet { x: true, y: true, z: true };
    pub const XZ: AxisSet = AxisSet { x: true, y: false, z: true };

    pub fn new(axes: &[Axis]) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::invalid("empty axis set"));
        }
        let mut set = AxisSet { x: false, y: false, z: false };
        for &a in axes {
            match a {
                Axis::X => set.x = true,
                Axis::Y => set.y = true,
                Axis::Z => set.z = true,
            }
        }
        Ok(set)
    }

    pub fn contains(self, axis: Axis) -> bool {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
            Axis::Z => self.z,
        }
    }

    /// True when every axis of `other` is present here.
    pub fn contains_all(self, other: AxisSet) -> bool {
        other.iter().all(|a| self.contains(a))
    }

    pub fn len(self) -> usize {
        usize::from(self.x) + usize::from(self.y) + usize::from(self.z)
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }

    /// Axes in canonical order.
    pub fn iter(self) -> impl Iterator<Item = Axis> {
        Axis::CANONICAL.into_iter().filter(move |&a| self.contains(a))
    }

    /// Compact text form like `XZ` or `XZY`, in canonical order.
    pub fn encode(self) -> String {
        self.iter().map(Axis::letter).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut axes = Vec::new();
        for ch in text.chars() {
            match ch.to_ascii_uppercase() {
                'X' => axes.push(Axis::X),
                'Y' => axes.push(Axis::Y),
                'Z' => axes.push(Axis::Z),
                other => return Err(Error::invalid(format!("unknown axis '{other}'"))),
            }
        }
        AxisSet::new(&axes)
    }
}

/// Health state attached to a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Normal,
    NearFailure,
    Failure,
    /// Collapsed class of the binary relaxation.
    NotNormal,
}

impl Label {
    pub fn name(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::NearFailure => "near_failure",
            Label::Failure => "failure",
            Label::NotNormal => "not_normal",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "normal" => Ok(Label::Normal),
            "near_failure" => Ok(Label::NearFailure),
            "failure" => Ok(Label::Failure),
            "not_normal" => Ok(Label::NotNormal),
            other => Err(Error::invalid(format!("unknown label '{other}'"))),
        }
    }

    /// Maps the three-way labels onto {Normal, NotNormal}.
    pub fn binarized(self) -> Label {
        match self {
            Label::Normal => Label::Normal,
            _ => Label::NotNormal,
        }
    }
}

/// Which physical sensor produced a signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SensorKind {
    /// High-resolution piezoelectric accelerometer.
    Piezo,
    /// Low-cost MEMS accelerometer.
    Mems,
}

impl SensorKind {
    pub fn sample_rate_hz(self) -> f64 {
        match self {
            SensorKind::Piezo => 3200.0,
            SensorKind::Mems => 10.0,
        }
    }

    /// Default windowing: 0.1 s of piezo data (320 samples, at least one
    /// rotation at the slowest speed) or 1 s of MEMS data (10 samples).
    pub fn default_window(self) -> WindowSpec {
        match self {
            SensorKind::Piezo => WindowSpec { window_len: 320, stride: 320 },
            SensorKind::Mems => WindowSpec { window_len: 10, stride: 10 },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SensorKind::Piezo => "piezo",
            SensorKind::Mems => "mems",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "piezo" => Ok(SensorKind::Piezo),
            "mems" => Ok(SensorKind::Mems),
            other => Err(Error::invalid(format!("unknown sensor kind '{other}'"))),
        }
    }
}

/// A fixed-length feature vector cut from raw vibration samples.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    pub features: Vec<f64>,
    pub rpm: u32,
    pub label: Label,
    pub sensor: SensorKind,
    pub axes: AxisSet,
}

impl LabeledWindow {
    /// Samples per axis segment.
    pub fn window_len(&self) -> usize {
        self.features.len() / self.axes.len()
    }
}

/// Slices per-axis signals into windows of concatenated raw samples.
///
/// Windows start at multiples of `spec.stride`; with `stride == window_len`
/// they tile the signal without overlap. Axis segments are concatenated in
/// canonical order.
pub fn window_signal(
    x: &[f64],
    y: &[f64],
    z: &[f64],
    spec: WindowSpec,
    axes: AxisSet,
) -> Result<Vec<Vec<f64>>> {
    if axes.is_empty() {
        return Err(Error::invalid("empty axis set"));
    }
    let signal_for = |axis: Axis| -> &[f64] {
        match axis {
            Axis::X => x,
            Axis::Y => y,
            Axis::Z => z,
        }
    };
    let mut len = None;
    for axis in axes.iter() {
        let s = signal_for(axis);
        if s.len() < spec.window_len {
            return Err(Error::invalid(format!(
                "axis {} has {} samples, shorter than the window {}",
                axis.letter(),
                s.len(),
                spec.window_len
            )));
        }
        match len {
            None => len = Some(s.len()),
            Some(l) if l != s.len() => {
                return Err(Error::invalid("axis arrays differ in length"));
            }
            _ => {}
        }
    }
    let n = len.unwrap();
    let count = (n - spec.window_len) / spec.stride + 1;
    let mut out = Vec::with_capacity(count);
    for w in 0..count {
        let start = w * spec.stride;
        let mut features = Vec::with_capacity(spec.window_len * axes.len());
        for axis in axes.iter() {
            features.extend_from_slice(&signal_for(axis)[start..start + spec.window_len]);
        }
        out.push(features);
    }
    Ok(out)
}

/// Drops the axis segments not in `axes`, preserving labels, rpm, and count.
pub fn select_axes(windows: &[LabeledWindow], axes: AxisSet) -> Result<Vec<LabeledWindow>> {
    windows
        .iter()
        .map(|w| {
            if !w.axes.contains_all(axes) {
                return Err(Error::invalid(format!(
                    "window carries axes {} but {} were requested",
                    w.axes.encode(),
                    axes.encode()
                )));
            }
            let seg = w.window_len();
            let mut features = Vec::with_capacity(seg * axes.len());
            for (i, axis) in w.axes.iter().enumerate() {
                if axes.contains(axis) {
                    features.extend_from_slice(&w.features[i * seg..(i + 1) * seg]);
                }
            }
            Ok(LabeledWindow {
                features,
                rpm: w.rpm,
                label: w.label,
                sensor: w.sensor,
                axes,
            })
        })
        .collect()
}

/// Per-feature z-score statistics fitted on training windows.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureEncoder {
    means: Vec<f64>,
    stds: Vec<f64>,
    pub axes: AxisSet,
    pub window: WindowSpec,
    pub version: u32,
}

pub const ENCODER_FORMAT_VERSION: u32 = 1;

impl FeatureEncoder {
    /// Fits per-feature mean and standard deviation (population convention,
    /// `n` divisor) on the training set only.
    pub fn fit(windows: &[LabeledWindow], spec: WindowSpec) -> Result<Self> {
        if windows.len() < 2 {
            return Err(Error::invalid("need at least two windows to fit an encoder"));
        }
        let dim = windows[0].features.len();
        if windows.iter().any(|w| w.features.len() != dim) {
            return Err(Error::invalid("windows differ in feature dimensionality"));
        }
        let n = windows.len() as f64;
        let mut means = alloc::vec![0.0; dim];
        for w in windows {
            for (m, &v) in means.iter_mut().zip(&w.features) {
                *m += v;
            }
        }
        for m in means.iter_mut() {
            *m /= n;
        }
        let mut stds = alloc::vec![0.0; dim];
        for w in windows {
            for ((s, &m), &v) in stds.iter_mut().zip(&means).zip(&w.features) {
                *s += (v - m) * (v - m);
            }
        }
        for (i, s) in stds.iter_mut().enumerate() {
            *s = math::sqrt(*s / n);
            if *s == 0.0 {
                return Err(Error::DegenerateFeature { index: i });
            }
        }
        Ok(FeatureEncoder {
            means,
            stds,
            axes: windows[0].axes,
            window: spec,
            version: ENCODER_FORMAT_VERSION,
        })
    }

    /// Pass-through encoder (mean 0, std 1) for unnormalized pipelines.
    pub fn identity(dim: usize, axes: AxisSet, spec: WindowSpec) -> Self {
        FeatureEncoder {
            means: alloc::vec![0.0; dim],
            stds: alloc::vec![1.0; dim],
            axes,
            window: spec,
            version: ENCODER_FORMAT_VERSION,
        }
    }

    /// Rebuilds an encoder from stored statistics.
    pub fn from_parts(
        means: Vec<f64>,
        stds: Vec<f64>,
        axes: AxisSet,
        window: WindowSpec,
        version: u32,
    ) -> Result<Self> {
        if means.len() != stds.len() {
            return Err(Error::DimensionMismatch {
                expected: means.len(),
                got: stds.len(),
            });
        }
        if stds.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::invalid("stored stds must be positive"));
        }
        Ok(FeatureEncoder { means, stds, axes, window, version })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    /// `(x - mean) / std` per feature. Never refits.
    pub fn encode_features(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: features.len(),
            });
        }
        Ok(features
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect())
    }

    /// Inverse of [`FeatureEncoder::encode_features`].
    pub fn decode_features(&self, encoded: &[f64]) -> Result<Vec<f64>> {
        if encoded.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: encoded.len(),
            });
        }
        Ok(encoded
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(&v, (&m, &s))| v * s + m)
            .collect())
    }

    /// Applies the encoder to whole windows, keeping their metadata.
    pub fn apply(&self, windows: &[LabeledWindow]) -> Result<Vec<LabeledWindow>> {
        windows
            .iter()
            .map(|w| {
                Ok(LabeledWindow {
                    features: self.encode_features(&w.features)?,
                    ..w.clone()
                })
            })
            .collect()
    }
}

/// Convex combination `lambda * a + (1 - lambda) * b`.
pub fn interpolate(a: &[f64], b: &[f64], lambda: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| lambda * x + (1.0 - lambda) * y)
        .collect()
}

/// Augmentation outcome: original windows plus interpolants, and the
/// (rpm, label) groups that were too small to interpolate.
#[derive(Debug, Clone)]
pub struct Augmented {
    pub windows: Vec<LabeledWindow>,
    pub skipped: Vec<(u32, Label)>,
}

/// Enlarges a window set with `per_rpm` interpolated samples per RPM group.
///
/// Every interpolant is a convex combination of two distinct windows with
/// identical rpm and identical label, with lambda drawn uniformly in (0, 1)
/// from the seeded generator. Labels and rpm are inherited. RPM groups
/// where some label has fewer than two windows contribute no interpolants
/// for that label; those groups are reported in `skipped`, not failed.
pub fn augment(windows: &[LabeledWindow], per_rpm: usize, seed: u64) -> Result<Augmented> {
    let mut out = windows.to_vec();
    let mut skipped = Vec::new();
    if per_rpm == 0 || windows.is_empty() {
        return Ok(Augmented { windows: out, skipped });
    }

    let mut rpms: Vec<u32> = windows.iter().map(|w| w.rpm).collect();
    rpms.sort_unstable();
    rpms.dedup();

    let labels = [Label::Normal, Label::NearFailure, Label::Failure, Label::NotNormal];
    let mut rng = Rng::seed_from(seed);
    for &rpm in &rpms {
        // Index windows per label within this rpm group.
        let mut by_label: Vec<(Label, Vec<usize>)> = Vec::new();
        for &label in &labels {
            let idx: Vec<usize> = windows
                .iter()
                .enumerate()
                .filter(|(_, w)| w.rpm == rpm && w.label == label)
                .map(|(i, _)| i)
                .collect();
            if idx.len() == 1 {
                skipped.push((rpm, label));
            } else if idx.len() >= 2 {
                by_label.push((label, idx));
            }
        }
        if by_label.is_empty() {
            continue;
        }
        for _ in 0..per_rpm {
            let (label, members) = &by_label[rng.below(by_label.len())];
            let ai = members[rng.below(members.len())];
            let bi = loop {
                let c = members[rng.below(members.len())];
                if c != ai {
                    break c;
                }
            };
            let lambda = rng.next_open01();
            let (a, b) = (&windows[ai], &windows[bi]);
            out.push(LabeledWindow {
                features: interpolate(&a.features, &b.features, lambda),
                rpm,
                label: *label,
                sensor: a.sensor,
                axes: a.axes,
            });
        }
    }
    Ok(Augmented { windows: out, skipped })
}

/// Uniformly decimates each axis segment down to `target_window_len`
/// samples, the reconciliation step that maps high-rate windows onto the
/// low-rate feature space before encoders and classifiers are shared.
pub fn decimate_windows(windows: &[LabeledWindow], target_window_len: usize) -> Result<Vec<LabeledWindow>> {
    if target_window_len == 0 {
        return Err(Error::invalid("target window length must be positive"));
    }
    windows
        .iter()
        .map(|w| {
            let seg = w.window_len();
            if seg % target_window_len != 0 {
                return Err(Error::invalid(format!(
                    "window length {seg} is not a multiple of the target {target_window_len}"
                )));
            }
            let factor = seg / target_window_len;
            let mut features = Vec::with_capacity(target_window_len * w.axes.len());
            for a in 0..w.axes.len() {
                let segment = &w.features[a * seg..(a + 1) * seg];
                for k in 0..target_window_len {
                    features.push(segment[k * factor]);
                }
            }
            Ok(LabeledWindow {
                features,
                rpm: w.rpm,
                label: w.label,
                sensor: w.sensor,
                axes: w.axes,
            })
        })
        .collect()
}
