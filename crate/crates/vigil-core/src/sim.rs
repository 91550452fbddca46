//! Synthetic testbeds: imbalance-driven motor vibration and slow farm
//! sensor streams with injected anomalies.
//!
//! Both generators are pure functions of their spec and seed. Motor
//! recordings sample one underlying continuous signal per (rpm, health,
//! recording) triple, so a MEMS recording equals the piezo recording of the
//! same triple decimated to 10 Hz, up to their independent noise draws.
//! Parallel generation stays deterministic because every recording derives
//! its own stream as `derive_seed(master, [rpm, health, index])`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::features::{AxisSet, Label, LabeledWindow, SensorKind};
use crate::lstm::WindowSpec;
use crate::math;
use crate::rng::{derive_seed, Rng};

/// The testbed's supported rotational speeds.
pub const STANDARD_RPMS: [u32; 10] = [100, 200, 300, 320, 340, 360, 380, 400, 500, 600];

/// The six-speed subset used for cross-RPM generalization grids.
pub const GRID_RPMS: [u32; 6] = [100, 200, 300, 400, 500, 600];

/// The five-speed subset used for the binary relaxation.
pub const BINARY_RPMS: [u32; 5] = [300, 320, 340, 360, 380];

const HEALTH_LABELS: [Label; 3] = [Label::Normal, Label::NearFailure, Label::Failure];

/// Motor corpus layout: which speeds, sensor, and noise regime to record.
#[derive(Debug, Clone, PartialEq)]
pub struct MotorSpec {
    pub rpm_list: Vec<u32>,
    pub sensor: SensorKind,
    pub recordings_per_condition: u32,
    pub recording_seconds: f64,
    /// Vibration amplitude scale per health class (Normal, NearFailure,
    /// Failure); separation between these drives class separability.
    pub health_scale: [f64; 3],
    pub noise_sigma: f64,
    pub seed: u64,
    /// Permit speeds outside the testbed's standard set.
    pub allow_nonstandard_rpm: bool,
}

impl MotorSpec {
    /// Full testbed protocol: 50 recordings of 10 s per condition.
    pub fn new(sensor: SensorKind, seed: u64) -> Self {
        MotorSpec {
            rpm_list: STANDARD_RPMS.to_vec(),
            sensor,
            recordings_per_condition: 50,
            recording_seconds: 10.0,
            health_scale: [1.0, 1.5, 2.2],
            noise_sigma: 0.3,
            seed,
            allow_nonstandard_rpm: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rpm_list.is_empty() {
            return Err(Error::invalid("rpm_list is empty"));
        }
        if !self.allow_nonstandard_rpm {
            for &rpm in &self.rpm_list {
                if !STANDARD_RPMS.contains(&rpm) {
                    return Err(Error::invalid(format!(
                        "rpm {rpm} is outside the testbed set {STANDARD_RPMS:?} \
                         (set allow_nonstandard_rpm to override)"
                    )));
                }
            }
        }
        if !(self.recording_seconds > 0.0) {
            return Err(Error::invalid("recording_seconds must be positive"));
        }
        if self.health_scale.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::invalid("health amplitudes must be positive"));
        }
        Ok(())
    }

    pub fn samples_per_recording(&self) -> usize {
        (self.sensor.sample_rate_hz() * self.recording_seconds) as usize
    }
}

/// One recorded condition: tri-axial samples at the sensor's rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MotorRecording {
    pub rpm: u32,
    pub label: Label,
    pub sensor: SensorKind,
    pub recording_index: u32,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

/// Generates the full corpus for a spec: every (rpm, health, recording).
///
/// X and Z carry the rotation at `rpm / 60` Hz (Z shifted 90 degrees) plus
/// a half-amplitude second harmonic; amplitude grows with the health class
/// and with speed. Y carries only noise, the direction along the shaft.
pub fn gen_motor(spec: &MotorSpec) -> Result<Vec<MotorRecording>> {
    spec.validate()?;
    let mut out = Vec::new();
    for &rpm in &spec.rpm_list {
        for (health_idx, &label) in HEALTH_LABELS.iter().enumerate() {
            for rec in 0..spec.recordings_per_condition {
                out.push(gen_recording(spec, rpm, health_idx, label, rec));
            }
        }
    }
    Ok(out)
}

fn gen_recording(
    spec: &MotorSpec,
    rpm: u32,
    health_idx: usize,
    label: Label,
    rec: u32,
) -> MotorRecording {
    // The seed ignores the sensor kind: both sensors observe the same
    // underlying signal for a given (rpm, health, recording) triple.
    let seed = derive_seed(spec.seed, &[rpm as u64, health_idx as u64, rec as u64]);
    let mut rng = Rng::seed_from(seed);
    // Signal-level randomness first, so it matches across sensor kinds
    // whose per-sample draw counts differ.
    let phase = rng.uniform(0.0, 2.0 * core::f64::consts::PI);

    let n = spec.samples_per_recording();
    let rate = spec.sensor.sample_rate_hz();
    let freq = rpm as f64 / 60.0;
    // Imbalance force grows with speed; normalize at 300 rpm.
    let amplitude = spec.health_scale[health_idx] * (rpm as f64 / 300.0);
    let sigma = spec.noise_sigma;

    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / rate;
        let arg = 2.0 * core::f64::consts::PI * freq * t + phase;
        let clean_x = amplitude * (math::sin(arg) + 0.5 * math::sin(2.0 * arg));
        let clean_z = amplitude
            * (math::sin(arg + core::f64::consts::FRAC_PI_2)
                + 0.5 * math::sin(2.0 * (arg + core::f64::consts::FRAC_PI_2)));
        x.push(clean_x + noise(&mut rng, sigma));
        y.push(noise(&mut rng, sigma));
        z.push(clean_z + noise(&mut rng, sigma));
    }
    MotorRecording {
        rpm,
        label,
        sensor: spec.sensor,
        recording_index: rec,
        x,
        y,
        z,
    }
}

fn noise(rng: &mut Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        // Keep the draw count stable so noiseless runs stay comparable.
        let _ = rng.next_u64();
        let _ = rng.next_u64();
        0.0
    } else {
        rng.normal(0.0, sigma)
    }
}

/// Windows a recording into labeled feature vectors.
pub fn recording_windows(
    rec: &MotorRecording,
    spec: WindowSpec,
    axes: AxisSet,
) -> Result<Vec<LabeledWindow>> {
    let features = crate::features::window_signal(&rec.x, &rec.y, &rec.z, spec, axes)?;
    Ok(features
        .into_iter()
        .map(|f| LabeledWindow {
            features: f,
            rpm: rec.rpm,
            label: rec.label,
            sensor: rec.sensor,
            axes,
        })
        .collect())
}

/// Windows a whole corpus (see [`recording_windows`]).
pub fn motor_windows(
    recordings: &[MotorRecording],
    spec: WindowSpec,
    axes: AxisSet,
) -> Result<Vec<LabeledWindow>> {
    let mut out = Vec::new();
    for rec in recordings {
        out.extend(recording_windows(rec, spec, axes)?);
    }
    Ok(out)
}

/// The seven deployed farm sensor types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FarmSensor {
    Temperature,
    Humidity,
    SoilConductivity,
    SoilDielectric,
    SoilTemperature,
    WaterNitrate,
    SoilNitrate,
}

impl FarmSensor {
    pub const ALL: [FarmSensor; 7] = [
        FarmSensor::Temperature,
        FarmSensor::Humidity,
        FarmSensor::SoilConductivity,
        FarmSensor::SoilDielectric,
        FarmSensor::SoilTemperature,
        FarmSensor::WaterNitrate,
        FarmSensor::SoilNitrate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FarmSensor::Temperature => "temperature",
            FarmSensor::Humidity => "humidity",
            FarmSensor::SoilConductivity => "soil_conductivity",
            FarmSensor::SoilDielectric => "soil_dielectric",
            FarmSensor::SoilTemperature => "soil_temperature",
            FarmSensor::WaterNitrate => "water_nitrate",
            FarmSensor::SoilNitrate => "soil_nitrate",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        FarmSensor::ALL
            .into_iter()
            .find(|s| s.name() == text)
            .ok_or_else(|| Error::invalid(format!("unknown farm sensor '{text}'")))
    }

    /// Default generation profile per type. Humidity is deliberately the
    /// least stable type; the nitrate sensors the quietest. Weather-front
    /// level shifts decay back toward baseline, so the series carry
    /// level-dependent structure beyond their diurnal cycle.
    pub fn default_profile(self) -> FarmProfile {
        // base, diurnal amplitude, trend per day, noise sigma,
        // level shifts per day, shift sigma.
        let (base, diurnal, trend, noise, shifts, shift_sigma) = match self {
            FarmSensor::Temperature => (18.0, 6.0, 0.02, 0.45, 1.5, 2.2),
            FarmSensor::Humidity => (70.0, 12.0, 0.0, 2.4, 2.0, 7.0),
            FarmSensor::SoilConductivity => (50.0, 5.0, 0.05, 1.1, 1.5, 4.0),
            FarmSensor::SoilDielectric => (20.0, 3.0, 0.01, 0.55, 1.0, 1.6),
            FarmSensor::SoilTemperature => (12.0, 3.5, 0.015, 0.16, 1.0, 0.6),
            FarmSensor::WaterNitrate => (5.0, 1.2, -0.004, 0.10, 0.0, 0.0),
            FarmSensor::SoilNitrate => (3.0, 0.8, 0.002, 0.035, 0.75, 0.15),
        };
        FarmProfile {
            base,
            diurnal_amplitude: diurnal,
            trend_per_day: trend,
            noise_sigma: noise,
            shifts_per_day: shifts,
            shift_sigma,
            shift_decay: 0.97,
        }
    }
}

/// Shape parameters of one farm series.
#[derive(Debug, Clone, PartialEq)]
pub struct FarmProfile {
    pub base: f64,
    pub diurnal_amplitude: f64,
    pub trend_per_day: f64,
    pub noise_sigma: f64,
    /// Expected count of sparse weather-front level shifts per day.
    pub shifts_per_day: f64,
    pub shift_sigma: f64,
    /// Per-sample retention of the shifted level (mean reversion rate).
    pub shift_decay: f64,
}

/// What to inject into a farm series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnomalyKind {
    /// Multiplicative spike: `value * (1 + magnitude)`.
    Spike,
    /// Multiplicative drop: `value * (1 - magnitude)`.
    Drop,
    /// Sensor repeats its previous value.
    Stuck,
}

impl AnomalyKind {
    pub fn name(self) -> &'static str {
        match self {
            AnomalyKind::Spike => "spike",
            AnomalyKind::Drop => "drop",
            AnomalyKind::Stuck => "stuck",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "spike" => Ok(AnomalyKind::Spike),
            "drop" => Ok(AnomalyKind::Drop),
            "stuck" => Ok(AnomalyKind::Stuck),
            other => Err(Error::invalid(format!("unknown anomaly kind '{other}'"))),
        }
    }
}

/// Injection plan for ground-truth anomalies.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalySpec {
    pub count: usize,
    /// Fractional magnitude for spike/drop kinds (0.5 means +/-50%).
    pub magnitude: f64,
    pub kind: AnomalyKind,
    /// Anomalies land only after this fraction of the series, keeping them
    /// inside the test region of a downstream detector split.
    pub earliest_fraction: f64,
}

impl AnomalySpec {
    pub fn none() -> Self {
        AnomalySpec {
            count: 0,
            magnitude: 0.5,
            kind: AnomalyKind::Spike,
            earliest_fraction: 0.7,
        }
    }

    pub fn spikes(count: usize, magnitude: f64) -> Self {
        AnomalySpec {
            count,
            magnitude,
            kind: AnomalyKind::Spike,
            earliest_fraction: 0.7,
        }
    }
}

/// One farm series request. Cadence is fixed at 15 minutes.
#[derive(Debug, Clone, PartialEq)]
pub struct FarmSpec {
    pub sensor: FarmSensor,
    pub duration_days: u32,
    pub profile: FarmProfile,
    pub anomalies: AnomalySpec,
    pub seed: u64,
}

pub const SAMPLES_PER_DAY: usize = 96;
pub const CADENCE_MINUTES: u32 = 15;

/// Minimum spacing between injected anomalies, comfortably beyond the
/// forecasters' ten-step lag window.
pub const MIN_ANOMALY_GAP: usize = 12;

impl FarmSpec {
    pub fn new(sensor: FarmSensor, duration_days: u32, seed: u64) -> Self {
        FarmSpec {
            sensor,
            duration_days,
            profile: sensor.default_profile(),
            anomalies: AnomalySpec::none(),
            seed,
        }
    }

    pub fn sample_count(&self) -> usize {
        self.duration_days as usize * SAMPLES_PER_DAY
    }
}

/// A generated sensor stream with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSeries {
    pub sensor: FarmSensor,
    pub cadence_minutes: u32,
    pub values: Vec<f64>,
    /// Indices that were injected as anomalies, ascending.
    pub anomaly_indices: Vec<usize>,
}

impl SensorSeries {
    pub fn timestamp_minutes(&self, index: usize) -> u64 {
        index as u64 * self.cadence_minutes as u64
    }
}

/// Generates base + diurnal sinusoid + trend + sparse level shifts + noise,
/// then injects the requested anomalies and records their indices.
pub fn gen_farm(spec: &FarmSpec) -> Result<SensorSeries> {
    if spec.duration_days < 2 {
        return Err(Error::invalid("farm series need at least 2 days"));
    }
    let n = spec.sample_count();
    let injectable = n - (n as f64 * spec.anomalies.earliest_fraction) as usize;
    if spec.anomalies.count > injectable {
        return Err(Error::invalid(format!(
            "cannot inject {} anomalies into {} eligible samples",
            spec.anomalies.count, injectable
        )));
    }

    let mut rng = Rng::seed_from(spec.seed);
    let p = &spec.profile;
    let phase = rng.uniform(0.0, 2.0 * core::f64::consts::PI);
    let shift_prob = p.shifts_per_day / SAMPLES_PER_DAY as f64;

    let mut values = Vec::with_capacity(n);
    let mut level = 0.0f64;
    for i in 0..n {
        level *= p.shift_decay;
        if p.shifts_per_day > 0.0 && rng.next_f64() < shift_prob {
            level += rng.normal(0.0, p.shift_sigma);
        }
        let day = i as f64 / SAMPLES_PER_DAY as f64;
        let diurnal = p.diurnal_amplitude
            * math::sin(2.0 * core::f64::consts::PI * i as f64 / SAMPLES_PER_DAY as f64 + phase);
        let noise = if p.noise_sigma > 0.0 {
            rng.normal(0.0, p.noise_sigma)
        } else {
            0.0
        };
        values.push(p.base + diurnal + p.trend_per_day * day + level + noise);
    }

    // Draw injection indices from the eligible tail, spaced at least
    // MIN_ANOMALY_GAP apart so one anomaly cannot sit inside the forecast
    // lag window of another.
    let first_eligible = (n as f64 * spec.anomalies.earliest_fraction) as usize;
    let mut indices: Vec<usize> = Vec::new();
    let mut attempts = 0usize;
    while indices.len() < spec.anomalies.count {
        attempts += 1;
        if attempts > 100_000 {
            return Err(Error::invalid(
                "could not place anomalies with the required spacing",
            ));
        }
        let idx = first_eligible.max(1) + rng.below(n - first_eligible.max(1));
        if indices
            .iter()
            .all(|&j| idx.abs_diff(j) >= MIN_ANOMALY_GAP)
        {
            indices.push(idx);
        }
    }
    indices.sort_unstable();

    for &idx in &indices {
        values[idx] = match spec.anomalies.kind {
            AnomalyKind::Spike => values[idx] * (1.0 + spec.anomalies.magnitude),
            AnomalyKind::Drop => values[idx] * (1.0 - spec.anomalies.magnitude),
            AnomalyKind::Stuck => values[idx - 1],
        };
    }

    Ok(SensorSeries {
        sensor: spec.sensor,
        cadence_minutes: CADENCE_MINUTES,
        values,
        anomaly_indices: indices,
    })
}

/// Desk-scale corpus description: five farm devices with all seven sensor
/// types, plus the motor testbed at both sensor kinds.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleSpec {
    pub seed: u64,
    pub devices: u32,
    pub duration_days: u32,
    pub farm_anomalies: AnomalySpec,
    /// Per-type profile overrides; types not listed use their defaults.
    pub farm_profiles: Vec<(FarmSensor, FarmProfile)>,
    pub motor_piezo: MotorSpec,
    pub motor_mems: MotorSpec,
}

impl BundleSpec {
    /// Default corpus: 30-day farm series with five spikes, a compact piezo
    /// corpus (5 x 2 s recordings per condition), and the full 50 x 10 s
    /// MEMS protocol. Both motor corpora share one seed so they observe the
    /// same physical runs.
    pub fn desk_scale(seed: u64) -> Self {
        let motor_seed = derive_seed(seed, &[2]);
        let mut piezo = MotorSpec::new(SensorKind::Piezo, motor_seed);
        piezo.recordings_per_condition = 5;
        piezo.recording_seconds = 2.0;
        let mems = MotorSpec::new(SensorKind::Mems, motor_seed);
        BundleSpec {
            seed,
            devices: 5,
            duration_days: 30,
            farm_anomalies: AnomalySpec::spikes(5, 0.5),
            farm_profiles: Vec::new(),
            motor_piezo: piezo,
            motor_mems: mems,
        }
    }
}

/// One deployed device: all seven sensor series.
#[derive(Debug, Clone, PartialEq)]
pub struct FarmDevice {
    pub device: u32,
    pub series: Vec<(FarmSpec, SensorSeries)>,
}

/// The full experiment corpus in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub spec: BundleSpec,
    pub farm: Vec<FarmDevice>,
    pub piezo: Vec<MotorRecording>,
    pub mems: Vec<MotorRecording>,
}

impl DatasetBundle {
    pub fn farm_series_count(&self) -> usize {
        self.farm.iter().map(|d| d.series.len()).sum()
    }
}

/// Generates the whole corpus for a bundle spec.
pub fn dataset_bundle(spec: &BundleSpec) -> Result<DatasetBundle> {
    let mut farm = Vec::new();
    for device in 1..=spec.devices {
        let mut series = Vec::new();
        for (s_idx, sensor) in FarmSensor::ALL.into_iter().enumerate() {
            let seed = derive_seed(spec.seed, &[1, device as u64, s_idx as u64]);
            let mut fs = FarmSpec::new(sensor, spec.duration_days, seed);
            if let Some((_, profile)) = spec.farm_profiles.iter().find(|(s, _)| *s == sensor) {
                fs.profile = profile.clone();
            }
            fs.anomalies = spec.farm_anomalies.clone();
            let generated = gen_farm(&fs)?;
            series.push((fs, generated));
        }
        farm.push(FarmDevice { device, series });
    }
    let piezo = gen_motor(&spec.motor_piezo)?;
    let mems = gen_motor(&spec.motor_mems)?;
    Ok(DatasetBundle {
        spec: spec.clone(),
        farm,
        piezo,
        mems,
    })
}
