//! Monte-Carlo points, sweeps and singular-value histograms.
//!
//! Every trial draws its own random stream keyed by the master seed and the
//! trial index, so results do not depend on how trials are scheduled.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::Point3;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::channel::{assemble_channel, ChannelError, PhaseModel, ReRadiationMode};
use crate::geometry::{build_square_array, check_far_field, random_pose, ArrayPose, GeometryError};
use crate::linkbudget::{
    dbm_to_watts, from_db, rician_k_factor, sky_noise_psd, wavelength, LinkConfig, LinkError,
    DEFAULT_NOISE_FLOOR_DBM,
};
use crate::mimo::{
    condition_number, effective_rank, scheme_capacity_from_gains, singular_values, MimoError,
    Scheme,
};
use crate::rng::substream;
use crate::spectra::{AbsorptionDatabase, GasMixture, SpectraError};
use crate::stats::{ks_statistic, Estimate};
use crate::CMatrix;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("trial count must be at least 1")]
    NoTrials,
    #[error("no precoding schemes requested")]
    NoSchemes,
    #[error("sweep range [{start}, {stop}] with {points} points is invalid: {reason}")]
    InvalidSweep {
        start: f64,
        stop: f64,
        points: usize,
        reason: &'static str,
    },
    #[error("singular-value histogram needs scattering mode")]
    NotScattering,
    #[error("histogram needs at least one bin")]
    NoBins,
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Mimo(#[from] MimoError),
}

/// Where the medium absorption coefficient comes from.
#[derive(Debug, Clone)]
pub enum AbsorptionSource {
    /// Frequency-independent `k` in 1/m.
    Fixed(f64),
    /// `k(f)` composed from species spectra.
    Mixture {
        database: Arc<AbsorptionDatabase>,
        mixture: GasMixture,
    },
}

impl AbsorptionSource {
    pub fn coefficient(&self, frequency: f64) -> Result<f64, SpectraError> {
        match self {
            AbsorptionSource::Fixed(k) => Ok(*k),
            AbsorptionSource::Mixture { database, mixture } => {
                database.mixture_coefficient(mixture, frequency)
            }
        }
    }
}

impl PartialEq for AbsorptionSource {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (AbsorptionSource::Fixed(a), AbsorptionSource::Fixed(b)) => a == b,
            (
                AbsorptionSource::Mixture { database: a, mixture: ma },
                AbsorptionSource::Mixture { database: b, mixture: mb },
            ) => {
                ma == mb
                    && a.species().eq(b.species())
                    && a.species().all(|s| a.get(s) == b.get(s))
            }
            _ => false,
        }
    }
}

/// How transmit power and noise are set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SnrConvention {
    /// Physical channel with path loss, `P_t` and the noise floor.
    FixedTransmitPower,
    /// Channel scaled to unit average entry power and `P / sigma^2 = rho`.
    FixedReceivedSnr { snr_db: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SweepAxis {
    Frequency,
    Distance,
    Absorption,
    /// Transmit power in W, or the received SNR in dB under
    /// [`SnrConvention::FixedReceivedSnr`].
    Power,
}

impl SweepAxis {
    pub fn tag(self) -> &'static str {
        match self {
            SweepAxis::Frequency => "frequency",
            SweepAxis::Distance => "distance",
            SweepAxis::Absorption => "absorption",
            SweepAxis::Power => "power",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "frequency" => Ok(SweepAxis::Frequency),
            "distance" => Ok(SweepAxis::Distance),
            "absorption" => Ok(SweepAxis::Absorption),
            "power" => Ok(SweepAxis::Power),
            other => Err(format!(
                "unknown sweep axis {other:?} (expected frequency, distance, absorption or power)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |reason| {
            Err(ExperimentError::InvalidSweep {
                start: self.start,
                stop: self.stop,
                points: self.points,
                reason,
            })
        };
        if self.points == 0 {
            return bad("needs at least one point");
        }
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return bad("bounds must be finite");
        }
        if self.stop < self.start {
            return bad("stop must not be below start");
        }
        let signed = self.axis == SweepAxis::Power;
        if self.spacing == Spacing::Log && !(self.start > 0.0) {
            return bad("log spacing needs a positive start");
        }
        if !signed && !(self.start > 0.0) && self.axis != SweepAxis::Absorption {
            return bad("values must be positive");
        }
        if self.axis == SweepAxis::Absorption && self.start < 0.0 {
            return bad("absorption must be non-negative");
        }
        Ok(())
    }

    /// Sweep values in increasing order.
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                let t = i as f64 / last;
                let v = match self.spacing {
                    Spacing::Linear => self.start + t * (self.stop - self.start),
                    Spacing::Log => {
                        let (a, b) = (self.start.ln(), self.stop.ln());
                        (a + t * (b - a)).exp()
                    }
                };
                // pin the ends exactly
                if i == 0 {
                    self.start
                } else if i + 1 == self.points {
                    self.stop
                } else {
                    v
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub frequency_hz: f64,
    pub distance_m: f64,
    pub tx_power_w: f64,
    pub noise_floor_w: f64,
    pub bandwidth_hz: f64,
    pub n_tx: usize,
    pub n_rx: usize,
    /// Inter-element spacing in wavelengths at the operating frequency.
    pub spacing_wavelengths: f64,
    /// Draw a random orientation for both arrays on every trial.
    pub random_orientation: bool,
    pub absorption: AbsorptionSource,
    pub mode: ReRadiationMode,
    pub schemes: Vec<Scheme>,
    pub trials: usize,
    pub seed: u64,
    pub threshold_db: f64,
    pub snr: SnrConvention,
    pub sweep: Option<SweepSpec>,
}

pub const DEFAULT_TRIALS: usize = 5000;
pub const DEFAULT_SEED: u64 = 1;

impl ExperimentConfig {
    /// Defaults for a link at `frequency_hz` over `distance_m`: 64x64 arrays
    /// at half-wavelength spacing, 150 mW, -80 dBm noise floor, vacuum.
    pub fn new(frequency_hz: f64, distance_m: f64) -> Self {
        Self {
            frequency_hz,
            distance_m,
            tx_power_w: 0.15,
            noise_floor_w: dbm_to_watts(DEFAULT_NOISE_FLOOR_DBM),
            bandwidth_hz: 1.0,
            n_tx: 64,
            n_rx: 64,
            spacing_wavelengths: 0.5,
            random_orientation: true,
            absorption: AbsorptionSource::Fixed(0.0),
            mode: ReRadiationMode::Scattering(PhaseModel::UniformPhase),
            schemes: vec![Scheme::Bf, Scheme::ClMp, Scheme::OlMp],
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            threshold_db: 0.0,
            snr: SnrConvention::FixedTransmitPower,
            sweep: None,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.trials == 0 {
            return Err(ExperimentError::NoTrials);
        }
        if self.schemes.is_empty() {
            return Err(ExperimentError::NoSchemes);
        }
        if !(self.spacing_wavelengths > 0.0 && self.spacing_wavelengths.is_finite()) {
            return Err(GeometryError::NonPositiveSpacing(self.spacing_wavelengths).into());
        }
        let pose = ArrayPose::identity(Point3::origin());
        build_square_array(self.n_tx, self.spacing_wavelengths, &pose)?;
        build_square_array(self.n_rx, self.spacing_wavelengths, &pose)?;
        self.link_config(self.absorption_at_frequency()?)?;
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        Ok(())
    }

    fn absorption_at_frequency(&self) -> Result<f64, ExperimentError> {
        Ok(self.absorption.coefficient(self.frequency_hz)?)
    }

    fn link_config(&self, absorption: f64) -> Result<LinkConfig, LinkError> {
        LinkConfig {
            frequency_hz: self.frequency_hz,
            distance_m: self.distance_m,
            tx_power_w: self.tx_power_w,
            noise_floor_w: self.noise_floor_w,
            absorption_per_m: absorption,
            bandwidth_hz: self.bandwidth_hz,
        }
        .validated()
    }

    /// Copy of the config with the sweep axis set to `value`.
    pub fn at(&self, axis: SweepAxis, value: f64) -> Self {
        let mut cfg = self.clone();
        cfg.sweep = None;
        match axis {
            SweepAxis::Frequency => cfg.frequency_hz = value,
            SweepAxis::Distance => cfg.distance_m = value,
            SweepAxis::Absorption => cfg.absorption = AbsorptionSource::Fixed(value),
            SweepAxis::Power => match cfg.snr {
                SnrConvention::FixedTransmitPower => cfg.tx_power_w = value,
                SnrConvention::FixedReceivedSnr { .. } => {
                    cfg.snr = SnrConvention::FixedReceivedSnr { snr_db: value }
                }
            },
        }
        cfg
    }
}

/// Aggregated result for one sweep point and scheme.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityStats {
    pub sweep_value: f64,
    pub frequency_hz: f64,
    pub distance_m: f64,
    pub absorption_per_m: f64,
    pub mode: &'static str,
    pub scheme: &'static str,
    pub capacity_mean: f64,
    pub capacity_std: f64,
    pub capacity_se: f64,
    /// `10 log10 K`; infinite for a pure line-of-sight channel.
    pub k_factor_db: f64,
    pub rank_mean: f64,
    pub cond_db: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Transmit power, noise and the channel scaling used on every trial.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Budget {
    power: f64,
    noise: f64,
    normalize: bool,
}

fn budget(cfg: &ExperimentConfig, link: &LinkConfig) -> Result<Budget, ExperimentError> {
    let sky = sky_noise_psd(link.frequency_hz, link.absorption_per_m)? * link.bandwidth_hz;
    let absorbed = -(-link.optical_depth()).exp_m1();
    Ok(match (cfg.snr, cfg.mode) {
        (SnrConvention::FixedTransmitPower, ReRadiationMode::Scattering(_)) => Budget {
            power: link.tx_power_w,
            noise: link.noise_floor_w + sky,
            normalize: false,
        },
        (SnrConvention::FixedTransmitPower, ReRadiationMode::NoiseOnly) => Budget {
            power: link.tx_power_w,
            noise: link.noise_floor_w + crate::linkbudget::molecular_noise_power(link)?,
            normalize: false,
        },
        (SnrConvention::FixedReceivedSnr { snr_db }, ReRadiationMode::Scattering(_)) => Budget {
            power: from_db(snr_db),
            noise: 1.0,
            normalize: true,
        },
        (SnrConvention::FixedReceivedSnr { snr_db }, ReRadiationMode::NoiseOnly) => {
            // unit power; the floor sits at 1/rho, sky noise relative to the
            // floor, self-induced noise at the absorbed share of the signal
            let rho = from_db(snr_db);
            Budget {
                power: 1.0,
                noise: (link.noise_floor_w + sky) / (link.noise_floor_w * rho) + absorbed,
                normalize: true,
            }
        }
    })
}

/// Channel of one trial: random poses, then the per-pair coefficients. With
/// `normalized` the matrix is scaled to unit average entry power.
pub fn trial_channel(
    cfg: &ExperimentConfig,
    absorption: f64,
    trial: u64,
    normalized: bool,
) -> Result<CMatrix, ExperimentError> {
    let mut rng = substream(cfg.seed, trial);
    let spacing = cfg.spacing_wavelengths * wavelength(cfg.frequency_hz);
    let tx_center = Point3::origin();
    let rx_center = Point3::new(cfg.distance_m, 0.0, 0.0);
    let (tx_pose, rx_pose) = if cfg.random_orientation {
        (
            random_pose(&mut rng, tx_center),
            random_pose(&mut rng, rx_center),
        )
    } else {
        (ArrayPose::identity(tx_center), ArrayPose::identity(rx_center))
    };
    let tx = build_square_array(cfg.n_tx, spacing, &tx_pose)?;
    let rx = build_square_array(cfg.n_rx, spacing, &rx_pose)?;
    let channel = assemble_channel(&tx, &rx, cfg.frequency_hz, absorption, cfg.mode, &mut rng)?;
    Ok(if normalized {
        channel.normalized()
    } else {
        channel.h
    })
}

struct TrialOutcome {
    capacities: Vec<f64>,
    rank: f64,
    cond_db: f64,
}

fn run_trial(
    cfg: &ExperimentConfig,
    absorption: f64,
    budget: Budget,
    trial: u64,
) -> Result<TrialOutcome, ExperimentError> {
    let h = trial_channel(cfg, absorption, trial, budget.normalize)?;
    let gains = singular_values(&h)?;
    let siso = h[(0, 0)].norm_sqr();
    let capacities = cfg
        .schemes
        .iter()
        .map(|&s| {
            scheme_capacity_from_gains(&gains, siso, s, budget.power, budget.noise)
                .map(|r| r.capacity)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TrialOutcome {
        capacities,
        rank: effective_rank(&gains, budget.power, budget.noise, cfg.threshold_db) as f64,
        cond_db: condition_number(&gains).db(),
    })
}

fn value_on_axis(cfg: &ExperimentConfig, absorption: f64) -> f64 {
    match cfg.sweep.map(|s| s.axis) {
        Some(SweepAxis::Distance) => cfg.distance_m,
        Some(SweepAxis::Absorption) => absorption,
        Some(SweepAxis::Power) => match cfg.snr {
            SnrConvention::FixedTransmitPower => cfg.tx_power_w,
            SnrConvention::FixedReceivedSnr { snr_db } => snr_db,
        },
        _ => cfg.frequency_hz,
    }
}

fn run_point_at(cfg: &ExperimentConfig, sweep_value: f64) -> Result<Vec<CapacityStats>, ExperimentError> {
    if cfg.trials == 0 {
        return Err(ExperimentError::NoTrials);
    }
    if cfg.schemes.is_empty() {
        return Err(ExperimentError::NoSchemes);
    }
    let absorption = cfg.absorption_at_frequency()?;
    let link = cfg.link_config(absorption)?;
    let budget = budget(cfg, &link)?;
    let spacing = cfg.spacing_wavelengths * wavelength(cfg.frequency_hz);
    let pose = ArrayPose::identity(Point3::origin());
    check_far_field(
        &build_square_array(cfg.n_tx, spacing, &pose)?,
        &build_square_array(cfg.n_rx, spacing, &pose)?,
        cfg.distance_m,
    );

    let outcomes: Vec<TrialOutcome> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(cfg, absorption, budget, t))
        .collect::<Result<_, _>>()?;

    let ranks: Vec<f64> = outcomes.iter().map(|o| o.rank).collect();
    let conds: Vec<f64> = outcomes.iter().map(|o| o.cond_db).collect();
    let rank_mean = Estimate::from_samples(&ranks).mean;
    let cond_db = Estimate::from_samples(&conds).mean;
    let k_factor_db = rician_k_factor(absorption, cfg.distance_m).db();

    Ok(cfg
        .schemes
        .iter()
        .enumerate()
        .map(|(i, &scheme)| {
            let samples: Vec<f64> = outcomes.iter().map(|o| o.capacities[i]).collect();
            let est = Estimate::from_samples(&samples);
            CapacityStats {
                sweep_value,
                frequency_hz: cfg.frequency_hz,
                distance_m: cfg.distance_m,
                absorption_per_m: absorption,
                mode: cfg.mode.tag(),
                scheme: scheme.tag(),
                capacity_mean: est.mean,
                capacity_std: est.std,
                capacity_se: est.se,
                k_factor_db,
                rank_mean,
                cond_db,
                trials: cfg.trials,
                seed: cfg.seed,
            }
        })
        .collect())
}

/// One row per requested scheme at the configured operating point.
pub fn run_point(cfg: &ExperimentConfig) -> Result<Vec<CapacityStats>, ExperimentError> {
    let absorption = cfg.absorption_at_frequency()?;
    run_point_at(cfg, value_on_axis(cfg, absorption))
}

/// Rows for every sweep value in increasing order, schemes in config order.
/// Without a sweep spec this is [`run_point`].
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<CapacityStats>, ExperimentError> {
    let Some(spec) = cfg.sweep else {
        return run_point(cfg);
    };
    spec.validate()?;
    let mut rows = Vec::new();
    for value in spec.values() {
        let point = cfg.at(spec.axis, value);
        rows.extend(run_point_at(&point, value)?);
    }
    Ok(rows)
}

/// Quarter-circle density `sqrt(4 - x^2) / pi` on `[0, 2]`.
pub fn quarter_circle_density(x: f64) -> f64 {
    if !(0.0..=2.0).contains(&x) {
        return 0.0;
    }
    (4.0 - x * x).max(0.0).sqrt() / std::f64::consts::PI
}

pub fn quarter_circle_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 2.0 {
        return 1.0;
    }
    (x * (4.0 - x * x).sqrt() + 4.0 * (x / 2.0).asin()) / (2.0 * std::f64::consts::PI)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SvHistogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    /// KS distance of the pooled sample to the quarter-circle law.
    pub ks: f64,
    pub samples: usize,
    pub k_factor_db: f64,
}

/// Pooled singular values of `H / sqrt(n_t)` over all trials, with the
/// channel normalized to unit average entry power.
pub fn singular_value_samples(cfg: &ExperimentConfig) -> Result<Vec<f64>, ExperimentError> {
    if !cfg.mode.is_scattering() {
        return Err(ExperimentError::NotScattering);
    }
    if cfg.trials == 0 {
        return Err(ExperimentError::NoTrials);
    }
    let absorption = cfg.absorption_at_frequency()?;
    cfg.link_config(absorption)?;
    let scale = (cfg.n_tx as f64).sqrt();
    let per_trial: Vec<Vec<f64>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| -> Result<Vec<f64>, ExperimentError> {
            let h = trial_channel(cfg, absorption, t, true)?;
            let g = singular_values(&h)?;
            Ok(g.values().iter().map(|v| v / scale).collect())
        })
        .collect::<Result<_, _>>()?;
    Ok(per_trial.into_iter().flatten().collect())
}

pub fn singular_value_histogram(
    cfg: &ExperimentConfig,
    bins: usize,
) -> Result<SvHistogram, ExperimentError> {
    if bins == 0 {
        return Err(ExperimentError::NoBins);
    }
    let samples = singular_value_samples(cfg)?;
    let top = samples.iter().cloned().fold(2.0, f64::max);
    let width = top / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| i as f64 * width).collect();
    let mut counts = vec![0usize; bins];
    for &s in &samples {
        let idx = ((s / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let n = samples.len() as f64;
    let density = counts.iter().map(|&c| c as f64 / (n * width)).collect();
    let absorption = cfg.absorption_at_frequency()?;
    Ok(SvHistogram {
        edges,
        density,
        ks: ks_statistic(&samples, quarter_circle_cdf),
        samples: samples.len(),
        k_factor_db: rician_k_factor(absorption, cfg.distance_m).db(),
    })
}
