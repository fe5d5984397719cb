//! Analytical Rician capacity bounds and their absorption limits.
//!
//! All quantities use the normalized model: unit average entry power,
//! transmit power `rho` and unit noise, so `rho` is the received SNR of an
//! equivalent single link.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linkbudget::KFactor;
use crate::mimo::{capacity_equal_power, singular_values, waterfill, capacity_allocated, MimoError};
use crate::rng::substream;
use crate::stats::Estimate;
use crate::{CMatrix, C64};

#[derive(Debug, Error, PartialEq)]
pub enum BoundsError {
    #[error("antenna counts must be at least 1, got {n_tx}x{n_rx}")]
    NoAntennas { n_tx: usize, n_rx: usize },
    #[error("SNR must be positive and finite, got {0}")]
    NonPositiveSnr(f64),
    #[error("K-factor must be non-negative, got {0}")]
    NegativeK(f64),
    #[error("trial count must be at least 1")]
    NoTrials,
    #[error(transparent)]
    Mimo(#[from] MimoError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub n_tx: usize,
    pub n_rx: usize,
    /// Received SNR (linear).
    pub rho: f64,
    pub k: KFactor,
}

impl BoundInputs {
    pub fn new(n_tx: usize, n_rx: usize, rho: f64, k: KFactor) -> Result<Self, BoundsError> {
        if n_tx == 0 || n_rx == 0 {
            return Err(BoundsError::NoAntennas { n_tx, n_rx });
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(BoundsError::NonPositiveSnr(rho));
        }
        if let KFactor::Finite(v) = k {
            if !(v >= 0.0) {
                return Err(BoundsError::NegativeK(v));
            }
        }
        Ok(Self { n_tx, n_rx, rho, k })
    }

    pub fn square(n: usize, rho: f64, k: KFactor) -> Result<Self, BoundsError> {
        Self::new(n, n, rho, k)
    }
}

fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// Water-filling capacity upper bound of a Rician channel with full CSI.
pub fn upper_bound(inp: &BoundInputs) -> f64 {
    let nt = inp.n_tx as f64;
    let nr = inp.n_rx as f64;
    let per_antenna = inp.rho / nt;
    let k = match inp.k {
        KFactor::PureLos => return log2_1p(nr * nt * inp.rho),
        KFactor::Finite(k) => k,
    };
    let threshold = k * (1.0 + k) / (nr * (1.0 + nt * k));
    let excess = (per_antenna - threshold).max(0.0);
    let first = nr * (1.0 + nt * k) / (k + 1.0) * (per_antenna.min(threshold) * nt + excess);
    log2_1p(first) + (nt - 1.0) * log2_1p(nr / (1.0 + k) * excess)
}

/// The same bound for `n x n` arrays written in terms of the optical depth
/// `k d`, with `e = e^{-k d}` in place of `K = e / (1 - e)`.
pub fn upper_bound_square(n: usize, rho: f64, optical_depth: f64) -> f64 {
    let nf = n as f64;
    if !(optical_depth > 0.0) {
        return log2_1p(nf * nf * rho);
    }
    let e = (-optical_depth).exp();
    let absorbed = -(-optical_depth).exp_m1();
    let spread = 1.0 + (nf - 1.0) * e;
    let knee = (e / absorbed) / spread;
    let excess = (rho - knee).max(0.0);
    log2_1p(spread * (rho.min(knee) * nf + excess)) + (nf - 1.0) * log2_1p(absorbed * excess)
}

/// `(n log2(1 + rho), log2(1 + n^2 rho))`: capacities at full and zero absorption.
pub fn limit_capacities(n: usize, rho: f64) -> (f64, f64) {
    let nf = n as f64;
    (nf * log2_1p(rho), log2_1p(nf * nf * rho))
}

/// How the NLoS share scales the SNR in the lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum LowerBoundScaling {
    /// `rho / (K + 1)`: the NLoS part carries `1 / (K + 1)` of the power.
    #[default]
    Power,
    /// `rho sqrt(1 / (K + 1))`.
    Amplitude,
}

impl LowerBoundScaling {
    pub fn factor(self, k: KFactor) -> f64 {
        let share = match k {
            KFactor::PureLos => 0.0,
            KFactor::Finite(k) => 1.0 / (k + 1.0),
        };
        match self {
            LowerBoundScaling::Power => share,
            LowerBoundScaling::Amplitude => share.sqrt(),
        }
    }
}

/// `n_r x n_t` matrix of i.i.d. `CN(0, 1)` entries.
pub fn rayleigh_matrix<R: Rng + ?Sized>(n_rx: usize, n_tx: usize, rng: &mut R) -> CMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(n_rx, n_tx, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * scale, im * scale)
    })
}

/// Normalized Rician draw: a rank-one unit-modulus LoS matrix with random
/// steering phases plus i.i.d. Rayleigh scattering.
pub fn rician_matrix<R: Rng + ?Sized>(n_rx: usize, n_tx: usize, k: KFactor, rng: &mut R) -> CMatrix {
    let tau = std::f64::consts::TAU;
    let a: Vec<C64> = (0..n_rx)
        .map(|_| C64::from_polar(1.0, tau * rng.random::<f64>()))
        .collect();
    let b: Vec<C64> = (0..n_tx)
        .map(|_| C64::from_polar(1.0, tau * rng.random::<f64>()))
        .collect();
    let los = DMatrix::from_fn(n_rx, n_tx, |i, j| a[i] * b[j].conj());
    let scattered = rayleigh_matrix(n_rx, n_tx, rng);
    los * C64::from(k.los_weight()) + scattered * C64::from(k.scatter_weight())
}

fn run_trials<F>(trials: usize, seed: u64, f: F) -> Result<Vec<f64>, BoundsError>
where
    F: Fn(&mut crate::rng::TrialRng) -> Result<f64, BoundsError> + Sync,
{
    if trials == 0 {
        return Err(BoundsError::NoTrials);
    }
    (0..trials as u64)
        .into_par_iter()
        .map(|i| f(&mut substream(seed, i)))
        .collect()
}

/// Monte-Carlo lower bound: mean equal-power capacity of the scattered part
/// alone at the scaled SNR.
pub fn lower_bound_estimate(
    inp: &BoundInputs,
    trials: usize,
    seed: u64,
    scaling: LowerBoundScaling,
) -> Result<Estimate, BoundsError> {
    let snr = inp.rho * scaling.factor(inp.k);
    let samples = run_trials(trials, seed, |rng| {
        if snr == 0.0 {
            return Ok(0.0);
        }
        let h = rayleigh_matrix(inp.n_rx, inp.n_tx, rng);
        Ok(capacity_equal_power(&singular_values(&h)?, snr, 1.0)?)
    })?;
    Ok(Estimate::from_samples(&samples))
}

/// Mean capacities of the normalized Rician model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicianCapacity {
    pub equal_power: Estimate,
    pub waterfilled: Estimate,
}

pub fn rician_capacity_estimate(
    inp: &BoundInputs,
    trials: usize,
    seed: u64,
) -> Result<RicianCapacity, BoundsError> {
    if trials == 0 {
        return Err(BoundsError::NoTrials);
    }
    let pairs: Vec<(f64, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i);
            let h = rician_matrix(inp.n_rx, inp.n_tx, inp.k, &mut rng);
            let gains = singular_values(&h)?;
            let eq = capacity_equal_power(&gains, inp.rho, 1.0)?;
            let wf = capacity_allocated(&gains, &waterfill(&gains, inp.rho, 1.0)?, 1.0)?;
            Ok((eq, wf))
        })
        .collect::<Result<_, BoundsError>>()?;
    let eq: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let wf: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    Ok(RicianCapacity {
        equal_power: Estimate::from_samples(&eq),
        waterfilled: Estimate::from_samples(&wf),
    })
}
