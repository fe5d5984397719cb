//! Channel transfer coefficients and MIMO channel matrices.
//!
//! Each antenna pair sees a deterministic line-of-sight term attenuated by
//! spreading and absorption. The absorbed share is either lost to noise
//! ([`ReRadiationMode::NoiseOnly`]) or re-emitted with a random phase and
//! added as a scattered term ([`ReRadiationMode::Scattering`]).

use std::f64::consts::TAU;
use std::fmt;

use nalgebra::{DMatrix, Point3};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::geometry::{pairwise_distances, ArrayGeometry, GeometryError};
use crate::linkbudget::{fspl_amplitude, rician_k_factor, KFactor, LinkError, SPEED_OF_LIGHT};
use crate::{CMatrix, C64};

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("pure line-of-sight channel (k = 0): the Rician decomposition is degenerate")]
    PureLos,
    #[error("normalized decomposition needs a scattering-mode channel")]
    NotScattering,
}

/// Statistics of the re-radiated phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PhaseModel {
    /// Deterministic magnitude, phase uniform on `[0, 2 pi)`.
    #[default]
    UniformPhase,
    /// Circularly-symmetric complex normal with the same mean power.
    ComplexGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReRadiationMode {
    NoiseOnly,
    Scattering(PhaseModel),
}

impl ReRadiationMode {
    pub fn is_scattering(self) -> bool {
        matches!(self, ReRadiationMode::Scattering(_))
    }

    /// Short tag used in CSV output.
    pub fn tag(self) -> &'static str {
        match self {
            ReRadiationMode::NoiseOnly => "noise",
            ReRadiationMode::Scattering(_) => "scattering",
        }
    }
}

impl fmt::Display for ReRadiationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

fn check_inputs(frequency: f64, distance: f64, absorption: f64) -> Result<(), LinkError> {
    for (name, value) in [("frequency", frequency), ("distance", distance)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(LinkError::NonPositiveInput { name, value });
        }
    }
    if !(absorption >= 0.0 && absorption.is_finite()) {
        return Err(LinkError::NegativeAbsorption(absorption));
    }
    Ok(())
}

/// `(c / 4 pi f d) e^{-k d / 2} e^{j 2 pi d / lambda}`.
pub fn los_coefficient(frequency: f64, distance: f64, absorption: f64) -> Result<C64, ChannelError> {
    check_inputs(frequency, distance, absorption)?;
    let magnitude = fspl_amplitude(frequency, distance) * (-absorption * distance / 2.0).exp();
    // reduce d / lambda before scaling so the phase keeps full precision
    let cycles = (distance * frequency / SPEED_OF_LIGHT).fract();
    Ok(C64::from_polar(magnitude, TAU * cycles))
}

/// Random re-radiated coefficient with mean power `(1 - e^{-k d}) (c / 4 pi f d)^2`.
pub fn reradiation_coefficient<R: Rng + ?Sized>(
    frequency: f64,
    distance: f64,
    absorption: f64,
    model: PhaseModel,
    rng: &mut R,
) -> Result<C64, ChannelError> {
    check_inputs(frequency, distance, absorption)?;
    let amplitude =
        (-(-absorption * distance).exp_m1()).sqrt() * fspl_amplitude(frequency, distance);
    Ok(match model {
        PhaseModel::UniformPhase => {
            let beta: f64 = rng.random();
            C64::from_polar(amplitude, TAU * beta)
        }
        PhaseModel::ComplexGaussian => {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im) * (amplitude / std::f64::consts::SQRT_2)
        }
    })
}

/// Channel between two arrays with its constituents.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub h: CMatrix,
    pub h_los: CMatrix,
    pub h_a: CMatrix,
    pub mode: ReRadiationMode,
    pub frequency_hz: f64,
    pub absorption_per_m: f64,
    /// Center-to-center distance.
    pub distance_m: f64,
    /// Per-pair distances, rows indexed by receive element.
    pub distances: DMatrix<f64>,
    pub seed: Option<u64>,
}

fn centroid(a: &ArrayGeometry) -> Point3<f64> {
    let sum = a
        .positions()
        .iter()
        .fold(nalgebra::Vector3::zeros(), |acc, p| acc + p.coords);
    Point3::from(sum / a.len() as f64)
}

/// Builds the `n_r x n_t` channel from exact per-pair distances. Scattered
/// phases are drawn row by row, independently per antenna pair.
pub fn assemble_channel<R: Rng + ?Sized>(
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
    frequency: f64,
    absorption: f64,
    mode: ReRadiationMode,
    rng: &mut R,
) -> Result<ChannelMatrix, ChannelError> {
    let distances = pairwise_distances(tx, rx)?;
    let (nr, nt) = distances.shape();
    let mut h_los = CMatrix::zeros(nr, nt);
    let mut h_a = CMatrix::zeros(nr, nt);
    for i in 0..nr {
        for j in 0..nt {
            let d = distances[(i, j)];
            h_los[(i, j)] = los_coefficient(frequency, d, absorption)?;
            if let ReRadiationMode::Scattering(model) = mode {
                h_a[(i, j)] = reradiation_coefficient(frequency, d, absorption, model, rng)?;
            }
        }
    }
    let h = match mode {
        ReRadiationMode::NoiseOnly => h_los.clone(),
        ReRadiationMode::Scattering(_) => &h_los + &h_a,
    };
    Ok(ChannelMatrix {
        h,
        h_los,
        h_a,
        mode,
        frequency_hz: frequency,
        absorption_per_m: absorption,
        distance_m: (centroid(rx) - centroid(tx)).norm(),
        distances,
        seed: None,
    })
}

impl ChannelMatrix {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn shape(&self) -> (usize, usize) {
        self.h.shape()
    }

    /// RMS free-space amplitude over all pairs, `sqrt(mean (c / 4 pi f d_ij)^2)`.
    ///
    /// Dividing by it gives entries of unit average power.
    pub fn power_normalization(&self) -> f64 {
        let n = self.distances.len() as f64;
        let mean = self
            .distances
            .iter()
            .map(|&d| fspl_amplitude(self.frequency_hz, d).powi(2))
            .sum::<f64>()
            / n;
        mean.sqrt()
    }

    /// `h` scaled to unit average entry power.
    pub fn normalized(&self) -> CMatrix {
        &self.h / C64::from(self.power_normalization())
    }

    pub fn k_factor(&self) -> KFactor {
        rician_k_factor(self.absorption_per_m, self.distance_m)
    }
}

/// Unit-power constituents of a scattering channel.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedChannel {
    pub k_factor: KFactor,
    /// Unit-modulus LoS entries.
    pub los: CMatrix,
    /// Re-radiated entries with unit mean power.
    pub scattered: CMatrix,
}

impl NormalizedChannel {
    /// `sqrt(K/(K+1)) los + sqrt(1/(K+1)) scattered`.
    pub fn recombine(&self) -> CMatrix {
        &self.los * C64::from(self.k_factor.los_weight())
            + &self.scattered * C64::from(self.k_factor.scatter_weight())
    }
}

/// Splits a scattering channel into the K-factor and normalized constituents.
pub fn normalized_decomposition(h: &ChannelMatrix) -> Result<NormalizedChannel, ChannelError> {
    if !h.mode.is_scattering() {
        return Err(ChannelError::NotScattering);
    }
    let k_factor = h.k_factor();
    if k_factor.is_pure_los() || h.absorption_per_m == 0.0 {
        return Err(ChannelError::PureLos);
    }
    let f = h.frequency_hz;
    let k = h.absorption_per_m;
    let los = CMatrix::from_fn(h.h_los.nrows(), h.h_los.ncols(), |i, j| {
        let d = h.distances[(i, j)];
        h.h_los[(i, j)] / (fspl_amplitude(f, d) * (-k * d / 2.0).exp())
    });
    let scattered = CMatrix::from_fn(h.h_a.nrows(), h.h_a.ncols(), |i, j| {
        let d = h.distances[(i, j)];
        h.h_a[(i, j)] / ((-(-k * d).exp_m1()).sqrt() * fspl_amplitude(f, d))
    });
    Ok(NormalizedChannel {
        k_factor,
        los,
        scattered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_square_array, ArrayPose};
    use crate::linkbudget::wavelength;
    use crate::rng::substream;
    use approx::assert_relative_eq;

    const SCATTER: ReRadiationMode = ReRadiationMode::Scattering(PhaseModel::UniformPhase);

    fn link(n: usize, d: f64, f: f64) -> (ArrayGeometry, ArrayGeometry) {
        let s = wavelength(f) / 2.0;
        let tx = build_square_array(n, s, &ArrayPose::new(Point3::origin(), [0.3, 0.5, 0.7])).unwrap();
        let rx = build_square_array(n, s, &ArrayPose::new(Point3::new(d, 0.0, 0.0), [1.3, 2.5, 0.1])).unwrap();
        (tx, rx)
    }

    #[test]
    fn los_coefficient_examples() {
        let f = 60e9;
        let h = los_coefficient(f, 10.0, 0.0).unwrap();
        assert_relative_eq!(h.norm(), fspl_amplitude(f, 10.0), max_relative = 1e-14);
        let lambda = wavelength(f);
        let h = los_coefficient(f, 2000.0 * lambda, 0.0).unwrap();
        assert!(h.arg().abs() < 1e-6, "{}", h.arg());
        let d = 10.0;
        let halved = los_coefficient(f, d, 4f64.ln() / d).unwrap();
        assert_relative_eq!(halved.norm(), 0.5 * fspl_amplitude(f, d), max_relative = 1e-14);
        assert!(los_coefficient(-1.0, 1.0, 0.0).is_err());
        assert!(los_coefficient(1e9, 1.0, -1.0).is_err());
    }

    #[test]
    fn reradiation_examples() {
        let mut rng = substream(1, 0);
        for model in [PhaseModel::UniformPhase, PhaseModel::ComplexGaussian] {
            let h = reradiation_coefficient(60e9, 10.0, 0.0, model, &mut rng).unwrap();
            assert_eq!(h, C64::new(0.0, 0.0));
        }
        let expected = (1.0 - (-1f64).exp()).sqrt() * fspl_amplitude(60e9, 10.0);
        for _ in 0..10 {
            let h = reradiation_coefficient(60e9, 10.0, 0.1, PhaseModel::UniformPhase, &mut rng).unwrap();
            assert_relative_eq!(h.norm(), expected, max_relative = 1e-14);
        }
    }

    #[test]
    fn reradiation_statistics() {
        let n = 100_000;
        let f = 60e9;
        let d = 10.0;
        let power = (1.0 - (-1f64).exp()) * fspl_amplitude(f, d).powi(2);
        for model in [PhaseModel::UniformPhase, PhaseModel::ComplexGaussian] {
            let mut rng = substream(9, 0);
            let mut sum = C64::new(0.0, 0.0);
            let mut psum = 0.0;
            for _ in 0..n {
                let h = reradiation_coefficient(f, d, 0.1, model, &mut rng).unwrap();
                sum += h;
                psum += h.norm_sqr();
            }
            let mean = sum / n as f64;
            // per-component std is sqrt(power / 2)
            let tol = 3.0 * (power / 2.0).sqrt() / (n as f64).sqrt();
            assert!(mean.re.abs() < tol && mean.im.abs() < tol, "{model:?} {mean}");
            assert!((psum / n as f64 / power - 1.0).abs() < 0.01, "{model:?}");
        }
    }

    #[test]
    fn single_pair_matches_los_coefficient() {
        let (tx, rx) = link(1, 10.0, 60e9);
        let ch = assemble_channel(&tx, &rx, 60e9, 0.0, SCATTER, &mut substream(0, 0)).unwrap();
        assert_eq!(ch.h[(0, 0)], los_coefficient(60e9, 10.0, 0.0).unwrap());
        assert!((ch.distance_m - 10.0).abs() < 1e-12);
    }

    #[test]
    fn noise_only_channel_is_rank_one_far_field() {
        // at 10 km the residual rank of a 4x4 pair is below 1e-6
        let (tx, rx) = link(16, 10e3, 60e9);
        let ch = assemble_channel(&tx, &rx, 60e9, 1e-5, ReRadiationMode::NoiseOnly, &mut substream(0, 0)).unwrap();
        assert_eq!(ch.h, ch.h_los);
        assert!(ch.h_a.iter().all(|z| *z == C64::new(0.0, 0.0)));
        let sv = ch.h.clone().singular_values();
        let max = sv.max();
        let second = sv.iter().copied().filter(|&v| v < max).fold(0.0, f64::max);
        assert!(second / max < 1e-6, "{}", second / max);
    }

    #[test]
    fn same_seed_same_bytes() {
        let (tx, rx) = link(9, 5.0, 60e9);
        let a = assemble_channel(&tx, &rx, 60e9, 0.1, SCATTER, &mut substream(5, 3)).unwrap();
        let b = assemble_channel(&tx, &rx, 60e9, 0.1, SCATTER, &mut substream(5, 3)).unwrap();
        let bits = |m: &CMatrix| m.iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect::<Vec<_>>();
        assert_eq!(bits(&a.h), bits(&b.h));
    }

    #[test]
    fn elementwise_power_split() {
        let (tx, rx) = link(9, 5.0, 60e9);
        let ch = assemble_channel(&tx, &rx, 60e9, 0.2, SCATTER, &mut substream(2, 0)).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                let g = fspl_amplitude(60e9, ch.distances[(i, j)]).powi(2);
                let sum = ch.h_los[(i, j)].norm_sqr() + ch.h_a[(i, j)].norm_sqr();
                assert_relative_eq!(sum, g, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn decomposition_weights_and_roundtrip() {
        let d = 10.0;
        let (tx, rx) = link(16, d, 60e9);
        let k = 2f64.ln() / d;
        let ch = assemble_channel(&tx, &rx, 60e9, k, SCATTER, &mut substream(3, 0)).unwrap();
        let norm = normalized_decomposition(&ch).unwrap();
        assert_relative_eq!(norm.k_factor.los_weight(), 0.5f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(norm.k_factor.scatter_weight(), 0.5f64.sqrt(), max_relative = 1e-12);
        for z in norm.los.iter() {
            assert_relative_eq!(z.norm(), 1.0, max_relative = 1e-12);
        }
        for z in norm.scattered.iter() {
            assert_relative_eq!(z.norm(), 1.0, max_relative = 1e-12);
        }
        let rebuilt = norm.recombine() * C64::from(fspl_amplitude(60e9, d));
        let rel = (&rebuilt - &ch.h).norm() / ch.h.norm();
        assert!(rel < 1e-3, "{rel}");

        let vac = assemble_channel(&tx, &rx, 60e9, 0.0, SCATTER, &mut substream(3, 0)).unwrap();
        assert_eq!(normalized_decomposition(&vac), Err(ChannelError::PureLos));
        let noise = assemble_channel(&tx, &rx, 60e9, k, ReRadiationMode::NoiseOnly, &mut substream(3, 0)).unwrap();
        assert_eq!(normalized_decomposition(&noise), Err(ChannelError::NotScattering));
    }

    #[test]
    fn far_field_los_rank() {
        // sigma_2 / sigma_1 ~ 2 pi s_t s_r / (lambda d) with s the RMS
        // transverse extents, so it falls as 1/d
        let f = 60e9;
        let ratio = |d: f64| {
            let (tx, rx) = link(64, d, f);
            assert!(tx.diagonal() <= d / 100.0);
            let ch = assemble_channel(&tx, &rx, f, 0.0, SCATTER, &mut substream(0, 0)).unwrap();
            let mut sv: Vec<f64> = ch.h.clone().singular_values().iter().copied().collect();
            sv.sort_by(|a, b| b.total_cmp(a));
            sv[1] / sv[0]
        };
        let near = ratio(10.0);
        let far = ratio(40.0);
        assert!(far <= 1e-3, "{far}");
        assert!((near / far - 4.0).abs() < 0.1, "{near} {far}");
    }

    #[test]
    fn global_phase_invariance() {
        let (tx, rx) = link(9, 3.0, 60e9);
        let ch = assemble_channel(&tx, &rx, 60e9, 0.3, SCATTER, &mut substream(4, 0)).unwrap();
        let rotated = &ch.h * C64::from_polar(1.0, 1.234);
        let mut a: Vec<f64> = ch.h.clone().singular_values().iter().copied().collect();
        let mut b: Vec<f64> = rotated.singular_values().iter().copied().collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12 * a[a.len() - 1]);
        }
    }
}
