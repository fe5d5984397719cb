//! SVD capacity engine.
//!
//! A channel `H = U S V^H` decomposes into `m = min(n_r, n_t)` parallel
//! eigenchannels with gains `lambda_i`. Precoding schemes differ only in how
//! they spread the power budget over those channels, so each scheme is
//! evaluated through the capacity it induces.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linkbudget::{from_db, molecular_noise_power, LinkConfig, LinkError};
use crate::{CMatrix, C64};

#[derive(Debug, Error, PartialEq)]
pub enum MimoError {
    #[error("SVD did not converge for a {0}x{1} matrix")]
    NumericalFailure(usize, usize),
    #[error("channel matrix has non-finite entries")]
    NonFinite,
    #[error("transmit power must be positive, got {0}")]
    NonPositivePower(f64),
    #[error("noise power must be positive, got {0}")]
    NonPositiveNoise(f64),
    #[error("all eigenchannel gains are zero")]
    AllZeroGains,
    #[error("allocation has {got} entries for {expected} eigenchannels")]
    AllocationLength { expected: usize, got: usize },
    #[error("unknown precoding scheme {0:?}")]
    UnknownScheme(String),
    #[error(transparent)]
    Link(#[from] LinkError),
}

/// Singular values of a channel, non-increasing, with optional right vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdGains {
    values: Vec<f64>,
    /// `n_t x m` matrix of right singular vectors, column i pairs with value i.
    right_vectors: Option<CMatrix>,
    n_rx: usize,
    n_tx: usize,
}

impl SvdGains {
    /// Gains of a virtual `n_rx x n_tx` channel given directly.
    pub fn from_values(mut values: Vec<f64>, n_rx: usize, n_tx: usize) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        Self {
            values,
            right_vectors: None,
            n_rx,
            n_tx,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn right_vectors(&self) -> Option<&CMatrix> {
        self.right_vectors.as_ref()
    }

    pub fn n_rx(&self) -> usize {
        self.n_rx
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    /// Number of eigenchannels `min(n_r, n_t)`.
    pub fn dims(&self) -> usize {
        self.values.len()
    }

    pub fn largest(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }
}

fn decompose(h: &CMatrix, with_vectors: bool) -> Result<SvdGains, MimoError> {
    let (nr, nt) = h.shape();
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(MimoError::NonFinite);
    }
    let svd = h
        .clone()
        .try_svd(false, with_vectors, f64::EPSILON, 0)
        .ok_or(MimoError::NumericalFailure(nr, nt))?;
    let raw: Vec<f64> = svd.singular_values.iter().copied().collect();
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| raw[b].total_cmp(&raw[a]));
    let values = order.iter().map(|&i| raw[i]).collect();
    let right_vectors = match svd.v_t {
        Some(v_t) if with_vectors => {
            let v = v_t.adjoint();
            Some(CMatrix::from_fn(nt, order.len(), |r, c| v[(r, order[c])]))
        }
        _ => None,
    };
    Ok(SvdGains {
        values,
        right_vectors,
        n_rx: nr,
        n_tx: nt,
    })
}

/// Singular values and right singular vectors of `h`.
pub fn svd_gains(h: &CMatrix) -> Result<SvdGains, MimoError> {
    decompose(h, true)
}

/// Singular values only; cheaper than [`svd_gains`].
pub fn singular_values(h: &CMatrix) -> Result<SvdGains, MimoError> {
    decompose(h, false)
}

fn check_budget(power: f64, noise: f64) -> Result<(), MimoError> {
    if !(power > 0.0 && power.is_finite()) {
        return Err(MimoError::NonPositivePower(power));
    }
    if !(noise > 0.0 && noise.is_finite()) {
        return Err(MimoError::NonPositiveNoise(noise));
    }
    Ok(())
}

fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// Equal power per transmit antenna: `sum_i log2(1 + P lambda_i^2 / (n_t sigma^2))`.
pub fn capacity_equal_power(gains: &SvdGains, power: f64, noise: f64) -> Result<f64, MimoError> {
    check_budget(power, noise)?;
    let scale = power / (gains.n_tx as f64 * noise);
    Ok(gains.values.iter().map(|l| log2_1p(scale * l * l)).sum())
}

/// Determinant form `log2 det(I + P/(n_t sigma^2) H H^H)`, evaluated through a
/// Cholesky factor.
pub fn capacity_equal_power_det(h: &CMatrix, power: f64, noise: f64) -> Result<f64, MimoError> {
    check_budget(power, noise)?;
    let (nr, nt) = h.shape();
    let scale = C64::from(power / (nt as f64 * noise));
    let gram = CMatrix::identity(nr, nr) + h * h.adjoint() * scale;
    let chol = gram
        .cholesky()
        .ok_or(MimoError::NumericalFailure(nr, nt))?;
    let l = chol.l_dirty();
    Ok((0..nr).map(|i| 2.0 * l[(i, i)].re.log2()).sum())
}

/// Per-eigenchannel powers aligned with [`SvdGains::values`].
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub powers: Vec<f64>,
    pub budget: f64,
    /// Water level `mu`; `NaN` for allocations not produced by water-filling.
    pub water_level: f64,
}

impl PowerAllocation {
    pub fn total(&self) -> f64 {
        self.powers.iter().sum()
    }

    /// Everything on the strongest eigenchannel.
    pub fn single_stream(dims: usize, budget: f64) -> Self {
        let mut powers = vec![0.0; dims];
        if let Some(p) = powers.first_mut() {
            *p = budget;
        }
        Self {
            powers,
            budget,
            water_level: f64::NAN,
        }
    }

    pub fn equal(dims: usize, budget: f64) -> Self {
        Self {
            powers: vec![budget / dims as f64; dims],
            budget,
            water_level: f64::NAN,
        }
    }

    pub fn active_streams(&self) -> usize {
        self.powers.iter().filter(|&&p| p > 0.0).count()
    }
}

/// Water-filling `P_i = max(mu - sigma^2 / lambda_i^2, 0)` with `sum P_i = P`.
pub fn waterfill(gains: &SvdGains, power: f64, noise: f64) -> Result<PowerAllocation, MimoError> {
    check_budget(power, noise)?;
    // floor levels sigma^2 / lambda^2, in the non-increasing gain order
    let floors: Vec<f64> = gains
        .values
        .iter()
        .map(|&l| if l > 0.0 { noise / (l * l) } else { f64::INFINITY })
        .collect();
    let usable = floors.iter().take_while(|f| f.is_finite()).count();
    if usable == 0 {
        return Err(MimoError::AllZeroGains);
    }
    let mut active = usable;
    let mut level = 0.0;
    while active > 0 {
        let sum: f64 = floors[..active].iter().sum();
        level = (power + sum) / active as f64;
        if level > floors[active - 1] {
            break;
        }
        active -= 1;
    }
    let powers = floors
        .iter()
        .enumerate()
        .map(|(i, &f)| if i < active { level - f } else { 0.0 })
        .collect();
    Ok(PowerAllocation {
        powers,
        budget: power,
        water_level: level,
    })
}

/// `sum_i log2(1 + P_i lambda_i^2 / sigma^2)`.
pub fn capacity_allocated(
    gains: &SvdGains,
    alloc: &PowerAllocation,
    noise: f64,
) -> Result<f64, MimoError> {
    if !(noise > 0.0 && noise.is_finite()) {
        return Err(MimoError::NonPositiveNoise(noise));
    }
    if alloc.powers.len() != gains.values.len() {
        return Err(MimoError::AllocationLength {
            expected: gains.values.len(),
            got: alloc.powers.len(),
        });
    }
    Ok(gains
        .values
        .iter()
        .zip(&alloc.powers)
        .map(|(l, p)| log2_1p(p * l * l / noise))
        .sum())
}

/// Precoding schemes compared by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Single-stream beamforming on the dominant right singular vector.
    Bf,
    /// Closed-loop multiplexing: SVD precoding with water-filling.
    ClMp,
    /// Open-loop multiplexing: identity precoder, equal power per antenna.
    OlMp,
    /// Single antenna pair reference link.
    SisoRef,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Bf, Scheme::ClMp, Scheme::OlMp, Scheme::SisoRef];

    pub fn tag(self) -> &'static str {
        match self {
            Scheme::Bf => "BF",
            Scheme::ClMp => "CL-MP",
            Scheme::OlMp => "OL-MP",
            Scheme::SisoRef => "SISO",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Scheme {
    type Err = MimoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().replace('_', "-").as_str() {
            "BF" => Ok(Scheme::Bf),
            "CL-MP" | "CLMP" => Ok(Scheme::ClMp),
            "OL-MP" | "OLMP" => Ok(Scheme::OlMp),
            "SISO" | "SISO-REF" => Ok(Scheme::SisoRef),
            _ => Err(MimoError::UnknownScheme(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub scheme: Scheme,
    pub capacity: f64,
    pub allocation: PowerAllocation,
    pub streams: usize,
}

/// Evaluates one scheme from precomputed gains. `siso_gain` is `|h_11|^2`,
/// only read for [`Scheme::SisoRef`].
pub fn scheme_capacity_from_gains(
    gains: &SvdGains,
    siso_gain: f64,
    scheme: Scheme,
    power: f64,
    noise: f64,
) -> Result<SchemeResult, MimoError> {
    check_budget(power, noise)?;
    let dims = gains.dims();
    let result = match scheme {
        Scheme::Bf => {
            let allocation = PowerAllocation::single_stream(dims, power);
            let l = gains.largest();
            SchemeResult {
                scheme,
                capacity: log2_1p(power * l * l / noise),
                allocation,
                streams: 1,
            }
        }
        Scheme::ClMp => {
            let allocation = waterfill(gains, power, noise)?;
            SchemeResult {
                scheme,
                capacity: capacity_allocated(gains, &allocation, noise)?,
                streams: allocation.active_streams(),
                allocation,
            }
        }
        Scheme::OlMp => {
            let mut powers = vec![power / gains.n_tx as f64; dims];
            powers.truncate(dims);
            SchemeResult {
                scheme,
                capacity: capacity_equal_power(gains, power, noise)?,
                allocation: PowerAllocation {
                    powers,
                    budget: power,
                    water_level: f64::NAN,
                },
                streams: dims,
            }
        }
        Scheme::SisoRef => SchemeResult {
            scheme,
            capacity: log2_1p(power * siso_gain / noise),
            allocation: PowerAllocation::single_stream(1, power),
            streams: 1,
        },
    };
    Ok(result)
}

/// Evaluates `schemes` on `h` with a single SVD.
pub fn evaluate_schemes(
    h: &CMatrix,
    schemes: &[Scheme],
    power: f64,
    noise: f64,
) -> Result<Vec<SchemeResult>, MimoError> {
    let gains = singular_values(h)?;
    let siso = h.get((0, 0)).map_or(0.0, |z| z.norm_sqr());
    schemes
        .iter()
        .map(|&s| scheme_capacity_from_gains(&gains, siso, s, power, noise))
        .collect()
}

pub fn scheme_capacity(
    h: &CMatrix,
    scheme: Scheme,
    power: f64,
    noise: f64,
) -> Result<SchemeResult, MimoError> {
    Ok(evaluate_schemes(h, &[scheme], power, noise)?.remove(0))
}

/// Eigenchannels whose SNR under an equal split `P / m` clears `threshold_db`.
pub fn effective_rank(gains: &SvdGains, power: f64, noise: f64, threshold_db: f64) -> usize {
    let m = gains.dims().max(1) as f64;
    let threshold = from_db(threshold_db);
    gains
        .values
        .iter()
        .filter(|&&l| power * l * l / (m * noise) >= threshold)
        .count()
}

/// Largest ratio reported by [`condition_number`].
pub const CONDITION_CAP: f64 = 1e15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionNumber {
    pub ratio: f64,
}

impl ConditionNumber {
    /// `20 log10(lambda_1 / lambda_m)`, the power-ratio dB of the gains.
    pub fn db(self) -> f64 {
        20.0 * self.ratio.log10()
    }
}

/// `lambda_1 / lambda_m` with `lambda_m` floored at `lambda_1 * 1e-15`.
pub fn condition_number(gains: &SvdGains) -> ConditionNumber {
    let first = gains.largest();
    let last = gains.values.last().copied().unwrap_or(0.0);
    if !(first > 0.0) {
        return ConditionNumber {
            ratio: CONDITION_CAP,
        };
    }
    ConditionNumber {
        ratio: first / last.max(first / CONDITION_CAP),
    }
}

/// Total noise when re-radiation is treated as noise: floor plus molecular noise.
pub fn noise_with_molecular(cfg: &LinkConfig) -> Result<f64, MimoError> {
    Ok(cfg.noise_floor_w + molecular_noise_power(cfg)?)
}

/// Capacities of `h_los` with re-radiation counted as noise.
pub fn capacity_noise_interpretation(
    h_los: &CMatrix,
    cfg: &LinkConfig,
    schemes: &[Scheme],
) -> Result<Vec<SchemeResult>, MimoError> {
    let noise = noise_with_molecular(cfg)?;
    evaluate_schemes(h_los, schemes, cfg.tx_power_w, noise)
}

/// Real-valued helper: `H^H H` eigenvalues, used by diagnostics.
pub fn gram_eigenvalues(h: &CMatrix) -> Vec<f64> {
    let gram: DMatrix<C64> = h.adjoint() * h;
    let mut ev: Vec<f64> = gram.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian(nr: usize, nt: usize, seed: u64) -> CMatrix {
        let mut rng = substream(seed, 0);
        CMatrix::from_fn(nr, nt, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im) / 2f64.sqrt()
        })
    }

    fn ones(n: usize) -> CMatrix {
        CMatrix::from_element(n, n, C64::new(1.0, 0.0))
    }

    /// Haar-ish unitary from the QR of a Gaussian matrix.
    fn unitary(n: usize, seed: u64) -> CMatrix {
        gaussian(n, n, seed).qr().q()
    }

    #[test]
    fn svd_examples() {
        let g = svd_gains(&CMatrix::identity(3, 3)).unwrap();
        for v in g.values() {
            assert_relative_eq!(*v, 1.0, max_relative = 1e-14);
        }
        let g = svd_gains(&ones(2)).unwrap();
        assert_relative_eq!(g.values()[0], 2.0, max_relative = 1e-14);
        assert!(g.values()[1].abs() < 1e-14);
    }

    #[test]
    fn svd_matches_gram_eigenvalues() {
        // oracle: eigenvalues of H H^H from the Hermitian eigensolver
        let h = gaussian(5, 5, 11);
        let g = svd_gains(&h).unwrap();
        let hh: CMatrix = &h * h.adjoint();
        let mut ev: Vec<f64> = hh.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        for (l, e) in g.values().iter().zip(&ev) {
            assert_relative_eq!(l * l, *e, max_relative = 1e-8);
        }
    }

    #[test]
    fn svd_reconstruction_and_orthonormality() {
        for (nr, nt, seed) in [(6, 6, 1), (4, 7, 2), (7, 4, 3)] {
            let h = gaussian(nr, nt, seed);
            let g = svd_gains(&h).unwrap();
            assert!(g.values().windows(2).all(|w| w[0] >= w[1]));
            let v = g.right_vectors().unwrap();
            assert_eq!(v.shape(), (nt, nr.min(nt)));
            let vhv = v.adjoint() * v;
            assert!((vhv - CMatrix::identity(v.ncols(), v.ncols())).norm() < 1e-10);
            for (i, l) in g.values().iter().enumerate() {
                let hv = (&h * v.column(i)).norm();
                assert!((hv - l).abs() <= 1e-9 * h.norm());
            }
            if nt <= nr {
                let rebuilt = &h * v * v.adjoint();
                assert!((rebuilt - &h).norm() <= 1e-9 * h.norm());
            }
        }
    }

    #[test]
    fn equal_power_examples() {
        let g = svd_gains(&CMatrix::identity(2, 2)).unwrap();
        assert_relative_eq!(capacity_equal_power(&g, 2.0, 1.0).unwrap(), 2.0, max_relative = 1e-14);
        let n = 4;
        let g = svd_gains(&ones(n)).unwrap();
        let c = capacity_equal_power(&g, 3.0, 1.0).unwrap();
        assert_relative_eq!(c, (1.0 + n as f64 * 3.0).log2(), max_relative = 1e-12);
        assert_eq!(capacity_equal_power(&g, 0.0, 1.0), Err(MimoError::NonPositivePower(0.0)));
    }

    #[test]
    fn det_and_sum_forms_agree() {
        for seed in 0..5 {
            let h = gaussian(4, 4, 100 + seed);
            let g = svd_gains(&h).unwrap();
            let a = capacity_equal_power(&g, 7.0, 0.5).unwrap();
            let b = capacity_equal_power_det(&h, 7.0, 0.5).unwrap();
            assert!((a - b).abs() <= 1e-10 * a, "{a} {b}");
        }
    }

    /// Bisection on the water level, independent of the sorted-prefix search.
    fn bisection_waterfill(gains: &[f64], power: f64, noise: f64) -> Vec<f64> {
        let floors: Vec<f64> = gains.iter().map(|g| noise / (g * g)).collect();
        let used = |mu: f64| floors.iter().map(|f| (mu - f).max(0.0)).sum::<f64>();
        let mut lo = 0.0;
        let mut hi = power + floors.iter().cloned().fold(f64::INFINITY, f64::min);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if used(mid) > power {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        floors.iter().map(|f| (lo - f).max(0.0)).collect()
    }

    #[test]
    fn waterfill_example() {
        // gains^2 / sigma^2 = (4, 1), P = 1
        let g = SvdGains::from_values(vec![2.0, 1.0], 2, 2);
        let a = waterfill(&g, 1.0, 1.0).unwrap();
        assert_relative_eq!(a.water_level, 1.125, max_relative = 1e-14);
        assert_relative_eq!(a.powers[0], 0.875, max_relative = 1e-14);
        assert_relative_eq!(a.powers[1], 0.125, max_relative = 1e-14);
        let oracle = bisection_waterfill(&[2.0, 1.0], 1.0, 1.0);
        for (p, q) in a.powers.iter().zip(&oracle) {
            assert!((p - q).abs() < 1e-12);
        }
        let c = capacity_allocated(&g, &a, 1.0).unwrap();
        assert_relative_eq!(c, 4.5f64.log2() + 1.125f64.log2(), max_relative = 1e-14);
        assert!((c - 2.340).abs() < 1e-3);
        let eq = capacity_allocated(&g, &PowerAllocation::equal(2, 1.0), 1.0).unwrap();
        assert!((eq - 2.170).abs() < 1e-3, "{eq}");
        assert!(c >= eq);
    }

    #[test]
    fn waterfill_trivial_cases() {
        let single = SvdGains::from_values(vec![0.3], 1, 1);
        assert_eq!(waterfill(&single, 2.5, 1.0).unwrap().powers, vec![2.5]);
        let flat = SvdGains::from_values(vec![1.5; 4], 4, 4);
        for p in waterfill(&flat, 2.0, 0.1).unwrap().powers {
            assert_relative_eq!(p, 0.5, max_relative = 1e-14);
        }
        let zero = SvdGains::from_values(vec![0.0, 0.0], 2, 2);
        assert_eq!(waterfill(&zero, 1.0, 1.0), Err(MimoError::AllZeroGains));
    }

    #[test]
    fn allocated_examples() {
        let g = SvdGains::from_values(vec![3.0, 1.0, 0.5], 3, 3);
        let single = PowerAllocation::single_stream(3, 2.0);
        assert_relative_eq!(
            capacity_allocated(&g, &single, 0.7).unwrap(),
            (1.0 + 2.0 * 9.0 / 0.7f64).log2(),
            max_relative = 1e-14
        );
        let zero = PowerAllocation { powers: vec![0.0; 3], budget: 1.0, water_level: f64::NAN };
        assert_eq!(capacity_allocated(&g, &zero, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn schemes_on_rank_one_and_identity() {
        let h = ones(4);
        let bf = scheme_capacity(&h, Scheme::Bf, 2.0, 0.3).unwrap();
        let cl = scheme_capacity(&h, Scheme::ClMp, 2.0, 0.3).unwrap();
        assert!((bf.capacity - cl.capacity).abs() <= 1e-9);
        assert_eq!(bf.streams, 1);

        let id = CMatrix::identity(3, 3);
        let res = evaluate_schemes(&id, &[Scheme::Bf, Scheme::ClMp, Scheme::OlMp], 3.0, 1.0).unwrap();
        // identity: equal split is optimal, BF puts everything on one channel
        assert_relative_eq!(res[1].capacity, res[2].capacity, max_relative = 1e-12);
        assert_relative_eq!(res[1].capacity, 3.0, max_relative = 1e-12);
        assert_relative_eq!(res[0].capacity, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn waterfilling_converges_to_equal_power_at_high_snr() {
        let snr = from_db(30.0);
        let mut gap = 0.0;
        let mut cl_sum = 0.0;
        for seed in 0..20 {
            let h = gaussian(8, 8, 500 + seed);
            let res = evaluate_schemes(&h, &[Scheme::ClMp, Scheme::OlMp], snr, 1.0).unwrap();
            gap += res[0].capacity - res[1].capacity;
            cl_sum += res[0].capacity;
            assert!(res[0].capacity >= res[1].capacity - 1e-9);
        }
        assert!(gap <= 0.02 * cl_sum, "{}", gap / cl_sum);
    }

    #[test]
    fn effective_rank_examples() {
        // P lambda^2 / (m sigma^2) = (2.0, 1.5, 0.5) with P = 3, sigma = 1, m = 3
        let g = SvdGains::from_values(vec![2f64.sqrt(), 1.5f64.sqrt(), 0.5f64.sqrt()], 3, 3);
        assert_eq!(effective_rank(&g, 3.0, 1.0, 0.0), 2);
        assert_eq!(effective_rank(&g, 3.0, 100.0, 0.0), 0);
        let los = svd_gains(&ones(64)).unwrap();
        assert_eq!(effective_rank(&los, 1.0, 1.0, 0.0), 1);
    }

    #[test]
    fn condition_number_examples() {
        let id = svd_gains(&CMatrix::identity(4, 4)).unwrap();
        assert_relative_eq!(condition_number(&id).ratio, 1.0, max_relative = 1e-12);
        assert!(condition_number(&id).db().abs() < 1e-10);
        let r1 = SvdGains::from_values(vec![8.0, 0.0, 0.0], 3, 3);
        assert_relative_eq!(condition_number(&r1).db(), 300.0, max_relative = 1e-12);
        let mut total = 0.0;
        for seed in 0..100 {
            let g = singular_values(&gaussian(64, 64, 1000 + seed)).unwrap();
            let c = condition_number(&g).db();
            assert!(c.is_finite());
            total += c;
        }
        assert!(total / 100.0 < 60.0, "{}", total / 100.0);
    }

    #[test]
    fn noise_interpretation_examples() {
        let h = ones(4) * C64::from(1e-4);
        let vac = LinkConfig::new(60e9, 10.0, 0.15, 0.0).unwrap();
        assert_eq!(noise_with_molecular(&vac).unwrap(), vac.noise_floor_w);
        let absorbing = LinkConfig::new(60e9, 10.0, 0.15, 0.5).unwrap();
        let h_abs = &h * C64::from((-0.5f64 * 10.0 / 2.0).exp());
        let c0 = capacity_noise_interpretation(&h, &vac, &[Scheme::SisoRef]).unwrap()[0].capacity;
        let c1 = capacity_noise_interpretation(&h_abs, &absorbing, &[Scheme::SisoRef]).unwrap()[0].capacity;
        assert!(c1 < c0);
    }

    fn arb_gains() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(1e-3f64..10.0, 1..12)
    }

    proptest! {
        #[test]
        fn waterfill_optimal_and_kkt(values in arb_gains(), power in 0.01f64..100.0, noise in 0.01f64..10.0, seed in any::<u64>()) {
            let n = values.len();
            let g = SvdGains::from_values(values, n, n);
            let a = waterfill(&g, power, noise).unwrap();
            prop_assert!((a.total() - power).abs() <= 1e-12 * power);
            prop_assert!(a.powers.iter().all(|&p| p >= 0.0));
            for (p, l) in a.powers.iter().zip(g.values()) {
                if *p == 0.0 {
                    prop_assert!(noise / (l * l) >= a.water_level * (1.0 - 1e-12));
                }
            }
            let best = capacity_allocated(&g, &a, noise).unwrap();
            let mut rng = substream(seed, 0);
            for _ in 0..100 {
                let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                let s: f64 = w.iter().sum();
                let alloc = PowerAllocation { powers: w.iter().map(|x| x / s * power).collect(), budget: power, water_level: f64::NAN };
                prop_assert!(best >= capacity_allocated(&g, &alloc, noise).unwrap() - 1e-9);
            }
        }

        #[test]
        fn unitary_invariance_and_scaling(seed in 0u64..1000, alpha in 0.1f64..5.0) {
            let n = 4;
            let h = gaussian(n, n, seed);
            let u1 = unitary(n, seed + 1);
            let u2 = unitary(n, seed + 2);
            let rotated = &u1 * &h * &u2;
            for scheme in [Scheme::Bf, Scheme::ClMp, Scheme::OlMp] {
                let a = scheme_capacity(&h, scheme, 3.0, 0.7).unwrap().capacity;
                let b = scheme_capacity(&rotated, scheme, 3.0, 0.7).unwrap().capacity;
                prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
            }
            let scaled = &h * C64::from(alpha);
            let a = capacity_equal_power(&singular_values(&scaled).unwrap(), 2.0, 1.0).unwrap();
            let b = capacity_equal_power(&singular_values(&h).unwrap(), alpha * alpha * 2.0, 1.0).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
            let det_a = capacity_equal_power_det(&h, 2.0, 1.0).unwrap();
            let sum_a = capacity_equal_power(&singular_values(&h).unwrap(), 2.0, 1.0).unwrap();
            prop_assert!((det_a - sum_a).abs() <= 1e-10 * sum_a);
        }

        #[test]
        fn bf_capacity_closed_form(seed in 0u64..1000, power in 0.1f64..10.0) {
            let h = gaussian(3, 5, seed);
            let g = singular_values(&h).unwrap();
            let bf = scheme_capacity_from_gains(&g, 0.0, Scheme::Bf, power, 0.5).unwrap();
            prop_assert_eq!(bf.capacity, (power * g.largest() * g.largest() / 0.5).ln_1p() / std::f64::consts::LN_2);
        }
    }
}
