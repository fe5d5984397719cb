//! Scalar link-budget physics.
//!
//! Powers are total band powers in watts. The noise PSD helpers follow the
//! per-hertz convention: with the default 1 Hz reference bandwidth a band
//! power and its density have the same numeric value.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinkError {
    #[error("{name} must be positive, got {value}")]
    NonPositiveInput { name: &'static str, value: f64 },
    #[error("absorption coefficient must be non-negative, got {0}")]
    NegativeAbsorption(f64),
    #[error("frequency must be positive, got {0}")]
    NonPositiveFrequency(f64),
}

/// CODATA constants plus the reference temperature of the molecular-noise model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub speed_of_light: f64,
    pub boltzmann: f64,
    pub reference_temperature_k: f64,
}

pub const CONSTANTS: PhysicalConstants = PhysicalConstants {
    speed_of_light: 299_792_458.0,
    boltzmann: 1.380_649e-23,
    reference_temperature_k: 296.0,
};

pub const SPEED_OF_LIGHT: f64 = CONSTANTS.speed_of_light;

/// Non-molecular noise floor of the reference scenario.
pub const DEFAULT_NOISE_FLOOR_DBM: f64 = -80.0;

pub fn to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * from_db(dbm)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    to_db(watts / 1e-3)
}

pub fn wavelength(frequency: f64) -> f64 {
    SPEED_OF_LIGHT / frequency
}

fn positive(name: &'static str, value: f64) -> Result<f64, LinkError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(LinkError::NonPositiveInput { name, value })
    }
}

fn non_negative_absorption(k: f64) -> Result<f64, LinkError> {
    if k >= 0.0 && k.is_finite() {
        Ok(k)
    } else {
        Err(LinkError::NegativeAbsorption(k))
    }
}

/// Free-space amplitude gain `c / (4 pi f d)`.
pub(crate) fn fspl_amplitude(frequency: f64, distance: f64) -> f64 {
    SPEED_OF_LIGHT / (4.0 * PI * frequency * distance)
}

/// Spreading loss `(4 pi f d / c)^2`.
pub fn fspl_attenuation(frequency: f64, distance: f64) -> Result<f64, LinkError> {
    positive("frequency", frequency)?;
    positive("distance", distance)?;
    let a = 4.0 * PI * frequency * distance / SPEED_OF_LIGHT;
    Ok(a * a)
}

/// Absorption loss `e^{k d}`.
pub fn molecular_attenuation(absorption: f64, distance: f64) -> Result<f64, LinkError> {
    non_negative_absorption(absorption)?;
    positive("distance", distance)?;
    Ok((absorption * distance).exp())
}

pub fn total_attenuation(frequency: f64, distance: f64, absorption: f64) -> Result<f64, LinkError> {
    Ok(fspl_attenuation(frequency, distance)? * molecular_attenuation(absorption, distance)?)
}

/// One transmitter/receiver pair in a homogeneous absorbing medium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    pub frequency_hz: f64,
    pub distance_m: f64,
    /// Total transmit power in the reference bandwidth (W).
    pub tx_power_w: f64,
    /// Thermal and other non-molecular noise power (W).
    pub noise_floor_w: f64,
    pub absorption_per_m: f64,
    pub bandwidth_hz: f64,
}

impl LinkConfig {
    pub fn new(
        frequency_hz: f64,
        distance_m: f64,
        tx_power_w: f64,
        absorption_per_m: f64,
    ) -> Result<Self, LinkError> {
        Self {
            frequency_hz,
            distance_m,
            tx_power_w,
            noise_floor_w: dbm_to_watts(DEFAULT_NOISE_FLOOR_DBM),
            absorption_per_m,
            bandwidth_hz: 1.0,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self, LinkError> {
        positive("frequency", self.frequency_hz)?;
        positive("distance", self.distance_m)?;
        positive("transmit power", self.tx_power_w)?;
        positive("noise floor", self.noise_floor_w)?;
        positive("bandwidth", self.bandwidth_hz)?;
        non_negative_absorption(self.absorption_per_m)?;
        Ok(self)
    }

    pub fn with_noise_floor(self, noise_floor_w: f64) -> Result<Self, LinkError> {
        Self {
            noise_floor_w,
            ..self
        }
        .validated()
    }

    /// Optical depth `k d`.
    pub fn optical_depth(&self) -> f64 {
        self.absorption_per_m * self.distance_m
    }

    fn spreading_gain(&self) -> f64 {
        let a = fspl_amplitude(self.frequency_hz, self.distance_m);
        a * a
    }

    /// Power reaching the receiver before absorption, `P_t (c/4 pi f d)^2`.
    pub fn free_space_power(&self) -> f64 {
        self.tx_power_w * self.spreading_gain()
    }
}

/// `P_t (c/4 pi f d)^2 e^{-k d}`.
pub fn los_received_power(cfg: &LinkConfig) -> f64 {
    cfg.free_space_power() * (-cfg.optical_depth()).exp()
}

fn absorbed_fraction(cfg: &LinkConfig) -> f64 {
    -(-cfg.optical_depth()).exp_m1()
}

fn reradiated(cfg: &LinkConfig) -> f64 {
    cfg.tx_power_w * absorbed_fraction(cfg) * cfg.spreading_gain()
}

/// Power re-emitted toward the receiver, `P_t (1 - e^{-k d}) (c/4 pi f d)^2`.
pub fn reradiated_power(cfg: &LinkConfig) -> f64 {
    reradiated(cfg)
}

/// Sky noise density `k_B T0 L (c / (sqrt(4 pi) f))^2` with the saturated
/// emissivity `L = 1` for any absorbing medium and `0` in vacuum.
pub fn sky_noise_psd(frequency: f64, absorption: f64) -> Result<f64, LinkError> {
    if !(frequency > 0.0 && frequency.is_finite()) {
        return Err(LinkError::NonPositiveFrequency(frequency));
    }
    non_negative_absorption(absorption)?;
    if absorption == 0.0 {
        return Ok(0.0);
    }
    let a = SPEED_OF_LIGHT / ((4.0 * PI).sqrt() * frequency);
    Ok(CONSTANTS.boltzmann * CONSTANTS.reference_temperature_k * a * a)
}

/// Signal-correlated molecular noise; same expression as [`reradiated_power`].
pub fn self_induced_noise_psd(cfg: &LinkConfig) -> f64 {
    reradiated(cfg)
}

pub fn molecular_noise_psd(cfg: &LinkConfig) -> Result<f64, LinkError> {
    Ok(sky_noise_psd(cfg.frequency_hz, cfg.absorption_per_m)? + self_induced_noise_psd(cfg))
}

/// Molecular noise integrated over the reference bandwidth (W).
pub fn molecular_noise_power(cfg: &LinkConfig) -> Result<f64, LinkError> {
    Ok(sky_noise_psd(cfg.frequency_hz, cfg.absorption_per_m)? * cfg.bandwidth_hz
        + self_induced_noise_psd(cfg))
}

/// Rician K-factor of the LoS/re-radiation split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KFactor {
    Finite(f64),
    /// No absorption: the channel is pure line of sight.
    PureLos,
}

impl KFactor {
    pub fn from_linear(k: f64) -> Self {
        if k.is_infinite() {
            KFactor::PureLos
        } else {
            KFactor::Finite(k)
        }
    }

    pub fn linear(self) -> f64 {
        match self {
            KFactor::Finite(k) => k,
            KFactor::PureLos => f64::INFINITY,
        }
    }

    pub fn db(self) -> f64 {
        match self {
            KFactor::Finite(k) => to_db(k),
            KFactor::PureLos => f64::INFINITY,
        }
    }

    /// Amplitude weight of the LoS term, `sqrt(K / (K + 1))`.
    pub fn los_weight(self) -> f64 {
        match self {
            KFactor::Finite(k) => (k / (k + 1.0)).sqrt(),
            KFactor::PureLos => 1.0,
        }
    }

    /// Amplitude weight of the scattered term, `sqrt(1 / (K + 1))`.
    pub fn scatter_weight(self) -> f64 {
        match self {
            KFactor::Finite(k) => (1.0 / (k + 1.0)).sqrt(),
            KFactor::PureLos => 0.0,
        }
    }

    pub fn is_pure_los(self) -> bool {
        matches!(self, KFactor::PureLos)
    }
}

/// `K = e^{-k d} / (1 - e^{-k d})`; [`KFactor::PureLos`] when `k d = 0`.
pub fn rician_k_factor(absorption: f64, distance: f64) -> KFactor {
    let depth = absorption * distance;
    if !(depth > 0.0) {
        return KFactor::PureLos;
    }
    KFactor::Finite(1.0 / depth.exp_m1())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn fspl_examples() {
        let a = fspl_attenuation(60e9, 10.0).unwrap();
        assert!((to_db(a) - 88.0).abs() < 0.1, "{}", to_db(a));
        let a2 = fspl_attenuation(60e9, 20.0).unwrap();
        assert_relative_eq!(a2 / a, 4.0, max_relative = 1e-15);
        let unit = fspl_attenuation(SPEED_OF_LIGHT / (4.0 * PI), 1.0).unwrap();
        assert_relative_eq!(unit, 1.0, max_relative = 1e-15);
        assert!(matches!(
            fspl_attenuation(0.0, 1.0),
            Err(LinkError::NonPositiveInput { .. })
        ));
    }

    #[test]
    fn absorption_examples() {
        assert_eq!(molecular_attenuation(0.0, 10.0).unwrap(), 1.0);
        assert_relative_eq!(molecular_attenuation(0.1, 10.0).unwrap(), std::f64::consts::E, max_relative = 1e-15);
        assert!((molecular_attenuation(0.2302585, 10.0).unwrap() - 10.0).abs() < 1e-6);
        assert!(matches!(
            molecular_attenuation(-0.1, 1.0),
            Err(LinkError::NegativeAbsorption(_))
        ));
    }

    #[test]
    fn total_attenuation_examples() {
        assert_eq!(
            total_attenuation(60e9, 10.0, 0.0).unwrap(),
            fspl_attenuation(60e9, 10.0).unwrap()
        );
        let t = to_db(total_attenuation(60e9, 10.0, 0.1).unwrap());
        let expected = to_db(fspl_attenuation(60e9, 10.0).unwrap()) + 10.0 * std::f64::consts::E.log10();
        assert!((t - expected).abs() < 1e-9);
        assert!((t - 92.343).abs() < 0.1);
        let mut prev = 0.0;
        for d in [0.01, 0.1, 1.0, 10.0, 100.0] {
            let a = total_attenuation(60e9, d, 0.01).unwrap();
            assert!(a > prev);
            prev = a;
        }
    }

    #[test]
    fn received_power_examples() {
        let vac = LinkConfig::new(60e9, 10.0, 0.15, 0.0).unwrap();
        assert_relative_eq!(
            los_received_power(&vac),
            0.15 / fspl_attenuation(60e9, 10.0).unwrap(),
            max_relative = 1e-14
        );
        let half = LinkConfig::new(60e9, 10.0, 0.15, 2f64.ln() / 10.0).unwrap();
        assert_relative_eq!(los_received_power(&half), 0.5 * los_received_power(&vac), max_relative = 1e-14);
        let unit = LinkConfig::new(60e9, 10.0, 0.15, 0.1).unwrap();
        let db = watts_to_dbm(los_received_power(&unit));
        assert!((db - (watts_to_dbm(0.15) - 92.34)).abs() < 0.02, "{db}");
    }

    #[test]
    fn reradiated_power_examples() {
        let vac = LinkConfig::new(60e9, 10.0, 0.15, 0.0).unwrap();
        assert_eq!(reradiated_power(&vac), 0.0);
        let opaque = LinkConfig::new(60e9, 10.0, 0.15, 1e3).unwrap();
        assert_relative_eq!(
            reradiated_power(&opaque),
            0.15 / fspl_attenuation(60e9, 10.0).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn noise_examples() {
        assert_eq!(sky_noise_psd(60e9, 0.0).unwrap(), 0.0);
        let sky = sky_noise_psd(60e9, 0.01).unwrap();
        assert!((sky - 8.1e-27).abs() < 0.05e-27, "{sky}");
        assert_eq!(sky, sky_noise_psd(60e9, 123.0).unwrap());
        assert!(matches!(
            sky_noise_psd(0.0, 0.1),
            Err(LinkError::NonPositiveFrequency(_))
        ));

        let cfg = LinkConfig::new(60e9, 10.0, 1.0, 2f64.ln() / 10.0).unwrap();
        let g = fspl_amplitude(60e9, 10.0).powi(2);
        assert_relative_eq!(self_induced_noise_psd(&cfg), 0.5 * g, max_relative = 1e-14);
        assert_eq!(
            self_induced_noise_psd(&cfg).to_bits(),
            reradiated_power(&cfg).to_bits()
        );
        let vac = LinkConfig::new(60e9, 10.0, 1.0, 0.0).unwrap();
        assert_eq!(self_induced_noise_psd(&vac), 0.0);
        assert_eq!(molecular_noise_psd(&vac).unwrap(), 0.0);
        assert_relative_eq!(
            molecular_noise_psd(&cfg).unwrap(),
            sky_noise_psd(60e9, cfg.absorption_per_m).unwrap() + 0.5 * g,
            max_relative = 1e-14
        );
    }

    #[test]
    fn k_factor_examples() {
        let one = rician_k_factor(2f64.ln(), 1.0);
        assert_relative_eq!(one.linear(), 1.0, max_relative = 1e-14);
        assert!(one.db().abs() < 1e-12);
        let k = rician_k_factor(0.01, 100.0);
        let e = (-1f64).exp();
        assert_relative_eq!(k.linear(), e / (1.0 - e), max_relative = 1e-14);
        assert!((k.linear() - 0.582).abs() < 1e-3);
        assert!((k.db() + 2.35).abs() < 0.01);
        assert!(rician_k_factor(50.0, 100.0).linear() < 1e-200);
        assert_eq!(rician_k_factor(0.0, 10.0), KFactor::PureLos);
        assert_eq!(KFactor::PureLos.db(), f64::INFINITY);
    }

    proptest! {
        #[test]
        fn power_conservation(
            f in 1e9f64..1e12, d in 0.1f64..100.0, p in 1e-4f64..10.0, k in 0.0f64..10.0,
        ) {
            let cfg = LinkConfig::new(f, d, p, k).unwrap();
            let total = los_received_power(&cfg) + reradiated_power(&cfg);
            let expected = p * fspl_amplitude(f, d).powi(2);
            prop_assert!((total - expected).abs() <= 1e-14 * expected);
        }

        #[test]
        fn k_factor_identity(k in 1e-6f64..10.0, d in 0.1f64..100.0) {
            let kf = rician_k_factor(k, d).linear();
            let e = (-k * d).exp();
            prop_assert!((kf * (1.0 - e) - e).abs() <= 1e-12 * e.max(1e-300) + 1e-300);
        }

        #[test]
        fn monotonicity(k in 1e-4f64..1.0, d in 0.1f64..10.0, s in 1.01f64..3.0) {
            prop_assert!(rician_k_factor(k * s, d).linear() < rician_k_factor(k, d).linear());
            prop_assert!(rician_k_factor(k, d * s).linear() < rician_k_factor(k, d).linear());
            prop_assert!(molecular_attenuation(k * s, d).unwrap() > molecular_attenuation(k, d).unwrap());
            prop_assert!(molecular_attenuation(k, d * s).unwrap() > molecular_attenuation(k, d).unwrap());
        }
    }
}
