//! Line-oriented `section.key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Every key must be known; later
//! assignments (including command-line overrides) replace earlier ones.
//! Relative paths resolve against the directory of the config file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::bounds::LowerBoundScaling;
use crate::channel::{PhaseModel, ReRadiationMode};
use crate::experiments::{
    AbsorptionSource, ExperimentConfig, SnrConvention, Spacing, SweepAxis, SweepSpec,
};
use crate::linkbudget::dbm_to_watts;
use crate::mimo::Scheme;
use crate::spectra::{load_mixture, load_species_spectrum, synthetic, AbsorptionDatabase, GasMixture};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{location}: unknown key {key:?}")]
    UnknownKey { key: String, location: String },
    #[error("invalid value for {key}: {reason}")]
    Validation { key: String, reason: String },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Keys accepted in a config file, with their defaults (empty: no default).
pub const KEYS: &[(&str, &str)] = &[
    ("link.frequency_hz", ""),
    ("link.distance_m", ""),
    ("link.tx_power_w", "0.15"),
    ("link.noise_floor_dbm", "-80"),
    ("link.bandwidth_hz", "1"),
    ("array.n_tx", "64"),
    ("array.n_rx", "64"),
    ("array.spacing_wavelengths", "0.5"),
    ("array.random_orientation", "true"),
    ("medium.absorption_per_m", ""),
    ("medium.mixture", ""),
    ("medium.mixture_file", ""),
    ("medium.spectra_dir", ""),
    ("channel.mode", "scattering"),
    ("channel.phase_model", "uniform"),
    ("run.trials", "5000"),
    ("run.seed", "1"),
    ("run.schemes", "BF,CL-MP,OL-MP"),
    ("run.threshold_db", "0"),
    ("run.snr_convention", "fixed_transmit_power"),
    ("run.snr_db", ""),
    ("sweep.axis", ""),
    ("sweep.start", ""),
    ("sweep.stop", ""),
    ("sweep.points", ""),
    ("sweep.spacing", "linear"),
    ("bounds.k_min", "0.1"),
    ("bounds.k_max", "100"),
    ("bounds.points", "20"),
    ("bounds.trials", "2000"),
    ("bounds.scaling", "power"),
    ("svdist.bins", "50"),
];

fn is_known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    origin: String,
}

/// Raw key/value assignments before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigSource {
    entries: BTreeMap<String, Entry>,
    base_dir: PathBuf,
}

impl ConfigSource {
    /// Empty source; relative paths resolve against the working directory.
    pub fn new() -> Self {
        Self::default()
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut src = Self {
            entries: BTreeMap::new(),
            base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |reason: &str| ConfigError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                reason: reason.to_string(),
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err("expected `section.key = value`"))?;
            let key = key.trim();
            if !key.contains('.') {
                return Err(parse_err("keys take the form `section.key`"));
            }
            let value = value.split(" #").next().unwrap_or("").trim();
            src.insert(key, value, format!("{}:{}", path.display(), i + 1))?;
        }
        Ok(src)
    }

    fn insert(&mut self, key: &str, value: &str, origin: String) -> Result<(), ConfigError> {
        if !is_known(key) {
            return Err(ConfigError::UnknownKey {
                key: key.to_string(),
                location: origin,
            });
        }
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                origin,
            },
        );
        Ok(())
    }

    /// Override from the command line or environment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        self.insert(key, value, "command line".to_string())
    }

    /// Parses `key=value`.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (k, v) = pair.split_once('=').ok_or_else(|| ConfigError::Validation {
            key: pair.to_string(),
            reason: "overrides take the form section.key=value".into(),
        })?;
        self.set(k.trim(), v.trim())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .get(key)
            .map(|e| e.value.as_str())
            .filter(|v| !v.is_empty())
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(|v| {
            let p = Path::new(v);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                self.base_dir.join(p)
            }
        })
    }

    /// Validates every key and builds the run settings.
    pub fn resolve(&self) -> Result<Settings, crate::Error> {
        Resolver { src: self }.run()
    }
}

fn invalid(key: &str, reason: impl fmt::Display) -> ConfigError {
    ConfigError::Validation {
        key: key.to_string(),
        reason: reason.to_string(),
    }
}

struct Resolver<'a> {
    src: &'a ConfigSource,
}

impl Resolver<'_> {
    fn raw(&self, key: &str) -> Option<String> {
        self.src.get(key).map(str::to_string).or_else(|| {
            KEYS.iter()
                .find(|(k, _)| *k == key)
                .map(|(_, d)| d.to_string())
                .filter(|d| !d.is_empty())
        })
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|e| {
                let origin = self
                    .src
                    .entries
                    .get(key)
                    .map(|e| e.origin.clone())
                    .unwrap_or_else(|| "default".into());
                invalid(key, format!("{v:?} ({e}; from {origin})"))
            }),
        }
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.parsed(key)?
            .ok_or_else(|| invalid(key, "required but not set"))
    }

    fn positive(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.parsed::<f64>(key)? {
            Some(v) if !(v > 0.0 && v.is_finite()) => Err(invalid(key, format!("{v} must be positive"))),
            other => Ok(other),
        }
    }

    fn count(&self, key: &str) -> Result<usize, ConfigError> {
        let v: usize = self.required(key)?;
        if v == 0 {
            return Err(invalid(key, "must be at least 1"));
        }
        Ok(v)
    }

    fn medium(&self, inputs: &mut Vec<PathBuf>) -> Result<AbsorptionSource, crate::Error> {
        let fixed = self.parsed::<f64>("medium.absorption_per_m")?;
        let label = self.src.get("medium.mixture");
        let file = self.src.path("medium.mixture_file");
        if label.is_some() && file.is_some() {
            return Err(invalid("medium.mixture_file", "conflicts with medium.mixture").into());
        }
        let mixture: Option<GasMixture> = match (label, file) {
            (Some(l), None) => Some(synthetic::mixture(l).ok_or_else(|| {
                let known: Vec<&str> = synthetic::MIXTURES.iter().map(|(n, _)| *n).collect();
                invalid("medium.mixture", format!("unknown mixture {l:?}; bundled: {}", known.join(", ")))
            })?),
            (None, Some(path)) => {
                let m = load_mixture(&path)?;
                inputs.push(path);
                Some(m)
            }
            _ => None,
        };
        match (fixed, mixture) {
            (Some(_), Some(_)) => {
                Err(invalid("medium.absorption_per_m", "conflicts with a gas mixture").into())
            }
            (Some(k), None) => {
                if !(k >= 0.0 && k.is_finite()) {
                    return Err(invalid("medium.absorption_per_m", format!("{k} must be non-negative")).into());
                }
                Ok(AbsorptionSource::Fixed(k))
            }
            (None, None) => {
                if self.src.get("medium.spectra_dir").is_some() {
                    return Err(invalid("medium.spectra_dir", "needs medium.mixture or medium.mixture_file").into());
                }
                Ok(AbsorptionSource::Fixed(0.0))
            }
            (None, Some(mixture)) => {
                let database = match self.src.path("medium.spectra_dir") {
                    None => synthetic::database(),
                    Some(dir) => {
                        let mut db = AbsorptionDatabase::new();
                        for (species, _) in mixture.entries() {
                            let path = dir.join(format!("{species}.csv"));
                            db.insert(load_species_spectrum(&path)?)?;
                            inputs.push(path);
                        }
                        db
                    }
                };
                Ok(AbsorptionSource::Mixture {
                    database: Arc::new(database),
                    mixture,
                })
            }
        }
    }

    fn run(&self) -> Result<Settings, crate::Error> {
        let mut inputs = Vec::new();
        let frequency = self.positive("link.frequency_hz")?;
        let distance = self.positive("link.distance_m")?;
        let tx_power_w = self.positive("link.tx_power_w")?.unwrap_or(0.15);
        let noise_dbm: f64 = self.required("link.noise_floor_dbm")?;
        if !noise_dbm.is_finite() {
            return Err(invalid("link.noise_floor_dbm", "must be finite").into());
        }
        let bandwidth_hz = self.positive("link.bandwidth_hz")?.unwrap_or(1.0);
        let n_tx = self.count("array.n_tx")?;
        let n_rx = self.count("array.n_rx")?;
        let spacing = self.positive("array.spacing_wavelengths")?.unwrap_or(0.5);
        let random_orientation: bool = self.required("array.random_orientation")?;
        let absorption = self.medium(&mut inputs)?;

        let phase = match self.raw("channel.phase_model").as_deref() {
            Some("uniform") => PhaseModel::UniformPhase,
            Some("gaussian") => PhaseModel::ComplexGaussian,
            other => return Err(invalid("channel.phase_model", format!("{other:?}: expected uniform or gaussian")).into()),
        };
        let mode = parse_mode(&self.raw("channel.mode").unwrap_or_default(), phase)
            .map_err(|e| invalid("channel.mode", e))?;

        let trials = self.count("run.trials")?;
        let seed: u64 = self.required("run.seed")?;
        let schemes = parse_schemes(&self.raw("run.schemes").unwrap_or_default())
            .map_err(|e| invalid("run.schemes", e))?;
        let threshold_db: f64 = self.required("run.threshold_db")?;
        let snr_db = self.parsed::<f64>("run.snr_db")?;
        if let Some(v) = snr_db {
            if !v.is_finite() {
                return Err(invalid("run.snr_db", "must be finite").into());
            }
        }
        let snr = match self.raw("run.snr_convention").as_deref() {
            Some("fixed_transmit_power") => SnrConvention::FixedTransmitPower,
            Some("fixed_received_snr") => SnrConvention::FixedReceivedSnr {
                snr_db: snr_db.ok_or_else(|| invalid("run.snr_db", "required with fixed_received_snr"))?,
            },
            other => {
                return Err(invalid(
                    "run.snr_convention",
                    format!("{other:?}: expected fixed_transmit_power or fixed_received_snr"),
                )
                .into())
            }
        };

        let sweep = match self.parsed::<SweepAxis>("sweep.axis")? {
            None => None,
            Some(axis) => {
                let spacing = match self.raw("sweep.spacing").as_deref() {
                    Some("linear") => Spacing::Linear,
                    Some("log") => Spacing::Log,
                    other => return Err(invalid("sweep.spacing", format!("{other:?}: expected linear or log")).into()),
                };
                let spec = SweepSpec {
                    axis,
                    start: self.required("sweep.start")?,
                    stop: self.required("sweep.stop")?,
                    points: self.count("sweep.points")?,
                    spacing,
                };
                spec.validate().map_err(|e| invalid("sweep", e))?;
                Some(spec)
            }
        };

        let bounds = BoundsSettings {
            k_min: self.positive("bounds.k_min")?.unwrap_or(0.1),
            k_max: self.positive("bounds.k_max")?.unwrap_or(100.0),
            points: self.count("bounds.points")?,
            trials: self.count("bounds.trials")?,
            scaling: match self.raw("bounds.scaling").as_deref() {
                Some("power") => LowerBoundScaling::Power,
                Some("amplitude") => LowerBoundScaling::Amplitude,
                other => return Err(invalid("bounds.scaling", format!("{other:?}: expected power or amplitude")).into()),
            },
            snr_db,
        };
        if bounds.k_max < bounds.k_min {
            return Err(invalid("bounds.k_max", "must not be below bounds.k_min").into());
        }
        let bins = self.count("svdist.bins")?;

        let experiment = match (frequency, distance) {
            (Some(f), Some(d)) => {
                let cfg = ExperimentConfig {
                    frequency_hz: f,
                    distance_m: d,
                    tx_power_w,
                    noise_floor_w: dbm_to_watts(noise_dbm),
                    bandwidth_hz,
                    n_tx,
                    n_rx,
                    spacing_wavelengths: spacing,
                    random_orientation,
                    absorption,
                    mode,
                    schemes,
                    trials,
                    seed,
                    threshold_db,
                    snr,
                    sweep,
                };
                cfg.validate()?;
                Ok(cfg)
            }
            (None, _) => Err("link.frequency_hz"),
            (_, None) => Err("link.distance_m"),
        };

        let mut resolved = BTreeMap::new();
        for (key, _) in KEYS {
            let value = match *key {
                "medium.mixture_file" | "medium.spectra_dir" => {
                    self.src.path(key).map(|p| p.display().to_string())
                }
                _ => self.raw(key),
            };
            if let Some(v) = value {
                resolved.insert(key.to_string(), v);
            }
        }

        Ok(Settings {
            experiment,
            n_tx,
            n_rx,
            bounds,
            bins,
            seed,
            resolved,
            inputs,
        })
    }
}

pub fn parse_mode(text: &str, phase: PhaseModel) -> Result<ReRadiationMode, String> {
    match text.trim() {
        "noise" => Ok(ReRadiationMode::NoiseOnly),
        "scattering" => Ok(ReRadiationMode::Scattering(phase)),
        other => Err(format!("{other:?}: expected noise or scattering")),
    }
}

pub fn parse_schemes(text: &str) -> Result<Vec<Scheme>, String> {
    let schemes = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse::<Scheme>().map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    if schemes.is_empty() {
        return Err("at least one scheme is required".into());
    }
    Ok(schemes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsSettings {
    pub k_min: f64,
    pub k_max: f64,
    pub points: usize,
    pub trials: usize,
    pub scaling: LowerBoundScaling,
    pub snr_db: Option<f64>,
}

/// Fully validated settings for every subcommand.
#[derive(Debug, Clone)]
pub struct Settings {
    /// The Monte-Carlo config, or the name of the missing link key.
    experiment: Result<ExperimentConfig, &'static str>,
    pub n_tx: usize,
    pub n_rx: usize,
    pub bounds: BoundsSettings,
    pub bins: usize,
    pub seed: u64,
    /// Effective value of every key, defaults included.
    pub resolved: BTreeMap<String, String>,
    /// Data files read while resolving.
    pub inputs: Vec<PathBuf>,
}

impl Settings {
    pub fn experiment(&self) -> Result<&ExperimentConfig, ConfigError> {
        self.experiment
            .as_ref()
            .map_err(|key| invalid(key, "required but not set"))
    }

    /// Config text that resolves to the same settings.
    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.resolved {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

/// Loads and validates a config file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, crate::Error> {
    Ok(ConfigSource::load(path)?.resolve()?.experiment()?.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{DEFAULT_SEED, DEFAULT_TRIALS};
    use crate::linkbudget::DEFAULT_NOISE_FLOOR_DBM;

    fn parse(text: &str) -> Result<ConfigSource, ConfigError> {
        ConfigSource::parse(text, Path::new("test.cfg"))
    }

    fn key_of(err: crate::Error) -> String {
        match err {
            crate::Error::Config(ConfigError::Validation { key, .. }) => key,
            other => panic!("expected a validation error, got {other}"),
        }
    }

    #[test]
    fn empty_file_with_link_gets_defaults() {
        let mut src = parse("").unwrap();
        src.set("link.frequency_hz", "60e9").unwrap();
        src.set("link.distance_m", "10").unwrap();
        let s = src.resolve().unwrap();
        let cfg = s.experiment().unwrap();
        assert_eq!(cfg.spacing_wavelengths, 0.5);
        assert_eq!(cfg.noise_floor_w, dbm_to_watts(-80.0));
        assert_eq!(cfg.trials, DEFAULT_TRIALS);
        assert_eq!(cfg.seed, DEFAULT_SEED);
        assert_eq!(cfg.absorption, AbsorptionSource::Fixed(0.0));
        assert_eq!(cfg.n_tx, 64);
        assert_eq!(cfg.schemes, vec![Scheme::Bf, Scheme::ClMp, Scheme::OlMp]);
        const { assert!(DEFAULT_NOISE_FLOOR_DBM == -80.0) };
    }

    #[test]
    fn negative_spacing_names_the_key() {
        let src = parse("link.frequency_hz = 60e9\nlink.distance_m = 10\narray.spacing_wavelengths = -1\n").unwrap();
        let err = src.resolve().unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("array.spacing_wavelengths"));
        assert_eq!(key_of(err), "array.spacing_wavelengths");
    }

    #[test]
    fn unknown_keys_and_bad_lines() {
        match parse("link.frequency = 1\n") {
            Err(ConfigError::UnknownKey { key, location }) => {
                assert_eq!(key, "link.frequency");
                assert_eq!(location, "test.cfg:1");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("# ok\n\nnot a pair\n"), Err(ConfigError::Parse { line: 3, .. })));
        assert!(matches!(parse("frequency = 1\n"), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn missing_link_is_reported_lazily() {
        let s = parse("bounds.points = 3\n").unwrap().resolve().unwrap();
        assert_eq!(s.bounds.points, 3);
        match s.experiment() {
            Err(ConfigError::Validation { key, .. }) => assert_eq!(key, "link.frequency_hz"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn value_errors_name_keys() {
        let base = "link.frequency_hz = 60e9\nlink.distance_m = 10\n";
        for (line, key) in [
            ("run.trials = 0", "run.trials"),
            ("run.trials = many", "run.trials"),
            ("channel.mode = loud", "channel.mode"),
            ("run.schemes = BF,XX", "run.schemes"),
            ("run.snr_convention = fixed_received_snr", "run.snr_db"),
            ("medium.absorption_per_m = -1", "medium.absorption_per_m"),
            ("medium.mixture = mars", "medium.mixture"),
            ("array.n_tx = 5", "array.n_tx"),
        ] {
            let src = parse(&format!("{base}{line}\n")).unwrap();
            let err = src.resolve().unwrap_err();
            let text = err.to_string();
            if key == "array.n_tx" {
                // geometry rejects non-square counts
                assert_eq!(err.exit_code(), 2, "{text}");
                assert!(text.contains("perfect square"), "{text}");
            } else {
                assert!(text.contains(key), "{line}: {text}");
            }
        }
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut src = parse("link.frequency_hz = 60e9\nlink.distance_m = 10\nrun.seed = 3\n").unwrap();
        src.set_pair("run.seed=9").unwrap();
        assert_eq!(src.resolve().unwrap().experiment().unwrap().seed, 9);
        assert!(src.set_pair("run.seed").is_err());
        assert!(src.set("run.sed", "1").is_err());
    }

    #[test]
    fn resolved_text_round_trips() {
        let text = "link.frequency_hz = 60e9\nlink.distance_m = 10\nmedium.mixture = tropics\n\
                    sweep.axis = frequency\nsweep.start = 30e9\nsweep.stop = 180e9\nsweep.points = 4\n\
                    run.snr_convention = fixed_received_snr\nrun.snr_db = 15\nchannel.phase_model = gaussian\n";
        let first = parse(text).unwrap().resolve().unwrap();
        let again = parse(&first.to_config_text()).unwrap().resolve().unwrap();
        assert_eq!(first.experiment().unwrap(), again.experiment().unwrap());
        assert_eq!(first.resolved, again.resolved);
        let cfg = first.experiment().unwrap();
        assert_eq!(cfg.mode, ReRadiationMode::Scattering(PhaseModel::ComplexGaussian));
        assert_eq!(cfg.snr, SnrConvention::FixedReceivedSnr { snr_db: 15.0 });
        assert_eq!(cfg.sweep.unwrap().values().len(), 4);
    }

    #[test]
    fn scheme_lists() {
        assert_eq!(parse_schemes("bf, cl-mp,OL_MP,siso").unwrap(), Scheme::ALL.to_vec());
        assert!(parse_schemes(" , ").is_err());
    }
}
