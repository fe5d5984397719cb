//! Tabulated molecular absorption spectra and gas-mixture composition.
//!
//! A [`SpeciesSpectrum`] holds `k_i(f)` for one species on a strictly
//! increasing frequency grid. The medium coefficient of a [`GasMixture`] is
//! the mole-fraction weighted sum of the species coefficients, each linearly
//! interpolated on its own grid.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod synthetic;

/// Header line expected in every spectrum file.
pub const SPECTRUM_HEADER: &str = "frequency_hz,absorption_per_m";

#[derive(Debug, Error)]
pub enum SpectraError {
    #[error("{path}:{line}: malformed spectrum/mixture file: {reason}")]
    MalformedFile {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{location}: frequency grid is not strictly increasing")]
    NonMonotoneGrid { location: String },
    #[error("{location}: negative absorption coefficient {value}")]
    NegativeCoefficient { location: String, value: f64 },
    #[error("frequency grid is empty")]
    EmptyGrid,
    #[error("spectrum needs at least two samples, got {0}")]
    TooShort(usize),
    #[error("grid has {grid} samples but {coefficients} coefficients were given")]
    LengthMismatch { grid: usize, coefficients: usize },
    #[error("invalid spectral line (peak {peak}, half-width {half_width})")]
    InvalidLine { peak: f64, half_width: f64 },
    #[error("frequency {frequency} Hz outside [{lo}, {hi}] Hz for species {species}")]
    OutOfRange {
        species: String,
        frequency: f64,
        lo: f64,
        hi: f64,
    },
    #[error("species {0} is not in the absorption database")]
    UnknownSpecies(String),
    #[error("mole fraction {fraction} of {species} is outside [0, 1]")]
    InvalidFraction { species: String, fraction: f64 },
    #[error("mole fractions sum to {0}, expected a value in [0.99, 1.01]")]
    FractionSum(f64),
    #[error("duplicate species {0}")]
    DuplicateSpecies(String),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Conditions a table was computed at. Recorded, never used to rescale.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpectrumMeta {
    pub temperature_k: Option<f64>,
    pub pressure_atm: Option<f64>,
}

/// Absorption coefficient `k_i(f)` of one molecular species.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesSpectrum {
    species_id: String,
    grid: Vec<f64>,
    coefficients: Vec<f64>,
    meta: SpectrumMeta,
}

impl SpeciesSpectrum {
    pub fn new(
        species_id: impl Into<String>,
        grid: Vec<f64>,
        coefficients: Vec<f64>,
        meta: SpectrumMeta,
    ) -> Result<Self, SpectraError> {
        if grid.is_empty() {
            return Err(SpectraError::EmptyGrid);
        }
        if grid.len() != coefficients.len() {
            return Err(SpectraError::LengthMismatch {
                grid: grid.len(),
                coefficients: coefficients.len(),
            });
        }
        if grid.len() < 2 {
            return Err(SpectraError::TooShort(grid.len()));
        }
        for (i, w) in grid.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[0].is_finite() || !w[1].is_finite() {
                return Err(SpectraError::NonMonotoneGrid {
                    location: format!("sample {}", i + 1),
                });
            }
        }
        for (i, &c) in coefficients.iter().enumerate() {
            if !(c >= 0.0) || !c.is_finite() {
                return Err(SpectraError::NegativeCoefficient {
                    location: format!("sample {i}"),
                    value: c,
                });
            }
        }
        Ok(Self {
            species_id: species_id.into(),
            grid,
            coefficients,
            meta,
        })
    }

    pub fn species_id(&self) -> &str {
        &self.species_id
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn meta(&self) -> SpectrumMeta {
        self.meta
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Inclusive frequency span `(lo, hi)` of the table.
    pub fn span(&self) -> (f64, f64) {
        (self.grid[0], self.grid[self.grid.len() - 1])
    }

    /// Linearly interpolated coefficient at `frequency`. Exact at grid samples.
    pub fn coefficient_at(&self, frequency: f64) -> Result<f64, SpectraError> {
        let (lo, hi) = self.span();
        if !(frequency >= lo && frequency <= hi) {
            return Err(SpectraError::OutOfRange {
                species: self.species_id.clone(),
                frequency,
                lo,
                hi,
            });
        }
        // first index with grid[idx] >= frequency
        let idx = self.grid.partition_point(|&g| g < frequency);
        if self.grid[idx] == frequency {
            return Ok(self.coefficients[idx]);
        }
        let (f0, f1) = (self.grid[idx - 1], self.grid[idx]);
        let (k0, k1) = (self.coefficients[idx - 1], self.coefficients[idx]);
        let t = (frequency - f0) / (f1 - f0);
        Ok((k0 + t * (k1 - k0)).max(0.0))
    }

    /// Argmax of the tabulated coefficients.
    pub fn peak_frequency(&self) -> f64 {
        let (i, _) = self
            .coefficients
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &c)| {
                if c > best.1 {
                    (i, c)
                } else {
                    best
                }
            });
        self.grid[i]
    }

    /// Serializes to the spectrum file format.
    pub fn to_file_string(&self) -> String {
        let mut out = format!("# species={}\n", self.species_id);
        if let Some(t) = self.meta.temperature_k {
            out.push_str(&format!("# temperature_k={t}\n"));
        }
        if let Some(p) = self.meta.pressure_atm {
            out.push_str(&format!("# pressure_atm={p}\n"));
        }
        out.push_str(SPECTRUM_HEADER);
        out.push('\n');
        for (f, k) in self.grid.iter().zip(&self.coefficients) {
            out.push_str(&format!("{f:e},{k:e}\n"));
        }
        out
    }
}

fn read_text(path: &Path) -> Result<String, SpectraError> {
    fs::read_to_string(path).map_err(|source| SpectraError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Parses `# key=value` comment tags.
fn comment_tag(line: &str) -> Option<(&str, &str)> {
    let body = line.trim_start_matches('#').trim();
    let (k, v) = body.split_once('=')?;
    Some((k.trim(), v.trim()))
}

/// Loads a spectrum table. The species id comes from a `# species=` tag,
/// falling back to the file stem.
pub fn load_species_spectrum(path: &Path) -> Result<SpeciesSpectrum, SpectraError> {
    parse_species_spectrum(&read_text(path)?, path)
}

/// Parses spectrum text; `path` is only used for ids and diagnostics.
pub fn parse_species_spectrum(text: &str, path: &Path) -> Result<SpeciesSpectrum, SpectraError> {
    let malformed = |line: usize, reason: String| SpectraError::MalformedFile {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut species = file_stem(path);
    let mut meta = SpectrumMeta::default();
    let mut header_seen = false;
    let mut grid = Vec::new();
    let mut coefficients = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some((key, value)) = comment_tag(line) {
                let number = || {
                    value
                        .parse::<f64>()
                        .map_err(|_| malformed(lineno, format!("bad {key} value {value:?}")))
                };
                match key {
                    "species" => species = value.to_string(),
                    "temperature_k" => meta.temperature_k = Some(number()?),
                    "pressure_atm" => meta.pressure_atm = Some(number()?),
                    _ => {}
                }
            }
            continue;
        }
        if !header_seen {
            let header: String = line.chars().filter(|c| !c.is_whitespace()).collect();
            if header != SPECTRUM_HEADER {
                return Err(malformed(
                    lineno,
                    format!("expected header {SPECTRUM_HEADER:?}, found {line:?}"),
                ));
            }
            header_seen = true;
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let (Some(fs), Some(ks), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(malformed(lineno, "expected two comma-separated fields".into()));
        };
        let f: f64 = fs
            .parse()
            .map_err(|_| malformed(lineno, format!("bad frequency {fs:?}")))?;
        let k: f64 = ks
            .parse()
            .map_err(|_| malformed(lineno, format!("bad coefficient {ks:?}")))?;
        if !f.is_finite() || !k.is_finite() {
            return Err(malformed(lineno, "non-finite value".into()));
        }
        let location = format!("{}:{}", path.display(), lineno);
        if let Some(&prev) = grid.last() {
            if f <= prev {
                return Err(SpectraError::NonMonotoneGrid { location });
            }
        }
        if k < 0.0 {
            return Err(SpectraError::NegativeCoefficient { location, value: k });
        }
        grid.push(f);
        coefficients.push(k);
    }
    if !header_seen {
        return Err(malformed(text.lines().count().max(1), "missing header".into()));
    }
    SpeciesSpectrum::new(species, grid, coefficients, meta)
}

/// Lorentzian line: `peak * hw^2 / ((f - center)^2 + hw^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralLine {
    pub center_hz: f64,
    pub peak_per_m: f64,
    pub half_width_hz: f64,
}

impl SpectralLine {
    pub const fn new(center_hz: f64, peak_per_m: f64, half_width_hz: f64) -> Self {
        Self {
            center_hz,
            peak_per_m,
            half_width_hz,
        }
    }

    pub fn evaluate(&self, frequency: f64) -> f64 {
        let hw2 = self.half_width_hz * self.half_width_hz;
        let df = frequency - self.center_hz;
        self.peak_per_m * hw2 / (df * df + hw2)
    }
}

/// Sum of Lorentzian lines sampled on `grid`.
pub fn synth_line_spectrum(
    species_id: impl Into<String>,
    lines: &[SpectralLine],
    grid: &[f64],
    meta: SpectrumMeta,
) -> Result<SpeciesSpectrum, SpectraError> {
    if grid.is_empty() {
        return Err(SpectraError::EmptyGrid);
    }
    if let Some(bad) = lines
        .iter()
        .find(|l| !(l.peak_per_m >= 0.0) || !(l.half_width_hz > 0.0))
    {
        return Err(SpectraError::InvalidLine {
            peak: bad.peak_per_m,
            half_width: bad.half_width_hz,
        });
    }
    let coefficients = grid
        .iter()
        .map(|&f| lines.iter().map(|l| l.evaluate(f)).sum())
        .collect();
    SpeciesSpectrum::new(species_id, grid.to_vec(), coefficients, meta)
}

/// Mole fractions of a climate scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct GasMixture {
    label: String,
    entries: BTreeMap<String, f64>,
}

impl GasMixture {
    /// Builds a mixture from fractions in `[0, 1]` summing to 1 ± 0.01.
    pub fn new<I, S>(label: impl Into<String>, fractions: I) -> Result<Self, SpectraError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mix = Self::unchecked(label, fractions)?;
        let sum = mix.total_fraction();
        if !(0.99..=1.01).contains(&sum) {
            return Err(SpectraError::FractionSum(sum));
        }
        Ok(mix)
    }

    /// Builds a mixture from percentages as tabulated for standard atmospheres.
    pub fn from_percent<I, S>(label: impl Into<String>, percents: I) -> Result<Self, SpectraError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        Self::new(
            label,
            percents.into_iter().map(|(s, p)| (s, p / 100.0)),
        )
    }

    /// Partial mixture without the sum constraint, for composing sub-mixtures.
    pub fn partial<I, S>(label: impl Into<String>, fractions: I) -> Result<Self, SpectraError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        Self::unchecked(label, fractions)
    }

    fn unchecked<I, S>(label: impl Into<String>, fractions: I) -> Result<Self, SpectraError>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut entries = BTreeMap::new();
        for (species, fraction) in fractions {
            let species = species.into();
            if !(0.0..=1.0).contains(&fraction) {
                return Err(SpectraError::InvalidFraction { species, fraction });
            }
            if entries.insert(species.clone(), fraction).is_some() {
                return Err(SpectraError::DuplicateSpecies(species));
            }
        }
        Ok(Self {
            label: label.into(),
            entries,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn fraction(&self, species: &str) -> Option<f64> {
        self.entries.get(species).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn total_fraction(&self) -> f64 {
        self.entries.values().sum()
    }
}

/// Loads a mixture file of `species_id,percent` lines.
pub fn load_mixture(path: &Path) -> Result<GasMixture, SpectraError> {
    parse_mixture(&read_text(path)?, path)
}

pub fn parse_mixture(text: &str, path: &Path) -> Result<GasMixture, SpectraError> {
    let malformed = |line: usize, reason: String| SpectraError::MalformedFile {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut label = file_stem(path);
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if let Some(("label", value)) = comment_tag(line) {
                label = value.to_string();
            }
            continue;
        }
        let Some((species, percent)) = line.split_once(',') else {
            return Err(malformed(lineno, "expected species_id,percent".into()));
        };
        let species = species.trim();
        let percent: f64 = percent
            .trim()
            .parse()
            .map_err(|_| malformed(lineno, format!("bad percent {:?}", percent.trim())))?;
        if species.is_empty() {
            return Err(malformed(lineno, "empty species id".into()));
        }
        if !(0.0..=100.0).contains(&percent) {
            return Err(malformed(lineno, format!("percent {percent} outside [0, 100]")));
        }
        rows.push((species.to_string(), percent));
    }
    GasMixture::from_percent(label, rows)
}

/// Species spectra available for mixture composition.
#[derive(Debug, Clone, Default)]
pub struct AbsorptionDatabase {
    spectra: BTreeMap<String, SpeciesSpectrum>,
    meta: Option<SpectrumMeta>,
}

impl AbsorptionDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_spectra(
        spectra: impl IntoIterator<Item = SpeciesSpectrum>,
    ) -> Result<Self, SpectraError> {
        let mut db = Self::new();
        for s in spectra {
            db.insert(s)?;
        }
        Ok(db)
    }

    pub fn insert(&mut self, spectrum: SpeciesSpectrum) -> Result<(), SpectraError> {
        match self.meta {
            None => self.meta = Some(spectrum.meta()),
            Some(m) if m != spectrum.meta() => log::warn!(
                "spectrum {} was tabulated at {:?}, database tag is {:?}; no rescaling applied",
                spectrum.species_id(),
                spectrum.meta(),
                m
            ),
            Some(_) => {}
        }
        let id = spectrum.species_id().to_string();
        if self.spectra.contains_key(&id) {
            return Err(SpectraError::DuplicateSpecies(id));
        }
        self.spectra.insert(id, spectrum);
        Ok(())
    }

    pub fn get(&self, species: &str) -> Option<&SpeciesSpectrum> {
        self.spectra.get(species)
    }

    /// Temperature/pressure tag of the first inserted spectrum.
    pub fn meta(&self) -> Option<SpectrumMeta> {
        self.meta
    }

    pub fn species(&self) -> impl Iterator<Item = &str> {
        self.spectra.keys().map(String::as_str)
    }

    /// Frequency span covered by every species referenced in `mix`.
    pub fn common_span(&self, mix: &GasMixture) -> Result<(f64, f64), SpectraError> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for (species, _) in mix.entries() {
            let s = self
                .get(species)
                .ok_or_else(|| SpectraError::UnknownSpecies(species.to_string()))?;
            let (a, b) = s.span();
            lo = lo.max(a);
            hi = hi.min(b);
        }
        Ok((lo, hi))
    }

    /// Medium absorption coefficient `k(f) = sum_i m_i k_i(f)` in 1/m.
    pub fn mixture_coefficient(&self, mix: &GasMixture, frequency: f64) -> Result<f64, SpectraError> {
        let mut terms = Vec::with_capacity(mix.entries.len());
        for (species, fraction) in mix.entries() {
            let s = self
                .get(species)
                .ok_or_else(|| SpectraError::UnknownSpecies(species.to_string()))?;
            terms.push((fraction, s));
        }
        let mut k = 0.0;
        for (fraction, s) in terms {
            k += fraction * s.coefficient_at(frequency)?;
        }
        Ok(k)
    }
}

/// Free-function form of [`AbsorptionDatabase::mixture_coefficient`].
pub fn mixture_coefficient(
    db: &AbsorptionDatabase,
    mix: &GasMixture,
    frequency: f64,
) -> Result<f64, SpectraError> {
    db.mixture_coefficient(mix, frequency)
}
