//! Bundled synthetic atmosphere.
//!
//! Lorentzian stand-ins for the oxygen and water resonances that dominate
//! sea-level absorption between 10 GHz and 1.2 THz, plus the standard
//! US-model gas mixtures. Species without lines in this band are tabulated
//! as zero.

use super::{
    synth_line_spectrum, AbsorptionDatabase, GasMixture, SpeciesSpectrum, SpectraError,
    SpectralLine, SpectrumMeta,
};

pub const GRID_START_HZ: f64 = 10e9;
pub const GRID_STOP_HZ: f64 = 1.2e12;
const COARSE_STEP_HZ: f64 = 1e9;

/// Conditions the bundled tables stand in for.
pub const META: SpectrumMeta = SpectrumMeta {
    temperature_k: Some(273.0),
    pressure_atm: Some(1.0),
};

pub const SPECIES: [&str; 8] = ["H2O", "CO2", "O3", "N2O", "CO", "CH4", "O2", "N2"];

const O2_LINES: [SpectralLine; 2] = [
    SpectralLine::new(60e9, 0.025, 0.5e9),
    SpectralLine::new(120e9, 0.005, 0.5e9),
];

const H2O_LINES: [SpectralLine; 6] = [
    SpectralLine::new(180e9, 0.37, 1e9),
    SpectralLine::new(325e9, 4.0, 1e9),
    SpectralLine::new(380e9, 12.0, 1e9),
    SpectralLine::new(450e9, 20.0, 1e9),
    SpectralLine::new(550e9, 116.0, 1e9),
    SpectralLine::new(750e9, 200.0, 1e9),
];

/// Lines of `species`; empty for species transparent in this band.
pub fn lines(species: &str) -> &'static [SpectralLine] {
    match species {
        "O2" => &O2_LINES,
        "H2O" => &H2O_LINES,
        _ => &[],
    }
}

/// Climate rows in percent, columns ordered as [`SPECIES`].
pub const MIXTURES: [(&str, [f64; 8]); 5] = [
    (
        "mean_latitude_summer",
        [1.86, 0.033, 0.000003, 0.000032, 0.000015, 0.00017, 20.900001, 77.206],
    ),
    (
        "mean_latitude_winter",
        [0.432, 0.033, 0.000003, 0.000032, 0.000015, 0.00017, 20.900001, 78.634779],
    ),
    (
        "high_latitude_summer",
        [1.19, 0.033, 0.000002, 0.000031, 0.000015, 0.00017, 20.900001, 77.876781],
    ),
    (
        "high_latitude_winter",
        [0.141, 0.033, 0.000002, 0.000032, 0.000015, 0.00017, 20.900001, 78.92578],
    ),
    (
        "tropics",
        [2.59, 0.033, 0.000003, 0.000032, 0.000015, 0.00017, 20.900001, 76.476779],
    ),
];

/// Mixture by label, e.g. `"tropics"` or `"high_latitude_winter"`.
pub fn mixture(label: &str) -> Option<GasMixture> {
    let (name, row) = MIXTURES.iter().find(|(name, _)| *name == label)?;
    GasMixture::from_percent(*name, SPECIES.iter().copied().zip(row.iter().copied())).ok()
}

/// Coarse 1 GHz grid refined to hw/10 steps within ten half-widths of every line.
pub fn grid_for(lines: &[SpectralLine]) -> Vec<f64> {
    let coarse_points = ((GRID_STOP_HZ - GRID_START_HZ) / COARSE_STEP_HZ).round() as usize;
    let mut grid: Vec<f64> = (0..=coarse_points)
        .map(|i| GRID_START_HZ + i as f64 * COARSE_STEP_HZ)
        .collect();
    for line in lines {
        let step = line.half_width_hz / 10.0;
        for i in -100i32..=100 {
            let f = line.center_hz + f64::from(i) * step;
            if (GRID_START_HZ..=GRID_STOP_HZ).contains(&f) {
                grid.push(f);
            }
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1.0);
    grid
}

pub fn species_spectrum(species: &str) -> Result<SpeciesSpectrum, SpectraError> {
    let lines = lines(species);
    let grid = if lines.is_empty() {
        vec![GRID_START_HZ, GRID_STOP_HZ]
    } else {
        grid_for(lines)
    };
    synth_line_spectrum(species, lines, &grid, META)
}

/// Database holding every species of [`SPECIES`].
pub fn database() -> AbsorptionDatabase {
    AbsorptionDatabase::from_spectra(
        SPECIES
            .iter()
            .map(|s| species_spectrum(s).expect("bundled line table is valid")),
    )
    .expect("bundled species are unique")
}

/// Mixture file contents for a climate row.
pub fn mixture_file_string(label: &str) -> Option<String> {
    let (_, row) = MIXTURES.iter().find(|(name, _)| *name == label)?;
    let mut out = format!("# label={label}\n# percent by volume, sea level\n");
    for (species, percent) in SPECIES.iter().zip(row) {
        out.push_str(&format!("{species},{percent}\n"));
    }
    Some(out)
}
