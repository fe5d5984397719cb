//! Regenerates the bundled spectra and mixture files under `data/`.
//!
//! ```text
//! cargo run -p molmimo --example generate_data
//! ```

use std::fs;
use std::path::Path;

use molmimo::spectra::synthetic;

fn main() -> std::io::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let spectra = root.join("spectra");
    let mixtures = root.join("mixtures");
    fs::create_dir_all(&spectra)?;
    fs::create_dir_all(&mixtures)?;
    for species in synthetic::SPECIES {
        let s = synthetic::species_spectrum(species).expect("bundled line table is valid");
        fs::write(spectra.join(format!("{species}.csv")), s.to_file_string())?;
    }
    for (label, _) in synthetic::MIXTURES {
        let text = synthetic::mixture_file_string(label).expect("label comes from the table");
        fs::write(mixtures.join(format!("{label}.csv")), text)?;
    }
    println!("wrote {}", root.display());
    Ok(())
}
