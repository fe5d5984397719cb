use clap::Parser;

use molmimo::cli::{run, Args};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(outcome) => {
            println!(
                "wrote {} rows to {} (manifest {})",
                outcome.rows,
                outcome.output.display(),
                outcome.manifest.display()
            );
            if let Some(ks) = outcome.summary.get("ks").and_then(|v| v.as_f64()) {
                println!("ks distance to quarter-circle law: {ks:.4}");
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
