//! Writes the synthetic fixture: indicators.csv, target.csv, config.toml.

use std::path::PathBuf;

use clap::Parser;
use panelcast_cli::fixture::{generate, FIXTURE_SEED};
use panelcast_cli::output::write_atomic;

#[derive(Parser)]
#[command(name = "gen-fixture", about = "Generate the synthetic six-country fixture")]
struct Args {
    #[arg(long, default_value_t = FIXTURE_SEED)]
    seed: u64,
    /// Target directory.
    #[arg(long, default_value = "fixtures/gcc")]
    out: PathBuf,
}

fn main() {
    let args = Args::parse();
    let files = generate(args.seed);
    for (name, text) in [
        ("indicators.csv", &files.indicators_csv),
        ("target.csv", &files.target_csv),
        ("config.toml", &files.config_toml),
    ] {
        let path = args.out.join(name);
        if let Err(e) = write_atomic(&path, text.as_bytes()) {
            eprintln!("gen-fixture: {e}");
            std::process::exit(1);
        }
        println!("{}", path.display());
    }
}
