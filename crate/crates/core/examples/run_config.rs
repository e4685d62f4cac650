//! Runs a configuration file and prints the resulting table.
//!
//! `cargo run --release --example run_config -- crates/core/examples/configs/fermion_rtebd.cfg`

use rtebd::runner::{simulate, ExperimentConfig};

fn main() -> rtebd::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/fermion_rtebd.cfg").into());
    let mut cfg = ExperimentConfig::from_file(path.as_ref())?;
    cfg.output_path = None;
    let r = simulate(&cfg)?;
    r.series.write_csv(std::io::stdout().lock())?;
    eprintln!("{} rows, final bond dimension {}, {:.2} s", r.series.len(), r.final_max_bond_dim, r.wall_time_s);
    Ok(())
}
