//! Time-averaged energy error of the spin model over a small γ grid.
//!
//! `cargo run --release --example gamma_sweep [config]`

use rtebd::runner::{run_gamma_sweep, SweepConfig};

fn main() -> rtebd::Result<()> {
    let sweep = match std::env::args().nth(1) {
        Some(path) => SweepConfig::from_file(path.as_ref())?,
        None => SweepConfig::parse(
            "model = spin\nmethod = rtebd\nscheme = bosonic\nL = 16\ndt = 0.08\n\
             gammas = 1.0, 1.25, 1.5, 1.75, 2.0\nchis = 6\nt_f = 8\n",
        )?,
    };
    for row in run_gamma_sweep(&sweep)? {
        println!(
            "gamma = {:.2}  chi = {:2}  eps_avg_err = {:.4e}  {}",
            row.gamma, row.chi, row.eps_avg_err, row.status
        );
    }
    Ok(())
}
