//! Connected end-to-end density correlation of a GHZ state under rTEBD,
//! checked against the dense density matrix.

use rtebd::metrics::{Measurement, Normalization};
use rtebd::models::{fermion_gates, ghz_initial_mpdo};
use rtebd::mpdo::{MpdoMeasure, SuperCircuit};
use rtebd::oracle::DenseDensity;
use rtebd::pauli::{ReweightScheme, SchemeKind};
use rtebd::tensor::TruncationPolicy;

fn main() -> rtebd::Result<()> {
    let len = 8;
    let scheme = ReweightScheme::new(SchemeKind::Fermionic, 1.5)?;
    let circuit = fermion_gates(len, 1.0, 0.08)?;
    let sc = SuperCircuit::new(&circuit, &scheme)?;
    let mut m = ghz_initial_mpdo(len, &scheme)?;
    let mut rho = DenseDensity::new(len, m.to_dense()?)?;
    let policy = TruncationPolicy::new(256)?;
    for step in 0..=40 {
        if step > 0 {
            m.rtebd_step(&sc, &policy)?;
            rho.step(&circuit)?;
        }
        if step % 8 == 0 {
            let mm = MpdoMeasure::new(&m);
            let c = Measurement::new(&mm, Normalization::ByTrace)?.connected_correlation(0, len - 1)?;
            let d = Measurement::new(&rho, Normalization::ByTrace)?.connected_correlation(0, len - 1)?;
            println!(
                "t = {:4.2}  <n1 nL>_c = {c:+.10}  dense {d:+.10}  chi = {}",
                step as f64 * 0.08,
                m.max_bond_dim()
            );
        }
    }
    Ok(())
}
