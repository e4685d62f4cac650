//! Trace of the density matrix under truncated MPDO-TEBD and reweighted TEBD.

use rtebd::models::{fermion_gates, fock_initial_state, fock_site_vectors};
use rtebd::mpdo::{init_pure_product_mpdo, SuperCircuit};
use rtebd::pauli::{ReweightScheme, SchemeKind};
use rtebd::tensor::TruncationPolicy;

fn main() -> rtebd::Result<()> {
    let (len, chi, dt, steps) = (32, 12, 0.08, 60);
    let sites = fock_site_vectors(&fock_initial_state(len));
    let circuit = fermion_gates(len, 1.0, dt)?;
    let policy = TruncationPolicy::new(chi)?;
    let schemes = [
        ("MPDO-TEBD", ReweightScheme::unweighted()),
        ("rTEBD γ=1.5", ReweightScheme::new(SchemeKind::Fermionic, 1.5)?),
    ];
    let mut states = Vec::new();
    for (_, s) in &schemes {
        states.push((init_pure_product_mpdo(&sites, s)?, SuperCircuit::new(&circuit, s)?));
    }
    println!("{:>6} {:>14} {:>14}", "t", schemes[0].0, schemes[1].0);
    for step in 1..=steps {
        for (m, sc) in states.iter_mut() {
            m.rtebd_step(sc, &policy)?;
        }
        if step % 10 == 0 {
            println!("{:6.2} {:14.6} {:14.6}", step as f64 * dt, states[0].0.trace(), states[1].0.trace());
        }
    }
    Ok(())
}
