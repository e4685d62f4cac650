//! MPS-TEBD for free fermions, compared with the Gaussian reference.

use rtebd::metrics::{fermion_number_error, Measurement, Normalization};
use rtebd::models::{fermion_gates, fock_initial_state, fock_site_vectors};
use rtebd::mps::{init_product_mps, MpsMeasure};
use rtebd::oracle::gaussian_trotter;
use rtebd::tensor::TruncationPolicy;

fn main() -> rtebd::Result<()> {
    let (len, chi, dt, steps) = (32, 16, 0.08, 100);
    let occ = fock_initial_state(len);
    let circuit = fermion_gates(len, 1.0, dt)?;
    let exact = gaussian_trotter(&occ, &circuit, steps)?;
    let mut tt = init_product_mps(&fock_site_vectors(&occ))?;
    let policy = TruncationPolicy::new(chi)?;
    for (step, c) in exact.iter().enumerate().skip(1) {
        let report = tt.tebd_step(&circuit, &policy)?;
        if step % 20 == 0 {
            let mm = MpsMeasure::new(&tt)?;
            let dens = Measurement::new(&mm, Normalization::ByTrace)?.densities()?;
            let err = fermion_number_error(&dens, &c.densities())?;
            println!(
                "t = {:5.2}  chi = {:2}  discarded = {:.2e}  n_err = {err:.3e}",
                step as f64 * dt,
                report.max_bond_dim,
                report.total_discarded_weight
            );
        }
    }
    Ok(())
}
