//! Dense statevector, dense density matrix and Gaussian correlation matrix
//! evolved side by side.

use rtebd::metrics::{Measurement, Normalization};
use rtebd::models::{fermion_gates, fock_initial_state, fock_site_vectors};
use rtebd::oracle::{gaussian_trotter, DenseState};

fn main() -> rtebd::Result<()> {
    let (len, steps) = (8, 50);
    let occ = fock_initial_state(len);
    let circuit = fermion_gates(len, 1.0, 0.08)?;
    let mut psi = DenseState::product(&fock_site_vectors(&occ))?;
    let mut rho = psi.density()?;
    let gauss = gaussian_trotter(&occ, &circuit, steps)?;
    let mut worst: f64 = 0.0;
    for (step, c) in gauss.iter().enumerate() {
        if step > 0 {
            psi.step(&circuit)?;
            rho.step(&circuit)?;
        }
        let a = Measurement::new(&psi, Normalization::ByTrace)?.densities()?;
        let b = Measurement::new(&rho, Normalization::ByTrace)?.densities()?;
        for ((x, y), z) in a.iter().zip(&b).zip(c.densities()) {
            worst = worst.max((x - z).abs()).max((y - z).abs());
        }
    }
    let n: Vec<String> = gauss[steps].densities().iter().map(|x| format!("{x:.4}")).collect();
    println!("n_i at t = {:.2}: [{}]", steps as f64 * 0.08, n.join(", "));
    println!("max disagreement over {steps} steps: {worst:.2e}");
    Ok(())
}
