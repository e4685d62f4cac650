//! Reweighted Pauli bases: weights, biorthogonality and the transfer matrix
//! of a hopping gate.

use rtebd::models::fermion_bond_gate;
use rtebd::pauli::{build_supergate, Pauli, ReweightScheme, SchemeKind};

fn main() -> rtebd::Result<()> {
    for kind in [SchemeKind::Bosonic, SchemeKind::Fermionic, SchemeKind::Xy] {
        let s = ReweightScheme::new(kind, 1.5)?;
        let mut worst: f64 = 0.0;
        for (i, a) in Pauli::ALL.iter().enumerate() {
            for (j, b) in Pauli::ALL.iter().enumerate() {
                let tr = (s.reweighted(*a) * s.dual(*b)).trace().re;
                worst = worst.max((tr - if i == j { 2.0 } else { 0.0 }).abs());
            }
        }
        println!("{kind:?}: weights (I,X,Y,Z) = {:?}, max |Tr[σ̃σ̄] − 2δ| = {worst:.1e}", s.weights());
    }

    let scheme = ReweightScheme::new(SchemeKind::Fermionic, 1.5)?;
    let gate = build_supergate(0, &fermion_bond_gate(1.0, 0.08), &scheme)?;
    let t = &gate.transfer;
    println!("hopping transfer matrix, γ = 1.5: ‖T‖_F = {:.6}, T[0,0] = {}", t.norm(), t[(0, 0)]);
    // Z⊗I feeds X⊗Y-type coefficients; print the ZI column
    let zi = 4 * Pauli::Z.index();
    for (n, v) in t.column(zi).iter().enumerate() {
        if v.abs() > 1e-12 {
            println!("  T[{}{}, ZI] = {v:+.6}", label(n / 4), label(n % 4));
        }
    }
    Ok(())
}

fn label(mu: usize) -> char {
    ['I', 'X', 'Y', 'Z'][mu]
}
