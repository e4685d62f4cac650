//! Density operators as tensor trains of (reweighted) Pauli coefficients.
//!
//! The state is stored as
//!
//! ```text
//! ρ = 2^{-L} Σ_μ c(μ) σ̃^{μ_1} ⊗ ⋯ ⊗ σ̃^{μ_L},   c(μ) = A_1^{μ_1} ⋯ A_L^{μ_L}
//! ```
//!
//! so that `c(μ) = Tr[σ̄^μ ρ]`, `Tr ρ = c(0…0)` and
//! `Tr[σ^μ ρ] = (Π_i w_{μ_i}) c(μ)`. Coefficients of a Hermitian operator are
//! real and the train is stored in `f64`. No rescaling is applied during
//! evolution, so the trace drifts when truncation is active.

use nalgebra::DMatrix;

use crate::metrics::PauliMeasure;
use crate::mps::{BrickworkCircuit, StepReport, TensorTrain};
use crate::pauli::{build_supergate, Pauli, PauliString, ReweightScheme};
use crate::tensor::{Tensor, TruncationPolicy};
use crate::{Error, Result, C64};

const DENSITY_TOL: f64 = 1e-12;
const IMAG_RESIDUE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Mpdo {
    train: TensorTrain<f64>,
    scheme: ReweightScheme,
}

/// A brickwork circuit of transfer matrices in one reweighted basis.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperCircuit {
    circuit: BrickworkCircuit<f64>,
    scheme: ReweightScheme,
}

impl SuperCircuit {
    /// Converts every unitary of `circuit` into its transfer matrix.
    pub fn new(circuit: &BrickworkCircuit<C64>, scheme: &ReweightScheme) -> Result<Self> {
        let circuit = circuit.try_map(|g| Ok(build_supergate(g.bond, &g.op, scheme)?.transfer))?;
        Ok(Self { circuit, scheme: *scheme })
    }

    pub fn scheme(&self) -> &ReweightScheme {
        &self.scheme
    }

    pub fn circuit(&self) -> &BrickworkCircuit<f64> {
        &self.circuit
    }
}

/// Checks a 2×2 single-site density matrix: Hermitian, unit trace, PSD.
fn validate_density(i: usize, rho: &DMatrix<C64>) -> Result<()> {
    if rho.shape() != (2, 2) {
        return Err(Error::domain(format!("site {i}: density matrix must be 2x2")));
    }
    let herm = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tr = rho[(0, 0)] + rho[(1, 1)];
    let det = (rho[(0, 0)] * rho[(1, 1)] - rho[(0, 1)] * rho[(1, 0)]).re;
    let min_diag = rho[(0, 0)].re.min(rho[(1, 1)].re);
    if herm > DENSITY_TOL
        || (tr - C64::new(1.0, 0.0)).norm() > DENSITY_TOL
        || det < -DENSITY_TOL
        || min_diag < -DENSITY_TOL
    {
        return Err(Error::domain(format!("site {i}: not a density matrix: {rho}")));
    }
    Ok(())
}

/// `Tr[σ̄^μ X]` for a 2×2 matrix `X`, μ = 0..4.
fn dual_coefficients(x: &DMatrix<C64>, scheme: &ReweightScheme) -> [C64; 4] {
    Pauli::ALL.map(|p| (scheme.dual(p) * x).trace())
}

/// Embeds a complex train into a real one via `x + iy ↦ [[x, −y], [y, x]]`
/// on interior bonds. `row` selects the real (0) or imaginary (1) part of
/// every coefficient.
fn realify(train: &TensorTrain<C64>, row: usize) -> Result<TensorTrain<f64>> {
    let len = train.len();
    let d = train.phys_dim();
    let sites = (0..len)
        .map(|i| {
            let t = train.site(i);
            let (cl, cr) = (t.shape()[0], t.shape()[2]);
            let (cl2, cr2) = (if i == 0 { 1 } else { 2 * cl }, if i == len - 1 { 1 } else { 2 * cr });
            Tensor::from_fn(vec![cl2, d, cr2], |idx| {
                let (a, p) = if i == 0 { (0, row) } else { (idx[0] / 2, idx[0] % 2) };
                let (b, q) = if i == len - 1 { (0, 0) } else { (idx[2] / 2, idx[2] % 2) };
                let z = t.get(&[a, idx[1], b]);
                match (p, q) {
                    (0, 0) | (1, 1) => z.re,
                    (0, 1) => -z.im,
                    _ => z.im,
                }
            })
        })
        .collect();
    TensorTrain::from_sites(sites, d)
}

/// Real part of every coefficient, as a real train with doubled interior
/// bonds.
pub(crate) fn real_part_train(train: &TensorTrain<C64>) -> Result<TensorTrain<f64>> {
    realify(train, 0)
}

/// Drops the imaginary part site by site; fails unless every site tensor is
/// real already.
pub(crate) fn sitewise_real(train: &TensorTrain<C64>) -> Result<TensorTrain<f64>> {
    let sites = train
        .sites()
        .iter()
        .map(|t| {
            if t.data().iter().any(|z| z.im.abs() > IMAG_RESIDUE_TOL) {
                return Err(Error::InternalConsistency("site tensor has an imaginary part".into()));
            }
            Tensor::new(t.shape().to_vec(), t.data().iter().map(|z| z.re).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    TensorTrain::from_sites(sites, train.phys_dim())
}

impl Mpdo {
    pub fn from_train(train: TensorTrain<f64>, scheme: ReweightScheme) -> Result<Self> {
        if train.phys_dim() != 4 {
            return Err(Error::domain("an MPDO train needs physical dimension 4"));
        }
        let mut train = train;
        train.set_unit_norm(false);
        Ok(Self { train, scheme })
    }

    /// Real MPDO from complex Pauli coefficients of a Hermitian operator.
    /// Fails when the imaginary part of the coefficients is not negligible.
    pub fn from_complex_train(train: &TensorTrain<C64>, scheme: ReweightScheme) -> Result<Self> {
        let re = realify(train, 0)?;
        let im = realify(train, 1)?;
        let (nr, ni) = (re.norm_squared().sqrt(), im.norm_squared().sqrt());
        if ni > IMAG_RESIDUE_TOL * nr.max(1.0) {
            return Err(Error::InternalConsistency(format!("Pauli coefficients have imaginary part of norm {ni:e}")));
        }
        Self::from_train(re, scheme)
    }

    pub fn train(&self) -> &TensorTrain<f64> {
        &self.train
    }

    pub fn train_mut(&mut self) -> &mut TensorTrain<f64> {
        &mut self.train
    }

    pub fn scheme(&self) -> &ReweightScheme {
        &self.scheme
    }

    pub fn len(&self) -> usize {
        self.train.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train.is_empty()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.train.max_bond_dim()
    }

    /// One first-order Trotter step with the transfer matrices of `circuit`.
    pub fn rtebd_step(&mut self, circuit: &SuperCircuit, policy: &TruncationPolicy) -> Result<StepReport> {
        if !self.scheme.same_basis(&circuit.scheme) {
            return Err(Error::domain(format!(
                "supercircuit built for {:?} γ={} but the MPDO uses {:?} γ={}",
                circuit.scheme.kind(),
                circuit.scheme.gamma(),
                self.scheme.kind(),
                self.scheme.gamma()
            )));
        }
        self.train.tebd_step(&circuit.circuit, policy)
    }

    /// `Tr ρ`, the all-identity coefficient.
    pub fn trace(&self) -> f64 {
        self.train.coefficient(&vec![0; self.len()]).expect("identity string is in range")
    }

    /// `Tr[P ρ]` for a Pauli string `P`.
    pub fn pauli_expectation(&self, string: &PauliString) -> Result<f64> {
        let idx = string.indices(self.len())?;
        let w: f64 = string.factors().iter().map(|&(_, p)| self.scheme.weight(p)).product();
        Ok(w * self.train.coefficient(&idx)?)
    }

    /// `Tr[P ρ] / Tr ρ`; a divergence error when the trace vanishes.
    pub fn normalized_expectation(&self, string: &PauliString) -> Result<f64> {
        let tr = self.trace();
        if tr.abs() < crate::metrics::TRACE_THRESHOLD {
            return Err(Error::Divergence { trace: tr });
        }
        Ok(self.pauli_expectation(string)? / tr)
    }

    /// Dense `2^L × 2^L` density matrix, for short chains.
    pub fn to_dense(&self) -> Result<DMatrix<C64>> {
        let len = self.len();
        if len > 8 {
            return Err(Error::Resource(format!("dense density matrix at L = {len}")));
        }
        let coeffs = self.train.to_dense()?;
        let w = self.scheme.weights();
        let dim = 1usize << len;
        let norm = 1.0 / dim as f64;
        let mut rho = DMatrix::<C64>::zeros(dim, dim);
        for (flat, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let mu: Vec<usize> = (0..len).map(|i| (flat >> (2 * (len - 1 - i))) & 3).collect();
            let scale: f64 = mu.iter().map(|&m| w[m]).product::<f64>() * c * norm;
            for col in 0..dim {
                let mut row = 0;
                let mut phase = C64::new(scale, 0.0);
                for (i, &m) in mu.iter().enumerate() {
                    let s = (col >> (len - 1 - i)) & 1;
                    let (s2, ph) = Pauli::ALL[m].apply(s);
                    row |= s2 << (len - 1 - i);
                    phase *= ph;
                }
                rho[(row, col)] += phase;
            }
        }
        Ok(rho)
    }
}

/// Product MPDO `ρ_1 ⊗ ⋯ ⊗ ρ_L` with `A_i^μ = Tr[σ̄^μ ρ_i]`.
pub fn init_product_mpdo(rho_sites: &[DMatrix<C64>], scheme: &ReweightScheme) -> Result<Mpdo> {
    let vecs = rho_sites
        .iter()
        .enumerate()
        .map(|(i, rho)| {
            validate_density(i, rho)?;
            Ok(dual_coefficients(rho, scheme).map(|z| z.re).to_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    let train = TensorTrain::product(&vecs, 4)?;
    Mpdo::from_train(train, *scheme)
}

/// Product MPDO of a pure product state given by one 2-vector per site.
pub fn init_pure_product_mpdo(site_vectors: &[[C64; 2]], scheme: &ReweightScheme) -> Result<Mpdo> {
    let rhos: Vec<DMatrix<C64>> =
        site_vectors.iter().map(|v| DMatrix::from_fn(2, 2, |r, c| v[r] * v[c].conj())).collect();
    init_product_mpdo(&rhos, scheme)
}

/// Complex χ = 1 coefficient train of `|a⟩⟨b|` for product states.
pub(crate) fn outer_product_train(a: &[[C64; 2]], b: &[[C64; 2]], scheme: &ReweightScheme) -> Result<TensorTrain<C64>> {
    let vecs: Vec<Vec<C64>> = a
        .iter()
        .zip(b)
        .map(|(va, vb)| {
            let x = DMatrix::from_fn(2, 2, |r, c| va[r] * vb[c].conj());
            dual_coefficients(&x, scheme).to_vec()
        })
        .collect();
    TensorTrain::product(&vecs, 4)
}

/// Cached identity environments for measuring many strings on one MPDO.
pub struct MpdoMeasure<'a> {
    mpdo: &'a Mpdo,
    left: Vec<Vec<f64>>,
    right: Vec<Vec<f64>>,
}

fn absorb_left(t: &Tensor<f64>, v: &[f64], mu: usize) -> Vec<f64> {
    let (d, cr) = (t.shape()[1], t.shape()[2]);
    let data = t.data();
    let mut out = vec![0.0; cr];
    for (a, &va) in v.iter().enumerate() {
        if va == 0.0 {
            continue;
        }
        let row = &data[(a * d + mu) * cr..(a * d + mu + 1) * cr];
        for (o, &x) in out.iter_mut().zip(row) {
            *o += va * x;
        }
    }
    out
}

impl<'a> MpdoMeasure<'a> {
    pub fn new(mpdo: &'a Mpdo) -> Self {
        let tt = mpdo.train();
        let len = tt.len();
        let mut left = vec![vec![1.0]];
        for i in 0..len {
            let next = absorb_left(tt.site(i), &left[i], 0);
            left.push(next);
        }
        let mut right = vec![Vec::new(); len + 1];
        right[len] = vec![1.0];
        for i in (0..len).rev() {
            let t = tt.site(i);
            let (cl, d, cr) = (t.shape()[0], t.shape()[1], t.shape()[2]);
            let data = t.data();
            right[i] = (0..cl).map(|a| (0..cr).map(|b| data[a * d * cr + b] * right[i + 1][b]).sum()).collect();
        }
        Self { mpdo, left, right }
    }

    pub fn mpdo(&self) -> &Mpdo {
        self.mpdo
    }
}

impl PauliMeasure for MpdoMeasure<'_> {
    fn num_sites(&self) -> usize {
        self.mpdo.len()
    }

    fn trace(&self) -> f64 {
        self.left[self.mpdo.len()][0]
    }

    fn raw_pauli(&self, string: &PauliString) -> Result<C64> {
        let Some((first, last)) = string.support() else {
            return Ok(C64::new(self.trace(), 0.0));
        };
        if last >= self.mpdo.len() {
            return Err(Error::domain(format!("site {last} outside a chain of {}", self.mpdo.len())));
        }
        let scheme = self.mpdo.scheme();
        let mut v = self.left[first].clone();
        let mut w = 1.0;
        for i in first..=last {
            let p = string.at(i);
            w *= scheme.weight(p);
            v = absorb_left(self.mpdo.train().site(i), &v, p.index());
        }
        let val: f64 = v.iter().zip(&self.right[last + 1]).map(|(a, b)| a * b).sum();
        Ok(C64::new(w * val, 0.0))
    }

    fn raw_jw_pairs(&self, i: usize, a: Pauli, b: Pauli) -> Result<Vec<C64>> {
        let len = self.mpdo.len();
        if i >= len {
            return Err(Error::domain(format!("site {i} outside a chain of {len}")));
        }
        let scheme = self.mpdo.scheme();
        let tt = self.mpdo.train();
        let mut v = absorb_left(tt.site(i), &self.left[i], a.index());
        let mut w = scheme.weight(a);
        let mut out = Vec::with_capacity(len - i - 1);
        for j in i + 1..len {
            let closed = absorb_left(tt.site(j), &v, b.index());
            let val: f64 = closed.iter().zip(&self.right[j + 1]).map(|(x, y)| x * y).sum();
            out.push(C64::new(w * scheme.weight(b) * val, 0.0));
            v = absorb_left(tt.site(j), &v, Pauli::Z.index());
            w *= scheme.weight(Pauli::Z);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{fermion_bond_gate, fermion_gates, fock_initial_state, fock_site_vectors, spin_site_vector};
    use crate::pauli::SchemeKind;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn up() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)])
    }

    fn down() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[c(0.0), c(0.0), c(0.0), c(1.0)])
    }

    #[test]
    fn maximally_mixed_site() {
        let half = DMatrix::identity(2, 2) * c(0.5);
        let m = init_product_mpdo(&[half], &ReweightScheme::new(SchemeKind::Fermionic, 1.5).unwrap()).unwrap();
        assert_eq!(m.train().site(0).data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn polarized_site_fermionic_weights() {
        let m = init_product_mpdo(&[up()], &ReweightScheme::new(SchemeKind::Fermionic, 1.5).unwrap()).unwrap();
        let a = m.train().site(0).data();
        assert!((a[0] - 1.0).abs() < 1e-15);
        assert!(a[1].abs() < 1e-15 && a[2].abs() < 1e-15);
        assert!((a[3] - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn spin_tilt_site_coefficient() {
        let gamma = 1.5;
        let scheme = ReweightScheme::new(SchemeKind::Bosonic, gamma).unwrap();
        let m = init_pure_product_mpdo(&[spin_site_vector(0.1)], &scheme).unwrap();
        let expected = ((1.1f64.powi(2) - 0.9f64.powi(2)) / (1.1f64.powi(2) + 0.9f64.powi(2))) / gamma;
        assert!((m.train().site(0).data()[3] - expected).abs() < 1e-15);
        assert!((expected * gamma - 0.19802).abs() < 1e-5);
    }

    #[test]
    fn invalid_density_rejected() {
        let s = ReweightScheme::unweighted();
        let not_psd = DMatrix::from_row_slice(2, 2, &[c(1.5), c(0.0), c(0.0), c(-0.5)]);
        let bad_trace = DMatrix::identity(2, 2) * c(1.0);
        let non_herm = DMatrix::from_row_slice(2, 2, &[c(0.5), c(0.3), c(0.0), c(0.5)]);
        for rho in [not_psd, bad_trace, non_herm] {
            assert!(matches!(init_product_mpdo(&[rho], &s), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn product_trace_and_pauli_values() {
        let s = ReweightScheme::new(SchemeKind::Bosonic, 2.0).unwrap();
        let m = init_product_mpdo(&[up(), down(), up()], &s).unwrap();
        assert!((m.trace() - 1.0).abs() < 1e-15);
        let z0 = PauliString::single(0, Pauli::Z);
        let zz = PauliString::new([(0, Pauli::Z), (1, Pauli::Z)]).unwrap();
        assert!((m.pauli_expectation(&z0).unwrap() - 1.0).abs() < 1e-15);
        assert!((m.pauli_expectation(&zz).unwrap() + 1.0).abs() < 1e-15);
        assert!(m.pauli_expectation(&PauliString::single(3, Pauli::Z)).is_err());
        let meas = MpdoMeasure::new(&m);
        assert!((meas.raw_pauli(&zz).unwrap().re + 1.0).abs() < 1e-15);
        assert!((meas.trace() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dense_reconstruction_of_product() {
        let s = ReweightScheme::new(SchemeKind::Fermionic, 1.7).unwrap();
        let v = [spin_site_vector(0.1), spin_site_vector(-0.1)];
        let m = init_pure_product_mpdo(&v, &s).unwrap();
        let psi: Vec<C64> = v[0].iter().flat_map(|&a| v[1].iter().map(move |&b| a * b)).collect();
        let rho = m.to_dense().unwrap();
        for r in 0..4 {
            for col in 0..4 {
                assert!((rho[(r, col)] - psi[r] * psi[col].conj()).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn two_site_hopping_oscillation() {
        let t = 0.3;
        let s = ReweightScheme::new(SchemeKind::Fermionic, 1.5).unwrap();
        let mut m = init_product_mpdo(&[up(), down()], &s).unwrap();
        let circ = BrickworkCircuit::new(vec![crate::mps::Gate { bond: 0, op: fermion_bond_gate(1.0, t) }], vec![], t)
            .unwrap();
        let sc = SuperCircuit::new(&circ, &s).unwrap();
        m.rtebd_step(&sc, &TruncationPolicy::exact()).unwrap();
        let z0 = m.pauli_expectation(&PauliString::single(0, Pauli::Z)).unwrap();
        let n0 = 0.5 * (1.0 + z0);
        assert!((n0 - t.cos().powi(2)).abs() < 1e-14);
        assert!((m.trace() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn scheme_mismatch_rejected() {
        let s1 = ReweightScheme::new(SchemeKind::Fermionic, 1.5).unwrap();
        let s2 = ReweightScheme::new(SchemeKind::Bosonic, 1.5).unwrap();
        let mut m = init_product_mpdo(&[up(), down()], &s1).unwrap();
        let sc = SuperCircuit::new(&fermion_gates(2, 1.0, 0.1).unwrap(), &s2).unwrap();
        assert!(matches!(m.rtebd_step(&sc, &TruncationPolicy::exact()), Err(Error::Domain(_))));
    }

    #[test]
    fn normalized_expectation_is_scale_invariant() {
        let s = ReweightScheme::new(SchemeKind::Fermionic, 1.5).unwrap();
        let occ = fock_initial_state(4);
        let mut m = init_pure_product_mpdo(&fock_site_vectors(&occ), &s).unwrap();
        let sc = SuperCircuit::new(&fermion_gates(4, 1.0, 0.08).unwrap(), &s).unwrap();
        for _ in 0..3 {
            m.rtebd_step(&sc, &TruncationPolicy::exact()).unwrap();
        }
        let z = PauliString::single(1, Pauli::Z);
        let before = m.normalized_expectation(&z).unwrap();
        let t = m.train().site(2).scale(2.0);
        m.train_mut().replace_site(2, t).unwrap();
        assert!((m.trace() - 2.0).abs() < 1e-12);
        assert!((m.normalized_expectation(&z).unwrap() - before).abs() < 1e-12);
        let zero = m.train().site(0).scale(0.0);
        m.train_mut().replace_site(0, zero).unwrap();
        assert!(matches!(m.normalized_expectation(&z), Err(Error::Divergence { .. })));
    }

    #[test]
    fn hermitian_complex_train_realifies() {
        let s = ReweightScheme::new(SchemeKind::Xy, 1.3).unwrap();
        let a = [spin_site_vector(0.1), spin_site_vector(-0.1), spin_site_vector(0.1)];
        let b = [[c(0.0), c(1.0)], [c(1.0), c(0.0)], [C64::new(0.0, 1.0), c(0.0)]];
        let ab = outer_product_train(&a, &b, &s).unwrap();
        let ba = outer_product_train(&b, &a, &s).unwrap();
        let herm = TensorTrain::direct_sum(&[ab.clone(), ba]).unwrap();
        let m = Mpdo::from_complex_train(&herm, s).unwrap();
        // dense |a⟩⟨b| + |b⟩⟨a|
        let kron = |v: &[[C64; 2]]| -> Vec<C64> {
            v.iter().fold(vec![c(1.0)], |acc, x| acc.iter().flat_map(|&p| x.iter().map(move |&q| p * q)).collect())
        };
        let (va, vb) = (kron(&a), kron(&b));
        let rho = m.to_dense().unwrap();
        for r in 0..8 {
            for col in 0..8 {
                let e = va[r] * vb[col].conj() + vb[r] * va[col].conj();
                assert!((rho[(r, col)] - e).norm() < 1e-13);
            }
        }
        assert!(matches!(Mpdo::from_complex_train(&ab, s), Err(Error::InternalConsistency(_))));
    }
}
