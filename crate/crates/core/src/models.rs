//! Benchmark models: Hamiltonians split into bond terms, their Trotter
//! gates, initial states, and Jordan–Wigner observables.
//!
//! Fermions map to spins with `|↑⟩ = occupied` and the string convention
//! `c_j = Π_{k<j} (−σᶻ_k) σ⁻_j`, so that nearest-neighbor hopping is
//! `c_i†c_{i+1} + h.c. = (σˣσˣ + σʸσʸ)/2` with no sign.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;

use crate::mpdo::{outer_product_train, real_part_train, sitewise_real, Mpdo};
use crate::mps::{BrickworkCircuit, Gate, TensorTrain};
use crate::pauli::{Pauli, PauliString, ReweightScheme};
use crate::{Error, Result, C64};

/// A linear combination of Pauli strings.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PauliStringOperator {
    terms: Vec<(C64, PauliString)>,
}

impl PauliStringOperator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: Vec<(C64, PauliString)>) -> Self {
        let mut op = Self::new();
        for (c, s) in terms {
            op.add(c, s);
        }
        op
    }

    /// Adds `c · s`, merging with an existing term on the same string.
    pub fn add(&mut self, c: C64, s: PauliString) {
        match self.terms.iter_mut().find(|t| t.1 == s) {
            Some(t) => t.0 += c,
            None => self.terms.push((c, s)),
        }
    }

    pub fn add_operator(&mut self, scale: C64, other: &PauliStringOperator) {
        for (c, s) in &other.terms {
            self.add(scale * c, s.clone());
        }
    }

    pub fn scaled(&self, scale: C64) -> Self {
        Self { terms: self.terms.iter().map(|(c, s)| (scale * c, s.clone())).collect() }
    }

    /// Operator product, expanded term by term.
    pub fn mul(&self, other: &PauliStringOperator) -> Self {
        let mut out = Self::new();
        for (a, sa) in &self.terms {
            for (b, sb) in &other.terms {
                let (ph, s) = sa.mul(sb);
                out.add(a * b * ph, s);
            }
        }
        out
    }

    /// Terms with non-negligible coefficients.
    pub fn terms(&self) -> impl Iterator<Item = &(C64, PauliString)> {
        self.terms.iter().filter(|(c, _)| c.norm() > 1e-15)
    }

    pub fn num_terms(&self) -> usize {
        self.terms().count()
    }

    /// Coefficient of `s` (zero when absent).
    pub fn coefficient(&self, s: &PauliString) -> C64 {
        self.terms.iter().filter(|t| &t.1 == s).map(|t| t.0).sum()
    }

    /// Pauli coefficients are real for a Hermitian operator.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.terms.iter().all(|(c, _)| c.im.abs() <= tol)
    }

    /// Largest site index touched plus one.
    pub fn min_len(&self) -> usize {
        self.terms().filter_map(|(_, s)| s.support()).map(|(_, b)| b + 1).max().unwrap_or(0)
    }

    /// Dense `2^len × 2^len` matrix, site 0 most significant.
    pub fn dense(&self, len: usize) -> Result<DMatrix<C64>> {
        if len > 12 {
            return Err(Error::Resource(format!("dense operator at L = {len}")));
        }
        if self.min_len() > len {
            return Err(Error::domain(format!("operator acts beyond a chain of {len}")));
        }
        let dim = 1usize << len;
        let mut m = DMatrix::zeros(dim, dim);
        for (c, s) in self.terms() {
            for col in 0..dim {
                let mut row = col;
                let mut phase = *c;
                for &(site, p) in s.factors() {
                    let shift = len - 1 - site;
                    let (out, ph) = p.apply((col >> shift) & 1);
                    row = (row & !(1 << shift)) | (out << shift);
                    phase *= ph;
                }
                m[(row, col)] += phase;
            }
        }
        Ok(m)
    }
}

/// Observables with a Jordan–Wigner image. Site indices are 0-based.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Observable {
    /// `n_i = (1 + σᶻ_i)/2`
    Number(usize),
    /// `c_i†c_j + c_j†c_i`
    Hopping(usize, usize),
    /// `c_i†c_j`, not Hermitian for `i ≠ j`
    Correlator(usize, usize),
    /// `n_i n_j`
    DensityDensity(usize, usize),
    /// `Σ_i n_i`
    TotalNumber,
    /// `(J/L) Σ_i (c_i†c_{i+1} + h.c.)`
    EnergyDensity { hopping: f64 },
    /// `(1/L) Σ_j e^{−ik(j−½)} n_j` with `j` counted from 1
    Fourier(f64),
}

fn check_site(i: usize, len: usize) -> Result<()> {
    if i >= len {
        return Err(Error::domain(format!("site {i} outside a chain of {len}")));
    }
    Ok(())
}

fn number_op(i: usize) -> PauliStringOperator {
    PauliStringOperator::from_terms(vec![
        (C64::new(0.5, 0.0), PauliString::identity()),
        (C64::new(0.5, 0.0), PauliString::single(i, Pauli::Z)),
    ])
}

/// `c_i†c_j` for `i < j`: `σ⁺_i Π_{i<k<j}(−σᶻ_k) σ⁻_j`.
fn correlator_ordered(i: usize, j: usize) -> PauliStringOperator {
    let sign = if (j - i - 1).is_multiple_of(2) { 1.0 } else { -1.0 };
    let q = 0.25 * sign;
    let string = |a: Pauli, b: Pauli| {
        let mut f = vec![(i, a), (j, b)];
        f.extend((i + 1..j).map(|k| (k, Pauli::Z)));
        PauliString::new(f).expect("distinct sites")
    };
    // σ⁺ = (X + iY)/2, σ⁻ = (X − iY)/2
    PauliStringOperator::from_terms(vec![
        (C64::new(q, 0.0), string(Pauli::X, Pauli::X)),
        (C64::new(0.0, -q), string(Pauli::X, Pauli::Y)),
        (C64::new(0.0, q), string(Pauli::Y, Pauli::X)),
        (C64::new(q, 0.0), string(Pauli::Y, Pauli::Y)),
    ])
}

fn correlator(i: usize, j: usize) -> PauliStringOperator {
    use std::cmp::Ordering::*;
    match i.cmp(&j) {
        Equal => number_op(i),
        Less => correlator_ordered(i, j),
        // (c_j†c_i)† conjugates every coefficient
        Greater => {
            let op = correlator_ordered(j, i);
            PauliStringOperator::from_terms(op.terms.into_iter().map(|(c, s)| (c.conj(), s)).collect())
        }
    }
}

/// Pauli expansion of a fermionic observable on an `len`-site chain.
pub fn jw_observable(obs: Observable, len: usize) -> Result<PauliStringOperator> {
    if len == 0 {
        return Err(Error::domain("empty chain"));
    }
    let ordered = |i: usize, j: usize| -> Result<()> {
        check_site(i, len)?;
        check_site(j, len)?;
        if i >= j {
            return Err(Error::domain(format!("expected i < j, got ({i}, {j})")));
        }
        Ok(())
    };
    Ok(match obs {
        Observable::Number(i) => {
            check_site(i, len)?;
            number_op(i)
        }
        Observable::Hopping(i, j) => {
            ordered(i, j)?;
            let mut op = correlator(i, j);
            op.add_operator(C64::new(1.0, 0.0), &correlator(j, i));
            PauliStringOperator::from_terms(op.terms().cloned().collect())
        }
        Observable::Correlator(i, j) => {
            check_site(i, len)?;
            check_site(j, len)?;
            correlator(i, j)
        }
        Observable::DensityDensity(i, j) => {
            ordered(i, j)?;
            number_op(i).mul(&number_op(j))
        }
        Observable::TotalNumber => {
            let mut op = PauliStringOperator::new();
            for i in 0..len {
                op.add_operator(C64::new(1.0, 0.0), &number_op(i));
            }
            op
        }
        Observable::EnergyDensity { hopping } => {
            let mut op = PauliStringOperator::new();
            for i in 0..len.saturating_sub(1) {
                op.add_operator(
                    C64::new(hopping / len as f64, 0.0),
                    &jw_observable(Observable::Hopping(i, i + 1), len)?,
                );
            }
            op
        }
        Observable::Fourier(k) => {
            let mut op = PauliStringOperator::new();
            for j in 0..len {
                let phase = C64::from_polar(1.0 / len as f64, -k * (j as f64 + 0.5));
                op.add_operator(phase, &number_op(j));
            }
            op
        }
    })
}

/// Pauli expansion `Σ_{ab} ¼ Tr[(σ^a ⊗ σ^b) h] σ^a_i σ^b_{i+1}` of a
/// two-site operator on bond `i`.
pub fn two_site_pauli_expansion(bond: usize, h: &DMatrix<C64>) -> PauliStringOperator {
    let mut op = PauliStringOperator::new();
    for a in Pauli::ALL {
        for b in Pauli::ALL {
            let c = (a.matrix().kronecker(&b.matrix()) * h).trace() * 0.25;
            if c.norm() > 1e-15 {
                op.add(c, PauliString::new([(bond, a), (bond + 1, b)]).expect("distinct sites"));
            }
        }
    }
    op
}

/// `exp(−i·dt·h)` for a Hermitian `h`, by eigendecomposition.
pub fn hermitian_exp(h: &DMatrix<C64>, dt: f64) -> Result<DMatrix<C64>> {
    if !dt.is_finite() {
        return Err(Error::domain(format!("time step must be finite, got {dt}")));
    }
    let herm = (h - h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if herm > 1e-12 {
        return Err(Error::domain("bond term is not Hermitian"));
    }
    let eig = h.clone().symmetric_eigen();
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| C64::from_polar(1.0, -dt * e)));
    Ok(&eig.eigenvectors * phases * eig.eigenvectors.adjoint())
}

fn kron2(a: Pauli, b: Pauli) -> DMatrix<C64> {
    a.matrix().kronecker(&b.matrix())
}

/// Global Hamiltonian as a sum of two-site terms on bonds `0 … L−2`.
#[derive(Clone, Debug, PartialEq)]
pub struct BondHamiltonian {
    len: usize,
    terms: Vec<(usize, DMatrix<C64>)>,
    field_split: String,
}

impl BondHamiltonian {
    /// `J Σ_i (c_i†c_{i+1} + h.c.)`, bond term `(J/2)(σˣσˣ + σʸσʸ)`.
    pub fn free_fermion(len: usize, hopping: f64) -> Result<Self> {
        if len < 2 {
            return Err(Error::domain("a chain needs at least two sites"));
        }
        let h = (kron2(Pauli::X, Pauli::X) + kron2(Pauli::Y, Pauli::Y)) * C64::new(hopping / 2.0, 0.0);
        Ok(Self { len, terms: (0..len - 1).map(|b| (b, h.clone())).collect(), field_split: "none".into() })
    }

    /// `J Σ SᶻSᶻ + (hx/2) Σ Sˣ + (hz/2) Σ Sᶻ` with `S = σ/2`. Interior
    /// single-site terms are shared equally by the two adjacent bonds; an end
    /// site gives its whole term to its only bond.
    pub fn spin(len: usize, j: f64, hx: f64, hz: f64) -> Result<Self> {
        if len < 2 {
            return Err(Error::domain("a chain needs at least two sites"));
        }
        let id = DMatrix::<C64>::identity(2, 2);
        let field = Pauli::X.matrix() * C64::new(hx / 4.0, 0.0) + Pauli::Z.matrix() * C64::new(hz / 4.0, 0.0);
        let zz = kron2(Pauli::Z, Pauli::Z) * C64::new(j / 4.0, 0.0);
        let terms = (0..len - 1)
            .map(|b| {
                let left = if b == 0 { 1.0 } else { 0.5 };
                let right = if b + 1 == len - 1 { 1.0 } else { 0.5 };
                let h = &zz + field.kronecker(&id) * C64::new(left, 0.0) + id.kronecker(&field) * C64::new(right, 0.0);
                (b, h)
            })
            .collect();
        Ok(Self { len, terms, field_split: "interior half/half, boundary full".into() })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn terms(&self) -> &[(usize, DMatrix<C64>)] {
        &self.terms
    }

    /// How single-site terms were distributed over bonds.
    pub fn field_split(&self) -> &str {
        &self.field_split
    }

    /// First-order brickwork circuit of `exp(−i·dt·h_b)`.
    pub fn gates(&self, dt: f64) -> Result<BrickworkCircuit<C64>> {
        let mut odd = Vec::new();
        let mut even = Vec::new();
        for (b, h) in &self.terms {
            let g = Gate { bond: *b, op: hermitian_exp(h, dt)? };
            if b % 2 == 0 {
                odd.push(g);
            } else {
                even.push(g);
            }
        }
        BrickworkCircuit::new(odd, even, dt)
    }

    /// `H` as Pauli strings.
    pub fn operator(&self) -> PauliStringOperator {
        let mut op = PauliStringOperator::new();
        for (b, h) in &self.terms {
            op.add_operator(C64::new(1.0, 0.0), &two_site_pauli_expansion(*b, h));
        }
        op
    }

    /// `H / L` as Pauli strings.
    pub fn energy_density_operator(&self) -> PauliStringOperator {
        self.operator().scaled(C64::new(1.0 / self.len as f64, 0.0))
    }

    /// Dense `H` assembled by embedding every bond term.
    pub fn dense(&self) -> Result<DMatrix<C64>> {
        if self.len > 12 {
            return Err(Error::Resource(format!("dense Hamiltonian at L = {}", self.len)));
        }
        let dim = 1usize << self.len;
        let mut m = DMatrix::zeros(dim, dim);
        for (b, h) in &self.terms {
            let left = DMatrix::<C64>::identity(1 << b, 1 << b);
            let right_n = 1usize << (self.len - b - 2);
            let right = DMatrix::<C64>::identity(right_n, right_n);
            m += left.kronecker(h).kronecker(&right);
        }
        Ok(m)
    }
}

/// Nearest-neighbor hopping gate `exp(−i·dt·(J/2)(σˣσˣ + σʸσʸ))`.
pub fn fermion_bond_gate(hopping: f64, dt: f64) -> DMatrix<C64> {
    let h = (kron2(Pauli::X, Pauli::X) + kron2(Pauli::Y, Pauli::Y)) * C64::new(hopping / 2.0, 0.0);
    hermitian_exp(&h, dt).expect("hopping term is Hermitian")
}

pub fn fermion_gates(len: usize, hopping: f64, dt: f64) -> Result<BrickworkCircuit<C64>> {
    BondHamiltonian::free_fermion(len, hopping)?.gates(dt)
}

pub fn spin_gates(len: usize, j: f64, hx: f64, hz: f64, dt: f64) -> Result<BrickworkCircuit<C64>> {
    BondHamiltonian::spin(len, j, hx, hz)?.gates(dt)
}

/// Whether 1-based site `j` belongs to the `{1, 2, 7, 0} mod 8` pattern.
fn in_pattern(j: usize) -> bool {
    matches!(j % 8, 1 | 2 | 7 | 0)
}

/// Occupations `1` on the `{1, 2, 7, 0} mod 8` pattern (1-based), else `0`.
pub fn fock_initial_state(len: usize) -> Vec<u8> {
    (1..=len).map(|j| u8::from(in_pattern(j))).collect()
}

/// Site vectors of a Fock state: occupied `↦ |↑⟩`, empty `↦ |↓⟩`.
pub fn fock_site_vectors(occ: &[u8]) -> Vec<[C64; 2]> {
    let (one, zero) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
    occ.iter().map(|&n| if n != 0 { [one, zero] } else { [zero, one] }).collect()
}

/// Normalized `(1 + g)|↑⟩ + (1 − g)|↓⟩`.
pub fn spin_site_vector(g: f64) -> [C64; 2] {
    let n = ((1.0 + g).powi(2) + (1.0 - g).powi(2)).sqrt();
    [C64::new((1.0 + g) / n, 0.0), C64::new((1.0 - g) / n, 0.0)]
}

/// Tilt parameters `g_i = −0.1` on the pattern sites, `+0.1` elsewhere.
pub fn spin_tilts(len: usize) -> Vec<f64> {
    (1..=len).map(|j| if in_pattern(j) { -0.1 } else { 0.1 }).collect()
}

pub fn spin_initial_state(len: usize) -> Vec<[C64; 2]> {
    spin_tilts(len).into_iter().map(spin_site_vector).collect()
}

/// `(|ψ₀⟩ + Πσˣ|ψ₀⟩)/√2` for the Fock pattern `ψ₀`, a χ = 2 MPS.
pub fn ghz_initial_mps(len: usize) -> Result<TensorTrain<C64>> {
    if len < 2 {
        return Err(Error::domain("GHZ state needs at least two sites"));
    }
    let occ = fock_initial_state(len);
    let flipped: Vec<u8> = occ.iter().map(|&n| 1 - n).collect();
    let mut a = fock_site_vectors(&occ);
    let mut b = fock_site_vectors(&flipped);
    a[0] = a[0].map(|z| z * FRAC_1_SQRT_2);
    b[0] = b[0].map(|z| z * FRAC_1_SQRT_2);
    let ta = TensorTrain::product(&a.iter().map(|v| v.to_vec()).collect::<Vec<_>>(), 2)?;
    let tb = TensorTrain::product(&b.iter().map(|v| v.to_vec()).collect::<Vec<_>>(), 2)?;
    let mut tt = TensorTrain::direct_sum(&[ta, tb])?;
    tt.set_unit_norm(true);
    tt.canonicalize(0);
    Ok(tt)
}

/// GHZ density operator `½(|a⟩⟨a| + |b⟩⟨b| + |a⟩⟨b| + |b⟩⟨a|)` with
/// `|a⟩ = |ψ₀⟩` and `|b⟩ = Πσˣ|ψ₀⟩`.
///
/// The four χ = 1 coefficient trains are complex; the cross pair is checked
/// to have vanishing imaginary part and stored as `Re` of `|a⟩⟨b|` (real
/// χ = 2). The result has χ = 4 and needs no SVD, so cross terms survive
/// even when their coefficient norm is far below that of the diagonal part.
pub fn ghz_initial_mpdo(len: usize, scheme: &ReweightScheme) -> Result<Mpdo> {
    if len < 2 {
        return Err(Error::domain("GHZ state needs at least two sites"));
    }
    let occ = fock_initial_state(len);
    let flipped: Vec<u8> = occ.iter().map(|&n| 1 - n).collect();
    let a = fock_site_vectors(&occ);
    let b = fock_site_vectors(&flipped);

    let ab = outer_product_train(&a, &b, scheme)?;
    let ba = outer_product_train(&b, &a, scheme)?;
    // the Hermitian cross pair must have real coefficients
    Mpdo::from_complex_train(&TensorTrain::direct_sum(&[ab.clone(), ba])?, *scheme)?;

    let mut aa = sitewise_real(&outer_product_train(&a, &a, scheme)?)?;
    let mut bb = sitewise_real(&outer_product_train(&b, &b, scheme)?)?;
    for t in [&mut aa, &mut bb] {
        let s = t.site(0).scale(0.5);
        t.replace_site(0, s)?;
    }
    // ½(|a⟩⟨b| + |b⟩⟨a|) = Re |a⟩⟨b|
    let cross = real_part_train(&ab)?;
    Mpdo::from_train(TensorTrain::direct_sum(&[aa, bb, cross])?, *scheme)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::fermion_annihilator;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn fock_pattern() {
        assert_eq!(fock_initial_state(8), vec![1, 1, 0, 0, 0, 0, 1, 1]);
        let l16 = fock_initial_state(16);
        assert_eq!(&l16[..8], &l16[8..]);
        for len in [8, 16, 24, 64] {
            let filled: usize = fock_initial_state(len).iter().map(|&n| n as usize).sum();
            assert_eq!(2 * filled, len);
        }
    }

    #[test]
    fn spin_tilt_pattern() {
        let g = spin_tilts(8);
        let signs: Vec<bool> = g.iter().map(|x| *x < 0.0).collect();
        assert_eq!(signs, vec![true, true, false, false, false, false, true, true]);
        for (v, g) in spin_initial_state(8).iter().zip(&g) {
            assert!((v[0].norm_sqr() + v[1].norm_sqr() - 1.0).abs() < 1e-14);
            let z = v[0].norm_sqr() - v[1].norm_sqr();
            assert!((z.abs() - 0.4 / 2.02).abs() < 1e-14);
            assert_eq!(z < 0.0, *g < 0.0);
        }
    }

    #[test]
    fn gates_at_zero_time_are_identity() {
        let id = DMatrix::<C64>::identity(4, 4);
        for circ in [fermion_gates(5, 1.0, 0.0).unwrap(), spin_gates(5, 1.0, 0.9045, 0.809, 0.0).unwrap()] {
            for g in circ.gates() {
                assert!(max_diff(&g.op, &id) < 1e-14);
            }
        }
    }

    #[test]
    fn gates_are_unitary_and_conserve_number() {
        let g = fermion_bond_gate(1.0, 0.08);
        assert!(crate::pauli::unitarity_defect(&g) < 1e-12);
        let n_tot = (kron2(Pauli::Z, Pauli::I) + kron2(Pauli::I, Pauli::Z)) * c(1.0);
        assert!(max_diff(&(&g * &n_tot), &(&n_tot * &g)) < 1e-14);
        for sg in spin_gates(4, 1.0, 0.9045, 0.809, 0.1).unwrap().gates() {
            assert!(crate::pauli::unitarity_defect(&sg.op) < 1e-12);
        }
    }

    #[test]
    fn hopping_gate_closed_form() {
        let (t, j) = (0.37, 1.3);
        let g = fermion_bond_gate(j, t);
        assert!((g[(0, 0)] - c(1.0)).norm() < 1e-14);
        assert!((g[(3, 3)] - c(1.0)).norm() < 1e-14);
        assert!((g[(1, 1)] - c((j * t).cos())).norm() < 1e-14);
        assert!((g[(2, 1)] - C64::new(0.0, -(j * t).sin())).norm() < 1e-14);
    }

    #[test]
    fn spin_bond_terms_reassemble_global_hamiltonian() {
        let (len, j, hx, hz) = (6, 1.0, 0.9045, 0.809);
        let h = BondHamiltonian::spin(len, j, hx, hz).unwrap();
        // global H built independently from single-site embeddings
        let embed = |site: usize, m: &DMatrix<C64>| {
            let l = DMatrix::<C64>::identity(1 << site, 1 << site);
            let r = DMatrix::<C64>::identity(1 << (len - site - 1), 1 << (len - site - 1));
            l.kronecker(m).kronecker(&r)
        };
        let s = |p: Pauli| p.matrix() * c(0.5);
        let mut global = DMatrix::<C64>::zeros(1 << len, 1 << len);
        for i in 0..len {
            if i + 1 < len {
                global += embed(i, &s(Pauli::Z)) * embed(i + 1, &s(Pauli::Z)) * c(j);
            }
            global += embed(i, &s(Pauli::X)) * c(hx / 2.0) + embed(i, &s(Pauli::Z)) * c(hz / 2.0);
        }
        assert!(max_diff(&h.dense().unwrap(), &global) < 1e-12);
        assert!(max_diff(&h.operator().dense(len).unwrap(), &global) < 1e-12);
    }

    #[test]
    fn transverse_field_gates_commute_with_parity() {
        let len = 4;
        let parity =
            PauliStringOperator::from_terms(vec![(c(1.0), PauliString::new((0..len).map(|i| (i, Pauli::X))).unwrap())])
                .dense(len)
                .unwrap();
        let circ = spin_gates(len, 1.0, 0.9045, 0.0, 0.3).unwrap();
        for g in circ.gates() {
            let l = DMatrix::<C64>::identity(1 << g.bond, 1 << g.bond);
            let rn = 1 << (len - g.bond - 2);
            let full = l.kronecker(&g.op).kronecker(&DMatrix::<C64>::identity(rn, rn));
            assert!(max_diff(&(&full * &parity), &(&parity * &full)) < 1e-12);
        }
        let zz_only = spin_gates(len, 1.0, 0.0, 0.0, 0.3).unwrap();
        for g in zz_only.gates() {
            let z = kron2(Pauli::Z, Pauli::I);
            assert!(max_diff(&(&g.op * &z), &(&z * &g.op)) < 1e-12);
        }
    }

    #[test]
    fn number_operator_terms() {
        let n = jw_observable(Observable::Number(2), 4).unwrap();
        assert_eq!(n.num_terms(), 2);
        assert_eq!(n.coefficient(&PauliString::identity()), c(0.5));
        assert_eq!(n.coefficient(&PauliString::single(2, Pauli::Z)), c(0.5));
        assert!(jw_observable(Observable::Number(4), 4).is_err());
        assert!(jw_observable(Observable::Hopping(2, 1), 4).is_err());
    }

    #[test]
    fn nearest_neighbor_hopping_matches_fock_space() {
        let len = 4;
        let op = jw_observable(Observable::Hopping(1, 2), len).unwrap();
        assert_eq!(op.num_terms(), 2);
        let xx = PauliString::new([(1, Pauli::X), (2, Pauli::X)]).unwrap();
        let yy = PauliString::new([(1, Pauli::Y), (2, Pauli::Y)]).unwrap();
        assert!((op.coefficient(&xx) - c(0.5)).norm() < 1e-15);
        assert!((op.coefficient(&yy) - c(0.5)).norm() < 1e-15);
        let (c1, c2) = (fermion_annihilator(len, 1).unwrap(), fermion_annihilator(len, 2).unwrap());
        let fock = c1.adjoint() * &c2 + c2.adjoint() * &c1;
        assert!(max_diff(&op.dense(len).unwrap(), &fock) < 1e-14);
    }

    #[test]
    fn long_range_correlator_has_four_strings_with_jw_tail() {
        let len = 4;
        let op = jw_observable(Observable::Correlator(0, 2), len).unwrap();
        assert_eq!(op.num_terms(), 4);
        for (coef, s) in op.terms() {
            assert_eq!(s.at(1), Pauli::Z);
            assert!((coef.norm() - 0.25).abs() < 1e-15);
        }
        for i in 0..len {
            for j in 0..len {
                let ci = fermion_annihilator(len, i).unwrap();
                let cj = fermion_annihilator(len, j).unwrap();
                let dense = jw_observable(Observable::Correlator(i, j), len).unwrap().dense(len).unwrap();
                assert!(max_diff(&dense, &(ci.adjoint() * cj)) < 1e-14, "({i},{j})");
            }
        }
        let hop = jw_observable(Observable::Hopping(0, 3), len).unwrap();
        assert_eq!(hop.num_terms(), 2);
        assert!(hop.is_hermitian(1e-15));
    }

    #[test]
    fn total_number_is_sum_of_site_numbers() {
        let len = 5;
        let total = jw_observable(Observable::TotalNumber, len).unwrap().dense(len).unwrap();
        let mut sum = DMatrix::<C64>::zeros(1 << len, 1 << len);
        for i in 0..len {
            let ci = fermion_annihilator(len, i).unwrap();
            sum += ci.adjoint() * ci;
        }
        assert!(max_diff(&total, &sum) < 1e-14);
    }

    #[test]
    fn energy_density_matches_hamiltonian() {
        let len = 5;
        let a = jw_observable(Observable::EnergyDensity { hopping: 0.7 }, len).unwrap().dense(len).unwrap();
        let b = BondHamiltonian::free_fermion(len, 0.7).unwrap().energy_density_operator().dense(len).unwrap();
        assert!(max_diff(&a, &b) < 1e-14);
    }

    #[test]
    fn density_density_is_product() {
        let len = 4;
        let nn = jw_observable(Observable::DensityDensity(0, 3), len).unwrap().dense(len).unwrap();
        let n0 = jw_observable(Observable::Number(0), len).unwrap().dense(len).unwrap();
        let n3 = jw_observable(Observable::Number(3), len).unwrap().dense(len).unwrap();
        assert!(max_diff(&nn, &(n0 * n3)) < 1e-14);
    }

    #[test]
    fn ghz_mpdo_matches_dense_construction() {
        let len = 4;
        for scheme in
            [ReweightScheme::unweighted(), ReweightScheme::new(crate::pauli::SchemeKind::Fermionic, 1.5).unwrap()]
        {
            let m = ghz_initial_mpdo(len, &scheme).unwrap();
            assert!((m.trace() - 1.0).abs() < 1e-12);
            assert!(m.max_bond_dim() <= 4);
            let psi = ghz_initial_mps(len).unwrap().to_dense().unwrap();
            let rho = m.to_dense().unwrap();
            for r in 0..16 {
                for col in 0..16 {
                    assert!((rho[(r, col)] - psi[r] * psi[col].conj()).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn single_branch_reduces_to_product_mpdo() {
        let len = 5;
        let scheme = ReweightScheme::new(crate::pauli::SchemeKind::Bosonic, 1.5).unwrap();
        let a = fock_site_vectors(&fock_initial_state(len));
        let tt = outer_product_train(&a, &a, &scheme).unwrap();
        let via_complex = Mpdo::from_complex_train(&tt, scheme).unwrap();
        let direct = crate::mpdo::init_pure_product_mpdo(&a, &scheme).unwrap();
        assert_eq!(via_complex.train().to_dense().unwrap(), direct.train().to_dense().unwrap());
    }
}
