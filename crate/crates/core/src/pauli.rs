//! Reweighted Pauli bases, their duals, and two-site evolution superoperators
//! expressed in those bases.
//!
//! A reweighted basis scales each Pauli matrix, `σ̃^μ = w_μ σ^μ`, and the
//! matching dual basis uses the reciprocal weights, `σ̄^μ = σ^μ / w_μ`, so that
//! `Tr[σ̃^μ σ̄^ν] = 2 δ^{μν}`. A two-site unitary `U` acts on Pauli coefficients
//! through the transfer matrix
//!
//! ```text
//! T[(ν₁,ν₂),(μ₁,μ₂)] = ¼ Tr[(σ̄^{ν₁} ⊗ σ̄^{ν₂}) U (σ̃^{μ₁} ⊗ σ̃^{μ₂}) U†]
//! ```
//!
//! which is real for any unitary and is stored as `f64`.

use std::fmt;

use nalgebra::DMatrix;

use crate::{Error, Result, C64};

/// Single-site Pauli operator. The discriminant is the basis index used
/// everywhere in the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I = 0,
    X = 1,
    Y = 2,
    Z = 3,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Action on a local basis state: `σ |s⟩ = phase · |s'⟩`. Index 0 is `|↑⟩`.
    pub fn apply(self, s: usize) -> (usize, C64) {
        let one = C64::new(1.0, 0.0);
        match self {
            Pauli::I => (s, one),
            Pauli::X => (1 - s, one),
            Pauli::Y => {
                if s == 0 {
                    (1, C64::new(0.0, 1.0))
                } else {
                    (0, C64::new(0.0, -1.0))
                }
            }
            Pauli::Z => (s, if s == 0 { one } else { -one }),
        }
    }

    pub fn matrix(self) -> DMatrix<C64> {
        DMatrix::from_fn(2, 2, |r, c| {
            let (out, phase) = self.apply(c);
            if out == r {
                phase
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        };
        write!(f, "{c}")
    }
}

/// Which Pauli factors carry the reweighting parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    /// `(1, γ, γ, γ)`
    Bosonic,
    /// `(1, γ, γ, γ²)`: every fermion operator factor carries one `γ`, and
    /// `σᶻ` is a product of two.
    Fermionic,
    /// `(1, γ, γ, 1)`: Jordan–Wigner strings are left unweighted.
    Xy,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Bosonic => "bosonic",
            SchemeKind::Fermionic => "fermionic",
            SchemeKind::Xy => "xy",
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bosonic" => Ok(SchemeKind::Bosonic),
            "fermionic" => Ok(SchemeKind::Fermionic),
            "xy" => Ok(SchemeKind::Xy),
            other => Err(Error::domain(format!("unknown reweighting scheme `{other}`"))),
        }
    }
}

/// Per-index weights `w_μ` defining `σ̃^μ = w_μ σ^μ`.
pub fn weights(kind: SchemeKind, gamma: f64) -> Result<[f64; 4]> {
    if !(gamma >= 1.0) || !gamma.is_finite() {
        return Err(Error::domain(format!("reweighting parameter must be a finite γ ≥ 1, got {gamma}")));
    }
    Ok(match kind {
        SchemeKind::Bosonic => [1.0, gamma, gamma, gamma],
        SchemeKind::Fermionic => [1.0, gamma, gamma, gamma * gamma],
        SchemeKind::Xy => [1.0, gamma, gamma, 1.0],
    })
}

/// A reweighting scheme together with its parameter `γ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReweightScheme {
    kind: SchemeKind,
    gamma: f64,
    weights: [f64; 4],
}

impl ReweightScheme {
    pub fn new(kind: SchemeKind, gamma: f64) -> Result<Self> {
        let weights = weights(kind, gamma)?;
        Ok(Self { kind, gamma, weights })
    }

    /// The plain Pauli basis (`γ = 1`), used by MPDO-TEBD.
    pub fn unweighted() -> Self {
        Self { kind: SchemeKind::Bosonic, gamma: 1.0, weights: [1.0; 4] }
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn weights(&self) -> [f64; 4] {
        self.weights
    }

    pub fn dual_weights(&self) -> [f64; 4] {
        self.weights.map(|w| 1.0 / w)
    }

    pub fn weight(&self, p: Pauli) -> f64 {
        self.weights[p.index()]
    }

    /// `σ̃^μ`
    pub fn reweighted(&self, p: Pauli) -> DMatrix<C64> {
        p.matrix() * C64::new(self.weight(p), 0.0)
    }

    /// `σ̄^μ`
    pub fn dual(&self, p: Pauli) -> DMatrix<C64> {
        p.matrix() * C64::new(1.0 / self.weight(p), 0.0)
    }

    /// Whether two schemes define the same basis (equal weights).
    pub fn same_basis(&self, other: &Self) -> bool {
        self.weights == other.weights
    }
}

/// A two-site unitary in a reweighted Pauli basis, acting on sites `bond`
/// and `bond + 1`. `transfer` is 16×16, rows `(ν₁,ν₂)` and columns `(μ₁,μ₂)`
/// flattened as `4·μ₁ + μ₂`.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperGate {
    pub bond: usize,
    pub transfer: DMatrix<f64>,
}

const UNITARITY_TOL: f64 = 1e-10;
const IMAG_RESIDUE_TOL: f64 = 1e-12;

pub(crate) fn unitarity_defect(u: &DMatrix<C64>) -> f64 {
    let n = u.nrows();
    let prod = u.adjoint() * u;
    let id = DMatrix::<C64>::identity(n, n);
    (prod - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Transfer matrix of `ρ ↦ U ρ U†` in the basis defined by `scheme`.
pub fn build_supergate(bond: usize, u: &DMatrix<C64>, scheme: &ReweightScheme) -> Result<SuperGate> {
    if u.shape() != (4, 4) {
        return Err(Error::domain(format!("two-site gate must be 4x4, got {:?}", u.shape())));
    }
    let defect = unitarity_defect(u);
    if !(defect < UNITARITY_TOL) {
        return Err(Error::domain(format!("gate is not unitary (‖U†U − I‖ = {defect:e})")));
    }
    let u_dag = u.adjoint();
    let tilde: Vec<DMatrix<C64>> = (0..16)
        .map(|m| {
            let (a, b) = (Pauli::ALL[m / 4], Pauli::ALL[m % 4]);
            scheme.reweighted(a).kronecker(&scheme.reweighted(b))
        })
        .collect();
    let bar: Vec<DMatrix<C64>> = (0..16)
        .map(|n| {
            let (a, b) = (Pauli::ALL[n / 4], Pauli::ALL[n % 4]);
            scheme.dual(a).kronecker(&scheme.dual(b))
        })
        .collect();
    let evolved: Vec<DMatrix<C64>> = tilde.iter().map(|t| u * t * &u_dag).collect();

    let mut transfer = DMatrix::zeros(16, 16);
    let mut worst_imag: f64 = 0.0;
    let mut largest: f64 = 1.0;
    for (n, b) in bar.iter().enumerate() {
        for (m, e) in evolved.iter().enumerate() {
            // Tr[B E] without forming the product
            let mut tr = C64::new(0.0, 0.0);
            for i in 0..4 {
                for k in 0..4 {
                    tr += b[(i, k)] * e[(k, i)];
                }
            }
            let val = tr * 0.25;
            worst_imag = worst_imag.max(val.im.abs());
            largest = largest.max(val.re.abs());
            transfer[(n, m)] = val.re;
        }
    }
    if worst_imag > IMAG_RESIDUE_TOL * largest {
        return Err(Error::InternalConsistency(format!("transfer matrix has imaginary residue {worst_imag:e}")));
    }
    Ok(SuperGate { bond, transfer })
}

/// Sparse tensor product of Pauli operators: a site-sorted list of
/// non-identity factors.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    factors: Vec<(usize, Pauli)>,
}

impl PauliString {
    /// Identity factors are dropped; a repeated site is a domain error.
    pub fn new(factors: impl IntoIterator<Item = (usize, Pauli)>) -> Result<Self> {
        let mut factors: Vec<(usize, Pauli)> = factors.into_iter().filter(|f| f.1 != Pauli::I).collect();
        factors.sort_by_key(|f| f.0);
        if factors.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::domain(format!("Pauli string repeats a site: {factors:?}")));
        }
        Ok(Self { factors })
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn single(site: usize, p: Pauli) -> Self {
        Self::new([(site, p)]).expect("single factor")
    }

    pub fn factors(&self) -> &[(usize, Pauli)] {
        &self.factors
    }

    pub fn is_identity(&self) -> bool {
        self.factors.is_empty()
    }

    /// Number of non-identity factors.
    pub fn weight(&self) -> usize {
        self.factors.len()
    }

    /// First and last non-identity site.
    pub fn support(&self) -> Option<(usize, usize)> {
        Some((self.factors.first()?.0, self.factors.last()?.0))
    }

    pub fn at(&self, site: usize) -> Pauli {
        match self.factors.binary_search_by_key(&site, |f| f.0) {
            Ok(k) => self.factors[k].1,
            Err(_) => Pauli::I,
        }
    }

    /// Pauli index for every site of an `len`-site chain.
    pub fn indices(&self, len: usize) -> Result<Vec<usize>> {
        let mut out = vec![0; len];
        for &(site, p) in &self.factors {
            if site >= len {
                return Err(Error::domain(format!("site {site} outside a chain of {len}")));
            }
            out[site] = p.index();
        }
        Ok(out)
    }

    /// Product with another string: `self · other = phase · result`.
    pub fn mul(&self, other: &Self) -> (C64, Self) {
        let mut phase = C64::new(1.0, 0.0);
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.factors.len() || j < other.factors.len() {
            let a = self.factors.get(i);
            let b = other.factors.get(j);
            match (a, b) {
                (Some(&(sa, pa)), Some(&(sb, pb))) if sa == sb => {
                    let (ph, p) = single_product(pa, pb);
                    phase *= ph;
                    if p != Pauli::I {
                        out.push((sa, p));
                    }
                    i += 1;
                    j += 1;
                }
                (Some(&(sa, pa)), Some(&(sb, _))) if sa < sb => {
                    out.push((sa, pa));
                    i += 1;
                }
                (Some(&(sa, pa)), None) => {
                    out.push((sa, pa));
                    i += 1;
                }
                (_, Some(&(sb, pb))) => {
                    out.push((sb, pb));
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        (phase, Self { factors: out })
    }
}

/// `a · b = phase · p`
fn single_product(a: Pauli, b: Pauli) -> (C64, Pauli) {
    use Pauli::*;
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match (a, b) {
        (I, p) | (p, I) => (one, p),
        (X, X) | (Y, Y) | (Z, Z) => (one, I),
        (X, Y) => (i, Z),
        (Y, X) => (-i, Z),
        (Y, Z) => (i, X),
        (Z, Y) => (-i, X),
        (Z, X) => (i, Y),
        (X, Z) => (-i, Y),
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "I");
        }
        let parts: Vec<String> = self.factors.iter().map(|(s, p)| format!("{p}{s}")).collect();
        write!(f, "{}", parts.join(" "))
    }
}
