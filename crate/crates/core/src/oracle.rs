//! Exact references for short chains and for free fermions.
//!
//! [`DenseState`] and [`DenseDensity`] apply the same Trotter circuits as the
//! tensor-train engines without any truncation. [`CorrelationMatrix`]
//! evolves `C_ij = ⟨c_i†c_j⟩` under a number-conserving free-fermion
//! circuit gate by gate, which reproduces the Trotterized many-body dynamics
//! exactly at any `L`.

use nalgebra::{DMatrix, DVector};

use crate::metrics::PauliMeasure;
use crate::mps::BrickworkCircuit;
use crate::pauli::PauliString;
use crate::{Error, Result, C64};

pub const STATEVECTOR_MAX_SITES: usize = 12;
pub const DENSITY_MAX_SITES: usize = 8;

/// Fock-space annihilator `c_j` on `len` sites, built from occupation
/// bits without reference to Pauli matrices. Bit value 0 at a site means
/// occupied; the sign is `(−1)^{N_{<j}}`.
pub fn fermion_annihilator(len: usize, j: usize) -> Result<DMatrix<C64>> {
    if len > STATEVECTOR_MAX_SITES {
        return Err(Error::Resource(format!("dense operator at L = {len}")));
    }
    if j >= len {
        return Err(Error::domain(format!("site {j} outside a chain of {len}")));
    }
    let dim = 1usize << len;
    let occupied = |state: usize, site: usize| (state >> (len - 1 - site)) & 1 == 0;
    let mut m = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        if !occupied(col, j) {
            continue;
        }
        let before = (0..j).filter(|&k| occupied(col, k)).count();
        let row = col | (1 << (len - 1 - j));
        m[(row, col)] = C64::new(if before % 2 == 0 { 1.0 } else { -1.0 }, 0.0);
    }
    Ok(m)
}

/// Applies a 4×4 operator to sites `bond`, `bond + 1` of a dense vector.
fn apply_pair(len: usize, bond: usize, op: &DMatrix<C64>, psi: &mut DVector<C64>) {
    let shift = len - 2 - bond;
    let stride = 1usize << shift;
    let block = 4 * stride;
    for base in (0..psi.len()).step_by(block) {
        for low in 0..stride {
            let idx = [base + low, base + stride + low, base + 2 * stride + low, base + 3 * stride + low];
            let v = idx.map(|k| psi[k]);
            for (r, &k) in idx.iter().enumerate() {
                psi[k] = (0..4).map(|c| op[(r, c)] * v[c]).sum();
            }
        }
    }
}

fn check_circuit(len: usize, circuit: &BrickworkCircuit<C64>) -> Result<()> {
    for g in circuit.gates() {
        if g.bond + 1 >= len || g.op.shape() != (4, 4) {
            return Err(Error::domain(format!("gate on bond {} does not fit a chain of {len}", g.bond)));
        }
    }
    Ok(())
}

/// `Σ_s conj(x[P s]) phase(s) y[s]`, i.e. `⟨x|P|y⟩`.
fn pauli_matrix_element(len: usize, string: &PauliString, x: &DVector<C64>, y: &DVector<C64>) -> C64 {
    let mut total = C64::new(0.0, 0.0);
    for s in 0..y.len() {
        let (row, phase) = pauli_action(len, string, s);
        total += x[row].conj() * phase * y[s];
    }
    total
}

/// `P|s⟩ = phase |row⟩` on the full basis.
fn pauli_action(len: usize, string: &PauliString, s: usize) -> (usize, C64) {
    let mut row = s;
    let mut phase = C64::new(1.0, 0.0);
    for &(site, p) in string.factors() {
        let shift = len - 1 - site;
        let (out, ph) = p.apply((s >> shift) & 1);
        row = (row & !(1 << shift)) | (out << shift);
        phase *= ph;
    }
    (row, phase)
}

/// Dense state vector, site 0 most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    len: usize,
    psi: DVector<C64>,
}

impl DenseState {
    pub fn new(len: usize, psi: DVector<C64>) -> Result<Self> {
        if len > STATEVECTOR_MAX_SITES {
            return Err(Error::Resource(format!("dense statevector at L = {len} (limit {STATEVECTOR_MAX_SITES})")));
        }
        if psi.len() != 1 << len {
            return Err(Error::domain(format!("vector of length {} for L = {len}", psi.len())));
        }
        Ok(Self { len, psi })
    }

    /// Tensor product of one 2-vector per site.
    pub fn product(site_vectors: &[[C64; 2]]) -> Result<Self> {
        let len = site_vectors.len();
        if len > STATEVECTOR_MAX_SITES {
            return Err(Error::Resource(format!("dense statevector at L = {len} (limit {STATEVECTOR_MAX_SITES})")));
        }
        let mut v = vec![C64::new(1.0, 0.0)];
        for sv in site_vectors {
            v = v.iter().flat_map(|&a| sv.iter().map(move |&b| a * b)).collect();
        }
        Self::new(len, DVector::from_vec(v))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn vector(&self) -> &DVector<C64> {
        &self.psi
    }

    pub fn apply_gate(&mut self, bond: usize, op: &DMatrix<C64>) {
        apply_pair(self.len, bond, op, &mut self.psi);
    }

    /// One brickwork step in the engines' gate order.
    pub fn step(&mut self, circuit: &BrickworkCircuit<C64>) -> Result<()> {
        check_circuit(self.len, circuit)?;
        for g in circuit.gates() {
            self.apply_gate(g.bond, &g.op);
        }
        Ok(())
    }

    /// `|ψ⟩⟨ψ|`
    pub fn density(&self) -> Result<DenseDensity> {
        DenseDensity::new(self.len, &self.psi * self.psi.adjoint())
    }
}

/// States at steps `0 ..= steps`.
pub fn dense_trotter_statevector(
    circuit: &BrickworkCircuit<C64>,
    initial: DenseState,
    steps: usize,
) -> Result<Vec<DenseState>> {
    check_circuit(initial.len, circuit)?;
    let mut out = Vec::with_capacity(steps + 1);
    let mut s = initial;
    out.push(s.clone());
    for _ in 0..steps {
        s.step(circuit)?;
        out.push(s.clone());
    }
    Ok(out)
}

impl PauliMeasure for DenseState {
    fn num_sites(&self) -> usize {
        self.len
    }

    fn trace(&self) -> f64 {
        self.psi.norm_squared()
    }

    fn raw_pauli(&self, string: &PauliString) -> Result<C64> {
        string.indices(self.len)?;
        Ok(pauli_matrix_element(self.len, string, &self.psi, &self.psi))
    }
}

/// Dense density matrix, site 0 most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseDensity {
    len: usize,
    rho: DMatrix<C64>,
}

impl DenseDensity {
    pub fn new(len: usize, rho: DMatrix<C64>) -> Result<Self> {
        if len > DENSITY_MAX_SITES {
            return Err(Error::Resource(format!("dense density matrix at L = {len} (limit {DENSITY_MAX_SITES})")));
        }
        if rho.shape() != (1 << len, 1 << len) {
            return Err(Error::domain(format!("matrix of shape {:?} for L = {len}", rho.shape())));
        }
        Ok(Self { len, rho })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.rho
    }

    /// `ρ ← U ρ U†` on one bond.
    pub fn apply_gate(&mut self, bond: usize, op: &DMatrix<C64>) {
        let dim = self.rho.nrows();
        for c in 0..dim {
            let mut col: DVector<C64> = self.rho.column(c).into_owned();
            apply_pair(self.len, bond, op, &mut col);
            self.rho.set_column(c, &col);
        }
        let conj = op.map(|z| z.conj());
        for r in 0..dim {
            let mut row: DVector<C64> = self.rho.row(r).transpose();
            apply_pair(self.len, bond, &conj, &mut row);
            self.rho.set_row(r, &row.transpose());
        }
    }

    pub fn step(&mut self, circuit: &BrickworkCircuit<C64>) -> Result<()> {
        check_circuit(self.len, circuit)?;
        for g in circuit.gates() {
            self.apply_gate(g.bond, &g.op);
        }
        Ok(())
    }
}

/// Density matrices at steps `0 ..= steps`.
pub fn dense_trotter_density(
    circuit: &BrickworkCircuit<C64>,
    initial: DenseDensity,
    steps: usize,
) -> Result<Vec<DenseDensity>> {
    check_circuit(initial.len, circuit)?;
    let mut out = Vec::with_capacity(steps + 1);
    let mut s = initial;
    out.push(s.clone());
    for _ in 0..steps {
        s.step(circuit)?;
        out.push(s.clone());
    }
    Ok(out)
}

impl PauliMeasure for DenseDensity {
    fn num_sites(&self) -> usize {
        self.len
    }

    fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    fn raw_pauli(&self, string: &PauliString) -> Result<C64> {
        string.indices(self.len)?;
        // Tr[Pρ] = Σ_s ⟨s|P ρ|s⟩ with P|s'⟩ = phase |s⟩
        let mut total = C64::new(0.0, 0.0);
        for s in 0..self.rho.nrows() {
            let (row, phase) = pauli_action(self.len, string, s);
            total += phase * self.rho[(s, row)];
        }
        Ok(total)
    }
}

/// `C_ij = ⟨c_i†c_j⟩` of a Gaussian fermionic state.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix {
    c: DMatrix<C64>,
}

impl CorrelationMatrix {
    /// `diag(occupations)`; entries must be 0 or 1.
    pub fn from_occupations(occupations: &[u8]) -> Result<Self> {
        if occupations.is_empty() {
            return Err(Error::domain("empty chain"));
        }
        if let Some(&bad) = occupations.iter().find(|&&n| n > 1) {
            return Err(Error::domain(format!("occupation {bad} is not a Fock state value")));
        }
        let diag = DVector::from_iterator(occupations.len(), occupations.iter().map(|&n| C64::new(n as f64, 0.0)));
        Ok(Self { c: DMatrix::from_diagonal(&diag) })
    }

    pub fn len(&self) -> usize {
        self.c.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.c.nrows() == 0
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.c
    }

    /// `⟨n_i⟩`
    pub fn densities(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.c[(i, i)].re).collect()
    }

    pub fn particle_number(&self) -> f64 {
        self.c.trace().re
    }

    /// Applies a single-particle unitary `u` acting on modes `bond`,
    /// `bond + 1`: `C ← conj(u) C uᵀ` on those rows and columns.
    pub fn apply_single_particle(&mut self, bond: usize, u: &nalgebra::Matrix2<C64>) {
        let v = u.map(|z| z.conj());
        let (i, j) = (bond, bond + 1);
        let n = self.len();
        // rows
        for col in 0..n {
            let (a, b) = (self.c[(i, col)], self.c[(j, col)]);
            self.c[(i, col)] = v[(0, 0)] * a + v[(0, 1)] * b;
            self.c[(j, col)] = v[(1, 0)] * a + v[(1, 1)] * b;
        }
        // columns: right-multiply by v†
        for row in 0..n {
            let (a, b) = (self.c[(row, i)], self.c[(row, j)]);
            self.c[(row, i)] = a * v[(0, 0)].conj() + b * v[(0, 1)].conj();
            self.c[(row, j)] = a * v[(1, 0)].conj() + b * v[(1, 1)].conj();
        }
    }
}

const GAUSSIAN_TOL: f64 = 1e-12;

/// Single-particle block of a number-conserving two-site gate, after
/// checking that the gate is the second quantization of that block (no
/// pairing, two-particle amplitude `det u`, vacuum amplitude 1).
pub fn single_particle_block(op: &DMatrix<C64>) -> Result<nalgebra::Matrix2<C64>> {
    if op.shape() != (4, 4) {
        return Err(Error::domain("two-site gate must be 4x4"));
    }
    // index 0 = both occupied, 1 = left occupied, 2 = right occupied, 3 = empty
    let u = nalgebra::Matrix2::new(op[(1, 1)], op[(1, 2)], op[(2, 1)], op[(2, 2)]);
    let mut defect: f64 = 0.0;
    for (r, c) in [(0, 1), (0, 2), (0, 3), (1, 0), (1, 3), (2, 0), (2, 3), (3, 0), (3, 1), (3, 2)] {
        defect = defect.max(op[(r, c)].norm());
    }
    defect = defect.max((op[(3, 3)] - C64::new(1.0, 0.0)).norm());
    defect = defect.max((op[(0, 0)] - u.determinant()).norm());
    if defect > GAUSSIAN_TOL {
        return Err(Error::domain(format!("gate is not a free-fermion hopping gate (defect {defect:e})")));
    }
    Ok(u)
}

/// Correlation matrices at steps `0 ..= steps` for a free-fermion circuit
/// applied to a Fock state.
pub fn gaussian_trotter(
    occupations: &[u8],
    circuit: &BrickworkCircuit<C64>,
    steps: usize,
) -> Result<Vec<CorrelationMatrix>> {
    let mut c = CorrelationMatrix::from_occupations(occupations)?;
    check_circuit(c.len(), circuit)?;
    let blocks: Vec<(usize, nalgebra::Matrix2<C64>)> =
        circuit.gates().map(|g| Ok((g.bond, single_particle_block(&g.op)?))).collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(c.clone());
    for _ in 0..steps {
        for (bond, u) in &blocks {
            c.apply_single_particle(*bond, u);
        }
        out.push(c.clone());
    }
    Ok(out)
}
