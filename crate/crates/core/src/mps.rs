//! Tensor trains and the two-site TEBD sweep.
//!
//! A [`TensorTrain`] is an open chain of rank-3 site tensors shaped
//! `(χ_left, d, χ_right)` with unit boundary bonds. The same container holds
//! matrix product states (`d = 2`, complex) and Pauli-basis density operators
//! (`d = 4`, real; see [`crate::mpdo`]).
//!
//! One TEBD step applies the odd layer of a [`BrickworkCircuit`] left to
//! right and then the even layer right to left. Each gate contracts the two
//! site tensors, applies the `d²×d²` operator, and splits the block with a
//! truncated SVD, absorbing the singular values in the sweep direction. The
//! orthogonality center therefore always sits on the active bond and every
//! truncation is locally optimal in the Frobenius norm of the coefficients.

use nalgebra::DMatrix;

use crate::metrics::PauliMeasure;
use crate::pauli::{Pauli, PauliString};
use crate::tensor::{lq_thin, qr_thin, row_major, svd_truncate_matrix, Scalar, Tensor, TruncationPolicy};
use crate::{Error, Result, C64};

/// Side of a split two-site block that receives the singular values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Absorb {
    /// Singular values go into the right site; the left site becomes
    /// left-isometric and the center moves to `bond + 1`.
    Right,
    /// Singular values go into the left site; the right site becomes
    /// right-isometric and the center moves to `bond`.
    Left,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorTrain<T: Scalar> {
    sites: Vec<Tensor<T>>,
    phys_dim: usize,
    ortho_center: Option<usize>,
    unit_norm: bool,
}

/// Largest dense vector [`TensorTrain::to_dense`] will build.
const DENSE_LIMIT: usize = 1 << 24;

impl<T: Scalar> TensorTrain<T> {
    /// Wraps site tensors after checking shapes and bond agreement. The
    /// orthogonality center is unknown.
    pub fn from_sites(sites: Vec<Tensor<T>>, phys_dim: usize) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::domain("a tensor train needs at least one site"));
        }
        for (i, t) in sites.iter().enumerate() {
            if t.rank() != 3 || t.shape()[1] != phys_dim {
                return Err(Error::ContractShape(format!(
                    "site {i} has shape {:?}, expected (χ, {phys_dim}, χ')",
                    t.shape()
                )));
            }
        }
        if sites[0].shape()[0] != 1 || sites[sites.len() - 1].shape()[2] != 1 {
            return Err(Error::ContractShape("boundary bonds must have dimension 1".into()));
        }
        for i in 0..sites.len() - 1 {
            if sites[i].shape()[2] != sites[i + 1].shape()[0] {
                return Err(Error::ContractShape(format!("bond {i} extents disagree")));
            }
        }
        Ok(Self { sites, phys_dim, ortho_center: None, unit_norm: false })
    }

    /// Bond-dimension-one train from one local vector per site.
    pub fn product(site_vectors: &[Vec<T>], phys_dim: usize) -> Result<Self> {
        let sites = site_vectors
            .iter()
            .map(|v| {
                if v.len() != phys_dim {
                    return Err(Error::domain(format!("site vector of length {} for d = {phys_dim}", v.len())));
                }
                Tensor::new(vec![1, phys_dim, 1], v.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_sites(sites, phys_dim)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn phys_dim(&self) -> usize {
        self.phys_dim
    }

    pub fn sites(&self) -> &[Tensor<T>] {
        &self.sites
    }

    pub fn site(&self, i: usize) -> &Tensor<T> {
        &self.sites[i]
    }

    pub fn ortho_center(&self) -> Option<usize> {
        self.ortho_center
    }

    /// Whether two-site blocks are rescaled to unit norm after truncation.
    pub fn unit_norm(&self) -> bool {
        self.unit_norm
    }

    pub fn set_unit_norm(&mut self, on: bool) {
        self.unit_norm = on;
    }

    /// Bond extents `χ_0 … χ_L`, including both unit boundaries.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut dims: Vec<usize> = self.sites.iter().map(|t| t.shape()[0]).collect();
        dims.push(1);
        dims
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Replaces a site tensor with one of the same shape. Forgets the
    /// orthogonality center.
    pub fn replace_site(&mut self, i: usize, t: Tensor<T>) -> Result<()> {
        if t.shape() != self.sites[i].shape() {
            return Err(Error::ContractShape(format!(
                "replacement for site {i} has shape {:?}, expected {:?}",
                t.shape(),
                self.sites[i].shape()
            )));
        }
        self.sites[i] = t;
        self.ortho_center = None;
        Ok(())
    }

    /// `A_i[:, s, :]` as a matrix.
    pub(crate) fn slice(&self, i: usize, s: usize) -> DMatrix<T> {
        let t = &self.sites[i];
        let (cl, d, cr) = (t.shape()[0], t.shape()[1], t.shape()[2]);
        let data = t.data();
        DMatrix::from_fn(cl, cr, |a, b| data[(a * d + s) * cr + b])
    }

    /// The matrix product `A_1^{s_1} ⋯ A_L^{s_L}`.
    pub fn coefficient(&self, indices: &[usize]) -> Result<T> {
        if indices.len() != self.len() {
            return Err(Error::domain(format!("{} indices for a train of {} sites", indices.len(), self.len())));
        }
        if let Some(&bad) = indices.iter().find(|&&s| s >= self.phys_dim) {
            return Err(Error::domain(format!("physical index {bad} outside [0, {})", self.phys_dim)));
        }
        let mut v = vec![T::one()];
        for (i, &s) in indices.iter().enumerate() {
            let t = &self.sites[i];
            let (d, cr) = (t.shape()[1], t.shape()[2]);
            let data = t.data();
            let mut next = vec![T::zero(); cr];
            for (a, &va) in v.iter().enumerate() {
                let row = &data[(a * d + s) * cr..(a * d + s + 1) * cr];
                for (n, &x) in next.iter_mut().zip(row) {
                    *n += va * x;
                }
            }
            v = next;
        }
        Ok(v[0])
    }

    /// All `d^L` coefficients, site 0 most significant.
    pub fn to_dense(&self) -> Result<Vec<T>> {
        let total = (self.phys_dim as f64).powi(self.len() as i32);
        if total > DENSE_LIMIT as f64 {
            return Err(Error::Resource(format!("dense reconstruction needs {total} entries")));
        }
        // rows: accumulated physical string, cols: current right bond
        let mut acc = DMatrix::from_element(1, 1, T::one());
        for i in 0..self.len() {
            let t = &self.sites[i];
            let (cl, d, cr) = (t.shape()[0], t.shape()[1], t.shape()[2]);
            let m = DMatrix::from_row_slice(cl, d * cr, t.data());
            let prod = &acc * m;
            let rows = acc.nrows();
            acc = DMatrix::from_fn(rows * d, cr, |r, c| prod[(r / d, (r % d) * cr + c)]);
        }
        Ok(acc.column(0).iter().copied().collect())
    }

    /// `Σ |coefficient|²` over all index strings.
    pub fn norm_squared(&self) -> f64 {
        let mut env = DMatrix::from_element(1, 1, T::one());
        for i in 0..self.len() {
            let cr = self.sites[i].shape()[2];
            let mut next = DMatrix::zeros(cr, cr);
            for s in 0..self.phys_dim {
                let m = self.slice(i, s);
                next += m.adjoint() * &env * &m;
            }
            env = next;
        }
        env[(0, 0)].real()
    }

    /// Gauges the train so that `center` is the orthogonality center: sites
    /// to its left are left-isometric and sites to its right right-isometric.
    pub fn canonicalize(&mut self, center: usize) {
        assert!(center < self.len(), "center {center} out of range");
        for i in (center + 1..self.len()).rev() {
            self.shift_left(i);
        }
        for i in 0..center {
            self.shift_right(i);
        }
        self.ortho_center = Some(center);
    }

    /// Moves an existing orthogonality center to `target` with QR/LQ steps;
    /// canonicalizes from scratch when no center is known.
    pub fn move_center(&mut self, target: usize) {
        let Some(mut c) = self.ortho_center else {
            self.canonicalize(target);
            return;
        };
        while c < target {
            self.shift_right(c);
            c += 1;
        }
        while c > target {
            self.shift_left(c);
            c -= 1;
        }
        self.ortho_center = Some(target);
    }

    /// QR of site `i`; the triangular factor moves into site `i + 1`.
    fn shift_right(&mut self, i: usize) {
        let t = &self.sites[i];
        let (cl, d, cr) = (t.shape()[0], t.shape()[1], t.shape()[2]);
        let (q, r) = qr_thin(DMatrix::from_row_slice(cl * d, cr, t.data()));
        let k = q.ncols();
        let next = &self.sites[i + 1];
        let (d2, cr2) = (next.shape()[1], next.shape()[2]);
        let merged = r * DMatrix::from_row_slice(cr, d2 * cr2, next.data());
        self.sites[i] = Tensor::new(vec![cl, d, k], row_major(&q)).expect("qr shape");
        self.sites[i + 1] = Tensor::new(vec![k, d2, cr2], row_major(&merged)).expect("qr shape");
    }

    /// LQ of site `i`; the triangular factor moves into site `i - 1`.
    fn shift_left(&mut self, i: usize) {
        let t = &self.sites[i];
        let (cl, d, cr) = (t.shape()[0], t.shape()[1], t.shape()[2]);
        let (l, q) = lq_thin(DMatrix::from_row_slice(cl, d * cr, t.data()));
        let k = q.nrows();
        let prev = &self.sites[i - 1];
        let (cl0, d0) = (prev.shape()[0], prev.shape()[1]);
        let merged = DMatrix::from_row_slice(cl0 * d0, cl, prev.data()) * l;
        self.sites[i] = Tensor::new(vec![k, d, cr], row_major(&q)).expect("lq shape");
        self.sites[i - 1] = Tensor::new(vec![cl0, d0, k], row_major(&merged)).expect("lq shape");
    }

    /// Applies a two-site operator on sites `bond`, `bond + 1` and splits the
    /// result with a truncated SVD. Returns the discarded weight.
    pub fn apply_two_site(
        &mut self,
        bond: usize,
        op: &DMatrix<T>,
        policy: &TruncationPolicy,
        absorb: Absorb,
    ) -> Result<f64> {
        if bond + 1 >= self.len() {
            return Err(Error::domain(format!("bond {bond} out of range for {} sites", self.len())));
        }
        let d = self.phys_dim;
        if op.shape() != (d * d, d * d) {
            return Err(Error::domain(format!(
                "two-site operator has shape {:?}, expected {}x{}",
                op.shape(),
                d * d,
                d * d
            )));
        }
        match self.ortho_center {
            Some(c) if c == bond || c == bond + 1 => {}
            Some(c) if c < bond => self.move_center(bond),
            Some(_) => self.move_center(bond + 1),
            None => self.canonicalize(bond),
        }

        let (a, b) = (&self.sites[bond], &self.sites[bond + 1]);
        let (cl, cm, cr) = (a.shape()[0], a.shape()[2], b.shape()[2]);
        let theta = DMatrix::from_row_slice(cl * d, cm, a.data()) * DMatrix::from_row_slice(cm, d * cr, b.data());
        // theta[(x·d + s1), (s2·cr + y)] → block[(s1·d + s2), (x·cr + y)]
        let block = DMatrix::from_fn(d * d, cl * cr, |r, c| theta[((c / cr) * d + r / d, (r % d) * cr + c % cr)]);
        let evolved = op * block;
        let theta = DMatrix::from_fn(cl * d, d * cr, |r, c| evolved[((r % d) * d + c / cr, (r / d) * cr + c % cr)]);

        let svd = svd_truncate_matrix(theta, policy)?;
        let k = svd.s.len();
        let mut s = svd.s;
        if self.unit_norm {
            let n = s.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 0.0 {
                s.iter_mut().for_each(|x| *x /= n);
            }
        }
        let (mut left, mut right) = (svd.u, svd.vh);
        match absorb {
            Absorb::Right => {
                for (r, &sv) in s.iter().enumerate() {
                    right.row_mut(r).scale_mut(sv);
                }
                self.ortho_center = Some(bond + 1);
            }
            Absorb::Left => {
                for (c, &sv) in s.iter().enumerate() {
                    left.column_mut(c).scale_mut(sv);
                }
                self.ortho_center = Some(bond);
            }
        }
        self.sites[bond] = Tensor::new(vec![cl, d, k], row_major(&left))?;
        self.sites[bond + 1] = Tensor::new(vec![k, d, cr], row_major(&right))?;
        Ok(svd.discarded_weight)
    }

    /// One Trotter step: odd layer swept left to right, then even layer
    /// swept right to left.
    pub fn tebd_step(&mut self, circuit: &BrickworkCircuit<T>, policy: &TruncationPolicy) -> Result<StepReport> {
        let mut report = StepReport::default();
        for g in &circuit.odd {
            let w = self.apply_two_site(g.bond, &g.op, policy, Absorb::Right)?;
            report.record(w);
        }
        for g in circuit.even.iter().rev() {
            let w = self.apply_two_site(g.bond, &g.op, policy, Absorb::Left)?;
            report.record(w);
        }
        report.max_bond_dim = self.max_bond_dim();
        Ok(report)
    }

    /// Train whose coefficients are the sum of the inputs' coefficients,
    /// built by concatenating bonds (block-diagonal interior sites).
    pub fn direct_sum(trains: &[TensorTrain<T>]) -> Result<Self> {
        let first = trains.first().ok_or_else(|| Error::domain("direct sum of no trains"))?;
        let (len, d) = (first.len(), first.phys_dim);
        if trains.iter().any(|t| t.len() != len || t.phys_dim != d) {
            return Err(Error::domain("direct sum of trains with different lengths or physical dimensions"));
        }
        if len == 1 {
            let mut data = vec![T::zero(); d];
            for t in trains {
                for (acc, &x) in data.iter_mut().zip(t.sites[0].data()) {
                    *acc += x;
                }
            }
            return Self::from_sites(vec![Tensor::new(vec![1, d, 1], data)?], d);
        }
        let mut sites = Vec::with_capacity(len);
        for i in 0..len {
            let lefts: Vec<usize> = trains.iter().map(|t| t.sites[i].shape()[0]).collect();
            let rights: Vec<usize> = trains.iter().map(|t| t.sites[i].shape()[2]).collect();
            let cl = if i == 0 { 1 } else { lefts.iter().sum() };
            let cr = if i == len - 1 { 1 } else { rights.iter().sum() };
            let mut out = Tensor::zeros(vec![cl, d, cr]);
            let (mut off_l, mut off_r) = (0, 0);
            for (k, t) in trains.iter().enumerate() {
                let src = &t.sites[i];
                for a in 0..lefts[k] {
                    for s in 0..d {
                        for b in 0..rights[k] {
                            let (x, y) = (if i == 0 { 0 } else { off_l + a }, if i == len - 1 { 0 } else { off_r + b });
                            out.set(&[x, s, y], src.get(&[a, s, b]));
                        }
                    }
                }
                off_l += lefts[k];
                off_r += rights[k];
            }
            sites.push(out);
        }
        Self::from_sites(sites, d)
    }

    /// Truncating SVD sweep from right to left. Leaves the center at site 0
    /// and returns the total discarded weight.
    pub fn compress(&mut self, policy: &TruncationPolicy) -> Result<f64> {
        let last = self.len() - 1;
        self.canonicalize(last);
        let mut discarded = 0.0;
        for i in (1..self.len()).rev() {
            let t = &self.sites[i];
            let (cl, d, cr) = (t.shape()[0], t.shape()[1], t.shape()[2]);
            let svd = svd_truncate_matrix(DMatrix::from_row_slice(cl, d * cr, t.data()), policy)?;
            discarded += svd.discarded_weight;
            let k = svd.s.len();
            let mut us = svd.u;
            for (c, &sv) in svd.s.iter().enumerate() {
                us.column_mut(c).scale_mut(sv);
            }
            let prev = &self.sites[i - 1];
            let (cl0, d0) = (prev.shape()[0], prev.shape()[1]);
            let merged = DMatrix::from_row_slice(cl0 * d0, cl, prev.data()) * us;
            self.sites[i] = Tensor::new(vec![k, d, cr], row_major(&svd.vh))?;
            self.sites[i - 1] = Tensor::new(vec![cl0, d0, k], row_major(&merged))?;
        }
        self.ortho_center = Some(0);
        Ok(discarded)
    }
}

/// Per-step truncation record.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepReport {
    pub max_discarded_weight: f64,
    pub total_discarded_weight: f64,
    pub max_bond_dim: usize,
}

impl StepReport {
    fn record(&mut self, w: f64) {
        self.max_discarded_weight = self.max_discarded_weight.max(w);
        self.total_discarded_weight += w;
    }
}

/// A two-site operator placed on bond `bond` (sites `bond`, `bond + 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct Gate<T: Scalar> {
    pub bond: usize,
    pub op: DMatrix<T>,
}

/// Gates acting on pairwise disjoint bonds.
pub type GateLayer<T> = Vec<Gate<T>>;

/// First-order brickwork Trotter step: the odd layer covers bonds
/// `0, 2, 4, …` (site pairs (1,2), (3,4), … in 1-based labels) and the even
/// layer bonds `1, 3, 5, …`.
#[derive(Clone, Debug, PartialEq)]
pub struct BrickworkCircuit<T: Scalar> {
    odd: GateLayer<T>,
    even: GateLayer<T>,
    dt: f64,
}

impl<T: Scalar> BrickworkCircuit<T> {
    pub fn new(mut odd: GateLayer<T>, mut even: GateLayer<T>, dt: f64) -> Result<Self> {
        odd.sort_by_key(|g| g.bond);
        even.sort_by_key(|g| g.bond);
        for (layer, parity, name) in [(&odd, 0, "odd"), (&even, 1, "even")] {
            if let Some(g) = layer.iter().find(|g| g.bond % 2 != parity) {
                return Err(Error::domain(format!("bond {} does not belong to the {name} layer", g.bond)));
            }
            if layer.windows(2).any(|w| w[0].bond + 1 >= w[1].bond) {
                return Err(Error::domain(format!("two gates of the {name} layer share a site")));
            }
        }
        Ok(Self { odd, even, dt })
    }

    pub fn odd_layer(&self) -> &[Gate<T>] {
        &self.odd
    }

    pub fn even_layer(&self) -> &[Gate<T>] {
        &self.even
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// All gates in application order.
    pub fn gates(&self) -> impl Iterator<Item = &Gate<T>> {
        self.odd.iter().chain(self.even.iter().rev())
    }

    /// Rewrites every gate, keeping placement and `dt`.
    pub fn try_map<U: Scalar>(&self, mut f: impl FnMut(&Gate<T>) -> Result<DMatrix<U>>) -> Result<BrickworkCircuit<U>> {
        let mut conv = |layer: &GateLayer<T>| -> Result<GateLayer<U>> {
            layer.iter().map(|g| Ok(Gate { bond: g.bond, op: f(g)? })).collect()
        };
        let odd = conv(&self.odd)?;
        let even = conv(&self.even)?;
        Ok(BrickworkCircuit { odd, even, dt: self.dt })
    }
}

const NORM_TOL: f64 = 1e-12;

/// Product-state MPS from one normalized 2-vector per site. Index 0 of each
/// vector is the `|↑⟩` amplitude.
pub fn init_product_mps(site_vectors: &[[C64; 2]]) -> Result<TensorTrain<C64>> {
    for (i, v) in site_vectors.iter().enumerate() {
        let n = v[0].norm_sqr() + v[1].norm_sqr();
        if (n.sqrt() - 1.0).abs() > NORM_TOL {
            return Err(Error::domain(format!("site vector {i} has norm {}", n.sqrt())));
        }
    }
    let vecs: Vec<Vec<C64>> = site_vectors.iter().map(|v| v.to_vec()).collect();
    let mut tt = TensorTrain::product(&vecs, 2)?;
    tt.set_unit_norm(true);
    tt.ortho_center = Some(0);
    Ok(tt)
}

/// `⟨ψ|P|ψ⟩` for an MPS, with cached identity environments so that many
/// local strings can be measured on one snapshot.
pub struct MpsMeasure<'a> {
    tt: &'a TensorTrain<C64>,
    left: Vec<DMatrix<C64>>,
    right: Vec<DMatrix<C64>>,
}

impl<'a> MpsMeasure<'a> {
    pub fn new(tt: &'a TensorTrain<C64>) -> Result<Self> {
        if tt.phys_dim() != 2 {
            return Err(Error::domain("MPS measurement needs physical dimension 2"));
        }
        let len = tt.len();
        let mut left = Vec::with_capacity(len + 1);
        left.push(DMatrix::from_element(1, 1, C64::new(1.0, 0.0)));
        for i in 0..len {
            let next = transfer_left(tt, i, &left[i], Pauli::I);
            left.push(next);
        }
        let mut right = vec![DMatrix::zeros(0, 0); len + 1];
        right[len] = DMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        for i in (0..len).rev() {
            let mut env = DMatrix::zeros(tt.sites[i].shape()[0], tt.sites[i].shape()[0]);
            for s in 0..2 {
                let m = tt.slice(i, s);
                env += m.conjugate() * &right[i + 1] * m.transpose();
            }
            right[i] = env;
        }
        Ok(Self { tt, left, right })
    }
}

/// `E' = Σ_{s'} phase · M_s† E M_{s'}` where `P|s'⟩ = phase |s⟩`.
fn transfer_left(tt: &TensorTrain<C64>, i: usize, env: &DMatrix<C64>, p: Pauli) -> DMatrix<C64> {
    let cr = tt.sites[i].shape()[2];
    let mut next = DMatrix::zeros(cr, cr);
    for s_in in 0..2 {
        let (s_out, phase) = p.apply(s_in);
        let bra = tt.slice(i, s_out);
        let ket = tt.slice(i, s_in);
        next += (bra.adjoint() * env * ket) * phase;
    }
    next
}

impl PauliMeasure for MpsMeasure<'_> {
    fn num_sites(&self) -> usize {
        self.tt.len()
    }

    fn trace(&self) -> f64 {
        self.left[self.tt.len()][(0, 0)].re
    }

    fn raw_pauli(&self, string: &PauliString) -> Result<C64> {
        let Some((first, last)) = string.support() else {
            return Ok(C64::new(self.trace(), 0.0));
        };
        if last >= self.tt.len() {
            return Err(Error::domain(format!("site {last} outside a chain of {}", self.tt.len())));
        }
        let mut env = self.left[first].clone();
        for i in first..=last {
            env = transfer_left(self.tt, i, &env, string.at(i));
        }
        Ok(env.component_mul(&self.right[last + 1]).sum())
    }

    fn raw_jw_pairs(&self, i: usize, a: Pauli, b: Pauli) -> Result<Vec<C64>> {
        let len = self.tt.len();
        if i >= len {
            return Err(Error::domain(format!("site {i} outside a chain of {len}")));
        }
        let mut env = transfer_left(self.tt, i, &self.left[i], a);
        let mut out = Vec::with_capacity(len - i - 1);
        for j in i + 1..len {
            let closed = transfer_left(self.tt, j, &env, b);
            out.push(closed.component_mul(&self.right[j + 1]).sum());
            env = transfer_left(self.tt, j, &env, Pauli::Z);
        }
        Ok(out)
    }
}
