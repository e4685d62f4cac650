//! Dense tensors, pairwise contraction and truncated singular value
//! decomposition.
//!
//! A [`Tensor`] stores its entries row-major: the last index varies fastest,
//! so the flat offset of `(i_0, …, i_{n-1})` is `Σ_k i_k · Π_{m>k} shape[m]`.
//! Every reshape, matricization and golden value in this crate relies on that
//! order.
//!
//! Matrix products, QR and Hermitian eigensolves use `nalgebra`; singular
//! value decompositions use `faer`. This module converts between row-major
//! tensors and their column-major matrices.

use nalgebra::{ComplexField, DMatrix};

use crate::{Error, Result, C64};

/// Scalar field of a tensor: `f64` or [`C64`].
pub trait Scalar: ComplexField<RealField = f64> + faer::traits::ComplexField + Copy {}

impl Scalar for f64 {}
impl Scalar for C64 {}

/// Dense multi-index array with an explicit shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

pub type ComplexTensor = Tensor<C64>;
pub type RealTensor = Tensor<f64>;

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    strides
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.contains(&0) {
        return Err(Error::ContractShape(format!("tensor extents must be positive, got {shape:?}")));
    }
    Ok(())
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        check_shape(&shape)?;
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::ContractShape(format!(
                "shape {shape:?} holds {n} entries but {} were given",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![T::zero(); n] }
    }

    /// Builds a tensor by evaluating `f` at every multi-index, in storage
    /// order.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> T) -> Self {
        let n: usize = shape.iter().product();
        let mut idx = vec![0; shape.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f(&idx));
            for k in (0..shape.len()).rev() {
                idx[k] += 1;
                if idx[k] < shape[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Self { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut off = 0;
        for (k, &i) in idx.iter().enumerate() {
            off = off * self.shape[k] + i;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> T {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: T) {
        let off = self.offset(idx);
        self.data[off] = value;
    }

    pub fn scale(&self, alpha: T) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&x| x * alpha).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.modulus().is_finite())
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x.modulus_squared()).sum::<f64>().sqrt()
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    /// Reorders indices so that axis `k` of the result is axis `perm[k]` of
    /// `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let rank = self.rank();
        let mut seen = vec![false; rank];
        if perm.len() != rank {
            return Err(Error::ContractShape(format!("permutation {perm:?} does not match rank {rank}")));
        }
        for &p in perm {
            if p >= rank || seen[p] {
                return Err(Error::ContractShape(format!("invalid permutation {perm:?}")));
            }
            seen[p] = true;
        }
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return Ok(self.clone());
        }
        let old_strides = strides(&self.shape);
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let src_strides: Vec<usize> = perm.iter().map(|&p| old_strides[p]).collect();
        let n = self.data.len();
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0; rank];
        let mut src = 0usize;
        for _ in 0..n {
            data.push(self.data[src]);
            for k in (0..rank).rev() {
                idx[k] += 1;
                src += src_strides[k];
                if idx[k] < new_shape[k] {
                    break;
                }
                src -= src_strides[k] * new_shape[k];
                idx[k] = 0;
            }
        }
        Ok(Self { shape: new_shape, data })
    }

    /// Views the tensor as a matrix whose rows run over `row_axes` and whose
    /// columns run over `col_axes` (each group in the order given).
    pub fn to_matrix(&self, row_axes: &[usize], col_axes: &[usize]) -> Result<DMatrix<T>> {
        let perm: Vec<usize> = row_axes.iter().chain(col_axes).copied().collect();
        let p = self.permute(&perm)?;
        let rows: usize = row_axes.iter().map(|&a| self.shape[a]).product();
        let cols: usize = col_axes.iter().map(|&a| self.shape[a]).product();
        Ok(DMatrix::from_row_slice(rows, cols, &p.data))
    }

    /// Inverse of [`Tensor::to_matrix`] with the identity bipartition: the
    /// matrix's row-major entries become the tensor data.
    pub fn from_matrix(m: &DMatrix<T>, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, row_major(m))
    }

    /// Contracts `self` with `other` over the index `pairs` (axis of `self`,
    /// axis of `other`). The result carries the unpaired axes of `self`
    /// followed by the unpaired axes of `other`, each in original order.
    pub fn contract(&self, other: &Self, pairs: &[(usize, usize)]) -> Result<Self> {
        contract(self, other, pairs)
    }
}

/// Row-major copy of a column-major `nalgebra` matrix.
pub(crate) fn row_major<T: Scalar>(m: &DMatrix<T>) -> Vec<T> {
    m.transpose().as_slice().to_vec()
}

/// See [`Tensor::contract`].
pub fn contract<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, pairs: &[(usize, usize)]) -> Result<Tensor<T>> {
    let mut used_a = vec![false; a.rank()];
    let mut used_b = vec![false; b.rank()];
    for &(ia, ib) in pairs {
        if ia >= a.rank() || ib >= b.rank() {
            return Err(Error::ContractShape(format!(
                "pair ({ia}, {ib}) out of range for ranks {} and {}",
                a.rank(),
                b.rank()
            )));
        }
        if used_a[ia] || used_b[ib] {
            return Err(Error::ContractShape(format!("index paired twice in {pairs:?}")));
        }
        if a.shape[ia] != b.shape[ib] {
            return Err(Error::ContractShape(format!(
                "paired extents differ: a[{ia}] = {}, b[{ib}] = {}",
                a.shape[ia], b.shape[ib]
            )));
        }
        used_a[ia] = true;
        used_b[ib] = true;
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|&k| !used_a[k]).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|&k| !used_b[k]).collect();
    let paired_a: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let paired_b: Vec<usize> = pairs.iter().map(|p| p.1).collect();

    let ma = a.to_matrix(&free_a, &paired_a)?;
    let mb = b.to_matrix(&paired_b, &free_b)?;
    let prod = ma * mb;

    let shape: Vec<usize> = free_a.iter().map(|&k| a.shape[k]).chain(free_b.iter().map(|&k| b.shape[k])).collect();
    Tensor::new(shape, row_major(&prod))
}

/// Bond-dimension control for SVD truncation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationPolicy {
    /// Maximum number of singular values kept.
    pub chi_max: usize,
    /// Singular values below `sv_cutoff · σ_max` are discarded.
    pub sv_cutoff: f64,
}

impl TruncationPolicy {
    pub fn new(chi_max: usize) -> Result<Self> {
        Self::with_cutoff(chi_max, 0.0)
    }

    pub fn with_cutoff(chi_max: usize, sv_cutoff: f64) -> Result<Self> {
        if chi_max < 1 {
            return Err(Error::domain("chi_max must be at least 1"));
        }
        if !(sv_cutoff >= 0.0) || !sv_cutoff.is_finite() {
            return Err(Error::domain(format!("sv_cutoff must be finite and non-negative, got {sv_cutoff}")));
        }
        Ok(Self { chi_max, sv_cutoff })
    }

    /// No truncation at all.
    pub fn exact() -> Self {
        Self { chi_max: usize::MAX, sv_cutoff: 0.0 }
    }
}

/// Truncated SVD of a matrix: `m ≈ u · diag(s) · vh`.
#[derive(Clone, Debug)]
pub struct MatrixSvd<T: Scalar> {
    pub u: DMatrix<T>,
    pub s: Vec<f64>,
    pub vh: DMatrix<T>,
    /// Sum of the squared singular values that were dropped.
    pub discarded_weight: f64,
}

/// Truncated SVD of a tensor across a declared index bipartition.
#[derive(Clone, Debug)]
pub struct SvdResult<T: Scalar> {
    /// Shape: row extents followed by the kept rank.
    pub u: Tensor<T>,
    /// Non-increasing, non-negative.
    pub s: Vec<f64>,
    /// Shape: kept rank followed by column extents.
    pub vh: Tensor<T>,
    pub discarded_weight: f64,
}

type Factors<T> = (DMatrix<T>, Vec<f64>, DMatrix<T>);

/// Thin SVD `m = u·diag(s)·vt` with `s` in nonincreasing order, computed by
/// `faer`.
fn thin_svd<T: Scalar>(m: &DMatrix<T>) -> Result<Factors<T>> {
    let (rows, cols) = m.shape();
    let a = faer::Mat::<T>::from_fn(rows, cols, |i, j| m[(i, j)]);
    let svd = a.thin_svd().map_err(|e| Error::Linalg(format!("SVD of a {rows}x{cols} matrix failed: {e:?}")))?;
    let (u, v, s) = (svd.U(), svd.V(), svd.S().column_vector());
    let k = rows.min(cols);
    let sv = (0..k).map(|i| s[i].real()).collect();
    let u = DMatrix::from_fn(rows, k, |i, j| u[(i, j)]);
    let vt = DMatrix::from_fn(k, cols, |i, j| v[(j, i)].conjugate());
    Ok((u, sv, vt))
}

/// SVD of `m`, keeping the `r = min(chi_max, #{σ ≥ cutoff·σ_max}, rank)`
/// largest singular values. Ties keep the earlier index of the backend's
/// ordering.
pub fn svd_truncate_matrix<T: Scalar>(m: DMatrix<T>, policy: &TruncationPolicy) -> Result<MatrixSvd<T>> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::domain("SVD of an empty matrix"));
    }
    if m.iter().any(|x| !x.modulus().is_finite()) {
        return Err(Error::domain("SVD of a matrix with non-finite entries"));
    }
    let (u, sv, vt) = thin_svd(&m)?;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    // stable: equal values keep backend order
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap_or(std::cmp::Ordering::Equal));

    let smax = sv[order[0]];
    let surviving = order.iter().filter(|&&i| sv[i] >= policy.sv_cutoff * smax).count();
    let keep = policy.chi_max.min(surviving).min(sv.len()).max(1);
    let discarded_weight = order[keep..].iter().fold(0.0, |acc, &i| acc + sv[i] * sv[i]);

    let kept = &order[..keep];
    let u_k = DMatrix::from_fn(rows, keep, |r, c| u[(r, kept[c])]);
    let vh_k = DMatrix::from_fn(keep, cols, |r, c| vt[(kept[r], c)]);
    let s_k = kept.iter().map(|&i| sv[i]).collect();
    Ok(MatrixSvd { u: u_k, s: s_k, vh: vh_k, discarded_weight })
}

/// [`svd_truncate_matrix`] on the matricization of `m` with rows over
/// `row_axes` and columns over `col_axes`. The two groups must cover every
/// index of `m` exactly once.
pub fn svd_truncate<T: Scalar>(
    m: &Tensor<T>,
    row_axes: &[usize],
    col_axes: &[usize],
    policy: &TruncationPolicy,
) -> Result<SvdResult<T>> {
    let mut seen = vec![false; m.rank()];
    for &a in row_axes.iter().chain(col_axes) {
        if a >= m.rank() || seen[a] {
            return Err(Error::domain(format!(
                "bipartition {row_axes:?} | {col_axes:?} is not a partition of {} indices",
                m.rank()
            )));
        }
        seen[a] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::domain("bipartition does not cover every index"));
    }
    let mat = m.to_matrix(row_axes, col_axes)?;
    let svd = svd_truncate_matrix(mat, policy)?;
    let r = svd.s.len();
    let mut u_shape: Vec<usize> = row_axes.iter().map(|&a| m.shape()[a]).collect();
    u_shape.push(r);
    let mut vh_shape = vec![r];
    vh_shape.extend(col_axes.iter().map(|&a| m.shape()[a]));
    Ok(SvdResult {
        u: Tensor::from_matrix(&svd.u, u_shape)?,
        s: svd.s,
        vh: Tensor::from_matrix(&svd.vh, vh_shape)?,
        discarded_weight: svd.discarded_weight,
    })
}

/// Thin QR: `m = q · r` with `q` having orthonormal columns.
pub(crate) fn qr_thin<T: Scalar>(m: DMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
    let qr = m.qr();
    (qr.q(), qr.r())
}

/// Thin LQ: `m = l · q` with `q` having orthonormal rows.
pub(crate) fn lq_thin<T: Scalar>(m: DMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
    let (q, r) = qr_thin(m.adjoint());
    (r.adjoint(), q.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_tensor(shape: Vec<usize>, rng: &mut StdRng) -> ComplexTensor {
        Tensor::from_fn(shape, |_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn row_major_layout() {
        let t = Tensor::from_fn(vec![2, 3], |i| (10 * i[0] + i[1]) as f64);
        assert_eq!(t.data(), &[0.0, 1.0, 2.0, 10.0, 11.0, 12.0]);
        assert_eq!(t.get(&[1, 2]), 12.0);
    }

    #[test]
    fn permute_matches_index_swap() {
        let t = Tensor::from_fn(vec![2, 3, 4], |i| (100 * i[0] + 10 * i[1] + i[2]) as f64);
        let p = t.permute(&[2, 0, 1]).unwrap();
        assert_eq!(p.shape(), &[4, 2, 3]);
        for a in 0..2 {
            for b in 0..3 {
                for d in 0..4 {
                    assert_eq!(p.get(&[d, a, b]), t.get(&[a, b, d]));
                }
            }
        }
        assert!(t.permute(&[0, 0, 1]).is_err());
    }

    #[test]
    fn identity_times_vector() {
        let id = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let v = Tensor::new(vec![2], vec![1.0, 2.0]).unwrap();
        let r = id.contract(&v, &[(1, 0)]).unwrap();
        assert_eq!(r.shape(), &[2]);
        assert_eq!(r.data(), &[1.0, 2.0]);
    }

    #[test]
    fn matrix_product_matches_explicit_loops() {
        let mut rng = StdRng::seed_from_u64(7);
        let a = random_tensor(vec![2, 3], &mut rng);
        let b = random_tensor(vec![3, 4], &mut rng);
        let r = a.contract(&b, &[(1, 0)]).unwrap();
        assert_eq!(r.shape(), &[2, 4]);
        for i in 0..2 {
            for k in 0..4 {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..3 {
                    acc += a.get(&[i, j]) * b.get(&[j, k]);
                }
                assert!((r.get(&[i, k]) - acc).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn contract_non_leading_axes_matches_loops() {
        let mut rng = StdRng::seed_from_u64(11);
        let a = random_tensor(vec![3, 2, 4], &mut rng);
        let b = random_tensor(vec![4, 5, 3], &mut rng);
        // pair a0-b2 and a2-b0; result: a1, b1
        let r = a.contract(&b, &[(0, 2), (2, 0)]).unwrap();
        assert_eq!(r.shape(), &[2, 5]);
        for i in 0..2 {
            for j in 0..5 {
                let mut acc = C64::new(0.0, 0.0);
                for p in 0..3 {
                    for q in 0..4 {
                        acc += a.get(&[p, i, q]) * b.get(&[q, j, p]);
                    }
                }
                assert!((r.get(&[i, j]) - acc).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn contract_with_zeros_is_zero() {
        let mut rng = StdRng::seed_from_u64(3);
        let a = random_tensor(vec![3, 4], &mut rng);
        let z = ComplexTensor::zeros(vec![4, 2, 5]);
        let r = a.contract(&z, &[(1, 0)]).unwrap();
        assert_eq!(r.shape(), &[3, 2, 5]);
        assert!(r.data().iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn contract_shape_mismatch() {
        let a = RealTensor::zeros(vec![2, 3]);
        let b = RealTensor::zeros(vec![4, 2]);
        assert!(matches!(a.contract(&b, &[(1, 0)]), Err(Error::ContractShape(_))));
        assert!(matches!(a.contract(&b, &[(5, 0)]), Err(Error::ContractShape(_))));
    }

    #[test]
    fn outer_product_when_no_pairs() {
        let a = Tensor::new(vec![2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::new(vec![3], vec![1.0, 0.0, -1.0]).unwrap();
        let r = a.contract(&b, &[]).unwrap();
        assert_eq!(r.shape(), &[2, 3]);
        assert_eq!(r.data(), &[1.0, 0.0, -1.0, 2.0, 0.0, -2.0]);
    }

    #[test]
    fn svd_survives_wide_dynamic_range() {
        let col_major = [
            4.0,
            -5.68086321839024e-37,
            -8.735633214808132e-27,
            -2.4153869341036892e-17,
            2.3642290090786797e-37,
            -4.0,
            -6.778045825174974e-27,
            8.826896717416726e-17,
            -1.9722431151321597e-47,
            4.0,
            -9.827082243071912e-37,
            -6.646709061908491e-47,
            -3.3230801029008727e-37,
            3.0374449209360766e-37,
            -4.0,
            -3.1440219728486426e-27,
            1.075285748013406e-17,
            -7.687348494357562e-17,
            4.0,
            1.1097767170964001e-38,
            3.692027485689628e-37,
            -3.259521271795624e-17,
            3.203091937909885e-27,
            -4.0,
            -9.644832572071676e-47,
            6.143253525434496e-47,
            2.3202304641650117e-47,
            4.0,
            -5.815388354831717e-17,
            1.7923664650451077e-47,
            -6.375657334000637e-17,
            -9.176944838932778e-27,
        ];
        let m = DMatrix::from_column_slice(8, 4, &col_major);
        let r = svd_truncate_matrix(m.clone(), &TruncationPolicy::exact()).unwrap();
        let mut us = r.u.clone();
        for (c, &x) in r.s.iter().enumerate() {
            us.column_mut(c).scale_mut(x);
        }
        assert!((us * &r.vh - &m).norm() < 1e-12 * m.norm());
        assert!((r.s.iter().map(|x| x * x).sum::<f64>() - m.norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn svd_identity() {
        let id = Tensor::from_fn(vec![4, 4], |i| if i[0] == i[1] { 1.0 } else { 0.0 });
        let r = svd_truncate(&id, &[0], &[1], &TruncationPolicy::new(4).unwrap()).unwrap();
        assert_eq!(r.s.len(), 4);
        for s in &r.s {
            assert!((s - 1.0).abs() < 1e-14);
        }
        assert_eq!(r.discarded_weight, 0.0);
    }

    #[test]
    fn svd_rank_one_needs_one_value() {
        let u = [1.0, -2.0, 0.5];
        let v = [0.3, 1.0, 2.0, -1.0];
        let m = Tensor::from_fn(vec![3, 4], |i| u[i[0]] * v[i[1]]);
        let r = svd_truncate(&m, &[0], &[1], &TruncationPolicy::new(1).unwrap()).unwrap();
        assert_eq!(r.s.len(), 1);
        assert!(r.discarded_weight < 1e-24);
        let rebuilt = r.u.contract(&Tensor::new(vec![1], vec![r.s[0]]).unwrap(), &[]).unwrap();
        let rebuilt = rebuilt.reshape(vec![3, 1]).unwrap().contract(&r.vh, &[(1, 0)]).unwrap();
        for (x, y) in rebuilt.data().iter().zip(m.data()) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    /// Squared singular values from the Hermitian eigenproblem of `M†M`, an
    /// independent route to the spectrum.
    fn squared_spectrum(m: &DMatrix<C64>) -> Vec<f64> {
        let gram = m.adjoint() * m;
        let mut ev: Vec<f64> = gram.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        ev
    }

    #[test]
    fn svd_discarded_weight_matches_full_spectrum() {
        let mut rng = StdRng::seed_from_u64(42);
        let m = random_tensor(vec![8, 8], &mut rng);
        let mat = m.to_matrix(&[0], &[1]).unwrap();
        let ev = squared_spectrum(&mat);
        let expected: f64 = ev[4..].iter().sum();
        let r = svd_truncate(&m, &[0], &[1], &TruncationPolicy::new(4).unwrap()).unwrap();
        assert_eq!(r.s.len(), 4);
        assert!((r.discarded_weight - expected).abs() < 1e-10 * expected);
        for w in r.s.windows(2) {
            assert!(w[0] >= w[1]);
        }

        // ‖m − U S Vh‖² equals the discarded weight
        let u = r.u.to_matrix(&[0], &[1]).unwrap();
        let vh = r.vh.to_matrix(&[0], &[1]).unwrap();
        let s = DMatrix::from_fn(4, 4, |i, j| if i == j { C64::new(r.s[i], 0.0) } else { C64::new(0.0, 0.0) });
        let resid = (&mat - &u * s * &vh).norm_squared();
        assert!((resid - r.discarded_weight).abs() < 1e-10 * r.discarded_weight);

        // isometries
        let utu = u.adjoint() * &u;
        let vvh = &vh * vh.adjoint();
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((utu[(i, j)] - C64::new(e, 0.0)).norm() < 1e-10);
                assert!((vvh[(i, j)] - C64::new(e, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn svd_over_multi_index_bipartition() {
        let mut rng = StdRng::seed_from_u64(5);
        let m = random_tensor(vec![2, 3, 2, 2], &mut rng);
        let r = svd_truncate(&m, &[0, 2], &[1, 3], &TruncationPolicy::exact()).unwrap();
        assert_eq!(r.u.shape(), &[2, 2, 4]);
        assert_eq!(r.vh.shape(), &[4, 3, 2]);
        assert!(r.discarded_weight == 0.0);
        assert!(svd_truncate(&m, &[0, 2], &[1], &TruncationPolicy::exact()).is_err());
        assert!(svd_truncate(&m, &[0, 2], &[1, 2, 3], &TruncationPolicy::exact()).is_err());
    }

    #[test]
    fn svd_cutoff_drops_small_values() {
        let m = Tensor::from_fn(vec![3, 3], |i| if i[0] == i[1] { [1.0, 1e-3, 1e-9][i[0]] } else { 0.0 });
        let p = TruncationPolicy::with_cutoff(3, 1e-6).unwrap();
        let r = svd_truncate(&m, &[0], &[1], &p).unwrap();
        assert_eq!(r.s.len(), 2);
        assert!((r.discarded_weight - 1e-18).abs() < 1e-24);
    }

    #[test]
    fn svd_of_empty_matrix_is_domain_error() {
        let m: DMatrix<f64> = DMatrix::zeros(0, 3);
        assert!(matches!(svd_truncate_matrix(m, &TruncationPolicy::exact()), Err(Error::Domain(_))));
    }

    #[test]
    fn policy_validation() {
        assert!(TruncationPolicy::new(0).is_err());
        assert!(TruncationPolicy::with_cutoff(2, -1.0).is_err());
        assert!(TruncationPolicy::with_cutoff(2, f64::NAN).is_err());
    }

    #[test]
    fn lq_reconstructs() {
        let mut rng = StdRng::seed_from_u64(9);
        let m = random_tensor(vec![3, 8], &mut rng).to_matrix(&[0], &[1]).unwrap();
        let (l, q) = lq_thin(m.clone());
        assert!((&l * &q - &m).norm() < 1e-13);
        let qqh = &q * q.adjoint();
        assert!((qqh - DMatrix::identity(3, 3)).norm() < 1e-13);
    }
}
