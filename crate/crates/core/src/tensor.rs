//! Dense order-d tensors and the Tucker algebra built on them.
//!
//! Storage is first-index-fastest: the entry `(i_1, ..., i_d)` lives at
//! `i_1 + n_1 * (i_2 + n_2 * (i_3 + ...))`. A mode-`j` unfolding lists the
//! remaining modes in ascending order with the first one varying fastest, so
//! the mode-1 unfolding of a tensor is its data reinterpreted as a
//! column-major matrix.
//!
//! Modes are zero-based throughout the library.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatMut, MatRef, Par};

use crate::error::{Error, Result};

/// Dense column-major matrix used for factors, operators and unfoldings.
pub type Matrix = Mat<f64>;

/// Order-d array of `f64` in first-index-fastest layout.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        validate_dims(&dims)?;
        let len = checked_len(&dims)?;
        if len != data.len() {
            return Err(Error::invalid(format!(
                "dims {dims:?} need {len} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        validate_dims(dims)?;
        let len = checked_len(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            data: vec![0.0; len],
        })
    }

    /// Tensor filled with `value` everywhere.
    pub fn full(dims: &[usize], value: f64) -> Result<Self> {
        let mut t = Self::zeros(dims)?;
        t.data.fill(value);
        Ok(t)
    }

    /// Builds a tensor by evaluating `f` at every multi-index, in layout order.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut t = Self::zeros(dims)?;
        let mut idx = vec![0usize; dims.len()];
        for value in t.data.iter_mut() {
            *value = f(&idx);
            for (i, n) in idx.iter_mut().zip(dims) {
                *i += 1;
                if *i < *n {
                    break;
                }
                *i = 0;
            }
        }
        Ok(t)
    }

    /// Order-2 tensor sharing the layout of a column-major matrix.
    pub fn from_matrix(m: MatRef<'_, f64>) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for j in 0..m.ncols() {
            data.extend(m.col(j).iter().copied());
        }
        Self {
            dims: vec![m.nrows().max(1), m.ncols().max(1)],
            data,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut lin = 0;
        for (i, n) in idx.iter().zip(&self.dims).rev() {
            debug_assert!(i < n);
            lin = lin * n + i;
        }
        lin
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.linear_index(idx)]
    }

    /// Views an order-2 tensor as a matrix.
    pub fn as_matrix(&self) -> Result<MatRef<'_, f64>> {
        if self.order() != 2 {
            return Err(Error::invalid(format!(
                "expected an order-2 tensor, got dims {:?}",
                self.dims
            )));
        }
        Ok(MatRef::from_column_major_slice(
            &self.data,
            self.dims[0],
            self.dims[1],
        ))
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    /// `self - other`; dims must agree.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::invalid(format!(
                "dims mismatch: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(Self {
            dims: self.dims.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// Number of entries in one slice along the last mode.
    pub fn slice_len(&self) -> usize {
        self.dims[..self.dims.len() - 1].iter().product()
    }

    /// The `k`-th slice along the last mode (a time instant for snapshot tensors).
    pub fn last_mode_slice(&self, k: usize) -> &[f64] {
        let s = self.slice_len();
        &self.data[k * s..(k + 1) * s]
    }

    pub fn last_mode_slice_mut(&mut self, k: usize) -> &mut [f64] {
        let s = self.slice_len();
        &mut self.data[k * s..(k + 1) * s]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

pub(crate) fn norm(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::invalid("tensor order must be at least 1"));
    }
    if let Some(pos) = dims.iter().position(|&n| n == 0) {
        return Err(Error::invalid(format!("dimension {pos} of {dims:?} is zero")));
    }
    Ok(())
}

pub(crate) fn checked_len(dims: &[usize]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .ok_or_else(|| Error::invalid(format!("dims {dims:?} overflow usize")))
}

fn check_mode(order: usize, mode: usize) -> Result<()> {
    if mode >= order {
        return Err(Error::invalid(format!(
            "mode {mode} out of range for an order-{order} tensor"
        )));
    }
    Ok(())
}

/// Splits dims around `mode` into (product before, size, product after).
fn split(dims: &[usize], mode: usize) -> (usize, usize, usize) {
    let left = dims[..mode].iter().product();
    let right = dims[mode + 1..].iter().product();
    (left, dims[mode], right)
}

/// Mode-`mode` unfolding: a `dims[mode] x prod(other dims)` matrix whose
/// columns are the mode fibers.
pub fn unfold(t: &DenseTensor, mode: usize) -> Result<Matrix> {
    check_mode(t.order(), mode)?;
    let (left, n, right) = split(&t.dims, mode);
    let data = &t.data;
    Ok(Mat::from_fn(n, left * right, |i, c| {
        let l = c % left;
        let r = c / left;
        data[l + left * (i + n * r)]
    }))
}

/// Inverse of [`unfold`].
pub fn fold(m: MatRef<'_, f64>, mode: usize, dims: &[usize]) -> Result<DenseTensor> {
    validate_dims(dims)?;
    check_mode(dims.len(), mode)?;
    let (left, n, right) = split(dims, mode);
    if m.nrows() != n || m.ncols() != left * right {
        return Err(Error::invalid(format!(
            "cannot fold a {}x{} matrix along mode {mode} into dims {dims:?}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut data = vec![0.0; left * n * right];
    for r in 0..right {
        for i in 0..n {
            for l in 0..left {
                data[l + left * (i + n * r)] = m[(i, l + left * r)];
            }
        }
    }
    Ok(DenseTensor {
        dims: dims.to_vec(),
        data,
    })
}

/// Mode product `t x_mode a`: every mode fiber `x` is replaced by `a x`.
pub fn mode_product(t: &DenseTensor, a: MatRef<'_, f64>, mode: usize) -> Result<DenseTensor> {
    check_mode(t.order(), mode)?;
    let (left, n, right) = split(&t.dims, mode);
    if a.ncols() != n {
        return Err(Error::invalid(format!(
            "mode-{mode} product needs {n} columns, matrix is {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let p = a.nrows();
    let mut dims = t.dims.clone();
    dims[mode] = p;
    validate_dims(&dims)?;
    let mut data = vec![0.0; left * p * right];
    mode_product_into(&t.data, &mut data, a, left, n, right);
    Ok(DenseTensor { dims, data })
}

/// Raw kernel behind [`mode_product`]; `src` is `left x n x right`,
/// `dst` is `left x a.nrows() x right`.
pub(crate) fn mode_product_into(
    src: &[f64],
    dst: &mut [f64],
    a: MatRef<'_, f64>,
    left: usize,
    n: usize,
    right: usize,
) {
    let p = a.nrows();
    if left == 1 {
        let x = MatRef::from_column_major_slice(src, n, right);
        let y = MatMut::from_column_major_slice_mut(dst, p, right);
        matmul(y, Accum::Replace, a, x, 1.0, Par::Seq);
        return;
    }
    for r in 0..right {
        let x = MatRef::from_column_major_slice(&src[r * left * n..(r + 1) * left * n], left, n);
        let y =
            MatMut::from_column_major_slice_mut(&mut dst[r * left * p..(r + 1) * left * p], left, p);
        matmul(y, Accum::Replace, x, a.transpose(), 1.0, Par::Seq);
    }
}

/// Leading singular triplets of a matrix.
#[derive(Clone, Debug)]
pub struct SvdTriplet {
    /// `n x r`, orthonormal columns.
    pub left: Matrix,
    /// Non-increasing, non-negative.
    pub singular_values: Vec<f64>,
    /// `m x r`, orthonormal columns.
    pub right: Matrix,
}

impl SvdTriplet {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `left * diag(sigma) * right^T`.
    pub fn reconstruct(&self) -> Matrix {
        let mut scaled = self.left.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            for v in scaled.col_mut(j).iter_mut() {
                *v *= s;
            }
        }
        &scaled * self.right.transpose()
    }
}

/// Full thin SVD with the sign convention applied, singular values
/// non-increasing.
pub(crate) fn thin_svd(m: MatRef<'_, f64>) -> Result<SvdTriplet> {
    let svd = m.thin_svd().map_err(|e| {
        Error::numeric(format!(
            "SVD of a {}x{} matrix did not converge: {e:?}",
            m.nrows(),
            m.ncols()
        ))
    })?;
    let k = m.nrows().min(m.ncols());
    let sigma: Vec<f64> = (0..k).map(|i| svd.S()[i]).collect();
    let mut trip = SvdTriplet {
        left: svd.U().to_owned(),
        singular_values: sigma,
        right: svd.V().to_owned(),
    };
    sort_triplet(&mut trip);
    fix_signs(&mut trip.left, Some(&mut trip.right));
    Ok(trip)
}

fn sort_triplet(t: &mut SvdTriplet) {
    let k = t.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| t.singular_values[b].total_cmp(&t.singular_values[a]));
    if order.iter().enumerate().all(|(i, &o)| i == o) {
        return;
    }
    let sigma = order.iter().map(|&o| t.singular_values[o]).collect();
    let left = Mat::from_fn(t.left.nrows(), k, |i, j| t.left[(i, order[j])]);
    let right = Mat::from_fn(t.right.nrows(), k, |i, j| t.right[(i, order[j])]);
    *t = SvdTriplet {
        left,
        singular_values: sigma,
        right,
    };
}

/// Flips each column so its largest-magnitude entry is positive.
pub(crate) fn fix_signs(left: &mut Matrix, mut right: Option<&mut Matrix>) {
    for j in 0..left.ncols() {
        let mut best = 0.0f64;
        for &v in left.col(j).iter() {
            if v.abs() > best.abs() {
                best = v;
            }
        }
        if best < 0.0 {
            for v in left.col_mut(j).iter_mut() {
                *v = -*v;
            }
            if let Some(r) = right.as_deref_mut() {
                for v in r.col_mut(j).iter_mut() {
                    *v = -*v;
                }
            }
        }
    }
}

/// Singular values only, non-increasing.
pub fn singular_values(m: MatRef<'_, f64>) -> Result<Vec<f64>> {
    let mut s = m.singular_values().map_err(|e| {
        Error::numeric(format!(
            "SVD of a {}x{} matrix did not converge: {e:?}",
            m.nrows(),
            m.ncols()
        ))
    })?;
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// The `rank` dominant singular triplets of `m`, taken from a full SVD.
pub fn truncated_svd(m: MatRef<'_, f64>, rank: usize) -> Result<SvdTriplet> {
    let k = m.nrows().min(m.ncols());
    if rank == 0 || rank > k {
        return Err(Error::invalid(format!(
            "rank {rank} outside 1..={k} for a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let full = thin_svd(m)?;
    Ok(SvdTriplet {
        left: full.left.subcols(0, rank).to_owned(),
        singular_values: full.singular_values[..rank].to_vec(),
        right: full.right.subcols(0, rank).to_owned(),
    })
}

/// Truncation of an unfolding at a rank that may exceed its column count.
pub(crate) struct PaddedSvd {
    /// `rows x rank`, orthonormal.
    pub left: Matrix,
    /// `diag(sigma_kept) * right_kept^T`, `rank x cols`; rows past the
    /// numerical rank are zero.
    pub reduced: Matrix,
    /// Full spectrum of the unfolding.
    pub spectrum: Vec<f64>,
}

/// Leading `rank` left singular vectors of `m` for any `1 <= rank <= rows`.
/// When `rank > cols` the extra directions come from a full SVD and carry
/// zero singular values.
pub(crate) fn padded_svd(m: MatRef<'_, f64>, rank: usize) -> Result<PaddedSvd> {
    let (rows, cols) = (m.nrows(), m.ncols());
    if rank == 0 || rank > rows {
        return Err(Error::invalid(format!(
            "rank {rank} outside 1..={rows} for a {rows}x{cols} unfolding"
        )));
    }
    let thin = thin_svd(m)?;
    let k = thin.rank();
    let kept = rank.min(k);
    let left = if rank <= k {
        thin.left.subcols(0, rank).to_owned()
    } else {
        let full = m.svd().map_err(|e| {
            Error::numeric(format!(
                "SVD of a {rows}x{cols} matrix did not converge: {e:?}"
            ))
        })?;
        let mut u = full.U().to_owned();
        // columns 0..k agree with the thin factor up to sign; keep the thin ones
        for j in 0..k {
            u.col_mut(j).copy_from(thin.left.col(j));
        }
        let mut extra = u.subcols(k, rank - k).to_owned();
        fix_signs(&mut extra, None);
        Mat::from_fn(rows, rank, |i, j| {
            if j < k {
                u[(i, j)]
            } else {
                extra[(i, j - k)]
            }
        })
    };
    let reduced = Mat::from_fn(rank, cols, |i, c| {
        if i < kept {
            thin.singular_values[i] * thin.right[(c, i)]
        } else {
            0.0
        }
    });
    Ok(PaddedSvd {
        left,
        reduced,
        spectrum: thin.singular_values,
    })
}

/// `max |A^T A - I|` over all entries.
pub fn orthonormality_defect(a: MatRef<'_, f64>) -> f64 {
    let g = a.transpose() * a;
    let mut worst = 0.0f64;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}
