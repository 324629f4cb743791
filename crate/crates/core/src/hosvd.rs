//! Tucker compression: truncated HOSVD, sequentially truncated HOSVD, rank
//! selection and compression accounting.
//!
//! Modes are 0-based. A processing order is a permutation of `0..order`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{
    fold, mode_product, padded_svd, singular_values, unfold, DenseTensor, Matrix,
};

/// How singular values enter the tolerance tests.
///
/// `SingularValueSum` sums the singular values themselves; `Energy` sums
/// their squares (the usual Frobenius-energy criterion).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationCriterion {
    #[default]
    SingularValueSum,
    Energy,
}

impl TruncationCriterion {
    fn weight(self, s: f64) -> f64 {
        match self {
            TruncationCriterion::SingularValueSum => s,
            TruncationCriterion::Energy => s * s,
        }
    }
}

fn check_tolerance(name: &str, tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid(format!("{name} = {tau} outside (0, 1)")));
    }
    Ok(())
}

/// Smallest `r >= 1` with `sqrt(sum_{i>r} w_i) / sqrt(sum_i w_i) < tau`.
pub fn rank_by_tail(sigma: &[f64], tau: f64, criterion: TruncationCriterion) -> Result<usize> {
    check_tolerance("tau1", tau)?;
    let w: Vec<f64> = sigma.iter().map(|&s| criterion.weight(s)).collect();
    let total: f64 = w.iter().sum();
    if w.is_empty() || total <= 0.0 {
        return Ok(1);
    }
    // suffix sums so that tail[r] = sum_{i >= r} w_i (0-based)
    let mut tail = vec![0.0; w.len() + 1];
    for i in (0..w.len()).rev() {
        tail[i] = tail[i + 1] + w[i];
    }
    for r in 1..=w.len() {
        if tail[r].sqrt() / total.sqrt() < tau {
            return Ok(r);
        }
    }
    Ok(w.len())
}

/// Smallest `r >= 1` with `sum_{i<=r} w_i / sum_i w_i >= 1 - tau`.
pub fn rank_by_captured(
    sigma: &[f64],
    tau: f64,
    criterion: TruncationCriterion,
) -> Result<usize> {
    check_tolerance("tau2", tau)?;
    let w: Vec<f64> = sigma.iter().map(|&s| criterion.weight(s)).collect();
    let total: f64 = w.iter().sum();
    if w.is_empty() || total <= 0.0 {
        return Ok(1);
    }
    let mut acc = 0.0;
    for (i, x) in w.iter().enumerate() {
        acc += x;
        if acc / total >= 1.0 - tau {
            return Ok(i + 1);
        }
    }
    Ok(w.len())
}

/// Per-mode ranks chosen by the tail criterion on each unfolding's
/// singular values, summing plain singular values.
pub fn ranks_from_tolerance(t: &DenseTensor, tau1: f64) -> Result<Vec<usize>> {
    ranks_from_tolerance_with(t, tau1, TruncationCriterion::SingularValueSum)
}

pub fn ranks_from_tolerance_with(
    t: &DenseTensor,
    tau1: f64,
    criterion: TruncationCriterion,
) -> Result<Vec<usize>> {
    check_tolerance("tau1", tau1)?;
    (0..t.order())
        .map(|j| {
            let s = singular_values(unfold(t, j)?.as_ref())?;
            rank_by_tail(&s, tau1, criterion)
        })
        .collect()
}

/// A Tucker model `core x_0 factors[0] x_1 ... x_d factors[d]`.
#[derive(Clone, Debug)]
pub struct TuckerModel {
    pub core: DenseTensor,
    /// `n_j x r_j`, orthonormal columns.
    pub factors: Vec<Matrix>,
    pub ranks: Vec<usize>,
    pub original_dims: Vec<usize>,
    /// Squared Frobenius norm of the singular values dropped for each mode.
    pub discarded: Vec<f64>,
}

impl TuckerModel {
    /// `(min_j d_j, sum_j d_j)` over the discarded energies; the squared
    /// reconstruction error lies in this interval.
    pub fn error_bounds(&self) -> (f64, f64) {
        let lo = self.discarded.iter().copied().fold(f64::INFINITY, f64::min);
        (lo, self.discarded.iter().sum())
    }

    pub fn compression_factor(&self) -> f64 {
        compression_factor(&self.original_dims, &self.ranks)
            .expect("model ranks are within dims")
    }
}

fn check_ranks(dims: &[usize], ranks: &[usize]) -> Result<()> {
    if ranks.len() != dims.len() {
        return Err(Error::invalid(format!(
            "{} ranks given for an order-{} tensor",
            ranks.len(),
            dims.len()
        )));
    }
    for (j, (&r, &n)) in ranks.iter().zip(dims).enumerate() {
        if r == 0 || r > n {
            return Err(Error::invalid(format!(
                "rank {r} for mode {j} outside 1..={n}"
            )));
        }
    }
    Ok(())
}

fn check_order(order: &[usize], d: usize) -> Result<()> {
    let mut seen = vec![false; d];
    if order.len() != d {
        return Err(Error::invalid(format!(
            "processing order {order:?} is not a permutation of 0..{d}"
        )));
    }
    for &p in order {
        if p >= d || seen[p] {
            return Err(Error::invalid(format!(
                "processing order {order:?} is not a permutation of 0..{d}"
            )));
        }
        seen[p] = true;
    }
    Ok(())
}

fn finish(
    core: DenseTensor,
    factors: Vec<Matrix>,
    ranks: &[usize],
    t: &DenseTensor,
    discarded: Vec<f64>,
) -> Result<TuckerModel> {
    let cn = core.frobenius_norm();
    let tn = t.frobenius_norm();
    if !(cn <= tn * (1.0 + 1e-12) + f64::MIN_POSITIVE) {
        return Err(Error::numeric(format!(
            "core norm {cn:e} exceeds tensor norm {tn:e}"
        )));
    }
    Ok(TuckerModel {
        core,
        factors,
        ranks: ranks.to_vec(),
        original_dims: t.dims().to_vec(),
        discarded,
    })
}

/// Truncated HOSVD: every factor comes from an unfolding of `t` itself.
pub fn t_hosvd(t: &DenseTensor, ranks: &[usize]) -> Result<TuckerModel> {
    t_hosvd_impl(t, ranks, None)
}

/// As [`t_hosvd`], also returning the seconds spent in each mode's SVD.
pub fn t_hosvd_timed(t: &DenseTensor, ranks: &[usize]) -> Result<(TuckerModel, Vec<f64>)> {
    let mut times = Vec::new();
    let m = t_hosvd_impl(t, ranks, Some(&mut times))?;
    Ok((m, times))
}

fn t_hosvd_impl(
    t: &DenseTensor,
    ranks: &[usize],
    mut times: Option<&mut Vec<f64>>,
) -> Result<TuckerModel> {
    check_ranks(t.dims(), ranks)?;
    let mut factors = Vec::with_capacity(t.order());
    let mut discarded = Vec::with_capacity(t.order());
    for (j, &r) in ranks.iter().enumerate() {
        let m = unfold(t, j)?;
        let start = Instant::now();
        let svd = padded_svd(m.as_ref(), r)?;
        if let Some(ts) = times.as_deref_mut() {
            ts.push(start.elapsed().as_secs_f64());
        }
        discarded.push(svd.spectrum.iter().skip(r).map(|s| s * s).sum());
        factors.push(svd.left);
    }
    let mut core = t.clone();
    for (j, f) in factors.iter().enumerate() {
        core = mode_product(&core, f.transpose(), j)?;
    }
    finish(core, factors, ranks, t, discarded)
}

/// Sequentially truncated HOSVD processing modes in `order`.
pub fn st_hosvd(t: &DenseTensor, ranks: &[usize], order: &[usize]) -> Result<TuckerModel> {
    st_hosvd_impl(t, ranks, order, None)
}

/// As [`st_hosvd`], also returning the seconds spent in each stage's SVD,
/// listed in processing order.
pub fn st_hosvd_timed(
    t: &DenseTensor,
    ranks: &[usize],
    order: &[usize],
) -> Result<(TuckerModel, Vec<f64>)> {
    let mut times = Vec::new();
    let m = st_hosvd_impl(t, ranks, order, Some(&mut times))?;
    Ok((m, times))
}

fn st_hosvd_impl(
    t: &DenseTensor,
    ranks: &[usize],
    order: &[usize],
    mut times: Option<&mut Vec<f64>>,
) -> Result<TuckerModel> {
    check_ranks(t.dims(), ranks)?;
    check_order(order, t.order())?;
    let d = t.order();
    let mut factors: Vec<Option<Matrix>> = vec![None; d];
    let mut discarded = vec![0.0; d];
    let mut core = t.clone();
    for &p in order {
        let m = unfold(&core, p)?;
        let start = Instant::now();
        let svd = padded_svd(m.as_ref(), ranks[p])?;
        if let Some(ts) = times.as_deref_mut() {
            ts.push(start.elapsed().as_secs_f64());
        }
        drop(m);
        discarded[p] = svd.spectrum.iter().skip(ranks[p]).map(|s| s * s).sum();
        let mut dims = core.dims().to_vec();
        dims[p] = ranks[p];
        core = fold(svd.reduced.as_ref(), p, &dims)?;
        factors[p] = Some(svd.left);
    }
    let factors = factors.into_iter().map(|f| f.expect("every mode visited")).collect();
    finish(core, factors, ranks, t, discarded)
}

/// The default processing order `0, 1, ..., order - 1`.
pub fn natural_order(order: usize) -> Vec<usize> {
    (0..order).collect()
}

/// Modes sorted by ascending size (ties keep index order).
pub fn ascending_size_order(dims: &[usize]) -> Vec<usize> {
    let mut p: Vec<usize> = (0..dims.len()).collect();
    p.sort_by_key(|&j| dims[j]);
    p
}

/// Multiplies the core by every factor.
pub fn reconstruct(m: &TuckerModel) -> Result<DenseTensor> {
    tucker_product(&m.core, &m.factors)
}

/// `core x_0 factors[0] x_1 ... ` for any core and factor list.
pub fn tucker_product(core: &DenseTensor, factors: &[Matrix]) -> Result<DenseTensor> {
    if factors.len() != core.order() {
        return Err(Error::invalid(format!(
            "{} factors for an order-{} core",
            factors.len(),
            core.order()
        )));
    }
    let mut out = core.clone();
    for (j, f) in factors.iter().enumerate() {
        out = mode_product(&out, f.as_ref(), j)?;
    }
    Ok(out)
}

/// Storage ratio `(prod n + sum n^2) / (prod r + sum n r)`.
pub fn compression_factor(original_dims: &[usize], ranks: &[usize]) -> Result<f64> {
    check_ranks(original_dims, ranks)?;
    let prod = |xs: &[usize]| xs.iter().map(|&x| x as f64).product::<f64>();
    let num = prod(original_dims) + original_dims.iter().map(|&n| (n * n) as f64).sum::<f64>();
    let den = prod(ranks)
        + original_dims
            .iter()
            .zip(ranks)
            .map(|(&n, &r)| (n * r) as f64)
            .sum::<f64>();
    Ok(num / den)
}

/// Saved memory in percent for a compression factor.
pub fn saved_memory(compression_factor: f64) -> f64 {
    100.0 * (1.0 - 1.0 / compression_factor)
}
