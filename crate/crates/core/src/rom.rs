//! Two-level nonintrusive reduced model.
//!
//! Level I compresses each training snapshot with ST-HOSVD. Level II stacks
//! the per-parameter factors mode by mode and truncates their SVD to get one
//! global basis per mode. Snapshots are projected onto the global bases and
//! the resulting cores are interpolated in `theta` with Gaussian RBFs.

use std::borrow::Cow;
use std::time::Instant;

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fom::SnapshotPair;
use crate::hosvd::{
    ascending_size_order, natural_order, rank_by_captured, ranks_from_tolerance_with, st_hosvd,
    tucker_product, TruncationCriterion,
};
use crate::tensor::{mode_product, orthonormality_defect, thin_svd, DenseTensor, Matrix};

/// How the kernel width enters the Gaussian.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelForm {
    /// `exp(-w^2 / (2 rho))`
    #[default]
    DivideByWidth,
    /// `exp(-w^2 rho / 2)`
    MultiplyByWidth,
}

impl KernelForm {
    #[inline]
    pub fn eval(self, w: f64, rho: f64) -> f64 {
        match self {
            KernelForm::DivideByWidth => (-w * w / (2.0 * rho)).exp(),
            KernelForm::MultiplyByWidth => (-w * w * rho / 2.0).exp(),
        }
    }
}

/// ST-HOSVD processing order used at level I.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessingOrder {
    #[default]
    Natural,
    AscendingSize,
}

impl ProcessingOrder {
    pub fn resolve(self, dims: &[usize]) -> Vec<usize> {
        match self {
            ProcessingOrder::Natural => natural_order(dims.len()),
            ProcessingOrder::AscendingSize => ascending_size_order(dims),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RomSettings {
    pub tau1: f64,
    pub tau2: f64,
    pub criterion: TruncationCriterion,
    pub kernel: KernelForm,
    pub order: ProcessingOrder,
}

impl RomSettings {
    pub fn new(tau1: f64, tau2: f64) -> Self {
        Self {
            tau1,
            tau2,
            criterion: TruncationCriterion::default(),
            kernel: KernelForm::default(),
            order: ProcessingOrder::default(),
        }
    }
}

/// Level-I factors of one snapshot plus the ranks that produced them.
#[derive(Clone, Debug)]
pub struct LocalBasis {
    pub theta: f64,
    pub ranks: Vec<usize>,
    pub factors: Vec<Matrix>,
}

fn check_same_dims<'a>(mut dims: impl Iterator<Item = &'a [usize]>) -> Result<()> {
    if let Some(first) = dims.next() {
        for d in dims {
            if d != first {
                return Err(Error::invalid(format!(
                    "snapshot dims {d:?} differ from {first:?}"
                )));
            }
        }
    }
    Ok(())
}

fn check_distinct(thetas: &[f64]) -> Result<()> {
    for (i, a) in thetas.iter().enumerate() {
        if !a.is_finite() {
            return Err(Error::invalid(format!("theta {a} is not finite")));
        }
        if thetas[..i].contains(a) {
            return Err(Error::invalid(format!("theta {a} appears twice")));
        }
    }
    Ok(())
}

/// Level-I ST-HOSVD basis of a single snapshot.
pub fn local_basis(
    theta: f64,
    t: &DenseTensor,
    tau1: f64,
    criterion: TruncationCriterion,
    order: ProcessingOrder,
) -> Result<LocalBasis> {
    let ranks = ranks_from_tolerance_with(t, tau1, criterion)?;
    let m = st_hosvd(t, &ranks, &order.resolve(t.dims()))?;
    Ok(LocalBasis {
        theta,
        ranks,
        factors: m.factors,
    })
}

/// Level-I bases for every `(theta, snapshot)`; cores are discarded.
pub fn level1_bases(
    snapshots: &[(f64, &DenseTensor)],
    tau1: f64,
    criterion: TruncationCriterion,
    order: ProcessingOrder,
) -> Result<Vec<LocalBasis>> {
    check_same_dims(snapshots.iter().map(|(_, t)| t.dims()))?;
    check_distinct(&snapshots.iter().map(|(th, _)| *th).collect::<Vec<_>>())?;
    snapshots
        .iter()
        .map(|&(th, t)| local_basis(th, t, tau1, criterion, order))
        .collect()
}

/// Global basis per mode from the stacked level-I factors, truncated where
/// the captured fraction of singular values reaches `1 - tau2`.
pub fn level2_global_basis(
    locals: &[LocalBasis],
    tau2: f64,
    criterion: TruncationCriterion,
) -> Result<Vec<Matrix>> {
    if !(tau2 > 0.0 && tau2 < 1.0) {
        return Err(Error::invalid(format!("tau2 = {tau2} outside (0, 1)")));
    }
    let first = locals
        .first()
        .ok_or_else(|| Error::invalid("no level-I bases given"))?;
    let modes = first.factors.len();
    let mut out = Vec::with_capacity(modes);
    for j in 0..modes {
        let rows = first.factors[j].nrows();
        let mut blocks = Vec::with_capacity(locals.len());
        for l in locals {
            let f = l
                .factors
                .get(j)
                .filter(|f| f.nrows() == rows)
                .ok_or_else(|| Error::invalid(format!("mode {j} factors disagree in shape")))?;
            blocks.push(f);
        }
        let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
        let mut stacked = Mat::<f64>::zeros(rows, cols);
        let mut c0 = 0;
        for b in blocks {
            stacked
                .as_mut()
                .subcols_mut(c0, b.ncols())
                .copy_from(b.as_ref());
            c0 += b.ncols();
        }
        let svd = thin_svd(stacked.as_ref())?;
        let r = rank_by_captured(&svd.singular_values, tau2, criterion)?;
        out.push(svd.left.subcols(0, r).to_owned());
    }
    Ok(out)
}

/// Projects one snapshot onto the global bases.
pub fn project_core(t: &DenseTensor, global: &[Matrix]) -> Result<DenseTensor> {
    if global.len() != t.order() || global.iter().zip(t.dims()).any(|(f, &n)| f.nrows() != n) {
        return Err(Error::invalid(format!(
            "global factor shapes {:?} incompatible with snapshot dims {:?}",
            global.iter().map(|f| (f.nrows(), f.ncols())).collect::<Vec<_>>(),
            t.dims()
        )));
    }
    let mut core = mode_product(t, global[0].transpose(), 0)?;
    for (j, f) in global.iter().enumerate().skip(1) {
        core = mode_product(&core, f.transpose(), j)?;
    }
    Ok(core)
}

pub fn project_cores(snapshots: &[&DenseTensor], global: &[Matrix]) -> Result<Vec<DenseTensor>> {
    snapshots.iter().map(|t| project_core(t, global)).collect()
}

/// `(max theta - min theta) / n_p`.
pub fn kernel_width(thetas: &[f64]) -> f64 {
    let (lo, hi) = thetas
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    (hi - lo) / thetas.len() as f64
}

/// Symmetric kernel matrix `B_ij = psi(|theta_i - theta_j|)`.
pub fn interpolation_matrix(thetas: &[f64], rho: f64, kernel: KernelForm) -> Matrix {
    let n = thetas.len();
    Mat::from_fn(n, n, |i, j| kernel.eval((thetas[i] - thetas[j]).abs(), rho))
}

/// RBF coefficients for all core entries at once.
///
/// Returns a tensor of dims `(core dims..., n_p)` whose last-mode slice `j`
/// holds the coefficients of the kernel centred at `thetas[j]`.
pub fn fit_rbf(
    cores: &[DenseTensor],
    thetas: &[f64],
    rho: f64,
    kernel: KernelForm,
) -> Result<DenseTensor> {
    if cores.len() != thetas.len() || cores.is_empty() {
        return Err(Error::invalid(format!(
            "{} cores for {} parameter values",
            cores.len(),
            thetas.len()
        )));
    }
    check_same_dims(cores.iter().map(|c| c.dims()))?;
    check_distinct(thetas)?;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::invalid(format!("kernel width {rho} must be positive")));
    }
    let np = thetas.len();
    let ncore = cores[0].len();
    let b = interpolation_matrix(thetas, rho, kernel);
    let llt = b.llt(faer::Side::Lower).map_err(|_| {
        Error::numeric("degenerate parameter spacing; adjust rho or samples")
    })?;
    let rhs = Mat::from_fn(np, ncore, |i, c| cores[i].data()[c]);
    let gamma = llt.solve(rhs);
    if !gamma.col_iter().all(|c| c.iter().all(|x| x.is_finite())) {
        return Err(Error::numeric("degenerate parameter spacing; adjust rho or samples"));
    }
    let mut dims = cores[0].dims().to_vec();
    dims.push(np);
    DenseTensor::from_fn(&dims, |idx| {
        let j = idx[idx.len() - 1];
        let c = cores[0].linear_index(&idx[..idx.len() - 1]);
        gamma[(j, c)]
    })
}

/// `sum_j gamma_j psi(|theta - theta_j|)` entrywise.
pub fn rbf_evaluate(
    gamma: &DenseTensor,
    thetas: &[f64],
    rho: f64,
    kernel: KernelForm,
    theta: f64,
) -> Result<DenseTensor> {
    let np = *gamma.dims().last().expect("gamma has a parameter mode");
    if np != thetas.len() {
        return Err(Error::invalid(format!(
            "gamma has {np} parameter slices, model has {} thetas",
            thetas.len()
        )));
    }
    let dims = &gamma.dims()[..gamma.order() - 1];
    let mut out = DenseTensor::zeros(dims)?;
    for (j, &tj) in thetas.iter().enumerate() {
        let w = kernel.eval((theta - tj).abs(), rho);
        for (o, g) in out.data_mut().iter_mut().zip(gamma.last_mode_slice(j)) {
            *o += w * g;
        }
    }
    Ok(out)
}

/// Reduced model of one species.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeciesRom {
    /// Mode `j` is `n_j x r_j` with orthonormal columns.
    pub global_factors: Vec<Matrix>,
    /// Dims `(r_1, ..., r_{d+1}, n_p)`.
    pub gamma: DenseTensor,
}

impl SpeciesRom {
    pub fn ranks(&self) -> Vec<usize> {
        self.global_factors.iter().map(|f| f.ncols()).collect()
    }

    pub fn original_dims(&self) -> Vec<usize> {
        self.global_factors.iter().map(|f| f.nrows()).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RomModel {
    pub u: SpeciesRom,
    pub v: SpeciesRom,
    /// Strictly increasing training parameters.
    pub thetas: Vec<f64>,
    pub rho: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub criterion: TruncationCriterion,
    pub kernel: KernelForm,
    pub config_digest: String,
}

impl RomModel {
    pub fn validate(&self) -> Result<()> {
        if self.thetas.len() < 2 {
            return Err(Error::invalid("a reduced model needs at least two parameter values"));
        }
        if !self.thetas.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("thetas must be strictly increasing"));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::invalid(format!("kernel width {} must be positive", self.rho)));
        }
        for (name, s) in [("u", &self.u), ("v", &self.v)] {
            let mut want = s.ranks();
            want.push(self.thetas.len());
            if s.gamma.dims() != want.as_slice() {
                return Err(Error::invalid(format!(
                    "{name}: gamma dims {:?}, expected {want:?}",
                    s.gamma.dims()
                )));
            }
            for (j, f) in s.global_factors.iter().enumerate() {
                let defect = orthonormality_defect(f.as_ref());
                if !(defect < 1e-10) {
                    return Err(Error::numeric(format!(
                        "{name}: mode {j} factor is not orthonormal (defect {defect:e})"
                    )));
                }
            }
        }
        if self.u.original_dims() != self.v.original_dims() {
            return Err(Error::invalid("u and v models disagree on snapshot dims"));
        }
        Ok(())
    }

    pub fn snapshot_dims(&self) -> Vec<usize> {
        self.u.original_dims()
    }

    pub fn is_extrapolation(&self, theta: f64) -> bool {
        theta < self.thetas[0] || theta > self.thetas[self.thetas.len() - 1]
    }

    /// Interpolated cores at `theta`.
    pub fn cores_at(&self, theta: f64) -> Result<(DenseTensor, DenseTensor)> {
        Ok((
            rbf_evaluate(&self.u.gamma, &self.thetas, self.rho, self.kernel, theta)?,
            rbf_evaluate(&self.v.gamma, &self.thetas, self.rho, self.kernel, theta)?,
        ))
    }
}

/// Output of [`predict`].
#[derive(Clone, Debug)]
pub struct Prediction {
    pub u: DenseTensor,
    pub v: DenseTensor,
    /// `theta` lies outside the training interval.
    pub extrapolated: bool,
    pub seconds: f64,
}

/// Reduced solution at `theta`. Spatial modes are expanded before the time
/// mode, so the largest intermediate is the output itself.
pub fn predict(model: &RomModel, theta: f64) -> Result<Prediction> {
    if !theta.is_finite() {
        return Err(Error::invalid(format!("theta {theta} is not finite")));
    }
    let start = Instant::now();
    let (cu, cv) = model.cores_at(theta)?;
    let u = tucker_product(&cu, &model.u.global_factors)?;
    let v = tucker_product(&cv, &model.v.global_factors)?;
    Ok(Prediction {
        u,
        v,
        extrapolated: model.is_extrapolation(theta),
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Training snapshots, visited twice during a build (bases, then cores).
pub trait SnapshotSource {
    fn thetas(&self) -> Vec<f64>;
    fn load(&mut self, index: usize) -> Result<Cow<'_, SnapshotPair>>;
}

/// Snapshots already held in memory.
pub struct InMemorySource<'a>(pub &'a [SnapshotPair]);

impl SnapshotSource for InMemorySource<'_> {
    fn thetas(&self) -> Vec<f64> {
        self.0.iter().map(|s| s.theta).collect()
    }

    fn load(&mut self, index: usize) -> Result<Cow<'_, SnapshotPair>> {
        Ok(Cow::Borrowed(&self.0[index]))
    }
}

/// Wall-clock breakdown of a build, in seconds.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OfflineTimings {
    /// Sum of the `fom_seconds` of every snapshot loaded in the first pass.
    pub fom: f64,
    pub level1: f64,
    pub level2: f64,
    pub projection: f64,
    pub rbf: f64,
}

#[derive(Clone, Debug)]
pub struct BuildReport {
    pub timings: OfflineTimings,
    /// Level-I ranks per training theta (sorted order), `u` then `v`.
    pub level1_ranks_u: Vec<Vec<usize>>,
    pub level1_ranks_v: Vec<Vec<usize>>,
}

/// Runs level I, level II, projection and the RBF fit over `source`.
pub fn build_rom(
    source: &mut dyn SnapshotSource,
    settings: &RomSettings,
) -> Result<(RomModel, BuildReport)> {
    let raw = source.thetas();
    if raw.len() < 2 {
        return Err(Error::invalid("a reduced model needs at least two parameter values"));
    }
    check_distinct(&raw)?;
    let mut perm: Vec<usize> = (0..raw.len()).collect();
    perm.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]));
    let thetas: Vec<f64> = perm.iter().map(|&i| raw[i]).collect();

    let mut timings = OfflineTimings::default();
    let mut locals_u = Vec::with_capacity(perm.len());
    let mut locals_v = Vec::with_capacity(perm.len());
    let mut dims: Option<Vec<usize>> = None;
    let mut digest: Option<String> = None;
    for &i in &perm {
        let snap = source.load(i)?;
        check_snapshot(&snap, raw[i], &mut dims, &mut digest)?;
        timings.fom += snap.fom_seconds;
        let start = Instant::now();
        locals_u.push(local_basis(
            snap.theta,
            &snap.u,
            settings.tau1,
            settings.criterion,
            settings.order,
        )?);
        locals_v.push(local_basis(
            snap.theta,
            &snap.v,
            settings.tau1,
            settings.criterion,
            settings.order,
        )?);
        timings.level1 += start.elapsed().as_secs_f64();
    }

    let start = Instant::now();
    let global_u = level2_global_basis(&locals_u, settings.tau2, settings.criterion)?;
    let global_v = level2_global_basis(&locals_v, settings.tau2, settings.criterion)?;
    timings.level2 = start.elapsed().as_secs_f64();

    let mut cores_u = Vec::with_capacity(perm.len());
    let mut cores_v = Vec::with_capacity(perm.len());
    for &i in &perm {
        let snap = source.load(i)?;
        check_snapshot(&snap, raw[i], &mut dims, &mut digest)?;
        let start = Instant::now();
        cores_u.push(project_core(&snap.u, &global_u)?);
        cores_v.push(project_core(&snap.v, &global_v)?);
        timings.projection += start.elapsed().as_secs_f64();
    }

    let start = Instant::now();
    let rho = kernel_width(&thetas);
    let gamma_u = fit_rbf(&cores_u, &thetas, rho, settings.kernel)?;
    let gamma_v = fit_rbf(&cores_v, &thetas, rho, settings.kernel)?;
    timings.rbf = start.elapsed().as_secs_f64();

    let model = RomModel {
        u: SpeciesRom {
            global_factors: global_u,
            gamma: gamma_u,
        },
        v: SpeciesRom {
            global_factors: global_v,
            gamma: gamma_v,
        },
        thetas,
        rho,
        tau1: settings.tau1,
        tau2: settings.tau2,
        criterion: settings.criterion,
        kernel: settings.kernel,
        config_digest: digest.unwrap_or_default(),
    };
    model.validate()?;
    Ok((
        model,
        BuildReport {
            timings,
            level1_ranks_u: locals_u.into_iter().map(|l| l.ranks).collect(),
            level1_ranks_v: locals_v.into_iter().map(|l| l.ranks).collect(),
        },
    ))
}

fn check_snapshot(
    snap: &SnapshotPair,
    theta: f64,
    dims: &mut Option<Vec<usize>>,
    digest: &mut Option<String>,
) -> Result<()> {
    if snap.theta != theta {
        return Err(Error::invalid(format!(
            "snapshot reports theta {}, expected {theta}",
            snap.theta
        )));
    }
    if snap.u.dims() != snap.v.dims() {
        return Err(Error::invalid("u and v snapshots differ in shape"));
    }
    match dims {
        Some(d) if d.as_slice() != snap.u.dims() => {
            return Err(Error::invalid(format!(
                "snapshot dims {:?} differ from {d:?}",
                snap.u.dims()
            )))
        }
        Some(_) => {}
        None => *dims = Some(snap.u.dims().to_vec()),
    }
    match digest {
        Some(d) if *d != snap.config_digest => {
            return Err(Error::invalid(format!(
                "snapshot at theta {theta} comes from a different config"
            )))
        }
        Some(_) => {}
        None => *digest = Some(snap.config_digest.clone()),
    }
    Ok(())
}
