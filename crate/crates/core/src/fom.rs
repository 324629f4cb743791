//! Full-order IMEX-Euler solver for two-species cross-diffusion systems.
//!
//! Diffusion is implicit and reaction explicit, so every step solves the
//! coupled Sylvester system
//!
//! ```text
//! U+ - dt (d_u  L(U+) + d_vu L(V+)) = U + dt F(U, V)
//! V+ - dt (d_uv L(U+) + d_v  L(V+)) = V + dt G(U, V)
//! ```
//!
//! where `L` applies the 1D Neumann Laplacian along every axis. The operator
//! is diagonalised once per axis; a step is then a change of basis along each
//! axis, an entrywise 2x2 solve, and the inverse change of basis. In 3D the
//! Kronecker-sum eigenbasis is never formed: its factors are applied as
//! separate mode products.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::discretize::{eig_decompose, laplacian_1d, Grid, SpectralFactors};
use crate::error::{Error, Result};
use crate::models::{initial_condition, ReactionModel};
use crate::tensor::{mode_product, DenseTensor, Matrix};

/// Diffusion coefficients of the two species.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diffusion {
    pub d_u: f64,
    pub d_v: f64,
    /// Effect of `u` gradients on `v`.
    pub d_uv: f64,
    /// Effect of `v` gradients on `u`.
    pub d_vu: f64,
}

/// Coefficient that plays the role of the scalar parameter `theta`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyParameter {
    #[serde(rename = "d_u")]
    DU,
    #[serde(rename = "d_v")]
    DV,
    #[serde(rename = "d_uv")]
    DUV,
    #[serde(rename = "d_vu")]
    DVU,
    Alpha,
    Beta,
    Gamma,
}

impl StudyParameter {
    pub fn name(self) -> &'static str {
        match self {
            StudyParameter::DU => "d_u",
            StudyParameter::DV => "d_v",
            StudyParameter::DUV => "d_uv",
            StudyParameter::DVU => "d_vu",
            StudyParameter::Alpha => "alpha",
            StudyParameter::Beta => "beta",
            StudyParameter::Gamma => "gamma",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub grid: Grid,
    pub reaction: ReactionModel,
    pub diffusion: Diffusion,
    pub dt: f64,
    pub t_final: f64,
    pub study_parameter: StudyParameter,
    pub seed: u64,
}

/// Relative slack allowed between `t_final / dt` and its nearest integer.
const STEP_COUNT_TOL: f64 = 1e-6;

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("time.dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::config(
                "time.t_final",
                format!("must be positive, got {}", self.t_final),
            ));
        }
        let ratio = self.t_final / self.dt;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > STEP_COUNT_TOL * n.max(1.0) {
            return Err(Error::config(
                "time.t_final",
                format!(
                    "t_final / dt = {ratio} is not an integer step count (dt = {}, t_final = {})",
                    self.dt, self.t_final
                ),
            ));
        }
        let d = &self.diffusion;
        if !(d.d_u > 0.0) {
            return Err(Error::config("diffusion.d_u", format!("must be positive, got {}", d.d_u)));
        }
        if !(d.d_v > 0.0) {
            return Err(Error::config("diffusion.d_v", format!("must be positive, got {}", d.d_v)));
        }
        if !(d.d_uv.is_finite() && d.d_vu.is_finite() && d.d_u.is_finite() && d.d_v.is_finite()) {
            return Err(Error::config("diffusion", "coefficients must be finite"));
        }
        self.reaction
            .validate()
            .map_err(|e| Error::config("reaction", e.to_string()))?;
        Ok(())
    }

    /// Number of time steps `round(t_final / dt)`.
    pub fn num_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Copy with `theta` written into the studied coefficient.
    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::invalid(format!("theta {theta} is not finite")));
        }
        let mut c = self.clone();
        match self.study_parameter {
            StudyParameter::DU => c.diffusion.d_u = theta,
            StudyParameter::DV => c.diffusion.d_v = theta,
            StudyParameter::DUV => c.diffusion.d_uv = theta,
            StudyParameter::DVU => c.diffusion.d_vu = theta,
            StudyParameter::Alpha => c.reaction.alpha = theta,
            StudyParameter::Beta => c.reaction.beta = theta,
            StudyParameter::Gamma => c.reaction.gamma = theta,
        }
        c.validate()?;
        Ok(c)
    }

    /// Hex SHA-256 of the canonical JSON form of this config.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// One axis of the diagonalised diffusion operator.
#[derive(Clone, Debug)]
pub struct AxisOperator {
    /// `T_k` for this axis.
    pub laplacian: Matrix,
    /// Eigenpairs used on this axis (`T_1`, `T_2^T`, `T_3`).
    pub spectral: SpectralFactors,
    /// Mode-product matrix into the eigenbasis.
    forward: Matrix,
    /// Mode-product matrix back to nodal values.
    backward: Matrix,
}

/// Everything a time step needs, computed once per run.
#[derive(Clone, Debug)]
pub struct StepPrecomp {
    pub axes: Vec<AxisOperator>,
    /// 3D only: `lambda^(3) (+) lambda^(1)` indexed by `i + n_1 * l`.
    pub combined_eigenvalues: Option<Vec<f64>>,
    pub l11: DenseTensor,
    pub l12: DenseTensor,
    pub l21: DenseTensor,
    pub l22: DenseTensor,
    pub dt: f64,
    pub diffusion: Diffusion,
}

impl StepPrecomp {
    pub fn dims(&self) -> &[usize] {
        self.l11.dims()
    }

    /// Applies the Laplacian along every axis (nodal space, no eigenbasis).
    pub fn laplacian(&self, x: &DenseTensor) -> Result<DenseTensor> {
        let mut acc: Option<DenseTensor> = None;
        for (k, ax) in self.axes.iter().enumerate() {
            let term = mode_product(x, ax.laplacian.as_ref(), k)?;
            acc = Some(match acc {
                None => term,
                Some(mut a) => {
                    for (s, t) in a.data_mut().iter_mut().zip(term.data()) {
                        *s += t;
                    }
                    a
                }
            });
        }
        Ok(acc.expect("at least two axes"))
    }

    fn to_spectral(&self, x: &DenseTensor) -> Result<DenseTensor> {
        let mut y = mode_product(x, self.axes[0].forward.as_ref(), 0)?;
        for (k, ax) in self.axes.iter().enumerate().skip(1) {
            y = mode_product(&y, ax.forward.as_ref(), k)?;
        }
        Ok(y)
    }

    fn to_nodal(&self, x: &DenseTensor) -> Result<DenseTensor> {
        let mut y = mode_product(x, self.axes[0].backward.as_ref(), 0)?;
        for (k, ax) in self.axes.iter().enumerate().skip(1) {
            y = mode_product(&y, ax.backward.as_ref(), k)?;
        }
        Ok(y)
    }
}

/// Builds the per-axis eigenbases and the entrywise 2x2 inverse blocks for
/// the config with `theta` substituted.
pub fn precompute(cfg: &SimulationConfig, theta: f64) -> Result<StepPrecomp> {
    let cfg = cfg.with_theta(theta)?;
    precompute_resolved(&cfg)
}

fn precompute_resolved(cfg: &SimulationConfig) -> Result<StepPrecomp> {
    let grid = &cfg.grid;
    let mut axes = Vec::with_capacity(grid.ndim());
    for (k, (&n, &len)) in grid.counts().iter().zip(grid.extents()).enumerate() {
        let t = laplacian_1d(n, len)?;
        let ax = if k == 1 {
            // right multiplication by Y / Y^-1 with T_2^T = Y Lambda Y^-1
            let tt = t.transpose().to_owned();
            let spectral = eig_decompose(tt.as_ref())?;
            let forward = spectral.vectors.transpose().to_owned();
            let backward = spectral.vectors_inv.transpose().to_owned();
            AxisOperator {
                laplacian: t,
                spectral,
                forward,
                backward,
            }
        } else {
            let spectral = eig_decompose(t.as_ref())?;
            let forward = spectral.vectors_inv.clone();
            let backward = spectral.vectors.clone();
            AxisOperator {
                laplacian: t,
                spectral,
                forward,
                backward,
            }
        };
        axes.push(ax);
    }

    let dims = grid.counts().to_vec();
    let combined_eigenvalues = (grid.ndim() == 3).then(|| {
        let l1 = &axes[0].spectral.eigenvalues;
        let l3 = &axes[2].spectral.eigenvalues;
        let mut out = Vec::with_capacity(l1.len() * l3.len());
        for z in l3 {
            for x in l1 {
                out.push(z + x);
            }
        }
        out
    });

    let d = cfg.diffusion;
    let dt = cfg.dt;
    let mut blocks = [
        DenseTensor::zeros(&dims)?,
        DenseTensor::zeros(&dims)?,
        DenseTensor::zeros(&dims)?,
        DenseTensor::zeros(&dims)?,
    ];
    let eig: Vec<&[f64]> = axes.iter().map(|a| a.spectral.eigenvalues.as_slice()).collect();
    let mut idx = vec![0usize; dims.len()];
    for lin in 0..blocks[0].len() {
        let s: f64 = idx.iter().zip(&eig).map(|(&i, e)| e[i]).sum();
        let s11 = 1.0 - d.d_u * dt * s;
        let s12 = -d.d_vu * dt * s;
        let s21 = -d.d_uv * dt * s;
        let s22 = 1.0 - d.d_v * dt * s;
        let det = s11 * s22 - s12 * s21;
        let scale = (s11 * s22).abs() + (s12 * s21).abs();
        if !det.is_finite() || det.abs() <= 1e-14 * scale {
            return Err(Error::numeric(format!(
                "singular 2x2 block at index {idx:?} (det = {det:e}); try a smaller dt"
            )));
        }
        blocks[0].data_mut()[lin] = s22 / det;
        blocks[1].data_mut()[lin] = -s12 / det;
        blocks[2].data_mut()[lin] = -s21 / det;
        blocks[3].data_mut()[lin] = s11 / det;
        for (i, n) in idx.iter_mut().zip(&dims) {
            *i += 1;
            if *i < *n {
                break;
            }
            *i = 0;
        }
    }
    let [l11, l12, l21, l22] = blocks;
    Ok(StepPrecomp {
        axes,
        combined_eigenvalues,
        l11,
        l12,
        l21,
        l22,
        dt,
        diffusion: d,
    })
}

fn check_state(pre: &StepPrecomp, u: &DenseTensor, v: &DenseTensor) -> Result<()> {
    if u.dims() != pre.dims() || v.dims() != pre.dims() {
        return Err(Error::invalid(format!(
            "state dims {:?}/{:?} do not match grid {:?}",
            u.dims(),
            v.dims(),
            pre.dims()
        )));
    }
    Ok(())
}

/// Solves the implicit diffusion system for given right-hand sides.
pub fn implicit_solve(
    rhs_u: &DenseTensor,
    rhs_v: &DenseTensor,
    pre: &StepPrecomp,
) -> Result<(DenseTensor, DenseTensor)> {
    check_state(pre, rhs_u, rhs_v)?;
    let q1 = pre.to_spectral(rhs_u)?;
    let q2 = pre.to_spectral(rhs_v)?;
    let mut uh = q1.clone();
    let mut vh = q2.clone();
    for (k, (a, b)) in q1.data().iter().zip(q2.data()).enumerate() {
        uh.data_mut()[k] = pre.l11.data()[k] * a + pre.l12.data()[k] * b;
        vh.data_mut()[k] = pre.l21.data()[k] * a + pre.l22.data()[k] * b;
    }
    Ok((pre.to_nodal(&uh)?, pre.to_nodal(&vh)?))
}

/// One IMEX-Euler step.
pub fn imex_step(
    state: (&DenseTensor, &DenseTensor),
    pre: &StepPrecomp,
    model: &ReactionModel,
) -> Result<(DenseTensor, DenseTensor)> {
    let (u, v) = state;
    check_state(pre, u, v)?;
    let (rhs_u, rhs_v) = explicit_rhs(u, v, pre.dt, model);
    let (un, vn) = implicit_solve(&rhs_u, &rhs_v, pre)?;
    if !(un.all_finite() && vn.all_finite()) {
        return Err(Error::numeric("non-finite state (blow-up; reduce dt)"));
    }
    Ok((un, vn))
}

fn explicit_rhs(
    u: &DenseTensor,
    v: &DenseTensor,
    dt: f64,
    model: &ReactionModel,
) -> (DenseTensor, DenseTensor) {
    let mut ru = u.clone();
    let mut rv = v.clone();
    for ((a, b), (x, y)) in ru
        .data_mut()
        .iter_mut()
        .zip(rv.data_mut().iter_mut())
        .zip(u.data().iter().zip(v.data()))
    {
        let (f, g) = model.rates(*x, *y);
        *a += dt * f;
        *b += dt * g;
    }
    (ru, rv)
}

/// Relative residuals `(r_u, r_v)` of a step `prev -> next` in the
/// unreduced Sylvester system, evaluated with the nodal Laplacians.
pub fn sylvester_residual(
    pre: &StepPrecomp,
    model: &ReactionModel,
    prev: (&DenseTensor, &DenseTensor),
    next: (&DenseTensor, &DenseTensor),
) -> Result<(f64, f64)> {
    check_state(pre, prev.0, prev.1)?;
    check_state(pre, next.0, next.1)?;
    let (rhs_u, rhs_v) = explicit_rhs(prev.0, prev.1, pre.dt, model);
    let lu = pre.laplacian(next.0)?;
    let lv = pre.laplacian(next.1)?;
    let d = pre.diffusion;
    let dt = pre.dt;
    let mut ru = 0.0;
    let mut rv = 0.0;
    for k in 0..lu.len() {
        let a = next.0.data()[k] - dt * (d.d_u * lu.data()[k] + d.d_vu * lv.data()[k])
            - rhs_u.data()[k];
        let b = next.1.data()[k] - dt * (d.d_uv * lu.data()[k] + d.d_v * lv.data()[k])
            - rhs_v.data()[k];
        ru += a * a;
        rv += b * b;
    }
    Ok((
        ru.sqrt() / rhs_u.frobenius_norm(),
        rv.sqrt() / rhs_v.frobenius_norm(),
    ))
}

/// Space-time snapshots of one full-order run.
#[derive(Clone, Debug)]
pub struct SnapshotPair {
    /// Order `d + 1`; the last mode is time.
    pub u: DenseTensor,
    pub v: DenseTensor,
    pub times: Vec<f64>,
    pub theta: f64,
    /// Digest of the config the run started from (before `theta` was applied).
    pub config_digest: String,
    /// Wall-clock seconds of the time loop.
    pub fom_seconds: f64,
}

impl SnapshotPair {
    pub fn num_times(&self) -> usize {
        self.times.len()
    }
}

/// Integrates from the seeded initial condition to `t_final`, storing the
/// initial state and every step (`round(t_final / dt) + 1` slices).
pub fn run_fom(cfg: &SimulationConfig, theta: f64) -> Result<SnapshotPair> {
    cfg.validate()?;
    let resolved = cfg.with_theta(theta)?;
    let pre = precompute_resolved(&resolved)?;
    let model = resolved.reaction;
    let (mut u, mut v) = initial_condition(&model, &resolved.grid, resolved.seed)?;

    let nt = resolved.num_steps();
    let mut dims = resolved.grid.counts().to_vec();
    dims.push(nt + 1);
    let mut su = DenseTensor::zeros(&dims)?;
    let mut sv = DenseTensor::zeros(&dims)?;
    su.last_mode_slice_mut(0).copy_from_slice(u.data());
    sv.last_mode_slice_mut(0).copy_from_slice(v.data());

    let start = Instant::now();
    for k in 1..=nt {
        let (un, vn) = imex_step((&u, &v), &pre, &model)
            .map_err(|e| match e {
                Error::Numeric(m) => Error::numeric(format!("step {k}: {m}")),
                other => other,
            })?;
        u = un;
        v = vn;
        su.last_mode_slice_mut(k).copy_from_slice(u.data());
        sv.last_mode_slice_mut(k).copy_from_slice(v.data());
    }
    let fom_seconds = start.elapsed().as_secs_f64();

    Ok(SnapshotPair {
        u: su,
        v: sv,
        times: (0..=nt).map(|k| k as f64 * resolved.dt).collect(),
        theta,
        config_digest: cfg.digest(),
        fom_seconds,
    })
}
