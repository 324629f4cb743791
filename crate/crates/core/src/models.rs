//! Reaction kinetics and initial data for the Schnakenberg and Brusselator systems.
//!
//! Random perturbations are drawn from ChaCha8 (`rand_chacha::ChaCha8Rng`)
//! seeded with `seed_from_u64`, sampling the open interval (0, 1). The `u`
//! field consumes the stream first, in tensor layout order, then `v`.

use rand::distr::{Distribution, Open01};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretize::Grid;
use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Schnakenberg,
    Brusselator,
}

/// Reaction terms `f(u, v)`, `g(u, v)` with their parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReactionModel {
    pub kind: ModelKind,
    pub alpha: f64,
    pub beta: f64,
    /// Reaction strength; only the Schnakenberg model uses it.
    pub gamma: f64,
}

impl ReactionModel {
    pub fn schnakenberg(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let m = Self {
            kind: ModelKind::Schnakenberg,
            alpha,
            beta,
            gamma,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn brusselator(alpha: f64, beta: f64) -> Self {
        Self {
            kind: ModelKind::Brusselator,
            alpha,
            beta,
            gamma: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.beta.is_finite() && self.gamma.is_finite()) {
            return Err(Error::invalid("reaction parameters must be finite"));
        }
        if self.kind == ModelKind::Schnakenberg && self.gamma <= 0.0 {
            return Err(Error::invalid(format!(
                "Schnakenberg gamma must be positive, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Pointwise `(f(u, v), g(u, v))`.
    #[inline]
    pub fn rates(&self, u: f64, v: f64) -> (f64, f64) {
        let u2v = u * u * v;
        match self.kind {
            ModelKind::Schnakenberg => (
                self.gamma * (self.alpha - u + u2v),
                self.gamma * (self.beta - u2v),
            ),
            ModelKind::Brusselator => (
                -(self.beta + 1.0) * u + u2v + self.alpha,
                self.beta * u - u2v,
            ),
        }
    }

    /// Uniform-noise amplitudes `(s_u, s_v)`: perturbations are `U(0,1)/s`.
    pub fn noise_divisors(&self) -> (f64, f64) {
        match self.kind {
            ModelKind::Schnakenberg => (100.0, 100.0),
            ModelKind::Brusselator => (3.0, 10.0),
        }
    }
}

/// Homogeneous steady state of a reaction model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Equilibrium {
    pub u_e: f64,
    pub v_e: f64,
}

pub fn equilibrium(model: &ReactionModel) -> Result<Equilibrium> {
    match model.kind {
        ModelKind::Schnakenberg => {
            let s = model.alpha + model.beta;
            if s == 0.0 {
                return Err(Error::invalid("alpha + beta = 0 has no Schnakenberg equilibrium"));
            }
            Ok(Equilibrium {
                u_e: s,
                v_e: model.beta / (s * s),
            })
        }
        ModelKind::Brusselator => {
            if model.alpha == 0.0 {
                return Err(Error::invalid("alpha = 0 has no Brusselator equilibrium"));
            }
            Ok(Equilibrium {
                u_e: model.alpha,
                v_e: model.beta / model.alpha,
            })
        }
    }
}

/// Entrywise reaction terms `(F(U, V), G(U, V))`.
pub fn reaction_eval(
    model: &ReactionModel,
    u: &DenseTensor,
    v: &DenseTensor,
) -> Result<(DenseTensor, DenseTensor)> {
    if u.dims() != v.dims() {
        return Err(Error::invalid(format!(
            "u dims {:?} differ from v dims {:?}",
            u.dims(),
            v.dims()
        )));
    }
    let (f, g): (Vec<f64>, Vec<f64>) = u
        .data()
        .iter()
        .zip(v.data())
        .map(|(&a, &b)| model.rates(a, b))
        .unzip();
    Ok((
        DenseTensor::new(u.dims().to_vec(), f)?,
        DenseTensor::new(u.dims().to_vec(), g)?,
    ))
}

/// Equilibrium plus seeded uniform noise on every grid node.
pub fn initial_condition(
    model: &ReactionModel,
    grid: &Grid,
    seed: u64,
) -> Result<(DenseTensor, DenseTensor)> {
    let eq = equilibrium(model)?;
    let (su, sv) = model.noise_divisors();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |base: f64, s: f64| -> f64 {
        let r: f64 = Open01.sample(&mut rng);
        base + r / s
    };
    let dims = grid.counts();
    let u = DenseTensor::from_fn(dims, |_| draw(eq.u_e, su))?;
    let v = DenseTensor::from_fn(dims, |_| draw(eq.v_e, sv))?;
    Ok((u, v))
}
