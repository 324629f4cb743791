//! Dense reference implementations used by several test targets.
#![allow(dead_code)]

use xdiff::discretize::Grid;
use xdiff::fom::{Diffusion, SimulationConfig, StudyParameter};
use xdiff::models::ReactionModel;
use xdiff::tensor::DenseTensor;

/// Row-major dense matrix.
#[derive(Clone, Debug)]
pub struct Dense {
    pub n: usize,
    pub m: usize,
    pub a: Vec<f64>,
}

impl Dense {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self { n, m, a: vec![0.0; n * m] }
    }

    pub fn identity(n: usize) -> Self {
        let mut d = Self::zeros(n, n);
        for i in 0..n {
            d.a[i * n + i] = 1.0;
        }
        d
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.m + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.m + j] = v;
    }

    pub fn kron(&self, other: &Dense) -> Dense {
        let mut out = Dense::zeros(self.n * other.n, self.m * other.m);
        for i in 0..self.n {
            for j in 0..self.m {
                let s = self.at(i, j);
                if s == 0.0 {
                    continue;
                }
                for k in 0..other.n {
                    for l in 0..other.m {
                        out.set(i * other.n + k, j * other.m + l, s * other.at(k, l));
                    }
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Dense) -> Dense {
        let mut out = self.clone();
        for (a, b) in out.a.iter_mut().zip(&other.a) {
            *a += b;
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.m).map(|j| self.at(i, j) * x[j]).sum())
            .collect()
    }
}

/// Neumann second-difference matrix built from the ghost-point stencil.
pub fn stencil(n: usize, length: f64) -> Dense {
    let h = length / (n - 1) as f64;
    let mut t = Dense::zeros(n, n);
    for i in 0..n {
        t.set(i, i, -2.0 / (h * h));
        let left = if i == n - 1 { 2.0 } else { 1.0 };
        let right = if i == 0 { 2.0 } else { 1.0 };
        if i > 0 {
            t.set(i, i - 1, left / (h * h));
        }
        if i + 1 < n {
            t.set(i, i + 1, right / (h * h));
        }
    }
    t
}

/// Kronecker-sum Laplacian acting on first-index-fastest vectors:
/// `I (x) T_1 + T_2 (x) I` in 2D and the three-term analogue in 3D.
pub fn kronecker_laplacian(grid: &Grid) -> Dense {
    let counts = grid.counts();
    let mut total: Option<Dense> = None;
    for k in 0..counts.len() {
        // factors are listed slowest axis first
        let mut term = Dense::identity(1);
        for axis in (0..counts.len()).rev() {
            let f = if axis == k {
                stencil(counts[axis], grid.extents()[axis])
            } else {
                Dense::identity(counts[axis])
            };
            term = term.kron(&f);
        }
        total = Some(match total {
            None => term,
            Some(t) => t.add(&term),
        });
    }
    total.unwrap()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &Dense, b: &[f64]) -> Vec<f64> {
    let n = a.n;
    let mut m = a.a.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
            .unwrap();
        if piv != col {
            for j in 0..n {
                m.swap(col * n + j, piv * n + j);
            }
            x.swap(col, piv);
        }
        let d = m[col * n + col];
        for i in col + 1..n {
            let f = m[i * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                m[i * n + j] -= f * m[col * n + j];
            }
            x[i] -= f * x[col];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s -= m[i * n + j] * x[j];
        }
        x[i] = s / m[i * n + i];
    }
    x
}

/// One vectorised IMEX-Euler step: assembles the `2N x 2N` system
/// `(I - dt M) [u; v] = [u + dt f; v + dt g]` and solves it densely.
pub struct DenseImex {
    pub system: Dense,
    pub dt: f64,
    pub model: ReactionModel,
    pub n: usize,
}

impl DenseImex {
    pub fn new(grid: &Grid, d: Diffusion, dt: f64, model: ReactionModel) -> Self {
        let a = kronecker_laplacian(grid);
        let n = a.n;
        let mut s = Dense::identity(2 * n);
        let blocks = [(0, 0, d.d_u), (0, 1, d.d_vu), (1, 0, d.d_uv), (1, 1, d.d_v)];
        for (bi, bj, c) in blocks {
            for i in 0..n {
                for j in 0..n {
                    let v = a.at(i, j);
                    if v != 0.0 {
                        let (r, k) = (bi * n + i, bj * n + j);
                        s.set(r, k, s.at(r, k) - dt * c * v);
                    }
                }
            }
        }
        Self { system: s, dt, model, n }
    }

    pub fn step(&self, u: &[f64], v: &[f64], reaction: bool) -> (Vec<f64>, Vec<f64>) {
        let mut rhs = Vec::with_capacity(2 * self.n);
        let mut rv = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let (f, g) = if reaction {
                let (a, b) = (u[i], v[i]);
                match self.model.kind {
                    xdiff::models::ModelKind::Schnakenberg => (
                        self.model.gamma * (self.model.alpha - a + a * a * b),
                        self.model.gamma * (self.model.beta - a * a * b),
                    ),
                    xdiff::models::ModelKind::Brusselator => (
                        self.model.alpha - (self.model.beta + 1.0) * a + a * a * b,
                        self.model.beta * a - a * a * b,
                    ),
                }
            } else {
                (0.0, 0.0)
            };
            rhs.push(u[i] + self.dt * f);
            rv.push(v[i] + self.dt * g);
        }
        rhs.extend(rv);
        let x = solve(&self.system, &rhs);
        (x[..self.n].to_vec(), x[self.n..].to_vec())
    }
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    num / den
}

pub fn schnakenberg_config(counts: &[usize], dt: f64, t_final: f64) -> SimulationConfig {
    SimulationConfig {
        grid: Grid::new(vec![0.5; counts.len()], counts.to_vec()).unwrap(),
        reaction: ReactionModel::schnakenberg(0.25, 0.3, 200.0).unwrap(),
        diffusion: Diffusion {
            d_u: 1.0,
            d_v: 1.0,
            d_uv: 0.65,
            d_vu: 1.0,
        },
        dt,
        t_final,
        study_parameter: StudyParameter::DUV,
        seed: 1,
    }
}

pub fn brusselator_config(counts: &[usize], dt: f64, t_final: f64) -> SimulationConfig {
    SimulationConfig {
        grid: Grid::new(vec![20.0; counts.len()], counts.to_vec()).unwrap(),
        reaction: ReactionModel::brusselator(6.0, 1.0),
        diffusion: Diffusion {
            d_u: 0.4,
            d_v: 2.0,
            d_uv: 0.02,
            d_vu: 21.5,
        },
        dt,
        t_final,
        study_parameter: StudyParameter::DVU,
        seed: 1,
    }
}

/// Deterministic pseudo-random tensor with entries in `[-0.5, 0.5)`.
pub fn lcg_tensor(dims: &[usize], seed: u64) -> DenseTensor {
    let mut s = seed ^ 0x9e37_79b9_7f4a_7c15;
    DenseTensor::from_fn(dims, |_| {
        s = s
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    })
    .unwrap()
}
