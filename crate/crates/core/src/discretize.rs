//! Finite-difference Neumann Laplacians, their spectral factors, and grids.

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, Matrix};

/// Uniform tensor-product grid on a rectangle or a rectangular prism.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    extents: Vec<f64>,
    counts: Vec<usize>,
    spacings: Vec<f64>,
}

impl Grid {
    pub fn new(extents: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        if extents.len() != counts.len() {
            return Err(Error::invalid(format!(
                "{} extents for {} node counts",
                extents.len(),
                counts.len()
            )));
        }
        if !(2..=3).contains(&counts.len()) {
            return Err(Error::invalid(format!(
                "grids are 2D or 3D, got {} axes",
                counts.len()
            )));
        }
        if let Some(n) = counts.iter().find(|&&n| n < 3) {
            return Err(Error::invalid(format!("node count {n} < 3")));
        }
        if let Some(l) = extents.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::invalid(format!("domain extent {l} must be positive")));
        }
        let spacings = extents
            .iter()
            .zip(&counts)
            .map(|(l, &n)| l / (n - 1) as f64)
            .collect();
        Ok(Self {
            extents,
            counts,
            spacings,
        })
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn spacings(&self) -> &[f64] {
        &self.spacings
    }

    /// Spatial dimension (2 or 3).
    pub fn ndim(&self) -> usize {
        self.counts.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.counts.iter().product()
    }
}

/// Node coordinates along every axis, `(i - 1) * h` for `i = 1..=n`.
pub fn grid_nodes(g: &Grid) -> Vec<DenseTensor> {
    g.counts
        .iter()
        .zip(&g.spacings)
        .map(|(&n, &h)| {
            DenseTensor::new(vec![n], (0..n).map(|i| i as f64 * h).collect())
                .expect("grid counts are validated")
        })
        .collect()
}

/// Centered second-difference matrix with homogeneous Neumann rows,
/// scaled by `1/h^2`, `h = length / (n - 1)`.
pub fn laplacian_1d(n: usize, length: f64) -> Result<Matrix> {
    if n < 3 {
        return Err(Error::invalid(format!("Laplacian needs n >= 3, got {n}")));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::invalid(format!("length {length} must be positive")));
    }
    let h = length / (n - 1) as f64;
    let s = 1.0 / (h * h);
    let mut t = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        t[(i, i)] = -2.0 * s;
    }
    t[(0, 1)] = 2.0 * s;
    t[(n - 1, n - 2)] = 2.0 * s;
    for i in 1..n - 1 {
        t[(i, i - 1)] = s;
        t[(i, i + 1)] = s;
    }
    Ok(t)
}

/// Eigendecomposition `T = X diag(lambda) X^-1` of a real-diagonalizable operator.
#[derive(Clone, Debug)]
pub struct SpectralFactors {
    pub vectors: Matrix,
    pub vectors_inv: Matrix,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
}

impl SpectralFactors {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `X diag(lambda) X^-1`.
    pub fn reconstruct(&self) -> Matrix {
        let mut xl = self.vectors.clone();
        for (j, l) in self.eigenvalues.iter().enumerate() {
            for v in xl.col_mut(j).iter_mut() {
                *v *= l;
            }
        }
        &xl * &self.vectors_inv
    }
}

const RESIDUAL_TOL: f64 = 1e-10;

/// General real eigendecomposition with eigenvalues sorted ascending.
///
/// Fails when an eigenvalue has a non-negligible imaginary part or when the
/// reconstruction residual exceeds `1e-10` relative.
pub fn eig_decompose(t: MatRef<'_, f64>) -> Result<SpectralFactors> {
    let n = t.nrows();
    if n == 0 || t.ncols() != n {
        return Err(Error::invalid(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            t.nrows(),
            t.ncols()
        )));
    }
    let scale = t.norm_l2().max(f64::MIN_POSITIVE);
    let evd = t
        .eigen()
        .map_err(|e| Error::numeric(format!("eigensolver failed on {n}x{n}: {e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    for i in 0..n {
        let im = s[i].im;
        if im.abs() > 1e-8 * scale {
            return Err(Error::numeric(format!(
                "operator not real-diagonalizable: eigenvalue {} has imaginary part {im:e}",
                s[i].re
            )));
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].re.total_cmp(&s[b].re));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| s[k].re).collect();

    // A real eigenvalue's complex eigenvector is a real vector times a phase;
    // rotate by the phase of its largest entry and keep the real part.
    let mut vectors = Mat::<f64>::zeros(n, n);
    for (j, &k) in order.iter().enumerate() {
        let col = u.col(k);
        let mut pivot = col[0];
        for i in 1..n {
            if col[i].norm() > pivot.norm() {
                pivot = col[i];
            }
        }
        let mag = pivot.norm();
        let (c, sn) = if mag > 0.0 {
            (pivot.re / mag, -pivot.im / mag)
        } else {
            (1.0, 0.0)
        };
        let mut nrm = 0.0;
        for i in 0..n {
            let z = col[i];
            let re = z.re * c - z.im * sn;
            vectors[(i, j)] = re;
            nrm += re * re;
        }
        let nrm = nrm.sqrt();
        if nrm > 0.0 {
            for v in vectors.col_mut(j).iter_mut() {
                *v /= nrm;
            }
        }
    }
    let vectors_inv = vectors.partial_piv_lu().inverse();
    let factors = SpectralFactors {
        vectors,
        vectors_inv,
        eigenvalues,
    };
    let residual = (&factors.reconstruct() - t).norm_l2() / scale;
    if !(residual < RESIDUAL_TOL) {
        return Err(Error::numeric(format!(
            "eigendecomposition residual {residual:e} exceeds {RESIDUAL_TOL:e}"
        )));
    }
    Ok(factors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn entries(m: &Matrix) -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect()
    }

    #[test]
    fn laplacian_stencil() {
        let t = laplacian_1d(3, 2.0).unwrap();
        assert_eq!(
            entries(&t),
            vec![vec![-2., 2., 0.], vec![1., -2., 1.], vec![0., 2., -2.]]
        );
        let t = laplacian_1d(3, 1.0).unwrap();
        assert_eq!(
            entries(&t),
            vec![vec![-8., 8., 0.], vec![4., -8., 4.], vec![0., 8., -8.]]
        );
    }

    #[test]
    fn laplacian_rejects_bad_input() {
        assert!(laplacian_1d(2, 1.0).is_err());
        assert!(laplacian_1d(5, 0.0).is_err());
        assert!(laplacian_1d(5, -1.0).is_err());
    }

    #[test]
    fn laplacian_row_sums_vanish() {
        for &l in &[0.5, 1.0, 20.0] {
            for n in 3..=200 {
                let t = laplacian_1d(n, l).unwrap();
                for i in 0..n {
                    let s: f64 = (0..n).map(|j| t[(i, j)]).sum();
                    assert_eq!(s, 0.0, "n={n} l={l} row {i}");
                }
            }
        }
    }

    #[test]
    fn eig_two_by_two() {
        let t = Mat::from_fn(2, 2, |i, j| [[-2., 2.], [2., -2.]][i][j]);
        let f = eig_decompose(t.as_ref()).unwrap();
        assert!((f.eigenvalues[0] + 4.0).abs() < 1e-12);
        assert!(f.eigenvalues[1].abs() < 1e-12);
        let v0 = f.vectors.col(0);
        let v1 = f.vectors.col(1);
        assert!((v0[0] + v0[1]).abs() < 1e-12);
        assert!((v1[0] - v1[1]).abs() < 1e-12);
    }

    #[test]
    fn eig_diagonal() {
        let t = Mat::from_fn(3, 3, |i, j| if i == j { (3 - i) as f64 } else { 0.0 });
        let f = eig_decompose(t.as_ref()).unwrap();
        assert_eq!(f.eigenvalues.len(), 3);
        for (k, l) in f.eigenvalues.iter().enumerate() {
            assert!((l - (k + 1) as f64).abs() < 1e-12);
        }
        // column k of X is e_{2-k} up to scaling
        for k in 0..3 {
            for i in 0..3 {
                if i != 2 - k {
                    assert!(f.vectors[(i, k)].abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn eig_rejects_rotation() {
        let t = Mat::from_fn(2, 2, |i, j| [[0., -1.], [1., 0.]][i][j]);
        assert!(matches!(eig_decompose(t.as_ref()), Err(Error::Numeric(_))));
    }

    #[test]
    fn neumann_spectrum_matches_cosine_formula() {
        let n = 101;
        let l = 0.5;
        let h = l / (n - 1) as f64;
        let t = laplacian_1d(n, l).unwrap();
        let f = eig_decompose(t.as_ref()).unwrap();
        let mut analytic: Vec<f64> = (0..n)
            .map(|k| (2.0 * (k as f64 * PI / (n - 1) as f64).cos() - 2.0) / (h * h))
            .collect();
        analytic.sort_by(f64::total_cmp);
        let scale = 4.0 / (h * h);
        for (a, b) in f.eigenvalues.iter().zip(&analytic) {
            assert!((a - b).abs() <= 1e-6 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn spectral_factor_invariants() {
        for &(n, l) in &[(3, 1.0), (21, 20.0), (51, 0.5), (101, 0.5)] {
            let t = laplacian_1d(n, l).unwrap();
            let f = eig_decompose(t.as_ref()).unwrap();
            let h = l / (n - 1) as f64;
            let res = (&f.reconstruct() - &t).norm_l2() / t.norm_l2();
            assert!(res < 1e-10);
            let id = &f.vectors * &f.vectors_inv;
            let mut worst = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    let e = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((id[(i, j)] - e).abs());
                }
            }
            assert!(worst < 1e-8 * n as f64);
            let near_zero = f
                .eigenvalues
                .iter()
                .filter(|l| l.abs() < 1e-8 / (h * h))
                .count();
            assert_eq!(near_zero, 1);
            assert!(f.eigenvalues.iter().all(|&l| l <= 1e-8));
        }
    }

    #[test]
    fn grid_coordinates() {
        let g = Grid::new(vec![1.0], vec![3]);
        assert!(g.is_err(), "1D grids are not supported");
        let g = Grid::new(vec![1.0, 1.0], vec![3, 3]).unwrap();
        assert_eq!(grid_nodes(&g)[0].data(), &[0.0, 0.5, 1.0]);
        let g = Grid::new(vec![0.5, 0.5], vec![101, 101]).unwrap();
        let x = &grid_nodes(&g)[0];
        assert!((x.data()[1] - x.data()[0] - 0.005).abs() < 1e-15);
        let g = Grid::new(vec![20.0; 3], vec![31; 3]).unwrap();
        assert!((g.spacings()[2] - 0.6667).abs() < 1e-4);
        assert!(Grid::new(vec![1.0, 1.0], vec![2, 3]).is_err());
    }
}
