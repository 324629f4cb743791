mod common;

use common::{lcg_tensor, schnakenberg_config, solve, Dense};
use proptest::prelude::*;
use xdiff::fom::run_fom;
use xdiff::hosvd::{tucker_product, TruncationCriterion};
use xdiff::rom::*;
use xdiff::tensor::{orthonormality_defect, DenseTensor, Matrix};
use xdiff::Error;

fn gauss(w: f64, rho: f64, divide: bool) -> f64 {
    if divide {
        (-(w * w) / (2.0 * rho)).exp()
    } else {
        (-(w * w) * rho / 2.0).exp()
    }
}

#[test]
fn kernel_forms() {
    for (w, rho) in [(0.0, 0.3), (0.1, 0.08), (2.0, 1.0), (1.5, 0.5)] {
        assert_eq!(KernelForm::DivideByWidth.eval(w, rho), gauss(w, rho, true));
        assert_eq!(KernelForm::MultiplyByWidth.eval(w, rho), gauss(w, rho, false));
    }
    assert_eq!(KernelForm::default(), KernelForm::DivideByWidth);
}

#[test]
fn width_is_range_over_count() {
    assert!((kernel_width(&[0.4, 0.5, 0.6, 0.7, 0.8]) - 0.08).abs() < 1e-15);
    assert!((kernel_width(&[23.0, 19.0, 21.0, 20.0, 22.0]) - 0.8).abs() < 1e-15);
}

#[test]
fn fit_matches_dense_solve() {
    let cores: Vec<_> = (0..5).map(|i| lcg_tensor(&[3, 2, 4], 100 + i)).collect();
    for (thetas, kernel, divide) in [
        ([0.4, 0.5, 0.6, 0.7, 0.8], KernelForm::DivideByWidth, true),
        ([19.0, 20.0, 21.0, 22.0, 23.0], KernelForm::DivideByWidth, true),
        ([19.0, 20.0, 21.0, 22.0, 23.0], KernelForm::MultiplyByWidth, false),
    ] {
        let rho = kernel_width(&thetas);
        let gamma = fit_rbf(&cores, &thetas, rho, kernel).unwrap();
        assert_eq!(gamma.dims(), &[3, 2, 4, 5]);
        let mut b = Dense::zeros(5, 5);
        for i in 0..5 {
            for j in 0..5 {
                b.set(i, j, gauss((thetas[i] - thetas[j]).abs(), rho, divide));
            }
        }
        for c in 0..24 {
            let rhs: Vec<f64> = cores.iter().map(|t| t.data()[c]).collect();
            let want = solve(&b, &rhs);
            for (j, w) in want.iter().enumerate() {
                let got = gamma.last_mode_slice(j)[c];
                assert!((got - w).abs() <= 1e-10 * (1.0 + w.abs()), "{got} {w}");
            }
        }
    }
}

#[test]
fn degenerate_spacing_is_reported() {
    let cores: Vec<_> = (0..3).map(|i| lcg_tensor(&[2, 2], i)).collect();
    match fit_rbf(&cores, &[0.0, 1e-9, 1.0], 1.0, KernelForm::DivideByWidth) {
        Err(Error::Numeric(m)) => assert!(m.contains("degenerate parameter spacing")),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        fit_rbf(&cores, &[0.0, 0.0, 1.0], 1.0, KernelForm::DivideByWidth),
        Err(Error::InvalidArgument(_))
    ));
    assert!(fit_rbf(&cores, &[0.0, 0.5, 1.0], 0.0, KernelForm::DivideByWidth).is_err());
}

#[test]
fn global_basis_spans_locals() {
    let snaps: Vec<DenseTensor> = (0..3).map(|i| lcg_tensor(&[9, 8, 7], 40 + i)).collect();
    let pairs: Vec<(f64, &DenseTensor)> = snaps.iter().enumerate().map(|(i, s)| (i as f64, s)).collect();
    let locals = level1_bases(&pairs, 0.3, TruncationCriterion::SingularValueSum, ProcessingOrder::Natural).unwrap();
    let global = level2_global_basis(&locals, 1e-12, TruncationCriterion::SingularValueSum).unwrap();
    for (j, g) in global.iter().enumerate() {
        assert!(orthonormality_defect(g.as_ref()) < 1e-12);
        for l in &locals {
            // residual of projecting each local basis onto the global one
            let f = &l.factors[j];
            let r = f - g * (g.transpose() * f);
            assert!(r.norm_l2() < 1e-8, "mode {j}");
        }
    }
}

#[test]
fn full_basis_projection_round_trips() {
    let t = lcg_tensor(&[4, 5, 3], 9);
    let eye: Vec<Matrix> = t.dims().iter().map(|&n| Matrix::identity(n, n)).collect();
    let core = project_core(&t, &eye).unwrap();
    assert!(core.sub(&t).unwrap().frobenius_norm() < 1e-14);
    assert!(project_core(&t, &eye[..2]).is_err());
}

#[test]
fn rejects_duplicate_or_mismatched_snapshots() {
    let a = lcg_tensor(&[4, 4, 3], 1);
    let b = lcg_tensor(&[4, 5, 3], 2);
    let c = TruncationCriterion::SingularValueSum;
    let o = ProcessingOrder::Natural;
    assert!(level1_bases(&[(0.1, &a), (0.2, &b)], 0.1, c, o).is_err());
    assert!(level1_bases(&[(0.1, &a), (0.1, &a)], 0.1, c, o).is_err());
    assert!(level2_global_basis(&[], 1e-8, c).is_err());
}

fn small_model() -> (RomModel, Vec<xdiff::fom::SnapshotPair>) {
    let cfg = schnakenberg_config(&[9, 8], 0.002, 0.06);
    let snaps: Vec<_> = [0.4, 0.6, 0.5, 0.8, 0.7]
        .iter()
        .map(|&t| run_fom(&cfg, t).unwrap())
        .collect();
    let (model, report) = build_rom(&mut InMemorySource(&snaps), &RomSettings::new(1e-2, 1e-8)).unwrap();
    assert_eq!(report.level1_ranks_u.len(), 5);
    (model, snaps)
}

#[test]
fn predict_reproduces_projected_training_snapshots() {
    let (model, snaps) = small_model();
    assert_eq!(model.thetas, vec![0.4, 0.5, 0.6, 0.7, 0.8]);
    assert!((model.rho - 0.08).abs() < 1e-15);
    for s in &snaps {
        let p = predict(&model, s.theta).unwrap();
        assert!(!p.extrapolated);
        for (species, snap, pred) in [(&model.u, &s.u, &p.u), (&model.v, &s.v, &p.v)] {
            let core = project_core(snap, &species.global_factors).unwrap();
            let proj = tucker_product(&core, &species.global_factors).unwrap();
            let rel = pred.sub(&proj).unwrap().frobenius_norm() / proj.frobenius_norm();
            assert!(rel < 1e-8, "theta {} rel {rel:e}", s.theta);
        }
    }
}

#[test]
fn extrapolation_is_flagged_and_nan_rejected() {
    let (model, _) = small_model();
    assert!(predict(&model, 0.9).unwrap().extrapolated);
    assert!(predict(&model, 0.39).unwrap().extrapolated);
    assert!(!predict(&model, 0.65).unwrap().extrapolated);
    assert!(predict(&model, f64::NAN).is_err());
}

#[test]
fn build_needs_two_thetas() {
    let cfg = schnakenberg_config(&[5, 4], 0.002, 0.01);
    let snaps = vec![run_fom(&cfg, 0.5).unwrap()];
    assert!(build_rom(&mut InMemorySource(&snaps), &RomSettings::new(1e-2, 1e-8)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rbf_interpolates_nodes(
        n in 2usize..=7,
        seed in any::<u64>(),
        gaps in prop::collection::vec(0.08f64..0.2, 7),
        multiply in any::<bool>(),
    ) {
        let mut thetas = vec![0.0];
        // the multiplied form wants spacings of order one
        let scale = if multiply { 8.0 } else { 1.0 };
        for g in gaps.iter().take(n - 1) {
            let last = *thetas.last().unwrap();
            thetas.push(last + scale * g);
        }
        let kernel = if multiply { KernelForm::MultiplyByWidth } else { KernelForm::DivideByWidth };
        let rho = kernel_width(&thetas);
        let cores: Vec<_> = (0..n).map(|i| lcg_tensor(&[3, 2], seed.wrapping_add(i as u64))).collect();
        let gamma = fit_rbf(&cores, &thetas, rho, kernel).unwrap();
        for (i, &th) in thetas.iter().enumerate() {
            let c = rbf_evaluate(&gamma, &thetas, rho, kernel, th).unwrap();
            let rel = c.sub(&cores[i]).unwrap().frobenius_norm() / cores[i].frobenius_norm();
            prop_assert!(rel < 1e-8, "node {} rel {}", i, rel);
        }
    }

    #[test]
    fn interpolation_matrix_is_symmetric_unit_diagonal(
        thetas in prop::collection::vec(-5.0f64..5.0, 1..8),
        rho in 0.01f64..3.0,
    ) {
        let b = interpolation_matrix(&thetas, rho, KernelForm::DivideByWidth);
        for i in 0..thetas.len() {
            prop_assert_eq!(b[(i, i)], 1.0);
            for j in 0..thetas.len() {
                prop_assert_eq!(b[(i, j)], b[(j, i)]);
                prop_assert!((0.0..=1.0).contains(&b[(i, j)]));
            }
        }
    }
}
