mod common;

use common::*;
use xdiff::fom::{implicit_solve, imex_step, precompute, run_fom, sylvester_residual};
use xdiff::models::{equilibrium, initial_condition};
use xdiff::tensor::DenseTensor;

fn oracle_trajectory(cfg: &xdiff::fom::SimulationConfig, theta: f64, steps: usize) {
    let resolved = cfg.with_theta(theta).unwrap();
    let pre = precompute(cfg, theta).unwrap();
    let dense = DenseImex::new(&resolved.grid, resolved.diffusion, resolved.dt, resolved.reaction);
    let (mut u, mut v) = initial_condition(&resolved.reaction, &resolved.grid, resolved.seed).unwrap();
    let (mut ou, mut ov) = (u.data().to_vec(), v.data().to_vec());
    for k in 0..steps {
        let (un, vn) = imex_step((&u, &v), &pre, &resolved.reaction).unwrap();
        let (du, dv) = dense.step(&ou, &ov, true);
        let (eu, ev) = (rel_diff(un.data(), &du), rel_diff(vn.data(), &dv));
        assert!(eu < 1e-9 && ev < 1e-9, "step {k}: {eu:e} {ev:e}");
        // both trajectories advance independently
        u = un;
        v = vn;
        ou = du;
        ov = dv;
    }
}

#[test]
fn schnakenberg_5x4_matches_dense_oracle() {
    oracle_trajectory(&schnakenberg_config(&[5, 4], 0.002, 0.02), 0.65, 10);
}

#[test]
fn schnakenberg_6x6_matches_dense_oracle() {
    oracle_trajectory(&schnakenberg_config(&[6, 6], 1e-4, 1e-3), 0.4, 12);
}

#[test]
fn brusselator_4x4x4_matches_dense_oracle() {
    oracle_trajectory(&brusselator_config(&[4, 4, 4], 0.01, 0.1), 21.5, 10);
}

#[test]
fn brusselator_3x5x4_matches_dense_oracle() {
    oracle_trajectory(&brusselator_config(&[3, 5, 4], 0.01, 0.1), 19.0, 10);
}

#[test]
fn pure_diffusion_step_matches_dense_solve() {
    let cfg = schnakenberg_config(&[4, 5], 0.003, 0.003);
    let resolved = cfg.with_theta(0.7).unwrap();
    let pre = precompute(&cfg, 0.7).unwrap();
    let dense = DenseImex::new(&resolved.grid, resolved.diffusion, resolved.dt, resolved.reaction);
    let u = lcg_tensor(&[4, 5], 1);
    let v = lcg_tensor(&[4, 5], 2);
    let (un, vn) = implicit_solve(&u, &v, &pre).unwrap();
    let (du, dv) = dense.step(u.data(), v.data(), false);
    assert!(rel_diff(un.data(), &du) < 1e-10);
    assert!(rel_diff(vn.data(), &dv) < 1e-10);
}

#[test]
fn residual_small_every_step() {
    for (cfg, theta) in [
        (schnakenberg_config(&[21, 21], 0.002, 0.4), 0.6),
        (brusselator_config(&[7, 6, 5], 0.02, 2.0), 20.0),
    ] {
        let resolved = cfg.with_theta(theta).unwrap();
        let pre = precompute(&cfg, theta).unwrap();
        let (mut u, mut v) =
            initial_condition(&resolved.reaction, &resolved.grid, resolved.seed).unwrap();
        for k in 0..resolved.num_steps() {
            let (un, vn) = imex_step((&u, &v), &pre, &resolved.reaction).unwrap();
            let (ru, rv) = sylvester_residual(&pre, &resolved.reaction, (&u, &v), (&un, &vn)).unwrap();
            assert!(ru < 1e-9 && rv < 1e-9, "step {k}: {ru:e} {rv:e}");
            u = un;
            v = vn;
        }
    }
}

#[test]
fn equilibrium_preserved_in_3d() {
    let cfg = brusselator_config(&[5, 4, 3], 0.02, 1.0);
    let pre = precompute(&cfg, 21.0).unwrap();
    let eq = equilibrium(&cfg.reaction).unwrap();
    let mut u = DenseTensor::full(&[5, 4, 3], eq.u_e).unwrap();
    let mut v = DenseTensor::full(&[5, 4, 3], eq.v_e).unwrap();
    for _ in 0..1000 {
        let (un, vn) = imex_step((&u, &v), &pre, &cfg.reaction).unwrap();
        assert!(un.sub(&u).unwrap().data().iter().all(|x| x.abs() < 1e-12));
        assert!(vn.sub(&v).unwrap().data().iter().all(|x| x.abs() < 1e-12));
        u = un;
        v = vn;
    }
}

#[test]
fn runs_are_bit_identical() {
    let cfg = brusselator_config(&[5, 4, 3], 0.02, 0.4);
    let a = run_fom(&cfg, 20.0).unwrap();
    let b = run_fom(&cfg, 20.0).unwrap();
    assert_eq!(a.u, b.u);
    assert_eq!(a.v, b.v);
    assert_eq!(a.times, b.times);
    assert_eq!(a.config_digest, b.config_digest);
    assert_eq!(a.u.dims(), &[5, 4, 3, 21]);
    assert!(a.times.windows(2).all(|w| (w[1] - w[0] - 0.02).abs() < 1e-12));
}

#[test]
fn bundled_schnakenberg_snapshot_dims() {
    let cfg = xdiff::io::parse_config("schnakenberg2d").unwrap();
    let s = run_fom(&cfg, 0.65).unwrap();
    assert_eq!(s.u.dims(), &[101, 101, 5001]);
    assert_eq!(s.v.dims(), &[101, 101, 5001]);
    assert_eq!(s.times.len(), 5001);
}

#[test]
fn bundled_brusselator_snapshot_dims() {
    let cfg = xdiff::io::parse_config("brusselator3d").unwrap();
    let s = run_fom(&cfg, 21.5).unwrap();
    assert_eq!(s.u.dims(), &[31, 31, 31, 1001]);
    assert_eq!(s.times.len(), 1001);
}
