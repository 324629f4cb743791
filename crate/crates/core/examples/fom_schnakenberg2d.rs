//! Full-order Schnakenberg run on the bundled 2D config.
//!
//! ```bash
//! cargo run --release --example fom_schnakenberg2d -- [n] [theta]
//! ```
//!
//! `n` coarsens the 101x101 grid (default 51), `theta` is the cross-diffusion
//! coefficient `d_uv` (default 0.65).

use xdiff::discretize::Grid;
use xdiff::fom::run_fom;
use xdiff::io::parse_config;

fn main() -> xdiff::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(51, |s| s.parse().expect("grid size"));
    let theta: f64 = args.next().map_or(0.65, |s| s.parse().expect("theta"));

    let mut cfg = parse_config("schnakenberg2d")?;
    cfg.grid = Grid::new(cfg.grid.extents().to_vec(), vec![n, n])?;
    cfg.dt = 0.002;

    let snap = run_fom(&cfg, theta)?;
    println!("snapshot dims {:?}, {:.3} s", snap.u.dims(), snap.fom_seconds);
    for k in [0, snap.num_times() / 10, snap.num_times() - 1] {
        let u = snap.u.last_mode_slice(k);
        let (lo, hi) = u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        println!("t = {:>5.2}: u in [{lo:.4}, {hi:.4}]", snap.times[k]);
    }
    Ok(())
}
