//! Full-order Brusselator run on a 3D cube, with the step residual checked
//! along the way.
//!
//! ```bash
//! cargo run --release --example fom_brusselator3d -- [n] [theta]
//! ```

use xdiff::discretize::Grid;
use xdiff::fom::{imex_step, precompute, sylvester_residual};
use xdiff::io::parse_config;
use xdiff::models::{equilibrium, initial_condition};

fn main() -> xdiff::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(21, |s| s.parse().expect("grid size"));
    let theta: f64 = args.next().map_or(21.5, |s| s.parse().expect("theta"));

    let mut cfg = parse_config("brusselator3d")?;
    cfg.grid = Grid::new(cfg.grid.extents().to_vec(), vec![n; 3])?;
    cfg.dt = 0.02;
    let resolved = cfg.with_theta(theta)?;
    let pre = precompute(&cfg, theta)?;
    let eq = equilibrium(&resolved.reaction)?;
    println!("equilibrium (u, v) = ({}, {})", eq.u_e, eq.v_e);

    let (mut u, mut v) = initial_condition(&resolved.reaction, &resolved.grid, resolved.seed)?;
    let mut worst: f64 = 0.0;
    for k in 1..=resolved.num_steps() {
        let (un, vn) = imex_step((&u, &v), &pre, &resolved.reaction)?;
        let (ru, rv) = sylvester_residual(&pre, &resolved.reaction, (&u, &v), (&un, &vn))?;
        worst = worst.max(ru).max(rv);
        (u, v) = (un, vn);
        if k % 100 == 0 {
            let spread = u.data().iter().map(|x| (x - eq.u_e).abs()).fold(0.0, f64::max);
            println!("t = {:>6.2}: max |u - u_e| = {spread:.3e}", k as f64 * resolved.dt);
        }
    }
    println!("largest relative step residual {worst:.2e}");
    Ok(())
}
