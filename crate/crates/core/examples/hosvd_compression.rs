//! T-HOSVD against ST-HOSVD on a snapshot tensor: reconstruction error, the
//! two-sided bound, compression and per-stage SVD times.
//!
//! ```bash
//! cargo run --release --example hosvd_compression -- [n] [rank]
//! ```

use xdiff::discretize::Grid;
use xdiff::fom::run_fom;
use xdiff::hosvd::{natural_order, reconstruct, saved_memory, st_hosvd, t_hosvd, TuckerModel};
use xdiff::io::parse_config;
use xdiff::metrics::timing_comparison;

fn summary(name: &str, t: &xdiff::tensor::DenseTensor, m: &TuckerModel) -> xdiff::Result<()> {
    let err = reconstruct(m)?.sub(t)?.frobenius_norm().powi(2);
    let (lo, hi) = m.error_bounds();
    println!(
        "{name}: {lo:.3e} <= {err:.3e} <= {hi:.3e}, saved memory {:.2}%",
        saved_memory(m.compression_factor())
    );
    Ok(())
}

fn main() -> xdiff::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(51, |s| s.parse().expect("grid size"));
    let r: usize = args.next().map_or(20, |s| s.parse().expect("rank"));

    let mut cfg = parse_config("schnakenberg2d")?;
    cfg.grid = Grid::new(cfg.grid.extents().to_vec(), vec![n, n])?;
    cfg.t_final = 1.0;
    let t = run_fom(&cfg, 0.65)?.u;
    println!("tensor dims {:?}, ranks {r}", t.dims());

    let ranks = vec![r; 3];
    summary("T-HOSVD ", &t, &t_hosvd(&t, &ranks)?)?;
    summary("ST-HOSVD", &t, &st_hosvd(&t, &ranks, &natural_order(3))?)?;
    println!("\n{}", timing_comparison(&t, &ranks, &natural_order(3))?);
    Ok(())
}
