//! Offline and online phases of the two-level reduced model on the 2D
//! Schnakenberg benchmark, ending with the accuracy and cost report.
//!
//! ```bash
//! cargo run --release --example rom_pipeline -- [n] [tau1] [energy|sum]
//! ```
//!
//! Defaults are a 51x51 grid, `tau1 = 1e-2` and the energy criterion.
//!
//! Training snapshots are cached under the system temp directory, so a second
//! run skips the full-order solves.

use xdiff::discretize::Grid;
use xdiff::fom::run_fom;
use xdiff::hosvd::TruncationCriterion;
use xdiff::io::{parse_config, DirectorySource};
use xdiff::metrics::{time_avg_relative_error, BenchmarkReport};
use xdiff::rom::{build_rom, predict, RomSettings};

fn main() -> xdiff::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(51, |s| s.parse().expect("grid size"));
    let tau1: f64 = args.next().map_or(1e-2, |s| s.parse().expect("tau1"));
    let criterion = match args.next().as_deref() {
        Some("sum") => TruncationCriterion::SingularValueSum,
        _ => TruncationCriterion::Energy,
    };

    let mut cfg = parse_config("schnakenberg2d")?;
    cfg.grid = Grid::new(cfg.grid.extents().to_vec(), vec![n, n])?;
    cfg.dt = 0.002;
    let thetas = vec![0.4, 0.5, 0.6, 0.7, 0.8];
    let dir = std::env::temp_dir().join(format!("xdiff-snapshots-{n}"));
    let mut source = DirectorySource::new(cfg.clone(), thetas, &dir)?;

    let mut settings = RomSettings::new(tau1, 1e-8);
    settings.criterion = criterion;
    let (model, build) = build_rom(&mut source, &settings)?;
    for (k, th) in model.thetas.iter().enumerate() {
        println!(
            "theta {th}: level-I ranks u {:?}, v {:?}",
            build.level1_ranks_u[k], build.level1_ranks_v[k]
        );
    }

    let theta = 0.65;
    let reference = run_fom(&cfg, theta)?;
    let pred = predict(&model, theta)?;
    let errors = time_avg_relative_error(&reference, (&pred.u, &pred.v))?;
    let report = BenchmarkReport::new(
        &model,
        theta,
        errors,
        reference.fom_seconds,
        pred.seconds,
        Some(build.timings),
    )?;
    println!("\n{report}");
    Ok(())
}
