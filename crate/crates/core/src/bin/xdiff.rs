use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use xdiff::fom::run_fom;
use xdiff::hosvd::TruncationCriterion;
use xdiff::io::{
    load_rom, load_snapshots, load_tensor, parse_config, save_rom, save_snapshots, save_tensor,
    DirectorySource, TensorMeta,
};
use xdiff::metrics::{
    time_avg_relative_error, timed_median, timing_comparison,
    BenchmarkReport, TIMING_REPETITIONS,
};
use xdiff::rom::{build_rom, predict, KernelForm, ProcessingOrder, RomSettings};
use xdiff::{Error, Result};

#[derive(Parser)]
#[command(name = "xdiff", version, about = "Cross-diffusion full-order and reduced-order models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full-order model and write both species as tensor files.
    Fom {
        /// TOML file, or the name of a bundled config.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long)]
        out_u: PathBuf,
        #[arg(long)]
        out_v: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build or evaluate a reduced model.
    Rom {
        #[command(subcommand)]
        command: RomCommand,
    },
    /// Time-averaged relative errors of an approximation.
    Compare {
        #[arg(long)]
        ref_u: PathBuf,
        #[arg(long)]
        ref_v: PathBuf,
        #[arg(long)]
        approx_u: PathBuf,
        #[arg(long)]
        approx_v: PathBuf,
    },
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
    /// Full-order reference run, prediction, errors, timings and compression.
    Report {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long)]
        config: PathBuf,
        /// Repetitions behind each timing (median is reported).
        #[arg(long, default_value_t = TIMING_REPETITIONS)]
        reps: usize,
        /// Also write the report as key=value lines.
        #[arg(long)]
        kv: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum RomCommand {
    /// Run or reuse training snapshots, then fit the reduced model.
    Build {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated training parameters.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        thetas: Vec<f64>,
        #[arg(long)]
        snapshot_dir: PathBuf,
        #[arg(long)]
        tau1: f64,
        #[arg(long)]
        tau2: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = CriterionArg::Sum)]
        criterion: CriterionArg,
        #[arg(long, value_enum, default_value_t = KernelArg::Divide)]
        kernel: KernelArg,
        #[arg(long, value_enum, default_value_t = OrderArg::Natural)]
        order: OrderArg,
    },
    /// Evaluate a reduced model at one parameter value.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long)]
        out_u: PathBuf,
        #[arg(long)]
        out_v: PathBuf,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Per-stage SVD times of T-HOSVD and ST-HOSVD.
    Hosvd {
        #[arg(long)]
        input: PathBuf,
        /// One rank per mode, or a single rank for every mode.
        #[arg(long, value_delimiter = ',')]
        ranks: Vec<usize>,
        /// 1-based processing order for ST-HOSVD; defaults to 1,2,...
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<usize>>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    /// Sums of singular values.
    Sum,
    /// Sums of squared singular values.
    Energy,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    /// exp(-w^2 / (2 rho))
    Divide,
    /// exp(-w^2 rho / 2)
    Multiply,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    Natural,
    Ascending,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("xdiff: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Fom {
            config,
            theta,
            out_u,
            out_v,
            seed,
        } => {
            let mut cfg = parse_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let snap = run_fom(&cfg, theta)?;
            save_snapshots(&snap, &out_u, &out_v)?;
            println!("dims = {:?}", snap.u.dims());
            println!("fom_seconds = {:.6}", snap.fom_seconds);
        }
        Command::Rom { command } => match command {
            RomCommand::Build {
                config,
                thetas,
                snapshot_dir,
                tau1,
                tau2,
                out,
                criterion,
                kernel,
                order,
            } => {
                let cfg = parse_config(&config)?;
                let mut source = DirectorySource::new(cfg, thetas, snapshot_dir)?;
                let settings = RomSettings {
                    tau1,
                    tau2,
                    criterion: match criterion {
                        CriterionArg::Sum => TruncationCriterion::SingularValueSum,
                        CriterionArg::Energy => TruncationCriterion::Energy,
                    },
                    kernel: match kernel {
                        KernelArg::Divide => KernelForm::DivideByWidth,
                        KernelArg::Multiply => KernelForm::MultiplyByWidth,
                    },
                    order: match order {
                        OrderArg::Natural => ProcessingOrder::Natural,
                        OrderArg::Ascending => ProcessingOrder::AscendingSize,
                    },
                };
                let (model, report) = build_rom(&mut source, &settings)?;
                save_rom(&out, &model)?;
                for (k, th) in model.thetas.iter().enumerate() {
                    println!(
                        "theta = {th}: level-I ranks u {:?} v {:?}",
                        report.level1_ranks_u[k], report.level1_ranks_v[k]
                    );
                }
                println!("global modes u = {:?}", model.u.ranks());
                println!("global modes v = {:?}", model.v.ranks());
                println!("rho = {}", model.rho);
                let t = report.timings;
                println!(
                    "offline seconds: fom {:.3}, level I {:.3}, level II {:.3}, projection {:.3}, rbf {:.3}",
                    t.fom, t.level1, t.level2, t.projection, t.rbf
                );
            }
            RomCommand::Predict {
                model,
                theta,
                out_u,
                out_v,
            } => {
                let m = load_rom(&model, None)?;
                let p = predict(&m, theta)?;
                if p.extrapolated {
                    eprintln!(
                        "xdiff: warning: theta {theta} lies outside the training interval [{}, {}]",
                        m.thetas[0],
                        m.thetas[m.thetas.len() - 1]
                    );
                }
                for (path, t, species) in [(&out_u, &p.u, "u"), (&out_v, &p.v, "v")] {
                    let meta = TensorMeta {
                        theta: Some(theta),
                        config_digest: Some(m.config_digest.clone()),
                        species: Some(species.into()),
                        dt: None,
                    };
                    save_tensor(path, t, &meta)?;
                }
                println!("dims = {:?}", p.u.dims());
                println!("rom_seconds = {:.6}", p.seconds);
                println!("extrapolated = {}", p.extrapolated);
            }
        },
        Command::Compare {
            ref_u,
            ref_v,
            approx_u,
            approx_v,
        } => {
            let reference = load_snapshots(&ref_u, &ref_v)?;
            let (au, _) = load_tensor(&approx_u)?;
            let (av, _) = load_tensor(&approx_v)?;
            let (eu, ev) = time_avg_relative_error(&reference, (&au, &av))?;
            println!("e_u = {eu:e}");
            println!("e_v = {ev:e}");
        }
        Command::Bench {
            command: BenchCommand::Hosvd { input, ranks, order },
        } => {
            let (t, _) = load_tensor(&input)?;
            let ranks = match ranks.as_slice() {
                [r] => vec![*r; t.order()],
                _ => ranks,
            };
            let order = match order {
                Some(o) => o
                    .into_iter()
                    .map(|p| {
                        p.checked_sub(1)
                            .ok_or_else(|| Error::InvalidArgument("order entries are 1-based".into()))
                    })
                    .collect::<Result<Vec<_>>>()?,
                None => (0..t.order()).collect(),
            };
            let c = timing_comparison(&t, &ranks, &order)?;
            println!("{c}");
        }
        Command::Report {
            model,
            theta,
            config,
            reps,
            kv,
        } => {
            let cfg = parse_config(&config)?;
            let m = load_rom(&model, Some(&cfg))?;
            let mut fom_times = Vec::new();
            let (reference, _) = timed_median(reps, || {
                let s = run_fom(&cfg, theta)?;
                fom_times.push(s.fom_seconds);
                Ok(s)
            })?;
            let fom_seconds = xdiff::metrics::median(&fom_times);
            let mut rom_times = Vec::new();
            let (pred, _) = timed_median(reps, || {
                let p = predict(&m, theta)?;
                rom_times.push(p.seconds);
                Ok(p)
            })?;
            let rom_seconds = xdiff::metrics::median(&rom_times);
            let errors = time_avg_relative_error(&reference, (&pred.u, &pred.v))?;
            let report = BenchmarkReport::new(&m, theta, errors, fom_seconds, rom_seconds, None)?;
            println!("{report}");
            if let Some(path) = kv {
                std::fs::write(path, report.to_key_values())?;
            }
        }
    }
    Ok(())
}
