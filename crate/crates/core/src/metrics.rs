//! Accuracy, timing and compression reporting.

use std::fmt;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::fom::SnapshotPair;
use crate::hosvd::{compression_factor, saved_memory, st_hosvd_timed, t_hosvd_timed};
use crate::rom::{OfflineTimings, RomModel};
use crate::tensor::{norm, DenseTensor};

/// Mean over time slices (last mode) of `||ref_k - approx_k|| / ||ref_k||`.
pub fn time_avg_relative_error_tensor(reference: &DenseTensor, approx: &DenseTensor) -> Result<f64> {
    if reference.dims() != approx.dims() {
        return Err(Error::invalid(format!(
            "reference dims {:?} differ from approximation dims {:?}",
            reference.dims(),
            approx.dims()
        )));
    }
    let nt = *reference.dims().last().expect("tensor has a time mode");
    let mut acc = 0.0;
    for k in 0..nt {
        let r = reference.last_mode_slice(k);
        let a = approx.last_mode_slice(k);
        let denom = norm(r);
        if denom == 0.0 {
            return Err(Error::numeric(format!(
                "reference slice {k} has zero norm; relative error undefined"
            )));
        }
        let diff: f64 = r.iter().zip(a).map(|(x, y)| (x - y) * (x - y)).sum();
        acc += diff.sqrt() / denom;
    }
    Ok(acc / nt as f64)
}

/// Time-averaged relative errors `(e_u, e_v)` against a full-order run.
pub fn time_avg_relative_error(
    reference: &SnapshotPair,
    approx: (&DenseTensor, &DenseTensor),
) -> Result<(f64, f64)> {
    Ok((
        time_avg_relative_error_tensor(&reference.u, approx.0)?,
        time_avg_relative_error_tensor(&reference.v, approx.1)?,
    ))
}

/// Median of a non-empty list.
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Number of repetitions behind every reported timing.
pub const TIMING_REPETITIONS: usize = 3;

/// Runs `f` `reps` times; returns the last result and the median seconds.
pub fn timed_median<T>(reps: usize, mut f: impl FnMut() -> Result<T>) -> Result<(T, f64)> {
    let reps = reps.max(1);
    let mut times = Vec::with_capacity(reps);
    let mut last = None;
    for _ in 0..reps {
        let start = Instant::now();
        last = Some(f()?);
        times.push(start.elapsed().as_secs_f64());
    }
    Ok((last.expect("at least one repetition"), median(&times)))
}

/// Per-stage SVD seconds of both HOSVD variants.
#[derive(Clone, Debug)]
pub struct TimingComparison {
    /// T-HOSVD, indexed by mode.
    pub t_hosvd: Vec<f64>,
    /// ST-HOSVD, in processing order.
    pub st_hosvd: Vec<f64>,
    pub order: Vec<usize>,
}

impl TimingComparison {
    pub fn t_total(&self) -> f64 {
        self.t_hosvd.iter().sum()
    }

    pub fn st_total(&self) -> f64 {
        self.st_hosvd.iter().sum()
    }

    /// T-HOSVD stage times listed in the same processing order as ST-HOSVD.
    pub fn t_in_order(&self) -> Vec<f64> {
        self.order.iter().map(|&p| self.t_hosvd[p]).collect()
    }
}

impl fmt::Display for TimingComparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>6} {:>6} {:>12} {:>12}", "stage", "mode", "T-HOSVD [s]", "ST-HOSVD [s]")?;
        let t = self.t_in_order();
        for (k, (&p, st)) in self.order.iter().zip(&self.st_hosvd).enumerate() {
            writeln!(f, "{:>6} {:>6} {:>12.4} {:>12.4}", k + 1, p + 1, t[k], st)?;
        }
        write!(
            f,
            "{:>6} {:>6} {:>12.4} {:>12.4}",
            "total",
            "",
            self.t_total(),
            self.st_total()
        )
    }
}

/// Median per-stage SVD times of T-HOSVD and ST-HOSVD over
/// [`TIMING_REPETITIONS`] runs each.
pub fn timing_comparison(t: &DenseTensor, ranks: &[usize], order: &[usize]) -> Result<TimingComparison> {
    let mut t_runs = Vec::new();
    let mut st_runs = Vec::new();
    for _ in 0..TIMING_REPETITIONS {
        t_runs.push(t_hosvd_timed(t, ranks)?.1);
        st_runs.push(st_hosvd_timed(t, ranks, order)?.1);
    }
    let med = |runs: &[Vec<f64>]| -> Vec<f64> {
        (0..runs[0].len())
            .map(|k| median(&runs.iter().map(|r| r[k]).collect::<Vec<_>>()))
            .collect()
    };
    Ok(TimingComparison {
        t_hosvd: med(&t_runs),
        st_hosvd: med(&st_runs),
        order: order.to_vec(),
    })
}

/// Saved memory of a reduced model: the smaller of the two species' values.
pub fn model_saved_memory(model: &RomModel) -> Result<f64> {
    let dims = model.snapshot_dims();
    let su = saved_memory(compression_factor(&dims, &model.u.ranks())?);
    let sv = saved_memory(compression_factor(&dims, &model.v.ranks())?);
    Ok(su.min(sv))
}

/// Accuracy, cost and compression of one reduced model at one parameter.
#[derive(Clone, Debug)]
pub struct BenchmarkReport {
    pub theta: f64,
    pub e_u: f64,
    pub e_v: f64,
    pub global_modes_u: Vec<usize>,
    pub global_modes_v: Vec<usize>,
    pub saved_memory: f64,
    pub fom_seconds: f64,
    pub rom_seconds: f64,
    pub speed_up: f64,
    pub offline: Option<OfflineTimings>,
}

impl BenchmarkReport {
    pub fn new(
        model: &RomModel,
        theta: f64,
        errors: (f64, f64),
        fom_seconds: f64,
        rom_seconds: f64,
        offline: Option<OfflineTimings>,
    ) -> Result<Self> {
        if !(fom_seconds > 0.0 && rom_seconds > 0.0) {
            return Err(Error::numeric(format!(
                "timings must be positive (fom {fom_seconds}, rom {rom_seconds})"
            )));
        }
        Ok(Self {
            theta,
            e_u: errors.0,
            e_v: errors.1,
            global_modes_u: model.u.ranks(),
            global_modes_v: model.v.ranks(),
            saved_memory: model_saved_memory(model)?,
            fom_seconds,
            rom_seconds,
            speed_up: fom_seconds / rom_seconds,
            offline,
        })
    }

    /// `key=value` lines for machine consumption.
    pub fn to_key_values(&self) -> String {
        let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = format!(
            "theta={}\ne_u={:e}\ne_v={:e}\nglobal_modes_u={}\nglobal_modes_v={}\nsaved_memory={}\nfom_seconds={}\nrom_seconds={}\nspeed_up={}\n",
            self.theta,
            self.e_u,
            self.e_v,
            list(&self.global_modes_u),
            list(&self.global_modes_v),
            self.saved_memory,
            self.fom_seconds,
            self.rom_seconds,
            self.speed_up
        );
        if let Some(o) = &self.offline {
            s.push_str(&format!(
                "offline_fom_seconds={}\noffline_level1_seconds={}\noffline_level2_seconds={}\noffline_projection_seconds={}\noffline_rbf_seconds={}\n",
                o.fom, o.level1, o.level2, o.projection, o.rbf
            ));
        }
        s
    }
}

impl fmt::Display for BenchmarkReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        writeln!(f, "theta = {}", self.theta)?;
        writeln!(f)?;
        writeln!(f, "{:<28} {:>12} {:>12}", "", "u", "v")?;
        writeln!(f, "{:<28} {:>12.2e} {:>12.2e}", "time-avg relative error", self.e_u, self.e_v)?;
        writeln!(
            f,
            "{:<28} {:>12} {:>12}",
            "global modes",
            list(&self.global_modes_u),
            list(&self.global_modes_v)
        )?;
        writeln!(f, "{:<28} {:>11.2}%", "saved memory", self.saved_memory)?;
        writeln!(f)?;
        writeln!(f, "{:<28} {:>12.4}", "FOM wall clock [s]", self.fom_seconds)?;
        writeln!(f, "{:<28} {:>12.4}", "ROM wall clock [s]", self.rom_seconds)?;
        write!(f, "{:<28} {:>12.1}", "speed-up", self.speed_up)?;
        if let Some(o) = &self.offline {
            writeln!(f)?;
            writeln!(f)?;
            writeln!(f, "offline phase [s]")?;
            writeln!(f, "  {:<26} {:>12.4}", "FOM runs", o.fom)?;
            writeln!(f, "  {:<26} {:>12.4}", "level I (ST-HOSVD)", o.level1)?;
            writeln!(f, "  {:<26} {:>12.4}", "level II (SVD)", o.level2)?;
            writeln!(f, "  {:<26} {:>12.4}", "core projection", o.projection)?;
            write!(f, "  {:<26} {:>12.4}", "RBF fit", o.rbf)?;
        }
        Ok(())
    }
}
