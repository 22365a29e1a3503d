//! The `simulate`, `ensemble` and `reproduce` commands.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use spinfilter::config::{Model, SimConfig, StateSpec};
use spinfilter::ensemble::{self, EnsembleOptions, EnsembleStats};
use spinfilter::sde::{self, step_count, IntegratorConfig, Projection};
use spinfilter::{Controller, Metric, PhysicalParams};

use crate::output::{trajectory_table, write_file, Table};
use crate::{CliError, CliResult};

/// Command-line overrides applied on top of a configuration file.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut SimConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(dt) = self.dt {
            cfg.integrator.dt = dt;
        }
        if let Some(t) = self.t_final {
            cfg.integrator.t_final = t;
        }
    }
}

/// Reads and validates a configuration file, or the defaults without one.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> CliResult<SimConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| CliError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            SimConfig::parse(&text)?
        }
        None => SimConfig::default(),
    };
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &SimConfig, out: Option<&Path>) -> PathBuf {
    out.map_or_else(|| cfg.output.dir.clone(), Path::to_path_buf)
}

/// One trajectory to `trajectory.csv`, plus the effective configuration.
pub fn simulate(cfg: &SimConfig, out: Option<&Path>) -> CliResult<String> {
    let dir = out_dir(cfg, out);
    let traj = sde::simulate(cfg)?;
    let system = cfg.system()?;
    let table = trajectory_table(&traj, &cfg.output.metrics, &system.ops, cfg.target())?;
    let csv = write_file(&dir, "trajectory.csv", &table.to_csv())?;
    write_file(&dir, "config.txt", &cfg.serialize())?;
    let mut report = format!(
        "simulated {} steps (dt = {}, T = {}, seed = {}), {} records\nwrote {}\n",
        cfg.integrator.steps(),
        cfg.integrator.dt,
        cfg.integrator.t_final,
        cfg.seed,
        traj.len(),
        csv.display()
    );
    for (h, c) in table.headers.iter().zip(&table.columns).skip(3) {
        let _ = writeln!(report, "  final {h} = {}", c.last().copied().unwrap_or(f64::NAN));
    }
    Ok(report)
}

/// Ensemble statistics to `ensemble.csv` and a text report to `report.txt`.
pub fn run_ensemble(cfg: &SimConfig, n_traj: usize, out: Option<&Path>) -> CliResult<String> {
    let dir = out_dir(cfg, out);
    let stats = ensemble::run_ensemble(cfg, &EnsembleOptions::new(n_traj, cfg.seed, &cfg.output.metrics))?;
    let csv = write_file(&dir, "ensemble.csv", &stats.to_csv())?;
    let report = ensemble_report(cfg, &stats)?;
    write_file(&dir, "report.txt", &report)?;
    write_file(&dir, "config.txt", &cfg.serialize())?;
    Ok(format!("{report}wrote {}\n", csv.display()))
}

fn ensemble_report(cfg: &SimConfig, stats: &EnsembleStats) -> CliResult<String> {
    let mut r = String::new();
    let _ = writeln!(
        r,
        "ensemble: {} requested, {} completed, {} diverged; trajectory i uses seed {} + i",
        stats.n_traj,
        stats.completed(),
        stats.diverged.len(),
        cfg.seed
    );
    for d in &stats.diverged {
        let _ = writeln!(r, "  diverged seed {}: {}", d.seed, d.error);
    }
    let converged = stats.terminal.iter().filter(|c| c.converged()).count();
    let mut hits = vec![0usize; cfg.dim()];
    for c in &stats.terminal {
        hits[c.nearest] += 1;
    }
    let _ = writeln!(
        r,
        "terminal: {converged} of {} within fidelity 0.99 of an eigenstate and of the estimate; nearest eigenstate counts {hits:?}",
        stats.completed()
    );
    for s in &stats.metrics {
        let last = s.mean.len() - 1;
        let _ = write!(
            r,
            "{}: initial mean {:.6}, final mean {:.6} (q05 {:.6}, q95 {:.6})",
            s.metric,
            s.mean[0],
            s.mean[last],
            s.q05[last],
            s.q95[last]
        );
        match ensemble::fit_rate(&stats.times, &s.mean, None) {
            Ok(f) => {
                let _ = writeln!(
                    r,
                    ", log-slope of mean {:.4} on [{:.2}, {:.2}]",
                    f.slope, f.window.0, f.window.1
                );
            }
            Err(e) => {
                let _ = writeln!(r, ", no rate fit ({e})");
            }
        }
    }
    if let Some(paths) = stats.samples(Metric::Fidelity) {
        match ensemble::submartingale_test(&stats.times, paths) {
            Ok(rep) => {
                let _ = writeln!(
                    r,
                    "sub-martingale check on fidelity: {} violations beyond 3 SE{}",
                    rep.violations.len(),
                    rep.worst_z.map_or(String::new(), |z| format!(", min z {z:.2}"))
                );
                for v in &rep.violations {
                    let _ = writeln!(r, "  t = {}: mean {:.6}, z = {:.2}", v.t, v.value, v.z);
                }
            }
            Err(e) => {
                let _ = writeln!(r, "sub-martingale check skipped: {e}");
            }
        }
    }
    Ok(r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
        }
    }
}

/// Target spacing of recorded points in figure outputs.
const FIGURE_RECORD_INTERVAL: f64 = 0.01;

/// Largest stride not above `interval / dt` that divides the step count.
pub fn record_stride(dt: f64, t_final: f64, interval: f64) -> usize {
    let steps = step_count(dt, t_final).max(1);
    let mut stride = ((interval / dt).round() as usize).clamp(1, steps);
    while !steps.is_multiple_of(stride) {
        stride -= 1;
    }
    stride
}

/// Settings of each figure: spin-1/2 with constant drive from
/// `(excited, ground)` for figures 1 and 2; spin-1 with the population law
/// (figure 3) or the expectation law (figure 4).
pub fn figure_config(fig: Figure) -> SimConfig {
    let spin_half = SimConfig {
        params: PhysicalParams {
            omega: 0.3,
            eta: 0.3,
            m: 1.0,
        },
        controller: Controller::Constant(1.0),
        initial_rho: StateSpec::Basis(1),
        initial_rho_hat: StateSpec::Basis(0),
        integrator: IntegratorConfig {
            dt: 1e-3,
            t_final: 30.0,
            projection: Projection::Physical,
            record_stride: 10,
        },
        ..SimConfig::default()
    };
    let spin_one = SimConfig {
        model: Model::SpinJ { dim: 3 },
        integrator: IntegratorConfig {
            t_final: 20.0,
            ..spin_half.integrator
        },
        ..spin_half.clone()
    };
    match fig {
        Figure::Fig1 => SimConfig {
            output: spinfilter::config::OutputSpec {
                metrics: vec![Metric::Fidelity],
                ..Default::default()
            },
            ..spin_half
        },
        Figure::Fig2 => spin_half,
        Figure::Fig3 => SimConfig {
            controller: Controller::Population {
                target: 0,
                alpha: 5.0,
                beta: 2.0,
            },
            initial_rho: StateSpec::Basis(2),
            initial_rho_hat: StateSpec::Basis(1),
            ..spin_one
        },
        Figure::Fig4 => SimConfig {
            controller: Controller::Expectation {
                target: 1,
                alpha: 2.0,
                beta: 2.0,
            },
            initial_rho: StateSpec::Diag(vec![0.2, 0.2, 0.6]),
            initial_rho_hat: StateSpec::Diag(vec![0.8, 0.1, 0.1]),
            ..spin_one
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReproduceOptions {
    pub n_traj: usize,
    pub overrides: Overrides,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        Self {
            n_traj: 10,
            overrides: Overrides::default(),
        }
    }
}

/// Writes `<fig>.csv`, `<fig>_seeds.csv` and `<fig>_config.txt` into `out`.
pub fn reproduce(fig: Figure, opts: &ReproduceOptions, out: &Path) -> CliResult<Vec<PathBuf>> {
    let mut cfg = figure_config(fig);
    opts.overrides.apply(&mut cfg);
    cfg.integrator.record_stride = record_stride(cfg.integrator.dt, cfg.integrator.t_final, FIGURE_RECORD_INTERVAL);
    cfg.validate()?;
    if opts.n_traj == 0 {
        return Err(CliError::Validation("--n-traj must be at least 1".into()));
    }

    let name = fig.name();
    let table = match fig {
        Figure::Fig1 => sample_table(&cfg, opts.n_traj, &[Metric::Fidelity], &[], true)?,
        Figure::Fig2 => bloch_table(&cfg)?,
        Figure::Fig3 => {
            let em = cfg.params.eta * cfg.params.m;
            sample_table(&cfg, opts.n_traj, &[Metric::V0, Metric::BuresCoupled], &[-em, -em / 2.0], false)?
        }
        Figure::Fig4 => {
            let em = cfg.params.eta * cfg.params.m;
            sample_table(&cfg, opts.n_traj, &[Metric::V1], &[-em / 2.0], false)?
        }
    };
    let n_seeds = if fig == Figure::Fig2 { 1 } else { opts.n_traj };
    let mut seeds = String::from("sample,seed\n");
    for i in 0..n_seeds {
        let _ = writeln!(seeds, "{},{}", i + 1, cfg.seed.wrapping_add(i as u64));
    }
    Ok(vec![
        write_file(out, &format!("{name}.csv"), &table.to_csv())?,
        write_file(out, &format!("{name}_seeds.csv"), &seeds)?,
        write_file(out, &format!("{name}_config.txt"), &cfg.serialize())?,
    ])
}

/// Name of the reference column `exp(rate t)`.
pub fn reference_column(rate: f64) -> String {
    format!("exp({rate}t)")
}

fn sample_table(cfg: &SimConfig, n: usize, metrics: &[Metric], rates: &[f64], bare: bool) -> CliResult<Table> {
    let stats = ensemble::run_ensemble(cfg, &EnsembleOptions::new(n, cfg.seed, metrics))?;
    if !stats.diverged.is_empty() {
        return Err(CliError::Divergence(format!(
            "{} of {n} samples diverged (first: {})",
            stats.diverged.len(),
            stats.diverged[0].error
        )));
    }
    let mut table = Table::default();
    table.push("t", stats.times.clone());
    for &m in metrics {
        let prefix = if bare { String::new() } else { format!("{}_", m.name()) };
        for (i, s) in stats.samples(m).unwrap().iter().enumerate() {
            table.push(format!("{prefix}sample_{}", i + 1), s.clone());
        }
        table.push(format!("{prefix}mean"), stats.stats(m).unwrap().mean.clone());
    }
    for &rate in rates {
        table.push(
            reference_column(rate),
            stats.times.iter().map(|t| (rate * t).exp()).collect(),
        );
    }
    Ok(table)
}

fn bloch_table(cfg: &SimConfig) -> CliResult<Table> {
    let traj = sde::simulate(cfg)?;
    let pairs = traj.bloch_series()?;
    let mut table = Table::default();
    table.push("t", traj.times.clone());
    let names = ["x", "y", "z", "x_hat", "y_hat", "z_hat"];
    for (k, name) in names.iter().enumerate() {
        table.push(
            *name,
            pairs
                .iter()
                .map(|(v, w)| if k < 3 { v.to_array()[k] } else { w.to_array()[k - 3] })
                .collect(),
        );
    }
    Ok(table)
}
