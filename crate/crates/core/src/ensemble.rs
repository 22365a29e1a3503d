//! Monte-Carlo ensembles: parallel runs with deterministic seeds, pointwise
//! statistics, exponential rate fits and the statistical checks used to
//! probe convergence claims.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::config::SimConfig;
use crate::control::Controller;
use crate::dynamics::CoupledState;
use crate::error::{Error, Result};
use crate::metrics::{self, Metric};
use crate::sde::{self, Projection, System, Trajectory};

/// Terminal pairs within this fidelity of an eigenstate count as converged.
pub const CLASSIFICATION_FIDELITY: f64 = 0.99;
/// Values at or below this are ignored by [`fit_rate`].
pub const RATE_FLOOR: f64 = 1e-8;
pub const MIN_FIT_POINTS: usize = 10;
/// Hypothesis checks flag deviations beyond this many standard errors.
pub const Z_THRESHOLD: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleOptions {
    pub n_traj: usize,
    pub base_seed: u64,
    pub metrics: Vec<Metric>,
    pub keep_trajectories: bool,
}

impl EnsembleOptions {
    pub fn new(n_traj: usize, base_seed: u64, metrics: &[Metric]) -> Self {
        Self {
            n_traj,
            base_seed,
            metrics: metrics.to_vec(),
            keep_trajectories: false,
        }
    }
}

/// Pointwise statistics of one metric across the ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricStats {
    pub metric: Metric,
    pub mean: Vec<f64>,
    /// Unbiased sample variance; zero for a single trajectory.
    pub var: Vec<f64>,
    pub q05: Vec<f64>,
    pub q50: Vec<f64>,
    pub q95: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// Where a trajectory ended up.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TerminalClass {
    pub seed: u64,
    /// Eigenstate with the largest fidelity to the final `rho`.
    pub nearest: usize,
    pub fidelity_to_nearest: f64,
    /// Fidelity between the final `rho` and `rho_hat`.
    pub estimate_fidelity: f64,
}

impl TerminalClass {
    pub fn converged(&self) -> bool {
        self.fidelity_to_nearest >= CLASSIFICATION_FIDELITY && self.estimate_fidelity >= CLASSIFICATION_FIDELITY
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DivergedRun {
    pub seed: u64,
    pub error: Error,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleStats {
    /// Trajectories requested.
    pub n_traj: usize,
    /// Seeds of the trajectories that completed, in seed order.
    pub seeds: Vec<u64>,
    pub diverged: Vec<DivergedRun>,
    pub times: Vec<f64>,
    pub metrics: Vec<MetricStats>,
    /// `samples[k][i][j]`: metric `k`, completed trajectory `i`, time index `j`.
    pub samples: Vec<Vec<Vec<f64>>>,
    pub terminal: Vec<TerminalClass>,
    pub trajectories: Option<Vec<Trajectory>>,
}

impl EnsembleStats {
    pub fn completed(&self) -> usize {
        self.seeds.len()
    }

    pub fn stats(&self, metric: Metric) -> Option<&MetricStats> {
        self.metrics.iter().find(|s| s.metric == metric)
    }

    pub fn samples(&self, metric: Metric) -> Option<&[Vec<f64>]> {
        let k = self.metrics.iter().position(|s| s.metric == metric)?;
        Some(&self.samples[k])
    }

    /// Long-format CSV: `time,metric,mean,var,q05,q50,q95`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,metric,mean,var,q05,q50,q95\n");
        for s in &self.metrics {
            for (j, t) in self.times.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    format_float(*t),
                    s.metric.name(),
                    format_float(s.mean[j]),
                    format_float(s.var[j]),
                    format_float(s.q05[j]),
                    format_float(s.q50[j]),
                    format_float(s.q95[j]),
                ));
            }
        }
        out
    }
}

/// 17 significant digits, enough to round-trip any double.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

struct Run {
    seed: u64,
    series: Vec<Vec<f64>>,
    terminal: TerminalClass,
    times: Vec<f64>,
    trajectory: Option<Trajectory>,
}

/// Runs `n_traj` trajectories with seeds `base_seed + i` in parallel.
///
/// Diverged trajectories are excluded and listed; more than 10% diverging is
/// an error.
pub fn run_ensemble(cfg: &SimConfig, opts: &EnsembleOptions) -> Result<EnsembleStats> {
    if opts.n_traj == 0 {
        return Err(Error::InvalidParameter("an ensemble needs at least one trajectory".into()));
    }
    cfg.validate()?;
    let system = cfg.system()?;
    let initial = cfg.initial_state()?;
    let target = cfg.target();

    let outcomes: Vec<(u64, Result<Run>)> = (0..opts.n_traj as u64)
        .into_par_iter()
        .map(|i| {
            let seed = opts.base_seed.wrapping_add(i);
            (seed, run_one(cfg, &system, &initial, seed, target, opts))
        })
        .collect();

    let mut runs = Vec::with_capacity(outcomes.len());
    let mut diverged = Vec::new();
    for (seed, outcome) in outcomes {
        match outcome {
            Ok(run) => runs.push(run),
            Err(error @ Error::Diverged { .. }) => diverged.push(DivergedRun { seed, error }),
            Err(e) => return Err(e),
        }
    }
    if diverged.len() * 10 > opts.n_traj || runs.is_empty() {
        return Err(Error::EnsembleDiverged {
            diverged: diverged.len(),
            total: opts.n_traj,
        });
    }

    let times = runs[0].times.clone();
    let mut samples = vec![Vec::with_capacity(runs.len()); opts.metrics.len()];
    let mut seeds = Vec::with_capacity(runs.len());
    let mut terminal = Vec::with_capacity(runs.len());
    let mut trajectories = opts.keep_trajectories.then(Vec::new);
    for run in runs {
        seeds.push(run.seed);
        terminal.push(run.terminal);
        for (k, s) in run.series.into_iter().enumerate() {
            samples[k].push(s);
        }
        if let (Some(list), Some(t)) = (trajectories.as_mut(), run.trajectory) {
            list.push(t);
        }
    }
    let metrics = opts
        .metrics
        .iter()
        .zip(&samples)
        .map(|(&metric, series)| pointwise_stats(metric, series, times.len()))
        .collect();

    Ok(EnsembleStats {
        n_traj: opts.n_traj,
        seeds,
        diverged,
        times,
        metrics,
        samples,
        terminal,
        trajectories,
    })
}

fn run_one(
    cfg: &SimConfig,
    system: &System,
    initial: &CoupledState,
    seed: u64,
    target: usize,
    opts: &EnsembleOptions,
) -> Result<Run> {
    let path = sde::WienerPath::generate(seed, cfg.integrator.dt, cfg.integrator.t_final)?;
    let traj = sde::integrate(
        system,
        initial.clone(),
        &path,
        cfg.integrator.projection,
        cfg.integrator.record_stride,
    )?;
    let series = opts
        .metrics
        .iter()
        .map(|&m| traj.metric_series(m, &system.ops, target))
        .collect::<Result<Vec<_>>>()?;
    let terminal = classify(traj.final_state(), seed)?;
    let times = traj.times.clone();
    Ok(Run {
        seed,
        series,
        terminal,
        times,
        trajectory: opts.keep_trajectories.then_some(traj),
    })
}

/// Nearest eigenstate of the final `rho`. The fidelity to the pure state
/// `|n><n|` is the population `rho_nn`.
pub fn classify(s: &CoupledState, seed: u64) -> Result<TerminalClass> {
    let (nearest, fidelity_to_nearest) = (0..s.dim())
        .map(|n| (n, s.rho.population(n)))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    Ok(TerminalClass {
        seed,
        nearest,
        fidelity_to_nearest,
        estimate_fidelity: metrics::fidelity(&s.rho, &s.rho_hat)?,
    })
}

fn pointwise_stats(metric: Metric, series: &[Vec<f64>], len: usize) -> MetricStats {
    let mut st = MetricStats {
        metric,
        mean: Vec::with_capacity(len),
        var: Vec::with_capacity(len),
        q05: Vec::with_capacity(len),
        q50: Vec::with_capacity(len),
        q95: Vec::with_capacity(len),
        min: Vec::with_capacity(len),
        max: Vec::with_capacity(len),
    };
    let mut column = vec![0.0; series.len()];
    for j in 0..len {
        for (c, s) in column.iter_mut().zip(series) {
            *c = s[j];
        }
        let (mean, var) = mean_var(&column);
        st.mean.push(mean);
        st.var.push(var);
        column.sort_by(f64::total_cmp);
        st.q05.push(quantile_sorted(&column, 0.05));
        st.q50.push(quantile_sorted(&column, 0.50));
        st.q95.push(quantile_sorted(&column, 0.95));
        st.min.push(column[0]);
        st.max.push(column[column.len() - 1]);
    }
    st
}

/// Pairwise (cascade) summation; error grows as `O(log n)` rather than `O(n)`.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 8 {
        x.iter().sum()
    } else {
        let (a, b) = x.split_at(x.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Mean and unbiased variance (zero for a single value).
pub fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = pairwise_sum(x) / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = x.iter().map(|v| (v - mean) * (v - mean)).collect();
    // A constant column must report exactly zero spread and stay inside the
    // min/max envelope.
    let mean = mean.clamp(
        x.iter().copied().fold(f64::INFINITY, f64::min),
        x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    (mean, pairwise_sum(&dev) / (n - 1.0))
}

/// Linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    /// Per unit time.
    pub slope: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub residual_rms: f64,
    pub points: usize,
}

/// Least-squares slope of `ln(series)` against `t` on `window`, default
/// `[0.2 T, 0.9 T]`. Points at or below [`RATE_FLOOR`] are skipped.
pub fn fit_rate(times: &[f64], series: &[f64], window: Option<(f64, f64)>) -> Result<RateFit> {
    if times.len() != series.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: series.len(),
        });
    }
    let window = window.unwrap_or_else(|| {
        let t_end = times.last().copied().unwrap_or(0.0);
        (0.2 * t_end, 0.9 * t_end)
    });
    let eps = 1e-9 * window.1.abs().max(1.0);
    let (xs, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(series)
        .filter(|(&t, &v)| t >= window.0 - eps && t <= window.1 + eps && v > RATE_FLOOR && v.is_finite())
        .map(|(&t, &v)| (t, v.ln()))
        .unzip();
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            usable: xs.len(),
            required: MIN_FIT_POINTS,
        });
    }
    let n = xs.len() as f64;
    let mx = pairwise_sum(&xs) / n;
    let my = pairwise_sum(&ys) / n;
    let sxy: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let sxx: Vec<f64> = xs.iter().map(|x| (x - mx) * (x - mx)).collect();
    let slope = pairwise_sum(&sxy) / pairwise_sum(&sxx);
    let intercept = my - slope * mx;
    let sq: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .collect();
    Ok(RateFit {
        slope,
        intercept,
        window,
        residual_rms: (pairwise_sum(&sq) / n).sqrt(),
        points: xs.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Violation {
    pub index: usize,
    pub t: f64,
    pub value: f64,
    pub standard_error: f64,
    /// Shortfall in standard errors (negative means below the reference).
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubmartingaleReport {
    pub n_traj: usize,
    pub initial: f64,
    /// Most negative z-score over the grid (`None` when every SE is zero).
    pub worst_z: Option<f64>,
    pub violations: Vec<Violation>,
}

impl SubmartingaleReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Round-off allowance for comparisons with zero standard error.
const ROUND_OFF: f64 = 1e-12;

/// Checks `E[F(t)] >= F(0) - 3 SE(t)` at every grid point. Needs at least
/// 100 paths.
pub fn submartingale_test(times: &[f64], paths: &[Vec<f64>]) -> Result<SubmartingaleReport> {
    if paths.len() < 100 {
        return Err(Error::InsufficientData {
            usable: paths.len(),
            required: 100,
        });
    }
    let initial = pairwise_sum(&paths.iter().map(|p| p[0]).collect::<Vec<_>>()) / paths.len() as f64;
    let mut violations = Vec::new();
    let mut worst_z: Option<f64> = None;
    let mut column = vec![0.0; paths.len()];
    for (j, &t) in times.iter().enumerate() {
        for (c, p) in column.iter_mut().zip(paths) {
            *c = p[j];
        }
        let (mean, var) = mean_var(&column);
        let se = (var / paths.len() as f64).sqrt();
        let gap = mean - initial;
        if se > 0.0 {
            let z = gap / se;
            worst_z = Some(worst_z.map_or(z, |w| w.min(z)));
        }
        if gap < -Z_THRESHOLD * se - ROUND_OFF {
            violations.push(Violation {
                index: j,
                t,
                value: mean,
                standard_error: se,
                z: if se > 0.0 { gap / se } else { f64::NEG_INFINITY },
            });
        }
    }
    Ok(SubmartingaleReport {
        n_traj: paths.len(),
        initial,
        worst_z,
        violations,
    })
}

/// Checks that the ensemble mean does not decrease between consecutive grid
/// points beyond `3 SE` of the paired per-trajectory increments.
pub fn monotone_test(times: &[f64], paths: &[Vec<f64>]) -> Vec<Violation> {
    let mut violations = Vec::new();
    let n = paths.len() as f64;
    let mut diffs = vec![0.0; paths.len()];
    for j in 1..times.len() {
        for (d, p) in diffs.iter_mut().zip(paths) {
            *d = p[j] - p[j - 1];
        }
        let (mean, var) = mean_var(&diffs);
        let se = (var / n).sqrt();
        if mean < -Z_THRESHOLD * se - ROUND_OFF {
            violations.push(Violation {
                index: j,
                t: times[j],
                value: mean,
                standard_error: se,
                z: if se > 0.0 { mean / se } else { f64::NEG_INFINITY },
            });
        }
    }
    violations
}

#[derive(Clone, Debug, PartialEq)]
pub struct QndReport {
    pub n_traj: usize,
    pub converged: usize,
    /// Trajectories whose final `rho` is nearest to each eigenstate.
    pub hits: Vec<usize>,
    /// Initial populations `Tr(rho_0 rho_n)`, the predicted hit probabilities.
    pub expected: Vec<f64>,
    /// `(hits_n / n - p_n) / sqrt(p_n (1 - p_n) / n)`.
    pub z: Vec<f64>,
}

impl QndReport {
    pub fn converged_fraction(&self) -> f64 {
        self.converged as f64 / self.n_traj as f64
    }

    pub fn frequencies_consistent(&self) -> bool {
        self.z.iter().all(|z| z.abs() <= Z_THRESHOLD)
    }
}

/// Measurement-only convergence towards the eigenstates: classifies each
/// terminal pair and compares hit frequencies with the initial populations.
pub fn qnd_convergence_test(cfg: &SimConfig, n_traj: usize, base_seed: u64) -> Result<QndReport> {
    if cfg.controller != Controller::Off {
        return Err(Error::InvalidParameter(format!(
            "QND test needs controller.law = off, got {}",
            cfg.controller.kind()
        )));
    }
    if cfg.params.eta != 1.0 {
        return Err(Error::InvalidParameter(format!(
            "QND test needs params.eta = 1, got {}",
            cfg.params.eta
        )));
    }
    let mut fast = cfg.clone();
    fast.integrator.record_stride = cfg.integrator.steps();
    let stats = run_ensemble(&fast, &EnsembleOptions::new(n_traj, base_seed, &[]))?;
    let rho0 = cfg.initial_rho.build(cfg.dim())?;
    let dim = cfg.dim();
    let mut hits = vec![0; dim];
    for c in &stats.terminal {
        hits[c.nearest] += 1;
    }
    let n = stats.completed();
    let expected: Vec<f64> = (0..dim).map(|k| rho0.population(k)).collect();
    let z = hits
        .iter()
        .zip(&expected)
        .map(|(&h, &p)| {
            let freq = h as f64 / n as f64;
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            if sd > 0.0 {
                (freq - p) / sd
            } else if (freq - p).abs() <= ROUND_OFF {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    Ok(QndReport {
        n_traj: n,
        converged: stats.terminal.iter().filter(|c| c.converged()).count(),
        hits,
        expected,
        z,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub replicas: usize,
}

/// Monte-Carlo estimate of the Itô drift `E[f(s_h) - f(s)] / h` of a scalar
/// functional over one Euler-Maruyama step of length `h`.
pub fn one_step_drift<F>(
    s: &CoupledState,
    u: f64,
    system: &System,
    h: f64,
    replicas: usize,
    seed: u64,
    f: F,
) -> Result<DriftEstimate>
where
    F: Fn(&CoupledState) -> Result<f64>,
{
    if replicas < 2 || !(h > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "drift estimate needs h > 0 and >= 2 replicas, got h = {h}, replicas = {replicas}"
        )));
    }
    let base = f(s)?;
    let normal = Normal::new(0.0, h.sqrt()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(replicas);
    for _ in 0..replicas {
        let dw = normal.sample(&mut rng);
        let next = sde::step(s, u, dw, h, Projection::Physical, &system.params, &system.gens)?;
        samples.push((f(&next)? - base) / h);
    }
    let (mean, var) = mean_var(&samples);
    Ok(DriftEstimate {
        mean,
        standard_error: (var / replicas as f64).sqrt(),
        replicas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Model, StateSpec};
    use crate::dynamics::PhysicalParams;

    fn small(n_traj: usize) -> (SimConfig, EnsembleOptions) {
        let mut cfg = SimConfig::default();
        cfg.integrator.t_final = 1.0;
        cfg.integrator.dt = 1e-2;
        cfg.integrator.record_stride = 10;
        (cfg, EnsembleOptions::new(n_traj, 11, &[Metric::Fidelity, Metric::PurityRho]))
    }

    #[test]
    fn single_trajectory_mean_is_the_trajectory() {
        let (cfg, mut opts) = small(1);
        opts.keep_trajectories = true;
        let stats = run_ensemble(&cfg, &opts).unwrap();
        let traj = &stats.trajectories.as_ref().unwrap()[0];
        let sys = cfg.system().unwrap();
        let direct = traj.metric_series(Metric::Fidelity, &sys.ops, 0).unwrap();
        assert_eq!(stats.stats(Metric::Fidelity).unwrap().mean, direct);
        assert!(stats.stats(Metric::Fidelity).unwrap().var.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_and_seeded_per_trajectory() {
        let (cfg, opts) = small(8);
        let a = run_ensemble(&cfg, &opts).unwrap();
        let b = run_ensemble(&cfg, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.seeds, (11..19).collect::<Vec<_>>());
        // Trajectory i is the plain simulation with seed base + i.
        let mut single = cfg.clone();
        single.seed = 14;
        let t = sde::simulate(&single).unwrap();
        let sys = cfg.system().unwrap();
        assert_eq!(a.samples(Metric::Fidelity).unwrap()[3], t.metric_series(Metric::Fidelity, &sys.ops, 0).unwrap());
    }

    #[test]
    fn mean_inside_envelope() {
        let (cfg, opts) = small(20);
        let stats = run_ensemble(&cfg, &opts).unwrap();
        for s in &stats.metrics {
            for j in 0..stats.times.len() {
                assert!(s.min[j] <= s.mean[j] && s.mean[j] <= s.max[j]);
                assert!(s.var[j] >= 0.0);
                assert!(s.q05[j] <= s.q50[j] && s.q50[j] <= s.q95[j]);
            }
        }
    }

    #[test]
    fn aggregation_matches_stored_series() {
        let (cfg, opts) = small(12);
        let stats = run_ensemble(&cfg, &opts).unwrap();
        let series = stats.samples(Metric::PurityRho).unwrap();
        for j in 0..stats.times.len() {
            let col: Vec<f64> = series.iter().map(|s| s[j]).collect();
            assert_eq!(stats.stats(Metric::PurityRho).unwrap().mean[j], mean_var(&col).0);
        }
    }

    #[test]
    fn too_many_divergences_is_an_error() {
        // A step this coarse at these rates blows up almost surely.
        let mut cfg = SimConfig::default();
        cfg.params = PhysicalParams::new(0.3, 1.0, 400.0).unwrap();
        cfg.integrator.dt = 0.5;
        cfg.integrator.t_final = 5.0;
        cfg.integrator.record_stride = 1;
        let err = run_ensemble(&cfg, &EnsembleOptions::new(20, 0, &[Metric::Fidelity])).unwrap_err();
        assert!(matches!(err, Error::EnsembleDiverged { .. }), "{err:?}");
    }

    #[test]
    fn fit_rate_examples() {
        let t: Vec<f64> = (0..=100).map(|k| k as f64 * 0.1).collect();
        let pure: Vec<f64> = t.iter().map(|t| (-0.3 * t).exp()).collect();
        let f = fit_rate(&t, &pure, None).unwrap();
        assert!((f.slope + 0.3).abs() < 1e-6);
        assert!((f.window.0 - 2.0).abs() < 1e-12 && (f.window.1 - 9.0).abs() < 1e-12);

        let wiggly: Vec<f64> = t.iter().map(|t| 2.0 * (-0.15 * t).exp() * (1.0 + 0.01 * t.sin())).collect();
        assert!((fit_rate(&t, &wiggly, Some((0.0, 10.0))).unwrap().slope + 0.15).abs() < 0.01);

        let flat = vec![0.7; t.len()];
        assert!(fit_rate(&t, &flat, None).unwrap().slope.abs() < 1e-12);
    }

    #[test]
    fn fit_rate_floor_and_minimum() {
        let t: Vec<f64> = (0..=20).map(|k| k as f64).collect();
        let s: Vec<f64> = t.iter().map(|t| if *t < 12.0 { (-t).exp() } else { 0.0 }).collect();
        assert!(matches!(
            fit_rate(&t, &s, Some((0.0, 20.0))),
            Ok(RateFit { points: 12, .. })
        ));
        assert!(matches!(
            fit_rate(&t, &s, Some((5.0, 20.0))),
            Err(Error::InsufficientData { usable: 7, required: 10 })
        ));
    }

    #[test]
    fn quantiles_interpolate() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&x, 0.5), 3.0);
        assert!((quantile_sorted(&x, 0.05) - 1.2).abs() < 1e-12);
        assert_eq!(quantile_sorted(&[4.0], 0.95), 4.0);
    }

    #[test]
    fn pairwise_sum_is_accurate() {
        let x = vec![0.1; 1_000_000];
        assert!((pairwise_sum(&x) - 100_000.0).abs() < 1e-8);
    }

    #[test]
    fn identical_start_is_trivially_submartingale() {
        let mut cfg = SimConfig::default();
        cfg.initial_rho_hat = StateSpec::Basis(1);
        cfg.integrator.t_final = 1.0;
        cfg.integrator.dt = 1e-2;
        cfg.integrator.record_stride = 10;
        let stats = run_ensemble(&cfg, &EnsembleOptions::new(100, 0, &[Metric::Fidelity])).unwrap();
        let paths = stats.samples(Metric::Fidelity).unwrap();
        assert!(paths.iter().flatten().all(|&f| (f - 1.0).abs() < 1e-12));
        let r = submartingale_test(&stats.times, paths).unwrap();
        assert!(r.passed());
        assert!(monotone_test(&stats.times, paths).is_empty());
    }

    #[test]
    fn submartingale_detects_decay() {
        let times: Vec<f64> = (0..5).map(|k| k as f64).collect();
        let paths: Vec<Vec<f64>> = (0..100)
            .map(|i| times.iter().map(|t| 1.0 - 0.1 * t + 1e-3 * (i % 7) as f64).collect())
            .collect();
        let r = submartingale_test(&times, &paths).unwrap();
        assert_eq!(r.violations.len(), 4);
        assert_eq!(monotone_test(&times, &paths).len(), 4);
        assert!(submartingale_test(&times, &paths[..50]).is_err());
    }

    #[test]
    fn qnd_from_eigenstate_stays_put() {
        let cfg = SimConfig {
            model: Model::SpinJ { dim: 3 },
            params: PhysicalParams::new(0.3, 1.0, 1.0).unwrap(),
            controller: Controller::Off,
            initial_rho: StateSpec::Basis(1),
            initial_rho_hat: StateSpec::MaximallyMixed,
            integrator: crate::sde::IntegratorConfig {
                dt: 1e-2,
                t_final: 5.0,
                projection: Projection::Physical,
                record_stride: 1,
            },
            ..SimConfig::default()
        };
        let r = qnd_convergence_test(&cfg, 20, 0).unwrap();
        assert_eq!(r.hits, vec![0, 20, 0]);
        assert!(r.frequencies_consistent());
        assert_eq!(r.expected, vec![0.0, 1.0, 0.0]);
        let mut driven = cfg.clone();
        driven.controller = Controller::Constant(1.0);
        assert!(qnd_convergence_test(&driven, 5, 0).is_err());
    }

    #[test]
    fn csv_is_long_format() {
        let (cfg, opts) = small(3);
        let stats = run_ensemble(&cfg, &opts).unwrap();
        let csv = stats.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("time,metric,mean,var,q05,q50,q95"));
        assert_eq!(lines.count(), 2 * stats.times.len());
        let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[1], "fidelity");
        assert_eq!(row[0].parse::<f64>().unwrap(), 0.0);
    }

    #[test]
    fn format_float_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
    }
}
