//! Fixed-step Euler-Maruyama integration of the coupled filter equations on a
//! shared Wiener path, with projection back onto the state space.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::SimConfig;
use crate::control::Controller;
use crate::dynamics::{self, CoupledState, PhysicalParams};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::metrics::{self, Metric};
use crate::operators::{bloch_components, BlochVector, DensityMatrix, Generators, SpinOperators};

/// Pre-clip eigenvalues below this mean the step blew up rather than drifted
/// off the state space by round-off.
pub const DIVERGENCE_EIGENVALUE: f64 = -0.1;

/// Gaussian increments `dW ~ N(0, dt)`, reproducible from `seed`.
#[derive(Clone, Debug, PartialEq)]
pub struct WienerPath {
    seed: u64,
    dt: f64,
    increments: Vec<f64>,
}

impl WienerPath {
    pub fn generate(seed: u64, dt: f64, t_final: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) || !(t_final > 0.0 && t_final.is_finite()) || t_final < dt * (1.0 - 1e-12) {
            return Err(Error::Config(vec![format!(
                "Wiener path needs dt > 0 and T >= dt, got dt = {dt}, T = {t_final}"
            )]));
        }
        let n = step_count(dt, t_final);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = dt.sqrt();
        let increments = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            })
            .collect();
        Ok(Self { seed, dt, increments })
    }

    /// Sums of `factor` consecutive increments: the same Brownian path seen on
    /// a grid `factor` times coarser.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.increments.len().is_multiple_of(factor) {
            return Err(Error::Config(vec![format!(
                "cannot coarsen {} increments by {factor}",
                self.increments.len()
            )]));
        }
        Ok(Self {
            seed: self.seed,
            dt: self.dt * factor as f64,
            increments: self.increments.chunks(factor).map(|c| c.iter().sum()).collect(),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `W` on the grid, starting from `W_0 = 0`.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.increments.len() + 1);
        let mut acc = 0.0;
        w.push(acc);
        for dw in &self.increments {
            acc += dw;
            w.push(acc);
        }
        w
    }
}

/// `ceil(T / dt)` with a guard against `T / dt` landing just above an integer.
pub fn step_count(dt: f64, t_final: f64) -> usize {
    let ratio = t_final / dt;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
        nearest as usize
    } else {
        ratio.ceil() as usize
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Projection {
    None,
    /// Hermitize, clip negative eigenvalues, renormalize the trace.
    #[default]
    Physical,
}

impl Projection {
    pub fn name(self) -> &'static str {
        match self {
            Projection::None => "none",
            Projection::Physical => "physical",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_final: f64,
    pub projection: Projection,
    pub record_stride: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 30.0,
            projection: Projection::Physical,
            record_stride: 100,
        }
    }
}

impl IntegratorConfig {
    pub fn steps(&self) -> usize {
        step_count(self.dt, self.t_final)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            problems.push(format!("integrator.dt = {} must be > 0", self.dt));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            problems.push(format!("integrator.t_final = {} must be > 0", self.t_final));
        }
        if problems.is_empty() && self.dt > self.t_final {
            problems.push(format!(
                "integrator.dt = {} must not exceed integrator.t_final = {}",
                self.dt, self.t_final
            ));
        }
        if self.record_stride == 0 {
            problems.push("integrator.record_stride must be >= 1".to_string());
        } else if problems.is_empty() && !self.steps().is_multiple_of(self.record_stride) {
            problems.push(format!(
                "integrator.record_stride = {} must divide the step count {}",
                self.record_stride,
                self.steps()
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// Maps an Euler update back onto the density matrices, refusing updates
/// whose pre-clip spectrum signals a blow-up.
pub fn project_to_physical(m: &CMatrix) -> Result<DensityMatrix> {
    project(m, DIVERGENCE_EIGENVALUE)
}

/// Hermitize, clip negative eigenvalues to zero and renormalize the trace,
/// with no divergence threshold.
pub fn clip_to_physical(m: &CMatrix) -> Result<DensityMatrix> {
    project(m, f64::NEG_INFINITY)
}

fn project(m: &CMatrix, floor: f64) -> Result<DensityMatrix> {
    if m.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::projection_failure(f64::NAN));
    }
    let h = linalg::hermitize(m);
    if linalg::is_positive_definite(&h) {
        let tr = linalg::trace(&h).re;
        return Ok(DensityMatrix::from_matrix_unchecked(h.unscale(tr)));
    }
    let (mut values, vectors) = linalg::hermitian_eigen(&h);
    if values[0] < floor {
        return Err(Error::projection_failure(values[0]));
    }
    for v in values.iter_mut() {
        *v = v.max(0.0);
    }
    let total: f64 = values.iter().sum();
    if !(total > 0.0) {
        return Err(Error::projection_failure(values[0]));
    }
    for v in values.iter_mut() {
        *v /= total;
    }
    Ok(DensityMatrix::from_matrix_unchecked(linalg::reconstruct(&values, &vectors)))
}

fn finish(m: CMatrix, projection: Projection) -> Result<DensityMatrix> {
    match projection {
        Projection::Physical => project_to_physical(&m),
        Projection::None => {
            if m.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(Error::projection_failure(f64::NAN));
            }
            Ok(DensityMatrix::from_matrix_unchecked(m))
        }
    }
}

/// One Euler-Maruyama step of the pair, both halves driven by the same `dw`.
pub fn step(
    s: &CoupledState,
    u: f64,
    dw: f64,
    dt: f64,
    projection: Projection,
    p: &PhysicalParams,
    gens: &Generators,
) -> Result<CoupledState> {
    let actual = dynamics::coefficients(s.rho.matrix(), u, p, gens);
    let estimate = dynamics::coefficients(s.rho_hat.matrix(), u, p, gens);
    let innovation = 2.0 * p.coupling() * (actual.a_expect - estimate.a_expect);

    let rho = s.rho.matrix() + actual.drift.scale(dt) + actual.diffusion.scale(dw);
    let rho_hat = s.rho_hat.matrix()
        + (estimate.drift + estimate.diffusion.scale(innovation)).scale(dt)
        + estimate.diffusion.scale(dw);
    Ok(CoupledState {
        rho: finish(rho, projection)?,
        rho_hat: finish(rho_hat, projection)?,
    })
}

/// The pieces of a configuration that the stepper needs.
#[derive(Clone, Debug)]
pub struct System {
    pub ops: SpinOperators,
    pub gens: Generators,
    pub params: PhysicalParams,
    pub controller: Controller,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    pub times: Vec<f64>,
    pub states: Vec<CoupledState>,
    /// Feedback evaluated on each recorded `rho_hat`.
    pub controls: Vec<f64>,
    pub wiener: Vec<f64>,
    pub observation: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &CoupledState {
        self.states.last().expect("trajectory records the initial state")
    }

    pub fn metric_series(&self, metric: Metric, ops: &SpinOperators, target: usize) -> Result<Vec<f64>> {
        self.states
            .iter()
            .zip(&self.controls)
            .map(|(s, &u)| metric.evaluate(s, u, ops, target))
            .collect()
    }

    /// Bloch triples of `(rho, rho_hat)` for a qubit trajectory.
    pub fn bloch_series(&self) -> Result<Vec<(BlochVector, BlochVector)>> {
        self.states
            .iter()
            .map(|s| {
                Ok((
                    crate::operators::density_to_bloch(&s.rho)?,
                    crate::operators::density_to_bloch(&s.rho_hat)?,
                ))
            })
            .collect()
    }
}

/// Runs the configuration on its own seeded Wiener path.
pub fn simulate(cfg: &SimConfig) -> Result<Trajectory> {
    let path = WienerPath::generate(cfg.seed, cfg.integrator.dt, cfg.integrator.t_final)?;
    simulate_with_path(cfg, &path)
}

/// Runs the configuration on a caller-supplied path; `path.dt()` overrides the
/// configured step.
pub fn simulate_with_path(cfg: &SimConfig, path: &WienerPath) -> Result<Trajectory> {
    let system = cfg.system()?;
    let initial = cfg.initial_state()?;
    integrate(&system, initial, path, cfg.integrator.projection, cfg.integrator.record_stride)
}

/// Core loop. `u` is computed from `rho_hat` at the start of each step; the
/// observation increment uses the actual state.
pub fn integrate(
    system: &System,
    initial: CoupledState,
    path: &WienerPath,
    projection: Projection,
    record_stride: usize,
) -> Result<Trajectory> {
    let stride = record_stride.max(1);
    let dt = path.dt();
    let n = path.len();
    let capacity = n / stride + 2;
    let mut traj = Trajectory {
        seed: path.seed(),
        times: Vec::with_capacity(capacity),
        states: Vec::with_capacity(capacity),
        controls: Vec::with_capacity(capacity),
        wiener: Vec::with_capacity(capacity),
        observation: Vec::with_capacity(capacity),
    };
    let coupling = system.params.coupling();
    let mut state = initial;
    let (mut w, mut y) = (0.0, 0.0);

    for (k, &dw) in path.increments().iter().enumerate() {
        let u = system.controller.evaluate(&state.rho_hat, &system.ops)?;
        if k % stride == 0 {
            traj.times.push(k as f64 * dt);
            traj.states.push(state.clone());
            traj.controls.push(u);
            traj.wiener.push(w);
            traj.observation.push(y);
        }
        let a_expect = state.rho.expectation(&system.gens.measurement);
        state = step(&state, u, dw, dt, projection, &system.params, &system.gens).map_err(|e| match e {
            Error::Diverged { min_eigenvalue, .. } => Error::Diverged {
                step: k,
                t: k as f64 * dt,
                min_eigenvalue,
                control: u,
                purity: metrics::purity_deficit(&state.rho),
            },
            other => other,
        })?;
        w += dw;
        y += dw + 2.0 * coupling * a_expect * dt;
    }
    if n.is_multiple_of(stride) {
        let u = system.controller.evaluate(&state.rho_hat, &system.ops)?;
        traj.times.push(n as f64 * dt);
        traj.states.push(state);
        traj.controls.push(u);
        traj.wiener.push(w);
        traj.observation.push(y);
    }
    Ok(traj)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlochTrajectory {
    pub times: Vec<f64>,
    pub actual: Vec<BlochVector>,
    pub estimate: Vec<BlochVector>,
}

/// Euler-Maruyama on the six Bloch coordinates (angular-momentum
/// normalization), radially projected back into the unit ball.
pub fn simulate_bloch(
    v0: BlochVector,
    vh0: BlochVector,
    controller: &Controller,
    params: &PhysicalParams,
    path: &WienerPath,
    record_stride: usize,
) -> Result<BlochTrajectory> {
    let ops = SpinOperators::new(2)?;
    let stride = record_stride.max(1);
    let dt = path.dt();
    let mut out = BlochTrajectory {
        times: Vec::new(),
        actual: Vec::new(),
        estimate: Vec::new(),
    };
    let (mut v, mut vh) = (v0, vh0);
    let n = path.len();
    for (k, &dw) in path.increments().iter().enumerate() {
        if k % stride == 0 {
            out.times.push(k as f64 * dt);
            out.actual.push(v);
            out.estimate.push(vh);
        }
        let rho_hat = DensityMatrix::from_matrix_unchecked(crate::operators::bloch_matrix(&vh));
        let u = controller.evaluate(&rho_hat, &ops)?;
        let (da, de) = dynamics::bloch_drift(&v, &vh, u, params);
        let (ga, ge) = dynamics::bloch_diffusion(&v, &vh, params);
        let advance = |b: &BlochVector, d: [f64; 3], g: [f64; 3]| {
            let x = [b.x + d[0] * dt + g[0] * dw, b.y + d[1] * dt + g[1] * dw, b.z + d[2] * dt + g[2] * dw];
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            let s = if r > 1.0 { 1.0 / r } else { 1.0 };
            BlochVector::new_unchecked(x[0] * s, x[1] * s, x[2] * s)
        };
        v = advance(&v, da, ga);
        vh = advance(&vh, de, ge);
        if ![v.x, v.y, v.z, vh.x, vh.y, vh.z].iter().all(|c| c.is_finite()) {
            return Err(Error::Diverged {
                step: k,
                t: k as f64 * dt,
                min_eigenvalue: f64::NAN,
                control: u,
                purity: f64::NAN,
            });
        }
    }
    if n.is_multiple_of(stride) {
        out.times.push(n as f64 * dt);
        out.actual.push(v);
        out.estimate.push(vh);
    }
    Ok(out)
}

/// Bloch coordinates of a 2x2 matrix without validation.
pub fn bloch_of(m: &DensityMatrix) -> BlochVector {
    bloch_components(m.matrix())
}
