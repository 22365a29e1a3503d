//! Simulation settings and their flat `key = value` text form.
//!
//! ```text
//! # spin-1/2, constant drive, wrong initial guess
//! model = spin_half
//! params.omega = 0.3
//! params.eta = 0.3
//! controller.law = constant
//! controller.value = 1
//! initial.rho = basis:1
//! initial.rho_hat = basis:0
//! ```
//!
//! Every key is optional; missing keys take the values of
//! [`SimConfig::default`]. Parsing reports every problem it finds, not just
//! the first.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::control::Controller;
use crate::dynamics::{CoupledState, PhysicalParams};
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::operators::{basis_projector, bloch_to_density, BlochVector, Convention, DensityMatrix, SpinOperators};
use crate::sde::{IntegratorConfig, Projection, System};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    SpinHalf { convention: Convention },
    SpinJ { dim: usize },
}

impl Default for Model {
    fn default() -> Self {
        Model::SpinHalf {
            convention: Convention::Pauli,
        }
    }
}

impl Model {
    pub fn dim(&self) -> usize {
        match *self {
            Model::SpinHalf { .. } => 2,
            Model::SpinJ { dim } => dim,
        }
    }

    pub fn convention(&self) -> Convention {
        match *self {
            Model::SpinHalf { convention } => convention,
            Model::SpinJ { .. } => Convention::AngularMomentum,
        }
    }
}

/// How an initial density matrix is specified.
#[derive(Clone, Debug, PartialEq)]
pub enum StateSpec {
    /// Eigenprojector `|n><n|` of `J_z`; `n = 0` has the largest eigenvalue.
    Basis(usize),
    Diag(Vec<f64>),
    Bloch([f64; 3]),
    MaximallyMixed,
}

impl StateSpec {
    pub fn build(&self, dim: usize) -> Result<DensityMatrix> {
        match self {
            StateSpec::Basis(n) => basis_projector(dim, *n),
            StateSpec::Diag(p) => {
                if p.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: p.len(),
                    });
                }
                DensityMatrix::diagonal(p)
            }
            StateSpec::Bloch([x, y, z]) => {
                if dim != 2 {
                    return Err(Error::DimensionMismatch { expected: 2, found: dim });
                }
                bloch_to_density(&BlochVector::new(*x, *y, *z)?)
            }
            StateSpec::MaximallyMixed => DensityMatrix::maximally_mixed(dim),
        }
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSpec::Basis(n) => write!(f, "basis:{n}"),
            StateSpec::Diag(p) => write!(f, "diag:{}", join_floats(p)),
            StateSpec::Bloch(v) => write!(f, "bloch:{}", join_floats(v)),
            StateSpec::MaximallyMixed => f.write_str("mixed"),
        }
    }
}

impl FromStr for StateSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s == "mixed" || s == "maximally_mixed" {
            return Ok(StateSpec::MaximallyMixed);
        }
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("'{s}' is not one of basis:n, diag:p0,p1,..., bloch:x,y,z, mixed"))?;
        match kind.trim() {
            "basis" => rest
                .trim()
                .parse()
                .map(StateSpec::Basis)
                .map_err(|_| format!("basis index '{}' is not a non-negative integer", rest.trim())),
            "diag" => parse_floats(rest).map(StateSpec::Diag),
            "bloch" => {
                let v = parse_floats(rest)?;
                <[f64; 3]>::try_from(v.as_slice())
                    .map(StateSpec::Bloch)
                    .map_err(|_| format!("bloch needs 3 components, got {}", v.len()))
            }
            other => Err(format!("unknown state kind '{other}'")),
        }
    }
}

fn parse_floats(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("'{}' is not a number", x.trim())))
        .collect()
}

fn join_floats(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSpec {
    pub metrics: Vec<Metric>,
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            metrics: vec![Metric::Fidelity, Metric::PurityRho, Metric::PurityRhoHat, Metric::Control],
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub model: Model,
    pub params: PhysicalParams,
    pub controller: Controller,
    pub initial_rho: StateSpec,
    pub initial_rho_hat: StateSpec,
    pub integrator: IntegratorConfig,
    pub seed: u64,
    /// Target index for the Lyapunov and Bures metrics; falls back to the
    /// controller's target, then 0.
    pub metric_target: Option<usize>,
    pub output: OutputSpec,
}

impl Default for SimConfig {
    /// Spin-1/2 driven by `u = 1` from the excited state, estimate started in
    /// the ground state.
    fn default() -> Self {
        Self {
            model: Model::default(),
            params: PhysicalParams {
                omega: 0.3,
                eta: 0.3,
                m: 1.0,
            },
            controller: Controller::Constant(1.0),
            initial_rho: StateSpec::Basis(1),
            initial_rho_hat: StateSpec::Basis(0),
            integrator: IntegratorConfig::default(),
            seed: 0,
            metric_target: None,
            output: OutputSpec::default(),
        }
    }
}

impl SimConfig {
    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn target(&self) -> usize {
        self.metric_target.or(self.controller.target()).unwrap_or(0)
    }

    pub fn system(&self) -> Result<System> {
        let ops = SpinOperators::new(self.dim())?;
        let gens = ops.generators(self.model.convention())?;
        Ok(System {
            ops,
            gens,
            params: self.params,
            controller: self.controller,
        })
    }

    pub fn initial_state(&self) -> Result<CoupledState> {
        let n = self.dim();
        CoupledState::new(self.initial_rho.build(n)?, self.initial_rho_hat.build(n)?)
    }

    /// Checks every invariant and reports all violations together.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let mut absorb = |r: Result<()>, key: &str| match r {
            Ok(()) => {}
            Err(Error::Config(v)) => problems.extend(v),
            Err(e) => problems.push(format!("{key}: {e}")),
        };
        let dim = self.dim();
        absorb(
            if dim >= 2 {
                Ok(())
            } else {
                Err(Error::Config(vec![format!("model.dim = {dim} must be >= 2")]))
            },
            "model.dim",
        );
        absorb(self.params.validate(), "params");
        absorb(self.controller.validate(dim), "controller");
        absorb(self.integrator.validate(), "integrator");
        if dim >= 2 {
            absorb(self.initial_rho.build(dim).map(|_| ()), "initial.rho");
            absorb(self.initial_rho_hat.build(dim).map(|_| ()), "initial.rho_hat");
            if let Some(t) = self.metric_target {
                if t >= dim {
                    problems.push(format!("metrics.target = {t} must be < N = {dim}"));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    /// Parses and validates configuration text.
    pub fn parse(text: &str) -> Result<Self> {
        let mut problems = Vec::new();
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line.split_once('=') {
                Some((k, v)) => {
                    let key = k.trim().to_string();
                    if entries.insert(key.clone(), (i + 1, v.trim().to_string())).is_some() {
                        problems.push(format!("line {}: duplicate key '{key}'", i + 1));
                    }
                }
                None => problems.push(format!("line {}: expected 'key = value', got '{line}'", i + 1)),
            }
        }

        let mut reader = Reader {
            entries,
            problems: &mut problems,
            had_explicit_pauli: false,
        };
        let mut cfg = SimConfig::default();

        let model = reader.take("model");
        let dim: Option<usize> = reader.get("model.dim");
        let convention = reader.take("model.convention");
        let convention = match convention.as_deref() {
            None | Some("pauli") => Convention::Pauli,
            Some("angular_momentum") => Convention::AngularMomentum,
            Some(other) => {
                reader.problems.push(format!(
                    "model.convention: unknown value '{other}' (pauli | angular_momentum)"
                ));
                Convention::Pauli
            }
        };
        cfg.model = match model.as_deref() {
            None | Some("spin_half") => {
                if let Some(d) = dim.filter(|&d| d != 2) {
                    reader.problems.push(format!("model.dim = {d} conflicts with model = spin_half"));
                }
                Model::SpinHalf { convention }
            }
            Some("spin_j") => Model::SpinJ { dim: dim.unwrap_or(3) },
            Some(other) => {
                reader.problems.push(format!("model: unknown value '{other}' (spin_half | spin_j)"));
                Model::default()
            }
        };
        if matches!(cfg.model, Model::SpinJ { .. }) && reader.had_explicit_pauli {
            reader.problems.push("model.convention = pauli is only available for spin_half".into());
        }

        if let Some(v) = reader.get("params.omega") {
            cfg.params.omega = v;
        }
        if let Some(v) = reader.get("params.eta") {
            cfg.params.eta = v;
        }
        if let Some(v) = reader.get("params.m") {
            cfg.params.m = v;
        }

        let law = reader.take("controller.law");
        let value: Option<f64> = reader.get("controller.value");
        let alpha: Option<f64> = reader.get("controller.alpha");
        let beta: Option<f64> = reader.get("controller.beta");
        let target: Option<usize> = reader.get("controller.target");
        cfg.controller = match law.as_deref() {
            None => match value {
                Some(c) => Controller::Constant(c),
                None => cfg.controller,
            },
            Some("off") => Controller::Off,
            Some("constant") => Controller::Constant(value.unwrap_or(1.0)),
            Some("population") => Controller::Population {
                target: target.unwrap_or(0),
                alpha: alpha.unwrap_or(5.0),
                beta: beta.unwrap_or(2.0),
            },
            Some("expectation") => Controller::Expectation {
                target: target.unwrap_or(0),
                alpha: alpha.unwrap_or(2.0),
                beta: beta.unwrap_or(2.0),
            },
            Some(other) => {
                reader.problems.push(format!(
                    "controller.law: unknown value '{other}' (off | constant | population | expectation)"
                ));
                cfg.controller
            }
        };
        let uses_shape = matches!(
            cfg.controller,
            Controller::Population { .. } | Controller::Expectation { .. }
        );
        for (key, given) in [
            ("controller.alpha", alpha.is_some()),
            ("controller.beta", beta.is_some()),
            ("controller.target", target.is_some()),
        ] {
            if given && !uses_shape {
                reader.problems.push(format!("{key} has no effect for controller.law = {}", cfg.controller.kind()));
            }
        }
        if value.is_some() && !matches!(cfg.controller, Controller::Constant(_)) {
            reader.problems.push(format!(
                "controller.value has no effect for controller.law = {}",
                cfg.controller.kind()
            ));
        }

        if let Some(s) = reader.get::<StateSpec>("initial.rho") {
            cfg.initial_rho = s;
        }
        if let Some(s) = reader.get::<StateSpec>("initial.rho_hat") {
            cfg.initial_rho_hat = s;
        }

        if let Some(v) = reader.get("integrator.dt") {
            cfg.integrator.dt = v;
        }
        if let Some(v) = reader.get("integrator.t_final") {
            cfg.integrator.t_final = v;
        }
        if let Some(v) = reader.get("integrator.record_stride") {
            cfg.integrator.record_stride = v;
        }
        match reader.take("integrator.projection").as_deref() {
            None => {}
            Some("physical") => cfg.integrator.projection = Projection::Physical,
            Some("none") => cfg.integrator.projection = Projection::None,
            Some(other) => reader
                .problems
                .push(format!("integrator.projection: unknown value '{other}' (physical | none)")),
        }

        if let Some(v) = reader.get("seed") {
            cfg.seed = v;
        }
        cfg.metric_target = reader.get("metrics.target");
        if let Some(list) = reader.take("output.metrics") {
            let mut metrics = Vec::new();
            for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                match name.parse::<Metric>() {
                    Ok(m) => metrics.push(m),
                    Err(_) => reader.problems.push(format!("output.metrics: unknown metric '{name}'")),
                }
            }
            cfg.output.metrics = metrics;
        }
        if let Some(dir) = reader.take("output.dir") {
            cfg.output.dir = PathBuf::from(dir);
        }

        for (key, (line, _)) in std::mem::take(&mut reader.entries) {
            problems.push(format!("line {line}: unknown key '{key}'"));
        }

        if problems.is_empty() {
            cfg.validate()?;
            Ok(cfg)
        } else {
            if let Err(Error::Config(more)) = cfg.validate() {
                for p in more {
                    if !problems.contains(&p) {
                        problems.push(p);
                    }
                }
            }
            Err(Error::Config(problems))
        }
    }

    /// Text form accepted by [`SimConfig::parse`]; floats are written in
    /// shortest round-trip notation.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        match self.model {
            Model::SpinHalf { convention } => {
                put("model", "spin_half".into());
                put("model.convention", convention.name().into());
            }
            Model::SpinJ { dim } => {
                put("model", "spin_j".into());
                put("model.dim", dim.to_string());
            }
        }
        put("params.omega", format!("{:?}", self.params.omega));
        put("params.eta", format!("{:?}", self.params.eta));
        put("params.m", format!("{:?}", self.params.m));
        put("controller.law", self.controller.kind().into());
        match self.controller {
            Controller::Off => {}
            Controller::Constant(c) => put("controller.value", format!("{c:?}")),
            Controller::Population { target, alpha, beta } | Controller::Expectation { target, alpha, beta } => {
                put("controller.target", target.to_string());
                put("controller.alpha", format!("{alpha:?}"));
                put("controller.beta", format!("{beta:?}"));
            }
        }
        put("initial.rho", self.initial_rho.to_string());
        put("initial.rho_hat", self.initial_rho_hat.to_string());
        put("integrator.dt", format!("{:?}", self.integrator.dt));
        put("integrator.t_final", format!("{:?}", self.integrator.t_final));
        put("integrator.projection", self.integrator.projection.name().into());
        put("integrator.record_stride", self.integrator.record_stride.to_string());
        put("seed", self.seed.to_string());
        if let Some(t) = self.metric_target {
            put("metrics.target", t.to_string());
        }
        put(
            "output.metrics",
            self.output.metrics.iter().map(|m| m.name()).collect::<Vec<_>>().join(","),
        );
        put("output.dir", self.output.dir.display().to_string());
        out
    }
}

impl FromStr for SimConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SimConfig::parse(s)
    }
}

struct Reader<'a> {
    entries: BTreeMap<String, (usize, String)>,
    problems: &'a mut Vec<String>,
    had_explicit_pauli: bool,
}

impl Reader<'_> {
    fn take(&mut self, key: &str) -> Option<String> {
        let v = self.entries.remove(key).map(|(_, v)| v);
        if key == "model.convention" && v.as_deref() == Some("pauli") {
            self.had_explicit_pauli = true;
        }
        v
    }

    fn get<T: FromStr>(&mut self, key: &str) -> Option<T>
    where
        T::Err: fmt::Display,
    {
        let (line, raw) = self.entries.remove(key)?;
        match raw.parse() {
            Ok(v) => Some(v),
            Err(e) => {
                self.problems.push(format!("line {line}: {key} = '{raw}': {e}"));
                None
            }
        }
    }
}
