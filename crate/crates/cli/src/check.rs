//! Headless invariant suite behind `spinfilter check`: randomized checks of
//! the structural properties of the model and the integrator.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spinfilter::config::{Model, SimConfig, StateSpec};
use spinfilter::dynamics::{self, CoupledState, PhysicalParams};
use spinfilter::linalg::{self, CMatrix};
use spinfilter::operators::{basis_projector, bloch_to_density, random_bloch, random_density, Generators};
use spinfilter::sde::{self, IntegratorConfig, Projection};
use spinfilter::{metrics, Controller, Convention, SpinOperators};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub type Check = fn(&mut ChaCha8Rng, usize) -> Result<String, String>;

pub const CHECKS: &[(&str, Check)] = &[
    ("trace preservation", trace_preservation),
    ("eigenprojector equilibria", equilibria),
    ("J_z martingale drift", jz_martingale),
    ("Bloch/matrix drift consistency", bloch_consistency),
    ("purity drift identity", purity_identity),
    ("fidelity routes agree", fidelity_routes),
    ("fidelity generator special cases", generator_cases),
    ("projection fixes valid states", projection_identity),
    ("coupled equal starts stay equal", equal_starts),
    ("deterministic reruns", determinism),
    ("config round trip", config_round_trip),
];

/// Runs each check with `cases` random inputs from a generator seeded with
/// `seed`.
pub fn run(checks: &[(&'static str, Check)], seed: u64, cases: usize) -> Vec<CheckResult> {
    checks
        .iter()
        .enumerate()
        .map(|(i, (name, check))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let (passed, detail) = match check(&mut rng, cases) {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckResult { name, passed, detail }
        })
        .collect()
}

/// One line per check and a summary; the flag is true when all passed.
pub fn report(results: &[CheckResult]) -> (String, bool) {
    let mut out = String::new();
    for r in results {
        let _ = writeln!(out, "{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    let _ = writeln!(out, "{} of {} checks passed", results.len() - failed, results.len());
    (out, failed == 0)
}

fn params<R: Rng>(rng: &mut R) -> PhysicalParams {
    PhysicalParams::new(rng.random::<f64>(), rng.random::<f64>(), 0.1 + rng.random::<f64>() * 2.0).unwrap()
}

fn gens(dim: usize, convention: Convention) -> Generators {
    SpinOperators::new(dim).unwrap().generators(convention).unwrap()
}

fn systems() -> Vec<(usize, Convention)> {
    vec![
        (2, Convention::Pauli),
        (2, Convention::AngularMomentum),
        (3, Convention::AngularMomentum),
        (4, Convention::AngularMomentum),
    ]
}

fn within(worst: f64, tol: f64, what: &str) -> Result<String, String> {
    let msg = format!("max {what} {worst:.2e} (tol {tol:.0e})");
    if worst <= tol {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn e(err: spinfilter::Error) -> String {
    err.to_string()
}

fn trace_preservation(rng: &mut ChaCha8Rng, cases: usize) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for (dim, conv) in systems() {
        let g = gens(dim, conv);
        for _ in 0..cases {
            let p = params(rng);
            let s = CoupledState::new(random_density(rng, dim).map_err(e)?, random_density(rng, dim).map_err(e)?)
                .map_err(e)?;
            let u = rng.random::<f64>() * 4.0 - 2.0;
            let (d, dh) = dynamics::coupled_drift(&s, u, &p, &g).map_err(e)?;
            let gr = dynamics::diffusion_term(&s.rho, &p, &g).map_err(e)?;
            for m in [&d, &dh, &gr] {
                worst = worst.max(linalg::trace(m).norm());
            }
        }
    }
    within(worst, 1e-12, "|trace|")
}

fn equilibria(rng: &mut ChaCha8Rng, _cases: usize) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for (dim, conv) in systems() {
        let g = gens(dim, conv);
        let p = params(rng);
        for n in 0..dim {
            for m in 0..dim {
                let s = CoupledState::new(basis_projector(dim, n).map_err(e)?, basis_projector(dim, m).map_err(e)?)
                    .map_err(e)?;
                let (d, dh) = dynamics::coupled_drift(&s, 0.0, &p, &g).map_err(e)?;
                let ga = dynamics::diffusion_term(&s.rho, &p, &g).map_err(e)?;
                let gb = dynamics::diffusion_term(&s.rho_hat, &p, &g).map_err(e)?;
                for x in [&d, &dh, &ga, &gb] {
                    worst = worst.max(x.iter().map(|c| c.norm()).fold(0.0, f64::max));
                }
            }
        }
    }
    within(worst, 1e-14, "|entry|")
}

fn jz_martingale(rng: &mut ChaCha8Rng, cases: usize) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for (dim, conv) in systems() {
        let g = gens(dim, conv);
        for _ in 0..cases {
            let p = params(rng);
            let s = CoupledState::new(random_density(rng, dim).map_err(e)?, random_density(rng, dim).map_err(e)?)
                .map_err(e)?;
            let (d, _) = dynamics::coupled_drift(&s, 0.0, &p, &g).map_err(e)?;
            worst = worst.max(linalg::trace_product_re(&g.measurement, &d).abs());
        }
    }
    within(worst, 1e-12, "|Tr(A drift)|")
}

fn components(m: &CMatrix) -> [f64; 3] {
    [2.0 * m[(1, 0)].re, 2.0 * m[(1, 0)].im, (m[(0, 0)] - m[(1, 1)]).re]
}

fn bloch_consistency(rng: &mut ChaCha8Rng, cases: usize) -> Result<String, String> {
    let g = gens(2, Convention::AngularMomentum);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let p = params(rng);
        let (v, vh) = (random_bloch(rng, 1.0), random_bloch(rng, 1.0));
        let s = CoupledState::new(bloch_to_density(&v).map_err(e)?, bloch_to_density(&vh).map_err(e)?).map_err(e)?;
        let u = rng.random::<f64>() * 4.0 - 2.0;
        let (d, dh) = dynamics::coupled_drift(&s, u, &p, &g).map_err(e)?;
        let ga = dynamics::diffusion_term(&s.rho, &p, &g).map_err(e)?;
        let gb = dynamics::diffusion_term(&s.rho_hat, &p, &g).map_err(e)?;
        let (ba, be) = dynamics::bloch_drift(&v, &vh, u, &p);
        let (sa, se) = dynamics::bloch_diffusion(&v, &vh, &p);
        for (m, b) in [(&d, ba), (&dh, be), (&ga, sa), (&gb, se)] {
            for (x, y) in components(m).iter().zip(b) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    within(worst, 1e-12, "component gap")
}

fn purity_identity(rng: &mut ChaCha8Rng, cases: usize) -> Result<String, String> {
    let g = gens(2, Convention::AngularMomentum);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let p = params(rng);
        let v = random_bloch(rng, 1.0);
        let rho = bloch_to_density(&v).map_err(e)?;
        let got = dynamics::purity_drift(&rho, rng.random::<f64>(), &p, &g).map_err(e)?;
        worst = worst.max((got - dynamics::purity_drift_closed_form(&v, &p)).abs());
    }
    within(worst, 1e-10, "drift gap")
}

fn fidelity_routes(rng: &mut ChaCha8Rng, cases: usize) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let (v, w) = (random_bloch(rng, 1.0), random_bloch(rng, 1.0));
        let (a, b) = (bloch_to_density(&v).map_err(e)?, bloch_to_density(&w).map_err(e)?);
        let general = metrics::fidelity_general(&a, &b).map_err(e)?;
        let qubit = metrics::fidelity_qubit(&a, &b).map_err(e)?;
        let bloch = metrics::fidelity_bloch(&v, &w);
        worst = worst.max((general - qubit).abs()).max((qubit - bloch).abs());
        if !(0.0..=1.0).contains(&qubit) {
            return Err(format!("fidelity {qubit} outside [0, 1]"));
        }
    }
    within(worst, 1e-10, "route gap")
}

fn generator_cases(rng: &mut ChaCha8Rng, cases: usize) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    let mut below = 0;
    for _ in 0..cases {
        let (a, b) = (
            bloch_to_density(&random_bloch(rng, 0.95)).map_err(e)?,
            bloch_to_density(&random_bloch(rng, 0.95)).map_err(e)?,
        );
        let m = 0.1 + rng.random::<f64>() * 2.0;
        let one = metrics::generator_fidelity_qubit(&a, &b, 1.0, m).map_err(e)?;
        let zero = metrics::generator_fidelity_qubit(&a, &b, 0.0, m).map_err(e)?;
        worst = worst
            .max((one - metrics::generator_fidelity_perfect(&a, &b, m).map_err(e)?).abs())
            .max((zero - metrics::generator_fidelity_blind(&a, &b, m).map_err(e)?).abs());
        if zero < metrics::generator_fidelity_blind_bound(&a, &b, m).map_err(e)? - 1e-10 || one < -1e-12 {
            below += 1;
        }
    }
    if below > 0 {
        return Err(format!("{below} cases below the non-negative lower bound"));
    }
    within(worst, 1e-10, "closed-form gap")
}

fn projection_identity(rng: &mut ChaCha8Rng, cases: usize) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for dim in [2, 3, 4] {
        for _ in 0..cases {
            let rho = random_density(rng, dim).map_err(e)?;
            let p = sde::project_to_physical(rho.matrix()).map_err(e)?;
            worst = worst.max(linalg::max_abs_diff(p.matrix(), rho.matrix()));
        }
    }
    within(worst, 1e-12, "change")
}

fn short(cfg: SimConfig, seed: u64) -> SimConfig {
    SimConfig {
        seed,
        integrator: IntegratorConfig {
            dt: 1e-3,
            t_final: 1.0,
            projection: Projection::Physical,
            record_stride: 10,
        },
        ..cfg
    }
}

fn qutrit() -> SimConfig {
    SimConfig {
        model: Model::SpinJ { dim: 3 },
        controller: Controller::Expectation {
            target: 1,
            alpha: 2.0,
            beta: 2.0,
        },
        initial_rho: StateSpec::Diag(vec![0.2, 0.2, 0.6]),
        initial_rho_hat: StateSpec::Diag(vec![0.8, 0.1, 0.1]),
        ..SimConfig::default()
    }
}

fn equal_starts(rng: &mut ChaCha8Rng, cases: usize) -> Result<String, String> {
    let runs = cases.clamp(1, 10);
    for _ in 0..runs {
        let cfg = SimConfig {
            initial_rho_hat: StateSpec::Diag(vec![0.2, 0.2, 0.6]),
            ..short(qutrit(), rng.random())
        };
        let traj = sde::simulate(&cfg).map_err(e)?;
        if let Some(k) = traj.states.iter().position(|s| s.rho != s.rho_hat) {
            return Err(format!("separated at t = {}", traj.times[k]));
        }
    }
    Ok(format!("{runs} runs identical at every record"))
}

fn determinism(rng: &mut ChaCha8Rng, cases: usize) -> Result<String, String> {
    let runs = cases.clamp(1, 10);
    for _ in 0..runs {
        let cfg = short(qutrit(), rng.random());
        if sde::simulate(&cfg).map_err(e)? != sde::simulate(&cfg).map_err(e)? {
            return Err(format!("seed {} differs between runs", cfg.seed));
        }
    }
    Ok(format!("{runs} seeds bit-identical"))
}

fn config_round_trip(rng: &mut ChaCha8Rng, _cases: usize) -> Result<String, String> {
    let cfgs = [SimConfig::default(), short(qutrit(), rng.random())];
    for cfg in &cfgs {
        let back = SimConfig::parse(&cfg.serialize()).map_err(e)?;
        if &back != cfg {
            return Err(format!("round trip changed:\n{}", cfg.serialize()));
        }
    }
    Ok(format!("{} configurations", cfgs.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        let results = run(CHECKS, 1, 50);
        let (text, ok) = report(&results);
        assert!(ok, "{text}");
        assert_eq!(results.len(), CHECKS.len());
    }

    #[test]
    fn failures_are_reported() {
        fn broken(_: &mut ChaCha8Rng, _: usize) -> Result<String, String> {
            Err("nope".into())
        }
        let results = run(&[("broken", broken), CHECKS[0]], 0, 5);
        let (text, ok) = report(&results);
        assert!(!ok);
        assert!(text.starts_with("FAIL broken: nope\nPASS "), "{text}");
        assert!(text.ends_with("1 of 2 checks passed\n"));
    }
}
