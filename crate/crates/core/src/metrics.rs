//! Scalar diagnostics of a coupled state: fidelity by three routes, purity,
//! Bures distances, the two Lyapunov candidates and the closed-form fidelity
//! generator for qubits.

use std::fmt;
use std::str::FromStr;

use crate::dynamics::CoupledState;
use crate::error::{Error, Result};
use crate::linalg;
use crate::operators::{density_to_bloch, BlochVector, DensityMatrix, SpinOperators, STATE_TOL};

/// Below this, `Xi = sqrt((1 - |v|^2)(1 - |v_hat|^2))` is treated as zero and
/// the generator formula is refused.
pub const BOUNDARY_TOL: f64 = 1e-9;

fn same_dim(a: &DensityMatrix, b: &DensityMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2` by
/// eigendecomposition.
pub fn fidelity_general(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho, sigma)?;
    let root = linalg::sqrt_psd(rho.matrix());
    let inner = &root * sigma.matrix() * &root;
    let (values, _) = linalg::hermitian_eigen(&inner);
    let mut acc = 0.0;
    for v in values {
        if v < -STATE_TOL {
            return Err(Error::NotPositive(v));
        }
        acc += v.max(0.0).sqrt();
    }
    Ok((acc * acc).min(1.0))
}

/// Two-level closed form `Tr(rho sigma) + 2 sqrt(det(rho) det(sigma))`.
pub fn fidelity_qubit(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    same_dim(rho, sigma)?;
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: rho.dim(),
        });
    }
    let det = |m: &DensityMatrix| {
        let m = m.matrix();
        (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re.max(0.0)
    };
    let overlap = linalg::trace_product_re(rho.matrix(), sigma.matrix());
    Ok((overlap + 2.0 * (det(rho) * det(sigma)).sqrt()).clamp(0.0, 1.0))
}

/// `(1 + v.w + sqrt((1 - |v|^2)(1 - |w|^2))) / 2`.
pub fn fidelity_bloch(v: &BlochVector, w: &BlochVector) -> f64 {
    let xi = ((1.0 - v.norm_sq()).max(0.0) * (1.0 - w.norm_sq()).max(0.0)).sqrt();
    (0.5 * (1.0 + v.dot(w) + xi)).clamp(0.0, 1.0)
}

/// Fidelity by the cheapest exact route for the dimension.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() == 2 && sigma.dim() == 2 {
        fidelity_qubit(rho, sigma)
    } else {
        fidelity_general(rho, sigma)
    }
}

/// `S(rho) = 1 - Tr(rho^2)`.
pub fn purity_deficit(rho: &DensityMatrix) -> f64 {
    1.0 - linalg::trace_product_re(rho.matrix(), rho.matrix())
}

/// `d_B = sqrt(2 (1 - sqrt(F)))`.
pub fn bures_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    Ok(bures_from_fidelity(fidelity(rho, sigma)?))
}

fn bures_from_fidelity(f: f64) -> f64 {
    (2.0 * (1.0 - f.clamp(0.0, 1.0).sqrt())).max(0.0).sqrt()
}

/// `d_B(rho, rho_target) + d_B(rho_hat, rho_target)` for a basis target.
pub fn bures_coupled(rho: &DensityMatrix, rho_hat: &DensityMatrix, target: usize) -> Result<f64> {
    check_target(rho, target)?;
    same_dim(rho, rho_hat)?;
    // Fidelity with a pure basis state is its population.
    Ok(bures_from_fidelity(rho.population(target)) + bures_from_fidelity(rho_hat.population(target)))
}

fn check_target(rho: &DensityMatrix, target: usize) -> Result<()> {
    if target >= rho.dim() {
        return Err(Error::IndexOutOfRange {
            index: target,
            dim: rho.dim(),
        });
    }
    Ok(())
}

/// `sqrt(1 - Tr(rho rho_t) Tr(rho_hat rho_t))`.
pub fn lyapunov_v0(rho: &DensityMatrix, rho_hat: &DensityMatrix, target: usize) -> Result<f64> {
    check_target(rho, target)?;
    same_dim(rho, rho_hat)?;
    let p = rho.population(target).clamp(0.0, 1.0);
    let q = rho_hat.population(target).clamp(0.0, 1.0);
    Ok((1.0 - p * q).max(0.0).sqrt())
}

/// `sum_{k != target} (sqrt(Tr(rho rho_k)) + sqrt(Tr(rho_hat rho_k)))`.
pub fn lyapunov_v1(rho: &DensityMatrix, rho_hat: &DensityMatrix, target: usize) -> Result<f64> {
    check_target(rho, target)?;
    same_dim(rho, rho_hat)?;
    Ok((0..rho.dim())
        .filter(|&k| k != target)
        .map(|k| rho.population(k).max(0.0).sqrt() + rho_hat.population(k).max(0.0).sqrt())
        .sum())
}

struct GeneratorInputs {
    v: BlochVector,
    vh: BlochVector,
    xi: f64,
}

fn generator_inputs(rho: &DensityMatrix, rho_hat: &DensityMatrix) -> Result<GeneratorInputs> {
    let v = density_to_bloch(rho)?;
    let vh = density_to_bloch(rho_hat)?;
    let xi = ((1.0 - v.norm_sq()) * (1.0 - vh.norm_sq())).max(0.0).sqrt();
    if xi <= BOUNDARY_TOL {
        return Err(Error::SingularInput(format!(
            "fidelity generator needs interior states, Xi = {xi:e}"
        )));
    }
    Ok(GeneratorInputs { v, vh, xi })
}

/// Infinitesimal generator of the qubit fidelity, valid on the interior of
/// the state space and independent of the feedback.
///
/// Written in the angular-momentum normalization. For the Pauli-convention
/// system pass `4 M`.
pub fn generator_fidelity_qubit(rho: &DensityMatrix, rho_hat: &DensityMatrix, eta: f64, m: f64) -> Result<f64> {
    let GeneratorInputs { v, vh, xi } = generator_inputs(rho, rho_hat)?;
    let (z, zh) = (v.z, vh.z);
    let overlap = v.dot(&vh);
    let gap = 1.0 - overlap - xi;
    let blind = (1.0 - zh * zh) * (1.0 - v.norm_sq()) + (1.0 - z * z) * (1.0 - vh.norm_sq())
        + 2.0 * zh * zh * gap * xi
        - 2.0 * (1.0 - z * zh) * xi;
    Ok(m * (1.0 - eta) / (4.0 * xi) * blind + 0.5 * m * (1.0 - zh * zh) * gap)
}

/// Perfect-detection special case `M (1 - z_hat^2)(1 - F)`.
pub fn generator_fidelity_perfect(rho: &DensityMatrix, rho_hat: &DensityMatrix, m: f64) -> Result<f64> {
    let GeneratorInputs { v, vh, .. } = generator_inputs(rho, rho_hat)?;
    Ok(m * (1.0 - vh.z * vh.z) * (1.0 - fidelity_bloch(&v, &vh)))
}

/// `eta = 0` special case.
pub fn generator_fidelity_blind(rho: &DensityMatrix, rho_hat: &DensityMatrix, m: f64) -> Result<f64> {
    let GeneratorInputs { v, vh, xi } = generator_inputs(rho, rho_hat)?;
    let (z, zh) = (v.z, vh.z);
    let num = (1.0 - zh * zh) * (1.0 - v.norm_sq()) + (1.0 - z * z) * (1.0 - vh.norm_sq());
    Ok(0.5 * m * (num / (2.0 * xi) + z * zh - v.dot(&vh) - xi))
}

/// Lower bound of the `eta = 0` generator, a perfect square over `4 Xi`.
pub fn generator_fidelity_blind_bound(rho: &DensityMatrix, rho_hat: &DensityMatrix, m: f64) -> Result<f64> {
    let GeneratorInputs { v, vh, xi } = generator_inputs(rho, rho_hat)?;
    let a = ((vh.norm_sq() - vh.z * vh.z).max(0.0) * (1.0 - v.norm_sq())).sqrt();
    let b = ((v.norm_sq() - v.z * v.z).max(0.0) * (1.0 - vh.norm_sq())).sqrt();
    Ok(m / (4.0 * xi) * (a - b) * (a - b))
}

/// Named per-step metric channels; the names are the CSV column headers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Fidelity,
    PurityRho,
    PurityRhoHat,
    BuresCoupled,
    V0,
    V1,
    Control,
    JzExpectRho,
    JzExpectRhoHat,
}

impl Metric {
    pub const ALL: [Metric; 9] = [
        Metric::Fidelity,
        Metric::PurityRho,
        Metric::PurityRhoHat,
        Metric::BuresCoupled,
        Metric::V0,
        Metric::V1,
        Metric::Control,
        Metric::JzExpectRho,
        Metric::JzExpectRhoHat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Fidelity => "fidelity",
            Metric::PurityRho => "purity_rho",
            Metric::PurityRhoHat => "purity_rhohat",
            Metric::BuresCoupled => "bures_coupled",
            Metric::V0 => "v0",
            Metric::V1 => "v1",
            Metric::Control => "u",
            Metric::JzExpectRho => "jz_expect_rho",
            Metric::JzExpectRhoHat => "jz_expect_rhohat",
        }
    }

    /// Value on a coupled state; `target` is the basis index used by the
    /// Bures and Lyapunov channels.
    pub fn evaluate(self, s: &CoupledState, u: f64, ops: &SpinOperators, target: usize) -> Result<f64> {
        match self {
            Metric::Fidelity => fidelity(&s.rho, &s.rho_hat),
            Metric::PurityRho => Ok(purity_deficit(&s.rho)),
            Metric::PurityRhoHat => Ok(purity_deficit(&s.rho_hat)),
            Metric::BuresCoupled => bures_coupled(&s.rho, &s.rho_hat, target),
            Metric::V0 => lyapunov_v0(&s.rho, &s.rho_hat, target),
            Metric::V1 => lyapunov_v1(&s.rho, &s.rho_hat, target),
            Metric::Control => Ok(u),
            Metric::JzExpectRho => Ok(s.rho.expectation(&ops.jz)),
            Metric::JzExpectRhoHat => Ok(s.rho_hat.expectation(&ops.jz)),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(vec![format!("unknown metric '{s}'")]))
    }
}

/// One time point of the standard diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricSample {
    pub t: f64,
    pub fidelity: f64,
    pub purity_actual: f64,
    pub purity_estimate: f64,
    pub bures_sum: f64,
    pub lyapunov: f64,
    pub control: f64,
}

impl MetricSample {
    /// `lyapunov` is `V_0` towards `target`.
    pub fn new(t: f64, s: &CoupledState, u: f64, target: usize) -> Result<Self> {
        Ok(Self {
            t,
            fidelity: fidelity(&s.rho, &s.rho_hat)?,
            purity_actual: purity_deficit(&s.rho),
            purity_estimate: purity_deficit(&s.rho_hat),
            bures_sum: bures_coupled(&s.rho, &s.rho_hat, target)?,
            lyapunov: lyapunov_v0(&s.rho, &s.rho_hat, target)?,
            control: u,
        })
    }
}
