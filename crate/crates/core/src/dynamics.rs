//! Drift and diffusion of the coupled actual/estimated filter equations.
//!
//! Matrix form, for any dimension and operator pair `(A, B)`:
//!
//! ```text
//! d rho     = (F_u(rho) + L(rho)) dt + G(rho) dW
//! d rho_hat = (F_u(rho_hat) + L(rho_hat) + 2 sqrt(eta M) G(rho_hat) Tr(A (rho - rho_hat))) dt
//!             + G(rho_hat) dW
//! ```
//!
//! Both lines are driven by the same Wiener increment; `u` is always evaluated
//! on `rho_hat`. The Bloch-coordinate form at the bottom of this module is in
//! the angular-momentum normalization (`A = J_z`, `B = J_y`).

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, I};
use crate::operators::{BlochVector, DensityMatrix, Generators};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalParams {
    pub omega: f64,
    pub eta: f64,
    pub m: f64,
}

impl PhysicalParams {
    pub fn new(omega: f64, eta: f64, m: f64) -> Result<Self> {
        let p = Self { omega, eta, m };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            problems.push(format!("params.omega = {} must be finite and >= 0", self.omega));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            problems.push(format!("params.eta = {} must lie in [0, 1]", self.eta));
        }
        if !(self.m > 0.0 && self.m.is_finite()) {
            problems.push(format!("params.m = {} must be finite and > 0", self.m));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    /// `sqrt(eta M)`, the measurement coupling.
    pub fn coupling(&self) -> f64 {
        (self.eta * self.m).sqrt()
    }
}

/// The pair `(rho, rho_hat)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledState {
    pub rho: DensityMatrix,
    pub rho_hat: DensityMatrix,
}

impl CoupledState {
    pub fn new(rho: DensityMatrix, rho_hat: DensityMatrix) -> Result<Self> {
        if rho.dim() != rho_hat.dim() {
            return Err(Error::DimensionMismatch {
                expected: rho.dim(),
                found: rho_hat.dim(),
            });
        }
        Ok(Self { rho, rho_hat })
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }
}

fn check_dim(rho: &DensityMatrix, gens: &Generators) -> Result<()> {
    if rho.dim() != gens.dim() {
        return Err(Error::DimensionMismatch {
            expected: gens.dim(),
            found: rho.dim(),
        });
    }
    Ok(())
}

/// `F_u(rho) = -i [omega A + u B, rho]`.
pub fn hamiltonian_term(rho: &DensityMatrix, u: f64, p: &PhysicalParams, gens: &Generators) -> Result<CMatrix> {
    check_dim(rho, gens)?;
    let h = gens.measurement.scale(p.omega) + gens.control.scale(u);
    Ok(linalg::commutator(&h, rho.matrix()) * (-I))
}

/// `L(rho) = M/2 (2 A rho A - A^2 rho - rho A^2)`.
pub fn lindblad_term(rho: &DensityMatrix, p: &PhysicalParams, gens: &Generators) -> Result<CMatrix> {
    check_dim(rho, gens)?;
    Ok(lindblad(rho.matrix(), p, gens))
}

/// `G(rho) = sqrt(eta M) (A rho + rho A - 2 Tr(A rho) rho)`.
pub fn diffusion_term(rho: &DensityMatrix, p: &PhysicalParams, gens: &Generators) -> Result<CMatrix> {
    check_dim(rho, gens)?;
    Ok(diffusion(rho.matrix(), p, gens))
}

/// Drifts of `(rho, rho_hat)`; the second carries the innovation correction.
pub fn coupled_drift(
    s: &CoupledState,
    u: f64,
    p: &PhysicalParams,
    gens: &Generators,
) -> Result<(CMatrix, CMatrix)> {
    check_dim(&s.rho, gens)?;
    check_dim(&s.rho_hat, gens)?;
    let actual = coefficients(s.rho.matrix(), u, p, gens);
    let estimate = coefficients(s.rho_hat.matrix(), u, p, gens);
    let gap = actual.a_expect - estimate.a_expect;
    let drift_hat = estimate.drift + estimate.diffusion.scale(2.0 * p.coupling() * gap);
    Ok((actual.drift, drift_hat))
}

/// `dY = dW + 2 sqrt(eta M) Tr(A rho) dt`, evaluated on the actual state.
pub fn observation_increment(
    rho: &DensityMatrix,
    dw: f64,
    dt: f64,
    p: &PhysicalParams,
    gens: &Generators,
) -> f64 {
    dw + 2.0 * p.coupling() * rho.expectation(&gens.measurement) * dt
}

/// Itô drift of the purity deficit `S(rho) = 1 - Tr(rho^2)` under the
/// actual-state equation: `-2 Tr(rho D) - Tr(G^2)`.
pub fn purity_drift(rho: &DensityMatrix, u: f64, p: &PhysicalParams, gens: &Generators) -> Result<f64> {
    check_dim(rho, gens)?;
    let c = coefficients(rho.matrix(), u, p, gens);
    Ok(-2.0 * linalg::trace_product_re(rho.matrix(), &c.drift)
        - linalg::trace_product_re(&c.diffusion, &c.diffusion))
}

/// Closed-form drift of `S(rho)` for a qubit in the angular-momentum
/// normalization: `M ((1 - eta)(1 - z^2)/2 - (1 - eta z^2) S)`.
pub fn purity_drift_closed_form(v: &BlochVector, p: &PhysicalParams) -> f64 {
    let s = 0.5 * (1.0 - v.norm_sq());
    let z2 = v.z * v.z;
    p.m * (0.5 * (1.0 - p.eta) * (1.0 - z2) - (1.0 - p.eta * z2) * s)
}

/// Drift, diffusion and `Tr(A x)` of one filter equation, without the
/// innovation correction.
pub(crate) struct Coefficients {
    pub drift: CMatrix,
    pub diffusion: CMatrix,
    pub a_expect: f64,
}

pub(crate) fn coefficients(x: &CMatrix, u: f64, p: &PhysicalParams, gens: &Generators) -> Coefficients {
    let a = &gens.measurement;
    let b = &gens.control;
    let ax = a * x;
    let xa = x * a;
    let a_expect = linalg::trace(&ax).re;

    let mut drift = (&ax - &xa).scale(p.omega);
    if u != 0.0 {
        drift += (b * x - x * b).scale(u);
    }
    drift *= -I;
    let axa = &ax * a;
    drift += (axa.scale(2.0) - &gens.measurement_sq * x - x * &gens.measurement_sq).scale(0.5 * p.m);

    let diffusion = (ax + xa - x.scale(2.0 * a_expect)).scale(p.coupling());
    Coefficients {
        drift,
        diffusion,
        a_expect,
    }
}

fn lindblad(x: &CMatrix, p: &PhysicalParams, gens: &Generators) -> CMatrix {
    let a = &gens.measurement;
    ((a * x * a).scale(2.0) - &gens.measurement_sq * x - x * &gens.measurement_sq).scale(0.5 * p.m)
}

fn diffusion(x: &CMatrix, p: &PhysicalParams, gens: &Generators) -> CMatrix {
    let a = &gens.measurement;
    let tr = linalg::trace_product_re(a, x);
    (a * x + x * a - x.scale(2.0 * tr)).scale(p.coupling())
}

/// Drift of `(x, y, z)` and `(x_hat, y_hat, z_hat)`.
pub fn bloch_drift(v: &BlochVector, vh: &BlochVector, u: f64, p: &PhysicalParams) -> ([f64; 3], [f64; 3]) {
    let (w, m, em) = (p.omega, p.m, p.eta * p.m);
    let actual = [
        -w * v.y - 0.5 * m * v.x + u * v.z,
        w * v.x - 0.5 * m * v.y,
        -u * v.x,
    ];
    let gap = vh.z - v.z;
    let estimate = [
        -w * vh.y - 0.5 * m * vh.x + u * vh.z + em * vh.x * vh.z * gap,
        w * vh.x - 0.5 * m * vh.y + em * vh.y * vh.z * gap,
        -u * vh.x - em * (1.0 - vh.z * vh.z) * gap,
    ];
    (actual, estimate)
}

/// Diffusion coefficients multiplying the shared `dW`.
pub fn bloch_diffusion(v: &BlochVector, vh: &BlochVector, p: &PhysicalParams) -> ([f64; 3], [f64; 3]) {
    let s = p.coupling();
    let one = |b: &BlochVector| [-s * b.x * b.z, -s * b.y * b.z, s * (1.0 - b.z * b.z)];
    (one(v), one(vh))
}
