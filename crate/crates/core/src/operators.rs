//! Spin operators, canonical states and the spin-1/2 Bloch parameterization.
//!
//! Basis indexing: `e_0` carries the largest `J_z` eigenvalue `J`, `e_{2J}`
//! the smallest `-J`. For `N = 2` this makes `e_0` the ground state `rho_g`
//! (north pole) and `e_1` the excited state `rho_e` (south pole).

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, real, CMatrix, C64, I};

/// Tolerance for the Hermitian, trace and positivity checks on states.
pub const STATE_TOL: f64 = 1e-10;

/// A validated `N x N` density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let n = m.nrows();
        if n < 2 || m.ncols() != n {
            return Err(Error::InvalidDimension(n));
        }
        let dev = linalg::hermitian_deviation(&m);
        if dev > STATE_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = linalg::trace(&m).re;
        if (tr - 1.0).abs() > STATE_TOL {
            return Err(Error::TraceNotOne(tr));
        }
        let min = linalg::min_eigenvalue(&m);
        if min < -STATE_TOL {
            return Err(Error::NotPositive(min));
        }
        Ok(Self(m))
    }

    /// Wraps a matrix that is a density matrix by construction.
    pub(crate) fn from_matrix_unchecked(m: CMatrix) -> Self {
        Self(m)
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidDimension(n));
        }
        Ok(Self(CMatrix::identity(n, n).scale(1.0 / n as f64)))
    }

    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        let v = DVector::from_iterator(populations.len(), populations.iter().map(|&p| real(p)));
        Self::new(CMatrix::from_diagonal(&v))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// `Tr(rho rho_n)`, the population of basis state `n`.
    pub fn population(&self, n: usize) -> f64 {
        self.0[(n, n)].re
    }

    /// `Re Tr(A rho)`.
    pub fn expectation(&self, op: &CMatrix) -> f64 {
        linalg::trace_product_re(op, &self.0)
    }

    pub fn is_pure(&self, tol: f64) -> bool {
        (1.0 - linalg::trace_product_re(&self.0, &self.0)).abs() <= tol
    }
}

/// Random full-rank state `X X* / Tr(X X*)` with uniform complex entries.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Result<DensityMatrix> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let x = CMatrix::from_fn(dim, dim, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let m = &x * x.adjoint();
    let tr = linalg::trace(&m).re;
    DensityMatrix::new(linalg::hermitize(&m.unscale(tr)))
}

/// Uniform point of the ball of radius `rmax <= 1`, by rejection.
pub fn random_bloch<R: Rng + ?Sized>(rng: &mut R, rmax: f64) -> BlochVector {
    loop {
        let v = [0, 1, 2].map(|_| rng.random::<f64>() * 2.0 - 1.0);
        let r2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        if r2 <= rmax * rmax && r2 <= 1.0 {
            return BlochVector::new_unchecked(v[0], v[1], v[2]);
        }
    }
}

/// Basis projector `rho_n = e_n e_n*`.
pub fn basis_projector(dim: usize, n: usize) -> Result<DensityMatrix> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    if n >= dim {
        return Err(Error::IndexOutOfRange { index: n, dim });
    }
    let mut m = CMatrix::zeros(dim, dim);
    m[(n, n)] = real(1.0);
    Ok(DensityMatrix(m))
}

/// Ground state `diag(1, 0)`.
pub fn ground_state() -> DensityMatrix {
    DensityMatrix(CMatrix::from_diagonal(&DVector::from_vec(vec![real(1.0), real(0.0)])))
}

/// Excited state `diag(0, 1)`.
pub fn excited_state() -> DensityMatrix {
    DensityMatrix(CMatrix::from_diagonal(&DVector::from_vec(vec![real(0.0), real(1.0)])))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let v = Self { x, y, z };
        let r = v.norm();
        if !r.is_finite() || r > 1.0 + STATE_TOL {
            return Err(Error::OutsideBall(r));
        }
        Ok(v)
    }

    pub(crate) fn new_unchecked(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// `rho = (1 + x sx + y sy + z sz) / 2`.
pub fn bloch_to_density(v: &BlochVector) -> Result<DensityMatrix> {
    let r = v.norm();
    if r > 1.0 + STATE_TOL {
        return Err(Error::OutsideBall(r));
    }
    Ok(DensityMatrix(bloch_matrix(v)))
}

pub(crate) fn bloch_matrix(v: &BlochVector) -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[
            real(0.5 * (1.0 + v.z)),
            C64::new(0.5 * v.x, -0.5 * v.y),
            C64::new(0.5 * v.x, 0.5 * v.y),
            real(0.5 * (1.0 - v.z)),
        ],
    )
}

/// Inverse of [`bloch_to_density`]: `(Tr(sx rho), Tr(sy rho), Tr(sz rho))`.
pub fn density_to_bloch(rho: &DensityMatrix) -> Result<BlochVector> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: rho.dim(),
        });
    }
    Ok(bloch_components(rho.matrix()))
}

pub(crate) fn bloch_components(m: &CMatrix) -> BlochVector {
    BlochVector::new_unchecked(
        2.0 * m[(1, 0)].re,
        2.0 * m[(1, 0)].im,
        (m[(0, 0)] - m[(1, 1)]).re,
    )
}

#[derive(Clone, Debug)]
pub struct Pauli {
    pub x: CMatrix,
    pub y: CMatrix,
    pub z: CMatrix,
}

impl Pauli {
    pub fn new() -> Self {
        let o = real(0.0);
        let l = real(1.0);
        Self {
            x: CMatrix::from_row_slice(2, 2, &[o, l, l, o]),
            y: CMatrix::from_row_slice(2, 2, &[o, -I, I, o]),
            z: CMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
        }
    }
}

impl Default for Pauli {
    fn default() -> Self {
        Self::new()
    }
}

/// `J_z`, `J_y` for spin `J = (N - 1) / 2`, plus the Pauli triple when `N = 2`.
#[derive(Clone, Debug)]
pub struct SpinOperators {
    dim: usize,
    pub jz: CMatrix,
    pub jy: CMatrix,
    pub pauli: Option<Pauli>,
}

impl SpinOperators {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        let j = spin(dim);
        let jz = CMatrix::from_diagonal(&DVector::from_iterator(
            dim,
            (0..dim).map(|n| real(j - n as f64)),
        ));
        let mut jy = CMatrix::zeros(dim, dim);
        for m in 1..dim {
            let c = ladder_coefficient(dim, m);
            jy[(m - 1, m)] = -I * c;
            jy[(m, m - 1)] = I * c;
        }
        let pauli = (dim == 2).then(Pauli::new);
        Ok(Self { dim, jz, jy, pauli })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `J = (N - 1) / 2`.
    pub fn spin(&self) -> f64 {
        spin(self.dim)
    }

    /// Measurement and control generators under the given normalization.
    pub fn generators(&self, convention: Convention) -> Result<Generators> {
        match convention {
            Convention::AngularMomentum => Ok(Generators::new(self.jz.clone(), self.jy.clone())),
            Convention::Pauli => {
                let p = self.pauli.as_ref().ok_or(Error::DimensionMismatch {
                    expected: 2,
                    found: self.dim,
                })?;
                Ok(Generators::new(p.z.clone(), p.y.clone()))
            }
        }
    }
}

pub(crate) fn spin(dim: usize) -> f64 {
    (dim as f64 - 1.0) / 2.0
}

/// `c_m = sqrt((2J + 1 - m) m) / 2`.
pub fn ladder_coefficient(dim: usize, m: usize) -> f64 {
    let two_j_plus_one = dim as f64;
    let m = m as f64;
    0.5 * ((two_j_plus_one - m) * m).sqrt()
}

/// Which operator pair drives the spin-1/2 equations.
///
/// `Pauli` uses `(sigma_z, sigma_y)` with `L(rho) = M (sz rho sz - rho)`.
/// `AngularMomentum` uses `(J_z, J_y)` with the spin-J Lindbladian; at `N = 2`
/// this is the normalization in which the Bloch-coordinate equations, the
/// purity drift and the fidelity generator are written. The Pauli system with
/// `(omega, u, M)` is the angular-momentum system with `(2 omega, 2 u, 4 M)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Convention {
    #[default]
    Pauli,
    AngularMomentum,
}

impl Convention {
    /// Factor by which the effective `M` of this normalization exceeds the
    /// angular-momentum one.
    pub fn rate_scale(self) -> f64 {
        match self {
            Convention::Pauli => 4.0,
            Convention::AngularMomentum => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Convention::Pauli => "pauli",
            Convention::AngularMomentum => "angular_momentum",
        }
    }
}

/// The operator pair `(A, B)` entering `F_u = -i[omega A + u B, .]`,
/// `L = M/2 (2 A . A - A^2 . - . A^2)` and `G = sqrt(eta M)(A . + . A - 2 Tr(A .) .)`.
#[derive(Clone, Debug)]
pub struct Generators {
    pub measurement: CMatrix,
    pub control: CMatrix,
    pub(crate) measurement_sq: CMatrix,
}

impl Generators {
    pub fn new(measurement: CMatrix, control: CMatrix) -> Self {
        let measurement_sq = &measurement * &measurement;
        Self {
            measurement,
            control,
            measurement_sq,
        }
    }

    pub fn dim(&self) -> usize {
        self.measurement.nrows()
    }
}
