//! Closed-form current-gap operator for a concentric circular inclusion.
//!
//! For `D = {|x| < ρ}` inside the unit disk with constant boundary
//! coefficients `(γ, μ)`, the operator `Λ − Λ₀` is diagonal in the Fourier
//! basis `e^{inθ}`: it multiplies the constant mode by `σ₀` and mode `n ≠ 0`
//! by `|n|(σₙ − 1)`. Truncating at `|n| ≤ n_max` and collocating on `M`
//! equispaced boundary points gives a circulant matrix whose sampled Fourier
//! modes are exact eigenvectors.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::data::{MatrixMode, OperatorMatrix};
use crate::{Error, Result};

/// Denominators with magnitude below this are rejected as degenerate.
///
/// Admissible coefficients keep every denominator well away from zero; the
/// guard only trips on inputs outside the sign constraints.
pub const DEGENERACY_TOL: f64 = 1e-14;

/// Largest imaginary residue tolerated when a real-coefficient matrix is
/// assembled with complex arithmetic.
pub const REAL_MODE_RESIDUE_TOL: f64 = 1e-12;

/// Whether the boundary coefficients are real or carry absorption.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientMode {
    Real,
    Complex,
}

/// Constant boundary coefficients `γ` (impedance) and `μ` (tangential
/// conductivity) of the generalized Robin transmission condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryParams {
    gamma: Complex64,
    mu: Complex64,
}

impl BoundaryParams {
    /// Requires `Re γ, Re μ > 0` and either both imaginary parts zero (real
    /// mode) or both strictly negative (complex mode).
    pub fn new(gamma: Complex64, mu: Complex64) -> Result<Self> {
        let finite = |z: Complex64| z.re.is_finite() && z.im.is_finite();
        if !finite(gamma) || !finite(mu) {
            return Err(Error::InvalidParameter("boundary coefficients must be finite".into()));
        }
        if gamma.re <= 0.0 || mu.re <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "Re(gamma) and Re(mu) must be positive, got gamma = {gamma}, mu = {mu}"
            )));
        }
        let real = gamma.im == 0.0 && mu.im == 0.0;
        let complex = gamma.im < 0.0 && mu.im < 0.0;
        if !(real || complex) {
            return Err(Error::InvalidParameter(format!(
                "Im(gamma) and Im(mu) must both be zero or both negative, got gamma = {gamma}, mu = {mu}"
            )));
        }
        Ok(Self { gamma, mu })
    }

    pub fn real(gamma: f64, mu: f64) -> Result<Self> {
        Self::new(Complex64::new(gamma, 0.0), Complex64::new(mu, 0.0))
    }

    /// Skips the admissibility checks. Only for formal identities in tests.
    #[cfg(test)]
    pub(crate) fn unchecked(gamma: Complex64, mu: Complex64) -> Self {
        Self { gamma, mu }
    }

    pub fn gamma(&self) -> Complex64 {
        self.gamma
    }

    pub fn mu(&self) -> Complex64 {
        self.mu
    }

    pub fn mode(&self) -> CoefficientMode {
        if self.gamma.im == 0.0 && self.mu.im == 0.0 {
            CoefficientMode::Real
        } else {
            CoefficientMode::Complex
        }
    }
}

/// Radius `ρ ∈ (0, 1)` of the inclusion boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskGeometry {
    rho: f64,
}

impl DiskGeometry {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidParameter(format!("rho must lie in (0, 1), got {rho}")));
        }
        Ok(Self { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// Highest retained Fourier mode `|n|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncationOrder(usize);

impl TruncationOrder {
    pub const DEFAULT: TruncationOrder = TruncationOrder(10);

    pub fn new(n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::InvalidParameter("truncation order must be at least 1".into()));
        }
        Ok(Self(n_max))
    }

    pub fn n_max(self) -> usize {
        self.0
    }
}

impl Default for TruncationOrder {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Multiplier of the current map on boundary mode `n` (`σ₀` when `n = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierSymbol {
    pub n: i64,
    pub value: Complex64,
}

fn checked_div(num: Complex64, den: Complex64, what: &'static str) -> Result<Complex64> {
    let magnitude = den.norm();
    if magnitude.is_nan() || magnitude < DEGENERACY_TOL {
        return Err(Error::Degenerate { what, magnitude });
    }
    Ok(num / den)
}

/// `σ₀ = γρ / (1 − γρ ln ρ)`.
pub fn sigma0(params: &BoundaryParams, geom: &DiskGeometry) -> Result<Complex64> {
    let rho = geom.rho;
    let g_rho = params.gamma * rho;
    checked_div(g_rho, 1.0 - g_rho * rho.ln(), "1 - gamma rho ln rho")
}

/// `σₙ` for `n ≠ 0`; depends on `|n|` only.
///
/// `σₙ = [2|n|ρ^|n| + (μ|n|² + γρ^{2|n|})(1 + ρ^{2|n|})]
///     / [2|n|ρ^|n| + (μ|n|² + γρ^{2|n|})(1 − ρ^{2|n|})]`
pub fn sigma_n(n: i64, params: &BoundaryParams, geom: &DiskGeometry) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::InvalidParameter("sigma_n is defined for n != 0; use sigma0".into()));
    }
    let k = n.unsigned_abs() as f64;
    let rho_k = geom.rho.powf(k);
    let rho_2k = rho_k * rho_k;
    let coupling = params.mu * (k * k) + params.gamma * rho_2k;
    let lead = Complex64::new(2.0 * k * rho_k, 0.0);
    checked_div(
        lead + coupling * (1.0 + rho_2k),
        lead + coupling * (1.0 - rho_2k),
        "sigma_n denominator",
    )
}

/// `σₙ − 1 = 2ρ^{2|n|}(μ|n|² + γρ^{2|n|}) / [2|n|ρ^|n| + (μ|n|² + γρ^{2|n|})(1 − ρ^{2|n|})]`,
/// evaluated without the cancellation of forming `σₙ` first.
pub fn sigma_n_minus_one(n: i64, params: &BoundaryParams, geom: &DiskGeometry) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::InvalidParameter("sigma_n is defined for n != 0; use sigma0".into()));
    }
    let k = n.unsigned_abs() as f64;
    let rho_k = geom.rho.powf(k);
    let rho_2k = rho_k * rho_k;
    let coupling = params.mu * (k * k) + params.gamma * rho_2k;
    let lead = Complex64::new(2.0 * k * rho_k, 0.0);
    checked_div(
        coupling * (2.0 * rho_2k),
        lead + coupling * (1.0 - rho_2k),
        "sigma_n denominator",
    )
}

/// `σ₀, σ₁, …, σ_{n_max}` (non-negative modes; negative modes mirror them).
pub fn symbols(params: &BoundaryParams, geom: &DiskGeometry, trunc: TruncationOrder) -> Result<Vec<FourierSymbol>> {
    let mut out = Vec::with_capacity(trunc.n_max() + 1);
    out.push(FourierSymbol {
        n: 0,
        value: sigma0(params, geom)?,
    });
    for n in 1..=trunc.n_max() as i64 {
        out.push(FourierSymbol {
            n,
            value: sigma_n(n, params, geom)?,
        });
    }
    Ok(out)
}

/// Eigenvalue of the truncated current-gap operator on mode `n`:
/// `σ₀` for `n = 0`, `|n|(σₙ − 1)` for `1 ≤ |n| ≤ n_max`, zero beyond.
pub fn mode_eigenvalue(n: i64, params: &BoundaryParams, geom: &DiskGeometry, trunc: TruncationOrder) -> Result<Complex64> {
    match n.unsigned_abs() {
        0 => sigma0(params, geom),
        k if k as usize <= trunc.n_max() => Ok(sigma_n_minus_one(n, params, geom)? * k as f64),
        _ => Ok(Complex64::new(0.0, 0.0)),
    }
}

/// Collocation matrix `A[j,k] = K(θⱼ, θₖ) / M` of the truncated kernel
/// `K(θ, φ) = σ₀ + Σ_{1≤|n|≤n_max} |n|(σₙ − 1) e^{in(θ−φ)}` on
/// `θⱼ = 2πj/M`.
///
/// Real coefficients give a real symmetric matrix; the imaginary residue of
/// the complex assembly is checked against [`REAL_MODE_RESIDUE_TOL`] and
/// dropped.
pub fn kernel_matrix(
    params: &BoundaryParams,
    geom: &DiskGeometry,
    trunc: TruncationOrder,
    m_grid: usize,
) -> Result<OperatorMatrix> {
    let n_max = trunc.n_max();
    if m_grid < 2 * n_max + 1 {
        return Err(Error::InvalidParameter(format!(
            "collocation grid of {m_grid} points cannot resolve modes up to {n_max} (need at least {})",
            2 * n_max + 1
        )));
    }
    let weight = 1.0 / m_grid as f64;
    let constant = sigma0(params, geom)?;
    let excess = (1..=n_max as i64)
        .map(|n| sigma_n_minus_one(n, params, geom))
        .collect::<Result<Vec<_>>>()?;

    // The matrix is circulant, so only K at the M offsets θⱼ − θₖ is needed.
    // Offsets d and M − d share one evaluation, which keeps the real case
    // exactly symmetric.
    let offsets: Vec<Complex64> = (0..m_grid)
        .map(|d| {
            let angle = 2.0 * PI * d.min(m_grid - d) as f64 / m_grid as f64;
            let tail: Complex64 = excess
                .iter()
                .zip(1..)
                .map(|(e, n)| e * (2.0 * n as f64 * (n as f64 * angle).cos()))
                .sum();
            (constant + tail) * weight
        })
        .collect();

    let mode = params.mode();
    let mut entries = DMatrix::from_fn(m_grid, m_grid, |j, k| offsets[(j + m_grid - k) % m_grid]);
    let matrix_mode = match mode {
        CoefficientMode::Complex => MatrixMode::ComplexCase,
        CoefficientMode::Real => {
            let residue = entries.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
            if residue > REAL_MODE_RESIDUE_TOL {
                return Err(Error::Degenerate {
                    what: "imaginary residue of real-mode kernel",
                    magnitude: residue,
                });
            }
            entries.iter_mut().for_each(|z| z.im = 0.0);
            MatrixMode::RealCase
        }
    };
    OperatorMatrix::new(entries, matrix_mode)
}
