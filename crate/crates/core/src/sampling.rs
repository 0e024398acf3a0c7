//! Spectral cut-off indicator and the normalized imaging functional.
//!
//! For a sampling point `z` the probe `b_z` is the boundary trace of the
//! normal derivative of the disk's Dirichlet Green's function (the Poisson
//! kernel scaled by `−1/2π`). With singular pairs `(σⱼ, uⱼ)` of the data
//! matrix, the regularized quadratic form is
//!
//! ```text
//! Σⱼ φ(σⱼ; α)² / σⱼ · |uⱼ* b_z|²,     φ(t; α) = 1 if t² ≥ α else 0,
//! ```
//!
//! which stays bounded as `α → 0` exactly when `z` lies in the inclusion.
//! Its reciprocal, normalized by the sup over the lattice and raised to a
//! power `p`, is the imaging functional `W(z)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::data::SvdFactors;
use crate::{Error, Result};

/// Indicator values are clamped from below before taking the reciprocal.
pub const INDICATOR_FLOOR: f64 = 1e-300;

pub const DEFAULT_GRID: usize = 128;
pub const DEFAULT_R_MAX: f64 = 0.95;
pub const MIN_GRID: usize = 8;

/// A point of the open unit disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePoint {
    x: f64,
    y: f64,
}

impl SamplePoint {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite()) || x.hypot(y) >= 1.0 {
            return Err(Error::OutsideDomain { x, y });
        }
        Ok(Self { x, y })
    }

    pub fn from_polar(r: f64, theta: f64) -> Result<Self> {
        Self::new(r * theta.cos(), r * theta.sin())
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn r(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Polar angle; zero at the origin.
    pub fn theta(&self) -> f64 {
        if self.x == 0.0 && self.y == 0.0 {
            0.0
        } else {
            self.y.atan2(self.x)
        }
    }
}

/// Sampled `∂_ν G(·, z)` on the collocation grid. Every entry is negative.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeVector {
    values: Vec<f64>,
}

impl ProbeVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Rectangle-rule boundary integral `Σⱼ (2π/M) b[j]`; close to `−1`.
    pub fn flux(&self) -> f64 {
        let m = self.values.len() as f64;
        self.values.iter().sum::<f64>() * (2.0 * PI / m)
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect()
    }
}

/// `b_z[j] = −(1/2π) (1 − r²) / (r² + 1 − 2r cos(θⱼ − θ_z))`, `θⱼ = 2πj/M`.
pub fn probe(z: &SamplePoint, m_grid: usize) -> ProbeVector {
    let r = z.r();
    let theta_z = z.theta();
    let numerator = 1.0 - r * r;
    let values = (0..m_grid)
        .map(|j| {
            let theta = 2.0 * PI * j as f64 / m_grid as f64;
            -numerator / (2.0 * PI * (r * r + 1.0 - 2.0 * r * (theta - theta_z).cos()))
        })
        .collect();
    ProbeVector { values }
}

/// Spectral cut-off with parameter `α`: keep `σ` iff `σ² ≥ α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    alpha: f64,
}

impl FilterSpec {
    pub fn spectral_cutoff(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "regularization parameter must be positive, got {alpha}"
            )));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Filter factor `φ(σ; α)`.
    pub fn factor(&self, sigma: f64) -> f64 {
        if sigma * sigma >= self.alpha {
            1.0
        } else {
            0.0
        }
    }
}

/// Value of the regularized quadratic form at one probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Indicator {
    pub value: f64,
    /// Number of singular values that passed the filter.
    pub retained: usize,
}

impl Indicator {
    pub fn is_empty_spectrum(&self) -> bool {
        self.retained == 0
    }
}

/// `Σⱼ φ(σⱼ;α)²/σⱼ · |uⱼ* b|²`. Returns exactly zero, flagged as an empty
/// spectrum, when no singular value passes the filter.
pub fn indicator(svd: &SvdFactors, b: &ProbeVector, filter: &FilterSpec) -> Indicator {
    FilteredSpectrum::new(svd, filter).evaluate(b)
}

/// The singular pairs that survive a filter, laid out for repeated probing.
#[derive(Debug, Clone)]
pub struct FilteredSpectrum {
    inverse_sigma: Vec<f64>,
    // Conjugated left singular vectors, one contiguous row per retained pair.
    conj_left: Vec<Vec<Complex64>>,
    m_grid: usize,
}

impl FilteredSpectrum {
    pub fn new(svd: &SvdFactors, filter: &FilterSpec) -> Self {
        let u = svd.left_vectors();
        let mut inverse_sigma = Vec::new();
        let mut conj_left = Vec::new();
        for (j, &sigma) in svd.singular_values().iter().enumerate() {
            let phi = filter.factor(sigma);
            if phi == 0.0 {
                continue;
            }
            inverse_sigma.push(phi * phi / sigma);
            conj_left.push(u.column(j).iter().map(|z| z.conj()).collect());
        }
        Self {
            inverse_sigma,
            conj_left,
            m_grid: u.nrows(),
        }
    }

    pub fn retained(&self) -> usize {
        self.inverse_sigma.len()
    }

    pub fn m_grid(&self) -> usize {
        self.m_grid
    }

    pub fn evaluate(&self, b: &ProbeVector) -> Indicator {
        assert_eq!(b.len(), self.m_grid, "probe length must match the data matrix");
        let value = self
            .inverse_sigma
            .iter()
            .zip(&self.conj_left)
            .map(|(&w, row)| {
                let dot: Complex64 = row.iter().zip(&b.values).map(|(u, &bk)| u * bk).sum();
                w * dot.norm_sqr()
            })
            .sum();
        Indicator {
            value,
            retained: self.retained(),
        }
    }

    /// Unnormalized functional `W_reg(z)`, with the indicator clamped at
    /// [`INDICATOR_FLOOR`].
    pub fn w_raw(&self, z: &SamplePoint) -> f64 {
        let ind = self.evaluate(&probe(z, self.m_grid));
        1.0 / ind.value.max(INDICATOR_FLOOR)
    }
}

/// `W_reg` and `W` on a cell-centred `grid_n × grid_n` lattice over
/// `[−1, 1]²`. Row 0 is the top row (`y` close to `+1`); points with
/// `|z| > r_max` are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorField {
    grid_n: usize,
    r_max: f64,
    p: f64,
    w_raw: Vec<Option<f64>>,
    w: Vec<Option<f64>>,
    max_raw: f64,
}

/// Lattice coordinate of index `i` along one axis.
pub fn lattice_coordinate(i: usize, grid_n: usize) -> f64 {
    -1.0 + (2 * i + 1) as f64 / grid_n as f64
}

impl IndicatorField {
    /// Normalizes a row-major field of raw values: `w = |w_raw / max w_raw|^p`.
    pub fn from_raw(grid_n: usize, r_max: f64, p: f64, w_raw: Vec<Option<f64>>) -> Result<Self> {
        if grid_n == 0 || w_raw.len() != grid_n * grid_n {
            return Err(Error::InvalidParameter(format!(
                "field of {} values does not match a {grid_n}x{grid_n} lattice",
                w_raw.len()
            )));
        }
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::InvalidParameter(format!("decay exponent must be positive, got {p}")));
        }
        if w_raw.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter("raw indicator values must be finite and nonnegative".into()));
        }
        let max_raw = w_raw.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max_raw == f64::NEG_INFINITY {
            return Err(Error::EmptyField);
        }
        if max_raw <= 0.0 {
            return Err(Error::Degenerate {
                what: "sup norm of the raw field",
                magnitude: max_raw,
            });
        }
        let w = w_raw
            .iter()
            .map(|v| v.map(|raw| (raw / max_raw).abs().powf(p)))
            .collect();
        Ok(Self {
            grid_n,
            r_max,
            p,
            w_raw,
            w,
            max_raw,
        })
    }

    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `‖W_reg‖_∞` over the present points.
    pub fn max_raw(&self) -> f64 {
        self.max_raw
    }

    /// Cartesian coordinates of lattice cell `(row, col)`.
    pub fn coordinates(&self, row: usize, col: usize) -> (f64, f64) {
        (
            lattice_coordinate(col, self.grid_n),
            -lattice_coordinate(row, self.grid_n),
        )
    }

    pub fn w(&self, row: usize, col: usize) -> Option<f64> {
        self.w[row * self.grid_n + col]
    }

    pub fn w_raw(&self, row: usize, col: usize) -> Option<f64> {
        self.w_raw[row * self.grid_n + col]
    }

    /// Normalizes an off-lattice raw value with this field's sup norm and exponent.
    pub fn normalize(&self, raw: f64) -> f64 {
        (raw / self.max_raw).abs().powf(self.p)
    }

    /// `(row, col, x, y, w)` for every present point, in row-major order.
    pub fn present(&self) -> impl Iterator<Item = (usize, usize, f64, f64, f64)> + '_ {
        (0..self.grid_n * self.grid_n).filter_map(move |idx| {
            let (row, col) = (idx / self.grid_n, idx % self.grid_n);
            self.w[idx].map(|w| {
                let (x, y) = self.coordinates(row, col);
                (row, col, x, y, w)
            })
        })
    }

    pub fn present_count(&self) -> usize {
        self.w.iter().flatten().count()
    }

    /// Mean of `w` over present points with `lo ≤ |z| ≤ hi`.
    pub fn mean_in_annulus(&self, lo: f64, hi: f64) -> Option<f64> {
        let (sum, count) = self
            .present()
            .filter(|&(_, _, x, y, _)| {
                let r = x.hypot(y);
                r >= lo && r <= hi
            })
            .fold((0.0, 0usize), |(s, c), (_, _, _, _, w)| (s + w, c + 1));
        (count > 0).then(|| sum / count as f64)
    }
}

/// Evaluates `W` over the lattice.
///
/// Rejects `grid_n < 8` and a filter that removes the whole spectrum.
pub fn scan(svd: &SvdFactors, grid_n: usize, filter: &FilterSpec, p: f64, r_max: f64) -> Result<IndicatorField> {
    if grid_n < MIN_GRID {
        return Err(Error::InvalidParameter(format!(
            "sampling grid of {grid_n} points per side is too coarse (minimum {MIN_GRID})"
        )));
    }
    if !(r_max > 0.0 && r_max <= 1.0) {
        return Err(Error::InvalidParameter(format!("r_max must lie in (0, 1], got {r_max}")));
    }
    let spectrum = FilteredSpectrum::new(svd, filter);
    if spectrum.retained() == 0 {
        return Err(Error::EmptySpectrum {
            alpha: filter.alpha(),
            largest: svd.singular_values().first().copied().unwrap_or(0.0),
        });
    }

    let w_raw: Vec<Option<f64>> = (0..grid_n * grid_n)
        .into_par_iter()
        .map(|idx| {
            let x = lattice_coordinate(idx % grid_n, grid_n);
            let y = -lattice_coordinate(idx / grid_n, grid_n);
            if x.hypot(y) > r_max {
                return None;
            }
            SamplePoint::new(x, y).ok().map(|z| spectrum.w_raw(&z))
        })
        .collect();
    IndicatorField::from_raw(grid_n, r_max, p, w_raw)
}

/// Lattice points with `W ≥ threshold` and their equivalent-area radius.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet {
    pub cells: Vec<(usize, usize)>,
    /// `sqrt(area / π)` with `area = count · (2/grid_n)²`.
    pub r_est: f64,
}

pub fn level_set(field: &IndicatorField, threshold: f64) -> Result<LevelSet> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!("threshold must lie in (0, 1], got {threshold}")));
    }
    let cells: Vec<(usize, usize)> = field
        .present()
        .filter(|&(_, _, _, _, w)| w >= threshold)
        .map(|(row, col, _, _, _)| (row, col))
        .collect();
    let cell = 2.0 / field.grid_n() as f64;
    let area = cells.len() as f64 * cell * cell;
    Ok(LevelSet {
        r_est: (area / PI).sqrt(),
        cells,
    })
}

/// Ratio of mean `W` inside `|z| ≤ ρ/2` to mean `W` on the band
/// `min(ρ + 0.3, 0.9) ≤ |z| ≤ 0.9`.
///
/// When the band is thinner than the lattice resolves (for `ρ ≥ 0.6` it is
/// the circle `|z| = 0.9`), it is widened by half a cell on each side.
pub fn separation(field: &IndicatorField, rho: f64) -> Option<f64> {
    let inner = field.mean_in_annulus(0.0, rho / 2.0)?;
    let lo = (rho + 0.3).min(0.9);
    let half_cell = 1.0 / field.grid_n() as f64;
    let outer = field
        .mean_in_annulus(lo, 0.9)
        .or_else(|| field.mean_in_annulus(lo - half_cell, 0.9 + half_cell))?;
    Some(inner / outer)
}
