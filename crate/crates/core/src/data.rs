//! Measurement data: noisy operator matrices and their spectral factors.
//!
//! The clean current-gap matrix from [`crate::forward`] is perturbed
//! entrywise by a spectrally normalized uniform random matrix, optionally
//! replaced by its imaginary (anti-Hermitian) part, and then factored with a
//! full SVD whose singular values are sorted in nonincreasing order.

use std::fmt;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector, SVD};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

const SVD_MAX_ITERATIONS: usize = 10_000;

/// Which operator a matrix discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixMode {
    /// `Λ − Λ₀` with real boundary coefficients.
    RealCase,
    /// `Λ − Λ₀` with complex boundary coefficients.
    ComplexCase,
    /// `(A − A*) / 2i` of some data matrix `A`.
    ImaginaryPart,
}

impl MatrixMode {
    pub fn tag(self) -> &'static str {
        match self {
            MatrixMode::RealCase => "real-case",
            MatrixMode::ComplexCase => "complex-case",
            MatrixMode::ImaginaryPart => "imaginary-part",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "real-case" => Some(MatrixMode::RealCase),
            "complex-case" => Some(MatrixMode::ComplexCase),
            "imaginary-part" => Some(MatrixMode::ImaginaryPart),
            _ => None,
        }
    }
}

impl fmt::Display for MatrixMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Dense square complex matrix tagged with the operator it represents.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    entries: DMatrix<Complex64>,
    mode: MatrixMode,
}

impl OperatorMatrix {
    pub fn new(entries: DMatrix<Complex64>, mode: MatrixMode) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::InvalidParameter(format!(
                "operator matrix must be square and nonempty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self { entries, mode })
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn mode(&self) -> MatrixMode {
        self.mode
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<Complex64> {
        self.entries
    }

    /// Matrix-vector product.
    pub fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(f.len(), self.size(), "vector length must match matrix size");
        let v = DVector::from_column_slice(f);
        (&self.entries * v).as_slice().to_vec()
    }

    /// Writes the matrix as column-major CSV: a `# eit-rfm matrix M=<int> mode=<tag>`
    /// header, then one line per column holding `re,im` pairs for rows `0..M`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let m = self.size();
        writeln!(out, "# eit-rfm matrix M={m} mode={}", self.mode)?;
        for k in 0..m {
            let mut line = String::with_capacity(m * 48);
            for j in 0..m {
                let z = self.entries[(j, k)];
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{},{}", z.re, z.im));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Parses the format produced by [`OperatorMatrix::write_csv`].
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("missing matrix header".into()))?
            .map_err(|e| Error::Parse(e.to_string()))?;
        let rest = header
            .strip_prefix("# eit-rfm matrix ")
            .ok_or_else(|| Error::Parse(format!("unexpected header {header:?}")))?;
        let mut size = None;
        let mut mode = None;
        for field in rest.split_whitespace() {
            if let Some(v) = field.strip_prefix("M=") {
                size = v.parse::<usize>().ok();
            } else if let Some(v) = field.strip_prefix("mode=") {
                mode = MatrixMode::from_tag(v);
            }
        }
        let (m, mode) = match (size, mode) {
            (Some(m), Some(mode)) if m > 0 => (m, mode),
            _ => return Err(Error::Parse(format!("bad header {header:?}"))),
        };

        let mut entries = DMatrix::<Complex64>::zeros(m, m);
        for k in 0..m {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing column {k}")))?
                .map_err(|e| Error::Parse(e.to_string()))?;
            let values = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("column {k}: {e}")))?;
            if values.len() != 2 * m {
                return Err(Error::Parse(format!(
                    "column {k}: expected {} values, got {}",
                    2 * m,
                    values.len()
                )));
            }
            for j in 0..m {
                entries[(j, k)] = Complex64::new(values[2 * j], values[2 * j + 1]);
            }
        }
        Self::new(entries, mode)
    }
}

/// Relative entrywise noise `A_ij (1 + δ E_ij)` with `‖E‖₂ = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    delta: f64,
    seed: u64,
}

impl NoiseModel {
    pub fn new(delta: f64, seed: u64) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise level must be finite and nonnegative, got {delta}"
            )));
        }
        Ok(Self { delta, seed })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Draws the `m × m` noise matrix for `seed`, scaled to unit spectral norm.
///
/// Entries are i.i.d. uniform on `[-1, 1]`, drawn row by row from a
/// `ChaCha8Rng` seeded with `seed_from_u64(seed)`, so the same seed gives
/// the same matrix on every platform.
pub fn noise_matrix(m: usize, seed: u64) -> Result<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            e[(i, j)] = rng.random_range(-1.0..=1.0);
        }
    }
    let norm = spectral_norm(&e.map(|x| Complex64::new(x, 0.0)))?;
    if norm == 0.0 {
        return Err(Error::Degenerate {
            what: "noise matrix norm",
            magnitude: 0.0,
        });
    }
    Ok(e / norm)
}

/// Returns `[A_ij (1 + δ E_ij)]` with a freshly drawn `E`.
pub fn add_noise(a: &OperatorMatrix, noise: &NoiseModel) -> Result<OperatorMatrix> {
    if noise.delta == 0.0 {
        return Ok(a.clone());
    }
    let e = noise_matrix(a.size(), noise.seed)?;
    let mut entries = a.entries.clone();
    for (z, &eij) in entries.iter_mut().zip(e.iter()) {
        *z *= 1.0 + noise.delta * eij;
    }
    OperatorMatrix::new(entries, a.mode)
}

/// `(A − A*) / 2i`, symmetrized so the result is exactly Hermitian.
pub fn imaginary_part(a: &OperatorMatrix) -> OperatorMatrix {
    let m = a.size();
    let half_over_i = Complex64::new(0.0, -0.5);
    let mut h = DMatrix::<Complex64>::zeros(m, m);
    for j in 0..m {
        h[(j, j)] = Complex64::new(((a.entries[(j, j)] - a.entries[(j, j)].conj()) * half_over_i).re, 0.0);
        for k in (j + 1)..m {
            let upper = (a.entries[(j, k)] - a.entries[(k, j)].conj()) * half_over_i;
            let lower = (a.entries[(k, j)] - a.entries[(j, k)].conj()) * half_over_i;
            let sym = (upper + lower.conj()) * 0.5;
            h[(j, k)] = sym;
            h[(k, j)] = sym.conj();
        }
    }
    OperatorMatrix {
        entries: h,
        mode: MatrixMode::ImaginaryPart,
    }
}

/// Full singular value decomposition `A = U Σ V*` with `σ₁ ≥ … ≥ σ_M ≥ 0`.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    singular_values: Vec<f64>,
    left: DMatrix<Complex64>,
    right_adjoint: DMatrix<Complex64>,
}

impl SvdFactors {
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Left singular vectors as matrix columns, aligned with
    /// [`SvdFactors::singular_values`].
    pub fn left_vectors(&self) -> &DMatrix<Complex64> {
        &self.left
    }

    /// Rows are the conjugated right singular vectors `vⱼ*`.
    pub fn right_adjoint(&self) -> &DMatrix<Complex64> {
        &self.right_adjoint
    }

    pub fn len(&self) -> usize {
        self.singular_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.singular_values.is_empty()
    }

    /// `Σ σⱼ uⱼ vⱼ*`.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let mut scaled = self.left.clone();
        for (mut col, &s) in scaled.column_iter_mut().zip(&self.singular_values) {
            col *= Complex64::new(s, 0.0);
        }
        scaled * &self.right_adjoint
    }
}

fn decompose(m: &DMatrix<Complex64>) -> Result<SvdFactors> {
    let size = m.nrows();
    if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
    }
    let svd = SVD::try_new(m.clone(), true, true, f64::EPSILON, SVD_MAX_ITERATIONS)
        .ok_or(Error::SvdFailed { size })?;
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::SvdFailed { size }),
    };

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let singular_values = order.iter().map(|&i| svd.singular_values[i].max(0.0)).collect();
    let left = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let right_adjoint = DMatrix::from_fn(order.len(), v_t.ncols(), |r, c| v_t[(order[r], c)]);
    Ok(SvdFactors {
        singular_values,
        left,
        right_adjoint,
    })
}

/// Factors `a`. Hermitian inputs go through the same routine; eigenvalue
/// signs end up in the pairing of left and right vectors.
pub fn svd(a: &OperatorMatrix) -> Result<SvdFactors> {
    decompose(&a.entries)
}

/// Largest singular value of `m`.
pub fn spectral_norm(m: &DMatrix<Complex64>) -> Result<f64> {
    if m.is_empty() {
        return Ok(0.0);
    }
    let svd = SVD::try_new(m.clone(), false, false, f64::EPSILON, SVD_MAX_ITERATIONS)
        .ok_or(Error::SvdFailed { size: m.nrows() })?;
    Ok(svd.singular_values.iter().cloned().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{kernel_matrix, sigma0, sigma_n, BoundaryParams, DiskGeometry, TruncationOrder};
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn fig1_matrix() -> OperatorMatrix {
        let params = BoundaryParams::new(c(2.0, -0.5), c(0.1, -1.0)).unwrap();
        let geom = DiskGeometry::new(0.2).unwrap();
        kernel_matrix(&params, &geom, TruncationOrder::new(10).unwrap(), 64).unwrap()
    }

    fn real_matrix(entries: &[f64], m: usize) -> OperatorMatrix {
        let d = DMatrix::from_row_slice(m, m, entries).map(|x| c(x, 0.0));
        OperatorMatrix::new(d, MatrixMode::RealCase).unwrap()
    }

    #[test]
    fn zero_delta_leaves_data_untouched() {
        let a = fig1_matrix();
        let noisy = add_noise(&a, &NoiseModel::new(0.0, 7).unwrap()).unwrap();
        assert_eq!(noisy, a);
    }

    #[test]
    fn noise_is_reproducible_for_fixed_seed() {
        let a = fig1_matrix();
        let model = NoiseModel::new(0.05, 11).unwrap();
        let first = add_noise(&a, &model).unwrap();
        let second = add_noise(&a, &model).unwrap();
        assert_eq!(first, second);
        let other = add_noise(&a, &NoiseModel::new(0.05, 12).unwrap()).unwrap();
        assert_ne!(first, other);
    }

    #[test]
    fn noise_matrix_has_unit_spectral_norm() {
        for seed in [0, 1, 99] {
            let e = noise_matrix(64, seed).unwrap();
            let norm = spectral_norm(&e.map(|x| c(x, 0.0))).unwrap();
            assert!((norm - 1.0).abs() <= 1e-12, "seed {seed}: {norm}");
        }
    }

    #[test]
    fn negative_delta_rejected() {
        assert!(NoiseModel::new(-0.1, 0).is_err());
        assert!(NoiseModel::new(f64::NAN, 0).is_err());
    }

    #[test]
    fn imaginary_part_of_hermitian_vanishes() {
        let mut h = DMatrix::from_fn(4, 4, |j, k| c((j + k) as f64, j as f64 - k as f64));
        for j in 0..4 {
            h[(j, j)] = c(j as f64 + 1.0, 0.0);
        }
        let a = OperatorMatrix::new(h, MatrixMode::ComplexCase).unwrap();
        let im = imaginary_part(&a);
        assert_eq!(im.mode(), MatrixMode::ImaginaryPart);
        assert!(im.entries().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn imaginary_part_of_i_identity_is_identity() {
        let a = OperatorMatrix::new(DMatrix::identity(3, 3) * c(0.0, 1.0), MatrixMode::ComplexCase).unwrap();
        let im = imaginary_part(&a);
        assert_eq!(im.entries(), &DMatrix::<Complex64>::identity(3, 3));
    }

    #[test]
    fn imaginary_part_is_exactly_hermitian_with_noise() {
        let a = add_noise(&fig1_matrix(), &NoiseModel::new(0.05, 3).unwrap()).unwrap();
        let im = imaginary_part(&a);
        assert_eq!(im.entries(), &im.entries().adjoint());
    }

    // The eigenvalues of (A − A*)/2i for the fig1 data carry the sign of
    // Im(γ), Im(μ): they are ≤ 0, while the quadratic form in the
    // φ·ψ̄ pairing, Im⟨f, A f⟩ = −f* Im(A) f, is ≥ 0.
    #[test]
    fn noise_free_imaginary_part_is_semidefinite() {
        let a = fig1_matrix();
        let im = imaginary_part(&a);
        let eig = SymmetricEigen::new(im.entries().clone()).eigenvalues;
        let max = eig.iter().cloned().fold(f64::MIN, f64::max);
        let min = eig.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max <= 1e-10, "max eigenvalue {max}");
        assert!(min < -1e-3, "min eigenvalue {min}");

        // The spectrum is {Im σ₀, |n| Im σₙ}.
        let geom = DiskGeometry::new(0.2).unwrap();
        let params = BoundaryParams::new(c(2.0, -0.5), c(0.1, -1.0)).unwrap();
        let most_negative = (1..=10)
            .map(|n| n as f64 * sigma_n(n, &params, &geom).unwrap().im)
            .fold(sigma0(&params, &geom).unwrap().im, f64::min);
        assert!((min - most_negative).abs() < 1e-10);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let f: Vec<Complex64> = (0..64).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let af = a.apply(&f);
            let pairing: Complex64 = f.iter().zip(&af).map(|(x, y)| x * y.conj()).sum();
            let norm2: f64 = f.iter().map(|x| x.norm_sqr()).sum();
            assert!(pairing.im >= -1e-10 * norm2);
        }
    }

    #[test]
    fn svd_of_identity() {
        let s = svd(&real_matrix(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], 3)).unwrap();
        for &v in s.singular_values() {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn svd_of_diagonal_sorts_and_recovers_basis() {
        let s = svd(&real_matrix(&[1.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 2.0], 3)).unwrap();
        let sv = s.singular_values();
        assert!((sv[0] - 3.0).abs() < 1e-14 && (sv[1] - 2.0).abs() < 1e-14 && (sv[2] - 1.0).abs() < 1e-14);
        for (col, expected_row) in [(0usize, 1usize), (1, 2), (2, 0)] {
            let u = s.left_vectors().column(col);
            assert!((u[expected_row].norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn svd_of_circulant_matches_symbol_multiset() {
        let params = BoundaryParams::new(c(2.0, -0.5), c(0.1, -1.0)).unwrap();
        let geom = DiskGeometry::new(0.2).unwrap();
        let n_max = 10;
        let a = kernel_matrix(&params, &geom, TruncationOrder::new(n_max).unwrap(), 64).unwrap();
        let mut expected = vec![sigma0(&params, &geom).unwrap().norm()];
        for n in 1..=n_max as i64 {
            let v = n as f64 * (sigma_n(n, &params, &geom).unwrap() - 1.0).norm();
            expected.push(v);
            expected.push(v);
        }
        expected.resize(64, 0.0);
        expected.sort_by(|a, b| b.total_cmp(a));
        let got = svd(&a).unwrap();
        for (g, e) in got.singular_values().iter().zip(&expected) {
            assert!((g - e).abs() <= 1e-10, "{g} vs {e}");
        }
    }

    #[test]
    fn matrix_csv_round_trip_is_exact() {
        let a = add_noise(&fig1_matrix(), &NoiseModel::new(0.1, 4).unwrap()).unwrap();
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# eit-rfm matrix M=64 mode=complex-case\n"));
        assert_eq!(text.lines().count(), 65);
        let back = OperatorMatrix::read_csv(&buf[..]).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn matrix_csv_rejects_truncated_input() {
        let text = "# eit-rfm matrix M=2 mode=real-case\n1,0,2,0\n";
        assert!(OperatorMatrix::read_csv(text.as_bytes()).is_err());
        assert!(OperatorMatrix::read_csv("garbage\n".as_bytes()).is_err());
    }

    fn arb_matrix() -> impl Strategy<Value = DMatrix<Complex64>> {
        (1usize..7).prop_flat_map(|m| {
            proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), m * m)
                .prop_map(move |v| DMatrix::from_iterator(m, m, v.into_iter().map(|(re, im)| c(re, im))))
        })
    }

    proptest! {
        #[test]
        fn svd_factors_satisfy_invariants(m in arb_matrix()) {
            let a = OperatorMatrix::new(m.clone(), MatrixMode::ComplexCase).unwrap();
            let s = svd(&a).unwrap();
            let sv = s.singular_values();
            prop_assert!(sv.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(sv.iter().all(|&x| x >= 0.0));
            let gram = s.left_vectors().adjoint() * s.left_vectors();
            for j in 0..gram.nrows() {
                for k in 0..gram.ncols() {
                    let target = if j == k { 1.0 } else { 0.0 };
                    prop_assert!((gram[(j, k)] - c(target, 0.0)).norm() <= 1e-10);
                }
            }
            let residual = spectral_norm(&(s.reconstruct() - &m)).unwrap();
            prop_assert!(residual <= 1e-10 * sv[0].max(f64::MIN_POSITIVE));
        }

        #[test]
        fn imaginary_part_is_hermitian(m in arb_matrix()) {
            let im = imaginary_part(&OperatorMatrix::new(m, MatrixMode::ComplexCase).unwrap());
            prop_assert_eq!(im.entries(), &im.entries().adjoint());
        }
    }
}
