//! Experiment configuration, pipeline orchestration and file output.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;

use crate::data::{self, NoiseModel, OperatorMatrix};
use crate::forward::{self, BoundaryParams, CoefficientMode, DiskGeometry, TruncationOrder};
use crate::sampling::{self, FilterSpec, IndicatorField, LevelSet, DEFAULT_GRID, DEFAULT_R_MAX};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Complex,
    Real,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Complex => "complex",
            Mode::Real => "real",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complex" => Ok(Mode::Complex),
            "real" => Ok(Mode::Real),
            other => Err(Error::InvalidParameter(format!("unknown mode {other:?} (expected complex or real)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Fig1, Preset::Fig2, Preset::Fig3, Preset::Fig4];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown preset {s:?} (expected fig1..fig4)")))
    }
}

/// Everything needed to run one reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub rho: f64,
    pub gamma: Complex64,
    pub mu: Complex64,
    pub delta: f64,
    pub alpha: f64,
    pub p: f64,
    pub n_max: usize,
    pub m_grid: usize,
    pub grid_n: usize,
    pub r_max: f64,
    pub seed: u64,
    pub threshold: f64,
    pub out_csv: Option<PathBuf>,
    pub out_pgm: Option<PathBuf>,
    pub dump_matrix: Option<PathBuf>,
}

impl ExperimentConfig {
    /// The four reconstructions of circular inclusions; seed 0 by convention.
    pub fn preset(preset: Preset) -> Self {
        let (mode, rho, gamma, mu, delta, alpha, p, threshold) = match preset {
            Preset::Fig1 => (Mode::Complex, 0.2, (2.0, -0.5), (0.1, -1.0), 0.05, 1e-17, 1.0, 0.2),
            Preset::Fig2 => (Mode::Complex, 0.7, (2.0, -3.0), (1.0, -4.0), 0.1, 1e-4, 1.0, 0.2),
            Preset::Fig3 => (Mode::Real, 0.25, (1.2, 0.0), (0.5, 0.0), 0.05, 1e-15, 4.0, 0.1),
            Preset::Fig4 => (Mode::Real, 0.75, (0.6, 0.0), (1.6, 0.0), 0.1, 1e-5, 4.0, 0.07),
        };
        Self {
            mode,
            rho,
            gamma: Complex64::new(gamma.0, gamma.1),
            mu: Complex64::new(mu.0, mu.1),
            delta,
            alpha,
            p,
            n_max: TruncationOrder::DEFAULT.n_max(),
            m_grid: 64,
            grid_n: DEFAULT_GRID,
            r_max: DEFAULT_R_MAX,
            seed: 0,
            threshold,
            out_csv: None,
            out_pgm: None,
            dump_matrix: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let params = self.boundary_params()?;
        match (self.mode, params.mode()) {
            (Mode::Real, CoefficientMode::Real) | (Mode::Complex, CoefficientMode::Complex) => {}
            (Mode::Real, CoefficientMode::Complex) => {
                return Err(Error::InvalidParameter(
                    "real mode requires Im(gamma) = Im(mu) = 0".into(),
                ))
            }
            (Mode::Complex, CoefficientMode::Real) => {
                return Err(Error::InvalidParameter(
                    "complex mode requires Im(gamma) < 0 and Im(mu) < 0".into(),
                ))
            }
        }
        DiskGeometry::new(self.rho)?;
        NoiseModel::new(self.delta, self.seed)?;
        FilterSpec::spectral_cutoff(self.alpha)?;
        TruncationOrder::new(self.n_max)?;
        if !(self.p.is_finite() && self.p > 0.0) {
            return Err(Error::InvalidParameter(format!("p must be positive, got {}", self.p)));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        if !(self.r_max > 0.0 && self.r_max <= 1.0) {
            return Err(Error::InvalidParameter(format!("rmax must lie in (0, 1], got {}", self.r_max)));
        }
        if self.m_grid < 2 * self.n_max + 1 {
            return Err(Error::InvalidParameter(format!(
                "mgrid = {} cannot resolve nmax = {} (need at least {})",
                self.m_grid,
                self.n_max,
                2 * self.n_max + 1
            )));
        }
        if self.grid_n < sampling::MIN_GRID {
            return Err(Error::InvalidParameter(format!(
                "grid must be at least {}, got {}",
                sampling::MIN_GRID,
                self.grid_n
            )));
        }
        Ok(())
    }

    pub fn boundary_params(&self) -> Result<BoundaryParams> {
        BoundaryParams::new(self.gamma, self.mu)
    }
}

/// Summary numbers of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub retained: usize,
    pub r_est: f64,
    /// Mean `W` inside `|z| ≤ ρ/2` over mean `W` near `|z| = 0.9`.
    pub separation: Option<f64>,
    pub wall_seconds: f64,
    pub config: ExperimentConfig,
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.config;
        writeln!(f, "mode={}", c.mode.as_str())?;
        writeln!(f, "rho={}", c.rho)?;
        writeln!(f, "gamma={}{:+}i", c.gamma.re, c.gamma.im)?;
        writeln!(f, "mu={}{:+}i", c.mu.re, c.mu.im)?;
        writeln!(f, "delta={}", c.delta)?;
        writeln!(f, "alpha={:e}", c.alpha)?;
        writeln!(f, "p={}", c.p)?;
        writeln!(f, "nmax={}", c.n_max)?;
        writeln!(f, "mgrid={}", c.m_grid)?;
        writeln!(f, "grid={}", c.grid_n)?;
        writeln!(f, "rmax={}", c.r_max)?;
        writeln!(f, "seed={}", c.seed)?;
        writeln!(f, "threshold={}", c.threshold)?;
        writeln!(f, "sigma_max={:e}", self.sigma_max)?;
        writeln!(f, "sigma_min={:e}", self.sigma_min)?;
        writeln!(f, "retained={}", self.retained)?;
        writeln!(f, "r_est={}", self.r_est)?;
        match self.separation {
            Some(s) => writeln!(f, "separation={s:e}")?,
            None => writeln!(f, "separation=nan")?,
        }
        write!(f, "wall_seconds={:.3}", self.wall_seconds)
    }
}

/// In-memory products of a run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub data: OperatorMatrix,
    pub field: IndicatorField,
    pub level: LevelSet,
}

/// kernel_matrix → add_noise → (imaginary_part) → svd → scan → level_set.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    let started = Instant::now();
    config.validate()?;
    let params = config.boundary_params()?;
    let geom = DiskGeometry::new(config.rho)?;
    let trunc = TruncationOrder::new(config.n_max)?;

    let clean = forward::kernel_matrix(&params, &geom, trunc, config.m_grid).map_err(|e| e.context("assembling kernel"))?;
    let noisy = data::add_noise(&clean, &NoiseModel::new(config.delta, config.seed)?)
        .map_err(|e| e.context("adding noise"))?;
    let operator = match config.mode {
        Mode::Complex => data::imaginary_part(&noisy),
        Mode::Real => noisy,
    };
    let factors = data::svd(&operator).map_err(|e| e.context("factoring data matrix"))?;
    let filter = FilterSpec::spectral_cutoff(config.alpha)?;
    let field = sampling::scan(&factors, config.grid_n, &filter, config.p, config.r_max)
        .map_err(|e| e.context(format!("scanning with alpha = {:e}", config.alpha)))?;
    let level = sampling::level_set(&field, config.threshold)?;

    let sv = factors.singular_values();
    let report = RunReport {
        sigma_max: sv.first().copied().unwrap_or(0.0),
        sigma_min: sv.last().copied().unwrap_or(0.0),
        retained: sv.iter().filter(|&&s| filter.factor(s) > 0.0).count(),
        r_est: level.r_est,
        separation: sampling::separation(&field, config.rho),
        wall_seconds: started.elapsed().as_secs_f64(),
        config: config.clone(),
    };
    Ok(RunOutput {
        report,
        data: operator,
        field,
        level,
    })
}

/// Runs `config` and writes whichever outputs it names.
pub fn execute(config: &ExperimentConfig) -> Result<RunReport> {
    let out = run(config)?;
    if let Some(path) = &config.dump_matrix {
        let file = create(path)?;
        let mut w = BufWriter::new(file);
        out.data
            .write_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(|source| io_error(path, source))?;
    }
    if config.out_csv.is_some() || config.out_pgm.is_some() {
        export_field(&out.field, config.out_csv.as_deref(), config.out_pgm.as_deref())?;
    }
    Ok(out.report)
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| io_error(path, source))
}

/// `x,y,w` header, one row per present point in row-major order.
pub fn write_csv<W: Write>(field: &IndicatorField, mut out: W) -> std::io::Result<()> {
    writeln!(out, "x,y,w")?;
    for (_, _, x, y, w) in field.present() {
        writeln!(out, "{x},{y},{w}")?;
    }
    Ok(())
}

/// Binary 8-bit PGM, `grid_n × grid_n`, pixel `round(255 w)`, absent
/// points black, first row at the top (`y ≈ +1`).
pub fn write_pgm<W: Write>(field: &IndicatorField, mut out: W) -> std::io::Result<()> {
    let n = field.grid_n();
    write!(out, "P5\n{n} {n}\n255\n")?;
    let mut pixels = Vec::with_capacity(n * n);
    for row in 0..n {
        for col in 0..n {
            let w = field.w(row, col).unwrap_or(0.0);
            pixels.push((255.0 * w).round().clamp(0.0, 255.0) as u8);
        }
    }
    out.write_all(&pixels)
}

/// Reads back `(x, y, w)` triples written by [`write_csv`].
pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<(f64, f64, f64)>> {
    let mut lines = input.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == "x,y,w" => {}
        _ => return Err(Error::Parse("missing x,y,w header".into())),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let line = line.map_err(|e| Error::Parse(e.to_string()))?;
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", i + 2)))?;
            match vals[..] {
                [x, y, w] => Ok((x, y, w)),
                _ => Err(Error::Parse(format!("line {}: expected 3 fields", i + 2))),
            }
        })
        .collect()
}

pub fn export_field(field: &IndicatorField, csv: Option<&Path>, pgm: Option<&Path>) -> Result<()> {
    if field.present_count() == 0 {
        return Err(Error::EmptyField);
    }
    if let Some(path) = csv {
        let mut w = BufWriter::new(create(path)?);
        write_csv(field, &mut w)
            .and_then(|_| w.flush())
            .map_err(|source| io_error(path, source))?;
    }
    if let Some(path) = pgm {
        let mut w = BufWriter::new(create(path)?);
        write_pgm(field, &mut w)
            .and_then(|_| w.flush())
            .map_err(|source| io_error(path, source))?;
    }
    Ok(())
}

/// Opens `path` for [`read_csv`].
pub fn open_csv(path: &Path) -> Result<Vec<(f64, f64, f64)>> {
    let file = File::open(path).map_err(|source| io_error(path, source))?;
    read_csv(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_field() -> IndicatorField {
        IndicatorField::from_raw(2, 1.0, 1.0, vec![Some(1.0), Some(0.5), Some(0.25), Some(0.0)]).unwrap()
    }

    #[test]
    fn pgm_quantization() {
        let mut buf = Vec::new();
        write_pgm(&toy_field(), &mut buf).unwrap();
        let header = b"P5\n2 2\n255\n";
        assert_eq!(&buf[..header.len()], header);
        assert_eq!(&buf[header.len()..], &[255, 128, 64, 0]);
    }

    #[test]
    fn pgm_marks_absent_points_black() {
        let f = IndicatorField::from_raw(2, 1.0, 1.0, vec![None, Some(1.0), Some(0.5), None]).unwrap();
        let mut buf = Vec::new();
        write_pgm(&f, &mut buf).unwrap();
        assert_eq!(&buf[buf.len() - 4..], &[0, 255, 128, 0]);
    }

    #[test]
    fn csv_round_trip() {
        let f = toy_field();
        let mut buf = Vec::new();
        write_csv(&f, &mut buf).unwrap();
        let rows = read_csv(&buf[..]).unwrap();
        assert_eq!(rows.len(), 4);
        let expected = [(-0.5, 0.5, 1.0), (0.5, 0.5, 0.5), (-0.5, -0.5, 0.25), (0.5, -0.5, 0.0)];
        for (got, want) in rows.iter().zip(expected) {
            assert!((got.0 - want.0).abs() < 1e-12 && (got.1 - want.1).abs() < 1e-12);
            assert!((got.2 - want.2).abs() < 1e-6);
        }
    }

    #[test]
    fn csv_reader_rejects_garbage() {
        assert!(read_csv("a,b\n".as_bytes()).is_err());
        assert!(read_csv("x,y,w\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn presets_have_expected_parameters() {
        let f1 = ExperimentConfig::preset(Preset::Fig1);
        assert_eq!((f1.mode, f1.rho, f1.delta, f1.alpha, f1.p, f1.threshold), (Mode::Complex, 0.2, 0.05, 1e-17, 1.0, 0.2));
        assert_eq!((f1.gamma, f1.mu), (Complex64::new(2.0, -0.5), Complex64::new(0.1, -1.0)));
        let f2 = ExperimentConfig::preset(Preset::Fig2);
        assert_eq!((f2.mode, f2.rho, f2.delta, f2.alpha, f2.p, f2.threshold), (Mode::Complex, 0.7, 0.1, 1e-4, 1.0, 0.2));
        assert_eq!((f2.gamma, f2.mu), (Complex64::new(2.0, -3.0), Complex64::new(1.0, -4.0)));
        let f3 = ExperimentConfig::preset(Preset::Fig3);
        assert_eq!((f3.mode, f3.rho, f3.delta, f3.alpha, f3.p, f3.threshold), (Mode::Real, 0.25, 0.05, 1e-15, 4.0, 0.1));
        assert_eq!((f3.gamma, f3.mu), (Complex64::new(1.2, 0.0), Complex64::new(0.5, 0.0)));
        let f4 = ExperimentConfig::preset(Preset::Fig4);
        assert_eq!((f4.mode, f4.rho, f4.delta, f4.alpha, f4.p, f4.threshold), (Mode::Real, 0.75, 0.1, 1e-5, 4.0, 0.07));
        assert_eq!((f4.gamma, f4.mu), (Complex64::new(0.6, 0.0), Complex64::new(1.6, 0.0)));
        for p in Preset::ALL {
            let c = ExperimentConfig::preset(p);
            assert_eq!((c.n_max, c.m_grid, c.grid_n, c.seed), (10, 64, 128, 0));
            c.validate().unwrap();
        }
    }

    #[test]
    fn mode_must_match_coefficients() {
        let mut c = ExperimentConfig::preset(Preset::Fig1);
        c.mode = Mode::Real;
        assert_eq!(c.validate().unwrap_err().exit_code(), 1);
        let mut c = ExperimentConfig::preset(Preset::Fig3);
        c.mode = Mode::Complex;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::preset(Preset::Fig1);
        c.mu = Complex64::new(0.1, 0.5);
        assert!(c.validate().is_err());
    }

    #[test]
    fn oversized_alpha_is_a_numerical_failure() {
        let mut c = ExperimentConfig::preset(Preset::Fig3);
        c.grid_n = 16;
        c.alpha = 1e6;
        let err = run(&c).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{err}");
    }

    #[test]
    fn report_lines_are_key_value() {
        let mut c = ExperimentConfig::preset(Preset::Fig2);
        c.grid_n = 24;
        let report = run(&c).unwrap().report;
        let text = report.to_string();
        for line in text.lines() {
            let (k, v) = line.split_once('=').unwrap();
            assert!(!k.is_empty() && !v.is_empty());
        }
        assert!(text.contains("mode=complex\n"));
        assert!(report.sigma_max.is_finite() && report.sigma_min.is_finite() && report.r_est.is_finite());
    }
}
