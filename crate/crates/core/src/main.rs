use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use num_complex::Complex64;

use eit_rfm::cli::{execute, ExperimentConfig, Mode, Preset};
use eit_rfm::Result;

/// Image a delaminated circular inclusion in the unit disk with the
/// regularized factorization method.
///
/// Flags override the preset (fig1 when no preset is given).
#[derive(Debug, Parser)]
#[command(name = "eit-rfm", version)]
struct Args {
    /// fig1, fig2, fig3 or fig4
    #[arg(long)]
    preset: Option<String>,
    /// complex or real
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma_im: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    mu_re: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    mu_im: Option<f64>,
    /// Relative noise level
    #[arg(long)]
    delta: Option<f64>,
    /// Spectral cut-off parameter
    #[arg(long)]
    alpha: Option<f64>,
    /// Decay exponent of the imaging functional
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    nmax: Option<usize>,
    /// Boundary collocation points
    #[arg(long)]
    mgrid: Option<usize>,
    /// Sampling lattice points per side
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Level for the reconstructed boundary
    #[arg(long)]
    threshold: Option<f64>,
    /// Sampling radius cut-off
    #[arg(long)]
    rmax: Option<f64>,
    #[arg(long)]
    out_csv: Option<PathBuf>,
    #[arg(long)]
    out_pgm: Option<PathBuf>,
    /// Also write the (noisy) data matrix as CSV
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
}

fn build_config(args: Args) -> Result<ExperimentConfig> {
    let preset = match &args.preset {
        Some(name) => name.parse::<Preset>()?,
        None => Preset::Fig1,
    };
    let mut c = ExperimentConfig::preset(preset);
    if let Some(mode) = &args.mode {
        c.mode = mode.parse::<Mode>()?;
    }
    c.gamma = Complex64::new(args.gamma_re.unwrap_or(c.gamma.re), args.gamma_im.unwrap_or(c.gamma.im));
    c.mu = Complex64::new(args.mu_re.unwrap_or(c.mu.re), args.mu_im.unwrap_or(c.mu.im));
    c.rho = args.rho.unwrap_or(c.rho);
    c.delta = args.delta.unwrap_or(c.delta);
    c.alpha = args.alpha.unwrap_or(c.alpha);
    c.p = args.p.unwrap_or(c.p);
    c.n_max = args.nmax.unwrap_or(c.n_max);
    c.m_grid = args.mgrid.unwrap_or(c.m_grid);
    c.grid_n = args.grid.unwrap_or(c.grid_n);
    c.seed = args.seed.unwrap_or(c.seed);
    c.threshold = args.threshold.unwrap_or(c.threshold);
    c.r_max = args.rmax.unwrap_or(c.r_max);
    c.out_csv = args.out_csv;
    c.out_pgm = args.out_pgm;
    c.dump_matrix = args.dump_matrix;
    Ok(c)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match build_config(args).and_then(|c| execute(&c)) {
        Ok(report) => {
            println!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
