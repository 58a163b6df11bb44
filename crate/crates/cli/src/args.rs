use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "polycurve",
    version,
    about = "Decomposition, Jacobian and operator checks for polynomial curves in C^3",
    long_about = "Reads a curve file of the form {\"N\": 3, \"components\": [p1, p2, p3]}, \
                  each polynomial an array of [re, im] pairs with the constant term first, \
                  and writes JSON/SVG/CSV reports into the output directory.\n\n\
                  Exit codes: 0 success, 2 usage, 3 input or parse error, \
                  4 numerical failure, 5 a checked property failed."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decompose the plane, sample the geometric bound on every region and
    /// draw the region map. Writes decomposition.json, verification.json and
    /// regions.svg.
    Analyze(AnalyzeArgs),
    /// Compare the line-integral Jacobian with the direct determinant on
    /// random triples. Writes jacobian_check.json.
    JacobianCheck(JacobianArgs),
    /// Operator estimates.
    #[command(subcommand)]
    Operator(OperatorCommand),
    /// Recompute the worst witnesses stored in a verification report.
    /// Writes replay.json.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory, created if missing.
    #[arg(long, env = "POLYCURVE_OUT_DIR", default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CurveArg {
    /// Curve file (JSON).
    #[arg(long)]
    pub curve: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub curve: CurveArg,
    /// Sector aperture; must divide 2*pi. Defaults to 2*pi / (28 (N + 1)).
    #[arg(long, value_parser = positive)]
    pub eps: Option<f64>,
    /// Radius of the disk the decomposition covers.
    #[arg(long, value_parser = positive)]
    pub working_radius: Option<f64>,
    /// Triples sampled per region.
    #[arg(long, default_value_t = 10_000, value_parser = positive_count)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
    /// Width of regions.svg in pixels.
    #[arg(long, default_value_t = 800, value_parser = clap::value_parser!(u32).range(1..))]
    pub svg_width: u32,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct JacobianArgs {
    #[command(flatten)]
    pub curve: CurveArg,
    /// Number of random triples drawn.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long)]
    pub seed: u64,
    /// Gauss-Legendre nodes per segment (at least 4).
    #[arg(long, default_value_t = 16)]
    pub nodes: usize,
    /// Triples are drawn uniformly from the square |Re|, |Im| <= this.
    #[arg(long, default_value_t = 1.5, value_parser = positive)]
    pub box_half_width: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Subcommand)]
pub enum OperatorCommand {
    /// Monte Carlo estimate of <T chi_E, chi_F> and the derived quantities.
    /// Writes pairing.json and pairing.csv.
    Pairing(PairingArgs),
    /// Measure of the small ball B_x against x/8. Writes ball_measure.json.
    BallMeasure(BallArgs),
    /// Discrete L^q / L^p(lambda) ratios of the extension operator.
    /// Writes scan.json and scan.csv.
    Scan(ScanArgs),
    /// Checks |E f(z)| <= ||f||_{L^1(lambda)} at random points for three test
    /// functions. Writes extension_check.json.
    ExtensionCheck(ExtensionArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Kind {
    Ball,
    Box,
}

#[derive(Debug, Args)]
pub struct PairingArgs {
    #[command(flatten)]
    pub curve: CurveArg,
    #[arg(long, value_enum, default_value = "ball")]
    pub e_kind: Kind,
    /// Six comma-separated reals: re, im of each coordinate.
    #[arg(long, default_value = "0,0,0,0,0,0", value_parser = point6)]
    pub e_center: [f64; 6],
    /// Radius or half-width of E.
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub e_size: f64,
    #[arg(long, value_enum, default_value = "ball")]
    pub f_kind: Kind,
    #[arg(long, default_value = "0,0,0,0,0,0", value_parser = point6)]
    pub f_center: [f64; 6],
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub f_size: f64,
    /// Radius of the parameter disk.
    #[arg(long, default_value_t = 2.0, value_parser = positive)]
    pub disk_radius: f64,
    #[arg(long, default_value_t = 100_000, value_parser = positive_count)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct BallArgs {
    #[arg(long, value_parser = positive)]
    pub x: f64,
    #[arg(long, default_value_t = 0)]
    pub k_prime: u32,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub curve: CurveArg,
    /// Interpolation parameters in (0, 1); each adds the pair
    /// (6/(3+theta), 6/(2+theta)).
    #[arg(long, value_delimiter = ',')]
    pub theta: Vec<f64>,
    /// Extension exponents q > 7, each paired with p = q/(q-6).
    #[arg(long, value_delimiter = ',')]
    pub q: Vec<f64>,
    /// Also scan the L^1 -> L^inf endpoint.
    #[arg(long)]
    pub endpoint: bool,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "indicator,bump,modulated"
    )]
    pub functions: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub dilations: Vec<f64>,
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub grid_half_width: f64,
    #[arg(long, default_value_t = 4, value_parser = positive_count)]
    pub grid_points: usize,
    /// Starting radial nodes of the extension quadrature.
    #[arg(long, default_value_t = 16, value_parser = positive_count)]
    pub nodes: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ExtensionArgs {
    #[command(flatten)]
    pub curve: CurveArg,
    #[arg(long, default_value_t = 50, value_parser = positive_count)]
    pub points: usize,
    /// Points are drawn uniformly from the cube of this half-width in R^6.
    #[arg(long, default_value_t = 3.0, value_parser = positive)]
    pub half_width: f64,
    #[arg(long, default_value_t = 16, value_parser = positive_count)]
    pub nodes: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[command(flatten)]
    pub curve: CurveArg,
    /// verification.json written by `analyze`.
    #[arg(long)]
    pub report: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be positive and finite, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn positive_count(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn point6(s: &str) -> Result<[f64; 6], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into()
        .map_err(|v: Vec<f64>| format!("expected 6 numbers, got {}", v.len()))
}
