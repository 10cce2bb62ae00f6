use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sqkit::affine::AffinePose;
use sqkit::canonical::{canonicalize, ANISOTROPY_TOL};
use sqkit::cloud::PointCloud;
use sqkit::fitting::{fit, FitConfig};
use sqkit::fps::farthest_point_sample;
use sqkit::io::params::ParamsFile;
use sqkit::io::report::{evaluate, EvalOptions};
use sqkit::io::synth::{gen_synthetic_record, GenConfig};
use sqkit::io::{parse_ply, write_ply};
use sqkit::shape_space::ShapeGrid;

/// Superquadric fitting, canonicalization and pose evaluation.
#[derive(Parser)]
#[command(name = "sqkit", version, about)]
struct Cli {
    /// Reject unknown fields in JSON inputs.
    #[arg(long, global = true)]
    strict: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a superquadric to a point cloud and write its canonical parameters.
    Fit(FitArgs),
    /// Sample surface points from a parameter file.
    Sample(SampleArgs),
    /// Fold a parameter file into the eps2 <= 1 range.
    Canon(CanonArgs),
    /// Score estimated parameters against ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic (noisy, partial) point cloud.
    Gen(GenArgs),
    /// Show the shape-category grid.
    Grid(GridArgs),
}

#[derive(Args)]
struct FitArgs {
    /// ASCII PLY point cloud, meters.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 6)]
    multistart: usize,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    /// Huber threshold in meters; 0 disables robust weighting.
    #[arg(long, default_value_t = 0.0)]
    noise_scale: f64,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    n: usize,
    /// Reduce the sample to this many points by farthest point sampling.
    #[arg(long)]
    fps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct CanonArgs {
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth parameter file; repeat for several pairs.
    #[arg(long, required = true)]
    gt: Vec<PathBuf>,
    /// Estimated parameter file, paired with `--gt` in order.
    #[arg(long, required = true)]
    est: Vec<PathBuf>,
    /// Template size.
    #[arg(long, default_value_t = 512)]
    points: usize,
    /// JSON file with fx, fy, cx, cy in pixels; enables MSPD.
    #[arg(long)]
    intrinsics: Option<PathBuf>,
    /// MSSD thresholds in meters.
    #[arg(long, value_delimiter = ',', default_values_t = [0.005, 0.01, 0.02, 0.05])]
    thresholds: Vec<f64>,
    /// MSPD thresholds in pixels.
    #[arg(long, value_delimiter = ',', default_values_t = [5.0, 10.0, 20.0, 50.0])]
    pixel_thresholds: Vec<f64>,
    /// Score estimates exactly as written, without symmetry re-labeling.
    #[arg(long)]
    no_align: bool,
    /// Report file; printed to stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    params: PathBuf,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    /// Gaussian noise sigma in meters.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Fraction of points kept by the half-space cut.
    #[arg(long, default_value_t = 1.0)]
    visible: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    /// Print the category table.
    #[arg(long, required = true)]
    list: bool,
}

/// Raised when no start of the fitter converged.
#[derive(Debug, thiserror::Error)]
#[error("fit did not converge (best RMS residual {rms:e} m)")]
struct NotConverged {
    rms: f64,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn read_params(path: &Path, strict: bool) -> Result<ParamsFile> {
    ParamsFile::from_json(&read_text(path)?, strict).with_context(|| format!("in {}", path.display()))
}

fn read_cloud(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_ply(&bytes).with_context(|| format!("in {}", path.display()))
}

fn row_major(m: &nalgebra::Matrix3<f64>) -> [[f64; 3]; 3] {
    [0, 1, 2].map(|r| [m[(r, 0)], m[(r, 1)], m[(r, 2)]])
}

fn run_fit(args: &FitArgs) -> Result<()> {
    let cloud = read_cloud(&args.input)?;
    let config = FitConfig {
        max_iterations: args.max_iters,
        multistart: args.multistart,
        noise_scale: args.noise_scale,
        seed: args.seed,
        ..FitConfig::default()
    };
    let result = fit(&cloud, &config)?;
    if !result.converged {
        return Err(NotConverged {
            rms: result.rms_residual,
        }
        .into());
    }
    let canon = canonicalize(&result.params, ANISOTROPY_TOL)?;
    let c = canon.canonical;
    let mut record = if canon.warped {
        ParamsFile::from_affine(c.eps1(), c.eps2(), &canon.affine())
    } else {
        ParamsFile::from_superquadric(&c)
    };
    record.category_id = Some(ShapeGrid::default().categorize(c.eps1(), c.eps2())?);
    write_file(&args.output, record.to_json().as_bytes())?;
    println!("rms_residual_m {:e}", result.rms_residual);
    Ok(())
}

fn run_sample(args: &SampleArgs, strict: bool) -> Result<()> {
    let record = read_params(&args.params, strict)?;
    let mut cloud = record.sample_surface(args.n, args.seed)?;
    if let Some(k) = args.fps {
        let picked = farthest_point_sample(&cloud, k, 0)?;
        cloud = cloud.select(&picked)?;
    }
    write_file(&args.output, &write_ply(&cloud)?)
}

fn run_canon(args: &CanonArgs, strict: bool) -> Result<()> {
    let record = read_params(&args.params, strict)?;
    let out = if record.eps[1] <= 1.0 {
        record
    } else {
        let canon = canonicalize(&record.superquadric()?, ANISOTROPY_TOL)?;
        let c = canon.canonical;
        ParamsFile {
            category_id: record.category_id,
            ..ParamsFile::from_affine(c.eps1(), c.eps2(), &canon.affine())
        }
    };
    let m = out.matrix()?;
    let pose = AffinePose::from_matrix(&m, &out.translation)?;
    write_file(&args.output, out.to_json().as_bytes())?;
    let summary = json!({
        "matrix": row_major(&m),
        "translation": pose.translation.as_slice(),
        "rotation": row_major(&pose.rotation),
        "scale": pose.scale.as_slice(),
        "shear": pose.shear.as_slice(),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn run_eval(args: &EvalArgs, strict: bool) -> Result<()> {
    if args.gt.len() != args.est.len() {
        bail!(sqkit::error::Error::InvalidArgument(format!(
            "{} --gt files but {} --est files",
            args.gt.len(),
            args.est.len()
        )));
    }
    let intrinsics = match &args.intrinsics {
        Some(path) => Some(
            sqkit::io::params::parse_intrinsics(&read_text(path)?, strict)
                .with_context(|| format!("in {}", path.display()))?,
        ),
        None => None,
    };
    let pairs = args
        .gt
        .iter()
        .zip(&args.est)
        .map(|(g, e)| Ok((read_params(g, strict)?, read_params(e, strict)?)))
        .collect::<Result<Vec<_>>>()?;
    let options = EvalOptions {
        template_points: args.points,
        thresholds: args.thresholds.clone(),
        pixel_thresholds: args.pixel_thresholds.clone(),
        intrinsics,
        align: !args.no_align,
        ..EvalOptions::default()
    };
    let report = evaluate(&pairs, &options)?;
    match &args.output {
        Some(path) => {
            write_file(path, report.to_json().as_bytes())?;
            for (i, pair) in report.pairs.iter().enumerate() {
                match pair.mspd {
                    Some(px) => println!("pair {i}: mssd_m {:e} mspd_px {px:e}", pair.mssd),
                    None => println!("pair {i}: mssd_m {:e}", pair.mssd),
                }
            }
        }
        None => print!("{}", report.to_json()),
    }
    Ok(())
}

fn run_gen(args: &GenArgs, strict: bool) -> Result<()> {
    let record = read_params(&args.params, strict)?;
    let config = GenConfig {
        noise_sigma: args.noise,
        visible_fraction: args.visible,
        n_points: args.n,
        seed: args.seed,
    };
    let cloud = gen_synthetic_record(&record, &config)?;
    write_file(&args.output, &write_ply(&cloud)?)
}

fn run_grid() -> Result<()> {
    println!("id\teps1\teps2");
    for c in ShapeGrid::default().categories() {
        println!("{}\t{}\t{}", c.id, c.eps1, c.eps2);
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fit(args) => run_fit(args),
        Command::Sample(args) => run_sample(args, cli.strict),
        Command::Canon(args) => run_canon(args, cli.strict),
        Command::Eval(args) => run_eval(args, cli.strict),
        Command::Gen(args) => run_gen(args, cli.strict),
        Command::Grid(_) => run_grid(),
    }
}

/// 1 usage, 2 unreadable or malformed files, 3 numerical failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<NotConverged>() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<sqkit::error::Error>() {
            return match e {
                e if e.is_numerical() => 3,
                sqkit::error::Error::Parse { .. } | sqkit::error::Error::Format(_) => 2,
                _ => 1,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
