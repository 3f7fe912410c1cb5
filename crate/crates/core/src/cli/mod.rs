//! The `csc` command line: `denoise`, `gridsearch` and `synth`.
//!
//! Exit codes: 0 on success, 1 for unreadable, unwritable or malformed files,
//! 2 for invalid configuration. Diagnostics go to standard error.

pub mod formats;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{CscError, Result};
use crate::pipeline::{
    add_noise, checkerboard, denoise, fallback_dictionary, grid_search, log_grid, piecewise_constant, psnr,
    DenoiseParams, GridSearchReport, GridSearchSpec, Method, NamedImage,
};
use formats::{read_dictionary, read_image, write_bytes, write_image, ImageFormat, RunConfigFile, TensorFile};

/// Header line of the grid-search CSV.
pub const CSV_VERSION_LINE: &str = "# csc-gridsearch v1";

#[derive(Parser, Debug)]
#[command(name = "csc", version, about = "Convolutional sparse coding denoising experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Denoise one image.
    Denoise(DenoiseArgs),
    /// Grid search over (lambda, mu) on one or more clean images.
    Gridsearch(GridArgs),
    /// Write the fallback dictionary or synthetic test images.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct SolverArgs {
    /// key=value run configuration; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dictionary tensor with dims M x P x P.
    #[arg(long)]
    dict: Option<PathBuf>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Lowpass regularization of the Tikhonov split.
    #[arg(long = "lambda-l")]
    lambda_l: Option<f64>,
    /// Patch stride for BPDN.
    #[arg(long, default_value_t = 1)]
    stride: usize,
}

#[derive(Args, Debug)]
struct DenoiseArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Clean image; when given, the output PSNR is printed.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Clean images; each is corrupted with seed + its index.
    #[arg(long, num_args = 1.., required = true)]
    images: Vec<PathBuf>,
    /// `start:stop:count-log`, or a single value.
    #[arg(long)]
    lambda_grid: Option<String>,
    #[arg(long)]
    mu_grid: Option<String>,
    /// Replace the lambda grid by this single value.
    #[arg(long)]
    fix_lambda: Option<f64>,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SynthImage {
    Piecewise,
    Checkerboard,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Write the fallback dictionary here.
    #[arg(long, conflicts_with = "image")]
    dict_out: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    filters: usize,
    /// Filter size with --dict-out, image size with --image.
    #[arg(long)]
    size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum)]
    image: Option<SynthImage>,
    /// Image destination, `<kind>.pgm` by default; `.csct` writes a tensor.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a noisy copy with this noise level.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    noisy_out: Option<PathBuf>,
    /// Number of regions of the piecewise-constant image.
    #[arg(long, default_value_t = 8)]
    regions: usize,
}

/// Runs the CLI on the process arguments and returns the exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Runs the CLI on explicit arguments (the first one is the program name).
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Denoise(a) => cmd_denoise(a),
        Command::Gridsearch(a) => cmd_gridsearch(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("csc: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &CscError) -> i32 {
    match e {
        CscError::Io { .. } | CscError::Format { .. } => 1,
        _ => 2,
    }
}

fn config_err(msg: impl Into<String>) -> CscError {
    CscError::ConfigInvalid(msg.into())
}

/// Command-line values merged over the optional config file.
struct Resolved {
    method: Method,
    params: DenoiseParams,
    sigma: f64,
    seed: u64,
    dict: PathBuf,
    mu_given: bool,
}

fn resolve(args: &SolverArgs, lambda: Option<f64>, mu: Option<f64>) -> Result<Resolved> {
    let file = match &args.config {
        Some(p) => RunConfigFile::read(p)?,
        None => RunConfigFile::default(),
    };
    let method = match &args.method {
        Some(m) => m.parse()?,
        None => file.method.unwrap_or(Method::Cbpdn),
    };
    let defaults = DenoiseParams::default();
    let mu_value = mu.or(file.mu);
    let params = DenoiseParams {
        lambda: lambda.or(file.lambda).unwrap_or(defaults.lambda),
        mu: mu_value.unwrap_or(0.0),
        rho: args.rho.or(file.rho),
        max_iter: args.max_iter.or(file.max_iter).unwrap_or(defaults.max_iter),
        tol: args.tol.or(file.tol).unwrap_or(defaults.tol),
        lambda_l: args.lambda_l.or(file.lambda_l).unwrap_or(defaults.lambda_l),
        stride: args.stride,
    };
    params.solver_config().validate()?;
    if !(params.lambda_l > 0.0) || !params.lambda_l.is_finite() {
        return Err(config_err(format!("lambda_L must be positive, got {}", params.lambda_l)));
    }
    if params.stride == 0 {
        return Err(config_err("stride must be at least 1"));
    }
    let sigma = args.sigma.or(file.sigma).unwrap_or(0.0);
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(config_err(format!("sigma must be >= 0, got {sigma}")));
    }
    let dict = args
        .dict
        .clone()
        .or(file.dict_path.map(PathBuf::from))
        .ok_or_else(|| config_err("no dictionary given (--dict or dict_path)"))?;
    Ok(Resolved {
        method,
        params,
        sigma,
        seed: args.seed.or(file.seed).unwrap_or(0),
        dict,
        mu_given: mu_value.is_some_and(|m| m != 0.0),
    })
}

fn cmd_denoise(a: DenoiseArgs) -> Result<()> {
    let r = resolve(&a.solver, a.lambda, a.mu)?;
    if r.mu_given && !r.method.uses_mu() {
        return Err(config_err(format!("mu not applicable to method {}", r.method)));
    }
    let dict = read_dictionary(&r.dict)?;
    let (input, format) = read_image(&a.input)?;
    let reference = a.reference.as_deref().map(read_image).transpose()?;
    let noisy = add_noise(&input, r.sigma, r.seed)?;
    let out = denoise(&noisy, r.method, &dict, &r.params)?;
    write_image(&a.out, &out, format)?;
    if let Some((clean, _)) = reference {
        println!("psnr {:.4}", psnr(&clean, &out)?);
    }
    Ok(())
}

/// Parses `start:stop:count-log` or a single number.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || config_err(format!("bad grid {spec:?}, expected start:stop:count-log"));
    let parts: Vec<&str> = spec.split(':').collect();
    match parts[..] {
        [v] => {
            let v: f64 = v.trim().parse().map_err(|_| bad())?;
            if !(v >= 0.0) || !v.is_finite() {
                return Err(bad());
            }
            Ok(vec![v])
        }
        [a, b, c] => {
            let count = c.trim().strip_suffix("-log").ok_or_else(bad)?;
            let start: f64 = a.trim().parse().map_err(|_| bad())?;
            let stop: f64 = b.trim().parse().map_err(|_| bad())?;
            let count: usize = count.parse().map_err(|_| bad())?;
            log_grid(start, stop, count)
        }
        _ => Err(bad()),
    }
}

fn image_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// The CSV report: one row per cell, then the summary rows.
pub fn report_csv(report: &GridSearchReport) -> String {
    let mut out = String::new();
    let m = report.method.name();
    let cell = |p: Option<f64>| p.map_or_else(|| "failed".to_string(), |v| v.to_string());
    writeln!(out, "{CSV_VERSION_LINE}").unwrap();
    writeln!(out, "method,image,lambda,mu,psnr").unwrap();
    for (li, l) in report.lambda_grid.iter().enumerate() {
        for (mi, mu) in report.mu_grid.iter().enumerate() {
            for (ii, name) in report.image_names.iter().enumerate() {
                writeln!(out, "{m},{name},{l},{mu},{}", cell(report.psnr(li, mi, ii))).unwrap();
            }
        }
    }
    for (name, best) in report.image_names.iter().zip(report.best_per_image()) {
        match best {
            Some(b) => writeln!(out, "{m},best-per-image:{name},{},{},{}", b.lambda, b.mu, b.psnr),
            None => writeln!(out, "{m},best-per-image:{name},,,failed"),
        }
        .unwrap();
    }
    match report.best_average() {
        Some((b, _)) => writeln!(out, "{m},best-average,{},{},{}", b.lambda, b.mu, b.psnr),
        None => writeln!(out, "{m},best-average,,,failed"),
    }
    .unwrap();
    out
}

fn cmd_gridsearch(a: GridArgs) -> Result<()> {
    let r = resolve(&a.solver, None, None)?;
    let lambda_grid = match (a.fix_lambda, &a.lambda_grid) {
        (Some(l), _) => parse_grid(&l.to_string())?,
        (None, Some(g)) => parse_grid(g)?,
        (None, None) => vec![r.params.lambda],
    };
    let mu_grid = match &a.mu_grid {
        Some(_) if !r.method.uses_mu() => {
            return Err(config_err(format!("mu not applicable to method {}", r.method)));
        }
        Some(g) => parse_grid(g)?,
        None if r.method.uses_mu() => return Err(config_err(format!("{} needs --mu-grid", r.method))),
        None => vec![0.0],
    };
    let dict = read_dictionary(&r.dict)?;
    let images = a
        .images
        .iter()
        .map(|p| {
            Ok(NamedImage {
                name: image_name(p),
                image: read_image(p)?.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let spec = GridSearchSpec {
        method: r.method,
        lambda_grid,
        mu_grid,
        noise_sigma: r.sigma,
        seed: r.seed,
        base: r.params,
    };
    let report = grid_search(&spec, &images, &dict)?;
    for (l, m, i, e) in &report.failures {
        eprintln!(
            "csc: cell lambda={} mu={} image={} failed: {e}",
            report.lambda_grid[*l], report.mu_grid[*m], report.image_names[*i]
        );
    }
    let csv = report_csv(&report);
    match &a.out {
        Some(p) => write_bytes(p, csv.as_bytes()),
        None => std::io::stdout().write_all(csv.as_bytes()).map_err(|e| CscError::Io {
            path: "<stdout>".into(),
            source: e,
        }),
    }
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    if let Some(p) = &a.dict_out {
        let dict = fallback_dictionary(a.filters, a.size.unwrap_or(8), a.seed)?;
        TensorFile::from_dictionary(&dict).write(p)?;
    }
    if let Some(kind) = a.image {
        let size = a.size.unwrap_or(64);
        if size == 0 {
            return Err(config_err("image size must be positive"));
        }
        let (img, name) = match kind {
            SynthImage::Piecewise => (piecewise_constant(size, a.regions, a.seed), "piecewise"),
            SynthImage::Checkerboard => (checkerboard(size, (size / 8).max(1)), "checkerboard"),
        };
        let out = a.out.clone().unwrap_or_else(|| PathBuf::from(format!("{name}.pgm")));
        write_image(&out, &img, ImageFormat::from_extension(&out))?;
        if let Some(sigma) = a.sigma {
            let noisy = add_noise(&img, sigma, a.seed)?;
            let path = a.noisy_out.clone().unwrap_or_else(|| {
                let stem = image_name(&out);
                out.with_file_name(format!("{stem}_noisy.{}", out.extension().map_or("pgm".into(), |e| e.to_string_lossy())))
            });
            write_image(&path, &noisy, ImageFormat::from_extension(&path))?;
        }
    } else if a.dict_out.is_none() {
        return Err(config_err("synth needs --dict-out or --image"));
    }
    Ok(())
}
