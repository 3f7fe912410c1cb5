//! Denoising experiment: lowpass/highpass split, noise, PSNR, per-method
//! denoising and grid search over `(λ, μ)`.

mod rng;
mod synth;

pub use rng::SplitMix64;
pub use synth::{checkerboard, fallback_dictionary, piecewise_constant};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::blocks::{aggregate_patches, bpdn_solve, extract_patches, synthesize_patches, BpdnConfig, DenseDictionary};
use crate::error::{CscError, Result};
use crate::solvers::{solve, SolverConfig, Variant};
use crate::spectral::{make_grad_filters, Dictionary, Fft2, Image};

/// Lowpass regularization used by the denoising protocol.
pub const DEFAULT_LAMBDA_L: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SplitImage {
    pub lowpass: Image,
    pub highpass: Image,
}

/// Gradient-penalized least-squares lowpass, `l̂ = ŝ / (1 + λ_L(|ĝ0|² + |ĝ1|²))`,
/// and the residual highpass `s − l`.
pub fn tikhonov_split(s: &Image, lambda_l: f64) -> Result<SplitImage> {
    if !(lambda_l > 0.0) || !lambda_l.is_finite() {
        return Err(CscError::NonpositiveParameter {
            name: "lambda_L",
            value: lambda_l,
        });
    }
    let (h, w) = s.dims();
    let fft = Fft2::new(h, w);
    let power = make_grad_filters().power_sum(h, w);
    let mut spec = fft.forward_real(s.data());
    for (v, p) in spec.iter_mut().zip(&power) {
        *v /= 1.0 + lambda_l * p;
    }
    let lowpass = Image::new(h, w, fft.inverse_real(&spec))?;
    let high: Vec<f64> = s.data().iter().zip(lowpass.data()).map(|(a, b)| a - b).collect();
    Ok(SplitImage {
        lowpass,
        highpass: Image::new(h, w, high)?,
    })
}

/// Adds i.i.d. `N(0, σ²)` noise from [`SplitMix64`] seeded with `seed`, in
/// row-major pixel order. No clipping.
pub fn add_noise(s: &Image, sigma: f64, seed: u64) -> Result<Image> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(CscError::ConfigInvalid(format!("sigma must be >= 0, got {sigma}")));
    }
    let mut out = s.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let mut rng = SplitMix64::new(seed);
    out.data_mut().iter_mut().for_each(|v| *v += sigma * rng.next_normal());
    Ok(out)
}

/// PSNR in dB for peak 1. Identical images give `+∞`.
pub fn psnr(reference: &Image, test: &Image) -> Result<f64> {
    if reference.dims() != test.dims() {
        return Err(CscError::DimensionMismatch(format!(
            "{:?} vs {:?}",
            reference.dims(),
            test.dims()
        )));
    }
    let se: f64 = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if se == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mse = se / reference.len() as f64;
    Ok(-10.0 * mse.log10())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Bpdn,
    Cbpdn,
    Grd,
    Stv,
    Vtv,
    Rtv,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Bpdn,
        Method::Cbpdn,
        Method::Grd,
        Method::Stv,
        Method::Vtv,
        Method::Rtv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Bpdn => "bpdn",
            Method::Cbpdn => "cbpdn",
            Method::Grd => "grd",
            Method::Stv => "stv",
            Method::Vtv => "vtv",
            Method::Rtv => "rtv",
        }
    }

    /// The convolutional solver behind this method, `None` for BPDN.
    pub fn variant(self) -> Option<Variant> {
        match self {
            Method::Bpdn => None,
            Method::Cbpdn => Some(Variant::Cbpdn),
            Method::Grd => Some(Variant::Grd),
            Method::Stv => Some(Variant::Stv),
            Method::Vtv => Some(Variant::Vtv),
            Method::Rtv => Some(Variant::Rtv),
        }
    }

    pub fn uses_mu(self) -> bool {
        self.variant().is_some_and(Variant::uses_mu)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = CscError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| CscError::ConfigInvalid(format!("unknown method {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenoiseParams {
    pub lambda: f64,
    pub mu: f64,
    pub rho: Option<f64>,
    pub max_iter: usize,
    pub tol: f64,
    pub lambda_l: f64,
    /// Patch stride for BPDN.
    pub stride: usize,
}

impl Default for DenoiseParams {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            lambda: s.lambda,
            mu: s.mu,
            rho: None,
            max_iter: s.max_iter,
            tol: s.rel_stop_tol,
            lambda_l: DEFAULT_LAMBDA_L,
            stride: 1,
        }
    }
}

impl DenoiseParams {
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            lambda: self.lambda,
            mu: self.mu,
            rho: self.rho,
            max_iter: self.max_iter,
            rel_stop_tol: self.tol,
            ..SolverConfig::default()
        }
    }
}

/// Splits `noisy`, sparse-codes the highpass with `method` and adds the
/// coded reconstruction back onto the lowpass.
///
/// BPDN uses the filters of `dict` as vectorized atoms on patches of the
/// filter size.
pub fn denoise(noisy: &Image, method: Method, dict: &Dictionary, params: &DenoiseParams) -> Result<Image> {
    let split = tikhonov_split(noisy, params.lambda_l)?;
    let (h, w) = noisy.dims();
    let recon = match method.variant() {
        Some(v) => solve(v, dict, &split.highpass, &params.solver_config())?.reconstruction,
        None => {
            let dense = DenseDictionary::from_filters(dict)?;
            let patches = extract_patches(&split.highpass, dict.filter_dims().0, params.stride)?;
            let cfg = BpdnConfig {
                alpha: None,
                rho: params.rho,
                max_iter: params.max_iter,
                rel_stop_tol: params.tol,
            };
            let z = bpdn_solve(&dense, &patches, params.lambda, &cfg)?;
            aggregate_patches(&synthesize_patches(&dense, &z, &patches)?, h, w)?
        }
    };
    let out: Vec<f64> = split
        .lowpass
        .data()
        .iter()
        .zip(recon.data())
        .map(|(l, r)| l + r)
        .collect();
    Image::new(h, w, out)
}

/// `count` logarithmically spaced values from `start` to `stop` inclusive.
pub fn log_grid(start: f64, stop: f64, count: usize) -> Result<Vec<f64>> {
    if !(start > 0.0 && stop > 0.0) || !start.is_finite() || !stop.is_finite() || count == 0 {
        return Err(CscError::ConfigInvalid(format!(
            "log grid needs positive endpoints and count, got {start}:{stop}:{count}"
        )));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let (a, b) = (start.ln(), stop.ln());
    Ok((0..count)
        .map(|i| match i {
            0 => start,
            i if i == count - 1 => stop,
            i => (a + (b - a) * i as f64 / (count - 1) as f64).exp(),
        })
        .collect())
}

/// Best grid point for one image or for the average over images.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridBest {
    pub lambda: f64,
    pub mu: f64,
    pub psnr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSearchReport {
    pub method: Method,
    pub lambda_grid: Vec<f64>,
    /// `[0.0]` for methods without a μ term.
    pub mu_grid: Vec<f64>,
    pub image_names: Vec<String>,
    /// PSNR of each noisy input against its clean image.
    pub noisy_psnr: Vec<f64>,
    /// Indexed `[lambda][mu][image]`, `None` where the cell failed.
    psnr: Vec<Option<f64>>,
    /// `(lambda index, mu index, image index, message)` for failed cells.
    pub failures: Vec<(usize, usize, usize, String)>,
}

impl GridSearchReport {
    fn index(&self, l: usize, m: usize, i: usize) -> usize {
        (l * self.mu_grid.len() + m) * self.image_names.len() + i
    }

    pub fn psnr(&self, lambda_idx: usize, mu_idx: usize, image_idx: usize) -> Option<f64> {
        self.psnr[self.index(lambda_idx, mu_idx, image_idx)]
    }

    fn points(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.lambda_grid.len()).flat_map(move |l| (0..self.mu_grid.len()).map(move |m| (l, m)))
    }

    /// Per-image optimum; the first grid point wins ties. `None` if every cell failed.
    pub fn best_per_image(&self) -> Vec<Option<GridBest>> {
        (0..self.image_names.len())
            .map(|i| {
                let mut best: Option<GridBest> = None;
                for (l, m) in self.points() {
                    if let Some(p) = self.psnr(l, m, i) {
                        if best.is_none_or(|b| p > b.psnr) {
                            best = Some(GridBest {
                                lambda: self.lambda_grid[l],
                                mu: self.mu_grid[m],
                                psnr: p,
                            });
                        }
                    }
                }
                best
            })
            .collect()
    }

    /// The grid point maximizing mean PSNR over images, among points where
    /// no image failed. Also returns the per-image PSNRs at that point.
    pub fn best_average(&self) -> Option<(GridBest, Vec<f64>)> {
        let mut best: Option<(GridBest, Vec<f64>)> = None;
        for (l, m) in self.points() {
            let vals: Option<Vec<f64>> = (0..self.image_names.len()).map(|i| self.psnr(l, m, i)).collect();
            let Some(vals) = vals else { continue };
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            if best.as_ref().is_none_or(|(b, _)| mean > b.psnr) {
                best = Some((
                    GridBest {
                        lambda: self.lambda_grid[l],
                        mu: self.mu_grid[m],
                        psnr: mean,
                    },
                    vals,
                ));
            }
        }
        best
    }
}

/// A clean image with a name for reporting.
#[derive(Clone, Debug)]
pub struct NamedImage {
    pub name: String,
    pub image: Image,
}

#[derive(Clone, Debug)]
pub struct GridSearchSpec {
    pub method: Method,
    pub lambda_grid: Vec<f64>,
    /// Ignored for methods without a μ term.
    pub mu_grid: Vec<f64>,
    pub noise_sigma: f64,
    /// Image `i` is corrupted with seed `seed + i`.
    pub seed: u64,
    /// Solver settings other than `λ` and `μ`.
    pub base: DenoiseParams,
}

/// Denoises every image at every grid point. Cells run in parallel; a failed
/// cell is recorded in the report rather than aborting the search.
pub fn grid_search(spec: &GridSearchSpec, images: &[NamedImage], dict: &Dictionary) -> Result<GridSearchReport> {
    if spec.lambda_grid.is_empty() || images.is_empty() {
        return Err(CscError::ConfigInvalid("grid search needs a lambda grid and images".into()));
    }
    let mu_grid = if spec.method.uses_mu() {
        if spec.mu_grid.is_empty() {
            return Err(CscError::ConfigInvalid(format!("{} needs a mu grid", spec.method)));
        }
        spec.mu_grid.clone()
    } else {
        vec![0.0]
    };
    let noisy: Vec<Image> = images
        .iter()
        .enumerate()
        .map(|(i, im)| add_noise(&im.image, spec.noise_sigma, spec.seed.wrapping_add(i as u64)))
        .collect::<Result<_>>()?;
    let noisy_psnr = images
        .iter()
        .zip(&noisy)
        .map(|(im, n)| psnr(&im.image, n))
        .collect::<Result<Vec<_>>>()?;

    let (nl, nm, ni) = (spec.lambda_grid.len(), mu_grid.len(), images.len());
    let cells: Vec<std::result::Result<f64, String>> = (0..nl * nm * ni)
        .into_par_iter()
        .map(|c| {
            let (l, m, i) = (c / (nm * ni), (c / ni) % nm, c % ni);
            let params = DenoiseParams {
                lambda: spec.lambda_grid[l],
                mu: mu_grid[m],
                ..spec.base.clone()
            };
            denoise(&noisy[i], spec.method, dict, &params)
                .and_then(|out| psnr(&images[i].image, &out))
                .map_err(|e| e.to_string())
        })
        .collect();

    let mut failures = Vec::new();
    let psnr = cells
        .into_iter()
        .enumerate()
        .map(|(c, r)| match r {
            Ok(p) => Some(p),
            Err(e) => {
                failures.push((c / (nm * ni), (c / ni) % nm, c % ni, e));
                None
            }
        })
        .collect();
    Ok(GridSearchReport {
        method: spec.method,
        lambda_grid: spec.lambda_grid.clone(),
        mu_grid,
        image_names: images.iter().map(|i| i.name.clone()).collect(),
        noisy_psnr,
        psnr,
        failures,
    })
}
