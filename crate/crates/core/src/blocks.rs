//! Patch-based BPDN baseline: overlapping patch extraction, a dense-dictionary
//! ADMM solver and coverage-weighted reassembly.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::error::{CscError, Result};
use crate::prox::{soft, WeightVector};
use crate::solvers::default_rho;
use crate::spectral::{Dictionary, Image};

/// Vectorized square patches, one contiguous column per patch.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchMatrix {
    patch: usize,
    data: Vec<f64>,
    origins: Vec<(usize, usize)>,
}

impl PatchMatrix {
    /// Wraps existing columns (for example reconstructed patches).
    pub fn from_columns(patch: usize, data: Vec<f64>, origins: Vec<(usize, usize)>) -> Result<Self> {
        let dim = patch * patch;
        if patch == 0 || data.len() != dim * origins.len() {
            return Err(CscError::DimensionMismatch(format!(
                "{} values for {} patches of size {patch}x{patch}",
                data.len(),
                origins.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(CscError::NonFinite(i));
        }
        Ok(Self {
            patch,
            data,
            origins,
        })
    }

    pub fn patch_size(&self) -> usize {
        self.patch
    }

    pub fn patch_dim(&self) -> usize {
        self.patch * self.patch
    }

    pub fn num_patches(&self) -> usize {
        self.origins.len()
    }

    pub fn column(&self, k: usize) -> &[f64] {
        let d = self.patch_dim();
        &self.data[k * d..(k + 1) * d]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Top-left `(row, col)` of each patch.
    pub fn origins(&self) -> &[(usize, usize)] {
        &self.origins
    }
}

fn sweep(len: usize, patch: usize, stride: usize) -> Vec<usize> {
    let last = len - patch;
    let mut v: Vec<usize> = (0..=last).step_by(stride).collect();
    if *v.last().unwrap() != last {
        v.push(last);
    }
    v
}

/// All `patch × patch` windows at the given stride, in row-major origin order.
///
/// The last row and column of origins are always included so that every
/// pixel is covered whenever `stride <= patch`.
pub fn extract_patches(img: &Image, patch: usize, stride: usize) -> Result<PatchMatrix> {
    let (h, w) = img.dims();
    if patch == 0 || patch > h.min(w) {
        return Err(CscError::PatchTooLarge {
            patch,
            height: h,
            width: w,
        });
    }
    if stride == 0 {
        return Err(CscError::NonpositiveParameter {
            name: "stride",
            value: 0.0,
        });
    }
    let rows = sweep(h, patch, stride);
    let cols = sweep(w, patch, stride);
    let mut origins = Vec::with_capacity(rows.len() * cols.len());
    let mut data = Vec::with_capacity(rows.len() * cols.len() * patch * patch);
    for &r in &rows {
        for &c in &cols {
            origins.push((r, c));
            for i in 0..patch {
                let start = (r + i) * w + c;
                data.extend_from_slice(&img.data()[start..start + patch]);
            }
        }
    }
    Ok(PatchMatrix {
        patch,
        data,
        origins,
    })
}

/// Averages patch columns back into an image, weighting by per-pixel coverage.
///
/// The mean is accumulated incrementally, so identical overlapping copies
/// reproduce their common value exactly.
pub fn aggregate_patches(patches: &PatchMatrix, height: usize, width: usize) -> Result<Image> {
    let p = patches.patch;
    let mut acc = vec![0.0; height * width];
    let mut count = vec![0u32; height * width];
    for (k, &(r, c)) in patches.origins.iter().enumerate() {
        if r + p > height || c + p > width {
            return Err(CscError::DimensionMismatch(format!(
                "patch at ({r}, {c}) exceeds {height}x{width}"
            )));
        }
        let col = patches.column(k);
        for i in 0..p {
            for j in 0..p {
                let q = (r + i) * width + c + j;
                count[q] += 1;
                acc[q] += (col[i * p + j] - acc[q]) / count[q] as f64;
            }
        }
    }
    if let Some(q) = count.iter().position(|&n| n == 0) {
        return Err(CscError::CoverageZero {
            row: q / width,
            col: q % width,
        });
    }
    Image::new(height, width, acc)
}

/// A `dim × num_atoms` dictionary matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseDictionary {
    atoms: DMatrix<f64>,
}

impl DenseDictionary {
    pub fn new(atoms: DMatrix<f64>) -> Result<Self> {
        if atoms.ncols() == 0 || atoms.nrows() == 0 {
            return Err(CscError::DimensionMismatch("empty dictionary".into()));
        }
        if let Some(i) = atoms.iter().position(|v| !v.is_finite()) {
            return Err(CscError::NonFinite(i));
        }
        Ok(Self { atoms })
    }

    /// Vectorizes each square filter row-major into one atom.
    pub fn from_filters(dict: &Dictionary) -> Result<Self> {
        let (fh, fw) = dict.filter_dims();
        if fh != fw {
            return Err(CscError::DimensionMismatch(format!(
                "block dictionary needs square filters, got {fh}x{fw}"
            )));
        }
        let d = fh * fw;
        let atoms = DMatrix::from_fn(d, dict.num_filters(), |i, m| dict.filter(m).data()[i]);
        Self::new(atoms)
    }

    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BpdnConfig {
    /// Per-atom ℓ1 weights, all ones when `None`.
    pub alpha: Option<WeightVector>,
    /// ADMM penalty, `10 λ + 0.1` when `None`.
    pub rho: Option<f64>,
    pub max_iter: usize,
    pub rel_stop_tol: f64,
}

impl Default for BpdnConfig {
    fn default() -> Self {
        Self {
            alpha: None,
            rho: None,
            max_iter: 250,
            rel_stop_tol: 1e-4,
        }
    }
}

/// `(DᵀD + ρI)⁻¹` applied through the `dim × dim` factor of `DDᵀ + ρI`.
struct XSolver<'a> {
    d: &'a DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    rho: f64,
}

impl XSolver<'_> {
    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let t = self.chol.solve(&(self.d * b));
        (b - self.d.transpose() * t) / self.rho
    }
}

fn column_admm(
    xs: &XSolver,
    dtp: DVector<f64>,
    thresholds: &[f64],
    max_iter: usize,
    tol: f64,
) -> Vec<f64> {
    let m = dtp.len();
    let rho = xs.rho;
    let mut y = DVector::zeros(m);
    let mut u = DVector::<f64>::zeros(m);
    for _ in 0..max_iter {
        let x = xs.solve(&(&dtp + (&y - &u) * rho));
        let y_prev = std::mem::replace(&mut y, &x + &u);
        for (v, &t) in y.iter_mut().zip(thresholds) {
            *v = soft(*v, t);
        }
        u += &x - &y;
        let primal = (&x - &y).norm();
        let dual = rho * (&y - &y_prev).norm();
        let primal_ok = primal == 0.0 || primal <= tol * x.norm().max(y.norm());
        let dual_ok = dual == 0.0 || dual <= tol * rho * u.norm();
        if primal_ok && dual_ok {
            break;
        }
    }
    y.as_slice().to_vec()
}

/// Solves `½‖Dz − p‖² + λ‖α ⊙ z‖₁` for every patch column.
///
/// Returns the `num_atoms × num_patches` matrix of thresholded coefficients.
pub fn bpdn_solve(
    dict: &DenseDictionary,
    patches: &PatchMatrix,
    lambda: f64,
    cfg: &BpdnConfig,
) -> Result<DMatrix<f64>> {
    if dict.dim() != patches.patch_dim() {
        return Err(CscError::DimensionMismatch(format!(
            "dictionary atoms have {} entries, patches {}",
            dict.dim(),
            patches.patch_dim()
        )));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(CscError::ConfigInvalid(format!("lambda must be >= 0, got {lambda}")));
    }
    if cfg.max_iter == 0 {
        return Err(CscError::ConfigInvalid("max_iter must be at least 1".into()));
    }
    let m = dict.num_atoms();
    let alpha = match &cfg.alpha {
        None => vec![1.0; m],
        Some(a) if a.len() == m => a.as_slice().to_vec(),
        Some(a) => {
            return Err(CscError::ConfigInvalid(format!(
                "alpha has {} entries for {m} atoms",
                a.len()
            )))
        }
    };
    let rho = cfg.rho.unwrap_or_else(|| default_rho(lambda));
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(CscError::ConfigInvalid(format!("rho must be positive, got {rho}")));
    }
    let d = dict.atoms();
    let gram = d * d.transpose() + DMatrix::identity(d.nrows(), d.nrows()) * rho;
    let chol = Cholesky::new(gram)
        .ok_or_else(|| CscError::ConfigInvalid("DDᵀ + ρI is not positive definite".into()))?;
    let xs = XSolver { d, chol, rho };
    let thresholds: Vec<f64> = alpha.iter().map(|a| lambda * a / rho).collect();
    let dt = d.transpose();

    let cols: Vec<Vec<f64>> = (0..patches.num_patches())
        .into_par_iter()
        .map(|k| {
            let p = DVector::from_column_slice(patches.column(k));
            column_admm(&xs, &dt * p, &thresholds, cfg.max_iter, cfg.rel_stop_tol)
        })
        .collect();
    let mut out = DMatrix::zeros(m, cols.len());
    for (k, c) in cols.iter().enumerate() {
        out.column_mut(k).copy_from_slice(c);
    }
    Ok(out)
}

/// `D Z` packed as a patch matrix with the origins of `patches`.
pub fn synthesize_patches(
    dict: &DenseDictionary,
    coeffs: &DMatrix<f64>,
    patches: &PatchMatrix,
) -> Result<PatchMatrix> {
    if coeffs.nrows() != dict.num_atoms() || coeffs.ncols() != patches.num_patches() {
        return Err(CscError::DimensionMismatch(format!(
            "coefficients {}x{} for {} atoms and {} patches",
            coeffs.nrows(),
            coeffs.ncols(),
            dict.num_atoms(),
            patches.num_patches()
        )));
    }
    let rec = dict.atoms() * coeffs;
    PatchMatrix::from_columns(patches.patch, rec.as_slice().to_vec(), patches.origins.clone())
}
