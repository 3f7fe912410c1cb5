//! ADMM solvers for convolutional BPDN and its gradient-penalized variants.
//!
//! All five variants share one iteration skeleton (`engine`): a DFT-domain
//! x-step solved bin by bin, closed-form y-steps and a scaled dual update.
//! They differ only in the constraint operator and in the structure of the
//! per-bin system:
//!
//! | variant | split blocks            | per-bin system                |
//! |---------|-------------------------|-------------------------------|
//! | CBPDN   | `y`                     | `ρI + aaᴴ`                    |
//! | Grd     | `y`                     | `diag(ρ + μβ|ĝ|²) + aaᴴ`      |
//! | STV     | `Γ0x, Γ1x, x` per map   | `diag(ρ(1 + β²|ĝ|²)) + aaᴴ`   |
//! | VTV     | `Γ0x, Γ1x, x` per map   | `diag(ρ(1 + β|ĝ|²)) + aaᴴ`    |
//! | RTV     | `Γ0x, Γ1x` image-sized  | `ρI + aaᴴ + ρ r0r0ᴴ + ρ r1r1ᴴ` |

mod engine;
mod objective;
mod state;

pub use objective::evaluate_objective;
pub use state::{compute_residuals, AdmmState, ConstraintOp, Residuals};

use crate::error::{CscError, Result};
use crate::prox::WeightVector;
use crate::spectral::{CoeffMaps, Dictionary, Image};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Plain convolutional BPDN.
    Cbpdn,
    /// Quadratic penalty on coefficient-map gradients.
    Grd,
    /// Scalar TV on each coefficient map.
    Stv,
    /// Vector TV across all coefficient maps.
    Vtv,
    /// Scalar TV on the weighted reconstruction components.
    Rtv,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Cbpdn,
        Variant::Grd,
        Variant::Stv,
        Variant::Vtv,
        Variant::Rtv,
    ];

    pub fn uses_mu(self) -> bool {
        self != Variant::Cbpdn
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Cbpdn => "cbpdn",
            Variant::Grd => "grd",
            Variant::Stv => "stv",
            Variant::Vtv => "vtv",
            Variant::Rtv => "rtv",
        }
    }
}

/// Default ADMM penalty when none is given: `10 λ + 0.1`.
pub fn default_rho(lambda: f64) -> f64 {
    10.0 * lambda + 0.1
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// ℓ1 weight.
    pub lambda: f64,
    /// Gradient-penalty weight; ignored by [`Variant::Cbpdn`].
    pub mu: f64,
    /// Per-filter ℓ1 weights, all ones when `None`.
    pub alpha: Option<WeightVector>,
    /// Per-filter gradient weights, all ones when `None`.
    pub beta: Option<WeightVector>,
    /// Initial penalty parameter, [`default_rho`] when `None`.
    pub rho: Option<f64>,
    pub max_iter: usize,
    pub rel_stop_tol: f64,
    /// Residual balancing: rescale ρ by 2 when one normalized residual exceeds
    /// ten times the other, checked every 10 iterations.
    pub adaptive_rho: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.05,
            mu: 0.0,
            alpha: None,
            beta: None,
            rho: None,
            max_iter: 250,
            rel_stop_tol: 1e-4,
            adaptive_rho: false,
        }
    }
}

/// Configuration with defaults filled in and validated against the dictionary size.
#[derive(Clone, Debug)]
pub(crate) struct ResolvedConfig {
    pub lambda: f64,
    pub mu: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub rho: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub adaptive_rho: bool,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CscError::ConfigInvalid(msg));
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad(format!("lambda must be finite and >= 0, got {}", self.lambda));
        }
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return bad(format!("mu must be finite and >= 0, got {}", self.mu));
        }
        if let Some(rho) = self.rho {
            if !(rho > 0.0) || !rho.is_finite() {
                return bad(format!("rho must be positive, got {rho}"));
            }
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if !(self.rel_stop_tol >= 0.0) {
            return bad(format!("tolerance must be >= 0, got {}", self.rel_stop_tol));
        }
        Ok(())
    }

    pub(crate) fn resolve(&self, num_maps: usize) -> Result<ResolvedConfig> {
        self.validate()?;
        let weights = |w: &Option<WeightVector>, name: &str| -> Result<Vec<f64>> {
            match w {
                None => Ok(vec![1.0; num_maps]),
                Some(w) if w.len() == num_maps => Ok(w.as_slice().to_vec()),
                Some(w) => Err(CscError::ConfigInvalid(format!(
                    "{name} has {} entries for {num_maps} filters",
                    w.len()
                ))),
            }
        };
        Ok(ResolvedConfig {
            lambda: self.lambda,
            mu: self.mu,
            alpha: weights(&self.alpha, "alpha")?,
            beta: weights(&self.beta, "beta")?,
            rho: self.rho.unwrap_or_else(|| default_rho(self.lambda)),
            max_iter: self.max_iter,
            tol: self.rel_stop_tol,
            adaptive_rho: self.adaptive_rho,
        })
    }
}

#[derive(Clone, Debug)]
pub struct SolverResult {
    pub variant: Variant,
    /// The thresholded coefficient block, exactly sparse.
    pub coeffs: CoeffMaps,
    /// `Σ_m d_m * coeffs_m`.
    pub reconstruction: Image,
    /// Functional value of `coeffs` after each iteration.
    pub objective_history: Vec<f64>,
    /// Normalized `(primal, dual)` residuals after each iteration.
    pub residual_history: Vec<(f64, f64)>,
    pub iterations_run: usize,
    pub converged: bool,
    pub final_state: AdmmState,
}

impl SolverResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_history.last().expect("at least one iteration")
    }
}

pub fn solve(variant: Variant, dict: &Dictionary, s: &Image, cfg: &SolverConfig) -> Result<SolverResult> {
    engine::run(variant, dict, s, cfg)
}

pub fn solve_cbpdn(dict: &Dictionary, s: &Image, cfg: &SolverConfig) -> Result<SolverResult> {
    solve(Variant::Cbpdn, dict, s, cfg)
}

pub fn solve_cbpdn_grd(dict: &Dictionary, s: &Image, cfg: &SolverConfig) -> Result<SolverResult> {
    solve(Variant::Grd, dict, s, cfg)
}

pub fn solve_cbpdn_stv(dict: &Dictionary, s: &Image, cfg: &SolverConfig) -> Result<SolverResult> {
    solve(Variant::Stv, dict, s, cfg)
}

pub fn solve_cbpdn_vtv(dict: &Dictionary, s: &Image, cfg: &SolverConfig) -> Result<SolverResult> {
    solve(Variant::Vtv, dict, s, cfg)
}

pub fn solve_cbpdn_rtv(dict: &Dictionary, s: &Image, cfg: &SolverConfig) -> Result<SolverResult> {
    solve(Variant::Rtv, dict, s, cfg)
}
