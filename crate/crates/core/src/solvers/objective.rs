use num_complex::Complex64;

use super::state::ConstraintOp;
use super::{ResolvedConfig, SolverConfig, Variant};
use crate::error::{CscError, Result};
use crate::spectral::{circ_conv, forward_diff, CoeffMaps, DictSpectra, Dictionary, GradDir, Image};

/// λ-term plus μ-term of `variant` at `x`. `image_grads` carries `(Γ0x, Γ1x)`
/// for RTV, where the gradient acts on the weighted reconstruction.
fn penalty(
    variant: Variant,
    cfg: &ResolvedConfig,
    x: &CoeffMaps,
    image_grads: Option<(&[f64], &[f64])>,
) -> f64 {
    let (m, h, w) = x.shape();
    let n = h * w;
    let l1: f64 = (0..m)
        .map(|k| cfg.alpha[k] * x.map(k).iter().map(|v| v.abs()).sum::<f64>())
        .sum();
    let mut g0 = vec![0.0; n];
    let mut g1 = vec![0.0; n];
    let mu_term = match variant {
        Variant::Cbpdn => 0.0,
        Variant::Grd => {
            let mut acc = 0.0;
            for k in 0..m {
                forward_diff(GradDir::Rows, h, w, x.map(k), &mut g0);
                forward_diff(GradDir::Cols, h, w, x.map(k), &mut g1);
                let sq: f64 = g0.iter().chain(&g1).map(|v| v * v).sum();
                acc += cfg.beta[k] * sq;
            }
            0.5 * cfg.mu * acc
        }
        Variant::Stv => {
            let mut acc = 0.0;
            for k in 0..m {
                forward_diff(GradDir::Rows, h, w, x.map(k), &mut g0);
                forward_diff(GradDir::Cols, h, w, x.map(k), &mut g1);
                let tv: f64 = g0.iter().zip(&g1).map(|(a, b)| (a * a + b * b).sqrt()).sum();
                acc += cfg.beta[k] * tv;
            }
            cfg.mu * acc
        }
        Variant::Vtv => {
            let mut pooled = vec![0.0; n];
            for k in 0..m {
                forward_diff(GradDir::Rows, h, w, x.map(k), &mut g0);
                forward_diff(GradDir::Cols, h, w, x.map(k), &mut g1);
                for i in 0..n {
                    pooled[i] += cfg.beta[k] * (g0[i] * g0[i] + g1[i] * g1[i]);
                }
            }
            cfg.mu * pooled.iter().map(|p| p.sqrt()).sum::<f64>()
        }
        Variant::Rtv => {
            let (a, b) = image_grads.expect("RTV penalty needs image gradients");
            cfg.mu * a.iter().zip(b).map(|(p, q)| (p * p + q * q).sqrt()).sum::<f64>()
        }
    };
    cfg.lambda * l1 + mu_term
}

/// Functional evaluation from spectra, used for per-iteration histories.
pub(crate) struct SpectralObjective {
    variant: Variant,
    cfg: ResolvedConfig,
    shat: Vec<Complex64>,
}

impl SpectralObjective {
    pub(crate) fn new(variant: Variant, cfg: &ResolvedConfig, shat: Vec<Complex64>) -> Self {
        Self {
            variant,
            cfg: cfg.clone(),
            shat,
        }
    }

    /// `Σ_m d̂_m x̂_m` per bin.
    pub(crate) fn synthesis(&self, xhat: &[Complex64], dhat: &DictSpectra) -> Vec<Complex64> {
        let n = dhat.bins();
        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..dhat.num_maps {
            for (a, (d, x)) in acc
                .iter_mut()
                .zip(dhat.map(k).iter().zip(&xhat[k * n..(k + 1) * n]))
            {
                *a += d * x;
            }
        }
        acc
    }

    pub(crate) fn value(
        &self,
        x: &CoeffMaps,
        xhat: &[Complex64],
        dhat: &DictSpectra,
        op: &ConstraintOp,
    ) -> f64 {
        let recon = self.synthesis(xhat, dhat);
        let n = dhat.bins() as f64;
        let data: f64 = recon
            .iter()
            .zip(&self.shat)
            .map(|(r, s)| (r - s).norm_sqr())
            .sum::<f64>()
            / (2.0 * n);
        let reg = if let ConstraintOp::ImageGradients { .. } = op {
            let blocks = op.forward(x, Some(xhat));
            penalty(
                self.variant,
                &self.cfg,
                x,
                Some((blocks[0].data(), blocks[1].data())),
            )
        } else {
            penalty(self.variant, &self.cfg, x, None)
        };
        data + reg
    }
}

/// Exact functional value of `variant` at `x`, computed in the spatial domain.
pub fn evaluate_objective(
    variant: Variant,
    dict: &Dictionary,
    s: &Image,
    x: &CoeffMaps,
    cfg: &SolverConfig,
) -> Result<f64> {
    let (h, w) = s.dims();
    if x.num_maps() != dict.num_filters() || (x.height(), x.width()) != (h, w) {
        return Err(CscError::DimensionMismatch(format!(
            "coefficients {:?} vs {} filters on {h}x{w}",
            x.shape(),
            dict.num_filters()
        )));
    }
    let rc = cfg.resolve(dict.num_filters())?;
    let mut recon = Image::zeros(h, w);
    let mut weighted = Image::zeros(h, w);
    for k in 0..dict.num_filters() {
        let c = circ_conv(dict.filter(k), &x.map_image(k))?;
        for ((r, wt), v) in recon
            .data_mut()
            .iter_mut()
            .zip(weighted.data_mut().iter_mut())
            .zip(c.data())
        {
            *r += v;
            *wt += rc.beta[k] * v;
        }
    }
    let data: f64 = 0.5
        * recon
            .data()
            .iter()
            .zip(s.data())
            .map(|(r, s)| (r - s) * (r - s))
            .sum::<f64>();
    let reg = if variant == Variant::Rtv {
        let mut g0 = vec![0.0; h * w];
        let mut g1 = vec![0.0; h * w];
        forward_diff(GradDir::Rows, h, w, weighted.data(), &mut g0);
        forward_diff(GradDir::Cols, h, w, weighted.data(), &mut g1);
        penalty(variant, &rc, x, Some((&g0, &g1)))
    } else {
        penalty(variant, &rc, x, None)
    };
    Ok(data + reg)
}
