use num_complex::Complex64;

use crate::spectral::{forward_diff, forward_diff_adjoint, CoeffMaps, DictSpectra, Fft2, GradDir};

/// The stacked constraint operator `A` of the split problem `A x = y`.
#[derive(Clone, Debug)]
pub enum ConstraintOp {
    /// `A = I`, one block.
    Identity,
    /// `A = (Γ0; Γ1; I)` with `Γ_l = diag(scale_m G_l)` acting on each map.
    MapGradients { scale: Vec<f64> },
    /// `A = (Γ0; Γ1; I)` with `Γ_l x = Σ_m β_m (g_l * d_m) * x_m`, image-sized.
    ImageGradients {
        /// `β_m ĝ_l d̂_m` for `l = 0, 1`, map-major.
        grad_dict: [Vec<Complex64>; 2],
        fft: Fft2,
        num_maps: usize,
    },
}

impl ConstraintOp {
    pub(crate) fn image_gradients(
        dhat: &DictSpectra,
        beta: &[f64],
        grad_spectra: [&[Complex64]; 2],
        fft: Fft2,
    ) -> Self {
        let n = dhat.bins();
        let build = |g: &[Complex64]| {
            let mut r = Vec::with_capacity(dhat.data.len());
            for (m, &b) in beta.iter().enumerate() {
                r.extend(dhat.map(m).iter().zip(g).map(|(d, g)| d * g * b));
            }
            debug_assert_eq!(r.len(), dhat.num_maps * n);
            r
        };
        ConstraintOp::ImageGradients {
            grad_dict: [build(grad_spectra[0]), build(grad_spectra[1])],
            fft,
            num_maps: dhat.num_maps,
        }
    }

    pub fn num_blocks(&self) -> usize {
        match self {
            ConstraintOp::Identity => 1,
            _ => 3,
        }
    }

    /// Zero-initialised blocks with the shape of `A x`.
    pub fn zero_blocks(&self, num_maps: usize, height: usize, width: usize) -> Vec<CoeffMaps> {
        match self {
            ConstraintOp::Identity => vec![CoeffMaps::zeros(num_maps, height, width)],
            ConstraintOp::MapGradients { .. } => (0..3)
                .map(|_| CoeffMaps::zeros(num_maps, height, width))
                .collect(),
            ConstraintOp::ImageGradients { .. } => vec![
                CoeffMaps::zeros(1, height, width),
                CoeffMaps::zeros(1, height, width),
                CoeffMaps::zeros(num_maps, height, width),
            ],
        }
    }

    /// `A x`. `xhat` may carry the spectrum of `x` when already known.
    pub fn forward(&self, x: &CoeffMaps, xhat: Option<&[Complex64]>) -> Vec<CoeffMaps> {
        let (m, h, w) = x.shape();
        match self {
            ConstraintOp::Identity => vec![x.clone()],
            ConstraintOp::MapGradients { scale } => {
                let mut g0 = CoeffMaps::zeros(m, h, w);
                let mut g1 = CoeffMaps::zeros(m, h, w);
                for k in 0..m {
                    forward_diff(GradDir::Rows, h, w, x.map(k), g0.map_mut(k));
                    forward_diff(GradDir::Cols, h, w, x.map(k), g1.map_mut(k));
                    g0.map_mut(k).iter_mut().for_each(|v| *v *= scale[k]);
                    g1.map_mut(k).iter_mut().for_each(|v| *v *= scale[k]);
                }
                vec![g0, g1, x.clone()]
            }
            ConstraintOp::ImageGradients { grad_dict, fft, .. } => {
                let owned;
                let xhat = match xhat {
                    Some(s) => s,
                    None => {
                        let mut buf = vec![Complex64::new(0.0, 0.0); x.data().len()];
                        fft.forward_maps(x.data(), &mut buf);
                        owned = buf;
                        &owned
                    }
                };
                let n = h * w;
                let mut blocks = Vec::with_capacity(3);
                for r in grad_dict {
                    let mut acc = vec![Complex64::new(0.0, 0.0); n];
                    for k in 0..m {
                        let (rk, xk) = (&r[k * n..(k + 1) * n], &xhat[k * n..(k + 1) * n]);
                        for i in 0..n {
                            acc[i] += rk[i] * xk[i];
                        }
                    }
                    let img = fft.inverse_real(&acc);
                    blocks.push(CoeffMaps::from_vec(1, h, w, img).expect("finite gradient"));
                }
                blocks.push(x.clone());
                blocks
            }
        }
    }

    /// `Aᵀ v` for stacked blocks `v`.
    pub fn adjoint(&self, v: &[CoeffMaps]) -> CoeffMaps {
        match self {
            ConstraintOp::Identity => v[0].clone(),
            ConstraintOp::MapGradients { scale } => {
                let mut out = v[2].clone();
                let (m, h, w) = out.shape();
                let mut tmp = vec![0.0; h * w];
                for k in 0..m {
                    for (l, dir) in [GradDir::Rows, GradDir::Cols].into_iter().enumerate() {
                        forward_diff_adjoint(dir, h, w, v[l].map(k), &mut tmp);
                        for (o, t) in out.map_mut(k).iter_mut().zip(&tmp) {
                            *o += scale[k] * t;
                        }
                    }
                }
                out
            }
            ConstraintOp::ImageGradients {
                grad_dict,
                fft,
                num_maps,
            } => {
                let mut out = v[2].clone();
                let n = fft.bins();
                let q0 = fft.forward_real(v[0].data());
                let q1 = fft.forward_real(v[1].data());
                let mut spec = vec![Complex64::new(0.0, 0.0); num_maps * n];
                for k in 0..*num_maps {
                    for i in 0..n {
                        let p = k * n + i;
                        spec[p] = grad_dict[0][p].conj() * q0[i] + grad_dict[1][p].conj() * q1[i];
                    }
                }
                let mut back = vec![0.0; num_maps * n];
                fft.inverse_maps(&spec, &mut back);
                for (o, b) in out.data_mut().iter_mut().zip(&back) {
                    *o += b;
                }
                out
            }
        }
    }
}

/// Iterate of the split ADMM problem, with scaled duals.
#[derive(Clone, Debug)]
pub struct AdmmState {
    pub x: CoeffMaps,
    /// `A x` for the current `x`.
    pub ax_blocks: Vec<CoeffMaps>,
    /// `(y0, y1, y2)` for the gradient-split variants, `(y)` otherwise.
    pub y_blocks: Vec<CoeffMaps>,
    pub y_prev_blocks: Vec<CoeffMaps>,
    pub u_blocks: Vec<CoeffMaps>,
    pub rho: f64,
    pub iter: usize,
    pub primal_res: f64,
    pub dual_res: f64,
}

impl AdmmState {
    pub fn zeros(op: &ConstraintOp, num_maps: usize, height: usize, width: usize, rho: f64) -> Self {
        let blocks = op.zero_blocks(num_maps, height, width);
        Self {
            x: CoeffMaps::zeros(num_maps, height, width),
            ax_blocks: blocks.clone(),
            y_blocks: blocks.clone(),
            y_prev_blocks: blocks.clone(),
            u_blocks: blocks,
            rho,
            iter: 0,
            primal_res: 0.0,
            dual_res: 0.0,
        }
    }

    /// The sparse coefficient block (`y2`, or `y` for single-block splits).
    pub fn sparse_block(&self) -> &CoeffMaps {
        self.y_blocks.last().expect("at least one block")
    }

    /// Number of scalars held by the gradient split blocks `y0, y1`.
    pub fn gradient_block_len(&self) -> usize {
        if self.y_blocks.len() < 3 {
            return 0;
        }
        self.y_blocks[0].data().len() + self.y_blocks[1].data().len()
    }
}

/// Absolute and normalized primal/dual residuals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub primal_rel: f64,
    pub dual_rel: f64,
}

fn blocks_dist(a: &[CoeffMaps], b: &[CoeffMaps]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| {
            p.data()
                .iter()
                .zip(q.data())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

fn blocks_norm(a: &[CoeffMaps]) -> f64 {
    a.iter().map(|p| p.norm_sq()).sum::<f64>().sqrt()
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// `primal = ‖Ax - y‖`, `dual = ρ‖Aᵀ(y - y_prev)‖`, normalized by
/// `max(‖Ax‖, ‖y‖)` and `ρ‖Aᵀu‖` respectively.
pub fn compute_residuals(state: &AdmmState, op: &ConstraintOp) -> Residuals {
    let primal = blocks_dist(&state.ax_blocks, &state.y_blocks);
    let delta: Vec<CoeffMaps> = state
        .y_blocks
        .iter()
        .zip(&state.y_prev_blocks)
        .map(|(y, p)| {
            let mut d = y.clone();
            d.data_mut()
                .iter_mut()
                .zip(p.data())
                .for_each(|(a, b)| *a -= b);
            d
        })
        .collect();
    let dual = state.rho * op.adjoint(&delta).norm_sq().sqrt();
    let primal_scale = blocks_norm(&state.ax_blocks).max(blocks_norm(&state.y_blocks));
    let dual_scale = state.rho * op.adjoint(&state.u_blocks).norm_sq().sqrt();
    Residuals {
        primal,
        dual,
        primal_rel: ratio(primal, primal_scale),
        dual_rel: ratio(dual, dual_scale),
    }
}
