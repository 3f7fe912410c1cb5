use num_complex::Complex64;

use super::objective::SpectralObjective;
use super::state::{compute_residuals, AdmmState, ConstraintOp};
use super::{ResolvedConfig, SolverConfig, SolverResult, Variant};
use crate::error::{CscError, Result};
use crate::freq_solve::{
    cbpdn_system, dict_vector, grouped_diag_system, rank3_system, BetaExponent, FreqSystem,
};
use crate::prox::{shrink_joint, shrink_pairs, soft_threshold_slice, WeightVector};
use crate::spectral::{
    forward_diff_adjoint, make_grad_filters, DictSpectra, Dictionary, Fft2, GradDir,
    Image,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const BALANCE_PERIOD: usize = 10;
const BALANCE_RATIO: f64 = 10.0;
const BALANCE_FACTOR: f64 = 2.0;

struct Problem {
    variant: Variant,
    cfg: ResolvedConfig,
    fft: Fft2,
    dhat: DictSpectra,
    /// `|ĝ0|² + |ĝ1|²` per bin.
    grad_power: Vec<f64>,
    op: ConstraintOp,
    /// `D̂ᴴ ŝ`, map-major.
    dhs: Vec<Complex64>,
    objective: SpectralObjective,
}

impl Problem {
    fn system(&self, rho: f64) -> Result<FreqSystem> {
        let (m, n) = (self.dhat.num_maps, self.dhat.bins());
        match self.variant {
            Variant::Cbpdn => cbpdn_system(&self.dhat, rho),
            Variant::Grd => {
                let mut diag = Vec::with_capacity(m * n);
                for &b in &self.cfg.beta {
                    diag.extend(self.grad_power.iter().map(|g| rho + self.cfg.mu * b * g));
                }
                FreqSystem::new(m, n, diag, vec![dict_vector(&self.dhat)])
            }
            Variant::Stv | Variant::Vtv => {
                let exponent = if self.variant == Variant::Stv {
                    BetaExponent::Two
                } else {
                    BetaExponent::One
                };
                let beta = WeightVector::new(self.cfg.beta.clone())?;
                grouped_diag_system(&self.dhat, &self.grad_power, &beta, exponent, rho)
            }
            Variant::Rtv => match &self.op {
                ConstraintOp::ImageGradients { grad_dict, .. } => {
                    rank3_system(&self.dhat, [&grad_dict[0], &grad_dict[1]], rho)
                }
                _ => unreachable!("RTV uses image-domain gradients"),
            },
        }
    }

    /// `D̂ᴴŝ + ρ F(Aᵀ(y - u))`, the right-hand side of the x-step.
    fn rhs(&self, state: &AdmmState) -> Vec<Complex64> {
        let nb = state.y_blocks.len();
        let mut z = state.y_blocks[nb - 1].clone();
        z.data_mut()
            .iter_mut()
            .zip(state.u_blocks[nb - 1].data())
            .for_each(|(y, u)| *y -= u);
        let (m, h, w) = z.shape();
        let n = h * w;
        if let ConstraintOp::MapGradients { scale } = &self.op {
            let mut diff = vec![0.0; n];
            let mut tmp = vec![0.0; n];
            for k in 0..m {
                for (l, dir) in [GradDir::Rows, GradDir::Cols].into_iter().enumerate() {
                    let (y, u) = (state.y_blocks[l].map(k), state.u_blocks[l].map(k));
                    for i in 0..n {
                        diff[i] = y[i] - u[i];
                    }
                    forward_diff_adjoint(dir, h, w, &diff, &mut tmp);
                    for (o, t) in z.map_mut(k).iter_mut().zip(&tmp) {
                        *o += scale[k] * t;
                    }
                }
            }
        }
        let mut rhs = vec![ZERO; m * n];
        self.fft.forward_maps(z.data(), &mut rhs);
        let rho = state.rho;
        for (r, d) in rhs.iter_mut().zip(&self.dhs) {
            *r = d + *r * rho;
        }
        if let ConstraintOp::ImageGradients { grad_dict, .. } = &self.op {
            for l in 0..2 {
                let diff: Vec<f64> = state.y_blocks[l]
                    .data()
                    .iter()
                    .zip(state.u_blocks[l].data())
                    .map(|(y, u)| y - u)
                    .collect();
                let q = self.fft.forward_real(&diff);
                for k in 0..m {
                    for i in 0..n {
                        let p = k * n + i;
                        rhs[p] += grad_dict[l][p].conj() * q[i] * rho;
                    }
                }
            }
        }
        rhs
    }

    fn y_step(&self, state: &mut AdmmState) {
        let rho = state.rho;
        let nb = state.y_blocks.len();
        for (b, (y, (ax, u))) in state
            .y_blocks
            .iter_mut()
            .zip(state.ax_blocks.iter().zip(&state.u_blocks))
            .enumerate()
        {
            y.data_mut()
                .iter_mut()
                .zip(ax.data().iter().zip(u.data()))
                .for_each(|(y, (a, u))| *y = a + u);
            if b == nb - 1 {
                for k in 0..y.num_maps() {
                    soft_threshold_slice(y.map_mut(k), self.cfg.lambda * self.cfg.alpha[k] / rho);
                }
            }
        }
        if nb == 3 {
            let t = self.cfg.mu / rho;
            let (first, rest) = state.y_blocks.split_at_mut(1);
            let (y0, y1) = (&mut first[0], &mut rest[0]);
            let n = y0.map_len();
            match self.variant {
                Variant::Vtv => shrink_joint(y0.data_mut(), y1.data_mut(), n, t),
                _ => shrink_pairs(y0.data_mut(), y1.data_mut(), t),
            }
        }
    }
}

pub(crate) fn run(
    variant: Variant,
    dict: &Dictionary,
    s: &Image,
    cfg: &SolverConfig,
) -> Result<SolverResult> {
    let (h, w) = s.dims();
    dict.check_fits(h, w)
        .map_err(|e| CscError::DimensionMismatch(e.to_string()))?;
    let m = dict.num_filters();
    let n = h * w;
    let rc = cfg.resolve(m)?;
    let fft = Fft2::new(h, w);
    let dhat = dict.spectra(h, w)?;
    let shat = fft.forward_real(s.data());
    let mut dhs = Vec::with_capacity(m * n);
    for k in 0..m {
        dhs.extend(dhat.map(k).iter().zip(&shat).map(|(d, s)| d.conj() * s));
    }
    let grads = make_grad_filters();
    let g0 = grads.spectrum(GradDir::Rows, h, w).data;
    let g1 = grads.spectrum(GradDir::Cols, h, w).data;
    let grad_power: Vec<f64> = g0.iter().zip(&g1).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).collect();
    let op = match variant {
        Variant::Cbpdn | Variant::Grd => ConstraintOp::Identity,
        Variant::Stv => ConstraintOp::MapGradients {
            scale: rc.beta.clone(),
        },
        Variant::Vtv => ConstraintOp::MapGradients {
            scale: rc.beta.iter().map(|b| b.sqrt()).collect(),
        },
        Variant::Rtv => ConstraintOp::image_gradients(&dhat, &rc.beta, [&g0, &g1], fft.clone()),
    };

    let mut rho = rc.rho;
    let objective = SpectralObjective::new(variant, &rc, shat);
    let problem = Problem {
        variant,
        cfg: rc,
        fft,
        dhat,
        grad_power,
        op,
        dhs,
        objective,
    };

    let mut sys = problem.system(rho)?;
    let mut state = AdmmState::zeros(&problem.op, m, h, w, rho);
    let mut objective_history = Vec::new();
    let mut residual_history = Vec::new();
    let mut converged = false;
    let mut yhat = vec![ZERO; m * n];

    for iter in 1..=problem.cfg.max_iter {
        let rhs = problem.rhs(&state);
        let xhat = sys.solve(&rhs)?;
        if cfg!(debug_assertions) {
            let r = sys.relative_residual(&xhat, &rhs);
            debug_assert!(r <= crate::freq_solve::XSTEP_RESIDUAL_TOL, "x-step residual {r:e}");
        }
        problem.fft.inverse_maps(&xhat, state.x.data_mut());
        state.ax_blocks = problem.op.forward(&state.x, Some(&xhat));
        std::mem::swap(&mut state.y_prev_blocks, &mut state.y_blocks);
        state.y_blocks = state.y_prev_blocks.clone();
        problem.y_step(&mut state);
        for (u, (ax, y)) in state
            .u_blocks
            .iter_mut()
            .zip(state.ax_blocks.iter().zip(&state.y_blocks))
        {
            u.data_mut()
                .iter_mut()
                .zip(ax.data().iter().zip(y.data()))
                .for_each(|(u, (a, y))| *u += a - y);
        }
        state.iter = iter;
        let res = compute_residuals(&state, &problem.op);
        state.primal_res = res.primal;
        state.dual_res = res.dual;
        residual_history.push((res.primal_rel, res.dual_rel));

        problem
            .fft
            .forward_maps(state.sparse_block().data(), &mut yhat);
        let obj = problem
            .objective
            .value(state.sparse_block(), &yhat, &problem.dhat, &problem.op);
        objective_history.push(obj);

        if res.primal_rel <= problem.cfg.tol && res.dual_rel <= problem.cfg.tol {
            converged = true;
            break;
        }
        if problem.cfg.adaptive_rho && iter % BALANCE_PERIOD == 0 {
            let factor = if res.primal_rel > BALANCE_RATIO * res.dual_rel {
                BALANCE_FACTOR
            } else if res.dual_rel > BALANCE_RATIO * res.primal_rel {
                1.0 / BALANCE_FACTOR
            } else {
                1.0
            };
            if factor != 1.0 {
                rho *= factor;
                state.rho = rho;
                for u in &mut state.u_blocks {
                    u.data_mut().iter_mut().for_each(|v| *v /= factor);
                }
                sys = problem.system(rho)?;
            }
        }
    }

    let recon_hat = problem.objective.synthesis(&yhat, &problem.dhat);
    let reconstruction = Image::new(h, w, problem.fft.inverse_real(&recon_hat))?;
    Ok(SolverResult {
        variant,
        coeffs: state.sparse_block().clone(),
        reconstruction,
        objective_history,
        residual_history,
        iterations_run: state.iter,
        converged,
        final_state: state,
    })
}
