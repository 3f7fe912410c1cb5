//! Dense `(MN) x (MN)` oracles for the frequency-domain x-steps.

use csc_core::freq_solve::*;
use csc_core::pipeline::SplitMix64;
use csc_core::prox::WeightVector;
use csc_core::spectral::{make_grad_filters, DictSpectra, Dictionary, Fft2, GradDir};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub struct Instance {
    pub dict: Dictionary,
    pub h: usize,
    pub w: usize,
    pub rho: f64,
    pub beta: Vec<f64>,
    pub rhs: Vec<f64>,
}

/// Random instance with `M ≤ 4` and images up to `8 x 8`.
pub fn instance(rng: &mut SplitMix64) -> Instance {
    let m = 1 + (rng.next_u64() % 4) as usize;
    let h = 2 + (rng.next_u64() % 7) as usize;
    let w = 2 + (rng.next_u64() % 7) as usize;
    let p = 1 + (rng.next_u64() % h.min(w).min(4) as u64) as usize;
    Instance {
        dict: super::random_dict(m, p, p, rng),
        h,
        w,
        rho: 0.05 + 2.0 * rng.next_f64(),
        beta: (0..m).map(|_| 0.2 + rng.next_f64()).collect(),
        rhs: (0..m * h * w).map(|_| rng.next_normal()).collect(),
    }
}

/// Solves a spatial right-hand side through the frequency-domain system.
pub fn spectral_solve(sys: &FreqSystem, fft: &Fft2, rhs: &[f64]) -> Vec<f64> {
    let mut spec = vec![Complex64::new(0.0, 0.0); rhs.len()];
    fft.forward_maps(rhs, &mut spec);
    let xhat = sys.solve(&spec).unwrap();
    assert!(sys.relative_residual(&xhat, &spec) <= XSTEP_RESIDUAL_TOL);
    let mut x = vec![0.0; rhs.len()];
    fft.inverse_maps(&xhat, &mut x);
    x
}

fn data_gram(t: &Instance) -> DMatrix<f64> {
    let d = super::dict_matrix(&t.dict, t.h, t.w);
    d.transpose() * &d + DMatrix::identity(d.ncols(), d.ncols()) * t.rho
}

fn compare(t: &Instance, k: DMatrix<f64>, sys: &FreqSystem) -> f64 {
    let oracle = super::dense_solve(&k, &DVector::from_column_slice(&t.rhs));
    let x = spectral_solve(sys, &Fft2::new(t.h, t.w), &t.rhs);
    super::rel_err(&x, oracle.as_slice())
}

/// `(DᵀD + ρI) x = r`.
pub fn cbpdn_error(t: &Instance) -> f64 {
    let dhat = t.dict.spectra(t.h, t.w).unwrap();
    compare(t, data_gram(t), &cbpdn_system(&dhat, t.rho).unwrap())
}

/// `(DᵀD + ρI + ρ Σ_l Γ_lᵀΓ_l) x = r` with `Γ_l = diag(s_m G_l)`, `s = β`
/// for [`BetaExponent::Two`] and `s = √β` for [`BetaExponent::One`].
pub fn grouped_error(t: &Instance, exp: BetaExponent) -> f64 {
    let scale: Vec<f64> = match exp {
        BetaExponent::Two => t.beta.clone(),
        BetaExponent::One => t.beta.iter().map(|b| b.sqrt()).collect(),
    };
    let mut k = data_gram(t);
    for dir in 0..2 {
        let gamma = super::block_diag(&super::diff_matrix(dir, t.h, t.w), &scale);
        k += gamma.transpose() * &gamma * t.rho;
    }
    let dhat = t.dict.spectra(t.h, t.w).unwrap();
    let power = make_grad_filters().power_sum(t.h, t.w);
    let beta = WeightVector::new(t.beta.clone()).unwrap();
    compare(t, k, &grouped_diag_system(&dhat, &power, &beta, exp, t.rho).unwrap())
}

/// `β_m ĝ_l d̂_m`, map-major, for both directions.
pub fn grad_dict(dhat: &DictSpectra, beta: &[f64], h: usize, w: usize) -> [Vec<Complex64>; 2] {
    let g = make_grad_filters();
    [GradDir::Rows, GradDir::Cols].map(|dir| {
        let gs = g.spectrum(dir, h, w).data;
        (0..dhat.num_maps)
            .flat_map(|j| dhat.map(j).iter().zip(&gs).map(move |(d, g)| d * g * beta[j]).collect::<Vec<_>>())
            .collect()
    })
}

/// `(DᵀD + ρI + ρ Σ_l Γ_lᵀΓ_l) x = r` with `Γ_l x = Σ_m β_m G_l D_m x_m`.
pub fn rank3_error(t: &Instance) -> f64 {
    let (h, w) = (t.h, t.w);
    let m = t.dict.num_filters();
    let n = h * w;
    let mut k = data_gram(t);
    for dir in 0..2 {
        let gd = super::diff_matrix(dir, h, w);
        let mut row = DMatrix::zeros(n, m * n);
        for j in 0..m {
            let block = &gd * super::conv_matrix(t.dict.filter(j), h, w) * t.beta[j];
            row.view_mut((0, j * n), (n, n)).copy_from(&block);
        }
        k += row.transpose() * &row * t.rho;
    }
    let dhat = t.dict.spectra(h, w).unwrap();
    let r = grad_dict(&dhat, &t.beta, h, w);
    compare(t, k, &rank3_system(&dhat, [&r[0], &r[1]], t.rho).unwrap())
}

/// Worst relative errors `[cbpdn, stv, vtv, rtv]` over `count` random instances.
pub fn worst_errors(seed: u64, count: usize) -> [f64; 4] {
    let mut rng = SplitMix64::new(seed);
    let mut worst = [0.0f64; 4];
    for _ in 0..count {
        let t = instance(&mut rng);
        let e = [
            cbpdn_error(&t),
            grouped_error(&t, BetaExponent::Two),
            grouped_error(&t, BetaExponent::One),
            rank3_error(&t),
        ];
        for (w, e) in worst.iter_mut().zip(e) {
            *w = w.max(e);
        }
    }
    worst
}
