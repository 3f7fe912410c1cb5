//! Per-frequency structured linear solves.
//!
//! In the DFT domain every x-step decouples into one small `M x M` Hermitian
//! system per frequency bin, of the form `diag(c) + Σ_k v_k v_kᴴ`. A single
//! rank-one term is handled by Sherman-Morrison; up to three terms by applying
//! it repeatedly, in the fixed order the vectors are given.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{CscError, Result};
use crate::prox::WeightVector;
use crate::spectral::DictSpectra;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const CHUNK: usize = 512;

/// Relative residual bound checked on every x-step in debug builds.
pub const XSTEP_RESIDUAL_TOL: f64 = 1e-8;

/// `diag(c) + Σ_k v_k v_kᴴ` for every frequency bin, stored map-major
/// (`index = m * bins + bin`).
///
/// The parts of the Sherman-Morrison recursion that do not depend on the
/// right-hand side are computed once at construction.
#[derive(Clone, Debug)]
pub struct FreqSystem {
    bins: usize,
    num_maps: usize,
    diag: Vec<f64>,
    vectors: Vec<Vec<Complex64>>,
    inv_diag: Vec<f64>,
    /// `w_j = A_j⁻¹ v_j` with `A_j = diag(c) + Σ_{k<j} v_k v_kᴴ`.
    w: Vec<Vec<Complex64>>,
    /// `1 / (1 + v_jᴴ w_j)` per bin.
    inv_den: Vec<Vec<Complex64>>,
}

impl FreqSystem {
    /// `diag` and each vector hold `num_maps * bins` entries.
    pub fn new(
        num_maps: usize,
        bins: usize,
        diag: Vec<f64>,
        vectors: Vec<Vec<Complex64>>,
    ) -> Result<Self> {
        let len = num_maps * bins;
        if diag.len() != len || vectors.iter().any(|v| v.len() != len) {
            return Err(CscError::ShapeMismatch(format!(
                "system arrays must hold {num_maps} x {bins} entries"
            )));
        }
        if let Some(i) = diag.iter().position(|c| !(*c > 0.0) || !c.is_finite()) {
            return Err(CscError::NonpositiveDiagonal {
                index: i,
                value: diag[i],
            });
        }
        let inv_diag: Vec<f64> = diag.iter().map(|c| 1.0 / c).collect();
        let mut w: Vec<Vec<Complex64>> = vectors
            .iter()
            .map(|v| v.iter().zip(&inv_diag).map(|(v, c)| v * *c).collect())
            .collect();
        let mut inv_den = Vec::with_capacity(vectors.len());
        let mut g = vec![ZERO; bins];
        for j in 0..vectors.len() {
            let den = dot_bins(&vectors[j], &w[j], num_maps, bins);
            let inv: Vec<Complex64> = den.iter().map(|d| ONE / (ONE + d)).collect();
            let (head, tail) = w.split_at_mut(j + 1);
            for wk in tail {
                g.copy_from_slice(&dot_bins(&vectors[j], wk, num_maps, bins));
                g.iter_mut().zip(&inv).for_each(|(g, i)| *g *= i);
                for m in 0..num_maps {
                    let r = m * bins..(m + 1) * bins;
                    for ((a, b), gi) in wk[r.clone()].iter_mut().zip(&head[j][r]).zip(&g) {
                        *a -= b * gi;
                    }
                }
            }
            inv_den.push(inv);
        }
        Ok(Self {
            bins,
            num_maps,
            diag,
            vectors,
            inv_diag,
            w,
            inv_den,
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn num_maps(&self) -> usize {
        self.num_maps
    }

    pub fn rank(&self) -> usize {
        self.vectors.len()
    }

    /// Dense `M x M` matrix of one bin, row-major.
    pub fn bin_matrix(&self, bin: usize) -> Vec<Complex64> {
        let (m, n) = (self.num_maps, self.bins);
        let mut a = vec![ZERO; m * m];
        for i in 0..m {
            a[i * m + i] += self.diag[i * n + bin];
            for v in &self.vectors {
                for j in 0..m {
                    a[i * m + j] += v[i * n + bin] * v[j * n + bin].conj();
                }
            }
        }
        a
    }

    /// Matrix-vector product for all bins.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let (m, n) = (self.num_maps, self.bins);
        let mut out: Vec<Complex64> = x.iter().zip(&self.diag).map(|(x, c)| x * *c).collect();
        let mut dot = vec![ZERO; n];
        for v in &self.vectors {
            dot.iter_mut().for_each(|d| *d = ZERO);
            for k in 0..m {
                let (vk, xk) = (&v[k * n..(k + 1) * n], &x[k * n..(k + 1) * n]);
                for i in 0..n {
                    dot[i] += vk[i].conj() * xk[i];
                }
            }
            for k in 0..m {
                let vk = &v[k * n..(k + 1) * n];
                let ok = &mut out[k * n..(k + 1) * n];
                for i in 0..n {
                    ok[i] += vk[i] * dot[i];
                }
            }
        }
        out
    }

    /// `‖A x - b‖ / ‖b‖` over all bins (0 when `b = 0` and `x = 0`).
    pub fn relative_residual(&self, x: &[Complex64], b: &[Complex64]) -> f64 {
        let ax = self.apply(x);
        let r: f64 = ax.iter().zip(b).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nb == 0.0 {
            r
        } else {
            r / nb
        }
    }

    /// Solves every bin's system for the map-major right-hand side `b`.
    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let (m, n) = (self.num_maps, self.bins);
        if b.len() != m * n {
            return Err(CscError::ShapeMismatch(format!(
                "rhs has {} entries, expected {}",
                b.len(),
                m * n
            )));
        }
        let starts: Vec<usize> = (0..n).step_by(CHUNK).collect();
        let chunks: Vec<Vec<Complex64>> = starts
            .par_iter()
            .map(|&k0| self.solve_range(b, k0, CHUNK.min(n - k0)))
            .collect();
        let mut x = Vec::with_capacity(m * n);
        for mm in 0..m {
            for (&k0, local) in starts.iter().zip(&chunks) {
                let len = CHUNK.min(n - k0);
                x.extend_from_slice(&local[mm * len..(mm + 1) * len]);
            }
        }
        Ok(x)
    }

    /// Iterated Sherman-Morrison on bins `k0..k0 + len`; result is chunk-local map-major.
    fn solve_range(&self, b: &[Complex64], k0: usize, len: usize) -> Vec<Complex64> {
        let (m, n) = (self.num_maps, self.bins);
        let mut x = Vec::with_capacity(m * len);
        for mm in 0..m {
            let r = mm * n + k0..mm * n + k0 + len;
            x.extend(b[r.clone()].iter().zip(&self.inv_diag[r]).map(|(b, c)| b * *c));
        }
        let mut g = vec![ZERO; len];
        for ((v, w), inv) in self.vectors.iter().zip(&self.w).zip(&self.inv_den) {
            g.iter_mut().for_each(|g| *g = ZERO);
            for mm in 0..m {
                let r = mm * n + k0..mm * n + k0 + len;
                for ((g, v), x) in g.iter_mut().zip(&v[r]).zip(&x[mm * len..(mm + 1) * len]) {
                    *g += v.conj() * x;
                }
            }
            g.iter_mut().zip(&inv[k0..k0 + len]).for_each(|(g, i)| *g *= i);
            for mm in 0..m {
                let r = mm * n + k0..mm * n + k0 + len;
                for ((x, w), g) in x[mm * len..(mm + 1) * len].iter_mut().zip(&w[r]).zip(&g) {
                    *x -= w * g;
                }
            }
        }
        x
    }
}

/// `Σ_m conj(v[m, bin]) x[m, bin]` for every bin.
fn dot_bins(v: &[Complex64], x: &[Complex64], num_maps: usize, bins: usize) -> Vec<Complex64> {
    let mut acc = vec![ZERO; bins];
    for m in 0..num_maps {
        let r = m * bins..(m + 1) * bins;
        for ((a, v), x) in acc.iter_mut().zip(&v[r.clone()]).zip(&x[r]) {
            *a += v.conj() * x;
        }
    }
    acc
}

fn check_diag(c: &[f64]) -> Result<()> {
    if let Some(i) = c.iter().position(|v| !(*v > 0.0)) {
        return Err(CscError::NonpositiveDiagonal {
            index: i,
            value: c[i],
        });
    }
    Ok(())
}

/// Solves `(diag(c) + a aᴴ) x = b` by Sherman-Morrison.
pub fn solve_diag_rank1(a: &[Complex64], c: &[f64], b: &[Complex64]) -> Result<Vec<Complex64>> {
    solve_diag_rankk(&[a.to_vec()], c, b)
}

/// Solves `(diag(c) + Σ_k v_k v_kᴴ) x = b` by iterated Sherman-Morrison.
pub fn solve_diag_rankk(
    vectors: &[Vec<Complex64>],
    c: &[f64],
    b: &[Complex64],
) -> Result<Vec<Complex64>> {
    check_diag(c)?;
    let m = c.len();
    if b.len() != m || vectors.iter().any(|v| v.len() != m) {
        return Err(CscError::ShapeMismatch(format!("vectors must have length {m}")));
    }
    let sys = FreqSystem::new(m, 1, c.to_vec(), vectors.to_vec())?;
    Ok(sys.solve_range(b, 0, 1))
}

/// Power of the `β` weight entering the grouped diagonal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BetaExponent {
    /// `Γ_l` carries `√β_m` (vector TV), so the diagonal gains `β_m |ĝ|²`.
    One,
    /// `Γ_l` carries `β_m` (scalar TV), so the diagonal gains `β_m² |ĝ|²`.
    Two,
}

impl BetaExponent {
    pub fn weight(self, beta: f64) -> f64 {
        match self {
            BetaExponent::One => beta,
            BetaExponent::Two => beta * beta,
        }
    }
}

/// Rank-one vector `conj(d̂_m)` of `D̂ᴴ D̂` per bin.
pub(crate) fn dict_vector(dhat: &DictSpectra) -> Vec<Complex64> {
    dhat.data.iter().map(|z| z.conj()).collect()
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(CscError::ConfigInvalid(format!("rho must be positive, got {rho}")));
    }
    Ok(())
}

fn certify(sys: &FreqSystem, x: &[Complex64], b: &[Complex64]) {
    if cfg!(debug_assertions) {
        let r = sys.relative_residual(x, b);
        debug_assert!(r <= XSTEP_RESIDUAL_TOL, "x-step residual {r:e}");
    }
}

/// `diag(ρ) + conj(d̂) d̂ᵀ` per bin.
pub fn cbpdn_system(dhat: &DictSpectra, rho: f64) -> Result<FreqSystem> {
    check_rho(rho)?;
    FreqSystem::new(
        dhat.num_maps,
        dhat.bins(),
        vec![rho; dhat.data.len()],
        vec![dict_vector(dhat)],
    )
}

/// Solves `(D̂ᴴD̂ + ρI) x̂ = rhs` bin by bin.
pub fn xstep_cbpdn(dhat: &DictSpectra, rhs: &[Complex64], rho: f64) -> Result<Vec<Complex64>> {
    let sys = cbpdn_system(dhat, rho)?;
    let x = sys.solve(rhs)?;
    certify(&sys, &x, rhs);
    Ok(x)
}

/// `diag(ρ (1 + w_m (|ĝ0|² + |ĝ1|²))) + conj(d̂) d̂ᵀ` per bin.
pub fn grouped_diag_system(
    dhat: &DictSpectra,
    grad_power: &[f64],
    beta: &WeightVector,
    exponent: BetaExponent,
    rho: f64,
) -> Result<FreqSystem> {
    check_rho(rho)?;
    let n = dhat.bins();
    if grad_power.len() != n || beta.len() != dhat.num_maps {
        return Err(CscError::ShapeMismatch(
            "gradient power or beta length does not match dictionary".into(),
        ));
    }
    let mut diag = Vec::with_capacity(dhat.data.len());
    for &b in beta.as_slice() {
        let w = exponent.weight(b);
        diag.extend(grad_power.iter().map(|g| rho * (1.0 + w * g)));
    }
    FreqSystem::new(dhat.num_maps, n, diag, vec![dict_vector(dhat)])
}

/// x-step with the gradient terms folded into the diagonal.
pub fn xstep_grouped_diag(
    dhat: &DictSpectra,
    grad_power: &[f64],
    beta: &WeightVector,
    exponent: BetaExponent,
    rhs: &[Complex64],
    rho: f64,
) -> Result<Vec<Complex64>> {
    let sys = grouped_diag_system(dhat, grad_power, beta, exponent, rho)?;
    let x = sys.solve(rhs)?;
    certify(&sys, &x, rhs);
    Ok(x)
}

/// `ρI + conj(d̂)d̂ᵀ + ρ conj(r_0)r_0ᵀ + ρ conj(r_1)r_1ᵀ`, where `r_l` holds
/// `β_m ĝ_l d̂_m` (map-major) so that `Γ̂_l x̂ = r_lᵀ x̂`.
pub fn rank3_system(
    dhat: &DictSpectra,
    grad_dict: [&[Complex64]; 2],
    rho: f64,
) -> Result<FreqSystem> {
    check_rho(rho)?;
    if grad_dict.iter().any(|r| r.len() != dhat.data.len()) {
        return Err(CscError::ShapeMismatch(
            "gradient-dictionary spectra do not match dictionary".into(),
        ));
    }
    let s = rho.sqrt();
    let mut vectors = vec![dict_vector(dhat)];
    for r in grad_dict {
        vectors.push(r.iter().map(|z| z.conj() * s).collect());
    }
    FreqSystem::new(dhat.num_maps, dhat.bins(), vec![rho; dhat.data.len()], vectors)
}

/// x-step whose system is diagonal plus rank three.
pub fn xstep_rank3(
    dhat: &DictSpectra,
    grad_dict: [&[Complex64]; 2],
    rhs: &[Complex64],
    rho: f64,
) -> Result<Vec<Complex64>> {
    let sys = rank3_system(dhat, grad_dict, rho)?;
    let x = sys.solve(rhs)?;
    certify(&sys, &x, rhs);
    Ok(x)
}
