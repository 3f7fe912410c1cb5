//! Independent spatial-domain oracles shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

pub mod prox_oracles;
pub mod xstep;

use csc_core::pipeline::SplitMix64;
use csc_core::solvers::{SolverResult, Variant};
use csc_core::spectral::{CoeffMaps, Dictionary, Image};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub fn uniform_image(h: usize, w: usize, rng: &mut SplitMix64) -> Image {
    Image::from_fn(h, w, |_, _| 2.0 * rng.next_f64() - 1.0)
}

pub fn random_dict(m: usize, p: usize, q: usize, rng: &mut SplitMix64) -> Dictionary {
    let filters = (0..m)
        .map(|_| Image::from_fn(p, q, |_, _| rng.next_normal()))
        .collect();
    Dictionary::new(filters).unwrap()
}

pub fn random_maps(m: usize, h: usize, w: usize, rng: &mut SplitMix64) -> CoeffMaps {
    let data = (0..m * h * w).map(|_| rng.next_normal()).collect();
    CoeffMaps::from_vec(m, h, w, data).unwrap()
}

/// `N x N` matrix of circular convolution with `filter` on an `h x w` grid:
/// `(d * x)[r, c] = Σ d[p, q] x[r - p, c - q]`.
pub fn conv_matrix(filter: &Image, h: usize, w: usize) -> DMatrix<f64> {
    let n = h * w;
    let mut k = DMatrix::zeros(n, n);
    for r in 0..h {
        for c in 0..w {
            for p in 0..filter.height() {
                for q in 0..filter.width() {
                    let rr = (r + h - p % h) % h;
                    let cc = (c + w - q % w) % w;
                    k[(r * w + c, rr * w + cc)] += filter.get(p, q);
                }
            }
        }
    }
    k
}

/// Forward difference matrix. `dir = 0`: `x[r, c+1] - x[r, c]`; `dir = 1`: `x[r+1, c] - x[r, c]`.
pub fn diff_matrix(dir: usize, h: usize, w: usize) -> DMatrix<f64> {
    let n = h * w;
    let mut g = DMatrix::zeros(n, n);
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let j = if dir == 0 { r * w + (c + 1) % w } else { ((r + 1) % h) * w + c };
            g[(i, j)] += 1.0;
            g[(i, i)] -= 1.0;
        }
    }
    g
}

/// `[C_0 ... C_{M-1}]`, the `N x MN` synthesis operator.
pub fn dict_matrix(dict: &Dictionary, h: usize, w: usize) -> DMatrix<f64> {
    let n = h * w;
    let m = dict.num_filters();
    let mut d = DMatrix::zeros(n, m * n);
    for k in 0..m {
        d.view_mut((0, k * n), (n, n)).copy_from(&conv_matrix(dict.filter(k), h, w));
    }
    d
}

/// Block diagonal `diag(scale_k G)` over `M` maps.
pub fn block_diag(g: &DMatrix<f64>, scale: &[f64]) -> DMatrix<f64> {
    let n = g.nrows();
    let mut out = DMatrix::zeros(scale.len() * n, scale.len() * n);
    for (k, s) in scale.iter().enumerate() {
        out.view_mut((k * n, k * n), (n, n)).copy_from(&(g * *s));
    }
    out
}

pub fn dense_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    a.clone().lu().solve(b).expect("nonsingular oracle system")
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Direct `O(N²)` unnormalized 2-D DFT.
pub fn direct_dft(x: &[f64], h: usize, w: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); h * w];
    for k in 0..h {
        for l in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..h {
                for c in 0..w {
                    let phase = -2.0
                        * std::f64::consts::PI
                        * ((k * r) as f64 / h as f64 + (l * c) as f64 / w as f64);
                    acc += x[r * w + c] * Complex64::from_polar(1.0, phase);
                }
            }
            out[k * w + l] = acc;
        }
    }
    out
}

/// `Σ_m d_m * x_m` by the direct periodic sum.
pub fn synth(dict: &Dictionary, x: &CoeffMaps) -> Vec<f64> {
    let (m, h, w) = x.shape();
    let mut out = vec![0.0; h * w];
    for k in 0..m {
        let f = dict.filter(k);
        let xm = x.map(k);
        for r in 0..h {
            for c in 0..w {
                let mut acc = 0.0;
                for p in 0..f.height() {
                    for q in 0..f.width() {
                        acc += f.get(p, q) * xm[((r + h - p) % h) * w + (c + w - q) % w];
                    }
                }
                out[r * w + c] += acc;
            }
        }
    }
    out
}

/// `D_mᵀ v` for every map: periodic correlation with each filter.
pub fn synth_adjoint(dict: &Dictionary, v: &[f64], h: usize, w: usize) -> Vec<Vec<f64>> {
    (0..dict.num_filters())
        .map(|k| {
            let f = dict.filter(k);
            let mut out = vec![0.0; h * w];
            for r in 0..h {
                for c in 0..w {
                    let mut acc = 0.0;
                    for p in 0..f.height() {
                        for q in 0..f.width() {
                            acc += f.get(p, q) * v[((r + p) % h) * w + (c + q) % w];
                        }
                    }
                    out[r * w + c] = acc;
                }
            }
            out
        })
        .collect()
}

pub fn grad(dir: usize, x: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let next = if dir == 0 { r * w + (c + 1) % w } else { ((r + 1) % h) * w + c };
            out[r * w + c] = x[next] - x[r * w + c];
        }
    }
    out
}

pub fn grad_adjoint(dir: usize, v: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let next = if dir == 0 { r * w + (c + 1) % w } else { ((r + 1) % h) * w + c };
            out[next] += v[i];
            out[i] -= v[i];
        }
    }
    out
}

/// Violation of `ν ∈ t ∂‖y‖₂` for one group.
fn group_violation(y: &[f64], nu: &[f64], t: f64) -> f64 {
    let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nn = nu.iter().map(|v| v * v).sum::<f64>().sqrt();
    if ny == 0.0 {
        (nn - t).max(0.0)
    } else {
        y.iter()
            .zip(nu)
            .map(|(y, n)| (n - t * y / ny).abs())
            .fold(0.0, f64::max)
    }
}

/// Largest violation of the first-order optimality conditions at a returned
/// solution, using `ν = ρ u` from the final state as the multipliers.
///
/// Checks stationarity `∇f(y2) + Aᵀν = 0`, membership of each `ν` block in
/// the subdifferential of its penalty at the matching `y` block, and
/// feasibility `A y2 = y`. Uniform weights `α = β = 1` are assumed.
pub fn optimality_violation(
    variant: Variant,
    dict: &Dictionary,
    s: &Image,
    lambda: f64,
    mu: f64,
    res: &SolverResult,
) -> f64 {
    let x = &res.coeffs;
    let (m, h, w) = x.shape();
    let n = h * w;
    let st = &res.final_state;
    let rho = st.rho;
    let resid: Vec<f64> = synth(dict, x).iter().zip(s.data()).map(|(a, b)| a - b).collect();
    let mut station = synth_adjoint(dict, &resid, h, w);
    let nu: Vec<Vec<f64>> = st
        .u_blocks
        .iter()
        .map(|u| u.data().iter().map(|v| rho * v).collect())
        .collect();
    let y = &st.y_blocks;
    let mut worst = 0.0f64;

    let nu2 = nu.last().unwrap();
    for k in 0..m {
        for i in 0..n {
            station[k][i] += nu2[k * n + i];
            let v = x.map(k)[i];
            let viol = if v == 0.0 {
                (nu2[k * n + i].abs() - lambda).max(0.0)
            } else {
                (nu2[k * n + i] - lambda * v.signum()).abs()
            };
            worst = worst.max(viol);
        }
    }

    match variant {
        Variant::Cbpdn => {}
        Variant::Grd => {
            for k in 0..m {
                for dir in 0..2 {
                    let gg = grad_adjoint(dir, &grad(dir, x.map(k), h, w), h, w);
                    for i in 0..n {
                        station[k][i] += mu * gg[i];
                    }
                }
            }
        }
        Variant::Stv | Variant::Vtv => {
            for k in 0..m {
                for dir in 0..2 {
                    let g = grad(dir, x.map(k), h, w);
                    worst = worst.max(max_abs_diff(&g, y[dir].map(k)));
                    let back = grad_adjoint(dir, &nu[dir][k * n..(k + 1) * n], h, w);
                    for i in 0..n {
                        station[k][i] += back[i];
                    }
                }
            }
            for i in 0..n {
                if variant == Variant::Stv {
                    for k in 0..m {
                        let p = k * n + i;
                        let yv = [y[0].data()[p], y[1].data()[p]];
                        worst = worst.max(group_violation(&yv, &[nu[0][p], nu[1][p]], mu));
                    }
                } else {
                    let idx: Vec<usize> = (0..m).map(|k| k * n + i).collect();
                    let yv: Vec<f64> = (0..2)
                        .flat_map(|l| idx.iter().map(move |&p| y[l].data()[p]))
                        .collect();
                    let nv: Vec<f64> = (0..2).flat_map(|l| idx.iter().map(|&p| nu[l][p]).collect::<Vec<_>>()).collect();
                    worst = worst.max(group_violation(&yv, &nv, mu));
                }
            }
        }
        Variant::Rtv => {
            let recon = synth(dict, x);
            for dir in 0..2 {
                let g = grad(dir, &recon, h, w);
                worst = worst.max(max_abs_diff(&g, y[dir].data()));
                let back = synth_adjoint(dict, &grad_adjoint(dir, &nu[dir], h, w), h, w);
                for k in 0..m {
                    for i in 0..n {
                        station[k][i] += back[k][i];
                    }
                }
            }
            for i in 0..n {
                let yv = [y[0].data()[i], y[1].data()[i]];
                worst = worst.max(group_violation(&yv, &[nu[0][i], nu[1][i]], mu));
            }
        }
    }
    let stationarity = station.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    worst.max(stationarity)
}

/// Isotropic TV denoiser `argmin ½‖u - f‖² + μ Σ |∇u|` by split Bregman, with
/// the quadratic subproblem solved by conjugate gradients in the spatial domain.
pub fn split_bregman_tv(f: &Image, mu: f64, gamma: f64, max_outer: usize, tol: f64) -> Vec<f64> {
    let (h, w) = f.dims();
    let n = h * w;
    let mut u = f.data().to_vec();
    let mut d = [vec![0.0; n], vec![0.0; n]];
    let mut b = [vec![0.0; n], vec![0.0; n]];
    let apply = |x: &[f64]| -> Vec<f64> {
        let mut out = x.to_vec();
        for dir in 0..2 {
            let gg = grad_adjoint(dir, &grad(dir, x, h, w), h, w);
            for i in 0..n {
                out[i] += gamma * gg[i];
            }
        }
        out
    };
    for _ in 0..max_outer {
        let mut rhs = f.data().to_vec();
        for dir in 0..2 {
            let diff: Vec<f64> = d[dir].iter().zip(&b[dir]).map(|(d, b)| d - b).collect();
            let back = grad_adjoint(dir, &diff, h, w);
            for i in 0..n {
                rhs[i] += gamma * back[i];
            }
        }
        let next = conjugate_gradient(&apply, &rhs, &u, 1e-15);
        let change = rel_err(&next, &u);
        u = next;
        let g = [grad(0, &u, h, w), grad(1, &u, h, w)];
        for i in 0..n {
            let z0 = g[0][i] + b[0][i];
            let z1 = g[1][i] + b[1][i];
            let r = (z0 * z0 + z1 * z1).sqrt();
            let scale = if r > 0.0 { (r - mu / gamma).max(0.0) / r } else { 0.0 };
            d[0][i] = z0 * scale;
            d[1][i] = z1 * scale;
            b[0][i] = z0 - d[0][i];
            b[1][i] = z1 - d[1][i];
        }
        if change < tol {
            break;
        }
    }
    u
}

fn conjugate_gradient(apply: &dyn Fn(&[f64]) -> Vec<f64>, b: &[f64], x0: &[f64], tol: f64) -> Vec<f64> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut x = x0.to_vec();
    let ax = apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let stop = tol * tol * dot(b, b);
    for _ in 0..10 * b.len() {
        if rr <= stop {
            break;
        }
        let ap = apply(&p);
        let alpha = rr / dot(&p, &ap);
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let next = dot(&r, &r);
        let beta = next / rr;
        rr = next;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
    }
    x
}
