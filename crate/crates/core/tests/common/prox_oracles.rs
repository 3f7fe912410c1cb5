//! Minimizers of the proximal objectives by methods that do not use their closed forms.

use csc_core::pipeline::SplitMix64;
use csc_core::prox::*;
use csc_core::spectral::CoeffMaps;

/// Scalar `argmin t|y| + ½(y - z)²` over a uniform grid of spacing `step`.
pub fn grid_l1(z: f64, t: f64, step: f64) -> f64 {
    let lo = z.min(0.0) - 1.0;
    let count = ((z.max(0.0) + 1.0 - lo) / step) as usize;
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..=count {
        let y = lo + k as f64 * step;
        let f = t * y.abs() + 0.5 * (y - z) * (y - z);
        if f < best.0 {
            best = (f, y);
        }
    }
    best.1
}

/// `argmin t‖y‖ + ½‖y - z‖²` in 2-D by repeatedly zooming a 21 x 21 grid.
pub fn zoom_grid_pair(z: [f64; 2], t: f64) -> [f64; 2] {
    let f = |y: [f64; 2]| {
        t * (y[0] * y[0] + y[1] * y[1]).sqrt() + 0.5 * ((y[0] - z[0]).powi(2) + (y[1] - z[1]).powi(2))
    };
    let mut center = [0.0, 0.0];
    let mut half = z[0].abs().max(z[1].abs()) + 1.0;
    while half > 1e-9 {
        let mut best = (f(center), center);
        for i in -10..=10 {
            for j in -10..=10 {
                let y = [center[0] + half * i as f64 / 10.0, center[1] + half * j as f64 / 10.0];
                let v = f(y);
                if v < best.0 {
                    best = (v, y);
                }
            }
        }
        center = best.1;
        half /= 4.0;
    }
    center
}

/// `argmin t‖y‖ + ½‖y - z‖²` as `min t r + ½‖y - z‖²` over the second-order
/// cone `‖y‖ ≤ r`, by projected gradient descent with unit step.
pub fn cone_pgd(z: &[f64], t: f64) -> Vec<f64> {
    let mut y = vec![0.0; z.len()];
    let mut r = 0.0;
    for _ in 0..200_000 {
        let mut ny: Vec<f64> = y.iter().zip(z).map(|(y, z)| y - (y - z)).collect();
        let mut nr = r - t;
        let norm = ny.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= -nr {
            ny.iter_mut().for_each(|v| *v = 0.0);
            nr = 0.0;
        } else if norm > nr {
            let a = 0.5 * (norm + nr);
            ny.iter_mut().for_each(|v| *v *= a / norm);
            nr = a;
        }
        let change = ny
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b).abs())
            .fold((nr - r).abs(), f64::max);
        y = ny;
        r = nr;
        if change < 1e-15 {
            break;
        }
    }
    y
}

fn one(v: f64) -> CoeffMaps {
    CoeffMaps::from_vec(1, 1, 1, vec![v]).unwrap()
}

/// Worst deviation of `prox_l1` from the grid minimizer over `count` scalars.
pub fn l1_worst(seed: u64, count: usize) -> f64 {
    let mut rng = SplitMix64::new(seed);
    (0..count)
        .map(|_| {
            let z = 4.0 * rng.next_f64() - 2.0;
            let t = rng.next_f64();
            let y = prox_l1(&one(z), &[t]).unwrap().data()[0];
            (y - grid_l1(z, t, 1e-4)).abs()
        })
        .fold(0.0, f64::max)
}

/// Worst deviation of `prox_l21_pairwise` from the zoomed grid minimizer.
pub fn pairwise_worst(seed: u64, count: usize) -> f64 {
    let mut rng = SplitMix64::new(seed);
    (0..count)
        .map(|_| {
            let z = [4.0 * rng.next_f64() - 2.0, 4.0 * rng.next_f64() - 2.0];
            let t = 1.5 * rng.next_f64();
            let (y0, y1) = prox_l21_pairwise(&one(z[0]), &one(z[1]), t).unwrap();
            let o = zoom_grid_pair(z, t);
            (y0.data()[0] - o[0]).abs().max((y1.data()[0] - o[1]).abs())
        })
        .fold(0.0, f64::max)
}

/// Worst deviation of `prox_l21_joint` from cone descent on random `M = 3` instances.
pub fn joint_worst(seed: u64, count: usize) -> f64 {
    let mut rng = SplitMix64::new(seed);
    let (m, h, w) = (3, 2, 2);
    let n = h * w;
    let mut worst = 0.0f64;
    for _ in 0..count {
        let z0: Vec<f64> = (0..m * n).map(|_| rng.next_normal()).collect();
        let z1: Vec<f64> = (0..m * n).map(|_| rng.next_normal()).collect();
        let t = 3.0 * rng.next_f64();
        let a = CoeffMaps::from_vec(m, h, w, z0.clone()).unwrap();
        let b = CoeffMaps::from_vec(m, h, w, z1.clone()).unwrap();
        let (y0, y1) = prox_l21_joint(&a, &b, t).unwrap();
        for i in 0..n {
            let idx: Vec<usize> = (0..m).map(|k| k * n + i).collect();
            let z: Vec<f64> = idx.iter().map(|&p| z0[p]).chain(idx.iter().map(|&p| z1[p])).collect();
            let got = idx.iter().map(|&p| y0.data()[p]).chain(idx.iter().map(|&p| y1.data()[p]));
            for (g, o) in got.zip(cone_pgd(&z, t)) {
                worst = worst.max((g - o).abs());
            }
        }
    }
    worst
}
