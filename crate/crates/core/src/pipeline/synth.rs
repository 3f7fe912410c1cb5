//! Deterministic test data: a random fallback dictionary and synthetic images.

use super::rng::SplitMix64;
use crate::error::{CscError, Result};
use crate::spectral::{Dictionary, Image};

/// `num_filters` zero-mean, unit-norm `size × size` filters with i.i.d.
/// normal entries drawn in filter order, row-major.
pub fn fallback_dictionary(num_filters: usize, size: usize, seed: u64) -> Result<Dictionary> {
    if num_filters == 0 || size < 2 {
        return Err(CscError::ConfigInvalid(format!(
            "fallback dictionary needs at least one filter of size >= 2, got {num_filters} of {size}"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let filters = (0..num_filters)
        .map(|_| {
            let mut v: Vec<f64> = (0..size * size).map(|_| rng.next_normal()).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            v.iter_mut().for_each(|x| *x -= mean);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            Image::new(size, size, v)
        })
        .collect::<Result<Vec<_>>>()?;
    Dictionary::new(filters)
}

/// Piecewise-constant image: a Voronoi partition of `size × size` into
/// `regions` cells with random seed points and gray levels in `[0.1, 0.9]`.
pub fn piecewise_constant(size: usize, regions: usize, seed: u64) -> Image {
    let mut rng = SplitMix64::new(seed);
    let sites: Vec<(f64, f64, f64)> = (0..regions.max(1))
        .map(|_| {
            let r = rng.next_f64() * size as f64;
            let c = rng.next_f64() * size as f64;
            let v = 0.1 + 0.8 * rng.next_f64();
            (r, c, v)
        })
        .collect();
    Image::from_fn(size, size, |i, j| {
        let (y, x) = (i as f64 + 0.5, j as f64 + 0.5);
        let mut best = (f64::INFINITY, 0.0);
        for &(r, c, v) in &sites {
            let d = (y - r) * (y - r) + (x - c) * (x - c);
            if d < best.0 {
                best = (d, v);
            }
        }
        best.1
    })
}

/// Checkerboard of `cell × cell` squares alternating between 0.2 and 0.8.
pub fn checkerboard(size: usize, cell: usize) -> Image {
    let cell = cell.max(1);
    Image::from_fn(size, size, |i, j| {
        if (i / cell + j / cell).is_multiple_of(2) {
            0.2
        } else {
            0.8
        }
    })
}
