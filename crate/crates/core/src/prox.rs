//! Closed-form proximal operators for the y-subproblems.

use crate::error::{CscError, Result};
use crate::spectral::CoeffMaps;

/// Magnitudes at or below this are treated as exact zeros by the block shrinkages.
const ZERO_MAGNITUDE: f64 = 1e-300;

/// Per-map nonnegative weights (`α_m` or `β_m`).
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(CscError::ConfigInvalid("empty weight vector".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(CscError::ConfigInvalid(format!(
                "weights must be finite and nonnegative, got {w}"
            )));
        }
        Ok(Self(weights))
    }

    pub fn ones(len: usize) -> Self {
        Self(vec![1.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[inline]
pub(crate) fn soft(z: f64, t: f64) -> f64 {
    let a = z.abs() - t;
    if a > 0.0 {
        z.signum() * a
    } else {
        0.0
    }
}

pub(crate) fn soft_threshold_slice(z: &mut [f64], t: f64) {
    for v in z.iter_mut() {
        *v = soft(*v, t);
    }
}

/// `max(0, r - t) / r`, with zero-magnitude sites mapped to zero.
#[inline]
pub(crate) fn shrink_scale(r: f64, t: f64) -> f64 {
    if r <= ZERO_MAGNITUDE {
        0.0
    } else {
        (r - t).max(0.0) / r
    }
}

/// In-place pairwise block shrinkage of `(z0[i], z1[i])`.
pub(crate) fn shrink_pairs(z0: &mut [f64], z1: &mut [f64], t: f64) {
    for (a, b) in z0.iter_mut().zip(z1.iter_mut()) {
        let s = shrink_scale((*a * *a + *b * *b).sqrt(), t);
        *a *= s;
        *b *= s;
    }
}

/// In-place joint shrinkage: magnitudes pooled over all maps at each pixel.
pub(crate) fn shrink_joint(z0: &mut [f64], z1: &mut [f64], map_len: usize, t: f64) {
    let num_maps = z0.len() / map_len;
    let mut mag = vec![0.0; map_len];
    for m in 0..num_maps {
        let (a, b) = (&z0[m * map_len..(m + 1) * map_len], &z1[m * map_len..(m + 1) * map_len]);
        for i in 0..map_len {
            mag[i] += a[i] * a[i] + b[i] * b[i];
        }
    }
    let scale: Vec<f64> = mag.iter().map(|r2| shrink_scale(r2.sqrt(), t)).collect();
    for m in 0..num_maps {
        let range = m * map_len..(m + 1) * map_len;
        for (v, s) in z0[range.clone()].iter_mut().zip(&scale) {
            *v *= s;
        }
        for (v, s) in z1[range].iter_mut().zip(&scale) {
            *v *= s;
        }
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if t.is_nan() || t < 0.0 {
        return Err(CscError::NegativeThreshold(t));
    }
    Ok(())
}

fn check_pair(z0: &CoeffMaps, z1: &CoeffMaps) -> Result<()> {
    if z0.shape() != z1.shape() {
        return Err(CscError::ShapeMismatch(format!(
            "{:?} vs {:?}",
            z0.shape(),
            z1.shape()
        )));
    }
    Ok(())
}

/// Elementwise soft thresholding with one threshold per map.
pub fn prox_l1(z: &CoeffMaps, thresholds: &[f64]) -> Result<CoeffMaps> {
    if thresholds.len() != z.num_maps() {
        return Err(CscError::ShapeMismatch(format!(
            "{} thresholds for {} maps",
            thresholds.len(),
            z.num_maps()
        )));
    }
    thresholds.iter().try_for_each(|&t| check_threshold(t))?;
    let mut out = z.clone();
    for (m, &t) in thresholds.iter().enumerate() {
        soft_threshold_slice(out.map_mut(m), t);
    }
    Ok(out)
}

/// Block soft thresholding of each `(z0, z1)` element pair.
pub fn prox_l21_pairwise(z0: &CoeffMaps, z1: &CoeffMaps, t: f64) -> Result<(CoeffMaps, CoeffMaps)> {
    check_pair(z0, z1)?;
    check_threshold(t)?;
    let (mut y0, mut y1) = (z0.clone(), z1.clone());
    shrink_pairs(y0.data_mut(), y1.data_mut(), t);
    Ok((y0, y1))
}

/// Block soft thresholding with the magnitude at each pixel pooled across all maps.
pub fn prox_l21_joint(z0: &CoeffMaps, z1: &CoeffMaps, t: f64) -> Result<(CoeffMaps, CoeffMaps)> {
    check_pair(z0, z1)?;
    check_threshold(t)?;
    let (mut y0, mut y1) = (z0.clone(), z1.clone());
    let n = z0.map_len();
    shrink_joint(y0.data_mut(), y1.data_mut(), n, t);
    Ok((y0, y1))
}
