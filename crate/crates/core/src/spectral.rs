//! Images, coefficient maps, dictionaries and the 2D DFT machinery.
//!
//! All transforms are circular. The forward DFT is unnormalized and the
//! inverse carries the `1/N` factor, so the pointwise product of an embedded
//! filter spectrum with an image spectrum is exactly the spectrum of their
//! circular convolution.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{CscError, Result};

/// Single-channel real raster, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width {
            return Err(CscError::BadLength {
                len: data.len(),
                height,
                width,
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(CscError::NonFinite(i));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "empty image");
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    /// Builds an image from a per-pixel function of `(row, col)`.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut img = Self::zeros(height, width);
        for r in 0..height {
            for c in 0..width {
                img.data[r * width + c] = f(r, c);
            }
        }
        img
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// A stack of `M` equally sized coefficient maps stored contiguously, map-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffMaps {
    height: usize,
    width: usize,
    num_maps: usize,
    data: Vec<f64>,
}

impl CoeffMaps {
    pub fn zeros(num_maps: usize, height: usize, width: usize) -> Self {
        assert!(num_maps > 0 && height > 0 && width > 0, "empty coefficient maps");
        Self {
            height,
            width,
            num_maps,
            data: vec![0.0; num_maps * height * width],
        }
    }

    pub fn from_images(maps: &[Image]) -> Result<Self> {
        let first = maps
            .first()
            .ok_or_else(|| CscError::ShapeMismatch("no coefficient maps".into()))?;
        let (h, w) = first.dims();
        let mut data = Vec::with_capacity(maps.len() * h * w);
        for (m, img) in maps.iter().enumerate() {
            if img.dims() != (h, w) {
                return Err(CscError::ShapeMismatch(format!(
                    "map {m} is {}x{}, expected {h}x{w}",
                    img.height, img.width
                )));
            }
            data.extend_from_slice(&img.data);
        }
        Ok(Self {
            height: h,
            width: w,
            num_maps: maps.len(),
            data,
        })
    }

    pub fn from_vec(num_maps: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if num_maps == 0 || height == 0 || width == 0 || data.len() != num_maps * height * width {
            return Err(CscError::ShapeMismatch(format!(
                "{} values for {num_maps} maps of {height}x{width}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(CscError::NonFinite(i));
        }
        Ok(Self {
            height,
            width,
            num_maps,
            data,
        })
    }

    pub fn num_maps(&self) -> usize {
        self.num_maps
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Pixels per map.
    pub fn map_len(&self) -> usize {
        self.height * self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.num_maps, self.height, self.width)
    }

    pub fn map(&self, m: usize) -> &[f64] {
        let n = self.map_len();
        &self.data[m * n..(m + 1) * n]
    }

    pub fn map_mut(&mut self, m: usize) -> &mut [f64] {
        let n = self.map_len();
        &mut self.data[m * n..(m + 1) * n]
    }

    pub fn map_image(&self, m: usize) -> Image {
        Image {
            height: self.height,
            width: self.width,
            data: self.map(m).to_vec(),
        }
    }

    pub fn maps(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.map_len())
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// A set of `M` real filters of identical size.
#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary {
    filter_height: usize,
    filter_width: usize,
    filters: Vec<Image>,
}

impl Dictionary {
    pub fn new(filters: Vec<Image>) -> Result<Self> {
        let first = filters
            .first()
            .ok_or_else(|| CscError::ShapeMismatch("dictionary has no filters".into()))?;
        let (fh, fw) = first.dims();
        if let Some(m) = filters.iter().position(|f| f.dims() != (fh, fw)) {
            return Err(CscError::ShapeMismatch(format!(
                "filter {m} differs in size from filter 0 ({fh}x{fw})"
            )));
        }
        Ok(Self {
            filter_height: fh,
            filter_width: fw,
            filters,
        })
    }

    pub fn num_filters(&self) -> usize {
        self.filters.len()
    }

    /// Side length for square filters; the larger side otherwise.
    pub fn filter_size(&self) -> usize {
        self.filter_height.max(self.filter_width)
    }

    pub fn filter_dims(&self) -> (usize, usize) {
        (self.filter_height, self.filter_width)
    }

    pub fn filter(&self, m: usize) -> &Image {
        &self.filters[m]
    }

    pub fn filters(&self) -> &[Image] {
        &self.filters
    }

    pub fn check_fits(&self, height: usize, width: usize) -> Result<()> {
        if self.filter_height > height || self.filter_width > width {
            return Err(CscError::FilterTooLarge {
                fh: self.filter_height,
                fw: self.filter_width,
                height,
                width,
            });
        }
        Ok(())
    }

    /// Frequency-domain embedding of every filter on an `height x width` grid.
    pub fn spectra(&self, height: usize, width: usize) -> Result<DictSpectra> {
        self.check_fits(height, width)?;
        let n = height * width;
        let fft = Fft2::new(height, width);
        let mut data = vec![Complex64::new(0.0, 0.0); self.filters.len() * n];
        data.par_chunks_mut(n)
            .zip(self.filters.par_iter())
            .for_each(|(out, f)| {
                place_at_origin(f, width, out);
                fft.forward(out);
            });
        Ok(DictSpectra {
            height,
            width,
            num_maps: self.filters.len(),
            data,
        })
    }
}

/// Embedded filter spectra `d̂_m`, map-major.
#[derive(Clone, Debug)]
pub struct DictSpectra {
    pub height: usize,
    pub width: usize,
    pub num_maps: usize,
    pub data: Vec<Complex64>,
}

impl DictSpectra {
    pub fn map(&self, m: usize) -> &[Complex64] {
        let n = self.height * self.width;
        &self.data[m * n..(m + 1) * n]
    }

    pub fn bins(&self) -> usize {
        self.height * self.width
    }
}

/// Complex spectrum of an image, same index layout as [`Image`].
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralImage {
    pub height: usize,
    pub width: usize,
    pub data: Vec<Complex64>,
}

impl SpectralImage {
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.width + col]
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Pointwise product, the spectrum of a circular convolution.
    pub fn mul(&self, other: &SpectralImage) -> Result<SpectralImage> {
        if (self.height, self.width) != (other.height, other.width) {
            return Err(CscError::ShapeMismatch("spectra differ in size".into()));
        }
        Ok(SpectralImage {
            height: self.height,
            width: self.width,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        })
    }
}

/// Cached row/column FFT plans for one grid size.
#[derive(Clone)]
pub struct Fft2 {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish()
    }
}

impl Fft2 {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        Self {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            col_fwd: planner.plan_fft_forward(height),
            row_inv: planner.plan_fft_inverse(width),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn bins(&self) -> usize {
        self.height * self.width
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, buf: &mut [Complex64]) {
        let mut ws = self.workspace();
        self.transform(buf, &self.row_fwd, &self.col_fwd, &mut ws);
    }

    /// Inverse transform in place, scaled by `1/N`.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        let mut ws = self.workspace();
        self.inverse_with(buf, &mut ws);
    }

    fn inverse_with(&self, buf: &mut [Complex64], ws: &mut Workspace) {
        self.transform(buf, &self.row_inv, &self.col_inv, ws);
        let scale = 1.0 / self.bins() as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
    }

    fn workspace(&self) -> Workspace {
        let len = [&self.row_fwd, &self.col_fwd, &self.row_inv, &self.col_inv]
            .iter()
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Workspace {
            scratch: vec![Complex64::new(0.0, 0.0); len],
            transposed: vec![Complex64::new(0.0, 0.0); self.bins()],
        }
    }

    fn transform(&self, buf: &mut [Complex64], row: &Arc<dyn Fft<f64>>, col: &Arc<dyn Fft<f64>>, ws: &mut Workspace) {
        let (h, w) = (self.height, self.width);
        debug_assert_eq!(buf.len(), h * w);
        if w > 1 {
            row.process_with_scratch(buf, &mut ws.scratch);
        }
        if h > 1 {
            let t = &mut ws.transposed;
            transpose::transpose(buf, t, w, h);
            col.process_with_scratch(t, &mut ws.scratch);
            transpose::transpose(t, buf, h, w);
        }
    }

    pub fn forward_real(&self, data: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    /// Inverse transform keeping only the real part.
    pub fn inverse_real(&self, spec: &[Complex64]) -> Vec<f64> {
        let mut buf = spec.to_vec();
        self.inverse(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// Forward transform of `num_maps` consecutive real maps.
    ///
    /// Maps are transformed two at a time as the real and imaginary parts of
    /// one complex signal and separated by conjugate symmetry.
    pub fn forward_maps(&self, data: &[f64], out: &mut [Complex64]) {
        let (h, w) = (self.height, self.width);
        let n = self.bins();
        out.par_chunks_mut(2 * n)
            .zip(data.par_chunks(2 * n))
            .for_each_init(
                || (self.workspace(), vec![Complex64::new(0.0, 0.0); n]),
                |(ws, z), (o, d)| {
                    if d.len() == n {
                        for (z, &v) in o.iter_mut().zip(d) {
                            *z = Complex64::new(v, 0.0);
                        }
                        self.transform(o, &self.row_fwd, &self.col_fwd, ws);
                        return;
                    }
                    for (z, (&a, &b)) in z.iter_mut().zip(d[..n].iter().zip(&d[n..])) {
                        *z = Complex64::new(a, b);
                    }
                    self.transform(z, &self.row_fwd, &self.col_fwd, ws);
                    let (oa, ob) = o.split_at_mut(n);
                    for r in 0..h {
                        let mr = if r == 0 { 0 } else { h - r };
                        for c in 0..w {
                            let mc = if c == 0 { 0 } else { w - c };
                            let (p, q) = (z[r * w + c], z[mr * w + mc].conj());
                            oa[r * w + c] = (p + q) * 0.5;
                            let d = (p - q) * 0.5;
                            ob[r * w + c] = Complex64::new(d.im, -d.re);
                        }
                    }
                },
            );
    }

    /// Inverse transform of consecutive conjugate-symmetric spectra into real
    /// maps, two maps per complex transform.
    pub fn inverse_maps(&self, spec: &[Complex64], out: &mut [f64]) {
        let n = self.bins();
        out.par_chunks_mut(2 * n)
            .zip(spec.par_chunks(2 * n))
            .for_each_init(
                || (self.workspace(), vec![Complex64::new(0.0, 0.0); n]),
                |(ws, buf), (o, s)| {
                    if s.len() == n {
                        buf.copy_from_slice(s);
                        self.inverse_with(buf, ws);
                        for (v, z) in o.iter_mut().zip(buf.iter()) {
                            *v = z.re;
                        }
                        return;
                    }
                    for (z, (a, b)) in buf.iter_mut().zip(s[..n].iter().zip(&s[n..])) {
                        *z = a + Complex64::new(-b.im, b.re);
                    }
                    self.inverse_with(buf, ws);
                    let (oa, ob) = o.split_at_mut(n);
                    for ((a, b), z) in oa.iter_mut().zip(ob.iter_mut()).zip(buf.iter()) {
                        *a = z.re;
                        *b = z.im;
                    }
                },
            );
    }
}

struct Workspace {
    scratch: Vec<Complex64>,
    transposed: Vec<Complex64>,
}

/// Unnormalized forward 2D DFT.
pub fn dft2(img: &Image) -> SpectralImage {
    let fft = Fft2::new(img.height, img.width);
    SpectralImage {
        height: img.height,
        width: img.width,
        data: fft.forward_real(&img.data),
    }
}

/// Relative imaginary residue above which an inverse transform is rejected.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Inverse 2D DFT with `1/N` scaling; rejects spectra whose inverse is not real.
pub fn idft2(spec: &SpectralImage) -> Result<Image> {
    let fft = Fft2::new(spec.height, spec.width);
    let mut buf = spec.data.clone();
    fft.inverse(&mut buf);
    let im: f64 = buf.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
    let total: f64 = buf.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if im > SYMMETRY_TOL * total {
        return Err(CscError::NonSymmetricSpectrum {
            residue: im,
            relative: im / total,
        });
    }
    Image::new(spec.height, spec.width, buf.into_iter().map(|z| z.re).collect())
}

fn place_at_origin(filter: &Image, width: usize, out: &mut [Complex64]) {
    out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
    for r in 0..filter.height {
        for c in 0..filter.width {
            out[r * width + c] = Complex64::new(filter.get(r, c), 0.0);
        }
    }
}

/// Zero-pads `filter` to `height x width` (origin at the top-left corner) and transforms it.
pub fn embed_filter(filter: &Image, height: usize, width: usize) -> Result<SpectralImage> {
    if filter.height > height || filter.width > width {
        return Err(CscError::FilterTooLarge {
            fh: filter.height,
            fw: filter.width,
            height,
            width,
        });
    }
    let fft = Fft2::new(height, width);
    let mut data = vec![Complex64::new(0.0, 0.0); height * width];
    place_at_origin(filter, width, &mut data);
    fft.forward(&mut data);
    Ok(SpectralImage {
        height,
        width,
        data,
    })
}

/// Spatial circular convolution `(f * x)[i, j] = Σ f[a, b] x[i - a, j - b]`.
pub fn circ_conv(filter: &Image, img: &Image) -> Result<Image> {
    let (h, w) = img.dims();
    if filter.height > h || filter.width > w {
        return Err(CscError::FilterTooLarge {
            fh: filter.height,
            fw: filter.width,
            height: h,
            width: w,
        });
    }
    let mut out = Image::zeros(h, w);
    for a in 0..filter.height {
        for b in 0..filter.width {
            let f = filter.get(a, b);
            if f == 0.0 {
                continue;
            }
            for i in 0..h {
                let src_row = (i + h - a) % h;
                for j in 0..w {
                    let src_col = (j + w - b) % w;
                    out.data[i * w + j] += f * img.data[src_row * w + src_col];
                }
            }
        }
    }
    Ok(out)
}

/// Index of the gradient direction: `0` along rows (horizontal), `1` along columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradDir {
    Rows,
    Cols,
}

/// First-order circular forward differences.
///
/// `g0 * x` at `(i, j)` is `x[i, j+1] - x[i, j]` and `g1 * x` is
/// `x[i+1, j] - x[i, j]`, both wrapping at the border. As convolution kernels
/// these are the taps `-1` at the origin and `+1` at offset `-1` (wrapped).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradFilterPair {
    /// Taps of the row-direction kernel as `(row offset, col offset, weight)`.
    pub g0: [(isize, isize, f64); 2],
    pub g1: [(isize, isize, f64); 2],
}

pub fn make_grad_filters() -> GradFilterPair {
    GradFilterPair {
        g0: [(0, 0, -1.0), (0, -1, 1.0)],
        g1: [(0, 0, -1.0), (-1, 0, 1.0)],
    }
}

impl GradFilterPair {
    pub fn taps(&self, dir: GradDir) -> &[(isize, isize, f64); 2] {
        match dir {
            GradDir::Rows => &self.g0,
            GradDir::Cols => &self.g1,
        }
    }

    /// Kernel wrapped onto an `height x width` grid (origin at the top-left corner).
    pub fn kernel(&self, dir: GradDir, height: usize, width: usize) -> Image {
        let mut k = Image::zeros(height, width);
        for &(dr, dc, v) in self.taps(dir) {
            let r = dr.rem_euclid(height as isize) as usize;
            let c = dc.rem_euclid(width as isize) as usize;
            k.data[r * width + c] += v;
        }
        k
    }

    pub fn spectrum(&self, dir: GradDir, height: usize, width: usize) -> SpectralImage {
        dft2(&self.kernel(dir, height, width))
    }

    /// `|ĝ0|² + |ĝ1|²` per bin.
    pub fn power_sum(&self, height: usize, width: usize) -> Vec<f64> {
        let s0 = self.spectrum(GradDir::Rows, height, width);
        let s1 = self.spectrum(GradDir::Cols, height, width);
        s0.data
            .iter()
            .zip(&s1.data)
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
            .collect()
    }

    pub fn apply(&self, dir: GradDir, img: &Image) -> Image {
        let mut out = Image::zeros(img.height, img.width);
        forward_diff(dir, img.height, img.width, &img.data, &mut out.data);
        out
    }

    pub fn apply_adjoint(&self, dir: GradDir, img: &Image) -> Image {
        let mut out = Image::zeros(img.height, img.width);
        forward_diff_adjoint(dir, img.height, img.width, &img.data, &mut out.data);
        out
    }
}

/// `out = g_dir * x` for one `h x w` map.
pub(crate) fn forward_diff(dir: GradDir, h: usize, w: usize, x: &[f64], out: &mut [f64]) {
    match dir {
        GradDir::Rows => {
            for i in 0..h {
                let row = &x[i * w..(i + 1) * w];
                let o = &mut out[i * w..(i + 1) * w];
                for j in 0..w {
                    let next = if j + 1 == w { 0 } else { j + 1 };
                    o[j] = row[next] - row[j];
                }
            }
        }
        GradDir::Cols => {
            for i in 0..h {
                let next = if i + 1 == h { 0 } else { i + 1 };
                for j in 0..w {
                    out[i * w + j] = x[next * w + j] - x[i * w + j];
                }
            }
        }
    }
}

/// `out = g_dirᵀ v`, the backward difference `v[k-1] - v[k]`.
pub(crate) fn forward_diff_adjoint(dir: GradDir, h: usize, w: usize, v: &[f64], out: &mut [f64]) {
    match dir {
        GradDir::Rows => {
            for i in 0..h {
                let row = &v[i * w..(i + 1) * w];
                let o = &mut out[i * w..(i + 1) * w];
                for j in 0..w {
                    let prev = if j == 0 { w - 1 } else { j - 1 };
                    o[j] = row[prev] - row[j];
                }
            }
        }
        GradDir::Cols => {
            for i in 0..h {
                let prev = if i == 0 { h - 1 } else { i - 1 };
                for j in 0..w {
                    out[i * w + j] = v[prev * w + j] - v[i * w + j];
                }
            }
        }
    }
}
