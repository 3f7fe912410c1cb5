//! File formats: `CSCT` tensors, binary PGM and `key=value` run configs.

use std::path::Path;

use crate::error::{CscError, Result};
use crate::pipeline::Method;
use crate::spectral::{Dictionary, Image};

const MAGIC: &[u8; 4] = b"CSCT";
pub const TENSOR_VERSION: u16 = 1;

fn format_err(path: &Path, reason: impl Into<String>) -> CscError {
    CscError::Format {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CscError {
    CscError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| io_err(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Dense little-endian `f32` tensor: `"CSCT"`, `u16` version, `u16` ndim,
/// `ndim × u32` dims, then the row-major payload.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorFile {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl TensorFile {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != data.len() || dims.len() > u16::MAX as usize || dims.iter().any(|&d| d > u32::MAX as usize) {
            return Err(CscError::DimensionMismatch(format!(
                "tensor dims {dims:?} do not match {} values",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&TENSOR_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dims.len() as u16).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Parses `bytes`; `path` only labels errors.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(format_err(path, "missing CSCT magic"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != TENSOR_VERSION {
            return Err(format_err(path, format!("unsupported tensor version {version}")));
        }
        let ndim = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
        let header = 8 + 4 * ndim;
        if bytes.len() < header {
            return Err(format_err(path, "truncated dimension list"));
        }
        let dims: Vec<usize> = bytes[8..header]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
            .collect();
        let count = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| format_err(path, "dimension product overflows"))?;
        let expected = count
            .checked_mul(4)
            .and_then(|p| p.checked_add(header))
            .ok_or_else(|| format_err(path, "dimension product overflows"))?;
        if bytes.len() != expected {
            return Err(format_err(
                path,
                format!("payload is {} bytes, dims {dims:?} need {}", bytes.len() - header, expected - header),
            ));
        }
        let data = bytes[header..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { dims, data })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_bytes(path)?, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_bytes(path, &self.to_bytes())
    }

    pub fn from_image(img: &Image) -> Self {
        Self {
            dims: vec![img.height(), img.width()],
            data: img.data().iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn to_image(&self, path: &Path) -> Result<Image> {
        let [h, w] = self.dims[..] else {
            return Err(format_err(path, format!("image tensor must be 2-D, got dims {:?}", self.dims)));
        };
        let data = self.data.iter().map(|&v| v as f64).collect();
        Image::new(h, w, data).map_err(|e| format_err(path, e.to_string()))
    }

    pub fn from_dictionary(dict: &Dictionary) -> Self {
        let (fh, fw) = dict.filter_dims();
        Self {
            dims: vec![dict.num_filters(), fh, fw],
            data: dict
                .filters()
                .iter()
                .flat_map(|f| f.data().iter().map(|&v| v as f32))
                .collect(),
        }
    }

    /// Interprets an `M × P × Q` tensor as `M` filters of size `P × Q`.
    pub fn to_dictionary(&self, path: &Path) -> Result<Dictionary> {
        let [m, fh, fw] = self.dims[..] else {
            return Err(format_err(path, format!("dictionary tensor must be 3-D, got dims {:?}", self.dims)));
        };
        if m == 0 || fh == 0 || fw == 0 {
            return Err(format_err(path, "dictionary has an empty dimension"));
        }
        let filters = self
            .data
            .chunks_exact(fh * fw)
            .map(|c| Image::new(fh, fw, c.iter().map(|&v| v as f64).collect()))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| format_err(path, e.to_string()))?;
        Dictionary::new(filters).map_err(|e| format_err(path, e.to_string()))
    }
}

/// Reads an 8-bit binary PGM (`P5`, maxval 255) into `[0, 1]`.
pub fn parse_pgm(bytes: &[u8], path: &Path) -> Result<Image> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(format_err(path, "truncated PGM header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).unwrap_or("").to_string());
    }
    if fields[0] != "P5" {
        return Err(format_err(path, format!("expected P5 magic, found {:?}", fields[0])));
    }
    let num = |s: &str, what: &str| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| format_err(path, format!("bad PGM {what} {s:?}")))
    };
    let (w, h, maxval) = (num(&fields[1], "width")?, num(&fields[2], "height")?, num(&fields[3], "maxval")?);
    if maxval != 255 {
        return Err(format_err(path, format!("only maxval 255 is supported, got {maxval}")));
    }
    if w == 0 || h == 0 {
        return Err(format_err(path, "empty PGM"));
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(format_err(path, "missing separator after PGM header"));
    }
    pos += 1;
    let n = w.checked_mul(h).ok_or_else(|| format_err(path, "PGM size overflows"))?;
    if bytes.len() - pos != n {
        return Err(format_err(
            path,
            format!("PGM raster has {} bytes, expected {n}", bytes.len() - pos),
        ));
    }
    let data = bytes[pos..].iter().map(|&b| b as f64 / 255.0).collect();
    Image::new(h, w, data)
}

/// Encodes as P5 with `round(255 · clip(v, 0, 1))`.
pub fn encode_pgm(img: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|&v| (255.0 * v.clamp(0.0, 1.0)).round() as u8));
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Tensor,
}

impl ImageFormat {
    /// `.csct` means tensor, anything else PGM.
    pub fn from_extension(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csct") => ImageFormat::Tensor,
            _ => ImageFormat::Pgm,
        }
    }
}

/// Reads a PGM or tensor image, detected from the leading bytes.
pub fn read_image(path: &Path) -> Result<(Image, ImageFormat)> {
    let bytes = read_bytes(path)?;
    if bytes.starts_with(MAGIC) {
        Ok((TensorFile::from_bytes(&bytes, path)?.to_image(path)?, ImageFormat::Tensor))
    } else {
        Ok((parse_pgm(&bytes, path)?, ImageFormat::Pgm))
    }
}

pub fn write_image(path: &Path, img: &Image, format: ImageFormat) -> Result<()> {
    match format {
        ImageFormat::Pgm => write_bytes(path, &encode_pgm(img)),
        ImageFormat::Tensor => TensorFile::from_image(img).write(path),
    }
}

pub fn read_dictionary(path: &Path) -> Result<Dictionary> {
    TensorFile::read(path)?.to_dictionary(path)
}

/// Settings from a `key=value` file. `#` starts a comment line.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfigFile {
    pub method: Option<Method>,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub rho: Option<f64>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub sigma: Option<f64>,
    pub seed: Option<u64>,
    pub dict_path: Option<String>,
    pub lambda_l: Option<f64>,
}

impl RunConfigFile {
    /// Parses the text of a config file. Unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: String| CscError::ConfigInvalid(format!("line {}: {msg}", lineno + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let real = |v: &str| v.parse::<f64>().map_err(|_| bad(format!("{key}: not a number: {v:?}")));
            fn set<T>(slot: &mut Option<T>, v: T, key: &str, bad: &dyn Fn(String) -> CscError) -> Result<()> {
                if slot.is_some() {
                    return Err(bad(format!("{key} given twice")));
                }
                *slot = Some(v);
                Ok(())
            }
            match key {
                "method" => set(&mut cfg.method, value.parse::<Method>().map_err(|e| bad(e.to_string()))?, key, &bad)?,
                "lambda" => set(&mut cfg.lambda, real(value)?, key, &bad)?,
                "mu" => set(&mut cfg.mu, real(value)?, key, &bad)?,
                "rho" => set(&mut cfg.rho, real(value)?, key, &bad)?,
                "tol" => set(&mut cfg.tol, real(value)?, key, &bad)?,
                "sigma" => set(&mut cfg.sigma, real(value)?, key, &bad)?,
                "lambda_L" => set(&mut cfg.lambda_l, real(value)?, key, &bad)?,
                "max_iter" => {
                    let v = value.parse().map_err(|_| bad(format!("max_iter: not an integer: {value:?}")))?;
                    set(&mut cfg.max_iter, v, key, &bad)?
                }
                "seed" => {
                    let v = value.parse().map_err(|_| bad(format!("seed: not an integer: {value:?}")))?;
                    set(&mut cfg.seed, v, key, &bad)?
                }
                "dict_path" => set(&mut cfg.dict_path, value.to_string(), key, &bad)?,
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::parse(&text)
    }
}
