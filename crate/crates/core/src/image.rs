//! Pixel grids, binary PGM/PPM I/O and error measures.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// A dense image with `channels` interleaved samples per pixel, stored
/// row-major as `f64` on the nominal 0..=255 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!("empty image {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!("{channels} channels, expected 1 or 3")));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidImage(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidImage(format!("non-finite sample at index {i}")));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds a greyscale image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, 1, data)
    }

    /// Interleaves per-channel planes into one image.
    pub fn from_planes(width: usize, height: usize, planes: &[Vec<f64>]) -> Result<Self> {
        let channels = planes.len();
        let pixels = width * height;
        if planes.iter().any(|p| p.len() != pixels) {
            return Err(Error::InvalidImage("plane length does not match image size".into()));
        }
        let mut data = Vec::with_capacity(pixels * channels);
        for i in 0..pixels {
            data.extend(planes.iter().map(|p| p[i]));
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Copies channel `c` out as a plane of `width * height` samples.
    pub fn plane(&self, c: usize) -> Vec<f64> {
        assert!(c < self.channels);
        self.data.iter().skip(c).step_by(self.channels).copied().collect()
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Samples as written to an 8-bit file: clamped to 0..=255 and rounded
    /// half away from zero.
    pub fn quantized(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::decode_pnm(&bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = fs::File::create(path)?;
        file.write_all(&self.encode_pnm())?;
        Ok(())
    }

    pub fn encode_pnm(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.quantized());
        out
    }

    /// Parses a binary P5 (grey) or P6 (RGB) file with maxval 255.
    pub fn decode_pnm(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 2 {
            return Err(Error::MalformedHeader("file shorter than magic number".into()));
        }
        let channels = match &bytes[..2] {
            b"P5" => 1,
            b"P6" => 3,
            other => return Err(Error::UnsupportedFormat(String::from_utf8_lossy(other).into_owned())),
        };
        let mut pos = 2;
        let width = header_token(bytes, &mut pos, "width")?;
        let height = header_token(bytes, &mut pos, "height")?;
        let maxval = header_token(bytes, &mut pos, "maxval")?;
        // exactly one whitespace byte separates the header from the raster
        match bytes.get(pos) {
            Some(b) if b.is_ascii_whitespace() => pos += 1,
            _ => return Err(Error::MalformedHeader("missing whitespace after maxval".into())),
        }
        if maxval != 255 {
            return Err(Error::UnsupportedMaxval(maxval as u32));
        }
        if width == 0 || height == 0 {
            return Err(Error::MalformedHeader(format!("zero dimension {width}x{height}")));
        }
        let expected = width * height * channels;
        let raster = &bytes[pos..];
        if raster.len() < expected {
            return Err(Error::TruncatedImage { expected, found: raster.len() });
        }
        let data = raster[..expected].iter().map(|&b| f64::from(b)).collect();
        Self::new(width, height, channels, data)
    }
}

/// Clamps to 0..=255 and rounds half away from zero.
pub fn quantize(v: f64) -> u8 {
    v.clamp(0.0, 255.0).round() as u8
}

fn header_token(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            Some(_) => break,
            None => return Err(Error::MalformedHeader(format!("unexpected end of header before {what}"))),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::MalformedHeader(format!("expected a number for {what}")));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|&v: &usize| v <= u32::MAX as usize)
        .ok_or_else(|| Error::MalformedHeader(format!("{what} out of range")))
}

/// Per-pixel squared error, summed over channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ErrorMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::DimensionMismatch(format!("{} values for {width}x{height}", values.len())));
        }
        Ok(Self { width, height, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

fn check_shapes(a: &Image, b: &Image) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width, a.height, a.channels, b.width, b.height, b.channels
        )))
    }
}

/// Mean squared error over all `width * height * channels` samples.
pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    check_shapes(a, b)?;
    let sum: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.data.len() as f64)
}

/// Mean absolute error over all samples.
pub fn mean_abs_error(a: &Image, b: &Image) -> Result<f64> {
    check_shapes(a, b)?;
    let sum: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).sum();
    Ok(sum / a.data.len() as f64)
}

pub fn error_map(f: &Image, u: &Image) -> Result<ErrorMap> {
    check_shapes(f, u)?;
    let values = f
        .data
        .chunks_exact(f.channels)
        .zip(u.data.chunks_exact(u.channels))
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
        .collect();
    Ok(ErrorMap { width: f.width, height: f.height, values })
}
