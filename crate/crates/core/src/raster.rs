//! Linear-RGB float rasters and their 8-bit sRGB file boundary.

use std::path::Path;
use std::sync::OnceLock;

use image::{ImageBuffer, Rgb as ImgRgb};

use crate::mesh::Rgb;
use crate::{Error, Result};

/// Row-major linear RGB image with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    pixels: Vec<Rgb>,
}

impl Raster {
    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        Raster {
            width,
            height,
            pixels: vec![color; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> Rgb) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Raster {
            width,
            height,
            pixels,
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<Rgb>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "{} pixels for a {width}x{height} raster",
                pixels.len()
            )));
        }
        Ok(Raster {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, c: Rgb) {
        self.pixels[y * self.width + x] = c;
    }

    /// Bilinear sample at continuous pixel coordinates (pixel centers at
    /// integers). Outside the raster the sample fades to `border`.
    pub fn sample_bilinear(&self, x: f64, y: f64, border: Rgb) -> Rgb {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = (x - x0) as f32;
        let fy = (y - y0) as f32;
        let fetch = |xi: f64, yi: f64| -> Rgb {
            if xi < 0.0 || yi < 0.0 || xi >= self.width as f64 || yi >= self.height as f64 {
                border
            } else {
                self.get(xi as usize, yi as usize)
            }
        };
        let c00 = fetch(x0, y0);
        let c10 = fetch(x0 + 1.0, y0);
        let c01 = fetch(x0, y0 + 1.0);
        let c11 = fetch(x0 + 1.0, y0 + 1.0);
        let mut out = [0.0f32; 3];
        for k in 0..3 {
            let top = c00[k] + (c10[k] - c00[k]) * fx;
            let bot = c01[k] + (c11[k] - c01[k]) * fx;
            out[k] = top + (bot - top) * fy;
        }
        out
    }

    /// Decodes a PNG/PPM file into linear RGB.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })?
            .to_rgb8();
        Ok(Self::from_srgb8(
            img.width() as usize,
            img.height() as usize,
            img.as_raw(),
        ))
    }

    /// Builds a raster from interleaved 8-bit sRGB bytes.
    pub fn from_srgb8(width: usize, height: usize, bytes: &[u8]) -> Self {
        let lut = srgb_decode_lut();
        let pixels = bytes
            .chunks_exact(3)
            .map(|c| [lut[c[0] as usize], lut[c[1] as usize], lut[c[2] as usize]])
            .collect();
        Raster {
            width,
            height,
            pixels,
        }
    }

    pub fn to_srgb8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .flat_map(|c| c.map(linear_to_srgb8))
            .collect()
    }

    /// Encodes as 8-bit sRGB; format follows the file extension (png, ppm).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let buf: ImageBuffer<ImgRgb<u8>, Vec<u8>> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, self.to_srgb8())
                .ok_or_else(|| Error::InvalidInput("raster buffer size mismatch".into()))?;
        buf.save(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn srgb_decode_lut() -> &'static [f32; 256] {
    static LUT: OnceLock<[f32; 256]> = OnceLock::new();
    LUT.get_or_init(|| std::array::from_fn(|i| srgb_to_linear(i as f32 / 255.0)))
}

pub fn srgb_to_linear(c: f32) -> f32 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

pub fn linear_to_srgb(c: f32) -> f32 {
    let c = c.clamp(0.0, 1.0);
    if c <= 0.003_130_8 {
        c * 12.92
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

pub fn linear_to_srgb8(c: f32) -> u8 {
    (linear_to_srgb(c) * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Peak signal-to-noise ratio (peak 1.0) over the pixels where `mask` is
/// true. Returns `+∞` for identical inputs and `None` for an empty mask.
pub fn psnr_masked(a: &Raster, b: &Raster, mask: &[bool]) -> Option<f64> {
    assert_eq!((a.width, a.height), (b.width, b.height));
    assert_eq!(mask.len(), a.pixels.len());
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for ((pa, pb), &m) in a.pixels.iter().zip(&b.pixels).zip(mask) {
        if m {
            for k in 0..3 {
                let d = (pa[k] - pb[k]) as f64;
                sum += d * d;
            }
            count += 3;
        }
    }
    if count == 0 {
        return None;
    }
    let mse = sum / count as f64;
    Some(if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    })
}

/// Writes a single-channel little-endian PFM (`Pf`) file, bottom row first.
pub fn save_pfm(path: impl AsRef<Path>, width: usize, height: usize, values: &[f32]) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!("Pf\n{width} {height}\n-1.0\n").into_bytes();
    for row in (0..height).rev() {
        for v in &values[row * width..(row + 1) * width] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
