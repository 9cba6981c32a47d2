//! Planar float images with a foreground mask, the `.pbrf` container and PNG
//! previews.
//!
//! `.pbrf` layout: the ASCII line `PBRF <w> <h> <c>\n`, then `w*h*c`
//! little-endian `f32` samples in planar order (all of channel 0 row-major,
//! then channel 1, ...), then `w*h` mask bytes, each 0 or 1.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil;
use crate::math::Rgb;

const MAGIC: &str = "PBRF";
const MAX_HEADER: usize = 96;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
    mask: Vec<bool>,
}

impl ChannelImage {
    /// All-zero image with an all-false mask.
    pub fn new(width: usize, height: usize, channels: usize) -> Result<Self> {
        let (n, _) = checked_sizes(width, height, channels)?;
        Ok(ChannelImage {
            width,
            height,
            channels,
            data: vec![0.0; n],
            mask: vec![false; width * height],
        })
    }

    pub fn from_parts(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f32>,
        mask: Vec<bool>,
    ) -> Result<Self> {
        let (n, px) = checked_sizes(width, height, channels)?;
        if data.len() != n || mask.len() != px {
            return Err(Error::ShapeMismatch(format!(
                "{width}x{height}x{channels} needs {n} samples and {px} mask entries, got {} and {}",
                data.len(),
                mask.len()
            )));
        }
        Ok(ChannelImage {
            width,
            height,
            channels,
            data,
            mask,
        })
    }

    /// Image filled with `value` in every channel and a full mask.
    pub fn filled(width: usize, height: usize, value: &[f32]) -> Result<Self> {
        let mut img = ChannelImage::new(width, height, value.len())?;
        for (c, v) in value.iter().enumerate() {
            img.plane_mut(c).fill(*v);
        }
        img.mask.fill(true);
        Ok(img)
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

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn mask_mut(&mut self) -> &mut [bool] {
        &mut self.mask
    }

    pub fn same_shape(&self, other: &ChannelImage) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn same_resolution(&self, other: &ChannelImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let px = self.pixel_count();
        &self.data[c * px..(c + 1) * px]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let px = self.pixel_count();
        &mut self.data[c * px..(c + 1) * px]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[c * self.pixel_count() + y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        let px = self.pixel_count();
        self.data[c * px + y * self.width + x] = v;
    }

    /// Value of channel `c` at linear pixel index `i`.
    #[inline]
    pub fn at(&self, i: usize, c: usize) -> f32 {
        self.data[c * self.pixel_count() + i]
    }

    /// First three channels of pixel `i` as linear RGB.
    pub fn rgb_at(&self, i: usize) -> Rgb {
        Rgb::new(
            self.at(i, 0) as f64,
            self.at(i, 1) as f64,
            self.at(i, 2) as f64,
        )
    }

    pub fn foreground_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Copy of a single channel as a 1-channel image sharing this mask.
    pub fn extract_channel(&self, c: usize) -> ChannelImage {
        ChannelImage {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.plane(c).to_vec(),
            mask: self.mask.clone(),
        }
    }

    pub fn to_pbrf_bytes(&self) -> Vec<u8> {
        let header = format!("{MAGIC} {} {} {}\n", self.width, self.height, self.channels);
        let mut out = Vec::with_capacity(header.len() + self.data.len() * 4 + self.mask.len());
        out.extend_from_slice(header.as_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend(self.mask.iter().map(|&m| m as u8));
        out
    }

    pub fn from_pbrf_bytes(bytes: &[u8]) -> Result<Self> {
        let nl = bytes
            .iter()
            .take(MAX_HEADER)
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::format("pbrf", "missing header line"))?;
        let header = std::str::from_utf8(&bytes[..nl])
            .map_err(|_| Error::format("pbrf", "header is not ASCII"))?;
        let mut parts = header.split(' ');
        if parts.next() != Some(MAGIC) {
            return Err(Error::format("pbrf", "bad magic"));
        }
        let mut dim = |name: &str| -> Result<usize> {
            parts
                .next()
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| Error::format("pbrf", format!("bad {name} in header")))
        };
        let (w, h, c) = (dim("width")?, dim("height")?, dim("channels")?);
        if parts.next().is_some() {
            return Err(Error::format("pbrf", "trailing header fields"));
        }
        let (n, px) = checked_sizes(w, h, c)?;
        let body = &bytes[nl + 1..];
        let expected = n
            .checked_mul(4)
            .and_then(|b| b.checked_add(px))
            .ok_or_else(|| Error::format("pbrf", "dimension overflow"))?;
        if body.len() != expected {
            return Err(Error::format(
                "pbrf",
                format!("expected {expected} payload bytes, found {}", body.len()),
            ));
        }
        let (samples, mask_bytes) = body.split_at(n * 4);
        let data = samples
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        let mask = mask_bytes
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(Error::format("pbrf", format!("mask byte {b} is not 0/1"))),
            })
            .collect::<Result<Vec<_>>>()?;
        ChannelImage::from_parts(w, h, c, data, mask)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fsutil::read_bytes(path)?;
        Self::from_pbrf_bytes(&bytes).map_err(|e| match e {
            Error::Format { format, msg } => Error::Format {
                format,
                msg: format!("{}: {msg}", path.display()),
            },
            other => other,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, &self.to_pbrf_bytes())
    }

    /// 8-bit PNG preview. One-channel images become grayscale, three-channel
    /// images RGB.
    pub fn to_png_bytes(&self, encoding: PngEncoding) -> Result<Vec<u8>> {
        let px = self.pixel_count();
        let scale = match encoding {
            PngEncoding::Normalized => {
                let m = (0..px)
                    .filter(|&i| self.mask[i])
                    .flat_map(|i| (0..self.channels).map(move |c| (i, c)))
                    .map(|(i, c)| self.at(i, c))
                    .fold(0.0f32, f32::max);
                if m > 0.0 {
                    1.0 / m as f64
                } else {
                    1.0
                }
            }
            _ => 1.0,
        };
        let mut buf = Vec::with_capacity(px * self.channels);
        for i in 0..px {
            for c in 0..self.channels {
                let v = self.at(i, c) as f64;
                let encoded = match encoding {
                    PngEncoding::Linear => v,
                    PngEncoding::Normalized => v * scale,
                    PngEncoding::Srgb => srgb_encode(v),
                    PngEncoding::ToneMappedSrgb => srgb_encode(tonemap(v)),
                };
                buf.push(quantize_u8(encoded));
            }
        }
        let color = match self.channels {
            1 => image::ExtendedColorType::L8,
            3 => image::ExtendedColorType::Rgb8,
            c => return Err(Error::invalid(format!("cannot preview {c}-channel image"))),
        };
        let mut out = Vec::new();
        {
            use image::ImageEncoder;
            image::codecs::png::PngEncoder::new(&mut out).write_image(
                &buf,
                self.width as u32,
                self.height as u32,
                color,
            )?;
        }
        Ok(out)
    }

    pub fn write_png(&self, path: &Path, encoding: PngEncoding) -> Result<()> {
        fsutil::write_atomic(path, &self.to_png_bytes(encoding)?)
    }
}

fn checked_sizes(width: usize, height: usize, channels: usize) -> Result<(usize, usize)> {
    if width == 0 || height == 0 {
        return Err(Error::format("pbrf", "zero dimension"));
    }
    if channels != 1 && channels != 3 {
        return Err(Error::format(
            "pbrf",
            format!("channel count must be 1 or 3, got {channels}"),
        ));
    }
    let px = width
        .checked_mul(height)
        .ok_or_else(|| Error::format("pbrf", "dimension overflow"))?;
    let n = px
        .checked_mul(channels)
        .filter(|n| n.checked_mul(4).is_some())
        .ok_or_else(|| Error::format("pbrf", "dimension overflow"))?;
    Ok((n, px))
}

/// How float values map to 8-bit preview pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PngEncoding {
    /// `round(255 * clamp(v, 0, 1))`.
    Linear,
    /// Linear after dividing by the foreground maximum (depth previews).
    Normalized,
    /// sRGB transfer function, for reflectance-like color.
    Srgb,
    /// `x / (1 + x)` then sRGB, for unbounded radiance.
    ToneMappedSrgb,
}

/// sRGB opto-electronic transfer function on a linear value in [0, 1].
pub fn srgb_encode(linear: f64) -> f64 {
    let v = linear.clamp(0.0, 1.0);
    if v <= 0.003_130_8 {
        12.92 * v
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

pub fn tonemap(v: f64) -> f64 {
    let v = v.max(0.0);
    v / (1.0 + v)
}

fn quantize_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
