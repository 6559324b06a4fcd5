use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Framebuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageFormat {
    #[default]
    Ppm,
    Png,
}

impl ImageFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ImageFormat::Ppm => "ppm",
            ImageFormat::Png => "png",
        }
    }
}

/// Binary PPM (`P6`, maxval 255).
pub fn ppm_bytes(fb: &Framebuffer) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", fb.width, fb.height);
    let mut out = Vec::with_capacity(header.len() + fb.color.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&fb.color);
    out
}

pub fn png_bytes(fb: &Framebuffer) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, fb.width, fb.height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::invalid(format!("png header: {e}")))?;
        writer
            .write_image_data(&fb.color)
            .map_err(|e| Error::invalid(format!("png data: {e}")))?;
    }
    Ok(out)
}

/// Depth grid as `u32 width, u32 height` followed by row-major `f32` values,
/// all little-endian. Empty pixels are `+∞`.
pub fn depth_to_bytes(fb: &Framebuffer) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + fb.depth.len() * 4);
    out.extend_from_slice(&fb.width.to_le_bytes());
    out.extend_from_slice(&fb.height.to_le_bytes());
    for d in &fb.depth {
        out.extend_from_slice(&(*d as f32).to_le_bytes());
    }
    out
}

/// Inverse of [`depth_to_bytes`]: `(width, height, values)`.
pub fn depth_from_bytes(bytes: &[u8]) -> Result<(u32, u32, Vec<f32>)> {
    if bytes.len() < 8 {
        return Err(Error::invalid("depth grid shorter than its header"));
    }
    let w = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let h = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let body = &bytes[8..];
    if body.len() != w as usize * h as usize * 4 {
        return Err(Error::invalid(format!(
            "depth grid {w}x{h} expects {} bytes, got {}",
            w as usize * h as usize * 4,
            body.len()
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((w, h, values))
}

pub fn write_image(fb: &Framebuffer, path: &Path, format: ImageFormat) -> Result<()> {
    let bytes = match format {
        ImageFormat::Ppm => ppm_bytes(fb),
        ImageFormat::Png => png_bytes(fb)?,
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Rgb;

    #[test]
    fn ppm_layout_is_exact() {
        let mut fb = Framebuffer::new(2, 1);
        fb.set_pixel(1, 0, Rgb([1, 2, 3]));
        assert_eq!(ppm_bytes(&fb), b"P6\n2 1\n255\n\x00\x00\x00\x01\x02\x03".to_vec());
    }

    #[test]
    fn depth_grid_roundtrip() {
        let mut fb = Framebuffer::new(3, 2);
        fb.depth[4] = 12.5;
        let bytes = depth_to_bytes(&fb);
        assert_eq!(bytes.len(), 8 + 24);
        let (w, h, v) = depth_from_bytes(&bytes).unwrap();
        assert_eq!((w, h), (3, 2));
        assert_eq!(v[4], 12.5);
        assert!(v[0].is_infinite());
        assert!(depth_from_bytes(&bytes[..10]).is_err());
    }

    #[test]
    fn png_has_signature() {
        let fb = Framebuffer::new(4, 4);
        let bytes = png_bytes(&fb).unwrap();
        assert_eq!(&bytes[..8], b"\x89PNG\r\n\x1a\n");
    }
}
