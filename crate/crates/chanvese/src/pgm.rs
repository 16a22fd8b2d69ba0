//! Binary grayscale PGM (`P5`) at 8 or 16 bits per sample.

use std::path::Path;

use chanvese_core::{GrayImage, LabelMask};

use crate::atomic::write_atomic;
use crate::error::{Error, Result};

/// A decoded PGM before intensity normalization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawPgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while let Some(&c) = self.bytes.get(self.pos) {
            if c == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedFile { offset: start, message: format!("expected {what}") });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedFile { offset: start, message: format!("{what} out of range") })
    }
}

pub fn decode(bytes: &[u8]) -> Result<RawPgm> {
    match bytes.get(..2) {
        Some(b"P5") => {}
        Some([b'P', c]) => return Err(Error::UnsupportedFormat(format!("PNM variant P{}", *c as char))),
        _ => return Err(Error::UnsupportedFormat("missing P5 magic number".into())),
    }
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval_at = h.pos;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedFile { offset: maxval_at, message: format!("empty image {width}x{height}") });
    }
    let maxval = match maxval {
        255 => 255u16,
        65535 => 65535u16,
        other => return Err(Error::UnsupportedFormat(format!("maxval {other} (only 255 and 65535)"))),
    };
    if !bytes.get(h.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::MalformedFile { offset: h.pos, message: "expected whitespace after maxval".into() });
    }
    let data_start = h.pos + 1;
    let depth = if maxval > 255 { 2 } else { 1 };
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(depth))
        .ok_or_else(|| Error::MalformedFile { offset: maxval_at, message: "image too large".into() })?;
    let payload = &bytes[data_start..];
    if payload.len() != expected {
        return Err(Error::MalformedFile {
            offset: data_start,
            message: format!("expected {expected} bytes of pixel data, found {}", payload.len()),
        });
    }
    let samples: Vec<u16> = if depth == 1 {
        payload.iter().map(|&b| u16::from(b)).collect()
    } else {
        payload.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    };
    if let Some(i) = samples.iter().position(|&s| s > maxval) {
        return Err(Error::MalformedFile {
            offset: data_start + i * depth,
            message: format!("sample {} exceeds maxval {maxval}", samples[i]),
        });
    }
    Ok(RawPgm { width, height, maxval, samples })
}

pub fn encode(raw: &RawPgm) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", raw.width, raw.height, raw.maxval).into_bytes();
    if raw.maxval > 255 {
        out.extend(raw.samples.iter().flat_map(|s| s.to_be_bytes()));
    } else {
        out.extend(raw.samples.iter().map(|&s| s as u8));
    }
    out
}

pub fn image_from_raw(raw: &RawPgm) -> Result<GrayImage> {
    let scale = f64::from(raw.maxval);
    Ok(GrayImage::new(raw.width, raw.height, raw.samples.iter().map(|&s| f64::from(s) / scale).collect())?)
}

/// 16-bit quantization, so a round trip is off by at most `1/131070`.
pub fn image_to_raw(img: &GrayImage) -> RawPgm {
    RawPgm {
        width: img.width(),
        height: img.height(),
        maxval: u16::MAX,
        samples: img.pixels().iter().map(|&v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16).collect(),
    }
}

pub fn read_image(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    image_from_raw(&decode(&bytes)?)
}

pub fn write_image(img: &GrayImage, path: &Path) -> Result<()> {
    write_atomic(path, &encode(&image_to_raw(img)))
}

/// 8-bit rendering of a label mask: label `l` of `levels` maps to
/// `round(255 l / (levels - 1))`.
pub fn mask_to_raw(mask: &LabelMask, levels: u32) -> RawPgm {
    let top = f64::from(levels.max(2) - 1);
    RawPgm {
        width: mask.width,
        height: mask.height,
        maxval: 255,
        samples: mask.labels.iter().map(|&l| (255.0 * f64::from(l.min(levels - 1)) / top).round() as u16).collect(),
    }
}

pub fn write_mask(mask: &LabelMask, levels: u32, path: &Path) -> Result<()> {
    write_atomic(path, &encode(&mask_to_raw(mask, levels)))
}

/// Copy of `img` with pixels on the boundary of `inside` drawn in a
/// contrasting tone (black on bright pixels, white on dark ones). A pixel
/// is on the boundary when a 4-neighbour disagrees with it.
pub fn boundary_overlay(img: &GrayImage, inside: &[bool]) -> Result<GrayImage> {
    let (w, h) = (img.width(), img.height());
    if inside.len() != w * h {
        return Err(chanvese_core::Error::DimMismatch(w, h, inside.len(), 1).into());
    }
    let at = |i: usize, j: usize| inside[j * w + i];
    let mut px = img.pixels().to_vec();
    for j in 0..h {
        for i in 0..w {
            let c = at(i, j);
            let edge = (i > 0 && at(i - 1, j) != c)
                || (i + 1 < w && at(i + 1, j) != c)
                || (j > 0 && at(i, j - 1) != c)
                || (j + 1 < h && at(i, j + 1) != c);
            if edge && c {
                let v = &mut px[j * w + i];
                *v = if *v < 0.5 { 1.0 } else { 0.0 };
            }
        }
    }
    Ok(GrayImage::new(w, h, px)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maxval_255_is_scaled() {
        let mut bytes = b"P5\n# comment\n2 1\n255\n".to_vec();
        bytes.extend([0u8, 255]);
        let img = image_from_raw(&decode(&bytes).unwrap()).unwrap();
        assert_eq!(img.pixels(), &[0.0, 1.0]);
    }

    #[test]
    fn truncated_payload_names_counts() {
        let mut bytes = b"P5 3 2 65535\n".to_vec();
        bytes.extend([0u8; 7]);
        match decode(&bytes) {
            Err(Error::MalformedFile { offset, message }) => {
                assert_eq!(offset, 13);
                assert!(message.contains("expected 12 bytes") && message.contains("found 7"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_other_formats() {
        assert!(matches!(decode(b"P2 1 1 255\n0"), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(decode(b"P5 1 1 1023\n\0\0"), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(decode(b"GIF89a"), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(decode(b"P5 x"), Err(Error::MalformedFile { offset: 3, .. })));
    }

    #[test]
    fn sixteen_bit_round_trip() {
        let img = GrayImage::from_fn(7, 5, |x| (x[0] * 0.77 + x[1] * 0.2).min(1.0)).unwrap();
        let back = image_from_raw(&decode(&encode(&image_to_raw(&img))).unwrap()).unwrap();
        let err = img.pixels().iter().zip(back.pixels()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1.0 / 131070.0, "{err}");
    }

    #[test]
    fn overlay_marks_inner_boundary() {
        let img = GrayImage::constant(4, 4, 0.2).unwrap();
        let inside: Vec<bool> = (0..16).map(|p| p % 4 >= 2).collect();
        let o = boundary_overlay(&img, &inside).unwrap();
        let marked: Vec<usize> = (0..16).filter(|&p| o.pixels()[p] == 1.0).collect();
        assert_eq!(marked, vec![2, 6, 10, 14]);
    }
}
