//! Binary 16-bit PGM (`P5`, maxval 65535) reading and writing.
//!
//! Samples are big-endian as the netpbm format prescribes. The writer
//! always emits the canonical header `P5\n<width> <height>\n65535\n`, so a
//! file written here parses and re-encodes to the same bytes.

use std::fs;
use std::path::Path;

use crate::error::{Error, PgmError, Result};

/// A 16-bit single-channel frame, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThermalImage {
    width: usize,
    height: usize,
    pixels: Vec<u16>,
}

impl ThermalImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 || width.checked_mul(height) != Some(pixels.len()) {
            return Err(Error::Input(format!(
                "{width}x{height} image cannot hold {} pixels",
                pixels.len()
            )));
        }
        Ok(ThermalImage { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.pixels[row * self.width + col]
    }

    pub fn min_max(&self) -> (u16, u16) {
        self.pixels
            .iter()
            .fold((u16::MAX, u16::MIN), |(lo, hi), &p| (lo.min(p), hi.max(p)))
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl HeaderCursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.at < self.bytes.len() {
            match self.bytes[self.at] {
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.at += 1,
                b'#' => {
                    while self.at < self.bytes.len() && self.bytes[self.at] != b'\n' {
                        self.at += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn number(&mut self, field: &str) -> Result<u32, PgmError> {
        self.skip_whitespace_and_comments();
        let start = self.at;
        while self.at < self.bytes.len() && self.bytes[self.at].is_ascii_digit() {
            self.at += 1;
        }
        if start == self.at {
            return Err(PgmError::Header {
                offset: start,
                reason: format!("expected decimal {field}"),
            });
        }
        std::str::from_utf8(&self.bytes[start..self.at])
            .unwrap()
            .parse()
            .map_err(|_| PgmError::Header {
                offset: start,
                reason: format!("{field} does not fit in 32 bits"),
            })
    }
}

pub fn parse_pgm16(bytes: &[u8]) -> Result<ThermalImage, PgmError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(PgmError::BadMagic);
    }
    let mut cur = HeaderCursor { bytes, at: 2 };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval_at = {
        cur.skip_whitespace_and_comments();
        cur.at
    };
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PgmError::Header {
            offset: 2,
            reason: format!("zero image dimension {width}x{height}"),
        });
    }
    if maxval != 65535 {
        return Err(PgmError::UnsupportedMaxval {
            offset: maxval_at,
            maxval,
        });
    }
    match bytes.get(cur.at) {
        Some(c) if c.is_ascii_whitespace() => cur.at += 1,
        _ => {
            return Err(PgmError::Header {
                offset: cur.at,
                reason: "expected a single whitespace byte after maxval".into(),
            })
        }
    }
    let expected = width * height * 2;
    let data = &bytes[cur.at..];
    if data.len() < expected {
        return Err(PgmError::Truncated {
            offset: cur.at,
            expected,
            found: data.len(),
        });
    }
    let pixels = data[..expected]
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok(ThermalImage { width, height, pixels })
}

pub fn encode_pgm16(img: &ThermalImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n65535\n", img.width, img.height);
    let mut out = Vec::with_capacity(header.len() + img.pixels.len() * 2);
    out.extend_from_slice(header.as_bytes());
    for p in &img.pixels {
        out.extend_from_slice(&p.to_be_bytes());
    }
    out
}

pub fn load_pgm16(path: &Path) -> Result<ThermalImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_pgm16(&bytes)?)
}

pub fn write_pgm16(img: &ThermalImage, path: &Path) -> Result<()> {
    fs::write(path, encode_pgm16(img)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_by_two_round_trip() {
        let img = ThermalImage::new(2, 2, vec![0, 65535, 1, 2]).unwrap();
        let bytes = encode_pgm16(&img);
        assert_eq!(&bytes[..14], b"P5\n2 2\n65535\n\x00");
        let back = parse_pgm16(&bytes).unwrap();
        assert_eq!(back, img);
        assert_eq!(encode_pgm16(&back), bytes);
    }

    #[test]
    fn comments_and_whitespace_in_header() {
        let mut bytes = b"P5 # camera frame\n2\t1 # dims\n65535\r".to_vec();
        bytes.extend_from_slice(&[0x12, 0x34, 0xff, 0x00]);
        let img = parse_pgm16(&bytes).unwrap();
        assert_eq!(img.pixels(), &[0x1234, 0xff00]);
    }

    #[test]
    fn distinct_errors() {
        assert_eq!(parse_pgm16(b"P2\n1 1\n65535\n\0\0"), Err(PgmError::BadMagic));
        assert_eq!(
            parse_pgm16(b"P5\n1 1\n255\n\0"),
            Err(PgmError::UnsupportedMaxval { offset: 7, maxval: 255 })
        );
        assert_eq!(
            parse_pgm16(b"P5\n2 2\n65535\n\0\0\0"),
            Err(PgmError::Truncated { offset: 13, expected: 8, found: 3 })
        );
        assert!(matches!(parse_pgm16(b"P5\nx 2\n65535\n"), Err(PgmError::Header { offset: 3, .. })));
        assert!(matches!(parse_pgm16(b"P5\n0 2\n65535\n"), Err(PgmError::Header { .. })));
    }

    #[test]
    fn min_max() {
        let img = ThermalImage::new(3, 1, vec![7, 2, 9]).unwrap();
        assert_eq!(img.min_max(), (2, 9));
        assert!(ThermalImage::new(2, 2, vec![0; 3]).is_err());
    }

    proptest! {
        #[test]
        fn canonical_files_round_trip(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
            let pixels = (0..w * h).map(|i| (seed.wrapping_mul(i as u64 + 1) >> 17) as u16).collect();
            let img = ThermalImage::new(w, h, pixels).unwrap();
            let bytes = encode_pgm16(&img);
            let back = parse_pgm16(&bytes).unwrap();
            prop_assert_eq!(encode_pgm16(&back), bytes);
            prop_assert_eq!(back, img);
        }
    }
}
