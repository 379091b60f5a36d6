use std::path::Path;

use super::{ImageRGB8, ImagingError};

/// Cursor over the PPM header. Comments run from `#` to end of line.
struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, ImagingError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImagingError::MalformedHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|_| ImagingError::MalformedHeader(format!("{what} out of range")))
    }
}

pub fn decode_ppm(bytes: &[u8]) -> Result<ImageRGB8, ImagingError> {
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(ImagingError::BadMagic);
    }
    let mut h = Header { bytes, pos: 2 };
    if !h.bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(ImagingError::BadMagic);
    }
    let width = h.number("width")? as usize;
    let height = h.number("height")? as usize;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(ImagingError::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if maxval != 255 {
        return Err(ImagingError::UnsupportedMaxval(maxval));
    }
    match bytes.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        Some(_) => {
            return Err(ImagingError::MalformedHeader(
                "maxval must be followed by one whitespace byte".into(),
            ))
        }
        None => {}
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| ImagingError::MalformedHeader("dimensions overflow".into()))?;
    let payload = &bytes[h.pos.min(bytes.len())..];
    if payload.len() < expected {
        return Err(ImagingError::Truncated {
            expected,
            found: payload.len(),
        });
    }
    ImageRGB8::new(width, height, payload[..expected].to_vec())
}

pub fn encode_ppm(img: &ImageRGB8) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<ImageRGB8, ImagingError> {
    decode_ppm(&std::fs::read(path)?)
}

pub fn write_ppm(img: &ImageRGB8, path: impl AsRef<Path>) -> Result<(), ImagingError> {
    std::fs::write(path, encode_ppm(img))?;
    Ok(())
}
