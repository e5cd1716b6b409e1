//! 8-bit binary PGM (P5) reading and writing.
//!
//! Reading also accepts ASCII P2 and maxval below 255 (values are rescaled
//! to `[0, 1]`). Writing always emits `P5` with maxval 255.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::Raster;

fn parse_err(detail: impl Into<String>) -> Error {
    Error::Parse {
        what: "PGM",
        detail: detail.into(),
    }
}

struct Header {
    ascii: bool,
    width: usize,
    height: usize,
    maxval: u32,
    data_start: usize,
}

fn read_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 {
        return Err(parse_err("file too short"));
    }
    let ascii = match &bytes[..2] {
        b"P5" => false,
        b"P2" => true,
        m => return Err(parse_err(format!("unsupported magic {:?}", String::from_utf8_lossy(m)))),
    };
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for f in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(parse_err("truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(parse_err("expected a header number"));
        }
        *f = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err("header number out of range"))?;
    }
    // exactly one whitespace byte separates the header from binary data
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(parse_err("missing whitespace after maxval")),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(parse_err("zero dimension"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(parse_err(format!("unsupported maxval {maxval}")));
    }
    Ok(Header {
        ascii,
        width: width as usize,
        height: height as usize,
        maxval,
        data_start: pos,
    })
}

/// Decodes a P5 (or P2) byte buffer.
pub fn decode(bytes: &[u8]) -> Result<Raster> {
    let h = read_header(bytes)?;
    let n = h.width * h.height;
    let scale = h.maxval as f64;
    let values: Vec<f64> = if h.ascii {
        let text = std::str::from_utf8(&bytes[h.data_start..])
            .map_err(|_| parse_err("non-text P2 body"))?;
        let v = text
            .split_whitespace()
            .take(n)
            .map(|t| t.parse::<u32>().map_err(|_| parse_err(format!("bad sample {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if v.len() != n {
            return Err(parse_err("truncated P2 body"));
        }
        v.into_iter().map(|s| s.min(h.maxval) as f64 / scale).collect()
    } else {
        let body = &bytes[h.data_start..];
        if body.len() < n {
            return Err(parse_err(format!("expected {n} data bytes, found {}", body.len())));
        }
        body[..n]
            .iter()
            .map(|&b| (b as u32).min(h.maxval) as f64 / scale)
            .collect()
    };
    Raster::new(h.width, h.height, values)
}

/// Quantizes to 8 bits (round half up, clamped to `[0, 255]`).
pub fn quantize(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Encodes as binary P5 with maxval 255.
pub fn encode(img: &Raster) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|&v| quantize(v)));
    out
}

/// Rounds every sample to the nearest 8-bit level.
pub fn quantized(img: &Raster) -> Raster {
    img.map(|v| quantize(v) as f64 / 255.0)
}

pub fn read(path: impl AsRef<Path>) -> Result<Raster> {
    decode(&fs::read(path)?)
}

pub fn write(path: impl AsRef<Path>, img: &Raster) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(img))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p5_bytes_round_trip_exactly() {
        let mut bytes = b"P5\n# comment\n3 2\n255\n".to_vec();
        bytes.extend([0u8, 17, 255, 128, 1, 254]);
        let img = decode(&bytes).unwrap();
        assert_eq!(img.get(1, 0), 17.0 / 255.0);
        let re = encode(&img);
        assert_eq!(&re[re.len() - 6..], &[0u8, 17, 255, 128, 1, 254]);
        assert_eq!(decode(&re).unwrap(), img);
    }

    #[test]
    fn ascii_and_low_maxval() {
        let img = decode(b"P2 2 1 15\n0 15\n").unwrap();
        assert_eq!(img.data(), &[0.0, 1.0]);
    }

    #[test]
    fn malformed_inputs() {
        assert!(decode(b"P6\n1 1\n255\n\0\0\0").is_err());
        assert!(decode(b"P5\n2 2\n255\n\0").is_err());
        assert!(decode(b"P5\n2 x\n255\n").is_err());
        assert!(decode(b"P5\n1 1\n65535\n\0\0").is_err());
        assert!(decode(b"P").is_err());
    }

    #[test]
    fn data_byte_that_looks_like_whitespace() {
        let mut bytes = b"P5 2 1 255\n".to_vec();
        bytes.extend([b' ', b'\n']);
        let img = decode(&bytes).unwrap();
        let re = encode(&img);
        assert_eq!(re[re.len() - 2..], [b' ', b'\n']);
    }

    #[test]
    fn quantize_rounding() {
        assert_eq!(quantize(-0.2), 0);
        assert_eq!(quantize(1.3), 255);
        assert_eq!(quantize(0.5), 128);
    }
}
