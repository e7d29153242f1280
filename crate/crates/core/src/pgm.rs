//! Netpbm greyscale (PGM) reading and writing, plus the micrograph
//! preprocessing steps used before detection.
//!
//! Both the ASCII (`P2`) and binary (`P5`) variants are read; `#` comments
//! are allowed anywhere whitespace is allowed in the header. Binary samples
//! wider than a byte (`maxval > 255`) are big-endian `u16`. Output is always
//! `P5`.

use crate::error::{Error, Result};
use crate::grid::BinaryImage;
use crate::image::Image;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major.
    pub samples: Vec<u16>,
}

impl PgmImage {
    pub fn new(width: usize, height: usize, maxval: u16, samples: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("PGM dimensions must be positive"));
        }
        if maxval == 0 {
            return Err(Error::invalid("PGM maxval must be positive"));
        }
        if samples.len() != width * height {
            return Err(Error::invalid(format!("expected {} samples, got {}", width * height, samples.len())));
        }
        if let Some(&s) = samples.iter().find(|&&s| s > maxval) {
            return Err(Error::SampleOutOfRange { value: s.into(), maxval: maxval.into() });
        }
        Ok(Self { width, height, maxval, samples })
    }

    /// Encodes as binary `P5`.
    pub fn to_p5(&self) -> Vec<u8> {
        let wide = self.maxval > 255;
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, self.maxval).into_bytes();
        out.reserve(self.samples.len() * if wide { 2 } else { 1 });
        for &s in &self.samples {
            if wide {
                out.extend_from_slice(&s.to_be_bytes());
            } else {
                out.push(s as u8);
            }
        }
        out
    }

    /// Encodes as ASCII `P2`, one image row per line.
    pub fn to_p2(&self) -> Vec<u8> {
        let mut out = format!("P2\n{} {}\n{}\n", self.width, self.height, self.maxval);
        for row in self.samples.chunks(self.width) {
            let line: Vec<String> = row.iter().map(u16::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out.into_bytes()
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.data.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.data.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    /// Next unsigned decimal token, or `None` at end of input.
    fn number(&mut self) -> Option<std::result::Result<u32, String>> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.data.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if self.pos == start {
            return self.data.get(self.pos).map(|&b| Err(format!("unexpected byte {:?}", b as char)));
        }
        let text = std::str::from_utf8(&self.data[start..self.pos]).expect("ascii digits");
        Some(text.parse::<u32>().map_err(|e| format!("{text}: {e}")))
    }

    fn header_field(&mut self, name: &str) -> Result<u32> {
        match self.number() {
            Some(Ok(v)) => Ok(v),
            Some(Err(e)) => Err(Error::MalformedHeader(format!("{name}: {e}"))),
            None => Err(Error::MalformedHeader(format!("missing {name}"))),
        }
    }
}

pub fn read_pgm(bytes: &[u8]) -> Result<PgmImage> {
    let magic = bytes.get(..2).unwrap_or(bytes);
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        other => return Err(Error::BadMagic(String::from_utf8_lossy(other).into_owned())),
    };
    let mut cur = Cursor { data: bytes, pos: 2 };
    if !cur.data.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(Error::MalformedHeader("no separator after magic number".into()));
    }
    let width = cur.header_field("width")? as usize;
    let height = cur.header_field("height")? as usize;
    let maxval = cur.header_field("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!("dimensions {width}x{height}")));
    }
    if maxval == 0 || maxval > u16::MAX as u32 {
        return Err(Error::MalformedHeader(format!("maxval {maxval} outside 1..=65535")));
    }
    let count = width.checked_mul(height).ok_or_else(|| Error::MalformedHeader("dimensions overflow".into()))?;

    let samples = if binary {
        // Exactly one whitespace byte separates the header from the raster.
        if !cur.data.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(Error::MalformedHeader("no whitespace after maxval".into()));
        }
        let raster = &cur.data[cur.pos + 1..];
        let width_bytes = if maxval > 255 { 2 } else { 1 };
        let found = raster.len() / width_bytes;
        if found < count {
            return Err(Error::TruncatedPayload { expected: count, found });
        }
        if width_bytes == 2 {
            raster[..2 * count].chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]])).collect::<Vec<_>>()
        } else {
            raster[..count].iter().map(|&b| b as u16).collect()
        }
    } else {
        let mut samples = Vec::with_capacity(count);
        while samples.len() < count {
            match cur.number() {
                Some(Ok(v)) if v > maxval => return Err(Error::SampleOutOfRange { value: v, maxval }),
                Some(Ok(v)) => samples.push(v as u16),
                Some(Err(e)) => return Err(Error::MalformedHeader(format!("sample: {e}"))),
                None => return Err(Error::TruncatedPayload { expected: count, found: samples.len() }),
            }
        }
        samples
    };

    if let Some(&s) = samples.iter().find(|&&s| s as u32 > maxval) {
        return Err(Error::SampleOutOfRange { value: s.into(), maxval });
    }
    Ok(PgmImage { width, height, maxval: maxval as u16, samples })
}

/// Scales samples to `[0, 1]` by dividing by `maxval`. Detection works on
/// square images, so non-square input is rejected.
pub fn normalize(img: &PgmImage) -> Result<Image> {
    if img.width != img.height {
        return Err(Error::invalid(format!("image is {}x{}; only square images are supported", img.width, img.height)));
    }
    let scale = img.maxval as f64;
    Image::new(img.width, img.samples.iter().map(|&s| s as f64 / scale).collect())
}

/// Halves the side by averaging 2x2 blocks. An odd trailing row and column
/// are dropped.
pub fn downsample2x(img: &Image) -> Result<Image> {
    let n = img.n();
    if n < 2 {
        return Err(Error::invalid("cannot downsample an image smaller than 2x2"));
    }
    let half = n / 2;
    let mut values = Vec::with_capacity(half * half);
    for i in 0..half {
        let (top, bottom) = (img.row(2 * i), img.row(2 * i + 1));
        for j in 0..half {
            let s = (top[2 * j] + top[2 * j + 1]) + (bottom[2 * j] + bottom[2 * j + 1]);
            values.push(s / 4.0);
        }
    }
    Image::new(half, values)
}

/// Black pixels become 0, white pixels 255.
pub fn write_pgm_binary(img: &BinaryImage) -> Vec<u8> {
    let samples = img.bits().iter().map(|&b| if b { 0 } else { 255 }).collect();
    PgmImage::new(img.n(), img.n(), 255, samples).expect("binary image is a valid PGM").to_p5()
}

/// Quantizes `[0, 1]` intensities to 8 bits; values outside are clamped.
pub fn write_pgm_real(img: &Image) -> Vec<u8> {
    let samples = img.values().iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u16).collect();
    PgmImage::new(img.n(), img.n(), 255, samples).expect("quantized image is a valid PGM").to_p5()
}

/// Reads back a picture written by [`write_pgm_binary`]: zero samples are black.
pub fn binary_from_pgm(img: &PgmImage, lattice: crate::grid::LatticeKind) -> Result<BinaryImage> {
    if img.width != img.height {
        return Err(Error::invalid("binary images must be square"));
    }
    BinaryImage::new(img.width, img.samples.iter().map(|&s| s == 0).collect(), lattice)
}
