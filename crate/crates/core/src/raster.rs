//! Grayscale rasters, rectangles over them, and binary Netpbm I/O.
//!
//! Only the binary variants are supported: P5 (graymap) and P6 (pixmap), with
//! `maxval` fixed at 255. Header comments are accepted on read and never
//! written. Color input is reduced to luminance with integer Rec.601 weights:
//! `Y = (299 R + 587 G + 114 B + 500) / 1000`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RasterError {
    #[error("unsupported magic number {0:?}")]
    UnsupportedMagic(String),
    #[error("malformed header: {0}")]
    MalformedHeader(&'static str),
    #[error("unsupported maxval {0} (only 255 is accepted)")]
    UnsupportedMaxval(u32),
    #[error("truncated pixel payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: u32, height: u32 },
    #[error("pixel buffer has {found} samples, expected {expected}")]
    BufferSize { expected: usize, found: usize },
    #[error("region {0} does not fit a {1}x{2} image")]
    RegionOutOfBounds(Region, u32, u32),
    #[error("region must have positive width and height")]
    EmptyRegion,
}

/// 8-bit single-channel image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::InvalidDimensions { width, height });
        }
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(RasterError::BufferSize {
                expected,
                found: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Result<Self, RasterError> {
        Self::new(width, height, vec![value; width as usize * height as usize])
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: u32,
        height: u32,
        mut f: impl FnMut(u32, u32) -> u8,
    ) -> Result<Self, RasterError> {
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        self.pixels[y as usize * self.width as usize + x as usize] = value;
    }

    /// The region covering the whole image.
    pub fn full_region(&self) -> Region {
        Region {
            x: 0,
            y: 0,
            w: self.width,
            h: self.height,
        }
    }
}

/// Width and height of an image frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub width: u32,
    pub height: u32,
}

impl Dims {
    pub const fn new(width: u32, height: u32) -> Self {
        Self { width, height }
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width) * u64::from(self.height)
    }
}

/// Axis-aligned rectangle covering columns `[x, x + w)` and rows `[y, y + h)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {}x{})", self.x, self.y, self.w, self.h)
    }
}

impl Region {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Result<Self, RasterError> {
        if w == 0 || h == 0 {
            return Err(RasterError::EmptyRegion);
        }
        Ok(Self { x, y, w, h })
    }

    pub fn right(&self) -> u64 {
        u64::from(self.x) + u64::from(self.w)
    }

    pub fn bottom(&self) -> u64 {
        u64::from(self.y) + u64::from(self.h)
    }

    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    /// True if the region is non-empty and lies inside `dims`.
    pub fn fits(&self, dims: Dims) -> bool {
        self.w > 0
            && self.h > 0
            && self.right() <= u64::from(dims.width)
            && self.bottom() <= u64::from(dims.height)
    }

    pub fn check_fits(&self, dims: Dims) -> Result<(), RasterError> {
        if self.fits(dims) {
            Ok(())
        } else {
            Err(RasterError::RegionOutOfBounds(*self, dims.width, dims.height))
        }
    }

    #[inline]
    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && u64::from(x) < self.right() && y >= self.y && u64::from(y) < self.bottom()
    }

    /// Area of the overlap with `other`.
    pub fn intersection_area(&self, other: &Region) -> u64 {
        let left = self.x.max(other.x) as u64;
        let top = self.y.max(other.y) as u64;
        let right = self.right().min(other.right());
        let bottom = self.bottom().min(other.bottom());
        right.saturating_sub(left) * bottom.saturating_sub(top)
    }

    /// Key used for deterministic tie-breaking: `(y, x, h, w)`.
    pub fn order_key(&self) -> (u32, u32, u32, u32) {
        (self.y, self.x, self.h, self.w)
    }

    /// Center in pixel coordinates.
    pub fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + self.w as f64 / 2.0,
            self.y as f64 + self.h as f64 / 2.0,
        )
    }
}

/// 8-bit RGB image, row-major, used for annotated output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    /// Gray-to-color copy: every channel takes the luminance value.
    pub fn from_gray(image: &Image) -> Self {
        Self {
            width: image.width,
            height: image.height,
            pixels: image.pixels.iter().map(|&v| [v, v, v]).collect(),
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        self.pixels[y as usize * self.width as usize + x as usize] = rgb;
    }

    /// Luminance of every pixel, using the same weights as the decoder.
    pub fn to_gray(&self) -> Image {
        Image {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&p| luminance(p)).collect(),
        }
    }
}

/// Integer-rounded Rec.601 luma.
#[inline]
pub fn luminance([r, g, b]: [u8; 3]) -> u8 {
    ((299 * u32::from(r) + 587 * u32::from(g) + 114 * u32::from(b) + 500) / 1000) as u8
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
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

    fn number(&mut self, what: &'static str) -> Result<u32, RasterError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(RasterError::MalformedHeader(what));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(RasterError::MalformedHeader(what))
    }
}

/// Decodes a binary PGM (P5) or PPM (P6) file into a grayscale image.
pub fn decode_pnm(bytes: &[u8]) -> Result<Image, RasterError> {
    if bytes.len() < 2 {
        return Err(RasterError::MalformedHeader("missing magic number"));
    }
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(RasterError::UnsupportedMagic(
                String::from_utf8_lossy(other).into_owned(),
            ))
        }
    };
    let mut header = HeaderReader { bytes, pos: 2 };
    if !header
        .bytes
        .get(2)
        .is_some_and(|b| b.is_ascii_whitespace() || *b == b'#')
    {
        return Err(RasterError::MalformedHeader("magic number not followed by whitespace"));
    }
    let width = header.number("width")?;
    let height = header.number("height")?;
    let maxval = header.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(RasterError::InvalidDimensions { width, height });
    }
    if maxval != 255 {
        return Err(RasterError::UnsupportedMaxval(maxval));
    }
    match bytes.get(header.pos) {
        Some(b) if b.is_ascii_whitespace() => header.pos += 1,
        Some(_) => return Err(RasterError::MalformedHeader("maxval not followed by whitespace")),
        None => return Err(RasterError::Truncated {
            expected: width as usize * height as usize * channels,
            found: 0,
        }),
    }

    let samples = width as usize * height as usize;
    let expected = samples * channels;
    let payload = &bytes[header.pos..];
    if payload.len() < expected {
        return Err(RasterError::Truncated {
            expected,
            found: payload.len(),
        });
    }
    let pixels = if channels == 1 {
        payload[..expected].to_vec()
    } else {
        payload[..expected]
            .chunks_exact(3)
            .map(|c| luminance([c[0], c[1], c[2]]))
            .collect()
    };
    Image::new(width, height, pixels)
}

/// Encodes as binary PGM with maxval 255.
pub fn encode_pgm(image: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.pixels);
    out
}

/// Encodes as binary PPM with maxval 255.
pub fn encode_ppm(image: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.reserve(image.pixels.len() * 3);
    for p in &image.pixels {
        out.extend_from_slice(p);
    }
    out
}

/// Outline colors indexed by display class (wrapping).
pub const PALETTE: [[u8; 3]; 6] = [
    [255, 0, 0],
    [0, 255, 0],
    [0, 96, 255],
    [255, 200, 0],
    [255, 0, 255],
    [0, 255, 255],
];

pub fn class_color(class: usize) -> [u8; 3] {
    PALETTE[class % PALETTE.len()]
}

/// Returns a color copy of `image` with a 1-pixel outline around each region.
///
/// Later regions are drawn over earlier ones where outlines cross.
pub fn draw_regions(image: &Image, regions: &[(Region, usize)]) -> Result<RgbImage, RasterError> {
    for (r, _) in regions {
        r.check_fits(image.dims())?;
    }
    let mut out = RgbImage::from_gray(image);
    for (r, class) in regions {
        let color = class_color(*class);
        let (x0, y0) = (r.x, r.y);
        let (x1, y1) = (r.x + r.w - 1, r.y + r.h - 1);
        for x in x0..=x1 {
            out.set(x, y0, color);
            out.set(x, y1, color);
        }
        for y in y0..=y1 {
            out.set(x0, y, color);
            out.set(x1, y, color);
        }
    }
    Ok(out)
}
