//! 8-bit raster images and the binary PGM (P5) / PPM (P6) codec.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channels {
    Gray8,
    Rgb8,
}

impl Channels {
    pub fn count(self) -> usize {
        match self {
            Channels::Gray8 => 1,
            Channels::Rgb8 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channels::Gray8 => "Gray8",
            Channels::Rgb8 => "RGB8",
        }
    }
}

/// Row-major 8-bit image.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Image {
    width: usize,
    height: usize,
    channels: Channels,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: Channels, data: Vec<u8>) -> Result<Self> {
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels.count()))
            .ok_or_else(|| Error::Size(format!("{width}x{height} overflows")))?;
        if data.len() != expected {
            return Err(Error::Size(format!(
                "{width}x{height} {} image needs {expected} samples, got {}",
                channels.name(),
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: Channels, value: &[u8]) -> Self {
        assert_eq!(value.len(), channels.count());
        let data = value
            .iter()
            .copied()
            .cycle()
            .take(width * height * channels.count())
            .collect();
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn gray(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, Channels::Gray8, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> Channels {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let n = self.channels.count();
        let i = (y * self.width + x) * n;
        &self.data[i..i + n]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, value: &[u8]) {
        let n = self.channels.count();
        let i = (y * self.width + x) * n;
        self.data[i..i + n].copy_from_slice(value);
    }

    pub(crate) fn require(&self, channels: Channels) -> Result<()> {
        if self.channels == channels {
            Ok(())
        } else {
            Err(Error::Channels {
                expected: channels.name(),
                actual: self.channels.name(),
            })
        }
    }

    /// Sub-rectangle copy. The rectangle must lie inside the image.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Image> {
        if x + w > self.width || y + h > self.height || w == 0 || h == 0 {
            return Err(Error::Size(format!(
                "crop {w}x{h}+{x}+{y} outside {}x{}",
                self.width, self.height
            )));
        }
        let n = self.channels.count();
        let mut data = Vec::with_capacity(w * h * n);
        for row in y..y + h {
            let start = (row * self.width + x) * n;
            data.extend_from_slice(&self.data[start..start + w * n]);
        }
        Image::new(w, h, self.channels, data)
    }

    /// Nearest-neighbour resample.
    pub fn resize_nearest(&self, width: usize, height: usize) -> Image {
        let n = self.channels.count();
        let mut data = Vec::with_capacity(width * height * n);
        for y in 0..height {
            let sy = y * self.height / height;
            for x in 0..width {
                let sx = x * self.width / width;
                data.extend_from_slice(self.pixel(sx, sy));
            }
        }
        Image {
            width,
            height,
            channels: self.channels,
            data,
        }
    }

    /// Places `other` (same channel layout) with its top-left at (x, y), clipping.
    pub fn paste(&mut self, other: &Image, x: usize, y: usize) {
        assert_eq!(self.channels, other.channels);
        for oy in 0..other.height {
            for ox in 0..other.width {
                let (tx, ty) = (x + ox, y + oy);
                if tx < self.width && ty < self.height {
                    let p = other.pixel(ox, oy).to_vec();
                    self.set_pixel(tx, ty, &p);
                }
            }
        }
    }
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
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

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::ImageFormat(format!(
                "expected {what} at byte {start}"
            )));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::ImageFormat(format!("{what} out of range at byte {start}")))
    }
}

/// Decodes a binary PGM or PPM with max-value at most 255.
pub fn decode_pnm(bytes: &[u8]) -> Result<Image> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => Channels::Gray8,
        Some(b"P6") => Channels::Rgb8,
        Some(m) => {
            return Err(Error::ImageFormat(format!(
                "unsupported magic {:?}",
                String::from_utf8_lossy(m)
            )))
        }
        None => return Err(Error::ImageFormat("truncated header".into())),
    };
    let mut reader = HeaderReader { bytes, pos: 2 };
    let width = reader.number("width")?;
    let height = reader.number("height")?;
    let maxval = reader.number("max value")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::ImageFormat(format!(
            "max value {maxval} is not an 8-bit range"
        )));
    }
    match bytes.get(reader.pos) {
        Some(b) if b.is_ascii_whitespace() => reader.pos += 1,
        _ => return Err(Error::ImageFormat("missing whitespace after header".into())),
    }
    let len = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels.count()))
        .ok_or_else(|| Error::ImageFormat(format!("{width}x{height} is too large")))?;
    let raster = &bytes[reader.pos..];
    if raster.len() < len {
        return Err(Error::ImageFormat(format!(
            "truncated raster: need {len} bytes, have {}",
            raster.len()
        )));
    }
    Image::new(width, height, channels, raster[..len].to_vec())
}

pub fn encode_pnm(image: &Image) -> Vec<u8> {
    let magic = match image.channels {
        Channels::Gray8 => "P5",
        Channels::Rgb8 => "P6",
    };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.data);
    out
}

pub fn load_image(path: &Path) -> Result<Image> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&bytes)
}

pub fn save_image(image: &Image, path: &Path) -> Result<()> {
    std::fs::write(path, encode_pnm(image)).map_err(|e| Error::io(path, e))
}
