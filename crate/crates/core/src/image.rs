//! 8-bit raster images and binary PNM (PGM P5 / PPM P6) reading and writing.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

/// An 8-bit image, either grayscale (1 channel) or RGB (3 channels),
/// stored row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

#[derive(Debug)]
pub enum ImageError {
    Empty,
    Malformed(String),
    Io(io::Error),
}

impl fmt::Display for ImageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImageError::Empty => write!(f, "empty image"),
            ImageError::Malformed(msg) => write!(f, "malformed image: {msg}"),
            ImageError::Io(err) => write!(f, "image i/o error: {err}"),
        }
    }
}

impl std::error::Error for ImageError {}

impl From<io::Error> for ImageError {
    fn from(err: io::Error) -> Self {
        ImageError::Io(err)
    }
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::Empty);
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::Malformed(format!(
                "unsupported channel count {channels} (expected 1 or 3)"
            )));
        }
        if data.len() != width * height * channels {
            return Err(ImageError::Malformed(format!(
                "pixel payload is {} bytes, expected {}",
                data.len(),
                width * height * channels
            )));
        }
        Ok(ImageBuffer { width, height, channels, data })
    }

    /// Grayscale image filled with a constant intensity.
    pub fn filled_gray(width: usize, height: usize, value: u8) -> Result<Self, ImageError> {
        Self::new(width, height, 1, vec![value; width * height])
    }

    /// RGB image filled with a constant color.
    pub fn filled_rgb(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self::new(width, height, 3, data)
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

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    /// All channel values of the pixel at (x, y); length 1 or 3.
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let base = (y * self.width + x) * self.channels;
        &self.data[base..base + self.channels]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, values: &[u8]) {
        let base = (y * self.width + x) * self.channels;
        self.data[base..base + self.channels].copy_from_slice(values);
    }

    /// Pixel as RGB regardless of the stored channel count.
    pub fn pixel_rgb(&self, x: usize, y: usize) -> [u8; 3] {
        let p = self.pixel(x, y);
        if self.channels == 1 {
            [p[0], p[0], p[0]]
        } else {
            [p[0], p[1], p[2]]
        }
    }

    /// Serialize as binary PNM: P5 for grayscale, P6 for RGB.
    pub fn to_pnm_bytes(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_pnm_bytes(bytes: &[u8]) -> Result<Self, ImageError> {
        let mut pos = 0usize;
        let magic = next_token(bytes, &mut pos)
            .ok_or_else(|| ImageError::Malformed("missing PNM magic".into()))?;
        let channels = match magic.as_str() {
            "P5" => 1,
            "P6" => 3,
            other => {
                return Err(ImageError::Malformed(format!(
                    "unsupported PNM magic {other:?} (expected P5 or P6)"
                )))
            }
        };
        let width = parse_header_number(bytes, &mut pos, "width")?;
        let height = parse_header_number(bytes, &mut pos, "height")?;
        let maxval = parse_header_number(bytes, &mut pos, "maxval")?;
        if maxval != 255 {
            return Err(ImageError::Malformed(format!(
                "unsupported maxval {maxval} (only 8-bit images are handled)"
            )));
        }
        // Exactly one whitespace byte separates the header from the payload.
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err(ImageError::Malformed("missing header terminator".into()));
        }
        pos += 1;
        let expected = width * height * channels;
        let payload = &bytes[pos..];
        if payload.len() < expected {
            return Err(ImageError::Malformed(format!(
                "pixel payload is {} bytes, expected {expected}",
                payload.len()
            )));
        }
        ImageBuffer::new(width, height, channels, payload[..expected].to_vec())
    }

    pub fn write_pnm<P: AsRef<Path>>(&self, path: P) -> Result<(), ImageError> {
        fs::write(path, self.to_pnm_bytes())?;
        Ok(())
    }

    pub fn read_pnm<P: AsRef<Path>>(path: P) -> Result<Self, ImageError> {
        let bytes = fs::read(path)?;
        Self::from_pnm_bytes(&bytes)
    }
}

/// Bilinear resampling of a single grayscale plane using half-pixel sample
/// centers, so an identity-size resize reproduces the input exactly.
pub fn resize_bilinear(src: &[f32], src_w: usize, src_h: usize, dst_w: usize, dst_h: usize) -> Vec<f32> {
    assert_eq!(src.len(), src_w * src_h, "source plane size mismatch");
    assert!(dst_w > 0 && dst_h > 0, "target size must be positive");
    let scale_x = src_w as f64 / dst_w as f64;
    let scale_y = src_h as f64 / dst_h as f64;
    let mut out = Vec::with_capacity(dst_w * dst_h);
    for y in 0..dst_h {
        let sy = ((y as f64 + 0.5) * scale_y - 0.5).clamp(0.0, (src_h - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(src_h - 1);
        let fy = (sy - y0 as f64) as f32;
        for x in 0..dst_w {
            let sx = ((x as f64 + 0.5) * scale_x - 0.5).clamp(0.0, (src_w - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(src_w - 1);
            let fx = (sx - x0 as f64) as f32;
            let top = src[y0 * src_w + x0] * (1.0 - fx) + src[y0 * src_w + x1] * fx;
            let bottom = src[y1 * src_w + x0] * (1.0 - fx) + src[y1 * src_w + x1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

/// Next whitespace-delimited header token, skipping `#` comments.
fn next_token(bytes: &[u8], pos: &mut usize) -> Option<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if *pos > start {
        Some(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    } else {
        None
    }
}

fn parse_header_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize, ImageError> {
    let tok = next_token(bytes, pos)
        .ok_or_else(|| ImageError::Malformed(format!("missing PNM {what}")))?;
    tok.parse::<usize>()
        .map_err(|_| ImageError::Malformed(format!("bad PNM {what}: {tok:?}")))
}
