//! RGB8 rasters: PPM/PNG codecs, cropping, bilinear resize and float
//! conversion.

mod ops;
mod png;
mod ppm;

pub use ops::{crop, resize_bilinear, to_float_norm};
pub use png::encode_png_stored;
pub use ppm::{decode_ppm, encode_ppm, read_ppm, write_ppm};

#[derive(Debug, thiserror::Error)]
pub enum ImagingError {
    #[error("not a binary PPM (expected magic \"P6\")")]
    BadMagic,
    #[error("unsupported PPM maxval {0} (only 255 is accepted)")]
    UnsupportedMaxval(u32),
    #[error("PPM payload truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("malformed PPM header: {0}")]
    MalformedHeader(String),
    #[error("crop rectangle is empty")]
    EmptyRect,
    #[error("rectangle {rect:?} exceeds {width}x{height} image")]
    RectOutOfBounds {
        rect: PixelRect,
        width: usize,
        height: usize,
    },
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// 8-bit interleaved RGB image, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageRGB8 {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for ImageRGB8 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImageRGB8")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl ImageRGB8 {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height * 3 {
            return Err(ImagingError::InvalidImage(format!(
                "{width}x{height} needs {} bytes, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Image filled with one colour.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self, ImagingError> {
        let data = rgb.repeat(width * height);
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn full_rect(&self) -> PixelRect {
        PixelRect {
            x0: 0,
            y0: 0,
            x1: self.width,
            y1: self.height,
        }
    }
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PixelRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PixelRect {
    /// Clip signed corner coordinates to a `width` x `height` frame.
    pub fn clipped(
        x0: i64,
        y0: i64,
        x1: i64,
        y1: i64,
        width: usize,
        height: usize,
    ) -> Result<Self, ImagingError> {
        let cx = |v: i64| v.clamp(0, width as i64) as usize;
        let cy = |v: i64| v.clamp(0, height as i64) as usize;
        let rect = PixelRect {
            x0: cx(x0),
            y0: cy(y0),
            x1: cx(x1),
            y1: cy(y1),
        };
        if rect.x1 <= rect.x0 || rect.y1 <= rect.y0 {
            return Err(ImagingError::EmptyRect);
        }
        Ok(rect)
    }

    pub fn width(&self) -> usize {
        self.x1.saturating_sub(self.x0)
    }

    pub fn height(&self) -> usize {
        self.y1.saturating_sub(self.y0)
    }
}
