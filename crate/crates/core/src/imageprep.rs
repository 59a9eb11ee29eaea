//! Page-image preparation: grayscale conversion, scaling to a fixed
//! 300px height, and horizontal concatenation into one document strip.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub const STRIP_HEIGHT: u32 = 300;

/// Row-major grayscale image with intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32) -> Self {
        GrayImage {
            width,
            height,
            pixels: vec![0.0; (width * height) as usize],
        }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.pixels[(y * self.width + x) as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: f32) {
        self.pixels[(y * self.width + x) as usize] = v;
    }

    /// Clamped access for filters that read past the border.
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> f32 {
        let xc = x.clamp(0, self.width as i64 - 1) as u32;
        let yc = y.clamp(0, self.height as i64 - 1) as u32;
        self.get(xc, yc)
    }

    /// Exact 90° counter-clockwise rotation (used by the invariance tests).
    pub fn rotate90(&self) -> GrayImage {
        let mut out = GrayImage::new(self.height, self.width);
        for y in 0..self.height {
            for x in 0..self.width {
                // (x, y) -> (y, width-1-x)
                out.set(y, self.width - 1 - x, self.get(x, y));
            }
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("no page images given")]
    NoPages,
    #[error("cannot decode image {path}: {message}")]
    Undecodable { path: PathBuf, message: String },
    #[error("zero-area page {0}")]
    ZeroArea(PathBuf),
}

/// Rec. 601 luma from 8-bit RGB, scaled to [0, 1].
fn luma601(r: u8, g: u8, b: u8) -> f32 {
    (0.299 * r as f32 + 0.587 * g as f32 + 0.114 * b as f32) / 255.0
}

pub fn decode_gray(path: &Path) -> Result<GrayImage, ImageError> {
    let img = image::open(path).map_err(|e| ImageError::Undecodable {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    if w == 0 || h == 0 {
        return Err(ImageError::ZeroArea(path.to_path_buf()));
    }
    let mut out = GrayImage::new(w, h);
    for (x, y, p) in rgb.enumerate_pixels() {
        out.set(x, y, luma601(p[0], p[1], p[2]));
    }
    Ok(out)
}

/// Bilinear resample to the given dimensions.
pub fn resize_bilinear(src: &GrayImage, width: u32, height: u32) -> GrayImage {
    let mut out = GrayImage::new(width, height);
    let sx = src.width as f64 / width as f64;
    let sy = src.height as f64 / height as f64;
    for y in 0..height {
        // sample at pixel centers
        let fy = ((y as f64 + 0.5) * sy - 0.5).max(0.0);
        let y0 = fy.floor() as i64;
        let dy = (fy - y0 as f64) as f32;
        for x in 0..width {
            let fx = ((x as f64 + 0.5) * sx - 0.5).max(0.0);
            let x0 = fx.floor() as i64;
            let dx = (fx - x0 as f64) as f32;
            let p00 = src.get_clamped(x0, y0);
            let p10 = src.get_clamped(x0 + 1, y0);
            let p01 = src.get_clamped(x0, y0 + 1);
            let p11 = src.get_clamped(x0 + 1, y0 + 1);
            let top = p00 + dx * (p10 - p00);
            let bot = p01 + dx * (p11 - p01);
            out.set(x, y, top + dy * (bot - top));
        }
    }
    out
}

/// Scales one page to the strip height, preserving aspect ratio.
pub fn scale_page(page: &GrayImage) -> GrayImage {
    if page.height == STRIP_HEIGHT {
        return page.clone();
    }
    let width = ((page.width as f64 * STRIP_HEIGHT as f64 / page.height as f64).round() as u32)
        .max(1);
    resize_bilinear(page, width, STRIP_HEIGHT)
}

/// Decodes each page, converts to grayscale, scales to 300px height, and
/// concatenates the pages left to right in order.
pub fn prepare_document_image(page_paths: &[PathBuf], root: &Path) -> Result<GrayImage, ImageError> {
    if page_paths.is_empty() {
        return Err(ImageError::NoPages);
    }
    let pages: Vec<GrayImage> = page_paths
        .iter()
        .map(|p| decode_gray(&root.join(p)).map(|g| scale_page(&g)))
        .collect::<Result<_, _>>()?;
    let total_width: u32 = pages.iter().map(|p| p.width).sum();
    let mut strip = GrayImage::new(total_width, STRIP_HEIGHT);
    let mut x_off = 0u32;
    for page in &pages {
        for y in 0..STRIP_HEIGHT {
            for x in 0..page.width {
                strip.set(x_off + x, y, page.get(x, y));
            }
        }
        x_off += page.width;
    }
    Ok(strip)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_png(path: &Path, width: u32, height: u32, value: u8) {
        let img = image::GrayImage::from_pixel(width, height, image::Luma([value]));
        img.save(path).unwrap();
    }

    #[test]
    fn single_page_aspect_ratio() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("page.png");
        write_png(&p, 600, 1200, 128);
        let strip = prepare_document_image(&[PathBuf::from("page.png")], dir.path()).unwrap();
        assert_eq!((strip.width, strip.height), (150, 300));
    }

    #[test]
    fn two_pages_concatenate_widths() {
        let dir = tempfile::tempdir().unwrap();
        write_png(&dir.path().join("a.png"), 400, 600, 200);
        write_png(&dir.path().join("b.png"), 400, 600, 50);
        let strip = prepare_document_image(
            &[PathBuf::from("a.png"), PathBuf::from("b.png")],
            dir.path(),
        )
        .unwrap();
        assert_eq!((strip.width, strip.height), (400, 300));
        // left half bright, right half dark
        assert!(strip.get(10, 150) > 0.7);
        assert!(strip.get(390, 150) < 0.3);
    }

    #[test]
    fn already_300_high_page_is_unchanged() {
        let dir = tempfile::tempdir().unwrap();
        write_png(&dir.path().join("a.png"), 220, 300, 99);
        let strip = prepare_document_image(&[PathBuf::from("a.png")], dir.path()).unwrap();
        assert_eq!((strip.width, strip.height), (220, 300));
        assert!((strip.get(0, 0) - 99.0 / 255.0).abs() < 1e-6);
    }

    #[test]
    fn undecodable_image_names_path() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("bad.png"), b"not an image").unwrap();
        let err = prepare_document_image(&[PathBuf::from("bad.png")], dir.path()).unwrap_err();
        assert!(err.to_string().contains("bad.png"));
    }

    #[test]
    fn rotate90_round_trips() {
        let mut img = GrayImage::new(3, 2);
        for (i, p) in img.pixels.iter_mut().enumerate() {
            *p = i as f32;
        }
        let r4 = img.rotate90().rotate90().rotate90().rotate90();
        assert_eq!(img, r4);
    }
}
