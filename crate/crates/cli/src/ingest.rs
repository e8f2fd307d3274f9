//! Decoding, square resampling and color conversion of input images.

use std::path::Path;

use image::imageops::FilterType;
use image::{DynamicImage, Rgb32FImage};
use scatter_core::{ColorMode, Plane};

use crate::error::{CliError, Result};

/// BT.601 full range: `Y = 0.299R + 0.587G + 0.114B`, `U = 0.492(B − Y)`,
/// `V = 0.877(R − Y)`.
pub fn rgb_to_yuv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let y = 0.299 * r + 0.587 * g + 0.114 * b;
    (y, 0.492 * (b - y), 0.877 * (r - y))
}

pub fn decode(path: &Path) -> Result<DynamicImage> {
    image::ImageReader::open(path)
        .and_then(|r| r.with_guessed_format())
        .map_err(|e| CliError::Ingest {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .decode()
        .map_err(|e| CliError::Ingest {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

/// Bilinear resize to `n x n` (aspect ratio is not kept), values in [0, 1].
pub fn resize_square(img: &DynamicImage, n: u32) -> Rgb32FImage {
    let rgb = img.to_rgb32f();
    if rgb.width() == n && rgb.height() == n {
        return rgb;
    }
    image::imageops::resize(&rgb, n, n, FilterType::Triangle)
}

/// Channels for the scattering network: Y only for gray, Y/U/V otherwise.
pub fn to_planes(rgb: &Rgb32FImage, color: ColorMode) -> Vec<Plane<f64>> {
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let mut yuv = [vec![0.0; w * h], vec![0.0; w * h], vec![0.0; w * h]];
    for (i, p) in rgb.pixels().enumerate() {
        let [r, g, b] = p.0.map(f64::from);
        let (y, u, v) = rgb_to_yuv(r, g, b);
        yuv[0][i] = y;
        yuv[1][i] = u;
        yuv[2][i] = v;
    }
    yuv.into_iter()
        .take(color.channels())
        .map(|data| Plane::new(h, w, data).expect("decoded pixels are finite"))
        .collect()
}

pub fn load_and_resize(path: &Path, n: usize, color: ColorMode) -> Result<Vec<Plane<f64>>> {
    let img = decode(path)?;
    Ok(to_planes(&resize_square(&img, n as u32), color))
}
