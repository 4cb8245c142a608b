//! Grayscale image input and PNG output.

use std::path::Path;

use image::{DynamicImage, ExtendedColorType, ImageFormat, ImageReader};
use mbeseg::ScalarField2D;

use crate::error::{CliError, CliResult};

/// Loads an 8- or 16-bit grayscale PNG or a binary PGM onto the 0-255 scale.
/// 16-bit samples are divided by 257. Color images are rejected.
pub fn load_image(path: &Path) -> CliResult<ScalarField2D> {
    let reader = ImageReader::open(path)
        .map_err(|e| CliError::io(path, e))?
        .with_guessed_format()
        .map_err(|e| CliError::io(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        other => {
            return Err(CliError::Format {
                path: path.into(),
                message: format!("expected PNG or PGM, found {other:?}"),
            })
        }
    }
    let img = reader.decode().map_err(|e| CliError::Format {
        path: path.into(),
        message: e.to_string(),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(f64::from).collect(),
        DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(|v| f64::from(v) / 257.0).collect(),
        other => {
            return Err(CliError::Format {
                path: path.into(),
                message: format!("only single-channel grayscale is accepted, got {:?}", other.color()),
            })
        }
    };
    ScalarField2D::from_vec(w, h, data).map_err(|e| CliError::Format {
        path: path.into(),
        message: e.to_string(),
    })
}

/// Rounds and clamps to `0..=255`.
pub fn to_u8(x: f64) -> u8 {
    if x.is_nan() {
        0
    } else {
        x.round().clamp(0.0, 255.0) as u8
    }
}

pub fn to_u16(x: f64) -> u16 {
    if x.is_nan() {
        0
    } else {
        x.round().clamp(0.0, 65535.0) as u16
    }
}

fn save(path: &Path, bytes: &[u8], w: usize, h: usize, color: ExtendedColorType) -> CliResult<()> {
    image::save_buffer_with_format(path, bytes, w as u32, h as u32, color, ImageFormat::Png)
        .map_err(|e| CliError::io(path, e))
}

/// 8-bit grayscale PNG of `field` (rounded, clamped).
pub fn save_gray8(path: &Path, field: &ScalarField2D) -> CliResult<()> {
    let bytes: Vec<u8> = field.as_slice().iter().map(|&x| to_u8(x)).collect();
    save(path, &bytes, field.width(), field.height(), ExtendedColorType::L8)
}

/// 16-bit grayscale PNG of `field * 257` (rounded, clamped), so 255 maps to 65535.
/// The encoder takes samples in native byte order.
pub fn save_gray16(path: &Path, field: &ScalarField2D) -> CliResult<()> {
    let mut bytes = Vec::with_capacity(field.len() * 2);
    for &x in field.as_slice() {
        bytes.extend_from_slice(&to_u16(x * 257.0).to_ne_bytes());
    }
    save(path, &bytes, field.width(), field.height(), ExtendedColorType::L16)
}

/// Interleaved 8-bit RGB PNG.
pub fn save_rgb8(path: &Path, rgb: &[u8], width: usize, height: usize) -> CliResult<()> {
    save(path, rgb, width, height, ExtendedColorType::Rgb8)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_identity() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255, 128, 64]);
        std::fs::write(&p, bytes).unwrap();
        let f = load_image(&p).unwrap();
        assert_eq!(f.as_slice(), &[0.0, 255.0, 128.0, 64.0]);
    }

    #[test]
    fn sixteen_bit_scale_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        let f = ScalarField2D::from_vec(5, 1, vec![255.0, 0.0, 100.2, 1.0 / 257.0, 66.39]).unwrap();
        save_gray16(&p, &f).unwrap();
        let g = load_image(&p).unwrap();
        assert_eq!(g.get(0, 0), 255.0);
        assert_eq!(g.get(1, 0), 0.0);
        for i in 2..5 {
            assert!((g.get(i, 0) - f.get(i, 0)).abs() < 0.5 / 257.0 + 1e-12);
        }
    }

    #[test]
    fn eight_bit_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.png");
        let f = ScalarField2D::from_fn(7, 5, |i, j| 36.3 * i as f64 + 0.77 * j as f64);
        save_gray8(&p, &f).unwrap();
        let g = load_image(&p).unwrap();
        for (a, b) in f.as_slice().iter().zip(g.as_slice()) {
            assert!((a - b).abs() <= 0.5);
        }
    }

    #[test]
    fn color_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.png");
        save_rgb8(&p, &[1, 2, 3, 4, 5, 6], 2, 1).unwrap();
        assert!(matches!(load_image(&p), Err(CliError::Format { .. })));
        let q = dir.path().join("d.txt");
        std::fs::write(&q, "not an image").unwrap();
        assert!(load_image(&q).is_err());
    }
}
