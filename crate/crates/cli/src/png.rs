//! 8-bit PNG input and output for float RGB buffers.

use std::path::Path;

use hashba::image::ImageBuf;
use image::{ImageFormat, Rgb, RgbImage};

use crate::error::{CliError, CliResult};
use crate::fsio::write_atomic_with;

/// Loads a PNG as linear `[0,1]` RGB, compositing any alpha channel over
/// `background`.
pub fn read_png(path: &Path, background: [f64; 3]) -> CliResult<ImageBuf> {
    let img = image::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let rgba = img.to_rgba32f();
    let (w, h) = rgba.dimensions();
    Ok(ImageBuf::from_fn(w as usize, h as usize, |x, y| {
        let p = rgba.get_pixel(x as u32, y as u32).0;
        let a = p[3];
        std::array::from_fn(|k| p[k] * a + background[k] as f32 * (1.0 - a))
    }))
}

pub fn to_rgb8(img: &ImageBuf) -> RgbImage {
    RgbImage::from_fn(img.width() as u32, img.height() as u32, |x, y| {
        let c = img.get(x as usize, y as usize);
        Rgb(c.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8))
    })
}

pub fn write_png(path: &Path, img: &ImageBuf) -> CliResult<()> {
    let rgb = to_rgb8(img);
    write_atomic_with(path, |w| {
        rgb.write_to(w, ImageFormat::Png)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.png");
        let img = ImageBuf::from_fn(7, 5, |x, y| [x as f32 / 7.0, y as f32 / 5.0, 0.3337]);
        write_png(&p, &img).unwrap();
        let back = read_png(&p, [0.0; 3]).unwrap();
        assert!(img.same_shape(&back));
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }

    #[test]
    fn transparent_pixel_takes_background() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        image::RgbaImage::from_pixel(2, 2, image::Rgba([255, 0, 0, 0])).save(&p).unwrap();
        let img = read_png(&p, [1.0; 3]).unwrap();
        assert_eq!(img.get(1, 1), [1.0, 1.0, 1.0]);
    }
}
