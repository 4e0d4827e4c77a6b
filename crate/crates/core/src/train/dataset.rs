use crate::error::{Error, Result};
use crate::geom::{CameraIntrinsics, PoseSE3};
use crate::image::ImageBuf;

/// Posed (or pose-free) images sharing one camera model.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub images: Vec<ImageBuf>,
    pub intrinsics: CameraIntrinsics,
    pub poses: Option<Vec<PoseSE3>>,
    pub background: [f64; 3],
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        let (w, h) = (self.intrinsics.width as usize, self.intrinsics.height as usize);
        if self.images.is_empty() {
            return Err(Error::invalid("dataset has no images"));
        }
        if let Some(bad) = self.images.iter().position(|im| im.width() != w || im.height() != h) {
            return Err(Error::invalid(format!(
                "image {bad} is {}x{}, camera is {w}x{h}",
                self.images[bad].width(),
                self.images[bad].height()
            )));
        }
        if let Some(p) = &self.poses {
            if p.len() != self.images.len() {
                return Err(Error::invalid(format!(
                    "{} poses for {} images",
                    p.len(),
                    self.images.len()
                )));
            }
        }
        Ok(())
    }

    pub fn pixels_per_image(&self) -> usize {
        self.intrinsics.width as usize * self.intrinsics.height as usize
    }

    pub fn total_pixels(&self) -> usize {
        self.pixels_per_image() * self.images.len()
    }

    /// Image index and pixel coordinates of a flat pixel id.
    pub fn locate(&self, id: usize) -> (usize, u32, u32) {
        let per = self.pixels_per_image();
        let w = self.intrinsics.width as usize;
        let local = id % per;
        (id / per, (local % w) as u32, (local / w) as u32)
    }
}
