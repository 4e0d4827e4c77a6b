use nalgebra::Vector3;

use super::se3::PoseSE3;
use crate::error::{Error, Result};

/// Pinhole intrinsics in pixels. Camera looks down +z, x right, y down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// Square pixels, principal point at the image center.
    pub fn from_fov_x(fov_x: f64, width: u32, height: u32) -> Result<Self> {
        let f = width as f64 / (2.0 * (fov_x / 2.0).tan());
        Self::new(f, f, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && (0.0..self.width as f64).contains(&self.cx)
            && (0.0..self.height as f64).contains(&self.cy);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("bad intrinsics {self:?}")))
        }
    }

    /// Direction through the center of pixel `(u, v)` in camera coordinates,
    /// normalized.
    pub fn camera_direction(&self, u: u32, v: u32) -> Vector3<f64> {
        Vector3::new(
            (u as f64 + 0.5 - self.cx) / self.fx,
            (v as f64 + 0.5 - self.cy) / self.fy,
            1.0,
        )
        .normalize()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vector3<f64>,
    pub direction: Vector3<f64>,
}

impl Ray {
    pub fn at(&self, t: f64) -> Vector3<f64> {
        self.origin + self.direction * t
    }
}

pub fn generate_rays(
    intrinsics: &CameraIntrinsics,
    pose: &PoseSE3,
    pixels: &[(u32, u32)],
) -> Result<Vec<Ray>> {
    let m = pose.matrix();
    let r = m.fixed_view::<3, 3>(0, 0);
    let origin: Vector3<f64> = m.column(3).into();
    pixels
        .iter()
        .map(|&(u, v)| {
            if u >= intrinsics.width || v >= intrinsics.height {
                return Err(Error::invalid(format!(
                    "pixel ({u}, {v}) outside {}x{} image",
                    intrinsics.width, intrinsics.height
                )));
            }
            Ok(Ray {
                origin,
                direction: r * intrinsics.camera_direction(u, v),
            })
        })
        .collect()
}
