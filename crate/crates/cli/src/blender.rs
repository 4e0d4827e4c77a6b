//! Datasets in the transforms-JSON layout used by the Blender synthetic
//! scenes: `transforms_<split>.json` holding `camera_angle_x` and a list of
//! frames with `file_path` and a 4x4 OpenGL-style camera-to-world matrix.

use std::path::{Path, PathBuf};

use hashba::geom::{CameraIntrinsics, PoseSE3};
use hashba::train::Dataset;
use nalgebra::{Matrix3, Matrix3x4, Matrix4};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::fsio::{read_text, write_atomic};
use crate::png::{read_png, write_png};

/// Tolerance on the rotation block of an input transform.
pub const RIGIDITY_TOL: f64 = 1e-3;

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub camera_angle_x: f64,
    pub frames: Vec<Frame>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Frame {
    pub file_path: String,
    pub transform_matrix: [[f64; 4]; 4],
}

pub fn focal_from_angle(width: u32, camera_angle_x: f64) -> f64 {
    width as f64 / (2.0 * (camera_angle_x / 2.0).tan())
}

/// OpenGL cameras look down -z with y up; ours look down +z with y down.
fn flip() -> Matrix3<f64> {
    Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, -1.0, -1.0))
}

pub fn pose_from_gl(m: &[[f64; 4]; 4]) -> CliResult<PoseSE3> {
    let m4 = Matrix4::from_fn(|r, c| m[r][c]);
    let rot: Matrix3<f64> = m4.fixed_view::<3, 3>(0, 0).into();
    let ortho = (rot.transpose() * rot - Matrix3::identity()).abs().max();
    if !(ortho <= RIGIDITY_TOL) || !((rot.determinant().abs() - 1.0).abs() <= RIGIDITY_TOL) {
        return Err(CliError::Data(format!(
            "transform is not rigid (orthogonality residual {ortho:.2e}, det {:.6})",
            rot.determinant()
        )));
    }
    let mut c2w = Matrix3x4::zeros();
    c2w.fixed_view_mut::<3, 3>(0, 0).copy_from(&(rot * flip()));
    c2w.set_column(3, &m4.fixed_view::<3, 1>(0, 3));
    PoseSE3::from_matrix(&c2w, RIGIDITY_TOL).map_err(|e| CliError::Data(format!("transform: {e}")))
}

pub fn pose_to_gl(pose: &PoseSE3) -> [[f64; 4]; 4] {
    let m = pose.matrix();
    let rot = m.fixed_view::<3, 3>(0, 0) * flip();
    std::array::from_fn(|r| {
        if r == 3 {
            [0.0, 0.0, 0.0, 1.0]
        } else {
            [rot[(r, 0)], rot[(r, 1)], rot[(r, 2)], m[(r, 3)]]
        }
    })
}

fn resolve_image(dir: &Path, file_path: &str) -> PathBuf {
    let p = dir.join(file_path);
    if p.extension().is_none() {
        p.with_extension("png")
    } else {
        p
    }
}

/// Loads one split (`train`, `test`, `val`) of a dataset directory.
pub fn load_blender_dataset(dir: &Path, split: &str, background: [f64; 3]) -> CliResult<Dataset> {
    let manifest_path = dir.join(format!("transforms_{split}.json"));
    if !manifest_path.is_file() {
        return Err(CliError::Data(format!("missing manifest {}", manifest_path.display())));
    }
    let manifest: Manifest = serde_json::from_str(&read_text(&manifest_path)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", manifest_path.display())))?;
    if manifest.frames.is_empty() {
        return Err(CliError::Data(format!("{} lists no frames", manifest_path.display())));
    }
    let mut images = Vec::with_capacity(manifest.frames.len());
    let mut poses = Vec::with_capacity(manifest.frames.len());
    for (i, f) in manifest.frames.iter().enumerate() {
        let path = resolve_image(dir, &f.file_path);
        images.push(read_png(&path, background)?);
        poses.push(
            pose_from_gl(&f.transform_matrix)
                .map_err(|e| CliError::Data(format!("{} frame {i}: {e}", manifest_path.display())))?,
        );
    }
    let (w, h) = (images[0].width() as u32, images[0].height() as u32);
    let f = focal_from_angle(w, manifest.camera_angle_x);
    let intrinsics = CameraIntrinsics::new(f, f, w as f64 / 2.0, h as f64 / 2.0, w, h)
        .map_err(|e| CliError::Data(format!("{}: {e}", manifest_path.display())))?;
    let data = Dataset {
        name: dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into()),
        images,
        intrinsics,
        poses: Some(poses),
        background,
    };
    data.validate()
        .map_err(|e| CliError::Data(format!("{}: {e}", manifest_path.display())))?;
    Ok(data)
}

/// Writes `data` as split `split` of a dataset directory, images under
/// `<split>/r_<i>.png`.
pub fn write_blender_dataset(dir: &Path, split: &str, data: &Dataset) -> CliResult<()> {
    let poses = data
        .poses
        .as_ref()
        .ok_or_else(|| CliError::Data("dataset has no poses to write".into()))?;
    let k = &data.intrinsics;
    let camera_angle_x = 2.0 * (k.width as f64 / (2.0 * k.fx)).atan();
    let mut frames = Vec::with_capacity(poses.len());
    for (i, (img, pose)) in data.images.iter().zip(poses).enumerate() {
        let rel = format!("{split}/r_{i}");
        write_png(&dir.join(format!("{rel}.png")), img)?;
        frames.push(Frame {
            file_path: format!("./{rel}"),
            transform_matrix: pose_to_gl(pose),
        });
    }
    let json = serde_json::to_string_pretty(&Manifest { camera_angle_x, frames })
        .map_err(|e| CliError::Data(e.to_string()))?;
    write_atomic(&dir.join(format!("transforms_{split}.json")), json.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    const IDENTITY: [[f64; 4]; 4] = [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ];

    #[test]
    fn focal_formula() {
        assert!((focal_from_angle(800, 0.6911) - 1111.11).abs() < 0.05);
    }

    #[test]
    fn identity_transform_becomes_axis_flip() {
        let p = pose_from_gl(&IDENTITY).unwrap();
        let r = p.rotation();
        assert!((r - flip()).abs().max() < 1e-12);
        assert!(p.center().norm() < 1e-12);
        let back = pose_to_gl(&p);
        for r in 0..4 {
            for c in 0..4 {
                assert!((back[r][c] - IDENTITY[r][c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_sheared_transform() {
        let mut m = IDENTITY;
        m[0][1] = 0.1;
        assert!(matches!(pose_from_gl(&m), Err(CliError::Data(_))));
    }

    #[test]
    fn missing_manifest_is_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let e = load_blender_dataset(dir.path(), "train", [1.0; 3]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
