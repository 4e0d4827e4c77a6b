//! Plain-text pose lists.
//!
//! One pose per non-empty line; `#` starts a comment. A line holds either six
//! numbers (exponential coordinates `wx wy wz rx ry rz`) or twelve numbers (a
//! row-major 3x4 camera-to-world matrix).

use std::fmt::Write as _;

use nalgebra::Matrix3x4;

use super::se3::PoseSE3;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoseFileStyle {
    Params,
    Matrix,
}

pub fn read_poses(text: &str) -> Result<Vec<PoseSE3>> {
    let mut poses = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("pose line {}: {e}", n + 1)))?;
        let pose = match vals.len() {
            6 => PoseSE3::from_params(vals.try_into().unwrap()),
            12 => {
                let m = Matrix3x4::from_row_slice(&vals);
                PoseSE3::from_matrix(&m, 1e-3)
                    .map_err(|e| Error::Format(format!("pose line {}: {e}", n + 1)))?
            }
            k => {
                return Err(Error::Format(format!(
                    "pose line {} has {k} numbers, expected 6 or 12",
                    n + 1
                )))
            }
        };
        poses.push(pose);
    }
    Ok(poses)
}

pub fn write_poses(poses: &[PoseSE3], style: PoseFileStyle) -> String {
    let mut s = String::new();
    match style {
        PoseFileStyle::Params => s.push_str("# wx wy wz rx ry rz\n"),
        PoseFileStyle::Matrix => s.push_str("# camera-to-world 3x4, row-major\n"),
    }
    for p in poses {
        let vals: Vec<f64> = match style {
            PoseFileStyle::Params => p.params.to_vec(),
            PoseFileStyle::Matrix => {
                let m = p.matrix();
                (0..3).flat_map(|r| (0..4).map(move |c| m[(r, c)])).collect()
            }
        };
        let line: Vec<String> = vals.iter().map(|v| format!("{v:.17e}")).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    s
}
