//! Mapping scene points into the unit hypercube the hash grids expect.

use nalgebra::Vector3;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SceneContraction {
    /// Affine map of an axis-aligned box onto `[0,1]^3`.
    Aabb { min: Vector3<f64>, max: Vector3<f64> },
    /// Points outside the unit sphere become the quadruple `(p / h, 1 / h)`
    /// with `h = |p|`; points inside become `(p, 1)`, so both branches share a
    /// 4D grid and meet continuously on the sphere.
    InvertedSphere,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Bounded,
    InSphere,
    OutSphere,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contracted {
    pub branch: Branch,
    /// Point (3 used) or quadruple (4 used) before the unit-cube mapping.
    pub raw: [f64; 4],
    /// Coordinates in `[0,1]^dim`.
    pub unit: [f64; 4],
    pub dim: usize,
}

impl Contracted {
    pub fn raw(&self) -> &[f64] {
        &self.raw[..self.dim]
    }

    pub fn unit(&self) -> &[f64] {
        &self.unit[..self.dim]
    }
}

pub fn contract(p: &Vector3<f64>, contraction: &SceneContraction) -> Result<Contracted> {
    match contraction {
        SceneContraction::Aabb { min, max } => {
            let mut unit = [0.0; 4];
            for i in 0..3 {
                let u = (p[i] - min[i]) / (max[i] - min[i]);
                if !(-1e-9..=1.0 + 1e-9).contains(&u) {
                    return Err(Error::OutOfDomain(format!("point {p:?} outside the scene box")));
                }
                unit[i] = u.clamp(0.0, 1.0);
            }
            Ok(Contracted {
                branch: Branch::Bounded,
                raw: [p.x, p.y, p.z, 0.0],
                unit,
                dim: 3,
            })
        }
        SceneContraction::InvertedSphere => {
            let h = p.norm();
            if h <= 1.0 {
                Ok(Contracted {
                    branch: Branch::InSphere,
                    raw: [p.x, p.y, p.z, 1.0],
                    unit: [
                        (p.x + 1.0) * 0.5,
                        (p.y + 1.0) * 0.5,
                        (p.z + 1.0) * 0.5,
                        1.0,
                    ],
                    dim: 4,
                })
            } else {
                let q = p / h;
                let inv = 1.0 / h;
                Ok(Contracted {
                    branch: Branch::OutSphere,
                    raw: [q.x, q.y, q.z, inv],
                    unit: [(q.x + 1.0) * 0.5, (q.y + 1.0) * 0.5, (q.z + 1.0) * 0.5, inv],
                    dim: 4,
                })
            }
        }
    }
}

/// Pulls a gradient with respect to the unit coordinates back to the point.
pub fn contract_backward(
    p: &Vector3<f64>,
    contraction: &SceneContraction,
    branch: Branch,
    g_unit: &[f64],
) -> Vector3<f64> {
    match (contraction, branch) {
        (SceneContraction::Aabb { min, max }, _) => Vector3::new(
            g_unit[0] / (max.x - min.x),
            g_unit[1] / (max.y - min.y),
            g_unit[2] / (max.z - min.z),
        ),
        (SceneContraction::InvertedSphere, Branch::OutSphere) => {
            let h = p.norm();
            let q = p / h;
            let gq = Vector3::new(g_unit[0], g_unit[1], g_unit[2]) * 0.5;
            // d(p/h) = (I - q q^T) / h ; d(1/h) = -q / h^2
            (gq - q * q.dot(&gq)) / h - q * (g_unit[3] / (h * h))
        }
        (SceneContraction::InvertedSphere, _) => Vector3::new(g_unit[0], g_unit[1], g_unit[2]) * 0.5,
    }
}
