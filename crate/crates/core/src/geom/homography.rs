//! Planar warps parameterized by the sl(3) Lie algebra.
//!
//! The eight parameters `h` build the traceless generator
//!
//! ```text
//!     [ h5      h3        h1 ]
//! A = [ h4   -h5 - h6     h2 ]
//!     [ h7      h8        h6 ]
//! ```
//!
//! and the warp is `H = exp(A)`, so `h = 0` is the identity and `-h` is the
//! inverse warp. `h1, h2` are translations.

use nalgebra::{Matrix3, Matrix6, Vector2, Vector3};

use crate::error::{Error, Result};

fn generator(k: usize) -> Matrix3<f64> {
    let mut g = Matrix3::zeros();
    match k {
        0 => g[(0, 2)] = 1.0,
        1 => g[(1, 2)] = 1.0,
        2 => g[(0, 1)] = 1.0,
        3 => g[(1, 0)] = 1.0,
        4 => {
            g[(0, 0)] = 1.0;
            g[(1, 1)] = -1.0;
        }
        5 => {
            g[(1, 1)] = -1.0;
            g[(2, 2)] = 1.0;
        }
        6 => g[(2, 0)] = 1.0,
        7 => g[(2, 1)] = 1.0,
        _ => unreachable!(),
    }
    g
}

fn algebra(params: &[f64; 8]) -> Matrix3<f64> {
    (0..8).fold(Matrix3::zeros(), |acc, k| acc + generator(k) * params[k])
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Homography2D {
    pub params: [f64; 8],
}

/// The warp matrix and its derivative with respect to each parameter.
#[derive(Debug, Clone)]
pub struct WarpJacobian {
    pub matrix: Matrix3<f64>,
    pub d_matrix: [Matrix3<f64>; 8],
}

impl WarpJacobian {
    /// Applies the warp and returns the gradient of `g . warp(uv)` with
    /// respect to the parameters.
    pub fn apply_with_grad(&self, uv: [f64; 2], g: [f64; 2]) -> Result<([f64; 2], [f64; 8])> {
        let p = Vector3::new(uv[0], uv[1], 1.0);
        let q = self.matrix * p;
        if q.z.abs() < 1e-12 {
            return Err(Error::DegenerateWarp(q.z));
        }
        let (x, y) = (q.x / q.z, q.y / q.z);
        // d(out)/dq = [[1/w, 0, -x/w], [0, 1/w, -y/w]]; pull g back onto q
        let gq = Vector3::new(g[0] / q.z, g[1] / q.z, -(g[0] * x + g[1] * y) / q.z);
        let grad = std::array::from_fn(|k| gq.dot(&(self.d_matrix[k] * p)));
        Ok(([x, y], grad))
    }
}

impl Homography2D {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn from_params(params: [f64; 8]) -> Self {
        Self { params }
    }

    pub fn inverse(&self) -> Self {
        Self {
            params: self.params.map(|v| -v),
        }
    }

    /// `exp(A)` without normalization.
    pub fn exp_matrix(&self) -> Matrix3<f64> {
        algebra(&self.params).exp()
    }

    /// Warp matrix scaled so that its bottom-right entry is 1.
    pub fn matrix(&self) -> Matrix3<f64> {
        let m = self.exp_matrix();
        m / m[(2, 2)]
    }

    pub fn apply(&self, uv: [f64; 2]) -> Result<[f64; 2]> {
        apply_matrix(&self.exp_matrix(), uv)
    }

    /// Derivatives of `exp(A)` via the block-triangular exponential
    /// `exp([[A, G], [0, A]]) = [[exp(A), dexp_A(G)], [0, exp(A)]]`.
    pub fn jacobian(&self) -> WarpJacobian {
        let a = algebra(&self.params);
        let mut matrix = Matrix3::zeros();
        let d_matrix = std::array::from_fn(|k| {
            let mut block = Matrix6::zeros();
            block.fixed_view_mut::<3, 3>(0, 0).copy_from(&a);
            block.fixed_view_mut::<3, 3>(3, 3).copy_from(&a);
            block.fixed_view_mut::<3, 3>(0, 3).copy_from(&generator(k));
            let e = block.exp();
            if k == 0 {
                matrix = e.fixed_view::<3, 3>(0, 0).into();
            }
            e.fixed_view::<3, 3>(0, 3).into()
        });
        WarpJacobian { matrix, d_matrix }
    }
}

/// Projective application of a 3x3 matrix to a 2D point.
pub fn apply_matrix(m: &Matrix3<f64>, uv: [f64; 2]) -> Result<[f64; 2]> {
    let q = m * Vector3::new(uv[0], uv[1], 1.0);
    if q.z.abs() < 1e-12 {
        return Err(Error::DegenerateWarp(q.z));
    }
    Ok([q.x / q.z, q.y / q.z])
}

pub fn homography_apply(warp: &Homography2D, uv: Vector2<f64>) -> Result<Vector2<f64>> {
    warp.apply([uv.x, uv.y]).map(|[x, y]| Vector2::new(x, y))
}
