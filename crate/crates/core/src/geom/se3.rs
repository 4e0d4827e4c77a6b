//! SE(3) poses in exponential coordinates.
//!
//! A pose is six numbers `(omega, rho)`: `omega` is the rotation vector and
//! the camera-to-world matrix is `[R | V rho]` with `R = exp([omega]x)` and
//! `V` the left Jacobian of SO(3). The matrix derivatives with respect to all
//! six numbers are closed-form, so pose gradients never go through a tape.

use nalgebra::{Matrix3, Matrix3x4, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

const SERIES_THRESHOLD: f64 = 1e-2;

#[inline]
pub(crate) fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Coefficients of `I + A W + B W^2` (rotation), `I + B W + C W^2` (left
/// Jacobian) and their radial derivatives divided by theta.
#[derive(Debug, Clone, Copy)]
struct Coeffs {
    a: f64,
    b: f64,
    c: f64,
    a1: f64,
    b1: f64,
    c1: f64,
}

fn coeffs(theta: f64) -> Coeffs {
    let t2 = theta * theta;
    if theta < SERIES_THRESHOLD {
        let t4 = t2 * t2;
        let t6 = t4 * t2;
        Coeffs {
            a: 1.0 - t2 / 6.0 + t4 / 120.0 - t6 / 5040.0,
            b: 0.5 - t2 / 24.0 + t4 / 720.0 - t6 / 40320.0,
            c: 1.0 / 6.0 - t2 / 120.0 + t4 / 5040.0 - t6 / 362_880.0,
            a1: -1.0 / 3.0 + t2 / 30.0 - t4 / 840.0,
            b1: -1.0 / 12.0 + t2 / 180.0 - t4 / 6720.0,
            c1: -1.0 / 60.0 + t2 / 1260.0 - t4 / 60480.0,
        }
    } else {
        let (s, c) = theta.sin_cos();
        let one_minus_cos = 2.0 * (theta / 2.0).sin().powi(2);
        let t3 = t2 * theta;
        Coeffs {
            a: s / theta,
            b: one_minus_cos / t2,
            c: (theta - s) / t3,
            a1: (theta * c - s) / t3,
            b1: (theta * s - 2.0 * one_minus_cos) / (t2 * t2),
            c1: (theta * one_minus_cos - 3.0 * (theta - s)) / (t3 * t2),
        }
    }
}

pub fn so3_exp(omega: &Vector3<f64>) -> Matrix3<f64> {
    let k = coeffs(omega.norm());
    let w = hat(omega);
    Matrix3::identity() + w * k.a + w * w * k.b
}

/// Rotation vector of `r`, with `|omega| <= pi`.
pub fn so3_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let cos = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let theta = cos.acos();
    let v = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    if theta < 1e-6 {
        return v * 0.5 * (1.0 + theta * theta / 6.0);
    }
    if std::f64::consts::PI - theta < 1e-2 {
        // symmetric part of R is cos(t) I + (1 - cos(t)) a a^T
        let aat = ((r + r.transpose()) * 0.5 - Matrix3::identity() * cos) / (1.0 - cos);
        let i = (0..3)
            .max_by(|&x, &y| aat[(x, x)].total_cmp(&aat[(y, y)]))
            .unwrap();
        let axis: Vector3<f64> = aat.column(i).into();
        let axis = axis.normalize();
        let sign = if axis.dot(&v) < 0.0 { -1.0 } else { 1.0 };
        // v = 2 sin(theta) axis, so refine theta with both sin and cos
        let s = 0.5 * v.norm();
        let theta = s.atan2(cos);
        return axis * theta * sign;
    }
    v * (theta / (2.0 * theta.sin()))
}

pub fn se3_exp(params: &[f64; 6]) -> Matrix3x4<f64> {
    let omega = Vector3::new(params[0], params[1], params[2]);
    let rho = Vector3::new(params[3], params[4], params[5]);
    let k = coeffs(omega.norm());
    let w = hat(&omega);
    let w2 = w * w;
    let r = Matrix3::identity() + w * k.a + w2 * k.b;
    let v = Matrix3::identity() + w * k.b + w2 * k.c;
    let t = v * rho;
    let mut m = Matrix3x4::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    m.set_column(3, &t);
    m
}

pub fn se3_log(m: &Matrix3x4<f64>) -> [f64; 6] {
    let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into();
    let t: Vector3<f64> = m.column(3).into();
    let omega = so3_log(&r);
    let k = coeffs(omega.norm());
    let w = hat(&omega);
    let v = Matrix3::identity() + w * k.b + w * w * k.c;
    let rho = v.lu().solve(&t).unwrap_or(t);
    [omega.x, omega.y, omega.z, rho.x, rho.y, rho.z]
}

/// Camera-to-world pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSE3 {
    pub params: [f64; 6],
}

/// Derivatives of rotation and translation with respect to each parameter.
#[derive(Debug, Clone)]
pub struct PoseJacobian {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub d_rotation: [Matrix3<f64>; 6],
    pub d_translation: [Vector3<f64>; 6],
}

impl PoseJacobian {
    /// Chains gradients w.r.t. a ray origin and its (unnormalized, world)
    /// direction `R d_cam` back onto the six pose parameters.
    pub fn ray_param_grad(
        &self,
        d_cam: &Vector3<f64>,
        g_origin: &Vector3<f64>,
        g_dir: &Vector3<f64>,
    ) -> [f64; 6] {
        std::array::from_fn(|k| {
            g_origin.dot(&self.d_translation[k]) + g_dir.dot(&(self.d_rotation[k] * d_cam))
        })
    }
}

impl Default for PoseSE3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl PoseSE3 {
    pub fn identity() -> Self {
        Self { params: [0.0; 6] }
    }

    pub fn from_params(params: [f64; 6]) -> Self {
        Self { params }
    }

    /// Converts a rigid 3x4 matrix; the rotation block must be orthonormal
    /// with determinant +1 within `tol`.
    pub fn from_matrix(m: &Matrix3x4<f64>, tol: f64) -> Result<Self> {
        let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into();
        let orth = (r.transpose() * r - Matrix3::identity()).abs().max();
        let det = r.determinant();
        if orth > tol || (det - 1.0).abs() > tol {
            return Err(Error::invalid(format!(
                "not a rotation: |R^T R - I| = {orth:e}, det = {det}"
            )));
        }
        Ok(Self {
            params: se3_log(m),
        })
    }

    pub fn matrix(&self) -> Matrix3x4<f64> {
        se3_exp(&self.params)
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.matrix().fixed_view::<3, 3>(0, 0).into()
    }

    pub fn center(&self) -> Vector3<f64> {
        self.matrix().column(3).into()
    }

    pub fn inverse(&self) -> Self {
        let r = self.rotation();
        let mut m = Matrix3x4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r.transpose());
        m.set_column(3, &(-(r.transpose() * self.center())));
        Self::from_params(se3_log(&m))
    }

    pub fn jacobian(&self) -> PoseJacobian {
        let p = &self.params;
        let omega = Vector3::new(p[0], p[1], p[2]);
        let rho = Vector3::new(p[3], p[4], p[5]);
        let k = coeffs(omega.norm());
        let w = hat(&omega);
        let w2 = w * w;
        let rotation = Matrix3::identity() + w * k.a + w2 * k.b;
        let v = Matrix3::identity() + w * k.b + w2 * k.c;
        let mut d_rotation = [Matrix3::zeros(); 6];
        let mut d_translation = [Vector3::zeros(); 6];
        for i in 0..3 {
            let e = hat(&Vector3::ith(i, 1.0));
            let sym = e * w + w * e;
            d_rotation[i] = w * (k.a1 * omega[i]) + e * k.a + w2 * (k.b1 * omega[i]) + sym * k.b;
            let dv = w * (k.b1 * omega[i]) + e * k.b + w2 * (k.c1 * omega[i]) + sym * k.c;
            d_translation[i] = dv * rho;
            d_translation[3 + i] = v.column(i).into();
        }
        PoseJacobian {
            rotation,
            translation: v * rho,
            d_rotation,
            d_translation,
        }
    }
}

/// Adds `N(0, sigma^2)` noise to each of the six parameters.
pub fn perturb_pose<R: Rng>(pose: &PoseSE3, sigma: f64, rng: &mut R) -> PoseSE3 {
    if sigma == 0.0 {
        return *pose;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma must be finite and non-negative");
    let mut params = pose.params;
    for p in params.iter_mut() {
        *p += normal.sample(rng);
    }
    PoseSE3 { params }
}
