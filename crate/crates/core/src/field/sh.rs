//! Real spherical harmonics up to band 3 (degree 4, 16 coefficients).
//!
//! The polynomials are written in homogeneous form (e.g. `2z^2 - x^2 - y^2`
//! rather than `3z^2 - 1`) so they stay well defined, with a meaningful
//! gradient, for vectors slightly off the unit sphere.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::real::Real;

pub const MAX_SH_DEGREE: usize = 4;

struct Consts {
    c0: f64,
    c1: f64,
    c2a: f64,
    c20: f64,
    c22: f64,
    c33: f64,
    c32: f64,
    c31: f64,
    c30: f64,
    c32b: f64,
}

fn consts() -> Consts {
    Consts {
        c0: 0.5 / PI.sqrt(),
        c1: (3.0 / (4.0 * PI)).sqrt(),
        c2a: 0.5 * (15.0 / PI).sqrt(),
        c20: 0.25 * (5.0 / PI).sqrt(),
        c22: 0.25 * (15.0 / PI).sqrt(),
        c33: 0.25 * (35.0 / (2.0 * PI)).sqrt(),
        c32: 0.5 * (105.0 / PI).sqrt(),
        c31: 0.25 * (21.0 / (2.0 * PI)).sqrt(),
        c30: 0.25 * (7.0 / PI).sqrt(),
        c32b: 0.25 * (105.0 / PI).sqrt(),
    }
}

/// Validating encoder: `direction` must be unit length within 1e-6.
pub fn sh_encode(direction: [f64; 3], degree: usize) -> Result<Vec<f64>> {
    if degree == 0 || degree > MAX_SH_DEGREE {
        return Err(Error::invalid(format!("SH degree {degree} not in 1..=4")));
    }
    let n = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !((n - 1.0).abs() <= 1e-6) {
        return Err(Error::invalid(format!(
            "SH input must be a unit vector, |d| = {n}"
        )));
    }
    let mut out = vec![0.0; degree * degree];
    sh_basis(direction, degree, &mut out);
    Ok(out)
}

/// Basis values `Y_l^m` for `l < degree`, ordered by `l` then `m = -l..=l`.
pub fn sh_basis<T: Real>(d: [T; 3], degree: usize, out: &mut [T]) {
    let k = consts();
    let [x, y, z] = d.map(|v| v.to_f64_lossy());
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let vals = [
        k.c0,
        k.c1 * y,
        k.c1 * z,
        k.c1 * x,
        k.c2a * x * y,
        k.c2a * y * z,
        k.c20 * (2.0 * zz - xx - yy),
        k.c2a * x * z,
        k.c22 * (xx - yy),
        k.c33 * y * (3.0 * xx - yy),
        k.c32 * x * y * z,
        k.c31 * y * (4.0 * zz - xx - yy),
        k.c30 * z * (2.0 * zz - 3.0 * xx - 3.0 * yy),
        k.c31 * x * (4.0 * zz - xx - yy),
        k.c32b * (xx - yy) * z,
        k.c33 * x * (xx - 3.0 * yy),
    ];
    for (o, v) in out.iter_mut().zip(&vals[..degree * degree]) {
        *o = T::lit(*v);
    }
}

/// Gradient of `sum_i upstream[i] * Y_i(d)` with respect to `d`.
pub fn sh_basis_backward<T: Real>(d: [T; 3], degree: usize, upstream: &[T]) -> [T; 3] {
    let k = consts();
    let [x, y, z] = d.map(|v| v.to_f64_lossy());
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let grads: [[f64; 3]; 16] = [
        [0.0, 0.0, 0.0],
        [0.0, k.c1, 0.0],
        [0.0, 0.0, k.c1],
        [k.c1, 0.0, 0.0],
        [k.c2a * y, k.c2a * x, 0.0],
        [0.0, k.c2a * z, k.c2a * y],
        [-2.0 * k.c20 * x, -2.0 * k.c20 * y, 4.0 * k.c20 * z],
        [k.c2a * z, 0.0, k.c2a * x],
        [2.0 * k.c22 * x, -2.0 * k.c22 * y, 0.0],
        [6.0 * k.c33 * x * y, k.c33 * (3.0 * xx - 3.0 * yy), 0.0],
        [k.c32 * y * z, k.c32 * x * z, k.c32 * x * y],
        [
            -2.0 * k.c31 * x * y,
            k.c31 * (4.0 * zz - xx - 3.0 * yy),
            8.0 * k.c31 * y * z,
        ],
        [
            -6.0 * k.c30 * x * z,
            -6.0 * k.c30 * y * z,
            k.c30 * (6.0 * zz - 3.0 * xx - 3.0 * yy),
        ],
        [
            k.c31 * (4.0 * zz - 3.0 * xx - yy),
            -2.0 * k.c31 * x * y,
            8.0 * k.c31 * x * z,
        ],
        [2.0 * k.c32b * x * z, -2.0 * k.c32b * y * z, k.c32b * (xx - yy)],
        [k.c33 * (3.0 * xx - 3.0 * yy), -6.0 * k.c33 * x * y, 0.0],
    ];
    let mut g = [0.0f64; 3];
    for (u, gr) in upstream.iter().zip(&grads[..degree * degree]) {
        let u = u.to_f64_lossy();
        for a in 0..3 {
            g[a] += u * gr[a];
        }
    }
    g.map(T::lit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_zero_constant() {
        for d in [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.6, 0.0, 0.8]] {
            let v = sh_encode(d, 1).unwrap();
            assert_eq!(v.len(), 1);
            assert!((v[0] - 0.282_094_79).abs() < 1e-8);
        }
    }

    #[test]
    fn pole_values() {
        let v = sh_encode([0.0, 0.0, 1.0], 2).unwrap();
        assert_eq!(v[1], 0.0);
        assert_eq!(v[3], 0.0);
        assert!((v[2] - 0.488_602_51).abs() < 1e-8);
    }

    #[test]
    fn parity() {
        let d = [0.36, -0.48, 0.8];
        let a = sh_encode(d, 4).unwrap();
        let b = sh_encode(d.map(|v| -v), 4).unwrap();
        for l in 0..4 {
            let sign = if l % 2 == 1 { -1.0 } else { 1.0 };
            for i in l * l..(l + 1) * (l + 1) {
                assert!((b[i] - sign * a[i]).abs() < 1e-12, "index {i}");
            }
        }
    }

    #[test]
    fn rejects_non_unit() {
        assert!(sh_encode([1.0, 0.1, 0.0], 2).is_err());
        assert!(sh_encode([0.0, 0.0, 1.0], 5).is_err());
        assert!(sh_encode([0.0, 0.0, 1.0], 0).is_err());
    }

    #[test]
    fn orthonormal_on_sphere() {
        // midpoint rule in (cos theta, phi) is exact enough for degree <= 6 products
        let (nt, np) = (200, 200);
        let mut gram = [[0.0f64; 16]; 16];
        let mut y = [0.0f64; 16];
        for i in 0..nt {
            let ct = -1.0 + (i as f64 + 0.5) * 2.0 / nt as f64;
            let st = (1.0 - ct * ct).sqrt();
            for j in 0..np {
                let ph = (j as f64 + 0.5) * 2.0 * PI / np as f64;
                sh_basis([st * ph.cos(), st * ph.sin(), ct], 4, &mut y);
                let w = (2.0 / nt as f64) * (2.0 * PI / np as f64);
                for a in 0..16 {
                    for b in 0..16 {
                        gram[a][b] += w * y[a] * y[b];
                    }
                }
            }
        }
        for a in 0..16 {
            for b in 0..16 {
                let e = if a == b { 1.0 } else { 0.0 };
                assert!((gram[a][b] - e).abs() < 1e-3, "({a},{b}) = {}", gram[a][b]);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let d = [0.3f64, -0.5, 0.7];
        let up: Vec<f64> = (0..16).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.3).collect();
        let g = sh_basis_backward(d, 4, &up);
        let f = |p: [f64; 3]| {
            let mut y = [0.0; 16];
            sh_basis(p, 4, &mut y);
            y.iter().zip(&up).map(|(a, b)| a * b).sum::<f64>()
        };
        let h = 1e-6;
        for a in 0..3 {
            let (mut p, mut m) = (d, d);
            p[a] += h;
            m[a] -= h;
            let fd = (f(p) - f(m)) / (2.0 * h);
            assert!((fd - g[a]).abs() < 1e-7, "axis {a}: {fd} vs {}", g[a]);
        }
    }
}
