use nalgebra::Vector3;

use super::occupancy::OccupancyGrid;
use crate::geom::Ray;

/// A point along a ray and the length of ray segment it stands for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub delta: f64,
}

/// Entry and exit distances of a ray through a box, clipped to `t >= 0`.
pub fn ray_aabb(ray: &Ray, min: &Vector3<f64>, max: &Vector3<f64>) -> Option<(f64, f64)> {
    let mut t0 = 0.0f64;
    let mut t1 = f64::INFINITY;
    for i in 0..3 {
        let inv = 1.0 / ray.direction[i];
        let mut a = (min[i] - ray.origin[i]) * inv;
        let mut b = (max[i] - ray.origin[i]) * inv;
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        // NaN arises for a zero direction component on a slab boundary
        if !a.is_nan() {
            t0 = t0.max(a);
        }
        if !b.is_nan() {
            t1 = t1.min(b);
        }
    }
    (t1 > t0).then_some((t0, t1))
}

fn march_uniform(
    ray: &Ray,
    step: f64,
    min: &Vector3<f64>,
    max: &Vector3<f64>,
    mut keep: impl FnMut(&Vector3<f64>) -> bool,
    out: &mut Vec<Sample>,
) {
    out.clear();
    let Some((t_near, t_far)) = ray_aabb(ray, min, max) else {
        return;
    };
    let count = ((t_far - t_near) / step).floor() as usize;
    for i in 0..count {
        let t = t_near + (i as f64 + 0.5) * step;
        if keep(&ray.at(t)) {
            out.push(Sample { t, delta: step });
        }
    }
}

/// Uniform steps through the grid's box, dropping samples in free cells.
pub fn march_ray(ray: &Ray, step: f64, occupancy: &OccupancyGrid) -> Vec<Sample> {
    let mut out = Vec::new();
    march_ray_into(ray, step, occupancy, &mut out);
    out
}

pub fn march_ray_into(ray: &Ray, step: f64, occupancy: &OccupancyGrid, out: &mut Vec<Sample>) {
    let (min, max) = occupancy.bounds();
    march_uniform(ray, step, &min, &max, |p| occupancy.is_occupied(p), out);
}

/// Uniform steps through a box with no culling.
pub fn march_reference(ray: &Ray, step: f64, min: &Vector3<f64>, max: &Vector3<f64>) -> Vec<Sample> {
    let mut out = Vec::new();
    march_uniform(ray, step, min, max, |_| true, &mut out);
    out
}

/// Sampling for scenes parameterized with the inverted sphere.
///
/// Inside the unit sphere the ray is stepped uniformly and culled by the
/// occupancy grid when given. Beyond it, `far_samples` intervals split
/// `1/h` uniformly between its value where the ray leaves the sphere and
/// `1/far_limit`.
pub fn march_unbounded(
    ray: &Ray,
    step: f64,
    far_samples: usize,
    far_limit: f64,
    occupancy: Option<&OccupancyGrid>,
    out: &mut Vec<Sample>,
) {
    out.clear();
    let o = ray.origin;
    let d = ray.direction;
    let b = o.dot(&d);
    let c = o.norm_squared();
    let disc = b * b - (c - 1.0);
    let mut t_start = (-b).max(0.0);
    if disc > 0.0 {
        let s = disc.sqrt();
        let (t0, t1) = ((-b - s).max(0.0), -b + s);
        if t1 > t0 {
            let count = ((t1 - t0) / step).floor() as usize;
            for i in 0..count {
                let t = t0 + (i as f64 + 0.5) * step;
                if occupancy.is_none_or(|g| g.is_occupied(&ray.at(t))) {
                    out.push(Sample { t, delta: step });
                }
            }
            t_start = t_start.max(t1);
        }
    }
    let h0 = ray.at(t_start).norm().max(1.0);
    let (u0, u1) = (1.0 / h0, 1.0 / far_limit.max(h0 * 2.0));
    // distance along the ray where |o + t d| = h, on the receding branch
    let t_of = |u: f64| {
        let h = 1.0 / u;
        -b + (b * b - c + h * h).max(0.0).sqrt()
    };
    for j in 0..far_samples {
        let ua = u0 + (u1 - u0) * j as f64 / far_samples as f64;
        let ub = u0 + (u1 - u0) * (j + 1) as f64 / far_samples as f64;
        let (ta, tb) = (t_of(ua), t_of(ub));
        if tb > ta {
            out.push(Sample {
                t: t_of(0.5 * (ua + ub)),
                delta: tb - ta,
            });
        }
    }
}
