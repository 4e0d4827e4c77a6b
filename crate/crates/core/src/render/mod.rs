//! Ray marching, occupancy culling and differentiable alpha compositing.

mod batch;
mod composite;
mod march;
mod occupancy;

pub use batch::dynamic_batch_size;
pub use composite::{
    composite, composite_backward, composite_backward_into, sample_weights, Composite, CompositeGrad,
};
pub use march::{march_ray, march_ray_into, march_reference, march_unbounded, ray_aabb, Sample};
pub use occupancy::{update_occupancy, OccupancyGrid};

use nalgebra::Vector3;

use crate::geom::Ray;

/// Density and color of a field at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub sigma: f64,
    pub rgb: [f64; 3],
}

/// Anything that can be volume rendered without gradients.
pub trait RadianceField {
    fn sample(&mut self, p: &Vector3<f64>, dir: &Vector3<f64>) -> FieldSample;

    fn density(&mut self, p: &Vector3<f64>) -> f64 {
        self.sample(p, &Vector3::z()).sigma
    }
}

/// Front-to-back compositing of a field along given samples.
///
/// Stops once transmittance drops below `min_transmittance` (pass 0 to
/// evaluate every sample).
pub fn render_samples<F: RadianceField + ?Sized>(
    field: &mut F,
    ray: &Ray,
    samples: &[Sample],
    background: [f64; 3],
    min_transmittance: f64,
) -> Composite<f64> {
    let mut acc = 0.0;
    let mut trans = 1.0;
    let mut rgb = [0.0; 3];
    let mut opacity = 0.0;
    for s in samples {
        if trans < min_transmittance {
            break;
        }
        let f = field.sample(&ray.at(s.t), &ray.direction);
        acc += f.sigma.max(0.0) * s.delta;
        let next = (-acc).exp();
        let w = trans - next;
        for k in 0..3 {
            rgb[k] += w * f.rgb[k];
        }
        opacity += w;
        trans = next;
    }
    for k in 0..3 {
        rgb[k] += trans * background[k];
    }
    Composite {
        rgb,
        opacity,
        transmittance: trans,
    }
}

/// Renders one ray through a box with uniform steps and no culling.
pub fn render_reference<F: RadianceField + ?Sized>(
    field: &mut F,
    ray: &Ray,
    step: f64,
    aabb: (Vector3<f64>, Vector3<f64>),
    background: [f64; 3],
) -> Composite<f64> {
    let samples = march_reference(ray, step, &aabb.0, &aabb.1);
    render_samples(field, ray, &samples, background, 0.0)
}
