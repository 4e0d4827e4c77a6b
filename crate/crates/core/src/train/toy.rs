//! Procedural scene of colored Gaussian density blobs.

use nalgebra::{Matrix3, Matrix3x4, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Experiment, TrainConfig};
use super::dataset::Dataset;
use crate::diff::LrSchedule;
use crate::error::Result;
use crate::geom::{generate_rays, CameraIntrinsics, PoseSE3, Ray};
use crate::image::ImageBuf;
use crate::render::{render_reference, FieldSample, RadianceField};

#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    pub center: Vector3<f64>,
    pub radius: f64,
    pub amplitude: f64,
    pub color: [f64; 3],
    /// Second color, mixed in by stripes along `stripe_axis`.
    pub stripe_color: [f64; 3],
    /// Stripe direction scaled by its angular frequency (radians per unit).
    pub stripe_axis: Vector3<f64>,
}

impl Blob {
    fn color_at(&self, p: &Vector3<f64>) -> [f64; 3] {
        let m = 0.5 + 0.5 * (p - self.center).dot(&self.stripe_axis).sin();
        std::array::from_fn(|k| self.color[k] * (1.0 - m) + self.stripe_color[k] * m)
    }
}

/// Density is a sum of isotropic Gaussians; color is the density-weighted
/// mix of each blob's striped color.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobScene {
    pub blobs: Vec<Blob>,
}

impl BlobScene {
    pub fn random(count: usize, rng: &mut impl Rng) -> Self {
        let palette = [
            [0.9, 0.15, 0.1],
            [0.1, 0.6, 0.2],
            [0.15, 0.3, 0.9],
            [0.95, 0.8, 0.1],
            [0.7, 0.2, 0.8],
            [0.1, 0.75, 0.8],
            [0.95, 0.5, 0.1],
            [0.3, 0.3, 0.3],
        ];
        let blobs = (0..count)
            .map(|i| {
                let axis = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0f64)).normalize();
                Blob {
                    center: Vector3::from_fn(|_, _| rng.random_range(-0.6..0.6)),
                    radius: rng.random_range(0.1..0.22),
                    amplitude: rng.random_range(80.0..200.0),
                    color: palette[i % palette.len()],
                    stripe_color: palette[(i * 3 + 1) % palette.len()],
                    stripe_axis: axis * rng.random_range(18.0..30.0),
                }
            })
            .collect();
        Self { blobs }
    }
}

impl RadianceField for BlobScene {
    fn sample(&mut self, p: &Vector3<f64>, _dir: &Vector3<f64>) -> FieldSample {
        let mut sigma = 0.0;
        let mut rgb = [0.0; 3];
        for b in &self.blobs {
            let s = b.amplitude * (-(p - b.center).norm_squared() / (2.0 * b.radius * b.radius)).exp();
            sigma += s;
            let c = b.color_at(p);
            for k in 0..3 {
                rgb[k] += s * c[k];
            }
        }
        if sigma > 1e-12 {
            rgb.iter_mut().for_each(|c| *c /= sigma);
        }
        FieldSample { sigma, rgb }
    }
}

/// Camera-to-world pose at `eye` looking at `target`, x right, y down,
/// z forward, with `up` pointing roughly against image y.
pub fn look_at(eye: &Vector3<f64>, target: &Vector3<f64>, up: &Vector3<f64>) -> PoseSE3 {
    let f = (target - eye).normalize();
    let r = f.cross(up).normalize();
    let d = f.cross(&r);
    let rot = Matrix3::from_columns(&[r, d, f]);
    let mut m = Matrix3x4::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rot);
    m.set_column(3, eye);
    PoseSE3::from_matrix(&m, 1e-9).expect("look-at frame is orthonormal")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToySceneConfig {
    pub seed: u64,
    pub blobs: usize,
    pub train_views: usize,
    pub test_views: usize,
    pub size: u32,
    pub radius: f64,
    pub fov_x: f64,
    /// Marching step for the reference renders.
    pub step: f64,
}

impl Default for ToySceneConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            blobs: 12,
            train_views: 16,
            test_views: 4,
            size: 64,
            radius: 3.2,
            fov_x: 0.75,
            step: 0.01,
        }
    }
}

/// Bounded-scene training settings sized for the toy scene: a 12-level grid
/// up to resolution 128, about 96 marching steps across the box, and
/// schedules that decay over the 2000-iteration run.
pub fn toy_train_config() -> TrainConfig {
    let mut cfg = TrainConfig::for_experiment(Experiment::Bounded3d);
    cfg.iterations = 2000;
    cfg.grid_levels = 12;
    cfg.grid_log2_table = 15;
    cfg.grid_min_res = 4;
    cfg.grid_max_res = 128;
    cfg.step = 2.0 * 3f64.sqrt() / 96.0;
    cfg.batch_rays = 256;
    cfg.target_samples = 256 * 24;
    cfg.occupancy_res = 32;
    cfg.lr_network = LrSchedule::ExponentialDecay {
        base: 1e-2,
        final_lr: 1e-4,
        total_iters: 2000,
    };
    cfg.lr_poses = LrSchedule::ExponentialDecay {
        base: 2e-2,
        final_lr: 1e-4,
        total_iters: 2000,
    };
    cfg.log_every = 100;
    cfg
}

/// Training and held-out views of a random blob scene in `[-1,1]^3`,
/// rendered over a white background with exact poses.
pub fn make_toy_scene(cfg: &ToySceneConfig) -> Result<(BlobScene, Dataset, Dataset)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut scene = BlobScene::random(cfg.blobs, &mut rng);
    let intr = CameraIntrinsics::from_fov_x(cfg.fov_x, cfg.size, cfg.size)?;
    let up = Vector3::new(0.0, 0.0, 1.0);
    let mut camera = |i: usize, n: usize, offset: f64| {
        // spread azimuths evenly, elevations in a band above and below the equator
        let az = 2.0 * std::f64::consts::PI * (i as f64 + offset) / n as f64 + rng.random_range(-0.2..0.2);
        let el: f64 = rng.random_range(-0.5..0.8);
        let eye = Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()) * cfg.radius;
        look_at(&eye, &Vector3::zeros(), &up)
    };
    let train_poses: Vec<PoseSE3> = (0..cfg.train_views).map(|i| camera(i, cfg.train_views, 0.0)).collect();
    let test_poses: Vec<PoseSE3> = (0..cfg.test_views).map(|i| camera(i, cfg.test_views, 0.5)).collect();
    let bg = [1.0; 3];
    let mut render = |poses: &[PoseSE3]| -> Result<Vec<ImageBuf>> {
        poses
            .iter()
            .map(|p| render_field_image(&mut scene, &intr, p, cfg.step, bg))
            .collect()
    };
    let train_images = render(&train_poses)?;
    let test_images = render(&test_poses)?;
    let train = Dataset {
        name: "blobs".into(),
        images: train_images,
        intrinsics: intr,
        poses: Some(train_poses),
        background: bg,
    };
    let test = Dataset {
        name: "blobs-test".into(),
        images: test_images,
        intrinsics: intr,
        poses: Some(test_poses),
        background: bg,
    };
    Ok((scene, train, test))
}

/// Renders a full image of an analytic field inside `[-1,1]^3`.
pub fn render_field_image<F: RadianceField + ?Sized>(
    field: &mut F,
    intr: &CameraIntrinsics,
    pose: &PoseSE3,
    step: f64,
    background: [f64; 3],
) -> Result<ImageBuf> {
    let (w, h) = (intr.width, intr.height);
    let pixels: Vec<(u32, u32)> = (0..h).flat_map(|v| (0..w).map(move |u| (u, v))).collect();
    let rays: Vec<Ray> = generate_rays(intr, pose, &pixels)?;
    let aabb = (Vector3::repeat(-1.0), Vector3::repeat(1.0));
    let mut img = ImageBuf::new(w as usize, h as usize);
    for (ray, &(u, v)) in rays.iter().zip(&pixels) {
        let c = render_reference(field, ray, step, aabb, background);
        img.set(u as usize, v as usize, c.rgb.map(|x| x as f32));
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn look_at_points_forward() {
        let p = look_at(&Vector3::new(0.0, -4.0, 0.0), &Vector3::zeros(), &Vector3::z());
        let r = p.rotation();
        assert!((r.column(2) - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
        assert!((r.column(1) - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
        assert!((p.center() - Vector3::new(0.0, -4.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn small_scene_is_deterministic_and_shows_content() {
        let cfg = ToySceneConfig {
            train_views: 2,
            test_views: 1,
            size: 16,
            step: 0.05,
            ..Default::default()
        };
        let (_, a, _) = make_toy_scene(&cfg).unwrap();
        let (_, b, _) = make_toy_scene(&cfg).unwrap();
        assert_eq!(a.images, b.images);
        a.validate().unwrap();
        let center = a.images[0].get(8, 8);
        let corner = a.images[0].get(0, 0);
        assert!(corner.iter().all(|&c| c > 0.9999), "{corner:?}");
        assert!(center.iter().any(|&c| c < 0.9), "{center:?}");
    }
}
