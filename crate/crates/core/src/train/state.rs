//! Joint optimization of the scene model and camera poses.

use std::collections::hash_map::DefaultHasher;
use std::hash::Hasher;

use nalgebra::Vector3;
use rand_chacha::ChaCha8Rng;

use super::config::{Experiment, TrainConfig};
use super::dataset::Dataset;
use super::model::{NeuralScene, RayWorkspace, SceneGrads};
use super::poses::PoseSet;
use super::sampler::{stream_rng, PixelSampler};
use crate::c2f::LevelBlend;
use crate::diff::{adam_step, AdamState};
use crate::error::{Error, Result};
use crate::geom::{perturb_pose, PoseSE3, Ray, SceneContraction};
use crate::image::ImageBuf;
use crate::render::{
    dynamic_batch_size, march_ray_into, march_reference, march_unbounded, render_samples, OccupancyGrid, Sample,
};

pub(crate) const STREAM_INIT: u64 = 0;
pub(crate) const STREAM_SAMPLER: u64 = 1;
pub(crate) const STREAM_OCCUPANCY: u64 = 2;

/// Consecutive steps above the blow-up ratio tolerated before aborting.
const DIVERGENCE_PATIENCE: usize = 100;
const DIVERGENCE_RATIO: f64 = 1e3;
const RENDER_MIN_TRANSMITTANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub iteration: usize,
    pub loss: f64,
    pub rays: usize,
    pub samples: usize,
    pub lr_network: f64,
    pub lr_poses: f64,
}

/// Everything that evolves during training.
pub struct TrainState {
    pub config: TrainConfig,
    pub scene: NeuralScene,
    pub poses: PoseSet,
    pub adam_grids: Vec<AdamState>,
    pub adam_field: AdamState,
    pub adam_poses: AdamState,
    pub occupancy: OccupancyGrid,
    pub iteration: usize,
    pub loss_history: Vec<f64>,
    pub sampler: PixelSampler,
    pub occupancy_rng: ChaCha8Rng,
    pub batch_rays: usize,
    pub(crate) over_limit_steps: usize,
    work: Option<(RayWorkspace, SceneGrads)>,
}

pub(crate) fn scene_box() -> (Vector3<f64>, Vector3<f64>) {
    (Vector3::repeat(-1.0), Vector3::repeat(1.0))
}

impl TrainState {
    /// Fresh state. Bounded scenes start from ground-truth poses whose
    /// world-to-camera parameters are perturbed by `pose_noise`; unbounded
    /// scenes start every camera at the identity.
    pub fn new(config: TrainConfig, data: &Dataset) -> Result<Self> {
        config.validate()?;
        data.validate()?;
        let mut rng = stream_rng(config.seed, STREAM_INIT);
        let scene = NeuralScene::for_experiment(&config, &mut rng)?;
        let init: Vec<PoseSE3> = match (config.experiment, &data.poses) {
            (Experiment::Bounded3d, Some(gt)) => gt
                .iter()
                .map(|p| perturb_pose(&p.inverse(), config.pose_noise, &mut rng).inverse())
                .collect(),
            (Experiment::Bounded3d, None) => {
                return Err(Error::invalid("bounded pose refinement needs initial poses"))
            }
            _ => vec![PoseSE3::identity(); data.images.len()],
        };
        let (min, max) = scene_box();
        let occupancy = OccupancyGrid::new(config.occupancy_res, min, max, 0.01 / config.step, 0.0)?;
        let adam_grids = scene.grids.iter().map(|g| AdamState::new(g.params().len())).collect();
        let adam_field = AdamState::new(scene.field.params().len());
        Ok(Self {
            adam_poses: AdamState::new(6 * init.len()),
            poses: PoseSet::new(init),
            adam_grids,
            adam_field,
            occupancy,
            iteration: 0,
            loss_history: Vec::new(),
            sampler: PixelSampler::new(data.total_pixels(), stream_rng(config.seed, STREAM_SAMPLER)),
            occupancy_rng: stream_rng(config.seed, STREAM_OCCUPANCY),
            batch_rays: config.batch_rays,
            over_limit_steps: 0,
            work: None,
            scene,
            config,
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        config: TrainConfig,
        scene: NeuralScene,
        poses: PoseSet,
        (adam_grids, adam_field, adam_poses): (Vec<AdamState>, AdamState, AdamState),
        occupancy: OccupancyGrid,
        (iteration, batch_rays, over_limit_steps): (usize, usize, usize),
        loss_history: Vec<f64>,
        sampler: PixelSampler,
        occupancy_rng: ChaCha8Rng,
    ) -> Self {
        Self {
            config,
            scene,
            poses,
            adam_grids,
            adam_field,
            adam_poses,
            occupancy,
            iteration,
            loss_history,
            sampler,
            occupancy_rng,
            batch_rays,
            over_limit_steps,
            work: None,
        }
    }

    pub fn progress(&self) -> f64 {
        self.iteration as f64 / self.config.iterations as f64
    }

    /// Coarse-to-fine blend for the current iteration.
    pub fn blend(&self) -> LevelBlend {
        let levels = self.scene.levels();
        match self.config.c2f_schedule() {
            Ok(s) => LevelBlend::new(self.config.c2f_mode, s.alpha(self.progress()), levels),
            Err(_) => LevelBlend::identity(levels),
        }
    }

    pub fn culling_active(&self) -> bool {
        self.iteration >= self.config.occupancy_warmup
    }

    fn march(&self, ray: &Ray, out: &mut Vec<Sample>) {
        let cull = self.culling_active();
        match self.scene.contraction {
            SceneContraction::Aabb { min, max } => {
                if cull {
                    march_ray_into(ray, self.config.step, &self.occupancy, out);
                } else {
                    *out = march_reference(ray, self.config.step, &min, &max);
                }
            }
            SceneContraction::InvertedSphere => march_unbounded(
                ray,
                self.config.step,
                self.config.far_samples,
                1e4,
                cull.then_some(&self.occupancy),
                out,
            ),
        }
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        self.sampler.next_batch(self.batch_rays)
    }

    /// Mean squared color error of a batch under the current parameters,
    /// without touching any state.
    pub fn batch_loss(&self, data: &Dataset, batch: &[usize]) -> Result<f64> {
        let blend = self.blend();
        let mut ws = self.scene.workspace();
        let mut samples = Vec::new();
        let jacobians: Vec<_> = (0..self.poses.len()).map(|i| self.poses.jacobian(i)).collect();
        let mut sse = 0.0;
        for &id in batch {
            let (img, u, v) = data.locate(id);
            let j = &jacobians[img];
            let ray = Ray {
                origin: j.translation,
                direction: j.rotation * data.intrinsics.camera_direction(u, v),
            };
            self.march(&ray, &mut samples);
            let c = self.scene.forward_ray(&ray, &samples, &blend, self.config.background, &mut ws)?;
            let gt = data.images[img].get(u as usize, v as usize);
            sse += (0..3).map(|k| (c.rgb[k] - f64::from(gt[k])).powi(2)).sum::<f64>();
        }
        Ok(sse / (3 * batch.len()) as f64)
    }

    pub fn train_step(&mut self, data: &Dataset) -> Result<StepStats> {
        let batch = self.next_batch();
        self.train_step_on(data, &batch)
    }

    /// One optimization step on the given pixel ids.
    pub fn train_step_on(&mut self, data: &Dataset, batch: &[usize]) -> Result<StepStats> {
        if batch.is_empty() {
            return Err(Error::invalid("empty training batch"));
        }
        let blend = self.blend();
        let (mut ws, mut grads) = self
            .work
            .take()
            .unwrap_or_else(|| (self.scene.workspace(), self.scene.zero_grads()));
        grads.zero();
        let want_poses = self.config.optimize_poses;
        let jacobians: Vec<_> = (0..self.poses.len()).map(|i| self.poses.jacobian(i)).collect();
        let mut pose_grad = vec![0.0; self.poses.delta.len()];
        let mut samples = Vec::new();
        let mut sse = 0.0;
        let mut total_samples = 0;
        let norm = 1.0 / (3 * batch.len()) as f64;
        let bg = self.config.background;
        for &id in batch {
            let (img, u, v) = data.locate(id);
            let j = &jacobians[img];
            let d_cam = data.intrinsics.camera_direction(u, v);
            let ray = Ray {
                origin: j.translation,
                direction: j.rotation * d_cam,
            };
            self.march(&ray, &mut samples);
            total_samples += samples.len();
            let c = match self.scene.forward_ray(&ray, &samples, &blend, bg, &mut ws) {
                Ok(c) => c,
                Err(e) => {
                    self.work = Some((ws, grads));
                    return Err(Error::Diverged {
                        iteration: self.iteration,
                        reason: e.to_string(),
                    });
                }
            };
            let gt = data.images[img].get(u as usize, v as usize);
            let diff: [f64; 3] = std::array::from_fn(|k| c.rgb[k] - f64::from(gt[k]));
            sse += diff.iter().map(|d| d * d).sum::<f64>();
            if samples.is_empty() {
                continue;
            }
            let d_rgb = diff.map(|d| 2.0 * d * norm);
            let (g_o, g_d) =
                self.scene
                    .backward_ray(&samples, &blend, bg, d_rgb, &mut ws, &mut grads, want_poses);
            if want_poses {
                let g = j.ray_param_grad(&d_cam, &g_o, &g_d);
                for k in 0..6 {
                    pose_grad[6 * img + k] += g[k];
                }
            }
        }
        let loss = sse * norm;
        if !loss.is_finite() {
            self.work = Some((ws, grads));
            return Err(Error::Diverged {
                iteration: self.iteration,
                reason: format!("loss is {loss}"),
            });
        }
        let lr_net = self.config.lr_network.lr_at(self.iteration);
        let lr_pose = self.config.lr_poses.lr_at(self.iteration);
        for ((grid, g), st) in self.scene.grids.iter_mut().zip(&grads.grids).zip(&mut self.adam_grids) {
            adam_step(grid.params_mut(), g, st, lr_net)?;
        }
        adam_step(self.scene.field.params_mut(), &grads.field, &mut self.adam_field, lr_net)?;
        if want_poses {
            adam_step(&mut self.poses.delta, &pose_grad, &mut self.adam_poses, lr_pose)?;
        }
        self.work = Some((ws, grads));

        let interval = self.config.occupancy_interval.max(1);
        if (self.iteration + 1) % interval == 0 {
            self.update_occupancy();
        }
        self.batch_rays = dynamic_batch_size(
            batch.len(),
            total_samples,
            self.config.target_samples,
            self.config.min_rays,
            self.config.max_rays,
        );
        let stats = StepStats {
            iteration: self.iteration,
            loss,
            rays: batch.len(),
            samples: total_samples,
            lr_network: lr_net,
            lr_poses: if want_poses { lr_pose } else { 0.0 },
        };
        self.iteration += 1;
        self.loss_history.push(loss);
        self.check_divergence(loss)?;
        Ok(stats)
    }

    fn check_divergence(&mut self, loss: f64) -> Result<()> {
        let initial = self.loss_history[0];
        if initial > 0.0 && loss > DIVERGENCE_RATIO * initial {
            self.over_limit_steps += 1;
        } else {
            self.over_limit_steps = 0;
        }
        if self.over_limit_steps >= DIVERGENCE_PATIENCE {
            return Err(Error::Diverged {
                iteration: self.iteration,
                reason: format!(
                    "loss {loss:.4e} above {DIVERGENCE_RATIO}x the initial {initial:.4e} for {} steps",
                    self.over_limit_steps
                ),
            });
        }
        Ok(())
    }

    pub fn update_occupancy(&mut self) {
        let blend = self.blend();
        let mut eval = self.scene.evaluator(&blend);
        self.occupancy
            .update(&mut eval, self.config.occupancy_decay, &mut self.occupancy_rng);
    }

    /// Renders a full image from an arbitrary camera-to-world pose.
    pub fn render(&self, data_intr: &crate::geom::CameraIntrinsics, pose: &PoseSE3) -> ImageBuf {
        let blend = self.blend();
        let mut eval = self.scene.evaluator(&blend);
        let m = pose.matrix();
        let r = m.fixed_view::<3, 3>(0, 0);
        let origin: Vector3<f64> = m.column(3).into();
        let (w, h) = (data_intr.width as usize, data_intr.height as usize);
        let mut img = ImageBuf::new(w, h);
        let mut samples = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let ray = Ray {
                    origin,
                    direction: r * data_intr.camera_direction(x as u32, y as u32),
                };
                self.march(&ray, &mut samples);
                let c = render_samples(
                    &mut eval,
                    &ray,
                    &samples,
                    self.config.background,
                    RENDER_MIN_TRANSMITTANCE,
                );
                img.set(x, y, c.rgb.map(|v| v as f32));
            }
        }
        img
    }

    /// Order-sensitive digest of all learnable parameters and poses.
    pub fn param_digest(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for g in &self.scene.grids {
            g.params().iter().for_each(|v| h.write_u32(v.to_bits()));
        }
        self.scene.field.params().iter().for_each(|v| h.write_u32(v.to_bits()));
        self.poses.delta.iter().for_each(|v| h.write_u64(v.to_bits()));
        h.finish()
    }
}
