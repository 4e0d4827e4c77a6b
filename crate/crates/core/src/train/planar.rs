//! Planar warp recovery: a 2D hash-encoded image field is fitted jointly
//! with the homographies that place several crops on the image.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::TrainConfig;
use super::sampler::{stream_rng, PixelSampler};
use super::state::{STREAM_INIT, STREAM_SAMPLER};
use crate::c2f::LevelBlend;
use crate::diff::{adam_step, AdamState};
use crate::error::{Error, Result};
use crate::field::{sigmoid, MlpLayout};
use crate::geom::{apply_matrix, Homography2D, WarpJacobian};
use crate::hashgrid::HashGrid;
use crate::image::ImageBuf;

#[derive(Debug, Clone, PartialEq)]
pub struct PlanarSetup {
    pub patches: usize,
    /// Half side of the square patch domain, in normalized image units
    /// (the image spans `[-1,1]` horizontally).
    pub patch_half: f64,
    /// Crop resolution per side.
    pub patch_pixels: usize,
    /// Standard deviation of the extra translation noise on the two shift
    /// parameters.
    pub translation_noise: f64,
    /// Standard deviation of every ground-truth warp parameter.
    pub warp_noise: f64,
    pub hidden: usize,
}

impl Default for PlanarSetup {
    fn default() -> Self {
        Self {
            patches: 5,
            patch_half: 0.5,
            patch_pixels: 96,
            translation_noise: 0.2,
            warp_noise: 0.1,
            hidden: 64,
        }
    }
}

/// Seeded ground-truth warps. Warp 0 is the identity; the others draw every
/// parameter from `N(0, warp_noise^2)` and add `N(0, translation_noise^2)`
/// to the shifts, redrawing until the warped patch lies inside the image.
/// Estimates start as centered crops, i.e. at the identity.
pub fn ground_truth_warps(setup: &PlanarSetup, rng: &mut impl Rng) -> Vec<Homography2D> {
    let normal = Normal::new(0.0, setup.warp_noise.max(0.0)).expect("finite noise");
    let shift = Normal::new(0.0, setup.translation_noise.max(0.0)).expect("finite noise");
    let inside = |w: &Homography2D| {
        let m = w.exp_matrix();
        corners(setup.patch_half).iter().all(|&c| {
            apply_matrix(&m, c).is_ok_and(|x| x[0].abs() < 0.98 && x[1].abs() < 0.98)
        })
    };
    let mut draw = || {
        let mut h: [f64; 8] = std::array::from_fn(|_| normal.sample(rng));
        h[0] += shift.sample(rng);
        h[1] += shift.sample(rng);
        Homography2D::from_params(h)
    };
    (0..setup.patches)
        .map(|k| {
            if k == 0 {
                return Homography2D::identity();
            }
            let mut w = draw();
            for _ in 0..1000 {
                if inside(&w) {
                    break;
                }
                w = draw();
            }
            w
        })
        .collect()
}

fn corners(half: f64) -> [[f64; 2]; 4] {
    [[-half, -half], [half, -half], [half, half], [-half, half]]
}

/// Mean corner displacement in pixels over the non-anchored warps.
pub fn corner_error_px(est: &[Homography2D], gt: &[Homography2D], half: f64, image_width: usize) -> f64 {
    let scale = image_width as f64 / 2.0;
    let mut total = 0.0;
    let mut count = 0;
    for (e, g) in est.iter().zip(gt).skip(1) {
        let (me, mg) = (e.exp_matrix(), g.exp_matrix());
        for c in corners(half) {
            match (apply_matrix(&me, c), apply_matrix(&mg, c)) {
                (Ok(a), Ok(b)) => total += ((a[0] - b[0]).hypot(a[1] - b[1])) * scale,
                _ => total += f64::INFINITY,
            }
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// Color at a normalized image position (x right, y down, both in `[-1,1]`
/// across the width; the height uses the same scale).
fn image_at(image: &ImageBuf, p: [f64; 2]) -> [f32; 3] {
    let s = image.width() as f64 / 2.0;
    image.sample_bilinear((p[0] + 1.0) * s, p[1] * s + image.height() as f64 / 2.0)
}

/// Crops each warped patch at `patch_pixels^2` resolution.
pub fn extract_patches(image: &ImageBuf, warps: &[Homography2D], setup: &PlanarSetup) -> Result<Vec<ImageBuf>> {
    let n = setup.patch_pixels;
    warps
        .iter()
        .map(|w| {
            let m = w.exp_matrix();
            let mut img = ImageBuf::new(n, n);
            for j in 0..n {
                for i in 0..n {
                    let x = apply_matrix(&m, patch_coord(setup, i, j))?;
                    img.set(i, j, image_at(image, x));
                }
            }
            Ok(img)
        })
        .collect()
}

fn patch_coord(setup: &PlanarSetup, i: usize, j: usize) -> [f64; 2] {
    let n = setup.patch_pixels as f64;
    let h = setup.patch_half;
    [-h + (i as f64 + 0.5) / n * 2.0 * h, -h + (j as f64 + 0.5) / n * 2.0 * h]
}

/// Multi-scale procedural test image: soft-edged colored disks of
/// log-uniformly distributed radii over a smooth gradient.
pub fn procedural_image(size: usize, seed: u64) -> ImageBuf {
    let mut rng = stream_rng(seed, 11);
    struct Disk {
        c: [f64; 2],
        r: f64,
        col: [f32; 3],
        a: f32,
    }
    let disks: Vec<Disk> = (0..160)
        .map(|_| Disk {
            c: [rng.random_range(-1.1..1.1), rng.random_range(-1.1..1.1)],
            r: (rng.random_range(0.015f64.ln()..0.35f64.ln())).exp(),
            col: [rng.random(), rng.random(), rng.random()],
            a: rng.random_range(0.5..1.0),
        })
        .collect();
    let s = size as f64 / 2.0;
    ImageBuf::from_fn(size, size, |x, y| {
        let p = [(x as f64 + 0.5) / s - 1.0, (y as f64 + 0.5) / s - 1.0];
        let mut c = [
            0.5 + 0.3 * p[0] as f32,
            0.5 + 0.3 * p[1] as f32,
            0.5 - 0.15 * (p[0] + p[1]) as f32,
        ];
        for d in &disks {
            let dist = (p[0] - d.c[0]).hypot(p[1] - d.c[1]);
            let edge = 1.5 / s;
            let cover = (((d.r - dist) / edge) * 0.5 + 0.5).clamp(0.0, 1.0) as f32 * d.a;
            if cover > 0.0 {
                for k in 0..3 {
                    c[k] = c[k] * (1.0 - cover) + d.col[k] * cover;
                }
            }
        }
        c
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarTraceRow {
    pub iteration: usize,
    pub loss: f64,
    pub corner_error_px: f64,
}

pub const PLANAR_TRACE_HEADER: &str = "iteration,loss,corner_error_px";

pub fn planar_trace_csv(rows: &[PlanarTraceRow]) -> String {
    let mut s = String::from(PLANAR_TRACE_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{:.9e},{:.6e}", r.iteration, r.loss, r.corner_error_px);
    }
    s
}

/// 2D image field: hash grid plus an MLP with a sigmoid RGB head.
pub struct PlanarModel {
    pub grid: HashGrid<f32>,
    pub mlp: MlpLayout,
    pub params: Vec<f32>,
}

impl PlanarModel {
    pub fn new(config: &TrainConfig, hidden: usize, rng: &mut impl Rng) -> Result<Self> {
        let grid = HashGrid::new(config.grid_config(2), rng)?;
        let mlp = MlpLayout::new(&[grid.output_len(), hidden, hidden, 3], 0);
        let mut params = vec![0.0; mlp.param_count()];
        mlp.init(&mut params, rng);
        Ok(Self { grid, mlp, params })
    }

    pub fn workspace(&self) -> PlanarWorkspace {
        let e = self.grid.output_len();
        let a = self.mlp.activation_len();
        PlanarWorkspace {
            enc: vec![0.0; e],
            blended: vec![0.0; e],
            d_blended: vec![0.0; e],
            d_enc: vec![0.0; e],
            acts: vec![0.0; a],
            scratch: vec![0.0; a],
        }
    }

    fn forward(&self, blend: &LevelBlend, x: [f64; 2], ws: &mut PlanarWorkspace) -> ([f32; 2], [f32; 3]) {
        let unit = x.map(|v| (((v + 1.0) * 0.5) as f32).clamp(0.0, 1.0));
        self.grid.encode_unchecked(&unit, &mut ws.enc);
        blend.apply(&ws.enc, &mut ws.blended);
        self.mlp.forward(&self.params, &ws.blended, &mut ws.acts);
        let o = self.mlp.output(&ws.acts);
        (unit, [sigmoid(o[0]), sigmoid(o[1]), sigmoid(o[2])])
    }

    /// Color at normalized position `x` (clamped to the image square).
    pub fn color(&self, blend: &LevelBlend, x: [f64; 2]) -> [f32; 3] {
        self.forward(blend, x, &mut self.workspace()).1
    }

    /// Forward and backward pass for one pixel under a loss of
    /// `norm * |rgb - target|^2`. Accumulates parameter gradients, writes the
    /// gradient w.r.t. `x` when requested and returns the squared error.
    #[allow(clippy::too_many_arguments)]
    pub fn pixel_step(
        &self,
        blend: &LevelBlend,
        x: [f64; 2],
        target: [f32; 3],
        norm: f32,
        grid_grad: &mut [f32],
        mlp_grad: &mut [f32],
        ws: &mut PlanarWorkspace,
        d_x: Option<&mut [f64; 2]>,
    ) -> f64 {
        let (unit, rgb) = self.forward(blend, x, ws);
        let mut sse = 0.0;
        let mut d_logit = [0.0f32; 3];
        for c in 0..3 {
            let diff = rgb[c] - target[c];
            sse += f64::from(diff * diff);
            d_logit[c] = 2.0 * diff * norm * rgb[c] * (1.0 - rgb[c]);
        }
        self.mlp.backward(
            &self.params,
            &ws.acts,
            &d_logit,
            mlp_grad,
            &mut ws.scratch,
            Some(&mut ws.d_blended),
        );
        blend.backward(&ws.d_blended, &mut ws.d_enc);
        let mut d_unit = [0.0f32; 2];
        let want_x = d_x.is_some();
        self.grid
            .backward_unchecked(&unit, &ws.d_enc, Some(grid_grad), want_x.then_some(&mut d_unit[..]));
        if let Some(d_x) = d_x {
            for a in 0..2 {
                let inside = (-1.0..=1.0).contains(&x[a]);
                d_x[a] = if inside { 0.5 * f64::from(d_unit[a]) } else { 0.0 };
            }
        }
        sse
    }
}

pub struct PlanarWorkspace {
    enc: Vec<f32>,
    blended: Vec<f32>,
    d_blended: Vec<f32>,
    d_enc: Vec<f32>,
    acts: Vec<f32>,
    scratch: Vec<f32>,
}

pub struct HomographyOutcome {
    pub estimated: Vec<Homography2D>,
    pub ground_truth: Vec<Homography2D>,
    pub trace: Vec<PlanarTraceRow>,
    pub initial_corner_error_px: f64,
    pub final_corner_error_px: f64,
    pub model: PlanarModel,
    pub final_blend: LevelBlend,
}

/// Fits the image field and per-patch warps. Patch 0 is held at the
/// identity to fix the gauge. The pixel batch size is `config.batch_rays`.
pub fn run_homography_experiment(
    image: &ImageBuf,
    setup: &PlanarSetup,
    config: &TrainConfig,
    mut on_step: impl FnMut(&PlanarTraceRow),
) -> Result<HomographyOutcome> {
    config.validate()?;
    if setup.patches == 0 || setup.patch_pixels == 0 {
        return Err(Error::invalid("need at least one patch with pixels"));
    }
    let mut rng = stream_rng(config.seed, STREAM_INIT);
    let gt = ground_truth_warps(setup, &mut rng);
    let crops = extract_patches(image, &gt, setup)?;
    let mut model = PlanarModel::new(config, setup.hidden, &mut rng)?;
    let mut warps = vec![0.0f64; 8 * setup.patches];
    let per_patch = setup.patch_pixels * setup.patch_pixels;
    let mut sampler = PixelSampler::new(per_patch * setup.patches, stream_rng(config.seed, STREAM_SAMPLER));
    let schedule = config.c2f_schedule()?;
    let levels = config.grid_levels;

    let mut grid_grad = vec![0.0f32; model.grid.params().len()];
    let mut mlp_grad = vec![0.0f32; model.params.len()];
    let mut warp_grad = vec![0.0f64; warps.len()];
    let mut adam_grid = AdamState::new(grid_grad.len());
    let mut adam_mlp = AdamState::new(mlp_grad.len());
    let mut adam_warp = AdamState::new(warps.len());
    let mut ws = model.workspace();
    let mut d_x = [0.0f64; 2];

    let current = |w: &[f64]| -> Vec<Homography2D> {
        w.chunks(8)
            .map(|c| Homography2D::from_params(c.try_into().unwrap()))
            .collect()
    };
    let initial_corner_error_px = corner_error_px(&current(&warps), &gt, setup.patch_half, image.width());
    let mut trace = Vec::with_capacity(config.iterations);
    let mut blend = LevelBlend::identity(levels);
    for it in 0..config.iterations {
        blend = LevelBlend::new(config.c2f_mode, schedule.alpha(it as f64 / config.iterations as f64), levels);
        let jacs: Vec<WarpJacobian> = current(&warps).iter().map(Homography2D::jacobian).collect();
        grid_grad.fill(0.0);
        mlp_grad.fill(0.0);
        warp_grad.fill(0.0);
        let batch = sampler.next_batch(config.batch_rays);
        let norm = 1.0 / (3 * batch.len()) as f32;
        let mut sse = 0.0f64;
        for &id in &batch {
            let (k, local) = (id / per_patch, id % per_patch);
            let (i, j) = (local % setup.patch_pixels, local / setup.patch_pixels);
            let u = patch_coord(setup, i, j);
            let x = apply_matrix(&jacs[k].matrix, u).map_err(|e| Error::Diverged {
                iteration: it,
                reason: e.to_string(),
            })?;
            let target = crops[k].get(i, j);
            sse += model.pixel_step(&blend, x, target, norm, &mut grid_grad, &mut mlp_grad, &mut ws, (k > 0).then_some(&mut d_x));
            if k > 0 {
                let (_, gw) = jacs[k].apply_with_grad(u, d_x)?;
                for p in 0..8 {
                    warp_grad[8 * k + p] += gw[p];
                }
            }
        }
        let loss = sse / (3 * batch.len()) as f64;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                iteration: it,
                reason: format!("loss is {loss}"),
            });
        }
        let lr_net = config.lr_network.lr_at(it);
        adam_step(model.grid.params_mut(), &grid_grad, &mut adam_grid, lr_net)?;
        adam_step(&mut model.params, &mlp_grad, &mut adam_mlp, lr_net)?;
        adam_step(&mut warps, &warp_grad, &mut adam_warp, config.lr_poses.lr_at(it))?;
        debug_assert!(warps[..8].iter().all(|&v| v == 0.0), "anchored warp moved");
        let row = PlanarTraceRow {
            iteration: it,
            loss,
            corner_error_px: corner_error_px(&current(&warps), &gt, setup.patch_half, image.width()),
        };
        on_step(&row);
        trace.push(row);
    }
    let estimated = current(&warps);
    Ok(HomographyOutcome {
        final_corner_error_px: corner_error_px(&estimated, &gt, setup.patch_half, image.width()),
        initial_corner_error_px,
        estimated,
        ground_truth: gt,
        trace,
        model,
        final_blend: blend,
    })
}

/// Draws patch outlines onto a copy of `image`: ground truth in green,
/// estimates in red.
pub fn draw_patch_outlines(image: &ImageBuf, outcome: &HomographyOutcome, half: f64) -> ImageBuf {
    let mut out = image.clone();
    let s = image.width() as f64 / 2.0;
    let mut draw = |w: &Homography2D, col: [f32; 3]| {
        let m = w.exp_matrix();
        let cs = corners(half);
        for e in 0..4 {
            let (a, b) = (cs[e], cs[(e + 1) % 4]);
            for t in 0..=400 {
                let f = t as f64 / 400.0;
                let u = [a[0] + (b[0] - a[0]) * f, a[1] + (b[1] - a[1]) * f];
                if let Ok(x) = apply_matrix(&m, u) {
                    let px = ((x[0] + 1.0) * s).floor();
                    let py = (x[1] * s + image.height() as f64 / 2.0).floor();
                    if px >= 0.0 && py >= 0.0 && (px as usize) < out.width() && (py as usize) < out.height() {
                        out.set(px as usize, py as usize, col);
                    }
                }
            }
        }
    };
    for w in &outcome.ground_truth {
        draw(w, [0.0, 1.0, 0.0]);
    }
    for w in &outcome.estimated {
        draw(w, [1.0, 0.0, 0.0]);
    }
    out
}
