//! Pose refinement runs with evaluation against ground truth.

use std::fmt::Write as _;

use super::config::TrainConfig;
use super::dataset::Dataset;
use super::state::{StepStats, TrainState};
use crate::error::{Error, Result};
use crate::image::ImageBuf;
use crate::metrics::{ms_ssim, procrustes_align, psnr, ssim, PoseErrorReport};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub loss: f64,
    pub rays: usize,
    pub samples: usize,
    pub lr_network: f64,
    pub lr_poses: f64,
    /// NaN when the poses cannot be aligned to ground truth.
    pub rotation_deg: f64,
    pub translation: f64,
}

pub const TRACE_HEADER: &str = "iteration,loss,rays,samples,lr_network,lr_poses,rotation_deg,translation";

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:.9e},{},{},{:.6e},{:.6e},{:.6e},{:.6e}",
            r.iteration, r.loss, r.rays, r.samples, r.lr_network, r.lr_poses, r.rotation_deg, r.translation
        );
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewMetrics {
    pub psnr: f64,
    pub ssim: f64,
    /// Absent when the image is too small for five scales.
    pub ms_ssim: Option<f64>,
}

pub struct RefinementOutcome {
    pub state: TrainState,
    pub initial_report: Option<PoseErrorReport>,
    pub final_report: Option<PoseErrorReport>,
    pub test_metrics: Vec<ViewMetrics>,
    pub test_renders: Vec<ImageBuf>,
    pub trace: Vec<TraceRow>,
    /// `(iteration, mean test PSNR)` at each periodic evaluation.
    pub evaluations: Vec<(usize, f64)>,
}

impl RefinementOutcome {
    pub fn mean_test_psnr(&self) -> f64 {
        mean(self.test_metrics.iter().map(|m| m.psnr))
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = it.collect();
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Procrustes report of the current poses, when ground truth exists and the
/// estimated camera centers are not degenerate.
pub fn pose_report(state: &TrainState, data: &Dataset) -> Option<PoseErrorReport> {
    let gt = data.poses.as_ref()?;
    procrustes_align(&state.poses.poses(), gt).ok().map(|(_, r)| r)
}

/// Renders held-out views after mapping their poses into the frame of the
/// estimated cameras.
pub fn evaluate_views(state: &TrainState, train: &Dataset, test: &Dataset) -> Result<(Vec<ViewMetrics>, Vec<ImageBuf>)> {
    let alignment = pose_report(state, train).map(|r| r.alignment.inverse());
    let Some(poses) = &test.poses else {
        return Ok((Vec::new(), Vec::new()));
    };
    let mut metrics = Vec::new();
    let mut renders = Vec::new();
    for (pose, gt) in poses.iter().zip(&test.images) {
        let p = alignment.map_or(*pose, |s| s.apply_pose(pose));
        let img = state.render(&test.intrinsics, &p);
        metrics.push(ViewMetrics {
            psnr: psnr(&img, gt)?,
            ssim: ssim(&img, gt)?,
            ms_ssim: ms_ssim(&img, gt).ok(),
        });
        renders.push(img);
    }
    Ok((metrics, renders))
}

/// Trains for `config.iterations` steps, calling `on_step` after each.
pub fn run_pose_refinement(
    data: &Dataset,
    test: Option<&Dataset>,
    config: TrainConfig,
    on_step: impl FnMut(&TrainState, &StepStats),
) -> Result<RefinementOutcome> {
    let state = TrainState::new(config, data)?;
    continue_pose_refinement(state, data, test, on_step)
}

/// Runs `state` from its current iteration up to `config.iterations`. The
/// initial report describes the poses as they were on entry.
pub fn continue_pose_refinement(
    mut state: TrainState,
    data: &Dataset,
    test: Option<&Dataset>,
    mut on_step: impl FnMut(&TrainState, &StepStats),
) -> Result<RefinementOutcome> {
    if state.poses.len() != data.images.len() || state.sampler.total() != data.total_pixels() {
        return Err(Error::invalid(format!(
            "state holds {} cameras but the dataset has {} images",
            state.poses.len(),
            data.images.len()
        )));
    }
    let initial_report = pose_report(&state, data);
    let mut trace = Vec::new();
    let mut evaluations = Vec::new();
    let log_every = state.config.log_every.max(1);
    let eval_every = state.config.eval_every;
    for _ in state.iteration..state.config.iterations {
        let stats = state.train_step(data)?;
        on_step(&state, &stats);
        let done = stats.iteration + 1;
        if stats.iteration % log_every == 0 || done == state.config.iterations {
            let rep = pose_report(&state, data);
            trace.push(TraceRow {
                iteration: stats.iteration,
                loss: stats.loss,
                rays: stats.rays,
                samples: stats.samples,
                lr_network: stats.lr_network,
                lr_poses: stats.lr_poses,
                rotation_deg: rep.as_ref().map_or(f64::NAN, |r| r.mean_rotation_deg),
                translation: rep.as_ref().map_or(f64::NAN, |r| r.mean_translation),
            });
        }
        if let Some(t) = test {
            if eval_every > 0 && done % eval_every == 0 && done < state.config.iterations {
                let (m, _) = evaluate_views(&state, data, t)?;
                evaluations.push((done, mean(m.iter().map(|v| v.psnr))));
            }
        }
    }
    let final_report = pose_report(&state, data);
    let (test_metrics, test_renders) = match test {
        Some(t) => evaluate_views(&state, data, t)?,
        None => (Vec::new(), Vec::new()),
    };
    if test.is_some() {
        evaluations.push((state.config.iterations, mean(test_metrics.iter().map(|v| v.psnr))));
    }
    Ok(RefinementOutcome {
        state,
        initial_report,
        final_report,
        test_metrics,
        test_renders,
        trace,
        evaluations,
    })
}
