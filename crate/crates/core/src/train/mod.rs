//! Optimization loops: pose refinement in 3D and planar warp recovery in 2D.

mod checkpoint;
mod config;
mod dataset;
mod model;
mod planar;
mod poses;
mod refine;
mod sampler;
mod state;
mod toy;

pub use config::{Experiment, TrainConfig};
pub use dataset::Dataset;
pub use model::{NeuralScene, RayWorkspace, SceneEvaluator, SceneGrads};
pub use poses::PoseSet;
pub use sampler::{stream_rng, PixelSampler};
pub use state::{StepStats, TrainState};
pub use toy::{look_at, make_toy_scene, render_field_image, toy_train_config, Blob, BlobScene, ToySceneConfig};
pub use refine::{
    continue_pose_refinement, evaluate_views, pose_report, run_pose_refinement, trace_csv, RefinementOutcome, TraceRow, ViewMetrics,
    TRACE_HEADER,
};
pub use planar::{
    corner_error_px, draw_patch_outlines, extract_patches, ground_truth_warps, planar_trace_csv, procedural_image,
    run_homography_experiment, HomographyOutcome, PlanarModel, PlanarSetup, PlanarTraceRow, PlanarWorkspace,
    PLANAR_TRACE_HEADER,
};
