//! Image quality and camera trajectory accuracy.

mod image_quality;
mod pose;
mod report;

pub use image_quality::{ms_ssim, ms_ssim_with, psnr, ssim, ssim_with, SsimParams, MS_SSIM_WEIGHTS};
pub use pose::{procrustes_align, rotation_error_deg, PoseErrorReport, Similarity};
pub use report::{format_table, MetricsRow};
