//! Cameras, poses, planar warps and space contraction.

mod camera;
mod contraction;
mod homography;
mod posefile;
mod se3;

pub use camera::{generate_rays, CameraIntrinsics, Ray};
pub use contraction::{contract, contract_backward, Branch, Contracted, SceneContraction};
pub use homography::{apply_matrix, homography_apply, Homography2D, WarpJacobian};
pub use posefile::{read_poses, write_poses, PoseFileStyle};
pub use se3::{perturb_pose, se3_exp, se3_log, so3_exp, so3_log, PoseJacobian, PoseSE3};
