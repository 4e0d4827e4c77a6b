use nalgebra::Matrix3x4;

use crate::geom::{PoseJacobian, PoseSE3};

/// Optimized camera poses stored as world-frame corrections to fixed
/// initial poses: `pose_i = exp(delta_i) * init_i`. Rotations therefore
/// pivot about the world origin, which keeps them well separated from
/// translations when the scene is centered there.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSet {
    pub init: Vec<PoseSE3>,
    /// Six correction parameters per camera, flattened.
    pub delta: Vec<f64>,
}

impl PoseSet {
    pub fn new(init: Vec<PoseSE3>) -> Self {
        let delta = vec![0.0; 6 * init.len()];
        Self { init, delta }
    }

    pub fn len(&self) -> usize {
        self.init.len()
    }

    pub fn is_empty(&self) -> bool {
        self.init.is_empty()
    }

    fn delta_pose(&self, i: usize) -> PoseSE3 {
        PoseSE3::from_params(self.delta[6 * i..6 * i + 6].try_into().unwrap())
    }

    pub fn matrix(&self, i: usize) -> Matrix3x4<f64> {
        let a = self.init[i].matrix();
        let b = self.delta_pose(i).matrix();
        let rb = b.fixed_view::<3, 3>(0, 0);
        let mut m = Matrix3x4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&(rb * a.fixed_view::<3, 3>(0, 0)));
        m.set_column(3, &(rb * a.column(3) + b.column(3)));
        m
    }

    pub fn pose(&self, i: usize) -> PoseSE3 {
        PoseSE3::from_matrix(&self.matrix(i), 1e-6).expect("composition of rigid motions")
    }

    pub fn poses(&self) -> Vec<PoseSE3> {
        (0..self.len()).map(|i| self.pose(i)).collect()
    }

    /// Rotation, translation and their derivatives w.r.t. `delta_i`.
    pub fn jacobian(&self, i: usize) -> PoseJacobian {
        let a = self.init[i].matrix();
        let ra = a.fixed_view::<3, 3>(0, 0).into_owned();
        let ta: nalgebra::Vector3<f64> = a.column(3).into();
        let j = self.delta_pose(i).jacobian();
        let mut d_translation = j.d_translation;
        for k in 0..6 {
            d_translation[k] += j.d_rotation[k] * ta;
        }
        PoseJacobian {
            rotation: j.rotation * ra,
            translation: j.rotation * ta + j.translation,
            d_rotation: j.d_rotation.map(|d| d * ra),
            d_translation,
        }
    }
}
