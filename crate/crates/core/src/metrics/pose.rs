use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geom::PoseSE3;

/// `x -> scale * rotation * x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Similarity {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            scale: 1.0 / self.scale,
            rotation: rt,
            translation: -(rt * self.translation) / self.scale,
        }
    }

    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p * self.scale + self.translation
    }

    /// Moves a camera-to-world pose into the target frame.
    pub fn apply_pose(&self, pose: &PoseSE3) -> PoseSE3 {
        let m = pose.matrix();
        let r = self.rotation * m.fixed_view::<3, 3>(0, 0);
        let c = self.apply_point(&m.column(3).into());
        let mut out = m;
        out.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        out.set_column(3, &c);
        PoseSE3::from_matrix(&out, 1e-6).expect("similarity keeps rotations rigid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseErrorReport {
    pub rotation_deg: Vec<f64>,
    pub translation: Vec<f64>,
    pub mean_rotation_deg: f64,
    pub mean_translation: f64,
    pub alignment: Similarity,
}

/// Geodesic angle between two rotations, in degrees.
pub fn rotation_error_deg(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let c = (((a * b.transpose()).trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    c.acos().to_degrees()
}

/// Aligns estimated camera centers to the ground truth with the closed-form
/// least-squares similarity and measures per-camera errors after alignment.
pub fn procrustes_align(estimated: &[PoseSE3], ground_truth: &[PoseSE3]) -> Result<(Similarity, PoseErrorReport)> {
    if estimated.len() != ground_truth.len() {
        return Err(Error::invalid(format!(
            "{} estimated poses vs {} ground-truth poses",
            estimated.len(),
            ground_truth.len()
        )));
    }
    let n = estimated.len();
    if n < 3 {
        return Err(Error::DegenerateConfiguration(format!("alignment needs 3 cameras, got {n}")));
    }
    let xs: Vec<Vector3<f64>> = estimated.iter().map(PoseSE3::center).collect();
    let ys: Vec<Vector3<f64>> = ground_truth.iter().map(PoseSE3::center).collect();
    let mean = |v: &[Vector3<f64>]| v.iter().sum::<Vector3<f64>>() / n as f64;
    let (mx, my) = (mean(&xs), mean(&ys));
    let mut cov = Matrix3::zeros();
    let mut sxx = Matrix3::zeros();
    let mut syy = Matrix3::zeros();
    for (x, y) in xs.iter().zip(&ys) {
        let (dx, dy) = (x - mx, y - my);
        cov += dy * dx.transpose();
        sxx += dx * dx.transpose();
        syy += dy * dy.transpose();
    }
    cov /= n as f64;
    let var_x = sxx.trace() / n as f64;
    for (spread, label) in [(sxx, "estimated"), (syy, "ground-truth")] {
        let mut sv: Vec<f64> = spread.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        if sv[0] <= 1e-18 || sv[1] <= 1e-10 * sv[0] {
            return Err(Error::DegenerateConfiguration(format!("{label} camera centers are collinear")));
        }
    }
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut s = Matrix3::identity();
    if (u.determinant() * v_t.determinant()) < 0.0 {
        s[(2, 2)] = -1.0;
    }
    let rotation = u * s * v_t;
    let scale = (Matrix3::from_diagonal(&svd.singular_values) * s).trace() / var_x;
    let translation = my - rotation * mx * scale;
    let sim = Similarity {
        scale,
        rotation,
        translation,
    };
    let mut rotation_deg = Vec::with_capacity(n);
    let mut trans = Vec::with_capacity(n);
    for (e, g) in estimated.iter().zip(ground_truth) {
        let aligned = sim.apply_pose(e);
        rotation_deg.push(rotation_error_deg(&aligned.rotation(), &g.rotation()));
        trans.push((aligned.center() - g.center()).norm());
    }
    let report = PoseErrorReport {
        mean_rotation_deg: rotation_deg.iter().sum::<f64>() / n as f64,
        mean_translation: trans.iter().sum::<f64>() / n as f64,
        rotation_deg,
        translation: trans,
        alignment: sim,
    };
    Ok((sim, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::so3_exp;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_poses(n: usize, seed: u64) -> Vec<PoseSE3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| PoseSE3::from_params(std::array::from_fn(|_| rng.random_range(-2.0..2.0))))
            .collect()
    }

    #[test]
    fn identical_sets() {
        let gt = random_poses(6, 1);
        let (sim, rep) = procrustes_align(&gt, &gt).unwrap();
        assert!((sim.scale - 1.0).abs() < 1e-9);
        assert!((sim.rotation - Matrix3::identity()).abs().max() < 1e-9);
        assert!(rep.mean_rotation_deg < 1e-5 && rep.mean_translation < 1e-9);
    }

    #[test]
    fn recovers_constructed_similarity() {
        let gt = random_poses(8, 2);
        let truth = Similarity {
            scale: 2.0,
            rotation: so3_exp(&Vector3::new(0.0, 0.0, 30f64.to_radians())),
            translation: Vector3::new(1.0, 2.0, 3.0),
        };
        // estimates live in a frame where gt = truth(estimate)
        let inv = Similarity {
            scale: 0.5,
            rotation: truth.rotation.transpose(),
            translation: -(truth.rotation.transpose() * truth.translation) * 0.5,
        };
        let est: Vec<PoseSE3> = gt.iter().map(|p| inv.apply_pose(p)).collect();
        let (sim, rep) = procrustes_align(&est, &gt).unwrap();
        assert!((sim.scale - 2.0).abs() < 1e-6);
        assert!((sim.rotation - truth.rotation).abs().max() < 1e-6);
        assert!((sim.translation - truth.translation).abs().max() < 1e-6);
        assert!(rep.translation.iter().all(|&t| t < 1e-6));
        assert!(rep.rotation_deg.iter().all(|&r| r < 1e-4));
    }

    #[test]
    fn injected_rotation_is_reported() {
        let gt = random_poses(5, 3);
        let mut est = gt.clone();
        let m = est[2].matrix();
        let extra = so3_exp(&(Vector3::new(1.0, -2.0, 0.5).normalize() * 10f64.to_radians()));
        let mut out = m;
        out.fixed_view_mut::<3, 3>(0, 0).copy_from(&(m.fixed_view::<3, 3>(0, 0) * extra));
        est[2] = PoseSE3::from_matrix(&out, 1e-9).unwrap();
        let (_, rep) = procrustes_align(&est, &gt).unwrap();
        assert!((rep.rotation_deg[2] - 10.0).abs() < 1e-4);
        assert!(rep.rotation_deg[0] < 1e-5);
    }

    #[test]
    fn degenerate_inputs() {
        let gt = random_poses(2, 4);
        assert!(matches!(procrustes_align(&gt, &gt), Err(Error::DegenerateConfiguration(_))));
        let line: Vec<PoseSE3> = (0..4)
            .map(|i| PoseSE3::from_params([0.0, 0.0, 0.0, i as f64, 2.0 * i as f64, 0.0]))
            .collect();
        assert!(matches!(procrustes_align(&line, &line), Err(Error::DegenerateConfiguration(_))));
    }

    #[test]
    fn rotation_error_range() {
        let a = so3_exp(&Vector3::new(0.0, std::f64::consts::PI, 0.0));
        assert!((rotation_error_deg(&a, &Matrix3::identity()) - 180.0).abs() < 1e-6);
    }
}
