use hashba::c2f::{window_weight, C2fMode, LevelBlend};
use hashba::geom::{contract, se3_exp, se3_log, Homography2D, PoseSE3, SceneContraction};
use hashba::hashgrid::{HashGrid, HashGridConfig};
use hashba::metrics::{procrustes_align, Similarity};
use hashba::render::{composite, sample_weights};
use nalgebra::{Rotation3, Vector3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid(dim: usize, levels: usize, seed: u64) -> HashGrid<f64> {
    let config = HashGridConfig {
        dim,
        levels,
        log2_table_size: 8,
        features_per_level: 2,
        base_resolution: 3,
        max_resolution: 64,
    };
    HashGrid::new(config, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

proptest! {
    #[test]
    fn corner_weights_partition_unity(
        dim in 1usize..=4,
        levels in 1usize..=5,
        x in prop::collection::vec(0.0f64..=1.0, 4),
    ) {
        let g = grid(dim, levels, 1);
        for level in g.corner_weights(&x[..dim]).unwrap() {
            prop_assert_eq!(level.len(), 1 << dim);
            prop_assert!(level.iter().all(|&w| w >= -1e-15));
            prop_assert!((level.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn encoding_is_bounded_by_table(
        x in prop::collection::vec(0.0f64..=1.0, 3),
        seed in 0u64..1000,
    ) {
        let g = grid(3, 4, seed);
        let mut out = vec![0.0; g.output_len()];
        g.encode(&x, &mut out).unwrap();
        let bound = g.params().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(out.iter().all(|v| v.abs() <= bound + 1e-12));
    }

    #[test]
    fn compositing_weights_are_a_subprobability(
        samples in prop::collection::vec((0.0f64..200.0, 1e-4f64..0.2), 1..64),
    ) {
        let (s, d): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
        let w = sample_weights(&s, &d);
        prop_assert!(w.iter().all(|&v| v >= 0.0));
        let total: f64 = w.iter().sum();
        prop_assert!(total <= 1.0 + 1e-12);
        let c = composite(&s, &vec![[0.0; 3]; s.len()], &d, [1.0; 3]).unwrap();
        prop_assert!((total + c.transmittance - 1.0).abs() < 1e-12);
        prop_assert!((c.rgb[0] - c.transmittance).abs() < 1e-12);
    }

    #[test]
    fn window_is_monotone_and_bounded(k in 0usize..20, a in -2.0f64..25.0, da in 0.0f64..3.0) {
        let (w0, w1) = (window_weight(k, a), window_weight(k, a + da));
        prop_assert!((0.0..=1.0).contains(&w0));
        prop_assert!(w1 >= w0);
    }

    #[test]
    fn substitution_is_a_convex_combination(
        levels in 1usize..12,
        f in 1usize..4,
        alpha in -1.0f64..14.0,
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let feats: Vec<f64> = (0..levels * f).map(|_| rng.random_range(-1.0..1.0)).collect();
        let blend = LevelBlend::new(C2fMode::Substitution, alpha, levels);
        let mut out = vec![0.0; feats.len()];
        blend.apply(&feats, &mut out);
        let src = blend.source_level();
        for k in 0..levels {
            for j in 0..f {
                let (a, b) = (feats[k * f + j], feats[src * f + j]);
                let v = out[k * f + j];
                prop_assert!(v >= a.min(b) - 1e-12 && v <= a.max(b) + 1e-12);
            }
        }
        if alpha >= levels as f64 {
            prop_assert_eq!(out, feats);
        }
    }

    #[test]
    fn blend_backward_is_adjoint(
        levels in 1usize..10,
        alpha in -1.0f64..12.0,
        vanilla in any::<bool>(),
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = levels * 2;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mode = if vanilla { C2fMode::Vanilla } else { C2fMode::Substitution };
        let blend = LevelBlend::new(mode, alpha, levels);
        let mut y = vec![0.0; n];
        blend.apply(&x, &mut y);
        let mut g = vec![0.0; n];
        blend.backward(&u, &mut g);
        let lhs: f64 = y.iter().zip(&u).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&g).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn se3_log_inverts_exp(p in prop::array::uniform6(-1.0f64..1.0)) {
        let q = se3_log(&se3_exp(&p));
        for i in 0..6 {
            prop_assert!((p[i] - q[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn pose_inverse_undoes_pose(p in prop::array::uniform6(-2.0f64..2.0)) {
        let a = PoseSE3::from_params(p);
        let b = a.inverse();
        let x = Vector3::new(0.3, -1.2, 0.7);
        let ma = a.matrix();
        let mb = b.matrix();
        let y = ma.fixed_view::<3, 3>(0, 0) * x + ma.column(3);
        let back = mb.fixed_view::<3, 3>(0, 0) * y + mb.column(3);
        prop_assert!((back - x).norm() < 1e-9);
    }

    #[test]
    fn inverted_sphere_lands_in_unit_hypercube(
        dir in prop::array::uniform3(-1.0f64..1.0),
        r in 0.0f64..1e6,
    ) {
        let v = Vector3::from(dir);
        prop_assume!(v.norm() > 1e-3);
        let p = v.normalize() * r;
        let c = contract(&p, &SceneContraction::InvertedSphere).unwrap();
        prop_assert_eq!(c.dim, 4);
        prop_assert!(c.unit().iter().all(|u| (0.0..=1.0).contains(u)));
    }

    #[test]
    fn homography_inverse_round_trips(
        h in prop::array::uniform8(-0.2f64..0.2),
        uv in prop::array::uniform2(-1.0f64..1.0),
    ) {
        let w = Homography2D::from_params(h);
        let y = w.apply(uv).unwrap();
        let back = w.inverse().apply(y).unwrap();
        prop_assert!((back[0] - uv[0]).abs() < 1e-9 && (back[1] - uv[1]).abs() < 1e-9);
    }

    #[test]
    fn procrustes_removes_any_similarity(
        axis in prop::array::uniform3(-1.0f64..1.0),
        angle in -3.0f64..3.0,
        scale in 0.2f64..5.0,
        t in prop::array::uniform3(-5.0f64..5.0),
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let a = Vector3::from(axis);
        prop_assume!(a.norm() > 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gt: Vec<PoseSE3> = (0..6)
            .map(|_| PoseSE3::from_params(std::array::from_fn(|_| rng.random_range(-1.5..1.5))))
            .collect();
        let s = Similarity {
            scale,
            rotation: *Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(a), angle).matrix(),
            translation: Vector3::from(t),
        };
        let est: Vec<PoseSE3> = gt.iter().map(|p| s.apply_pose(p)).collect();
        let (_, report) = procrustes_align(&est, &gt).unwrap();
        prop_assert!(report.mean_rotation_deg < 1e-5);
        prop_assert!(report.mean_translation < 1e-7);
    }
}
