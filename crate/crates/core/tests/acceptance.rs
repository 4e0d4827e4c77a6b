//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Runs as a plain binary (`harness = false`) so
//! the lines are never swallowed by output capture.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use hashba::c2f::{reweight_features, window_weight, C2fMode};
use hashba::geom::{contract, PoseSE3, Ray, SceneContraction};
use hashba::hashgrid::{level_resolutions, HashGrid, HashGridConfig};
use hashba::image::ImageBuf;
use hashba::metrics::{procrustes_align, psnr, ssim, Similarity};
use hashba::render::{
    composite, march_ray, march_reference, render_reference, render_samples, sample_weights, OccupancyGrid,
    RadianceField,
};
use hashba::train::{
    make_toy_scene, planar_trace_csv, procedural_image, run_homography_experiment, run_pose_refinement,
    toy_train_config, trace_csv, BlobScene, Experiment, PlanarSetup, ToySceneConfig, TrainConfig,
};
use nalgebra::{Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRAD_REL_TOL: f64 = 1e-3;
const GRAD_INSTANCES: usize = 50;
const GRAD_TIME_LIMIT: Duration = Duration::from_secs(60);
const OPACITY_TOL: f64 = 1e-3;
/// Floating-point slack on the sum of compositing weights; in exact
/// arithmetic the weights telescope to `1 - T_final`.
const WEIGHT_SUM_SLACK: f64 = 1e-12;
const PARTITION_TOL: f64 = 1e-6;
const HOMOGRAPHY_MAX_FRACTION: f64 = 0.01;
const HOMOGRAPHY_TIME_LIMIT: Duration = Duration::from_secs(15 * 60);
const TOY_ROTATION_FRACTION: f64 = 0.10;
const TOY_PSNR_GAIN_DB: f64 = 5.0;
const TOY_TIME_LIMIT: Duration = Duration::from_secs(30 * 60);
const PSNR_TOL_DB: f64 = 1e-6;
const SSIM_TOL: f64 = 1e-12;
const PROCRUSTES_TOL: f64 = 1e-6;
const ANGLE_TOL_DEG: f64 = 1e-4;
const SPHERE_CONTINUITY_TOL: f64 = 1e-4;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let parts = [
        ("hash-table", common::hash_table(GRAD_INSTANCES)),
        ("hash-input", common::hash_input(GRAD_INSTANCES)),
        ("mlp", common::mlp(GRAD_INSTANCES)),
        ("se3-rays", common::se3_rays(GRAD_INSTANCES)),
        ("compositing", common::compositing(GRAD_INSTANCES)),
        ("tape-graphs", common::tape_graphs(2 * GRAD_INSTANCES)),
    ];
    let elapsed = start.elapsed();
    let worst = parts.iter().map(|(_, r)| r.worst).fold(0.0, f64::max);
    let enough = parts.iter().all(|(_, r)| r.instances >= GRAD_INSTANCES && r.checks >= r.instances);
    let detail: Vec<String> = parts
        .iter()
        .map(|(n, r)| format!("{n} {:.1e} ({} checks)", r.worst, r.checks))
        .collect();
    outcome(
        worst <= GRAD_REL_TOL && enough && elapsed < GRAD_TIME_LIMIT,
        format!(
            "{}; worst rel {worst:.2e} <= {GRAD_REL_TOL:e}, {} instances each, {:.2}s < {}s",
            detail.join(", "),
            GRAD_INSTANCES,
            elapsed.as_secs_f64(),
            GRAD_TIME_LIMIT.as_secs()
        ),
    )
}

fn random_ray_through_box(rng: &mut ChaCha8Rng) -> Ray {
    let origin = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize() * rng.random_range(2.0..4.0);
    let target = Vector3::from_fn(|_, _| rng.random_range(-0.8..0.8));
    Ray {
        origin,
        direction: (target - origin).normalize(),
    }
}

fn rendering_physics() -> Outcome {
    let mut worst_opacity = 0.0f64;
    for sigma in [0.01, 0.5, 1.0, 3.7, 20.0] {
        for t in [0.1, 1.0, 2.5] {
            let n = 256;
            let deltas = vec![t / n as f64; n];
            let c = composite(&vec![sigma; n], &vec![[0.3, 0.6, 0.9]; n], &deltas, [0.0; 3]).unwrap();
            worst_opacity = worst_opacity.max((c.opacity - (1.0 - (-sigma * t).exp())).abs());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut scene = BlobScene::random(10, &mut rng);
    let (min, max) = (Vector3::repeat(-1.0), Vector3::repeat(1.0));
    let step = 2.0 * 3f64.sqrt() / 128.0;
    let mut max_weight_sum = 0.0f64;
    let mut negative = false;
    for _ in 0..10_000 {
        let ray = random_ray_through_box(&mut rng);
        let samples = march_reference(&ray, step, &min, &max);
        let sigmas: Vec<f64> = samples.iter().map(|s| scene.density(&ray.at(s.t))).collect();
        let deltas: Vec<f64> = samples.iter().map(|s| s.delta).collect();
        let w = sample_weights(&sigmas, &deltas);
        negative |= w.iter().any(|&v| v < 0.0);
        max_weight_sum = max_weight_sum.max(w.iter().sum());
    }

    let grid = OccupancyGrid::all_occupied(32, min, max).unwrap();
    let mut mismatches = 0;
    let culled_rays = 2000;
    for _ in 0..culled_rays {
        let ray = random_ray_through_box(&mut rng);
        let culled = render_samples(&mut scene, &ray, &march_ray(&ray, step, &grid), [1.0; 3], 0.0);
        let reference = render_reference(&mut scene, &ray, step, (min, max), [1.0; 3]);
        let same = culled.rgb.iter().zip(&reference.rgb).all(|(a, b)| a.to_bits() == b.to_bits())
            && culled.opacity.to_bits() == reference.opacity.to_bits();
        if !same {
            mismatches += 1;
        }
    }
    outcome(
        worst_opacity <= OPACITY_TOL && max_weight_sum <= 1.0 + WEIGHT_SUM_SLACK && !negative && mismatches == 0,
        format!(
            "homogeneous |opacity - (1-e^-st)| max {worst_opacity:.2e} <= {OPACITY_TOL:e} (256 samples); \
             max sum of weights over 1e4 rays 1{:+.1e} <= 1+{WEIGHT_SUM_SLACK:e}; \
             all-occupied culling bit mismatches {mismatches}/{culled_rays}",
            max_weight_sum - 1.0
        ),
    )
}

fn hash_encoding() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst = 0.0f64;
    for dim in 2..=4 {
        let config = HashGridConfig {
            dim,
            levels: 8,
            log2_table_size: 14,
            features_per_level: 2,
            base_resolution: 16,
            max_resolution: 512,
        };
        let grid: HashGrid<f32> = HashGrid::zeros(config).unwrap();
        for _ in 0..1000 {
            let x: Vec<f32> = (0..dim).map(|_| rng.random_range(0.0..=1.0)).collect();
            for level in grid.corner_weights(&x).unwrap() {
                let s: f64 = level.iter().map(|&w| w as f64).sum();
                worst = worst.max((s - 1.0).abs());
            }
        }
    }

    let mut collisions = 0usize;
    let mut checked = 0usize;
    for n in 1..=15u32 {
        let config = HashGridConfig {
            dim: 3,
            levels: 1,
            log2_table_size: 14,
            features_per_level: 2,
            base_resolution: n,
            max_resolution: n,
        };
        let grid: HashGrid<f32> = HashGrid::zeros(config).unwrap();
        if !grid.is_dense_level(0) {
            collisions += 1;
        }
        let mut seen = vec![false; 1 << 14];
        for x in 0..=n {
            for y in 0..=n {
                for z in 0..=n {
                    let row = grid.vertex_row(0, &[x, y, z]);
                    if std::mem::replace(&mut seen[row], true) {
                        collisions += 1;
                    }
                    checked += 1;
                }
            }
        }
    }

    let blender = HashGridConfig {
        dim: 3,
        levels: 16,
        log2_table_size: 19,
        features_per_level: 2,
        base_resolution: 14,
        max_resolution: 4069,
    };
    let res = level_resolutions(&blender);
    outcome(
        worst <= PARTITION_TOL && collisions == 0 && res[..3] == [14, 20, 29],
        format!(
            "partition of unity max |sum-1| {worst:.2e} <= {PARTITION_TOL:e} over 3x1000 points; \
             1:1 collisions {collisions} over {checked} vertices (N=1..15, d=3, T=2^14); \
             resolutions start {:?}",
            &res[..3]
        ),
    )
}

fn coarse_to_fine() -> Outcome {
    let mut windows_exact = true;
    for k in 0..18 {
        for (offset, expected) in [(0.0, 0.0), (0.5, 0.5), (1.0, 1.0)] {
            windows_exact &= window_weight(k, k as f64 + offset) == expected;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let levels = 18;
    let mut identity = true;
    let mut convex = true;
    for _ in 0..1000 {
        let f = rng.random_range(1..=4);
        let feats: Vec<f64> = (0..levels * f).map(|_| rng.random_range(-1.0..1.0)).collect();
        for mode in [C2fMode::Vanilla, C2fMode::Substitution] {
            let alpha = levels as f64 + rng.random_range(0.0..4.0);
            identity &= reweight_features(&feats, levels, alpha, mode) == feats;
            identity &= reweight_features(&feats, levels, levels as f64, mode) == feats;
        }
        let alpha = rng.random_range(0.0..levels as f64);
        let out = reweight_features(&feats, levels, alpha, C2fMode::Substitution);
        let src = if alpha <= 0.0 { 0 } else { (alpha.ceil() as usize - 1).min(levels - 1) };
        for k in 0..levels {
            let w = window_weight(k, alpha);
            for j in 0..f {
                let (a, b) = (feats[k * f + j], feats[src * f + j]);
                let expect = w * a + (1.0 - w) * b;
                let v = out[k * f + j];
                convex &= (0.0..=1.0).contains(&w)
                    && (v - expect).abs() <= 1e-12
                    && v >= a.min(b) - 1e-12
                    && v <= a.max(b) + 1e-12;
            }
        }
    }
    outcome(
        windows_exact && identity && convex,
        format!(
            "window at alpha-k in {{0,0.5,1}} exact: {windows_exact}; identity at alpha >= L: {identity}; \
             convex combination over 1000 vectors: {convex}"
        ),
    )
}

fn homography_recovery() -> Outcome {
    let config = TrainConfig::for_experiment(Experiment::Homography2d);
    let setup = PlanarSetup::default();
    let image = procedural_image(256, config.seed);
    let limit_px = HOMOGRAPHY_MAX_FRACTION * image.width() as f64;

    let start = Instant::now();
    let sub = run_homography_experiment(&image, &setup, &config, |_| {});
    let elapsed = start.elapsed();
    let off_config = TrainConfig {
        c2f_mode: C2fMode::Off,
        ..config.clone()
    };
    let off = run_homography_experiment(&image, &setup, &off_config, |_| {});
    match (sub, off) {
        (Ok(sub), Ok(off)) => outcome(
            sub.final_corner_error_px < limit_px
                && off.final_corner_error_px > sub.final_corner_error_px
                && elapsed < HOMOGRAPHY_TIME_LIMIT,
            format!(
                "substitution {:.3}px (from {:.3}px) < {limit_px:.2}px; c2f off {:.3}px > substitution; \
                 seed {}, {} iterations, {:.0}s < {}s",
                sub.final_corner_error_px,
                sub.initial_corner_error_px,
                off.final_corner_error_px,
                config.seed,
                config.iterations,
                elapsed.as_secs_f64(),
                HOMOGRAPHY_TIME_LIMIT.as_secs()
            ),
        ),
        (a, b) => outcome(false, format!("run failed: {:?} / {:?}", a.err(), b.err())),
    }
}

fn toy_pose_refinement() -> Outcome {
    let scene = ToySceneConfig::default();
    let (_, train, test) = match make_toy_scene(&scene) {
        Ok(v) => v,
        Err(e) => return outcome(false, format!("scene: {e}")),
    };
    let config = toy_train_config();
    let start = Instant::now();
    let refined = run_pose_refinement(&train, Some(&test), config.clone(), |_, _| {});
    let elapsed = start.elapsed();
    let frozen = run_pose_refinement(
        &train,
        Some(&test),
        TrainConfig {
            optimize_poses: false,
            ..config.clone()
        },
        |_, _| {},
    );
    let (refined, frozen) = match (refined, frozen) {
        (Ok(a), Ok(b)) => (a, b),
        (a, b) => return outcome(false, format!("run failed: {:?} / {:?}", a.err(), b.err())),
    };
    let (Some(initial), Some(last)) = (&refined.initial_report, &refined.final_report) else {
        return outcome(false, "no pose report".into());
    };
    let (psnr_refined, psnr_frozen) = (refined.mean_test_psnr(), frozen.mean_test_psnr());
    outcome(
        last.mean_rotation_deg < TOY_ROTATION_FRACTION * initial.mean_rotation_deg
            && psnr_refined >= psnr_frozen + TOY_PSNR_GAIN_DB
            && elapsed < TOY_TIME_LIMIT,
        format!(
            "{} views {}x{}, sigma {}, {} iterations: rotation {:.3} -> {:.3} deg (< {:.0}% of initial); \
             test PSNR {psnr_refined:.2} dB vs initial-pose baseline {psnr_frozen:.2} dB (+{:.2} >= {TOY_PSNR_GAIN_DB}); \
             {:.0}s < {}s",
            train.images.len(),
            scene.size,
            scene.size,
            config.pose_noise,
            config.iterations,
            initial.mean_rotation_deg,
            last.mean_rotation_deg,
            TOY_ROTATION_FRACTION * 100.0,
            psnr_refined - psnr_frozen,
            elapsed.as_secs_f64(),
            TOY_TIME_LIMIT.as_secs()
        ),
    )
}

fn metrics_oracles() -> Outcome {
    let a = ImageBuf::filled(16, 16, [0.0; 3]);
    let b = ImageBuf::filled(16, 16, [0.1; 3]);
    let p = psnr(&b, &a).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let textured = ImageBuf::from_fn(48, 40, |_, _| std::array::from_fn(|_| rng.random_range(0.0..1.0)));
    let s = ssim(&textured, &textured).unwrap();

    let est: Vec<PoseSE3> = (0..8)
        .map(|_| PoseSE3::from_params(std::array::from_fn(|_| rng.random_range(-1.5..1.5))))
        .collect();
    let truth = Similarity {
        scale: 2.0,
        rotation: *Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(1.0, 2.0, -0.5)), PI / 6.0).matrix(),
        translation: Vector3::new(1.0, 2.0, 3.0),
    };
    let gt: Vec<PoseSE3> = est.iter().map(|p| truth.apply_pose(p)).collect();
    let (sim, report) = procrustes_align(&est, &gt).unwrap();
    let sim_err = (sim.scale - truth.scale)
        .abs()
        .max((sim.rotation - truth.rotation).abs().max())
        .max((sim.translation - truth.translation).abs().max());
    let residual = report.mean_translation.max(report.mean_rotation_deg.to_radians());

    let tilt = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(0.3, -1.0, 0.2)), 10f64.to_radians());
    let rotated: Vec<PoseSE3> = gt
        .iter()
        .map(|p| {
            let mut m = p.matrix();
            let r = p.rotation() * tilt.matrix();
            m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
            PoseSE3::from_matrix(&m, 1e-9).unwrap()
        })
        .collect();
    let (_, tilted) = procrustes_align(&rotated, &gt).unwrap();
    let angle_err = tilted.rotation_deg.iter().map(|d| (d - 10.0).abs()).fold(0.0, f64::max);

    outcome(
        (p - 20.0).abs() <= PSNR_TOL_DB
            && (s - 1.0).abs() <= SSIM_TOL
            && sim_err <= PROCRUSTES_TOL
            && residual <= PROCRUSTES_TOL
            && angle_err <= ANGLE_TOL_DEG,
        format!(
            "PSNR(MSE 0.01) {p:.9} dB; SSIM(a,a) {s:.15}; similarity (2, 30 deg, (1,2,3)) error {sim_err:.1e}, \
             residual {residual:.1e} <= {PROCRUSTES_TOL:e}; injected 10 deg reported within {angle_err:.1e} <= {ANGLE_TOL_DEG:e}"
        ),
    )
}

fn inverted_sphere() -> Outcome {
    let c = contract(&Vector3::new(2.0, 0.0, 0.0), &SceneContraction::InvertedSphere).unwrap();
    let quad_ok = c.raw() == [1.0, 0.0, 0.0, 0.5];
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut worst_gap = 0.0f64;
    for _ in 0..1000 {
        let d = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize();
        let inner = contract(&(d * (1.0 - 1e-7)), &SceneContraction::InvertedSphere).unwrap();
        let outer = contract(&(d * (1.0 + 1e-7)), &SceneContraction::InvertedSphere).unwrap();
        for i in 0..4 {
            worst_gap = worst_gap.max((inner.raw[i] - outer.raw[i]).abs());
        }
    }
    let fourth: Vec<f64> = [1e2, 1e4, 1e6]
        .iter()
        .map(|&h| contract(&Vector3::new(0.0, 0.0, -h), &SceneContraction::InvertedSphere).unwrap().raw[3])
        .collect();
    let vanishing = fourth.windows(2).all(|w| w[1] < w[0]) && fourth[2] <= 1e-6;
    outcome(
        quad_ok && worst_gap <= SPHERE_CONTINUITY_TOL && vanishing,
        format!(
            "(2,0,0) -> {:?}; max jump across h=1 {worst_gap:.1e} <= {SPHERE_CONTINUITY_TOL:e}; \
             fourth component at h=1e2,1e4,1e6: {:.0e}, {:.0e}, {:.0e}",
            c.raw(),
            fourth[0],
            fourth[1],
            fourth[2]
        ),
    )
}

fn determinism() -> Outcome {
    let scene = ToySceneConfig {
        train_views: 6,
        test_views: 0,
        size: 16,
        blobs: 4,
        ..Default::default()
    };
    let (_, train, _) = make_toy_scene(&scene).unwrap();
    let config = TrainConfig {
        iterations: 40,
        batch_rays: 64,
        seed: 11,
        ..toy_train_config()
    };
    let toy_trace = || {
        run_pose_refinement(&train, None, config.clone(), |_, _| {})
            .map(|o| trace_csv(&o.trace))
            .unwrap_or_default()
    };
    let (t1, t2) = (toy_trace(), toy_trace());

    let planar = TrainConfig {
        iterations: 60,
        batch_rays: 256,
        seed: 11,
        ..TrainConfig::for_experiment(Experiment::Homography2d)
    };
    let image = procedural_image(64, planar.seed);
    let setup = PlanarSetup {
        patch_pixels: 24,
        ..Default::default()
    };
    let planar_trace = || {
        run_homography_experiment(&image, &setup, &planar, |_| {})
            .map(|o| planar_trace_csv(&o.trace))
            .unwrap_or_default()
    };
    let (h1, h2) = (planar_trace(), planar_trace());
    let ok = !t1.is_empty() && t1 == t2 && !h1.is_empty() && h1 == h2 && config.deterministic;
    outcome(
        ok,
        format!(
            "pose-refinement trace {} bytes identical: {}; homography trace {} bytes identical: {}",
            t1.len(),
            t1 == t2,
            h1.len(),
            h1 == h2
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("gradient suite", gradient_suite),
        ("rendering physics", rendering_physics),
        ("hash encoding", hash_encoding),
        ("coarse-to-fine", coarse_to_fine),
        ("metrics oracles", metrics_oracles),
        ("inverted sphere", inverted_sphere),
        ("determinism", determinism),
        ("homography recovery", homography_recovery),
        ("toy 3D pose refinement", toy_pose_refinement),
    ];
    // optional name filters, e.g. `cargo test --test acceptance -- physics`
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected: Vec<_> = criteria
        .into_iter()
        .filter(|(name, _)| filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str())))
        .collect();
    let mut failed = 0;
    for &(name, check) in &selected {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        eprintln!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    eprintln!("acceptance: {}/{} criteria passed", selected.len() - failed, selected.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
