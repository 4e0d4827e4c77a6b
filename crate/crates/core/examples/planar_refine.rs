use std::time::Instant;

use hashba::train::{corner_error_px, procedural_image, run_homography_experiment, Experiment, PlanarSetup, TrainConfig};

fn main() {
    let mut cfg = TrainConfig::for_experiment(Experiment::Homography2d);
    let mut setup = PlanarSetup::default();
    for kv in std::env::args().skip(1) {
        let (k, v) = kv.split_once('=').unwrap();
        match k {
            "patch_pixels" => setup.patch_pixels = v.parse().unwrap(),
            "warp_noise" => setup.warp_noise = v.parse().unwrap(),
            "translation_noise" => setup.translation_noise = v.parse().unwrap(),
            "patch_half" => setup.patch_half = v.parse().unwrap(),
            _ => cfg.set(k, v).unwrap(),
        }
    }
    let image = procedural_image(256, cfg.seed);
    let t = Instant::now();
    let out = run_homography_experiment(&image, &setup, &cfg, |r| {
        if r.iteration % 250 == 0 {
            eprintln!("it {} loss {:.5} corner {:.3}px t {:.1}s", r.iteration, r.loss, r.corner_error_px, t.elapsed().as_secs_f64());
        }
    })
    .unwrap();
    let per: Vec<String> = (1..setup.patches)
        .map(|k| {
            format!(
                "{:.1}",
                corner_error_px(
                    &[out.estimated[0], out.estimated[k]],
                    &[out.ground_truth[0], out.ground_truth[k]],
                    setup.patch_half,
                    256,
                )
            )
        })
        .collect();
    println!("per-patch {}", per.join(" "));
    println!(
        "mode {} initial {:.3}px final {:.3}px time {:.1}s",
        cfg.c2f_mode,
        out.initial_corner_error_px,
        out.final_corner_error_px,
        t.elapsed().as_secs_f64()
    );
}
