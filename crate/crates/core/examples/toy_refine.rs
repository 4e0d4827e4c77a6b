use std::time::Instant;

use hashba::train::{make_toy_scene, run_pose_refinement, toy_train_config, ToySceneConfig};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut scene = ToySceneConfig::default();
    let mut rest = Vec::new();
    for kv in &args {
        match kv.split_once('=').unwrap() {
            ("scene.views", v) => scene.train_views = v.parse().unwrap(),
            ("scene.size", v) => scene.size = v.parse().unwrap(),
            ("scene.blobs", v) => scene.blobs = v.parse().unwrap(),
            _ => rest.push(kv.clone()),
        }
    }
    let (_, train, test) = make_toy_scene(&scene).unwrap();
    let mut cfg = toy_train_config();
    for kv in &rest {
        let (k, v) = kv.split_once('=').unwrap();
        cfg.set(k, v).unwrap();
    }
    let t = Instant::now();
    let out = run_pose_refinement(&train, Some(&test), cfg, |s, st| {
        if st.iteration % 100 == 0 {
            eprintln!(
                "it {} loss {:.5} rays {} samples {} occ {:.3} t {:.1}s",
                st.iteration,
                st.loss,
                st.rays,
                st.samples,
                s.occupancy.occupied_fraction(),
                t.elapsed().as_secs_f64()
            );
        }
    })
    .unwrap();
    for r in &out.trace {
        println!("{} {:.5} rot {:.3} trans {:.4}", r.iteration, r.loss, r.rotation_deg, r.translation);
    }
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.1}")).collect::<Vec<_>>().join(" ");
    println!("per-camera initial {}", fmt(&out.initial_report.as_ref().unwrap().rotation_deg));
    println!("per-camera final   {}", fmt(&out.final_report.as_ref().unwrap().rotation_deg));
    println!(
        "initial rot {:.3} final rot {:.3} psnr {:.2} time {:.1}s",
        out.initial_report.as_ref().unwrap().mean_rotation_deg,
        out.final_report.as_ref().unwrap().mean_rotation_deg,
        out.mean_test_psnr(),
        t.elapsed().as_secs_f64()
    );
}
