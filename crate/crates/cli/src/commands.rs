use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use hashba::c2f::C2fMode;
use hashba::geom::{read_poses, write_poses, CameraIntrinsics, PoseFileStyle, PoseSE3};
use hashba::metrics::{format_table, procrustes_align, MetricsRow};
use hashba::train::{
    continue_pose_refinement, draw_patch_outlines, evaluate_views, make_toy_scene, planar_trace_csv,
    procedural_image, run_homography_experiment, toy_train_config, trace_csv, Dataset, Experiment, PlanarSetup,
    ToySceneConfig, TrainConfig, TrainState,
};
use hashba::image::ImageBuf;

use crate::blender::{load_blender_dataset, write_blender_dataset};
use crate::error::{CliError, CliResult};
use crate::fsio::{read_text, write_atomic, write_atomic_with};
use crate::png::{read_png, write_png};
use crate::{
    Command, ConfigArgs, ContractionArg, EvalArgs, HomographyArgs, Preset, RenderArgs, ToySceneArgs, TrainArgs,
    OUT_ENV,
};

pub fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Train(a) => train(a),
        Command::Render(a) => render(a),
        Command::Eval(a) => eval(a),
        Command::Homography(a) => homography(a),
        Command::MakeToyScene(a) => make_toy(a),
    }
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("hashba-out"))
}

fn apply_config(cfg: &mut TrainConfig, args: &ConfigArgs) -> CliResult<()> {
    if let Some(path) = &args.config {
        cfg.apply_text(&read_text(path)?)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    }
    for kv in &args.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim()).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.iterations {
        cfg.iterations = n;
    }
    if let Some(m) = &args.c2f {
        cfg.c2f_mode = m.parse::<C2fMode>().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))
}

fn load_checkpoint(path: &Path) -> CliResult<TrainState> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    TrainState::load_checkpoint(&mut BufReader::new(f))
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn save_checkpoint(path: &Path, state: &TrainState) -> CliResult<()> {
    write_atomic_with(path, |w| state.save_checkpoint(w).map_err(CliError::from))
}

fn read_pose_file(path: &Path) -> CliResult<Vec<PoseSE3>> {
    read_poses(&read_text(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn optional_split(dir: &Path, split: &str, background: [f64; 3]) -> CliResult<Option<Dataset>> {
    if dir.join(format!("transforms_{split}.json")).is_file() {
        load_blender_dataset(dir, split, background).map(Some)
    } else {
        Ok(None)
    }
}

fn train(args: TrainArgs) -> CliResult<()> {
    let experiment = match args.contraction {
        ContractionArg::Aabb => Experiment::Bounded3d,
        ContractionArg::InvertedSphere => Experiment::Unbounded3d,
    };
    let state = match &args.resume {
        Some(path) => {
            let mut s = load_checkpoint(path)?;
            apply_config(&mut s.config, &args.config)?;
            s
        }
        None => {
            let mut cfg = match args.preset {
                Preset::Full => TrainConfig::for_experiment(experiment),
                Preset::Toy => toy_train_config(),
            };
            cfg.experiment = experiment;
            apply_config(&mut cfg, &args.config)?;
            let data = load_blender_dataset(&args.data, "train", cfg.background)?;
            TrainState::new(cfg, &data)?
        }
    };
    let bg = state.config.background;
    let data = load_blender_dataset(&args.data, "train", bg)?;
    let test = optional_split(&args.data, "test", bg)?;
    let out = out_dir(args.out);
    write_atomic(&out.join("config.txt"), state.config.to_text().as_bytes())?;

    let ckpt = out.join("checkpoint.bin");
    let every = args.checkpoint_every;
    let quiet = args.quiet;
    let log_every = state.config.log_every.max(1);
    let mut save_error = None;
    let outcome = continue_pose_refinement(state, &data, test.as_ref(), |s, st| {
        if !quiet && st.iteration % log_every == 0 {
            eprintln!("iter {:>6}  loss {:.6}  rays {}", st.iteration, st.loss, st.rays);
        }
        if every > 0 && (st.iteration + 1) % every == 0 && save_error.is_none() {
            save_error = save_checkpoint(&ckpt, s).err();
        }
    })?;
    if let Some(e) = save_error {
        return Err(e);
    }
    save_checkpoint(&ckpt, &outcome.state)?;
    write_atomic(&out.join("trace.csv"), trace_csv(&outcome.trace).as_bytes())?;
    let poses = write_poses(&outcome.state.poses.poses(), PoseFileStyle::Params);
    write_atomic(&out.join("poses.txt"), poses.as_bytes())?;
    for (i, img) in outcome.test_renders.iter().enumerate() {
        write_png(&out.join(format!("test_{i:03}.png")), img)?;
    }
    if !quiet {
        if let (Some(a), Some(b)) = (&outcome.initial_report, &outcome.final_report) {
            eprintln!(
                "rotation error {:.3} -> {:.3} deg, translation {:.4} -> {:.4}",
                a.mean_rotation_deg, b.mean_rotation_deg, a.mean_translation, b.mean_translation
            );
        }
        if !outcome.test_metrics.is_empty() {
            eprintln!("test PSNR {:.2} dB", outcome.mean_test_psnr());
        }
        eprintln!("wrote {}", out.display());
    }
    Ok(())
}

fn render(args: RenderArgs) -> CliResult<()> {
    let state = load_checkpoint(&args.checkpoint)?;
    let intr = match (&args.data, args.width, args.height, args.fov_x) {
        (Some(dir), ..) => load_blender_dataset(dir, "train", state.config.background)?.intrinsics,
        (None, Some(w), Some(h), Some(fov)) => {
            CameraIntrinsics::from_fov_x(fov, w, h).map_err(|e| CliError::Usage(e.to_string()))?
        }
        _ => return Err(CliError::Usage("give --data or all of --width, --height, --fov-x".into())),
    };
    let poses = read_pose_file(&args.poses)?;
    let out = out_dir(args.out);
    for (i, p) in poses.iter().enumerate() {
        write_png(&out.join(format!("view_{i:03}.png")), &state.render(&intr, p))?;
    }
    Ok(())
}

fn eval(args: EvalArgs) -> CliResult<()> {
    let state = args.checkpoint.as_deref().map(load_checkpoint).transpose()?;
    let bg = state.as_ref().map_or([1.0; 3], |s| s.config.background);
    let data = load_blender_dataset(&args.data, "train", bg)?;
    let gt = data.poses.as_ref().expect("manifests always carry poses");
    let estimated = match (&args.poses, &state) {
        (Some(p), _) => read_pose_file(p)?,
        (None, Some(s)) => s.poses.poses(),
        (None, None) => unreachable!("clap requires --poses or --checkpoint"),
    };
    if estimated.len() != gt.len() {
        return Err(CliError::Data(format!(
            "{} estimated poses for {} training images",
            estimated.len(),
            gt.len()
        )));
    }
    let (_, report) = procrustes_align(&estimated, gt)?;
    let mut row = MetricsRow {
        scene: data.name.clone(),
        rotation_deg: report.mean_rotation_deg,
        translation: report.mean_translation,
        psnr: f64::NAN,
        ssim: f64::NAN,
        ms_ssim: f64::NAN,
    };
    if let (Some(s), Some(test)) = (&state, optional_split(&args.data, "test", bg)?) {
        let (m, _) = evaluate_views(s, &data, &test)?;
        let mean = |f: &dyn Fn(&hashba::train::ViewMetrics) -> Option<f64>| {
            let v: Vec<f64> = m.iter().filter_map(f).collect();
            if v.is_empty() {
                f64::NAN
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        row.psnr = mean(&|v| Some(v.psnr));
        row.ssim = mean(&|v| Some(v.ssim));
        row.ms_ssim = mean(&|v| v.ms_ssim);
    }
    let mut table = format_table(&[row]);
    let _ = writeln!(table);
    let _ = writeln!(table, "{:<8} {:>12} {:>12}", "camera", "rotation_deg", "translation");
    for (i, (r, t)) in report.rotation_deg.iter().zip(&report.translation).enumerate() {
        let _ = writeln!(table, "{i:<8} {r:>12.4} {t:>12.5}");
    }
    print!("{table}");
    let out = out_dir(args.out);
    write_atomic(&out.join("metrics.txt"), table.as_bytes())
}

fn homography(args: HomographyArgs) -> CliResult<()> {
    let mut cfg = TrainConfig::for_experiment(Experiment::Homography2d);
    apply_config(&mut cfg, &args.config)?;
    let image = match &args.image {
        Some(p) => read_png(p, [0.0; 3])?,
        None => procedural_image(256, cfg.seed),
    };
    let setup = PlanarSetup::default();
    let quiet = args.quiet;
    let outcome = run_homography_experiment(&image, &setup, &cfg, |r| {
        if !quiet && r.iteration % 500 == 0 {
            eprintln!("iter {:>5}  loss {:.6}  corner error {:.3} px", r.iteration, r.loss, r.corner_error_px);
        }
    })?;
    let out = out_dir(args.out);
    write_atomic(&out.join("corner_error.csv"), planar_trace_csv(&outcome.trace).as_bytes())?;
    write_png(&out.join("patches.png"), &draw_patch_outlines(&image, &outcome, setup.patch_half))?;
    let s = image.width() as f64 / 2.0;
    let h = image.height() as f64 / 2.0;
    let recon = ImageBuf::from_fn(image.width(), image.height(), |x, y| {
        let p = [(x as f64 + 0.5) / s - 1.0, (y as f64 + 0.5 - h) / s];
        outcome.model.color(&outcome.final_blend, p)
    });
    write_png(&out.join("reconstruction.png"), &recon)?;
    let mut warps = String::from("# patch h1 h2 h3 h4 h5 h6 h7 h8 (estimated, then ground truth)\n");
    for (k, (e, g)) in outcome.estimated.iter().zip(&outcome.ground_truth).enumerate() {
        for w in [e, g] {
            let p: Vec<String> = w.params.iter().map(|v| format!("{v:.9e}")).collect();
            let _ = writeln!(warps, "{k} {}", p.join(" "));
        }
    }
    write_atomic(&out.join("warps.txt"), warps.as_bytes())?;
    if !quiet {
        eprintln!(
            "mean corner error {:.3} px -> {:.3} px; wrote {}",
            outcome.initial_corner_error_px,
            outcome.final_corner_error_px,
            out.display()
        );
    }
    Ok(())
}

fn make_toy(args: ToySceneArgs) -> CliResult<()> {
    let cfg = ToySceneConfig {
        seed: args.seed,
        blobs: args.blobs,
        train_views: args.views,
        test_views: args.test_views,
        size: args.size,
        ..Default::default()
    };
    let (_, train, test) = make_toy_scene(&cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    let out = out_dir(args.out);
    write_blender_dataset(&out, "train", &train)?;
    if !test.images.is_empty() {
        write_blender_dataset(&out, "test", &test)?;
    }
    for (name, d) in [("train", &train), ("test", &test)] {
        if let Some(p) = &d.poses {
            write_atomic(&out.join(format!("poses_{name}.txt")), write_poses(p, PoseFileStyle::Params).as_bytes())?;
        }
    }
    Ok(())
}
