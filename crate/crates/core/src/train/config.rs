//! Training configuration and its flat `key = value` text form.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::c2f::{C2fMode, C2fSchedule};
use crate::diff::LrSchedule;
use crate::error::{Error, Result};
use crate::hashgrid::HashGridConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Homography2d,
    Bounded3d,
    Unbounded3d,
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "homography2d" => Ok(Self::Homography2d),
            "bounded3d" => Ok(Self::Bounded3d),
            "unbounded3d" => Ok(Self::Unbounded3d),
            other => Err(Error::invalid(format!("unknown experiment '{other}'"))),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Homography2d => "homography2d",
            Self::Bounded3d => "bounded3d",
            Self::Unbounded3d => "unbounded3d",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub experiment: Experiment,
    pub iterations: usize,
    pub seed: u64,
    /// Rays in the first batch; later batches follow `target_samples`.
    pub batch_rays: usize,
    pub target_samples: usize,
    pub min_rays: usize,
    pub max_rays: usize,
    pub lr_network: LrSchedule,
    pub lr_poses: LrSchedule,
    pub c2f_mode: C2fMode,
    pub c2f_start: f64,
    pub c2f_end: f64,
    pub pose_noise: f64,
    pub optimize_poses: bool,
    pub grid_levels: usize,
    pub grid_log2_table: u32,
    pub grid_features: usize,
    pub grid_min_res: u32,
    pub grid_max_res: u32,
    /// Marching step in scene units.
    pub step: f64,
    /// Samples beyond the unit sphere in unbounded mode.
    pub far_samples: usize,
    pub occupancy_res: usize,
    pub occupancy_interval: usize,
    pub occupancy_warmup: usize,
    pub occupancy_decay: f64,
    pub background: [f64; 3],
    pub log_every: usize,
    pub eval_every: usize,
    /// Single-threaded, fixed-order execution.
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::for_experiment(Experiment::Bounded3d)
    }
}

impl TrainConfig {
    /// Defaults following the published setup for each experiment family.
    pub fn for_experiment(experiment: Experiment) -> Self {
        let decay = vec![10_000, 15_000, 18_000];
        let base = Self {
            experiment,
            iterations: 20_000,
            seed: 0,
            batch_rays: 1024,
            target_samples: 1024 * 64,
            min_rays: 64,
            max_rays: 8192,
            lr_network: LrSchedule::ExponentialDecay {
                base: 1e-2,
                final_lr: 1e-4,
                total_iters: 20_000,
            },
            lr_poses: LrSchedule::ExponentialDecay {
                base: 1e-3,
                final_lr: 1e-5,
                total_iters: 20_000,
            },
            c2f_mode: C2fMode::Substitution,
            c2f_start: 0.1,
            c2f_end: 0.5,
            pose_noise: 0.15,
            optimize_poses: true,
            grid_levels: 16,
            grid_log2_table: 19,
            grid_features: 2,
            grid_min_res: 14,
            grid_max_res: 4069,
            step: 3f64.sqrt() * 2.0 * 3f64.sqrt() / 1024.0,
            far_samples: 32,
            occupancy_res: 128,
            occupancy_interval: 16,
            occupancy_warmup: 256,
            occupancy_decay: 0.95,
            background: [1.0; 3],
            log_every: 10,
            eval_every: 0,
            deterministic: true,
        };
        match experiment {
            Experiment::Bounded3d => base,
            Experiment::Unbounded3d => Self {
                lr_network: LrSchedule::WarmupStepDecay {
                    base: 1e-4,
                    peak: 1e-2,
                    warmup_iters: 100,
                    milestones: decay.clone(),
                    factor: 0.33,
                },
                lr_poses: LrSchedule::WarmupStepDecay {
                    base: 3e-4,
                    peak: 3e-3,
                    warmup_iters: 100,
                    milestones: decay,
                    factor: 0.33,
                },
                pose_noise: 0.0,
                background: [0.0; 3],
                grid_min_res: 16,
                ..base
            },
            Experiment::Homography2d => Self {
                iterations: 5000,
                batch_rays: 4096,
                lr_network: LrSchedule::Constant(1e-2),
                lr_poses: LrSchedule::Constant(3e-3),
                grid_levels: 18,
                grid_log2_table: 10,
                grid_min_res: 3,
                grid_max_res: 256,
                background: [0.0; 3],
                ..base
            },
        }
    }

    pub fn grid_config(&self, dim: usize) -> HashGridConfig {
        HashGridConfig {
            dim,
            levels: self.grid_levels,
            log2_table_size: self.grid_log2_table,
            features_per_level: self.grid_features,
            base_resolution: self.grid_min_res,
            max_resolution: self.grid_max_res,
        }
    }

    pub fn c2f_schedule(&self) -> Result<C2fSchedule> {
        C2fSchedule::new(self.c2f_start, self.c2f_end, self.grid_levels)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be positive"));
        }
        if self.batch_rays == 0 || self.min_rays == 0 || self.min_rays > self.max_rays {
            return Err(Error::invalid("need 0 < min_rays <= max_rays and batch_rays > 0"));
        }
        if !(self.step > 0.0) || !(self.pose_noise >= 0.0) {
            return Err(Error::invalid("step must be positive and pose_noise non-negative"));
        }
        if !(self.occupancy_decay > 0.0 && self.occupancy_decay <= 1.0) || self.occupancy_res == 0 {
            return Err(Error::invalid("occupancy decay must lie in (0, 1] and resolution be positive"));
        }
        self.lr_network.validate()?;
        self.lr_poses.validate()?;
        self.c2f_schedule()?;
        self.grid_config(3).validate()?;
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("config line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| Error::Format(format!("config line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    /// Parses a full config; `experiment` (if present) picks the defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let experiment = text
            .lines()
            .filter_map(|l| l.split('#').next()?.split_once('='))
            .find(|(k, _)| k.trim() == "experiment")
            .map(|(_, v)| v.parse())
            .transpose()?
            .unwrap_or(Experiment::Bounded3d);
        let mut cfg = Self::for_experiment(experiment);
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn p<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::invalid(format!("bad value '{v}' for {key}")))
        }
        match key {
            "experiment" => self.experiment = value.parse()?,
            "iterations" => self.iterations = p(key, value)?,
            "seed" => self.seed = p(key, value)?,
            "batch_rays" => self.batch_rays = p(key, value)?,
            "target_samples" => self.target_samples = p(key, value)?,
            "min_rays" => self.min_rays = p(key, value)?,
            "max_rays" => self.max_rays = p(key, value)?,
            "lr_network" => self.lr_network = value.parse()?,
            "lr_poses" => self.lr_poses = value.parse()?,
            "c2f.mode" => self.c2f_mode = value.parse()?,
            "c2f.r_s" => self.c2f_start = p(key, value)?,
            "c2f.r_e" => self.c2f_end = p(key, value)?,
            "pose_noise" => self.pose_noise = p(key, value)?,
            "optimize_poses" => self.optimize_poses = p(key, value)?,
            "grid.levels" => self.grid_levels = p(key, value)?,
            "grid.log2_table" => self.grid_log2_table = p(key, value)?,
            "grid.features" => self.grid_features = p(key, value)?,
            "grid.n_min" => self.grid_min_res = p(key, value)?,
            "grid.n_max" => self.grid_max_res = p(key, value)?,
            "step" => self.step = p(key, value)?,
            "far_samples" => self.far_samples = p(key, value)?,
            "occupancy.res" => self.occupancy_res = p(key, value)?,
            "occupancy.interval" => self.occupancy_interval = p(key, value)?,
            "occupancy.warmup" => self.occupancy_warmup = p(key, value)?,
            "occupancy.decay" => self.occupancy_decay = p(key, value)?,
            "background" => {
                let v: Vec<f64> = value
                    .split(',')
                    .map(|t| p::<f64>(key, t.trim()))
                    .collect::<Result<_>>()?;
                self.background = match v.as_slice() {
                    [g] => [*g; 3],
                    [r, g, b] => [*r, *g, *b],
                    _ => return Err(Error::invalid("background takes 1 or 3 numbers")),
                };
            }
            "log_every" => self.log_every = p(key, value)?,
            "eval_every" => self.eval_every = p(key, value)?,
            "deterministic" => self.deterministic = p(key, value)?,
            _ => return Err(Error::invalid(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let bg = self.background;
        let entries: Vec<(&str, String)> = vec![
            ("experiment", self.experiment.to_string()),
            ("iterations", self.iterations.to_string()),
            ("seed", self.seed.to_string()),
            ("batch_rays", self.batch_rays.to_string()),
            ("target_samples", self.target_samples.to_string()),
            ("min_rays", self.min_rays.to_string()),
            ("max_rays", self.max_rays.to_string()),
            ("lr_network", self.lr_network.to_string()),
            ("lr_poses", self.lr_poses.to_string()),
            ("c2f.mode", self.c2f_mode.to_string()),
            ("c2f.r_s", self.c2f_start.to_string()),
            ("c2f.r_e", self.c2f_end.to_string()),
            ("pose_noise", self.pose_noise.to_string()),
            ("optimize_poses", self.optimize_poses.to_string()),
            ("grid.levels", self.grid_levels.to_string()),
            ("grid.log2_table", self.grid_log2_table.to_string()),
            ("grid.features", self.grid_features.to_string()),
            ("grid.n_min", self.grid_min_res.to_string()),
            ("grid.n_max", self.grid_max_res.to_string()),
            ("step", self.step.to_string()),
            ("far_samples", self.far_samples.to_string()),
            ("occupancy.res", self.occupancy_res.to_string()),
            ("occupancy.interval", self.occupancy_interval.to_string()),
            ("occupancy.warmup", self.occupancy_warmup.to_string()),
            ("occupancy.decay", self.occupancy_decay.to_string()),
            ("background", format!("{},{},{}", bg[0], bg[1], bg[2])),
            ("log_every", self.log_every.to_string()),
            ("eval_every", self.eval_every.to_string()),
            ("deterministic", self.deterministic.to_string()),
        ];
        for (k, v) in entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}
