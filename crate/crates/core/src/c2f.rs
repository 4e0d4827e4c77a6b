//! Coarse-to-fine weighting of per-level hash features.
//!
//! A cosine window `w_k(alpha)` opens level `k` as the annealing position
//! `alpha` sweeps from `k` to `k + 1`. In `Vanilla` mode a closed level is
//! multiplied by its weight (so it reads as zeros). In `Substitution` mode a
//! closed or partially open level is blended toward the block of the finest
//! level that already has a nonzero weight:
//!
//! `gamma_k = w_k * d_k + (1 - w_k) * d_alpha`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum C2fMode {
    Off,
    Vanilla,
    #[default]
    Substitution,
}

impl FromStr for C2fMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(C2fMode::Off),
            "vanilla" => Ok(C2fMode::Vanilla),
            "substitution" => Ok(C2fMode::Substitution),
            _ => Err(Error::invalid(format!(
                "c2f mode must be off, vanilla or substitution, got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for C2fMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            C2fMode::Off => "off",
            C2fMode::Vanilla => "vanilla",
            C2fMode::Substitution => "substitution",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct C2fSchedule {
    pub start: f64,
    pub end: f64,
    pub levels: usize,
}

impl C2fSchedule {
    pub fn new(start: f64, end: f64, levels: usize) -> Result<Self> {
        if !(0.0 <= start && start < end && end <= 1.0) || levels == 0 {
            return Err(Error::invalid(format!(
                "need 0 <= r_s < r_e <= 1 and L >= 1, got r_s={start} r_e={end} L={levels}"
            )));
        }
        Ok(Self { start, end, levels })
    }

    /// Annealing position in `[0, L]` for training progress in `[0, 1]`.
    pub fn alpha(&self, progress: f64) -> f64 {
        let s = ((progress - self.start) / (self.end - self.start)).clamp(0.0, 1.0);
        s * self.levels as f64
    }
}

/// Cosine window weight of level `k`.
pub fn window_weight(k: usize, alpha: f64) -> f64 {
    let a = alpha - k as f64;
    if a < 0.0 {
        0.0
    } else if a < 1.0 {
        (1.0 - ((0.5 - a) * PI).sin()) / 2.0
    } else {
        1.0
    }
}

/// Index of the finest level whose window weight is nonzero (level 0 if none).
pub fn substitute_level(alpha: f64, levels: usize) -> usize {
    if alpha <= 0.0 {
        0
    } else {
        ((alpha.ceil() as usize).saturating_sub(1)).min(levels - 1)
    }
}

/// Per-level blend coefficients precomputed for one annealing position.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelBlend {
    mode: C2fMode,
    weights: Vec<f64>,
    source: usize,
}

impl LevelBlend {
    pub fn new(mode: C2fMode, alpha: f64, levels: usize) -> Self {
        let weights = match mode {
            C2fMode::Off => vec![1.0; levels],
            _ => (0..levels).map(|k| window_weight(k, alpha)).collect(),
        };
        Self {
            mode,
            weights,
            source: substitute_level(alpha, levels),
        }
    }

    pub fn identity(levels: usize) -> Self {
        Self::new(C2fMode::Off, levels as f64, levels)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mode(&self) -> C2fMode {
        self.mode
    }

    /// Level whose block stands in for closed levels in substitution mode.
    pub fn source_level(&self) -> usize {
        self.source
    }

    pub fn is_identity(&self) -> bool {
        self.mode == C2fMode::Off || self.weights.iter().all(|&w| w == 1.0)
    }

    pub fn apply<T: Real>(&self, features: &[T], out: &mut [T]) {
        let f = features.len() / self.weights.len();
        debug_assert_eq!(out.len(), features.len());
        if self.is_identity() {
            out.copy_from_slice(features);
            return;
        }
        let src = &features[self.source * f..(self.source + 1) * f];
        for (k, &w) in self.weights.iter().enumerate() {
            let w = T::lit(w);
            let block = &features[k * f..(k + 1) * f];
            let dst = &mut out[k * f..(k + 1) * f];
            match self.mode {
                C2fMode::Vanilla => {
                    for j in 0..f {
                        dst[j] = w * block[j];
                    }
                }
                _ => {
                    for j in 0..f {
                        dst[j] = w * block[j] + (T::one() - w) * src[j];
                    }
                }
            }
        }
    }

    /// Gradient with respect to the raw features given the gradient of the
    /// blended output. Overwrites `grad_in`.
    pub fn backward<T: Real>(&self, upstream: &[T], grad_in: &mut [T]) {
        let f = upstream.len() / self.weights.len();
        if self.is_identity() {
            grad_in.copy_from_slice(upstream);
            return;
        }
        grad_in.iter_mut().for_each(|g| *g = T::zero());
        for (k, &w) in self.weights.iter().enumerate() {
            let w = T::lit(w);
            for j in 0..f {
                let up = upstream[k * f + j];
                grad_in[k * f + j] += w * up;
                if self.mode == C2fMode::Substitution {
                    grad_in[self.source * f + j] += (T::one() - w) * up;
                }
            }
        }
    }
}

/// Reweights concatenated level blocks for the given annealing position.
pub fn reweight_features<T: Real>(features: &[T], levels: usize, alpha: f64, mode: C2fMode) -> Vec<T> {
    let mut out = vec![T::zero(); features.len()];
    LevelBlend::new(mode, alpha, levels).apply(features, &mut out);
    out
}
