use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Learning rate as a function of the iteration index.
#[derive(Debug, Clone, PartialEq)]
pub enum LrSchedule {
    /// Linear ramp from `base` to `peak` over `warmup_iters`, then `peak`
    /// multiplied by `factor` once per milestone already reached.
    WarmupStepDecay {
        base: f64,
        peak: f64,
        warmup_iters: usize,
        milestones: Vec<usize>,
        factor: f64,
    },
    /// Geometric interpolation from `base` to `final_lr` across `total_iters`.
    ExponentialDecay {
        base: f64,
        final_lr: f64,
        total_iters: usize,
    },
    /// Fixed rate. Zero is allowed here, which freezes a parameter group.
    Constant(f64),
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            LrSchedule::WarmupStepDecay {
                base, peak, factor, ..
            } => *base > 0.0 && *peak >= *base && *factor > 0.0 && *factor <= 1.0,
            LrSchedule::ExponentialDecay {
                base,
                final_lr,
                total_iters,
            } => *base > 0.0 && *final_lr > 0.0 && *total_iters > 0,
            LrSchedule::Constant(lr) => *lr >= 0.0 && lr.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("bad learning-rate schedule {self:?}")))
        }
    }

    pub fn lr_at(&self, iter: usize) -> f64 {
        match self {
            LrSchedule::WarmupStepDecay {
                base,
                peak,
                warmup_iters,
                milestones,
                factor,
            } => {
                if iter < *warmup_iters {
                    base + (peak - base) * iter as f64 / *warmup_iters as f64
                } else {
                    let passed = milestones.iter().filter(|&&m| iter >= m).count();
                    peak * factor.powi(passed as i32)
                }
            }
            LrSchedule::ExponentialDecay {
                base,
                final_lr,
                total_iters,
            } => {
                let s = (iter as f64 / *total_iters as f64).min(1.0);
                base * (final_lr / base).powf(s)
            }
            LrSchedule::Constant(lr) => *lr,
        }
    }
}

impl fmt::Display for LrSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LrSchedule::Constant(lr) => write!(f, "const:{lr}"),
            LrSchedule::ExponentialDecay {
                base,
                final_lr,
                total_iters,
            } => write!(f, "exp:{base}:{final_lr}:{total_iters}"),
            LrSchedule::WarmupStepDecay {
                base,
                peak,
                warmup_iters,
                milestones,
                factor,
            } => {
                let m: Vec<String> = milestones.iter().map(|m| m.to_string()).collect();
                write!(f, "warmup:{base}:{peak}:{warmup_iters}:{factor}:{}", m.join(","))
            }
        }
    }
}

/// Parses `const:LR`, `exp:BASE:FINAL:ITERS` or
/// `warmup:BASE:PEAK:WARMUP:FACTOR:M1,M2,...` (milestone list may be empty).
impl FromStr for LrSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || Error::invalid(format!("cannot parse learning-rate schedule '{s}'"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let int = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        let sched = match parts.as_slice() {
            ["const", lr] => LrSchedule::Constant(num(lr)?),
            ["exp", base, fin, iters] => LrSchedule::ExponentialDecay {
                base: num(base)?,
                final_lr: num(fin)?,
                total_iters: int(iters)?,
            },
            ["warmup", base, peak, warm, factor, ms] => LrSchedule::WarmupStepDecay {
                base: num(base)?,
                peak: num(peak)?,
                warmup_iters: int(warm)?,
                factor: num(factor)?,
                milestones: ms
                    .split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(int)
                    .collect::<Result<_>>()?,
            },
            _ => return Err(bad()),
        };
        sched.validate()?;
        Ok(sched)
    }
}
