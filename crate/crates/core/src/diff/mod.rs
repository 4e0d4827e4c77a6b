//! Reverse-mode differentiation, optimizers and learning-rate schedules.

mod adam;
mod lr;
mod tape;

pub use adam::{adam_step, AdamState};
pub use lr::LrSchedule;
pub use tape::{Tape, Var};
