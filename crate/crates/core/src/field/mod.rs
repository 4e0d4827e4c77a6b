//! Radiance decoder: hash features plus view direction to density and color.

mod mlp;
mod radiance;
mod sh;

pub use mlp::MlpLayout;
pub use radiance::{FieldCache, FieldConfig, FieldMlp, FieldOutput, FieldScratch, DENSITY_LOGIT_CLAMP};
pub use sh::{sh_basis, sh_basis_backward, sh_encode};

#[inline]
pub fn sigmoid<T: crate::Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}
