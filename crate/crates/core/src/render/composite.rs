use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Composite<T> {
    pub rgb: [T; 3],
    /// Sum of the sample weights.
    pub opacity: T,
    /// Transmittance left after the last sample.
    pub transmittance: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeGrad<T> {
    pub d_sigma: Vec<T>,
    pub d_color: Vec<[T; 3]>,
    pub d_delta: Vec<T>,
}

fn check<T: Real>(sigmas: &[T], colors: &[[T; 3]], deltas: &[T]) -> Result<()> {
    if sigmas.len() != colors.len() || sigmas.len() != deltas.len() {
        return Err(Error::invalid("composite: sigma, color and delta lengths differ"));
    }
    if sigmas.iter().any(|s| !(*s >= T::zero())) {
        return Err(Error::invalid("composite: negative or NaN density"));
    }
    if deltas.iter().any(|d| !(*d > T::zero())) {
        return Err(Error::invalid("composite: sample spacing must be positive"));
    }
    Ok(())
}

/// Per-sample weights `alpha_i T_i`, computed as differences of consecutive
/// transmittances so they are nonnegative and telescope to the opacity.
pub fn sample_weights<T: Real>(sigmas: &[T], deltas: &[T]) -> Vec<T> {
    let mut acc = T::zero();
    let mut trans = T::one();
    sigmas
        .iter()
        .zip(deltas)
        .map(|(&s, &d)| {
            acc += s * d;
            let next = (-acc).exp();
            let w = trans - next;
            trans = next;
            w
        })
        .collect()
}

/// Alpha compositing with `alpha_i = 1 - exp(-sigma_i delta_i)` over a
/// background color.
pub fn composite<T: Real>(
    sigmas: &[T],
    colors: &[[T; 3]],
    deltas: &[T],
    background: [T; 3],
) -> Result<Composite<T>> {
    check(sigmas, colors, deltas)?;
    let mut acc = T::zero();
    let mut trans = T::one();
    let mut rgb = [T::zero(); 3];
    let mut opacity = T::zero();
    for i in 0..sigmas.len() {
        acc += sigmas[i] * deltas[i];
        let next = (-acc).exp();
        let w = trans - next;
        for k in 0..3 {
            rgb[k] += w * colors[i][k];
        }
        opacity += w;
        trans = next;
    }
    for k in 0..3 {
        rgb[k] += trans * background[k];
    }
    Ok(Composite {
        rgb,
        opacity,
        transmittance: trans,
    })
}

/// Gradients of `d_rgb . rgb + d_opacity * opacity`.
pub fn composite_backward<T: Real>(
    sigmas: &[T],
    colors: &[[T; 3]],
    deltas: &[T],
    background: [T; 3],
    d_rgb: [T; 3],
    d_opacity: T,
) -> Result<CompositeGrad<T>> {
    check(sigmas, colors, deltas)?;
    let n = sigmas.len();
    let mut grad = CompositeGrad {
        d_sigma: vec![T::zero(); n],
        d_color: vec![[T::zero(); 3]; n],
        d_delta: vec![T::zero(); n],
    };
    let mut trans = vec![T::zero(); n + 1];
    composite_backward_into(
        sigmas,
        colors,
        deltas,
        background,
        d_rgb,
        d_opacity,
        &mut trans,
        &mut grad,
    );
    Ok(grad)
}

/// Unchecked backward pass writing into preallocated buffers.
///
/// `trans` needs `n + 1` slots; `grad` vectors need `n`.
#[allow(clippy::too_many_arguments)]
pub fn composite_backward_into<T: Real>(
    sigmas: &[T],
    colors: &[[T; 3]],
    deltas: &[T],
    background: [T; 3],
    d_rgb: [T; 3],
    d_opacity: T,
    trans: &mut [T],
    grad: &mut CompositeGrad<T>,
) {
    let n = sigmas.len();
    let mut acc = T::zero();
    trans[0] = T::one();
    for i in 0..n {
        acc += sigmas[i] * deltas[i];
        trans[i + 1] = (-acc).exp();
    }
    let proj = |c: &[T; 3]| d_rgb[0] * c[0] + d_rgb[1] * c[1] + d_rgb[2] * c[2];
    // suffix = sum_{i>k} w_i (g . c_i) + T_N (g . bg)
    let mut suffix = trans[n] * proj(&background);
    for k in (0..n).rev() {
        let w = trans[k] - trans[k + 1];
        let gc = proj(&colors[k]);
        let d_tau = trans[k + 1] * gc - suffix + trans[n] * d_opacity;
        grad.d_sigma[k] = d_tau * deltas[k];
        grad.d_delta[k] = d_tau * sigmas[k];
        grad.d_color[k] = [w * d_rgb[0], w * d_rgb[1], w * d_rgb[2]];
        suffix += w * gc;
    }
}
