use rand::Rng;

use super::mlp::MlpLayout;
use super::sh::{sh_basis, sh_basis_backward};
use super::sigmoid;
use crate::error::{Error, Result};
use crate::real::Real;

/// Density logits are clipped to this range before exponentiation.
pub const DENSITY_LOGIT_CLAMP: f64 = 15.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldConfig {
    pub encoded_len: usize,
    pub density_width: usize,
    pub color_width: usize,
    pub geo_features: usize,
    pub sh_degree: usize,
}

impl FieldConfig {
    pub fn new(encoded_len: usize) -> Self {
        Self {
            encoded_len,
            density_width: 64,
            color_width: 64,
            geo_features: 15,
            sh_degree: 4,
        }
    }
}

/// Two-head decoder: one hidden layer for density (plus geometry features),
/// two hidden layers for color conditioned on the view direction.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMlp<T: Real = f32> {
    config: FieldConfig,
    density: MlpLayout,
    color: MlpLayout,
    params: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldOutput<T> {
    pub sigma: T,
    pub rgb: [T; 3],
}

/// Activations from one forward evaluation, consumed by `backward`.
#[derive(Debug, Clone)]
pub struct FieldCache<T> {
    density_acts: Vec<T>,
    color_acts: Vec<T>,
    direction: [T; 3],
    logit: T,
    out: FieldOutput<T>,
}

impl<T: Real> FieldCache<T> {
    pub fn output(&self) -> FieldOutput<T> {
        self.out
    }
}

/// Reusable buffers for [`FieldMlp::backward`].
#[derive(Debug, Clone)]
pub struct FieldScratch<T> {
    color: Vec<T>,
    density: Vec<T>,
    d_color_in: Vec<T>,
    d_density_out: Vec<T>,
}

impl<T: Real> FieldMlp<T> {
    pub fn zeros(config: FieldConfig) -> Result<Self> {
        if config.encoded_len == 0 || config.sh_degree == 0 || config.sh_degree > 4 {
            return Err(Error::invalid(format!("bad field config {config:?}")));
        }
        let density = MlpLayout::new(
            &[config.encoded_len, config.density_width, 1 + config.geo_features],
            0,
        );
        let color_in = config.geo_features + config.sh_degree * config.sh_degree;
        let color = MlpLayout::new(
            &[color_in, config.color_width, config.color_width, 3],
            density.param_count(),
        );
        let params = vec![T::zero(); density.param_count() + color.param_count()];
        Ok(Self {
            config,
            density,
            color,
            params,
        })
    }

    pub fn new<R: Rng>(config: FieldConfig, rng: &mut R) -> Result<Self> {
        let mut f = Self::zeros(config)?;
        f.density.init(&mut f.params, rng);
        f.color.init(&mut f.params, rng);
        Ok(f)
    }

    pub fn config(&self) -> &FieldConfig {
        &self.config
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn new_cache(&self) -> FieldCache<T> {
        FieldCache {
            density_acts: vec![T::zero(); self.density.activation_len()],
            color_acts: vec![T::zero(); self.color.activation_len()],
            direction: [T::zero(); 3],
            logit: T::zero(),
            out: FieldOutput {
                sigma: T::zero(),
                rgb: [T::zero(); 3],
            },
        }
    }

    pub fn new_scratch(&self) -> FieldScratch<T> {
        FieldScratch {
            color: vec![T::zero(); self.color.activation_len()],
            density: vec![T::zero(); self.density.activation_len()],
            d_color_in: vec![T::zero(); self.color.inputs()],
            d_density_out: vec![T::zero(); self.density.outputs()],
        }
    }

    /// Single evaluation with input validation.
    pub fn field_eval(&self, encoded: &[T], direction: [T; 3]) -> Result<FieldOutput<T>> {
        if encoded.len() != self.config.encoded_len {
            return Err(Error::invalid(format!(
                "field expects {} encoded features, got {}",
                self.config.encoded_len,
                encoded.len()
            )));
        }
        let n = direction.iter().map(|v| v.to_f64_lossy().powi(2)).sum::<f64>().sqrt();
        if (n - 1.0).abs() > 1e-5 {
            return Err(Error::invalid(format!("view direction has norm {n}")));
        }
        let mut cache = self.new_cache();
        Ok(self.forward(encoded, direction, &mut cache))
    }

    /// Density only; the color head is skipped.
    pub fn density(&self, encoded: &[T], acts: &mut [T]) -> T {
        self.density.forward(&self.params, encoded, acts);
        let logit = self.density.output(acts)[0];
        clamped_exp(logit)
    }

    pub fn density_scratch(&self) -> Vec<T> {
        vec![T::zero(); self.density.activation_len()]
    }

    pub fn forward(&self, encoded: &[T], direction: [T; 3], cache: &mut FieldCache<T>) -> FieldOutput<T> {
        let g = self.config.geo_features;
        self.density.forward(&self.params, encoded, &mut cache.density_acts);
        let dout = self.density.output(&cache.density_acts);
        let logit = dout[0];
        let sigma = clamped_exp(logit);

        let n_in = self.color.inputs();
        cache.color_acts[..g].copy_from_slice(&dout[1..1 + g]);
        sh_basis(direction, self.config.sh_degree, &mut cache.color_acts[g..n_in]);
        self.color.forward_in_place(&self.params, &mut cache.color_acts);
        let c = self.color.output(&cache.color_acts);
        let rgb = [sigmoid(c[0]), sigmoid(c[1]), sigmoid(c[2])];

        cache.direction = direction;
        cache.logit = logit;
        cache.out = FieldOutput { sigma, rgb };
        cache.out
    }

    /// Accumulates parameter gradients and returns the gradient with respect
    /// to the encoded features (written into `d_encoded`) and the direction.
    pub fn backward(
        &self,
        cache: &FieldCache<T>,
        d_sigma: T,
        d_rgb: [T; 3],
        param_grad: &mut [T],
        d_encoded: &mut [T],
        want_direction: bool,
        ws: &mut FieldScratch<T>,
    ) -> [T; 3] {
        let g = self.config.geo_features;
        let rgb = cache.out.rgb;
        let d_logits: [T; 3] =
            std::array::from_fn(|i| d_rgb[i] * rgb[i] * (T::one() - rgb[i]));
        let n_in = self.color.inputs();
        self.color.backward(
            &self.params,
            &cache.color_acts,
            &d_logits,
            param_grad,
            &mut ws.color,
            Some(&mut ws.d_color_in),
        );
        let lim = T::lit(DENSITY_LOGIT_CLAMP);
        let d_logit = if cache.logit < -lim || cache.logit > lim {
            T::zero()
        } else {
            d_sigma * cache.out.sigma
        };
        ws.d_density_out[0] = d_logit;
        ws.d_density_out[1..1 + g].copy_from_slice(&ws.d_color_in[..g]);
        self.density.backward(
            &self.params,
            &cache.density_acts,
            &ws.d_density_out,
            param_grad,
            &mut ws.density,
            Some(d_encoded),
        );
        if want_direction {
            sh_basis_backward(cache.direction, self.config.sh_degree, &ws.d_color_in[g..n_in])
        } else {
            [T::zero(); 3]
        }
    }
}

#[inline]
fn clamped_exp<T: Real>(logit: T) -> T {
    let lim = T::lit(DENSITY_LOGIT_CLAMP);
    logit.max(-lim).min(lim).exp()
}
