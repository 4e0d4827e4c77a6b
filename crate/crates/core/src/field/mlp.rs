use rand::Rng;

use crate::real::{axpy, dot, Real};

/// Shape of a fully connected ReLU network living inside a flat parameter slice.
///
/// Layer `i` stores its weights transposed (`inputs x outputs`, row-major)
/// followed by its bias, so the forward pass is a sequence of contiguous
/// axpy updates. Hidden layers use ReLU; the last layer is linear.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpLayout {
    dims: Vec<usize>,
    offset: usize,
}

impl MlpLayout {
    pub fn new(dims: &[usize], offset: usize) -> Self {
        assert!(dims.len() >= 2, "an MLP needs input and output widths");
        Self {
            dims: dims.to_vec(),
            offset,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn inputs(&self) -> usize {
        self.dims[0]
    }

    pub fn outputs(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    /// Scratch length holding every layer's input activation and the output.
    pub fn activation_len(&self) -> usize {
        self.dims.iter().sum()
    }

    /// He-style uniform init, `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero biases.
    pub fn init<T: Real, R: Rng>(&self, params: &mut [T], rng: &mut R) {
        let mut off = self.offset;
        for w in self.dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            for p in &mut params[off..off + fan_in * fan_out] {
                *p = T::lit(rng.random_range(-bound..bound));
            }
            off += fan_in * fan_out;
            for p in &mut params[off..off + fan_out] {
                *p = T::zero();
            }
            off += fan_out;
        }
    }

    /// Runs the network on `input`; activations land in `acts`, whose tail
    /// (`outputs()` values) is the linear output.
    pub fn forward<T: Real>(&self, params: &[T], input: &[T], acts: &mut [T]) {
        debug_assert_eq!(input.len(), self.inputs());
        acts[..input.len()].copy_from_slice(input);
        self.forward_in_place(params, acts);
    }

    /// Same as [`forward`](Self::forward) with the input already stored in
    /// `acts[..inputs()]`.
    pub fn forward_in_place<T: Real>(&self, params: &[T], acts: &mut [T]) {
        debug_assert_eq!(acts.len(), self.activation_len());
        let mut p_off = self.offset;
        let mut a_off = 0;
        let last = self.dims.len() - 2;
        for (li, w) in self.dims.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &params[p_off..p_off + n_in * n_out];
            let bias = &params[p_off + n_in * n_out..p_off + n_in * n_out + n_out];
            let (head, tail) = acts.split_at_mut(a_off + n_in);
            let x = &head[a_off..];
            let y = &mut tail[..n_out];
            y.copy_from_slice(bias);
            for (i, &xi) in x.iter().enumerate() {
                if xi != T::zero() {
                    axpy(xi, &weights[i * n_out..(i + 1) * n_out], y);
                }
            }
            if li != last {
                for v in y.iter_mut() {
                    *v = v.max(T::zero());
                }
            }
            p_off += n_in * n_out + n_out;
            a_off += n_in;
        }
    }

    pub fn output<'a, T: Real>(&self, acts: &'a [T]) -> &'a [T] {
        &acts[acts.len() - self.outputs()..]
    }

    /// Backpropagates `d_out` through the cached activations.
    ///
    /// Parameter gradients are accumulated into `param_grad` (the full flat
    /// vector, indexed with this layout's offset). `scratch` must have
    /// `activation_len()` entries. When `d_input` is given it is overwritten.
    pub fn backward<T: Real>(
        &self,
        params: &[T],
        acts: &[T],
        d_out: &[T],
        param_grad: &mut [T],
        scratch: &mut [T],
        d_input: Option<&mut [T]>,
    ) {
        let n_layers = self.dims.len() - 1;
        // offsets of each layer's parameters and input activations
        let mut p_offs = Vec::with_capacity(n_layers);
        let mut a_offs = Vec::with_capacity(n_layers + 1);
        let (mut p, mut a) = (self.offset, 0);
        for w in self.dims.windows(2) {
            p_offs.push(p);
            a_offs.push(a);
            p += w[0] * w[1] + w[1];
            a += w[0];
        }
        a_offs.push(a);
        // scratch holds the gradient w.r.t. each layer's activations
        let out_len = self.outputs();
        scratch[a..a + out_len].copy_from_slice(d_out);
        for li in (0..n_layers).rev() {
            let (n_in, n_out) = (self.dims[li], self.dims[li + 1]);
            let (wo, bo) = (p_offs[li], p_offs[li] + n_in * n_out);
            let x = &acts[a_offs[li]..a_offs[li] + n_in];
            let (s_head, s_tail) = scratch.split_at_mut(a_offs[li + 1]);
            let dy = &s_tail[..n_out];
            {
                let gw = &mut param_grad[wo..bo];
                for (i, &xi) in x.iter().enumerate() {
                    if xi != T::zero() {
                        axpy(xi, dy, &mut gw[i * n_out..(i + 1) * n_out]);
                    }
                }
                for (g, d) in param_grad[bo..bo + n_out].iter_mut().zip(dy) {
                    *g += *d;
                }
            }
            if li == 0 && d_input.is_none() {
                break;
            }
            let weights = &params[wo..bo];
            let dx = &mut s_head[a_offs[li]..a_offs[li] + n_in];
            for i in 0..n_in {
                // hidden inputs went through ReLU; the network input did not
                let active = li == 0 || x[i] > T::zero();
                dx[i] = if active {
                    dot(&weights[i * n_out..(i + 1) * n_out], dy)
                } else {
                    T::zero()
                };
            }
        }
        if let Some(d_in) = d_input {
            d_in.copy_from_slice(&scratch[..self.inputs()]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::Tape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_tape_route() {
        let layout = MlpLayout::new(&[5, 7, 6, 3], 0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut params = vec![0.0f64; layout.param_count()];
        layout.init(&mut params, &mut rng);
        for p in params.iter_mut() {
            *p += rng.random_range(-0.1..0.1);
        }
        let input: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d_out = [0.3, -1.2, 0.7];

        let mut acts = vec![0.0; layout.activation_len()];
        layout.forward(&params, &input, &mut acts);
        let mut pg = vec![0.0; params.len()];
        let mut scratch = vec![0.0; layout.activation_len()];
        let mut d_in = vec![0.0; 5];
        layout.backward(&params, &acts, &d_out, &mut pg, &mut scratch, Some(&mut d_in));

        // second route: the same network on the scalar tape
        let mut t = Tape::<f64>::new();
        let pv: Vec<_> = params.iter().map(|&p| t.var(p)).collect();
        let xv: Vec<_> = input.iter().map(|&x| t.var(x)).collect();
        let mut h = xv.clone();
        let mut off = 0;
        let dims = layout.dims().to_vec();
        for (li, w) in dims.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            // the tape wants row-major out x in; the layout stores in x out
            let wt: Vec<_> = (0..n_out)
                .flat_map(|o| (0..n_in).map(move |i| (i, o)))
                .map(|(i, o)| pv[off + i * n_out + o])
                .collect();
            let b = &pv[off + n_in * n_out..off + n_in * n_out + n_out];
            h = t.affine(&wt, &h, b);
            if li + 2 < dims.len() {
                h = h.into_iter().map(|v| t.relu(v)).collect();
            }
            off += n_in * n_out + n_out;
        }
        for (o, v) in layout.output(&acts).iter().zip(&h) {
            assert!((o - t.value(*v)).abs() < 1e-12);
        }
        let weighted: Vec<_> = h
            .iter()
            .zip(d_out)
            .map(|(&v, c)| t.scale(v, c))
            .collect();
        let loss = t.sum(&weighted);
        let g = t.backward(loss).unwrap();
        for (i, p) in pv.iter().enumerate() {
            assert!((g[p.index()] - pg[i]).abs() < 1e-10, "param {i}");
        }
        for (i, x) in xv.iter().enumerate() {
            assert!((g[x.index()] - d_in[i]).abs() < 1e-10, "input {i}");
        }
    }

    #[test]
    fn init_is_seeded() {
        let layout = MlpLayout::new(&[4, 8, 2], 3);
        let mut a = vec![0.0f32; 3 + layout.param_count()];
        let mut b = a.clone();
        layout.init(&mut a, &mut ChaCha8Rng::seed_from_u64(5));
        layout.init(&mut b, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
        assert_eq!(&a[..3], &[0.0; 3]);
        let bound = (6.0f32 / 4.0).sqrt();
        assert!(a[3..35].iter().all(|w| w.abs() <= bound));
    }
}
