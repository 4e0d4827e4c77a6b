use crate::error::{Error, Result};
use crate::image::ImageBuf;

pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

fn check_shapes(a: &ImageBuf, b: &ImageBuf) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::invalid(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB for a peak value of 1.
///
/// Identical images give `f64::INFINITY`.
pub fn psnr(img: &ImageBuf, reference: &ImageBuf) -> Result<f64> {
    check_shapes(img, reference)?;
    let n = img.data().len();
    if n == 0 {
        return Err(Error::invalid("psnr of an empty image"));
    }
    let sse: f64 = img
        .data()
        .iter()
        .zip(reference.data())
        .map(|(&a, &b)| (f64::from(a) - f64::from(b)).powi(2))
        .sum();
    let mse = sse / n as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub k1: f64,
    pub k2: f64,
    pub window: usize,
    pub sigma: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            k1: 0.01,
            k2: 0.03,
            window: 11,
            sigma: 1.5,
        }
    }
}

impl SsimParams {
    fn kernel(&self) -> Vec<f64> {
        let c = (self.window as f64 - 1.0) / 2.0;
        let k: Vec<f64> = (0..self.window)
            .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * self.sigma * self.sigma)).exp())
            .collect();
        let s: f64 = k.iter().sum();
        k.into_iter().map(|v| v / s).collect()
    }
}

/// Single-channel plane in f64.
#[derive(Clone)]
struct Plane {
    w: usize,
    h: usize,
    v: Vec<f64>,
}

impl Plane {
    fn channels(img: &ImageBuf) -> [Plane; 3] {
        std::array::from_fn(|c| Plane {
            w: img.width(),
            h: img.height(),
            v: img.data().iter().skip(c).step_by(3).map(|&x| f64::from(x)).collect(),
        })
    }

    fn map2(&self, other: &Plane, f: impl Fn(f64, f64) -> f64) -> Plane {
        Plane {
            w: self.w,
            h: self.h,
            v: self.v.iter().zip(&other.v).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Separable "valid" correlation with a symmetric kernel.
    fn filter(&self, k: &[f64]) -> Plane {
        let n = k.len();
        let (w2, h2) = (self.w + 1 - n, self.h + 1 - n);
        let mut tmp = vec![0.0; w2 * self.h];
        for y in 0..self.h {
            let row = &self.v[y * self.w..(y + 1) * self.w];
            for x in 0..w2 {
                tmp[y * w2 + x] = k.iter().zip(&row[x..x + n]).map(|(a, b)| a * b).sum();
            }
        }
        let mut out = vec![0.0; w2 * h2];
        for y in 0..h2 {
            for x in 0..w2 {
                out[y * w2 + x] = (0..n).map(|i| k[i] * tmp[(y + i) * w2 + x]).sum();
            }
        }
        Plane { w: w2, h: h2, v: out }
    }

    fn downsample(&self) -> Plane {
        let (w2, h2) = (self.w / 2, self.h / 2);
        let mut v = vec![0.0; w2 * h2];
        for y in 0..h2 {
            for x in 0..w2 {
                let i = 2 * y * self.w + 2 * x;
                v[y * w2 + x] = 0.25 * (self.v[i] + self.v[i + 1] + self.v[i + self.w] + self.v[i + self.w + 1]);
            }
        }
        Plane { w: w2, h: h2, v }
    }
}

/// Mean SSIM and mean contrast-structure term for one channel.
fn ssim_terms(a: &Plane, b: &Plane, p: &SsimParams, k: &[f64]) -> (f64, f64) {
    let c1 = (p.k1 * 1.0).powi(2);
    let c2 = (p.k2 * 1.0).powi(2);
    let mu_a = a.filter(k);
    let mu_b = b.filter(k);
    let aa = a.map2(a, |x, _| x * x).filter(k);
    let bb = b.map2(b, |x, _| x * x).filter(k);
    let ab = a.map2(b, |x, y| x * y).filter(k);
    let n = mu_a.v.len() as f64;
    let (mut s_sum, mut cs_sum) = (0.0, 0.0);
    for i in 0..mu_a.v.len() {
        let (ma, mb) = (mu_a.v[i], mu_b.v[i]);
        let va = aa.v[i] - ma * ma;
        let vb = bb.v[i] - mb * mb;
        let cov = ab.v[i] - ma * mb;
        let cs = (2.0 * cov + c2) / (va + vb + c2);
        let l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        s_sum += l * cs;
        cs_sum += cs;
    }
    (s_sum / n, cs_sum / n)
}

fn check_window(img: &ImageBuf, window: usize) -> Result<()> {
    if window == 0 || img.width() < window || img.height() < window {
        return Err(Error::invalid(format!(
            "{}x{} image is smaller than the {window}x{window} window",
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

pub fn ssim_with(img: &ImageBuf, reference: &ImageBuf, params: &SsimParams) -> Result<f64> {
    check_shapes(img, reference)?;
    check_window(img, params.window)?;
    let k = params.kernel();
    let (a, b) = (Plane::channels(img), Plane::channels(reference));
    Ok((0..3).map(|c| ssim_terms(&a[c], &b[c], params, &k).0).sum::<f64>() / 3.0)
}

/// SSIM with an 11x11 Gaussian window (sigma 1.5), averaged over channels.
pub fn ssim(img: &ImageBuf, reference: &ImageBuf) -> Result<f64> {
    ssim_with(img, reference, &SsimParams::default())
}

/// Multi-scale SSIM; negative per-level terms are clamped to zero.
pub fn ms_ssim_with(img: &ImageBuf, reference: &ImageBuf, weights: &[f64], params: &SsimParams) -> Result<f64> {
    check_shapes(img, reference)?;
    let levels = weights.len();
    if levels == 0 {
        return Err(Error::invalid("ms-ssim needs at least one level"));
    }
    let min_side = params.window << (levels - 1);
    if img.width() < min_side || img.height() < min_side {
        return Err(Error::invalid(format!(
            "{} levels need images of at least {min_side}x{min_side}",
            levels
        )));
    }
    let k = params.kernel();
    let mut a = Plane::channels(img);
    let mut b = Plane::channels(reference);
    let mut result = 1.0;
    for (level, &w) in weights.iter().enumerate() {
        let (mut s, mut cs) = (0.0, 0.0);
        for c in 0..3 {
            let t = ssim_terms(&a[c], &b[c], params, &k);
            s += t.0 / 3.0;
            cs += t.1 / 3.0;
        }
        let term = if level + 1 == levels { s } else { cs };
        result *= term.max(0.0).powf(w);
        if level + 1 < levels {
            a = std::array::from_fn(|c| a[c].downsample());
            b = std::array::from_fn(|c| b[c].downsample());
        }
    }
    Ok(result.clamp(0.0, 1.0))
}

pub fn ms_ssim(img: &ImageBuf, reference: &ImageBuf) -> Result<f64> {
    ms_ssim_with(img, reference, &MS_SSIM_WEIGHTS, &SsimParams::default())
}
