//! Multiresolution hash encoding.
//!
//! Each level is a regular grid of `N_l` cells per axis over `[0,1]^d` whose
//! vertices own an `F`-wide feature row. Coarse levels whose `(N_l+1)^d`
//! vertices fit in the table are indexed one-to-one (row-major, first axis
//! slowest); finer levels go through the XOR spatial hash. A query point gets
//! the d-linear interpolation of its cell's `2^d` corner rows, per level, and
//! the level blocks are concatenated.
//!
//! Cells are chosen as `ceil(x N_l) - 1` clamped to `[0, N_l - 1]`, which puts
//! a point sitting exactly on an interior vertex at the upper corner of the
//! lower cell. The forward value is the same either way; the input derivative
//! there is the left-sided one.

use std::io::{Read, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::real::Real;

/// Per-axis hash multipliers. The fourth is used for 4D quadruple inputs.
pub const HASH_PRIMES: [u32; 4] = [1, 2_654_435_761, 805_459_861, 2_097_192_405];

pub const MAX_DIM: usize = 4;
const MAX_CORNERS: usize = 1 << MAX_DIM;

#[derive(Debug, Clone, PartialEq)]
pub struct HashGridConfig {
    pub dim: usize,
    pub levels: usize,
    pub log2_table_size: u32,
    pub features_per_level: usize,
    pub base_resolution: u32,
    pub max_resolution: u32,
}

impl Default for HashGridConfig {
    fn default() -> Self {
        Self {
            dim: 3,
            levels: 16,
            log2_table_size: 14,
            features_per_level: 2,
            base_resolution: 16,
            max_resolution: 2048,
        }
    }
}

impl HashGridConfig {
    pub fn table_size(&self) -> usize {
        1usize << self.log2_table_size
    }

    pub fn output_len(&self) -> usize {
        self.levels * self.features_per_level
    }

    pub fn param_count(&self) -> usize {
        self.levels * self.table_size() * self.features_per_level
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_DIM).contains(&self.dim) {
            return Err(Error::invalid(format!("grid dimension {} not in 1..=4", self.dim)));
        }
        if self.levels == 0 || self.features_per_level == 0 {
            return Err(Error::invalid("grid needs at least one level and one feature"));
        }
        if self.log2_table_size == 0 || self.log2_table_size > 30 {
            return Err(Error::invalid("table size must be 2^k with 1 <= k <= 30"));
        }
        if self.base_resolution == 0 || self.max_resolution < self.base_resolution {
            return Err(Error::invalid(format!(
                "need 1 <= N_min <= N_max, got {} and {}",
                self.base_resolution, self.max_resolution
            )));
        }
        Ok(())
    }

    /// Geometric growth factor between consecutive levels (1 for a single level).
    pub fn growth_factor(&self) -> f64 {
        if self.levels <= 1 {
            return 1.0;
        }
        let (lo, hi) = (self.base_resolution as f64, self.max_resolution as f64);
        ((hi.ln() - lo.ln()) / (self.levels - 1) as f64).exp()
    }
}

/// `floor(N_min * b^l)` for every level.
pub fn level_resolutions(config: &HashGridConfig) -> Vec<u32> {
    let b = config.growth_factor();
    let n_min = config.base_resolution as f64;
    (0..config.levels)
        .map(|l| {
            let n = (n_min * b.powi(l as i32)).floor() as u32;
            n.max(config.base_resolution)
        })
        .collect()
}

/// XOR spatial hash of a grid vertex, reduced modulo the power-of-two `table_size`.
#[inline]
pub fn spatial_hash(vertex: &[u32], table_size: usize) -> usize {
    debug_assert!(table_size.is_power_of_two());
    let mut h = 0u32;
    for (x, p) in vertex.iter().zip(HASH_PRIMES) {
        h ^= x.wrapping_mul(p);
    }
    (h as usize) & (table_size - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HashGrid<T: Real = f32> {
    config: HashGridConfig,
    resolutions: Vec<u32>,
    params: Vec<T>,
}

/// Corner rows and weights of one level for one query point.
#[derive(Debug, Clone, Copy)]
struct LevelCell<T> {
    rows: [usize; MAX_CORNERS],
    /// Fractional position inside the cell, per axis.
    frac: [T; MAX_DIM],
    scale: T,
}

impl<T: Real> HashGrid<T> {
    pub fn zeros(config: HashGridConfig) -> Result<Self> {
        config.validate()?;
        let resolutions = level_resolutions(&config);
        let params = vec![T::zero(); config.param_count()];
        Ok(Self {
            config,
            resolutions,
            params,
        })
    }

    /// Features drawn uniformly from `[-1e-4, 1e-4]`.
    pub fn new<R: Rng>(config: HashGridConfig, rng: &mut R) -> Result<Self> {
        let mut g = Self::zeros(config)?;
        for p in g.params.iter_mut() {
            *p = T::lit(rng.random_range(-1e-4..=1e-4));
        }
        Ok(g)
    }

    pub fn config(&self) -> &HashGridConfig {
        &self.config
    }

    pub fn resolutions(&self) -> &[u32] {
        &self.resolutions
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn output_len(&self) -> usize {
        self.config.output_len()
    }

    /// Whether level `l` stores every vertex in its own row.
    pub fn is_dense_level(&self, level: usize) -> bool {
        let side = self.resolutions[level] as u64 + 1;
        side.checked_pow(self.config.dim as u32)
            .is_some_and(|n| n <= self.config.table_size() as u64)
    }

    /// Table row (within its level) for a vertex.
    pub fn vertex_row(&self, level: usize, vertex: &[u32]) -> usize {
        if self.is_dense_level(level) {
            let side = self.resolutions[level] as usize + 1;
            vertex.iter().fold(0usize, |acc, &v| acc * side + v as usize)
        } else {
            spatial_hash(vertex, self.config.table_size())
        }
    }

    fn check_domain(&self, x: &[T]) -> Result<()> {
        if x.len() != self.config.dim {
            return Err(Error::invalid(format!(
                "expected a {}-vector, got length {}",
                self.config.dim,
                x.len()
            )));
        }
        if x.iter().any(|v| !(*v >= T::zero() && *v <= T::one())) {
            return Err(Error::OutOfDomain(format!("{x:?} not in the unit cube")));
        }
        Ok(())
    }

    #[inline]
    fn level_cell(&self, level: usize, x: &[T]) -> LevelCell<T> {
        let d = self.config.dim;
        let n = self.resolutions[level];
        let scale = T::lit(n as f64);
        let mut base = [0u32; MAX_DIM];
        let mut frac = [T::zero(); MAX_DIM];
        for i in 0..d {
            let s = x[i] * scale;
            let c = (s.ceil().to_i64().unwrap_or(0) - 1).clamp(0, n as i64 - 1) as u32;
            base[i] = c;
            frac[i] = s - T::lit(c as f64);
        }
        let mut rows = [0usize; MAX_CORNERS];
        let mut vertex = [0u32; MAX_DIM];
        for (corner, row) in rows.iter_mut().enumerate().take(1 << d) {
            for i in 0..d {
                vertex[i] = base[i] + ((corner >> i) & 1) as u32;
            }
            *row = self.vertex_row(level, &vertex[..d]);
        }
        LevelCell { rows, frac, scale }
    }

    #[inline]
    fn corner_weight(cell: &LevelCell<T>, corner: usize, d: usize) -> T {
        let mut w = T::one();
        for i in 0..d {
            w *= if (corner >> i) & 1 == 1 {
                cell.frac[i]
            } else {
                T::one() - cell.frac[i]
            };
        }
        w
    }

    /// Interpolation weights of the `2^d` corners of each level's cell.
    pub fn corner_weights(&self, x: &[T]) -> Result<Vec<Vec<T>>> {
        self.check_domain(x)?;
        let d = self.config.dim;
        Ok((0..self.config.levels)
            .map(|l| {
                let cell = self.level_cell(l, x);
                (0..1 << d).map(|c| Self::corner_weight(&cell, c, d)).collect()
            })
            .collect())
    }

    /// Encodes `x` in `[0,1]^d` into `out` (length `L * F`).
    pub fn encode(&self, x: &[T], out: &mut [T]) -> Result<()> {
        self.check_domain(x)?;
        if out.len() != self.output_len() {
            return Err(Error::invalid("encode: output buffer has the wrong length"));
        }
        self.encode_unchecked(x, out);
        Ok(())
    }

    pub(crate) fn encode_unchecked(&self, x: &[T], out: &mut [T]) {
        let d = self.config.dim;
        let f = self.config.features_per_level;
        let level_stride = self.config.table_size() * f;
        for l in 0..self.config.levels {
            let cell = self.level_cell(l, x);
            let table = &self.params[l * level_stride..(l + 1) * level_stride];
            let block = &mut out[l * f..(l + 1) * f];
            block.iter_mut().for_each(|v| *v = T::zero());
            for c in 0..1 << d {
                let w = Self::corner_weight(&cell, c, d);
                let row = &table[cell.rows[c] * f..(cell.rows[c] + 1) * f];
                for k in 0..f {
                    block[k] += w * row[k];
                }
            }
        }
    }

    /// Accumulates table gradients into `table_grad` and writes the input
    /// gradient into `input_grad` for the upstream gradient of one encoding.
    pub fn encode_backward(
        &self,
        x: &[T],
        upstream: &[T],
        table_grad: &mut [T],
        input_grad: &mut [T],
    ) -> Result<()> {
        self.check_domain(x)?;
        if upstream.len() != self.output_len()
            || table_grad.len() != self.params.len()
            || input_grad.len() != self.config.dim
        {
            return Err(Error::invalid("encode_backward: buffer length mismatch"));
        }
        self.backward_unchecked(x, upstream, Some(table_grad), Some(input_grad));
        Ok(())
    }

    pub(crate) fn backward_unchecked(
        &self,
        x: &[T],
        upstream: &[T],
        mut table_grad: Option<&mut [T]>,
        mut input_grad: Option<&mut [T]>,
    ) {
        let d = self.config.dim;
        let f = self.config.features_per_level;
        let level_stride = self.config.table_size() * f;
        if let Some(g) = input_grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = T::zero());
        }
        for l in 0..self.config.levels {
            let up = &upstream[l * f..(l + 1) * f];
            if up.iter().all(|v| *v == T::zero()) {
                continue;
            }
            let cell = self.level_cell(l, x);
            if let Some(tg) = table_grad.as_deref_mut() {
                let tg = &mut tg[l * level_stride..(l + 1) * level_stride];
                for c in 0..1 << d {
                    let w = Self::corner_weight(&cell, c, d);
                    let row = &mut tg[cell.rows[c] * f..(cell.rows[c] + 1) * f];
                    for k in 0..f {
                        row[k] += w * up[k];
                    }
                }
            }
            if let Some(ig) = input_grad.as_deref_mut() {
                let table = &self.params[l * level_stride..(l + 1) * level_stride];
                for c in 0..1 << d {
                    let row = &table[cell.rows[c] * f..(cell.rows[c] + 1) * f];
                    let proj: T = (0..f).map(|k| row[k] * up[k]).sum();
                    if proj == T::zero() {
                        continue;
                    }
                    for (i, gi) in ig.iter_mut().enumerate() {
                        let mut w = T::one();
                        for j in 0..d {
                            if j == i {
                                continue;
                            }
                            w *= if (c >> j) & 1 == 1 {
                                cell.frac[j]
                            } else {
                                T::one() - cell.frac[j]
                            };
                        }
                        let sign = if (c >> i) & 1 == 1 { T::one() } else { -T::one() };
                        *gi += sign * w * cell.scale * proj;
                    }
                }
            }
        }
    }

    const MAGIC: &'static [u8; 4] = b"HGRD";

    /// Little-endian layout: magic `HGRD`, six `u32` config fields
    /// (dim, levels, log2 T, F, N_min, N_max), then `L*T*F` `f32` values.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        let c = &self.config;
        for v in [
            c.dim as u32,
            c.levels as u32,
            c.log2_table_size,
            c.features_per_level as u32,
            c.base_resolution,
            c.max_resolution,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for p in &self.params {
            w.write_all(&p.to_f32().unwrap_or(f32::NAN).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::Format("not a hash grid block".into()));
        }
        let mut fields = [0u32; 6];
        for f in fields.iter_mut() {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *f = u32::from_le_bytes(b);
        }
        let config = HashGridConfig {
            dim: fields[0] as usize,
            levels: fields[1] as usize,
            log2_table_size: fields[2],
            features_per_level: fields[3] as usize,
            base_resolution: fields[4],
            max_resolution: fields[5],
        };
        let mut grid = Self::zeros(config)?;
        let mut b = [0u8; 4];
        for p in grid.params.iter_mut() {
            r.read_exact(&mut b)?;
            *p = T::lit(f32::from_le_bytes(b) as f64);
        }
        Ok(grid)
    }
}
