use nalgebra::Vector3;
use rand::Rng;

use super::RadianceField;
use crate::error::{Error, Result};

/// Coarse density cache over a box used to skip empty space.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    resolution: usize,
    min: Vector3<f64>,
    max: Vector3<f64>,
    threshold: f64,
    densities: Vec<f32>,
    occupied: Vec<bool>,
}

impl OccupancyGrid {
    /// Grid with every cell set to `initial_density`.
    pub fn new(
        resolution: usize,
        min: Vector3<f64>,
        max: Vector3<f64>,
        threshold: f64,
        initial_density: f64,
    ) -> Result<Self> {
        Self::from_parts(
            resolution,
            min,
            max,
            threshold,
            vec![initial_density as f32; resolution.pow(3)],
        )
    }

    pub fn all_occupied(resolution: usize, min: Vector3<f64>, max: Vector3<f64>) -> Result<Self> {
        Self::new(resolution, min, max, 0.0, 1.0)
    }

    pub fn from_parts(
        resolution: usize,
        min: Vector3<f64>,
        max: Vector3<f64>,
        threshold: f64,
        densities: Vec<f32>,
    ) -> Result<Self> {
        if resolution == 0 || densities.len() != resolution.pow(3) {
            return Err(Error::invalid("occupancy grid needs res^3 > 0 cells"));
        }
        if (0..3).any(|i| !(max[i] > min[i])) {
            return Err(Error::invalid("occupancy box must have positive extent"));
        }
        if !(threshold >= 0.0) || densities.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::invalid("occupancy densities and threshold must be finite and >= 0"));
        }
        let occupied = densities.iter().map(|&d| f64::from(d) > threshold).collect();
        Ok(Self {
            resolution,
            min,
            max,
            threshold,
            densities,
            occupied,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn bounds(&self) -> (Vector3<f64>, Vector3<f64>) {
        (self.min, self.max)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn densities(&self) -> &[f32] {
        &self.densities
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupied
    }

    pub fn occupied_fraction(&self) -> f64 {
        self.occupied.iter().filter(|&&o| o).count() as f64 / self.occupied.len() as f64
    }

    /// Flat index of the cell containing `p`, or `None` outside the box.
    pub fn cell_of(&self, p: &Vector3<f64>) -> Option<usize> {
        let n = self.resolution;
        let mut idx = 0;
        for i in 0..3 {
            let u = (p[i] - self.min[i]) / (self.max[i] - self.min[i]);
            if !(-1e-9..=1.0 + 1e-9).contains(&u) {
                return None;
            }
            let c = ((u * n as f64).floor() as i64).clamp(0, n as i64 - 1) as usize;
            idx = idx * n + c;
        }
        Some(idx)
    }

    pub fn cell_center(&self, index: usize) -> Vector3<f64> {
        self.cell_point(index, [0.5; 3])
    }

    fn cell_point(&self, index: usize, offset: [f64; 3]) -> Vector3<f64> {
        let n = self.resolution;
        let c = [index / (n * n), (index / n) % n, index % n];
        Vector3::from_fn(|i, _| {
            self.min[i] + (c[i] as f64 + offset[i]) / n as f64 * (self.max[i] - self.min[i])
        })
    }

    pub fn is_occupied(&self, p: &Vector3<f64>) -> bool {
        self.cell_of(p).is_some_and(|i| self.occupied[i])
    }

    /// One jittered density probe per cell; densities decay then take the max.
    pub fn update<F: RadianceField + ?Sized, R: Rng>(&mut self, field: &mut F, decay: f64, rng: &mut R) {
        for i in 0..self.densities.len() {
            let jitter: [f64; 3] = [rng.random(), rng.random(), rng.random()];
            let sigma = field.density(&self.cell_point(i, jitter));
            let sigma = if sigma.is_finite() { sigma.max(0.0) } else { 0.0 };
            let decayed = f64::from(self.densities[i]) * decay;
            self.densities[i] = decayed.max(sigma) as f32;
            self.occupied[i] = f64::from(self.densities[i]) > self.threshold;
        }
    }
}

pub fn update_occupancy<F: RadianceField + ?Sized, R: Rng>(
    grid: &mut OccupancyGrid,
    field: &mut F,
    decay: f64,
    rng: &mut R,
) -> Result<()> {
    if !(decay > 0.0 && decay <= 1.0) {
        return Err(Error::invalid(format!("occupancy decay {decay} not in (0, 1]")));
    }
    grid.update(field, decay, rng);
    Ok(())
}
