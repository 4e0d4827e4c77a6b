//! Hash-grid radiance model with fused forward and backward passes per ray.

use nalgebra::Vector3;
use rand::Rng;

use super::config::{Experiment, TrainConfig};
use super::state::scene_box;
use crate::c2f::LevelBlend;
use crate::error::{Error, Result};
use crate::field::{FieldCache, FieldConfig, FieldMlp, FieldScratch};
use crate::geom::{contract, contract_backward, Branch, Ray, SceneContraction};
use crate::hashgrid::{HashGrid, HashGridConfig};
use crate::render::{composite_backward_into, Composite, CompositeGrad, FieldSample, RadianceField, Sample};

/// Hash grids (one for bounded scenes; in-sphere and outside grids for
/// unbounded ones) feeding a shared field decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralScene {
    pub grids: Vec<HashGrid<f32>>,
    pub field: FieldMlp<f32>,
    pub contraction: SceneContraction,
}

/// Parameter gradients matching [`NeuralScene`]'s layout.
#[derive(Debug, Clone)]
pub struct SceneGrads {
    pub grids: Vec<Vec<f32>>,
    pub field: Vec<f32>,
}

impl SceneGrads {
    pub fn zero(&mut self) {
        self.grids.iter_mut().for_each(|g| g.fill(0.0));
        self.field.fill(0.0);
    }
}

struct SamplePoint {
    grid: usize,
    unit: [f32; 4],
    point: Vector3<f64>,
    branch: Branch,
}

/// Buffers reused across rays.
pub struct RayWorkspace {
    points: Vec<SamplePoint>,
    encoded: Vec<f32>,
    blended: Vec<f32>,
    caches: Vec<FieldCache<f32>>,
    sigmas: Vec<f64>,
    colors: Vec<[f64; 3]>,
    deltas: Vec<f64>,
    trans: Vec<f64>,
    cgrad: CompositeGrad<f64>,
    d_blended: Vec<f32>,
    d_encoded: Vec<f32>,
    field_scratch: FieldScratch<f32>,
}

impl NeuralScene {
    /// Randomly initialized model. Unbounded scenes get a 3D grid for the
    /// unit ball and a 4D grid for inverted-sphere quadruples.
    pub fn new<R: Rng>(grid: HashGridConfig, contraction: SceneContraction, rng: &mut R) -> Result<Self> {
        let mut grids = vec![HashGrid::new(HashGridConfig { dim: 3, ..grid.clone() }, rng)?];
        if contraction == SceneContraction::InvertedSphere {
            grids.push(HashGrid::new(HashGridConfig { dim: 4, ..grid.clone() }, rng)?);
        }
        let field = FieldMlp::new(FieldConfig::new(grid.output_len()), rng)?;
        Ok(Self {
            grids,
            field,
            contraction,
        })
    }

    /// Scene for a 3D experiment: the `[-1,1]^3` box for bounded runs, the
    /// inverted sphere for unbounded ones.
    pub fn for_experiment<R: Rng>(config: &TrainConfig, rng: &mut R) -> Result<Self> {
        let contraction = match config.experiment {
            Experiment::Bounded3d => {
                let (min, max) = scene_box();
                SceneContraction::Aabb { min, max }
            }
            Experiment::Unbounded3d => SceneContraction::InvertedSphere,
            Experiment::Homography2d => {
                return Err(Error::invalid("homography runs use the planar experiment driver"))
            }
        };
        Self::new(config.grid_config(3), contraction, rng)
    }

    pub fn levels(&self) -> usize {
        self.grids[0].config().levels
    }

    pub fn encoded_len(&self) -> usize {
        self.grids[0].output_len()
    }

    pub fn zero_grads(&self) -> SceneGrads {
        SceneGrads {
            grids: self.grids.iter().map(|g| vec![0.0; g.params().len()]).collect(),
            field: vec![0.0; self.field.params().len()],
        }
    }

    pub fn workspace(&self) -> RayWorkspace {
        RayWorkspace {
            points: Vec::new(),
            encoded: Vec::new(),
            blended: Vec::new(),
            caches: Vec::new(),
            sigmas: Vec::new(),
            colors: Vec::new(),
            deltas: Vec::new(),
            trans: Vec::new(),
            cgrad: CompositeGrad {
                d_sigma: Vec::new(),
                d_color: Vec::new(),
                d_delta: Vec::new(),
            },
            d_blended: vec![0.0; self.encoded_len()],
            d_encoded: vec![0.0; self.encoded_len()],
            field_scratch: self.field.new_scratch(),
        }
    }

    fn locate(&self, p: &Vector3<f64>) -> Result<SamplePoint> {
        let c = contract(p, &self.contraction)?;
        let (grid, dim) = match c.branch {
            Branch::OutSphere => (1, 4),
            _ => (0, 3),
        };
        let mut unit = [0.0f32; 4];
        for i in 0..dim {
            unit[i] = (c.unit[i] as f32).clamp(0.0, 1.0);
        }
        Ok(SamplePoint {
            grid,
            unit,
            point: *p,
            branch: c.branch,
        })
    }

    fn dim(&self, grid: usize) -> usize {
        self.grids[grid].config().dim
    }

    /// Evaluates the field along the samples, caching activations for
    /// [`NeuralScene::backward_ray`], and composites over `background`.
    pub fn forward_ray(
        &self,
        ray: &Ray,
        samples: &[Sample],
        blend: &LevelBlend,
        background: [f64; 3],
        ws: &mut RayWorkspace,
    ) -> Result<Composite<f64>> {
        let n = samples.len();
        let e = self.encoded_len();
        ws.points.clear();
        ws.sigmas.clear();
        ws.colors.clear();
        ws.deltas.clear();
        ws.encoded.resize(n * e, 0.0);
        ws.blended.resize(n * e, 0.0);
        while ws.caches.len() < n {
            ws.caches.push(self.field.new_cache());
        }
        let dir = [ray.direction.x as f32, ray.direction.y as f32, ray.direction.z as f32];
        for (i, s) in samples.iter().enumerate() {
            let sp = self.locate(&ray.at(s.t))?;
            let d = self.dim(sp.grid);
            let enc = &mut ws.encoded[i * e..(i + 1) * e];
            self.grids[sp.grid].encode_unchecked(&sp.unit[..d], enc);
            let blended = &mut ws.blended[i * e..(i + 1) * e];
            blend.apply(enc, blended);
            let out = self.field.forward(blended, dir, &mut ws.caches[i]);
            ws.sigmas.push(f64::from(out.sigma));
            ws.colors.push(out.rgb.map(f64::from));
            ws.deltas.push(s.delta);
            ws.points.push(sp);
        }
        let c = crate::render::composite(&ws.sigmas, &ws.colors, &ws.deltas, background)?;
        if !c.rgb.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("non-finite color in forward pass"));
        }
        Ok(c)
    }

    /// Backpropagates `d_rgb` through the last [`NeuralScene::forward_ray`]
    /// call. Returns the gradients with respect to the ray origin and
    /// direction when `want_ray` is set (zeros otherwise).
    #[allow(clippy::too_many_arguments)]
    pub fn backward_ray(
        &self,
        samples: &[Sample],
        blend: &LevelBlend,
        background: [f64; 3],
        d_rgb: [f64; 3],
        ws: &mut RayWorkspace,
        grads: &mut SceneGrads,
        want_ray: bool,
    ) -> (Vector3<f64>, Vector3<f64>) {
        let n = samples.len();
        let e = self.encoded_len();
        ws.trans.resize(n + 1, 0.0);
        ws.cgrad.d_sigma.resize(n, 0.0);
        ws.cgrad.d_color.resize(n, [0.0; 3]);
        ws.cgrad.d_delta.resize(n, 0.0);
        composite_backward_into(
            &ws.sigmas,
            &ws.colors,
            &ws.deltas,
            background,
            d_rgb,
            0.0,
            &mut ws.trans,
            &mut ws.cgrad,
        );
        let mut g_origin = Vector3::zeros();
        let mut g_dir = Vector3::zeros();
        let mut d_unit = [0.0f32; 4];
        for i in 0..n {
            let d_sigma = ws.cgrad.d_sigma[i] as f32;
            let d_col = ws.cgrad.d_color[i].map(|v| v as f32);
            if d_sigma == 0.0 && d_col == [0.0; 3] {
                continue;
            }
            let d_view = self.field.backward(
                &ws.caches[i],
                d_sigma,
                d_col,
                &mut grads.field,
                &mut ws.d_blended,
                want_ray,
                &mut ws.field_scratch,
            );
            blend.backward(&ws.d_blended, &mut ws.d_encoded);
            let sp = &ws.points[i];
            let d = self.dim(sp.grid);
            self.grids[sp.grid].backward_unchecked(
                &sp.unit[..d],
                &ws.d_encoded[..e],
                Some(&mut grads.grids[sp.grid]),
                want_ray.then_some(&mut d_unit[..d]),
            );
            if want_ray {
                let g_unit: Vec<f64> = d_unit[..d].iter().map(|&v| f64::from(v)).collect();
                let d_p = contract_backward(&sp.point, &self.contraction, sp.branch, &g_unit);
                g_origin += d_p;
                g_dir += d_p * samples[i].t + Vector3::new(d_view[0].into(), d_view[1].into(), d_view[2].into());
            }
        }
        (g_origin, g_dir)
    }

    /// Gradient-free evaluator for rendering and occupancy updates.
    pub fn evaluator<'a>(&'a self, blend: &'a LevelBlend) -> SceneEvaluator<'a> {
        SceneEvaluator {
            scene: self,
            blend,
            encoded: vec![0.0; self.encoded_len()],
            blended: vec![0.0; self.encoded_len()],
            cache: self.field.new_cache(),
            density_acts: self.field.density_scratch(),
        }
    }
}

pub struct SceneEvaluator<'a> {
    scene: &'a NeuralScene,
    blend: &'a LevelBlend,
    encoded: Vec<f32>,
    blended: Vec<f32>,
    cache: FieldCache<f32>,
    density_acts: Vec<f32>,
}

impl SceneEvaluator<'_> {
    fn encode(&mut self, p: &Vector3<f64>) -> bool {
        let Ok(sp) = self.scene.locate(p) else {
            return false;
        };
        let d = self.scene.dim(sp.grid);
        self.scene.grids[sp.grid].encode_unchecked(&sp.unit[..d], &mut self.encoded);
        self.blend.apply(&self.encoded, &mut self.blended);
        true
    }
}

impl RadianceField for SceneEvaluator<'_> {
    fn sample(&mut self, p: &Vector3<f64>, dir: &Vector3<f64>) -> FieldSample {
        if !self.encode(p) {
            return FieldSample {
                sigma: 0.0,
                rgb: [0.0; 3],
            };
        }
        let d = [dir.x as f32, dir.y as f32, dir.z as f32];
        let out = self.scene.field.forward(&self.blended, d, &mut self.cache);
        FieldSample {
            sigma: f64::from(out.sigma),
            rgb: out.rgb.map(f64::from),
        }
    }

    fn density(&mut self, p: &Vector3<f64>) -> f64 {
        if !self.encode(p) {
            return 0.0;
        }
        f64::from(self.scene.field.density(&self.blended, &mut self.density_acts))
    }
}
