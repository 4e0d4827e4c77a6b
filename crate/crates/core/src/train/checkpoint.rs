//! Binary checkpoint container for [`TrainState`].
//!
//! Everything is little-endian, in this order:
//!
//! | field | encoding |
//! |---|---|
//! | magic, version | `HBCK`, u32 = 1 |
//! | config | u64 byte length, UTF-8 `key = value` text |
//! | iteration, batch_rays, over-limit counter | u64 each |
//! | grids | u32 count, then one hash-grid block each (`HGRD` header, f32 tables) |
//! | field MLP | u64 count, f32 parameters |
//! | poses | u64 camera count, then per camera 6 f64 initial params and 6 f64 corrections |
//! | optimizer states | grids in order, then field, then poses; each is u64 step, f64 beta1, beta2, eps, u64 length, f32 first moments, f32 second moments |
//! | occupancy | u64 resolution, 3 f64 min, 3 f64 max, f64 threshold, u64 count, f32 densities |
//! | pixel sampler | u64 count, u32 pixel ids, u64 cursor, rng |
//! | occupancy rng | rng |
//! | loss history | u64 count, f64 losses |
//!
//! An rng is stored as its 32 seed bytes, u64 stream and u128 word position.

use std::io::{Read, Write};

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::model::NeuralScene;
use super::poses::PoseSet;
use super::sampler::PixelSampler;
use super::state::TrainState;
use crate::diff::AdamState;
use crate::error::{Error, Result};
use crate::geom::PoseSE3;
use crate::hashgrid::HashGrid;
use crate::render::OccupancyGrid;

const MAGIC: &[u8; 4] = b"HBCK";
const VERSION: u32 = 1;
/// Upper bound on any stored element count, to reject corrupt headers
/// before allocating.
const MAX_LEN: u64 = 1 << 32;

struct Out<'a, W: Write>(&'a mut W);

impl<W: Write> Out<'_, W> {
    fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.0.write_all(b).map_err(Error::from)
    }
    fn u32(&mut self, v: u32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn len(&mut self, n: usize) -> Result<()> {
        self.u64(n as u64)
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn f32s(&mut self, v: &[f32]) -> Result<()> {
        self.len(v.len())?;
        v.iter().try_for_each(|x| self.bytes(&x.to_le_bytes()))
    }
    fn rng(&mut self, r: &ChaCha8Rng) -> Result<()> {
        self.bytes(&r.get_seed())?;
        self.u64(r.get_stream())?;
        self.bytes(&r.get_word_pos().to_le_bytes())
    }
    fn adam(&mut self, a: &AdamState) -> Result<()> {
        self.u64(a.step)?;
        self.f64(a.beta1)?;
        self.f64(a.beta2)?;
        self.f64(a.eps)?;
        self.f32s(&a.first_moment)?;
        self.f32s(&a.second_moment)
    }
}

struct In<'a, R: Read>(&'a mut R);

impl<R: Read> In<'_, R> {
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b)?;
        Ok(b)
    }
    fn u32(&mut self) -> Result<u32> {
        self.array().map(u32::from_le_bytes)
    }
    fn u64(&mut self) -> Result<u64> {
        self.array().map(u64::from_le_bytes)
    }
    fn len(&mut self) -> Result<usize> {
        let n = self.u64()?;
        if n > MAX_LEN {
            return Err(Error::Format(format!("implausible element count {n}")));
        }
        Ok(n as usize)
    }
    fn f64(&mut self) -> Result<f64> {
        self.array().map(f64::from_le_bytes)
    }
    fn f32s(&mut self) -> Result<Vec<f32>> {
        let n = self.len()?;
        (0..n).map(|_| self.array().map(f32::from_le_bytes)).collect()
    }
    fn rng(&mut self) -> Result<ChaCha8Rng> {
        let mut r = ChaCha8Rng::from_seed(self.array()?);
        r.set_stream(self.u64()?);
        r.set_word_pos(u128::from_le_bytes(self.array()?));
        Ok(r)
    }
    fn adam(&mut self, expected: usize) -> Result<AdamState> {
        let step = self.u64()?;
        let (beta1, beta2, eps) = (self.f64()?, self.f64()?, self.f64()?);
        let first_moment = self.f32s()?;
        let second_moment = self.f32s()?;
        if first_moment.len() != expected || second_moment.len() != expected {
            return Err(Error::Format("optimizer state does not match its parameter group".into()));
        }
        Ok(AdamState {
            first_moment,
            second_moment,
            step,
            beta1,
            beta2,
            eps,
        })
    }
}

impl TrainState {
    pub fn save_checkpoint<W: Write>(&self, w: &mut W) -> Result<()> {
        let mut o = Out(w);
        o.bytes(MAGIC)?;
        o.u32(VERSION)?;
        let text = self.config.to_text();
        o.len(text.len())?;
        o.bytes(text.as_bytes())?;
        o.len(self.iteration)?;
        o.len(self.batch_rays)?;
        o.len(self.over_limit_steps)?;
        o.u32(self.scene.grids.len() as u32)?;
        for g in &self.scene.grids {
            g.write_to(o.0)?;
        }
        o.f32s(self.scene.field.params())?;
        o.len(self.poses.len())?;
        for (i, p) in self.poses.init.iter().enumerate() {
            p.params.iter().try_for_each(|&v| o.f64(v))?;
            self.poses.delta[6 * i..6 * i + 6].iter().try_for_each(|&v| o.f64(v))?;
        }
        for a in self.adam_grids.iter().chain([&self.adam_field, &self.adam_poses]) {
            o.adam(a)?;
        }
        let occ = &self.occupancy;
        let (min, max) = occ.bounds();
        o.len(occ.resolution())?;
        min.iter().chain(max.iter()).try_for_each(|&v| o.f64(v))?;
        o.f64(occ.threshold())?;
        o.f32s(occ.densities())?;
        let (order, cursor, rng) = self.sampler.parts();
        o.len(order.len())?;
        order.iter().try_for_each(|&v| o.u32(v))?;
        o.len(cursor)?;
        o.rng(rng)?;
        o.rng(&self.occupancy_rng)?;
        o.len(self.loss_history.len())?;
        self.loss_history.iter().try_for_each(|&v| o.f64(v))?;
        o.0.flush()?;
        Ok(())
    }

    pub fn load_checkpoint<R: Read>(r: &mut R) -> Result<Self> {
        let mut i = In(r);
        if &i.array::<4>()? != MAGIC {
            return Err(Error::Format("not a checkpoint file".into()));
        }
        let version = i.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let n = i.len()?;
        let mut text = vec![0u8; n];
        i.0.read_exact(&mut text)?;
        let text = String::from_utf8(text).map_err(|_| Error::Format("config is not UTF-8".into()))?;
        let config = TrainConfig::from_text(&text)?;
        let iteration = i.len()?;
        let batch_rays = i.len()?;
        let over_limit_steps = i.len()?;

        let grid_count = i.u32()? as usize;
        if grid_count == 0 || grid_count > 2 {
            return Err(Error::Format(format!("unexpected grid count {grid_count}")));
        }
        let grids = (0..grid_count)
            .map(|_| HashGrid::<f32>::read_from(i.0))
            .collect::<Result<Vec<_>>>()?;
        let mut scene = NeuralScene::for_experiment(&config, &mut ChaCha8Rng::seed_from_u64(0))?;
        if scene.grids.len() != grids.len()
            || scene.grids.iter().zip(&grids).any(|(a, b)| a.config() != b.config())
        {
            return Err(Error::Format("grid layout disagrees with the stored config".into()));
        }
        scene.grids = grids;
        let field = i.f32s()?;
        if field.len() != scene.field.params().len() {
            return Err(Error::Format("field parameter count mismatch".into()));
        }
        scene.field.params_mut().copy_from_slice(&field);

        let cams = i.len()?;
        let mut init = Vec::with_capacity(cams);
        let mut delta = Vec::with_capacity(6 * cams);
        for _ in 0..cams {
            let mut p = [0.0; 6];
            for v in p.iter_mut() {
                *v = i.f64()?;
            }
            init.push(PoseSE3::from_params(p));
            for _ in 0..6 {
                delta.push(i.f64()?);
            }
        }
        let adam_grids = scene
            .grids
            .iter()
            .map(|g| i.adam(g.params().len()))
            .collect::<Result<Vec<_>>>()?;
        let adam_field = i.adam(scene.field.params().len())?;
        let adam_poses = i.adam(6 * cams)?;

        let res = i.len()?;
        let mut b = [0.0; 6];
        for v in b.iter_mut() {
            *v = i.f64()?;
        }
        let threshold = i.f64()?;
        let densities = i.f32s()?;
        let occupancy = OccupancyGrid::from_parts(
            res,
            Vector3::new(b[0], b[1], b[2]),
            Vector3::new(b[3], b[4], b[5]),
            threshold,
            densities,
        )
        .map_err(|e| Error::Format(format!("occupancy block: {e}")))?;

        let total = i.len()?;
        let order = (0..total).map(|_| i.u32()).collect::<Result<Vec<_>>>()?;
        let cursor = i.len()?;
        if cursor > order.len() || order.iter().any(|&id| id as usize >= total) {
            return Err(Error::Format("pixel sampler state is inconsistent".into()));
        }
        let sampler = PixelSampler::from_parts(order, cursor, i.rng()?);
        let occupancy_rng = i.rng()?;
        let h = i.len()?;
        let loss_history = (0..h).map(|_| i.f64()).collect::<Result<Vec<_>>>()?;

        Ok(TrainState::from_parts(
            config,
            scene,
            PoseSet { init, delta },
            (adam_grids, adam_field, adam_poses),
            occupancy,
            (iteration, batch_rays, over_limit_steps),
            loss_history,
            sampler,
            occupancy_rng,
        ))
    }
}
