use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Draws pixel ids without replacement, reshuffling after each pass.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelSampler {
    order: Vec<u32>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl PixelSampler {
    pub fn new(total: usize, rng: ChaCha8Rng) -> Self {
        let mut s = Self {
            order: (0..total as u32).collect(),
            cursor: total,
            rng,
        };
        s.reshuffle();
        s
    }

    fn reshuffle(&mut self) {
        self.order.shuffle(&mut self.rng);
        self.cursor = 0;
    }

    pub fn next_batch(&mut self, n: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n && !self.order.is_empty() {
            if self.cursor == self.order.len() {
                self.reshuffle();
            }
            out.push(self.order[self.cursor] as usize);
            self.cursor += 1;
        }
        out
    }

    pub fn total(&self) -> usize {
        self.order.len()
    }

    pub(crate) fn parts(&self) -> (&[u32], usize, &ChaCha8Rng) {
        (&self.order, self.cursor, &self.rng)
    }

    pub(crate) fn from_parts(order: Vec<u32>, cursor: usize, rng: ChaCha8Rng) -> Self {
        Self { order, cursor, rng }
    }
}

/// Independent generator for one purpose derived from the run seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
