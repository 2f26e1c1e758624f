//! Counter-based random substreams.
//!
//! A single root seed keys a ChaCha8 generator; every (step, phase, level,
//! block) tuple selects a distinct 64-bit stream id of that key. Particles are
//! grouped in fixed blocks of [`BLOCK`] per level, so the numbers a particle
//! consumes never depend on how many workers process the ensemble.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Particles per substream block.
pub const BLOCK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Init = 0,
    Resample = 1,
    Mutate = 2,
    Data = 3,
    Covariance = 4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Substreams {
    seed: u64,
}

impl Substreams {
    pub fn new(seed: u64) -> Self {
        Substreams { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Generator for one (step, phase, level, block) cell.
    pub fn stream(&self, step: usize, phase: Phase, level: usize, block: usize) -> StreamRng {
        assert!(step < 1 << 32, "step index exceeds stream id range");
        assert!(level < 1 << 8, "level index exceeds stream id range");
        assert!(block < 1 << 20, "block index exceeds stream id range");
        let id = (step as u64) << 32 | (phase as u64) << 28 | (level as u64) << 20 | block as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id);
        rng
    }

    /// Independent child family, e.g. one per repeat of an experiment.
    pub fn child(&self, index: u64) -> Substreams {
        Substreams::new(splitmix64(
            self.seed ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d)),
        ))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn draw(mut r: StreamRng) -> Vec<u64> {
        (0..8).map(|_| r.random()).collect()
    }

    #[test]
    fn same_cell_same_numbers() {
        let s = Substreams::new(7);
        assert_eq!(
            draw(s.stream(3, Phase::Mutate, 1, 2)),
            draw(s.stream(3, Phase::Mutate, 1, 2))
        );
    }

    #[test]
    fn cells_are_distinct() {
        let s = Substreams::new(7);
        let base = draw(s.stream(3, Phase::Mutate, 1, 2));
        assert_ne!(base, draw(s.stream(4, Phase::Mutate, 1, 2)));
        assert_ne!(base, draw(s.stream(3, Phase::Resample, 1, 2)));
        assert_ne!(base, draw(s.stream(3, Phase::Mutate, 0, 2)));
        assert_ne!(base, draw(s.stream(3, Phase::Mutate, 1, 3)));
        assert_ne!(base, draw(Substreams::new(8).stream(3, Phase::Mutate, 1, 2)));
    }

    #[test]
    fn children_differ() {
        let s = Substreams::new(1);
        assert_ne!(s.child(0), s.child(1));
        assert_eq!(s.child(5), s.child(5));
    }
}
