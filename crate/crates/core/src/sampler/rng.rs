use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Independent ChaCha8 streams, one per move kind, all keyed by the chain
/// seed.
///
/// | stream | use |
/// |---|---|
/// | 0 | move-kind schedule |
/// | 1 | owner swaps |
/// | 2 | multiplicity changes |
/// | 3 | partition moves |
/// | 4 | pair toggles |
#[derive(Clone, Debug)]
pub struct ChainRng {
    pub schedule: ChaCha8Rng,
    pub owner: ChaCha8Rng,
    pub multiplicity: ChaCha8Rng,
    pub partition: ChaCha8Rng,
    pub toggle: ChaCha8Rng,
}

/// Word positions of every stream, enough to resume bit-exactly.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngCursor {
    pub seed: u64,
    pub word_pos: [u128; 5],
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

impl ChainRng {
    pub fn new(seed: u64) -> Self {
        ChainRng {
            schedule: stream(seed, 0),
            owner: stream(seed, 1),
            multiplicity: stream(seed, 2),
            partition: stream(seed, 3),
            toggle: stream(seed, 4),
        }
    }

    pub fn cursor(&self, seed: u64) -> RngCursor {
        RngCursor {
            seed,
            word_pos: [
                self.schedule.get_word_pos(),
                self.owner.get_word_pos(),
                self.multiplicity.get_word_pos(),
                self.partition.get_word_pos(),
                self.toggle.get_word_pos(),
            ],
        }
    }

    pub fn from_cursor(c: &RngCursor) -> Self {
        let mut r = Self::new(c.seed);
        r.schedule.set_word_pos(c.word_pos[0]);
        r.owner.set_word_pos(c.word_pos[1]);
        r.multiplicity.set_word_pos(c.word_pos[2]);
        r.partition.set_word_pos(c.word_pos[3]);
        r.toggle.set_word_pos(c.word_pos[4]);
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn cursor_resumes_streams() {
        let mut a = ChainRng::new(9);
        for _ in 0..17 {
            a.owner.gen::<u64>();
            a.partition.gen::<f64>();
        }
        let mut b = ChainRng::from_cursor(&a.cursor(9));
        for _ in 0..50 {
            assert_eq!(a.owner.gen::<u64>(), b.owner.gen::<u64>());
            assert_eq!(a.partition.gen::<u32>(), b.partition.gen::<u32>());
            assert_eq!(a.schedule.gen::<u32>(), b.schedule.gen::<u32>());
        }
    }

    #[test]
    fn streams_differ() {
        let mut a = ChainRng::new(1);
        assert_ne!(a.owner.gen::<u64>(), a.multiplicity.gen::<u64>());
    }
}
