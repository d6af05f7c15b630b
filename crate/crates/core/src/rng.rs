//! Counter-based, keyed random streams.
//!
//! Every random quantity in the toolkit is drawn from a [`RandomStream`]
//! identified by `(master seed, stream key)`. Keys are derived from a domain
//! tag and an object id (for example `(GENERATOR, batch_id)`), so a decoder
//! that knows the master seed can regenerate any batch's generator matrix
//! without replaying the encoder.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gf::Field;

/// Domain tags used for key derivation.
pub mod domain {
    pub const BATCH: u64 = 0x4241_5443_4800_0001;
    pub const PRECODE: u64 = 0x5052_4543_4f44_0002;
    pub const PAYLOAD: u64 = 0x5041_594c_4f41_0003;
    pub const CHANNEL: u64 = 0x4348_414e_4e45_0004;
    pub const RECODE: u64 = 0x5245_434f_4445_0005;
    pub const DECODER: u64 = 0x4445_434f_4445_0006;
    pub const TRIAL: u64 = 0x5452_4941_4c00_0007;
    pub const SAMPLE: u64 = 0x5341_4d50_4c45_0008;
}

/// SplitMix64 finalizer.
#[inline]
pub const fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream key for object `id` within `domain`.
#[inline]
pub const fn derive_key(domain: u64, id: u64) -> u64 {
    mix64(mix64(domain) ^ id.rotate_left(17) ^ mix64(id))
}

#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    key: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, key: u64) -> Self {
        let mut bytes = [0u8; 32];
        let mut s = seed;
        for chunk in bytes.chunks_exact_mut(8) {
            s = mix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(bytes);
        rng.set_stream(key);
        RandomStream { seed, key, rng }
    }

    /// Stream for `(domain, id)` under `seed`.
    pub fn derive(seed: u64, domain: u64, id: u64) -> Self {
        Self::new(seed, derive_key(domain, id))
    }

    /// Position the stream at `counter` 32-bit words from its start.
    pub fn at(seed: u64, key: u64, counter: u128) -> Self {
        let mut s = Self::new(seed, key);
        s.rng.set_word_pos(counter);
        s
    }

    /// A child stream whose key mixes this stream's key with `id`.
    pub fn fork(&self, id: u64) -> Self {
        Self::new(self.seed, derive_key(self.key, id))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Uniform element of `field`.
    #[inline]
    pub fn element(&mut self, field: Field) -> u8 {
        (self.rng.next_u32() as u8) & field.mask()
    }

    /// Uniform nonzero element of `field`.
    pub fn nonzero_element(&mut self, field: Field) -> u8 {
        loop {
            let x = self.element(field);
            if x != 0 {
                return x;
            }
        }
    }

    pub fn fill_elements(&mut self, field: Field, out: &mut [u8]) {
        self.rng.fill_bytes(out);
        let mask = field.mask();
        if mask != 0xff {
            out.iter_mut().for_each(|x| *x &= mask);
        }
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// `true` with probability `p` (clamped to `[0, 1]`).
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        if p <= 0.0 {
            false
        } else if p >= 1.0 {
            true
        } else {
            self.unit() < p
        }
    }

    /// Uniform in `0..n`.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    /// `amount` distinct values from `0..length`, sorted ascending.
    pub fn subset(&mut self, length: usize, amount: usize) -> alloc::vec::Vec<u32> {
        let mut v: alloc::vec::Vec<u32> = rand::seq::index::sample(&mut self.rng, length, amount).into_iter().map(|i| i as u32).collect();
        v.sort_unstable();
        v
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}
