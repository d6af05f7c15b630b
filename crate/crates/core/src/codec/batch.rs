//! Batch generation at the source.

use alloc::vec::Vec;

use crate::degree::DegreeDistribution;
use crate::error::{Error, Result};
use crate::gf::Field;
use crate::matrix::FieldMatrix;
use crate::rng::RandomStream;

/// Stream domain of per-batch randomness (degree, contributors, generator).
pub const BATCH_DOMAIN: u64 = 0x4241_5443_4800_0001;

/// One coded packet: the batch it belongs to, its coding vector and payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Packet {
    pub batch_id: u32,
    pub coding_vector: Vec<u8>,
    pub payload: Vec<u8>,
}

/// The part of a batch that the decoder can regenerate from the master seed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchHeader {
    pub id: u32,
    /// Sorted, distinct indices of the input packets mixed into the batch.
    pub contributors: Vec<u32>,
    /// `d × M` generator.
    pub generator: FieldMatrix,
}

impl BatchHeader {
    pub fn degree(&self) -> usize {
        self.contributors.len()
    }
}

/// A batch as emitted by the source: header plus its `M` packets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub header: BatchHeader,
    pub packets: Vec<Packet>,
}

/// Parameters shared by encoder and decoder.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchCode {
    pub field: Field,
    /// Number of (intermediate) input packets.
    pub k: usize,
    /// Batch size.
    pub m: usize,
    pub seed: u64,
    pub psi: DegreeDistribution,
}

impl BatchCode {
    pub fn new(field: Field, k: usize, m: usize, seed: u64, psi: DegreeDistribution) -> Result<Self> {
        if k == 0 || m == 0 {
            return Err(Error::InvalidParameter("K and M must be positive".into()));
        }
        Ok(BatchCode { field, k, m, seed, psi })
    }

    /// Degree, contributors and generator of batch `id`. Degrees above `K`
    /// are clipped to `K`.
    pub fn header(&self, id: u32) -> BatchHeader {
        let mut s = RandomStream::derive(self.seed, BATCH_DOMAIN, id as u64);
        let d = self.psi.sample(s.unit()).min(self.k);
        let contributors = s.subset(self.k, d);
        let generator = FieldMatrix::random(self.field, d, self.m, &mut s);
        BatchHeader { id, contributors, generator }
    }

    /// Encodes batch `id` over `inputs` (each of length `T`).
    pub fn batch(&self, id: u32, inputs: &[Vec<u8>]) -> Result<Batch> {
        if inputs.len() != self.k {
            return Err(Error::InvalidParameter(alloc::format!("expected {} input packets, got {}", self.k, inputs.len())));
        }
        let header = self.header(id);
        let t = inputs.first().map_or(0, Vec::len);
        if inputs.iter().any(|p| p.len() != t) {
            return Err(Error::InvalidParameter("input packets differ in length".into()));
        }
        let f = self.field;
        let mut packets = Vec::with_capacity(self.m);
        for j in 0..self.m {
            let mut payload = alloc::vec![0u8; t];
            for (i, &c) in header.contributors.iter().enumerate() {
                let g = header.generator.get(i, j);
                if g != 0 {
                    f.axpy(&mut payload, g, &inputs[c as usize]);
                }
            }
            let mut coding_vector = alloc::vec![0u8; self.m];
            coding_vector[j] = 1;
            packets.push(Packet { batch_id: id, coding_vector, payload });
        }
        Ok(Batch { header, packets })
    }
}

/// Free-function form of [`BatchCode::batch`].
pub fn generate_batch(batch_id: u32, master_seed: u64, psi: &DegreeDistribution, inputs: &[Vec<u8>], m: usize, field: Field) -> Result<Batch> {
    BatchCode::new(field, inputs.len(), m, master_seed, psi.clone())?.batch(batch_id, inputs)
}

/// Splits received packets of one batch into `H` (`M × c`, coding vectors as
/// columns) and `Y` (`T × c`, payloads as columns).
pub fn transfer_and_payload(field: Field, m: usize, t: usize, packets: &[Packet]) -> Result<(FieldMatrix, FieldMatrix)> {
    let c = packets.len();
    let mut h = FieldMatrix::zeros(field, m, c);
    let mut y = FieldMatrix::zeros(field, t, c);
    for (j, p) in packets.iter().enumerate() {
        if p.coding_vector.len() != m || p.payload.len() != t {
            return Err(Error::DimensionMismatch { expected: (m, t), found: (p.coding_vector.len(), p.payload.len()) });
        }
        for (i, &v) in p.coding_vector.iter().enumerate() {
            h.set(i, j, v);
        }
        for (i, &v) in p.payload.iter().enumerate() {
            y.set(i, j, v);
        }
    }
    Ok((h, y))
}
