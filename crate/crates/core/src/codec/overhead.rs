//! Receiving and coding overheads of a decoding run.

use alloc::vec::Vec;

use crate::matrix::FieldMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct OverheadReport {
    /// `Σ (col(H_i) − rank(H_i))`.
    pub receiving_overhead: usize,
    /// `Σ rank(H_i) − K′`.
    pub coding_overhead: i64,
    /// `K′ / Σ col(H_i)`.
    pub coding_rate: f64,
    pub inactivations: usize,
    /// Per received batch `(col(H_i), rank(H_i))`.
    pub tallies: Vec<(usize, usize)>,
}

impl OverheadReport {
    pub fn from_tallies(tallies: Vec<(usize, usize)>, k_prime: usize, inactivations: usize) -> Self {
        let cols: usize = tallies.iter().map(|t| t.0).sum();
        let rank: usize = tallies.iter().map(|t| t.1).sum();
        OverheadReport {
            receiving_overhead: cols - rank,
            coding_overhead: rank as i64 - k_prime as i64,
            coding_rate: if cols > 0 { k_prime as f64 / cols as f64 } else { 0.0 },
            inactivations,
            tallies,
        }
    }

    pub fn received_columns(&self) -> usize {
        self.tallies.iter().map(|t| t.0).sum()
    }
}

/// Overheads of the transfer matrices `H_i` against `K′` input packets.
pub fn overheads(transfer: &[FieldMatrix], k_prime: usize) -> OverheadReport {
    let tallies = transfer.iter().map(|h| (h.cols(), h.rank())).collect();
    OverheadReport::from_tallies(tallies, k_prime, 0)
}
