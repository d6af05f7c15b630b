//! The outer code: precode, batch encoding and decoding.

pub mod batch;
pub mod decoder;
pub mod overhead;
pub mod precode;
pub mod wire;

pub use batch::{generate_batch, transfer_and_payload, Batch, BatchCode, BatchHeader, Packet};
pub use decoder::{bp_decode, inactivation_decode, DecodeFailure, Decoder, Event, Selection, VarState};
pub use overhead::{overheads, OverheadReport};
pub use precode::{precode_complete, precode_encode, PrecodeMode, PrecodeSpec};

use alloc::vec::Vec;

use crate::error::Result;
use crate::gf::Field;
use crate::matrix::FieldMatrix;

/// Everything a destination holds about one batch.
#[derive(Clone, Debug)]
pub struct ReceivedBatch {
    pub header: BatchHeader,
    /// Coding vectors as columns (`M × c`), in arrival order.
    pub h: FieldMatrix,
    /// Payloads as columns (`T × c`).
    pub y: FieldMatrix,
}

impl ReceivedBatch {
    pub fn from_packets(code: &BatchCode, t: usize, id: u32, packets: &[Packet]) -> Result<Self> {
        let (h, y) = transfer_and_payload(code.field, code.m, t, packets)?;
        Ok(ReceivedBatch { header: code.header(id), h, y })
    }

    pub fn columns(&self) -> usize {
        self.h.cols()
    }

    /// The batch as seen after its first `c` packets.
    pub fn truncated(&self, c: usize) -> Self {
        let keep: Vec<usize> = (0..c.min(self.h.cols())).collect();
        ReceivedBatch { header: self.header.clone(), h: self.h.select_cols(&keep), y: self.y.select_cols(&keep) }
    }
}

/// The first `packets` packets of a batch sequence (batches arrive in order).
pub fn prefix(batches: &[ReceivedBatch], packets: usize) -> Vec<ReceivedBatch> {
    let mut left = packets;
    let mut out = Vec::new();
    for b in batches {
        if left == 0 {
            break;
        }
        let c = b.columns().min(left);
        out.push(if c == b.columns() { b.clone() } else { b.truncated(c) });
        left -= c;
    }
    out
}

/// A decoder loaded with `batches` and extra zero constraints.
pub fn build_decoder(
    field: Field,
    k: usize,
    t: usize,
    batches: &[ReceivedBatch],
    constraints: &[Vec<(u32, u8)>],
    selection: Selection,
) -> Result<Decoder> {
    let mut d = Decoder::new(field, k, t, selection);
    for b in batches {
        if b.columns() > 0 && b.header.degree() > 0 {
            d.add_batch(&b.header, &b.h, &b.y)?;
        }
    }
    d.add_constraints(constraints)?;
    Ok(d)
}

/// Result of decoding with the fewest received packets.
#[derive(Clone, Debug)]
pub struct PrefixDecode {
    pub decoder: Decoder,
    pub packets: usize,
    pub report: OverheadReport,
}

/// Inactivation-decodes the shortest packet prefix that succeeds. Success
/// is monotone in the prefix length, so the search grows geometrically from
/// the first prefix with enough rank and then bisects. `None` if even all
/// packets fail.
pub fn decode_shortest_prefix(
    field: Field,
    k: usize,
    k_prime: usize,
    t: usize,
    batches: &[ReceivedBatch],
    constraints: &[Vec<(u32, u8)>],
) -> Result<Option<PrefixDecode>> {
    let total: usize = batches.iter().map(ReceivedBatch::columns).sum();
    let attempt = |p: usize| -> Result<Option<(Decoder, usize)>> {
        let pre = prefix(batches, p);
        let mut d = build_decoder(field, k, t, &pre, constraints, Selection::LowestIndex)?;
        Ok(inactivation_decode(&mut d).ok().map(|n| (d, n)))
    };
    // first prefix whose summed rank reaches K′
    let mut lo = 0;
    let mut rank = 0;
    for b in batches {
        let r = b.h.rank();
        if rank + r >= k_prime {
            let mut c = 0;
            while c < b.columns() && rank + b.truncated(c).h.rank() < k_prime {
                c += 1;
            }
            lo += c;
            rank = k_prime;
            break;
        }
        rank += r;
        lo += b.columns();
    }
    if rank < k_prime {
        return Ok(None);
    }
    let mut fail = lo.saturating_sub(1);
    let mut step = 1;
    let mut p = lo;
    let mut found = loop {
        if let Some(ok) = attempt(p)? {
            break (p, ok);
        }
        if p >= total {
            return Ok(None);
        }
        fail = p;
        p = (p + step).min(total);
        step *= 2;
    };
    let (mut good, _) = found;
    while good - fail > 1 {
        let mid = fail + (good - fail) / 2;
        match attempt(mid)? {
            Some(ok) => {
                good = mid;
                found = (mid, ok);
            }
            None => fail = mid,
        }
    }
    let (packets, (decoder, inactivations)) = found;
    let tallies = prefix(batches, packets).iter().map(|b| (b.columns(), b.h.rank())).collect();
    let report = OverheadReport::from_tallies(tallies, k_prime, inactivations);
    Ok(Some(PrefixDecode { decoder, packets, report }))
}
