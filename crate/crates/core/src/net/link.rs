//! Per-packet channel and recoding primitives.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::codec::Packet;
use crate::error::{Error, Result};
use crate::gf::Field;
use crate::rng::RandomStream;

/// Drops each packet independently with probability `eps`.
pub fn apply_link(packets: Vec<Packet>, eps: f64, stream: &mut RandomStream) -> Vec<Packet> {
    packets.into_iter().filter(|_| !stream.bernoulli(eps)).collect()
}

/// `count` totally random combinations of `buffer`; coding vectors and
/// payloads go through the same coefficients. Empty buffer, empty output.
pub fn recode(field: Field, buffer: &[Packet], count: usize, stream: &mut RandomStream) -> Vec<Packet> {
    let Some(first) = buffer.first() else {
        return Vec::new();
    };
    let (m, t) = (first.coding_vector.len(), first.payload.len());
    (0..count)
        .map(|_| {
            let mut p = Packet { batch_id: first.batch_id, coding_vector: vec![0; m], payload: vec![0; t] };
            for src in buffer {
                debug_assert_eq!(src.batch_id, first.batch_id);
                let c = stream.element(field);
                if c != 0 {
                    field.axpy(&mut p.coding_vector, c, &src.coding_vector);
                    field.axpy(&mut p.payload, c, &src.payload);
                }
            }
            p
        })
        .collect()
}

/// Outer batch size `round(M(1−ε+δ))` for an inner batch size `M`.
pub fn shrink_batch(m: usize, eps: f64, delta: f64) -> Result<usize> {
    let f = 1.0 - eps + delta;
    if !(f > 0.0 && f <= 1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!("1−ε+δ = {f} outside (0,1]")));
    }
    let mt = libm::round(m as f64 * f) as usize;
    if mt < 1 {
        return Err(Error::InvalidParameter(format!("shrunk batch size rounds to 0 for M = {m}")));
    }
    Ok(mt.min(m))
}

/// Maps an `M̃`-packet outer batch to `m` transmitted packets through an
/// `M̃ × m` totally random matrix.
pub fn expand_batch(field: Field, batch: &[Packet], m: usize, stream: &mut RandomStream) -> Vec<Packet> {
    recode(field, batch, m, stream)
}

/// Batch `id` of width `m` with unit coding vectors and zero payloads.
pub fn unit_batch(id: u32, m: usize, t: usize) -> Vec<Packet> {
    (0..m)
        .map(|j| {
            let mut cv = vec![0; m];
            cv[j] = 1;
            Packet { batch_id: id, coding_vector: cv, payload: vec![0; t] }
        })
        .collect()
}
