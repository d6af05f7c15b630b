//! Bit-exact packet encoding and the file container.
//!
//! Packet: `[batch_id u32 LE][coding vector][payload]`. For GF(256) each
//! symbol is one byte; smaller fields pack symbols MSB-first, padding the
//! last byte of each section with zero bits.
//!
//! Container: `"BATS"`, version byte, then `K′ u32, K u32, M u16, q u16,
//! T u32, seed u64, precode mode u8, rate f64, weight u32, precode seed u64`
//! (all little-endian), then packets back to back.

use alloc::vec::Vec;

use crate::codec::batch::Packet;
use crate::codec::precode::{PrecodeMode, PrecodeSpec};
use crate::error::{Error, Result};
use crate::gf::Field;

pub const MAGIC: &[u8; 4] = b"BATS";
pub const VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 4 + 4 + 2 + 2 + 4 + 8 + 1 + 8 + 4 + 8;

/// Bytes needed for `count` symbols of `bits` bits.
pub fn packed_len(count: usize, bits: u8) -> usize {
    (count * bits as usize).div_ceil(8)
}

pub fn pack_symbols(symbols: &[u8], bits: u8, out: &mut Vec<u8>) {
    if bits == 8 {
        out.extend_from_slice(symbols);
        return;
    }
    let start = out.len();
    out.resize(start + packed_len(symbols.len(), bits), 0);
    for (i, &s) in symbols.iter().enumerate() {
        let bit = i * bits as usize;
        // MSB-first within each byte; a symbol never straddles bytes since bits | 8
        let shift = 8 - bits as usize - bit % 8;
        out[start + bit / 8] |= s << shift;
    }
}

pub fn unpack_symbols(bytes: &[u8], bits: u8, count: usize) -> Vec<u8> {
    if bits == 8 {
        return bytes[..count].to_vec();
    }
    let mask = (1u16 << bits) as u8 - 1;
    (0..count)
        .map(|i| {
            let bit = i * bits as usize;
            (bytes[bit / 8] >> (8 - bits as usize - bit % 8)) & mask
        })
        .collect()
}

/// Serialized length of one packet.
pub fn packet_len(field: Field, m: usize, t: usize) -> usize {
    4 + packed_len(m, field.bits()) + packed_len(t, field.bits())
}

pub fn encode_packet(field: Field, p: &Packet, out: &mut Vec<u8>) {
    out.extend_from_slice(&p.batch_id.to_le_bytes());
    pack_symbols(&p.coding_vector, field.bits(), out);
    pack_symbols(&p.payload, field.bits(), out);
}

pub fn decode_packet(field: Field, m: usize, t: usize, bytes: &[u8]) -> Result<Packet> {
    if bytes.len() != packet_len(field, m, t) {
        return Err(Error::Format(alloc::format!("packet of {} bytes, expected {}", bytes.len(), packet_len(field, m, t))));
    }
    let bits = field.bits();
    let batch_id = u32::from_le_bytes(bytes[..4].try_into().expect("4 bytes"));
    let cv_end = 4 + packed_len(m, bits);
    let coding_vector = unpack_symbols(&bytes[4..cv_end], bits, m);
    let payload = unpack_symbols(&bytes[cv_end..], bits, t);
    Ok(Packet { batch_id, coding_vector, payload })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContainerHeader {
    pub k_prime: u32,
    pub k: u32,
    pub m: u16,
    pub q: u16,
    pub t: u32,
    pub seed: u64,
    pub precode: PrecodeSpec,
}

impl ContainerHeader {
    pub fn field(&self) -> Result<Field> {
        Field::with_order(self.q as u32)
    }
}

pub fn encode_container(h: &ContainerHeader, packets: &[Packet]) -> Result<Vec<u8>> {
    let field = h.field()?;
    let mut out = Vec::with_capacity(HEADER_LEN + packets.len() * packet_len(field, h.m as usize, h.t as usize));
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&h.k_prime.to_le_bytes());
    out.extend_from_slice(&h.k.to_le_bytes());
    out.extend_from_slice(&h.m.to_le_bytes());
    out.extend_from_slice(&h.q.to_le_bytes());
    out.extend_from_slice(&h.t.to_le_bytes());
    out.extend_from_slice(&h.seed.to_le_bytes());
    out.push(match h.precode.mode {
        PrecodeMode::None => 0,
        PrecodeMode::SystematicSparse => 1,
    });
    out.extend_from_slice(&h.precode.rate.to_le_bytes());
    out.extend_from_slice(&(h.precode.weight as u32).to_le_bytes());
    out.extend_from_slice(&h.precode.seed.to_le_bytes());
    for p in packets {
        if p.coding_vector.len() != h.m as usize || p.payload.len() != h.t as usize {
            return Err(Error::Format("packet shape does not match the header".into()));
        }
        encode_packet(field, p, &mut out);
    }
    Ok(out)
}

fn take<const N: usize>(b: &[u8], at: &mut usize) -> [u8; N] {
    let v: [u8; N] = b[*at..*at + N].try_into().expect("length checked");
    *at += N;
    v
}

pub fn decode_container(bytes: &[u8]) -> Result<(ContainerHeader, Vec<Packet>)> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a BATS container".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Format(alloc::format!("unsupported container version {}", bytes[4])));
    }
    let mut at = 5;
    let k_prime = u32::from_le_bytes(take(bytes, &mut at));
    let k = u32::from_le_bytes(take(bytes, &mut at));
    let m = u16::from_le_bytes(take(bytes, &mut at));
    let q = u16::from_le_bytes(take(bytes, &mut at));
    let t = u32::from_le_bytes(take(bytes, &mut at));
    let seed = u64::from_le_bytes(take(bytes, &mut at));
    let mode = match take::<1>(bytes, &mut at)[0] {
        0 => PrecodeMode::None,
        1 => PrecodeMode::SystematicSparse,
        x => return Err(Error::Format(alloc::format!("unknown precode mode {x}"))),
    };
    let rate = f64::from_le_bytes(take(bytes, &mut at));
    let weight = u32::from_le_bytes(take(bytes, &mut at)) as usize;
    let pseed = u64::from_le_bytes(take(bytes, &mut at));
    let header = ContainerHeader { k_prime, k, m, q, t, seed, precode: PrecodeSpec { mode, rate, weight, seed: pseed } };
    let field = header.field()?;
    let plen = packet_len(field, m as usize, t as usize);
    let body = &bytes[at..];
    if !body.len().is_multiple_of(plen) {
        return Err(Error::Format("truncated packet at end of container".into()));
    }
    let packets = body.chunks_exact(plen).map(|c| decode_packet(field, m as usize, t as usize, c)).collect::<Result<_>>()?;
    Ok((header, packets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn packing_is_msb_first() {
        let mut out = Vec::new();
        pack_symbols(&[1, 0, 1, 1, 0, 0, 0, 1, 1], 1, &mut out);
        assert_eq!(out, [0b1011_0001, 0b1000_0000]);
        out.clear();
        pack_symbols(&[0x3, 0x1, 0x2], 2, &mut out);
        assert_eq!(out, [0b1101_1000]);
        assert_eq!(unpack_symbols(&out, 2, 3), [3, 1, 2]);
        out.clear();
        pack_symbols(&[0xa, 0x5, 0xf], 4, &mut out);
        assert_eq!(out, [0xa5, 0xf0]);
    }

    #[test]
    fn gf256_packet_layout() {
        let f = Field::gf256();
        let p = Packet { batch_id: 0x0102_0304, coding_vector: vec![9, 8], payload: vec![7, 6, 5] };
        let mut out = Vec::new();
        encode_packet(f, &p, &mut out);
        assert_eq!(out, [4, 3, 2, 1, 9, 8, 7, 6, 5]);
        assert_eq!(decode_packet(f, 2, 3, &out).unwrap(), p);
    }

    #[test]
    fn container_round_trip() {
        for bits in [1u8, 2, 4, 8] {
            let f = Field::new(bits).unwrap();
            let mask = f.mask();
            let packets: Vec<Packet> = (0..5u32)
                .map(|i| Packet {
                    batch_id: i * 7,
                    coding_vector: (0..3).map(|j| (i as u8 + j) & mask).collect(),
                    payload: (0..5).map(|j| (i as u8 * 3 + j) & mask).collect(),
                })
                .collect();
            let h = ContainerHeader { k_prime: 98, k: 100, m: 3, q: f.order() as u16, t: 5, seed: 77, precode: PrecodeSpec::default() };
            let bytes = encode_container(&h, &packets).unwrap();
            let (h2, p2) = decode_container(&bytes).unwrap();
            assert_eq!(h2, h);
            assert_eq!(p2, packets);
            assert!(decode_container(&bytes[..bytes.len() - 1]).is_err());
        }
        assert!(decode_container(b"BATX").is_err());
    }
}
