//! Systematic sparse precode.
//!
//! The intermediate packets are the `K′` inputs followed by `K − K′` parity
//! packets. Every input feeds `weight` distinct parities (all of them when
//! there are fewer) with random nonzero coefficients, so parity `j` is
//! `p_j = Σ_i a_{ij} b_i`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gf::Field;
use crate::matrix::row_reduce;
use crate::rng::RandomStream;

pub const PRECODE_DOMAIN: u64 = 0x4241_5453_5052_4543;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrecodeMode {
    None,
    SystematicSparse,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrecodeSpec {
    pub mode: PrecodeMode,
    pub rate: f64,
    /// Number of parities each input packet feeds.
    pub weight: usize,
    pub seed: u64,
}

impl Default for PrecodeSpec {
    fn default() -> Self {
        PrecodeSpec { mode: PrecodeMode::SystematicSparse, rate: 0.98, weight: 20, seed: 0 }
    }
}

impl PrecodeSpec {
    pub fn none() -> Self {
        PrecodeSpec { mode: PrecodeMode::None, rate: 1.0, weight: 0, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate <= 1.0) {
            return Err(Error::InvalidParameter(alloc::format!("precode rate {} outside (0, 1]", self.rate)));
        }
        if self.mode == PrecodeMode::SystematicSparse && self.weight == 0 {
            return Err(Error::InvalidParameter("precode weight must be positive".into()));
        }
        Ok(())
    }

    /// Number of intermediate packets for `k_prime` inputs.
    pub fn intermediate_count(&self, k_prime: usize) -> usize {
        match self.mode {
            PrecodeMode::None => k_prime,
            PrecodeMode::SystematicSparse => libm::ceil(k_prime as f64 / self.rate - 1e-9) as usize,
        }
    }

    /// Parity constraints over the intermediate packets: for each parity, the
    /// `(index, coefficient)` pairs with `Σ coeff·packet = 0`.
    pub fn checks(&self, field: Field, k_prime: usize) -> Vec<Vec<(u32, u8)>> {
        let k = self.intermediate_count(k_prime);
        let parities = k - k_prime;
        if parities == 0 {
            return Vec::new();
        }
        let mut rows: Vec<Vec<(u32, u8)>> = (0..parities).map(|_| Vec::new()).collect();
        let w = self.weight.min(parities);
        for i in 0..k_prime {
            let mut s = RandomStream::derive(self.seed, PRECODE_DOMAIN, i as u64);
            for j in s.subset(parities, w) {
                let a = s.nonzero_element(field);
                rows[j as usize].push((i as u32, a));
            }
        }
        for (j, row) in rows.iter_mut().enumerate() {
            row.push(((k_prime + j) as u32, 1));
        }
        rows
    }
}

/// Appends the parity packets to `inputs`.
pub fn precode_encode(field: Field, inputs: &[Vec<u8>], spec: &PrecodeSpec) -> Result<Vec<Vec<u8>>> {
    spec.validate()?;
    if inputs.is_empty() {
        return Err(Error::Empty("input packets"));
    }
    let t = inputs[0].len();
    let mut out = inputs.to_vec();
    for row in spec.checks(field, inputs.len()) {
        let mut p = vec![0u8; t];
        for &(i, a) in &row[..row.len() - 1] {
            field.axpy(&mut p, a, &inputs[i as usize]);
        }
        out.push(p);
    }
    Ok(out)
}

/// Recovers the `K′` inputs from a partial set of intermediate packets.
/// Returns `None` when the known packets do not determine them.
pub fn precode_complete(field: Field, known: &[Option<Vec<u8>>], k_prime: usize, spec: &PrecodeSpec) -> Result<Option<Vec<Vec<u8>>>> {
    spec.validate()?;
    if known.len() != spec.intermediate_count(k_prime) {
        return Err(Error::InvalidParameter("intermediate packet count does not match the precode".into()));
    }
    let t = known.iter().flatten().map(Vec::len).next().unwrap_or(0);
    let mut vals: Vec<Option<Vec<u8>>> = known.to_vec();
    let checks = spec.checks(field, k_prime);
    // peeling: a check with a single unknown determines it
    loop {
        let mut progress = false;
        for row in &checks {
            let missing: Vec<&(u32, u8)> = row.iter().filter(|(i, _)| vals[*i as usize].is_none()).collect();
            if missing.len() != 1 {
                continue;
            }
            let (mi, ma) = *missing[0];
            let mut acc = vec![0u8; t];
            for &(i, a) in row {
                if let Some(v) = &vals[i as usize] {
                    field.axpy(&mut acc, a, v);
                }
            }
            field.scale(&mut acc, field.inv(ma)?);
            vals[mi as usize] = Some(acc);
            progress = true;
        }
        if !progress {
            break;
        }
    }
    let unknown: Vec<usize> = (0..vals.len()).filter(|&i| vals[i].is_none()).collect();
    if !unknown.is_empty() {
        // exact elimination over the remaining unknowns
        let u = unknown.len();
        let pos: alloc::collections::BTreeMap<usize, usize> = unknown.iter().enumerate().map(|(p, &i)| (i, p)).collect();
        let width = u + t;
        let mut aug = Vec::new();
        let mut rows = 0;
        for row in &checks {
            let mut r = vec![0u8; width];
            for &(i, a) in row {
                match &vals[i as usize] {
                    Some(v) => field.axpy(&mut r[u..], a, v),
                    None => r[pos[&(i as usize)]] = a,
                }
            }
            if r[..u].iter().any(|&x| x != 0) {
                aug.extend_from_slice(&r);
                rows += 1;
            }
        }
        let pivots = row_reduce(field, &mut aug, rows, width, u);
        if pivots.len() < u {
            return Ok(None);
        }
        for (p, &col) in pivots.iter().enumerate() {
            vals[unknown[col]] = Some(aug[p * width + u..(p + 1) * width].to_vec());
        }
    }
    Ok(Some(vals.into_iter().take(k_prime).map(|v| v.expect("all recovered")).collect()))
}
