//! Rank distributions of batch transfer matrices.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// `q^{-x}` for `x ≥ 0`, flushing to zero instead of underflowing noisily.
#[inline]
fn qpow_neg(q: f64, x: f64) -> f64 {
    let e = -x * libm::log(q);
    if e < -745.0 {
        0.0
    } else {
        libm::exp(e)
    }
}

/// `ln ζ_r^m`, or `-inf` when `r > m`.
fn ln_zeta(m: usize, r: usize, q: f64) -> f64 {
    if r > m {
        return f64::NEG_INFINITY;
    }
    let mut acc = 0.0;
    for j in 0..r {
        acc += libm::log1p(-qpow_neg(q, (m - j) as f64));
    }
    acc
}

/// Probability that a totally random `m×r` matrix over GF(q) has rank `r`:
/// `ζ_r^m = Π_{j<r} (1 − q^{−m+j})`.
pub fn zeta(m: usize, r: usize, q: u32) -> f64 {
    if r == 0 {
        return 1.0;
    }
    if r > m {
        return 0.0;
    }
    libm::exp(ln_zeta(m, r, q as f64))
}

/// `ζ_r^{d,k} = ζ_r^d ζ_r^k / (ζ_r^r q^{(d−r)(k−r)})`: the probability that
/// `G·H` has rank `r` when `G` is totally random `d×M` and `rank(H) = k`.
pub fn zeta_dkr(d: usize, k: usize, r: usize, q: u32) -> f64 {
    if r > d.min(k) {
        return 0.0;
    }
    let qf = q as f64;
    let l = ln_zeta(d, r, qf) + ln_zeta(k, r, qf) - ln_zeta(r, r, qf) - ((d - r) * (k - r)) as f64 * libm::log(qf);
    libm::exp(l)
}

/// Law of `rank(H)` for a batch of size `M`: `h[k] = Pr{rank = k}`, `k = 0..=M`.
#[derive(Clone, Debug, PartialEq)]
pub struct RankDistribution {
    h: Vec<f64>,
}

impl RankDistribution {
    /// Validates nonnegativity and unit sum (tolerance 1e-9).
    pub fn new(h: Vec<f64>) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::InvalidDistribution("rank distribution needs M+1 ≥ 1 entries".into()));
        }
        if let Some(x) = h.iter().find(|x| !x.is_finite() || **x < -1e-15) {
            return Err(Error::InvalidDistribution(format!("entry {x} is not a probability")));
        }
        let s: f64 = h.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("entries sum to {s}")));
        }
        Ok(RankDistribution { h: h.into_iter().map(|x| x.max(0.0) / s).collect() })
    }

    /// Renormalizes an arbitrary nonnegative weight vector.
    pub fn from_weights(w: Vec<f64>) -> Result<Self> {
        let s: f64 = w.iter().sum();
        if !(s > 0.0) || w.iter().any(|x| *x < 0.0) {
            return Err(Error::InvalidDistribution("weights must be nonnegative with positive sum".into()));
        }
        Self::new(w.into_iter().map(|x| x / s).collect())
    }

    /// Point mass at rank `k`.
    pub fn point_mass(m: usize, k: usize) -> Self {
        let mut h = vec![0.0; m + 1];
        h[k.min(m)] = 1.0;
        RankDistribution { h }
    }

    /// Batch size `M`.
    pub fn m(&self) -> usize {
        self.h.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.h
    }

    #[inline]
    pub fn get(&self, k: usize) -> f64 {
        self.h.get(k).copied().unwrap_or(0.0)
    }

    /// Largest rank with positive probability.
    pub fn max_support(&self) -> usize {
        self.h.iter().rposition(|&x| x > 0.0).unwrap_or(0)
    }

    /// Sample a rank by inverse CDF given `u ∈ [0,1)`.
    pub fn sample(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (k, &p) in self.h.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        self.max_support()
    }

    pub fn total_variation(&self, other: &Self) -> f64 {
        let n = self.h.len().max(other.h.len());
        0.5 * (0..n).map(|k| (self.get(k) - other.get(k)).abs()).sum::<f64>()
    }
}

/// `ħ_r` and `ħ'_r` for `r = 1..=M` (index 0 holds zero).
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveRankDistribution {
    hbar: Vec<f64>,
    hbar_prime: Vec<f64>,
}

impl EffectiveRankDistribution {
    pub fn m(&self) -> usize {
        self.hbar.len() - 1
    }

    /// `ħ_r`; zero outside `1..=M`.
    #[inline]
    pub fn hbar(&self, r: usize) -> f64 {
        if r == 0 {
            0.0
        } else {
            self.hbar.get(r).copied().unwrap_or(0.0)
        }
    }

    /// `ħ'_r`; zero outside `1..=M`.
    #[inline]
    pub fn hbar_prime(&self, r: usize) -> f64 {
        if r == 0 {
            0.0
        } else {
            self.hbar_prime.get(r).copied().unwrap_or(0.0)
        }
    }

    /// `Σ_r r ħ_r`.
    pub fn weighted_sum(&self) -> f64 {
        self.hbar.iter().enumerate().map(|(r, x)| r as f64 * x).sum()
    }

    /// `Σ_{i≥r} ħ_i`.
    pub fn tail(&self, r: usize) -> f64 {
        self.hbar.iter().skip(r.max(1)).sum()
    }
}

/// Effective rank distribution:
/// `ħ_r = Σ_{i≥r} ζ_r^i q^{−(i−r)} h_i`, `ħ'_r = Σ_{k≥r} ζ_r^k h_k`.
pub fn effective_dist(h: &RankDistribution, q: u32) -> EffectiveRankDistribution {
    let m = h.m();
    let qf = q as f64;
    let mut hbar = vec![0.0; m + 1];
    let mut hbar_prime = vec![0.0; m + 1];
    for r in 1..=m {
        let (mut a, mut b) = (0.0, 0.0);
        for i in r..=m {
            let hi = h.get(i);
            if hi == 0.0 {
                continue;
            }
            let z = zeta(i, r, q);
            a += z * qpow_neg(qf, (i - r) as f64) * hi;
            b += z * hi;
        }
        hbar[r] = a;
        hbar_prime[r] = b;
    }
    EffectiveRankDistribution { hbar, hbar_prime }
}

/// `Σ_k k h_k`.
pub fn expected_rank(h: &RankDistribution) -> f64 {
    h.as_slice().iter().enumerate().map(|(k, x)| k as f64 * x).sum()
}

/// Binomial pmf vector `Pr{Bin(n, p) = j}`, `j = 0..=n`.
pub fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    if p <= 0.0 {
        out[0] = 1.0;
        return out;
    }
    if p >= 1.0 {
        out[n] = 1.0;
        return out;
    }
    let (lp, lq) = (libm::log(p), libm::log1p(-p));
    let mut lc = 0.0; // ln C(n, j)
    for (j, o) in out.iter_mut().enumerate() {
        if j > 0 {
            lc += libm::log((n - j + 1) as f64) - libm::log(j as f64);
        }
        *o = libm::exp(lc + j as f64 * lp + (n - j) as f64 * lq);
    }
    out
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!("erasure probability {eps} outside [0,1]")));
    }
    Ok(())
}

/// Rank law of one erasure hop: `Bin(M, 1−ε)`.
pub fn erasure_rank_dist(m: usize, eps: f64) -> Result<RankDistribution> {
    check_eps(eps)?;
    Ok(RankDistribution { h: binomial_pmf(m, 1.0 - eps) })
}

/// End-to-end rank law of a line network with per-hop erasure
/// probabilities `eps`, random recoding at every intermediate node.
pub fn line_rank_dist(m: usize, eps: &[f64], q: u32) -> Result<RankDistribution> {
    let (first, rest) = eps.split_first().ok_or(Error::Empty("hop list"))?;
    let mut h = erasure_rank_dist(m, *first)?.h;
    // ζ_r^{i,j} is shared by every hop
    let mut z = vec![0.0; (m + 1) * (m + 1) * (m + 1)];
    if !rest.is_empty() {
        for i in 0..=m {
            for j in 0..=m {
                for r in 0..=i.min(j) {
                    z[(i * (m + 1) + j) * (m + 1) + r] = zeta_dkr(i, j, r, q);
                }
            }
        }
    }
    for &e in rest {
        check_eps(e)?;
        let b = binomial_pmf(m, 1.0 - e);
        let mut next = vec![0.0; m + 1];
        for (i, &hi) in h.iter().enumerate() {
            if hi == 0.0 {
                continue;
            }
            for (j, &bj) in b.iter().enumerate() {
                let w = hi * bj;
                if w == 0.0 {
                    continue;
                }
                let base = (i * (m + 1) + j) * (m + 1);
                for r in 0..=i.min(j) {
                    next[r] += w * z[base + r];
                }
            }
        }
        let s: f64 = next.iter().sum();
        h = next.into_iter().map(|x| x / s).collect();
    }
    Ok(RankDistribution { h })
}

/// Normalized histogram of observed ranks.
pub fn empirical_rank_dist(ranks: &[usize], m: usize) -> Result<RankDistribution> {
    if ranks.is_empty() {
        return Err(Error::Empty("rank sample"));
    }
    let mut h = vec![0.0; m + 1];
    for &r in ranks {
        if r > m {
            return Err(Error::InvalidParameter(format!("rank {r} exceeds M = {m}")));
        }
        h[r] += 1.0;
    }
    let n = ranks.len() as f64;
    h.iter_mut().for_each(|x| *x /= n);
    Ok(RankDistribution { h })
}
