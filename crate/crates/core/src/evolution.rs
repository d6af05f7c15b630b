//! Closed-form density evolution of the BP decoder.
//!
//! With `x = τ/θ` the fraction of decoded input packets,
//! `ρ₀(τ) = (1−x)(Ω(x) + θ ln(1−x))` is the expected (normalized) number of
//! decodable check nodes. `ρ_{d,r}(τ)` tracks check nodes of degree `d` whose
//! generator-transfer product has rank `r`.

use alloc::vec;
use alloc::vec::Vec;

use crate::beta::{inc_beta_column, ln_choose};
use crate::degree::{omega, DegreeDistribution};
use crate::error::{Error, Result};
use crate::rank::{effective_dist, zeta_dkr, RankDistribution};

/// Sampled `ρ₀` (and optionally some `ρ_{d,r}`) over `x = τ/θ`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionCurve {
    pub theta: f64,
    pub grid: Vec<f64>,
    pub rho0: Vec<f64>,
    /// `(d, r, values)` on the same grid.
    pub rho_dr: Vec<(usize, usize, Vec<f64>)>,
}

impl EvolutionCurve {
    /// First grid point where `ρ₀` drops below zero, linearly interpolated
    /// between samples.
    pub fn first_crossing(&self) -> Option<f64> {
        let i = self.rho0.iter().position(|&v| v < 0.0)?;
        if i == 0 {
            return Some(self.grid[0]);
        }
        let (x0, x1) = (self.grid[i - 1], self.grid[i]);
        let (y0, y1) = (self.rho0[i - 1], self.rho0[i]);
        Some(x0 + (x1 - x0) * y0 / (y0 - y1))
    }

    pub fn min_rho0(&self) -> f64 {
        self.rho0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `α_{d,r} = (1−q^{−d+r})/(1−q^{−d})`: probability that deleting one row
/// of a `d`-row block keeps rank `r`. Zero for `d ≤ r`.
pub fn alpha(d: usize, r: usize, q: u32) -> f64 {
    if d <= r {
        return 0.0;
    }
    let q = q as f64;
    -libm::expm1(-((d - r) as f64) * libm::log(q)) / -libm::expm1(-(d as f64) * libm::log(q))
}

fn check_grid(grid: &[f64], theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::InvalidParameter(alloc::format!("θ = {theta} must be positive")));
    }
    if grid.iter().any(|&x| !(0.0..1.0).contains(&x)) {
        return Err(Error::InvalidParameter("grid values must lie in [0, 1)".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// `ρ₀` on the grid via `Ω`.
pub fn density_evolution(psi: &DegreeDistribution, h: &RankDistribution, q: u32, theta: f64, grid: &[f64]) -> Result<EvolutionCurve> {
    check_grid(grid, theta)?;
    let eff = effective_dist(h, q);
    let rho0 = grid.iter().map(|&x| (1.0 - x) * (omega(x, &eff, psi) + theta * libm::log1p(-x))).collect();
    Ok(EvolutionCurve { theta, grid: grid.to_vec(), rho0, rho_dr: Vec::new() })
}

/// Per-degree tables `ρ̂^{(i)}_{j,·}` built by the row-deletion recursion
/// `ρ̂^{(i+1)}_{j,r} = α_{j−i,r} ρ̂^{(i)}_{j,r} + ᾱ_{j−i,r+1} ρ̂^{(i)}_{j,r+1}`.
#[derive(Clone, Debug)]
pub struct RhoHat {
    m: usize,
    /// `(j, table)` where `table[i*(m+1) + r] = ρ̂^{(i)}_{j,r}`, `i < j`.
    tables: Vec<(usize, Vec<f64>)>,
}

impl RhoHat {
    pub fn new(psi: &DegreeDistribution, h: &RankDistribution, q: u32) -> Self {
        let m = h.m();
        let w = m + 1;
        let mut tables = Vec::new();
        for j in psi.support() {
            let scale = j as f64 * psi.get(j);
            let mut t = vec![0.0; j * w];
            // ρ_{j,r} = jΨ_j Σ_k ζ_r^{j,k} h_k
            for r in 0..=m.min(j) {
                t[r] = scale * (r..=m).map(|k| zeta_dkr(j, k, r, q) * h.get(k)).sum::<f64>();
            }
            for i in 0..j - 1 {
                let rows = j - i;
                for r in 0..=m.min(rows - 1) {
                    let keep = alpha(rows, r, q) * t[i * w + r];
                    let drop = if r < m { (1.0 - alpha(rows, r + 1, q)) * t[i * w + r + 1] } else { 0.0 };
                    t[(i + 1) * w + r] = keep + drop;
                }
            }
            tables.push((j, t));
        }
        RhoHat { m, tables }
    }

    /// `ρ̂^{(i)}_{j,r}`; zero outside the support.
    pub fn get(&self, j: usize, i: usize, r: usize) -> f64 {
        if r > self.m {
            return 0.0;
        }
        match self.tables.binary_search_by_key(&j, |(d, _)| *d) {
            Ok(p) if i < j => self.tables[p].1[i * (self.m + 1) + r],
            _ => 0.0,
        }
    }

    fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.tables.iter().map(|(j, _)| *j)
    }

    /// `ρ_{d,r}(τ) = (1−x)^d Σ_{j≥d} C(j−1,d−1) x^{j−d} ρ̂^{(j−d)}_{j,r}`.
    pub fn rho_dr(&self, d: usize, r: usize, x: f64) -> f64 {
        if d == 0 {
            return 0.0;
        }
        let mut s = 0.0;
        for j in self.support().filter(|&j| j >= d) {
            let v = self.get(j, j - d, r);
            if v == 0.0 {
                continue;
            }
            let c = if j == d {
                1.0
            } else if x <= 0.0 {
                0.0
            } else {
                libm::exp(ln_choose((j - 1) as u64, (d - 1) as u64) + (j - d) as f64 * libm::log(x))
            };
            s += c * v;
        }
        s * libm::pow(1.0 - x, d as f64)
    }

    /// `ρ₀` by the incomplete-beta form
    /// `(1−x)(Σ_r α_{r+1,r} Σ_{d>r} ρ̂^{(d−r−1)}_{d,r} I_{d−r,r}(x) + Σ_r ρ_{r,r} + θ ln(1−x))`.
    pub fn rho0(&self, q: u32, theta: f64, x: f64) -> f64 {
        let d_top = self.support().last().unwrap_or(0);
        let mut total: f64 = (1..=self.m).map(|r| self.get(r, 0, r)).sum();
        for r in 1..=self.m {
            if d_top <= r {
                break;
            }
            let col = inc_beta_column(r as u64, d_top - r, x);
            let a = alpha(r + 1, r, q);
            let s: f64 = self.support().filter(|&d| d > r).map(|d| self.get(d, d - r - 1, r) * col[d - r - 1]).sum();
            total += a * s;
        }
        (1.0 - x) * (total + theta * libm::log1p(-x))
    }
}

/// `ρ₀` together with the requested `ρ_{d,r}` curves, all from the
/// recursion tables.
pub fn density_evolution_full(
    psi: &DegreeDistribution,
    h: &RankDistribution,
    q: u32,
    theta: f64,
    grid: &[f64],
    pairs: &[(usize, usize)],
) -> Result<EvolutionCurve> {
    check_grid(grid, theta)?;
    let tab = RhoHat::new(psi, h, q);
    let rho0 = grid.iter().map(|&x| tab.rho0(q, theta, x)).collect();
    let rho_dr = pairs.iter().map(|&(d, r)| (d, r, grid.iter().map(|&x| tab.rho_dr(d, r, x)).collect())).collect();
    Ok(EvolutionCurve { theta, grid: grid.to_vec(), rho0, rho_dr })
}

/// Evenly spaced `x` values `0, 1/n, …, (n−1)/n`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / n as f64).collect()
}
