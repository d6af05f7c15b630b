//! Degree distributions and their optimization.
//!
//! The asymptotic BP condition is `Ω(x) + θ ln(1−x) ≥ 0` on `[0, 1−η]`,
//! where `Ω` is linear in the degree distribution `Ψ`. Sampling `x` on a
//! grid turns every optimization here into a linear program.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::beta::{inc_beta, inc_beta_column};
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpStatus, Relation, Simplex};
use crate::rank::{effective_dist, EffectiveRankDistribution, RankDistribution};
use crate::rng::RandomStream;

/// Default number of grid points on `(0, 1−η]`.
pub const DEFAULT_GRID: usize = 100;
/// Fine-grid factor used to re-verify LP solutions.
pub const REFINE: usize = 10;
/// Mass added per low degree when `Ω(0) = 0`.
pub const FIXUP_DELTA: f64 = 1e-4;

/// `Ψ_d` for `d = 1..=D`.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeDistribution {
    psi: Vec<f64>,
}

impl DegreeDistribution {
    /// `psi[k]` is the probability of degree `k+1`.
    pub fn new(psi: Vec<f64>) -> Result<Self> {
        if psi.is_empty() {
            return Err(Error::InvalidDistribution("degree distribution is empty".into()));
        }
        if let Some(x) = psi.iter().find(|x| !x.is_finite() || **x < -1e-12) {
            return Err(Error::InvalidDistribution(format!("entry {x} is not a probability")));
        }
        let s: f64 = psi.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("entries sum to {s}")));
        }
        Ok(DegreeDistribution { psi: psi.into_iter().map(|x| x.max(0.0) / s).collect() })
    }

    /// Renormalizes nonnegative weights.
    pub fn from_weights(mut w: Vec<f64>) -> Result<Self> {
        w.iter_mut().for_each(|x| {
            if *x < 0.0 && *x > -1e-12 {
                *x = 0.0
            }
        });
        let s: f64 = w.iter().sum();
        if !(s > 0.0) || w.iter().any(|x| *x < 0.0) {
            return Err(Error::InvalidDistribution("weights must be nonnegative with positive sum".into()));
        }
        Self::new(w.into_iter().map(|x| x / s).collect())
    }

    pub fn point_mass(d: usize, max_degree: usize) -> Result<Self> {
        if d == 0 || d > max_degree {
            return Err(Error::InvalidParameter(format!("degree {d} outside 1..={max_degree}")));
        }
        let mut psi = vec![0.0; max_degree];
        psi[d - 1] = 1.0;
        Ok(DegreeDistribution { psi })
    }

    /// Maximum degree `D`.
    pub fn max_degree(&self) -> usize {
        self.psi.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.psi
    }

    /// `Ψ_d`; zero outside `1..=D`.
    #[inline]
    pub fn get(&self, d: usize) -> f64 {
        if d == 0 {
            0.0
        } else {
            self.psi.get(d - 1).copied().unwrap_or(0.0)
        }
    }

    /// `Σ d Ψ_d`.
    pub fn mean(&self) -> f64 {
        self.psi.iter().enumerate().map(|(k, p)| (k + 1) as f64 * p).sum()
    }

    /// Degrees with positive mass.
    pub fn support(&self) -> Vec<usize> {
        (1..=self.psi.len()).filter(|&d| self.get(d) > 0.0).collect()
    }

    /// Inverse-CDF sample from `u ∈ [0,1)`.
    pub fn sample(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (k, &p) in self.psi.iter().enumerate() {
            acc += p;
            if u < acc {
                return k + 1;
            }
        }
        self.psi.iter().rposition(|&p| p > 0.0).map_or(1, |k| k + 1)
    }

    pub fn total_variation(&self, other: &Self) -> f64 {
        let n = self.psi.len().max(other.psi.len());
        0.5 * (1..=n).map(|d| (self.get(d) - other.get(d)).abs()).sum::<f64>()
    }
}

/// `D = ⌈M/η⌉ − 1`.
pub fn max_degree(m: usize, eta: f64) -> Result<usize> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!("η = {eta} outside (0,1)")));
    }
    let v = libm::ceil(m as f64 / eta - 1e-9) as usize;
    Ok(v.saturating_sub(1).max(1))
}

/// `Ψ^r`: `r/(d(d−1))` for `r < d < D`, `r/(D−1)` at `D`.
pub fn baseline_psi(r: usize, d_max: usize) -> Result<DegreeDistribution> {
    if r == 0 || r >= d_max {
        return Err(Error::InvalidParameter(format!("need 1 ≤ r < D, got r={r}, D={d_max}")));
    }
    let mut psi = vec![0.0; d_max];
    for d in r + 1..d_max {
        psi[d - 1] = r as f64 / (d * (d - 1)) as f64;
    }
    psi[d_max - 1] = r as f64 / (d_max - 1) as f64;
    DegreeDistribution::new(psi)
}

/// `coef[d−1]` such that `Ω(x) = Σ_d coef[d−1] Ψ_d`, for `d = 1..=D`.
pub fn omega_coefficients(x: f64, eff: &EffectiveRankDistribution, d_max: usize) -> Vec<f64> {
    let m = eff.m();
    let mut inner = vec![0.0; d_max];
    for d in 1..=m.min(d_max) {
        inner[d - 1] = eff.hbar_prime(d);
    }
    for r in 1..=m {
        let hr = eff.hbar(r);
        if hr == 0.0 || r >= d_max {
            continue;
        }
        let col = inc_beta_column(r as u64, d_max - r, x);
        for (k, v) in col.iter().enumerate() {
            if *v == 0.0 {
                break;
            }
            inner[r + k] += hr * v;
        }
    }
    inner.iter_mut().enumerate().for_each(|(k, v)| *v *= (k + 1) as f64);
    inner
}

/// `Ω(x)` for a sparse `Ψ` given as `(degree, mass)` pairs sorted by degree.
fn omega_sparse(x: f64, eff: &EffectiveRankDistribution, terms: &[(usize, f64)]) -> f64 {
    let mut total: f64 = terms.iter().map(|&(d, p)| d as f64 * p * eff.hbar_prime(d)).sum();
    if x <= 0.0 {
        return total;
    }
    let y = 1.0 - x;
    let (lx, ratio) = (libm::log(x), y / x);
    let m = eff.m();
    for &(d, p) in terms {
        let top = m.min(d - 1);
        if top == 0 {
            continue;
        }
        // I_{d−r,r}(x) = Σ_{k<r} C(d−1,k) y^k x^{d−1−k}, cumulative in r
        let n = (d - 1) as f64;
        let lt0 = n * lx;
        let shift = if lt0 < -600.0 { -lt0 - 600.0 } else { 0.0 };
        let mut term = libm::exp(lt0 + shift);
        let (mut cum, mut acc) = (0.0, 0.0);
        for r in 1..=top {
            cum += term;
            acc += eff.hbar(r) * cum;
            let k = (r - 1) as f64;
            term *= (n - k) / (k + 1.0) * ratio;
        }
        if shift > 0.0 {
            acc *= libm::exp(-shift);
        }
        total += d as f64 * p * acc;
    }
    total
}

fn sparse_terms(psi: &DegreeDistribution) -> Vec<(usize, f64)> {
    psi.support().into_iter().map(|d| (d, psi.get(d))).collect()
}

/// `Ω(x) = Σ_r ħ_r Σ_{d>r} dΨ_d I_{d−r,r}(x) + Σ_r rΨ_r ħ'_r`.
pub fn omega(x: f64, eff: &EffectiveRankDistribution, psi: &DegreeDistribution) -> f64 {
    omega_sparse(x, eff, &sparse_terms(psi))
}

/// `Ω(x)` through `Σ_r ħ_r S_r(x)`, with
/// `S_r = Σ_{d>r} dΨ_d I_{d−r,r}(x) + Σ_{d≤r} dΨ_d`.
pub fn omega_sr(x: f64, eff: &EffectiveRankDistribution, psi: &DegreeDistribution) -> f64 {
    let mut total = 0.0;
    for r in 1..=eff.m() {
        let mut s = 0.0;
        for d in 1..=psi.max_degree() {
            let p = psi.get(d);
            if p == 0.0 {
                continue;
            }
            s += d as f64 * p * if d > r { inc_beta((d - r) as u64, r as u64, x) } else { 1.0 };
        }
        total += eff.hbar(r) * s;
    }
    total
}

/// `x_i = (1−η) i / n`, `i = 1..=n`.
pub fn grid(eta: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| (1.0 - eta) * i as f64 / n as f64).collect()
}

/// Largest `t` with `Ω(x) + t·scale·g(x) ≥ 0` on `xs`, for `g < 0`.
fn max_scaled(psi: &DegreeDistribution, eff: &EffectiveRankDistribution, scale: f64, g: &dyn Fn(f64) -> f64, xs: &[f64]) -> f64 {
    let terms = sparse_terms(psi);
    let mut best = f64::INFINITY;
    for &x in xs {
        let om = omega_sparse(x, eff, &terms);
        let denom = -scale * g(x);
        if denom > 0.0 {
            best = best.min(om / denom);
        }
    }
    if best.is_finite() {
        best.max(0.0)
    } else {
        0.0
    }
}

/// `max θ` with `Ω(x_i) + θ ln(1−x_i) ≥ 0` on the `n`-point grid:
/// `min_i Ω(x_i)/(−ln(1−x_i))`.
pub fn achievable_theta(psi: &DegreeDistribution, h: &RankDistribution, q: u32, eta: f64, n: usize) -> f64 {
    let eff = effective_dist(h, q);
    max_scaled(psi, &eff, 1.0, &ln_one_minus, &grid(eta, n))
}

/// `θ` achievable for `eff` under `psi` on an explicit set of points.
pub fn achievable_theta_on(psi: &DegreeDistribution, eff: &EffectiveRankDistribution, xs: &[f64]) -> f64 {
    max_scaled(psi, eff, 1.0, &ln_one_minus, xs)
}

fn ln_one_minus(x: f64) -> f64 {
    libm::log1p(-x)
}

/// `(max_r r Σ_{i≥r} ħ_i, Σ_r r ħ_r / (1−η))`.
pub fn theta_bounds(h: &RankDistribution, q: u32, eta: f64) -> (f64, f64) {
    let eff = effective_dist(h, q);
    let lower = (1..=eff.m()).map(|r| r as f64 * eff.tail(r)).fold(0.0, f64::max);
    (lower, eff.weighted_sum() / (1.0 - eta))
}

/// Outcome of one of the degree-distribution programs.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimum {
    pub psi: DegreeDistribution,
    /// `θ̂` (or `α̂` for the percentage problem) after fine-grid verification.
    pub value: f64,
    /// The raw LP optimum on the coarse grid.
    pub lp_value: f64,
    pub status: LpStatus,
    /// Low-degree mass was added because `Ω(0)` vanished.
    pub fixup_applied: bool,
    /// Every effective rank is zero; nothing is decodable.
    pub empty_support: bool,
}

/// Knobs shared by all four programs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LpSettings {
    pub grid: usize,
    /// Overrides `⌈M/η⌉ − 1`.
    pub max_degree: Option<usize>,
    pub refine: usize,
}

impl Default for LpSettings {
    fn default() -> Self {
        LpSettings { grid: DEFAULT_GRID, max_degree: None, refine: REFINE }
    }
}

impl LpSettings {
    pub fn with_grid(grid: usize) -> Self {
        LpSettings { grid, ..Self::default() }
    }
}

/// Maximize `t` s.t. `Ω(x_i; ħ_h) + t·scale_h·g(x_i) ≥ 0` for every `h`.
fn solve_family(effs: &[EffectiveRankDistribution], scales: &[f64], g: &dyn Fn(f64) -> f64, eta: f64, settings: LpSettings) -> Result<Optimum> {
    if effs.is_empty() {
        return Err(Error::Empty("rank distribution set"));
    }
    if settings.grid == 0 {
        return Err(Error::InvalidParameter("grid size must be positive".into()));
    }
    let m = effs.iter().map(|e| e.m()).max().unwrap_or(1).max(1);
    let d_max = match settings.max_degree {
        Some(d) => d.max(1),
        None => max_degree(m, eta)?,
    };
    let nv = d_max + 1;
    let mut objective = vec![0.0; nv];
    objective[d_max] = 1.0;
    let mut lp = LinearProgram::new(objective);
    let xs = grid(eta, settings.grid);
    let mut any_rank = false;
    for (eff, &scale) in effs.iter().zip(scales) {
        if eff.hbar_prime(1) > 0.0 {
            any_rank = true;
        }
        for &x in &xs {
            let mut row: Vec<f64> = omega_coefficients(x, eff, d_max).into_iter().map(|c| -c).collect();
            row.push(-scale * g(x));
            lp.add(row, Relation::Le, 0.0);
        }
    }
    let mut sum_row = vec![1.0; nv];
    sum_row[d_max] = 0.0;
    lp.add(sum_row, Relation::Eq, 1.0);

    if !any_rank {
        return Ok(Optimum {
            psi: DegreeDistribution::point_mass(1, d_max)?,
            value: 0.0,
            lp_value: 0.0,
            status: LpStatus::Optimal,
            fixup_applied: false,
            empty_support: true,
        });
    }
    // Cutting-plane refinement: fine-grid points violated by the current
    // solution join the program until none remain.
    let fine = grid(eta, settings.grid * settings.refine.max(1));
    let (mut simplex, mut sol) = Simplex::new(&lp);
    for _ in 0..12 {
        if sol.status != LpStatus::Optimal {
            break;
        }
        let t = sol.x[d_max];
        let terms: Vec<(usize, f64)> = (1..=d_max).filter(|&d| sol.x[d - 1] > 0.0).map(|d| (d, sol.x[d - 1])).collect();
        let mut cuts: Vec<(Vec<f64>, f64)> = Vec::new();
        for (eff, &scale) in effs.iter().zip(scales) {
            let slack: Vec<f64> = fine.iter().map(|&x| omega_sparse(x, eff, &terms) + t * scale * g(x)).collect();
            // violations worth less than a 1e-6 relative change in t are left
            // to the final fine-grid shrink
            let tol = -1e-6 * t * scale * -g(fine[fine.len() - 1]).max(1e-300) - 1e-12;
            // one cut per violated local minimum of the slack
            for i in 0..fine.len() {
                let s = slack[i];
                let left = if i > 0 { slack[i - 1] } else { f64::INFINITY };
                let right = slack.get(i + 1).copied().unwrap_or(f64::INFINITY);
                if !(s < tol && s <= left && s < right) {
                    continue;
                }
                let x = fine[i];
                let mut row: Vec<f64> = omega_coefficients(x, eff, d_max).into_iter().map(|c| -c).collect();
                row.push(-scale * g(x));
                cuts.push((row, 0.0));
            }
        }
        if cuts.is_empty() {
            break;
        }
        simplex.drop_nonbinding();
        sol = simplex.add_le_rows(&cuts);
    }
    if sol.status != LpStatus::Optimal {
        return Ok(Optimum {
            psi: DegreeDistribution::point_mass(1, d_max)?,
            value: 0.0,
            lp_value: 0.0,
            status: sol.status,
            fixup_applied: false,
            empty_support: false,
        });
    }
    let mut w: Vec<f64> = sol.x[..d_max].iter().map(|v| v.max(0.0)).collect();
    // Ω(0) = Σ_r rΨ_r ħ'_r must be positive for every h
    let mut fix_upto = 0;
    for eff in effs {
        let s: f64 = (1..=eff.m().min(d_max)).map(|r| r as f64 * w[r - 1] * eff.hbar_prime(r)).sum();
        if s <= 1e-14 {
            let r_star = (1..=eff.m()).rev().find(|&r| eff.hbar_prime(r) > 0.0).unwrap_or(0);
            fix_upto = fix_upto.max(r_star.min(d_max));
        }
    }
    let wsum: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= wsum);
    for v in w.iter_mut().take(fix_upto) {
        *v += FIXUP_DELTA;
    }
    let psi = DegreeDistribution::from_weights(w)?;
    let mut value = sol.objective;
    for (eff, &scale) in effs.iter().zip(scales) {
        if scale > 0.0 && eff.hbar_prime(1) > 0.0 {
            value = value.min(max_scaled(&psi, eff, scale, g, &fine));
        }
    }
    Ok(Optimum { psi, value: value.max(0.0), lp_value: sol.objective, status: LpStatus::Optimal, fixup_applied: fix_upto > 0, empty_support: false })
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!("η = {eta} outside (0,1)")));
    }
    Ok(())
}

/// (P1): `max θ` for a single rank distribution.
pub fn optimize_p1(h: &RankDistribution, q: u32, eta: f64, settings: LpSettings) -> Result<Optimum> {
    check_eta(eta)?;
    solve_family(&[effective_dist(h, q)], &[1.0], &ln_one_minus, eta, settings)
}

/// (P2): one `θ` that every rank distribution in `hs` must support.
pub fn optimize_p2(hs: &[RankDistribution], q: u32, eta: f64, settings: LpSettings) -> Result<Optimum> {
    check_eta(eta)?;
    let effs: Vec<_> = hs.iter().map(|h| effective_dist(h, q)).collect();
    let ones = vec![1.0; effs.len()];
    solve_family(&effs, &ones, &ln_one_minus, eta, settings)
}

/// (P3): the largest fraction `α` of `Σ_i iħ_i(h)` supported by every `h`.
pub fn optimize_p3(hs: &[RankDistribution], q: u32, eta: f64, settings: LpSettings) -> Result<Optimum> {
    check_eta(eta)?;
    let effs: Vec<_> = hs.iter().map(|h| effective_dist(h, q)).collect();
    let scales: Vec<f64> = effs.iter().map(|e| e.weighted_sum()).collect();
    solve_family(&effs, &scales, &ln_one_minus, eta, settings)
}

/// (P4): (P1) with the finite-length penalty `−(c/K)(1−x)^{c'}`.
pub fn optimize_p4(h: &RankDistribution, q: u32, eta: f64, k: f64, c: f64, c_prime: f64, settings: LpSettings) -> Result<Optimum> {
    check_eta(eta)?;
    if !(k > 0.0) || c < 0.0 || c_prime < 0.0 {
        return Err(Error::InvalidParameter("need K > 0, c ≥ 0, c' ≥ 0".into()));
    }
    let g = move |x: f64| libm::log1p(-x) - (c / k) * libm::pow(1.0 - x, c_prime);
    solve_family(&[effective_dist(h, q)], &[1.0], &g, eta, settings)
}

/// Uniform rank distribution on `{1..M}`-supported simplex (`h_0 = 0`):
/// sorted uniform spacings.
pub fn sample_rank_distribution(m: usize, stream: &mut RandomStream) -> RankDistribution {
    let mut cuts: Vec<f64> = (0..m.saturating_sub(1)).map(|_| stream.unit()).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut h = vec![0.0; m + 1];
    let mut prev = 0.0;
    for r in 1..=m {
        let next = if r < m { cuts[r - 1] } else { 1.0 };
        h[r] = next - prev;
        prev = next;
    }
    RankDistribution::from_weights(h).expect("spacings form a distribution")
}

/// `θ̃ = (1−η)θ̂ / Σ_r rħ_r`.
pub fn normalized_theta(theta: f64, h: &RankDistribution, q: u32, eta: f64) -> f64 {
    let s = effective_dist(h, q).weighted_sum();
    if s > 0.0 {
        (1.0 - eta) * theta / s
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rank::line_rank_dist;

    #[test]
    fn max_degree_formula() {
        assert_eq!(max_degree(16, 0.5).unwrap(), 31);
        assert_eq!(max_degree(16, 0.02).unwrap(), 799);
        assert_eq!(max_degree(1, 0.01).unwrap(), 99);
        assert_eq!(max_degree(16, 0.01).unwrap(), 1599);
        assert!(max_degree(16, 0.0).is_err());
    }

    #[test]
    fn baseline_telescopes() {
        let p = baseline_psi(1, 3).unwrap();
        assert_eq!(p.as_slice(), &[0.0, 0.5, 0.5]);
        for (r, d) in [(1, 5), (3, 40), (16, 1599)] {
            let s: f64 = baseline_psi(r, d).unwrap().as_slice().iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!(baseline_psi(3, 3).is_err());
    }

    #[test]
    fn omega_forms_agree() {
        let h = line_rank_dist(8, &[0.2, 0.3], 16).unwrap();
        let eff = effective_dist(&h, 16);
        let psi = DegreeDistribution::from_weights((1..=40).map(|d| 1.0 / d as f64).collect()).unwrap();
        for x in [0.0, 0.2, 0.7, 0.95] {
            let a = omega(x, &eff, &psi);
            let b = omega_sr(x, &eff, &psi);
            let c: f64 = omega_coefficients(x, &eff, 40).iter().zip(psi.as_slice()).map(|(c, p)| c * p).sum();
            assert!((a - b).abs() < 1e-10 && (a - c).abs() < 1e-10, "{a} {b} {c}");
        }
    }

    #[test]
    fn omega_m1_closed_form() {
        let h = RankDistribution::new(vec![0.25, 0.75]).unwrap();
        let eff = effective_dist(&h, 4);
        let psi = DegreeDistribution::new(vec![0.1, 0.4, 0.5]).unwrap();
        let x: f64 = 0.6;
        let want = eff.hbar(1) * (0.1 + 2.0 * 0.4 * x + 3.0 * 0.5 * x * x);
        assert!((omega(x, &eff, &psi) - want).abs() < 1e-14);
    }

    #[test]
    fn degenerate_rank_gives_zero() {
        let h = RankDistribution::point_mass(16, 0);
        let o = optimize_p1(&h, 256, 0.01, LpSettings::default()).unwrap();
        assert_eq!(o.value, 0.0);
        assert!(o.empty_support);
        assert_eq!(theta_bounds(&h, 256, 0.01), (0.0, 0.0));
    }

    #[test]
    fn sampler_shape() {
        let mut s = RandomStream::new(5, 5);
        for _ in 0..20 {
            let h = sample_rank_distribution(16, &mut s);
            assert_eq!(h.m(), 16);
            assert_eq!(h.get(0), 0.0);
        }
    }
}
