//! Regularized incomplete beta function with integer parameters.

use alloc::vec;
use alloc::vec::Vec;

/// `ln C(n, k)`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    libm::lgamma((n + 1) as f64) - libm::lgamma((k + 1) as f64) - libm::lgamma((n - k + 1) as f64)
}

/// `C(n, k)` as a float.
pub fn choose(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    if n <= 60 {
        // exact in u128 for these sizes
        let mut c: u128 = 1;
        for i in 0..k {
            c = c * (n - i) as u128 / (i + 1) as u128;
        }
        c as f64
    } else {
        libm::round(libm::exp(ln_choose(n, k)))
    }
}

/// `B(a, b) = (a−1)!(b−1)!/(a+b−1)!`.
pub fn beta_fn(a: u64, b: u64) -> f64 {
    libm::exp(libm::lgamma(a as f64) + libm::lgamma(b as f64) - libm::lgamma((a + b) as f64))
}

/// `I_{a,b}(x) = Σ_{j=a}^{a+b−1} C(a+b−1, j) x^j (1−x)^{a+b−1−j}` for integer `a, b ≥ 1`.
///
/// Terms are accumulated from their logarithms, so neither tail underflows
/// early.
pub fn inc_beta(a: u64, b: u64, x: f64) -> f64 {
    assert!(a >= 1 && b >= 1, "inc_beta needs a, b ≥ 1");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let n = a + b - 1;
    let (lx, l1x) = (libm::log(x), libm::log1p(-x));
    let mut lt = ln_choose(n, a) + a as f64 * lx + (n - a) as f64 * l1x;
    let mut sum = 0.0;
    for j in a..=n {
        sum += libm::exp(lt);
        if j < n {
            lt += libm::log((n - j) as f64) - libm::log((j + 1) as f64) + lx - l1x;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// `I_{a,b}(x)` for `a = 1..=amax` at fixed `b`, via
/// `I_{a+1,b} = I_{a,b} − C(a+b−1, a) x^a (1−x)^b`. Entry `k` holds `a = k+1`.
pub fn inc_beta_column(b: u64, amax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; amax];
    if amax == 0 || x <= 0.0 {
        return out;
    }
    if x >= 1.0 {
        out.iter_mut().for_each(|v| *v = 1.0);
        return out;
    }
    let y = 1.0 - x;
    let yb = libm::pow(y, b as f64);
    let mut cur = 1.0 - yb; // I_{1,b}
                            // term_a = C(a+b−1, a) x^a (1−x)^b
    let mut term = b as f64 * x * yb;
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = cur.max(0.0);
        let a = (k + 1) as f64;
        cur -= term;
        term *= (a + b as f64) / (a + 1.0) * x;
        if cur <= 0.0 {
            break;
        }
    }
    out
}
