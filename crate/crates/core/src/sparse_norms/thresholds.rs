use serde::Serialize;

use crate::error::{Error, Result};

const E: f64 = std::f64::consts::E;

fn h(z: f64, n: f64) -> f64 {
    z * (E * n / z).ln()
}

/// Smallest `k̃ ≤ n` with `k̃ log(en/k̃) ≥ m log(eN/m)`, or `None` when no
/// such `k̃` exists.
pub fn k_prime(m: usize, n: usize, big_n: usize) -> Option<usize> {
    if m == 0 || m > big_n || n == 0 {
        return None;
    }
    let target = h(m as f64, big_n as f64);
    (1..=n).find(|&k| h(k as f64, n as f64) >= target)
}

fn loglog3(m: usize) -> f64 {
    (3.0 * m as f64).ln().ln()
}

/// `λ_{k,m} = √(log log 3m)·√m·log(e·max(N,n)/m) + √k·log(en/k)`.
pub fn lambda_km(k: usize, m: usize, n: usize, big_n: usize) -> f64 {
    let (kf, mf, nf) = (k as f64, m as f64, n as f64);
    let top = big_n.max(n) as f64;
    loglog3(m).sqrt() * mf.sqrt() * (E * top / mf).ln() + kf.sqrt() * (E * nf / kf).ln()
}

/// `λ_m = √(log log 3m)·√m / √(log 3m) · log(e·max(N,n)/m)`.
pub fn lambda_m(m: usize, n: usize, big_n: usize) -> f64 {
    let mf = m as f64;
    let top = big_n.max(n) as f64;
    loglog3(m).sqrt() * mf.sqrt() / (3.0 * mf).ln().sqrt() * (E * top / mf).ln()
}

/// The block-size weight
/// `g(z) = √(zm)/√(log(e²m/z))·log(eN/m)` for `z < m` and
/// `min{√(zm)·log(eN/m), m·log²(eN/m)}` for `z ≥ m`.
///
/// The two branches do not meet at `z = m`: the left limit is
/// `m·log(eN/m)/√2`, the right value `m·log(eN/m)`.
pub fn g_function(z: f64, m: usize, big_n: usize) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    let mf = m as f64;
    let l = (E * big_n as f64 / mf).ln();
    if z < mf {
        (z * mf).sqrt() / (E * E * mf / z).ln().sqrt() * l
    } else {
        ((z * mf).sqrt() * l).min(mf * l * l)
    }
}

/// Block sizes `k_1 = k, k_2 = m, …, k_{s+1} = 1` for the sparse net.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockSizes {
    pub s: usize,
    /// `k_1, …, k_{s+1}`.
    pub sizes: Vec<usize>,
}

impl BlockSizes {
    pub fn k(&self) -> usize {
        self.sizes[0]
    }

    /// `k_i`, 1-based.
    pub fn get(&self, i: usize) -> usize {
        self.sizes[i - 1]
    }

    /// Index of the first violated constraint, checking
    /// `k_i log(en/k_i) ≤ 20 g(k_{i+1})` for `i ≤ s`,
    /// `k_i ∈ [m^{1/4}/6, m]` for `2 ≤ i ≤ s` and `k_{s+1} = 1`.
    pub fn violation(&self, m: usize, n: usize, big_n: usize) -> Option<(usize, String)> {
        let s = self.s;
        if self.sizes.len() != s + 1 {
            return Some((0, format!("expected {} sizes, found {}", s + 1, self.sizes.len())));
        }
        if self.sizes[s] != 1 {
            return Some((s + 1, format!("k_(s+1) = {} != 1", self.sizes[s])));
        }
        let lower = (m as f64).powf(0.25) / 6.0;
        for i in 1..=s {
            let ki = self.get(i) as f64;
            let lhs = h(ki, n as f64);
            let rhs = 20.0 * g_function(self.get(i + 1) as f64, m, big_n);
            if lhs > rhs * (1.0 + 1e-12) {
                return Some((i, format!("k_i log(en/k_i) = {lhs} > 20 g(k_(i+1)) = {rhs}")));
            }
            if i >= 2 && (ki < lower || self.get(i) > m) {
                return Some((i, format!("k_i = {ki} outside [{lower}, {m}]")));
            }
        }
        None
    }
}

/// Solve `z log(en/z) = target` on `(0, n]` (the left side increases there).
fn solve_h(target: f64, n: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, n);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid, n) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    hi
}

/// Builds `ℓ_0 = 1`, `h(ℓ_i) = 10 g(ℓ_{i−1})` with `h(z) = z log(en/z)`,
/// stopping at the first `ℓ_{s−1} ≥ m` (or setting `ℓ_j = m` as soon as
/// `10 g(ℓ_{j−1}) ≥ n`), then `k_1 = k`, `k_i = min{m, ⌈ℓ_{s+1−i}⌉}`.
pub fn choose_block_sizes(k: usize, m: usize, n: usize, big_n: usize) -> Result<BlockSizes> {
    if n == 0 || n > big_n {
        return Err(Error::out_of_range("n", format!("need 1 <= n <= N = {big_n}, got {n}")));
    }
    if m == 0 || m > big_n {
        return Err(Error::out_of_range("m", format!("need 1 <= m <= N = {big_n}, got {m}")));
    }
    let kp = k_prime(m, n, big_n);
    let k_cap = kp.map_or(n, |kp| kp.min(n));
    if k == 0 || k > k_cap {
        return Err(Error::out_of_range("k", format!("need 1 <= k <= min(n, k') = {k_cap}, got {k}")));
    }
    let (mf, nf) = (m as f64, n as f64);
    let mut ell = vec![1.0f64];
    while *ell.last().unwrap() < mf {
        if ell.len() > 10_000 {
            return Err(Error::InternalInvariant {
                index: ell.len(),
                detail: "block-size recursion did not reach m".into(),
            });
        }
        let target = 10.0 * g_function(*ell.last().unwrap(), m, big_n);
        if target >= nf {
            ell.push(mf);
            break;
        }
        let next = solve_h(target, nf);
        if next <= *ell.last().unwrap() {
            return Err(Error::InternalInvariant {
                index: ell.len(),
                detail: format!("sequence stalled at {next}"),
            });
        }
        ell.push(next);
    }
    let s = ell.len();
    let mut sizes = vec![k];
    for i in 2..=s + 1 {
        let l = ell[s + 1 - i];
        sizes.push(m.min(l.ceil() as usize));
    }
    let out = BlockSizes { s, sizes };
    if let Some((index, detail)) = out.violation(m, n, big_n) {
        return Err(Error::InternalInvariant { index, detail });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_prime_examples() {
        assert_eq!(k_prime(1, 10, 10), Some(1));
        // m = N = n: target is n.
        let n = 20;
        let scan = (1..=n).find(|&k| k as f64 * (E * n as f64 / k as f64).ln() >= n as f64);
        assert_eq!(k_prime(n, n, n), scan);
        assert_eq!(scan, Some(n));
        // n = 2 cannot reach m log(eN/m) for large m.
        let (m, big_n) = (500, 1000);
        let best = (1..=2).map(|k| h(k as f64, 2.0)).fold(0.0, f64::max);
        assert!(best < h(m as f64, big_n as f64));
        assert_eq!(k_prime(m, 2, big_n), None);
    }

    #[test]
    fn lambda_examples() {
        let n = 50;
        let expected = (n as f64).sqrt() * (loglog3(n).sqrt() + 1.0);
        assert!((lambda_km(n, n, n, n) - expected).abs() < 1e-12);
        // Independent re-evaluation at k = m = 1, n = N = 10.
        let direct = (3f64.ln().ln()).sqrt() * (10.0 * E).ln() + (10.0 * E).ln();
        assert!((lambda_km(1, 1, 10, 10) - direct).abs() < 1e-12);
        for m in [1, 3, 10, 40] {
            for k in [1, 5, 50] {
                assert!(lambda_m(m, 50, 100) <= lambda_km(k, m, 50, 100));
            }
        }
    }

    #[test]
    fn g_branches_and_limits() {
        let (m, big_n) = (16, 64);
        let l = (E * 4.0).ln();
        let left = g_function(16.0 - 1e-9, m, big_n);
        let right = g_function(16.0 + 1e-9, m, big_n);
        assert!((left - 16.0 * l / 2f64.sqrt()).abs() < 1e-6);
        assert!((right - 16.0 * l).abs() < 1e-6);
        assert!((g_function(16.0, m, big_n) - 16.0 * l).abs() < 1e-12);
        assert!(g_function(1e-12, m, big_n) < 1e-4);
        let direct = (64f64).sqrt() / (E * E * 4.0).ln().sqrt() * l;
        assert!((g_function(4.0, m, big_n) - direct).abs() < 1e-12);
        // Far right the m·log² cap takes over.
        assert!((g_function(1e6, m, big_n) - 16.0 * l * l).abs() < 1e-9);
    }

    #[test]
    fn block_sizes_endpoints() {
        let b = choose_block_sizes(2, 16, 64, 64).unwrap();
        assert_eq!(b.get(1), 2);
        assert_eq!(b.get(2), 16);
        assert_eq!(*b.sizes.last().unwrap(), 1);
        assert!(b.violation(16, 64, 64).is_none());
        assert!(b.s as f64 <= 12.0 * (48f64).ln().ln());
    }

    #[test]
    fn block_sizes_for_m_one() {
        let b = choose_block_sizes(1, 1, 10, 10).unwrap();
        assert_eq!(b.s, 1);
        assert_eq!(b.sizes, vec![1, 1]);
    }

    #[test]
    fn block_sizes_reject_bad_input() {
        assert!(choose_block_sizes(1, 4, 20, 10).is_err());
        assert!(choose_block_sizes(0, 4, 10, 10).is_err());
        assert!(choose_block_sizes(11, 4, 10, 10).is_err());
    }
}
