use serde::Serialize;

use super::thresholds::BlockSizes;
use crate::error::{Error, Result};
use crate::linalg::{binomial, Combinations};

/// Hard cap on `C(N,m)·(1+2/ε)^m` for explicit nets.
pub const DEFAULT_NET_CAP: f64 = 1e7;

/// Coordinates and values of one sparse block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseBlock {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseBlock {
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// `π(x) = π_1(x) + … + π_s(x)` with disjointly supported blocks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetDecomposition {
    /// `blocks[i - 1]` is `π_i(x)`.
    pub blocks: Vec<SparseBlock>,
    pub projection: Vec<f64>,
}

impl NetDecomposition {
    /// `Σ_i k_{i+1}·‖π_i(x)‖_∞²`.
    pub fn weighted_sup(&self, sizes: &BlockSizes) -> f64 {
        self.blocks
            .iter()
            .enumerate()
            .map(|(i, b)| sizes.get(i + 2) as f64 * b.sup_norm().powi(2))
            .sum()
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.projection)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// First violated invariant, if any.
    pub fn violation(&self, x: &[f64], sizes: &BlockSizes, n: usize) -> Option<String> {
        let mut seen = vec![false; x.len()];
        for (i, b) in self.blocks.iter().enumerate() {
            if b.indices.len() > sizes.get(i + 1) {
                return Some(format!("block {} has {} > k_i entries", i + 1, b.indices.len()));
            }
            for &j in &b.indices {
                if std::mem::replace(&mut seen[j], true) {
                    return Some(format!("coordinate {j} appears in two blocks"));
                }
            }
        }
        let bound = sizes.k() as f64 / (2.0 * n as f64);
        let d = self.distance(x);
        if d > bound * (1.0 + 1e-12) {
            return Some(format!("|x - pi(x)| = {d} > k/(2n) = {bound}"));
        }
        let w = self.weighted_sup(sizes);
        if w > 4.0 {
            return Some(format!("sum k_(i+1) |pi_i|_inf^2 = {w} > 4"));
        }
        None
    }
}

/// Splits a `k`-sparse unit vector into blocks `F_s, F_{s−1}, …` of its
/// largest coordinates and rounds each block toward zero on a lattice of
/// step `√k_i/(2n)`, capped at `k_{i+1}^{−1/2}` in sup norm.
///
/// Block sizes are trimmed from the front so that they add up to exactly
/// `k`; this keeps the total rounding error at most `k/(2n)`.
pub fn sparse_net_project(x: &[f64], sizes: &BlockSizes, n: usize) -> Result<NetDecomposition> {
    if n == 0 {
        return Err(Error::out_of_range("n", "n must be positive"));
    }
    let k = sizes.k();
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::out_of_range("x", format!("expected a unit vector, |x| = {norm}")));
    }
    let support = x.iter().filter(|v| **v != 0.0).count();
    if support > k {
        return Err(Error::out_of_range("x", format!("support {support} exceeds k = {k}")));
    }
    let s = sizes.s;
    // Trimmed sizes: fill from block s downwards until k slots are used.
    let mut trimmed = vec![0usize; s];
    let mut left = k;
    for i in (1..=s).rev() {
        let take = sizes.get(i).min(left);
        trimmed[i - 1] = take;
        left -= take;
    }
    if left > 0 {
        return Err(Error::out_of_range("sizes", format!("block sizes cover fewer than k = {k} coordinates")));
    }

    let mut order: Vec<usize> = (0..x.len()).filter(|&j| x[j] != 0.0).collect();
    order.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));

    let mut projection = vec![0.0; x.len()];
    let mut blocks = vec![
        SparseBlock {
            indices: Vec::new(),
            values: Vec::new(),
        };
        s
    ];
    let mut cursor = 0;
    for i in (1..=s).rev() {
        let kt = trimmed[i - 1];
        if kt == 0 {
            continue;
        }
        let step = (kt as f64).sqrt() / (2.0 * n as f64);
        let cap = 1.0 / (sizes.get(i + 1) as f64).sqrt();
        let end = (cursor + kt).min(order.len());
        let block = &mut blocks[i - 1];
        for &j in &order[cursor..end] {
            let q = (x[j].abs() / step).floor() * step;
            let v = q.min(cap).copysign(x[j]);
            if v != 0.0 {
                block.indices.push(j);
                block.values.push(v);
                projection[j] = v;
            }
        }
        cursor = end;
    }
    Ok(NetDecomposition { blocks, projection })
}

/// Uniformly supported `k`-sparse unit vector with Gaussian nonzeros.
pub fn random_sparse_unit<R: rand::Rng + ?Sized>(big_n: usize, k: usize, rng: &mut R) -> Vec<f64> {
    let mut x = vec![0.0; big_n];
    for j in rand::seq::index::sample(rng, big_n, k) {
        x[j] = rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, rng);
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
    x
}

/// Greedy net of the unit sphere in `R^m`.
fn sphere_net(m: usize, eps: f64, cap: f64) -> Result<Vec<Vec<f64>>> {
    if m == 1 {
        return Ok(vec![vec![1.0], vec![-1.0]]);
    }
    // Candidates: a lattice on the surface of [-1,1]^m pushed to the sphere.
    // A unit x lies within `delta` of some candidate.
    let side = (8.0 * ((m - 1) as f64).sqrt() / eps).ceil() as usize;
    let delta = 2.0 * ((m - 1) as f64).sqrt() / side as f64;
    let per_face = ((side + 1) as f64).powi(m as i32 - 1);
    if 2.0 * m as f64 * per_face > cap {
        return Err(Error::BudgetExceeded {
            required: (2.0 * m as f64 * per_face) as u128,
            budget: cap as u128,
            fallback: "a coarser eps",
        });
    }
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    let grid = |c: usize| -1.0 + 2.0 * c as f64 / side as f64;
    for face in 0..m {
        for sign in [1.0, -1.0] {
            let mut counter = vec![0usize; m - 1];
            loop {
                let mut p = Vec::with_capacity(m);
                let mut it = counter.iter();
                for d in 0..m {
                    p.push(if d == face { sign } else { grid(*it.next().unwrap()) });
                }
                let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                p.iter_mut().for_each(|v| *v /= norm);
                candidates.push(p);
                let mut d = 0;
                while d < m - 1 {
                    counter[d] += 1;
                    if counter[d] <= side {
                        break;
                    }
                    counter[d] = 0;
                    d += 1;
                }
                if d == m - 1 {
                    break;
                }
            }
        }
    }
    let radius = eps - delta;
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let mut net: Vec<usize> = Vec::new();
    for (c, p) in candidates.iter().enumerate() {
        if net.iter().all(|&q| dist(p, &candidates[q]) > radius) {
            net.push(c);
        }
    }
    // Drop points whose candidates are all covered by other points.
    let mut cover = vec![0usize; candidates.len()];
    let near: Vec<Vec<usize>> = net
        .iter()
        .map(|&q| (0..candidates.len()).filter(|&c| dist(&candidates[c], &candidates[q]) <= radius).collect())
        .collect();
    for list in &near {
        for &c in list {
            cover[c] += 1;
        }
    }
    let mut keep = vec![true; net.len()];
    for (i, list) in near.iter().enumerate() {
        if list.iter().all(|&c| cover[c] > 1) {
            keep[i] = false;
            for &c in list {
                cover[c] -= 1;
            }
        }
    }
    Ok(net
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(&q, _)| candidates[q].clone())
        .collect())
}

/// An `eps`-net of `U_m ⊂ R^N`: a sphere net on every `m`-subset of
/// coordinates, embedded and deduplicated. Fails when
/// `C(N,m)·(1+2/eps)^m` exceeds `cap`.
pub fn epsilon_net_sparse_sphere(big_n: usize, m: usize, eps: f64, cap: f64) -> Result<Vec<Vec<f64>>> {
    if m == 0 || m > big_n {
        return Err(Error::out_of_range("m", format!("need 1 <= m <= N = {big_n}, got {m}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::out_of_range("eps", format!("need 0 < eps < 1, got {eps}")));
    }
    let volume = binomial(big_n, m) as f64 * (1.0 + 2.0 / eps).powi(m as i32);
    if volume > cap {
        return Err(Error::BudgetExceeded {
            required: volume.min(u128::MAX as f64) as u128,
            budget: cap as u128,
            fallback: "a larger eps or a smaller m",
        });
    }
    let local = sphere_net(m, eps, cap)?;
    let mut out: Vec<Vec<f64>> = Vec::new();
    for support in Combinations::new(big_n, m) {
        for p in &local {
            let mut v = vec![0.0; big_n];
            for (&j, &val) in support.iter().zip(p) {
                v[j] = val;
            }
            out.push(v);
        }
    }
    out.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse_norms::choose_block_sizes;
    use crate::rng::RngStream;

    #[test]
    fn basis_vector_projects_close() {
        let sizes = choose_block_sizes(1, 4, 20, 20).unwrap();
        let mut x = vec![0.0; 20];
        x[0] = 1.0;
        let d = sparse_net_project(&x, &sizes, 20).unwrap();
        assert!(d.distance(&x) <= sizes.k() as f64 / 40.0);
        assert!(d.violation(&x, &sizes, 20).is_none());
    }

    #[test]
    fn projection_campaign() {
        let (k, n) = (5, 40);
        let sizes = choose_block_sizes(k, 8, n, n).unwrap();
        let mut rng = RngStream::root(17).rng();
        for _ in 0..10_000 {
            let x = random_sparse_unit(n, k, &mut rng);
            let d = sparse_net_project(&x, &sizes, n).unwrap();
            assert!(d.distance(&x) <= k as f64 / (2.0 * n as f64) + 1e-12);
            assert!(d.weighted_sup(&sizes) <= 4.0);
            assert!(d.violation(&x, &sizes, n).is_none());
        }
    }

    #[test]
    fn projection_rejects_bad_input() {
        let sizes = choose_block_sizes(2, 4, 20, 20).unwrap();
        assert!(sparse_net_project(&[0.5; 20], &sizes, 20).is_err());
        let mut x = vec![0.0; 20];
        x[0] = 0.6;
        x[1] = 0.64f64.sqrt();
        x[2] = 0.0;
        assert!(sparse_net_project(&x, &sizes, 20).is_ok());
        let y: Vec<f64> = (0..20).map(|j| if j < 3 { 1.0 / 3f64.sqrt() } else { 0.0 }).collect();
        assert!(sparse_net_project(&y, &sizes, 20).is_err());
    }

    #[test]
    fn one_sparse_net_is_signed_basis() {
        let net = epsilon_net_sparse_sphere(5, 1, 0.3, DEFAULT_NET_CAP).unwrap();
        assert_eq!(net.len(), 10);
        for v in &net {
            assert_eq!(v.iter().filter(|x| **x != 0.0).count(), 1);
            assert!(v.iter().any(|x| x.abs() == 1.0));
        }
    }

    #[test]
    fn covering_audit_two_sparse() {
        let (big_n, m, eps) = (4, 2, 0.2);
        let net = epsilon_net_sparse_sphere(big_n, m, eps, DEFAULT_NET_CAP).unwrap();
        assert!((net.len() as f64) <= binomial(big_n, m) as f64 * (1.0 + 2.0 / eps).powi(m as i32));
        let mut rng = RngStream::root(3).rng();
        for _ in 0..100_000 {
            let x = random_sparse_unit(big_n, m, &mut rng);
            let best = net
                .iter()
                .map(|p| p.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
                .sqrt();
            assert!(best <= eps, "uncovered point at distance {best}");
        }
    }

    #[test]
    fn three_dim_sphere_net_covers() {
        let net = sphere_net(3, 0.3, DEFAULT_NET_CAP).unwrap();
        assert!((net.len() as f64) <= (1.0 + 2.0 / 0.3f64).powi(3));
        let mut rng = RngStream::root(8).rng();
        for _ in 0..20_000 {
            let x = random_sparse_unit(3, 3, &mut rng);
            let best = net
                .iter()
                .map(|p| p.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
                .sqrt();
            assert!(best <= 0.3);
        }
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(
            epsilon_net_sparse_sphere(40, 10, 0.1, DEFAULT_NET_CAP),
            Err(Error::BudgetExceeded { .. })
        ));
    }
}
