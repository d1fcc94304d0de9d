use nalgebra::{DMatrix, DVector, SVD};
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::Serialize;

use super::{lex_less, Method};
use crate::error::{Error, Result};
use crate::linalg::{binomial, spectral_norm_direct, submatrix, top_k_by_magnitude, Combinations};
use crate::rng::RngStream;

/// `A_{k,m}` together with a maximizing pair `(J, I)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubmatrixResult {
    pub value: f64,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub method: Method,
    pub evaluations: u128,
}

impl SubmatrixResult {
    fn better_than(&self, other: &SubmatrixResult) -> bool {
        self.value > other.value
            || (self.value == other.value
                && lex_less((&self.rows, &self.cols), (&other.rows, &other.cols)))
    }
}

fn check_dims(a: &DMatrix<f64>, k: usize, m: usize) -> Result<()> {
    if k == 0 || k > a.nrows() {
        return Err(Error::out_of_range("k", format!("need 1 <= k <= n = {}, got {k}", a.nrows())));
    }
    if m == 0 || m > a.ncols() {
        return Err(Error::out_of_range("m", format!("need 1 <= m <= N = {}, got {m}", a.ncols())));
    }
    Ok(())
}

/// Exact `A_{k,m}` by enumerating every `(J, I)` with `|J| = k`, `|I| = m`.
///
/// Requires `C(n,k)·C(N,m) ≤ budget`. Ties go to the lexicographically
/// smallest `(J, I)`.
pub fn akm_exact(a: &DMatrix<f64>, k: usize, m: usize, budget: u128) -> Result<SubmatrixResult> {
    check_dims(a, k, m)?;
    let required = binomial(a.nrows(), k).saturating_mul(binomial(a.ncols(), m));
    if required > budget {
        return Err(Error::BudgetExceeded {
            required,
            budget,
            fallback: "akm_lower",
        });
    }
    let col_sets: Vec<Vec<usize>> = Combinations::new(a.ncols(), m).collect();
    let all_rows: Vec<usize> = (0..a.nrows()).collect();
    let per_cols: Vec<SubmatrixResult> = col_sets
        .par_iter()
        .map(|cols| {
            let block = submatrix(a, &all_rows, cols);
            let mut best: Option<(f64, Vec<usize>)> = None;
            for rows in Combinations::new(a.nrows(), k) {
                let v = spectral_norm_direct(&submatrix(&block, &rows, &(0..m).collect::<Vec<_>>()));
                if best.as_ref().is_none_or(|(b, _)| v > *b) {
                    best = Some((v, rows));
                }
            }
            let (value, rows) = best.expect("at least one row subset");
            SubmatrixResult {
                value,
                rows,
                cols: cols.clone(),
                method: Method::Exact,
                evaluations: 0,
            }
        })
        .collect();
    let mut best = per_cols[0].clone();
    for cand in &per_cols[1..] {
        if cand.better_than(&best) {
            best = cand.clone();
        }
    }
    best.evaluations = required;
    Ok(best)
}

/// `A_{k,m}` for every `k = 1..=n` at a fixed `m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AkmProfile {
    pub m: usize,
    /// `values[k-1] = A_{k,m}`.
    pub values: Vec<f64>,
    pub method: Method,
}

impl AkmProfile {
    pub fn get(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.values[k - 1]
        }
    }
}

/// Best `A_{k,·}` over all `k` for one column pair, by sweeping the
/// direction `v` on the half circle.
///
/// `|A(J,I)|² = max_v Σ_{i∈J} ⟨r_i, v⟩²`, and the top-`k` set of
/// `⟨r_i, v⟩²` only changes where two magnitudes cross. One direction per
/// arc between crossings therefore visits an optimal `J` for every `k`.
fn pair_profile(x: &[f64], y: &[f64], out: &mut [f64]) {
    let n = x.len();
    let mut angles = Vec::with_capacity(n * (n - 1));
    let pi = std::f64::consts::PI;
    for i in 0..n {
        for j in i + 1..n {
            for sign in [-1.0, 1.0] {
                let (d0, d1) = (x[i] + sign * x[j], y[i] + sign * y[j]);
                if d0 == 0.0 && d1 == 0.0 {
                    continue;
                }
                angles.push((-d0).atan2(d1).rem_euclid(pi));
            }
        }
    }
    angles.sort_by(f64::total_cmp);
    angles.dedup();
    let probes: Vec<f64> = if angles.is_empty() {
        vec![0.0]
    } else {
        let mut p: Vec<f64> = angles.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        p.push(0.5 * (angles[angles.len() - 1] + angles[0] + pi));
        p
    };
    let mut order: Vec<usize> = (0..n).collect();
    let mut proj = vec![0.0; n];
    for phi in probes {
        let (c, s) = (phi.cos(), phi.sin());
        for i in 0..n {
            let d = x[i] * c + y[i] * s;
            proj[i] = d * d;
        }
        order.sort_by(|&i, &j| proj[j].total_cmp(&proj[i]).then(i.cmp(&j)));
        let (mut gxx, mut gxy, mut gyy) = (0.0, 0.0, 0.0);
        for (rank, &i) in order.iter().enumerate() {
            gxx += x[i] * x[i];
            gxy += x[i] * y[i];
            gyy += y[i] * y[i];
            let mid = 0.5 * (gxx + gyy);
            let rad = (0.25 * (gxx - gyy) * (gxx - gyy) + gxy * gxy).sqrt();
            let v = (mid + rad).max(0.0).sqrt();
            if v > out[rank] {
                out[rank] = v;
            }
        }
    }
}

/// Exact `A_{k,m}` for all `k`.
///
/// `m = 1` reads column prefix norms, `m = 2` uses an angular sweep per
/// column pair, and larger `m` enumerates row subsets for each `k` within
/// `budget` (total evaluations `Σ_k C(n,k)·C(N,m)`).
pub fn akm_profile(a: &DMatrix<f64>, m: usize, budget: u128) -> Result<AkmProfile> {
    check_dims(a, 1, m)?;
    let (n, big_n) = (a.nrows(), a.ncols());
    let values = match m {
        1 => {
            let per_col: Vec<Vec<f64>> = (0..big_n)
                .into_par_iter()
                .map(|j| {
                    let mut sq: Vec<f64> = a.column(j).iter().map(|v| v * v).collect();
                    sq.sort_by(|p, q| q.total_cmp(p));
                    let mut acc = 0.0;
                    sq.iter()
                        .map(|s| {
                            acc += s;
                            acc.sqrt()
                        })
                        .collect()
                })
                .collect();
            (0..n)
                .map(|r| per_col.iter().map(|c| c[r]).fold(0.0, f64::max))
                .collect()
        }
        2 => {
            let pairs: Vec<Vec<usize>> = Combinations::new(big_n, 2).collect();
            let cols: Vec<Vec<f64>> = (0..big_n).map(|j| a.column(j).iter().cloned().collect()).collect();
            let per_pair: Vec<Vec<f64>> = pairs
                .par_iter()
                .map(|p| {
                    let mut out = vec![0.0; n];
                    pair_profile(&cols[p[0]], &cols[p[1]], &mut out);
                    out
                })
                .collect();
            (0..n)
                .map(|r| per_pair.iter().map(|c| c[r]).fold(0.0, f64::max))
                .collect()
        }
        _ => {
            let required = (1..=n)
                .map(|k| binomial(n, k).saturating_mul(binomial(big_n, m)))
                .fold(0u128, |acc, v| acc.saturating_add(v));
            if required > budget {
                return Err(Error::BudgetExceeded {
                    required,
                    budget,
                    fallback: "akm_lower",
                });
            }
            (1..=n)
                .map(|k| akm_exact(a, k, m, budget).map(|r| r.value))
                .collect::<Result<Vec<f64>>>()?
        }
    };
    Ok(AkmProfile {
        m,
        values,
        method: Method::Exact,
    })
}

fn top_singular_pair(block: &DMatrix<f64>) -> (f64, DVector<f64>, DVector<f64>) {
    let svd = SVD::new(block.clone(), true, true);
    let idx = svd.singular_values.imax();
    let u = svd.u.as_ref().expect("u requested").column(idx).into_owned();
    let v = svd.v_t.as_ref().expect("v_t requested").row(idx).transpose();
    (svd.singular_values[idx], u, v)
}

fn alternate(a: &DMatrix<f64>, k: usize, m: usize, stream: RngStream) -> (SubmatrixResult, u128) {
    let (n, big_n) = (a.nrows(), a.ncols());
    let mut rng = stream.rng();
    let mut rows: Vec<usize> = sample(&mut rng, n, k).into_vec();
    let mut cols: Vec<usize> = sample(&mut rng, big_n, m).into_vec();
    rows.sort_unstable();
    cols.sort_unstable();
    let mut evaluations = 0u128;
    let (mut value, _, mut v) = top_singular_pair(&submatrix(a, &rows, &cols));
    evaluations += 1;
    for _ in 0..100 {
        // Rows that best carry the current right vector.
        let mut v_full = DVector::zeros(big_n);
        for (c, &j) in cols.iter().enumerate() {
            v_full[j] = v[c];
        }
        let scores = a * &v_full;
        let new_rows = top_k_by_magnitude(scores.as_slice(), k);
        let (_, u, _) = top_singular_pair(&submatrix(a, &new_rows, &cols));
        // Columns that best carry the new left vector.
        let mut u_full = DVector::zeros(n);
        for (r, &i) in new_rows.iter().enumerate() {
            u_full[i] = u[r];
        }
        let scores = a.tr_mul(&u_full);
        let new_cols = top_k_by_magnitude(scores.as_slice(), m);
        let (new_value, _, new_v) = top_singular_pair(&submatrix(a, &new_rows, &new_cols));
        evaluations += 2;
        let moved = new_rows != rows || new_cols != cols;
        if new_value > value {
            value = new_value;
            rows = new_rows;
            cols = new_cols;
            v = new_v;
        } else {
            break;
        }
        if !moved {
            break;
        }
    }
    (
        SubmatrixResult {
            value,
            rows,
            cols,
            method: Method::Heuristic,
            evaluations: 0,
        },
        evaluations,
    )
}

/// Lower bound on `A_{k,m}` by alternating maximization from random
/// starts; restart `r` draws from `stream.substream(r)`, so the result
/// with more restarts never decreases.
pub fn akm_lower(a: &DMatrix<f64>, k: usize, m: usize, restarts: usize, stream: RngStream) -> Result<SubmatrixResult> {
    check_dims(a, k, m)?;
    let restarts = restarts.max(1);
    let runs: Vec<(SubmatrixResult, u128)> = (0..restarts)
        .into_par_iter()
        .map(|r| alternate(a, k, m, stream.substream(r as u64)))
        .collect();
    let total: u128 = runs.iter().map(|(_, e)| *e).sum();
    let mut best = runs[0].0.clone();
    for (cand, _) in &runs[1..] {
        if cand.value > best.value {
            best = cand.clone();
        }
    }
    best.evaluations = total;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{sample_matrix, EnsembleKind, EnsembleSpec};

    fn gaussian(n: usize, big_n: usize, seed: u64) -> DMatrix<f64> {
        let spec = EnsembleSpec::new(EnsembleKind::GaussianProduct, big_n).unwrap();
        sample_matrix(&spec, n, RngStream::root(seed)).unwrap().into_entries()
    }

    /// Independent oracle: every (J, I) pair, dense SVD of each block.
    fn brute_force(a: &DMatrix<f64>, k: usize, m: usize) -> f64 {
        let mut best: f64 = 0.0;
        for rows in Combinations::new(a.nrows(), k) {
            for cols in Combinations::new(a.ncols(), m) {
                let s = SVD::new(submatrix(a, &rows, &cols), false, false);
                best = best.max(s.singular_values.max());
            }
        }
        best
    }

    #[test]
    fn identity_submatrices_have_norm_one() {
        let id = DMatrix::<f64>::identity(4, 4);
        for k in 1..=4 {
            for m in 1..=4 {
                assert!((akm_exact(&id, k, m, u128::MAX).unwrap().value - 1.0).abs() < 1e-12);
                assert!((akm_lower(&id, k, m, 3, RngStream::root(1)).unwrap().value - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn full_size_is_operator_norm() {
        let a = gaussian(4, 5, 2);
        let full = akm_exact(&a, 4, 5, 10).unwrap();
        let s = SVD::new(a.clone(), false, false).singular_values.max();
        assert!((full.value - s).abs() < 1e-10);
        assert_eq!(full.evaluations, 1);
    }

    #[test]
    fn one_by_one_is_max_entry() {
        let a = gaussian(5, 6, 3);
        let r = akm_exact(&a, 1, 1, 1000).unwrap();
        assert!((r.value - a.amax()).abs() < 1e-15);
    }

    #[test]
    fn matches_brute_force_svd() {
        for seed in 0..5 {
            let a = gaussian(5, 6, seed);
            let r = akm_exact(&a, 2, 3, 1000).unwrap();
            assert!((r.value - brute_force(&a, 2, 3)).abs() < 1e-9);
            assert_eq!(r.rows.len(), 2);
            assert_eq!(r.cols.len(), 3);
            let recomputed = SVD::new(submatrix(&a, &r.rows, &r.cols), false, false).singular_values.max();
            assert!((recomputed - r.value).abs() <= 1e-9 * r.value);
        }
    }

    #[test]
    fn ties_resolve_to_lexicographically_smallest() {
        let id = DMatrix::<f64>::identity(3, 3);
        let r = akm_exact(&id, 2, 2, 100).unwrap();
        assert_eq!(r.rows, vec![0, 1]);
        assert_eq!(r.cols, vec![0, 1]);
    }

    #[test]
    fn budget_is_enforced() {
        let a = gaussian(6, 8, 1);
        match akm_exact(&a, 3, 3, 100) {
            Err(Error::BudgetExceeded { required, fallback, .. }) => {
                assert_eq!(required, 20 * 56);
                assert_eq!(fallback, "akm_lower");
            }
            other => panic!("expected budget error, got {other:?}"),
        }
        assert!(akm_exact(&a, 0, 1, 10).is_err());
        assert!(akm_exact(&a, 1, 9, 10).is_err());
    }

    #[test]
    fn profile_matches_enumeration() {
        for seed in 0..6 {
            let a = gaussian(6, 7, 100 + seed);
            for m in 1..=3 {
                let prof = akm_profile(&a, m, u128::MAX).unwrap();
                for k in 1..=6 {
                    let exact = akm_exact(&a, k, m, u128::MAX).unwrap().value;
                    assert!((prof.get(k) - exact).abs() < 1e-9, "seed {seed} k {k} m {m}: {} vs {exact}", prof.get(k));
                }
            }
        }
    }

    #[test]
    fn profile_handles_degenerate_rows() {
        let mut a = DMatrix::<f64>::identity(4, 4);
        a[(3, 3)] = 0.0;
        let prof = akm_profile(&a, 2, u128::MAX).unwrap();
        assert_eq!(prof.values, vec![1.0; 4]);
    }

    #[test]
    fn lower_bound_never_exceeds_exact_and_grows_with_restarts() {
        let stream = RngStream::root(77);
        for seed in 0..10 {
            let a = gaussian(5, 6, seed);
            let exact = akm_exact(&a, 2, 3, 1000).unwrap().value;
            let few = akm_lower(&a, 2, 3, 4, stream).unwrap().value;
            let many = akm_lower(&a, 2, 3, 8, stream).unwrap().value;
            assert!(few <= exact + 1e-12);
            assert!(many <= exact + 1e-12);
            assert!(many >= few);
        }
    }
}
