use nalgebra::DMatrix;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::Serialize;

use super::Method;
use crate::error::{Error, Result};
use crate::linalg::{binomial, principal, sym_extreme_eigenvalues, Combinations};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Extreme {
    TopEigen,
    BottomEigen,
}

/// `δ_m(A/√n)` with a maximizing support `I`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RipResult {
    pub delta: f64,
    pub cols: Vec<usize>,
    pub extreme: Extreme,
    pub method: Method,
    pub evaluations: u128,
}

/// `(1/n)·AᵀA`.
fn normalized_gram(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.tr_mul(a) / a.nrows() as f64
}

fn deviation(gram: &DMatrix<f64>, cols: &[usize]) -> (f64, Extreme) {
    let (lo, hi) = sym_extreme_eigenvalues(&principal(gram, cols));
    if hi - 1.0 >= 1.0 - lo {
        (hi - 1.0, Extreme::TopEigen)
    } else {
        (1.0 - lo, Extreme::BottomEigen)
    }
}

/// `‖(1/n)AᵀA − Id‖`, the full-support deviation.
pub fn gram_deviation_norm(a: &DMatrix<f64>) -> f64 {
    let mut g = normalized_gram(a);
    for i in 0..g.nrows() {
        g[(i, i)] -= 1.0;
    }
    let (lo, hi) = sym_extreme_eigenvalues(&g);
    hi.abs().max(lo.abs())
}

fn check_m(a: &DMatrix<f64>, m: usize) -> Result<()> {
    if m == 0 || m > a.ncols() {
        return Err(Error::out_of_range("m", format!("need 1 <= m <= N = {}, got {m}", a.ncols())));
    }
    Ok(())
}

/// Exact `δ_m(A/√n)`: over every support `|I| = m`, the larger of
/// `λ_max − 1` and `1 − λ_min` of `(1/n)A_IᵀA_I`. Needs `C(N,m) ≤ budget`.
pub fn delta_m_exact(a: &DMatrix<f64>, m: usize, budget: u128) -> Result<RipResult> {
    check_m(a, m)?;
    let required = binomial(a.ncols(), m);
    if required > budget {
        return Err(Error::BudgetExceeded {
            required,
            budget,
            fallback: "delta_m_lower",
        });
    }
    let gram = normalized_gram(a);
    let supports: Vec<Vec<usize>> = Combinations::new(a.ncols(), m).collect();
    let values: Vec<(f64, Extreme)> = supports.par_iter().map(|c| deviation(&gram, c)).collect();
    // Supports are in lexicographic order; strict comparison keeps the first.
    let mut best = 0;
    for i in 1..values.len() {
        if values[i].0 > values[best].0 {
            best = i;
        }
    }
    Ok(RipResult {
        delta: values[best].0,
        cols: supports[best].clone(),
        extreme: values[best].1,
        method: Method::Exact,
        evaluations: required,
    })
}

struct Search<'a> {
    gram: &'a DMatrix<f64>,
    evaluations: u128,
}

impl Search<'_> {
    fn eval(&mut self, cols: &[usize]) -> (f64, Extreme) {
        self.evaluations += 1;
        let mut sorted = cols.to_vec();
        sorted.sort_unstable();
        deviation(self.gram, &sorted)
    }

    /// Grow `start` to size `m`, adding the column that most increases the
    /// deviation each time.
    fn greedy_extend(&mut self, mut cols: Vec<usize>, m: usize) -> Vec<usize> {
        let n_cols = self.gram.ncols();
        while cols.len() < m {
            let mut best: Option<(f64, usize)> = None;
            for j in 0..n_cols {
                if cols.contains(&j) {
                    continue;
                }
                cols.push(j);
                let (v, _) = self.eval(&cols);
                cols.pop();
                if best.is_none_or(|(b, _)| v > b) {
                    best = Some((v, j));
                }
            }
            cols.push(best.expect("m <= N leaves a free column").1);
        }
        cols
    }

    /// Best-improvement single swaps until none helps.
    fn local_swap(&mut self, mut cols: Vec<usize>) -> (f64, Vec<usize>, Extreme) {
        let n_cols = self.gram.ncols();
        let (mut value, mut extreme) = self.eval(&cols);
        for _ in 0..500 {
            let mut best: Option<(f64, usize, usize, Extreme)> = None;
            for pos in 0..cols.len() {
                let old = cols[pos];
                for j in 0..n_cols {
                    if cols.contains(&j) {
                        continue;
                    }
                    cols[pos] = j;
                    let (v, e) = self.eval(&cols);
                    if v > value && best.is_none_or(|(b, ..)| v > b) {
                        best = Some((v, pos, j, e));
                    }
                }
                cols[pos] = old;
            }
            match best {
                Some((v, pos, j, e)) => {
                    cols[pos] = j;
                    value = v;
                    extreme = e;
                }
                None => break,
            }
        }
        cols.sort_unstable();
        (value, cols, extreme)
    }
}

/// Lower bound on `δ_m(A/√n)` by greedy construction plus local swaps,
/// restarted from random supports.
pub fn delta_m_lower(a: &DMatrix<f64>, m: usize, restarts: usize, stream: RngStream) -> Result<RipResult> {
    delta_m_lower_seeded(a, m, restarts, stream, None)
}

/// As [`delta_m_lower`], with an extra start grown from `seed` (typically
/// the argmax at `m − 1`). Since adding a column can only widen the
/// eigenvalue range, the result is then at least the seed's deviation.
pub fn delta_m_lower_seeded(
    a: &DMatrix<f64>,
    m: usize,
    restarts: usize,
    stream: RngStream,
    seed: Option<&[usize]>,
) -> Result<RipResult> {
    check_m(a, m)?;
    if let Some(s) = seed {
        if s.len() > m || s.iter().any(|&j| j >= a.ncols()) {
            return Err(Error::out_of_range("seed", "seed support must have at most m valid columns"));
        }
    }
    let gram = normalized_gram(a);
    let n_cols = a.ncols();
    let mut starts: Vec<Option<Vec<usize>>> = vec![Some(Vec::new())];
    if let Some(s) = seed {
        starts.push(Some(s.to_vec()));
    }
    starts.extend((0..restarts).map(|_| None));
    let runs: Vec<(f64, Vec<usize>, Extreme, u128)> = starts
        .par_iter()
        .enumerate()
        .map(|(idx, start)| {
            let mut search = Search { gram: &gram, evaluations: 0 };
            let init = match start {
                Some(partial) => search.greedy_extend(partial.clone(), m),
                None => {
                    let mut rng = stream.substream(idx as u64).rng();
                    sample(&mut rng, n_cols, m).into_vec()
                }
            };
            let (v, cols, e) = search.local_swap(init);
            (v, cols, e, search.evaluations)
        })
        .collect();
    let evaluations = runs.iter().map(|r| r.3).sum();
    let mut best = 0;
    for i in 1..runs.len() {
        if runs[i].0 > runs[best].0 {
            best = i;
        }
    }
    let (delta, cols, extreme, _) = runs[best].clone();
    Ok(RipResult {
        delta,
        cols,
        extreme,
        method: Method::Heuristic,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{sample_matrix, EnsembleKind, EnsembleSpec};
    use nalgebra::SymmetricEigen;

    fn exponential(n: usize, big_n: usize, seed: u64) -> DMatrix<f64> {
        let spec = EnsembleSpec::new(EnsembleKind::ExponentialProduct, big_n).unwrap();
        sample_matrix(&spec, n, RngStream::root(seed)).unwrap().into_entries()
    }

    /// `√n` times a matrix with orthonormal columns.
    fn scaled_orthonormal(n: usize, big_n: usize) -> DMatrix<f64> {
        let q = exponential(n, big_n, 5).qr().q();
        q * (n as f64).sqrt()
    }

    #[test]
    fn orthonormal_columns_have_zero_delta() {
        let a = scaled_orthonormal(6, 4);
        for m in 1..=4 {
            assert!(delta_m_exact(&a, m, 1000).unwrap().delta < 1e-12);
            assert!(delta_m_lower(&a, m, 3, RngStream::root(1)).unwrap().delta < 1e-12);
        }
    }

    #[test]
    fn identity_two_by_two() {
        let a = DMatrix::<f64>::identity(2, 2);
        let r = delta_m_exact(&a, 1, 10).unwrap();
        assert!((r.delta - 0.5).abs() < 1e-15);
        assert_eq!(r.extreme, Extreme::BottomEigen);
        assert_eq!(r.cols, vec![0]);
    }

    #[test]
    fn full_support_is_gram_deviation() {
        for seed in 0..5 {
            let a = exponential(7, 5, seed);
            let mut g = a.tr_mul(&a) / 7.0;
            for i in 0..5 {
                g[(i, i)] -= 1.0;
            }
            let oracle = SymmetricEigen::new(g).eigenvalues.amax();
            let r = delta_m_exact(&a, 5, 1).unwrap();
            assert!((r.delta - oracle).abs() < 1e-10);
            assert!((gram_deviation_norm(&a) - oracle).abs() < 1e-10);
        }
    }

    #[test]
    fn reported_support_recomputes() {
        let a = exponential(8, 10, 3);
        let r = delta_m_exact(&a, 3, 1000).unwrap();
        let g = a.tr_mul(&a) / 8.0;
        let (lo, hi) = sym_extreme_eigenvalues(&principal(&g, &r.cols));
        assert!((r.delta - (hi - 1.0).max(1.0 - lo)).abs() < 1e-12);
    }

    #[test]
    fn exact_is_monotone_in_m() {
        let a = exponential(6, 7, 9);
        let mut last = 0.0;
        for m in 1..=7 {
            let d = delta_m_exact(&a, m, 1000).unwrap().delta;
            assert!(d >= last - 1e-12);
            last = d;
        }
    }

    #[test]
    fn budget_is_enforced() {
        let a = exponential(4, 10, 1);
        assert!(matches!(
            delta_m_exact(&a, 5, 100),
            Err(Error::BudgetExceeded { required: 252, .. })
        ));
    }

    #[test]
    fn heuristic_is_sound_and_seeded_search_is_monotone() {
        let stream = RngStream::root(4);
        for seed in 0..5 {
            let a = exponential(8, 10, 40 + seed);
            let mut prev: Option<RipResult> = None;
            for m in 1..=5 {
                let exact = delta_m_exact(&a, m, 10_000).unwrap().delta;
                let r = delta_m_lower_seeded(&a, m, 5, stream, prev.as_ref().map(|p| p.cols.as_slice())).unwrap();
                assert!(r.delta <= exact + 1e-12);
                if let Some(p) = &prev {
                    assert!(r.delta >= p.delta - 1e-12);
                }
                prev = Some(r);
            }
        }
    }
}
