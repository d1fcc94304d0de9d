//! Small dense kernels shared by the norm and RIP computations.

use nalgebra::{DMatrix, SymmetricEigen};

/// `C(n, k)` in `u128`, saturating on overflow.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Lexicographic `k`-subsets of `0..n`.
#[derive(Debug, Clone)]
pub struct Combinations {
    n: usize,
    current: Vec<usize>,
    done: bool,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            current: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let k = self.current.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.current[i] < self.n - k + i {
                self.current[i] += 1;
                for j in i + 1..k {
                    self.current[j] = self.current[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Extreme eigenvalues `(min, max)` of a symmetric matrix.
pub fn sym_extreme_eigenvalues(g: &DMatrix<f64>) -> (f64, f64) {
    match g.nrows() {
        0 => (0.0, 0.0),
        1 => (g[(0, 0)], g[(0, 0)]),
        2 => {
            let (a, b, d) = (g[(0, 0)], g[(0, 1)], g[(1, 1)]);
            let mid = 0.5 * (a + d);
            let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
            (mid - rad, mid + rad)
        }
        _ => {
            let eig = SymmetricEigen::new(g.clone());
            let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        }
    }
}

/// `MᵀM` or `MMᵀ`, whichever is smaller.
pub fn small_gram(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() <= m.nrows() {
        m.tr_mul(m)
    } else {
        m * m.transpose()
    }
}

/// Operator norm from the top eigenvalue of the smaller Gram matrix.
pub fn spectral_norm_direct(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let (_, hi) = sym_extreme_eigenvalues(&small_gram(m));
    hi.max(0.0).sqrt()
}

/// Submatrix `A(rows, cols)`.
pub fn submatrix(a: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

/// Principal submatrix `G(idx, idx)`.
pub fn principal(g: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    submatrix(g, idx, idx)
}

/// Indices of the `k` entries of largest magnitude, ties to the smaller
/// index, returned in increasing order.
pub fn top_k_by_magnitude(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| {
        values[j]
            .abs()
            .total_cmp(&values[i].abs())
            .then(i.cmp(&j))
    });
    let mut top: Vec<usize> = order.into_iter().take(k).collect();
    top.sort_unstable();
    top
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(24, 2), 276);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(60, 30), 118_264_581_564_861_424);
    }

    #[test]
    fn combinations_are_lexicographic_and_complete() {
        let all: Vec<_> = Combinations::new(5, 3).collect();
        assert_eq!(all.len(), 10);
        assert_eq!(all[0], vec![0, 1, 2]);
        assert_eq!(all[9], vec![2, 3, 4]);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(Combinations::new(3, 0).count(), 1);
        assert_eq!(Combinations::new(2, 3).count(), 0);
    }

    #[test]
    fn two_by_two_closed_form_matches_solver() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.7, 0.7, -1.0]);
        let (lo, hi) = sym_extreme_eigenvalues(&g);
        let eig = SymmetricEigen::new(g);
        let mut ev: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        ev.sort_by(f64::total_cmp);
        assert!((lo - ev[0]).abs() < 1e-12 && (hi - ev[1]).abs() < 1e-12);
    }

    #[test]
    fn top_k_ties_prefer_small_index() {
        assert_eq!(top_k_by_magnitude(&[1.0, -3.0, 3.0, 0.5], 2), vec![1, 2]);
        assert_eq!(top_k_by_magnitude(&[1.0, 1.0, 1.0], 2), vec![0, 1]);
    }
}
