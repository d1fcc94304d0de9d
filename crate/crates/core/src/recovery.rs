//! Sparse recovery: restricted-isometry admissibility, the truncation
//! certificate for `δ_m`, basis pursuit decoding and phase diagrams.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::ensembles::{sample_matrix, EnsembleKind, EnsembleSpec, SampleMatrix};
use crate::error::{Error, Result};
use crate::linalg::binomial;
use crate::rng::RngStream;
use crate::sparse_norms::{akm_lower, akm_profile, delta_m_exact, AkmProfile, Method};

const E: f64 = std::f64::consts::E;

/// Tolerance for a decoded signal to count as recovered.
pub const SUCCESS_REL_ERROR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibleM {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub theta: f64,
    pub c: f64,
    /// Largest admissible `m`, or 0 when none is.
    pub m: usize,
    /// `m·loglog(3m)·log²(3max{N,n}/m)` at the returned `m`; this is also `b_m`.
    pub lhs: f64,
    /// `cθ²n / log(3/θ)`.
    pub rhs: f64,
    pub b_m: Option<f64>,
    /// `b_m ≤ cθn`.
    pub b_condition: Option<bool>,
    /// `m·log(3N/m)·log²(n/b_m) ≤ cθ²n`.
    pub log_condition: Option<bool>,
    /// `B = C₁·log(n/b_m)`.
    #[serde(rename = "B")]
    pub big_b: Option<f64>,
    pub diagnostic: Option<String>,
}

fn admissibility_lhs(m: usize, n: usize, big_n: usize) -> f64 {
    let mf = m as f64;
    let top = big_n.max(n) as f64;
    mf * (3.0 * mf).ln().ln() * (3.0 * top / mf).ln().powi(2)
}

/// Largest `m ≤ N` with `m·loglog(3m)·log²(3max{N,n}/m) ≤ cθ²n/log(3/θ)`.
/// All `m` are scanned, so small-`m` wiggles of the left side cannot hide
/// a larger admissible value.
pub fn rip_admissible_m(n: usize, big_n: usize, theta: f64, c: f64, c1: f64) -> Result<AdmissibleM> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::out_of_range("theta", format!("need 0 < theta < 1, got {theta}")));
    }
    if !(c > 0.0) || !(c1 > 0.0) {
        return Err(Error::out_of_range("c", "constants must be positive"));
    }
    if n == 0 || big_n == 0 {
        return Err(Error::InvalidDimension("n and N must be positive".into()));
    }
    let rhs = c * theta * theta * n as f64 / (3.0 / theta).ln();
    let m = (1..=big_n).rev().find(|&m| admissibility_lhs(m, n, big_n) <= rhs).unwrap_or(0);
    if m == 0 {
        return Ok(AdmissibleM {
            n,
            big_n,
            theta,
            c,
            m: 0,
            lhs: admissibility_lhs(1, n, big_n),
            rhs,
            b_m: None,
            b_condition: None,
            log_condition: None,
            big_b: None,
            diagnostic: Some(format!("no m <= {big_n} satisfies the inequality; even m = 1 needs {}", admissibility_lhs(1, n, big_n))),
        });
    }
    let b_m = admissibility_lhs(m, n, big_n);
    let nf = n as f64;
    let mf = m as f64;
    let ratio = (nf / b_m).ln();
    Ok(AdmissibleM {
        n,
        big_n,
        theta,
        c,
        m,
        lhs: b_m,
        rhs,
        b_m: Some(b_m),
        b_condition: Some(b_m <= c * theta * nf),
        log_condition: Some(mf * (3.0 * big_n as f64 / mf).ln() * ratio * ratio <= c * theta * theta * nf),
        big_b: Some(c1 * ratio),
        diagnostic: None,
    })
}

/// Monte Carlo `Ê A_{k,m}²` for every `k`, from fresh matrices of one
/// ensemble. Reusable across certificates with the same `(spec, n, m)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaTable {
    pub kind: EnsembleKind,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub n: usize,
    pub m: usize,
    pub replicas: usize,
    /// `mean_sq[k-1] = Ê A_{k,m}²`.
    pub mean_sq: Vec<f64>,
    /// `max_j Ê X(j)²·1{|X(j)| ≥ B}` is computed on demand from these rows.
    #[serde(skip)]
    rows: Vec<f64>,
    pub method: Method,
}

impl ReplicaTable {
    pub fn get(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.mean_sq[k - 1]
        }
    }

    /// Estimate of `sup_j E X(j)²·1{|X(j)| ≥ b}` over coordinate
    /// directions, from every replica row.
    pub fn truncated_second_moment(&self, b: f64) -> f64 {
        let rows = self.rows.len() / self.big_n;
        (0..self.big_n)
            .map(|j| {
                (0..rows)
                    .map(|r| self.rows[r * self.big_n + j])
                    .filter(|v| v.abs() >= b)
                    .map(|v| v * v)
                    .sum::<f64>()
                    / rows as f64
            })
            .fold(0.0, f64::max)
    }
}

/// `A_{k,m}` for all `k`: exact profile when it fits `budget`, otherwise
/// the alternating lower bound per `k`.
fn profile_or_lower(a: &DMatrix<f64>, m: usize, budget: u128, stream: RngStream) -> Result<AkmProfile> {
    match akm_profile(a, m, budget) {
        Ok(p) => Ok(p),
        Err(Error::BudgetExceeded { .. }) => {
            let mut values = Vec::with_capacity(a.nrows());
            let mut last = 0.0f64;
            for k in 1..=a.nrows() {
                let v = akm_lower(a, k, m, 4, stream.substream(k as u64))?.value;
                // A_{k,m} is nondecreasing in k; keep the lower bounds so too.
                last = last.max(v);
                values.push(last);
            }
            Ok(AkmProfile {
                m,
                values,
                method: Method::Heuristic,
            })
        }
        Err(e) => Err(e),
    }
}

/// Build the replica table; replica `r` is drawn from `stream.substream(r)`.
pub fn replica_table(spec: &EnsembleSpec, n: usize, m: usize, replicas: usize, budget: u128, stream: RngStream) -> Result<ReplicaTable> {
    if replicas == 0 {
        return Err(Error::out_of_range("replicas", "need at least one replica"));
    }
    let per: Vec<Result<(AkmProfile, Vec<f64>)>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let tr = stream.substream(r as u64);
            let a = sample_matrix(spec, n, tr)?.into_entries();
            let rows: Vec<f64> = a.transpose().iter().cloned().collect();
            Ok((profile_or_lower(&a, m, budget, tr.substream(u64::MAX))?, rows))
        })
        .collect();
    let per: Vec<(AkmProfile, Vec<f64>)> = per.into_iter().collect::<Result<_>>()?;
    let mut mean_sq = vec![0.0; n];
    let mut method = Method::Exact;
    let mut rows = Vec::with_capacity(replicas * n * spec.dim);
    for (p, r) in &per {
        for (acc, v) in mean_sq.iter_mut().zip(&p.values) {
            *acc += v * v;
        }
        if p.method == Method::Heuristic {
            method = Method::Heuristic;
        }
        rows.extend_from_slice(r);
    }
    mean_sq.iter_mut().for_each(|v| *v /= replicas as f64);
    Ok(ReplicaTable {
        kind: spec.kind,
        big_n: spec.dim,
        n,
        m,
        replicas,
        mean_sq,
        rows,
        method,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RipCertificate {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub m: usize,
    pub theta: f64,
    #[serde(rename = "B")]
    pub big_b: f64,
    /// Largest `k ≤ n` with `k ≤ (A_{k,m}/B)²`, 0 if there is none.
    pub k_star: usize,
    pub akm_value: f64,
    pub akm_mean_sq_estimate: f64,
    /// `2θ + 2(A_{k*,m}² + Ê A_{k*,m}²)/n`.
    pub bound: f64,
    /// `2θ + 2(A_{k*,m}²/n + T̂)`, with `T̂` the truncated second moment
    /// estimated over coordinate directions only (an estimate, not a bound).
    pub truncated_bound_estimate: f64,
    pub exact_delta: Option<f64>,
    /// `bound ≥ exact_delta`, when the exact value is available.
    pub sound: Option<bool>,
    /// `m·log(11eN/m) ≤ 3θ²n/(16B²)`.
    pub admissible: bool,
    /// `1 − exp(−3θ²n/(16B²))`, meaningful when `admissible`.
    pub probability_floor: f64,
    /// `1 − |T|·exp(−3θ²n/(8B²))` with the proxy `|T| = C(N,m)·11^m`,
    /// clipped at 0.
    pub probability_floor_net_proxy: f64,
    /// `A_{k,m}` for `k = 1..=n`.
    pub profile: Vec<f64>,
    pub method: Method,
    pub replicas: usize,
}

impl RipCertificate {
    pub fn recompute_bound(&self) -> f64 {
        2.0 * self.theta + 2.0 * (self.akm_value * self.akm_value + self.akm_mean_sq_estimate) / self.n as f64
    }
}

/// `k*` by definition replay over a profile.
pub fn k_star(profile: &[f64], big_b: f64) -> usize {
    (1..=profile.len())
        .rev()
        .find(|&k| k as f64 <= (profile[k - 1] / big_b).powi(2))
        .unwrap_or(0)
}

/// Certificate with a fresh replica table of `replicas` matrices drawn from
/// `stream`.
pub fn rip_certificate(a: &SampleMatrix, m: usize, theta: f64, big_b: f64, replicas: usize, budget: u128, stream: RngStream) -> Result<RipCertificate> {
    let table = replica_table(a.spec(), a.nrows(), m, replicas, budget, stream)?;
    rip_certificate_with(a, m, theta, big_b, &table, budget)
}

/// Certificate against a precomputed replica table.
pub fn rip_certificate_with(a: &SampleMatrix, m: usize, theta: f64, big_b: f64, table: &ReplicaTable, budget: u128) -> Result<RipCertificate> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::out_of_range("theta", format!("need 0 < theta < 1, got {theta}")));
    }
    if !(big_b >= 1.0) {
        return Err(Error::out_of_range("B", format!("need B >= 1, got {big_b}")));
    }
    let (n, big_n) = (a.nrows(), a.ncols());
    if table.n != n || table.m != m || table.big_n != big_n || table.kind != a.spec().kind {
        return Err(Error::out_of_range("replicas", "replica table was built for a different (ensemble, n, N, m)"));
    }
    let profile = profile_or_lower(a.entries(), m, budget, a.stream().substream(u64::MAX - 1))?;
    let ks = k_star(&profile.values, big_b);
    let akm_value = profile.get(ks);
    let mean_sq = table.get(ks);
    let nf = n as f64;
    let bound = 2.0 * theta + 2.0 * (akm_value * akm_value + mean_sq) / nf;
    let truncated = table.truncated_second_moment(big_b);
    let exact_delta = match delta_m_exact(a.entries(), m, budget) {
        Ok(r) => Some(r.delta),
        Err(Error::BudgetExceeded { .. }) => None,
        Err(e) => return Err(e),
    };
    let mf = m as f64;
    let exponent = 3.0 * theta * theta * nf / (big_b * big_b);
    let log_t = (binomial(big_n, m) as f64).ln() + mf * 11f64.ln();
    let method = if profile.method == Method::Exact && table.method == Method::Exact {
        Method::Exact
    } else {
        Method::Heuristic
    };
    Ok(RipCertificate {
        n,
        big_n,
        m,
        theta,
        big_b,
        k_star: ks,
        akm_value,
        akm_mean_sq_estimate: mean_sq,
        bound,
        truncated_bound_estimate: 2.0 * theta + 2.0 * (akm_value * akm_value / nf + truncated),
        exact_delta,
        sound: exact_delta.map(|d| bound >= d),
        admissible: mf * (11.0 * E * big_n as f64 / mf).ln() <= exponent / 16.0,
        probability_floor: 1.0 - (-exponent / 16.0).exp(),
        probability_floor_net_proxy: (1.0 - (log_t - exponent / 8.0).exp()).max(0.0),
        profile: profile.values,
        method,
        replicas: table.replicas,
    })
}

/// Outcome of the basis pursuit iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisPursuit {
    pub x: Vec<f64>,
    /// `|A x − y|`.
    pub residual: f64,
    /// Last change of the splitting variable.
    pub change: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn soft(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}

/// `min ‖x‖₁` subject to `Ax = y` by alternating direction splitting:
/// project onto `{Ax = y}` (cached Cholesky factor of `AAᵀ` after scaling
/// rows to unit norm), shrink with threshold `1/ρ` at `ρ = 1`, update the
/// scaled dual. Stops once `|x − z|` and the change in `z` are both at most
/// `tol`; the returned iterate is the (exactly feasible) projected one.
///
/// Reaching `max_iter` is reported through `converged = false`, with the
/// last iterate and residuals.
pub fn basis_pursuit(a: &DMatrix<f64>, y: &[f64], tol: f64, max_iter: usize) -> Result<BasisPursuit> {
    let (n, big_n) = (a.nrows(), a.ncols());
    if y.len() != n {
        return Err(Error::InvalidDimension(format!("y has length {}, A has {n} rows", y.len())));
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::out_of_range("tol", "need tol > 0 and max_iter >= 1"));
    }
    let mut scaled = a.clone();
    let mut ys = DVector::from_column_slice(y);
    for i in 0..n {
        let norm = scaled.row(i).norm();
        if norm == 0.0 {
            return Err(Error::InvalidDimension(format!("row {i} of A is zero")));
        }
        scaled.row_mut(i).scale_mut(1.0 / norm);
        ys[i] /= norm;
    }
    let chol = (&scaled * scaled.transpose())
        .cholesky()
        .ok_or_else(|| Error::InvalidDimension("A must have full row rank".into()))?;
    // x = v − Aᵀ(AAᵀ)^{-1}(Av − y)
    let project = |v: &DVector<f64>| -> DVector<f64> {
        let r = &scaled * v - &ys;
        v - scaled.tr_mul(&chol.solve(&r))
    };
    let rho = 1.0;
    let mut z = DVector::<f64>::zeros(big_n);
    let mut u = DVector::<f64>::zeros(big_n);
    let mut x = project(&z);
    let mut change = f64::INFINITY;
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        x = project(&(&z - &u));
        let z_old = z.clone();
        z = (&x + &u).map(|v| soft(v, 1.0 / rho));
        u += &x - &z;
        change = (&z - &z_old).norm();
        gap = (&x - &z).norm();
        if gap <= tol && change <= tol {
            break;
        }
    }
    let residual = (a * &x - DVector::from_column_slice(y)).norm();
    Ok(BasisPursuit {
        x: x.iter().cloned().collect(),
        residual,
        change: change.max(gap),
        iterations,
        converged: gap <= tol && change <= tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryTrial {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub sparsity: usize,
    pub support: Vec<usize>,
    pub signal: Vec<f64>,
    pub decoded: Vec<f64>,
    pub residual: f64,
    pub rel_error: f64,
    pub iterations: usize,
    pub success: bool,
    pub reason: Option<String>,
}

/// Default solver settings for recovery experiments.
pub const BP_TOL: f64 = 1e-9;
pub const BP_MAX_ITER: usize = 50_000;

/// One planted-signal experiment: matrix from `stream.substream(0)`,
/// signal from `stream.substream(1)` (uniform support, Gaussian nonzeros,
/// unit norm), decoded from `A x₀/√n` with `A/√n`.
pub fn recovery_trial(spec: &EnsembleSpec, n: usize, sparsity: usize, stream: RngStream) -> Result<RecoveryTrial> {
    let big_n = spec.dim;
    if n == 0 || n > big_n {
        return Err(Error::out_of_range("n", format!("need 1 <= n <= N = {big_n}, got {n}")));
    }
    if 2 * sparsity > n {
        return Err(Error::out_of_range("s", format!("sparsity {sparsity} exceeds n/2 = {}", n / 2)));
    }
    let a = sample_matrix(spec, n, stream.substream(0))?.into_entries() / (n as f64).sqrt();
    let mut rng = stream.substream(1).rng();
    let mut support = sample(&mut rng, big_n, sparsity).into_vec();
    support.sort_unstable();
    let mut signal = vec![0.0; big_n];
    for &j in &support {
        signal[j] = StandardNormal.sample(&mut rng);
    }
    let norm = signal.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        signal.iter_mut().for_each(|v| *v /= norm);
    }
    let y: Vec<f64> = (&a * DVector::from_column_slice(&signal)).iter().cloned().collect();
    let bp = basis_pursuit(&a, &y, BP_TOL, BP_MAX_ITER)?;
    let err = bp
        .x
        .iter()
        .zip(&signal)
        .map(|(p, q)| (p - q).powi(2))
        .sum::<f64>()
        .sqrt();
    // The planted signal has unit norm, so the error is already relative;
    // for the zero signal it is the absolute error.
    let rel_error = err;
    let feasible = bp.residual <= BP_TOL;
    let success = bp.converged && feasible && rel_error <= SUCCESS_REL_ERROR;
    let reason = if !bp.converged {
        Some(format!("solver stopped after {} iterations (change {:e})", bp.iterations, bp.change))
    } else if !feasible {
        Some(format!("residual {:e} above tolerance", bp.residual))
    } else if rel_error > SUCCESS_REL_ERROR {
        Some(format!("relative error {rel_error:e}"))
    } else {
        None
    };
    Ok(RecoveryTrial {
        n,
        big_n,
        sparsity,
        support,
        signal,
        decoded: bp.x,
        residual: bp.residual,
        rel_error,
        iterations: bp.iterations,
        success,
        reason,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseCell {
    pub n: usize,
    pub sparsity: usize,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    /// Binomial standard error `√(rate(1 − rate)/trials)`.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseRow {
    pub n: usize,
    /// Reference line from `rip_admissible_m` at `θ = 0.25`, `c = 1`.
    pub admissible_m: usize,
    pub cells: Vec<PhaseCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseDiagram {
    pub kind: EnsembleKind,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub master_seed: u64,
    pub trials_per_cell: usize,
    pub rows: Vec<PhaseRow>,
}

impl PhaseDiagram {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,sparsity,rate,stderr,trials\n");
        for row in &self.rows {
            for c in &row.cells {
                out.push_str(&format!("{},{},{},{},{}\n", c.n, c.sparsity, c.rate, c.stderr, c.trials));
            }
        }
        out
    }
}

/// Success rates over `n_values × sparsity_grid`. Trial `j` of every cell
/// uses `stream.substream(j)`, so cells share random numbers.
pub fn phase_diagram(spec: &EnsembleSpec, n_values: &[usize], sparsity_grid: &[usize], trials_per_cell: usize, stream: RngStream) -> Result<PhaseDiagram> {
    if n_values.is_empty() {
        return Err(Error::EmptyInput("n grid"));
    }
    if sparsity_grid.is_empty() {
        return Err(Error::EmptyInput("sparsity grid"));
    }
    if trials_per_cell == 0 {
        return Err(Error::out_of_range("trials", "need at least one trial per cell"));
    }
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let mut cells = Vec::with_capacity(sparsity_grid.len());
        for &s in sparsity_grid {
            let outcomes: Vec<Result<bool>> = (0..trials_per_cell)
                .into_par_iter()
                .map(|j| Ok(recovery_trial(spec, n, s, stream.substream(j as u64))?.success))
                .collect();
            let successes = outcomes.into_iter().collect::<Result<Vec<bool>>>()?.into_iter().filter(|b| *b).count();
            let rate = successes as f64 / trials_per_cell as f64;
            cells.push(PhaseCell {
                n,
                sparsity: s,
                trials: trials_per_cell,
                successes,
                rate,
                stderr: (rate * (1.0 - rate) / trials_per_cell as f64).sqrt(),
            });
        }
        rows.push(PhaseRow {
            n,
            admissible_m: rip_admissible_m(n, spec.dim, 0.25, 1.0, 1.0)?.m,
            cells,
        });
    }
    Ok(PhaseDiagram {
        kind: spec.kind,
        big_n: spec.dim,
        master_seed: stream.master_seed,
        trials_per_cell,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Combinations;
    use crate::sparse_norms::akm_exact;

    fn spec(kind: EnsembleKind, dim: usize) -> EnsembleSpec {
        EnsembleSpec::new(kind, dim).unwrap()
    }

    /// Minimum ℓ1 over basic solutions: every support of size ≤ n whose
    /// column block solves `A_S x_S = y` exactly.
    fn lp_oracle(a: &DMatrix<f64>, y: &[f64]) -> (f64, Vec<f64>) {
        let (n, big_n) = (a.nrows(), a.ncols());
        let yv = DVector::from_column_slice(y);
        let mut best = (f64::INFINITY, vec![]);
        for size in 1..=n {
            for s in Combinations::new(big_n, size) {
                let block = DMatrix::from_fn(n, size, |i, j| a[(i, s[j])]);
                let Some(sol) = block.clone().svd(true, true).solve(&yv, 1e-12).ok() else {
                    continue;
                };
                if (&block * &sol - &yv).norm() > 1e-10 {
                    continue;
                }
                let l1: f64 = sol.iter().map(|v| v.abs()).sum();
                if l1 < best.0 {
                    let mut x = vec![0.0; big_n];
                    for (j, &c) in s.iter().enumerate() {
                        x[c] = sol[j];
                    }
                    best = (l1, x);
                }
            }
        }
        best
    }

    #[test]
    fn admissible_scan_matches_direct_evaluation() {
        let r = rip_admissible_m(1024, 4096, 0.5, 1.0, 1.0).unwrap();
        let rhs = 0.25 * 1024.0 / 6f64.ln();
        let f = |m: f64| m * (3.0 * m).ln().ln() * (3.0 * 4096.0 / m).ln().powi(2);
        if r.m > 0 {
            assert!(f(r.m as f64) <= rhs);
        }
        for m in r.m + 1..=4096 {
            assert!(f(m as f64) > rhs);
        }
        assert_eq!(r.b_m.is_some(), r.m > 0);
    }

    #[test]
    fn admissible_m_with_huge_constant_is_n() {
        let r = rip_admissible_m(50, 40, 0.99, 1e9, 1.0).unwrap();
        assert_eq!(r.m, 40);
    }

    #[test]
    fn admissible_m_monotone_in_n_and_c() {
        let mut last = 0;
        for n in (100..4000).step_by(150) {
            let m = rip_admissible_m(n, 2000, 0.3, 5.0, 1.0).unwrap().m;
            assert!(m >= last);
            last = m;
        }
        let mut last = 0;
        for c in [0.5, 1.0, 2.0, 5.0, 20.0, 100.0] {
            let m = rip_admissible_m(3000, 2000, 0.3, c, 1.0).unwrap().m;
            assert!(m >= last);
            last = m;
        }
        // Nonincreasing in N once N ≥ n, where the scan range does not bind.
        let mut last = usize::MAX;
        for big_n in (3000..20000).step_by(1000) {
            let m = rip_admissible_m(3000, big_n, 0.3, 20.0, 1.0).unwrap().m;
            assert!(m <= last);
            last = m;
        }
    }

    #[test]
    fn no_admissible_m_reports_zero() {
        let r = rip_admissible_m(4, 100, 0.1, 1.0, 1.0).unwrap();
        assert_eq!(r.m, 0);
        assert!(r.diagnostic.is_some());
        assert!(rip_admissible_m(4, 100, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn basis_pursuit_identity() {
        let a = DMatrix::<f64>::identity(4, 4);
        let y = [0.3, -1.2, 0.0, 2.0];
        let r = basis_pursuit(&a, &y, 1e-10, 1000).unwrap();
        assert!(r.converged);
        for (p, q) in r.x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn basis_pursuit_matches_lp_oracle() {
        let s = spec(EnsembleKind::GaussianProduct, 3);
        let a = sample_matrix(&s, 2, RngStream::root(1)).unwrap().into_entries();
        let y: Vec<f64> = a.column(0).iter().map(|v| 0.7 * v).collect();
        let bp = basis_pursuit(&a, &y, 1e-11, 200_000).unwrap();
        let (l1, x) = lp_oracle(&a, &y);
        let got: f64 = bp.x.iter().map(|v| v.abs()).sum();
        assert!((got - l1).abs() < 1e-6);
        for (p, q) in bp.x.iter().zip(&x) {
            assert!((p - q).abs() < 1e-6);
        }
    }

    #[test]
    fn basis_pursuit_tiny_instances() {
        for seed in 0..20u64 {
            let n = 2 + (seed % 2) as usize;
            let big_n = n + 1 + (seed % 3) as usize;
            let s = spec(EnsembleKind::ExponentialProduct, big_n);
            let a = sample_matrix(&s, n, RngStream::root(100 + seed)).unwrap().into_entries();
            let y: Vec<f64> = (0..n).map(|i| a[(i, 0)] - 0.5 * a[(i, big_n - 1)]).collect();
            let bp = basis_pursuit(&a, &y, 1e-11, 200_000).unwrap();
            assert!(bp.converged);
            let (l1, _) = lp_oracle(&a, &y);
            let got: f64 = bp.x.iter().map(|v| v.abs()).sum();
            assert!((got - l1).abs() < 1e-6, "seed {seed}: {got} vs {l1}");
            assert!(bp.residual <= 1e-10);
        }
    }

    #[test]
    fn recovery_of_zero_signal() {
        let r = recovery_trial(&spec(EnsembleKind::GaussianProduct, 20), 10, 0, RngStream::root(1)).unwrap();
        assert!(r.success);
        assert!(r.decoded.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn recovery_is_deterministic_and_feasible() {
        let s = spec(EnsembleKind::GaussianProduct, 128);
        let a = recovery_trial(&s, 40, 3, RngStream::root(5)).unwrap();
        let b = recovery_trial(&s, 40, 3, RngStream::root(5)).unwrap();
        assert_eq!(a, b);
        assert!(a.success, "{:?}", a.reason);
        assert!(a.residual <= BP_TOL);
        let l1_hat: f64 = a.decoded.iter().map(|v| v.abs()).sum();
        let l1_0: f64 = a.signal.iter().map(|v| v.abs()).sum();
        assert!(l1_hat <= l1_0 + 10.0 * BP_TOL);
        assert!(recovery_trial(&s, 40, 21, RngStream::root(5)).is_err());
    }

    #[test]
    fn phase_diagram_shape() {
        let s = spec(EnsembleKind::GaussianProduct, 60);
        let d = phase_diagram(&s, &[30], &[0, 2, 6, 12], 10, RngStream::root(3)).unwrap();
        let row = &d.rows[0];
        assert_eq!(row.cells[0].rate, 1.0);
        for w in row.cells.windows(2) {
            assert!(w[1].rate <= w[0].rate + 2.0 * (w[0].stderr + w[1].stderr) + 1e-12);
        }
        assert!(d.to_csv().starts_with("n,sparsity,rate,stderr,trials\n"));
    }

    #[test]
    fn certificate_for_orthonormal_columns() {
        // Columns of √n·Q have (1/n)AᵀA = Id, so δ_m = 0.
        let s = spec(EnsembleKind::GaussianProduct, 4);
        let base = sample_matrix(&s, 8, RngStream::root(2)).unwrap();
        let q = base.entries().clone().qr().q() * 8f64.sqrt();
        let table = replica_table(&s, 8, 2, 5, 1_000_000, RngStream::root(9)).unwrap();
        let fake = SampleMatrixForTest::wrap(q, &s);
        let c = rip_certificate_with(&fake, 2, 0.1, 1.0, &table, 1_000_000).unwrap();
        assert!(c.exact_delta.unwrap() < 1e-12);
        assert_eq!(c.sound, Some(true));
    }

    struct SampleMatrixForTest;
    impl SampleMatrixForTest {
        fn wrap(entries: DMatrix<f64>, spec: &EnsembleSpec) -> SampleMatrix {
            SampleMatrix::from_entries(entries, *spec, RngStream::root(0))
        }
    }

    #[test]
    fn certificate_fields_replay() {
        let s = spec(EnsembleKind::ExponentialProduct, 10);
        let a = sample_matrix(&s, 8, RngStream::root(4)).unwrap();
        let c = rip_certificate(&a, 2, 0.25, 2.0, 20, 1_000_000, RngStream::root(5)).unwrap();
        assert_eq!(c.bound, c.recompute_bound());
        assert_eq!(c.k_star, k_star(&c.profile, 2.0));
        for k in 1..=8 {
            let direct = akm_exact(a.entries(), k, 2, 1_000_000).unwrap().value;
            assert!((c.profile[k - 1] - direct).abs() < 1e-9);
        }
        let replay = (1..=8).filter(|&k| k as f64 <= (c.profile[k - 1] / 2.0).powi(2)).max().unwrap_or(0);
        assert_eq!(c.k_star, replay);
        assert_eq!(c.sound, Some(c.bound >= c.exact_delta.unwrap()));
        assert!(replica_table(&s, 8, 2, 0, 10, RngStream::root(0)).is_err());
    }
}
