//! Order statistics, exceedance counts, top-`m` projection norms and the
//! weak moment profile `σ_X(p)` with its inverse and derived thresholds.
//!
//! All logarithms are natural; ratios like `eN/m` are formed in floating
//! point.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::ensembles::EnsembleSpec;
use crate::error::{Error, Result};
use crate::rng::RngStream;

const E: f64 = std::f64::consts::E;

/// `X*(1) ≥ … ≥ X*(N)`, the sorted magnitudes.
pub fn rearrange_desc(x: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    out.sort_by(|a, b| b.total_cmp(a));
    out
}

/// Coordinates with `x_i ≥ t` (signed) or `|x_i| ≥ t` (unsigned).
pub fn count_exceed(x: &[f64], t: f64, signed: bool) -> usize {
    if signed {
        x.iter().filter(|&&v| v >= t).count()
    } else {
        x.iter().filter(|&&v| v.abs() >= t).count()
    }
}

/// Euclidean norm of the `m` largest-magnitude coordinates, which is
/// `max_{|I|=m} |P_I x|`.
pub fn top_m_norm(x: &[f64], m: usize) -> Result<f64> {
    if m == 0 || m > x.len() {
        return Err(Error::out_of_range("m", format!("need 1 <= m <= N = {}, got {m}", x.len())));
    }
    Ok(top_m_norm_unchecked(x, m))
}

pub(crate) fn top_m_norm_unchecked(x: &[f64], m: usize) -> f64 {
    let mut sq: Vec<f64> = x.iter().map(|v| v * v).collect();
    if m < sq.len() {
        sq.select_nth_unstable_by(m - 1, |a, b| b.total_cmp(a));
    }
    let mut head: Vec<f64> = sq[..m].to_vec();
    // Summing in a fixed order keeps the value independent of the selection.
    head.sort_by(|a, b| b.total_cmp(a));
    head.iter().sum::<f64>().sqrt()
}

/// `X*(ℓ)`, 1-based.
pub fn order_statistic(x: &[f64], ell: usize) -> Result<f64> {
    if ell == 0 || ell > x.len() {
        return Err(Error::out_of_range("ell", format!("need 1 <= ell <= N = {}, got {ell}", x.len())));
    }
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let (_, v, _) = mags.select_nth_unstable_by(ell - 1, |a, b| b.total_cmp(a));
    Ok(*v)
}

/// Empirical lower model of `σ_X` on a grid of exponents, linearly
/// interpolated and extended proportionally past the last grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalSigma {
    pub dim: usize,
    points: Vec<(f64, f64)>,
}

impl EmpiricalSigma {
    /// `points` are `(p, σ̂(p))` pairs with `p ≥ 2`. They are sorted by `p`
    /// and the values replaced by their running maximum.
    pub fn new(dim: usize, mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput("sigma grid"));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points[0].0 < 2.0 {
            return Err(Error::out_of_range("p", format!("sigma grid starts at {} < 2", points[0].0)));
        }
        if points.iter().any(|&(_, s)| !(s > 0.0 && s.is_finite())) {
            return Err(Error::out_of_range("sigma", "grid values must be positive and finite"));
        }
        points.dedup_by(|b, a| a.0 == b.0);
        let mut run = 0.0f64;
        for pt in points.iter_mut() {
            run = run.max(pt.1);
            pt.1 = run;
        }
        Ok(Self { dim, points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    fn eval(&self, p: f64) -> f64 {
        let (p0, s0) = self.points[0];
        if p <= p0 {
            return s0;
        }
        let (pl, sl) = *self.points.last().unwrap();
        if p >= pl {
            return sl * p / pl;
        }
        let i = self.points.partition_point(|&(q, _)| q <= p);
        let (pa, sa) = self.points[i - 1];
        let (pb, sb) = self.points[i];
        sa + (sb - sa) * (p - pa) / (pb - pa)
    }
}

/// Model of the weak moment profile `σ_X(p)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaModel {
    /// `σ(p) = p`, the universal bound for isotropic log-concave vectors.
    /// Extended to `p ∈ [1, 2)` where it still dominates `‖⟨t,X⟩‖_p ≤ 1`.
    GenericLogConcave,
    Empirical(EmpiricalSigma),
}

impl SigmaModel {
    /// Smallest exponent on which the model is defined.
    pub fn min_p(&self) -> f64 {
        match self {
            SigmaModel::GenericLogConcave => 1.0,
            SigmaModel::Empirical(e) => e.points[0].0,
        }
    }

    pub fn eval(&self, p: f64) -> f64 {
        match self {
            SigmaModel::GenericLogConcave => p,
            SigmaModel::Empirical(e) => e.eval(p),
        }
    }

    /// Value at the bottom of the domain; `sigma_inverse` is defined above it.
    pub fn floor(&self) -> f64 {
        self.eval(self.min_p())
    }

    pub fn label(&self) -> &'static str {
        match self {
            SigmaModel::GenericLogConcave => "generic",
            SigmaModel::Empirical(_) => "empirical",
        }
    }
}

/// `σ^{-1}(s) = sup{p : σ(p) ≤ s}`.
pub fn sigma_inverse(model: &SigmaModel, s: f64) -> Result<f64> {
    let floor = model.floor();
    if !(s >= floor) {
        return Err(Error::out_of_range(
            "s",
            format!("sigma_inverse({s}) is below the model floor {floor}"),
        ));
    }
    match model {
        SigmaModel::GenericLogConcave => Ok(s),
        SigmaModel::Empirical(_) => {
            let mut lo = model.min_p();
            let mut hi = lo.max(1.0) * 2.0;
            while model.eval(hi) <= s {
                hi *= 2.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if model.eval(mid) <= s {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-12 * hi {
                    break;
                }
            }
            Ok(lo)
        }
    }
}

/// `σ^{-1}(s)`, reading values under the floor as the bottom of the domain.
pub(crate) fn sigma_inverse_clamped(model: &SigmaModel, s: f64) -> f64 {
    sigma_inverse(model, s).unwrap_or_else(|_| model.min_p())
}

fn moment_root(samples: &[f64], dim: usize, dir: &[f64], p: f64) -> f64 {
    let trials = samples.len() / dim;
    let mut acc = 0.0;
    for row in samples.chunks_exact(dim) {
        let dot: f64 = row.iter().zip(dir).map(|(a, b)| a * b).sum();
        acc += dot.abs().powf(p);
    }
    (acc / trials as f64).powf(1.0 / p)
}

fn normalize(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    true
}

/// Projected gradient ascent of the empirical `p`-th moment on the sphere.
fn ascend(samples: &[f64], dim: usize, start: &[f64], p: f64, steps: usize) -> f64 {
    let mut dir = start.to_vec();
    let mut best = moment_root(samples, dim, &dir, p);
    let mut eta = 0.5;
    for _ in 0..steps {
        let mut grad = vec![0.0; dim];
        for row in samples.chunks_exact(dim) {
            let dot: f64 = row.iter().zip(&dir).map(|(a, b)| a * b).sum();
            let w = dot.abs().powf(p - 1.0) * dot.signum();
            grad.iter_mut().zip(row).for_each(|(g, r)| *g += w * r);
        }
        let radial: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        grad.iter_mut().zip(&dir).for_each(|(g, d)| *g -= radial * d);
        if !normalize(&mut grad) {
            break;
        }
        let mut improved = false;
        while eta > 1e-4 {
            let mut cand: Vec<f64> = dir.iter().zip(&grad).map(|(d, g)| d + eta * g).collect();
            normalize(&mut cand);
            let val = moment_root(samples, dim, &cand, p);
            if val > best {
                best = val;
                dir = cand;
                improved = true;
                break;
            }
            eta *= 0.5;
        }
        if !improved {
            break;
        }
    }
    best
}

/// Lower estimate of `σ_X(p)` from a sample set stored row-major
/// (`samples.len() = trials · dim`).
///
/// Maximum of the empirical `p`-th moment roots over the coordinate
/// directions and `directions` random unit vectors, refined by a local
/// ascent from the best of them.
pub fn sigma_from_samples(samples: &[f64], dim: usize, p: f64, directions: usize, stream: RngStream) -> f64 {
    let candidates: Vec<Vec<f64>> = (0..dim)
        .map(|j| {
            let mut e = vec![0.0; dim];
            e[j] = 1.0;
            e
        })
        .chain((0..directions).map(|r| {
            let mut rng = stream.substream(r as u64).rng();
            let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            if !normalize(&mut v) {
                v = vec![0.0; dim];
                v[0] = 1.0;
            }
            v
        }))
        .collect();
    let values: Vec<f64> = candidates.par_iter().map(|d| moment_root(samples, dim, d, p)).collect();
    // First maximal candidate, so the winner does not depend on scheduling.
    let (best_idx, best_val) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let refined = ascend(samples, dim, &candidates[best_idx], p, 25);
    best_val.max(refined)
}

pub fn draw_samples(spec: &EnsembleSpec, trials: usize, stream: RngStream) -> Vec<f64> {
    let dim = spec.dim;
    let mut samples = vec![0.0; trials * dim];
    samples
        .par_chunks_mut(dim)
        .enumerate()
        .for_each(|(t, row)| spec.fill(&mut stream.substream(t as u64).rng(), row));
    samples
}

/// Lower estimate of `σ_X(p)` for an ensemble. Needs `trials ≥ 1000·p`.
pub fn sigma_estimate(
    spec: &EnsembleSpec,
    p: f64,
    trials: usize,
    directions: usize,
    stream: RngStream,
) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(Error::out_of_range("p", format!("{p} < 2")));
    }
    if (trials as f64) < 1000.0 * p {
        return Err(Error::out_of_range(
            "trials",
            format!("{trials} trials are too few for p = {p} (need >= {})", (1000.0 * p).ceil()),
        ));
    }
    let samples = draw_samples(spec, trials, stream.substream(0));
    Ok(sigma_from_samples(&samples, spec.dim, p, directions, stream.substream(1)))
}

/// Empirical model on a grid of exponents, all from one sample set.
pub fn empirical_sigma_model(
    spec: &EnsembleSpec,
    p_grid: &[f64],
    trials: usize,
    directions: usize,
    stream: RngStream,
) -> Result<SigmaModel> {
    if p_grid.is_empty() {
        return Err(Error::EmptyInput("p grid"));
    }
    let pmax = p_grid.iter().cloned().fold(2.0, f64::max);
    if (trials as f64) < 1000.0 * pmax {
        return Err(Error::out_of_range(
            "trials",
            format!("{trials} trials are too few for p = {pmax}"),
        ));
    }
    let samples = draw_samples(spec, trials, stream.substream(0));
    let points = p_grid
        .iter()
        .map(|&p| (p, sigma_from_samples(&samples, spec.dim, p, directions, stream.substream(1))))
        .collect();
    Ok(SigmaModel::Empirical(EmpiricalSigma::new(spec.dim, points)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct M0Threshold {
    pub value: usize,
    /// The defining set was empty; `value` is 0.
    pub empty: bool,
}

/// `m_0 = sup{k ≤ m : k log(eN/k) ≤ σ^{-1}(t√m log(eN/m))}`.
pub fn m0_threshold(model: &SigmaModel, t: f64, m: usize, n_dim: usize) -> Result<M0Threshold> {
    if m == 0 || m > n_dim {
        return Err(Error::out_of_range("m", format!("need 1 <= m <= N = {n_dim}, got {m}")));
    }
    if !(t >= 1.0) {
        return Err(Error::out_of_range("t", format!("{t} < 1")));
    }
    let nf = n_dim as f64;
    let level = t * (m as f64).sqrt() * (E * nf / m as f64).ln();
    let target = match sigma_inverse(model, level) {
        Ok(v) => v,
        Err(_) => return Ok(M0Threshold { value: 0, empty: true }),
    };
    let mut best = 0;
    for k in 1..=m {
        let kf = k as f64;
        if kf * (E * nf / kf).ln() <= target {
            best = k;
        } else {
            break;
        }
    }
    Ok(M0Threshold {
        value: best,
        empty: best == 0,
    })
}

/// Root of `z log(eN/z) = (√m/b) log(eN/m)` on `(0, N]`.
pub fn m1_threshold(b: f64, m: usize, n_dim: usize) -> Result<f64> {
    if m == 0 || m > n_dim {
        return Err(Error::out_of_range("m", format!("need 1 <= m <= N = {n_dim}, got {m}")));
    }
    let mf = m as f64;
    if !(b >= 1.0 / mf.sqrt() - 1e-15 && b <= 1.0) {
        return Err(Error::out_of_range("b", format!("{b} outside [1/sqrt(m), 1] for m = {m}")));
    }
    let nf = n_dim as f64;
    let f = |z: f64| z * (E * nf / z).ln();
    let rhs = mf.sqrt() / b * (E * nf / mf).ln();
    if rhs >= nf {
        return Ok(nf);
    }
    let (mut lo, mut hi) = (0.0, nf);
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid) < rhs {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The event `Ω(Z, t, m, N)`: `sup_{|I|=m} |P_I Z|` at or above
/// `C·t·√m·log(eN/m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OmegaEvent {
    pub t: f64,
    pub m: usize,
    pub n_dim: usize,
    pub c: f64,
}

impl OmegaEvent {
    pub fn cutoff(&self) -> f64 {
        omega_cutoff(self)
    }
}

pub fn omega_cutoff(ev: &OmegaEvent) -> f64 {
    let m = ev.m as f64;
    ev.c * ev.t * m.sqrt() * (E * ev.n_dim as f64 / m).ln()
}
