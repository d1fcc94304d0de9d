//! Seeded samplers for isotropic log-concave vectors and matrices.
//!
//! Four product/ball families are provided, each with an exact,
//! rejection-free draw. Every family is centered with identity covariance.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    /// iid symmetric exponential coordinates with density `2^{-1/2} exp(-√2|t|)`.
    ExponentialProduct,
    GaussianProduct,
    /// iid uniform coordinates on `[-√3, √3]`.
    UniformCube,
    /// Uniform on a scaled cross-polytope `r·B_1^N`.
    UniformL1Ball,
}

impl EnsembleKind {
    pub const ALL: [EnsembleKind; 4] = [
        EnsembleKind::ExponentialProduct,
        EnsembleKind::GaussianProduct,
        EnsembleKind::UniformCube,
        EnsembleKind::UniformL1Ball,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EnsembleKind::ExponentialProduct => "exponential",
            EnsembleKind::GaussianProduct => "gaussian",
            EnsembleKind::UniformCube => "cube",
            EnsembleKind::UniformL1Ball => "l1ball",
        }
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnsembleKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "exponential" | "exp" | "laplace" => Ok(EnsembleKind::ExponentialProduct),
            "gaussian" | "normal" => Ok(EnsembleKind::GaussianProduct),
            "cube" | "uniform" => Ok(EnsembleKind::UniformCube),
            "l1ball" | "l1" | "cross-polytope" => Ok(EnsembleKind::UniformL1Ball),
            other => Err(format!(
                "unknown ensemble '{other}' (expected exponential, gaussian, cube or l1ball)"
            )),
        }
    }
}

/// Coordinate variance of the uniform law on `B_1^N`.
///
/// `(|x_1|, …, |x_N|, 1 − Σ|x_i|)` is flat Dirichlet, so `|x_1| ~ Beta(1, N)`.
pub fn l1_ball_coordinate_variance(dim: usize) -> f64 {
    let n = dim as f64;
    2.0 / ((n + 1.0) * (n + 2.0))
}

/// An isotropic log-concave law on `R^N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub dim: usize,
    #[serde(skip)]
    scale: f64,
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("ensemble dimension N must be >= 1".into()));
        }
        let scale = match kind {
            EnsembleKind::ExponentialProduct => std::f64::consts::FRAC_1_SQRT_2,
            EnsembleKind::GaussianProduct => 1.0,
            EnsembleKind::UniformCube => 3f64.sqrt(),
            EnsembleKind::UniformL1Ball => (1.0 / l1_ball_coordinate_variance(dim)).sqrt(),
        };
        Ok(Self { kind, dim, scale })
    }

    /// The isotropy scaling: Laplace scale, cube half-width or ball radius.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Fill `out` (length `N`) with one draw.
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        match self.kind {
            EnsembleKind::ExponentialProduct => {
                for v in out.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    *v = if rng.random::<bool>() { e } else { -e } * self.scale;
                }
            }
            EnsembleKind::GaussianProduct => {
                for v in out.iter_mut() {
                    *v = StandardNormal.sample(rng);
                }
            }
            EnsembleKind::UniformCube => {
                for v in out.iter_mut() {
                    *v = (2.0 * rng.random::<f64>() - 1.0) * self.scale;
                }
            }
            EnsembleKind::UniformL1Ball => {
                let mut total = 0.0;
                for v in out.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    total += e;
                    *v = if rng.random::<bool>() { e } else { -e };
                }
                let slack: f64 = Exp1.sample(rng);
                let factor = self.scale / (total + slack);
                for v in out.iter_mut() {
                    *v *= factor;
                }
            }
        }
    }
}

pub fn sample_vector(spec: &EnsembleSpec, stream: RngStream) -> Vec<f64> {
    let mut out = vec![0.0; spec.dim];
    spec.fill(&mut stream.rng(), &mut out);
    out
}

/// `n × N` matrix of independent rows; the transpose is the column form `Γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    entries: DMatrix<f64>,
    spec: EnsembleSpec,
    stream: RngStream,
}

impl SampleMatrix {
    #[cfg(test)]
    pub(crate) fn from_entries(entries: DMatrix<f64>, spec: EnsembleSpec, stream: RngStream) -> Self {
        Self { entries, spec, stream }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }

    pub fn stream(&self) -> RngStream {
        self.stream
    }

    pub fn master_seed(&self) -> u64 {
        self.stream.master_seed
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.entries.row(i).iter().cloned().collect()
    }
}

impl AsRef<DMatrix<f64>> for SampleMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

/// Row `i` is drawn from `stream.substream(i)`.
pub fn sample_matrix(spec: &EnsembleSpec, n: usize, stream: RngStream) -> Result<SampleMatrix> {
    if n == 0 {
        return Err(Error::InvalidDimension("matrix row count n must be >= 1".into()));
    }
    let mut entries = DMatrix::zeros(n, spec.dim);
    let mut row = vec![0.0; spec.dim];
    for i in 0..n {
        spec.fill(&mut stream.substream(i as u64).rng(), &mut row);
        for (j, v) in row.iter().enumerate() {
            entries[(i, j)] = *v;
        }
    }
    Ok(SampleMatrix {
        entries,
        spec: *spec,
        stream,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IsotropyReport {
    pub trials: usize,
    /// Euclidean norm of the sample mean.
    pub mean_norm: f64,
    pub max_mean_abs: f64,
    /// Largest entry of `|Σ̂ − Id|`.
    pub max_cov_deviation: f64,
    /// Empirical ψ1 norm of `⟨X, e_1⟩`.
    pub psi1_estimate: f64,
}

/// Empirical ψ1 norm: the `C` solving `mean(exp(|z|/C)) = 2`, by bisection
/// in `log C`.
pub fn empirical_psi1(samples: &[f64]) -> f64 {
    let max_abs = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if samples.is_empty() || max_abs == 0.0 {
        return 0.0;
    }
    let mgf = |c: f64| samples.iter().map(|z| (z.abs() / c).exp()).sum::<f64>() / samples.len() as f64;
    let (mut lo, mut hi) = ((max_abs * 1e-3).ln(), (max_abs * 1e3).ln());
    // mgf(e^lo) may be inf; that still reads as "too small".
    while mgf(hi.exp()) > 2.0 {
        hi += 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mgf(mid.exp()) > 2.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

pub fn isotropy_report(spec: &EnsembleSpec, trials: usize, stream: RngStream) -> Result<IsotropyReport> {
    if trials < 100 {
        return Err(Error::out_of_range("trials", format!("{trials} < 100")));
    }
    let d = spec.dim;
    let mut sum = vec![0.0; d];
    let mut second = DMatrix::<f64>::zeros(d, d);
    let mut first_coord = Vec::with_capacity(trials);
    let mut x = vec![0.0; d];
    for t in 0..trials {
        spec.fill(&mut stream.substream(t as u64).rng(), &mut x);
        for i in 0..d {
            sum[i] += x[i];
            for j in i..d {
                second[(i, j)] += x[i] * x[j];
            }
        }
        first_coord.push(x[0]);
    }
    let tf = trials as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / tf).collect();
    let mut max_cov_deviation: f64 = 0.0;
    for i in 0..d {
        for j in i..d {
            let cov = second[(i, j)] / tf - mean[i] * mean[j];
            let target = if i == j { 1.0 } else { 0.0 };
            max_cov_deviation = max_cov_deviation.max((cov - target).abs());
        }
    }
    Ok(IsotropyReport {
        trials,
        mean_norm: mean.iter().map(|m| m * m).sum::<f64>().sqrt(),
        max_mean_abs: mean.iter().fold(0.0f64, |a, m| a.max(m.abs())),
        max_cov_deviation,
        psi1_estimate: empirical_psi1(&first_coord),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: EnsembleKind, dim: usize) -> EnsembleSpec {
        EnsembleSpec::new(kind, dim).unwrap()
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(
            EnsembleSpec::new(EnsembleKind::GaussianProduct, 0),
            Err(Error::InvalidDimension(_))
        ));
        let s = spec(EnsembleKind::GaussianProduct, 2);
        assert!(sample_matrix(&s, 0, RngStream::root(0)).is_err());
    }

    #[test]
    fn exponential_coordinate_tail() {
        let s = spec(EnsembleKind::ExponentialProduct, 1);
        let draws = 200_000;
        let root = RngStream::root(11);
        let mut rng = root.rng();
        let mut x = [0.0];
        let mut hits = 0usize;
        for _ in 0..draws {
            s.fill(&mut rng, &mut x);
            if x[0].abs() >= 2.0 {
                hits += 1;
            }
        }
        // Unit variance forces P(|X| ≥ s) = exp(−√2 s).
        let p = (-2.0 * 2f64.sqrt()).exp();
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        let phat = hits as f64 / draws as f64;
        assert!((phat - p).abs() < 3.0 * se, "phat={phat} p={p}");
    }

    #[test]
    fn cube_draws_stay_in_box() {
        let s = spec(EnsembleKind::UniformCube, 3);
        let a = 3f64.sqrt();
        let m = sample_matrix(&s, 5000, RngStream::root(3)).unwrap();
        assert!(m.entries().iter().all(|v| v.abs() <= a));
        for j in 0..3 {
            let var = m.entries().column(j).iter().map(|v| v * v).sum::<f64>() / 5000.0;
            assert!((var - 1.0).abs() < 0.06, "var={var}");
        }
    }

    #[test]
    fn l1_radius_matches_quadrature_in_two_dimensions() {
        // Midpoint rule for E x_1² over the unit cross-polytope in R^2,
        // integrating out y exactly (the section at x has length 2(1 − |x|)).
        let cells = 200_000;
        let h = 2.0 / cells as f64;
        let (mut mass, mut moment) = (0.0, 0.0);
        for i in 0..cells {
            let x: f64 = -1.0 + (i as f64 + 0.5) * h;
            let section = 2.0 * (1.0 - x.abs());
            mass += section * h;
            moment += x * x * section * h;
        }
        let v2 = moment / mass;
        assert!((v2 - 1.0 / 6.0).abs() < 1e-4, "quadrature v2 = {v2}");
        let r = spec(EnsembleKind::UniformL1Ball, 2).scale();
        assert!((r * r * v2 - 1.0).abs() < 1e-3);
        assert!((l1_ball_coordinate_variance(2) - v2).abs() < 1e-4);
    }

    #[test]
    fn l1_ball_draws_inside_ball() {
        let s = spec(EnsembleKind::UniformL1Ball, 5);
        let m = sample_matrix(&s, 2000, RngStream::root(5)).unwrap();
        for i in 0..m.nrows() {
            let l1: f64 = m.entries().row(i).iter().map(|v| v.abs()).sum();
            assert!(l1 <= s.scale() + 1e-12);
        }
    }

    #[test]
    fn matrices_are_deterministic() {
        let s = spec(EnsembleKind::ExponentialProduct, 2);
        let a = sample_matrix(&s, 2, RngStream::new(17, 3)).unwrap();
        let b = sample_matrix(&s, 2, RngStream::new(17, 3)).unwrap();
        assert_eq!(a.entries(), b.entries());
    }

    #[test]
    fn single_row_matches_vector_on_substream() {
        let s = spec(EnsembleKind::UniformL1Ball, 4);
        let stream = RngStream::new(5, 9);
        let m = sample_matrix(&s, 1, stream).unwrap();
        assert_eq!(m.row(0), sample_vector(&s, stream.substream(0)));
    }

    #[test]
    fn gaussian_gram_close_to_identity() {
        let s = spec(EnsembleKind::GaussianProduct, 4);
        let n = 10_000;
        let a = sample_matrix(&s, n, RngStream::root(21)).unwrap();
        let g = a.entries().tr_mul(a.entries()) / n as f64;
        let dev = (g - DMatrix::<f64>::identity(4, 4)).abs().max();
        assert!(dev < 0.1, "dev={dev}");
    }

    #[test]
    fn gaussian_covariance_error_shrinks_with_trials() {
        let s = spec(EnsembleKind::GaussianProduct, 4);
        let small = isotropy_report(&s, 1_000, RngStream::root(1)).unwrap();
        let large = isotropy_report(&s, 64_000, RngStream::root(1)).unwrap();
        assert!(large.max_cov_deviation < small.max_cov_deviation);
        assert!(large.max_cov_deviation < 0.03);
    }

    #[test]
    fn exponential_psi1_near_sqrt_two() {
        // E exp(|Z|/C) = √2/(√2 − 1/C) for the unit-variance Laplace law,
        // which equals 2 at C = √2.
        let s = spec(EnsembleKind::ExponentialProduct, 2);
        let rep = isotropy_report(&s, 200_000, RngStream::root(8)).unwrap();
        assert!(rep.psi1_estimate.is_finite());
        assert!((rep.psi1_estimate - 2f64.sqrt()).abs() < 0.12, "psi1={}", rep.psi1_estimate);
    }

    #[test]
    fn cube_psi1_finite_and_small() {
        let s = spec(EnsembleKind::UniformCube, 2);
        let rep = isotropy_report(&s, 10_000, RngStream::root(2)).unwrap();
        assert!(rep.psi1_estimate.is_finite() && rep.psi1_estimate < 3f64.sqrt() / 2f64.ln());
    }

    #[test]
    fn isotropy_needs_enough_trials() {
        let s = spec(EnsembleKind::UniformCube, 2);
        assert!(isotropy_report(&s, 99, RngStream::root(2)).is_err());
    }
}
