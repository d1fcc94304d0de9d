//! Monte Carlo tail checks: sample a statistic, build its empirical
//! survival curve, and fit the smallest constant that makes a stated tail
//! bound hold on a grid.
//!
//! Trial `j` always draws from `stream.substream(j)`. Single-vector
//! statistics use row 0 of that trial (`substream(j).substream(0)`), so a
//! weighted sum with weights `e_1` sees exactly the same vectors as the
//! plain projection check.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::ensembles::{sample_matrix, sample_vector, EnsembleSpec};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::sparse_norms::{akm_exact, akm_lower, akm_profile, gram_deviation_norm, lambda_km, lambda_m};
use crate::spectra::{count_exceed, m0_threshold, order_statistic, sigma_from_samples, sigma_inverse_clamped, top_m_norm, SigmaModel};

const E: f64 = std::f64::consts::E;

/// Default ceiling on a fitted constant for the `pass` flag.
pub const DEFAULT_CEILING: f64 = 10.0;

/// `count` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo) || count == 0 {
        return Err(Error::out_of_range("grid", format!("need 0 < lo <= hi and count >= 1, got [{lo}, {hi}] x {count}")));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect())
}

/// Twelve log-spaced points in `[1, 8]`.
pub fn default_grid() -> Vec<f64> {
    log_grid(1.0, 8.0, 12).expect("fixed grid is valid")
}

fn check_grid(grid: &[f64], floor: f64, name: &'static str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyInput(name));
    }
    if grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::out_of_range(name, "grid must be sorted ascending"));
    }
    if !(grid[0] >= floor) {
        return Err(Error::out_of_range(name, format!("grid starts at {} < {floor}", grid[0])));
    }
    Ok(())
}

fn sorted_desc(samples: &[f64]) -> Vec<f64> {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// `#{S ≥ x}` on a descending sample.
fn count_at_least(desc: &[f64], x: f64) -> usize {
    desc.partition_point(|&v| v >= x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalCurve {
    pub statistic_id: String,
    pub seed: u64,
    pub trials: usize,
    pub thresholds: Vec<f64>,
    /// `P̂(S ≥ t)` at each threshold.
    pub survival: Vec<f64>,
}

impl SurvivalCurve {
    pub fn labeled(mut self, statistic_id: impl Into<String>, seed: u64) -> Self {
        self.statistic_id = statistic_id.into();
        self.seed = seed;
        self
    }

    /// `threshold,survival` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,survival\n");
        for (t, s) in self.thresholds.iter().zip(&self.survival) {
            out.push_str(&format!("{t},{s}\n"));
        }
        out
    }

    /// Grid points where `log P̂` bends upward (a convexity violation of
    /// the log-survival).
    pub fn log_convexity_violations(&self) -> usize {
        let pts: Vec<(f64, f64)> = self
            .thresholds
            .iter()
            .zip(&self.survival)
            .filter(|(_, s)| **s > 0.0)
            .map(|(t, s)| (*t, s.ln()))
            .collect();
        pts.windows(3)
            .filter(|w| {
                let d1 = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                let d2 = (w[2].1 - w[1].1) / (w[2].0 - w[1].0);
                d2 > d1 + 1e-12
            })
            .count()
    }
}

/// Empirical `P̂(S ≥ t)` on an ascending grid.
pub fn survival_curve(samples: &[f64], thresholds: &[f64]) -> Result<SurvivalCurve> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("samples"));
    }
    if thresholds.is_empty() {
        return Err(Error::EmptyInput("thresholds"));
    }
    if thresholds.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::out_of_range("thresholds", "must be sorted ascending"));
    }
    let desc = sorted_desc(samples);
    let trials = samples.len();
    let survival = thresholds
        .iter()
        .map(|&t| count_at_least(&desc, t) as f64 / trials as f64)
        .collect();
    Ok(SurvivalCurve {
        statistic_id: String::new(),
        seed: 0,
        trials,
        thresholds: thresholds.to_vec(),
        survival,
    })
}

/// How the unknown constant enters a bound, per grid point `t` with raw
/// threshold `y_t`.
#[derive(Debug, Clone, Copy)]
pub enum BoundShape<'a> {
    /// `P̂(S ≥ C·y_t) ≤ level_t`.
    Scaled,
    /// `P̂(S ≥ y_t) ≤ exp(−σ^{-1}(level_t / C))`.
    InverseSigma(&'a SigmaModel),
    /// `P̂(S ≥ y_t) ≤ exp(−level_t / C)`.
    ExponentScale,
}

impl BoundShape<'_> {
    fn label(&self) -> &'static str {
        match self {
            BoundShape::Scaled => "scaled_threshold",
            BoundShape::InverseSigma(_) => "inverse_sigma",
            BoundShape::ExponentScale => "exponent_scale",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub bound_id: String,
    pub shape: String,
    /// Smallest constant making the bound hold at every grid point; this is
    /// an infimum, so the closed event `S ≥ C·y` may still be violated at
    /// exactly this value. Non-finite values serialize as `null`.
    #[serde(rename = "fitted_C")]
    pub fitted_c: f64,
    /// Constant required by each grid point alone.
    pub per_t: Vec<f64>,
    /// Least-squares slope of `log P̂(S ≥ s)` against `s/unit` over the
    /// empirical tail window `P̂ ∈ [10/T, 0.1]`.
    pub slope_check: f64,
    pub ceiling: f64,
    pub pass: bool,
}

/// Per-point constants for a bound; `fitted = max`.
///
/// For the scaled form the infimum over `C` with `#{S ≥ C y} ≤ ⌊b·T⌋ = q`
/// is `s_(q+1)/y` in descending order (0 when `q ≥ T`).
fn per_point_constants(desc: &[f64], thresholds: &[f64], levels: &[f64], shape: BoundShape) -> Vec<f64> {
    let trials = desc.len();
    thresholds
        .iter()
        .zip(levels)
        .map(|(&y, &level)| match shape {
            BoundShape::Scaled => {
                let q = (level * trials as f64).floor();
                if q >= trials as f64 {
                    0.0
                } else {
                    desc[q as usize].max(0.0) / y
                }
            }
            BoundShape::InverseSigma(model) => {
                let p_hat = count_at_least(desc, y) as f64 / trials as f64;
                if p_hat == 0.0 {
                    return 0.0;
                }
                let l = -p_hat.ln();
                level / model.eval(l.max(model.min_p()))
            }
            BoundShape::ExponentScale => {
                let p_hat = count_at_least(desc, y) as f64 / trials as f64;
                if p_hat == 0.0 {
                    0.0
                } else if p_hat >= 1.0 {
                    f64::INFINITY
                } else {
                    level / -p_hat.ln()
                }
            }
        })
        .collect()
}

/// Decay rate of the empirical log-survival in units of `unit`.
pub fn tail_slope(samples: &[f64], unit: f64) -> f64 {
    let desc = sorted_desc(samples);
    slope_from_desc(&desc, unit)
}

fn slope_from_desc(desc: &[f64], unit: f64) -> f64 {
    let t = desc.len() as f64;
    let lo = 10usize;
    let hi = (0.1 * t).floor() as usize;
    if hi < lo + 2 {
        return f64::NAN;
    }
    let pts: Vec<(f64, f64)> = (lo..=hi).map(|j| (desc[j - 1] / unit, (j as f64 / t).ln())).collect();
    least_squares_slope(&pts)
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        f64::NAN
    } else {
        sxy / sxx
    }
}

/// Fit the smallest constant for one bound. `thresholds[i]` is the raw
/// threshold `y_t` and `levels[i]` the bound parameter at that point.
pub fn calibrate(
    samples: &[f64],
    bound_id: &str,
    thresholds: &[f64],
    levels: &[f64],
    shape: BoundShape,
    unit: f64,
    ceiling: f64,
) -> Result<CalibrationReport> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("samples"));
    }
    if thresholds.is_empty() || thresholds.len() != levels.len() {
        return Err(Error::out_of_range("thresholds", "need one level per threshold"));
    }
    let desc = sorted_desc(samples);
    Ok(calibrate_sorted(&desc, bound_id, thresholds, levels, shape, unit, ceiling))
}

fn calibrate_sorted(
    desc: &[f64],
    bound_id: &str,
    thresholds: &[f64],
    levels: &[f64],
    shape: BoundShape,
    unit: f64,
    ceiling: f64,
) -> CalibrationReport {
    let per_t = per_point_constants(desc, thresholds, levels, shape);
    let fitted = per_t.iter().cloned().fold(0.0, f64::max);
    CalibrationReport {
        bound_id: bound_id.to_string(),
        shape: shape.label().to_string(),
        fitted_c: fitted,
        per_t,
        slope_check: slope_from_desc(desc, unit),
        ceiling,
        pass: fitted.is_finite() && fitted <= ceiling,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    pub statistic_id: String,
    pub config: serde_json::Value,
    /// Normalizing scale: grid value `t` corresponds to raw threshold
    /// `unit · t` for scaled bounds.
    pub unit: f64,
    pub t_grid: Vec<f64>,
    pub curve: SurvivalCurve,
    pub calibration: CalibrationReport,
    pub variants: Vec<CalibrationReport>,
    /// Empirical 0.99-quantile of the statistic divided by `unit`.
    pub quantile_99: f64,
    pub median: f64,
    pub convexity_violations: usize,
    /// The statistic is a heuristic lower bound of the intended quantity.
    pub lower_bound_statistic: bool,
    pub notes: Vec<String>,
    /// Raw statistic per trial, in trial order.
    #[serde(skip)]
    pub samples: Vec<f64>,
}

impl TailReport {
    pub fn to_csv(&self) -> String {
        self.curve.to_csv()
    }
}

/// Empirical `q`-quantile (lower order statistic).
pub fn quantile(samples: &[f64], q: f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let idx = ((q * s.len() as f64).ceil() as usize).clamp(1, s.len()) - 1;
    s[idx]
}

struct ReportParts<'a> {
    statistic_id: &'a str,
    config: serde_json::Value,
    seed: u64,
    unit: f64,
    grid: &'a [f64],
    curve_thresholds: Vec<f64>,
}

fn assemble(parts: ReportParts, samples: Vec<f64>, main: CalibrationReport, variants: Vec<CalibrationReport>) -> Result<TailReport> {
    let curve = survival_curve(&samples, &parts.curve_thresholds)?.labeled(parts.statistic_id, parts.seed);
    Ok(TailReport {
        statistic_id: parts.statistic_id.to_string(),
        config: parts.config,
        unit: parts.unit,
        t_grid: parts.grid.to_vec(),
        convexity_violations: curve.log_convexity_violations(),
        curve,
        calibration: main,
        variants,
        quantile_99: quantile(&samples, 0.99) / parts.unit,
        median: quantile(&samples, 0.5),
        lower_bound_statistic: false,
        notes: Vec::new(),
        samples,
    })
}

fn par_trials<T, F>(trials: usize, stream: RngStream, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(RngStream) -> T + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|j| f(stream.substream(j as u64)))
        .collect()
}

fn single_vector(spec: &EnsembleSpec, trial: RngStream) -> Vec<f64> {
    sample_vector(spec, trial.substream(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentRatio {
    pub p: f64,
    pub moment: f64,
    /// `(E|X|^p)^{1/p} / (√N + p)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PaourisReport {
    #[serde(flatten)]
    pub tail: TailReport,
    pub moments: Vec<MomentRatio>,
}

/// `P̂(|X| ≥ C s√N) ≤ e^{−s√N}`, with statistic `|X|` and unit `√N`.
pub fn check_paouris(spec: &EnsembleSpec, s_grid: &[f64], trials: usize, stream: RngStream) -> Result<PaourisReport> {
    if trials < 1000 {
        return Err(Error::out_of_range("trials", format!("{trials} < 1000")));
    }
    check_grid(s_grid, f64::MIN_POSITIVE, "s_grid")?;
    let dim = spec.dim;
    let root_n = (dim as f64).sqrt();
    let norms: Vec<f64> = par_trials(trials, stream, |tr| {
        single_vector(spec, tr).iter().map(|v| v * v).sum::<f64>().sqrt()
    });
    let desc = sorted_desc(&norms);
    let thresholds: Vec<f64> = s_grid.iter().map(|s| s * root_n).collect();
    let levels: Vec<f64> = s_grid.iter().map(|s| (-s * root_n).exp()).collect();
    let main = calibrate_sorted(&desc, "paouris", &thresholds, &levels, BoundShape::Scaled, root_n, DEFAULT_CEILING);
    let moments = [2.0, 4.0, 8.0]
        .iter()
        .map(|&p| {
            let m = (norms.iter().map(|v| v.powf(p)).sum::<f64>() / trials as f64).powf(1.0 / p);
            MomentRatio { p, moment: m, ratio: m / (root_n + p) }
        })
        .collect();
    let parts = ReportParts {
        statistic_id: "euclidean_norm",
        config: json!({"ensemble": spec.kind, "N": dim, "trials": trials, "seed": stream.master_seed, "grid": s_grid}),
        seed: stream.master_seed,
        unit: root_n,
        grid: s_grid,
        curve_thresholds: thresholds,
    };
    Ok(PaourisReport {
        tail: assemble(parts, norms, main, Vec::new())?,
        moments,
    })
}

/// `√m·log(eN/m)`.
fn projection_unit(m: usize, dim: usize) -> f64 {
    let mf = m as f64;
    mf.sqrt() * (E * dim as f64 / mf).ln()
}

/// Tail exponent of the projection bound with a given `σ` model:
/// `σ^{-1}(t√m log(eN/m)) / √log(em/m_0)`. Returns the exponent and
/// whether `m_0` had to be raised from an empty set to 1.
fn projection_exponent(sigma: &SigmaModel, t: f64, m: usize, dim: usize) -> Result<(f64, bool)> {
    let m0 = m0_threshold(sigma, t, m, dim)?;
    let m0v = m0.value.max(1) as f64;
    let level = t * projection_unit(m, dim);
    let exponent = sigma_inverse_clamped(sigma, level) / (E * m as f64 / m0v).ln().sqrt();
    Ok((exponent, m0.empty))
}

/// Uniform projection tail: statistic `max_{|I|=m}|P_I X|`, bound
/// `exp(−σ^{-1}(t√m log(eN/m))/√log(em/m_0))` at cutoff `C·t·√m log(eN/m)`.
/// The generic variant uses `σ(p) = p`, which gives
/// `exp(−t√m log(eN/m)/√log(em))` when `m_0 = 1`.
pub fn check_projection_sup(
    spec: &EnsembleSpec,
    m: usize,
    t_grid: &[f64],
    trials: usize,
    sigma: &SigmaModel,
    stream: RngStream,
) -> Result<TailReport> {
    let dim = spec.dim;
    if m == 0 || m > dim {
        return Err(Error::out_of_range("m", format!("need 1 <= m <= N = {dim}, got {m}")));
    }
    if trials == 0 {
        return Err(Error::out_of_range("trials", "need at least one trial"));
    }
    check_grid(t_grid, 1.0, "t_grid")?;
    let samples: Vec<f64> = par_trials(trials, stream, |tr| {
        top_m_norm(&single_vector(spec, tr), m).expect("m checked")
    });
    let desc = sorted_desc(&samples);
    let unit = projection_unit(m, dim);
    let thresholds: Vec<f64> = t_grid.iter().map(|t| t * unit).collect();
    let mut empty_m0 = 0;
    let mut levels = Vec::with_capacity(t_grid.len());
    let mut generic_levels = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let (e, empty) = projection_exponent(sigma, t, m, dim)?;
        empty_m0 += empty as usize;
        levels.push((-e).exp());
        let (g, _) = projection_exponent(&SigmaModel::GenericLogConcave, t, m, dim)?;
        generic_levels.push((-g).exp());
    }
    let main = calibrate_sorted(&desc, "uniform_projection", &thresholds, &levels, BoundShape::Scaled, unit, DEFAULT_CEILING);
    let generic_simple: Vec<f64> = t_grid
        .iter()
        .map(|t| (-(t * unit) / (E * m as f64).ln().sqrt()).exp())
        .collect();
    let no_log: Vec<f64> = t_grid
        .iter()
        .map(|&t| (-sigma_inverse_clamped(sigma, t * unit)).exp())
        .collect();
    let variants = vec![
        calibrate_sorted(&desc, "uniform_projection_generic_sigma", &thresholds, &generic_levels, BoundShape::Scaled, unit, DEFAULT_CEILING),
        calibrate_sorted(&desc, "uniform_projection_log_em", &thresholds, &generic_simple, BoundShape::Scaled, unit, DEFAULT_CEILING),
        calibrate_sorted(&desc, "uniform_projection_no_log_denominator", &thresholds, &no_log, BoundShape::Scaled, unit, DEFAULT_CEILING),
    ];
    let parts = ReportParts {
        statistic_id: "top_m_norm",
        config: json!({"ensemble": spec.kind, "N": dim, "m": m, "trials": trials, "seed": stream.master_seed, "grid": t_grid, "sigma": sigma.label()}),
        seed: stream.master_seed,
        unit,
        grid: t_grid,
        curve_thresholds: thresholds,
    };
    let mut report = assemble(parts, samples, main, variants)?;
    if empty_m0 > 0 {
        report
            .notes
            .push(format!("m_0 set was empty at {empty_m0} grid points; m_0 = 1 used there"));
    }
    Ok(report)
}

/// Order statistic tail `P̂(X*(ℓ) ≥ t) ≤ exp(−σ^{-1}(t√ℓ/C))` at
/// `t = τ·c_adm·log(eN/ℓ)` for `τ` in the grid (so `τ ≥ 1` keeps every
/// point admissible).
pub fn check_order_stat(
    spec: &EnsembleSpec,
    ell: usize,
    tau_grid: &[f64],
    c_adm: f64,
    trials: usize,
    sigma: &SigmaModel,
    stream: RngStream,
) -> Result<TailReport> {
    let dim = spec.dim;
    if ell == 0 || ell > dim {
        return Err(Error::out_of_range("ell", format!("need 1 <= ell <= N = {dim}, got {ell}")));
    }
    if !(c_adm > 0.0) {
        return Err(Error::out_of_range("C", format!("admissibility constant must be positive, got {c_adm}")));
    }
    if trials == 0 {
        return Err(Error::out_of_range("trials", "need at least one trial"));
    }
    check_grid(tau_grid, 1.0, "t_grid")?;
    let samples: Vec<f64> = par_trials(trials, stream, |tr| {
        order_statistic(&single_vector(spec, tr), ell).expect("ell checked")
    });
    let desc = sorted_desc(&samples);
    let unit = c_adm * (E * dim as f64 / ell as f64).ln();
    let thresholds: Vec<f64> = tau_grid.iter().map(|t| t * unit).collect();
    let levels: Vec<f64> = thresholds.iter().map(|t| t * (ell as f64).sqrt()).collect();
    let main = calibrate_sorted(&desc, "order_statistic", &thresholds, &levels, BoundShape::InverseSigma(sigma), unit, DEFAULT_CEILING);
    let generic = SigmaModel::GenericLogConcave;
    let variants = vec![calibrate_sorted(
        &desc,
        "order_statistic_generic_sigma",
        &thresholds,
        &levels,
        BoundShape::InverseSigma(&generic),
        unit,
        DEFAULT_CEILING,
    )];
    let parts = ReportParts {
        statistic_id: "order_statistic",
        config: json!({"ensemble": spec.kind, "N": dim, "ell": ell, "C": c_adm, "trials": trials, "seed": stream.master_seed, "grid": tau_grid, "sigma": sigma.label()}),
        seed: stream.master_seed,
        unit,
        grid: tau_grid,
        curve_thresholds: thresholds,
    };
    assemble(parts, samples, main, variants)
}

#[derive(Debug, Clone, Serialize)]
pub struct CountMomentReport {
    pub config: serde_json::Value,
    pub t: f64,
    pub p: f64,
    /// `(E(t²N_X(t))^p)^{1/p}`.
    pub lhs: f64,
    /// `σ(p)²`.
    pub rhs_base: f64,
    /// `√lhs / σ(p)`.
    #[serde(rename = "fitted_C")]
    pub fitted_c: f64,
    /// `C·log(N t²/σ(p)²)`, which `t` must reach.
    pub admissibility_level: f64,
}

/// Moment of the signed exceedance count `N_X(t) = #{i : X(i) ≥ t}`.
pub fn check_count_moments(
    spec: &EnsembleSpec,
    t: f64,
    p: f64,
    c_adm: f64,
    trials: usize,
    sigma: &SigmaModel,
    stream: RngStream,
) -> Result<CountMomentReport> {
    if !(2.0..=8.0).contains(&p) {
        return Err(Error::out_of_range("p", format!("need 2 <= p <= 8, got {p}")));
    }
    if trials == 0 {
        return Err(Error::out_of_range("trials", "need at least one trial"));
    }
    let dim = spec.dim;
    let sp = sigma.eval(p);
    let level = c_adm * (dim as f64 * t * t / (sp * sp)).ln();
    if !(t > 0.0 && t >= level) {
        return Err(Error::out_of_range(
            "t",
            format!("t = {t} is below the admissibility level C log(N t^2 / sigma(p)^2) = {level}"),
        ));
    }
    let counts: Vec<usize> = par_trials(trials, stream, |tr| count_exceed(&single_vector(spec, tr), t, true));
    let mean = counts
        .iter()
        .map(|&c| (t * t * c as f64).powf(p))
        .sum::<f64>()
        / trials as f64;
    let lhs = mean.powf(1.0 / p);
    Ok(CountMomentReport {
        config: json!({"ensemble": spec.kind, "N": dim, "t": t, "p": p, "C": c_adm, "trials": trials, "seed": stream.master_seed, "sigma": sigma.label()}),
        t,
        p,
        lhs,
        rhs_base: sp * sp,
        fitted_c: lhs.sqrt() / sp,
        admissibility_level: level,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `b ≥ 1/√m`.
    Wide,
    /// `b ≤ 1/√m`.
    Narrow,
}

/// Exponent of the weighted projection bound in the wide branch,
/// `t√m log(eN/m) / (b√log(e²b²m))`.
pub fn wide_branch_exponent(t: f64, m: usize, dim: usize, b: f64) -> f64 {
    let mf = m as f64;
    t * projection_unit(m, dim) / (b * (E * E * b * b * mf).ln().sqrt())
}

/// Exponent in the narrow branch,
/// `min{t²m log²(eN/m), (t/b)√m log(eN/m)}`.
pub fn narrow_branch_exponent(t: f64, m: usize, dim: usize, b: f64) -> f64 {
    let mf = m as f64;
    let l = (E * dim as f64 / mf).ln();
    (t * t * mf * l * l).min(t / b * mf.sqrt() * l)
}

#[derive(Debug, Clone, Serialize)]
pub struct SigmaEnvelope {
    pub p: f64,
    pub sigma_y: f64,
    /// `√p|x| + p‖x‖_∞`.
    pub envelope: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchContinuity {
    pub t: Vec<f64>,
    pub wide: Vec<f64>,
    pub narrow: Vec<f64>,
    /// Largest ratio between the two exponents over the grid.
    pub max_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightedSumReport {
    pub config: serde_json::Value,
    pub weight_norm: f64,
    pub weight_sup: f64,
    pub sigma: Vec<SigmaEnvelope>,
    pub order: TailReport,
    pub projection: TailReport,
    pub branch: Branch,
    /// Both branches evaluated when `b = 1/√m` (to relative 1e-12).
    pub boundary: Option<BranchContinuity>,
}

/// Weighted sums `Y = Σ x_i X_i`: the moment envelope, the order-statistic
/// tail with its two regimes and the uniform projection tail in the branch
/// selected by `b = ‖x‖_∞`.
#[allow(clippy::too_many_arguments)]
pub fn check_weighted_sum(
    spec: &EnsembleSpec,
    x: &[f64],
    m: usize,
    ell: usize,
    t_grid: &[f64],
    trials: usize,
    directions: usize,
    stream: RngStream,
) -> Result<WeightedSumReport> {
    let dim = spec.dim;
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sup = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if x.is_empty() || norm == 0.0 || norm > 1.0 + 1e-12 || sup > 1.0 {
        return Err(Error::out_of_range("x", format!("need 0 < |x| <= 1 and |x|_inf <= 1, got {norm}, {sup}")));
    }
    if m == 0 || m > dim {
        return Err(Error::out_of_range("m", format!("need 1 <= m <= N = {dim}, got {m}")));
    }
    if ell == 0 || ell > dim {
        return Err(Error::out_of_range("ell", format!("need 1 <= ell <= N = {dim}, got {ell}")));
    }
    if trials == 0 {
        return Err(Error::out_of_range("trials", "need at least one trial"));
    }
    check_grid(t_grid, 1.0, "t_grid")?;

    let mut ys = vec![0.0; trials * dim];
    ys.par_chunks_mut(dim).enumerate().for_each(|(j, y)| {
        let trial = stream.substream(j as u64);
        for (i, &w) in x.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let xi = sample_vector(spec, trial.substream(i as u64));
            for (a, b) in y.iter_mut().zip(&xi) {
                *a += w * b;
            }
        }
    });

    let sigma = [2.0, 4.0, 8.0]
        .iter()
        .map(|&p| {
            let s = sigma_from_samples(&ys, dim, p, directions, stream.substream(u64::MAX));
            let env = p.sqrt() * norm + p * sup;
            SigmaEnvelope { p, sigma_y: s, envelope: env, ratio: s / env }
        })
        .collect();

    let config = json!({
        "ensemble": spec.kind, "N": dim, "n": x.len(), "m": m, "ell": ell,
        "trials": trials, "seed": stream.master_seed, "grid": t_grid, "x": x,
    });

    // Order statistic of Y against exp(−(1/C) min{t²ℓ/|x|², t√ℓ/‖x‖_∞}).
    let order_samples: Vec<f64> = ys
        .chunks_exact(dim)
        .map(|y| order_statistic(y, ell).expect("ell checked"))
        .collect();
    let ord_desc = sorted_desc(&order_samples);
    let ord_unit = norm * (E * dim as f64 / ell as f64).ln();
    let ord_thr: Vec<f64> = t_grid.iter().map(|t| t * ord_unit).collect();
    let ellf = ell as f64;
    let ord_levels: Vec<f64> = ord_thr
        .iter()
        .map(|t| (t * t * ellf / (norm * norm)).min(t * ellf.sqrt() / sup))
        .collect();
    let ord_main = calibrate_sorted(&ord_desc, "weighted_order_statistic", &ord_thr, &ord_levels, BoundShape::ExponentScale, ord_unit, DEFAULT_CEILING);
    let order = assemble(
        ReportParts {
            statistic_id: "weighted_order_statistic",
            config: config.clone(),
            seed: stream.master_seed,
            unit: ord_unit,
            grid: t_grid,
            curve_thresholds: ord_thr,
        },
        order_samples,
        ord_main,
        Vec::new(),
    )?;

    // Uniform projection of Y in the branch picked by b.
    let proj_samples: Vec<f64> = ys
        .chunks_exact(dim)
        .map(|y| top_m_norm(y, m).expect("m checked"))
        .collect();
    let proj_desc = sorted_desc(&proj_samples);
    let unit = projection_unit(m, dim);
    let thr: Vec<f64> = t_grid.iter().map(|t| t * unit).collect();
    let b = sup;
    let pivot = 1.0 / (m as f64).sqrt();
    let branch = if b >= pivot { Branch::Wide } else { Branch::Narrow };
    let exponent = |t: f64| match branch {
        Branch::Wide => wide_branch_exponent(t, m, dim, b),
        Branch::Narrow => narrow_branch_exponent(t, m, dim, b),
    };
    let levels: Vec<f64> = t_grid.iter().map(|&t| (-exponent(t)).exp()).collect();
    let proj_main = calibrate_sorted(&proj_desc, "weighted_projection", &thr, &levels, BoundShape::Scaled, unit, DEFAULT_CEILING);
    let projection = assemble(
        ReportParts {
            statistic_id: "weighted_top_m_norm",
            config: config.clone(),
            seed: stream.master_seed,
            unit,
            grid: t_grid,
            curve_thresholds: thr,
        },
        proj_samples,
        proj_main,
        Vec::new(),
    )?;

    let boundary = ((b - pivot).abs() <= 1e-12 * pivot).then(|| {
        let wide: Vec<f64> = t_grid.iter().map(|&t| wide_branch_exponent(t, m, dim, b)).collect();
        let narrow: Vec<f64> = t_grid.iter().map(|&t| narrow_branch_exponent(t, m, dim, b)).collect();
        let max_ratio = wide
            .iter()
            .zip(&narrow)
            .map(|(a, c)| a.max(*c) / a.min(*c))
            .fold(1.0, f64::max);
        BranchContinuity { t: t_grid.to_vec(), wide, narrow, max_ratio }
    });

    Ok(WeightedSumReport {
        config,
        weight_norm: norm,
        weight_sup: sup,
        sigma,
        order,
        projection,
        branch,
        boundary,
    })
}

/// How to evaluate `A_{k,m}` per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AkmMode {
    pub budget: u128,
    /// Fall back to the alternating lower bound when over budget.
    pub allow_heuristic: bool,
    /// Also fit the uniform-in-`k` bound (needs the full profile).
    pub uniform: bool,
}

impl Default for AkmMode {
    fn default() -> Self {
        Self {
            budget: 10_000_000,
            allow_heuristic: false,
            uniform: false,
        }
    }
}

/// `P̂(A_{k,m} ≥ C t λ_{k,m}) ≤ exp(−t λ_{k,m}/√log(3m))`, and optionally
/// `P̂(max_k A_{k,m}/λ_{k,m} ≥ C t) ≤ exp(−t λ_m)`.
#[allow(clippy::too_many_arguments)]
pub fn check_akm_tail(
    spec: &EnsembleSpec,
    n: usize,
    k: usize,
    m: usize,
    t_grid: &[f64],
    trials: usize,
    mode: AkmMode,
    stream: RngStream,
) -> Result<TailReport> {
    let dim = spec.dim;
    if n == 0 || k == 0 || k > n {
        return Err(Error::out_of_range("k", format!("need 1 <= k <= n = {n}, got {k}")));
    }
    if m == 0 || m > dim {
        return Err(Error::out_of_range("m", format!("need 1 <= m <= N = {dim}, got {m}")));
    }
    if trials == 0 {
        return Err(Error::out_of_range("trials", "need at least one trial"));
    }
    check_grid(t_grid, 1.0, "t_grid")?;
    let required = crate::linalg::binomial(n, k).saturating_mul(crate::linalg::binomial(dim, m));
    let exact = required <= mode.budget;
    if !exact && !mode.allow_heuristic {
        return Err(Error::BudgetExceeded {
            required,
            budget: mode.budget,
            fallback: "akm_lower (heuristic mode)",
        });
    }
    let lam = lambda_km(k, m, n, dim);
    let lam_m = lambda_m(m, n, dim);
    let per_trial: Vec<Result<(f64, f64)>> = par_trials(trials, stream, |tr| {
        let a = sample_matrix(spec, n, tr)?.into_entries();
        let value = if exact {
            akm_exact(&a, k, m, mode.budget)?.value
        } else {
            akm_lower(&a, k, m, 8, tr.substream(u64::MAX))?.value
        };
        let uniform = if mode.uniform {
            let profile = akm_profile(&a, m, mode.budget)?;
            (1..=n)
                .map(|kk| profile.get(kk) / lambda_km(kk, m, n, dim))
                .fold(0.0, f64::max)
        } else {
            f64::NAN
        };
        Ok((value, uniform))
    });
    let per_trial: Vec<(f64, f64)> = per_trial.into_iter().collect::<Result<_>>()?;
    let samples: Vec<f64> = per_trial.iter().map(|p| p.0).collect();
    let desc = sorted_desc(&samples);
    let thresholds: Vec<f64> = t_grid.iter().map(|t| t * lam).collect();
    let log3m = (3.0 * m as f64).ln().sqrt();
    let levels: Vec<f64> = t_grid.iter().map(|t| (-t * lam / log3m).exp()).collect();
    let main = calibrate_sorted(&desc, "submatrix_norm", &thresholds, &levels, BoundShape::Scaled, lam, DEFAULT_CEILING);
    let mut variants = Vec::new();
    if mode.uniform {
        let uni: Vec<f64> = per_trial.iter().map(|p| p.1).collect();
        let uni_desc = sorted_desc(&uni);
        let uni_levels: Vec<f64> = t_grid.iter().map(|t| (-t * lam_m).exp()).collect();
        variants.push(calibrate_sorted(&uni_desc, "submatrix_norm_uniform_k", t_grid, &uni_levels, BoundShape::Scaled, 1.0, DEFAULT_CEILING));
    }
    let parts = ReportParts {
        statistic_id: "a_km",
        config: json!({
            "ensemble": spec.kind, "n": n, "N": dim, "k": k, "m": m, "trials": trials,
            "seed": stream.master_seed, "grid": t_grid, "budget": mode.budget.to_string(),
            "uniform": mode.uniform,
        }),
        seed: stream.master_seed,
        unit: lam,
        grid: t_grid,
        curve_thresholds: thresholds,
    };
    let mut report = assemble(parts, samples, main, variants)?;
    if !exact {
        report.lower_bound_statistic = true;
        report
            .notes
            .push("A_{k,m} over budget; statistic is the alternating-maximization lower bound".into());
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct KlsPoint {
    pub n: usize,
    pub median: f64,
    /// `median / √(N/n)`.
    pub fitted_c: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KlsReport {
    pub config: serde_json::Value,
    pub points: Vec<KlsPoint>,
    #[serde(rename = "fitted_C")]
    pub fitted_c: f64,
    /// Least-squares slope of `log median` against `log n`.
    pub slope: f64,
    /// Per-trial statistics, `samples[i][j]` for `n_grid[i]`, trial `j`.
    #[serde(skip)]
    pub samples: Vec<Vec<f64>>,
}

/// Empirical covariance deviation `‖(1/n)Σ X_i⊗X_i − Id‖` across sample
/// sizes. Trial `j` shares its matrix stream across `n`, so the rows for a
/// smaller `n` are a prefix of those for a larger one.
pub fn check_kls_rate(spec: &EnsembleSpec, n_grid: &[usize], trials: usize, stream: RngStream) -> Result<KlsReport> {
    let dim = spec.dim;
    if n_grid.is_empty() {
        return Err(Error::EmptyInput("n_grid"));
    }
    if let Some(&bad) = n_grid.iter().find(|&&n| n < dim) {
        return Err(Error::out_of_range("n", format!("every n must be >= N = {dim}, got {bad}")));
    }
    if trials == 0 {
        return Err(Error::out_of_range("trials", "need at least one trial"));
    }
    let mut samples = Vec::with_capacity(n_grid.len());
    let mut points = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let stats: Vec<Result<f64>> = par_trials(trials, stream, |tr| {
            Ok(gram_deviation_norm(sample_matrix(spec, n, tr)?.entries()))
        });
        let stats: Vec<f64> = stats.into_iter().collect::<Result<_>>()?;
        let median = quantile(&stats, 0.5);
        points.push(KlsPoint {
            n,
            median,
            fitted_c: median / (dim as f64 / n as f64).sqrt(),
        });
        samples.push(stats);
    }
    let fitted = points.iter().map(|p| p.fitted_c).fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = points.iter().map(|p| ((p.n as f64).ln(), p.median.ln())).collect();
    Ok(KlsReport {
        config: json!({"ensemble": spec.kind, "N": dim, "n_grid": n_grid, "trials": trials, "seed": stream.master_seed}),
        points,
        fitted_c: fitted,
        slope: if pts.len() >= 2 { least_squares_slope(&pts) } else { f64::NAN },
        samples,
    })
}
