//! Command-line driver. Every subcommand prints (or writes to `--out`) a
//! JSON document `{command, config, result}`; curve and diagram commands
//! also write a CSV next to it.
//!
//! Exit codes: 0 success, 2 usage error, 3 budget or convergence failure,
//! 1 anything else.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::ensembles::{isotropy_report, sample_matrix, EnsembleKind, EnsembleSpec};
use crate::error::{Error, Result};
use crate::recovery::{phase_diagram, recovery_trial, rip_admissible_m, rip_certificate};
use crate::rng::RngStream;
use crate::sparse_norms::{
    akm_exact, akm_lower, choose_block_sizes, delta_m_exact, delta_m_lower, epsilon_net_sparse_sphere, g_function, k_prime,
    lambda_km, lambda_m, random_sparse_unit, sparse_net_project, DEFAULT_NET_CAP,
};
use crate::spectra::{empirical_sigma_model, SigmaModel};
use crate::tailcheck::{
    check_akm_tail, check_count_moments, check_kls_rate, check_order_stat, check_paouris, check_projection_sup,
    check_weighted_sum, log_grid, AkmMode,
};

pub const WORKERS_ENV: &str = "SPARSE_RIP_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "sparse-rip", version, about = "Tail estimates for log-concave ensembles and restricted isometry experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    params: Params,
}

#[derive(Debug, Clone, Copy, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Draw an n x N matrix.
    Sample,
    /// Mean, covariance and psi_1 diagnostics.
    Isotropy,
    /// Euclidean norm tail.
    TailsPaouris,
    /// Tail of the largest m-coordinate projection.
    TailsProj,
    /// Tail of the ell-th order statistic.
    TailsOrder,
    /// Moments of the exceedance count.
    TailsCount,
    /// Weighted sums of independent vectors.
    TailsWeighted,
    /// Tail of the k x m submatrix norm.
    TailsAkm,
    /// Empirical covariance deviation across sample sizes.
    KlsRate,
    /// Largest k x m submatrix norm of one matrix.
    Akm,
    /// Restricted isometry constant of one matrix.
    Delta,
    /// Threshold formulas and block sizes.
    Thresholds,
    /// Audit the sparse net projection.
    NetAudit,
    /// Truncation certificate for delta_m.
    RipCert,
    /// Largest m passing the admissibility inequality.
    RipAdmissible,
    /// Basis pursuit recovery experiments.
    Recover,
    /// Recovery success rates over a grid.
    Phase,
}

impl Command {
    fn name(self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, clap::Args)]
struct Params {
    /// Ensemble: exponential, gaussian, cube or l1ball.
    #[arg(long, global = true, default_value = "exponential")]
    ensemble: EnsembleKind,
    /// Number of rows (sample size).
    #[arg(long = "n", global = true)]
    n: Option<usize>,
    /// Ambient dimension.
    #[arg(long = "N", global = true)]
    big_n: Option<usize>,
    #[arg(long, global = true)]
    m: Option<usize>,
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    ell: Option<usize>,
    /// Sparsity.
    #[arg(long, global = true)]
    s: Option<usize>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long, global = true)]
    replicas: Option<usize>,
    /// Enumeration budget for exact computations.
    #[arg(long, global = true)]
    budget: Option<u64>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,
    /// Output JSON path; a CSV is written alongside when applicable.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Require exact enumeration.
    #[arg(long, global = true)]
    exact: bool,
    /// Allow heuristic lower bounds when over budget.
    #[arg(long, global = true)]
    heuristic: bool,
    /// Also fit the uniform-in-k bound.
    #[arg(long, global = true)]
    uniform: bool,
    #[arg(long, global = true)]
    theta: Option<f64>,
    #[arg(long = "B", global = true)]
    big_b: Option<f64>,
    /// Constant on the right of the admissibility inequality.
    #[arg(long = "c", global = true)]
    small_c: Option<f64>,
    /// Admissibility constant for threshold conditions.
    #[arg(long = "C", global = true)]
    big_c: Option<f64>,
    /// Constant in B = C1 log(n/b_m).
    #[arg(long = "C1", global = true)]
    c1: Option<f64>,
    #[arg(long, global = true)]
    t: Option<f64>,
    #[arg(long, global = true)]
    p: Option<f64>,
    #[arg(long, global = true)]
    t_min: Option<f64>,
    #[arg(long, global = true)]
    t_max: Option<f64>,
    #[arg(long, global = true)]
    t_points: Option<usize>,
    /// Comma-separated weights.
    #[arg(long, global = true, value_delimiter = ',')]
    x: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    #[arg(long, global = true, value_delimiter = ',')]
    s_grid: Option<Vec<usize>>,
    #[arg(long, global = true)]
    restarts: Option<usize>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Sigma model: generic or empirical.
    #[arg(long, global = true, default_value = "generic")]
    sigma: String,
    /// Random directions for sigma estimates.
    #[arg(long, global = true)]
    directions: Option<usize>,
}

/// Records every resolved parameter so the output echoes exactly the
/// configuration that produced it.
struct Ctx {
    p: Params,
    used: BTreeMap<&'static str, Value>,
}

fn missing(flag: &'static str) -> Error {
    Error::out_of_range(flag, "required for this command")
}

impl Ctx {
    fn record<T: Serialize>(&mut self, name: &'static str, v: T) {
        self.used.insert(name, json!(v));
    }

    fn val<T: Serialize + Copy>(&mut self, name: &'static str, v: Option<T>, default: Option<T>) -> Result<T> {
        let v = v.or(default).ok_or_else(|| missing(name))?;
        self.record(name, v);
        Ok(v)
    }

    fn spec(&mut self, dim: usize) -> Result<EnsembleSpec> {
        self.record("ensemble", self.p.ensemble);
        EnsembleSpec::new(self.p.ensemble, dim)
    }

    fn stream(&mut self) -> RngStream {
        self.record("seed", self.p.seed);
        RngStream::root(self.p.seed)
    }

    fn n(&mut self, d: Option<usize>) -> Result<usize> {
        self.val("n", self.p.n, d)
    }
    fn big_n(&mut self, d: Option<usize>) -> Result<usize> {
        self.val("N", self.p.big_n, d)
    }
    fn m(&mut self, d: Option<usize>) -> Result<usize> {
        self.val("m", self.p.m, d)
    }
    fn trials(&mut self, d: usize) -> Result<usize> {
        self.val("trials", self.p.trials, Some(d))
    }
    fn budget(&mut self) -> Result<u128> {
        Ok(self.val("budget", self.p.budget, Some(10_000_000))? as u128)
    }

    fn grid(&mut self, lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
        let lo = self.val("t_min", self.p.t_min, Some(lo))?;
        let hi = self.val("t_max", self.p.t_max, Some(hi))?;
        let points = self.val("t_points", self.p.t_points, Some(points))?;
        log_grid(lo, hi, points)
    }

    fn sigma_model(&mut self, spec: &EnsembleSpec, stream: RngStream) -> Result<SigmaModel> {
        let label = self.p.sigma.clone();
        self.record("sigma", &label);
        match label.as_str() {
            "generic" => Ok(SigmaModel::GenericLogConcave),
            "empirical" => {
                let directions = self.val("directions", self.p.directions, Some(16))?;
                empirical_sigma_model(spec, &[2.0, 3.0, 4.0, 6.0, 8.0], 20_000, directions, stream.substream(u64::MAX))
            }
            other => Err(Error::out_of_range("sigma", format!("unknown model '{other}' (generic|empirical)"))),
        }
    }
}

struct Output {
    result: Value,
    csv: Option<String>,
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn out(result: Value) -> Output {
    Output { result, csv: None }
}

fn execute(cmd: Command, ctx: &mut Ctx) -> Result<Output> {
    match cmd {
        Command::Sample => {
            let big_n = ctx.big_n(None)?;
            let n = ctx.n(Some(1))?;
            let spec = ctx.spec(big_n)?;
            let stream = ctx.stream();
            let a = sample_matrix(&spec, n, stream)?;
            let rows: Vec<Vec<f64>> = (0..n).map(|i| a.row(i)).collect();
            Ok(out(json!({ "rows": rows })))
        }
        Command::Isotropy => {
            let big_n = ctx.big_n(None)?;
            let trials = ctx.trials(100_000)?;
            let spec = ctx.spec(big_n)?;
            let stream = ctx.stream();
            Ok(out(to_value(&isotropy_report(&spec, trials, stream)?)?))
        }
        Command::TailsPaouris => {
            let big_n = ctx.big_n(None)?;
            let trials = ctx.trials(10_000)?;
            let grid = ctx.grid(0.25, 4.0, 12)?;
            let spec = ctx.spec(big_n)?;
            let stream = ctx.stream();
            let r = check_paouris(&spec, &grid, trials, stream)?;
            Ok(Output { csv: Some(r.tail.to_csv()), result: to_value(&r)? })
        }
        Command::TailsProj => {
            let big_n = ctx.big_n(None)?;
            let m = ctx.m(None)?;
            let trials = ctx.trials(10_000)?;
            let grid = ctx.grid(1.0, 8.0, 12)?;
            let spec = ctx.spec(big_n)?;
            let stream = ctx.stream();
            let sigma = ctx.sigma_model(&spec, stream)?;
            let r = check_projection_sup(&spec, m, &grid, trials, &sigma, stream)?;
            Ok(Output { csv: Some(r.to_csv()), result: to_value(&r)? })
        }
        Command::TailsOrder => {
            let big_n = ctx.big_n(None)?;
            let ell = ctx.val("ell", ctx.p.ell, None)?;
            let c = ctx.val("C", ctx.p.big_c, Some(1.0))?;
            let trials = ctx.trials(10_000)?;
            let grid = ctx.grid(1.0, 8.0, 12)?;
            let spec = ctx.spec(big_n)?;
            let stream = ctx.stream();
            let sigma = ctx.sigma_model(&spec, stream)?;
            let r = check_order_stat(&spec, ell, &grid, c, trials, &sigma, stream)?;
            Ok(Output { csv: Some(r.to_csv()), result: to_value(&r)? })
        }
        Command::TailsCount => {
            let big_n = ctx.big_n(None)?;
            let t = ctx.val("t", ctx.p.t, None)?;
            let p = ctx.val("p", ctx.p.p, Some(2.0))?;
            let c = ctx.val("C", ctx.p.big_c, Some(1.0))?;
            let trials = ctx.trials(10_000)?;
            let spec = ctx.spec(big_n)?;
            let stream = ctx.stream();
            let sigma = ctx.sigma_model(&spec, stream)?;
            Ok(out(to_value(&check_count_moments(&spec, t, p, c, trials, &sigma, stream)?)?))
        }
        Command::TailsWeighted => {
            let big_n = ctx.big_n(None)?;
            let m = ctx.m(None)?;
            let ell = ctx.val("ell", ctx.p.ell, Some(1))?;
            let x = match ctx.p.x.clone() {
                Some(x) => x,
                None => {
                    let n = ctx.n(None)?;
                    vec![1.0 / (n as f64).sqrt(); n]
                }
            };
            ctx.record("x", &x);
            let trials = ctx.trials(10_000)?;
            let directions = ctx.val("directions", ctx.p.directions, Some(8))?;
            let grid = ctx.grid(1.0, 8.0, 12)?;
            let spec = ctx.spec(big_n)?;
            let stream = ctx.stream();
            let r = check_weighted_sum(&spec, &x, m, ell, &grid, trials, directions, stream)?;
            Ok(Output { csv: Some(r.projection.to_csv()), result: to_value(&r)? })
        }
        Command::TailsAkm => {
            let big_n = ctx.big_n(None)?;
            let n = ctx.n(None)?;
            let k = ctx.val("k", ctx.p.k, None)?;
            let m = ctx.m(None)?;
            let trials = ctx.trials(2000)?;
            let budget = ctx.budget()?;
            let heuristic = ctx.p.heuristic;
            let uniform = ctx.p.uniform;
            ctx.record("heuristic", heuristic);
            ctx.record("uniform", uniform);
            let grid = ctx.grid(1.0, 8.0, 12)?;
            let spec = ctx.spec(big_n)?;
            let stream = ctx.stream();
            let mode = AkmMode { budget, allow_heuristic: heuristic, uniform };
            let r = check_akm_tail(&spec, n, k, m, &grid, trials, mode, stream)?;
            Ok(Output { csv: Some(r.to_csv()), result: to_value(&r)? })
        }
        Command::KlsRate => {
            let big_n = ctx.big_n(None)?;
            let grid = ctx.p.n_grid.clone().unwrap_or_else(|| vec![big_n, 4 * big_n, 16 * big_n, 64 * big_n]);
            ctx.record("n_grid", &grid);
            let trials = ctx.trials(500)?;
            let spec = ctx.spec(big_n)?;
            let stream = ctx.stream();
            let r = check_kls_rate(&spec, &grid, trials, stream)?;
            let mut csv = String::from("n,median,fitted_C\n");
            for p in &r.points {
                csv.push_str(&format!("{},{},{}\n", p.n, p.median, p.fitted_c));
            }
            Ok(Output { csv: Some(csv), result: to_value(&r)? })
        }
        Command::Akm => {
            let big_n = ctx.big_n(None)?;
            let n = ctx.n(None)?;
            let k = ctx.val("k", ctx.p.k, None)?;
            let m = ctx.m(None)?;
            let exact = ctx.p.exact;
            ctx.record("exact", exact);
            let spec = ctx.spec(big_n)?;
            let stream = ctx.stream();
            let a = sample_matrix(&spec, n, stream.substream(0))?;
            let r = if exact {
                let budget = ctx.budget()?;
                akm_exact(a.entries(), k, m, budget)?
            } else {
                let restarts = ctx.val("restarts", ctx.p.restarts, Some(8))?;
                akm_lower(a.entries(), k, m, restarts, stream.substream(1))?
            };
            Ok(out(json!({ "value": r.value, "rows": r.rows, "cols": r.cols, "method": r.method, "evaluations": r.evaluations.to_string() })))
        }
        Command::Delta => {
            let big_n = ctx.big_n(None)?;
            let n = ctx.n(None)?;
            let m = ctx.m(None)?;
            let exact = ctx.p.exact;
            ctx.record("exact", exact);
            let spec = ctx.spec(big_n)?;
            let stream = ctx.stream();
            let a = sample_matrix(&spec, n, stream.substream(0))?;
            let r = if exact {
                let budget = ctx.budget()?;
                delta_m_exact(a.entries(), m, budget)?
            } else {
                let restarts = ctx.val("restarts", ctx.p.restarts, Some(8))?;
                delta_m_lower(a.entries(), m, restarts, stream.substream(1))?
            };
            Ok(out(json!({ "delta": r.delta, "cols": r.cols, "extreme": r.extreme, "method": r.method, "evaluations": r.evaluations.to_string() })))
        }
        Command::Thresholds => {
            let big_n = ctx.big_n(None)?;
            let n = ctx.n(None)?;
            let m = ctx.m(None)?;
            let k = ctx.val("k", ctx.p.k, None)?;
            if m == 0 || m > big_n {
                return Err(Error::out_of_range("m", format!("need 1 <= m <= N = {big_n}, got {m}")));
            }
            let mf = m as f64;
            let b_m = mf * (3.0 * mf).ln().ln() * (3.0 * big_n.max(n) as f64 / mf).ln().powi(2);
            let mut g_table = Vec::new();
            let mut z = 1.0;
            while z <= 4.0 * mf {
                g_table.push(json!({ "z": z, "g": g_function(z, m, big_n) }));
                z *= 2.0;
            }
            let blocks = match choose_block_sizes(k, m, n, big_n) {
                Ok(b) => to_value(&b)?,
                Err(e) => json!({ "error": e.to_string() }),
            };
            Ok(out(json!({
                "lambda_km": lambda_km(k, m, n, big_n),
                "lambda_m": lambda_m(m, n, big_n),
                "k_prime": k_prime(m, n, big_n),
                "b_m": b_m,
                "g_table": g_table,
                "block_sizes": blocks,
            })))
        }
        Command::NetAudit => {
            let big_n = ctx.big_n(None)?;
            let n = ctx.n(Some(big_n))?;
            let m = ctx.m(None)?;
            let k = ctx.val("k", ctx.p.k, None)?;
            let trials = ctx.trials(10_000)?;
            let stream = ctx.stream();
            let sizes = choose_block_sizes(k, m, n, big_n)?;
            let mut rng = stream.rng();
            let mut violations = Vec::new();
            let mut max_distance = 0.0f64;
            let mut max_weighted = 0.0f64;
            for trial in 0..trials {
                let x = random_sparse_unit(big_n, k, &mut rng);
                let d = sparse_net_project(&x, &sizes, n)?;
                max_distance = max_distance.max(d.distance(&x));
                max_weighted = max_weighted.max(d.weighted_sup(&sizes));
                if let Some(v) = d.violation(&x, &sizes, n) {
                    violations.push(json!({ "trial": trial, "detail": v }));
                }
            }
            let mut result = json!({
                "block_sizes": sizes,
                "trials": trials,
                "violations": violations,
                "max_distance": max_distance,
                "distance_bound": k as f64 / (2.0 * n as f64),
                "max_weighted_sup": max_weighted,
            });
            if let Some(eps) = ctx.p.eps {
                ctx.record("eps", eps);
                let net = epsilon_net_sparse_sphere(big_n, m, eps, DEFAULT_NET_CAP)?;
                result["net_size"] = json!(net.len());
                result["net_volume_bound"] = json!(crate::linalg::binomial(big_n, m) as f64 * (1.0 + 2.0 / eps).powi(m as i32));
            }
            Ok(out(result))
        }
        Command::RipCert => {
            let big_n = ctx.big_n(None)?;
            let n = ctx.n(None)?;
            let m = ctx.m(None)?;
            let theta = ctx.val("theta", ctx.p.theta, Some(0.25))?;
            let replicas = ctx.val("replicas", ctx.p.replicas, Some(200))?;
            let budget = ctx.budget()?;
            let big_b = match ctx.p.big_b {
                Some(b) => b,
                None => {
                    let c1 = ctx.val("C1", ctx.p.c1, Some(1.0))?;
                    let mf = m as f64;
                    let b_m = mf * (3.0 * mf).ln().ln() * (3.0 * big_n.max(n) as f64 / mf).ln().powi(2);
                    (c1 * (n as f64 / b_m).ln()).max(1.0)
                }
            };
            ctx.record("B", big_b);
            let spec = ctx.spec(big_n)?;
            let stream = ctx.stream();
            let a = sample_matrix(&spec, n, stream.substream(0))?;
            let c = rip_certificate(&a, m, theta, big_b, replicas, budget, stream.substream(1))?;
            Ok(out(to_value(&c)?))
        }
        Command::RipAdmissible => {
            let big_n = ctx.big_n(None)?;
            let n = ctx.n(None)?;
            let theta = ctx.val("theta", ctx.p.theta, Some(0.25))?;
            let c = ctx.val("c", ctx.p.small_c, Some(1.0))?;
            let c1 = ctx.val("C1", ctx.p.c1, Some(1.0))?;
            Ok(out(to_value(&rip_admissible_m(n, big_n, theta, c, c1)?)?))
        }
        Command::Recover => {
            let big_n = ctx.big_n(None)?;
            let n = ctx.n(None)?;
            let s = ctx.val("s", ctx.p.s, None)?;
            let trials = ctx.trials(100)?;
            let spec = ctx.spec(big_n)?;
            let stream = ctx.stream();
            use rayon::prelude::*;
            let results: Vec<Result<_>> = (0..trials)
                .into_par_iter()
                .map(|j| recovery_trial(&spec, n, s, stream.substream(j as u64)))
                .collect();
            let results: Vec<_> = results.into_iter().collect::<Result<_>>()?;
            let successes = results.iter().filter(|r| r.success).count();
            let max_rel = results.iter().map(|r| r.rel_error).fold(0.0, f64::max);
            let failures: Vec<Value> = results
                .iter()
                .enumerate()
                .filter(|(_, r)| !r.success)
                .map(|(j, r)| json!({ "trial": j, "rel_error": r.rel_error, "reason": r.reason }))
                .collect();
            Ok(out(json!({
                "trials": trials,
                "successes": successes,
                "success_rate": successes as f64 / trials.max(1) as f64,
                "max_rel_error": max_rel,
                "failures": failures,
            })))
        }
        Command::Phase => {
            let big_n = ctx.big_n(None)?;
            let n_grid = match ctx.p.n_grid.clone() {
                Some(g) => g,
                None => vec![ctx.n(None)?],
            };
            ctx.record("n_grid", &n_grid);
            let s_grid = ctx.p.s_grid.clone().unwrap_or_else(|| vec![0, 2, 4, 8, 12, 16]);
            ctx.record("s_grid", &s_grid);
            let trials = ctx.trials(20)?;
            let spec = ctx.spec(big_n)?;
            let stream = ctx.stream();
            let d = phase_diagram(&spec, &n_grid, &s_grid, trials, stream)?;
            Ok(Output { csv: Some(d.to_csv()), result: to_value(&d)? })
        }
    }
}

fn flag_for(name: &str) -> String {
    format!("--{name}")
}

fn run_parsed(cli: Cli) -> Result<String> {
    let cmd = cli.command;
    let workers = cli.params.workers;
    let out_path = cli.params.out.clone();
    let mut ctx = Ctx { p: cli.params, used: BTreeMap::new() };
    let output = match workers {
        Some(0) => return Err(Error::out_of_range("workers", "must be at least 1")),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::out_of_range("workers", e.to_string()))?;
            pool.install(|| execute(cmd, &mut ctx))?
        }
        None => execute(cmd, &mut ctx)?,
    };
    let doc = json!({
        "command": cmd.name(),
        "config": ctx.used,
        "result": output.result,
    });
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    if let Some(path) = out_path {
        std::fs::write(&path, &text)?;
        if let Some(csv) = output.csv {
            std::fs::write(path.with_extension("csv"), csv)?;
        }
        Ok(String::new())
    } else {
        Ok(text)
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_parsed(cli) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            let code = match &e {
                Error::OutOfRange { name, detail } => {
                    eprintln!("error: invalid value for {}: {detail}", flag_for(name));
                    return 2;
                }
                Error::InvalidDimension(_) | Error::EmptyInput(_) => 2,
                e if e.is_resource_failure() => 3,
                _ => 1,
            };
            eprintln!("error: {e}");
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_names_are_kebab_case() {
        assert_eq!(Command::TailsPaouris.name(), "tails-paouris");
        assert_eq!(Command::RipAdmissible.name(), "rip-admissible");
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["sparse-rip", "bogus"]), 2);
        assert_eq!(run(["sparse-rip", "delta", "--frobnicate", "1"]), 2);
        assert_eq!(run(["sparse-rip", "delta", "--n", "4", "--N", "5"]), 2);
        assert_eq!(run(["sparse-rip", "delta", "--n", "4", "--N", "5", "--m", "9"]), 2);
    }

    #[test]
    fn budget_failure_exits_three() {
        assert_eq!(
            run(["sparse-rip", "delta", "--exact", "--n", "4", "--N", "30", "--m", "10", "--budget", "100"]),
            3
        );
    }
}
