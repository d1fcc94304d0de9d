use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::small_gram;
use crate::rng::RngStream;

const ITERATION_CAP: usize = 200_000;
const STALL_WINDOW: usize = 500;

fn random_unit(len: usize, stream: RngStream) -> DVector<f64> {
    let mut rng = stream.rng();
    let v: DVector<f64> = DVector::from_fn(len, |_, _| StandardNormal.sample(&mut rng));
    let norm = v.norm();
    if norm > 0.0 {
        v / norm
    } else {
        DVector::from_element(len, 1.0 / (len as f64).sqrt())
    }
}

/// Largest singular value of `m` by power iteration on the smaller Gram
/// matrix.
///
/// Stops once the Rayleigh-quotient residual `|Gv − ρv|` is at most
/// `tol·ρ`; a start that stops improving is replaced by a fresh random
/// vector. Exhausting the iteration cap is an error.
pub fn operator_norm(m: &DMatrix<f64>, tol: f64) -> Result<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::InvalidDimension("operator_norm of an empty matrix".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::out_of_range("tol", format!("{tol} <= 0")));
    }
    let g = small_gram(m);
    let dim = g.nrows();
    let base = RngStream::new(0x6f70_6e6f_726d, dim as u64);
    let mut restart = 0u64;
    let mut v = random_unit(dim, base.substream(restart));
    let mut best_rho = 0.0f64;
    let mut since_improvement = 0usize;
    let mut residual = f64::INFINITY;
    for _ in 0..ITERATION_CAP {
        let w = &g * &v;
        let rho = v.dot(&w);
        residual = (&w - &v * rho).norm();
        if residual <= tol * rho.abs() || w.norm() == 0.0 {
            return Ok(rho.max(0.0).sqrt());
        }
        if rho > best_rho * (1.0 + 1e-15) {
            best_rho = rho;
            since_improvement = 0;
        } else {
            since_improvement += 1;
        }
        if since_improvement >= STALL_WINDOW {
            restart += 1;
            v = random_unit(dim, base.substream(restart));
            since_improvement = 0;
            continue;
        }
        v = &w / w.norm();
    }
    Err(Error::NonConvergence {
        what: "operator_norm power iteration",
        iterations: ITERATION_CAP,
        residual,
    })
}
