//! Sub-matrix operator norms `A_{k,m}`, restricted isometry constants
//! `δ_m`, the threshold formulas attached to them, and the sparse nets used
//! to discretize `U_k`.
//!
//! Exact computations are gated by an explicit evaluation budget and fail
//! with [`Error::BudgetExceeded`](crate::Error::BudgetExceeded) rather than
//! falling back silently; the heuristic searches are sound lower bounds.

mod akm;
mod net;
mod opnorm;
mod rip;
mod thresholds;

pub use akm::{akm_exact, akm_lower, akm_profile, AkmProfile, SubmatrixResult};
pub use net::{epsilon_net_sparse_sphere, random_sparse_unit, sparse_net_project, NetDecomposition, SparseBlock, DEFAULT_NET_CAP};
pub use opnorm::operator_norm;
pub use rip::{delta_m_exact, delta_m_lower, delta_m_lower_seeded, gram_deviation_norm, Extreme, RipResult};
pub use thresholds::{choose_block_sizes, g_function, k_prime, lambda_km, lambda_m, BlockSizes};

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Heuristic,
}

/// Lexicographic order on `(J, I)` used to break ties between argmax sets.
pub(crate) fn lex_less(a: (&[usize], &[usize]), b: (&[usize], &[usize])) -> bool {
    (a.0, a.1) < (b.0, b.1)
}
