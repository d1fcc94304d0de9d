#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod ensembles;
pub mod error;
pub mod linalg;
pub mod recovery;
pub mod rng;
pub mod sparse_norms;
pub mod spectra;
pub mod tailcheck;

pub use error::{Error, Result};
