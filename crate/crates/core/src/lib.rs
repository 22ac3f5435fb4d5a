//! Reward estimator tables for small-group distributional alignment.
//!
//! Every estimator that sees only the count `X ~ Binomial(K, p)` of an answer
//! in a group of `K` samples is a lookup table `c_0..c_K`; its mean is the
//! Bernstein polynomial `P_c(p)`. This crate builds such tables (unbiased
//! U-statistics, plug-in and Taylor-corrected logs, the minimax-bias table and
//! the variance-optimal tables of the bias/variance frontier), profiles their
//! exact bias and second moment, and runs a small alignment game that uses
//! them as rewards.
//!
//! ```
//! use polyreward::{binom, estimators};
//!
//! let t = estimators::taylor_bt_table(16, 1.0, -6.0).unwrap();
//! let b = binom::gradient_weighted_bias(&t, 0.5);
//! assert!(b.abs() < 1e-3);
//! ```

pub mod analysis;
pub mod aqp;
pub mod binom;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod game;
pub mod grid;
pub mod linalg;
pub mod minimax;
pub mod output;
pub mod remez;
pub mod simplex;
pub mod table;

pub use error::{Error, Result};
pub use grid::{Grid, Scheme};
pub use table::{EstimatorTable, Method};
