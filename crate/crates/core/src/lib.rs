//! Sparse regression over redundant dictionaries by greedy selection.
//!
//! The crate implements orthogonal greedy learning (OGL) with pluggable
//! selection rules, its thresholded variants (TOGL and δ-TOGL) in which any
//! atom whose normalized correlation with the residual exceeds `δ` may be
//! selected, and pure greedy, ridge and Lasso (FISTA) comparators. A
//! benchmark harness sweeps their parameters on the sinc problem or on CSV
//! data and selects the best parameter by test error.
//!
//! ```
//! use rand::SeedableRng;
//! use rand_chacha::ChaCha8Rng;
//! use togl::{algorithms, data, dictionary, greedy};
//!
//! let mut rng = ChaCha8Rng::seed_from_u64(0);
//! let (train, _test) = data::gen_sinc(200, 50, 0.1, &mut rng).unwrap();
//! let spec = dictionary::build_rbf_uniform(60, -3.2, 3.2, 1.0, &mut rng).unwrap();
//! let design = dictionary::normalize_columns(
//!     dictionary::evaluate_design(&spec, train.inputs()).unwrap(),
//! );
//! let delta = greedy::Delta::new(0.05).unwrap();
//! let trace = algorithms::fit_delta_togl(
//!     &design,
//!     train.targets(),
//!     delta,
//!     greedy::Selection::First,
//!     &mut rng,
//! )
//! .unwrap();
//! assert!(trace.final_model().len() < 60);
//! ```

pub mod algorithms;
pub mod baselines;
pub mod bench;
pub mod data;
pub mod dictionary;
pub mod error;
pub mod greedy;
pub mod linalg;
pub mod types;

pub use error::{Error, Result};
pub use types::{Dataset, FitReport, Parameter, Role, SparseModel, TerminationReason};
