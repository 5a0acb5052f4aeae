//! Active learning of homogeneous halfspaces with membership queries.
//!
//! The [`vsm`] module holds the learner: it encloses the version space in a
//! simplex on the L1 unit sphere and shrinks it by longest-edge bisection,
//! one label per cut. [`oracle`] provides the synthetic labeller and the
//! error measures, [`baselines`] the uncertainty- and random-sampling
//! comparison learners, and [`harness`] the experiment runner behind the
//! `vsm` command-line tool.
//!
//! ```
//! use halfspace_vsm::{run_vsm, Hypothesis, MembershipOracle, StopRule, VsmOptions};
//!
//! let target = Hypothesis::new(vec![0.7, 0.3]).unwrap();
//! let mut oracle = MembershipOracle::new(target);
//! let run = run_vsm(&mut oracle, 2, &StopRule::TargetError(0.01), &VsmOptions::default()).unwrap();
//! assert_eq!(run.labels_used, 9);
//! assert!(oracle.error_of(run.hypothesis.coords()).unwrap() <= 0.01);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod oracle;
pub mod simplex;
pub mod types;
pub mod vsm;

pub use error::{Error, Invariant, Result};
pub use linalg::SeededRng;
pub use oracle::{mc_error, true_error, MembershipOracle};
pub use simplex::Simplex;
pub use types::{Hypothesis, Label, QueryPoint};
pub use vsm::{label_budget, run_margin_vsm, run_vsm, RunResult, StopRule, TracePoint, VsmOptions};
