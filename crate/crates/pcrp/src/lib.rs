//! Seating-process priors with a tunable rich-get-richer exponent, the
//! matching powered Dirichlet machinery, and an infinite Gaussian mixture
//! model driven by any of them.
//!
//! The core object is the powered seating rule: an occupied table of
//! population `N_k` attracts the next customer with mass `N_k^r`, a new table
//! with mass `alpha`. The exponent `r` interpolates from a flat prior over
//! occupied tables (`r = 0`), through the classical Chinese restaurant
//! process (`r = 1`), to winner-take-all behaviour (`r > 1`).
//!
//! Modules:
//! - [`process`]: predictive rules, sequential simulation, exact small-`N`
//!   enumeration.
//! - [`dirichlet`]: the count-conditioned Dirichlet density, its posterior
//!   predictive, and the compound count distribution.
//! - [`propositions`]: harmonic-number theory curves plus Monte-Carlo
//!   harnesses for the convergence and growth laws.
//! - [`igmm`]: collapsed-Gibbs infinite Gaussian mixture with an NIW prior.
//! - [`metrics`]: partition-agreement scores.
//! - [`datasets`]: synthetic cluster generators and CSV I/O.
//! - [`cli`]: the `pcrp` command-line tool built from the pieces above.
//!
//! See the crate examples for runnable walkthroughs of each capability.

pub mod cli;
pub mod datasets;
pub mod dirichlet;
pub mod error;
pub mod igmm;
pub mod metrics;
pub mod partition;
pub mod process;
pub mod propositions;

pub use error::{Error, Result};
pub use partition::Partition;
pub use process::{ProcessKind, ProcessSpec, SeatingState, Trajectory};
