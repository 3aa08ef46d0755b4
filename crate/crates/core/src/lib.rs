//! L2-regularized greedy subset selection for hypothesis transfer learning.
//!
//! A target classifier is fit as a sparse linear combination of target
//! features and the predictions of pre-trained source hypotheses. Columns
//! are added greedily using rank-one updates of an `m×m` dual inverse, so a
//! step costs `O(m²)` per scored candidate.

pub mod baselines;
pub mod data;
pub mod error;
pub mod harness;
pub mod math;
pub mod oracle;
pub mod selector;

pub use error::{Error, Result};
