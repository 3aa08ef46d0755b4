//! Standardization, design assembly and the rank-one dual update.

mod design;
mod dual;
mod scaler;

pub use design::{validate_labels, ColumnOrigin, DesignMatrix};
pub(crate) use dual::spd_solve;
pub use dual::{
    candidate_score, naive_regularized_score, CandidateScorer, DualState, MIN_DENOMINATOR,
};
pub use scaler::{StandardScaler, MIN_SCALE};
