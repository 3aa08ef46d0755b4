use crate::error::{Error, Result};

/// Number of uniform draws needed so that their maximum is in the top
/// `top_fraction` of a set with probability at least `1 - failure_prob`:
/// `⌈ln(failure_prob) / ln(1 - top_fraction)⌉`.
pub fn sample_size(failure_prob: f64, top_fraction: f64) -> Result<usize> {
    let open_unit = |v: f64| v > 0.0 && v < 1.0;
    if !open_unit(failure_prob) || !open_unit(top_fraction) {
        return Err(Error::Parameter(format!(
            "failure probability and top fraction must lie in (0, 1), got {failure_prob} and {top_fraction}"
        )));
    }
    let ratio = failure_prob.ln() / (1.0 - top_fraction).ln();
    // Guard against ln round-off pushing an exact integer just above itself.
    let rounded = ratio.round();
    let n = if (ratio - rounded).abs() < 1e-9 {
        rounded
    } else {
        ratio.ceil()
    };
    Ok((n as usize).max(1))
}
