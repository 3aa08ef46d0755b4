use crate::error::{Error, Result};

/// Mean of the per-class accuracies of the sign classifier. A prediction
/// of exactly zero counts as `+1`.
pub fn balanced_accuracy(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let (mut pos, mut neg, mut tp, mut tn) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &y) in predictions.iter().zip(labels) {
        let predicted_pos = p >= 0.0;
        if y > 0.0 {
            pos += 1;
            tp += usize::from(predicted_pos);
        } else {
            neg += 1;
            tn += usize::from(!predicted_pos);
        }
    }
    if pos == 0 || neg == 0 {
        return Err(Error::Metric(
            "balanced accuracy needs both classes in the labels".into(),
        ));
    }
    Ok(0.5 * (tp as f64 / pos as f64 + tn as f64 / neg as f64))
}

/// Mean and population standard deviation; `None` for an empty slice.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}
