use std::collections::BTreeSet;

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Below this sample size the iterative test conservatively flags nothing.
pub const GRUBBS_MIN_SAMPLES: usize = 7;

/// Two-sided Grubbs critical value for sample size `n` at significance
/// `alpha`, computed from the t-distribution closed form (no lookup table).
pub fn grubbs_critical_value(n: usize, alpha: f64) -> f64 {
    assert!(n >= 3, "grubbs needs n >= 3");
    let nf = n as f64;
    let alpha = alpha.clamp(1e-9, 0.5);
    let t = StudentsT::new(0.0, 1.0, nf - 2.0)
        .expect("valid dof")
        .inverse_cdf(1.0 - alpha / (2.0 * nf));
    (nf - 1.0) / nf.sqrt() * (t * t / (nf - 2.0 + t * t)).sqrt()
}

/// The Grubbs statistic `max |x - mean| / sd` and the index attaining it.
/// Returns `None` when the sample is degenerate (sd == 0) — constant data
/// has no outliers.
pub fn grubbs_statistic(values: &[f64]) -> Option<(usize, f64)> {
    let n = values.len();
    if n < 3 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let sd = var.sqrt();
    if sd <= f64::EPSILON * mean.abs().max(1.0) {
        return None;
    }
    values
        .iter()
        .enumerate()
        .map(|(i, x)| (i, (x - mean).abs() / sd))
        .max_by(|a, b| a.1.total_cmp(&b.1))
}

/// Iterative two-sided Grubbs test: repeatedly remove the most extreme value
/// while it exceeds the critical value at `alpha`. Returns the indices (into
/// the original slice) of the removed values. Samples smaller than
/// [`GRUBBS_MIN_SAMPLES`] — initially or after removals — are not tested.
pub fn grubbs_iterative(values: &[f64], alpha: f64) -> BTreeSet<usize> {
    let mut remaining: Vec<usize> = (0..values.len()).collect();
    let mut flagged = BTreeSet::new();
    loop {
        if remaining.len() < GRUBBS_MIN_SAMPLES {
            break;
        }
        let sample: Vec<f64> = remaining.iter().map(|&i| values[i]).collect();
        let Some((arg, g)) = grubbs_statistic(&sample) else {
            break;
        };
        if g > grubbs_critical_value(sample.len(), alpha) {
            flagged.insert(remaining.remove(arg));
        } else {
            break;
        }
    }
    flagged
}
