use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Below this sample size the test conservatively reports [`SkewDirection::NotLeft`].
pub const SKEW_MIN_SAMPLES: usize = 20;

/// Outcome of the skewness-direction test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkewDirection {
    /// The distribution has a significant heavy low-side tail.
    Left,
    /// Symmetric, right-skewed, or too small a sample to tell.
    NotLeft,
}

/// Test whether a sample is left-skewed at significance `alpha`.
///
/// A likelihood-ratio (G) goodness-of-fit test compares the counts below and
/// above the mean against the 50/50 expectation; the sample is called left
/// iff that test rejects at `alpha` *and* the third moment says the longer
/// tail is the low side (sample skewness < 0).
pub fn skew_direction(values: &[f64], alpha: f64) -> SkewDirection {
    let n = values.len();
    if n < SKEW_MIN_SAMPLES {
        return SkewDirection::NotLeft;
    }
    let alpha = alpha.clamp(1e-9, 0.5);
    let mean = values.iter().sum::<f64>() / n as f64;
    let below = values.iter().filter(|&&x| x < mean).count() as f64;
    let above = n as f64 - below;

    let expected = n as f64 / 2.0;
    let term = |observed: f64| {
        if observed <= 0.0 {
            0.0
        } else {
            observed * (observed / expected).ln()
        }
    };
    let g = 2.0 * (term(below) + term(above));
    let critical = ChiSquared::new(1.0).expect("df 1").inverse_cdf(1.0 - alpha);
    if g <= critical {
        return SkewDirection::NotLeft;
    }

    let m2 = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    let m3 = values.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n as f64;
    if m2 <= 0.0 {
        return SkewDirection::NotLeft;
    }
    if m3 / m2.powf(1.5) < 0.0 {
        SkewDirection::Left
    } else {
        SkewDirection::NotLeft
    }
}
