use crate::{Error, Result};

/// Population moments of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentStats {
    pub mean: f64,
    pub variance: f64,
    /// `m3 / m2^1.5`
    pub skewness: f64,
    /// Excess kurtosis, `m4 / m2² - 3`.
    pub kurtosis: f64,
}

/// Variance at or below which skewness and kurtosis are undefined.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

pub fn moments(values: &[f64]) -> Result<MomentStats> {
    if values.len() < 2 {
        return Err(Error::TooFewValues {
            needed: 2,
            got: values.len(),
        });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 <= DEGENERATE_VARIANCE {
        return Err(Error::DegenerateDistribution { variance: m2 });
    }
    Ok(MomentStats {
        mean,
        variance: m2,
        skewness: m3 / libm::pow(m2, 1.5),
        kurtosis: m4 / (m2 * m2) - 3.0,
    })
}
