//! Moment statistics of model weights.

use gsit_core::models::ParamSet;
use gsit_core::numkit::{moments, MomentStats};
use gsit_core::Error;
use serde::Serialize;

/// Moments of one flattened parameter array (or of all parameters).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArrayStats {
    pub name: String,
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    /// `None` when the array is (numerically) constant.
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
    pub degenerate: bool,
}

impl ArrayStats {
    pub fn of(name: impl Into<String>, values: &[f64]) -> Self {
        let name = name.into();
        let count = values.len();
        match moments(values) {
            Ok(MomentStats {
                mean,
                variance,
                skewness,
                kurtosis,
            }) => Self {
                name,
                count,
                mean,
                variance,
                skewness: Some(skewness),
                kurtosis: Some(kurtosis),
                degenerate: false,
            },
            Err(e) => {
                let mean = if count == 0 {
                    0.0
                } else {
                    values.iter().sum::<f64>() / count as f64
                };
                let variance = match e {
                    Error::DegenerateDistribution { variance } => variance,
                    _ => 0.0,
                };
                Self {
                    name,
                    count,
                    mean,
                    variance,
                    skewness: None,
                    kurtosis: None,
                    degenerate: true,
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightReport {
    /// One entry per encoder, in declaration order.
    pub encoders: Vec<ArrayStats>,
    /// All encoder parameters together (the final projection excluded).
    pub overall: ArrayStats,
}

impl WeightReport {
    pub fn degenerate(&self) -> Vec<&str> {
        self.encoders
            .iter()
            .filter(|s| s.degenerate)
            .map(|s| s.name.as_str())
            .collect()
    }
}

pub fn weight_report(weights: &impl ParamSet) -> WeightReport {
    let mut all = Vec::new();
    let encoders = weights
        .encoders()
        .into_iter()
        .map(|(name, enc)| {
            let flat = enc.flatten();
            all.extend_from_slice(&flat);
            ArrayStats::of(name, &flat)
        })
        .collect();
    WeightReport {
        encoders,
        overall: ArrayStats::of("all", &all),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use gsit_core::attn::EncoderWeights;
    use gsit_core::models::{GsiTWeights, ModelConfig, NaiveWeights};
    use gsit_core::{Rng, SegmentLayout, Tensor2};

    fn cfg() -> ModelConfig {
        ModelConfig::new(SegmentLayout::new(2, 2, 2).unwrap(), 8, 16, 2).unwrap()
    }

    #[test]
    fn zero_encoder_is_flagged() {
        let enc = EncoderWeights::zeros(8, 16, 2).unwrap();
        let w = NaiveWeights::new(enc, Tensor2::zeros(24, 1)).unwrap();
        let r = weight_report(&w);
        assert_eq!(r.degenerate(), vec!["encoder"]);
        assert_eq!(r.encoders[0].skewness, None);
        assert_eq!(r.encoders[0].mean, 0.0);
    }

    #[test]
    fn small_normal_init_moments() {
        let w = GsiTWeights::random(&cfg(), &mut Rng::new(11), 0.02).unwrap();
        let r = weight_report(&w);
        assert!(r.overall.mean.abs() < 0.005);
        assert!((r.overall.variance / 4e-4 - 1.0).abs() < 0.2);
        for s in &r.encoders {
            assert!(s.mean.abs() < 0.005, "{s:?}");
            assert!((s.variance / 4e-4 - 1.0).abs() < 0.2, "{s:?}");
        }
    }

    #[test]
    fn fields_delegate_to_moments() {
        let w = GsiTWeights::random(&cfg(), &mut Rng::new(3), 0.1).unwrap();
        let r = weight_report(&w);
        let m = moments(&w.intra.flatten()).unwrap();
        let s = &r.encoders[2];
        assert_eq!(s.name, "intra");
        assert_eq!((s.mean, s.variance), (m.mean, m.variance));
        assert_eq!((s.skewness, s.kurtosis), (Some(m.skewness), Some(m.kurtosis)));
    }
}
