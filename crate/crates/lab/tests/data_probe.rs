use gsit_core::{Modality, SegmentLayout};
use gsit_lab::config::DataSection;
use gsit_lab::data::{gen_dataset, signal_channel, SyntheticSample};
use nalgebra::{DMatrix, DVector};

const N: usize = 2000;
const D: usize = 8;

/// Fraction of target variance explained by an ordinary least squares fit
/// with intercept.
fn r_squared(features: &[Vec<f64>], y: &[f64]) -> f64 {
    let k = features[0].len() + 1;
    let x = DMatrix::from_fn(y.len(), k, |i, j| if j == 0 { 1.0 } else { features[i][j - 1] });
    let y = DVector::from_column_slice(y);
    let beta = x.clone().svd(true, true).solve(&y, 1e-12).unwrap();
    let resid = &y - &x * beta;
    let mean = y.mean();
    let total: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    1.0 - resid.norm_squared() / total
}

fn last_row(s: &SyntheticSample, m: Modality) -> Vec<f64> {
    let x = &s.inputs[m.index()];
    (0..D).map(|c| x[(x.rows() - 1, c)]).collect()
}

fn dataset() -> Vec<SyntheticSample> {
    let layout = SegmentLayout::new(4, 5, 6).unwrap();
    gen_dataset(11, N, &layout, D, &DataSection::default())
}

#[test]
fn one_modality_is_not_enough() {
    let samples = dataset();
    let y: Vec<f64> = samples.iter().map(|s| s.target).collect();
    for m in Modality::ALL {
        let feats: Vec<Vec<f64>> = samples.iter().map(|s| last_row(s, m)).collect();
        let r2 = r_squared(&feats, &y);
        assert!(r2 < 0.6, "{m}: R² = {r2}");
        assert!(r2 > 0.2, "{m}: signal missing, R² = {r2}");
    }
}

#[test]
fn three_channel_average_recovers_target() {
    let samples = dataset();
    let y: Vec<f64> = samples.iter().map(|s| s.target).collect();
    let feats: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| {
            let avg = Modality::ALL
                .iter()
                .map(|&m| last_row(s, m)[signal_channel(m)])
                .sum::<f64>()
                / 3.0;
            vec![avg]
        })
        .collect();
    let r2 = r_squared(&feats, &y);
    assert!(r2 > 0.9, "R² = {r2}");
}

#[test]
fn targets_cover_the_unit_interval() {
    let samples = dataset();
    let y: Vec<f64> = samples.iter().map(|s| s.target).collect();
    assert!(y.iter().all(|v| (-1.0..=1.0).contains(v)));
    let mean = y.iter().sum::<f64>() / N as f64;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / N as f64;
    assert!(mean.abs() < 0.05, "mean {mean}");
    assert!((var - 1.0 / 3.0).abs() < 0.03, "variance {var}");
}
