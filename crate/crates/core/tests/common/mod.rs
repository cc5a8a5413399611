#![allow(dead_code)]

use gsit_core::models::ModelConfig;
use gsit_core::{Rng, SegmentLayout, Tensor2};

pub fn random_layout(rng: &mut Rng, max: usize) -> SegmentLayout {
    SegmentLayout::new(
        rng.range_inclusive(1, max),
        rng.range_inclusive(1, max),
        rng.range_inclusive(1, max),
    )
    .unwrap()
}

/// Random config with `d ∈ {4, 8}`, `L ∈ {1, 2}`, `p ∈ {d, 2d}`.
pub fn random_config(rng: &mut Rng, max_len: usize) -> ModelConfig {
    let layout = random_layout(rng, max_len);
    let d = [4, 8][rng.range_inclusive(0, 1)];
    let heads = rng.range_inclusive(1, 2);
    let p = d * rng.range_inclusive(1, 2);
    ModelConfig::new(layout, d, p, heads).unwrap()
}

pub fn sequence(rng: &mut Rng, cfg: &ModelConfig) -> Tensor2 {
    rng.normal_tensor(cfg.layout.total(), cfg.d, 1.0)
}

pub fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
