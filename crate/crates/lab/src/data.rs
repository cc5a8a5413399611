//! Synthetic regression data that needs all three modalities.
//!
//! Each sample has a target `y ~ U(-1, 1)`. Modality `k` carries `y + δ_k`
//! on feature channel `k` at every timestep, where the offsets `δ_k` are
//! drawn per sample and sum to zero across the three modalities. Every entry
//! also gets `N(0, noise²)` noise. A single modality therefore sees `y`
//! blurred by its offset; averaging the three channels cancels the offsets.

use gsit_core::{Modality, Rng, SegmentLayout, Tensor2};

use crate::config::DataSection;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    /// `V_t, V_v, V_a`, each `T_i × d`.
    pub inputs: [Tensor2; 3],
    pub target: f64,
}

impl SyntheticSample {
    /// `V_m`, the three segments stacked in text, vision, audio order.
    pub fn concatenated(&self) -> Tensor2 {
        Tensor2::concat_rows(&[&self.inputs[0], &self.inputs[1], &self.inputs[2]]).expect("segments share a width")
    }
}

/// Feature channel that carries modality `m`'s view of the target.
pub fn signal_channel(m: Modality) -> usize {
    m.index()
}

/// Sample `index` of the dataset for `seed`; independent of every other index.
pub fn gen_sample(seed: u64, index: u64, layout: &SegmentLayout, d: usize, data: &DataSection) -> SyntheticSample {
    let mut rng = Rng::derive(seed, index);
    let target = rng.uniform(-1.0, 1.0);
    gen_with_target(&mut rng, target, layout, d, data)
}

/// Like [`gen_sample`] but with the target fixed by the caller.
pub fn gen_with_target(
    rng: &mut Rng,
    target: f64,
    layout: &SegmentLayout,
    d: usize,
    data: &DataSection,
) -> SyntheticSample {
    assert!(d >= 3, "one signal channel per modality needs d >= 3");
    let z = [(); 3].map(|_| rng.normal(0.0, data.nuisance));
    let mean = (z[0] + z[1] + z[2]) / 3.0;
    let inputs = Modality::ALL.map(|m| {
        let mut x = rng.normal_tensor(layout.len_of(m), d, data.noise);
        let shift = target + z[m.index()] - mean;
        for r in 0..x.rows() {
            x[(r, signal_channel(m))] += shift;
        }
        x
    });
    SyntheticSample { inputs, target }
}

pub fn gen_dataset(seed: u64, n: usize, layout: &SegmentLayout, d: usize, data: &DataSection) -> Vec<SyntheticSample> {
    (0..n as u64).map(|i| gen_sample(seed, i, layout, d, data)).collect()
}
