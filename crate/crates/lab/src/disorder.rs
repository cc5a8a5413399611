//! Information-disorder demonstrator.
//!
//! Compares a base pattern against a modified one that opens extra column
//! blocks in some row blocks. On the blocks both allow (the shared
//! sub-block), the modified map is the base map scaled down by the mass that
//! leaks to the extra blocks; renormalizing over the shared columns recovers
//! the base map exactly.

use gsit_core::attn::{self, EncoderWeights};
use gsit_core::maskgen::{materialize, pattern_of};
use gsit_core::{BlockPattern, Modality, Rng, SegmentLayout, StructureName};
use serde::Serialize;

use crate::Result;

/// Shared-block deviation above which disorder counts as observed.
pub const DEVIATION_FLOOR: f64 = 1e-3;
/// Tolerance of the renormalization identity.
pub const IDENTITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisorderReport {
    pub seed: u64,
    pub layout: [usize; 3],
    pub d: usize,
    pub heads: usize,
    /// Per row block `t, v, a`: max |G − G′| over the columns the base
    /// pattern allows in that row block.
    pub row_deviation: [f64; 3],
    /// Max of `row_deviation`.
    pub shared_deviation: f64,
    /// Max |renormalize(G′ over the base columns) − G|.
    pub identity_residual: f64,
    pub disorder: bool,
    pub identity_holds: bool,
}

/// The forward fusion pattern, with text rows additionally allowed to read
/// the audio block.
pub fn modified_forward() -> (BlockPattern, BlockPattern) {
    let (base, _) = pattern_of(StructureName::Original).streams();
    let mut grid = base.grid();
    grid[Modality::Text.index()][Modality::Audio.index()] = true;
    (base, BlockPattern::new(grid).expect("nonempty"))
}

/// Random weights and inputs for `seed`, compared under the standard pair.
pub fn disorder_demo(seed: u64, layout: &SegmentLayout, d: usize, heads: usize) -> Result<DisorderReport> {
    let (base, modified) = modified_forward();
    disorder_compare(seed, layout, d, heads, &base, &modified)
}

/// `modified` must allow everything `base` allows.
pub fn disorder_compare(
    seed: u64,
    layout: &SegmentLayout,
    d: usize,
    heads: usize,
    base: &BlockPattern,
    modified: &BlockPattern,
) -> Result<DisorderReport> {
    let mut rng = Rng::new(seed);
    let w = EncoderWeights::random(&mut rng, d, d, heads, 1.0)?;
    let v_m = rng.normal_tensor(layout.total(), d, 1.0);
    let g = attn::generate(&w, &v_m, &v_m, Some(&materialize(base, layout)))?;
    let g2 = attn::generate(&w, &v_m, &v_m, Some(&materialize(modified, layout)))?;

    let mut row_deviation = [0.0f64; 3];
    let mut identity_residual = 0.0f64;
    for (a, b) in g.iter().zip(&g2) {
        for i in Modality::ALL {
            let cols: Vec<usize> = base
                .allowed_in_row(i)
                .into_iter()
                .flat_map(|j| layout.range(j))
                .collect();
            for r in layout.range(i) {
                let mass: f64 = cols.iter().map(|&c| b[(r, c)]).sum();
                for &c in &cols {
                    let dev = (a[(r, c)] - b[(r, c)]).abs();
                    row_deviation[i.index()] = row_deviation[i.index()].max(dev);
                    identity_residual = identity_residual.max((b[(r, c)] / mass - a[(r, c)]).abs());
                }
            }
        }
    }
    let shared_deviation = row_deviation.iter().copied().fold(0.0, f64::max);
    Ok(DisorderReport {
        seed,
        layout: layout.lengths(),
        d,
        heads,
        row_deviation,
        shared_deviation,
        identity_residual,
        disorder: shared_deviation > DEVIATION_FLOOR,
        identity_holds: identity_residual <= IDENTITY_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn opening_the_audio_block_disturbs_text_rows_only() {
        let layout = SegmentLayout::new(3, 4, 5).unwrap();
        for seed in 1..=50 {
            let r = disorder_demo(seed, &layout, 8, 1).unwrap();
            assert!(r.row_deviation[0] > DEVIATION_FLOOR, "seed {seed}: {r:?}");
            assert_eq!(r.row_deviation[1], 0.0);
            assert_eq!(r.row_deviation[2], 0.0);
            assert!(r.identity_holds, "seed {seed}: {}", r.identity_residual);
        }
    }

    #[test]
    fn identical_patterns_give_zero_deviation() {
        let layout = SegmentLayout::new(3, 4, 5).unwrap();
        let (base, _) = modified_forward();
        let r = disorder_compare(4, &layout, 8, 2, &base, &base).unwrap();
        assert_eq!(r.shared_deviation, 0.0);
        assert!(!r.disorder);
        assert!(r.identity_holds);
    }
}
