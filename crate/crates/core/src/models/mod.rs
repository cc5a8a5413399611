//! The three reference architectures and the weight-tying map.
//!
//! * naive: one unmasked self-attention encoder over the concatenated
//!   sequence.
//! * MulT: six cross-modal encoders (one per ordered modality pair) feeding
//!   three width-`2d` self-attention encoders; a forest of three trees.
//! * GsiT: one forward and one backward encoder run on the concatenated
//!   sequence under interlaced masks, then one width-`2d` encoder under the
//!   block-diagonal mask; a single shared tree.

mod diff;
mod forward;
mod weights;

use alloc::vec::Vec;

pub use diff::{
    gsit_prediction_on_tape, mult_prediction_on_tape, naive_prediction_on_tape, EncoderVars, GsiTVars, MulTVars,
    NaiveVars,
};
pub use forward::{
    gsit_forward, gsit_forward_instrumented, mult_forward, mult_forward_instrumented, naive_forward,
    naive_forward_instrumented, split_segments, Exec, Instruments,
};
pub use weights::{tie_weights, GsiTWeights, MulTWeights, NaiveWeights, ParamSet, CROSS_PAIRS};

use crate::maskgen::{SegmentLayout, StructureName};
use crate::{Error, Result, Tensor2};

/// Shape and structure of a fusion model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub layout: SegmentLayout,
    /// Model width `d` (per modality).
    pub d: usize,
    /// MLP hidden width of the fusion encoders; stage-2 encoders use `2p`.
    pub p: usize,
    pub heads: usize,
    pub out_dim: usize,
    pub structure: StructureName,
}

impl ModelConfig {
    pub fn new(layout: SegmentLayout, d: usize, p: usize, heads: usize) -> Result<Self> {
        let cfg = Self {
            layout,
            d,
            p,
            heads,
            out_dim: 1,
            structure: StructureName::Original,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_structure(mut self, structure: StructureName) -> Self {
        self.structure = structure;
        self
    }

    pub fn with_out_dim(mut self, out_dim: usize) -> Self {
        self.out_dim = out_dim;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.d == 0 || !self.d.is_multiple_of(self.heads) {
            return Err(Error::InvalidConfig(alloc::format!(
                "d = {} must be a positive multiple of heads = {}",
                self.d,
                self.heads
            )));
        }
        if self.p < self.d {
            return Err(Error::InvalidConfig(alloc::format!(
                "hidden width p = {} must be >= d = {}",
                self.p,
                self.d
            )));
        }
        if self.out_dim == 0 {
            return Err(Error::InvalidConfig("out_dim must be >= 1".into()));
        }
        Ok(())
    }
}

/// Result of a model forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput {
    /// `X_m`, length `out_dim`.
    pub prediction: Vec<f64>,
    /// Final state of each modality (`H_t, H_v, H_a`).
    pub states: [Vec<f64>; 3],
    /// Stage-1 features in concatenated-sequence row order (`T_m × 2d`; `T_m × d`
    /// for the naive model).
    pub fusion: Tensor2,
    /// Stage-2 features (`T_m × 2d`); absent for the naive model.
    pub intra: Option<Tensor2>,
    /// Stage-1 adjacency maps scattered into `T_m × T_m` per head: one list per
    /// stream (forward, backward). The naive model has a single stream.
    pub fusion_maps: Vec<Vec<Tensor2>>,
}

impl ModelOutput {
    /// `concat(H_t, H_v, H_a)`.
    pub fn concat_states(&self) -> Vec<f64> {
        self.states.iter().flatten().copied().collect()
    }
}
