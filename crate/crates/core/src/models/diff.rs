//! Model forwards recorded on a [`Tape`] for gradient computation.
//!
//! These mirror the eager forwards in the dense masked formulation; the two
//! routes are compared against each other in the tests.

use alloc::vec::Vec;

use super::weights::{GsiTWeights, MulTWeights, NaiveWeights, CROSS_PAIRS};
use crate::attn::{score_scale, EncoderWeights};
use crate::maskgen::{iem, materialize, pattern_of, Modality, SegmentLayout, StructureName};
use crate::numkit::{Tape, Var};
use crate::{Error, Result, Tensor2};

/// Leaves holding one encoder's parameters.
#[derive(Debug, Clone, Copy)]
pub struct EncoderVars {
    pub wq: Var,
    pub wk: Var,
    pub wv: Var,
    pub w1: Var,
    pub w2: Var,
    pub heads: usize,
}

impl EncoderVars {
    pub fn new(tape: &mut Tape, w: &EncoderWeights) -> Self {
        Self {
            wq: tape.leaf(w.wq.clone()),
            wk: tape.leaf(w.wk.clone()),
            wv: tape.leaf(w.wv.clone()),
            w1: tape.leaf(w.w1.clone()),
            w2: tape.leaf(w.w2.clone()),
            heads: w.heads(),
        }
    }

    /// In declaration order, matching [`EncoderWeights::arrays`].
    pub fn vars(&self) -> [Var; 5] {
        [self.wq, self.wk, self.wv, self.w1, self.w2]
    }

    /// `MLP ∘ attention` with optional additive mask.
    pub fn encode(&self, tape: &mut Tape, queries: Var, keys: Var, mask: Option<&Tensor2>) -> Result<Var> {
        let q = tape.matmul(queries, self.wq)?;
        let k = tape.matmul(keys, self.wk)?;
        let v = tape.matmul(keys, self.wv)?;
        let d = tape.value(q).cols();
        let h = d / self.heads;
        let scale = score_scale(h);
        let mut heads = Vec::with_capacity(self.heads);
        for l in 0..self.heads {
            let ql = tape.slice_cols(q, l * h, (l + 1) * h)?;
            let kl = tape.slice_cols(k, l * h, (l + 1) * h)?;
            let vl = tape.slice_cols(v, l * h, (l + 1) * h)?;
            let scores = tape.matmul_t(ql, kl)?;
            let scores = tape.scale(scores, scale);
            let g = tape.softmax_rows(scores, mask)?;
            heads.push(tape.matmul(g, vl)?);
        }
        let agg = if heads.len() == 1 {
            heads[0]
        } else {
            tape.concat_cols(&heads)?
        };
        let hidden = tape.matmul(agg, self.w1)?;
        let hidden = tape.relu(hidden);
        tape.matmul(hidden, self.w2)
    }
}

fn last_rows_concat(tape: &mut Tape, x: Var, layout: &SegmentLayout) -> Result<Var> {
    let mut rows = Vec::with_capacity(3);
    for m in Modality::ALL {
        let end = layout.range(m).end;
        rows.push(tape.slice_rows(x, end - 1, end)?);
    }
    tape.concat_cols(&rows)
}

#[derive(Debug, Clone, Copy)]
pub struct NaiveVars {
    pub encoder: EncoderVars,
    pub f: Var,
}

impl NaiveVars {
    pub fn new(tape: &mut Tape, w: &NaiveWeights) -> Self {
        Self {
            encoder: EncoderVars::new(tape, &w.encoder),
            f: tape.leaf((*w.f).clone()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GsiTVars {
    pub forward: EncoderVars,
    pub backward: EncoderVars,
    pub intra: EncoderVars,
    pub f: Var,
}

impl GsiTVars {
    pub fn new(tape: &mut Tape, w: &GsiTWeights) -> Self {
        Self {
            forward: EncoderVars::new(tape, &w.forward),
            backward: EncoderVars::new(tape, &w.backward),
            intra: EncoderVars::new(tape, &w.intra),
            f: tape.leaf((*w.f).clone()),
        }
    }
}

/// Leaves for an untied MulT; `cross` follows [`CROSS_PAIRS`].
#[derive(Debug, Clone)]
pub struct MulTVars {
    pub cross: [EncoderVars; 6],
    pub intra: [EncoderVars; 3],
    pub f: Var,
}

impl MulTVars {
    pub fn new(tape: &mut Tape, w: &MulTWeights) -> Self {
        let cross = CROSS_PAIRS.map(|(i, j)| EncoderVars::new(tape, w.cross(i, j)));
        let intra = Modality::ALL.map(|m| EncoderVars::new(tape, w.intra(m)));
        Self {
            cross,
            intra,
            f: tape.leaf((*w.f).clone()),
        }
    }

    fn cross(&self, i: Modality, j: Modality) -> &EncoderVars {
        let idx = CROSS_PAIRS.iter().position(|&p| p == (i, j)).expect("distinct");
        &self.cross[idx]
    }
}

/// Naive model prediction (`1 × out_dim`).
pub fn naive_prediction_on_tape(tape: &mut Tape, vars: &NaiveVars, v_m: Var, layout: &SegmentLayout) -> Result<Var> {
    let x = vars.encoder.encode(tape, v_m, v_m, None)?;
    let h = last_rows_concat(tape, x, layout)?;
    tape.matmul(h, vars.f)
}

/// GsiT prediction (`1 × out_dim`) using dense masks.
pub fn gsit_prediction_on_tape(
    tape: &mut Tape,
    vars: &GsiTVars,
    v_m: Var,
    layout: &SegmentLayout,
    structure: StructureName,
) -> Result<Var> {
    if structure == StructureName::Iem {
        return Err(Error::InvalidConfig(
            "the intra-enhancement pattern is not a fusion structure".into(),
        ));
    }
    let (fwd, bwd) = pattern_of(structure).streams();
    let fwd_mask = materialize(&fwd, layout);
    let bwd_mask = materialize(&bwd, layout);
    let a = vars.forward.encode(tape, v_m, v_m, Some(&fwd_mask))?;
    let b = vars.backward.encode(tape, v_m, v_m, Some(&bwd_mask))?;
    let fused = tape.concat_cols(&[a, b])?;
    let intra_mask = materialize(&iem(), layout);
    let x = vars.intra.encode(tape, fused, fused, Some(&intra_mask))?;
    let h = last_rows_concat(tape, x, layout)?;
    tape.matmul(h, vars.f)
}

/// MulT prediction (`1 × out_dim`) from the concatenated sequence.
pub fn mult_prediction_on_tape(tape: &mut Tape, vars: &MulTVars, v_m: Var, layout: &SegmentLayout) -> Result<Var> {
    let mut segments = [v_m; 3];
    for m in Modality::ALL {
        let r = layout.range(m);
        segments[m.index()] = tape.slice_rows(v_m, r.start, r.end)?;
    }
    let mut states = Vec::with_capacity(3);
    for i in Modality::ALL {
        let mut parts = [v_m; 2];
        for (slot, j) in parts.iter_mut().zip([i.forward_partner(), i.backward_partner()]) {
            *slot = vars
                .cross(i, j)
                .encode(tape, segments[i.index()], segments[j.index()], None)?;
        }
        let v_i = tape.concat_cols(&parts)?;
        let x = vars.intra[i.index()].encode(tape, v_i, v_i, None)?;
        states.push(tape.select_last_row(x)?);
    }
    let h = tape.concat_cols(&states)?;
    tape.matmul(h, vars.f)
}
