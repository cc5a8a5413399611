//! Block-sparse ("decomposed") execution of an interlaced-masked attention
//! stream, with FLOP and attention-map memory instrumentation.
//!
//! Projections run once on the full concatenated sequence. Each row block
//! then attends only to the concatenation of its allowed column blocks, so
//! denied blocks are never scored, scaled or aggregated. The result equals
//! the dense masked path because `-inf` entries contribute exact zeros.

mod meter;

use alloc::vec::Vec;

pub use meter::{flop_report, Counter, FlopCounts, FlopMeter, MemMeter, Phase, Stage};

use crate::attn::{self, EncoderWeights};
use crate::maskgen::{materialize, BlockPattern, Modality, SegmentLayout};
use crate::{Error, Result, Tensor2};

/// Row modality and the column blocks its softmax normalizes over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowGroup {
    pub row: Modality,
    /// Allowed column blocks in `t, v, a` order; never empty.
    pub cols: Vec<Modality>,
}

pub fn row_groups(pattern: &BlockPattern) -> Result<Vec<RowGroup>> {
    Modality::ALL
        .into_iter()
        .map(|row| {
            let cols = pattern.allowed_in_row(row);
            if cols.is_empty() {
                Err(Error::EmptyRowGroup { row: row.index() })
            } else {
                Ok(RowGroup { row, cols })
            }
        })
        .collect()
}

/// Output of one stream plus the per-group maps actually materialized.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamRun {
    /// `T_m × d`, after the MLP.
    pub output: Tensor2,
    /// `T_m × d` aggregation before the MLP.
    pub aggregated: Tensor2,
    /// Per row group, per head `T_i × Σ_j T_j` maps.
    pub maps: Vec<(RowGroup, Vec<Tensor2>)>,
}

/// Decomposed execution of `MLP ∘ attention` on `v_m` under `pattern`.
pub fn exec_stream(
    w: &EncoderWeights,
    v_m: &Tensor2,
    layout: &SegmentLayout,
    pattern: &BlockPattern,
    counter: &mut Counter<'_>,
    mem: &mut MemMeter,
) -> Result<StreamRun> {
    check_rows(v_m, layout)?;
    let groups = row_groups(pattern).map_err(|e| match e {
        Error::EmptyRowGroup { row } => Error::DegenerateRow {
            row: layout.offset(Modality::ALL[row]),
        },
        other => other,
    })?;
    let d = w.width();
    let tm = layout.total();
    let heads = w.heads() as u64;

    let q = v_m.matmul(&w.wq)?;
    let k = v_m.matmul(&w.wk)?;
    let v = v_m.matmul(&w.wv)?;
    counter.add(Phase::Qkv, 3 * tm * d * d);

    let mut aggregated = Tensor2::zeros(tm, d);
    let mut maps = Vec::with_capacity(groups.len());
    for group in groups {
        let rows = layout.range(group.row);
        let q_i = q.slice_rows(rows.start, rows.end)?;
        let k_blocks: Vec<Tensor2> = group
            .cols
            .iter()
            .map(|&j| {
                let r = layout.range(j);
                k.slice_rows(r.start, r.end)
            })
            .collect::<Result<_>>()?;
        let v_blocks: Vec<Tensor2> = group
            .cols
            .iter()
            .map(|&j| {
                let r = layout.range(j);
                v.slice_rows(r.start, r.end)
            })
            .collect::<Result<_>>()?;
        let k_g = Tensor2::concat_rows(&k_blocks.iter().collect::<Vec<_>>())?;
        let v_g = Tensor2::concat_rows(&v_blocks.iter().collect::<Vec<_>>())?;

        let group_maps = attn::head_maps(&q_i, &k_g, w.heads(), None, counter)?;
        let out = attn::aggregate_projected(&group_maps, &v_g, counter)?;
        for (local, r) in rows.clone().enumerate() {
            aggregated.row_mut(r).copy_from_slice(out.row(local));
        }
        for &j in &group.cols {
            mem.record_block(heads * (layout.len_of(group.row) * layout.len_of(j)) as u64);
        }
        maps.push((group, group_maps));
    }
    mem.dense_total = heads * (tm * tm) as u64;
    let output = attn::mlp(&aggregated, w, counter)?;
    Ok(StreamRun {
        output,
        aggregated,
        maps,
    })
}

/// Output of the dense masked path.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseRun {
    /// `T_m × d`, after the MLP.
    pub output: Tensor2,
    /// Per head `T_m × T_m` maps (zeros in denied blocks).
    pub maps: Vec<Tensor2>,
}

/// Reference path: full `T_m × T_m` scores plus the materialized additive mask.
pub fn dense_stream(
    w: &EncoderWeights,
    v_m: &Tensor2,
    layout: &SegmentLayout,
    pattern: &BlockPattern,
    counter: &mut Counter<'_>,
    mem: &mut MemMeter,
) -> Result<DenseRun> {
    check_rows(v_m, layout)?;
    let mask = materialize(pattern, layout);
    let tm = layout.total() as u64;
    let whole = w.heads() as u64 * tm * tm;
    mem.dense_total = whole;
    mem.record_block(whole);
    let att = attn::attend(w, v_m, v_m, Some(&mask), counter)?;
    let output = attn::mlp(&att.output, w, counter)?;
    Ok(DenseRun { output, maps: att.maps })
}

impl StreamRun {
    /// Group maps scattered back into per-head `T_m × T_m` matrices.
    pub fn full_maps(&self, layout: &SegmentLayout) -> Vec<Tensor2> {
        let tm = layout.total();
        let heads = self.maps.first().map_or(0, |(_, m)| m.len());
        let mut full = alloc::vec![Tensor2::zeros(tm, tm); heads];
        for (group, maps) in &self.maps {
            let rows = layout.range(group.row);
            let cols: Vec<usize> = group.cols.iter().flat_map(|&j| layout.range(j)).collect();
            for (l, m) in maps.iter().enumerate() {
                for (lr, r) in rows.clone().enumerate() {
                    for (lc, &c) in cols.iter().enumerate() {
                        full[l][(r, c)] = m[(lr, lc)];
                    }
                }
            }
        }
        full
    }
}

fn check_rows(v_m: &Tensor2, layout: &SegmentLayout) -> Result<()> {
    if v_m.rows() != layout.total() {
        return Err(Error::Shape {
            op: "layout rows",
            lhs: v_m.shape(),
            rhs: (layout.total(), v_m.cols()),
        });
    }
    Ok(())
}

/// Attention-map sizes of a decomposed stream, without running it.
pub fn memory_report(layout: &SegmentLayout, pattern: &BlockPattern, heads: usize) -> MemMeter {
    let l = heads as u64;
    let tm = layout.total() as u64;
    let mut mem = MemMeter {
        dense_total: l * tm * tm,
        ..MemMeter::default()
    };
    for (i, j) in pattern.allowed() {
        mem.record_block(l * (layout.len_of(i) * layout.len_of(j)) as u64);
    }
    mem
}
