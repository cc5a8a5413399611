//! Closed-form operation, attention-memory and parameter counts.
//!
//! Counts use the same conventions as [`FlopMeter`](crate::blockexec::FlopMeter)
//! so measured and predicted numbers can be compared cell by cell.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::blockexec::{memory_report, FlopCounts, MemMeter, Phase, Stage};
use crate::maskgen::{iem, pattern_of, BlockPattern, Modality, SegmentLayout};
use crate::models::{ModelConfig, ParamSet, CROSS_PAIRS};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Naive,
    MulT,
    GsiT { decomposed: bool },
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Naive => "naive",
            ModelKind::MulT => "mult",
            ModelKind::GsiT { decomposed: true } => "gsit_decomposed",
            ModelKind::GsiT { decomposed: false } => "gsit_dense",
        }
    }
}

/// Predicted counts for one forward pass of one model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexityBreakdown {
    pub kind: ModelKind,
    pub counts: FlopCounts,
}

impl ComplexityBreakdown {
    pub fn total(&self) -> u64 {
        self.counts.total()
    }

    pub fn decomposed(&self) -> bool {
        matches!(self.kind, ModelKind::GsiT { decomposed: true } | ModelKind::MulT)
    }

    /// Roll-up into the classic step names: projection, map generation
    /// (scores, scaling and softmax), aggregation and MLP for both stages,
    /// plus the final projection.
    pub fn steps(&self) -> [(&'static str, u64); 9] {
        let c = &self.counts;
        let gen = |s| c.get(s, Phase::MapGen) + c.get(s, Phase::Scale) + c.get(s, Phase::Softmax);
        [
            ("qkv1", c.get(Stage::Fusion, Phase::Qkv)),
            ("attn1_gen", gen(Stage::Fusion)),
            ("attn1_agg", c.get(Stage::Fusion, Phase::Aggregate)),
            ("mlp1", c.get(Stage::Fusion, Phase::Mlp)),
            ("qkv2", c.get(Stage::Intra, Phase::Qkv)),
            ("attn2_gen", gen(Stage::Intra)),
            ("attn2_agg", c.get(Stage::Intra, Phase::Aggregate)),
            ("mlp2", c.get(Stage::Intra, Phase::Mlp)),
            ("final", c.get(Stage::Head, Phase::FinalProjection)),
        ]
    }
}

fn sum_products(layout: &SegmentLayout, blocks: &[(Modality, Modality)]) -> u64 {
    blocks
        .iter()
        .map(|&(i, j)| (layout.len_of(i) * layout.len_of(j)) as u64)
        .sum()
}

/// Σ over allowed blocks of `T_i T_j`.
fn allowed_products(layout: &SegmentLayout, pattern: &BlockPattern) -> u64 {
    sum_products(layout, &pattern.allowed())
}

/// Attention-layer counts for `rows_x_keys` score entries, `finite` of them
/// unmasked, at width `d`.
fn attention_cells(c: &mut FlopCounts, stage: Stage, d: u64, heads: u64, scored: u64, finite: u64) {
    c.add(stage, Phase::MapGen, scored * d);
    c.add(stage, Phase::Scale, heads * scored);
    c.add(stage, Phase::Softmax, 2 * heads * finite);
    c.add(stage, Phase::Aggregate, scored * d);
}

/// Exact per-phase counts of one forward pass.
pub fn flops_closed_form(cfg: &ModelConfig, kind: ModelKind) -> ComplexityBreakdown {
    let layout = &cfg.layout;
    let (d, p, l, out) = (cfg.d as u64, cfg.p as u64, cfg.heads as u64, cfg.out_dim as u64);
    let tm = layout.total() as u64;
    let squares = sum_products(layout, &Modality::ALL.map(|m| (m, m)));
    let mut c = FlopCounts::default();

    // Stage 2 (width 2d, hidden 2p) is the same per-modality self-attention
    // for MulT and decomposed GsiT.
    let intra = |c: &mut FlopCounts, decomposed: bool| {
        c.add(Stage::Intra, Phase::Qkv, 3 * tm * 4 * d * d);
        let scored = if decomposed { squares } else { tm * tm };
        attention_cells(c, Stage::Intra, 2 * d, l, scored, squares);
        c.add(Stage::Intra, Phase::Mlp, tm * 2 * (2 * d) * (2 * p));
    };

    match kind {
        ModelKind::Naive => {
            c.add(Stage::Fusion, Phase::Qkv, 3 * tm * d * d);
            attention_cells(&mut c, Stage::Fusion, d, l, tm * tm, tm * tm);
            c.add(Stage::Fusion, Phase::Mlp, tm * 2 * d * p);
            c.add(Stage::Head, Phase::FinalProjection, 3 * d * out);
        }
        ModelKind::MulT => {
            // Cross encoder (i, j): queries from T_i rows, keys and values from T_j rows.
            let pairs = sum_products(layout, &CROSS_PAIRS);
            let qkv: u64 = CROSS_PAIRS
                .iter()
                .map(|&(i, j)| (layout.len_of(i) + 2 * layout.len_of(j)) as u64 * d * d)
                .sum();
            c.add(Stage::Fusion, Phase::Qkv, qkv);
            attention_cells(&mut c, Stage::Fusion, d, l, pairs, pairs);
            // Two cross encoders per dominant modality, each over its T_i rows.
            c.add(Stage::Fusion, Phase::Mlp, 2 * tm * 2 * d * p);
            intra(&mut c, true);
            c.add(Stage::Head, Phase::FinalProjection, 6 * d * out);
        }
        ModelKind::GsiT { decomposed } => {
            let (fwd, bwd) = pattern_of(cfg.structure).streams();
            let allowed = allowed_products(layout, &fwd) + allowed_products(layout, &bwd);
            c.add(Stage::Fusion, Phase::Qkv, 2 * 3 * tm * d * d);
            let scored = if decomposed { allowed } else { 2 * tm * tm };
            attention_cells(&mut c, Stage::Fusion, d, l, scored, allowed);
            c.add(Stage::Fusion, Phase::Mlp, 2 * tm * 2 * d * p);
            intra(&mut c, decomposed);
            c.add(Stage::Head, Phase::FinalProjection, 6 * d * out);
        }
    }
    ComplexityBreakdown { kind, counts: c }
}

/// Outcome of a successful reconciliation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReconcileReport {
    pub cells_checked: usize,
    pub total: u64,
}

/// Exact per-cell comparison of measured against predicted counts.
pub fn reconcile(measured: &FlopCounts, predicted: &ComplexityBreakdown) -> Result<ReconcileReport> {
    let phases = measured.diff(&predicted.counts);
    if !phases.is_empty() {
        return Err(Error::Reconciliation { phases });
    }
    Ok(ReconcileReport {
        cells_checked: Stage::ALL.len() * Phase::ALL.len(),
        total: measured.total(),
    })
}

/// Attention-map sizes per stream, in the layout of
/// [`Instruments`](crate::models::Instruments).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SpaceBreakdown {
    pub fusion: [MemMeter; 2],
    pub intra: MemMeter,
}

fn separate_maps(blocks: impl IntoIterator<Item = u64>) -> MemMeter {
    let mut m = MemMeter::default();
    for b in blocks {
        m.record_block(b);
    }
    m.dense_total = m.block_sum;
    m
}

fn dense_map(layout: &SegmentLayout, heads: u64) -> MemMeter {
    let whole = heads * (layout.total() * layout.total()) as u64;
    MemMeter {
        dense_total: whole,
        block_sum: whole,
        block_peak: whole,
    }
}

pub fn space_closed_form(cfg: &ModelConfig, kind: ModelKind) -> SpaceBreakdown {
    let layout = &cfg.layout;
    let l = cfg.heads as u64;
    let block = |i: Modality, j: Modality| l * (layout.len_of(i) * layout.len_of(j)) as u64;
    match kind {
        ModelKind::Naive => SpaceBreakdown {
            fusion: [dense_map(layout, l), MemMeter::default()],
            intra: MemMeter::default(),
        },
        ModelKind::MulT => SpaceBreakdown {
            fusion: [
                separate_maps(Modality::ALL.map(|i| block(i, i.forward_partner()))),
                separate_maps(Modality::ALL.map(|i| block(i, i.backward_partner()))),
            ],
            intra: separate_maps(Modality::ALL.map(|i| block(i, i))),
        },
        ModelKind::GsiT { decomposed: false } => SpaceBreakdown {
            fusion: [dense_map(layout, l), dense_map(layout, l)],
            intra: dense_map(layout, l),
        },
        ModelKind::GsiT { decomposed: true } => {
            let (fwd, bwd) = pattern_of(cfg.structure).streams();
            SpaceBreakdown {
                fusion: [
                    memory_report(layout, &fwd, cfg.heads),
                    memory_report(layout, &bwd, cfg.heads),
                ],
                intra: memory_report(layout, &iem(), cfg.heads),
            }
        }
    }
}

/// The shared stage-1 attention term in its usual closed form,
/// `(T_t T_v + T_t T_a + T_v T_a)(4d + 4)`. An estimate, not an exact count
/// under the meter conventions.
pub fn attention1_reference_term(layout: &SegmentLayout, d: usize) -> u64 {
    let [t, v, a] = layout.lengths().map(|x| x as u64);
    (t * v + t * a + v * a) * (4 * d as u64 + 4)
}

/// Distinct-parameter counts; aliased encoders are counted once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamCount {
    /// One entry per distinct encoder; aliases are joined with `+`.
    pub per_encoder: Vec<(String, usize)>,
    /// All distinct encoder parameters (the fusion network, `f` excluded).
    pub fusion: usize,
    pub head: usize,
}

impl ParamCount {
    pub fn total(&self) -> usize {
        self.fusion + self.head
    }
}

pub fn params(weights: &impl ParamSet) -> ParamCount {
    let mut distinct: Vec<(String, *const crate::attn::EncoderWeights, usize)> = Vec::new();
    for (name, enc) in weights.encoders() {
        let ptr = alloc::sync::Arc::as_ptr(enc);
        match distinct.iter_mut().find(|(_, p, _)| *p == ptr) {
            Some(entry) => entry.0 = format!("{}+{}", entry.0, name),
            None => distinct.push((name, ptr, enc.param_count())),
        }
    }
    let fusion = distinct.iter().map(|(_, _, n)| n).sum();
    ParamCount {
        per_encoder: distinct.into_iter().map(|(n, _, c)| (n, c)).collect(),
        fusion,
        head: weights.head().len(),
    }
}

/// Parameter count of the fusion encoders, from the configuration alone.
pub fn params_closed_form(cfg: &ModelConfig, kind: ModelKind) -> usize {
    let (d, p) = (cfg.d, cfg.p);
    let narrow = 3 * d * d + 2 * d * p;
    let wide = 3 * (2 * d) * (2 * d) + 2 * (2 * d) * (2 * p);
    match kind {
        ModelKind::Naive => narrow,
        ModelKind::MulT => 6 * narrow + 3 * wide,
        ModelKind::GsiT { .. } => 2 * narrow + wide,
    }
}
