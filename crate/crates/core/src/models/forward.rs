use alloc::vec;
use alloc::vec::Vec;

use super::weights::{GsiTWeights, MulTWeights, NaiveWeights};
use super::{ModelConfig, ModelOutput};
use crate::attn::{self, EncoderWeights};
use crate::blockexec::{self, Counter, FlopMeter, MemMeter, Phase, Stage};
use crate::maskgen::{iem, pattern_of, BlockPattern, Modality, SegmentLayout, StructureName};
use crate::{Error, Result, Tensor2};

/// How masked streams are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Exec {
    /// Full `T_m × T_m` scores plus the additive mask.
    Dense,
    /// Block-sparse: only allowed blocks are scored.
    Decomposed,
}

/// Meters for one forward pass.
#[derive(Debug, Clone, Default)]
pub struct Instruments {
    pub flops: FlopMeter,
    /// Stage-1 attention maps, per stream (forward ring, backward ring).
    pub fusion: [MemMeter; 2],
    pub intra: MemMeter,
}

impl Instruments {
    pub fn new() -> Self {
        Self::default()
    }
}

/// `Split`: the three modality segments of a concatenated sequence.
pub fn split_segments(v_m: &Tensor2, layout: &SegmentLayout) -> Result<[Tensor2; 3]> {
    check_sequence(v_m, layout, v_m.cols())?;
    let seg = |m: Modality| {
        let r = layout.range(m);
        v_m.slice_rows(r.start, r.end)
    };
    Ok([seg(Modality::Text)?, seg(Modality::Vision)?, seg(Modality::Audio)?])
}

fn check_sequence(v_m: &Tensor2, layout: &SegmentLayout, d: usize) -> Result<()> {
    if v_m.rows() != layout.total() || v_m.cols() != d {
        return Err(Error::Shape {
            op: "multimodal sequence",
            lhs: v_m.shape(),
            rhs: (layout.total(), d),
        });
    }
    Ok(())
}

/// `[-1]` of each segment.
fn last_rows(x: &Tensor2, layout: &SegmentLayout) -> [Vec<f64>; 3] {
    Modality::ALL.map(|m| x.row(layout.range(m).end - 1).to_vec())
}

fn project_head(states: &[Vec<f64>; 3], f: &Tensor2, flops: &mut FlopMeter) -> Result<Vec<f64>> {
    let concat: Vec<f64> = states.iter().flatten().copied().collect();
    let x = Tensor2::new(1, concat.len(), concat)?;
    let out = x.matmul(f)?;
    flops.add(Stage::Head, Phase::FinalProjection, (x.cols() * f.cols()) as u64);
    Ok(out.into_data())
}

/// Masked self-attention stream over the concatenated sequence; returns the
/// encoder output and per-head `T_m × T_m` maps.
fn masked_stream(
    w: &EncoderWeights,
    x: &Tensor2,
    layout: &SegmentLayout,
    pattern: &BlockPattern,
    exec: Exec,
    counter: &mut Counter<'_>,
    mem: &mut MemMeter,
) -> Result<(Tensor2, Vec<Tensor2>)> {
    match exec {
        Exec::Dense => {
            let run = blockexec::dense_stream(w, x, layout, pattern, counter, mem)?;
            Ok((run.output, run.maps))
        }
        Exec::Decomposed => {
            let run = blockexec::exec_stream(w, x, layout, pattern, counter, mem)?;
            let maps = run.full_maps(layout);
            Ok((run.output, maps))
        }
    }
}

/// Naive single-graph model: unmasked attention over the whole sequence.
pub fn naive_forward(w: &NaiveWeights, v_m: &Tensor2, layout: &SegmentLayout) -> Result<ModelOutput> {
    naive_forward_instrumented(w, v_m, layout, &mut Instruments::new())
}

pub fn naive_forward_instrumented(
    w: &NaiveWeights,
    v_m: &Tensor2,
    layout: &SegmentLayout,
    inst: &mut Instruments,
) -> Result<ModelOutput> {
    check_sequence(v_m, layout, w.encoder.width())?;
    inst.flops.begin_pass();
    let (fusion, maps) = {
        let mut counter = Counter::on(&mut inst.flops, Stage::Fusion);
        masked_stream(
            &w.encoder,
            v_m,
            layout,
            &BlockPattern::all_allowed(),
            Exec::Dense,
            &mut counter,
            &mut inst.fusion[0],
        )?
    };
    let states = last_rows(&fusion, layout);
    let prediction = project_head(&states, &w.f, &mut inst.flops)?;
    Ok(ModelOutput {
        prediction,
        states,
        fusion,
        intra: None,
        fusion_maps: vec![maps],
    })
}

/// MulT forest on separate modality sequences `(V_t, V_v, V_a)`.
pub fn mult_forward(w: &MulTWeights, inputs: &[Tensor2; 3]) -> Result<ModelOutput> {
    mult_forward_instrumented(w, inputs, &mut Instruments::new())
}

pub fn mult_forward_instrumented(
    w: &MulTWeights,
    inputs: &[Tensor2; 3],
    inst: &mut Instruments,
) -> Result<ModelOutput> {
    let d = w.width();
    for x in inputs {
        if x.cols() != d {
            return Err(Error::Shape {
                op: "mult input",
                lhs: x.shape(),
                rhs: (x.rows(), d),
            });
        }
    }
    let layout = SegmentLayout::from_lengths(inputs.each_ref().map(Tensor2::rows))?;
    let tm = layout.total();
    let heads = w.cross(Modality::Text, Modality::Vision).heads();
    inst.flops.begin_pass();

    let mut full_maps = vec![vec![Tensor2::zeros(tm, tm); heads]; 2];
    let mut vbar = Vec::with_capacity(3);
    let mut intra_out = Vec::with_capacity(3);
    for i in Modality::ALL {
        let partners = [i.forward_partner(), i.backward_partner()];
        let mut parts = Vec::with_capacity(2);
        for (stream, j) in partners.into_iter().enumerate() {
            let enc = w.cross(i, j);
            let mut counter = Counter::on(&mut inst.flops, Stage::Fusion);
            let att = attn::attend(enc, &inputs[i.index()], &inputs[j.index()], None, &mut counter)?;
            parts.push(attn::mlp(&att.output, enc, &mut counter)?);
            inst.fusion[stream].record_block((heads * layout.len_of(i) * layout.len_of(j)) as u64);
            for (l, g) in att.maps.iter().enumerate() {
                for (lr, r) in layout.range(i).enumerate() {
                    for (lc, c) in layout.range(j).enumerate() {
                        full_maps[stream][l][(r, c)] = g[(lr, lc)];
                    }
                }
            }
        }
        let v_i = Tensor2::concat_cols(&[&parts[0], &parts[1]])?;
        let enc = w.intra(i);
        let mut counter = Counter::on(&mut inst.flops, Stage::Intra);
        intra_out.push(attn::encode_counted(enc, &v_i, &v_i, None, &mut counter)?);
        inst.intra
            .record_block((enc.heads() * layout.len_of(i) * layout.len_of(i)) as u64);
        vbar.push(v_i);
    }
    // Every MulT map is materialized on its own; nothing is padded.
    for m in inst.fusion.iter_mut().chain(core::iter::once(&mut inst.intra)) {
        m.dense_total = m.block_sum;
    }

    let fusion = Tensor2::concat_rows(&vbar.iter().collect::<Vec<_>>())?;
    let intra = Tensor2::concat_rows(&intra_out.iter().collect::<Vec<_>>())?;
    let states = last_rows(&intra, &layout);
    let prediction = project_head(&states, &w.f, &mut inst.flops)?;
    Ok(ModelOutput {
        prediction,
        states,
        fusion,
        intra: Some(intra),
        fusion_maps: full_maps,
    })
}

/// GsiT all-modal-in-one fusion on the concatenated sequence (dense masks).
pub fn gsit_forward(
    w: &GsiTWeights,
    v_m: &Tensor2,
    layout: &SegmentLayout,
    structure: StructureName,
) -> Result<ModelOutput> {
    gsit_forward_instrumented(w, v_m, layout, structure, Exec::Dense, &mut Instruments::new())
}

pub fn gsit_forward_instrumented(
    w: &GsiTWeights,
    v_m: &Tensor2,
    layout: &SegmentLayout,
    structure: StructureName,
    exec: Exec,
    inst: &mut Instruments,
) -> Result<ModelOutput> {
    if structure == StructureName::Iem {
        return Err(Error::InvalidConfig(
            "the intra-enhancement pattern is not a fusion structure".into(),
        ));
    }
    check_sequence(v_m, layout, w.width())?;
    inst.flops.begin_pass();
    let (fwd, bwd) = pattern_of(structure).streams();

    let mut outs = Vec::with_capacity(2);
    let mut maps = Vec::with_capacity(2);
    for (stream, (pattern, enc)) in [(fwd, &w.forward), (bwd, &w.backward)].into_iter().enumerate() {
        let mut counter = Counter::on(&mut inst.flops, Stage::Fusion);
        let (out, m) = masked_stream(enc, v_m, layout, &pattern, exec, &mut counter, &mut inst.fusion[stream])?;
        outs.push(out);
        maps.push(m);
    }
    let fusion = Tensor2::concat_cols(&[&outs[0], &outs[1]])?;
    let intra = {
        let mut counter = Counter::on(&mut inst.flops, Stage::Intra);
        masked_stream(&w.intra, &fusion, layout, &iem(), exec, &mut counter, &mut inst.intra)?.0
    };
    let states = last_rows(&intra, layout);
    let prediction = project_head(&states, &w.f, &mut inst.flops)?;
    Ok(ModelOutput {
        prediction,
        states,
        fusion,
        intra: Some(intra),
        fusion_maps: maps,
    })
}

impl ModelConfig {
    /// Checks that `v_m` matches this configuration's layout and width.
    pub fn check_sequence(&self, v_m: &Tensor2) -> Result<()> {
        check_sequence(v_m, &self.layout, self.d)
    }
}
