mod common;

use common::{random_config, random_layout, sequence};
use gsit_core::attn::EncoderWeights;
use gsit_core::blockexec::{self, flop_report, Counter, FlopMeter, MemMeter, Phase, Stage};
use gsit_core::complexity::{flops_closed_form, params, params_closed_form, reconcile, space_closed_form, ModelKind};
use gsit_core::maskgen::{pattern_of, Patterns};
use gsit_core::models::{
    gsit_forward_instrumented, mult_forward_instrumented, naive_forward_instrumented, split_segments, Exec,
    GsiTWeights, Instruments, ModelConfig, MulTWeights, NaiveWeights,
};
use gsit_core::numkit::max_abs_diff;
use gsit_core::{Modality, Rng, SegmentLayout, StructureName};

fn stream_patterns(s: StructureName) -> Vec<gsit_core::BlockPattern> {
    match pattern_of(s) {
        Patterns::Pair { forward, backward } => vec![forward, backward],
        Patterns::Single(p) => vec![p],
    }
}

#[test]
fn block_execution_equals_dense_masked_execution() {
    let mut worst: f64 = 0.0;
    for s in StructureName::ALL {
        for pattern in stream_patterns(s) {
            for seed in 0..50u64 {
                let mut rng = Rng::new(seed);
                let cfg = random_config(&mut rng, 8);
                let w = EncoderWeights::random(&mut rng, cfg.d, cfg.p, cfg.heads, 0.5).unwrap();
                let v_m = sequence(&mut rng, &cfg);
                let mut mem = MemMeter::default();
                let dense =
                    blockexec::dense_stream(&w, &v_m, &cfg.layout, &pattern, &mut Counter::off(), &mut mem).unwrap();
                let blocks =
                    blockexec::exec_stream(&w, &v_m, &cfg.layout, &pattern, &mut Counter::off(), &mut mem).unwrap();
                worst = worst.max(max_abs_diff(&dense.output, &blocks.output));
                for (a, b) in dense.maps.iter().zip(blocks.full_maps(&cfg.layout)) {
                    worst = worst.max(max_abs_diff(a, &b));
                }
            }
        }
    }
    assert!(worst <= 1e-12, "{worst}");
}

fn measured(cfg: &ModelConfig, kind: ModelKind, seed: u64) -> Instruments {
    let mut rng = Rng::new(seed);
    let v_m = sequence(&mut rng, cfg);
    let mut inst = Instruments::new();
    match kind {
        ModelKind::Naive => {
            let w = NaiveWeights::random(cfg, &mut rng, 0.3).unwrap();
            naive_forward_instrumented(&w, &v_m, &cfg.layout, &mut inst).unwrap();
        }
        ModelKind::MulT => {
            let w = MulTWeights::random(cfg, &mut rng, 0.3).unwrap();
            let segs = split_segments(&v_m, &cfg.layout).unwrap();
            mult_forward_instrumented(&w, &segs, &mut inst).unwrap();
        }
        ModelKind::GsiT { decomposed } => {
            let w = GsiTWeights::random(cfg, &mut rng, 0.3).unwrap();
            let exec = if decomposed { Exec::Decomposed } else { Exec::Dense };
            gsit_forward_instrumented(&w, &v_m, &cfg.layout, cfg.structure, exec, &mut inst).unwrap();
        }
    }
    inst
}

const KINDS: [ModelKind; 4] = [
    ModelKind::Naive,
    ModelKind::MulT,
    ModelKind::GsiT { decomposed: true },
    ModelKind::GsiT { decomposed: false },
];

#[test]
fn measured_flops_reconcile_with_closed_form() {
    for seed in 0..10u64 {
        let mut rng = Rng::new(seed);
        let structure = [
            StructureName::Original,
            StructureName::Structure1,
            StructureName::Structure2,
            StructureName::Structure3,
            StructureName::SelfOnly,
        ][rng.range_inclusive(0, 4)];
        let cfg = random_config(&mut rng, 9)
            .with_structure(structure)
            .with_out_dim(rng.range_inclusive(1, 3));
        for kind in KINDS {
            let inst = measured(&cfg, kind, seed);
            let counts = flop_report(&inst.flops).unwrap();
            reconcile(&counts, &flops_closed_form(&cfg, kind)).unwrap();
        }
    }
}

#[test]
fn decomposed_gsit_costs_exactly_what_mult_costs() {
    for seed in 0..5u64 {
        let mut rng = Rng::new(40 + seed);
        let cfg = random_config(&mut rng, 12);
        let m = flop_report(&measured(&cfg, ModelKind::MulT, seed).flops).unwrap();
        let g = flop_report(&measured(&cfg, ModelKind::GsiT { decomposed: true }, seed).flops).unwrap();
        assert_eq!(m, g);
        assert_eq!(m.total(), g.total());
        let dense = flop_report(&measured(&cfg, ModelKind::GsiT { decomposed: false }, seed).flops).unwrap();
        assert!(dense.total() > g.total());
        assert!(dense.get(Stage::Fusion, Phase::MapGen) > g.get(Stage::Fusion, Phase::MapGen));
    }
}

#[test]
fn mult_stage_one_projection_count() {
    let cfg = ModelConfig::new(SegmentLayout::new(2, 3, 4).unwrap(), 8, 16, 1).unwrap();
    let m = flop_report(&measured(&cfg, ModelKind::MulT, 0).flops).unwrap();
    assert_eq!(m.get(Stage::Fusion, Phase::Qkv), 6 * 9 * 64);
}

#[test]
fn meters_reject_a_second_pass() {
    let cfg = ModelConfig::new(SegmentLayout::new(2, 2, 2).unwrap(), 4, 4, 1).unwrap();
    let mut rng = Rng::new(0);
    let w = GsiTWeights::random(&cfg, &mut rng, 0.3).unwrap();
    let v_m = sequence(&mut rng, &cfg);
    let mut inst = Instruments::new();
    for _ in 0..2 {
        gsit_forward_instrumented(&w, &v_m, &cfg.layout, cfg.structure, Exec::Decomposed, &mut inst).unwrap();
    }
    assert!(flop_report(&inst.flops).is_err());
    inst.flops.reset();
    assert!(flop_report(&FlopMeter::new()).is_err());
}

#[test]
fn memory_meters_match_closed_form_and_mult() {
    for seed in 0..20u64 {
        let mut rng = Rng::new(seed);
        let cfg = random_config(&mut rng, 12);
        let tm = cfg.layout.total() as u64;
        let l = cfg.heads as u64;
        for kind in KINDS {
            let inst = measured(&cfg, kind, seed);
            let space = space_closed_form(&cfg, kind);
            assert_eq!(inst.fusion, space.fusion, "{kind:?}");
            assert_eq!(inst.intra, space.intra, "{kind:?}");
        }
        let mult = measured(&cfg, ModelKind::MulT, seed);
        let gsit = measured(&cfg, ModelKind::GsiT { decomposed: true }, seed);
        let dense = measured(&cfg, ModelKind::GsiT { decomposed: false }, seed);

        // Independent enumeration of MulT's separate maps.
        let len = |m: Modality| cfg.layout.len_of(m) as u64;
        let mut pair_max = 0;
        let mut pair_sum = 0;
        for i in Modality::ALL {
            for j in Modality::ALL.into_iter().filter(|&j| j != i) {
                pair_max = pair_max.max(l * len(i) * len(j));
                pair_sum += l * len(i) * len(j);
            }
        }
        let self_max = Modality::ALL.map(|m| l * len(m) * len(m)).into_iter().max().unwrap();

        let peak = gsit.fusion[0].block_peak.max(gsit.fusion[1].block_peak);
        assert_eq!(peak, pair_max);
        assert_eq!(gsit.fusion[0].block_sum + gsit.fusion[1].block_sum, pair_sum);
        assert_eq!(gsit.intra.block_peak, self_max);
        assert_eq!(mult.fusion[0].block_peak.max(mult.fusion[1].block_peak), pair_max);
        assert_eq!(mult.intra.block_peak, self_max);
        for m in dense.fusion.iter().chain([&dense.intra]) {
            assert_eq!(m.dense_total, l * tm * tm);
        }
        for m in gsit.fusion.iter().chain([&gsit.intra]) {
            assert!(m.block_peak <= m.block_sum && m.block_sum <= m.dense_total);
        }
    }
}

#[test]
fn parameter_ratio_is_three() {
    for d in [2, 4, 8, 12] {
        for p in [d, 2 * d, 3 * d + 1] {
            for heads in [1, 2] {
                if d % heads != 0 {
                    continue;
                }
                let cfg = ModelConfig::new(random_layout(&mut Rng::new(1), 4), d, p, heads).unwrap();
                let mut rng = Rng::new((d * 100 + p * 10 + heads) as u64);
                let g = params(&GsiTWeights::random(&cfg, &mut rng, 0.1).unwrap());
                let m = params(&MulTWeights::random(&cfg, &mut rng, 0.1).unwrap());
                assert_eq!(m.fusion, 3 * g.fusion);
                assert_eq!(g.fusion, params_closed_form(&cfg, ModelKind::GsiT { decomposed: true }));
                assert_eq!(m.fusion, params_closed_form(&cfg, ModelKind::MulT));
                assert_eq!(g.head, 6 * d);
                assert_eq!(m.per_encoder.len(), 9);
                assert_eq!(g.per_encoder.len(), 3);
            }
        }
    }
}
