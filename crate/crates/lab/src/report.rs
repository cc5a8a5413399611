//! JSON reports for `verify` and `bench`, and CSV mask dumps.
//!
//! Maps are `BTreeMap`s so serialized output is ordered and byte-stable.

use std::collections::BTreeMap;
use std::fmt::Write;

use gsit_core::blockexec::{flop_report, memory_report, MemMeter};
use gsit_core::complexity::{flops_closed_form, params, attention1_reference_term, reconcile};
use gsit_core::maskgen::{iem, materialize, pattern_of, Patterns};
use gsit_core::models::{GsiTWeights, ModelConfig, MulTWeights};
use gsit_core::{Rng, SegmentLayout, StructureName};
use serde::Serialize;
use serde_json::json;

use crate::suites::{instrumented, SuiteResult, MODEL_KINDS};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportConfig {
    pub layout: [usize; 3],
    pub d: usize,
    pub p: usize,
    pub heads: usize,
    pub structure: String,
}

impl ReportConfig {
    pub fn of(cfg: &ModelConfig) -> Self {
        Self {
            layout: cfg.layout.lengths(),
            d: cfg.d,
            p: cfg.p,
            heads: cfg.heads,
            structure: cfg.structure.as_str().to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StreamMemory {
    pub dense_total: u64,
    pub block_sum: u64,
    pub block_peak: u64,
}

impl From<MemMeter> for StreamMemory {
    fn from(m: MemMeter) -> Self {
        Self {
            dense_total: m.dense_total,
            block_sum: m.block_sum,
            block_peak: m.block_peak,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemoryReport {
    /// Stage-1 forward stream of GsiT.
    pub dense_total: u64,
    pub block_sum: u64,
    pub block_peak: u64,
    /// Every attention stream by name.
    pub streams: BTreeMap<String, StreamMemory>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamsReport {
    pub mult: usize,
    pub gsit: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub config: ReportConfig,
    pub suites: BTreeMap<String, SuiteResult>,
    /// Model kind → `stage.phase` → count, with a `total` entry.
    pub flops: BTreeMap<String, BTreeMap<String, u64>>,
    pub memory: MemoryReport,
    pub params: ParamsReport,
}

impl Report {
    /// Accounting for `cfg`, with no suites attached.
    pub fn for_config(cfg: &ModelConfig) -> Result<Self> {
        let mut flops = BTreeMap::new();
        for kind in MODEL_KINDS {
            let counts = flop_report(&instrumented(cfg, kind, 0)?.flops)?;
            let mut phases: BTreeMap<String, u64> = counts.entries().into_iter().collect();
            phases.insert("total".into(), counts.total());
            flops.insert(kind.as_str().to_string(), phases);
        }
        let mut reference = BTreeMap::new();
        reference.insert("attention1_reference".into(), attention1_reference_term(&cfg.layout, cfg.d));
        flops.insert("reference".into(), reference);

        let l = cfg.heads;
        let mut streams: BTreeMap<String, StreamMemory> = BTreeMap::new();
        let (forward, backward) = pattern_of(cfg.structure).streams();
        streams.insert("fusion_forward".into(), memory_report(&cfg.layout, &forward, l).into());
        streams.insert(
            "fusion_backward".into(),
            memory_report(&cfg.layout, &backward, l).into(),
        );
        streams.insert("intra".into(), memory_report(&cfg.layout, &iem(), l).into());
        let fwd = streams["fusion_forward"];

        let mut rng = Rng::new(0);
        let gsit = params(&GsiTWeights::random(cfg, &mut rng, 0.1)?).fusion;
        let mult = params(&MulTWeights::random(cfg, &mut rng, 0.1)?).fusion;
        Ok(Self {
            config: ReportConfig::of(cfg),
            suites: BTreeMap::new(),
            flops,
            memory: MemoryReport {
                dense_total: fwd.dense_total,
                block_sum: fwd.block_sum,
                block_peak: fwd.block_peak,
                streams,
            },
            params: ParamsReport {
                mult,
                gsit,
                ratio: mult as f64 / gsit as f64,
            },
        })
    }

    pub fn add_suite(&mut self, result: SuiteResult) {
        self.suites.insert(result.name.clone(), result);
    }

    pub fn all_pass(&self) -> bool {
        self.suites.values().all(|s| s.pass)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.suites
            .values()
            .filter(|s| !s.pass)
            .map(|s| s.name.as_str())
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// The `bench` report: accounting for `cfg` plus a reconciliation suite of
/// every model's measured counts against its closed form.
pub fn bench(cfg: &ModelConfig) -> Result<Report> {
    let mut report = Report::for_config(cfg)?;
    let mut failures = Vec::new();
    let mut cells = 0;
    for kind in MODEL_KINDS {
        let measured = flop_report(&instrumented(cfg, kind, 0)?.flops)?;
        match reconcile(&measured, &flops_closed_form(cfg, kind)) {
            Ok(r) => cells += r.cells_checked,
            Err(e) => failures.push(format!("{}: {e}", kind.as_str())),
        }
    }
    report.add_suite(SuiteResult {
        name: "reconcile".into(),
        pass: failures.is_empty(),
        max_abs_diff: failures.len() as f64,
        details: json!({ "cells_checked": cells, "failures": failures }),
    });
    Ok(report)
}

/// Dense masks of every stream of `structure` as CSV:
/// `stream,row,c0,...` with `0` for allowed and `-inf` for blocked entries.
pub fn masks_csv(structure: StructureName, layout: &SegmentLayout) -> String {
    let streams = match pattern_of(structure) {
        Patterns::Pair { forward, backward } => vec![("forward", forward), ("backward", backward)],
        Patterns::Single(p) => vec![(structure.as_str(), p)],
    };
    let n = layout.total();
    let mut out = String::from("stream,row");
    for c in 0..n {
        write!(out, ",c{c}").unwrap();
    }
    out.push('\n');
    for (name, pattern) in streams {
        let mask = materialize(&pattern, layout);
        for r in 0..n {
            write!(out, "{name},{r}").unwrap();
            for c in 0..n {
                out.push_str(if mask[(r, c)] == 0.0 { ",0" } else { ",-inf" });
            }
            out.push('\n');
        }
    }
    out
}

/// ASCII grids of every stream of `structure`, each under a `name:` header.
pub fn masks_ascii(structure: StructureName) -> String {
    match pattern_of(structure) {
        Patterns::Pair { forward, backward } => {
            format!("forward:\n{}backward:\n{}", forward.to_ascii(), backward.to_ascii())
        }
        Patterns::Single(p) => format!("{}:\n{}", structure.as_str(), p.to_ascii()),
    }
}
