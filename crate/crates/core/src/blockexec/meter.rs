use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// Model stage a count belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    /// Cross-modal fusion (stage 1).
    Fusion,
    /// Intra-modal enhancement (stage 2).
    Intra,
    /// Final linear map `f`.
    Head,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Fusion, Stage::Intra, Stage::Head];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Fusion => "fusion",
            Stage::Intra => "intra",
            Stage::Head => "head",
        }
    }
}

/// Counting conventions: matmul `m×k · k×n` adds `m·k·n`, scaling adds one
/// per element, softmax adds two per unmasked element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Qkv,
    MapGen,
    Scale,
    Softmax,
    Aggregate,
    Mlp,
    FinalProjection,
}

impl Phase {
    pub const ALL: [Phase; 7] = [
        Phase::Qkv,
        Phase::MapGen,
        Phase::Scale,
        Phase::Softmax,
        Phase::Aggregate,
        Phase::Mlp,
        Phase::FinalProjection,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Qkv => "qkv",
            Phase::MapGen => "map_gen",
            Phase::Scale => "scale",
            Phase::Softmax => "softmax",
            Phase::Aggregate => "aggregate",
            Phase::Mlp => "mlp",
            Phase::FinalProjection => "final_projection",
        }
    }
}

/// Operation counts keyed by `(stage, phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct FlopCounts {
    counts: [[u64; 7]; 3],
}

impl FlopCounts {
    pub fn get(&self, stage: Stage, phase: Phase) -> u64 {
        self.counts[stage as usize][phase as usize]
    }

    pub fn set(&mut self, stage: Stage, phase: Phase, value: u64) {
        self.counts[stage as usize][phase as usize] = value;
    }

    pub fn add(&mut self, stage: Stage, phase: Phase, n: u64) {
        self.counts[stage as usize][phase as usize] += n;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn stage_total(&self, stage: Stage) -> u64 {
        self.counts[stage as usize].iter().sum()
    }

    /// Every cell as `("stage.phase", count)`, zeros included.
    pub fn entries(&self) -> Vec<(String, u64)> {
        let mut out = Vec::with_capacity(21);
        for s in Stage::ALL {
            for p in Phase::ALL {
                out.push((format!("{}.{}", s.as_str(), p.as_str()), self.get(s, p)));
            }
        }
        out
    }

    /// Cells where `self` and `other` differ, as `"stage.phase: a != b"`.
    pub fn diff(&self, other: &FlopCounts) -> Vec<String> {
        let mut out = Vec::new();
        for s in Stage::ALL {
            for p in Phase::ALL {
                let (a, b) = (self.get(s, p), other.get(s, p));
                if a != b {
                    out.push(format!("{}.{}: {a} != {b}", s.as_str(), p.as_str()));
                }
            }
        }
        out
    }
}

impl fmt::Display for FlopCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.entries() {
            if v != 0 {
                writeln!(f, "{k:<24} {v}")?;
            }
        }
        write!(f, "{:<24} {}", "total", self.total())
    }
}

/// Monotone operation counter for one forward pass.
#[derive(Debug, Clone, Default)]
pub struct FlopMeter {
    counts: FlopCounts,
    passes: u32,
}

impl FlopMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, stage: Stage, phase: Phase, n: u64) {
        self.counts.add(stage, phase, n);
    }

    /// Marks the start of a model forward pass.
    pub fn begin_pass(&mut self) {
        self.passes += 1;
    }

    pub fn passes(&self) -> u32 {
        self.passes
    }

    pub fn counts(&self) -> &FlopCounts {
        &self.counts
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

/// Snapshot of a meter that recorded exactly one full forward pass.
pub fn flop_report(meter: &FlopMeter) -> Result<FlopCounts> {
    match meter.passes {
        1 => Ok(meter.counts),
        0 => Err(Error::Accounting("meter recorded no forward pass".into())),
        n => Err(Error::Accounting(format!(
            "meter reused across {n} passes without reset"
        ))),
    }
}

/// Optional metering sink bound to one stage.
pub struct Counter<'a> {
    meter: Option<&'a mut FlopMeter>,
    stage: Stage,
}

impl<'a> Counter<'a> {
    pub fn off() -> Self {
        Self {
            meter: None,
            stage: Stage::Fusion,
        }
    }

    pub fn on(meter: &'a mut FlopMeter, stage: Stage) -> Self {
        Self {
            meter: Some(meter),
            stage,
        }
    }

    #[inline]
    pub fn add(&mut self, phase: Phase, n: usize) {
        if let Some(m) = self.meter.as_deref_mut() {
            m.add(self.stage, phase, n as u64);
        }
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    /// Re-borrows the same sink for a nested call.
    pub fn reborrow(&mut self) -> Counter<'_> {
        Counter {
            meter: self.meter.as_deref_mut(),
            stage: self.stage,
        }
    }
}

/// Attention-map element counts for one stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct MemMeter {
    /// `L · T_q · T_k` of the full (masked) map.
    pub dense_total: u64,
    /// Sum over computed blocks of `L · T_i · T_j`.
    pub block_sum: u64,
    /// Largest single computed block.
    pub block_peak: u64,
}

impl MemMeter {
    pub fn record_block(&mut self, elements: u64) {
        self.block_sum += elements;
        self.block_peak = self.block_peak.max(elements);
    }
}
