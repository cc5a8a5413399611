//! Segment layouts, the named 3×3 block patterns and their dense additive
//! masks.
//!
//! Grid position `(i, j)` set to allow means "row block `i` may attend to
//! column block `j`", i.e. information flows `j → i`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;
use core::str::FromStr;

use crate::{Error, Result, Tensor2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modality {
    Text,
    Vision,
    Audio,
}

impl Modality {
    /// Concatenation order of the multimodal sequence.
    pub const ALL: [Modality; 3] = [Modality::Text, Modality::Vision, Modality::Audio];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Modality> {
        Self::ALL.get(i).copied()
    }

    pub fn symbol(self) -> char {
        match self {
            Modality::Text => 't',
            Modality::Vision => 'v',
            Modality::Audio => 'a',
        }
    }

    /// Partner feeding `self` in the forward ring `t←v, v←a, a←t`.
    pub fn forward_partner(self) -> Modality {
        Self::ALL[(self.index() + 1) % 3]
    }

    /// Partner feeding `self` in the backward ring `t←a, v←t, a←v`.
    pub fn backward_partner(self) -> Modality {
        Self::ALL[(self.index() + 2) % 3]
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// Per-modality sequence lengths `(T_t, T_v, T_a)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SegmentLayout {
    lengths: [usize; 3],
}

impl SegmentLayout {
    pub fn new(text: usize, vision: usize, audio: usize) -> Result<Self> {
        Self::from_lengths([text, vision, audio])
    }

    pub fn from_lengths(lengths: [usize; 3]) -> Result<Self> {
        if lengths.contains(&0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "segment lengths must be >= 1, got {lengths:?}"
            )));
        }
        Ok(Self { lengths })
    }

    pub fn lengths(&self) -> [usize; 3] {
        self.lengths
    }

    pub fn len_of(&self, m: Modality) -> usize {
        self.lengths[m.index()]
    }

    pub fn offset(&self, m: Modality) -> usize {
        self.lengths[..m.index()].iter().sum()
    }

    pub fn range(&self, m: Modality) -> Range<usize> {
        let start = self.offset(m);
        start..start + self.len_of(m)
    }

    /// `T_m`
    pub fn total(&self) -> usize {
        self.lengths.iter().sum()
    }

    pub fn modality_of_row(&self, row: usize) -> Option<Modality> {
        Modality::ALL.into_iter().find(|&m| self.range(m).contains(&row))
    }
}

impl FromStr for SegmentLayout {
    type Err = Error;

    /// Parses `"a,b,c"`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::InvalidConfig(alloc::format!(
                "layout needs three comma-separated lengths, got {s:?}"
            )));
        }
        let mut lengths = [0usize; 3];
        for (slot, p) in lengths.iter_mut().zip(&parts) {
            *slot = p
                .parse()
                .map_err(|_| Error::InvalidConfig(alloc::format!("bad length {p:?}")))?;
        }
        Self::from_lengths(lengths)
    }
}

impl fmt::Display for SegmentLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [t, v, a] = self.lengths;
        write!(f, "{t},{v},{a}")
    }
}

/// 3×3 allow/deny grid over modality blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockPattern {
    grid: [[bool; 3]; 3],
}

impl BlockPattern {
    pub fn new(grid: [[bool; 3]; 3]) -> Result<Self> {
        if !grid.iter().flatten().any(|&a| a) {
            return Err(Error::InvalidConfig("block pattern allows nothing".into()));
        }
        Ok(Self { grid })
    }

    /// Pattern allowing exactly the listed `(row, column)` blocks.
    pub fn from_allowed(allowed: &[(Modality, Modality)]) -> Result<Self> {
        let mut grid = [[false; 3]; 3];
        for &(i, j) in allowed {
            grid[i.index()][j.index()] = true;
        }
        Self::new(grid)
    }

    pub fn all_allowed() -> Self {
        Self { grid: [[true; 3]; 3] }
    }

    pub fn allows(&self, row: Modality, col: Modality) -> bool {
        self.grid[row.index()][col.index()]
    }

    pub fn grid(&self) -> [[bool; 3]; 3] {
        self.grid
    }

    /// Allowed column blocks of `row`, in `t, v, a` order.
    pub fn allowed_in_row(&self, row: Modality) -> Vec<Modality> {
        Modality::ALL.into_iter().filter(|&c| self.allows(row, c)).collect()
    }

    /// All allowed `(row, column)` blocks, row-major.
    pub fn allowed(&self) -> Vec<(Modality, Modality)> {
        Modality::ALL
            .into_iter()
            .flat_map(|i| Modality::ALL.into_iter().map(move |j| (i, j)))
            .filter(|&(i, j)| self.allows(i, j))
            .collect()
    }

    pub fn allow_count(&self) -> usize {
        self.grid.iter().flatten().filter(|&&a| a).count()
    }

    pub fn is_all_allowed(&self) -> bool {
        self.allow_count() == 9
    }

    /// ASCII rendering: header row, then one line per row modality with `#`
    /// for allow and `.` for deny.
    pub fn to_ascii(&self) -> String {
        let mut out = String::from("  t v a\n");
        for i in Modality::ALL {
            out.push(i.symbol());
            for j in Modality::ALL {
                out.push(' ');
                out.push(if self.allows(i, j) { '#' } else { '.' });
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StructureName {
    Original,
    Structure1,
    Structure2,
    Structure3,
    SelfOnly,
    Iem,
}

impl StructureName {
    pub const ALL: [StructureName; 6] = [
        StructureName::Original,
        StructureName::Structure1,
        StructureName::Structure2,
        StructureName::Structure3,
        StructureName::SelfOnly,
        StructureName::Iem,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StructureName::Original => "original",
            StructureName::Structure1 => "s1",
            StructureName::Structure2 => "s2",
            StructureName::Structure3 => "s3",
            StructureName::SelfOnly => "self_only",
            StructureName::Iem => "iem",
        }
    }

    pub fn code(self) -> u32 {
        self as u32
    }

    pub fn from_code(code: u32) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for StructureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StructureName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "original" => StructureName::Original,
            "s1" | "structure1" | "structure-1" => StructureName::Structure1,
            "s2" | "structure2" | "structure-2" => StructureName::Structure2,
            "s3" | "structure3" | "structure-3" => StructureName::Structure3,
            "self_only" | "self-only" | "selfonly" => StructureName::SelfOnly,
            "iem" | "intra" => StructureName::Iem,
            other => return Err(Error::InvalidConfig(alloc::format!("unknown structure {other:?}"))),
        })
    }
}

/// What a structure name resolves to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Patterns {
    Pair {
        forward: BlockPattern,
        backward: BlockPattern,
    },
    Single(BlockPattern),
}

impl Patterns {
    /// `(forward, backward)` stream masks; a single pattern drives both.
    pub fn streams(&self) -> (BlockPattern, BlockPattern) {
        match *self {
            Patterns::Pair { forward, backward } => (forward, backward),
            Patterns::Single(p) => (p, p),
        }
    }
}

use Modality::{Audio as A, Text as T, Vision as V};

fn pat(allowed: &[(Modality, Modality)]) -> BlockPattern {
    BlockPattern::from_allowed(allowed).expect("static pattern is nonempty")
}

/// Block diagonal intra-enhancement pattern.
pub fn iem() -> BlockPattern {
    pat(&[(T, T), (V, V), (A, A)])
}

/// Resolves a structure to its block patterns.
pub fn pattern_of(name: StructureName) -> Patterns {
    match name {
        StructureName::Original => Patterns::Pair {
            forward: pat(&[(T, V), (V, A), (A, T)]),
            backward: pat(&[(T, A), (V, T), (A, V)]),
        },
        // Both streams allow (a,t) and neither allows (a,v).
        StructureName::Structure1 => Patterns::Pair {
            forward: pat(&[(T, A), (V, A), (A, T)]),
            backward: pat(&[(T, V), (V, T), (A, T)]),
        },
        StructureName::Structure2 => Patterns::Pair {
            forward: pat(&[(T, V), (V, T), (A, V)]),
            backward: pat(&[(T, A), (V, A), (A, T)]),
        },
        StructureName::Structure3 => Patterns::Pair {
            forward: pat(&[(T, V), (V, A), (A, V)]),
            backward: pat(&[(T, A), (V, T), (A, T)]),
        },
        StructureName::SelfOnly => Patterns::Single(pat(&[(T, V), (T, A), (V, T), (V, A), (A, T), (A, V)])),
        StructureName::Iem => Patterns::Single(iem()),
    }
}

/// Dense `T_m × T_m` additive mask: `0` in allowed blocks, `-inf` elsewhere.
pub fn materialize(pattern: &BlockPattern, layout: &SegmentLayout) -> Tensor2 {
    let n = layout.total();
    let mut mask = Tensor2::filled(n, n, f64::NEG_INFINITY);
    for (i, j) in pattern.allowed() {
        for r in layout.range(i) {
            for c in layout.range(j) {
                mask[(r, c)] = 0.0;
            }
        }
    }
    mask
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validation {
    FusionSafe,
    /// Row modalities that do not have exactly one allowed block.
    Disorder(Vec<Modality>),
}

impl Validation {
    pub fn is_fusion_safe(&self) -> bool {
        matches!(self, Validation::FusionSafe)
    }
}

pub fn validate(pattern: &BlockPattern) -> Validation {
    let bad: Vec<Modality> = Modality::ALL
        .into_iter()
        .filter(|&m| pattern.allowed_in_row(m).len() != 1)
        .collect();
    if bad.is_empty() {
        Validation::FusionSafe
    } else {
        Validation::Disorder(bad)
    }
}
