//! Run configuration, loaded from a sectioned `key = value` file.
//!
//! ```toml
//! [model]
//! kind = "gsit"
//! layout = "4,5,6"
//! d = 8
//!
//! [train]
//! steps = 500
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gsit_core::models::ModelConfig;
use gsit_core::{SegmentLayout, StructureName};
use serde::{Deserialize, Serialize};

use crate::{LabError, Result};

/// Which architecture a run trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Gsit,
    Mult,
    Naive,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Gsit, ModelKind::Mult, ModelKind::Naive];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gsit => "gsit",
            ModelKind::Mult => "mult",
            ModelKind::Naive => "naive",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            ModelKind::Gsit => 0,
            ModelKind::Mult => 1,
            ModelKind::Naive => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| LabError::Config(format!("unknown model kind `{s}` (gsit|mult|naive)")))
    }
}

/// Serde adapter for types that round-trip through `Display` / `FromStr`.
mod via_str {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(value: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(value)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        let s = String::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    #[serde(with = "via_str")]
    pub kind: ModelKind,
    #[serde(with = "via_str")]
    pub layout: SegmentLayout,
    pub d: usize,
    pub p: usize,
    pub heads: usize,
    pub out_dim: usize,
    #[serde(with = "via_str")]
    pub structure: StructureName,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kind: ModelKind::Gsit,
            layout: SegmentLayout::new(4, 5, 6).expect("nonzero"),
            d: 8,
            p: 16,
            heads: 2,
            out_dim: 1,
            structure: StructureName::Original,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
    pub batch_size: usize,
    /// Standard deviation of the normal weight initialization.
    pub init_std: f64,
    /// Loss-curve CSV path.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            steps: 500,
            lr: 0.05,
            seed: 7,
            batch_size: 16,
            init_std: 0.3,
            out: None,
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub samples: usize,
    /// Standard deviation of the additive noise on every entry.
    pub noise: f64,
    /// Standard deviation of the per-sample offsets that cancel across the
    /// three signal channels.
    pub nuisance: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            samples: 256,
            noise: 0.3,
            nuisance: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub train: TrainSection,
    pub data: DataSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        let m = &self.model;
        Ok(ModelConfig::new(m.layout, m.d, m.p, m.heads)?
            .with_out_dim(m.out_dim)
            .with_structure(m.structure))
    }

    pub fn validate(&self) -> Result<()> {
        self.model_config()?;
        if self.model.structure == StructureName::Iem {
            return Err(LabError::Config("`iem` is not a fusion structure".into()));
        }
        if self.model.d < 3 {
            return Err(LabError::Config(
                "d must be at least 3 so each modality has its own signal channel".into(),
            ));
        }
        let t = &self.train;
        if t.batch_size == 0 || self.data.samples == 0 {
            return Err(LabError::Config("batch_size and samples must be positive".into()));
        }
        if !(t.lr.is_finite() && t.lr >= 0.0 && t.init_std.is_finite() && t.init_std > 0.0) {
            return Err(LabError::Config("lr must be >= 0 and init_std > 0".into()));
        }
        if !(self.data.noise >= 0.0 && self.data.nuisance >= 0.0) {
            return Err(LabError::Config("noise and nuisance must be >= 0".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig::default();
        cfg.model.kind = ModelKind::Mult;
        cfg.model.structure = StructureName::Structure2;
        cfg.train.out = Some("loss.csv".into());
        let back = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml(), cfg.to_toml());
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = RunConfig::parse("[model]\nlayout = \"2,3,4\"\n\n[train]\nsteps = 10\n").unwrap();
        assert_eq!(cfg.model.layout.lengths(), [2, 3, 4]);
        assert_eq!(cfg.train.steps, 10);
        assert_eq!(cfg.data, DataSection::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse("[model]\ndepth = 2\n").is_err());
        assert!(RunConfig::parse("[optim]\nlr = 0.1\n").is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::parse("[model]\nd = 6\nheads = 4\n").is_err());
        assert!(RunConfig::parse("[model]\nstructure = \"iem\"\n").is_err());
        assert!(RunConfig::parse("[model]\nlayout = \"0,1,1\"\n").is_err());
        assert!(RunConfig::parse("[model]\nkind = \"lstm\"\n").is_err());
    }
}
