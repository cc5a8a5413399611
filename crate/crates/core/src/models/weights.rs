use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::ModelConfig;
use crate::attn::EncoderWeights;
use crate::maskgen::Modality::{self, Audio as A, Text as T, Vision as V};
use crate::{Error, Result, Rng, Tensor2};

/// Ordered `(dominant, auxiliary)` pairs of the cross-modal encoders.
pub const CROSS_PAIRS: [(Modality, Modality); 6] = [(T, V), (T, A), (V, T), (V, A), (A, T), (A, V)];

fn pair_index(dominant: Modality, auxiliary: Modality) -> Option<usize> {
    CROSS_PAIRS.iter().position(|&p| p == (dominant, auxiliary))
}

/// Named encoders and the final linear map of a model.
///
/// Encoders shared through the same `Arc` are one parameter set.
pub trait ParamSet {
    fn encoders(&self) -> Vec<(String, &Arc<EncoderWeights>)>;
    fn head(&self) -> &Arc<Tensor2>;
}

fn random_head(cfg: &ModelConfig, in_dim: usize, rng: &mut Rng, std: f64) -> Arc<Tensor2> {
    Arc::new(rng.normal_tensor(in_dim, cfg.out_dim, std))
}

fn check_head(f: &Tensor2, in_dim: usize) -> Result<()> {
    if f.rows() != in_dim {
        return Err(Error::Shape {
            op: "final projection",
            lhs: f.shape(),
            rhs: (in_dim, f.cols()),
        });
    }
    Ok(())
}

/// One encoder over the whole sequence plus `f: 3d → out`.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveWeights {
    pub encoder: Arc<EncoderWeights>,
    pub f: Arc<Tensor2>,
}

impl NaiveWeights {
    pub fn new(encoder: EncoderWeights, f: Tensor2) -> Result<Self> {
        check_head(&f, 3 * encoder.width())?;
        Ok(Self {
            encoder: Arc::new(encoder),
            f: Arc::new(f),
        })
    }

    pub fn random(cfg: &ModelConfig, rng: &mut Rng, std: f64) -> Result<Self> {
        cfg.validate()?;
        let encoder = Arc::new(EncoderWeights::random(rng, cfg.d, cfg.p, cfg.heads, std)?);
        let f = random_head(cfg, 3 * cfg.d, rng, std);
        Ok(Self { encoder, f })
    }
}

impl ParamSet for NaiveWeights {
    fn encoders(&self) -> Vec<(String, &Arc<EncoderWeights>)> {
        alloc::vec![("encoder".into(), &self.encoder)]
    }

    fn head(&self) -> &Arc<Tensor2> {
        &self.f
    }
}

/// Six cross-modal encoders (width `d`), three self encoders (width `2d`)
/// and `f: 6d → out`.
#[derive(Debug, Clone, PartialEq)]
pub struct MulTWeights {
    cross: [Arc<EncoderWeights>; 6],
    intra: [Arc<EncoderWeights>; 3],
    pub f: Arc<Tensor2>,
}

impl MulTWeights {
    /// `cross` is ordered as [`CROSS_PAIRS`]; `intra` as `t, v, a`.
    pub fn new(cross: [Arc<EncoderWeights>; 6], intra: [Arc<EncoderWeights>; 3], f: Arc<Tensor2>) -> Result<Self> {
        let d = cross[0].width();
        if cross.iter().any(|w| w.width() != d) || intra.iter().any(|w| w.width() != 2 * d) {
            return Err(Error::InvalidConfig(
                "cross encoders need width d and self encoders width 2d".into(),
            ));
        }
        check_head(&f, 6 * d)?;
        Ok(Self { cross, intra, f })
    }

    pub fn random(cfg: &ModelConfig, rng: &mut Rng, std: f64) -> Result<Self> {
        cfg.validate()?;
        let mut cross = Vec::with_capacity(6);
        for _ in CROSS_PAIRS {
            cross.push(Arc::new(EncoderWeights::random(rng, cfg.d, cfg.p, cfg.heads, std)?));
        }
        let mut intra = Vec::with_capacity(3);
        for _ in Modality::ALL {
            intra.push(Arc::new(EncoderWeights::random(
                rng,
                2 * cfg.d,
                2 * cfg.p,
                cfg.heads,
                std,
            )?));
        }
        let f = random_head(cfg, 6 * cfg.d, rng, std);
        Ok(Self {
            cross: cross.try_into().expect("six pairs"),
            intra: intra.try_into().expect("three modalities"),
            f,
        })
    }

    pub fn width(&self) -> usize {
        self.cross[0].width()
    }

    /// Encoder with `dominant` as query and `auxiliary` as key/value.
    pub fn cross(&self, dominant: Modality, auxiliary: Modality) -> &Arc<EncoderWeights> {
        &self.cross[pair_index(dominant, auxiliary).expect("distinct modalities")]
    }

    pub fn cross_mut(&mut self, dominant: Modality, auxiliary: Modality) -> &mut EncoderWeights {
        Arc::make_mut(&mut self.cross[pair_index(dominant, auxiliary).expect("distinct modalities")])
    }

    pub fn intra(&self, m: Modality) -> &Arc<EncoderWeights> {
        &self.intra[m.index()]
    }

    pub fn intra_mut(&mut self, m: Modality) -> &mut EncoderWeights {
        Arc::make_mut(&mut self.intra[m.index()])
    }

    pub fn cross_all(&self) -> &[Arc<EncoderWeights>; 6] {
        &self.cross
    }

    pub fn intra_all(&self) -> &[Arc<EncoderWeights>; 3] {
        &self.intra
    }
}

impl ParamSet for MulTWeights {
    fn encoders(&self) -> Vec<(String, &Arc<EncoderWeights>)> {
        let mut out: Vec<(String, &Arc<EncoderWeights>)> = CROSS_PAIRS
            .iter()
            .zip(&self.cross)
            .map(|((i, j), w)| (format!("cross_{i}{j}"), w))
            .collect();
        for m in Modality::ALL {
            out.push((format!("self_{m}"), &self.intra[m.index()]));
        }
        out
    }

    fn head(&self) -> &Arc<Tensor2> {
        &self.f
    }
}

/// Forward and backward fusion encoders (width `d`), one intra encoder
/// (width `2d`) and `f: 6d → out`.
#[derive(Debug, Clone, PartialEq)]
pub struct GsiTWeights {
    pub forward: Arc<EncoderWeights>,
    pub backward: Arc<EncoderWeights>,
    pub intra: Arc<EncoderWeights>,
    pub f: Arc<Tensor2>,
}

impl GsiTWeights {
    pub fn new(forward: EncoderWeights, backward: EncoderWeights, intra: EncoderWeights, f: Tensor2) -> Result<Self> {
        let d = forward.width();
        if backward.width() != d || intra.width() != 2 * d {
            return Err(Error::InvalidConfig(
                "fusion encoders need width d and the intra encoder width 2d".into(),
            ));
        }
        check_head(&f, 6 * d)?;
        Ok(Self {
            forward: Arc::new(forward),
            backward: Arc::new(backward),
            intra: Arc::new(intra),
            f: Arc::new(f),
        })
    }

    pub fn random(cfg: &ModelConfig, rng: &mut Rng, std: f64) -> Result<Self> {
        cfg.validate()?;
        let forward = EncoderWeights::random(rng, cfg.d, cfg.p, cfg.heads, std)?;
        let backward = EncoderWeights::random(rng, cfg.d, cfg.p, cfg.heads, std)?;
        let intra = EncoderWeights::random(rng, 2 * cfg.d, 2 * cfg.p, cfg.heads, std)?;
        let f = rng.normal_tensor(6 * cfg.d, cfg.out_dim, std);
        Self::new(forward, backward, intra, f)
    }

    pub fn width(&self) -> usize {
        self.forward.width()
    }
}

impl ParamSet for GsiTWeights {
    fn encoders(&self) -> Vec<(String, &Arc<EncoderWeights>)> {
        alloc::vec![
            ("forward".into(), &self.forward),
            ("backward".into(), &self.backward),
            ("intra".into(), &self.intra),
        ]
    }

    fn head(&self) -> &Arc<Tensor2> {
        &self.f
    }
}

/// MulT whose encoders alias the GsiT parameter sets: forward-ring pairs
/// `(t,v), (v,a), (a,t)` share `forward`, the backward ring shares
/// `backward`, all self encoders share `intra`.
pub fn tie_weights(g: &GsiTWeights) -> MulTWeights {
    let cross = CROSS_PAIRS.map(|(i, j)| {
        if j == i.forward_partner() {
            Arc::clone(&g.forward)
        } else {
            Arc::clone(&g.backward)
        }
    });
    MulTWeights {
        cross,
        intra: [Arc::clone(&g.intra), Arc::clone(&g.intra), Arc::clone(&g.intra)],
        f: Arc::clone(&g.f),
    }
}
