//! Plain SGD on mean squared error, gradients from the tape.

use std::sync::Arc;

use gsit_core::attn::EncoderWeights;
use gsit_core::models::{
    gsit_forward, gsit_prediction_on_tape, mult_forward, mult_prediction_on_tape, naive_forward,
    naive_prediction_on_tape, EncoderVars, GsiTVars, GsiTWeights, ModelConfig, ModelOutput, MulTVars, MulTWeights,
    NaiveVars, NaiveWeights, ParamSet, CROSS_PAIRS,
};
use gsit_core::numkit::{Gradients, Tape, Var};
use gsit_core::{Modality, Rng, StructureName, Tensor2};

use crate::config::{ModelKind, RunConfig};
use crate::data::{gen_dataset, SyntheticSample};
use crate::{LabError, Result};

/// Stream index used to seed weight initialization, apart from data indices.
const WEIGHT_STREAM: u64 = u64::MAX;

/// Trained (or freshly initialized) parameters of one architecture.
#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    Gsit(GsiTWeights),
    Mult(MulTWeights),
    Naive(NaiveWeights),
}

impl Weights {
    pub fn init(kind: ModelKind, cfg: &ModelConfig, seed: u64, std: f64) -> Result<Self> {
        let mut rng = Rng::derive(seed, WEIGHT_STREAM);
        Ok(match kind {
            ModelKind::Gsit => Weights::Gsit(GsiTWeights::random(cfg, &mut rng, std)?),
            ModelKind::Mult => Weights::Mult(MulTWeights::random(cfg, &mut rng, std)?),
            ModelKind::Naive => Weights::Naive(NaiveWeights::random(cfg, &mut rng, std)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Weights::Gsit(_) => ModelKind::Gsit,
            Weights::Mult(_) => ModelKind::Mult,
            Weights::Naive(_) => ModelKind::Naive,
        }
    }

    pub fn forward(&self, sample: &SyntheticSample, structure: StructureName) -> Result<ModelOutput> {
        let layout = gsit_core::SegmentLayout::from_lengths(sample.inputs.each_ref().map(Tensor2::rows))?;
        Ok(match self {
            Weights::Gsit(w) => gsit_forward(w, &sample.concatenated(), &layout, structure)?,
            Weights::Mult(w) => mult_forward(w, &sample.inputs)?,
            Weights::Naive(w) => naive_forward(w, &sample.concatenated(), &layout)?,
        })
    }
}

impl ParamSet for Weights {
    fn encoders(&self) -> Vec<(String, &Arc<EncoderWeights>)> {
        match self {
            Weights::Gsit(w) => w.encoders(),
            Weights::Mult(w) => w.encoders(),
            Weights::Naive(w) => w.encoders(),
        }
    }

    fn head(&self) -> &Arc<Tensor2> {
        match self {
            Weights::Gsit(w) => w.head(),
            Weights::Mult(w) => w.head(),
            Weights::Naive(w) => w.head(),
        }
    }
}

/// Parameter leaves of one model on a tape.
enum Leaves {
    Gsit(GsiTVars),
    Mult(Box<MulTVars>),
    Naive(NaiveVars),
}

impl Leaves {
    fn new(tape: &mut Tape, w: &Weights) -> Self {
        match w {
            Weights::Gsit(w) => Leaves::Gsit(GsiTVars::new(tape, w)),
            Weights::Mult(w) => Leaves::Mult(Box::new(MulTVars::new(tape, w))),
            Weights::Naive(w) => Leaves::Naive(NaiveVars::new(tape, w)),
        }
    }

    fn predict(&self, tape: &mut Tape, sample: &SyntheticSample, cfg: &ModelConfig) -> Result<Var> {
        let x = tape.leaf(sample.concatenated());
        Ok(match self {
            Leaves::Gsit(v) => gsit_prediction_on_tape(tape, v, x, &cfg.layout, cfg.structure)?,
            Leaves::Mult(v) => mult_prediction_on_tape(tape, v, x, &cfg.layout)?,
            Leaves::Naive(v) => naive_prediction_on_tape(tape, v, x, &cfg.layout)?,
        })
    }
}

fn sgd_encoder(w: &mut Arc<EncoderWeights>, vars: &EncoderVars, grads: &Gradients, lr: f64) {
    let enc = Arc::make_mut(w);
    for (param, var) in enc.arrays_mut().into_iter().zip(vars.vars()) {
        sgd(param, grads, var, lr);
    }
}

fn sgd(param: &mut Tensor2, grads: &Gradients, var: Var, lr: f64) {
    if let Some(g) = grads.get(var) {
        for (p, g) in param.data_mut().iter_mut().zip(g.data()) {
            *p -= lr * g;
        }
    }
}

fn apply(w: &mut Weights, leaves: &Leaves, grads: &Gradients, lr: f64) {
    match (w, leaves) {
        (Weights::Gsit(w), Leaves::Gsit(v)) => {
            sgd_encoder(&mut w.forward, &v.forward, grads, lr);
            sgd_encoder(&mut w.backward, &v.backward, grads, lr);
            sgd_encoder(&mut w.intra, &v.intra, grads, lr);
            sgd(Arc::make_mut(&mut w.f), grads, v.f, lr);
        }
        (Weights::Mult(w), Leaves::Mult(v)) => {
            for (k, &(i, j)) in CROSS_PAIRS.iter().enumerate() {
                let enc = w.cross_mut(i, j);
                for (param, var) in enc.arrays_mut().into_iter().zip(v.cross[k].vars()) {
                    sgd(param, grads, var, lr);
                }
            }
            for m in Modality::ALL {
                let enc = w.intra_mut(m);
                for (param, var) in enc.arrays_mut().into_iter().zip(v.intra[m.index()].vars()) {
                    sgd(param, grads, var, lr);
                }
            }
            sgd(Arc::make_mut(&mut w.f), grads, v.f, lr);
        }
        (Weights::Naive(w), Leaves::Naive(v)) => {
            sgd_encoder(&mut w.encoder, &v.encoder, grads, lr);
            sgd(Arc::make_mut(&mut w.f), grads, v.f, lr);
        }
        _ => unreachable!("leaves are built from the same weights"),
    }
}

fn target_of(sample: &SyntheticSample, out_dim: usize) -> Tensor2 {
    Tensor2::filled(1, out_dim, sample.target)
}

/// One SGD step on `batch`; returns the batch loss before the update.
pub fn sgd_step(weights: &mut Weights, batch: &[&SyntheticSample], cfg: &ModelConfig, lr: f64) -> Result<f64> {
    let mut tape = Tape::new();
    let leaves = Leaves::new(&mut tape, weights);
    let mut total: Option<Var> = None;
    for sample in batch {
        let pred = leaves.predict(&mut tape, sample, cfg)?;
        let loss = tape.mse(pred, &target_of(sample, cfg.out_dim))?;
        total = Some(match total {
            None => loss,
            Some(acc) => tape.add(acc, loss)?,
        });
    }
    let total = total.ok_or_else(|| LabError::Config("empty batch".into()))?;
    let loss = tape.scale(total, 1.0 / batch.len() as f64);
    let value = tape.value(loss)[(0, 0)];
    let grads = tape.backward(loss)?;
    apply(weights, &leaves, &grads, lr);
    Ok(value)
}

/// Mean squared error of `weights` over `samples`.
pub fn evaluate(weights: &Weights, samples: &[SyntheticSample], structure: StructureName) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for s in samples {
        for p in weights.forward(s, structure)?.prediction {
            sum += (p - s.target) * (p - s.target);
            count += 1;
        }
    }
    Ok(sum / count as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Batch loss at each step, measured before that step's update.
    pub losses: Vec<f64>,
    /// Full-dataset MSE of the final weights.
    pub final_mse: f64,
    pub weights: Weights,
}

impl TrainOutcome {
    /// `step,loss` rows with a header, one per step.
    pub fn loss_csv(&self) -> String {
        let mut out = String::from("step,loss\n");
        for (i, l) in self.losses.iter().enumerate() {
            out.push_str(&format!("{i},{l:e}\n"));
        }
        out
    }
}

pub fn train(run: &RunConfig) -> Result<TrainOutcome> {
    run.validate()?;
    let cfg = run.model_config()?;
    let t = &run.train;
    let samples = gen_dataset(t.seed, run.data.samples, &cfg.layout, cfg.d, &run.data);
    let mut weights = Weights::init(run.model.kind, &cfg, t.seed, t.init_std)?;
    let n = samples.len();
    let mut losses = Vec::with_capacity(t.steps);
    for step in 0..t.steps {
        let batch: Vec<&SyntheticSample> = (0..t.batch_size)
            .map(|b| &samples[(step * t.batch_size + b) % n])
            .collect();
        let loss = sgd_step(&mut weights, &batch, &cfg, t.lr)?;
        if !loss.is_finite() {
            return Err(LabError::Divergence { step });
        }
        losses.push(loss);
    }
    let final_mse = evaluate(&weights, &samples, cfg.structure)?;
    if !final_mse.is_finite() {
        return Err(LabError::Divergence { step: t.steps });
    }
    Ok(TrainOutcome {
        losses,
        final_mse,
        weights,
    })
}
