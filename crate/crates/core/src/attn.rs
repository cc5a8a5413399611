//! Multi-head attention split into adjacency generation and aggregation,
//! plus the encoder `MLP ∘ attention`.
//!
//! Encoders carry query/key/value projections and a two-layer ReLU MLP.
//! There is no output projection, no bias, no residual and no normalization.

use alloc::vec::Vec;

use crate::blockexec::{Counter, Phase};
use crate::numkit::softmax_rows;
use crate::{Error, Result, Rng, Tensor2};

/// Parameters of one attention encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderWeights {
    pub wq: Tensor2,
    pub wk: Tensor2,
    pub wv: Tensor2,
    pub w1: Tensor2,
    pub w2: Tensor2,
    heads: usize,
}

/// Names of the stored arrays, in declaration order.
pub const ARRAY_NAMES: [&str; 5] = ["wq", "wk", "wv", "w1", "w2"];

impl EncoderWeights {
    pub fn new(wq: Tensor2, wk: Tensor2, wv: Tensor2, w1: Tensor2, w2: Tensor2, heads: usize) -> Result<Self> {
        let d = wq.rows();
        let p = w1.cols();
        let square = |t: &Tensor2| t.shape() == (d, d);
        if !(square(&wq) && square(&wk) && square(&wv)) {
            return Err(Error::Shape {
                op: "encoder projections",
                lhs: (d, d),
                rhs: if square(&wk) { wv.shape() } else { wk.shape() },
            });
        }
        if w1.rows() != d || w2.shape() != (p, d) {
            return Err(Error::Shape {
                op: "encoder mlp",
                lhs: w1.shape(),
                rhs: w2.shape(),
            });
        }
        check_dims(d, p, heads)?;
        Ok(Self {
            wq,
            wk,
            wv,
            w1,
            w2,
            heads,
        })
    }

    /// Entries drawn from `N(0, std²)`, in declaration order.
    pub fn random(rng: &mut Rng, d: usize, p: usize, heads: usize, std: f64) -> Result<Self> {
        check_dims(d, p, heads)?;
        let wq = rng.normal_tensor(d, d, std);
        let wk = rng.normal_tensor(d, d, std);
        let wv = rng.normal_tensor(d, d, std);
        let w1 = rng.normal_tensor(d, p, std);
        let w2 = rng.normal_tensor(p, d, std);
        Self::new(wq, wk, wv, w1, w2, heads)
    }

    pub fn zeros(d: usize, p: usize, heads: usize) -> Result<Self> {
        Self::new(
            Tensor2::zeros(d, d),
            Tensor2::zeros(d, d),
            Tensor2::zeros(d, d),
            Tensor2::zeros(d, p),
            Tensor2::zeros(p, d),
            heads,
        )
    }

    /// Model width `d`.
    pub fn width(&self) -> usize {
        self.wq.rows()
    }

    /// MLP hidden width `p`.
    pub fn hidden(&self) -> usize {
        self.w1.cols()
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn head_width(&self) -> usize {
        self.width() / self.heads
    }

    pub fn param_count(&self) -> usize {
        self.arrays().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn arrays(&self) -> [(&'static str, &Tensor2); 5] {
        [
            ("wq", &self.wq),
            ("wk", &self.wk),
            ("wv", &self.wv),
            ("w1", &self.w1),
            ("w2", &self.w2),
        ]
    }

    pub fn arrays_mut(&mut self) -> [&mut Tensor2; 5] {
        [&mut self.wq, &mut self.wk, &mut self.wv, &mut self.w1, &mut self.w2]
    }

    /// All parameters flattened in declaration order.
    pub fn flatten(&self) -> Vec<f64> {
        self.arrays()
            .iter()
            .flat_map(|(_, t)| t.data().iter().copied())
            .collect()
    }
}

fn check_dims(d: usize, p: usize, heads: usize) -> Result<()> {
    if d == 0 || heads == 0 || !d.is_multiple_of(heads) {
        return Err(Error::InvalidConfig(alloc::format!(
            "width {d} must be a positive multiple of head count {heads}"
        )));
    }
    if p < d {
        return Err(Error::InvalidConfig(alloc::format!(
            "mlp hidden width {p} must be >= model width {d}"
        )));
    }
    Ok(())
}

/// `1 / sqrt(d / L)`
pub fn score_scale(head_width: usize) -> f64 {
    1.0 / libm::sqrt(head_width as f64)
}

/// Per-head adjacency maps plus the aggregated (pre-MLP) output.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionResult {
    pub maps: Vec<Tensor2>,
    pub output: Tensor2,
}

fn check_inputs(w: &EncoderWeights, queries: &Tensor2, keys: &Tensor2) -> Result<()> {
    for t in [queries, keys] {
        if t.cols() != w.width() {
            return Err(Error::Shape {
                op: "attention input",
                lhs: t.shape(),
                rhs: w.wq.shape(),
            });
        }
    }
    Ok(())
}

/// Adjacency generation: per head `softmax((Q_l K_lᵀ) / sqrt(d/L) + mask)`.
pub fn generate(w: &EncoderWeights, queries: &Tensor2, keys: &Tensor2, mask: Option<&Tensor2>) -> Result<Vec<Tensor2>> {
    generate_counted(w, queries, keys, mask, &mut Counter::off())
}

pub fn generate_counted(
    w: &EncoderWeights,
    queries: &Tensor2,
    keys: &Tensor2,
    mask: Option<&Tensor2>,
    counter: &mut Counter<'_>,
) -> Result<Vec<Tensor2>> {
    check_inputs(w, queries, keys)?;
    let (tq, tk, d) = (queries.rows(), keys.rows(), w.width());
    if let Some(m) = mask {
        if m.shape() != (tq, tk) {
            return Err(Error::Shape {
                op: "attention mask",
                lhs: (tq, tk),
                rhs: m.shape(),
            });
        }
    }
    let q = queries.matmul(&w.wq)?;
    counter.add(Phase::Qkv, tq * d * d);
    let k = keys.matmul(&w.wk)?;
    counter.add(Phase::Qkv, tk * d * d);
    head_maps(&q, &k, w.heads(), mask, counter)
}

/// Maps from already projected queries and keys.
pub(crate) fn head_maps(
    q: &Tensor2,
    k: &Tensor2,
    heads: usize,
    mask: Option<&Tensor2>,
    counter: &mut Counter<'_>,
) -> Result<Vec<Tensor2>> {
    let h = q.cols() / heads;
    let scale = score_scale(h);
    let finite = mask.map_or(q.rows() * k.rows(), |m| {
        m.data().iter().filter(|x| x.is_finite()).count()
    });
    let mut maps = Vec::with_capacity(heads);
    for l in 0..heads {
        let ql = q.slice_cols(l * h, (l + 1) * h)?;
        let kl = k.slice_cols(l * h, (l + 1) * h)?;
        let scores = ql.matmul_t(&kl)?;
        counter.add(Phase::MapGen, q.rows() * h * k.rows());
        let scores = scores.scale(scale);
        counter.add(Phase::Scale, scores.len());
        maps.push(softmax_rows(&scores, mask)?);
        counter.add(Phase::Softmax, 2 * finite);
    }
    Ok(maps)
}

/// Aggregation: `∥_l G_l · (V W_v)_l`.
pub fn aggregate(maps: &[Tensor2], values_input: &Tensor2, w: &EncoderWeights) -> Result<Tensor2> {
    aggregate_counted(maps, values_input, w, &mut Counter::off())
}

pub fn aggregate_counted(
    maps: &[Tensor2],
    values_input: &Tensor2,
    w: &EncoderWeights,
    counter: &mut Counter<'_>,
) -> Result<Tensor2> {
    if values_input.cols() != w.width() {
        return Err(Error::Shape {
            op: "aggregate input",
            lhs: values_input.shape(),
            rhs: w.wv.shape(),
        });
    }
    let v = values_input.matmul(&w.wv)?;
    counter.add(Phase::Qkv, v.rows() * w.width() * w.width());
    aggregate_projected(maps, &v, counter)
}

pub(crate) fn aggregate_projected(maps: &[Tensor2], v: &Tensor2, counter: &mut Counter<'_>) -> Result<Tensor2> {
    if maps.is_empty() || !v.cols().is_multiple_of(maps.len()) {
        return Err(Error::Shape {
            op: "aggregate heads",
            lhs: (maps.len(), 0),
            rhs: v.shape(),
        });
    }
    let h = v.cols() / maps.len();
    let mut parts = Vec::with_capacity(maps.len());
    for (l, g) in maps.iter().enumerate() {
        if g.cols() != v.rows() {
            return Err(Error::Shape {
                op: "aggregate",
                lhs: g.shape(),
                rhs: v.shape(),
            });
        }
        let vl = v.slice_cols(l * h, (l + 1) * h)?;
        parts.push(g.matmul(&vl)?);
        counter.add(Phase::Aggregate, g.rows() * g.cols() * h);
    }
    let refs: Vec<&Tensor2> = parts.iter().collect();
    Tensor2::concat_cols(&refs)
}

/// `relu(x W_1) W_2`
pub fn mlp(x: &Tensor2, w: &EncoderWeights, counter: &mut Counter<'_>) -> Result<Tensor2> {
    let hidden = x.matmul(&w.w1)?.relu();
    counter.add(Phase::Mlp, x.rows() * w.width() * w.hidden());
    let out = hidden.matmul(&w.w2)?;
    counter.add(Phase::Mlp, x.rows() * w.hidden() * w.width());
    Ok(out)
}

/// Adjacency maps and aggregated output for one attention call.
pub fn attend(
    w: &EncoderWeights,
    queries: &Tensor2,
    keys: &Tensor2,
    mask: Option<&Tensor2>,
    counter: &mut Counter<'_>,
) -> Result<AttentionResult> {
    let maps = generate_counted(w, queries, keys, mask, counter)?;
    let output = aggregate_counted(&maps, keys, w, counter)?;
    Ok(AttentionResult { maps, output })
}

/// Encoder `a = MLP ∘ attention`; output is `T_q × d`.
pub fn encode(w: &EncoderWeights, queries: &Tensor2, keys: &Tensor2, mask: Option<&Tensor2>) -> Result<Tensor2> {
    encode_counted(w, queries, keys, mask, &mut Counter::off())
}

pub fn encode_counted(
    w: &EncoderWeights,
    queries: &Tensor2,
    keys: &Tensor2,
    mask: Option<&Tensor2>,
    counter: &mut Counter<'_>,
) -> Result<Tensor2> {
    let att = attend(w, queries, keys, mask, counter)?;
    mlp(&att.output, w, counter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::max_abs_diff;
    use alloc::vec;

    fn weights(seed: u64, d: usize, heads: usize) -> EncoderWeights {
        EncoderWeights::random(&mut Rng::new(seed), d, 2 * d, heads, 0.5).unwrap()
    }

    #[test]
    fn single_pair_map_is_one() {
        let w = weights(1, 4, 2);
        let mut rng = Rng::new(2);
        let maps = generate(&w, &rng.normal_tensor(1, 4, 1.0), &rng.normal_tensor(1, 4, 1.0), None).unwrap();
        for m in maps {
            assert_eq!(m.data(), &[1.0]);
        }
    }

    #[test]
    fn single_key_broadcasts_value() {
        let w = weights(3, 4, 1);
        let mut rng = Rng::new(4);
        let q = rng.normal_tensor(3, 4, 1.0);
        let k = rng.normal_tensor(1, 4, 1.0);
        let maps = generate(&w, &q, &k, None).unwrap();
        let out = aggregate(&maps, &k, &w).unwrap();
        let proj = k.matmul(&w.wv).unwrap();
        for r in 0..3 {
            assert_eq!(out.row(r), proj.row(0));
        }
    }

    #[test]
    fn identity_map_returns_value_projection() {
        let w = weights(5, 4, 2);
        let mut rng = Rng::new(6);
        let x = rng.normal_tensor(3, 4, 1.0);
        let maps = vec![Tensor2::identity(3), Tensor2::identity(3)];
        let out = aggregate(&maps, &x, &w).unwrap();
        assert!(max_abs_diff(&out, &x.matmul(&w.wv).unwrap()) <= 1e-15);
    }

    #[test]
    fn zero_first_layer_zeroes_output() {
        let mut w = weights(7, 4, 2);
        w.w1 = Tensor2::zeros(4, 8);
        let x = Rng::new(8).normal_tensor(5, 4, 1.0);
        let out = encode(&w, &x, &x, None).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_closed_form() {
        // d = 2, L = 1, one query and one key: G = [[1]], output = relu(k Wv W1) W2.
        let w = weights(9, 2, 1);
        let q = Tensor2::new(1, 2, vec![0.3, -1.2]).unwrap();
        let k = Tensor2::new(1, 2, vec![-0.7, 0.4]).unwrap();
        let mut v = [0.0; 2];
        for (c, slot) in v.iter_mut().enumerate() {
            *slot = k[(0, 0)] * w.wv[(0, c)] + k[(0, 1)] * w.wv[(1, c)];
        }
        let mut hidden = [0.0; 4];
        for (j, slot) in hidden.iter_mut().enumerate() {
            *slot = (v[0] * w.w1[(0, j)] + v[1] * w.w1[(1, j)]).max(0.0);
        }
        let expected: Vec<f64> = (0..2).map(|c| (0..4).map(|j| hidden[j] * w.w2[(j, c)]).sum()).collect();
        let out = encode(&w, &q, &k, None).unwrap();
        for c in 0..2 {
            assert!((out[(0, c)] - expected[c]).abs() <= 1e-15);
        }
    }

    #[test]
    fn shift_invariance() {
        let mut rng = Rng::new(10);
        let x = rng.normal_tensor(4, 6, 2.0);
        let shifted = Tensor2::from_fn(4, 6, |r, c| x[(r, c)] + 3.7 * (r as f64 + 1.0));
        let a = softmax_rows(&x, None).unwrap();
        let b = softmax_rows(&shifted, None).unwrap();
        assert!(max_abs_diff(&a, &b) <= 1e-12);
    }

    #[test]
    fn rejects_bad_shapes() {
        let w = weights(11, 4, 2);
        let x = Tensor2::zeros(3, 5);
        assert!(matches!(encode(&w, &x, &x, None), Err(Error::Shape { .. })));
        assert!(EncoderWeights::random(&mut Rng::new(0), 6, 12, 4, 1.0).is_err());
        assert!(EncoderWeights::random(&mut Rng::new(0), 8, 4, 1, 1.0).is_err());
    }

    #[test]
    fn fully_masked_row_names_row() {
        let w = weights(12, 4, 1);
        let x = Rng::new(13).normal_tensor(2, 4, 1.0);
        let mask = Tensor2::from_fn(2, 2, |r, _| if r == 0 { f64::NEG_INFINITY } else { 0.0 });
        assert_eq!(
            generate(&w, &x, &x, Some(&mask)).unwrap_err(),
            Error::DegenerateRow { row: 0 }
        );
    }
}
