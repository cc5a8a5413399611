//! Loop-based graph attention over explicit edge lists.
//!
//! This is a brute-force reference for the attention module: every score,
//! neighborhood softmax and weighted sum is computed vertex by vertex, with
//! no matrix products and no shared code beyond [`Tensor2`] storage.

use alloc::vec;
use alloc::vec::Vec;

use crate::attn::EncoderWeights;
use crate::{Error, Modality, Result, Tensor2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexLabel {
    Modality(Modality),
    Merged,
}

/// `N × D` vertex features.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexSet {
    pub features: Tensor2,
    pub label: VertexLabel,
}

impl VertexSet {
    pub fn new(features: Tensor2, label: VertexLabel) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::EmptyVertexSet);
        }
        Ok(Self { features, label })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }
}

/// Directed graph from `sources` into `targets`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitGraph {
    pub sources: VertexSet,
    /// `None` when targets alias the sources (complete graph).
    pub targets: Option<VertexSet>,
    /// `(target m, source n)` pairs.
    pub edges: Vec<(usize, usize)>,
    /// Per head, per edge attention coefficient; filled by [`gat_aggregate`].
    pub weights: Option<Vec<Vec<f64>>>,
}

impl ExplicitGraph {
    pub fn targets(&self) -> &VertexSet {
        self.targets.as_ref().unwrap_or(&self.sources)
    }

    /// Drops every edge `(m, n)`; returns whether one existed.
    pub fn remove_edge(&mut self, m: usize, n: usize) -> bool {
        let before = self.edges.len();
        self.edges.retain(|&e| e != (m, n));
        self.weights = None;
        before != self.edges.len()
    }

    /// Edges into target `m`, as indices into `edges`.
    pub fn in_edges(&self, m: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.0 == m)
            .map(|(i, _)| i)
    }
}

/// Unidirectional complete bipartite graph, auxiliary → dominant.
pub fn build_bipartite(dominant: VertexSet, auxiliary: VertexSet) -> Result<ExplicitGraph> {
    if dominant.is_empty() || auxiliary.is_empty() {
        return Err(Error::EmptyVertexSet);
    }
    let mut edges = Vec::with_capacity(dominant.len() * auxiliary.len());
    for m in 0..dominant.len() {
        for n in 0..auxiliary.len() {
            edges.push((m, n));
        }
    }
    Ok(ExplicitGraph {
        sources: auxiliary,
        targets: Some(dominant),
        edges,
        weights: None,
    })
}

/// Directed complete graph over one set, self-loops included.
pub fn build_complete(set: VertexSet) -> Result<ExplicitGraph> {
    if set.is_empty() {
        return Err(Error::EmptyVertexSet);
    }
    let n = set.len();
    let mut edges = Vec::with_capacity(n * n);
    for m in 0..n {
        for k in 0..n {
            edges.push((m, k));
        }
    }
    Ok(ExplicitGraph {
        sources: set,
        targets: None,
        edges,
        weights: None,
    })
}

/// `x · W` for a single vertex, by explicit loops.
fn project(x: &[f64], w: &Tensor2) -> Vec<f64> {
    let mut out = vec![0.0; w.cols()];
    for (c, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (k, xv) in x.iter().enumerate() {
            acc += xv * w[(k, c)];
        }
        *slot = acc;
    }
    out
}

/// Multi-head GAT aggregation with dot-product scores; records per-edge
/// coefficients in `graph.weights`. Output has one row per target vertex.
pub fn gat_aggregate(graph: &mut ExplicitGraph, w: &EncoderWeights) -> Result<Tensor2> {
    let d = w.width();
    for set in [&graph.sources, graph.targets()] {
        if set.features.cols() != d {
            return Err(Error::Shape {
                op: "gat_aggregate",
                lhs: set.features.shape(),
                rhs: w.wq.shape(),
            });
        }
    }
    let heads = w.heads();
    let h = d / heads;
    let inv_sqrt = 1.0 / libm::sqrt(h as f64);

    let targets = graph.targets();
    let queries: Vec<Vec<f64>> = (0..targets.len())
        .map(|m| project(targets.features.row(m), &w.wq))
        .collect();
    let keys: Vec<Vec<f64>> = (0..graph.sources.len())
        .map(|n| project(graph.sources.features.row(n), &w.wk))
        .collect();
    let values: Vec<Vec<f64>> = (0..graph.sources.len())
        .map(|n| project(graph.sources.features.row(n), &w.wv))
        .collect();

    let mut coeffs = vec![vec![0.0; graph.edges.len()]; heads];
    let mut out = Tensor2::zeros(targets.len(), d);
    for m in 0..targets.len() {
        let neighborhood: Vec<usize> = graph.in_edges(m).collect();
        if neighborhood.is_empty() {
            return Err(Error::DegenerateNeighborhood { vertex: m });
        }
        for (l, head_coeffs) in coeffs.iter_mut().enumerate() {
            let cols = l * h..(l + 1) * h;
            let mut scores = Vec::with_capacity(neighborhood.len());
            for &e in &neighborhood {
                let n = graph.edges[e].1;
                let mut s = 0.0;
                for c in cols.clone() {
                    s += queries[m][c] * keys[n][c];
                }
                scores.push(s * inv_sqrt);
            }
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for s in scores.iter_mut() {
                *s = libm::exp(*s - max);
                denom += *s;
            }
            for (&e, s) in neighborhood.iter().zip(&scores) {
                let alpha = s / denom;
                head_coeffs[e] = alpha;
                let n = graph.edges[e].1;
                for c in cols.clone() {
                    out[(m, c)] += alpha * values[n][c];
                }
            }
        }
    }
    graph.weights = Some(coeffs);
    Ok(out)
}

/// Per head, per target sum of incoming coefficients.
pub fn coefficient_sums(graph: &ExplicitGraph) -> Option<Vec<Vec<f64>>> {
    let weights = graph.weights.as_ref()?;
    let n_targets = graph.targets().len();
    Some(
        weights
            .iter()
            .map(|per_edge| {
                let mut sums = vec![0.0; n_targets];
                for (e, &(m, _)) in graph.edges.iter().enumerate() {
                    sums[m] += per_edge[e];
                }
                sums
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rng;

    fn set(rng: &mut Rng, n: usize, d: usize) -> VertexSet {
        VertexSet::new(rng.normal_tensor(n, d, 1.0), VertexLabel::Merged).unwrap()
    }

    #[test]
    fn bipartite_edge_counts() {
        let mut rng = Rng::new(1);
        let g = build_bipartite(set(&mut rng, 1, 2), set(&mut rng, 3, 2)).unwrap();
        assert_eq!(g.edges, vec![(0, 0), (0, 1), (0, 2)]);
        let g = build_bipartite(set(&mut rng, 2, 2), set(&mut rng, 2, 2)).unwrap();
        assert_eq!(g.edges.len(), 4);
        for n_dom in 1..=8 {
            for n_aux in 1..=8 {
                let g = build_bipartite(set(&mut rng, n_dom, 2), set(&mut rng, n_aux, 2)).unwrap();
                assert_eq!(g.edges.len(), n_dom * n_aux);
            }
        }
    }

    #[test]
    fn complete_graph_has_self_loops() {
        let mut rng = Rng::new(2);
        let g = build_complete(set(&mut rng, 1, 2)).unwrap();
        assert_eq!(g.edges, vec![(0, 0)]);
        assert_eq!(build_complete(set(&mut rng, 3, 2)).unwrap().edges.len(), 9);
    }

    #[test]
    fn empty_set_rejected() {
        assert_eq!(
            VertexSet::new(Tensor2::zeros(0, 3), VertexLabel::Merged).unwrap_err(),
            Error::EmptyVertexSet
        );
    }

    #[test]
    fn one_source_returns_its_value() {
        let mut rng = Rng::new(3);
        let w = EncoderWeights::random(&mut rng, 4, 4, 2, 1.0).unwrap();
        let src = set(&mut rng, 1, 4);
        let expected = project(src.features.row(0), &w.wv);
        let mut g = build_bipartite(set(&mut rng, 1, 4), src).unwrap();
        let out = gat_aggregate(&mut g, &w).unwrap();
        for c in 0..4 {
            assert!((out[(0, c)] - expected[c]).abs() < 1e-15);
        }
    }

    #[test]
    fn scalar_two_source_convex_combination() {
        // d = 1, L = 1: score_n = (q wq)(k_n wk), output = Σ α_n k_n wv.
        let w = EncoderWeights::new(
            Tensor2::filled(1, 1, 0.8),
            Tensor2::filled(1, 1, -1.5),
            Tensor2::filled(1, 1, 2.0),
            Tensor2::filled(1, 1, 1.0),
            Tensor2::filled(1, 1, 1.0),
            1,
        )
        .unwrap();
        let dom = VertexSet::new(Tensor2::filled(1, 1, 0.5), VertexLabel::Merged).unwrap();
        let aux = VertexSet::new(Tensor2::from_fn(2, 1, |r, _| [1.0, -2.0][r]), VertexLabel::Merged).unwrap();
        let q = 0.5 * 0.8;
        let e0 = q * (1.0 * -1.5);
        let e1 = q * (-2.0 * -1.5);
        let a0 = 1.0 / (1.0 + libm::exp(e1 - e0));
        let expected = a0 * 2.0 + (1.0 - a0) * (-4.0);
        let mut g = build_bipartite(dom, aux).unwrap();
        let out = gat_aggregate(&mut g, &w).unwrap();
        assert!((out[(0, 0)] - expected).abs() < 1e-14);
    }

    #[test]
    fn isolated_target_is_error() {
        let mut rng = Rng::new(4);
        let w = EncoderWeights::random(&mut rng, 2, 2, 1, 1.0).unwrap();
        let mut g = build_bipartite(set(&mut rng, 2, 2), set(&mut rng, 1, 2)).unwrap();
        assert!(g.remove_edge(1, 0));
        assert_eq!(
            gat_aggregate(&mut g, &w).unwrap_err(),
            Error::DegenerateNeighborhood { vertex: 1 }
        );
    }

    #[test]
    fn coefficients_sum_to_one() {
        let mut rng = Rng::new(5);
        let w = EncoderWeights::random(&mut rng, 4, 4, 2, 1.0).unwrap();
        let mut g = build_complete(set(&mut rng, 5, 4)).unwrap();
        gat_aggregate(&mut g, &w).unwrap();
        for per_head in coefficient_sums(&g).unwrap() {
            for s in per_head {
                assert!((s - 1.0).abs() <= 1e-12);
            }
        }
    }
}
