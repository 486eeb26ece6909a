//! Saliency explanations and explanation-quality metrics.
//!
//! A soft explanation scores every node by the L1 norm of the gradient of a
//! target logit w.r.t. that node's feature row. Hardening turns the scores
//! into an edge-retention mask by letting each node keep the edges to its
//! `⌈k·deg⌉` most important neighbors.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::gcn::{self, argmax, ForwardTape, ModelParams};
use crate::graph::{EdgeMask, Graph, NormalizedAdjacency};

/// Probability floor used inside every KL computation.
pub const KL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplainerKind {
    ApproxSaliency,
    ExactSaliency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    /// Fraction `k` of each node's neighbors kept in the hard explanation.
    pub k: f64,
    pub explainer: ExplainerKind,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            k: 0.25,
            explainer: ExplainerKind::ApproxSaliency,
        }
    }
}

impl ExplainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k <= 1.0) {
            return Err(Error::Config(format!("explain.k must be in (0, 1], got {}", self.k)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftExplanation {
    pub node_importance: Vec<f64>,
    pub targets: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplanationSubgraph {
    pub mask: EdgeMask,
}

/// One-hot upstream gradient selecting each target's argmax-class logit.
fn target_seed(logits: &Array2<f64>, targets: &[usize]) -> Array2<f64> {
    let mut seed = Array2::zeros(logits.dim());
    for &v in targets {
        let c = argmax(logits.row(v).iter().copied());
        seed[[v, c]] += 1.0;
    }
    seed
}

/// Saliency of the scalar `Σ_{v ∈ targets} logit[v, argmax_v]` w.r.t. the
/// features, reusing an existing forward tape.
pub fn saliency_from_tape(tape: &ForwardTape<'_>, targets: &[usize]) -> Result<SoftExplanation> {
    let n = tape.logits().nrows();
    if targets.is_empty() {
        return Err(Error::InvalidArgument("empty target set".into()));
    }
    if let Some(&v) = targets.iter().find(|&&v| v >= n) {
        return Err(Error::InvalidArgument(format!("node {v} out of range for {n} nodes")));
    }
    let seed = target_seed(tape.logits(), targets);
    let grad = gcn::input_gradient(tape, &seed.view())?;
    Ok(SoftExplanation {
        node_importance: grad.row_l1(),
        targets: targets.to_vec(),
    })
}

/// Saliency map for a single node.
pub fn exact_saliency(
    params: &ModelParams,
    adj: &NormalizedAdjacency,
    x: &FeatureMatrix,
    v: usize,
) -> Result<SoftExplanation> {
    let tape = gcn::forward(params, adj, x)?;
    saliency_from_tape(&tape, &[v])
}

/// One forward and one backward pass for the whole candidate batch; the
/// resulting importance vector is shared by all candidates.
pub fn approx_saliency(
    params: &ModelParams,
    adj: &NormalizedAdjacency,
    x: &FeatureMatrix,
    candidates: &[usize],
) -> Result<SoftExplanation> {
    let tape = gcn::forward(params, adj, x)?;
    saliency_from_tape(&tape, candidates)
}

fn retained_count(k: f64, degree: usize) -> usize {
    // the epsilon keeps products like 0.3 * 10 from rounding up
    ((k * degree as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Per-node top-`⌈k·deg⌉` neighbor retention. Ranking is by importance
/// descending with ties going to the lower node id; an edge survives if
/// either endpoint keeps it.
pub fn harden(soft: &SoftExplanation, g: &Graph, k: f64) -> ExplanationSubgraph {
    harden_scores(&soft.node_importance, g, k)
}

pub fn harden_scores(importance: &[f64], g: &Graph, k: f64) -> ExplanationSubgraph {
    let mut keep = vec![false; g.num_stored_edges()];
    for u in 0..g.num_nodes() {
        let start = g.edge_range(u).start;
        for i in top_neighbor_slots(importance, g, u, k) {
            keep[start + i] = true;
            keep[g.reverse_edge(start + i)] = true;
        }
    }
    ExplanationSubgraph {
        mask: EdgeMask::new(keep),
    }
}

/// Neighbors `u` retains under fraction `k`, most important first.
pub fn top_neighbors(importance: &[f64], g: &Graph, u: usize, k: f64) -> Vec<usize> {
    let nbrs = g.neighbors(u);
    top_neighbor_slots(importance, g, u, k)
        .into_iter()
        .map(|i| nbrs[i])
        .collect()
}

fn top_neighbor_slots(importance: &[f64], g: &Graph, u: usize, k: f64) -> Vec<usize> {
    let nbrs = g.neighbors(u);
    let take = retained_count(k, nbrs.len()).min(nbrs.len());
    let mut order: Vec<usize> = (0..nbrs.len()).collect();
    // neighbor lists are sorted, so a stable sort keeps lower ids first on ties
    order.sort_by(|&a, &b| importance[nbrs[b]].total_cmp(&importance[nbrs[a]]));
    order.truncate(take);
    order
}

/// `KL(p ‖ q)` in nats after flooring both distributions at [`KL_FLOOR`] and renormalizing.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "distribution length mismatch");
    let floor = |d: &[f64]| {
        let f: Vec<f64> = d.iter().map(|&x| x.max(KL_FLOOR)).collect();
        let s: f64 = f.iter().sum();
        f.into_iter().map(|x| x / s).collect::<Vec<_>>()
    };
    let (p, q) = (floor(p), floor(q));
    p.iter().zip(&q).map(|(&a, &b)| a * (a / b).ln()).sum::<f64>().max(0.0)
}

fn node_prob(params: &ModelParams, adj: &NormalizedAdjacency, x: &FeatureMatrix, v: usize) -> Result<Vec<f64>> {
    if v >= adj.num_nodes() {
        return Err(Error::InvalidArgument(format!("node {v} out of range")));
    }
    let prob = gcn::predict_proba(params, adj, x)?;
    Ok(prob.row(v).to_vec())
}

/// `1 − KL(P_full(v) ‖ P_exp(v))`.
pub fn fidelity_sufficiency(
    params: &ModelParams,
    adj_full: &NormalizedAdjacency,
    adj_exp: &NormalizedAdjacency,
    x: &FeatureMatrix,
    v: usize,
) -> Result<f64> {
    let p = node_prob(params, adj_full, x, v)?;
    let q = node_prob(params, adj_exp, x, v)?;
    Ok(1.0 - kl_divergence(&p, &q))
}

/// `KL(P_full(v) ‖ P_complement(v))` where the complement graph has the explanation edges removed.
pub fn kl_necessity(
    params: &ModelParams,
    adj_full: &NormalizedAdjacency,
    adj_complement: &NormalizedAdjacency,
    x: &FeatureMatrix,
    v: usize,
) -> Result<f64> {
    let p = node_prob(params, adj_full, x, v)?;
    let q = node_prob(params, adj_complement, x, v)?;
    Ok(kl_divergence(&p, &q))
}

fn softmax1(z: &Array1<f64>) -> Vec<f64> {
    let m = z.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e: Vec<f64> = z.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Per-node exact-saliency explanation metrics over a node set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplanationMetrics {
    pub accuracy_sufficiency: f64,
    pub mean_kl_sufficiency: f64,
    pub mean_kl_necessity: f64,
}

/// For each node: exact saliency, hardening with `k`, then compare the full
/// prediction with the prediction on the explanation subgraph (sufficiency)
/// and on the graph with the explanation removed (necessity).
pub fn explanation_metrics(
    params: &ModelParams,
    g: &Graph,
    x: &FeatureMatrix,
    nodes: &[usize],
    k: f64,
) -> Result<ExplanationMetrics> {
    if nodes.is_empty() {
        return Err(Error::InvalidArgument("empty evaluation node set".into()));
    }
    let adj = NormalizedAdjacency::new(g);
    let tape = gcn::forward(params, &adj, x)?;
    let full_prob = gcn::softmax(tape.logits());
    let mut matches = 0usize;
    let mut kl_suf = 0.0;
    let mut kl_nec = 0.0;
    for &v in nodes {
        let soft = saliency_from_tape(&tape, &[v])?;
        let sub = harden(&soft, g, k);
        let exp_adj = NormalizedAdjacency::new(&g.apply_edge_mask(&sub.mask)?);
        let comp_adj = NormalizedAdjacency::new(&g.remove_edges(&sub.mask)?);
        let p = full_prob.row(v).to_vec();
        let q_exp = softmax1(&gcn::node_logits_from_projection(
            params,
            &exp_adj,
            tape.projection(),
            v,
        ));
        let q_comp = softmax1(&gcn::node_logits_from_projection(
            params,
            &comp_adj,
            tape.projection(),
            v,
        ));
        if argmax(p.iter().copied()) == argmax(q_exp.iter().copied()) {
            matches += 1;
        }
        kl_suf += kl_divergence(&p, &q_exp);
        kl_nec += kl_divergence(&p, &q_comp);
    }
    let n = nodes.len() as f64;
    Ok(ExplanationMetrics {
        accuracy_sufficiency: matches as f64 / n,
        mean_kl_sufficiency: kl_suf / n,
        mean_kl_necessity: kl_nec / n,
    })
}

/// Fraction of `nodes` whose argmax prediction is unchanged on their own
/// hardened exact-saliency explanation subgraph.
pub fn accuracy_sufficiency(
    params: &ModelParams,
    g: &Graph,
    x: &FeatureMatrix,
    nodes: &[usize],
    k: f64,
) -> Result<f64> {
    explanation_metrics(params, g, x, nodes, k).map(|m| m.accuracy_sufficiency)
}

/// Shared-subgraph fidelity for a candidate batch.
#[derive(Debug, Clone)]
pub struct BatchFidelity {
    pub explanation: SoftExplanation,
    pub subgraph: ExplanationSubgraph,
    /// `1 − KL` for every node, evaluated on the single shared subgraph.
    pub fidelity: Vec<f64>,
}

/// Approximate saliency over `candidates`, one hardened subgraph, one extra
/// forward pass on it, and per-node fidelity sufficiency.
pub fn batch_fidelity(tape: &ForwardTape<'_>, g: &Graph, candidates: &[usize], k: f64) -> Result<BatchFidelity> {
    let explanation = saliency_from_tape(tape, candidates)?;
    let subgraph = harden(&explanation, g, k);
    let exp_adj = NormalizedAdjacency::new(&g.apply_edge_mask(&subgraph.mask)?);
    let exp_logits = gcn::logits_from_projection(tape.params(), &exp_adj, tape.projection())?;
    let p = gcn::softmax(tape.logits());
    let q = gcn::softmax(&exp_logits);
    let fidelity = p
        .rows()
        .into_iter()
        .zip(q.rows())
        .map(|(a, b)| 1.0 - kl_divergence(a.as_slice().expect("contiguous"), b.as_slice().expect("contiguous")))
        .collect();
    Ok(BatchFidelity {
        explanation,
        subgraph,
        fidelity,
    })
}

/// Fidelity sufficiency for training-time selection, as a vector over all
/// nodes. The approximate explainer scores every node on one shared
/// subgraph; the exact explainer hardens a separate saliency map per node in
/// `candidates` and leaves the other entries NaN.
pub fn candidate_fidelity(
    tape: &ForwardTape<'_>,
    g: &Graph,
    candidates: &[usize],
    k: f64,
    kind: ExplainerKind,
) -> Result<Vec<f64>> {
    match kind {
        ExplainerKind::ApproxSaliency => Ok(batch_fidelity(tape, g, candidates, k)?.fidelity),
        ExplainerKind::ExactSaliency => {
            let full = gcn::softmax(tape.logits());
            let mut out = vec![f64::NAN; g.num_nodes()];
            for &v in candidates {
                let sub = harden(&saliency_from_tape(tape, &[v])?, g, k);
                let exp_adj = NormalizedAdjacency::new(&g.apply_edge_mask(&sub.mask)?);
                let q = softmax1(&gcn::node_logits_from_projection(
                    tape.params(),
                    &exp_adj,
                    tape.projection(),
                    v,
                ));
                let p = full.row(v).to_vec();
                out[v] = 1.0 - kl_divergence(&p, &q);
            }
            Ok(out)
        }
    }
}
