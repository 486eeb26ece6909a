use rand::Rng as _;

use super::mapping::DropProbabilities;
use crate::error::{Error, Result};
use crate::graph::{EdgeMask, Graph, NodeMask};
use crate::rng::Rng;

/// `b_v ~ Bernoulli(1 − p(v))`. Exactly one uniform draw per node, whatever
/// the probabilities, so equal probability vectors consume the stream identically.
pub fn sample_node_mask(probs: &DropProbabilities, rng: &mut Rng) -> NodeMask {
    NodeMask::new(probs.as_slice().iter().map(|&p| rng.random::<f64>() >= p).collect())
}

/// One Bernoulli draw per undirected pair (in [`Graph::edges`] order),
/// mirrored onto both stored directions.
pub fn sample_edge_mask(g: &Graph, probs: &DropProbabilities, rng: &mut Rng) -> Result<EdgeMask> {
    if probs.len() != g.num_edges() {
        return Err(Error::shape("edge probabilities", g.num_edges(), probs.len()));
    }
    let keep_pair: Vec<bool> = probs.as_slice().iter().map(|&p| rng.random::<f64>() >= p).collect();
    Ok(mask_from_pair_flags(g, &keep_pair))
}

/// Expands per-pair flags (in [`Graph::edges`] order) into a symmetric stored-edge mask.
pub fn mask_from_pair_flags(g: &Graph, keep_pair: &[bool]) -> EdgeMask {
    let mut keep = vec![false; g.num_stored_edges()];
    let mut pair = 0;
    for u in 0..g.num_nodes() {
        for e in g.edge_range(u) {
            let v = g.stored_edge(e).1;
            if u < v {
                keep[e] = keep_pair[pair];
                keep[g.reverse_edge(e)] = keep_pair[pair];
                pair += 1;
            }
        }
    }
    EdgeMask::new(keep)
}

pub fn random_drop_node(g: &Graph, p: f64, rng: &mut Rng) -> Result<Graph> {
    let mask = sample_node_mask(&DropProbabilities::uniform(g.num_nodes(), p), rng);
    g.apply_node_mask(&mask)
}

pub fn random_drop_edge(g: &Graph, p: f64, rng: &mut Rng) -> Result<Graph> {
    let mask = sample_edge_mask(g, &DropProbabilities::uniform(g.num_edges(), p), rng)?;
    g.apply_edge_mask(&mask)
}
