//! Confidence gating, probability biasing and Bernoulli dropping.

mod mapping;
mod sampling;
pub mod yeo_johnson;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use mapping::{average_ranks, map_scores, map_to_probabilities, DropProbabilities, Mapping, MappingParams};
pub use sampling::{mask_from_pair_flags, random_drop_edge, random_drop_node, sample_edge_mask, sample_node_mask};
pub use yeo_johnson::{fit_lambda, yeo_johnson, LambdaFit};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropMethod {
    None,
    Node,
    Edge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SelectionCriterion {
    XaiDrop,
    Random,
    HighConfidence,
    LowConfidence,
    LowConfPoorXai,
    HighConfGoodXai,
    LowConfGoodXai,
    LowConfRandom,
    HighConfRandom,
    PoorXai,
    GoodXai,
}

impl SelectionCriterion {
    pub const ALL: [SelectionCriterion; 11] = [
        SelectionCriterion::XaiDrop,
        SelectionCriterion::Random,
        SelectionCriterion::HighConfidence,
        SelectionCriterion::LowConfidence,
        SelectionCriterion::LowConfPoorXai,
        SelectionCriterion::HighConfGoodXai,
        SelectionCriterion::LowConfGoodXai,
        SelectionCriterion::LowConfRandom,
        SelectionCriterion::HighConfRandom,
        SelectionCriterion::PoorXai,
        SelectionCriterion::GoodXai,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SelectionCriterion::XaiDrop => "XaiDrop",
            SelectionCriterion::Random => "Random",
            SelectionCriterion::HighConfidence => "HighConfidence",
            SelectionCriterion::LowConfidence => "LowConfidence",
            SelectionCriterion::LowConfPoorXai => "LowConfPoorXai",
            SelectionCriterion::HighConfGoodXai => "HighConfGoodXai",
            SelectionCriterion::LowConfGoodXai => "LowConfGoodXai",
            SelectionCriterion::LowConfRandom => "LowConfRandom",
            SelectionCriterion::HighConfRandom => "HighConfRandom",
            SelectionCriterion::PoorXai => "PoorXai",
            SelectionCriterion::GoodXai => "GoodXai",
        }
    }

    /// Whether fidelity scores are consumed.
    pub fn needs_explanations(self) -> bool {
        !matches!(
            self,
            SelectionCriterion::Random
                | SelectionCriterion::HighConfidence
                | SelectionCriterion::LowConfidence
                | SelectionCriterion::LowConfRandom
                | SelectionCriterion::HighConfRandom
        )
    }

    /// Nodes whose explanations the criterion reads, or `None` if it reads none.
    pub fn explained_set(self, conf: &[f64], theta: f64) -> Option<Vec<usize>> {
        use SelectionCriterion::*;
        match self {
            XaiDrop | HighConfGoodXai => Some(select_candidates(conf, theta)),
            LowConfPoorXai | LowConfGoodXai => Some(low_confidence(conf, theta)),
            PoorXai | GoodXai => Some((0..conf.len()).collect()),
            _ => None,
        }
    }
}

impl fmt::Display for SelectionCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SelectionCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| *c != '_' && *c != '-')
            .collect::<String>()
            .to_lowercase();
        SelectionCriterion::ALL
            .into_iter()
            .find(|c| c.name().to_lowercase() == norm)
            .ok_or_else(|| Error::Config(format!("unknown selection criterion '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DropConfig {
    pub method: DropMethod,
    pub p: f64,
    pub theta: f64,
    pub mapping: Mapping,
    pub criterion: SelectionCriterion,
    /// Overrides the run seed for the dropping stream when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub prob_floor: f64,
    pub prob_ceiling: f64,
    pub spread_divisor: f64,
}

impl Default for DropConfig {
    fn default() -> Self {
        DropConfig {
            method: DropMethod::None,
            p: 0.5,
            theta: 0.9,
            mapping: Mapping::GaussianYeoJohnson,
            criterion: SelectionCriterion::XaiDrop,
            seed: None,
            prob_floor: 0.01,
            prob_ceiling: 0.99,
            spread_divisor: 3.0,
        }
    }
}

impl DropConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::Config(format!("drop.p must lie in (0, 1), got {}", self.p)));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Config(format!(
                "drop.theta must lie in [0, 1], got {}",
                self.theta
            )));
        }
        self.mapping_params().validate()
    }

    pub fn mapping_params(&self) -> MappingParams {
        MappingParams {
            floor: self.prob_floor,
            ceiling: self.prob_ceiling,
            spread_divisor: self.spread_divisor,
        }
    }
}

/// Maximum class probability per row.
pub fn confidence(prob: &Array2<f64>) -> Vec<f64> {
    prob.rows()
        .into_iter()
        .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

/// `{v : conf[v] ≥ θ}` in increasing order.
pub fn select_candidates(conf: &[f64], theta: f64) -> Vec<usize> {
    (0..conf.len()).filter(|&v| conf[v] >= theta).collect()
}

fn low_confidence(conf: &[f64], theta: f64) -> Vec<usize> {
    (0..conf.len()).filter(|&v| conf[v] < theta).collect()
}

/// Uniform dropping concentrated on `gate`: its members share one raised
/// probability and everyone else a lowered one, keeping the overall mean at `p`.
fn gated_uniform(n: usize, gate: &[usize], p: f64, params: &MappingParams) -> DropProbabilities {
    if gate.is_empty() || gate.len() == n {
        return DropProbabilities::uniform(n, p);
    }
    let inside = (p * n as f64 / gate.len() as f64).min(params.ceiling);
    let outside = ((p * n as f64 - inside * gate.len() as f64) / (n - gate.len()) as f64).max(0.0);
    let mut probs = vec![outside; n];
    for &v in gate {
        probs[v] = inside;
    }
    DropProbabilities::new(probs)
}

fn biased(
    n: usize,
    p: f64,
    members: &[usize],
    score: impl Fn(usize) -> f64,
    mapping: Mapping,
    params: &MappingParams,
) -> DropProbabilities {
    let scores: Vec<f64> = members.iter().map(|&v| score(v)).collect();
    let q = map_scores(&scores, p, mapping, params);
    DropProbabilities::with_candidates(n, p, members, &q)
}

/// Per-node dropping probabilities for one ablation criterion.
///
/// `fsuf` must cover at least the nodes in [`SelectionCriterion::explained_set`];
/// other entries are ignored.
pub fn apply_criterion(
    criterion: SelectionCriterion,
    conf: &[f64],
    fsuf: &[f64],
    theta: f64,
    p: f64,
    mapping: Mapping,
    params: &MappingParams,
) -> Result<DropProbabilities> {
    use SelectionCriterion::*;
    let n = conf.len();
    if criterion.needs_explanations() && fsuf.len() != n {
        return Err(Error::shape("fidelity scores", n, fsuf.len()));
    }
    let all: Vec<usize> = (0..n).collect();
    Ok(match criterion {
        Random => DropProbabilities::uniform(n, p),
        HighConfidence => biased(n, p, &all, |v| conf[v], mapping, params),
        LowConfidence => biased(n, p, &all, |v| -conf[v], mapping, params),
        HighConfRandom => gated_uniform(n, &select_candidates(conf, theta), p, params),
        LowConfRandom => gated_uniform(n, &low_confidence(conf, theta), p, params),
        XaiDrop | LowConfPoorXai | PoorXai => {
            let set = criterion.explained_set(conf, theta).unwrap_or_default();
            biased(n, p, &set, |v| 1.0 - fsuf[v], mapping, params)
        }
        HighConfGoodXai | LowConfGoodXai | GoodXai => {
            let set = criterion.explained_set(conf, theta).unwrap_or_default();
            biased(n, p, &set, |v| fsuf[v], mapping, params)
        }
    })
}

/// Nodes split by confidence gate (HC/LC) and explanation quality (GE/PE).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadrantCounts {
    pub hc_ge: usize,
    pub hc_pe: usize,
    pub lc_ge: usize,
    pub lc_pe: usize,
}

impl QuadrantCounts {
    pub fn total(&self) -> usize {
        self.hc_ge + self.hc_pe + self.lc_ge + self.lc_pe
    }
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

/// Good explanation means `fsuf ≥ threshold`; the threshold defaults to the median.
pub fn quadrant_counts(conf: &[f64], fsuf: &[f64], theta: f64, fsuf_threshold: Option<f64>) -> QuadrantCounts {
    let t = fsuf_threshold.unwrap_or_else(|| median(fsuf));
    let mut q = QuadrantCounts::default();
    for (&c, &f) in conf.iter().zip(fsuf) {
        match (c >= theta, f >= t) {
            (true, true) => q.hc_ge += 1,
            (true, false) => q.hc_pe += 1,
            (false, true) => q.lc_ge += 1,
            (false, false) => q.lc_pe += 1,
        }
    }
    q
}
