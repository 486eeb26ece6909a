use serde::{Deserialize, Serialize};

use super::yeo_johnson::{fit_lambda, transform};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mapping {
    GaussianYeoJohnson,
    EmpiricalCdf,
    Uniform,
}

/// Clamp range and spread of the score-to-probability mapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MappingParams {
    pub floor: f64,
    pub ceiling: f64,
    /// Gaussian spread is `min(p, 1 - p) / spread_divisor`.
    pub spread_divisor: f64,
}

impl Default for MappingParams {
    fn default() -> Self {
        MappingParams {
            floor: 0.01,
            ceiling: 0.99,
            spread_divisor: 3.0,
        }
    }
}

impl MappingParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.floor && self.floor < self.ceiling && self.ceiling <= 1.0) {
            return Err(Error::Config(
                "mapping clamp must satisfy 0 <= floor < ceiling <= 1".into(),
            ));
        }
        if !(self.spread_divisor > 0.0) {
            return Err(Error::Config("mapping spread_divisor must be positive".into()));
        }
        Ok(())
    }
}

/// Per-element dropping probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct DropProbabilities(Vec<f64>);

impl DropProbabilities {
    pub fn new(probs: Vec<f64>) -> Self {
        DropProbabilities(probs)
    }

    pub fn uniform(n: usize, p: f64) -> Self {
        DropProbabilities(vec![p; n])
    }

    /// `p` everywhere except at `candidates`, which take `candidate_probs`.
    pub fn with_candidates(n: usize, p: f64, candidates: &[usize], candidate_probs: &[f64]) -> Self {
        assert_eq!(candidates.len(), candidate_probs.len());
        let mut out = vec![p; n];
        for (&v, &q) in candidates.iter().zip(candidate_probs) {
            out[v] = q;
        }
        DropProbabilities(out)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

/// Average 1-based ranks, ties sharing the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Clamps `raw + c` into range, choosing the constant `c` by bisection so
/// that the clamped mean equals `target`.
fn shift_to_mean(raw: &[f64], target: f64, lo: f64, hi: f64) -> Vec<f64> {
    let clamp_mean = |c: f64| raw.iter().map(|&r| (r + c).clamp(lo, hi)).sum::<f64>() / raw.len() as f64;
    let (mut a, mut b) = (-1.0 - (hi - lo), 1.0 + (hi - lo));
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if clamp_mean(m) < target {
            a = m;
        } else {
            b = m;
        }
    }
    let c = 0.5 * (a + b);
    raw.iter().map(|&r| (r + c).clamp(lo, hi)).collect()
}

/// Maps "badness" scores (higher = drop more) to probabilities with mean `p`.
/// The mapping is nondecreasing in the score.
pub fn map_scores(scores: &[f64], p: f64, mapping: Mapping, params: &MappingParams) -> Vec<f64> {
    let n = scores.len();
    if n == 0 {
        return Vec::new();
    }
    let (lo, hi) = (params.floor, params.ceiling);
    let constant = scores.iter().all(|&s| s == scores[0]);
    match mapping {
        Mapping::Uniform => vec![p; n],
        _ if constant => vec![p; n],
        Mapping::GaussianYeoJohnson => {
            let fit = fit_lambda(scores);
            if fit.degenerate {
                return vec![p; n];
            }
            let ys: Vec<f64> = scores.iter().map(|&s| transform(s, fit.lambda)).collect();
            let mean = ys.iter().sum::<f64>() / n as f64;
            let std = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            if !(std > 0.0) {
                return vec![p; n];
            }
            let spread = p.min(1.0 - p) / params.spread_divisor;
            let raw: Vec<f64> = ys.iter().map(|y| p + spread * (y - mean) / std).collect();
            shift_to_mean(&raw, p, lo, hi)
        }
        Mapping::EmpiricalCdf => {
            let raw: Vec<f64> = average_ranks(scores)
                .into_iter()
                .map(|r| 2.0 * p * r / (n as f64 + 1.0))
                .collect();
            shift_to_mean(&raw, p, lo, hi)
        }
    }
}

/// Candidate fidelity sufficiency to dropping probabilities; the response is
/// `1 − F_suf`, so worse explanations get higher probabilities.
pub fn map_to_probabilities(fsuf: &[f64], p: f64, mapping: Mapping, params: &MappingParams) -> Vec<f64> {
    let scores: Vec<f64> = fsuf.iter().map(|f| 1.0 - f).collect();
    map_scores(&scores, p, mapping, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: MappingParams = MappingParams {
        floor: 0.01,
        ceiling: 0.99,
        spread_divisor: 3.0,
    };

    #[test]
    fn constant_scores_map_to_p() {
        for m in [Mapping::GaussianYeoJohnson, Mapping::EmpiricalCdf, Mapping::Uniform] {
            assert_eq!(map_to_probabilities(&[0.7; 5], 0.5, m, &P), vec![0.5; 5]);
        }
    }

    #[test]
    fn uniform_is_constant() {
        assert_eq!(
            map_to_probabilities(&[0.1, 0.9, 0.5], 0.3, Mapping::Uniform, &P),
            vec![0.3; 3]
        );
    }

    #[test]
    fn two_candidates_gaussian() {
        let q = map_to_probabilities(&[0.9, 0.1], 0.5, Mapping::GaussianYeoJohnson, &P);
        assert!(q[1] > q[0]);
        assert!(((q[0] + q[1]) / 2.0 - 0.5).abs() <= 0.02);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn ecdf_mean_survives_heavy_clamping() {
        let fsuf: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let q = map_to_probabilities(&fsuf, 0.8, Mapping::EmpiricalCdf, &P);
        let mean = q.iter().sum::<f64>() / q.len() as f64;
        assert!((mean - 0.8).abs() < 1e-9);
        assert!(q.iter().all(|&x| (0.01..=0.99).contains(&x)));
    }

    #[test]
    fn empty_input() {
        assert!(map_to_probabilities(&[], 0.5, Mapping::GaussianYeoJohnson, &P).is_empty());
        let probs = DropProbabilities::with_candidates(4, 0.5, &[], &[]);
        assert_eq!(probs.as_slice(), &[0.5; 4]);
    }
}
