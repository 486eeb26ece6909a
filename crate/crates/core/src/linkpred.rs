//! Link prediction with a dot-product decoder on GCN embeddings, edge-level
//! confidence and explanations, and the edge-dropping training loop.

use std::collections::HashSet;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureMatrix};
use crate::drop::{self, average_ranks, DropConfig, DropMethod, DropProbabilities};
use crate::error::{Error, Result};
use crate::explain::{self, ExplainConfig, ExplainerKind, ExplanationSubgraph, SoftExplanation};
use crate::gcn::{self, AdamState, ForwardTape, ModelParams, Projection, TrainConfig};
use crate::graph::{Graph, NormalizedAdjacency};
use crate::harness::SeedResult;
use crate::rng::{self, streams};

pub type Pair = (usize, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub val_fraction: f64,
    pub test_fraction: f64,
    /// Seed of the edge split, shared by all training seeds.
    pub split_seed: u64,
    /// Compute per-edge explanation metrics on the test positives.
    pub explain_metrics: bool,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            val_fraction: 0.1,
            test_fraction: 0.2,
            split_seed: 0,
            explain_metrics: true,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |f: f64| f > 0.0 && f < 1.0;
        if !ok(self.val_fraction) || !ok(self.test_fraction) || self.val_fraction + self.test_fraction >= 1.0 {
            return Err(Error::Config(
                "link.val_fraction and link.test_fraction must be in (0, 1) with sum below 1".into(),
            ));
        }
        Ok(())
    }
}

/// Positive pairs per split plus equally many negatives for validation and test.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSplits {
    pub train_pos: Vec<Pair>,
    pub val_pos: Vec<Pair>,
    pub test_pos: Vec<Pair>,
    pub val_neg: Vec<Pair>,
    pub test_neg: Vec<Pair>,
}

fn ordered(u: usize, v: usize) -> Pair {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

/// `count` distinct non-edges of `g` that avoid `exclude`, as `(u, v)` with `u < v`.
pub fn sample_negatives(g: &Graph, count: usize, exclude: &HashSet<Pair>, rng: &mut rng::Rng) -> Result<Vec<Pair>> {
    let n = g.num_nodes();
    let capacity = (n * n.saturating_sub(1) / 2).saturating_sub(g.num_edges() + exclude.len());
    if count > capacity {
        return Err(Error::InvalidArgument(format!(
            "cannot draw {count} negative pairs from a graph with {capacity} free pairs"
        )));
    }
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u == v || g.has_edge(u, v) {
            continue;
        }
        let pair = ordered(u, v);
        if exclude.contains(&pair) || !seen.insert(pair) {
            continue;
        }
        out.push(pair);
    }
    Ok(out)
}

/// Shuffles the undirected edges and splits them `floor(m·val)` / `floor(m·test)` / rest.
pub fn split_edges_for_linkpred(
    g: &Graph,
    val_fraction: f64,
    test_fraction: f64,
    rng: &mut rng::Rng,
) -> Result<EdgeSplits> {
    let mut pairs: Vec<Pair> = g.edges().collect();
    let m = pairs.len();
    let n_val = (m as f64 * val_fraction).floor() as usize;
    let n_test = (m as f64 * test_fraction).floor() as usize;
    if n_val + n_test >= m {
        return Err(Error::InvalidArgument(format!("{m} edges are too few to split")));
    }
    pairs.shuffle(rng);
    let test_pos = pairs[..n_test].to_vec();
    let val_pos = pairs[n_test..n_test + n_val].to_vec();
    let train_pos = pairs[n_test + n_val..].to_vec();
    let mut exclude = HashSet::new();
    let test_neg = sample_negatives(g, n_test, &exclude, rng)?;
    exclude.extend(test_neg.iter().copied());
    let val_neg = sample_negatives(g, n_val, &exclude, rng)?;
    Ok(EdgeSplits {
        train_pos,
        val_pos,
        test_pos,
        val_neg,
        test_neg,
    })
}

/// Final-layer GCN representations.
pub fn encode(params: &ModelParams, adj: &NormalizedAdjacency, x: &FeatureMatrix) -> Result<Array2<f64>> {
    Ok(gcn::forward(params, adj, x)?.logits().clone())
}

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `⟨emb_u, emb_v⟩` per pair.
pub fn edge_logits(emb: &Array2<f64>, pairs: &[Pair]) -> Vec<f64> {
    pairs.iter().map(|&(u, v)| emb.row(u).dot(&emb.row(v))).collect()
}

/// `logistic(⟨emb_u, emb_v⟩)` per pair.
pub fn score_edges(emb: &Array2<f64>, pairs: &[Pair]) -> Vec<f64> {
    edge_logits(emb, pairs).into_iter().map(logistic).collect()
}

/// Mean binary cross-entropy over pairs, taking pre-logistic scores, with
/// the gradient w.r.t. those scores.
pub fn bce_loss(logits: &[f64], labels: &[bool]) -> Result<(f64, Vec<f64>)> {
    if logits.len() != labels.len() {
        return Err(Error::shape("pair labels", logits.len(), labels.len()));
    }
    if logits.is_empty() {
        return Err(Error::InvalidArgument("empty pair set".into()));
    }
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (&z, &y) in logits.iter().zip(labels) {
        let y = f64::from(u8::from(y));
        loss += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
        grad.push((logistic(z) - y) / n);
    }
    Ok((loss / n, grad))
}

/// Pushes per-pair gradients back onto the embedding rows.
pub fn decoder_backward(emb: &Array2<f64>, pairs: &[Pair], dlogits: &[f64]) -> Array2<f64> {
    let mut d = Array2::zeros(emb.dim());
    for (&(u, v), &g) in pairs.iter().zip(dlogits) {
        d.row_mut(u).scaled_add(g, &emb.row(v));
        d.row_mut(v).scaled_add(g, &emb.row(u));
    }
    d
}

/// Area under the ROC curve by the rank-sum statistic; tied scores count one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("auc labels", scores.len(), labels.len()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument(
            "auc needs both positive and negative pairs".into(),
        ));
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let np = n_pos as f64;
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

/// `max(s, 1 − s)` per edge.
pub fn edge_confidence(scores: &[f64]) -> Vec<f64> {
    scores.iter().map(|&s| s.max(1.0 - s)).collect()
}

fn bernoulli_kl(p: f64, q: f64) -> f64 {
    explain::kl_divergence(&[p, 1.0 - p], &[q, 1.0 - q])
}

#[derive(Debug, Clone)]
pub struct EdgeExplanation {
    pub explanation: SoftExplanation,
    pub subgraph: ExplanationSubgraph,
    /// `1 − KL` between full-graph and explanation-subgraph edge Bernoullis,
    /// for every pair passed as `scored`.
    pub fidelity: Vec<f64>,
}

fn endpoint_seed(emb: &Array2<f64>, pairs: &[Pair]) -> Array2<f64> {
    decoder_backward(emb, pairs, &vec![1.0; pairs.len()])
}

/// Saliency of the summed candidate logits in one backward pass, hardened
/// with `k`, then per-pair fidelity for `scored` on the shared subgraph.
pub fn edge_explanation(
    tape: &ForwardTape<'_>,
    g: &Graph,
    candidates: &[Pair],
    scored: &[Pair],
    k: f64,
) -> Result<EdgeExplanation> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("empty candidate edge set".into()));
    }
    let emb = tape.logits();
    let grad = gcn::input_gradient(tape, &endpoint_seed(emb, candidates).view())?;
    let mut targets: Vec<usize> = candidates.iter().flat_map(|&(u, v)| [u, v]).collect();
    targets.sort_unstable();
    targets.dedup();
    let explanation = SoftExplanation {
        node_importance: grad.row_l1(),
        targets,
    };
    let subgraph = explain::harden(&explanation, g, k);
    let exp_adj = NormalizedAdjacency::new(&g.apply_edge_mask(&subgraph.mask)?);
    let exp_emb = gcn::logits_from_projection(tape.params(), &exp_adj, tape.projection())?;
    let full = score_edges(emb, scored);
    let sub = score_edges(&exp_emb, scored);
    let fidelity = full.iter().zip(&sub).map(|(&p, &q)| 1.0 - bernoulli_kl(p, q)).collect();
    Ok(EdgeExplanation {
        explanation,
        subgraph,
        fidelity,
    })
}

/// Per-edge exact-saliency metrics: whether the thresholded prediction
/// survives on the explanation subgraph, and Bernoulli KL sufficiency and
/// necessity.
pub fn edge_explanation_metrics(
    params: &ModelParams,
    g: &Graph,
    x: &FeatureMatrix,
    pairs: &[Pair],
    k: f64,
) -> Result<explain::ExplanationMetrics> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("empty evaluation pair set".into()));
    }
    let adj = NormalizedAdjacency::new(g);
    let tape = gcn::forward(params, &adj, x)?;
    let emb = tape.logits();
    let (mut matches, mut kl_suf, mut kl_nec) = (0usize, 0.0, 0.0);
    for &(u, v) in pairs {
        let grad = gcn::input_gradient(&tape, &endpoint_seed(emb, &[(u, v)]).view())?;
        let sub = explain::harden_scores(&grad.row_l1(), g, k);
        let exp_adj = NormalizedAdjacency::new(&g.apply_edge_mask(&sub.mask)?);
        let comp_adj = NormalizedAdjacency::new(&g.remove_edges(&sub.mask)?);
        let local = |a: &NormalizedAdjacency| {
            let zu = gcn::node_logits_from_projection(params, a, tape.projection(), u);
            let zv = gcn::node_logits_from_projection(params, a, tape.projection(), v);
            logistic(zu.dot(&zv))
        };
        let s = logistic(emb.row(u).dot(&emb.row(v)));
        let s_exp = local(&exp_adj);
        let s_comp = local(&comp_adj);
        if (s >= 0.5) == (s_exp >= 0.5) {
            matches += 1;
        }
        kl_suf += bernoulli_kl(s, s_exp);
        kl_nec += bernoulli_kl(s, s_comp);
    }
    let n = pairs.len() as f64;
    Ok(explain::ExplanationMetrics {
        accuracy_sufficiency: matches as f64 / n,
        mean_kl_sufficiency: kl_suf / n,
        mean_kl_necessity: kl_nec / n,
    })
}

/// Settings for one link-prediction run, shared across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTask<'a> {
    pub train: &'a TrainConfig,
    pub drop: &'a DropConfig,
    pub explain: &'a ExplainConfig,
    pub link: &'a LinkConfig,
    pub track_quadrants: bool,
}

#[derive(Debug, Clone, Copy)]
struct LinkEval {
    auc: f64,
    loss: f64,
}

fn improves(e: &LinkEval, best: &Option<LinkEval>) -> bool {
    match best {
        None => true,
        Some(b) => e.auc > b.auc || (e.auc == b.auc && e.loss < b.loss),
    }
}

struct Labeled {
    pairs: Vec<Pair>,
    labels: Vec<bool>,
}

impl Labeled {
    fn new(pos: &[Pair], neg: &[Pair]) -> Self {
        let pairs: Vec<Pair> = pos.iter().chain(neg).copied().collect();
        let labels = (0..pairs.len()).map(|i| i < pos.len()).collect();
        Labeled { pairs, labels }
    }

    fn eval(&self, emb: &Array2<f64>) -> Result<LinkEval> {
        let logits = edge_logits(emb, &self.pairs);
        let (loss, _) = bce_loss(&logits, &self.labels)?;
        // logistic is monotone, so ranking the logits gives the same AUC
        Ok(LinkEval {
            auc: auc(&logits, &self.labels)?,
            loss,
        })
    }
}

struct EdgePlan {
    graph: Option<Graph>,
    probs: Option<DropProbabilities>,
    quadrants: Option<drop::QuadrantCounts>,
}

fn plan_edges(
    tape: &ForwardTape<'_>,
    g: &Graph,
    train_pairs: &[Pair],
    task: &LinkTask<'_>,
    rng: &mut rng::Rng,
) -> Result<EdgePlan> {
    let cfg = task.drop;
    let m = train_pairs.len();
    let conf = edge_confidence(&score_edges(tape.logits(), train_pairs));
    let k = task.explain.k;
    let explained = match cfg.method {
        DropMethod::Edge => cfg.criterion.explained_set(&conf, cfg.theta).filter(|s| !s.is_empty()),
        _ => None,
    };
    let fsuf = match &explained {
        Some(set) => match task.explain.explainer {
            ExplainerKind::ApproxSaliency => {
                let cands: Vec<Pair> = set.iter().map(|&i| train_pairs[i]).collect();
                Some(edge_explanation(tape, g, &cands, train_pairs, k)?.fidelity)
            }
            ExplainerKind::ExactSaliency => {
                let mut f = vec![f64::NAN; m];
                for &i in set {
                    let pair = train_pairs[i];
                    f[i] = edge_explanation(tape, g, &[pair], &[pair], k)?.fidelity[0];
                }
                Some(f)
            }
        },
        None => None,
    };
    let quadrants = if task.track_quadrants && m > 0 {
        let tracked = match &explained {
            Some(set) if set.len() == m && task.explain.explainer == ExplainerKind::ApproxSaliency => {
                fsuf.clone().expect("computed above")
            }
            _ => edge_explanation(tape, g, train_pairs, train_pairs, k)?.fidelity,
        };
        Some(drop::quadrant_counts(&conf, &tracked, cfg.theta, None))
    } else {
        None
    };
    let (graph, probs) = match cfg.method {
        DropMethod::None => (None, None),
        DropMethod::Node => {
            return Err(Error::Config("link prediction drops edges, not nodes".into()));
        }
        DropMethod::Edge => {
            let params = cfg.mapping_params();
            let probs = match &fsuf {
                Some(f) => drop::apply_criterion(cfg.criterion, &conf, f, cfg.theta, cfg.p, cfg.mapping, &params)?,
                None if cfg.criterion.needs_explanations() => DropProbabilities::uniform(m, cfg.p),
                None => drop::apply_criterion(cfg.criterion, &conf, &[], cfg.theta, cfg.p, cfg.mapping, &params)?,
            };
            let mask = drop::sample_edge_mask(g, &probs, rng)?;
            (Some(g.apply_edge_mask(&mask)?), Some(probs))
        }
    };
    Ok(EdgePlan {
        graph,
        probs,
        quadrants,
    })
}

/// Trains one seed of edge-dropping link prediction and evaluates test AUC on
/// the undropped training graph.
pub fn run_xai_drop_edge(ds: &Dataset, task: &LinkTask<'_>, seed: u64) -> Result<SeedResult> {
    task.train.validate()?;
    task.drop.validate()?;
    task.explain.validate()?;
    task.link.validate()?;
    let start = Instant::now();
    let tc = task.train;
    let x = if tc.normalize_features {
        ds.features.row_normalized()
    } else {
        ds.features.clone()
    };
    let n = ds.num_nodes();
    let splits = split_edges_for_linkpred(
        &ds.graph,
        task.link.val_fraction,
        task.link.test_fraction,
        &mut rng::stream(task.link.split_seed, streams::SPLIT),
    )?;
    let g = Graph::from_edges(n, &splits.train_pos)?;
    // probabilities and masks follow the graph's own pair order
    let train_pairs: Vec<Pair> = g.edges().collect();
    let full_adj = NormalizedAdjacency::new(&g);
    let val = Labeled::new(&splits.val_pos, &splits.val_neg);
    let test = Labeled::new(&splits.test_pos, &splits.test_neg);
    let held_out: HashSet<Pair> = splits
        .val_pos
        .iter()
        .chain(&splits.test_pos)
        .chain(&splits.val_neg)
        .chain(&splits.test_neg)
        .copied()
        .collect();

    let mut params = ModelParams::glorot(
        x.dim(),
        tc.hidden_dim,
        tc.hidden_dim,
        tc.bias,
        &mut rng::stream(seed, streams::INIT),
    );
    let mut adam = AdamState::new(&params, tc.learning_rate, tc.weight_decay);
    let mut drop_rng = rng::stream(task.drop.seed.unwrap_or(seed), streams::DROP);
    let mut neg_rng = rng::stream(seed, streams::NEGATIVES);

    let mut best: Option<LinkEval> = None;
    let mut best_params = params.clone();
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut epochs_run = 0;
    let mut quadrants = Vec::new();
    let mut prob_sum = vec![0.0; train_pairs.len()];
    let mut prob_epochs = 0usize;

    for epoch in 0..tc.epochs {
        let mut step = |params: &mut ModelParams| -> Result<Option<LinkEval>> {
            let proj = Projection::new(params, &x)?;
            let tape = gcn::forward_with(params, &full_adj, &x, proj.clone())?;
            let e = val.eval(tape.logits())?;
            log::debug!("epoch {epoch}: val auc {:.4}, val loss {:.4}", e.auc, e.loss);
            let improved = improves(&e, &best);
            if improved {
                best_params = params.clone();
                best_epoch = epoch;
            }
            let plan = plan_edges(&tape, &g, &train_pairs, task, &mut drop_rng)?;
            if let Some(q) = plan.quadrants {
                quadrants.push(q);
            }
            if let Some(p) = &plan.probs {
                for (s, q) in prob_sum.iter_mut().zip(p.as_slice()) {
                    *s += q;
                }
                prob_epochs += 1;
            }
            let negatives = sample_negatives(&g, train_pairs.len(), &held_out, &mut neg_rng)?;
            let batch = Labeled::new(&train_pairs, &negatives);
            let grads_on = |t: &ForwardTape<'_>| -> Result<gcn::Gradients> {
                let emb = t.logits();
                let (_, dl) = bce_loss(&edge_logits(emb, &batch.pairs), &batch.labels)?;
                let demb = decoder_backward(emb, &batch.pairs, &dl);
                gcn::weight_gradients(t, &demb.view())
            };
            let grads = match &plan.graph {
                None => grads_on(&tape)?,
                Some(dropped) => {
                    let adj = NormalizedAdjacency::new(dropped);
                    grads_on(&gcn::forward_with(params, &adj, &x, proj)?)?
                }
            };
            drop(tape);
            gcn::adam_step(params, &grads, &mut adam)?;
            Ok(improved.then_some(e))
        };
        let improved = step(&mut params).map_err(|e| e.at_epoch(epoch))?;
        epochs_run = epoch + 1;
        match improved {
            Some(e) => {
                best = Some(e);
                since_best = 0;
            }
            None => since_best += 1,
        }
        if tc.patience > 0 && since_best >= tc.patience {
            break;
        }
    }

    let last = val.eval(&encode(&params, &full_adj, &x)?)?;
    if improves(&last, &best) {
        best_params = params.clone();
        best_epoch = epochs_run;
        best = Some(last);
    }
    let best = best.expect("final evaluation always sets a best");
    let emb = encode(&best_params, &full_adj, &x)?;
    let test_eval = test.eval(&emb)?;

    let mut metrics = vec![
        ("test_auc".to_string(), test_eval.auc),
        ("val_auc".to_string(), best.auc),
    ];
    if task.link.explain_metrics && !splits.test_pos.is_empty() {
        let m = edge_explanation_metrics(&best_params, &g, &x, &splits.test_pos, task.explain.k)?;
        metrics.push(("accuracy_sufficiency".to_string(), m.accuracy_sufficiency));
        metrics.push(("kl_sufficiency".to_string(), m.mean_kl_sufficiency));
        metrics.push(("kl_necessity".to_string(), m.mean_kl_necessity));
    }
    metrics.push(("best_epoch".to_string(), best_epoch as f64));
    metrics.push(("epochs_run".to_string(), epochs_run as f64));
    let drop_prob_mean = if prob_epochs == 0 {
        Vec::new()
    } else {
        prob_sum.iter().map(|s| s / prob_epochs as f64).collect()
    };
    Ok(SeedResult {
        seed,
        metrics,
        quadrants,
        drop_prob_mean,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}
