use std::time::Instant;

use log::debug;

use super::SeedResult;
use crate::dataset::{Dataset, FeatureMatrix};
use crate::drop::{self, DropConfig, DropMethod, DropProbabilities, QuadrantCounts, SelectionCriterion};
use crate::error::{Error, Result};
use crate::explain::{self, ExplainConfig, ExplainerKind};
use crate::gcn::{self, AdamState, ModelParams, Projection, TrainConfig};
use crate::graph::{Graph, NormalizedAdjacency};
use crate::rng::{self, streams};

/// Settings for one node-classification run, shared across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTask<'a> {
    pub train: &'a TrainConfig,
    pub drop: &'a DropConfig,
    pub explain: &'a ExplainConfig,
    /// Record per-epoch quadrant counts (costs one extra explanation per epoch).
    pub track_quadrants: bool,
}

#[derive(Debug, Clone, Copy)]
struct Eval {
    val_acc: f64,
    val_loss: f64,
}

fn accuracy(pred: &[usize], labels: &[usize], mask: &[bool]) -> f64 {
    let (mut hit, mut total) = (0usize, 0usize);
    for ((&p, &y), &m) in pred.iter().zip(labels).zip(mask) {
        if m {
            total += 1;
            hit += usize::from(p == y);
        }
    }
    if total == 0 {
        f64::NAN
    } else {
        hit as f64 / total as f64
    }
}

fn evaluate(logits: &ndarray::Array2<f64>, adj: &NormalizedAdjacency, ds: &Dataset) -> Result<Eval> {
    if adj.is_masked() {
        return Err(Error::InvalidArgument("evaluation requires the full adjacency".into()));
    }
    let labels = ds.labels.labels();
    let pred = gcn::argmax_rows(logits);
    let val_loss = match gcn::softmax_xent(logits, labels, ds.labels.val_mask()) {
        Ok(out) => out.loss,
        Err(_) => f64::NAN,
    };
    Ok(Eval {
        val_acc: accuracy(&pred, labels, ds.labels.val_mask()),
        val_loss,
    })
}

fn improves(e: &Eval, best: &Option<Eval>) -> bool {
    match best {
        None => true,
        Some(b) => e.val_acc > b.val_acc || (e.val_acc == b.val_acc && e.val_loss < b.val_loss),
    }
}

/// One epoch's dropping decision plus the fidelity used for quadrant tracking.
struct EpochDrop {
    graph: Option<Graph>,
    probs: Option<DropProbabilities>,
    quadrants: Option<QuadrantCounts>,
}

fn plan_epoch(
    tape: &gcn::ForwardTape<'_>,
    g: &Graph,
    task: &NodeTask<'_>,
    drop_rng: &mut rng::Rng,
) -> Result<EpochDrop> {
    let cfg = task.drop;
    let n = g.num_nodes();
    let conf = drop::confidence(&gcn::softmax(tape.logits()));
    let all: Vec<usize> = (0..n).collect();
    let explained = match cfg.method {
        DropMethod::Node => cfg.criterion.explained_set(&conf, cfg.theta).filter(|s| !s.is_empty()),
        _ => None,
    };
    let fsuf = match &explained {
        Some(set) => Some(explain::candidate_fidelity(
            tape,
            g,
            set,
            task.explain.k,
            task.explain.explainer,
        )?),
        None => None,
    };
    debug!(
        "explained {} nodes, max confidence {:.3}",
        explained.as_ref().map_or(0, Vec::len),
        conf.iter().copied().fold(0.0, f64::max)
    );
    // quadrants always use the shared explanation of every node so that runs
    // with different criteria are comparable
    let quadrants = if task.track_quadrants {
        let tracked = match &explained {
            Some(set) if set.len() == n && task.explain.explainer == ExplainerKind::ApproxSaliency => {
                fsuf.clone().expect("computed above")
            }
            _ => explain::batch_fidelity(tape, g, &all, task.explain.k)?.fidelity,
        };
        Some(drop::quadrant_counts(&conf, &tracked, cfg.theta, None))
    } else {
        None
    };

    let (graph, probs) = match cfg.method {
        DropMethod::None => (None, None),
        DropMethod::Node => {
            let probs = match &fsuf {
                Some(f) => drop::apply_criterion(
                    cfg.criterion,
                    &conf,
                    f,
                    cfg.theta,
                    cfg.p,
                    cfg.mapping,
                    &cfg.mapping_params(),
                )?,
                // an empty explained set leaves nothing to bias
                None if cfg.criterion.needs_explanations() => DropProbabilities::uniform(n, cfg.p),
                None => drop::apply_criterion(
                    cfg.criterion,
                    &conf,
                    &[],
                    cfg.theta,
                    cfg.p,
                    cfg.mapping,
                    &cfg.mapping_params(),
                )?,
            };
            let mask = drop::sample_node_mask(&probs, drop_rng);
            (Some(g.apply_node_mask(&mask)?), Some(probs))
        }
        DropMethod::Edge => {
            let probs = DropProbabilities::uniform(g.num_edges(), cfg.p);
            let mask = drop::sample_edge_mask(g, &probs, drop_rng)?;
            (Some(g.apply_edge_mask(&mask)?), None)
        }
    };
    Ok(EpochDrop {
        graph,
        probs,
        quadrants,
    })
}

pub(crate) fn validate_node_task(task: &NodeTask<'_>) -> Result<()> {
    task.train.validate()?;
    task.drop.validate()?;
    task.explain.validate()?;
    if task.drop.method == DropMethod::Edge && task.drop.criterion != SelectionCriterion::Random {
        return Err(Error::Config(
            "node classification supports only criterion Random with drop.method = edge".into(),
        ));
    }
    Ok(())
}

/// Trains and evaluates one seed.
pub fn train_node_seed(ds: &Dataset, task: &NodeTask<'_>, seed: u64) -> Result<SeedResult> {
    train_node_model(ds, task, seed).map(|(r, _)| r)
}

/// Like [`train_node_seed`], also returning the selected parameters.
pub fn train_node_model(ds: &Dataset, task: &NodeTask<'_>, seed: u64) -> Result<(SeedResult, ModelParams)> {
    validate_node_task(task)?;
    let start = Instant::now();
    let tc = task.train;
    let x: FeatureMatrix = if tc.normalize_features {
        ds.features.row_normalized()
    } else {
        ds.features.clone()
    };
    let g = &ds.graph;
    let n = g.num_nodes();
    let labels = ds.labels.labels();
    let train_mask = ds.labels.train_mask();

    let mut params = ModelParams::glorot(
        x.dim(),
        tc.hidden_dim,
        ds.labels.num_classes(),
        tc.bias,
        &mut rng::stream(seed, streams::INIT),
    );
    let mut adam = AdamState::new(&params, tc.learning_rate, tc.weight_decay);
    let mut drop_rng = rng::stream(task.drop.seed.unwrap_or(seed), streams::DROP);
    let full_adj = NormalizedAdjacency::new(g);

    let mut best: Option<Eval> = None;
    let mut best_params = params.clone();
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut quadrants = Vec::new();
    let mut prob_sum = vec![0.0; n];
    let mut prob_epochs = 0usize;
    let mut epochs_run = 0;

    for epoch in 0..tc.epochs {
        let mut step = |params: &mut ModelParams| -> Result<Option<Eval>> {
            let proj = Projection::new(params, &x)?;
            let tape = gcn::forward_with(params, &full_adj, &x, proj.clone())?;
            let eval = evaluate(tape.logits(), &full_adj, ds)?;
            let improved = improves(&eval, &best);
            if improved {
                best_params = params.clone();
                best_epoch = epoch;
            }
            let plan = plan_epoch(&tape, g, task, &mut drop_rng)?;
            if let Some(q) = plan.quadrants {
                quadrants.push(q);
            }
            if let Some(p) = &plan.probs {
                for (s, q) in prob_sum.iter_mut().zip(p.as_slice()) {
                    *s += q;
                }
                prob_epochs += 1;
            }
            let grads = match &plan.graph {
                None => {
                    let out = gcn::softmax_xent(tape.logits(), labels, train_mask)?;
                    gcn::weight_gradients(&tape, &out.grad.view())?
                }
                Some(dropped) => {
                    let adj = NormalizedAdjacency::new(dropped);
                    let t = gcn::forward_with(params, &adj, &x, proj)?;
                    let out = gcn::softmax_xent(t.logits(), labels, train_mask)?;
                    gcn::weight_gradients(&t, &out.grad.view())?
                }
            };
            drop(tape);
            gcn::adam_step(params, &grads, &mut adam)?;
            Ok(improved.then_some(eval))
        };
        let improved = step(&mut params).map_err(|e| e.at_epoch(epoch))?;
        epochs_run = epoch + 1;
        match improved {
            Some(e) => {
                debug!(
                    "seed {seed} epoch {epoch}: val acc {:.4} loss {:.4}",
                    e.val_acc, e.val_loss
                );
                best = Some(e);
                since_best = 0;
            }
            None => since_best += 1,
        }
        if tc.patience > 0 && since_best >= tc.patience {
            break;
        }
    }

    // the parameters after the last update have not been evaluated yet
    let final_tape = gcn::forward(&params, &full_adj, &x)?;
    let final_eval = evaluate(final_tape.logits(), &full_adj, ds)?;
    drop(final_tape);
    if improves(&final_eval, &best) {
        best_params = params.clone();
        best_epoch = epochs_run;
        best = Some(final_eval);
    }
    let best = best.expect("final evaluation always sets a best");

    let tape = gcn::forward(&best_params, &full_adj, &x)?;
    let pred = gcn::argmax_rows(tape.logits());
    let test_acc = accuracy(&pred, labels, ds.labels.test_mask());
    let test_nodes = ds.labels.test_nodes();
    let expl = if test_nodes.is_empty() {
        None
    } else {
        Some(explain::explanation_metrics(
            &best_params,
            g,
            &x,
            &test_nodes,
            task.explain.k,
        )?)
    };

    let mut metrics = vec![
        ("test_accuracy".to_string(), test_acc),
        ("val_accuracy".to_string(), best.val_acc),
    ];
    if let Some(m) = expl {
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
    let result = SeedResult {
        seed,
        metrics,
        quadrants,
        drop_prob_mean,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((result, best_params))
}
