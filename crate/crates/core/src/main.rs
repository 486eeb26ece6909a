use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use xaidrop::dataset::save_dataset;
use xaidrop::drop;
use xaidrop::explain;
use xaidrop::gcn::{self, Checkpoint};
use xaidrop::graph::NormalizedAdjacency;
use xaidrop::harness::{self, aggregate, emit_results, emit_sweep, DataSource, ExperimentConfig, SweepAxis, Task};
use xaidrop::synthetic::{generate_ba_house, generate_citation, CitationSpec, SyntheticSpec};
use xaidrop::{Error, Result};

/// Explainability-guided node and edge dropping for GCN training.
///
/// Log verbosity is read from the XAIDROP_LOG environment variable
/// (error, warn, info, debug, trace).
#[derive(Parser)]
#[command(name = "xaidrop", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate node classification over all configured seeds.
    TrainNode(RunArgs),
    /// Train and evaluate link prediction over all configured seeds.
    TrainLink(RunArgs),
    /// Repeat a run for several values of theta or p.
    Sweep {
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write a generated dataset directory.
    GenerateSynthetic(GenerateArgs),
    /// Train one seed (or load a checkpoint) and write per-node explanations.
    ExplainDump {
        /// Load parameters instead of training.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Save the trained parameters here.
        #[arg(long)]
        save_checkpoint: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML config file; flags override its values.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Dataset directory (sets data.kind = "dir").
    #[arg(long)]
    data: Option<PathBuf>,
    /// Use the generated Cora-sized citation graph with this seed.
    #[arg(long, conflicts_with = "data")]
    cora_like: Option<u64>,
    /// Output directory for result files.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// drop.method: none, node or edge.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    /// drop.criterion, e.g. XaiDrop or Random.
    #[arg(long)]
    criterion: Option<String>,
    /// drop.mapping: gaussian_yeo_johnson, empirical_cdf or uniform.
    #[arg(long)]
    mapping: Option<String>,
    /// explain.k
    #[arg(long)]
    k: Option<f64>,
    /// train.epochs
    #[arg(long)]
    epochs: Option<usize>,
    /// Any config key, as key=value (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn config(&self, task: Task) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig {
                task,
                ..Default::default()
            },
        };
        if self.config.is_some() {
            cfg.task = task;
        }
        if let Some(path) = &self.data {
            cfg.data = DataSource::Dir { path: path.clone() };
        }
        if let Some(seed) = self.cora_like {
            cfg.data = DataSource::CoraLike { seed };
        }
        if let Some(out) = &self.out {
            cfg.output = Some(out.clone());
        }
        if let Some(seeds) = &self.seeds {
            cfg.seeds = seeds.clone();
        }
        let mut sets: Vec<String> = Vec::new();
        let mut quoted = |key: &str, v: &Option<String>| {
            if let Some(v) = v {
                sets.push(format!("{key}=\"{v}\""));
            }
        };
        quoted("drop.method", &self.method);
        quoted("drop.criterion", &self.criterion);
        quoted("drop.mapping", &self.mapping);
        for (key, v) in [("drop.p", self.p), ("drop.theta", self.theta), ("explain.k", self.k)] {
            if let Some(v) = v {
                sets.push(format!("{key}={v:?}"));
            }
        }
        if let Some(e) = self.epochs {
            sets.push(format!("train.epochs={e}"));
        }
        sets.extend(self.overrides.iter().cloned());
        cfg.apply_overrides(&sets)?;
        if let Some(c) = &self.criterion {
            // accept loose spellings such as low_conf_poor_xai
            cfg.drop.criterion = c.parse()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    BaHouse,
    CoraLike,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: Generator,
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 300)]
    base_nodes: usize,
    #[arg(long, default_value_t = 2)]
    attach_edges: usize,
    #[arg(long, default_value_t = 40)]
    houses: usize,
}

fn print_table(result: &harness::RunResult) -> Result<()> {
    let table = aggregate(&result.seeds)?;
    for row in &table.rows {
        println!(
            "{:<22} {:>10.4} ± {:.4}  (n = {})",
            row.name, row.mean, row.std, row.count
        );
    }
    Ok(())
}

fn run_and_emit(cfg: &ExperimentConfig) -> Result<()> {
    info!("running {:?} on {}", cfg.task, cfg.data.describe());
    let result = harness::run(cfg)?;
    print_table(&result)?;
    if let Some(out) = &cfg.output {
        emit_results(&result, cfg, out)?;
        println!("wrote results to {}", out.display());
    }
    Ok(())
}

fn explain_dump(cfg: &ExperimentConfig, checkpoint: Option<&Path>, save: Option<&Path>) -> Result<()> {
    if cfg.task != Task::NodeClassification {
        return Err(Error::Config("explain-dump supports node classification only".into()));
    }
    let out = cfg
        .output
        .clone()
        .ok_or_else(|| Error::Config("explain-dump needs --out".into()))?;
    let ds = cfg.data.load()?;
    let seed = cfg.seeds[0];
    let params = match checkpoint {
        Some(path) => Checkpoint::load(path)?.params,
        None => harness::train_node_model(&ds, &harness::node_task(cfg), seed)?.1,
    };
    if let Some(path) = save {
        Checkpoint {
            params: params.clone(),
            train: cfg.train.clone(),
            seed,
        }
        .save(path)?;
    }
    let x = if cfg.train.normalize_features {
        ds.features.row_normalized()
    } else {
        ds.features.clone()
    };
    let adj = NormalizedAdjacency::new(&ds.graph);
    let tape = gcn::forward(&params, &adj, &x)?;
    let prob = gcn::softmax(tape.logits());
    let conf = drop::confidence(&prob);
    let pred = gcn::argmax_rows(tape.logits());
    let all: Vec<usize> = (0..ds.num_nodes()).collect();
    let batch = explain::batch_fidelity(&tape, &ds.graph, &all, cfg.explain.k)?;
    let probs = drop::apply_criterion(
        cfg.drop.criterion,
        &conf,
        &batch.fidelity,
        cfg.drop.theta,
        cfg.drop.p,
        cfg.drop.mapping,
        &cfg.drop.mapping_params(),
    )?;

    fs::create_dir_all(&out).map_err(|e| Error::Io {
        path: out.clone(),
        source: e,
    })?;
    let mut nodes = String::from("node,label,prediction,confidence,importance,fidelity_sufficiency,drop_probability\n");
    let labels = ds.labels.labels();
    for v in 0..ds.num_nodes() {
        let _ = writeln!(
            nodes,
            "{v},{},{},{},{},{},{}",
            labels[v],
            pred[v],
            conf[v],
            batch.explanation.node_importance[v],
            batch.fidelity[v],
            probs.as_slice()[v]
        );
    }
    let mut edges = String::new();
    for (u, v) in batch.subgraph.mask.kept_pairs(&ds.graph) {
        let _ = writeln!(edges, "{u}\t{v}");
    }
    for (name, body) in [("explanations.csv", nodes), ("explanation_edges.tsv", edges)] {
        let path = out.join(name);
        fs::write(&path, body).map_err(|e| Error::Io { path, source: e })?;
    }
    println!("wrote explanations to {}", out.display());
    Ok(())
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let ds = match args.kind {
        Generator::BaHouse => generate_ba_house(&SyntheticSpec {
            base_nodes: args.base_nodes,
            attach_edges_per_node: args.attach_edges,
            num_houses: args.houses,
            seed: args.seed,
        })?,
        Generator::CoraLike => generate_citation(&CitationSpec::cora_like(args.seed))?,
    };
    save_dataset(&ds, &args.out)?;
    println!(
        "wrote {} nodes, {} edges to {}",
        ds.num_nodes(),
        ds.graph.num_edges(),
        args.out.display()
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TrainNode(run) => run_and_emit(&run.config(Task::NodeClassification)?),
        Command::TrainLink(run) => run_and_emit(&run.config(Task::LinkPrediction)?),
        Command::Sweep { axis, values, run } => {
            let task = match &run.config {
                Some(path) => ExperimentConfig::load(path)?.task,
                None => Task::NodeClassification,
            };
            let cfg = run.config(task)?;
            let points = harness::run_sweep(&cfg, axis, &values)?;
            for pt in &points {
                println!("{axis} = {}", pt.value);
                print_table(&pt.result)?;
            }
            if let Some(out) = &cfg.output {
                emit_sweep(&points, axis, out)?;
                println!("wrote sweep to {}", out.display());
            }
            Ok(())
        }
        Command::GenerateSynthetic(args) => generate(&args),
        Command::ExplainDump {
            checkpoint,
            save_checkpoint,
            run,
        } => explain_dump(
            &run.config(Task::NodeClassification)?,
            checkpoint.as_deref(),
            save_checkpoint.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("XAIDROP_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
