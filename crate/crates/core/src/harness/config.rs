use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{load_dataset, Dataset};
use crate::drop::{DropConfig, DropMethod};
use crate::error::{Error, Result};
use crate::explain::ExplainConfig;
use crate::gcn::TrainConfig;
use crate::linkpred::LinkConfig;
use crate::synthetic::{generate_ba_house, generate_citation, CitationSpec, SyntheticSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    NodeClassification,
    LinkPrediction,
}

/// Where the graph comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// A dataset directory in the on-disk format.
    Dir { path: PathBuf },
    BaHouse {
        base_nodes: usize,
        attach_edges_per_node: usize,
        num_houses: usize,
        seed: u64,
    },
    /// Generated citation graph with Cora's sizes.
    CoraLike { seed: u64 },
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSource::Dir { path } => load_dataset(path),
            &DataSource::BaHouse {
                base_nodes,
                attach_edges_per_node,
                num_houses,
                seed,
            } => generate_ba_house(&SyntheticSpec {
                base_nodes,
                attach_edges_per_node,
                num_houses,
                seed,
            }),
            &DataSource::CoraLike { seed } => generate_citation(&CitationSpec::cora_like(seed)),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            DataSource::Dir { path } => path.display().to_string(),
            DataSource::BaHouse {
                base_nodes,
                attach_edges_per_node,
                num_houses,
                seed,
            } => format!(
                "ba_house(base_nodes={base_nodes}, m={attach_edges_per_node}, houses={num_houses}, seed={seed})"
            ),
            DataSource::CoraLike { seed } => format!("cora_like(seed={seed})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub track_quadrants: bool,
    pub data: DataSource,
    pub train: TrainConfig,
    pub drop: DropConfig,
    pub explain: ExplainConfig,
    pub link: LinkConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            task: Task::NodeClassification,
            seeds: vec![0, 1, 2, 3, 4],
            output: None,
            track_quadrants: true,
            data: DataSource::Dir {
                path: PathBuf::from("data/cora"),
            },
            train: TrainConfig::default(),
            drop: DropConfig::default(),
            explain: ExplainConfig::default(),
            link: LinkConfig::default(),
        }
    }
}

/// Parses a flag value as a TOML literal, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Sets a dotted key such as `drop.p` or `data.path`.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let mut root = toml::Value::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let parts: Vec<&str> = key.split('.').collect();
        let (last, path) = parts.split_last().expect("split yields one part");
        let mut node = &mut root;
        for part in path {
            node = node
                .as_table_mut()
                .and_then(|t| t.get_mut(*part))
                .ok_or_else(|| Error::Config(format!("unknown config key '{key}'")))?;
        }
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("unknown config key '{key}'")))?;
        table.insert(last.to_string(), parse_value(raw));
        *self = root
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("{key}={raw}: {e}")))?;
        Ok(())
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{o}' is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        self.train.validate()?;
        self.drop.validate()?;
        self.explain.validate()?;
        self.link.validate()?;
        match self.task {
            Task::NodeClassification => super::node::validate_node_task(&super::node_task(self)),
            Task::LinkPrediction if self.drop.method == DropMethod::Node => Err(Error::Config(
                "link prediction drops edges; use drop.method = edge or none".into(),
            )),
            Task::LinkPrediction => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drop::{Mapping, SelectionCriterion};

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::default();
        let s = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&s).unwrap(), cfg);
    }

    #[test]
    fn file_values_and_overrides() {
        let mut cfg = ExperimentConfig::from_toml_str(
            r#"
            seeds = [3]
            [data]
            kind = "cora_like"
            seed = 1
            [drop]
            method = "node"
            p = 0.3
            "#,
        )
        .unwrap();
        assert_eq!(cfg.drop.p, 0.3);
        assert_eq!(cfg.data, DataSource::CoraLike { seed: 1 });
        cfg.apply_overrides(&[
            "drop.p=0.6",
            "drop.criterion=Random",
            "drop.mapping=empirical_cdf",
            "seeds=[1,2]",
        ])
        .unwrap();
        assert_eq!(cfg.drop.p, 0.6);
        assert_eq!(cfg.drop.criterion, SelectionCriterion::Random);
        assert_eq!(cfg.drop.mapping, Mapping::EmpiricalCdf);
        assert_eq!(cfg.seeds, vec![1, 2]);
        cfg.set("drop.seed", "9").unwrap();
        assert_eq!(cfg.drop.seed, Some(9));
        cfg.set("output", "out/x").unwrap();
        assert_eq!(cfg.output, Some(PathBuf::from("out/x")));
    }

    #[test]
    fn bad_keys_and_values_are_config_errors() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.set("drop.nope", "1").unwrap_err().is_config());
        assert!(cfg.set("nope.p", "1").unwrap_err().is_config());
        assert!(cfg.set("drop.p", "\"high\"").unwrap_err().is_config());
        assert!(ExperimentConfig::from_toml_str("bogus = 1").unwrap_err().is_config());
        cfg.set("drop.p", "1.5").unwrap();
        assert!(cfg.validate().unwrap_err().is_config());
    }
}
