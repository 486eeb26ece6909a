//! On-disk dataset format.
//!
//! A dataset directory holds four files:
//!
//! * `edges.tsv`: one `u<TAB>v` line per undirected edge, `u < v`, 0-based.
//!   Extra columns (edge features) are accepted and ignored.
//! * `features.csv`: one comma-separated row of decimals per node.
//! * `labels.csv`: one integer class id per line.
//! * `splits.json`: `{"train": [...], "val": [...], "test": [...]}`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

pub const EDGES_FILE: &str = "edges.tsv";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const SPLITS_FILE: &str = "splits.json";

/// Dense node features, one row per node.
///
/// Matrices with few nonzeros also keep a row-compressed copy that the
/// products below use instead of the dense array.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    values: Array2<f64>,
    sparse: Option<SparseRows>,
}

#[derive(Debug, Clone)]
struct SparseRows {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

const SPARSE_DENSITY: f64 = 0.1;

impl SparseRows {
    fn build(m: &Array2<f64>) -> Option<Self> {
        let nnz = m.iter().filter(|&&x| x != 0.0).count();
        if m.is_empty() || nnz as f64 > SPARSE_DENSITY * m.len() as f64 {
            return None;
        }
        let mut offsets = Vec::with_capacity(m.nrows() + 1);
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        offsets.push(0);
        for row in m.rows() {
            for (c, &x) in row.iter().enumerate() {
                if x != 0.0 {
                    cols.push(c);
                    vals.push(x);
                }
            }
            offsets.push(cols.len());
        }
        Some(SparseRows { offsets, cols, vals })
    }
}

impl PartialEq for FeatureMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.values == other.values
    }
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if let Some(((r, c), _)) = values.indexed_iter().find(|(_, x)| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite feature at row {r}, column {c}"
            )));
        }
        Ok(Self::from_finite(values))
    }

    fn from_finite(values: Array2<f64>) -> Self {
        let sparse = SparseRows::build(&values);
        FeatureMatrix { values, sparse }
    }

    pub fn num_nodes(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.values
    }

    /// `X · w`.
    pub fn dot(&self, w: &Array2<f64>) -> Array2<f64> {
        let Some(sp) = &self.sparse else {
            return self.values.dot(w);
        };
        let mut out = Array2::zeros((self.num_nodes(), w.ncols()));
        for (r, mut row) in out.rows_mut().into_iter().enumerate() {
            for i in sp.offsets[r]..sp.offsets[r + 1] {
                row.scaled_add(sp.vals[i], &w.row(sp.cols[i]));
            }
        }
        out
    }

    /// `Xᵀ · m`.
    pub fn t_dot(&self, m: &Array2<f64>) -> Array2<f64> {
        let Some(sp) = &self.sparse else {
            return self.values.t().dot(m);
        };
        let mut out = Array2::zeros((self.dim(), m.ncols()));
        for r in 0..self.num_nodes() {
            let src = m.row(r);
            for i in sp.offsets[r]..sp.offsets[r + 1] {
                out.row_mut(sp.cols[i]).scaled_add(sp.vals[i], &src);
            }
        }
        out
    }

    /// Scales each row to unit L1 norm; all-zero rows are left untouched.
    pub fn row_normalized(&self) -> FeatureMatrix {
        let mut m = self.values.clone();
        for mut row in m.rows_mut() {
            let s: f64 = row.iter().map(|x| x.abs()).sum();
            if s > 0.0 {
                row.mapv_inplace(|x| x / s);
            }
        }
        Self::from_finite(m)
    }

    /// Reorders rows so that old row `u` lands at `perm[u]`.
    pub fn permute(&self, perm: &[usize]) -> FeatureMatrix {
        let mut m = Array2::zeros(self.values.dim());
        for (u, &pu) in perm.iter().enumerate() {
            m.row_mut(pu).assign(&self.values.row(u));
        }
        Self::from_finite(m)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Node labels with disjoint train/validation/test masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelsAndSplits {
    labels: Vec<usize>,
    num_classes: usize,
    train: Vec<bool>,
    val: Vec<bool>,
    test: Vec<bool>,
}

impl LabelsAndSplits {
    pub fn new(labels: Vec<usize>, splits: &SplitIndices) -> Result<Self> {
        let n = labels.len();
        let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
        let mut masks = [vec![false; n], vec![false; n], vec![false; n]];
        for (k, (name, idx)) in [("train", &splits.train), ("val", &splits.val), ("test", &splits.test)]
            .into_iter()
            .enumerate()
        {
            for &i in idx {
                if i >= n {
                    return Err(Error::InvalidArgument(format!(
                        "{name} split index {i} out of range for {n} nodes"
                    )));
                }
                if masks.iter().any(|m| m[i]) {
                    return Err(Error::InvalidArgument(format!(
                        "node {i} appears twice across splits (in {name})"
                    )));
                }
                masks[k][i] = true;
            }
        }
        let [train, val, test] = masks;
        let mut seen = vec![false; num_classes];
        for (i, &t) in train.iter().enumerate() {
            if t {
                seen[labels[i]] = true;
            }
        }
        if let Some(c) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidArgument(format!("class {c} has no training node")));
        }
        Ok(LabelsAndSplits {
            labels,
            num_classes,
            train,
            val,
            test,
        })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn train_mask(&self) -> &[bool] {
        &self.train
    }

    pub fn val_mask(&self) -> &[bool] {
        &self.val
    }

    pub fn test_mask(&self) -> &[bool] {
        &self.test
    }

    pub fn train_nodes(&self) -> Vec<usize> {
        indices(&self.train)
    }

    pub fn val_nodes(&self) -> Vec<usize> {
        indices(&self.val)
    }

    pub fn test_nodes(&self) -> Vec<usize> {
        indices(&self.test)
    }

    pub fn split_indices(&self) -> SplitIndices {
        SplitIndices {
            train: self.train_nodes(),
            val: self.val_nodes(),
            test: self.test_nodes(),
        }
    }

    pub fn permute(&self, perm: &[usize]) -> Result<LabelsAndSplits> {
        let mut labels = vec![0; self.labels.len()];
        for (u, &pu) in perm.iter().enumerate() {
            labels[pu] = self.labels[u];
        }
        let map = |idx: Vec<usize>| idx.into_iter().map(|i| perm[i]).collect();
        LabelsAndSplits::new(
            labels,
            &SplitIndices {
                train: map(self.train_nodes()),
                val: map(self.val_nodes()),
                test: map(self.test_nodes()),
            },
        )
    }
}

fn indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter_map(|(i, &m)| m.then_some(i)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: Graph,
    pub features: FeatureMatrix,
    pub labels: LabelsAndSplits,
}

impl Dataset {
    pub fn new(graph: Graph, features: FeatureMatrix, labels: LabelsAndSplits) -> Result<Self> {
        let n = graph.num_nodes();
        if features.num_nodes() != n {
            return Err(Error::shape("feature rows", n, features.num_nodes()));
        }
        if labels.num_nodes() != n {
            return Err(Error::shape("label count", n, labels.num_nodes()));
        }
        Ok(Dataset {
            graph,
            features,
            labels,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();

    let features_path = dir.join(FEATURES_FILE);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in read(&features_path)?.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                let x: f64 = tok
                    .trim()
                    .parse()
                    .map_err(|_| Error::load(&features_path, lineno, format!("invalid number {tok:?}")))?;
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(Error::load(&features_path, lineno, "non-finite feature"))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::load(
                    &features_path,
                    lineno,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    let dim = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let features = FeatureMatrix::new(Array2::from_shape_vec((n, dim), flat).expect("rows have equal length"))?;

    let labels_path = dir.join(LABELS_FILE);
    let mut labels = Vec::with_capacity(n);
    for (i, line) in read(&labels_path)?.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        labels.push(
            t.parse::<usize>()
                .map_err(|_| Error::load(&labels_path, i + 1, format!("invalid label {t:?}")))?,
        );
    }
    if labels.len() != n {
        return Err(Error::load(
            &labels_path,
            labels.len(),
            format!("{} labels for {n} feature rows", labels.len()),
        ));
    }

    let edges_path = dir.join(EDGES_FILE);
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in read(&edges_path)?.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split(['\t', ' ']).filter(|s| !s.is_empty());
        let mut endpoint = |which: &str| -> Result<usize> {
            let tok = cols
                .next()
                .ok_or_else(|| Error::load(&edges_path, lineno, format!("missing {which}")))?;
            let x: usize = tok
                .parse()
                .map_err(|_| Error::load(&edges_path, lineno, format!("invalid node id {tok:?}")))?;
            if x >= n {
                return Err(Error::load(
                    &edges_path,
                    lineno,
                    format!("node id {x} out of range for {n} nodes"),
                ));
            }
            Ok(x)
        };
        let u = endpoint("source")?;
        let v = endpoint("target")?;
        if u == v {
            return Err(Error::load(&edges_path, lineno, format!("self loop on node {u}")));
        }
        let key = (u.min(v), u.max(v));
        if !seen.insert(key) {
            return Err(Error::load(
                &edges_path,
                lineno,
                format!("duplicate edge ({}, {})", key.0, key.1),
            ));
        }
        edges.push(key);
    }
    let graph = Graph::from_edges(n, &edges).expect("edges validated above");

    let splits_path = dir.join(SPLITS_FILE);
    let splits: SplitIndices =
        serde_json::from_str(&read(&splits_path)?).map_err(|e| Error::load(&splits_path, e.line(), e.to_string()))?;
    let labels = LabelsAndSplits::new(labels, &splits).map_err(|e| match e {
        Error::InvalidArgument(msg) => Error::load(&splits_path, 0, msg),
        other => other,
    })?;

    Dataset::new(graph, features, labels)
}

pub fn save_dataset(ds: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut edges = String::new();
    for (u, v) in ds.graph.edges() {
        writeln!(edges, "{u}\t{v}").unwrap();
    }
    let mut features = String::new();
    for row in ds.features.values().rows() {
        let mut first = true;
        for x in row {
            if !first {
                features.push(',');
            }
            first = false;
            write!(features, "{x}").unwrap();
        }
        features.push('\n');
    }
    let mut labels = String::new();
    for l in ds.labels.labels() {
        writeln!(labels, "{l}").unwrap();
    }
    let splits = serde_json::to_string(&ds.labels.split_indices()).expect("serializable");

    for (name, body) in [
        (EDGES_FILE, edges),
        (FEATURES_FILE, features),
        (LABELS_FILE, labels),
        (SPLITS_FILE, splits),
    ] {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
