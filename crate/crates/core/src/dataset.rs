//! Node-classification datasets: plain-text directory format, per-class split
//! sampling and a planted-partition generator for hermetic experiments.
//!
//! A dataset directory holds
//!
//! ```text
//! graph.txt     "n e" then e lines "u v" (0-based)
//! features.txt  "n f" then n lines of f decimals
//! labels.txt    "n m" then n lines with one class index
//! split.txt     optional: "train: ...", "val: ...", "test: ..."
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::dense::{standard_normal, Matrix};
use crate::error::{Result, SdssError};
use crate::graph::Graph;
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    /// Use `split.txt` when present, otherwise fall back to sampling.
    PublicFile,
    /// Always sample per class.
    PerClassSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub train_per_class: usize,
    pub val_per_class: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            mode: SplitMode::PublicFile,
            train_per_class: 20,
            val_per_class: 30,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: Graph,
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub split: Split,
}

impl Dataset {
    /// Validates and assembles a dataset.
    pub fn new(
        graph: Graph,
        features: Matrix,
        labels: Vec<usize>,
        num_classes: usize,
        split: Split,
    ) -> Result<Self> {
        let n = graph.num_nodes();
        if features.rows() != n {
            return Err(SdssError::Inconsistent(format!(
                "features have {} rows but the graph has {n} nodes",
                features.rows()
            )));
        }
        if labels.len() != n {
            return Err(SdssError::Inconsistent(format!(
                "{} labels for {n} nodes",
                labels.len()
            )));
        }
        if !features.is_finite() {
            return Err(SdssError::Inconsistent(
                "features contain non-finite values".into(),
            ));
        }
        if let Some((i, &c)) = labels.iter().enumerate().find(|(_, &c)| c >= num_classes) {
            return Err(SdssError::Inconsistent(format!(
                "node {i} has label {c} but there are only {num_classes} classes"
            )));
        }
        validate_split(&split, n)?;
        Ok(Dataset {
            graph,
            features,
            labels,
            num_classes,
            split,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn one_hot(&self) -> Matrix {
        let mut y = Matrix::zeros(self.num_nodes(), self.num_classes);
        for (i, &c) in self.labels.iter().enumerate() {
            y.set(i, c, 1.0);
        }
        y
    }

    /// Same data with a freshly sampled split.
    pub fn resplit(&self, spec: &SplitSpec) -> Result<Dataset> {
        let split = sample_split(&self.labels, self.num_classes, spec)?;
        let mut out = self.clone();
        out.split = split;
        Ok(out)
    }
}

fn validate_split(split: &Split, n: usize) -> Result<()> {
    if split.train.is_empty() {
        return Err(SdssError::Inconsistent("training split is empty".into()));
    }
    let mut seen = vec![false; n];
    for (name, set) in [
        ("train", &split.train),
        ("val", &split.val),
        ("test", &split.test),
    ] {
        for &i in set {
            if i >= n {
                return Err(SdssError::Inconsistent(format!(
                    "{name} index {i} out of range (n = {n})"
                )));
            }
            if seen[i] {
                return Err(SdssError::Inconsistent(format!(
                    "node {i} appears in more than one split set"
                )));
            }
            seen[i] = true;
        }
    }
    Ok(())
}

/// Samples `train_per_class` and `val_per_class` nodes from every class; all
/// remaining nodes form the test set. Each index set is returned sorted.
pub fn sample_split(labels: &[usize], num_classes: usize, spec: &SplitSpec) -> Result<Split> {
    let mut by_class = vec![Vec::new(); num_classes];
    for (i, &c) in labels.iter().enumerate() {
        by_class[c].push(i);
    }
    let need = spec.train_per_class + spec.val_per_class;
    let mut rng = rng_from_seed(derive_seed(spec.seed, crate::rng::stream::SPLIT));
    let mut split = Split::default();
    for (class, members) in by_class.iter_mut().enumerate() {
        if members.len() < need {
            return Err(SdssError::ClassTooSmall {
                class,
                available: members.len(),
                required: need,
            });
        }
        members.shuffle(&mut rng);
        split
            .train
            .extend_from_slice(&members[..spec.train_per_class]);
        split
            .val
            .extend_from_slice(&members[spec.train_per_class..need]);
        split.test.extend_from_slice(&members[need..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LoadOptions {
    /// L1-normalize feature rows after loading.
    pub row_normalize: bool,
    pub split: SplitSpec,
}

/// Reads a dataset directory.
pub fn load_dataset(dir: &Path, opts: &LoadOptions) -> Result<Dataset> {
    if !dir.is_dir() {
        return Err(SdssError::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
        ));
    }
    let graph = read_graph(&dir.join("graph.txt"))?;
    let mut features = read_matrix(&dir.join("features.txt"))?;
    let (labels, num_classes) = read_labels(&dir.join("labels.txt"))?;
    if opts.row_normalize {
        features.row_normalize_l1();
    }
    let split_path = dir.join("split.txt");
    let split = if opts.split.mode == SplitMode::PublicFile && split_path.exists() {
        read_split(&split_path)?
    } else {
        sample_split(&labels, num_classes, &opts.split)?
    };
    Dataset::new(graph, features, labels, num_classes, split)
}

/// Writes all four files of the directory format.
pub fn write_dataset(dir: &Path, ds: &Dataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| SdssError::io(dir, e))?;
    write_graph(&dir.join("graph.txt"), &ds.graph)?;
    write_matrix(&dir.join("features.txt"), &ds.features)?;
    write_labels(&dir.join("labels.txt"), &ds.labels, ds.num_classes)?;
    write_split(&dir.join("split.txt"), &ds.split)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| SdssError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| SdssError::io(path, e))
}

/// Non-empty lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_header(
    path: &Path,
    lines: &mut impl Iterator<Item = (usize, impl AsRef<str>)>,
) -> Result<(usize, usize)> {
    let (line, text) = lines
        .next()
        .ok_or_else(|| SdssError::parse(path, 1, "missing header line"))?;
    let fields = parse_fields::<usize>(path, line, text.as_ref())?;
    match fields.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(SdssError::parse(
            path,
            line,
            "header must contain exactly two integers",
        )),
    }
}

fn parse_fields<T: std::str::FromStr>(path: &Path, line: usize, text: &str) -> Result<Vec<T>> {
    text.split_whitespace()
        .map(|tok| {
            tok.parse::<T>()
                .map_err(|_| SdssError::parse(path, line, format!("cannot parse '{tok}'")))
        })
        .collect()
}

pub fn read_graph(path: &Path) -> Result<Graph> {
    let text = read_text(path)?;
    let mut lines = content_lines(&text);
    let (n, e) = parse_header(path, &mut lines)?;
    let mut edges = Vec::with_capacity(e);
    for (line, l) in lines {
        match parse_fields::<usize>(path, line, l)?.as_slice() {
            [u, v] => {
                if *u >= n || *v >= n {
                    return Err(SdssError::parse(
                        path,
                        line,
                        format!("edge ({u}, {v}) out of range for n = {n}"),
                    ));
                }
                edges.push((*u, *v));
            }
            _ => return Err(SdssError::parse(path, line, "expected 'u v'")),
        }
    }
    if edges.len() != e {
        return Err(SdssError::parse(
            path,
            1,
            format!("header declares {e} edges, found {}", edges.len()),
        ));
    }
    Graph::new(n, &edges)
}

pub fn write_graph(path: &Path, g: &Graph) -> Result<()> {
    let mut s = format!("{} {}\n", g.num_nodes(), g.num_edges());
    for &(u, v) in g.edges() {
        let _ = writeln!(s, "{u} {v}");
    }
    write_text(path, &s)
}

/// Reads an `n f` header followed by `n` rows of decimals.
pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let text = read_text(path)?;
    let mut lines = content_lines(&text);
    let (n, f) = parse_header(path, &mut lines)?;
    let mut data = Vec::with_capacity(n * f);
    let mut rows = 0;
    for (line, l) in lines {
        let vals = parse_fields::<f64>(path, line, l)?;
        if vals.len() != f {
            return Err(SdssError::parse(
                path,
                line,
                format!("expected {f} values, found {}", vals.len()),
            ));
        }
        if let Some(v) = vals.iter().find(|v| !v.is_finite()) {
            return Err(SdssError::parse(
                path,
                line,
                format!("non-finite value {v}"),
            ));
        }
        data.extend(vals);
        rows += 1;
    }
    if rows != n {
        return Err(SdssError::parse(
            path,
            1,
            format!("header declares {n} rows, found {rows}"),
        ));
    }
    Matrix::from_vec(n, f, data)
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    let mut s = format!("{} {}\n", m.rows(), m.cols());
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(|v| format!("{v}")).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    write_text(path, &s)
}

/// Reads an `n m` header followed by `n` class indices.
pub fn read_labels(path: &Path) -> Result<(Vec<usize>, usize)> {
    let text = read_text(path)?;
    let mut lines = content_lines(&text);
    let (n, m) = parse_header(path, &mut lines)?;
    let mut labels = Vec::with_capacity(n);
    for (line, l) in lines {
        match parse_fields::<usize>(path, line, l)?.as_slice() {
            [c] if *c < m => labels.push(*c),
            [c] => {
                return Err(SdssError::parse(
                    path,
                    line,
                    format!("label {c} not below class count {m}"),
                ))
            }
            _ => return Err(SdssError::parse(path, line, "expected one integer")),
        }
    }
    if labels.len() != n {
        return Err(SdssError::parse(
            path,
            1,
            format!("header declares {n} labels, found {}", labels.len()),
        ));
    }
    Ok((labels, m))
}

pub fn write_labels(path: &Path, labels: &[usize], num_classes: usize) -> Result<()> {
    let mut s = format!("{} {}\n", labels.len(), num_classes);
    for c in labels {
        let _ = writeln!(s, "{c}");
    }
    write_text(path, &s)
}

pub fn read_split(path: &Path) -> Result<Split> {
    let text = read_text(path)?;
    let mut split = Split::default();
    let mut seen = [false; 3];
    for (line, l) in content_lines(&text) {
        let (key, rest) = l
            .split_once(':')
            .ok_or_else(|| SdssError::parse(path, line, "expected 'name: indices'"))?;
        let slot = match key.trim() {
            "train" => 0,
            "val" => 1,
            "test" => 2,
            other => {
                return Err(SdssError::parse(
                    path,
                    line,
                    format!("unknown split '{other}'"),
                ))
            }
        };
        seen[slot] = true;
        let idx = parse_fields::<usize>(path, line, rest)?;
        match slot {
            0 => split.train = idx,
            1 => split.val = idx,
            _ => split.test = idx,
        }
    }
    if !seen.iter().all(|&s| s) {
        return Err(SdssError::parse(
            path,
            1,
            "split file needs train, val and test lines",
        ));
    }
    Ok(split)
}

pub fn write_split(path: &Path, split: &Split) -> Result<()> {
    let fmt = |name: &str, idx: &[usize]| {
        let body: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
        format!("{name}: {}\n", body.join(" "))
    };
    let s = fmt("train", &split.train) + &fmt("val", &split.val) + &fmt("test", &split.test);
    write_text(path, &s)
}

/// Parameters of a planted-partition (stochastic block model) dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedPartition {
    pub blocks: usize,
    pub per_block: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub num_features: usize,
    /// Magnitude of the per-block feature mean offset.
    pub shift: f64,
    pub seed: u64,
}

impl Default for PlantedPartition {
    /// The benchmark configuration: 5 blocks of 100 nodes.
    fn default() -> Self {
        PlantedPartition {
            blocks: 5,
            per_block: 100,
            p_in: 0.1,
            p_out: 0.01,
            num_features: 16,
            shift: 1.0,
            seed: 0,
        }
    }
}

/// Generates a block-structured random graph with noisy block-dependent features.
///
/// Pairs inside a block connect with probability `p_in`, across blocks with
/// `p_out`. Features are standard normal noise plus `shift` on coordinate
/// `block mod num_features`. Labels are block ids. The split takes up to 20
/// training and 30 validation nodes per block (at most a third of the block
/// each, at least one training node).
pub fn generate_planted_partition(params: &PlantedPartition) -> Result<Dataset> {
    let PlantedPartition {
        blocks,
        per_block,
        p_in,
        p_out,
        num_features,
        shift,
        seed,
    } = *params;
    if blocks < 2 || per_block == 0 || num_features == 0 {
        return Err(SdssError::InvalidParameter(format!(
            "planted partition needs blocks >= 2, per_block >= 1, features >= 1 (got {blocks}, {per_block}, {num_features})"
        )));
    }
    if !(0.0 <= p_out && p_out < p_in && p_in <= 1.0) {
        return Err(SdssError::InvalidParameter(format!(
            "planted partition needs 0 <= p_out < p_in <= 1 (got p_in = {p_in}, p_out = {p_out})"
        )));
    }
    if !shift.is_finite() {
        return Err(SdssError::InvalidParameter(format!(
            "shift must be finite, got {shift}"
        )));
    }
    let n = blocks * per_block;
    let labels: Vec<usize> = (0..n).map(|i| i / per_block).collect();

    let mut rng = rng_from_seed(derive_seed(seed, 101));
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let graph = Graph::new(n, &edges)?;

    let mut features = standard_normal(n, num_features, derive_seed(seed, 102));
    for (i, &b) in labels.iter().enumerate() {
        let c = b % num_features;
        features.set(i, c, features.get(i, c) + shift);
    }

    let third = per_block / 3;
    let spec = SplitSpec {
        mode: SplitMode::PerClassSample,
        train_per_class: third.clamp(1, 20),
        val_per_class: third.min(30),
        seed: derive_seed(seed, 103),
    };
    let split = sample_split(&labels, blocks, &spec)?;
    Dataset::new(graph, features, labels, blocks, split)
}
