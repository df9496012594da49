//! Self-supervised pretext tasks whose labels are generated from the data.
//!
//! | kind         | type           | targets                               |
//! |--------------|----------------|---------------------------------------|
//! | Degree       | regression     | node degree `Σ_j A_ij`                |
//! | Clustering   | classification | k-means cluster of the raw features   |
//! | Partitioning | classification | balanced edge-cut partition id        |
//! | Completion   | regression     | PCA code of each node's features, predicted from a feature matrix with masked rows |

mod partition;

pub use partition::{
    balance_feasible, balance_ratio, max_part_size, part_sizes, partition, Partition,
};

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::dense::{kmeans, pca_fit, Matrix};
use crate::error::{Result, SdssError};
use crate::graph::Graph;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PretextKind {
    Degree,
    Clustering,
    Partitioning,
    Completion,
}

impl PretextKind {
    pub const ALL: [PretextKind; 4] = [
        PretextKind::Degree,
        PretextKind::Clustering,
        PretextKind::Partitioning,
        PretextKind::Completion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PretextKind::Degree => "degree",
            PretextKind::Clustering => "clustering",
            PretextKind::Partitioning => "partitioning",
            PretextKind::Completion => "completion",
        }
    }

    pub fn is_regression(self) -> bool {
        matches!(self, PretextKind::Degree | PretextKind::Completion)
    }
}

impl fmt::Display for PretextKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PretextKind {
    type Err = SdssError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "degree" | "deg" => Ok(PretextKind::Degree),
            "clustering" | "clu" => Ok(PretextKind::Clustering),
            "partitioning" | "partition" | "part" => Ok(PretextKind::Partitioning),
            "completion" | "comp" => Ok(PretextKind::Completion),
            other => Err(SdssError::InvalidParameter(format!(
                "unknown pretext kind '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PretextTargets {
    /// One real vector per node (`n x output_dim`).
    Regression(Matrix),
    /// One class index per node.
    Classification { labels: Vec<usize>, classes: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretextTask {
    pub kind: PretextKind,
    pub targets: PretextTargets,
    /// Replacement input features for the pretext pipeline.
    pub input_override: Option<Matrix>,
    /// Masked node indices, sorted (completion only).
    pub mask: Option<Vec<usize>>,
}

impl PretextTask {
    pub fn output_dim(&self) -> usize {
        match &self.targets {
            PretextTargets::Regression(m) => m.cols(),
            PretextTargets::Classification { classes, .. } => *classes,
        }
    }

    pub fn is_regression(&self) -> bool {
        matches!(self.targets, PretextTargets::Regression(_))
    }

    /// Nodes of `idx` that the pretext loss is evaluated on: the masked ones
    /// for completion, all of `idx` otherwise.
    pub fn loss_index(&self, idx: &[usize]) -> Vec<usize> {
        match &self.mask {
            Some(mask) => idx
                .iter()
                .copied()
                .filter(|i| mask.binary_search(i).is_ok())
                .collect(),
            None => idx.to_vec(),
        }
    }
}

/// Regression on node degrees; inputs are left untouched.
pub fn make_degree_task(g: &Graph) -> PretextTask {
    let targets = Matrix::from_vec(g.num_nodes(), 1, g.degrees()).expect("n x 1");
    PretextTask {
        kind: PretextKind::Degree,
        targets: PretextTargets::Regression(targets),
        input_override: None,
        mask: None,
    }
}

/// Number of k-means restarts used for clustering targets.
pub const DEFAULT_KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITER: usize = 300;

/// Classification on k-means clusters of the raw (unsmoothed) features.
pub fn make_clustering_task(
    x: &Matrix,
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<PretextTask> {
    let res = kmeans(x, k, restarts, KMEANS_MAX_ITER, seed)?;
    Ok(PretextTask {
        kind: PretextKind::Clustering,
        targets: PretextTargets::Classification {
            labels: res.assignments,
            classes: k,
        },
        input_override: None,
        mask: None,
    })
}

/// Classification on balanced edge-cut partition ids.
pub fn make_partition_task(g: &Graph, k: usize, epsilon: f64, seed: u64) -> Result<PretextTask> {
    let p = partition(g, k, epsilon, seed)?;
    Ok(PretextTask {
        kind: PretextKind::Partitioning,
        targets: PretextTargets::Classification {
            labels: p.labels,
            classes: k,
        },
        input_override: None,
        mask: None,
    })
}

/// Feature completion: `round(mask_ratio * n)` seeded rows of `x` are zeroed
/// in the pretext input and every node's target is its `pca_dim`-dimensional
/// PCA code of the original features.
pub fn make_completion_task(
    x: &Matrix,
    mask_ratio: f64,
    pca_dim: usize,
    seed: u64,
) -> Result<PretextTask> {
    if !(mask_ratio > 0.0 && mask_ratio < 1.0) {
        return Err(SdssError::InvalidParameter(format!(
            "mask ratio must be in (0, 1), got {mask_ratio}"
        )));
    }
    let n = x.rows();
    let count = (mask_ratio * n as f64).round() as usize;
    if count == 0 {
        return Err(SdssError::InvalidParameter(format!(
            "mask ratio {mask_ratio} masks no node out of {n}"
        )));
    }
    let model = pca_fit(x, pca_dim)?;
    let targets = model.transform(x)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let mut mask = order[..count].to_vec();
    mask.sort_unstable();
    let mut masked = x.clone();
    for &i in &mask {
        masked.row_mut(i).iter_mut().for_each(|v| *v = 0.0);
    }
    Ok(PretextTask {
        kind: PretextKind::Completion,
        targets: PretextTargets::Regression(targets),
        input_override: Some(masked),
        mask: Some(mask),
    })
}

/// Parameters shared by the task constructors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PretextParams {
    pub clusters: usize,
    pub kmeans_restarts: usize,
    pub parts: usize,
    pub epsilon: f64,
    pub mask_ratio: f64,
    pub pca_dim: usize,
}

impl PretextParams {
    /// Defaults: K equal to the class count, epsilon 0.1, 10% masking and a
    /// PCA width of `min(32, f)`.
    pub fn defaults_for(num_classes: usize, num_features: usize) -> Self {
        PretextParams {
            clusters: num_classes,
            kmeans_restarts: DEFAULT_KMEANS_RESTARTS,
            parts: num_classes,
            epsilon: 0.1,
            mask_ratio: 0.1,
            pca_dim: num_features.min(32),
        }
    }
}

/// Builds the task of the requested kind.
pub fn make_task(
    kind: PretextKind,
    g: &Graph,
    x: &Matrix,
    params: &PretextParams,
    seed: u64,
) -> Result<PretextTask> {
    match kind {
        PretextKind::Degree => Ok(make_degree_task(g)),
        PretextKind::Clustering => {
            make_clustering_task(x, params.clusters, params.kmeans_restarts, seed)
        }
        PretextKind::Partitioning => make_partition_task(g, params.parts, params.epsilon, seed),
        PretextKind::Completion => make_completion_task(x, params.mask_ratio, params.pca_dim, seed),
    }
}
