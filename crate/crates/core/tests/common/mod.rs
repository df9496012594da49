#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdss::dataset::{Dataset, Split};
use sdss::dense::{standard_normal, Matrix};
use sdss::graph::Graph;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdős–Rényi graph with edge probability `p`.
pub fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::new(n, &edges).unwrap()
}

/// Small random dataset: every third node is unlabeled (validation), the rest train.
pub fn random_dataset(n: usize, f: usize, m: usize, seed: u64) -> Dataset {
    let g = random_graph(n, 0.3, seed);
    let x = standard_normal(n, f, seed ^ 0x5eed);
    let mut r = rng(seed.wrapping_add(17));
    let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..m)).collect();
    let split = Split {
        train: (0..n).filter(|i| i % 3 != 0).collect(),
        val: (0..n).filter(|i| i % 3 == 0).collect(),
        test: vec![],
    };
    Dataset::new(g, x, labels, m, split).unwrap()
}

/// Dense `D̂^{-1/2} (A + I) D̂^{-1/2}` built from the edge list.
pub fn dense_normalized_adjacency(g: &Graph) -> Matrix {
    let n = g.num_nodes();
    let mut a = Matrix::identity(n);
    for &(u, v) in g.edges() {
        a.set(u, v, 1.0);
        a.set(v, u, 1.0);
    }
    let d: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a.get(i, j)).sum()).collect();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            l.set(i, j, a.get(i, j) / (d[i] * d[j]).sqrt());
        }
    }
    l
}

pub fn dense_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let mut c = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let s: f64 = (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum();
            c.set(i, j, s);
        }
    }
    c
}

/// Sum of squared distances to the cluster means for a fixed assignment.
pub fn assignment_inertia(x: &Matrix, labels: &[usize], k: usize) -> f64 {
    let f = x.cols();
    let mut sums = vec![vec![0.0; f]; k];
    let mut counts = vec![0usize; k];
    for (i, &c) in labels.iter().enumerate() {
        counts[c] += 1;
        for (j, s) in sums[c].iter_mut().enumerate() {
            *s += x.get(i, j);
        }
    }
    labels
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            (0..f)
                .map(|j| (x.get(i, j) - sums[c][j] / counts[c] as f64).powi(2))
                .sum::<f64>()
        })
        .sum()
}

/// Minimum inertia over every assignment of the rows to `k` labels.
pub fn exhaustive_kmeans(x: &Matrix, k: usize) -> f64 {
    let n = x.rows();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let used = {
            let mut u = vec![false; k];
            labels.iter().for_each(|&c| u[c] = true);
            u.iter().all(|&b| b)
        };
        if used {
            best = best.min(assignment_inertia(x, &labels, k));
        }
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
    }
}

/// Minimum edge cut over all 2-way splits with part sizes at most `cap`.
pub fn exhaustive_bisection(g: &Graph, cap: usize) -> usize {
    let n = g.num_nodes();
    (0u32..1 << n)
        .filter(|mask| {
            let ones = mask.count_ones() as usize;
            ones <= cap && n - ones <= cap
        })
        .map(|mask| {
            g.edges()
                .iter()
                .filter(|&&(u, v)| (mask >> u & 1) != (mask >> v & 1))
                .count()
        })
        .min()
        .unwrap()
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub mod gradcheck {
    use sdss::dataset::Dataset;
    use sdss::model::{backward, forward, ModelInputs, ModelParams};
    use sdss::pretext::PretextTask;
    use sdss::training::{
        student_objective, teacher_objective, LossConfig, Objective, TeacherOutputs,
    };

    pub enum Which<'a> {
        Teacher,
        Student(&'a TeacherOutputs),
    }

    fn objective(
        params: &ModelParams,
        inputs: &ModelInputs,
        ds: &Dataset,
        task: Option<&PretextTask>,
        cfg: &LossConfig,
        which: &Which,
    ) -> (Objective, sdss::model::ForwardTrace) {
        let trace = forward(params, inputs, false, 0).unwrap();
        let obj = match which {
            Which::Teacher => teacher_objective(&trace, &ds.labels, task, &ds.split.train, cfg),
            Which::Student(t) => {
                student_objective(&trace, t, &ds.labels, task, &ds.split.train, cfg)
            }
        }
        .unwrap();
        (obj, trace)
    }

    /// Norm-wise relative error `‖a − n‖ / max(‖a‖, ‖n‖)` between the
    /// analytic gradient and central differences with step `h`.
    pub fn relative_error(
        params: &ModelParams,
        inputs: &ModelInputs,
        ds: &Dataset,
        task: Option<&PretextTask>,
        cfg: &LossConfig,
        which: &Which,
        h: f64,
    ) -> f64 {
        let (obj, trace) = objective(params, inputs, ds, task, cfg, which);
        let g = backward(params, inputs, &trace, obj.output_grads()).unwrap();
        let analytic: Vec<f64> = g
            .matrices()
            .iter()
            .flat_map(|m| m.as_slice().to_vec())
            .collect();

        let mut numeric = Vec::with_capacity(analytic.len());
        let mut p = params.clone();
        for k in 0..3 {
            for i in 0..params.matrices()[k].as_slice().len() {
                let orig = p.matrices()[k].as_slice()[i];
                p.matrices_mut()[k].as_mut_slice()[i] = orig + h;
                let up = objective(&p, inputs, ds, task, cfg, which).0.total;
                p.matrices_mut()[k].as_mut_slice()[i] = orig - h;
                let down = objective(&p, inputs, ds, task, cfg, which).0.total;
                p.matrices_mut()[k].as_mut_slice()[i] = orig;
                numeric.push((up - down) / (2.0 * h));
            }
        }
        let diff: f64 = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n).powi(2))
            .sum::<f64>()
            .sqrt();
        let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nn: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        let scale = na.max(nn);
        if scale == 0.0 {
            0.0
        } else {
            diff / scale
        }
    }
}
