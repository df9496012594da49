//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export returns a JSON string; the `*_view` functions behind them are
//! plain Rust so they can be tested natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use sdss::bench::{run_arms, Arm, Mode, RunConfig};
use sdss::dataset::{generate_planted_partition, PlantedPartition};
use sdss::dense::Matrix;
use sdss::pretext::{max_part_size, partition, PretextKind};
use sdss::training::losses::{kl_divergence, loss_sd_nc};
use sdss::training::{LossConfig, Reduction, TrainReport};

#[derive(Debug, Serialize)]
pub struct PartitionView {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    pub blocks: Vec<usize>,
    pub parts: Vec<usize>,
    pub initial_cut: usize,
    pub cut: usize,
    pub part_sizes: Vec<usize>,
    pub size_cap: usize,
}

pub fn partition_view(
    blocks: usize,
    per_block: usize,
    p_in: f64,
    p_out: f64,
    parts: usize,
    epsilon: f64,
    seed: u64,
) -> Result<PartitionView, String> {
    let ds = generate_planted_partition(&PlantedPartition {
        blocks,
        per_block,
        p_in,
        p_out,
        num_features: 2,
        shift: 0.0,
        seed,
    })
    .map_err(|e| e.to_string())?;
    let g = &ds.graph;
    let p = partition(g, parts, epsilon, seed).map_err(|e| e.to_string())?;
    Ok(PartitionView {
        n: g.num_nodes(),
        edges: g.edges().iter().map(|&(u, v)| [u, v]).collect(),
        blocks: ds.labels.clone(),
        initial_cut: p.cut_history.first().copied().unwrap_or(p.cut),
        cut: p.cut,
        part_sizes: p.part_sizes(),
        size_cap: max_part_size(g.num_nodes(), parts, epsilon),
        parts: p.labels,
    })
}

#[derive(Debug, Serialize)]
pub struct SoftenView {
    /// `softmax(z_t / τ)`.
    pub teacher: Vec<f64>,
    /// `softmax(z_s / τ)`.
    pub student: Vec<f64>,
    /// `softmax(z_s)`, the distribution the hard-label term sees.
    pub student_hard: Vec<f64>,
    pub kl: f64,
    pub loss: f64,
    /// Gradient of the mixed loss w.r.t. the student logits.
    pub grad: Vec<f64>,
}

pub fn soften_view(
    teacher: &[f64],
    student: &[f64],
    label: usize,
    tau: f64,
    beta1: f64,
) -> Result<SoftenView, String> {
    if teacher.len() != student.len() || teacher.is_empty() {
        return Err("teacher and student need the same nonzero number of logits".into());
    }
    if label >= teacher.len() {
        return Err(format!(
            "label {label} out of range for {} classes",
            teacher.len()
        ));
    }
    let zt = Matrix::from_rows(&[teacher]).map_err(|e| e.to_string())?;
    let zs = Matrix::from_rows(&[student]).map_err(|e| e.to_string())?;
    let cfg = LossConfig {
        tau,
        beta1,
        ..Default::default()
    };
    cfg.validate().map_err(|e| e.to_string())?;
    let soft = |z: &Matrix, t: f64| {
        z.softmax_rows(t)
            .map(Matrix::into_vec)
            .map_err(|e| e.to_string())
    };
    let (kl, _) = kl_divergence(&zs, &zt, &[0], tau, Reduction::Mean).map_err(|e| e.to_string())?;
    let (loss, grad) = loss_sd_nc(&zs, &zt, &[label], &[0], &cfg).map_err(|e| e.to_string())?;
    Ok(SoftenView {
        teacher: soft(&zt, tau)?,
        student: soft(&zs, tau)?,
        student_hard: soft(&zs, 1.0)?,
        kl,
        loss,
        grad: grad.into_vec(),
    })
}

#[derive(Debug, Serialize)]
pub struct CurvePoint {
    pub epoch: usize,
    pub loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Serialize)]
pub struct CurvesView {
    pub mode: String,
    pub teacher: Vec<CurvePoint>,
    pub student: Option<Vec<CurvePoint>>,
    pub teacher_test_acc: f64,
    pub test_acc: f64,
}

/// Trains one mode on a small planted-partition graph (4 blocks of 60).
pub fn curves_view(
    mode: &str,
    pretext: &str,
    shift: f64,
    max_epochs: usize,
    seed: u64,
) -> Result<CurvesView, String> {
    let mut cfg = RunConfig::default();
    let settings = [
        ("mode", mode.to_string()),
        ("pretext", pretext.to_string()),
        ("synthetic.blocks", "4".into()),
        ("synthetic.per_block", "60".into()),
        ("synthetic.shift", shift.to_string()),
        ("synthetic.seed", seed.to_string()),
        ("hidden", "32".into()),
        ("max_epochs", max_epochs.to_string()),
    ];
    for (k, v) in &settings {
        cfg.set(k, v)?;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    let ds = match &cfg.dataset {
        sdss::bench::DatasetSource::Synthetic(p) => {
            generate_planted_partition(p).map_err(|e| e.to_string())?
        }
        sdss::bench::DatasetSource::Dir(_) => unreachable!("demo always uses a synthetic graph"),
    };
    let kind: PretextKind = cfg.pretext;
    let mode: Mode = cfg.mode;
    let runs =
        run_arms(&ds, &cfg, &[Arm::standard(mode, kind)], &[seed]).map_err(|e| e.to_string())?;
    let run = &runs[0];
    let points = |r: &TrainReport| {
        r.epochs
            .iter()
            .map(|e| CurvePoint {
                epoch: e.epoch,
                loss: e.loss,
                val_acc: e.val_acc,
            })
            .collect::<Vec<_>>()
    };
    Ok(CurvesView {
        mode: mode.to_string(),
        teacher: points(&run.teacher),
        student: run.student.as_ref().map(|(_, r)| points(r)),
        teacher_test_acc: run.teacher.test_acc.unwrap_or(f64::NAN),
        test_acc: run.test_acc(),
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn partition_graph(
    blocks: usize,
    per_block: usize,
    p_in: f64,
    p_out: f64,
    parts: usize,
    epsilon: f64,
    seed: u32,
) -> Result<String, JsValue> {
    to_js(partition_view(
        blocks,
        per_block,
        p_in,
        p_out,
        parts,
        epsilon,
        seed as u64,
    ))
}

#[wasm_bindgen]
pub fn soften(
    teacher: Vec<f64>,
    student: Vec<f64>,
    label: usize,
    tau: f64,
    beta1: f64,
) -> Result<String, JsValue> {
    to_js(soften_view(&teacher, &student, label, tau, beta1))
}

#[wasm_bindgen]
pub fn train_curves(
    mode: &str,
    pretext: &str,
    shift: f64,
    max_epochs: usize,
    seed: u32,
) -> Result<String, JsValue> {
    to_js(curves_view(mode, pretext, shift, max_epochs, seed as u64))
}
