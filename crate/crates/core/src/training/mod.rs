//! Objectives, optimization and the two-stage teacher/student procedure.
//!
//! Stage one trains a teacher on `L_NC + α L_SS`. Stage two trains a freshly
//! initialized student of the same shape on
//! `w_nc L_SD-NC + w_ss L_SD-SS + w_m L_SD-M`, using the frozen teacher's
//! eval-mode logits and middle-layer output as soft targets. Both stages run
//! full-batch Adam with early stopping on validation accuracy and return the
//! best-validation checkpoint.

mod adam;
pub mod losses;

pub use adam::{adam_step, AdamConfig, AdamState, WeightDecayMode};
pub use losses::{LossConfig, Reduction};

use std::time::Duration;

use crate::dataset::Dataset;
use crate::dense::Matrix;
use crate::error::{Result, SdssError};
use crate::model::{backward, forward, ForwardTrace, ModelInputs, ModelParams, OutputGrads};
use crate::pretext::PretextTask;
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub hidden: usize,
    pub dropout: f64,
    pub optimizer: AdamConfig,
    pub max_epochs: usize,
    pub patience: usize,
    pub loss: LossConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: 64,
            dropout: 0.5,
            optimizer: AdamConfig::default(),
            max_epochs: 300,
            patience: 50,
            loss: LossConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if self.hidden == 0 || self.max_epochs == 0 {
            return Err(SdssError::InvalidParameter(
                "hidden and max_epochs must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(SdssError::InvalidParameter(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        let (lr, wd) = (self.optimizer.lr, self.optimizer.weight_decay);
        if lr.is_nan() || lr <= 0.0 || wd.is_nan() || wd < 0.0 {
            return Err(SdssError::InvalidParameter(
                "learning rate must be positive and weight decay non-negative".into(),
            ));
        }
        let o = &self.optimizer;
        if !(0.0..1.0).contains(&o.beta1)
            || !(0.0..1.0).contains(&o.beta2)
            || o.eps.is_nan()
            || o.eps <= 0.0
        {
            return Err(SdssError::InvalidParameter(
                "Adam needs betas in [0, 1) and eps > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Teacher,
    Student,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Teacher => "teacher",
            Stage::Student => "student",
        }
    }
}

/// Values of the individual loss terms; absent terms were not computed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossTerms {
    pub nc: Option<f64>,
    pub ss: Option<f64>,
    pub sd_nc: Option<f64>,
    pub sd_ss: Option<f64>,
    pub sd_m: Option<f64>,
}

impl LossTerms {
    pub fn named(&self) -> impl Iterator<Item = (&'static str, f64)> {
        [
            ("nc", self.nc),
            ("ss", self.ss),
            ("sd_nc", self.sd_nc),
            ("sd_ss", self.sd_ss),
            ("sd_m", self.sd_m),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
    }
}

/// A scalar objective with the upstream gradients it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub total: f64,
    pub terms: LossTerms,
    pub d_logits: Option<Matrix>,
    pub d_pretext_logits: Option<Matrix>,
    pub d_hidden: Option<Matrix>,
}

impl Objective {
    pub fn output_grads(&self) -> OutputGrads<'_> {
        OutputGrads {
            logits: self.d_logits.as_ref(),
            pretext_logits: self.d_pretext_logits.as_ref(),
            hidden: self.d_hidden.as_ref(),
        }
    }
}

fn accumulate(slot: &mut Option<Matrix>, g: Matrix, w: f64) -> Result<()> {
    match slot {
        Some(acc) => acc.add_scaled(&g, w),
        None => {
            *slot = Some(if w == 1.0 { g } else { g.scale(w) });
            Ok(())
        }
    }
}

/// Teacher objective `L_NC + α L_SS`. The pretext term is skipped when
/// `α = 0` or no task is given.
pub fn teacher_objective(
    trace: &ForwardTrace,
    labels: &[usize],
    task: Option<&PretextTask>,
    idx: &[usize],
    cfg: &LossConfig,
) -> Result<Objective> {
    let (nc, d_logits) = losses::loss_nc(&trace.logits, labels, idx, cfg)?;
    let mut obj = Objective {
        total: nc,
        terms: LossTerms {
            nc: Some(nc),
            ..Default::default()
        },
        d_logits: Some(d_logits),
        d_pretext_logits: None,
        d_hidden: None,
    };
    if let Some(task) = task.filter(|_| cfg.alpha > 0.0) {
        let (ss, g) = losses::loss_ss(&trace.pretext_logits, task, idx, cfg)?;
        obj.total += cfg.alpha * ss;
        obj.terms.ss = Some(ss);
        accumulate(&mut obj.d_pretext_logits, g, cfg.alpha)?;
    }
    Ok(obj)
}

/// Frozen teacher outputs used as distillation targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherOutputs {
    pub logits: Matrix,
    pub pretext_logits: Matrix,
    pub hidden: Matrix,
}

impl TeacherOutputs {
    pub fn from_trace(trace: ForwardTrace) -> Self {
        TeacherOutputs {
            logits: trace.logits,
            pretext_logits: trace.pretext_logits,
            hidden: trace.main.hidden,
        }
    }
}

/// Student objective `w_nc L_SD-NC + w_ss L_SD-SS + w_m L_SD-M`; terms with
/// zero multiplier are skipped, and so is the pretext term without a task.
pub fn student_objective(
    trace: &ForwardTrace,
    teacher: &TeacherOutputs,
    labels: &[usize],
    task: Option<&PretextTask>,
    idx: &[usize],
    cfg: &LossConfig,
) -> Result<Objective> {
    let mut obj = Objective {
        total: 0.0,
        terms: LossTerms::default(),
        d_logits: None,
        d_pretext_logits: None,
        d_hidden: None,
    };
    if cfg.sd_nc_weight > 0.0 {
        let (l, g) = losses::loss_sd_nc(&trace.logits, &teacher.logits, labels, idx, cfg)?;
        obj.total += cfg.sd_nc_weight * l;
        obj.terms.sd_nc = Some(l);
        accumulate(&mut obj.d_logits, g, cfg.sd_nc_weight)?;
    }
    if let Some(task) = task.filter(|_| cfg.sd_ss_weight > 0.0) {
        let (l, g) = losses::loss_sd_ss(
            &trace.pretext_logits,
            &teacher.pretext_logits,
            task,
            idx,
            cfg,
        )?;
        obj.total += cfg.sd_ss_weight * l;
        obj.terms.sd_ss = Some(l);
        accumulate(&mut obj.d_pretext_logits, g, cfg.sd_ss_weight)?;
    }
    if cfg.sd_m_weight > 0.0 {
        let (l, g) = losses::loss_sd_m(trace.hidden(), &teacher.hidden, idx, cfg)?;
        obj.total += cfg.sd_m_weight * l;
        obj.terms.sd_m = Some(l);
        accumulate(&mut obj.d_hidden, g, cfg.sd_m_weight)?;
    }
    Ok(obj)
}

/// Fraction of `idx` whose argmax prediction equals the label; `None` for an
/// empty index set.
pub fn accuracy(logits: &Matrix, labels: &[usize], idx: &[usize]) -> Option<f64> {
    if idx.is_empty() {
        return None;
    }
    let pred = logits.argmax_rows();
    let hits = idx.iter().filter(|&&i| pred[i] == labels[i]).count();
    Some(hits as f64 / idx.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Training objective (dropout active) before the update.
    pub loss: f64,
    pub terms: LossTerms,
    /// Cross-entropy on the validation set after the update, eval mode.
    pub val_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub stage: Stage,
    pub seed: u64,
    pub config: TrainConfig,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    /// Test accuracy of the returned checkpoint.
    pub test_acc: Option<f64>,
    pub wall_clock: Duration,
}

/// Builds the graph operator and propagated inputs for a dataset/task pair.
pub fn model_inputs(dataset: &Dataset, task: Option<&PretextTask>) -> Result<ModelInputs> {
    ModelInputs::new(
        &dataset.graph,
        &dataset.features,
        task.and_then(|t| t.input_override.as_ref()),
    )
}

fn pretext_dim(task: Option<&PretextTask>) -> usize {
    task.map_or(1, |t| t.output_dim())
}

/// Stage one: optimizes `L_NC + α L_SS` and returns the best-validation teacher.
pub fn train_teacher(
    dataset: &Dataset,
    task: Option<&PretextTask>,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(ModelParams, TrainReport)> {
    let inputs = model_inputs(dataset, task)?;
    train_teacher_with(dataset, &inputs, task, cfg, seed)
}

pub fn train_teacher_with(
    dataset: &Dataset,
    inputs: &ModelInputs,
    task: Option<&PretextTask>,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(ModelParams, TrainReport)> {
    cfg.validate()?;
    let params = ModelParams::init(
        dataset.num_features(),
        cfg.hidden,
        dataset.num_classes,
        pretext_dim(task),
        cfg.dropout,
        derive_seed(seed, stream::TEACHER_INIT),
    )?;
    let loss = cfg.loss;
    let labels = &dataset.labels;
    let train = &dataset.split.train;
    run_stage(
        Stage::Teacher,
        dataset,
        inputs,
        params,
        cfg,
        seed,
        derive_seed(seed, stream::TEACHER_DROPOUT),
        |trace| teacher_objective(trace, labels, task, train, &loss),
    )
}

/// Stage two: distills the frozen `teacher` into a fresh student.
pub fn train_student(
    dataset: &Dataset,
    task: Option<&PretextTask>,
    teacher: &ModelParams,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(ModelParams, TrainReport)> {
    let inputs = model_inputs(dataset, task)?;
    train_student_with(dataset, &inputs, task, teacher, cfg, seed)
}

pub fn train_student_with(
    dataset: &Dataset,
    inputs: &ModelInputs,
    task: Option<&PretextTask>,
    teacher: &ModelParams,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(ModelParams, TrainReport)> {
    cfg.validate()?;
    if teacher.w_hat.cols() != pretext_dim(task) || teacher.w1.cols() != dataset.num_classes {
        return Err(SdssError::InvalidParameter(
            "teacher head widths do not match the dataset and pretext task".into(),
        ));
    }
    // the teacher is frozen and evaluated without dropout, so its outputs are
    // the same at every epoch
    let targets = TeacherOutputs::from_trace(forward(teacher, inputs, false, 0)?);
    let params = ModelParams::init(
        dataset.num_features(),
        cfg.hidden,
        dataset.num_classes,
        pretext_dim(task),
        cfg.dropout,
        derive_seed(seed, stream::STUDENT_INIT),
    )?;
    let loss = cfg.loss;
    let labels = &dataset.labels;
    let train = &dataset.split.train;
    run_stage(
        Stage::Student,
        dataset,
        inputs,
        params,
        cfg,
        seed,
        derive_seed(seed, stream::STUDENT_DROPOUT),
        |trace| student_objective(trace, &targets, labels, task, train, &loss),
    )
}

#[allow(clippy::too_many_arguments)]
fn run_stage(
    stage: Stage,
    dataset: &Dataset,
    inputs: &ModelInputs,
    mut params: ModelParams,
    cfg: &TrainConfig,
    seed: u64,
    dropout_seed: u64,
    objective: impl Fn(&ForwardTrace) -> Result<Objective>,
) -> Result<(ModelParams, TrainReport)> {
    let split = &dataset.split;
    if split.val.is_empty() {
        return Err(SdssError::EmptyIndexSet("validation"));
    }
    let clock = Stopwatch::start();
    let mut state = AdamState::new(&params);
    let mut best = params.clone();
    let mut best_epoch = 0;
    let mut best_val = f64::NEG_INFINITY;
    let mut epochs = Vec::new();

    for epoch in 0..cfg.max_epochs {
        let trace = forward(
            &params,
            inputs,
            true,
            derive_seed(dropout_seed, epoch as u64),
        )?;
        let obj = objective(&trace)?;
        let grads = backward(&params, inputs, &trace, obj.output_grads())?;
        adam_step(&mut params, &grads, &mut state, &cfg.optimizer)?;

        let eval = forward(&params, inputs, false, 0)?;
        if !eval.logits.is_finite() {
            return Err(SdssError::InvalidParameter(format!(
                "{} training diverged at epoch {epoch}",
                stage.name()
            )));
        }
        let (val_loss, _) =
            losses::cross_entropy(&eval.logits, &dataset.labels, &split.val, Reduction::Mean)?;
        let val_acc = accuracy(&eval.logits, &dataset.labels, &split.val).unwrap_or(0.0);
        let train_acc = accuracy(&eval.logits, &dataset.labels, &split.train).unwrap_or(0.0);
        epochs.push(EpochRecord {
            epoch,
            loss: obj.total,
            terms: obj.terms,
            val_loss,
            train_acc,
            val_acc,
        });
        if val_acc > best_val {
            best_val = val_acc;
            best_epoch = epoch;
            best.clone_from(&params);
        } else if epoch - best_epoch >= cfg.patience {
            break;
        }
    }

    let eval = forward(&best, inputs, false, 0)?;
    let test_acc = accuracy(&eval.logits, &dataset.labels, &split.test);
    let report = TrainReport {
        stage,
        seed,
        config: *cfg,
        epochs,
        best_epoch,
        best_val_acc: best_val,
        test_acc,
        wall_clock: clock.elapsed(),
    };
    Ok((best, report))
}

/// Wall-clock timer; reads zero on targets without a system clock.
struct Stopwatch(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        Stopwatch(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    fn elapsed(&self) -> Duration {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed();
        #[cfg(target_arch = "wasm32")]
        return Duration::ZERO;
    }
}

/// Eval-mode class predictions.
pub fn predict(params: &ModelParams, inputs: &ModelInputs) -> Result<Vec<usize>> {
    Ok(forward(params, inputs, false, 0)?.logits.argmax_rows())
}
