use std::collections::BTreeMap;

use crate::dataset::Dataset;
use crate::model::{ModelInputs, ModelParams};
use crate::pretext::{make_task, PretextKind, PretextTask};
use crate::rng::{derive_seed, stream};
use crate::training::{
    model_inputs, train_student_with, train_teacher_with, LossConfig, TrainConfig, TrainReport,
};
use crate::Result;

use super::config::{Mode, RunConfig, TermSet};

/// One column of an ablation table: a mode, the pretext task it uses (if
/// any) and the student's distillation terms (two-stage modes only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Arm {
    pub mode: Mode,
    pub pretext: Option<PretextKind>,
    pub terms: Option<TermSet>,
}

impl Arm {
    /// The standard arm of a mode: all applicable terms.
    pub fn standard(mode: Mode, kind: PretextKind) -> Arm {
        Arm {
            mode,
            pretext: mode.uses_pretext().then_some(kind),
            terms: match mode {
                Mode::Baseline | Mode::Ss => None,
                Mode::Sd => Some(TermSet::NcM),
                Mode::Sdss => Some(TermSet::NcSsM),
            },
        }
    }

    pub fn loss(&self, cfg: &RunConfig) -> LossConfig {
        cfg.effective_loss(self.mode, self.terms.unwrap_or(TermSet::NcSsM))
    }

    pub fn pretext_name(&self) -> &'static str {
        self.pretext.map_or("none", PretextKind::name)
    }

    pub fn terms_name(&self) -> &'static str {
        self.terms.map_or("none", TermSet::name)
    }
}

/// Result of one arm at one seed.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub arm: Arm,
    pub seed: u64,
    pub loss: LossConfig,
    pub teacher: TrainReport,
    pub teacher_params: ModelParams,
    pub student: Option<(ModelParams, TrainReport)>,
}

impl RunResult {
    /// Report of the model used for inference.
    pub fn final_report(&self) -> &TrainReport {
        self.student.as_ref().map_or(&self.teacher, |(_, r)| r)
    }

    pub fn final_params(&self) -> &ModelParams {
        self.student
            .as_ref()
            .map_or(&self.teacher_params, |(p, _)| p)
    }

    pub fn test_acc(&self) -> f64 {
        self.final_report().test_acc.unwrap_or(f64::NAN)
    }
}

#[cfg(feature = "parallel")]
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, R>(items: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    items.iter().map(f).collect()
}

struct TeacherRun {
    task: Option<PretextTask>,
    /// Inputs specific to this task, when it overrides the features.
    inputs: Option<ModelInputs>,
    params: ModelParams,
    report: TrainReport,
}

/// Trains every (arm, seed) pair. Teachers are shared between arms that
/// would train identical ones (same pretext usage, task and seed), and
/// results come back sorted by arm, then by position in `seeds`.
pub fn run_arms(
    ds: &Dataset,
    cfg: &RunConfig,
    arms: &[Arm],
    seeds: &[u64],
) -> Result<Vec<RunResult>> {
    let base_inputs = model_inputs(ds, None)?;
    let params = cfg.pretext_params(ds.num_classes, ds.num_features());

    let mut teacher_keys: Vec<(Option<PretextKind>, u64)> = arms
        .iter()
        .flat_map(|a| seeds.iter().map(move |&s| (a.pretext, s)))
        .collect();
    teacher_keys.sort_unstable();
    teacher_keys.dedup();

    let teachers = par_map(&teacher_keys, |&(kind, seed)| -> Result<TeacherRun> {
        let task = kind
            .map(|k| {
                make_task(
                    k,
                    &ds.graph,
                    &ds.features,
                    &params,
                    derive_seed(seed, stream::PRETEXT),
                )
            })
            .transpose()?;
        let inputs = match task.as_ref() {
            Some(t) if t.input_override.is_some() => Some(model_inputs(ds, Some(t))?),
            _ => None,
        };
        let mut tc: TrainConfig = cfg.train;
        if kind.is_none() {
            tc.loss.alpha = 0.0;
        }
        let (p, report) = train_teacher_with(
            ds,
            inputs.as_ref().unwrap_or(&base_inputs),
            task.as_ref(),
            &tc,
            seed,
        )?;
        Ok(TeacherRun {
            task,
            inputs,
            params: p,
            report,
        })
    });
    let teachers: BTreeMap<(Option<PretextKind>, u64), TeacherRun> = teacher_keys
        .into_iter()
        .zip(teachers)
        .map(|(k, t)| t.map(|t| (k, t)))
        .collect::<Result<_>>()?;

    let mut jobs: Vec<(Arm, usize)> = arms
        .iter()
        .flat_map(|&a| (0..seeds.len()).map(move |i| (a, i)))
        .collect();
    jobs.sort_unstable();
    jobs.dedup();

    par_map(&jobs, |&(arm, i)| -> Result<RunResult> {
        let seed = seeds[i];
        let t = &teachers[&(arm.pretext, seed)];
        let loss = arm.loss(cfg);
        let student = if arm.mode.distills() {
            let sc = TrainConfig { loss, ..cfg.train };
            let inputs = t.inputs.as_ref().unwrap_or(&base_inputs);
            Some(train_student_with(
                ds,
                inputs,
                t.task.as_ref(),
                &t.params,
                &sc,
                seed,
            )?)
        } else {
            None
        };
        Ok(RunResult {
            arm,
            seed,
            loss,
            teacher: t.report.clone(),
            teacher_params: t.params.clone(),
            student,
        })
    })
    .into_iter()
    .collect()
}
