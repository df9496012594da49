//! Experiment commands behind the `sdss` binary.
//!
//! Each command takes a validated [`RunConfig`], writes its artifacts through
//! a staging directory that is renamed into place only on success, and
//! returns the record lines it wants printed. Summary records never contain
//! timing, so reruns with the same configuration print identical bytes.

pub mod config;
pub mod report;
mod runner;

pub use config::{parse_seeds, DatasetSource, Mode, RunConfig, TermSet};
pub use report::{mean_std, Record};
pub use runner::{run_arms, Arm, RunResult};

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::checkpoint::{self, config_hash, CheckpointMeta};
use crate::dataset::{
    generate_planted_partition, load_dataset, write_labels, write_matrix, Dataset, LoadOptions,
    SplitMode, SplitSpec,
};
use crate::pretext::{make_task, PretextKind, PretextTargets};
use crate::rng::{derive_seed, stream};
use crate::SdssError;

#[derive(Debug, Error)]
pub enum BenchError {
    /// Bad configuration or arguments; exit code 2.
    #[error("{0}")]
    Usage(String),
    /// Failure while running; exit code 1.
    #[error(transparent)]
    Runtime(#[from] SdssError),
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Usage(_) => 2,
            BenchError::Runtime(_) => 1,
        }
    }
}

pub type BenchResult<T> = std::result::Result<T, BenchError>;

/// What a command prints and which files it produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommandOutput {
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
}

/// Loads or generates the configured dataset and applies the split policy.
pub fn resolve_dataset(cfg: &RunConfig) -> BenchResult<Dataset> {
    let ds = match &cfg.dataset {
        DatasetSource::Synthetic(p) => {
            generate_planted_partition(p).map_err(|e| BenchError::Usage(e.to_string()))?
        }
        DatasetSource::Dir(dir) => {
            if !dir.is_dir() {
                return Err(BenchError::Usage(format!(
                    "dataset directory not found: {}",
                    dir.display()
                )));
            }
            let opts = LoadOptions {
                row_normalize: cfg.row_normalize,
                split: split_spec(cfg, cfg.train_per_class, cfg.split_seed),
            };
            return Ok(load_dataset(dir, &opts)?);
        }
    };
    let mut ds = ds;
    if cfg.row_normalize {
        ds.features.row_normalize_l1();
    }
    if cfg.split_mode == SplitMode::PerClassSample {
        ds = ds.resplit(&split_spec(cfg, cfg.train_per_class, cfg.split_seed))?;
    }
    Ok(ds)
}

fn split_spec(cfg: &RunConfig, train_per_class: usize, seed: u64) -> SplitSpec {
    SplitSpec {
        mode: cfg.split_mode,
        train_per_class,
        val_per_class: cfg.val_per_class,
        seed: derive_seed(seed, stream::SPLIT),
    }
}

/// Files are written under a sibling `.<name>.staging-<pid>` directory and
/// moved into the output directory by [`Staging::commit`]; dropping an
/// uncommitted stage removes it.
struct Staging {
    dir: PathBuf,
    out: PathBuf,
    names: Vec<String>,
    committed: bool,
}

impl Staging {
    fn new(out: &Path) -> BenchResult<Self> {
        let name = out
            .file_name()
            .map_or("out".into(), |n| n.to_string_lossy().into_owned());
        let parent = out
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        let dir = parent.join(format!(".{name}.staging-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| SdssError::io(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| SdssError::io(&dir, e))?;
        Ok(Staging {
            dir,
            out: out.to_path_buf(),
            names: Vec::new(),
            committed: false,
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.names.push(name.to_string());
        self.dir.join(name)
    }

    fn write(&mut self, name: &str, text: &str) -> BenchResult<()> {
        let p = self.path(name);
        fs::write(&p, text).map_err(|e| SdssError::io(&p, e))?;
        Ok(())
    }

    fn commit(mut self) -> BenchResult<Vec<PathBuf>> {
        fs::create_dir_all(&self.out).map_err(|e| SdssError::io(&self.out, e))?;
        let mut files = Vec::with_capacity(self.names.len());
        for name in &self.names {
            let dest = self.out.join(name);
            fs::rename(self.dir.join(name), &dest).map_err(|e| SdssError::io(&dest, e))?;
            files.push(dest);
        }
        self.committed = true;
        let _ = fs::remove_dir_all(&self.dir);
        Ok(files)
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

fn lines_text(lines: &[String]) -> String {
    lines.iter().fold(String::new(), |mut s, l| {
        let _ = writeln!(s, "{l}");
        s
    })
}

fn config_record(command: &str, cfg: &RunConfig) -> Record {
    let mut r = Record::new("config").field("command", command);
    let mut canonical = String::new();
    for (k, v) in cfg.pairs() {
        let _ = writeln!(canonical, "{k}={v}");
        r = r.field(k, v);
    }
    r.field("config_hash", config_hash(&canonical))
}

/// Arm identity plus the multipliers it actually trained with.
fn arm_fields(r: Record, arm: &Arm, cfg: &RunConfig) -> Record {
    let l = arm.loss(cfg);
    r.field("mode", arm.mode)
        .field("pretext", arm.pretext_name())
        .field("terms", arm.terms_name())
        .field("alpha", l.alpha)
        .field("w_nc", l.sd_nc_weight)
        .field("w_ss", l.sd_ss_weight)
        .field("w_m", l.sd_m_weight)
}

fn run_summary(run: &RunResult, cfg: &RunConfig) -> Record {
    let r = arm_fields(Record::new("run"), &run.arm, cfg).field("seed", run.seed);
    let r = match &run.student {
        Some((_, s)) => r
            .num("teacher_test_acc", run.teacher.test_acc.unwrap_or(f64::NAN))
            .field("student_best_epoch", s.best_epoch),
        None => r,
    };
    r.field("best_epoch", run.final_report().best_epoch)
        .num("best_val_acc", run.final_report().best_val_acc)
        .num("test_acc", run.test_acc())
}

fn aggregate(kind: &str, arm: &Arm, cfg: &RunConfig, runs: &[&RunResult]) -> (Record, f64, f64) {
    let accs: Vec<f64> = runs.iter().map(|r| r.test_acc()).collect();
    let (mean, std) = mean_std(&accs);
    let r = arm_fields(Record::new(kind), arm, cfg)
        .field("seeds", runs.len())
        .num("mean_test_acc", mean)
        .num("std_test_acc", std);
    (r, mean, std)
}

/// Trains the configured mode for every seed.
///
/// Artifacts per seed: `<mode>-seed<s>.report` (config, epoch and summary
/// records), `<mode>-seed<s>.ckpt` (the inference model) and, for two-stage
/// modes, `<mode>-seed<s>.teacher.ckpt`. Also `<mode>-summary.txt` and
/// `<mode>-timing.txt`.
pub fn cmd_train(cfg: &RunConfig) -> BenchResult<CommandOutput> {
    cfg.validate()?;
    let ds = resolve_dataset(cfg)?;
    let arm = Arm::standard(cfg.mode, cfg.pretext);
    let runs = run_arms(&ds, cfg, &[arm], &cfg.seeds)?;

    let mut stage = Staging::new(&cfg.out)?;
    let cfg_rec = config_record("train", cfg);
    let hash = cfg_rec.get("config_hash").unwrap_or_default().to_string();
    let mode = cfg.mode.name();
    let mut lines = Vec::new();
    let mut timing = Vec::new();
    for run in &runs {
        let mut rep = vec![
            cfg_rec.to_string(),
            arm_fields(Record::new("arm"), &arm, cfg)
                .field("seed", run.seed)
                .to_string(),
        ];
        let mut stages = vec![&run.teacher];
        if let Some((_, s)) = &run.student {
            stages.push(s);
        }
        for r in &stages {
            rep.extend(
                r.epochs
                    .iter()
                    .map(|e| report::epoch_record(r.stage.name(), e).to_string()),
            );
            rep.push(report::summary_record(r).to_string());
            timing.push(
                Record::new("timing")
                    .field("mode", mode)
                    .field("seed", run.seed)
                    .field("stage", r.stage.name())
                    .field("epochs", r.epochs.len())
                    .num("seconds", r.wall_clock.as_secs_f64())
                    .to_string(),
            );
        }
        let summary = run_summary(run, cfg).to_string();
        rep.push(summary.clone());
        lines.push(summary);
        stage.write(
            &format!("{mode}-seed{}.report", run.seed),
            &lines_text(&rep),
        )?;

        let meta = CheckpointMeta {
            seed: run.seed,
            config_hash: hash.clone(),
        };
        let ckpt = checkpoint::to_text(run.final_params(), &meta);
        stage.write(&format!("{mode}-seed{}.ckpt", run.seed), &ckpt)?;
        if run.student.is_some() {
            let t = checkpoint::to_text(&run.teacher_params, &meta);
            stage.write(&format!("{mode}-seed{}.teacher.ckpt", run.seed), &t)?;
        }
    }
    let refs: Vec<&RunResult> = runs.iter().collect();
    let (agg, mean, std) = aggregate("aggregate", &arm, cfg, &refs);
    lines.push(agg.to_string());
    let mut summary = vec![cfg_rec.to_string()];
    summary.extend(lines.iter().cloned());
    stage.write(&format!("{mode}-summary.txt"), &lines_text(&summary))?;
    stage.write(&format!("{mode}-timing.txt"), &lines_text(&timing))?;
    lines.push(format!(
        "{mode}: test accuracy {:.2} ± {:.2} over {} seed(s)",
        100.0 * mean,
        100.0 * std,
        runs.len()
    ));
    Ok(CommandOutput {
        lines,
        files: stage.commit()?,
    })
}

/// Every distinct arm of {modes} x {pretext kinds} x {term subsets}.
///
/// Arms that would ignore a coordinate appear once: the baseline needs no
/// task or terms, `ss` no terms, and `sd` has no pretext head so its
/// `NC+SS+M` subset coincides with `NC+M`.
pub fn ablation_arms() -> Vec<Arm> {
    let mut arms = vec![Arm {
        mode: Mode::Baseline,
        pretext: None,
        terms: None,
    }];
    arms.extend(PretextKind::ALL.map(|k| Arm {
        mode: Mode::Ss,
        pretext: Some(k),
        terms: None,
    }));
    arms.extend([TermSet::Nc, TermSet::NcM].map(|t| Arm {
        mode: Mode::Sd,
        pretext: None,
        terms: Some(t),
    }));
    for k in PretextKind::ALL {
        arms.extend(TermSet::ALL.map(|t| Arm {
            mode: Mode::Sdss,
            pretext: Some(k),
            terms: Some(t),
        }));
    }
    arms
}

fn table(title: &str, rows: &[(&Arm, f64, f64)]) -> Vec<String> {
    let mut out = vec![
        format!("# {title}"),
        format!(
            "{:<10}{:<14}{:<10}{:>9}{:>8}",
            "mode", "pretext", "terms", "mean", "std"
        ),
    ];
    for (arm, mean, std) in rows {
        out.push(format!(
            "{:<10}{:<14}{:<10}{:>9.2}{:>8.2}",
            arm.mode.name(),
            arm.pretext_name(),
            arm.terms_name(),
            100.0 * mean,
            100.0 * std
        ));
    }
    out
}

/// Runs the ablation grid and prints the mode, task and term-subset tables.
///
/// Writes `ablation.txt` (records and tables) and `ablation-runs.txt`
/// (one record per arm and seed).
pub fn cmd_ablation(cfg: &RunConfig) -> BenchResult<CommandOutput> {
    cfg.validate()?;
    if cfg.train.loss.alpha <= 0.0 {
        return Err(BenchError::Usage(
            "the ablation includes mode=ss, which requires alpha > 0".into(),
        ));
    }
    let ds = resolve_dataset(cfg)?;
    let arms = ablation_arms();
    let runs = run_arms(&ds, cfg, &arms, &cfg.seeds)?;

    let mut stats = Vec::with_capacity(arms.len());
    let mut records = vec![config_record("ablation", cfg).to_string()];
    for arm in &arms {
        let group: Vec<&RunResult> = runs.iter().filter(|r| r.arm == *arm).collect();
        let (rec, mean, std) = aggregate("ablation", arm, cfg, &group);
        records.push(rec.to_string());
        stats.push((arm, mean, std));
    }
    let find = |a: Arm| {
        stats
            .iter()
            .find(|(x, _, _)| **x == a)
            .copied()
            .expect("arm is in the grid")
    };
    let kind = cfg.pretext;
    let modes: Vec<_> = Mode::ALL
        .iter()
        .map(|&m| find(Arm::standard(m, kind)))
        .collect();
    let tasks: Vec<_> = PretextKind::ALL
        .iter()
        .map(|&k| find(Arm::standard(Mode::Sdss, k)))
        .collect();
    let terms: Vec<_> = TermSet::ALL
        .iter()
        .map(|&t| {
            find(Arm {
                mode: Mode::Sdss,
                pretext: Some(kind),
                terms: Some(t),
            })
        })
        .collect();
    let mut tables = table("modes", &modes);
    tables.extend(table("pretext tasks (sdss)", &tasks));
    tables.extend(table(&format!("distillation terms (sdss, {kind})"), &terms));

    let mut stage = Staging::new(&cfg.out)?;
    let mut full = records.clone();
    full.extend(tables.iter().cloned());
    stage.write("ablation.txt", &lines_text(&full))?;
    let per_run: Vec<String> = runs
        .iter()
        .map(|r| run_summary(r, cfg).to_string())
        .collect();
    stage.write("ablation-runs.txt", &lines_text(&per_run))?;

    let mut lines = records;
    lines.extend(tables);
    Ok(CommandOutput {
        lines,
        files: stage.commit()?,
    })
}

/// Accuracy of the four standard arms at each labels-per-class count in
/// `cfg.per_class`. Splits are resampled per count and seed. Writes
/// `label-ratio.txt`.
pub fn cmd_label_ratio(cfg: &RunConfig) -> BenchResult<CommandOutput> {
    cfg.validate()?;
    if cfg.train.loss.alpha <= 0.0 {
        return Err(BenchError::Usage(
            "label-ratio includes mode=ss, which requires alpha > 0".into(),
        ));
    }
    let ds = resolve_dataset(cfg)?;
    let arms: Vec<Arm> = Mode::ALL
        .iter()
        .map(|&m| Arm::standard(m, cfg.pretext))
        .collect();
    let mut records = vec![config_record("label-ratio", cfg).to_string()];
    let mut table_rows = Vec::new();
    for &pc in &cfg.per_class {
        let mut runs = Vec::new();
        for &seed in &cfg.seeds {
            let spec = SplitSpec {
                mode: SplitMode::PerClassSample,
                ..split_spec(cfg, pc, derive_seed(seed, pc as u64))
            };
            let split_ds = ds
                .resplit(&spec)
                .map_err(|e| BenchError::Usage(format!("per_class={pc}: {e}")))?;
            runs.extend(run_arms(&split_ds, cfg, &arms, &[seed])?);
        }
        for arm in &arms {
            let group: Vec<&RunResult> = runs.iter().filter(|r| r.arm == *arm).collect();
            let (rec, mean, _) = aggregate("label_ratio", arm, cfg, &group);
            records.push(rec.field("per_class", pc).to_string());
            table_rows.push((pc, arm.mode, mean));
        }
    }
    let mut text = vec![format!(
        "{:<10}{:>10}{:>10}{:>10}{:>10}",
        "per_class", "baseline", "ss", "sd", "sdss"
    )];
    for chunk in table_rows.chunks(arms.len()) {
        let mut row = format!("{:<10}", chunk[0].0);
        for (_, _, mean) in chunk {
            let _ = write!(row, "{:>10.2}", 100.0 * mean);
        }
        text.push(row);
    }
    let mut stage = Staging::new(&cfg.out)?;
    let mut full = records.clone();
    full.extend(text.iter().cloned());
    stage.write("label-ratio.txt", &lines_text(&full))?;
    let mut lines = records;
    lines.extend(text);
    Ok(CommandOutput {
        lines,
        files: stage.commit()?,
    })
}

/// Writes the configured pretext task's targets, seeded by the first seed.
///
/// Integer targets (clustering, partitioning and degree) use the labels file
/// format with the value range as class count; completion writes its PCA
/// targets and masked features in the features format plus a 0/1 mask in
/// the labels format.
pub fn cmd_pretext_export(cfg: &RunConfig) -> BenchResult<CommandOutput> {
    cfg.validate()?;
    let ds = resolve_dataset(cfg)?;
    let seed = cfg.seeds[0];
    let params = cfg.pretext_params(ds.num_classes, ds.num_features());
    let task = make_task(
        cfg.pretext,
        &ds.graph,
        &ds.features,
        &params,
        derive_seed(seed, stream::PRETEXT),
    )?;
    let kind = cfg.pretext.name();
    let n = ds.num_nodes();

    let mut stage = Staging::new(&cfg.out)?;
    match (&task.targets, cfg.pretext) {
        (PretextTargets::Classification { labels, classes }, _) => {
            write_labels(
                &stage.path(&format!("pretext-{kind}.labels.txt")),
                labels,
                *classes,
            )?;
        }
        (PretextTargets::Regression(m), PretextKind::Degree) => {
            let degrees: Vec<usize> = m.as_slice().iter().map(|&d| d as usize).collect();
            let range = degrees.iter().max().map_or(1, |d| d + 1);
            write_labels(
                &stage.path(&format!("pretext-{kind}.labels.txt")),
                &degrees,
                range,
            )?;
        }
        (PretextTargets::Regression(m), _) => {
            write_matrix(&stage.path(&format!("pretext-{kind}.targets.txt")), m)?;
        }
    }
    if let Some(x_hat) = &task.input_override {
        write_matrix(&stage.path(&format!("pretext-{kind}.features.txt")), x_hat)?;
    }
    if let Some(mask) = &task.mask {
        let mut flags = vec![0; n];
        mask.iter().for_each(|&i| flags[i] = 1);
        write_labels(&stage.path(&format!("pretext-{kind}.mask.txt")), &flags, 2)?;
    }
    let rec = Record::new("export")
        .field("pretext", kind)
        .field("seed", seed)
        .field("nodes", n)
        .field("output_dim", task.output_dim());
    let files = stage.commit()?;
    Ok(CommandOutput {
        lines: vec![
            config_record("pretext-export", cfg).to_string(),
            rec.to_string(),
        ],
        files,
    })
}

/// Writes the configured planted-partition dataset to the output directory
/// in the on-disk dataset format.
pub fn cmd_gen_synthetic(cfg: &RunConfig) -> BenchResult<CommandOutput> {
    cfg.validate()?;
    if !matches!(cfg.dataset, DatasetSource::Synthetic(_)) {
        return Err(BenchError::Usage(
            "gen-synthetic needs dataset=synthetic".into(),
        ));
    }
    let ds = resolve_dataset(cfg)?;
    let mut stage = Staging::new(&cfg.out)?;
    crate::dataset::write_graph(&stage.path("graph.txt"), &ds.graph)?;
    write_matrix(&stage.path("features.txt"), &ds.features)?;
    write_labels(&stage.path("labels.txt"), &ds.labels, ds.num_classes)?;
    crate::dataset::write_split(&stage.path("split.txt"), &ds.split)?;
    let rec = Record::new("dataset")
        .field("nodes", ds.num_nodes())
        .field("edges", ds.graph.num_edges())
        .field("features", ds.num_features())
        .field("classes", ds.num_classes)
        .field("train", ds.split.train.len())
        .field("val", ds.split.val.len())
        .field("test", ds.split.test.len());
    let files = stage.commit()?;
    Ok(CommandOutput {
        lines: vec![
            config_record("gen-synthetic", cfg).to_string(),
            rec.to_string(),
        ],
        files,
    })
}
