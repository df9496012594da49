use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::dataset::{PlantedPartition, SplitMode};
use crate::pretext::{PretextKind, PretextParams};
use crate::training::{LossConfig, Reduction, TrainConfig, WeightDecayMode};

use super::BenchError;

/// The four ablation arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    /// Supervised GCN, single stage.
    Baseline,
    /// Single stage with the auxiliary pretext loss.
    Ss,
    /// Two stages, supervised teacher, no pretext anywhere.
    Sd,
    /// Two stages with pretext loss in the teacher and pretext distillation in the student.
    Sdss,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Baseline, Mode::Ss, Mode::Sd, Mode::Sdss];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Baseline => "baseline",
            Mode::Ss => "ss",
            Mode::Sd => "sd",
            Mode::Sdss => "sdss",
        }
    }

    pub fn uses_pretext(self) -> bool {
        matches!(self, Mode::Ss | Mode::Sdss)
    }

    pub fn distills(self) -> bool {
        matches!(self, Mode::Sd | Mode::Sdss)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode '{s}' (expected baseline, ss, sd or sdss)"))
    }
}

/// Which distillation terms the student optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TermSet {
    Nc,
    NcM,
    NcSsM,
}

impl TermSet {
    pub const ALL: [TermSet; 3] = [TermSet::Nc, TermSet::NcM, TermSet::NcSsM];

    pub fn name(self) -> &'static str {
        match self {
            TermSet::Nc => "NC",
            TermSet::NcM => "NC+M",
            TermSet::NcSsM => "NC+SS+M",
        }
    }

    /// 0/1 switches for the (NC, SS, M) terms.
    pub fn switches(self) -> (bool, bool, bool) {
        match self {
            TermSet::Nc => (true, false, false),
            TermSet::NcM => (true, false, true),
            TermSet::NcSsM => (true, true, true),
        }
    }
}

impl fmt::Display for TermSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Synthetic(PlantedPartition),
    Dir(PathBuf),
}

/// Effective configuration of a command, assembled from a key=value file and
/// overrides. Every field has a textual key; see [`RunConfig::pairs`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    pub row_normalize: bool,
    pub split_mode: SplitMode,
    pub train_per_class: usize,
    pub val_per_class: usize,
    pub split_seed: u64,
    pub mode: Mode,
    pub pretext: PretextKind,
    /// 0 means "number of classes".
    pub clusters: usize,
    /// 0 means "number of classes".
    pub parts: usize,
    pub epsilon: f64,
    pub mask_ratio: f64,
    /// 0 means `min(32, f)`.
    pub pca_dim: usize,
    pub kmeans_restarts: usize,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub per_class: Vec<usize>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: DatasetSource::Synthetic(PlantedPartition::default()),
            row_normalize: false,
            split_mode: SplitMode::PublicFile,
            train_per_class: 20,
            val_per_class: 30,
            split_seed: 0,
            mode: Mode::Sdss,
            pretext: PretextKind::Clustering,
            clusters: 0,
            parts: 0,
            epsilon: 0.1,
            mask_ratio: 0.1,
            pca_dim: 0,
            kmeans_restarts: crate::pretext::DEFAULT_KMEANS_RESTARTS,
            train: TrainConfig::default(),
            seeds: vec![0],
            per_class: vec![5, 10, 20, 50],
            out: PathBuf::from("runs"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value '{value}' for '{key}'"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(format!("invalid boolean '{value}' for '{key}'")),
    }
}

/// Parses `0,1,2`, `0..10` (half-open) or a mix such as `0..3,7`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, String> {
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = parse("seeds", a.trim())?;
            let b: u64 = parse("seeds", b.trim())?;
            if b <= a {
                return Err(format!("empty seed range '{part}'"));
            }
            seeds.extend(a..b);
        } else {
            seeds.push(parse("seeds", part)?);
        }
    }
    if seeds.is_empty() {
        return Err("seed list is empty".into());
    }
    Ok(seeds)
}

fn parse_list(key: &str, text: &str) -> Result<Vec<usize>, String> {
    let v: Vec<usize> = text
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| parse(key, p))
        .collect::<Result<_, _>>()?;
    if v.is_empty() {
        return Err(format!("'{key}' needs at least one value"));
    }
    Ok(v)
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    /// Builds a configuration from optional file text, then `overrides` in
    /// order. `env_seeds` is used only when no `seeds` key appears anywhere.
    pub fn from_sources(
        file: Option<&str>,
        overrides: &[(String, String)],
        env_seeds: Option<&str>,
    ) -> Result<Self, BenchError> {
        let mut cfg = RunConfig::default();
        let mut seeds_given = false;
        if let Some(text) = file {
            for (no, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    BenchError::Usage(format!("config line {}: expected key=value", no + 1))
                })?;
                seeds_given |= k.trim() == "seeds";
                cfg.set(k.trim(), v.trim())
                    .map_err(|e| BenchError::Usage(format!("config line {}: {e}", no + 1)))?;
            }
        }
        for (k, v) in overrides {
            seeds_given |= k == "seeds";
            cfg.set(k, v).map_err(BenchError::Usage)?;
        }
        if !seeds_given {
            if let Some(env) = env_seeds {
                cfg.seeds =
                    parse_seeds(env).map_err(|e| BenchError::Usage(format!("SDSS_SEED: {e}")))?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn synthetic_mut(&mut self) -> &mut PlantedPartition {
        if !matches!(self.dataset, DatasetSource::Synthetic(_)) {
            self.dataset = DatasetSource::Synthetic(PlantedPartition::default());
        }
        match &mut self.dataset {
            DatasetSource::Synthetic(p) => p,
            DatasetSource::Dir(_) => unreachable!(),
        }
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let t = &mut self.train;
        match key {
            "dataset" if value == "synthetic" => {
                self.synthetic_mut();
            }
            "dataset" => self.dataset = DatasetSource::Dir(PathBuf::from(value)),
            "synthetic.blocks" => self.synthetic_mut().blocks = parse(key, value)?,
            "synthetic.per_block" => self.synthetic_mut().per_block = parse(key, value)?,
            "synthetic.p_in" => self.synthetic_mut().p_in = parse(key, value)?,
            "synthetic.p_out" => self.synthetic_mut().p_out = parse(key, value)?,
            "synthetic.features" => self.synthetic_mut().num_features = parse(key, value)?,
            "synthetic.shift" => self.synthetic_mut().shift = parse(key, value)?,
            "synthetic.seed" => self.synthetic_mut().seed = parse(key, value)?,
            "row_normalize" => self.row_normalize = parse_bool(key, value)?,
            "split" => {
                self.split_mode = match value {
                    "public" => SplitMode::PublicFile,
                    "sample" => SplitMode::PerClassSample,
                    _ => return Err(format!("split must be 'public' or 'sample', got '{value}'")),
                }
            }
            "train_per_class" => self.train_per_class = parse(key, value)?,
            "val_per_class" => self.val_per_class = parse(key, value)?,
            "split_seed" => self.split_seed = parse(key, value)?,
            "mode" => self.mode = value.parse()?,
            "pretext" => {
                self.pretext = value.parse().map_err(|e: crate::SdssError| e.to_string())?
            }
            "clusters" => self.clusters = parse(key, value)?,
            "parts" => self.parts = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "mask_ratio" => self.mask_ratio = parse(key, value)?,
            "pca_dim" => self.pca_dim = parse(key, value)?,
            "kmeans_restarts" => self.kmeans_restarts = parse(key, value)?,
            "hidden" => t.hidden = parse(key, value)?,
            "dropout" => t.dropout = parse(key, value)?,
            "lr" => t.optimizer.lr = parse(key, value)?,
            "weight_decay" => t.optimizer.weight_decay = parse(key, value)?,
            "decay" => {
                t.optimizer.decay_mode = match value {
                    "decoupled" => WeightDecayMode::Decoupled,
                    "coupled" => WeightDecayMode::Coupled,
                    _ => {
                        return Err(format!(
                            "decay must be 'decoupled' or 'coupled', got '{value}'"
                        ))
                    }
                }
            }
            "adam_beta1" => t.optimizer.beta1 = parse(key, value)?,
            "adam_beta2" => t.optimizer.beta2 = parse(key, value)?,
            "adam_eps" => t.optimizer.eps = parse(key, value)?,
            "max_epochs" => t.max_epochs = parse(key, value)?,
            "patience" => t.patience = parse(key, value)?,
            "alpha" => t.loss.alpha = parse(key, value)?,
            "beta1" => t.loss.beta1 = parse(key, value)?,
            "beta2" => t.loss.beta2 = parse(key, value)?,
            "tau" => t.loss.tau = parse(key, value)?,
            "tau_squared" => t.loss.tau_squared = parse_bool(key, value)?,
            "reduction" | "loss_reduction" => {
                t.loss.reduction = match value {
                    "mean" => Reduction::Mean,
                    "sum" => Reduction::Sum,
                    _ => return Err(format!("reduction must be 'mean' or 'sum', got '{value}'")),
                }
            }
            "sd_nc_weight" => t.loss.sd_nc_weight = parse(key, value)?,
            "sd_ss_weight" => t.loss.sd_ss_weight = parse(key, value)?,
            "sd_m_weight" => t.loss.sd_m_weight = parse(key, value)?,
            "seeds" => self.seeds = parse_seeds(value)?,
            "per_class" => self.per_class = parse_list(key, value)?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(format!("unknown config key '{key}'")),
        }
        Ok(())
    }

    /// Checks every cross-field invariant; errors map to exit code 2.
    pub fn validate(&self) -> Result<(), BenchError> {
        let usage = |m: String| Err(BenchError::Usage(m));
        self.train
            .validate()
            .map_err(|e| BenchError::Usage(e.to_string()))?;
        if self.seeds.is_empty() {
            return usage("seeds must be nonempty".into());
        }
        if self.mode == Mode::Ss && self.train.loss.alpha <= 0.0 {
            return usage("mode=ss requires alpha > 0".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return usage(format!("epsilon must be in (0, 1), got {}", self.epsilon));
        }
        if !(self.mask_ratio > 0.0 && self.mask_ratio < 1.0) {
            return usage(format!(
                "mask_ratio must be in (0, 1), got {}",
                self.mask_ratio
            ));
        }
        if self.kmeans_restarts == 0 {
            return usage("kmeans_restarts must be positive".into());
        }
        if self.per_class.contains(&0) {
            return usage("per_class entries must be positive".into());
        }
        let weights = [
            self.train.loss.sd_nc_weight,
            self.train.loss.sd_ss_weight,
            self.train.loss.sd_m_weight,
        ];
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return usage("distillation term weights must be finite and non-negative".into());
        }
        Ok(())
    }

    pub fn pretext_params(&self, num_classes: usize, num_features: usize) -> PretextParams {
        let mut p = PretextParams::defaults_for(num_classes, num_features);
        if self.clusters > 0 {
            p.clusters = self.clusters;
        }
        if self.parts > 0 {
            p.parts = self.parts;
        }
        if self.pca_dim > 0 {
            p.pca_dim = self.pca_dim;
        }
        p.epsilon = self.epsilon;
        p.mask_ratio = self.mask_ratio;
        p.kmeans_restarts = self.kmeans_restarts;
        p
    }

    /// Every setting as `(key, value)` in a fixed order, excluding `out`.
    /// Feeding these back through [`RunConfig::set`] reproduces the config.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut v: Vec<(&'static str, String)> = Vec::new();
        match &self.dataset {
            DatasetSource::Synthetic(p) => {
                v.push(("dataset", "synthetic".into()));
                v.push(("synthetic.blocks", p.blocks.to_string()));
                v.push(("synthetic.per_block", p.per_block.to_string()));
                v.push(("synthetic.p_in", p.p_in.to_string()));
                v.push(("synthetic.p_out", p.p_out.to_string()));
                v.push(("synthetic.features", p.num_features.to_string()));
                v.push(("synthetic.shift", p.shift.to_string()));
                v.push(("synthetic.seed", p.seed.to_string()));
            }
            DatasetSource::Dir(d) => v.push(("dataset", d.display().to_string())),
        }
        let t = &self.train;
        let l = &t.loss;
        let rest: [(&'static str, String); 34] = [
            ("row_normalize", self.row_normalize.to_string()),
            (
                "split",
                match self.split_mode {
                    SplitMode::PublicFile => "public",
                    SplitMode::PerClassSample => "sample",
                }
                .into(),
            ),
            ("train_per_class", self.train_per_class.to_string()),
            ("val_per_class", self.val_per_class.to_string()),
            ("split_seed", self.split_seed.to_string()),
            ("mode", self.mode.to_string()),
            ("pretext", self.pretext.to_string()),
            ("clusters", self.clusters.to_string()),
            ("parts", self.parts.to_string()),
            ("epsilon", self.epsilon.to_string()),
            ("mask_ratio", self.mask_ratio.to_string()),
            ("pca_dim", self.pca_dim.to_string()),
            ("kmeans_restarts", self.kmeans_restarts.to_string()),
            ("hidden", t.hidden.to_string()),
            ("dropout", t.dropout.to_string()),
            ("lr", t.optimizer.lr.to_string()),
            ("weight_decay", t.optimizer.weight_decay.to_string()),
            (
                "decay",
                match t.optimizer.decay_mode {
                    WeightDecayMode::Decoupled => "decoupled",
                    WeightDecayMode::Coupled => "coupled",
                }
                .into(),
            ),
            ("max_epochs", t.max_epochs.to_string()),
            ("patience", t.patience.to_string()),
            ("alpha", l.alpha.to_string()),
            ("beta1", l.beta1.to_string()),
            ("beta2", l.beta2.to_string()),
            ("tau", l.tau.to_string()),
            ("tau_squared", l.tau_squared.to_string()),
            (
                "reduction",
                match l.reduction {
                    Reduction::Mean => "mean",
                    Reduction::Sum => "sum",
                }
                .into(),
            ),
            ("sd_nc_weight", l.sd_nc_weight.to_string()),
            ("sd_ss_weight", l.sd_ss_weight.to_string()),
            ("sd_m_weight", l.sd_m_weight.to_string()),
            ("seeds", join(&self.seeds)),
            ("per_class", join(&self.per_class)),
            ("adam_beta1", t.optimizer.beta1.to_string()),
            ("adam_beta2", t.optimizer.beta2.to_string()),
            ("adam_eps", t.optimizer.eps.to_string()),
        ];
        v.extend(rest);
        v
    }

    /// Loss configuration actually used for a (mode, term set) arm.
    ///
    /// The teacher of `baseline` and `sd` has `α = 0`; the student of `sd`
    /// never sees the pretext head, so its SS multiplier is forced to 0.
    pub fn effective_loss(&self, mode: Mode, terms: TermSet) -> LossConfig {
        let mut l = self.train.loss;
        if !mode.uses_pretext() {
            l.alpha = 0.0;
        }
        let (nc, ss, m) = terms.switches();
        if !nc {
            l.sd_nc_weight = 0.0;
        }
        if !ss || !mode.uses_pretext() {
            l.sd_ss_weight = 0.0;
        }
        if !m {
            l.sd_m_weight = 0.0;
        }
        if !mode.distills() {
            l.sd_nc_weight = 0.0;
            l.sd_ss_weight = 0.0;
            l.sd_m_weight = 0.0;
        }
        l
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ov(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn seed_syntax() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("4, 1,9").unwrap(), vec![4, 1, 9]);
        assert_eq!(parse_seeds("0..2,7").unwrap(), vec![0, 1, 7]);
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn file_then_overrides_then_env() {
        let file = "# comment\nmode = ss\nalpha=0.2\nhidden=8 # trailing\n";
        let cfg =
            RunConfig::from_sources(Some(file), &ov(&[("hidden", "16")]), Some("5..7")).unwrap();
        assert_eq!(cfg.mode, Mode::Ss);
        assert_eq!(cfg.train.loss.alpha, 0.2);
        assert_eq!(cfg.train.hidden, 16);
        assert_eq!(cfg.seeds, vec![5, 6]);

        let cfg = RunConfig::from_sources(Some("seeds=1"), &[], Some("5..7")).unwrap();
        assert_eq!(cfg.seeds, vec![1]);
    }

    #[test]
    fn invalid_settings_are_usage_errors() {
        for bad in [
            ov(&[("mode", "ss"), ("alpha", "0")]),
            ov(&[("bogus", "1")]),
            ov(&[("tau", "0")]),
            ov(&[("epsilon", "1.5")]),
            ov(&[("hidden", "-3")]),
        ] {
            let err = RunConfig::from_sources(None, &bad, None).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{bad:?}");
        }
        assert!(RunConfig::from_sources(Some("novalue"), &[], None).is_err());
    }

    #[test]
    fn pairs_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.set("mode", "sd").unwrap();
        cfg.set("synthetic.shift", "2.5").unwrap();
        cfg.set("seeds", "0..4").unwrap();
        cfg.set("decay", "coupled").unwrap();
        let mut back = RunConfig::default();
        for (k, v) in cfg.pairs() {
            back.set(k, &v).unwrap();
        }
        assert_eq!(back, cfg);
    }

    #[test]
    fn mode_arms_switch_terms() {
        let cfg = RunConfig::default();
        let base = cfg.effective_loss(Mode::Baseline, TermSet::NcSsM);
        assert_eq!(
            (
                base.alpha,
                base.sd_nc_weight,
                base.sd_ss_weight,
                base.sd_m_weight
            ),
            (0.0, 0.0, 0.0, 0.0)
        );
        let sd = cfg.effective_loss(Mode::Sd, TermSet::NcSsM);
        assert_eq!(
            (sd.alpha, sd.sd_nc_weight, sd.sd_ss_weight, sd.sd_m_weight),
            (0.0, 1.0, 0.0, 1.0)
        );
        let nc = cfg.effective_loss(Mode::Sdss, TermSet::Nc);
        assert_eq!(
            (nc.alpha, nc.sd_nc_weight, nc.sd_ss_weight, nc.sd_m_weight),
            (0.1, 1.0, 0.0, 0.0)
        );
        let ncm = cfg.effective_loss(Mode::Sdss, TermSet::NcM);
        assert_eq!(
            (ncm.sd_nc_weight, ncm.sd_ss_weight, ncm.sd_m_weight),
            (1.0, 0.0, 1.0)
        );
    }
}
