//! Loss terms and their gradients with respect to the model outputs.
//!
//! Every node-summed loss is divided by the size of its index set under
//! [`Reduction::Mean`] (the default) and left as a plain sum under
//! [`Reduction::Sum`]. Teacher quantities are constants: no gradient flows to
//! them.

use crate::dense::{log_softmax, softmax_in_place, Matrix};
use crate::error::{Result, SdssError};
use crate::pretext::{PretextTargets, PretextTask};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Mean,
    Sum,
}

impl Reduction {
    fn scale(self, count: usize) -> f64 {
        match self {
            Reduction::Mean => 1.0 / count as f64,
            Reduction::Sum => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// Weight of the self-supervised term in the teacher objective.
    pub alpha: f64,
    /// Teacher share of the classification distillation term.
    pub beta1: f64,
    /// Teacher share of the pretext distillation term.
    pub beta2: f64,
    /// Softmax temperature for soft labels.
    pub tau: f64,
    /// Multipliers of the three student terms (classification, pretext, middle layer).
    pub sd_nc_weight: f64,
    pub sd_ss_weight: f64,
    pub sd_m_weight: f64,
    pub reduction: Reduction,
    /// Multiply KL terms by `tau^2`.
    pub tau_squared: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            alpha: 0.1,
            beta1: 0.6,
            beta2: 0.3,
            tau: 2.0,
            sd_nc_weight: 1.0,
            sd_ss_weight: 1.0,
            sd_m_weight: 1.0,
            reduction: Reduction::Mean,
            tau_squared: false,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SdssError::InvalidParameter(msg));
        if self.alpha.is_nan() || self.alpha < 0.0 {
            return bad(format!("alpha must be >= 0, got {}", self.alpha));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..=1.0).contains(&b) {
                return bad(format!("{name} must be in [0, 1], got {b}"));
            }
        }
        if self.tau.is_nan() || self.tau <= 0.0 || !self.tau.is_finite() {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        for (name, w) in [
            ("sd_nc_weight", self.sd_nc_weight),
            ("sd_ss_weight", self.sd_ss_weight),
            ("sd_m_weight", self.sd_m_weight),
        ] {
            if !w.is_finite() || w < 0.0 {
                return bad(format!(
                    "{name} must be a finite non-negative number, got {w}"
                ));
            }
        }
        Ok(())
    }

    fn kl_factor(&self) -> f64 {
        if self.tau_squared {
            self.tau * self.tau
        } else {
            1.0
        }
    }
}

fn require_nonempty(idx: &[usize], what: &'static str) -> Result<()> {
    if idx.is_empty() {
        Err(SdssError::EmptyIndexSet(what))
    } else {
        Ok(())
    }
}

fn require_rows(z: &Matrix, n: usize, op: &'static str) -> Result<()> {
    if z.rows() != n {
        return Err(SdssError::ShapeMismatch {
            op,
            left: (n, z.cols()),
            right: z.shape(),
        });
    }
    Ok(())
}

fn require_same_shape(a: &Matrix, b: &Matrix, op: &'static str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(SdssError::ShapeMismatch {
            op,
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(())
}

/// Softmax cross-entropy against hard labels over `idx`.
pub fn cross_entropy(
    z: &Matrix,
    labels: &[usize],
    idx: &[usize],
    reduction: Reduction,
) -> Result<(f64, Matrix)> {
    require_nonempty(idx, "cross-entropy")?;
    require_rows(z, labels.len(), "cross_entropy")?;
    let scale = reduction.scale(idx.len());
    let mut grad = Matrix::zeros(z.rows(), z.cols());
    let mut loss = 0.0;
    for &i in idx {
        let y = labels[i];
        if y >= z.cols() {
            return Err(SdssError::InvalidParameter(format!(
                "label {y} out of range for {} logits",
                z.cols()
            )));
        }
        loss -= log_softmax(z.row(i), 1.0)[y];
        let g = grad.row_mut(i);
        g.copy_from_slice(z.row(i));
        softmax_in_place(g, 1.0);
        g[y] -= 1.0;
        g.iter_mut().for_each(|v| *v *= scale);
    }
    Ok((loss * scale, grad))
}

/// Element-wise smooth L1 (Huber with threshold 1), summed over columns,
/// reduced over the rows in `idx`.
pub fn smooth_l1(
    pred: &Matrix,
    target: &Matrix,
    idx: &[usize],
    reduction: Reduction,
) -> Result<(f64, Matrix)> {
    require_nonempty(idx, "smooth L1")?;
    require_same_shape(pred, target, "smooth_l1")?;
    let scale = reduction.scale(idx.len());
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    let mut loss = 0.0;
    for &i in idx {
        let g = grad.row_mut(i);
        for ((gv, &p), &t) in g.iter_mut().zip(pred.row(i)).zip(target.row(i)) {
            let r = p - t;
            if r.abs() < 1.0 {
                loss += 0.5 * r * r;
                *gv = r * scale;
            } else {
                loss += r.abs() - 0.5;
                *gv = r.signum() * scale;
            }
        }
    }
    Ok((loss * scale, grad))
}

/// Scalar smooth L1 value.
pub fn smooth_l1_value(residual: f64) -> f64 {
    if residual.abs() < 1.0 {
        0.5 * residual * residual
    } else {
        residual.abs() - 0.5
    }
}

/// `KL(softmax(z_t/τ) ‖ softmax(z_s/τ))` over `idx`, with gradient w.r.t. `z_s`.
pub fn kl_divergence(
    z_s: &Matrix,
    z_t: &Matrix,
    idx: &[usize],
    tau: f64,
    reduction: Reduction,
) -> Result<(f64, Matrix)> {
    require_nonempty(idx, "KL divergence")?;
    require_same_shape(z_s, z_t, "kl_divergence")?;
    let scale = reduction.scale(idx.len());
    let mut grad = Matrix::zeros(z_s.rows(), z_s.cols());
    let mut loss = 0.0;
    for &i in idx {
        let log_ps = log_softmax(z_s.row(i), tau);
        let log_pt = log_softmax(z_t.row(i), tau);
        let g = grad.row_mut(i);
        for j in 0..log_ps.len() {
            let pt = log_pt[j].exp();
            if pt > 0.0 {
                loss += pt * (log_pt[j] - log_ps[j]);
            }
            g[j] = (log_ps[j].exp() - pt) / tau * scale;
        }
    }
    Ok((loss * scale, grad))
}

/// Node-classification loss on the labeled set.
pub fn loss_nc(
    z: &Matrix,
    labels: &[usize],
    idx: &[usize],
    cfg: &LossConfig,
) -> Result<(f64, Matrix)> {
    cross_entropy(z, labels, idx, cfg.reduction)
}

/// Pretext loss: cross-entropy for classification tasks, smooth L1 for
/// regression tasks. Completion restricts `idx` to its masked nodes.
pub fn loss_ss(
    z_hat: &Matrix,
    task: &PretextTask,
    idx: &[usize],
    cfg: &LossConfig,
) -> Result<(f64, Matrix)> {
    let idx = task.loss_index(idx);
    require_nonempty(&idx, "pretext loss")?;
    match &task.targets {
        PretextTargets::Classification { labels, .. } => {
            cross_entropy(z_hat, labels, &idx, cfg.reduction)
        }
        PretextTargets::Regression(targets) => smooth_l1(z_hat, targets, &idx, cfg.reduction),
    }
}

/// Classification distillation:
/// `β₁ KL(p_t ‖ p_s) + (1 − β₁) CE(y, softmax(z_s))` with `p = softmax(z / τ)`.
pub fn loss_sd_nc(
    z_s: &Matrix,
    z_t: &Matrix,
    labels: &[usize],
    idx: &[usize],
    cfg: &LossConfig,
) -> Result<(f64, Matrix)> {
    soft_hard_mix(z_s, z_t, idx, cfg.beta1, cfg, |z| {
        cross_entropy(z, labels, idx, cfg.reduction)
    })
}

/// Pretext distillation. Classification tasks mirror [`loss_sd_nc`] with β₂;
/// regression tasks use `β₂ smoothL1(ẑ_s, ẑ_t) + (1 − β₂) smoothL1(ẑ_s, ŷ)`.
pub fn loss_sd_ss(
    zh_s: &Matrix,
    zh_t: &Matrix,
    task: &PretextTask,
    idx: &[usize],
    cfg: &LossConfig,
) -> Result<(f64, Matrix)> {
    let idx = task.loss_index(idx);
    require_nonempty(&idx, "pretext distillation")?;
    match &task.targets {
        PretextTargets::Classification { labels, .. } => {
            soft_hard_mix(zh_s, zh_t, &idx, cfg.beta2, cfg, |z| {
                cross_entropy(z, labels, &idx, cfg.reduction)
            })
        }
        PretextTargets::Regression(targets) => {
            let b = cfg.beta2;
            let mut loss = 0.0;
            let mut grad = Matrix::zeros(zh_s.rows(), zh_s.cols());
            if b > 0.0 {
                let (l, g) = smooth_l1(zh_s, zh_t, &idx, cfg.reduction)?;
                loss += b * l;
                grad.add_scaled(&g, b)?;
            }
            if b < 1.0 {
                let (l, g) = smooth_l1(zh_s, targets, &idx, cfg.reduction)?;
                loss += (1.0 - b) * l;
                grad.add_scaled(&g, 1.0 - b)?;
            }
            Ok((loss, grad))
        }
    }
}

/// Middle-layer distillation: smooth L1 between student and teacher hidden
/// rows of the labeled set.
pub fn loss_sd_m(
    h_s: &Matrix,
    h_t: &Matrix,
    idx: &[usize],
    cfg: &LossConfig,
) -> Result<(f64, Matrix)> {
    smooth_l1(h_s, h_t, idx, cfg.reduction)
}

fn soft_hard_mix(
    z_s: &Matrix,
    z_t: &Matrix,
    idx: &[usize],
    beta: f64,
    cfg: &LossConfig,
    hard: impl FnOnce(&Matrix) -> Result<(f64, Matrix)>,
) -> Result<(f64, Matrix)> {
    require_nonempty(idx, "distillation")?;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(z_s.rows(), z_s.cols());
    if beta > 0.0 {
        let (l, g) = kl_divergence(z_s, z_t, idx, cfg.tau, cfg.reduction)?;
        let w = beta * cfg.kl_factor();
        loss += w * l;
        grad.add_scaled(&g, w)?;
    }
    if beta < 1.0 {
        let (l, g) = hard(z_s)?;
        loss += (1.0 - beta) * l;
        grad.add_scaled(&g, 1.0 - beta)?;
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::standard_normal;

    fn cfg() -> LossConfig {
        LossConfig::default()
    }

    #[test]
    fn peaked_logits_have_near_zero_loss() {
        let z = Matrix::from_rows(&[[50.0, 0.0, 0.0]]).unwrap();
        let (l, _) = loss_nc(&z, &[0], &[0], &cfg()).unwrap();
        assert!(l < 1e-20);
    }

    #[test]
    fn uniform_logits_cost_log_m() {
        for m in [2usize, 3, 7] {
            let z = Matrix::filled(4, m, 0.3);
            let (l, _) = loss_nc(&z, &[0, 1, 1, 0], &[0, 1, 2, 3], &cfg()).unwrap();
            assert!((l - (m as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_vanishes_outside_index() {
        let z = standard_normal(5, 3, 1);
        let (_, g) = loss_nc(&z, &[0, 1, 2, 0, 1], &[1, 3], &cfg()).unwrap();
        for i in [0, 2, 4] {
            assert!(g.row(i).iter().all(|&v| v == 0.0));
        }
        assert!(g.row(1).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn empty_index_is_an_error() {
        let z = standard_normal(2, 2, 1);
        assert!(matches!(
            loss_nc(&z, &[0, 1], &[], &cfg()),
            Err(SdssError::EmptyIndexSet(_))
        ));
    }

    #[test]
    fn smooth_l1_branches() {
        assert_eq!(smooth_l1_value(0.0), 0.0);
        assert_eq!(smooth_l1_value(0.5), 0.125);
        assert_eq!(smooth_l1_value(2.0), 1.5);
        assert_eq!(smooth_l1_value(-2.0), 1.5);
        // both branches meet at |r| = 1
        assert_eq!(0.5 * 1.0f64 * 1.0, 0.5);
        assert_eq!(1.0f64 - 0.5, 0.5);
        assert_eq!(smooth_l1_value(1.0), 0.5);
        assert_eq!(smooth_l1_value(-1.0), 0.5);
    }

    #[test]
    fn distillation_from_identical_teacher_vanishes() {
        let z = standard_normal(6, 4, 3).scale(3.0);
        let c = LossConfig {
            beta1: 1.0,
            ..cfg()
        };
        let (l, _) = loss_sd_nc(&z, &z, &[0, 0, 1, 2, 3, 3], &[0, 2, 5], &c).unwrap();
        assert!(l.abs() < 1e-9);
    }

    #[test]
    fn beta_zero_is_plain_cross_entropy() {
        let zs = standard_normal(6, 4, 3);
        let zt = standard_normal(6, 4, 4);
        let labels = [0, 1, 2, 3, 0, 1];
        let idx = [1, 2, 4];
        let c = LossConfig {
            beta1: 0.0,
            ..cfg()
        };
        let (a, ga) = loss_sd_nc(&zs, &zt, &labels, &idx, &c).unwrap();
        let (b, gb) = loss_nc(&zs, &labels, &idx, &c).unwrap();
        assert_eq!(a, b);
        assert_eq!(ga, gb);
    }

    #[test]
    fn distillation_weights_are_linear() {
        let zs = standard_normal(6, 4, 3);
        let zt = standard_normal(6, 4, 4);
        let labels = [0, 1, 2, 3, 0, 1];
        let idx = [0, 1, 2, 3, 4, 5];
        let c = cfg();
        let (mixed, _) = loss_sd_nc(&zs, &zt, &labels, &idx, &c).unwrap();
        let (kl, _) = kl_divergence(&zs, &zt, &idx, c.tau, c.reduction).unwrap();
        let (ce, _) = cross_entropy(&zs, &labels, &idx, c.reduction).unwrap();
        assert!((mixed - (0.6 * kl + 0.4 * ce)).abs() < 1e-12);
    }

    #[test]
    fn kl_is_nonnegative() {
        for seed in 0..50 {
            let zs = standard_normal(5, 6, seed).scale(4.0);
            let zt = standard_normal(5, 6, seed + 100).scale(4.0);
            let (l, _) = kl_divergence(&zs, &zt, &[0, 1, 2, 3, 4], 2.0, Reduction::Mean).unwrap();
            assert!(l >= -1e-12);
        }
    }

    #[test]
    fn middle_layer_single_entry() {
        let hs = Matrix::zeros(4, 3);
        let mut ht = Matrix::zeros(4, 3);
        ht.set(2, 1, 2.0);
        let idx = [0, 2, 3];
        let (l, g) = loss_sd_m(&hs, &ht, &idx, &cfg()).unwrap();
        assert!((l - 1.5 / 3.0).abs() < 1e-15);
        assert!(g.row(1).iter().all(|&v| v == 0.0));
        let (l0, _) = loss_sd_m(&hs, &hs, &idx, &cfg()).unwrap();
        assert_eq!(l0, 0.0);
    }

    #[test]
    fn regression_distillation_vanishes_at_agreement() {
        let g = crate::graph::Graph::new(3, &[(0, 1), (1, 2)]).unwrap();
        let task = crate::pretext::make_degree_task(&g);
        let PretextTargets::Regression(y) = &task.targets else {
            panic!()
        };
        let (l, _) = loss_sd_ss(y, y, &task, &[0, 1, 2], &cfg()).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn sum_reduction_scales_by_count() {
        let z = standard_normal(4, 3, 8);
        let labels = [0, 1, 2, 0];
        let idx = [0, 1, 3];
        let (mean, _) = cross_entropy(&z, &labels, &idx, Reduction::Mean).unwrap();
        let (sum, _) = cross_entropy(&z, &labels, &idx, Reduction::Sum).unwrap();
        assert!((sum - 3.0 * mean).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validate().is_ok());
        assert!(LossConfig {
            alpha: -0.1,
            ..cfg()
        }
        .validate()
        .is_err());
        assert!(LossConfig {
            beta1: 1.5,
            ..cfg()
        }
        .validate()
        .is_err());
        assert!(LossConfig { tau: 0.0, ..cfg() }.validate().is_err());
    }
}
