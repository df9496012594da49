use crate::dense::Matrix;
use crate::error::{Result, SdssError};
use crate::model::{Gradients, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightDecayMode {
    /// AdamW: `p -= lr * wd * p`, outside the adaptive update.
    Decoupled,
    /// Classic L2: `wd * p` is added to the gradient before the moments.
    Coupled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub decay_mode: WeightDecayMode,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.001,
            decay_mode: WeightDecayMode::Decoupled,
        }
    }
}

/// First and second moment estimates for the three parameter matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first: Vec<Matrix>,
    second: Vec<Matrix>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros = || {
            params
                .matrices()
                .iter()
                .map(|m| Matrix::zeros(m.rows(), m.cols()))
                .collect::<Vec<_>>()
        };
        AdamState {
            first: zeros(),
            second: zeros(),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update of all parameter matrices.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &Gradients,
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let grads = grads.matrices();
    for (k, p) in params.matrices_mut().into_iter().enumerate() {
        let g = grads[k];
        if g.shape() != p.shape() {
            return Err(SdssError::ShapeMismatch {
                op: "adam_step",
                left: p.shape(),
                right: g.shape(),
            });
        }
        let m = state.first[k].as_mut_slice();
        let v = state.second[k].as_mut_slice();
        for (i, (w, &gi)) in p.as_mut_slice().iter_mut().zip(g.as_slice()).enumerate() {
            let gi = match cfg.decay_mode {
                WeightDecayMode::Coupled => gi + cfg.weight_decay * *w,
                WeightDecayMode::Decoupled => gi,
            };
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            let mut update = m_hat / (v_hat.sqrt() + cfg.eps);
            if cfg.decay_mode == WeightDecayMode::Decoupled {
                update += cfg.weight_decay * *w;
            }
            *w -= cfg.lr * update;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_params(w: f64) -> ModelParams {
        let one = |v| Matrix::from_rows(&[[v]]).unwrap();
        ModelParams {
            w0: one(w),
            w1: one(w),
            w_hat: one(w),
            dropout: 0.0,
        }
    }

    fn scalar_grads(g: f64) -> Gradients {
        let one = |v| Matrix::from_rows(&[[v]]).unwrap();
        Gradients {
            w0: one(g),
            w1: one(-g),
            w_hat: one(0.0),
        }
    }

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut p = scalar_params(0.7);
        let mut s = AdamState::new(&p);
        let cfg = AdamConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        for _ in 0..5 {
            adam_step(&mut p, &scalar_grads(0.0), &mut s, &cfg).unwrap();
        }
        assert_eq!(p, scalar_params(0.7));
        assert_eq!(s.step(), 5);
    }

    #[test]
    fn first_step_moves_by_learning_rate_against_the_sign() {
        let mut p = scalar_params(0.0);
        let mut s = AdamState::new(&p);
        let cfg = AdamConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        adam_step(&mut p, &scalar_grads(0.3), &mut s, &cfg).unwrap();
        // m̂ = g, v̂ = g², so the step is lr * g / (|g| + eps)
        let expect = 0.01 * 0.3 / (0.3 + 1e-8);
        assert!((p.w0.get(0, 0) + expect).abs() < 1e-15);
        assert!((p.w1.get(0, 0) - expect).abs() < 1e-15);
        assert_eq!(p.w_hat.get(0, 0), 0.0);
    }

    #[test]
    fn quadratic_bowl_converges() {
        // minimize (w - 3)^2 from 0: gradient 2 (w - 3)
        let mut p = scalar_params(0.0);
        let mut s = AdamState::new(&p);
        let cfg = AdamConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        for _ in 0..2000 {
            let g = 2.0 * (p.w0.get(0, 0) - 3.0);
            let grads = Gradients {
                w0: Matrix::from_rows(&[[g]]).unwrap(),
                w1: Matrix::zeros(1, 1),
                w_hat: Matrix::zeros(1, 1),
            };
            adam_step(&mut p, &grads, &mut s, &cfg).unwrap();
        }
        assert!((p.w0.get(0, 0) - 3.0).abs() < 1e-4, "{}", p.w0.get(0, 0));
    }

    #[test]
    fn decoupled_decay_shrinks_weights() {
        let mut p = scalar_params(1.0);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &scalar_grads(0.0), &mut s, &AdamConfig::default()).unwrap();
        assert!((p.w_hat.get(0, 0) - (1.0 - 0.01 * 0.001)).abs() < 1e-15);
    }
}
