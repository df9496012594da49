//! Two-layer GCN backbone with a classification head and a pretext head.
//!
//! ```text
//! pre    = L X W0
//! H      = L · dropout(ReLU(pre))        (extractor output, distilled by the middle-layer loss)
//! Z      = H W1                          (classification logits)
//! Ẑ      = H' Ŵ                          (pretext logits)
//! ```
//!
//! `H'` is `H` unless the pretext task replaces the inputs, in which case it
//! is recomputed from `X̂` with the same `W0`.

use rand::Rng as _;

use crate::dense::{glorot_init, Matrix};
use crate::error::{Result, SdssError};
use crate::graph::{normalize, Graph, NormalizedAdjacency};
use crate::rng::{derive_seed, rng_from_seed};

/// Graph operator and pre-propagated inputs `L X` (and `L X̂`), which are
/// constant throughout training.
#[derive(Debug, Clone)]
pub struct ModelInputs {
    pub adj: NormalizedAdjacency,
    pub propagated: Matrix,
    pub propagated_pretext: Option<Matrix>,
}

impl ModelInputs {
    pub fn new(g: &Graph, x: &Matrix, pretext_input: Option<&Matrix>) -> Result<Self> {
        let adj = normalize(g);
        let propagated = adj.spmm(x)?;
        let propagated_pretext = pretext_input
            .map(|xh| {
                if xh.shape() != x.shape() {
                    return Err(SdssError::ShapeMismatch {
                        op: "pretext input",
                        left: x.shape(),
                        right: xh.shape(),
                    });
                }
                adj.spmm(xh)
            })
            .transpose()?;
        Ok(ModelInputs {
            adj,
            propagated,
            propagated_pretext,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.adj.num_nodes()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// `f x h` feature extractor weights.
    pub w0: Matrix,
    /// `h x m` classification head.
    pub w1: Matrix,
    /// `h x p` pretext head.
    pub w_hat: Matrix,
    /// Dropout rate on the post-ReLU hidden layer.
    pub dropout: f64,
}

impl ModelParams {
    pub fn init(
        features: usize,
        hidden: usize,
        classes: usize,
        pretext_dim: usize,
        dropout: f64,
        seed: u64,
    ) -> Result<Self> {
        if features == 0 || hidden == 0 || classes == 0 || pretext_dim == 0 {
            return Err(SdssError::InvalidParameter(format!(
                "model dimensions must be positive (f={features}, h={hidden}, m={classes}, p={pretext_dim})"
            )));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(SdssError::InvalidParameter(format!(
                "dropout must be in [0, 1), got {dropout}"
            )));
        }
        Ok(ModelParams {
            w0: glorot_init(features, hidden, derive_seed(seed, 0)),
            w1: glorot_init(hidden, classes, derive_seed(seed, 1)),
            w_hat: glorot_init(hidden, pretext_dim, derive_seed(seed, 2)),
            dropout,
        })
    }

    pub fn hidden(&self) -> usize {
        self.w0.cols()
    }

    pub fn matrices(&self) -> [&Matrix; 3] {
        [&self.w0, &self.w1, &self.w_hat]
    }

    pub fn matrices_mut(&mut self) -> [&mut Matrix; 3] {
        [&mut self.w0, &mut self.w1, &mut self.w_hat]
    }
}

/// Cached activations of one pipeline (classification or pretext).
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// `L X W0`.
    pub pre: Matrix,
    /// Inverted-dropout multipliers (`0` or `1 / (1 - p)`), train mode only.
    pub dropout_mask: Option<Matrix>,
    /// `L · dropout(ReLU(pre))`.
    pub hidden: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub main: Branch,
    /// Separate pretext pipeline when the task overrides the inputs.
    pub pretext: Option<Branch>,
    pub logits: Matrix,
    pub pretext_logits: Matrix,
}

impl ForwardTrace {
    /// Middle-layer output `H` of the classification pipeline.
    pub fn hidden(&self) -> &Matrix {
        &self.main.hidden
    }

    fn pretext_branch(&self) -> &Branch {
        self.pretext.as_ref().unwrap_or(&self.main)
    }
}

fn dropout_mask(rows: usize, cols: usize, rate: f64, seed: u64) -> Matrix {
    let mut rng = rng_from_seed(seed);
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    let data = (0..rows * cols)
        .map(|_| {
            if rng.random::<f64>() < keep {
                scale
            } else {
                0.0
            }
        })
        .collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

fn branch(
    params: &ModelParams,
    adj: &NormalizedAdjacency,
    propagated: &Matrix,
    train: bool,
    seed: u64,
) -> Result<Branch> {
    let pre = propagated.matmul(&params.w0)?;
    let mut act = pre.relu();
    let mask = (train && params.dropout > 0.0)
        .then(|| dropout_mask(pre.rows(), pre.cols(), params.dropout, seed));
    if let Some(mask) = &mask {
        act = act.hadamard(mask)?;
    }
    let hidden = adj.spmm(&act)?;
    Ok(Branch {
        pre,
        dropout_mask: mask,
        hidden,
    })
}

/// Runs both pipelines. Dropout is active only when `train` is set; `seed`
/// selects the dropout masks and is ignored otherwise.
pub fn forward(
    params: &ModelParams,
    inputs: &ModelInputs,
    train: bool,
    seed: u64,
) -> Result<ForwardTrace> {
    let main = branch(
        params,
        &inputs.adj,
        &inputs.propagated,
        train,
        derive_seed(seed, 0),
    )?;
    let pretext = inputs
        .propagated_pretext
        .as_ref()
        .map(|p| branch(params, &inputs.adj, p, train, derive_seed(seed, 1)))
        .transpose()?;
    let logits = main.hidden.matmul(&params.w1)?;
    let pretext_logits = pretext
        .as_ref()
        .unwrap_or(&main)
        .hidden
        .matmul(&params.w_hat)?;
    Ok(ForwardTrace {
        main,
        pretext,
        logits,
        pretext_logits,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w0: Matrix,
    pub w1: Matrix,
    pub w_hat: Matrix,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        let z = |m: &Matrix| Matrix::zeros(m.rows(), m.cols());
        Gradients {
            w0: z(&params.w0),
            w1: z(&params.w1),
            w_hat: z(&params.w_hat),
        }
    }

    pub fn matrices(&self) -> [&Matrix; 3] {
        [&self.w0, &self.w1, &self.w_hat]
    }

    pub fn is_finite(&self) -> bool {
        self.matrices().iter().all(|m| m.is_finite())
    }
}

/// Upstream gradients of the loss with respect to the model outputs. Absent
/// terms are treated as zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct OutputGrads<'a> {
    pub logits: Option<&'a Matrix>,
    pub pretext_logits: Option<&'a Matrix>,
    pub hidden: Option<&'a Matrix>,
}

/// `dW0 += (L P)ᵀ · (ReLU'(pre) ⊙ mask ⊙ L · dH)`; `L` is symmetric.
fn backprop_branch(
    adj: &NormalizedAdjacency,
    propagated: &Matrix,
    b: &Branch,
    d_hidden: &Matrix,
    dw0: &mut Matrix,
) -> Result<()> {
    let mut d_act = adj.spmm(d_hidden)?;
    if let Some(mask) = &b.dropout_mask {
        d_act = d_act.hadamard(mask)?;
    }
    let d_pre = Matrix::relu_backward(&d_act, &b.pre)?;
    dw0.add_scaled(&propagated.t_matmul(&d_pre)?, 1.0)
}

/// Exact gradients of the composed forward map. The shared `W0` collects the
/// classification, pretext and middle-layer contributions.
pub fn backward(
    params: &ModelParams,
    inputs: &ModelInputs,
    trace: &ForwardTrace,
    grads: OutputGrads<'_>,
) -> Result<Gradients> {
    let mut out = Gradients::zeros_like(params);
    let n = inputs.num_nodes();
    let h = params.hidden();
    let check = |op: &'static str, m: &Matrix, cols: usize| -> Result<()> {
        if m.shape() != (n, cols) {
            return Err(SdssError::ShapeMismatch {
                op,
                left: (n, cols),
                right: m.shape(),
            });
        }
        Ok(())
    };

    let mut d_hidden = Matrix::zeros(n, h);
    if let Some(dz) = grads.logits {
        check("backward logits", dz, params.w1.cols())?;
        out.w1 = trace.main.hidden.t_matmul(dz)?;
        d_hidden.add_scaled(&dz.matmul_t(&params.w1)?, 1.0)?;
    }
    if let Some(dh) = grads.hidden {
        check("backward hidden", dh, h)?;
        d_hidden.add_scaled(dh, 1.0)?;
    }
    let mut d_pretext_hidden = None;
    if let Some(dzh) = grads.pretext_logits {
        check("backward pretext logits", dzh, params.w_hat.cols())?;
        out.w_hat = trace.pretext_branch().hidden.t_matmul(dzh)?;
        let d = dzh.matmul_t(&params.w_hat)?;
        if trace.pretext.is_some() {
            d_pretext_hidden = Some(d);
        } else {
            d_hidden.add_scaled(&d, 1.0)?;
        }
    }

    backprop_branch(
        &inputs.adj,
        &inputs.propagated,
        &trace.main,
        &d_hidden,
        &mut out.w0,
    )?;
    if let (Some(d), Some(b), Some(p)) =
        (d_pretext_hidden, &trace.pretext, &inputs.propagated_pretext)
    {
        backprop_branch(&inputs.adj, p, b, &d, &mut out.w0)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::standard_normal;

    #[test]
    fn zero_extractor_gives_zero_outputs() {
        let g = Graph::new(4, &[(0, 1), (2, 3)]).unwrap();
        let x = standard_normal(4, 3, 1);
        let inputs = ModelInputs::new(&g, &x, None).unwrap();
        let mut params = ModelParams::init(3, 5, 2, 1, 0.0, 0).unwrap();
        params.w0 = Matrix::zeros(3, 5);
        let t = forward(&params, &inputs, false, 0).unwrap();
        assert_eq!(t.hidden(), &Matrix::zeros(4, 5));
        assert_eq!(t.logits, Matrix::zeros(4, 2));
        assert_eq!(t.pretext_logits, Matrix::zeros(4, 1));
    }

    #[test]
    fn identity_composition_is_relu() {
        let g = Graph::new(3, &[]).unwrap();
        let x = Matrix::from_rows(&[[1.0, -2.0], [-0.5, 4.0], [0.0, 3.0]]).unwrap();
        let inputs = ModelInputs::new(&g, &x, None).unwrap();
        let params = ModelParams {
            w0: Matrix::identity(2),
            w1: Matrix::identity(2),
            w_hat: Matrix::identity(2),
            dropout: 0.0,
        };
        let t = forward(&params, &inputs, false, 0).unwrap();
        assert_eq!(t.logits, x.relu());
    }

    #[test]
    fn eval_mode_is_pure() {
        let ds = crate::dataset::generate_planted_partition(&crate::dataset::PlantedPartition {
            blocks: 2,
            per_block: 10,
            ..Default::default()
        })
        .unwrap();
        let inputs = ModelInputs::new(&ds.graph, &ds.features, None).unwrap();
        let params = ModelParams::init(ds.num_features(), 8, 2, 1, 0.5, 3).unwrap();
        let a = forward(&params, &inputs, false, 1).unwrap();
        let b = forward(&params, &inputs, false, 2).unwrap();
        assert_eq!(a, b);
        assert!(a.main.dropout_mask.is_none());
        let c = forward(&params, &inputs, true, 1).unwrap();
        assert!(c.main.dropout_mask.is_some());
        assert_ne!(a.logits, c.logits);
    }

    #[test]
    fn zero_upstream_gradients_give_zero_gradients() {
        let g = Graph::new(3, &[(0, 1), (1, 2)]).unwrap();
        let x = standard_normal(3, 2, 4);
        let inputs = ModelInputs::new(&g, &x, Some(&x.scale(0.5))).unwrap();
        let params = ModelParams::init(2, 4, 3, 2, 0.0, 5).unwrap();
        let t = forward(&params, &inputs, false, 0).unwrap();
        let zh = Matrix::zeros(3, 4);
        let zz = Matrix::zeros(3, 3);
        let zp = Matrix::zeros(3, 2);
        let grads = backward(
            &params,
            &inputs,
            &t,
            OutputGrads {
                logits: Some(&zz),
                pretext_logits: Some(&zp),
                hidden: Some(&zh),
            },
        )
        .unwrap();
        assert_eq!(grads, Gradients::zeros_like(&params));
    }

    #[test]
    fn scalar_chain_rule_by_hand() {
        // one node, f = h = m = p = 1, so L = [1] and every quantity is a scalar:
        // z = relu(x w0) w1, dz/dw0 = x w1 when x w0 > 0, dz/dw1 = relu(x w0)
        let g = Graph::new(1, &[]).unwrap();
        let x = Matrix::from_rows(&[[2.0]]).unwrap();
        let inputs = ModelInputs::new(&g, &x, None).unwrap();
        let params = ModelParams {
            w0: Matrix::from_rows(&[[0.75]]).unwrap(),
            w1: Matrix::from_rows(&[[-3.0]]).unwrap(),
            w_hat: Matrix::from_rows(&[[0.5]]).unwrap(),
            dropout: 0.0,
        };
        let t = forward(&params, &inputs, false, 0).unwrap();
        assert_eq!(t.logits.get(0, 0), 1.5 * -3.0);
        let up = Matrix::from_rows(&[[1.0]]).unwrap();
        let up_p = Matrix::from_rows(&[[2.0]]).unwrap();
        let up_h = Matrix::from_rows(&[[-1.0]]).unwrap();
        let grads = backward(
            &params,
            &inputs,
            &t,
            OutputGrads {
                logits: Some(&up),
                pretext_logits: Some(&up_p),
                hidden: Some(&up_h),
            },
        )
        .unwrap();
        // dW1 = h = 1.5; dŴ = h * 2 = 3; dW0 = x * (w1 * 1 + ŵ * 2 + (-1)) = 2 * (-3 + 1 - 1) = -6
        assert_eq!(grads.w1.get(0, 0), 1.5);
        assert_eq!(grads.w_hat.get(0, 0), 3.0);
        assert_eq!(grads.w0.get(0, 0), -6.0);
    }

    #[test]
    fn init_validates() {
        assert!(ModelParams::init(0, 4, 2, 1, 0.5, 0).is_err());
        assert!(ModelParams::init(3, 4, 2, 1, 1.0, 0).is_err());
    }
}
