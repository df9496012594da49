mod common;

use proptest::prelude::*;

use sdss::dense::standard_normal;
use sdss::graph::normalize;
use sdss::model::{forward, ModelInputs, ModelParams};
use sdss::pretext::{make_task, PretextKind, PretextParams};
use sdss::training::{LossConfig, Reduction, TeacherOutputs};

use common::gradcheck::{relative_error, Which};

fn kind() -> impl Strategy<Value = PretextKind> {
    prop::sample::select(PretextKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn student_gradients_under_loss_variants(
        seed in 0u64..1000,
        n in 6usize..12,
        kind in kind(),
        beta1 in 0.0f64..=1.0,
        beta2 in 0.0f64..=1.0,
        tau in 0.5f64..4.0,
        sum in any::<bool>(),
        tau_squared in any::<bool>(),
    ) {
        let ds = common::random_dataset(n, 3, 3, seed);
        let params = PretextParams {
            clusters: 2,
            kmeans_restarts: 2,
            parts: 2,
            epsilon: 0.5,
            mask_ratio: 0.9,
            pca_dim: 2,
        };
        let task = make_task(kind, &ds.graph, &ds.features, &params, seed).unwrap();
        prop_assume!(!task.loss_index(&ds.split.train).is_empty());
        let inputs = ModelInputs::new(&ds.graph, &ds.features, task.input_override.as_ref()).unwrap();
        let student = ModelParams::init(3, 4, 3, task.output_dim(), 0.0, seed + 1).unwrap();
        let teacher = ModelParams::init(3, 4, 3, task.output_dim(), 0.0, seed + 2).unwrap();
        let t_out = TeacherOutputs::from_trace(forward(&teacher, &inputs, false, 0).unwrap());
        let cfg = LossConfig {
            beta1,
            beta2,
            tau,
            tau_squared,
            sd_ss_weight: 0.7,
            sd_m_weight: 0.4,
            reduction: if sum { Reduction::Sum } else { Reduction::Mean },
            ..Default::default()
        };
        let e = relative_error(&student, &inputs, &ds, Some(&task), &cfg, &Which::Student(&t_out), 1e-6);
        prop_assert!(e < 1e-5, "relative error {e}");
        let e = relative_error(&student, &inputs, &ds, Some(&task), &LossConfig { alpha: 0.8, ..cfg }, &Which::Teacher, 1e-6);
        prop_assert!(e < 1e-5, "teacher relative error {e}");
    }

    #[test]
    fn normalized_adjacency_is_symmetric(seed in 0u64..1000, n in 1usize..30, p in 0.0f64..1.0) {
        let g = common::random_graph(n, p, seed);
        let l = normalize(&g).to_dense();
        let oracle = common::dense_normalized_adjacency(&g);
        prop_assert!(common::max_abs_diff(&l, &oracle) <= 1e-12);
        prop_assert!(common::max_abs_diff(&l, &l.transpose()) == 0.0);
    }

    #[test]
    fn spmm_is_linear(seed in 0u64..1000, n in 1usize..30) {
        let g = common::random_graph(n, 0.2, seed);
        let l = normalize(&g);
        let a = standard_normal(n, 3, seed + 1);
        let b = standard_normal(n, 3, seed + 2);
        let lhs = l.spmm(&a.add(&b).unwrap()).unwrap();
        let rhs = l.spmm(&a).unwrap().add(&l.spmm(&b).unwrap()).unwrap();
        prop_assert!(common::max_abs_diff(&lhs, &rhs) <= 1e-12);
    }
}
