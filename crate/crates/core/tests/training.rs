mod common;

use sdss::dataset::{generate_planted_partition, PlantedPartition};
use sdss::dense::{standard_normal, Matrix};
use sdss::model::{forward, ModelInputs, ModelParams};
use sdss::pretext::{make_clustering_task, make_task, PretextKind, PretextParams};
use sdss::training::losses::{cross_entropy, kl_divergence};
use sdss::training::{
    accuracy, student_objective, teacher_objective, train_student, train_teacher, LossConfig,
    Reduction, TeacherOutputs, TrainConfig,
};

fn strong_signal() -> sdss::dataset::Dataset {
    generate_planted_partition(&PlantedPartition {
        blocks: 3,
        per_block: 60,
        p_in: 0.5,
        p_out: 0.02,
        num_features: 8,
        shift: 3.0,
        seed: 11,
    })
    .unwrap()
}

fn quick() -> TrainConfig {
    TrainConfig {
        hidden: 16,
        max_epochs: 80,
        patience: 30,
        ..Default::default()
    }
}

#[test]
fn teacher_learns_an_easy_graph() {
    let ds = strong_signal();
    let (_, rep) = train_teacher(&ds, None, &quick(), 0).unwrap();
    assert!(
        rep.test_acc.unwrap() > 0.95,
        "test accuracy {:?}",
        rep.test_acc
    );
}

#[test]
fn training_is_deterministic() {
    let ds = strong_signal();
    let task = make_clustering_task(&ds.features, 3, 3, 5).unwrap();
    let a = train_teacher(&ds, Some(&task), &quick(), 7).unwrap();
    let b = train_teacher(&ds, Some(&task), &quick(), 7).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1.epochs, b.1.epochs);
    let sa = train_student(&ds, Some(&task), &a.0, &quick(), 7).unwrap();
    let sb = train_student(&ds, Some(&task), &b.0, &quick(), 7).unwrap();
    assert_eq!(sa.0, sb.0);
    assert_eq!(sa.1.epochs, sb.1.epochs);
}

#[test]
fn student_leaves_teacher_untouched() {
    let ds = strong_signal();
    let (teacher, _) = train_teacher(&ds, None, &quick(), 1).unwrap();
    let before = teacher.clone();
    train_student(&ds, None, &teacher, &quick(), 1).unwrap();
    assert_eq!(teacher, before);
}

#[test]
fn best_epoch_has_the_best_validation_accuracy() {
    let ds = strong_signal();
    let (_, rep) = train_teacher(&ds, None, &quick(), 2).unwrap();
    let max = rep
        .epochs
        .iter()
        .map(|e| e.val_acc)
        .fold(f64::MIN, f64::max);
    assert_eq!(rep.best_val_acc, max);
    let first = rep.epochs.iter().find(|e| e.val_acc == max).unwrap();
    assert_eq!(rep.best_epoch, first.epoch);
    assert!(rep.epochs.len() <= quick().max_epochs);
}

#[test]
fn training_loss_goes_down() {
    let ds = strong_signal();
    let cfg = TrainConfig {
        dropout: 0.0,
        ..quick()
    };
    let (_, rep) = train_teacher(&ds, None, &cfg, 3).unwrap();
    let first = rep.epochs[0].loss;
    let last = rep.epochs.last().unwrap().loss;
    assert!(last < 0.5 * first, "{first} -> {last}");
}

#[test]
fn student_keeps_up_with_teacher() {
    let ds = strong_signal();
    let (teacher, t) = train_teacher(&ds, None, &quick(), 4).unwrap();
    let (_, s) = train_student(&ds, None, &teacher, &quick(), 4).unwrap();
    assert!(
        s.best_val_acc >= t.best_val_acc - 0.02,
        "{} vs {}",
        s.best_val_acc,
        t.best_val_acc
    );
}

#[test]
fn hard_label_only_student_matches_teacher_objective() {
    let ds = common::random_dataset(12, 4, 3, 9);
    let task = make_task(
        PretextKind::Clustering,
        &ds.graph,
        &ds.features,
        &PretextParams::defaults_for(3, 4),
        1,
    )
    .unwrap();
    let inputs = ModelInputs::new(&ds.graph, &ds.features, None).unwrap();
    let params = ModelParams::init(4, 6, 3, task.output_dim(), 0.0, 2).unwrap();
    let other = ModelParams::init(4, 6, 3, task.output_dim(), 0.0, 3).unwrap();
    let trace = forward(&params, &inputs, false, 0).unwrap();
    let t_out = TeacherOutputs::from_trace(forward(&other, &inputs, false, 0).unwrap());
    let idx = &ds.split.train;

    // NC only
    let s_cfg = LossConfig {
        beta1: 0.0,
        beta2: 0.0,
        sd_ss_weight: 0.0,
        sd_m_weight: 0.0,
        ..Default::default()
    };
    let t_cfg = LossConfig {
        alpha: 0.0,
        ..Default::default()
    };
    let s = student_objective(&trace, &t_out, &ds.labels, Some(&task), idx, &s_cfg).unwrap();
    let t = teacher_objective(&trace, &ds.labels, Some(&task), idx, &t_cfg).unwrap();
    assert_eq!(s.total, t.total);
    assert_eq!(s.d_logits, t.d_logits);

    // NC + SS with hard labels equals the teacher objective at alpha = 1
    let s_cfg = LossConfig {
        sd_ss_weight: 1.0,
        ..s_cfg
    };
    let t_cfg = LossConfig {
        alpha: 1.0,
        ..t_cfg
    };
    let s = student_objective(&trace, &t_out, &ds.labels, Some(&task), idx, &s_cfg).unwrap();
    let t = teacher_objective(&trace, &ds.labels, Some(&task), idx, &t_cfg).unwrap();
    assert!((s.total - t.total).abs() < 1e-12);
    assert!(
        common::max_abs_diff(
            s.d_pretext_logits.as_ref().unwrap(),
            t.d_pretext_logits.as_ref().unwrap()
        ) < 1e-12
    );
}

#[test]
fn losses_ignore_a_constant_logit_shift() {
    let z = standard_normal(6, 4, 5);
    let zt = standard_normal(6, 4, 6);
    let shifted = z.map(|v| v + 37.5);
    let labels = [0, 1, 2, 3, 0, 1];
    let idx = [0, 1, 2, 3, 4, 5];
    let (a, ga) = cross_entropy(&z, &labels, &idx, Reduction::Mean).unwrap();
    let (b, gb) = cross_entropy(&shifted, &labels, &idx, Reduction::Mean).unwrap();
    assert!((a - b).abs() < 1e-12);
    assert!(common::max_abs_diff(&ga, &gb) < 1e-12);
    let (a, _) = kl_divergence(&z, &zt, &idx, 2.0, Reduction::Mean).unwrap();
    let (b, _) = kl_divergence(&shifted, &zt, &idx, 2.0, Reduction::Mean).unwrap();
    assert!((a - b).abs() < 1e-12);
    assert_eq!(
        accuracy(&z, &labels, &idx),
        accuracy(&shifted, &labels, &idx)
    );
    assert_eq!(z.argmax_rows(), shifted.argmax_rows());
}

#[test]
fn accuracy_of_empty_index_is_none() {
    let z = Matrix::zeros(3, 2);
    assert_eq!(accuracy(&z, &[0, 1, 0], &[]), None);
}
