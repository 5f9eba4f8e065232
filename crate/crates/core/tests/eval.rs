use empathy_core::dataio::{
    split, synth_generate, Dataset, LabelTarget, SplitSpec, SynthConfig, SynthTask,
};
use empathy_core::eval::{
    accuracy, evaluate, run_ablation, weighted_f1, AblationSuite, ConfusionMatrix,
};
use empathy_core::network::{ModalitySet, ModelParams};
use empathy_core::training::{train, TargetMap, TrainConfig};
use empathy_core::TopicDistribution;
use proptest::prelude::*;

/// Scores computed straight from the definition, one class at a time.
fn brute_force(pred: &[usize], truth: &[usize]) -> (f64, f64) {
    let n = pred.len();
    let correct = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    let mut weighted = 0.0;
    for c in 0..3 {
        let tp = (0..n).filter(|&i| pred[i] == c && truth[i] == c).count() as f64;
        let fp = (0..n).filter(|&i| pred[i] == c && truth[i] != c).count() as f64;
        let fn_ = (0..n).filter(|&i| pred[i] != c && truth[i] == c).count() as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        weighted += f1 * (tp + fn_) / n as f64;
    }
    (correct as f64 / n as f64, weighted)
}

fn labelled() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (1usize..=50).prop_flat_map(|n| {
        (
            prop::collection::vec(0usize..3, n),
            prop::collection::vec(0usize..3, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn metrics_match_brute_force((pred, truth) in labelled()) {
        let (acc, f1) = brute_force(&pred, &truth);
        prop_assert!((accuracy(&pred, &truth).unwrap() - acc).abs() <= 1e-12);
        prop_assert!((weighted_f1(&pred, &truth).unwrap() - f1).abs() <= 1e-12);
        let cm = ConfusionMatrix::from_predictions(&pred, &truth).unwrap();
        prop_assert_eq!(cm.total(), pred.len() as u64);
        prop_assert_eq!(cm.accuracy(), cm.trace() as f64 / pred.len() as f64);
    }

    #[test]
    fn weighted_f1_ignores_class_names((pred, truth) in labelled(), perm in Just([0usize, 1, 2]).prop_shuffle()) {
        let p2: Vec<usize> = pred.iter().map(|&c| perm[c]).collect();
        let t2: Vec<usize> = truth.iter().map(|&c| perm[c]).collect();
        let a = weighted_f1(&pred, &truth).unwrap();
        let b = weighted_f1(&p2, &t2).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn worked_example() {
    let (pred, truth) = ([0, 1, 2, 2], [0, 1, 1, 2]);
    let (acc, f1) = brute_force(&pred, &truth);
    assert_eq!(acc, 0.75);
    assert!((f1 - 0.75).abs() < 1e-15);
    assert_eq!(accuracy(&pred, &truth).unwrap(), 0.75);
    assert!((weighted_f1(&pred, &truth).unwrap() - 0.75).abs() < 1e-15);
}

fn synth(task: SynthTask, n: usize, seed: u64, prefix: &str) -> Dataset {
    let cfg = SynthConfig {
        id_prefix: prefix.into(),
        ..SynthConfig::for_task(task, n)
    };
    synth_generate(&cfg, seed).unwrap()
}

#[test]
fn zero_model_predicts_first_class() {
    let ds = synth(SynthTask::UnimodalLinear, 60, 3, "z");
    let cfg = TrainConfig::default();
    let model = ModelParams::zeros(&cfg.arch(ds.dims)).unwrap();
    let report = evaluate(&model, &ds, LabelTarget::Er).unwrap();
    let zeros = ds
        .labels(LabelTarget::Er)
        .iter()
        .filter(|&&c| c == 0)
        .count();
    assert_eq!(report.confusion.predicted(0), 60);
    assert_eq!(report.accuracy, zeros as f64 / 60.0);
    assert_eq!(report.n, 60);
    assert_eq!(report, evaluate(&model, &ds, LabelTarget::Er).unwrap());
}

#[test]
fn dims_mismatch_is_named() {
    let ds = synth(SynthTask::UnimodalLinear, 5, 3, "z");
    let mut cfg = TrainConfig::default().arch(ds.dims);
    cfg.dims.d_a += 1;
    let model = ModelParams::zeros(&cfg).unwrap();
    let err = evaluate(&model, &ds, LabelTarget::Ee)
        .unwrap_err()
        .to_string();
    assert!(err.contains("d_a"), "{err}");
}

#[test]
fn trained_model_generalizes() {
    let ds = synth(SynthTask::UnimodalLinear, 300, 8, "g");
    let (tr, va, te) = split(&ds, &SplitSpec::standard(1)).unwrap();
    let cfg = TrainConfig {
        epochs: 40,
        sdat_enabled: false,
        ..Default::default()
    };
    let run = train(&tr, &va, &cfg).unwrap();
    let report = evaluate(&run.best.model().unwrap(), &te, cfg.label_target).unwrap();
    assert!(report.accuracy >= 0.95, "{report:?}");
    assert_eq!(
        report.accuracy,
        report.confusion.trace() as f64 / report.n as f64
    );
}

#[test]
fn modality_suite_separates_fusion_from_text() {
    let tr = synth(SynthTask::CrossModalParity, 400, 1, "tr");
    let va = synth(SynthTask::CrossModalParity, 100, 2, "va");
    let te = synth(SynthTask::CrossModalParity, 200, 3, "te");
    let cfg = TrainConfig {
        epochs: 15,
        sdat_enabled: false,
        ..Default::default()
    };
    let table = run_ablation(AblationSuite::Modality, &cfg, &tr, &va, &te, None).unwrap();
    assert_eq!(table.rows.len(), 7);
    let names: Vec<&str> = table.rows.iter().map(|r| r.variant.as_str()).collect();
    assert_eq!(
        names,
        [
            "text",
            "audio",
            "video",
            "text+audio",
            "text+video",
            "audio+video",
            "text+audio+video"
        ]
    );
    let all = table.row("text+audio+video").unwrap();
    let text = table.row("text").unwrap();
    assert_eq!(all.modalities, ModalitySet::ALL);
    assert!(all.accuracy >= 0.95, "{}", table.to_text());
    assert!(text.accuracy <= 0.60, "{}", table.to_text());
    let rendered = table.to_text();
    assert_eq!(rendered.lines().count(), 8);
    let json = serde_json::to_string(&table).unwrap();
    assert_eq!(
        serde_json::from_str::<empathy_core::eval::AblationTable>(&json).unwrap(),
        table
    );
}

#[test]
fn uninformative_topic_targets_change_little() {
    for seed in 0..5 {
        let tr = synth(SynthTask::UnimodalLinear, 150, 30 + seed, "tr");
        let va = synth(SynthTask::UnimodalLinear, 60, 40 + seed, "va");
        let te = synth(SynthTask::UnimodalLinear, 100, 50 + seed, "te");
        let cfg = TrainConfig {
            epochs: 15,
            topics_k: 4,
            seed,
            ..Default::default()
        };
        let uniform: TargetMap = tr
            .samples
            .iter()
            .map(|s| (s.id.clone(), TopicDistribution::uniform(4)))
            .collect();
        let table = run_ablation(AblationSuite::Sdat, &cfg, &tr, &va, &te, Some(&uniform)).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.rows[0].w_t, 0.0);
        assert_eq!(table.rows[1].w_t, 0.16);
        let delta = (table.rows[0].accuracy - table.rows[1].accuracy).abs();
        assert!(delta < 0.05, "seed {seed}\n{}", table.to_text());
        // no LDA was fit, so no document was read
        assert!(tr.samples.iter().all(|s| s.doc_reads() == 0));
    }
}
