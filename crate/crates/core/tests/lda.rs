use empathy_core::lda::{fold_in, Corpus, LdaConfig, LdaModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: usize = 20;

/// Two disjoint 20-word vocabularies; each document draws all 50 tokens
/// uniformly from one of them.
fn planted(seed: u64) -> (Vec<Vec<String>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::new();
    let mut topics = Vec::new();
    for d in 0..200 {
        let topic = d % 2;
        let doc = (0..50)
            .map(|_| format!("t{topic}w{}", rng.random_range(0..WORDS)))
            .collect();
        docs.push(doc);
        topics.push(topic);
    }
    (docs, topics)
}

fn planted_word_dist(corpus: &Corpus, topic: usize) -> Vec<f64> {
    corpus
        .vocab
        .tokens()
        .iter()
        .map(|t| {
            if t.starts_with(&format!("t{topic}w")) {
                1.0 / WORDS as f64
            } else {
                0.0
            }
        })
        .collect()
}

fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Learned topic index for each planted topic, best of both permutations.
fn align(model: &LdaModel, corpus: &Corpus) -> ([usize; 2], [f64; 2]) {
    let learned: Vec<Vec<f64>> = (0..2)
        .map(|k| model.topic_word_distribution(k).unwrap())
        .collect();
    let truth: Vec<Vec<f64>> = (0..2).map(|k| planted_word_dist(corpus, k)).collect();
    let mut best: Option<([usize; 2], [f64; 2])> = None;
    for perm in [[0, 1], [1, 0]] {
        let d = [
            tv(&learned[perm[0]], &truth[0]),
            tv(&learned[perm[1]], &truth[1]),
        ];
        if best.is_none_or(|(_, b)| d[0] + d[1] < b[0] + b[1]) {
            best = Some((perm, d));
        }
    }
    best.unwrap()
}

fn cfg(seed: u64) -> LdaConfig {
    LdaConfig {
        k: 2,
        seed,
        ..Default::default()
    }
}

#[test]
fn planted_topics_are_recovered() {
    let (docs, _) = planted(7);
    let corpus = Corpus::from_token_docs(&docs);
    let model = LdaModel::fit(&corpus, &cfg(0)).unwrap();
    let (perm, dist) = align(&model, &corpus);
    assert!(dist.iter().all(|&d| d < 0.1), "{dist:?}");
    for (planted_topic, &learned) in perm.iter().enumerate() {
        let top = model.top_words(learned, 10).unwrap();
        for (w, _) in top {
            assert!(w.starts_with(&format!("t{planted_topic}w")), "{w}");
        }
    }
}

#[test]
fn fold_in_reproduces_training_distribution() {
    let (docs, _) = planted(3);
    let corpus = Corpus::from_token_docs(&docs);
    let model = LdaModel::fit(&corpus, &cfg(1)).unwrap();
    for d in [0, 1, 57] {
        let train = model.doc_topic_distribution(d).unwrap();
        let mut dists: Vec<f64> = (0..20)
            .map(|s| {
                fold_in(&model, &docs[d], 50, s)
                    .unwrap()
                    .total_variation(&train)
            })
            .collect();
        dists.sort_by(f64::total_cmp);
        let median = 0.5 * (dists[9] + dists[10]);
        assert!(median < 0.15, "doc {d}: {median}");
    }
}

#[test]
fn fold_in_single_topic_and_unknown_tokens() {
    let (docs, _) = planted(3);
    let corpus = Corpus::from_token_docs(&docs);
    let model = LdaModel::fit(
        &corpus,
        &LdaConfig {
            k: 1,
            sweeps: 5,
            ..cfg(0)
        },
    )
    .unwrap();
    assert_eq!(fold_in(&model, &docs[4], 5, 0).unwrap().probs(), &[1.0]);
    assert!(fold_in(&model, &["never", "seen"], 5, 0).is_err());
}

#[test]
fn log_joint_trends_upward() {
    let (docs, _) = planted(11);
    let corpus = Corpus::from_token_docs(&docs);
    let median = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        0.5 * (v[4] + v[5])
    };
    for seed in 0..20 {
        let mut trace = Vec::new();
        let c = LdaConfig {
            sweeps: 60,
            ..cfg(seed)
        };
        LdaModel::fit_with_observer(&corpus, &c, |_, m| trace.push(m.log_joint())).unwrap();
        assert_eq!(trace.len(), 60);
        let first = median(&trace[..10]);
        let last = median(&trace[50..]);
        assert!(last >= first, "seed {seed}: {first} -> {last}");
    }
}

#[test]
fn doc_distributions_sit_on_the_simplex() {
    let (docs, _) = planted(5);
    let corpus = Corpus::from_token_docs(&docs);
    let model = LdaModel::fit(
        &corpus,
        &LdaConfig {
            k: 3,
            sweeps: 20,
            ..cfg(2)
        },
    )
    .unwrap();
    for d in 0..model.num_docs() {
        let p = model.doc_topic_distribution(d).unwrap();
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        assert!(p.probs().iter().all(|x| (0.0..=1.0).contains(x)));
    }
    assert!(model.doc_topic_distribution(model.num_docs()).is_err());
    assert!(model.top_words(3, 1).is_err());
}
