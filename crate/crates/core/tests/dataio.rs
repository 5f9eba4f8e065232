use empathy_core::dataio::{
    split, synth_generate, ConversationSample, Dataset, Dims, Labels, SplitSpec, SynthConfig,
    SynthTask,
};
use empathy_core::numcore::Matrix;
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-1e6f64..1e6, rows * cols)
        .prop_map(move |data| Matrix::from_vec(rows, cols, data).unwrap())
}

fn sample(dims: Dims, idx: usize) -> impl Strategy<Value = ConversationSample> {
    (
        (1usize..4).prop_flat_map(move |r| matrix(r, dims.d_t)),
        (1usize..4).prop_flat_map(move |r| matrix(r, dims.d_a)),
        (1usize..4).prop_flat_map(move |r| matrix(r, dims.d_v)),
        (0u8..3, 0u8..3, 0u8..3),
        prop::option::of(prop::collection::vec("[a-z]{1,6}", 1..8)),
    )
        .prop_map(move |(t, a, v, (ee, er, cr), doc)| {
            ConversationSample::new(format!("s{idx}"), t, a, v, Labels { ee, er, cr }, doc)
        })
}

fn dataset() -> impl Strategy<Value = Dataset> {
    (1usize..4, 1usize..4, 1usize..4, 1usize..6).prop_flat_map(|(d_t, d_a, d_v, n)| {
        let dims = Dims { d_t, d_a, d_v };
        (0..n)
            .map(|i| sample(dims, i))
            .collect::<Vec<_>>()
            .prop_map(move |samples| Dataset::new(dims, samples).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn save_then_load_is_identity(ds in dataset()) {
        let mut buf = Vec::new();
        ds.write(&mut buf).unwrap();
        let back = Dataset::read(buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &ds);
        let mut again = Vec::new();
        back.write(&mut again).unwrap();
        prop_assert_eq!(buf, again);
    }
}

#[test]
fn file_round_trip_and_split() {
    let ds = synth_generate(&SynthConfig::for_task(SynthTask::TopicCorrelated, 50), 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    ds.save(&path).unwrap();
    assert_eq!(Dataset::load(&path).unwrap(), ds);

    let (a, b, c) = split(&ds, &SplitSpec::standard(4)).unwrap();
    assert_eq!((a.len(), b.len(), c.len()), (35, 5, 10));
    let mut ids: Vec<&str> = [&a, &b, &c]
        .iter()
        .flat_map(|d| d.samples.iter().map(|s| s.id.as_str()))
        .collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), 50);
}
