use microhd::data::{blobs, prepare, BlobSpec, Dataset, Normalization, Splits};
use microhd::model::{train, EncodedSet, HdcConfig, TrainOptions, UpdateRule};

fn splits(spec: BlobSpec, normalization: Normalization) -> Splits {
    prepare(&blobs(&spec).unwrap(), None, spec.seed, normalization).unwrap()
}

/// Nearest class mean in input space, as an independent reference classifier.
fn nearest_centroid_accuracy(train: &Dataset, test: &Dataset) -> f64 {
    let (c, f) = (train.n_classes(), train.n_features());
    let mut sums = vec![vec![0.0f64; f]; c];
    let mut counts = vec![0usize; c];
    for i in 0..train.len() {
        counts[train.label(i)] += 1;
        for (s, &x) in sums[train.label(i)].iter_mut().zip(train.sample(i)) {
            *s += x as f64;
        }
    }
    let centroids: Vec<Vec<f64>> =
        sums.iter().zip(&counts).map(|(s, &n)| s.iter().map(|v| v / n.max(1) as f64).collect()).collect();
    let correct = (0..test.len())
        .filter(|&i| {
            let x = test.sample(i);
            let best = (0..c)
                .min_by(|&a, &b| {
                    let da: f64 = centroids[a].iter().zip(x).map(|(m, &v)| (m - v as f64).powi(2)).sum();
                    let db: f64 = centroids[b].iter().zip(x).map(|(m, &v)| (m - v as f64).powi(2)).sum();
                    da.total_cmp(&db)
                })
                .unwrap();
            best == test.label(i)
        })
        .count();
    correct as f64 / test.len() as f64
}

#[test]
fn single_pass_fits_separated_blobs() {
    let spec = BlobSpec { classes: 3, features: 12, per_class: 100, spread: 10.0, noise: 1.0, seed: 2 };
    let s = splits(spec, Normalization::MinMax);
    let config = HdcConfig::id_level(12, 3, 2000, 32, 16);
    let opts = TrainOptions { epochs: 0, ..Default::default() };
    let (state, encoded) = train(config, 1, &s.train, &opts, Normalization::MinMax).unwrap();
    let acc = state.model().evaluate(&encoded).unwrap();
    assert!(acc > 0.9, "training accuracy {acc}");
}

#[test]
fn tracks_nearest_centroid_reference() {
    for (seed, noise) in [(3u64, 2.5), (4, 3.0), (5, 3.5)] {
        let spec = BlobSpec { classes: 4, features: 16, per_class: 150, spread: 10.0, noise, seed };
        let s = splits(spec, Normalization::ZScore);
        let reference = nearest_centroid_accuracy(&s.train, &s.test);
        let config = HdcConfig::projection(16, 4, 4000, 16);
        let (state, _) = train(config, seed, &s.train, &TrainOptions::default(), Normalization::ZScore).unwrap();
        let acc = state.model().evaluate_dataset(&s.test).unwrap();
        assert!(acc >= reference - 0.02, "seed {seed}: hdc {acc} vs centroid {reference}");
    }
}

#[test]
fn accuracy_matches_confusion_matrix_tally() {
    let spec = BlobSpec { classes: 5, features: 6, per_class: 40, spread: 6.0, noise: 2.0, seed: 8 };
    let s = splits(spec, Normalization::MinMax);
    let config = HdcConfig::id_level(6, 5, 1000, 16, 4);
    let (state, _) = train(config, 3, &s.train, &TrainOptions::default(), Normalization::MinMax).unwrap();
    let model = state.model();
    let mut confusion = vec![vec![0usize; 5]; 5];
    for i in 0..s.test.len() {
        confusion[s.test.label(i)][model.predict(s.test.sample(i)).unwrap()] += 1;
    }
    let trace: usize = (0..5).map(|k| confusion[k][k]).sum();
    let tally = trace as f64 / s.test.len() as f64;
    assert_eq!(model.evaluate_dataset(&s.test).unwrap(), tally);
}

#[test]
fn retraining_leaves_encoder_alone_and_keeps_range() {
    let spec = BlobSpec { classes: 3, features: 10, per_class: 50, spread: 4.0, noise: 2.0, seed: 1 };
    let s = splits(spec, Normalization::MinMax);
    for q in [1u32, 3, 8] {
        let config = HdcConfig::id_level(10, 3, 512, 8, q);
        let before = train(config, 5, &s.train, &TrainOptions { epochs: 0, ..Default::default() }, Normalization::MinMax)
            .unwrap()
            .0;
        let after = train(config, 5, &s.train, &TrainOptions::default(), Normalization::MinMax).unwrap().0;
        assert_eq!(before.model().encoder, after.model().encoder);
        let (lo, hi) = microhd::hv::bitwidth_range(q).unwrap();
        for class in &after.model().class_hvs {
            assert!(class.values().iter().all(|&v| (v as i64) >= lo && (v as i64) <= hi));
        }
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let spec = BlobSpec { classes: 4, features: 8, per_class: 60, spread: 4.0, noise: 2.0, seed: 6 };
    let s = splits(spec, Normalization::MinMax);
    let config = HdcConfig::id_level(8, 4, 700, 16, 5);
    let opts = TrainOptions { update: UpdateRule::SimilarityWeighted, shuffle_seed: Some(4), ..Default::default() };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            let (state, _) = train(config, 9, &s.train, &opts, Normalization::MinMax).unwrap();
            let acc = state.model().evaluate_dataset(&s.test).unwrap();
            (state, acc)
        })
    };
    let (a, acc_a) = run(1);
    let (b, acc_b) = run(4);
    assert_eq!(a, b);
    assert_eq!(acc_a.to_bits(), acc_b.to_bits());
}

#[test]
fn zero_epochs_equal_single_pass() {
    let spec = BlobSpec { classes: 2, features: 4, per_class: 20, ..Default::default() };
    let s = splits(spec, Normalization::MinMax);
    let config = HdcConfig::projection(4, 2, 300, 6);
    let (state, encoded) = train(config, 2, &s.train, &TrainOptions { epochs: 0, ..Default::default() }, Normalization::MinMax).unwrap();
    let again = microhd::model::TrainingState::single_pass(
        state.model().encoder.clone(),
        config,
        2,
        &EncodedSet::encode(&state.model().encoder, &s.train).unwrap(),
        Default::default(),
        Normalization::MinMax,
    )
    .unwrap();
    assert_eq!(state, again);
    assert_eq!(encoded.len(), s.train.len());
}
