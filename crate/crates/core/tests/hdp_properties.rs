mod common;

use localhdp::corpus::{BowDocument, VisualWordId};
use localhdp::hdp::{learning_rate, CategoryModel, Hyperparams};
use localhdp::synthetic::PlantedTopics;
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_hyper() -> Hyperparams {
    Hyperparams {
        max_topics: 8,
        max_tables: 4,
        ..Default::default()
    }
}

#[test]
fn learning_rate_with_fractional_exponent() {
    let hyper = Hyperparams {
        kappa: 0.9,
        ..Default::default()
    };
    assert!((learning_rate(&hyper, 1) - 2f64.powf(-0.9)).abs() < 1e-15);
    assert_eq!(learning_rate(&Hyperparams::default(), 1), 0.5);
}

#[test]
fn repeated_fitting_of_one_document_never_lowers_its_bound() {
    let corpus = PlantedTopics::default().generate().unwrap();
    let doc = &corpus.documents[0].0;
    let mut model = CategoryModel::new(Hyperparams::default(), corpus.dictionary_size, 3).unwrap();
    let mut previous = f64::NEG_INFINITY;
    for fit in 0..20 {
        model.fit_document(doc).unwrap();
        let bound = model.infer(doc).unwrap().bound;
        assert!(bound >= previous - 1e-6, "fit {fit}: {bound} < {previous}");
        previous = bound;
    }
}

#[test]
fn category_bound_is_sum_of_document_bounds() {
    let corpus = PlantedTopics::default().generate().unwrap();
    let mut model = CategoryModel::new(small_hyper(), corpus.dictionary_size, 1).unwrap();
    for (doc, _) in corpus.documents.iter().take(5) {
        model.fit_document(doc).unwrap();
    }
    let docs: Vec<BowDocument> = corpus.documents.iter().skip(5).take(3).map(|(d, _)| d.clone()).collect();
    let single: Vec<f64> = docs.iter().map(|d| model.infer(d).unwrap().bound).collect();
    let sum: f64 = single.iter().sum();
    assert!((model.category_bound(&docs).unwrap() - sum).abs() < 1e-12);
    assert_eq!(model.category_bound(&docs[..1]).unwrap(), single[0]);
    let twice = model.category_bound(&[docs[0].clone(), docs[0].clone()]).unwrap();
    assert_eq!(twice, 2.0 * single[0]);
}

#[test]
fn disjoint_training_vocabularies_separate_scores() {
    let hyper = small_hyper();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut a = CategoryModel::new(hyper, 10, 1).unwrap();
    let mut b = CategoryModel::new(hyper, 10, 2).unwrap();
    for _ in 0..30 {
        let low = BowDocument::from_words((0..8).map(|_| VisualWordId(rng.random_range(0..2))), "a");
        let high = BowDocument::from_words((0..8).map(|_| VisualWordId(rng.random_range(8..10))), "b");
        a.fit_document(&low).unwrap();
        b.fit_document(&high).unwrap();
    }
    let probe = BowDocument::from_counts([(0u32, 3u32), (1, 2)], "probe").unwrap();
    assert!(a.log_likelihood(&probe).unwrap() > b.log_likelihood(&probe).unwrap());
}

#[test]
fn single_word_vocabulary_scores_zero() {
    let hyper = Hyperparams {
        max_topics: 3,
        max_tables: 2,
        ..Default::default()
    };
    let mut model = CategoryModel::new(hyper, 1, 0).unwrap();
    let doc = BowDocument::from_counts([(0u32, 4u32)], "only").unwrap();
    model.fit_document(&doc).unwrap();
    assert!(model.log_likelihood(&doc).unwrap().abs() < 1e-12);
}

#[test]
fn doubling_counts_keeps_per_word_score() {
    // identical topic rows: every topic mixture gives the same predictive
    // distribution, so the per-word score cannot depend on document length
    let hyper = small_hyper();
    let row = [2.0, 0.5, 1.5, 3.0, 0.2];
    let lambda = Array2::from_shape_fn((hyper.max_topics, row.len()), |(_, w)| row[w]);
    let sticks = hyper.max_topics - 1;
    let model = CategoryModel::from_parts(hyper, lambda, vec![1.0; sticks], vec![1.0; sticks], 4, 3).unwrap();
    let doc = BowDocument::from_counts([(0u32, 3u32), (3, 1), (4, 2)], "d").unwrap();
    let a = model.log_likelihood(&doc).unwrap();
    let b = model.log_likelihood(&doc.scaled(2)).unwrap();
    assert!((a - b).abs() < 1e-6, "{a} vs {b}");

    // and on a trained model the two stay close
    let corpus = PlantedTopics::default().generate().unwrap();
    let mut trained = CategoryModel::new(Hyperparams::default(), corpus.dictionary_size, 8).unwrap();
    for (d, _) in corpus.documents.iter().take(20) {
        trained.fit_document(d).unwrap();
    }
    let probe = &corpus.documents[3].0;
    let a = trained.log_likelihood(probe).unwrap();
    let b = trained.log_likelihood(&probe.scaled(2)).unwrap();
    assert!((a - b).abs() < 0.05, "{a} vs {b}");
}

#[test]
fn planted_category_effective_topics() {
    let planted = PlantedTopics::default();
    let corpus = planted.generate().unwrap();
    let mut model = CategoryModel::new(Hyperparams::default(), corpus.dictionary_size, 0).unwrap();
    for (doc, _) in corpus.documents.iter().take(planted.docs_per_category) {
        model.fit_document(doc).unwrap();
    }
    let count = model.effective_topic_count(0.02).unwrap();
    // regression value for this seed
    assert_eq!(count, 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn variational_rows_are_distributions(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(1..8);
        let t = rng.random_range(1..=k);
        let vocab = rng.random_range(1..12);
        let model = common::random_model(&mut rng, k, t, vocab);
        let doc = common::random_doc(&mut rng, vocab, 30);
        let fit = model.infer(&doc).unwrap();
        for row in fit.var.phi.rows() {
            prop_assert!((row.sum() - 1.0).abs() <= 1e-9);
        }
        for row in fit.var.zeta.rows() {
            prop_assert!((row.sum() - 1.0).abs() <= 1e-9);
        }
        prop_assert!(fit.var.a.iter().chain(&fit.var.b).all(|&x| x > 0.0));
        for pair in fit.history.windows(2) {
            prop_assert!(pair[1] >= pair[0] - 1e-8);
        }
        // the library bound agrees with the independent formula
        let oracle = common::oracle_bound(&model, &doc, &fit.var);
        prop_assert!((oracle - fit.bound).abs() <= 1e-9 * fit.bound.abs().max(1.0));
    }

    #[test]
    fn topics_and_sticks_are_well_formed(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(1..10);
        let vocab = rng.random_range(1..20);
        let model = common::random_model(&mut rng, k, 1, vocab);
        for row in model.expected_topics().rows() {
            prop_assert!((row.sum() - 1.0).abs() <= 1e-12);
        }
        let sticks = model.stick_weights();
        prop_assert_eq!(sticks.weights().len(), k);
        prop_assert!(sticks.weights().iter().all(|&w| w >= 0.0));
        prop_assert!(sticks.weights().iter().sum::<f64>() <= 1.0 + 1e-12);
    }

    #[test]
    fn gradients_match_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.random_range(1..=3);
        let t = rng.random_range(1..=k);
        let vocab = rng.random_range(1..=3);
        let model = common::random_model(&mut rng, k, t, vocab);
        let doc = common::random_doc(&mut rng, vocab, 4);
        let var = common::random_variational(&mut rng, &model, &doc);
        let got = model.natural_gradients(&var, &doc).unwrap();
        let (dl, du, dv) = common::naive_gradients(&model, &var, &doc);
        for (a, b) in got.lambda.iter().zip(dl.iter()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        for (a, b) in got.u.iter().chain(&got.v).zip(du.iter().chain(&dv)) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn data_terms_scale_with_document_count(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = common::random_model(&mut rng, 3, 2, 4);
        let doc = common::random_doc(&mut rng, 4, 6);
        let var = common::random_variational(&mut rng, &model, &doc);
        let h = *model.hyper();
        let base = |count: u64| {
            CategoryModel::from_parts(h, model.lambda().clone(), model.u().to_vec(), model.v().to_vec(), model.t0(), count).unwrap()
        };
        let one = base(1).natural_gradients(&var, &doc).unwrap();
        let ten = base(10).natural_gradients(&var, &doc).unwrap();
        for ((g1, g10), l) in one.lambda.iter().zip(ten.lambda.iter()).zip(model.lambda().iter()) {
            let (d1, d10) = (g1 + l - h.eta, g10 + l - h.eta);
            prop_assert!((d10 - 10.0 * d1).abs() <= 1e-12 * d10.abs().max(1.0));
        }
        for i in 0..model.u().len() {
            let (d1, d10) = (one.u[i] + model.u()[i] - 1.0, ten.u[i] + model.u()[i] - 1.0);
            prop_assert!((d10 - 10.0 * d1).abs() <= 1e-12 * d10.abs().max(1.0));
            let (d1, d10) = (one.v[i] + model.v()[i] - h.gamma, ten.v[i] + model.v()[i] - h.gamma);
            prop_assert!((d10 - 10.0 * d1).abs() <= 1e-12 * d10.abs().max(1.0));
        }
    }

    #[test]
    fn unit_step_reaches_fixed_point(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = common::random_model(&mut rng, 4, 3, 5);
        let doc = common::random_doc(&mut rng, 5, 10);
        let var = common::random_variational(&mut rng, &model, &doc);
        let grads = model.natural_gradients(&var, &doc).unwrap();
        model.apply_update(&grads, 1.0).unwrap();
        let again = model.natural_gradients(&var, &doc).unwrap();
        prop_assert!(again.lambda.iter().chain(&again.u).chain(&again.v).all(|g| g.abs() <= 1e-10));
    }

    #[test]
    fn inference_is_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = common::random_model(&mut rng, 5, 3, 6);
        let doc = common::random_doc(&mut rng, 6, 20);
        let a = model.infer(&doc).unwrap();
        let b = model.infer(&doc).unwrap();
        prop_assert_eq!(a.var, b.var);
        prop_assert_eq!(a.bound.to_bits(), b.bound.to_bits());
    }
}
