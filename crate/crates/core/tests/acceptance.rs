//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Criterion 9 needs the Restaurant object dataset: point it at a directory
//! of per-category subdirectories with `LOCALHDP_RESTAURANT_DIR`.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use localhdp::corpus::{BowDocument, CategoryLabel, LabeledCorpus};
use localhdp::features::{build_dictionary, describe_cloud, find_clouds, FeatureParams, PointCloud};
use localhdp::hdp::{CategoryModel, DocumentVariational, Hyperparams};
use localhdp::protocol::{
    compute_metrics, replay_trace, run_offline, run_open_ended, window_accuracy, Event, ExperimentTrace, Metrics,
    TeacherConfig, Termination,
};
use localhdp::registry::{category_seed, Registry};
use localhdp::synthetic::PlantedTopics;
use ndarray::array;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed < limit
}

fn gradient_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let k = rng.random_range(1..=3);
        let t = rng.random_range(1..=k);
        let vocab = rng.random_range(1..=3);
        let model = common::random_model(&mut rng, k, t, vocab);
        let doc = common::random_doc(&mut rng, vocab, 4);
        let var = common::random_variational(&mut rng, &model, &doc);
        let got = model.natural_gradients(&var, &doc).expect("gradients");
        let (dl, du, dv) = common::naive_gradients(&model, &var, &doc);
        for (a, b) in got.lambda.iter().zip(dl.iter()) {
            worst = worst.max((a - b).abs());
        }
        for (a, b) in got.u.iter().chain(&got.v).zip(du.iter().chain(&dv)) {
            worst = worst.max((a - b).abs());
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-12 && within(elapsed, Duration::from_secs(5)),
        format!("200 instances, max |diff| = {worst:.3e} (≤ 1e-12), {elapsed:.2?} (< 5 s)"),
    )
}

fn bound_monotonicity() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_drop = 0.0f64;
    let mut sweeps = 0;
    for _ in 0..100 {
        let k = rng.random_range(2..=10);
        let t = rng.random_range(1..=k.min(5));
        let vocab = rng.random_range(1..=15);
        let model = common::random_model(&mut rng, k, t, vocab);
        let doc = common::random_doc(&mut rng, vocab, 40);
        let fit = model.infer_document(&doc, 1e-12, 100).expect("inference");
        sweeps += fit.sweeps();
        for pair in fit.history.windows(2) {
            worst_drop = worst_drop.max(pair[0] - pair[1]);
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst_drop <= 1e-8 && within(elapsed, Duration::from_secs(30)),
        format!("100 documents, {sweeps} sweeps, largest decrease = {worst_drop:.3e} (≤ 1e-8), {elapsed:.2?} (< 30 s)"),
    )
}

/// Bound of the fixed grid-search instance as a function of the four free
/// coordinates, with the stick parameters at their closed-form optimum.
struct TinyInstance {
    model: CategoryModel,
    doc: BowDocument,
}

impl TinyInstance {
    fn new() -> Self {
        let hyper = Hyperparams {
            max_topics: 2,
            max_tables: 2,
            ..Default::default()
        };
        let model =
            CategoryModel::from_parts(hyper, array![[3.0, 0.5], [0.7, 2.2]], vec![1.3], vec![0.8], 1, 2).unwrap();
        let doc = BowDocument::from_counts([(0u32, 2u32), (1, 1)], "tiny").unwrap();
        Self { model, doc }
    }

    fn state(&self, z: [f64; 2], p: [f64; 2]) -> DocumentVariational {
        let alpha0 = self.model.hyper().alpha0;
        // word 0 occurs twice, word 1 once
        let first = 2.0 * z[0] + z[1];
        let second = 2.0 * (1.0 - z[0]) + (1.0 - z[1]);
        DocumentVariational {
            words: self.doc.iter().map(|(w, _)| w).collect(),
            a: vec![1.0 + first],
            b: vec![alpha0 + second],
            phi: array![[p[0], 1.0 - p[0]], [p[1], 1.0 - p[1]]],
            zeta: array![[z[0], 1.0 - z[0]], [z[1], 1.0 - z[1]]],
        }
    }

    fn bound(&self, z: [f64; 2], p: [f64; 2]) -> f64 {
        common::oracle_bound(&self.model, &self.doc, &self.state(z, p))
    }
}

fn grid_search() -> Verdict {
    let start = Instant::now();
    let inst = TinyInstance::new();
    let steps = 100;
    let grid: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();

    // The zeta-dependent pieces are evaluated once per zeta pair; the phi
    // sweep then only needs the terms that involve phi.
    let elog_sigma = common::stick_log_weights(inst.model.u(), inst.model.v());
    let elog_beta = |k: usize, w: usize| common::elog_topic(&inst.model, k, w);
    let counts = [2.0, 1.0];
    let mut best = (f64::NEG_INFINITY, [0.0; 2], [0.0; 2]);
    for &z0 in &grid {
        for &z1 in &grid {
            let z = [z0, z1];
            let base = inst.bound(z, [0.5, 0.5]);
            let base_phi: f64 = (0..2).map(|t| phi_terms(&elog_sigma, &elog_beta, &counts, z, t, 0.5)).sum();
            let per_table: Vec<Vec<f64>> = (0..2)
                .map(|t| grid.iter().map(|&p| phi_terms(&elog_sigma, &elog_beta, &counts, z, t, p)).collect())
                .collect();
            for (i0, &p0) in grid.iter().enumerate() {
                for (i1, &p1) in grid.iter().enumerate() {
                    let value = base - base_phi + per_table[0][i0] + per_table[1][i1];
                    if value > best.0 {
                        best = (value, z, [p0, p1]);
                    }
                }
            }
        }
    }
    // the decomposition above must agree with the full oracle at the optimum
    let direct = inst.bound(best.1, best.2);
    let decomposition_ok = (direct - best.0).abs() < 1e-9;

    let refined = refine(&inst, best.1, best.2);

    let fit = inst.model.infer_document(&inst.doc, 1e-14, 10_000).expect("inference");
    let self_consistent = (common::oracle_bound(&inst.model, &inst.doc, &fit.var) - fit.bound).abs() < 1e-9;
    let gap = best.0 - fit.bound;
    let refined_gap = refined - fit.bound;
    let elapsed = start.elapsed();
    verdict(
        gap <= 1e-6
            && refined_gap <= 1e-6
            && decomposition_ok
            && self_consistent
            && within(elapsed, Duration::from_secs(120)),
        format!(
            "grid best {:.9} at zeta={:?} phi={:?}; inferred {:.9}; grid − inferred = {gap:.3e} (≤ 1e-6), \
             locally refined − inferred = {refined_gap:.3e}, {elapsed:.2?} (< 2 min)",
            best.0, best.1, best.2, fit.bound
        ),
    )
}

/// Compass search from a grid point, shrinking the step down to 1e-10.
fn refine(inst: &TinyInstance, z: [f64; 2], p: [f64; 2]) -> f64 {
    let mut x = [z[0], z[1], p[0], p[1]];
    let eval = |x: &[f64; 4]| inst.bound([x[0], x[1]], [x[2], x[3]]);
    let mut value = eval(&x);
    let mut step = 0.01;
    while step > 1e-10 {
        let mut improved = false;
        for i in 0..4 {
            for dir in [-1.0, 1.0] {
                let mut y = x;
                y[i] = (y[i] + dir * step).clamp(0.0, 1.0);
                let v = eval(&y);
                if v > value {
                    (x, value, improved) = (y, v, true);
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    value
}

/// Bound terms that involve table `t`'s topic assignment `(p, 1 - p)`.
fn phi_terms(
    elog_sigma: &[f64],
    elog_beta: &dyn Fn(usize, usize) -> f64,
    counts: &[f64; 2],
    z: [f64; 2],
    t: usize,
    p: f64,
) -> f64 {
    let phi = [p, 1.0 - p];
    let mut s = 0.0;
    for k in 0..2 {
        let plogp = if phi[k] > 0.0 { phi[k] * phi[k].ln() } else { 0.0 };
        s += phi[k] * elog_sigma[k] - plogp;
        for w in 0..2 {
            let zeta = if t == 0 { z[w] } else { 1.0 - z[w] };
            s += counts[w] * zeta * phi[k] * elog_beta(k, w);
        }
    }
    s
}

fn planted_topic_recovery() -> Verdict {
    let start = Instant::now();
    let planted = PlantedTopics::default();
    let corpus = planted.generate().expect("synthetic corpus");
    let hyper = Hyperparams::default();
    let report = run_offline(&corpus, 10, 10, &hyper, 0).expect("offline evaluation");

    let mut registry = Registry::new(corpus.dictionary_size, hyper, 0).unwrap();
    for (doc, label) in &corpus.documents {
        registry.teach(label, doc).unwrap();
    }
    let counts: Vec<usize> = registry
        .categories()
        .map(|(_, c)| c.model().effective_topic_count(0.02).unwrap())
        .collect();
    let elapsed = start.elapsed();
    let accuracy_ok = report.mean_accuracy == 1.0 && report.fold_accuracies.iter().all(|&a| a == 1.0);
    let topics_ok = counts.iter().all(|c| (3..=6).contains(c));
    verdict(
        accuracy_ok && topics_ok && within(elapsed, Duration::from_secs(60)),
        format!(
            "accuracy {} over {} folds (= 1.00), effective topics {counts:?} (each in [3, 6]), {elapsed:.2?} (< 1 min)",
            report.mean_accuracy,
            report.fold_accuracies.len()
        ),
    )
}

fn bits(model: &CategoryModel) -> (Vec<u64>, Vec<u64>, Vec<u64>, u64, u64) {
    (
        model.lambda().iter().map(|x| x.to_bits()).collect(),
        model.u().iter().map(|x| x.to_bits()).collect(),
        model.v().iter().map(|x| x.to_bits()).collect(),
        model.t0(),
        model.doc_count(),
    )
}

fn category_isolation() -> Verdict {
    let planted = PlantedTopics {
        categories: 10,
        dictionary_size: 150,
        docs_per_category: 6,
        seed: 3,
        ..Default::default()
    };
    let corpus = planted.generate().unwrap();
    let hyper = Hyperparams::default();
    let seed = 7;
    let by_label = corpus.indices_by_label();

    // interleave the categories so every model is trained amid the others
    let mut registry = Registry::new(corpus.dictionary_size, hyper, seed).unwrap();
    for round in 0..planted.docs_per_category {
        for views in by_label.values() {
            let (doc, label) = &corpus.documents[views[round]];
            registry.teach(label, doc).unwrap();
        }
    }
    let mut identical = 0;
    for (label, views) in &by_label {
        let mut alone = CategoryModel::new(hyper, corpus.dictionary_size, category_seed(seed, label)).unwrap();
        for &i in views {
            alone.fit_document(&corpus.documents[i].0).unwrap();
        }
        if bits(&alone) == bits(registry.category(label).unwrap().model()) {
            identical += 1;
        }
    }
    verdict(
        identical == by_label.len(),
        format!("{identical}/{} categories bitwise identical to standalone training", by_label.len()),
    )
}

fn open_ended_protocol() -> Verdict {
    let start = Instant::now();
    let planted = PlantedTopics {
        categories: 10,
        dictionary_size: 150,
        seed: 11,
        ..Default::default()
    };
    let corpus = planted.generate().unwrap();
    let cfg = TeacherConfig {
        seed: 5,
        ..Default::default()
    };
    let hyper = Hyperparams::default();
    let (metrics, trace, _) = run_open_ended(&corpus, &cfg, &hyper).expect("open-ended run");
    let (again, trace_again, _) = run_open_ended(&corpus, &cfg, &hyper).expect("replayed run");
    let elapsed = start.elapsed();
    let replay_identical =
        metrics.to_key_values() == again.to_key_values() && trace.to_jsonl() == trace_again.to_jsonl();
    verdict(
        trace.termination == Some(Termination::LackOfData)
            && metrics.lc == 10
            && metrics.gca >= 0.9
            && replay_identical
            && within(elapsed, Duration::from_secs(120)),
        format!(
            "termination {}, lc={} (= 10), gca={:.4} (≥ 0.9), qci={}, replay identical: {replay_identical}, {elapsed:.2?} (< 2 min)",
            trace.termination.map_or("none".to_string(), |t| t.to_string()),
            metrics.lc,
            metrics.gca,
            metrics.qci
        ),
    )
}

fn label(s: &str) -> CategoryLabel {
    CategoryLabel::new(s).unwrap()
}

/// Builds a trace from a compact script: `T(label)` teaches three views,
/// `+`/`-` asks about a view of the most recent category (wrong answers are
/// followed by a correction).
fn scripted_trace(corpus: &LabeledCorpus, script: &[&str]) -> ExperimentTrace {
    let by_label = corpus.indices_by_label();
    let mut next_view = std::collections::BTreeMap::new();
    let mut take = |l: &CategoryLabel| {
        let i = next_view.entry(l.clone()).or_insert(0usize);
        *i += 1;
        by_label[l][*i - 1]
    };
    let mut trace = ExperimentTrace::default();
    let mut current = label("c0");
    for step in script {
        match *step {
            "+" | "-" => {
                let view = take(&current);
                let correct = *step == "+";
                trace.events.push(Event::Ask {
                    view,
                    predicted: if correct { current.clone() } else { label("elsewhere") },
                    truth: current.clone(),
                    correct,
                    resampled: false,
                });
                if !correct {
                    trace.events.push(Event::Correct {
                        label: current.clone(),
                        view,
                    });
                }
            }
            name => {
                current = label(name);
                for _ in 0..3 {
                    let view = take(&current);
                    trace.events.push(Event::Teach {
                        label: current.clone(),
                        view,
                    });
                }
            }
        }
    }
    trace
}

fn metric_arithmetic() -> Verdict {
    let corpus = common::separable_corpus(3, 12, 4);
    let hyper = Hyperparams {
        max_topics: 5,
        max_tables: 3,
        ..Default::default()
    };
    let cases: [(&[&str], Metrics); 3] = [
        (
            &["c0", "+", "+"],
            Metrics {
                qci: 2,
                lc: 1,
                aic: 3.0,
                gca: 1.0,
            },
        ),
        (
            &["c0", "+", "-", "+", "-", "c1", "+", "-", "+", "-", "+", "-"],
            Metrics {
                qci: 15,
                lc: 2,
                aic: 11.0 / 2.0,
                gca: 0.5,
            },
        ),
        (
            &["c0", "+", "-", "c1", "+", "+", "-", "c2", "+"],
            Metrics {
                qci: 8,
                lc: 3,
                aic: 11.0 / 3.0,
                gca: 4.0 / 6.0,
            },
        ),
    ];
    let mut details = Vec::new();
    let mut ok = true;
    for (script, expected) in cases {
        let trace = scripted_trace(&corpus, script);
        trace.validate().expect("well-formed trace");
        let registry = replay_trace(&trace, &corpus, &hyper, 0).expect("replay");
        let got = compute_metrics(&trace, &registry);
        ok &= got == expected;
        details.push(format!(
            "(qci {}, lc {}, aic {:.4}, gca {:.4})",
            got.qci, got.lc, got.aic, got.gca
        ));
    }
    verdict(ok, format!("3 hand-built traces exact: {}", details.join(" ")))
}

fn threshold_semantics() -> Verdict {
    let tau = TeacherConfig::default().tau;
    let mut ok = true;
    let mut values = Vec::new();
    for pattern in [[true, true, false], [false, true, true], [true, false, true]] {
        let mut trace = ExperimentTrace::default();
        trace.events.push(Event::Teach {
            label: label("a"),
            view: 0,
        });
        for (i, correct) in pattern.into_iter().enumerate() {
            trace.events.push(Event::Ask {
                view: i + 1,
                predicted: label(if correct { "a" } else { "b" }),
                truth: label("a"),
                correct,
                resampled: false,
            });
        }
        let acc = window_accuracy(&trace, 1);
        let right = pattern.iter().filter(|&&c| c).count();
        let wrong = pattern.len() - right;
        ok &= acc == 2.0 / 3.0 && acc > tau && right >= 2 * wrong;
        values.push(acc);
    }
    verdict(
        ok,
        format!("window accuracy of 2 correct in 3 = {:?} (= 2/3, > τ = {tau})", values),
    )
}

fn restaurant_dataset() -> Verdict {
    let Some(root) = std::env::var_os("LOCALHDP_RESTAURANT_DIR").map(PathBuf::from) else {
        return Verdict::Skip("LOCALHDP_RESTAURANT_DIR not set".into());
    };
    if !root.is_dir() {
        return Verdict::Skip(format!("{} is not a directory", root.display()));
    }
    let params = FeatureParams {
        voxel_size: 0.03,
        image_width: 4,
        support_length: 0.1,
    };
    let files = find_clouds(&root).expect("scan dataset");
    let mut described = Vec::new();
    for file in files {
        let Some(label) = file.label else { continue };
        match PointCloud::load(&file.path).and_then(|c| describe_cloud(&c, &params)) {
            Ok(images) => described.push((label, file.path, images)),
            Err(e) => eprintln!("skipping {}: {e}", file.path.display()),
        }
    }
    if described.is_empty() {
        return Verdict::Skip(format!("no labelled clouds under {}", root.display()));
    }
    let pool: Vec<_> = described.iter().flat_map(|(_, _, d)| d.iter().cloned()).collect();
    let (dictionary, _) = match build_dictionary(&pool, 2000, 0, params) {
        Ok(d) => d,
        Err(e) => return Verdict::Fail(format!("dictionary: {e}")),
    };
    let mut corpus = LabeledCorpus::new(dictionary.size());
    for (label, path, images) in &described {
        let doc = dictionary.encode(images, path.display().to_string()).unwrap();
        if !doc.is_empty() {
            corpus.push(doc, label.clone()).unwrap();
        }
    }
    match run_offline(&corpus, 10, 10, &Hyperparams::default(), 0) {
        Ok(report) => verdict(
            report.mean_accuracy >= 0.90,
            format!("{} views, mean 10-fold accuracy {:.4} (≥ 0.90)", corpus.len(), report.mean_accuracy),
        ),
        Err(e) => Verdict::Fail(format!("offline evaluation: {e}")),
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("natural gradients match direct summation", gradient_oracle),
        ("per-document bound never decreases", bound_monotonicity),
        ("inference reaches the grid-search optimum", grid_search),
        ("planted topics recovered", planted_topic_recovery),
        ("categories train in isolation", category_isolation),
        ("open-ended protocol runs out of data", open_ended_protocol),
        ("metric arithmetic", metric_arithmetic),
        ("window threshold semantics", threshold_semantics),
        ("Restaurant dataset offline accuracy", restaurant_dataset),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Verdict::Fail(format!("panicked: {msg}"))
            });
        let (tag, detail) = match outcome {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("criterion {} [{tag}] {name}: {detail}", i + 1);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
