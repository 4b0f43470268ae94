use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use localhdp::corpus::{
    export_snapshot_text, load_corpus, write_corpus, BowDocument, CategoryLabel, CorpusFormat, LabeledCorpus,
    ModelSnapshot,
};
use localhdp::features::{build_dictionary, describe_cloud, find_clouds, CloudFile, Dictionary, PointCloud};
use localhdp::protocol::{
    accuracy_curve_csv, instances_csv, learning_curve_csv, run_offline, run_open_ended, Metrics, TeacherConfig,
    Termination,
};
use localhdp::registry::Registry;
use localhdp::synthetic::PlantedTopics;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::output::Outputs;

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Cluster spin images from a directory of point clouds into a visual-word dictionary
    BuildDict {
        /// Point-cloud file or directory
        #[arg(long)]
        clouds: PathBuf,
        /// Number of visual words
        #[arg(long = "dictionary-size", short = 'V')]
        size: usize,
        /// Output dictionary file
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode labelled point clouds as a bag-of-words corpus
    Encode {
        #[arg(long)]
        clouds: PathBuf,
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// bow-text or bow-binary (default: from the output extension, .bowb is binary)
        #[arg(long)]
        format: Option<CorpusFormat>,
    },
    /// Teach every document of a corpus and save the trained model
    Train {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Output snapshot
        #[arg(long)]
        snapshot: PathBuf,
    },
    /// Label documents or point clouds with a trained model
    Classify {
        #[arg(long)]
        snapshot: PathBuf,
        /// Corpus of documents to classify
        #[arg(long, conflicts_with = "clouds", required_unless_present = "clouds")]
        bow: Option<PathBuf>,
        /// Point-cloud file or directory to classify
        #[arg(long)]
        clouds: Option<PathBuf>,
        /// Dictionary for --clouds when the snapshot has none
        #[arg(long)]
        dict: Option<PathBuf>,
        /// Per-item CSV report
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stratified k-fold cross-validation
    EvalOffline {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Key=value metrics file
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Simulated-teacher open-ended experiments
    EvalOpenended {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Key=value summary over all rounds
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Directory for per-round traces, curves and metrics
        #[arg(long)]
        report_dir: Option<PathBuf>,
        /// Snapshot of the first round's final model
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Snapshot utilities
    Snapshot {
        #[command(subcommand)]
        action: SnapshotCommand,
    },
    /// Write a synthetic corpus with planted topics
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        categories: usize,
        #[arg(long, default_value_t = 3)]
        topics: usize,
        #[arg(long, default_value_t = 20)]
        docs: usize,
        #[arg(long, default_value_t = 60)]
        words: usize,
        #[arg(long = "dictionary-size", short = 'V', default_value_t = 50)]
        size: usize,
        #[arg(long)]
        format: Option<CorpusFormat>,
    },
    /// Print the effective configuration as TOML
    Config,
}

#[derive(Subcommand, Debug)]
pub enum SnapshotCommand {
    /// Lossless JSON dump of a snapshot
    Export {
        #[arg(long)]
        snapshot: PathBuf,
        /// Output file (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct CorpusArgs {
    /// Bag-of-words corpus
    #[arg(long)]
    pub bow: PathBuf,
    /// bow-text or bow-binary (default: from the extension, .bowb is binary)
    #[arg(long)]
    pub format: Option<CorpusFormat>,
    /// Dictionary the corpus was encoded with (fixes the vocabulary size)
    #[arg(long)]
    pub dict: Option<PathBuf>,
    /// Vocabulary size, when no dictionary is given
    #[arg(long = "dictionary-size", short = 'V')]
    pub size: Option<usize>,
}

impl CorpusArgs {
    fn dictionary(&self) -> Result<Option<Dictionary>> {
        self.dict
            .as_ref()
            .map(|p| Dictionary::load(p).with_context(|| format!("loading dictionary {}", p.display())))
            .transpose()
    }

    fn load(&self, dictionary: Option<&Dictionary>) -> Result<LabeledCorpus> {
        let size = match (dictionary, self.size) {
            (Some(d), Some(v)) if d.size() != v => {
                bail!("--dictionary-size {v} disagrees with the dictionary's {} words", d.size())
            }
            (Some(d), _) => d.size(),
            (None, Some(v)) => v,
            (None, None) => bail!("the vocabulary size is unknown; pass --dict or --dictionary-size"),
        };
        let format = self.format.unwrap_or_else(|| CorpusFormat::from_path(&self.bow));
        load_corpus(&self.bow, format, size).with_context(|| format!("loading corpus {}", self.bow.display()))
    }
}

/// Writes command output to stdout. A closed pipe (e.g. `| head`) ends output quietly.
macro_rules! say {
    ($($arg:tt)*) => {
        emit(&format!($($arg)*))
    };
}

macro_rules! sayln {
    ($($arg:tt)*) => {
        emit(&(format!($($arg)*) + "\n"))
    };
}

fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    if let Err(e) = out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            log::warn!("writing to stdout: {e}");
        }
    }
}

pub struct RunContext<'a> {
    pub cfg: &'a RunConfig,
    pub outputs: &'a mut Outputs,
    /// Feature flags given explicitly (by flag or config file).
    pub features_overridden: bool,
}

pub fn run(command: Command, ctx: RunContext<'_>) -> Result<()> {
    let RunContext {
        cfg,
        outputs,
        features_overridden,
    } = ctx;
    match command {
        Command::BuildDict { clouds, size, out } => build_dict(cfg, outputs, &clouds, size, &out),
        Command::Encode {
            clouds,
            dict,
            out,
            format,
        } => encode(outputs, &clouds, &dict, &out, format, features_overridden),
        Command::Train { corpus, snapshot } => train(cfg, outputs, &corpus, &snapshot),
        Command::Classify {
            snapshot,
            bow,
            clouds,
            dict,
            out,
        } => classify(outputs, &snapshot, bow.as_deref(), clouds.as_deref(), dict.as_deref(), out.as_deref()),
        Command::EvalOffline { corpus, metrics } => eval_offline(cfg, outputs, &corpus, metrics.as_deref()),
        Command::EvalOpenended {
            corpus,
            metrics,
            report_dir,
            snapshot,
        } => eval_openended(cfg, outputs, &corpus, metrics.as_deref(), report_dir.as_deref(), snapshot.as_deref()),
        Command::Snapshot {
            action: SnapshotCommand::Export { snapshot, out },
        } => {
            let snap = load_snapshot(&snapshot)?;
            let text = export_snapshot_text(&snap)? + "\n";
            match out {
                Some(path) => outputs.write(&path, text.as_bytes()),
                None => {
                    say!("{text}");
                    Ok(())
                }
            }
        }
        Command::Synth {
            out,
            categories,
            topics,
            docs,
            words,
            size,
            format,
        } => {
            let planted = PlantedTopics {
                categories,
                topics_per_category: topics,
                docs_per_category: docs,
                words_per_doc: words,
                dictionary_size: size,
                seed: cfg.seed,
                ..Default::default()
            };
            let corpus = planted.generate()?;
            write_corpus_file(outputs, &corpus, &out, format)?;
            sayln!("{} documents in {} categories over {} words", corpus.len(), categories, size);
            Ok(())
        }
        Command::Config => {
            say!("{}", cfg.to_toml());
            Ok(())
        }
    }
}

fn load_snapshot(path: &Path) -> Result<ModelSnapshot> {
    localhdp::corpus::load_snapshot(path).with_context(|| format!("loading snapshot {}", path.display()))
}

fn write_corpus_file(outputs: &mut Outputs, corpus: &LabeledCorpus, out: &Path, format: Option<CorpusFormat>) -> Result<()> {
    let format = format.unwrap_or_else(|| CorpusFormat::from_path(out));
    let mut buf = Vec::new();
    write_corpus(corpus, &mut buf, format)?;
    outputs.write(out, &buf)
}

fn clouds_under(root: &Path) -> Result<Vec<CloudFile>> {
    let files = find_clouds(root).with_context(|| format!("listing {}", root.display()))?;
    if files.is_empty() {
        log::warn!("no point clouds found under {}", root.display());
    }
    Ok(files)
}

fn build_dict(cfg: &RunConfig, outputs: &mut Outputs, root: &Path, size: usize, out: &Path) -> Result<()> {
    let files = clouds_under(root)?;
    let mut descriptors = Vec::new();
    let mut used = 0usize;
    for file in &files {
        let described = PointCloud::load(&file.path).and_then(|c| describe_cloud(&c, &cfg.features));
        match described {
            Ok(d) => {
                used += 1;
                descriptors.extend(d);
            }
            Err(e) => log::warn!("skipping {}: {e}", file.path.display()),
        }
    }
    if used == 0 {
        bail!("no readable point clouds under {}", root.display());
    }
    if descriptors.is_empty() {
        bail!("the point clouds under {} produced no descriptors", root.display());
    }
    let (dict, km) = build_dictionary(&descriptors, size, cfg.seed, cfg.features)?;
    outputs.write(out, &dict.to_bytes())?;
    sayln!("clouds: {used}\ndescriptors: {}\nvisual words: {}\nsse: {}", descriptors.len(), dict.size(), km.sse());
    Ok(())
}

fn encode_cloud(path: &Path, dict: &Dictionary) -> Result<BowDocument> {
    let cloud = PointCloud::load(path)?;
    let descriptors = describe_cloud(&cloud, dict.params())?;
    if descriptors.is_empty() {
        log::warn!("{}: no descriptors, document is empty", path.display());
    }
    Ok(dict.encode(&descriptors, path.display().to_string())?)
}

fn encode(
    outputs: &mut Outputs,
    root: &Path,
    dict_path: &Path,
    out: &Path,
    format: Option<CorpusFormat>,
    features_overridden: bool,
) -> Result<()> {
    let dict = Dictionary::load(dict_path).with_context(|| format!("loading dictionary {}", dict_path.display()))?;
    if features_overridden {
        log::warn!("feature settings are taken from the dictionary; the given ones are ignored");
    }
    let files = clouds_under(root)?;
    let mut corpus = LabeledCorpus::new(dict.size());
    for file in &files {
        let label = file
            .label
            .clone()
            .with_context(|| format!("{}: no label (put it in a labelled subdirectory or a .label file)", file.path.display()))?;
        let doc = encode_cloud(&file.path, &dict).with_context(|| format!("encoding {}", file.path.display()))?;
        corpus.push(doc, label)?;
    }
    write_corpus_file(outputs, &corpus, out, format)?;
    sayln!("encoded {} clouds", corpus.len());
    Ok(())
}

fn train(cfg: &RunConfig, outputs: &mut Outputs, args: &CorpusArgs, out: &Path) -> Result<()> {
    let dict = args.dictionary()?;
    let corpus = args.load(dict.as_ref())?;
    let mut registry = Registry::new(corpus.dictionary_size, cfg.hyper, cfg.seed)?;
    for (doc, label) in &corpus.documents {
        if doc.is_empty() {
            log::warn!("skipping empty document {:?}", doc.source_id());
            continue;
        }
        registry.teach(label, doc)?;
    }
    if registry.is_empty() {
        bail!("{} has no usable documents", args.bow.display());
    }
    let snap = ModelSnapshot::from_registry(&registry, dict.as_ref());
    outputs.write(out, &snap.to_bytes())?;
    sayln!("categories: {}\ninstances: {}", registry.len(), registry.total_instances());
    Ok(())
}

fn classify(
    outputs: &mut Outputs,
    snapshot: &Path,
    bow: Option<&Path>,
    clouds: Option<&Path>,
    dict_path: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let snap = load_snapshot(snapshot)?;
    let registry = snap.to_registry()?;
    let mut items: Vec<(String, Option<CategoryLabel>, BowDocument)> = Vec::new();
    if let Some(bow) = bow {
        let format = CorpusFormat::from_path(bow);
        let corpus = load_corpus(bow, format, registry.dictionary_size())
            .with_context(|| format!("loading corpus {}", bow.display()))?;
        items.extend(corpus.documents.into_iter().map(|(d, l)| (d.source_id().to_string(), Some(l), d)));
    } else if let Some(root) = clouds {
        let dict = match (dict_path, snap.dictionary) {
            (Some(p), _) => Dictionary::load(p).with_context(|| format!("loading dictionary {}", p.display()))?,
            (None, Some(d)) => d,
            (None, None) => bail!("the snapshot has no dictionary; pass --dict"),
        };
        if dict.size() != registry.dictionary_size() {
            bail!("dictionary has {} words but the model expects {}", dict.size(), registry.dictionary_size());
        }
        for file in clouds_under(root)? {
            let doc = encode_cloud(&file.path, &dict).with_context(|| format!("encoding {}", file.path.display()))?;
            items.push((file.path.display().to_string(), file.label, doc));
        }
    }

    let mut report = csv::Writer::from_writer(Vec::new());
    report.write_record(["source", "truth", "predicted", "score"])?;
    let (mut labelled, mut right) = (0usize, 0usize);
    for (source, truth, doc) in &items {
        let answer = registry.ask(doc).with_context(|| format!("classifying {source}"))?;
        sayln!("{source}\t{}", answer.label);
        if let Some(t) = truth {
            labelled += 1;
            right += usize::from(*t == answer.label);
        }
        let score = answer.scores[&answer.label];
        report.write_record([
            source.as_str(),
            truth.as_ref().map_or("", |t| t.as_str()),
            answer.label.as_str(),
            &score.to_string(),
        ])?;
    }
    if labelled > 0 {
        sayln!("accuracy={}", right as f64 / labelled as f64);
    }
    if let Some(out) = out {
        outputs.write(out, &report.into_inner()?)?;
    }
    Ok(())
}

fn eval_offline(cfg: &RunConfig, outputs: &mut Outputs, args: &CorpusArgs, metrics: Option<&Path>) -> Result<()> {
    let dict = args.dictionary()?;
    let corpus = args.load(dict.as_ref())?;
    let report = run_offline(&corpus, cfg.folds, cfg.permutations, &cfg.hyper, cfg.seed)?;
    let kv = format!(
        "accuracy={}\naccuracy_sd={}\nfolds={}\npermutations={}\n",
        report.mean_accuracy,
        report.std_accuracy(),
        report.folds,
        report.permutations
    );
    sayln!(
        "offline accuracy: {:.2}% ± {:.2} over {} folds × {} permutations\n",
        100.0 * report.mean_accuracy,
        100.0 * report.std_accuracy(),
        report.folds,
        report.permutations
    );
    say!("{kv}");
    if let Some(path) = metrics {
        outputs.write(path, kv.as_bytes())?;
    }
    Ok(())
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn eval_openended(
    cfg: &RunConfig,
    outputs: &mut Outputs,
    args: &CorpusArgs,
    metrics: Option<&Path>,
    report_dir: Option<&Path>,
    snapshot: Option<&Path>,
) -> Result<()> {
    let dict = args.dictionary()?;
    let corpus = args.load(dict.as_ref())?;
    let rounds: Vec<_> = (0..cfg.rounds)
        .into_par_iter()
        .map(|r| {
            let teacher = TeacherConfig {
                seed: cfg.seed.wrapping_add(r as u64),
                ..cfg.teacher
            };
            run_open_ended(&corpus, &teacher, &cfg.hyper)
        })
        .collect::<localhdp::error::Result<_>>()?;

    let mut human = String::new();
    for (r, (m, trace, _)) in rounds.iter().enumerate() {
        let reason = trace.termination.map_or("unfinished".into(), |t| t.to_string());
        writeln!(human, "round {r} (seed {}, {reason})\n{m}\n", cfg.seed.wrapping_add(r as u64))?;
    }
    let all: Vec<&Metrics> = rounds.iter().map(|(m, _, _)| m).collect();
    let col = |f: fn(&Metrics) -> f64| mean_sd(&all.iter().map(|m| f(m)).collect::<Vec<_>>());
    let (qci, lc, aic, gca) = (col(|m| m.qci as f64), col(|m| m.lc as f64), col(|m| m.aic), col(|m| m.gca));
    let stalled = rounds
        .iter()
        .filter(|(_, t, _)| t.termination == Some(Termination::Stalled))
        .count();
    if cfg.rounds > 1 {
        writeln!(
            human,
            "over {} rounds: learned categories {:.2} ± {:.2}, iterations {:.2} ± {:.2}, instances per category {:.2} ± {:.2}, accuracy {:.2}% ± {:.2}\n",
            cfg.rounds, lc.0, lc.1, qci.0, qci.1, aic.0, aic.1, 100.0 * gca.0, 100.0 * gca.1
        )?;
    }
    let kv = if cfg.rounds == 1 {
        all[0].to_key_values() + &format!("stalled={stalled}\n")
    } else {
        format!(
            "rounds={}\nqci_mean={}\nqci_sd={}\nlc_mean={}\nlc_sd={}\naic_mean={}\naic_sd={}\ngca_mean={}\ngca_sd={}\nstalled={stalled}\n",
            cfg.rounds, qci.0, qci.1, lc.0, lc.1, aic.0, aic.1, gca.0, gca.1
        )
    };
    say!("{human}{kv}");

    if let Some(path) = metrics {
        outputs.write(path, kv.as_bytes())?;
    }
    if let Some(dir) = report_dir {
        outputs.create_dir(dir)?;
        for (r, (m, trace, registry)) in rounds.iter().enumerate() {
            let sub = dir.join(format!("round{r}"));
            outputs.create_dir(&sub)?;
            outputs.write(&sub.join("trace.jsonl"), trace.to_jsonl().as_bytes())?;
            outputs.write(&sub.join("learning_curve.csv"), learning_curve_csv(trace)?.as_bytes())?;
            outputs.write(&sub.join("accuracy_curve.csv"), accuracy_curve_csv(trace)?.as_bytes())?;
            outputs.write(&sub.join("instances.csv"), instances_csv(registry)?.as_bytes())?;
            outputs.write(&sub.join("metrics.txt"), m.to_key_values().as_bytes())?;
        }
        outputs.write(&dir.join("summary.txt"), kv.as_bytes())?;
    }
    if let Some(path) = snapshot {
        let snap = ModelSnapshot::from_registry(&rounds[0].2, dict.as_ref());
        outputs.write(path, &snap.to_bytes())?;
    }
    Ok(())
}
