//! Settings shared by every command. Each field can come from a flag or from
//! the TOML file given with `--config`; flags win, then the file, then the
//! built-in defaults.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Args;
use localhdp::features::FeatureParams;
use localhdp::hdp::Hyperparams;
use localhdp::protocol::TeacherConfig;
use serde::{Deserialize, Serialize};

#[derive(Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    /// Random seed (dictionary, folds, teacher, category models)
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Maximum topics per category
    #[arg(long, global = true)]
    pub max_topics: Option<usize>,
    /// Tables per document
    #[arg(long, global = true)]
    pub max_tables: Option<usize>,
    /// Top-level stick concentration
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Document-level stick concentration
    #[arg(long, global = true)]
    pub alpha0: Option<f64>,
    /// Topic Dirichlet prior
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    /// Learning-rate offset
    #[arg(long, global = true)]
    pub tau0: Option<f64>,
    /// Learning-rate exponent, in (0.5, 1]
    #[arg(long, global = true)]
    pub kappa: Option<f64>,
    #[arg(long, global = true, hide = true)]
    pub doc_tol: Option<f64>,
    #[arg(long, global = true, hide = true)]
    pub doc_max_iters: Option<usize>,

    /// Keypoint voxel size
    #[arg(long, global = true)]
    pub voxel_size: Option<f64>,
    /// Spin-image width in bins
    #[arg(long, global = true)]
    pub image_width: Option<usize>,
    /// Spin-image support length
    #[arg(long, global = true)]
    pub support_length: Option<f64>,

    /// Window accuracy needed before the next category is introduced
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    /// Asks without progress before an open-ended run stops
    #[arg(long, global = true)]
    pub patience: Option<usize>,
    /// Views shown when a category is introduced
    #[arg(long, global = true)]
    pub teach_views: Option<usize>,
    #[arg(long, global = true, hide = true)]
    pub window_factor: Option<usize>,

    /// Cross-validation folds
    #[arg(long, global = true)]
    pub folds: Option<usize>,
    /// Cross-validation repetitions with fresh fold assignments
    #[arg(long, global = true)]
    pub permutations: Option<usize>,
    /// Independent open-ended experiments, run concurrently
    #[arg(long, global = true)]
    pub rounds: Option<usize>,
}

macro_rules! overlay {
    ($hi:expr, $lo:expr, $($field:ident),* $(,)?) => {
        Settings { $($field: $hi.$field.or($lo.$field)),* }
    };
}

impl Settings {
    /// Fields set in `self`, falling back to `lower`.
    pub fn over(&self, lower: &Settings) -> Settings {
        overlay!(
            self, lower, seed, max_topics, max_tables, gamma, alpha0, eta, tau0, kappa, doc_tol, doc_max_iters,
            voxel_size, image_width, support_length, tau, patience, teach_views, window_factor, folds,
            permutations, rounds,
        )
    }

    pub fn from_file(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| {
            let msg = e.message().replace('\n', " ");
            anyhow::anyhow!("config {}: {}", path.display(), msg.trim())
        })
    }
}

/// Fully resolved and validated settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub hyper: Hyperparams,
    pub features: FeatureParams,
    pub teacher: TeacherConfig,
    pub folds: usize,
    pub permutations: usize,
    pub rounds: usize,
}

impl RunConfig {
    pub fn resolve(s: &Settings) -> Result<Self> {
        let hd = Hyperparams::default();
        let fd = FeatureParams::default();
        let td = TeacherConfig::default();
        let seed = s.seed.unwrap_or(0);
        let cfg = RunConfig {
            seed,
            hyper: Hyperparams {
                max_topics: s.max_topics.unwrap_or(hd.max_topics),
                max_tables: s.max_tables.unwrap_or(hd.max_tables),
                gamma: s.gamma.unwrap_or(hd.gamma),
                alpha0: s.alpha0.unwrap_or(hd.alpha0),
                eta: s.eta.unwrap_or(hd.eta),
                tau0: s.tau0.unwrap_or(hd.tau0),
                kappa: s.kappa.unwrap_or(hd.kappa),
                doc_tol: s.doc_tol.unwrap_or(hd.doc_tol),
                doc_max_iters: s.doc_max_iters.unwrap_or(hd.doc_max_iters),
            },
            features: FeatureParams {
                voxel_size: s.voxel_size.unwrap_or(fd.voxel_size),
                image_width: s.image_width.unwrap_or(fd.image_width),
                support_length: s.support_length.unwrap_or(fd.support_length),
            },
            teacher: TeacherConfig {
                tau: s.tau.unwrap_or(td.tau),
                window_factor: s.window_factor.unwrap_or(td.window_factor),
                teach_views: s.teach_views.unwrap_or(td.teach_views),
                patience: s.patience.unwrap_or(td.patience),
                seed,
            },
            folds: s.folds.unwrap_or(10),
            permutations: s.permutations.unwrap_or(1),
            rounds: s.rounds.unwrap_or(1),
        };
        cfg.hyper.validate()?;
        cfg.features.validate()?;
        cfg.teacher.validate()?;
        if cfg.folds < 2 {
            bail!("configuration error: folds must be at least 2, got {}", cfg.folds);
        }
        if cfg.permutations == 0 {
            bail!("configuration error: permutations must be at least 1");
        }
        if cfg.rounds == 0 {
            bail!("configuration error: rounds must be at least 1");
        }
        Ok(cfg)
    }

    /// The effective settings as a config file.
    pub fn to_toml(&self) -> String {
        let s = Settings {
            seed: Some(self.seed),
            max_topics: Some(self.hyper.max_topics),
            max_tables: Some(self.hyper.max_tables),
            gamma: Some(self.hyper.gamma),
            alpha0: Some(self.hyper.alpha0),
            eta: Some(self.hyper.eta),
            tau0: Some(self.hyper.tau0),
            kappa: Some(self.hyper.kappa),
            doc_tol: Some(self.hyper.doc_tol),
            doc_max_iters: Some(self.hyper.doc_max_iters),
            voxel_size: Some(self.features.voxel_size),
            image_width: Some(self.features.image_width),
            support_length: Some(self.features.support_length),
            tau: Some(self.teacher.tau),
            patience: Some(self.teacher.patience),
            teach_views: Some(self.teacher.teach_views),
            window_factor: Some(self.teacher.window_factor),
            folds: Some(self.folds),
            permutations: Some(self.permutations),
            rounds: Some(self.rounds),
        };
        toml::to_string(&s).expect("settings serialize")
    }
}
