//! Flat `key = value` run configuration.
//!
//! ```text
//! # comment
//! dataset = data/music.bin
//! epochs = 50
//! eval_ks = 1,5,10,20
//! clip_norm = none
//! synth_n_users = 2000
//! ```
//!
//! Unknown keys are errors. Later assignments win, so command-line overrides
//! are applied by calling [`Config::set`] after [`Config::parse`].

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::synth::SynthSpec;
use crate::train::TrainConfig;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    pub train: TrainConfig,
    pub synth: SynthSpec,
    /// Seed for the sampled AUC negatives.
    pub eval_seed: u64,
    pub reviews: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
}

pub const KEYS: &[&str] = &[
    "dim",
    "heads",
    "max_long",
    "batch_size",
    "lambda",
    "epochs",
    "seed",
    "lr_initial",
    "lr_drop_fraction",
    "lr_after",
    "negatives",
    "reduction",
    "clip_norm",
    "variant",
    "eval_every",
    "eval_ks",
    "eval_seed",
    "reviews",
    "metadata",
    "dataset",
    "checkpoint",
    "metrics",
    "synth_n_users",
    "synth_n_items",
    "synth_n_categories",
    "synth_days",
    "synth_long_affinity_strength",
    "synth_recent_drift_probability",
    "synth_seed",
];

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

/// Split a config text into `(key, value)` pairs in file order.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected key = value", n + 1)));
        };
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", n + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut c = Config::default();
        for (k, v) in parse_pairs(text)? {
            c.set(&k, &v)?;
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Config::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        let s = &mut self.synth;
        let path = || Some(PathBuf::from(value));
        match key {
            "dim" => t.dim = num(key, value)?,
            "heads" => t.heads = num(key, value)?,
            "max_long" => t.max_long = num(key, value)?,
            "batch_size" => t.batch_size = num(key, value)?,
            "lambda" => t.lambda = num(key, value)?,
            "epochs" => t.epochs = num(key, value)?,
            "seed" => t.seed = num(key, value)?,
            "lr_initial" => t.lr_initial = num(key, value)?,
            "lr_drop_fraction" => t.lr_drop_fraction = num(key, value)?,
            "lr_after" => t.lr_after = num(key, value)?,
            "negatives" => t.negatives = num(key, value)?,
            "reduction" => t.reduction = value.parse()?,
            "clip_norm" => {
                t.clip_norm = match value {
                    "none" | "off" => None,
                    _ => Some(num(key, value)?),
                }
            }
            "variant" => t.variant = value.parse()?,
            "eval_every" => t.eval_every = num(key, value)?,
            "eval_ks" => {
                t.eval_ks = value
                    .split(',')
                    .map(|k| num(key, k.trim()))
                    .collect::<Result<Vec<usize>>>()?
            }
            "eval_seed" => self.eval_seed = num(key, value)?,
            "reviews" => self.reviews = path(),
            "metadata" => self.metadata = path(),
            "dataset" => self.dataset = path(),
            "checkpoint" => self.checkpoint = path(),
            "metrics" => self.metrics = path(),
            "synth_n_users" => s.n_users = num(key, value)?,
            "synth_n_items" => s.n_items = num(key, value)?,
            "synth_n_categories" => s.n_categories = num(key, value)?,
            "synth_days" => s.days = num(key, value)?,
            "synth_long_affinity_strength" => s.long_affinity_strength = num(key, value)?,
            "synth_recent_drift_probability" => s.recent_drift_probability = num(key, value)?,
            "synth_seed" => s.seed = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// `key=value` override from the command line.
    pub fn set_assignment(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got {assignment:?}")))?;
        self.set(k.trim(), v.trim())
    }

    /// Render every key, in a form [`Config::parse`] reads back.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let s = &self.synth;
        let p = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let ks: Vec<String> = t.eval_ks.iter().map(|k| k.to_string()).collect();
        let mut lines = vec![
            ("dim", t.dim.to_string()),
            ("heads", t.heads.to_string()),
            ("max_long", t.max_long.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("lambda", t.lambda.to_string()),
            ("epochs", t.epochs.to_string()),
            ("seed", t.seed.to_string()),
            ("lr_initial", t.lr_initial.to_string()),
            ("lr_drop_fraction", t.lr_drop_fraction.to_string()),
            ("lr_after", t.lr_after.to_string()),
            ("negatives", t.negatives.to_string()),
            ("reduction", t.reduction.to_string()),
            ("clip_norm", t.clip_norm.map_or("none".into(), |c| c.to_string())),
            ("variant", t.variant.to_string()),
            ("eval_every", t.eval_every.to_string()),
            ("eval_ks", ks.join(",")),
            ("eval_seed", self.eval_seed.to_string()),
            ("synth_n_users", s.n_users.to_string()),
            ("synth_n_items", s.n_items.to_string()),
            ("synth_n_categories", s.n_categories.to_string()),
            ("synth_days", s.days.to_string()),
            ("synth_long_affinity_strength", s.long_affinity_strength.to_string()),
            ("synth_recent_drift_probability", s.recent_drift_probability.to_string()),
            ("synth_seed", s.seed.to_string()),
        ];
        for (k, v) in [
            ("reviews", p(&self.reviews)),
            ("metadata", p(&self.metadata)),
            ("dataset", p(&self.dataset)),
            ("checkpoint", p(&self.checkpoint)),
            ("metrics", p(&self.metrics)),
        ] {
            if let Some(v) = v {
                lines.push((k, v));
            }
        }
        lines.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
