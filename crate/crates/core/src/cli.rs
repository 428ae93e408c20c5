//! `tlsan` command line.
//!
//! ```text
//! tlsan synth     --reviews r.json --meta m.json [--users N --items N --categories N --drift P --seed S]
//! tlsan prep      --reviews r.json --meta m.json --out d.bin [--tsv d.tsv]
//! tlsan train     --dataset d.bin --checkpoint c.bin [--metrics m.csv --epochs N --variant ns]
//! tlsan eval      --dataset d.bin --checkpoint c.bin [--csv report.csv]
//! tlsan recommend --dataset d.bin --checkpoint c.bin --user A0000001 [-k 10]
//! tlsan gradcheck [--seed 7] [--kink-free]
//! ```
//!
//! Every subcommand accepts `--config FILE` (flat `key = value`) and
//! repeated `--set key=value`; explicit flags override both.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::codec::write_atomic;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::eval::{evaluate, popularity_baseline, rank_catalog, EvalConfig, ModelScorer};
use crate::ingest::{build_serving_example, prepare, Dataset};
use crate::model::{checkpoint, ModelParams, Variant};
use crate::synth::generate_synthetic;
use crate::train::{grad_check, train, GradCheckConfig, TrainOutputs};

const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Parser, Debug)]
#[command(name = "tlsan", version, about = "Time-aware long/short-term attention recommender")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Filter raw logs and write the prepared dataset.
    Prep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        reviews: Option<PathBuf>,
        #[arg(long)]
        meta: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also dump the dataset as TSV.
        #[arg(long)]
        tsv: Option<PathBuf>,
        #[arg(long)]
        max_long: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate a synthetic review log with planted structure.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        reviews: Option<PathBuf>,
        #[arg(long)]
        meta: Option<PathBuf>,
        /// Write the planted per-user structure as JSON.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        items: Option<usize>,
        #[arg(long)]
        categories: Option<usize>,
        #[arg(long)]
        days: Option<usize>,
        #[arg(long)]
        affinity: Option<f64>,
        #[arg(long)]
        drift: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train and write a checkpoint plus metrics CSV.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        variant: Option<Variant>,
    },
    /// Evaluate a checkpoint on the test split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Write the report as a CSV header and row.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Comma-separated K values.
        #[arg(long)]
        ks: Option<String>,
    },
    /// Top-K items for one user, by external id.
    Recommend {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        user: String,
        #[arg(short, long, default_value_t = 10)]
        k: usize,
    },
    /// Compare analytic and finite-difference gradients.
    Gradcheck {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Keep ReLU inputs away from 0 and use a five-point stencil.
        #[arg(long)]
        kink_free: bool,
        #[arg(long, default_value_t = Variant::Full)]
        variant: Variant,
    },
}

fn load_config(common: &Common, flags: &[(&str, Option<String>)]) -> Result<Config> {
    let mut c = match &common.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    for a in &common.set {
        c.set_assignment(a)?;
    }
    for (k, v) in flags {
        if let Some(v) = v {
            c.set(k, v)?;
        }
    }
    Ok(c)
}

fn s<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(|v| v.to_string())
}

fn p(v: &Option<PathBuf>) -> Option<String> {
    v.as_ref().map(|v| v.display().to_string())
}

fn need<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::Config(format!("missing {key} (flag or config key)")))
}

fn existing<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    let path = need(path, key)?;
    if !path.exists() {
        return Err(Error::Config(format!("{key} {} does not exist", path.display())));
    }
    Ok(path)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn load_model(dataset: &Dataset, path: &Path) -> Result<ModelParams> {
    let params = checkpoint::load(path)?;
    let h = &params.hyper;
    if (h.n_users, h.n_items, h.n_categories, h.max_long)
        != (dataset.n_users(), dataset.n_items(), dataset.n_categories(), dataset.manifest.max_long)
    {
        return Err(Error::Shape(format!(
            "checkpoint built for {} users / {} items / {} categories / {} slots, dataset has {} / {} / {} / {}",
            h.n_users,
            h.n_items,
            h.n_categories,
            h.max_long,
            dataset.n_users(),
            dataset.n_items(),
            dataset.n_categories(),
            dataset.manifest.max_long
        )));
    }
    Ok(params)
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Prep { common, reviews, meta, out: dest, tsv, max_long, seed } => {
            let c = load_config(
                &common,
                &[("reviews", p(&reviews)), ("metadata", p(&meta)), ("dataset", p(&dest)), ("max_long", s(&max_long)), ("seed", s(&seed))],
            )?;
            let reviews = existing(&c.reviews, "reviews")?;
            let meta = existing(&c.metadata, "metadata")?;
            let dest = need(&c.dataset, "dataset")?;
            let ds = prepare(open(reviews)?, open(meta)?, c.train.max_long, c.train.seed)?;
            ds.write(dest)?;
            let manifest = serde_json::to_vec_pretty(&ds.manifest)?;
            write_atomic(&dest.with_extension("manifest.json"), &manifest)?;
            if let Some(t) = tsv {
                write_atomic(&t, ds.to_tsv().as_bytes())?;
            }
            let m = &ds.manifest;
            writeln!(out, "users       {}", m.n_users)?;
            writeln!(out, "items       {}", m.n_items)?;
            writeln!(out, "categories  {}", m.n_categories)?;
            writeln!(out, "samples     {}", m.n_samples)?;
            writeln!(out, "train       {}", m.n_train)?;
            writeln!(out, "test        {}", m.n_test)?;
            writeln!(out, "excluded    {}", m.excluded_users)?;
            Ok(0)
        }
        Command::Synth { common, reviews, meta, truth, users, items, categories, days, affinity, drift, seed } => {
            let c = load_config(
                &common,
                &[
                    ("reviews", p(&reviews)),
                    ("metadata", p(&meta)),
                    ("synth_n_users", s(&users)),
                    ("synth_n_items", s(&items)),
                    ("synth_n_categories", s(&categories)),
                    ("synth_days", s(&days)),
                    ("synth_long_affinity_strength", s(&affinity)),
                    ("synth_recent_drift_probability", s(&drift)),
                    ("synth_seed", s(&seed)),
                ],
            )?;
            let reviews = need(&c.reviews, "reviews")?;
            let meta = need(&c.metadata, "metadata")?;
            let data = generate_synthetic(&c.synth)?;
            data.write(reviews, meta)?;
            if let Some(t) = truth {
                write_atomic(&t, &serde_json::to_vec_pretty(&data.users)?)?;
            }
            writeln!(out, "reviews     {}", data.reviews.iter().filter(|&&b| b == b'\n').count())?;
            writeln!(out, "users       {}", c.synth.n_users)?;
            writeln!(out, "items       {}", c.synth.n_items)?;
            writeln!(out, "categories  {}", c.synth.n_categories)?;
            Ok(0)
        }
        Command::Train { common, dataset, checkpoint, metrics, epochs, seed, variant } => {
            let c = load_config(
                &common,
                &[
                    ("dataset", p(&dataset)),
                    ("checkpoint", p(&checkpoint)),
                    ("metrics", p(&metrics)),
                    ("epochs", s(&epochs)),
                    ("seed", s(&seed)),
                    ("variant", s(&variant)),
                ],
            )?;
            let ds = Dataset::read(existing(&c.dataset, "dataset")?)?;
            let outputs = TrainOutputs {
                checkpoint: Some(need(&c.checkpoint, "checkpoint")?.to_path_buf()),
                metrics: c.metrics.clone(),
            };
            let (_, report) = train(&ds, &c.train, &outputs)?;
            writeln!(out, "steps       {}", report.steps.len())?;
            if let Some(l) = report.final_epoch_loss() {
                writeln!(out, "final loss  {l:.6}")?;
            }
            if let Some(e) = report.evals.last() {
                writeln!(out, "test AUC    {:.4}", e.report.auc)?;
            }
            writeln!(out, "seconds     {:.1}", report.wall_clock_secs)?;
            Ok(0)
        }
        Command::Eval { common, dataset, checkpoint, csv, ks } => {
            let c = load_config(
                &common,
                &[("dataset", p(&dataset)), ("checkpoint", p(&checkpoint)), ("eval_ks", ks)],
            )?;
            let ds = Dataset::read(existing(&c.dataset, "dataset")?)?;
            let params = load_model(&ds, existing(&c.checkpoint, "checkpoint")?)?;
            let config = EvalConfig {
                ks: c.train.eval_ks.clone(),
                seed: c.eval_seed,
            };
            let scorer = ModelScorer {
                params: &params,
                item_categories: &ds.item_categories,
            };
            let report = evaluate(&ds.test, &scorer, &ds, &config)?;
            let pop = popularity_baseline(&ds.training_histories(), ds.n_items());
            let reference = evaluate(&ds.test, &pop, &ds, &config)?;
            write!(out, "{}", report.table())?;
            writeln!(out, "{}", report.csv_header())?;
            writeln!(out, "{}", report.csv_row())?;
            let k = c.train.report_k();
            let r = reference.at(k).map_or(0.0, |a| a.recall);
            writeln!(out, "popularity  AUC {:.4}  Recall@{k} {r:.4}", reference.auc)?;
            if let Some(path) = csv {
                let text = format!("{}\n{}\n", report.csv_header(), report.csv_row());
                write_atomic(&path, text.as_bytes())?;
            }
            Ok(0)
        }
        Command::Recommend { common, dataset, checkpoint, user, k } => {
            let c = load_config(&common, &[("dataset", p(&dataset)), ("checkpoint", p(&checkpoint))])?;
            let ds = Dataset::read(existing(&c.dataset, "dataset")?)?;
            let params = load_model(&ds, existing(&c.checkpoint, "checkpoint")?)?;
            let idx = ds
                .manifest
                .users
                .iter()
                .position(|u| *u == user)
                .ok_or_else(|| Error::Config(format!("unknown user {user:?}")))?;
            let example = build_serving_example(&ds.histories[idx], ds.manifest.max_long)
                .ok_or_else(|| Error::Config(format!("user {user:?} has no history")))?;
            for (item, score) in rank_catalog(&example, &params, &ds.item_categories, k)? {
                writeln!(out, "{}\t{score:.6}", ds.manifest.items[item])?;
            }
            Ok(0)
        }
        Command::Gradcheck { seed, kink_free, variant } => {
            let mut config = if kink_free { GradCheckConfig::kink_free() } else { GradCheckConfig::default() };
            config.variant = variant;
            let report = grad_check(&config, seed)?;
            write!(out, "{}", report.table())?;
            let ok = report.passed(GRADCHECK_TOLERANCE);
            writeln!(out, "max relative error {:.3e} ({})", report.max_rel_error(), if ok { "ok" } else { "FAILED" })?;
            Ok(if ok { 0 } else { 1 })
        }
    }
}

/// Run with `argv` (program name first), writing normal output to `out`.
/// Returns the process exit code.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("TLSAN_LOG", "warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout().lock())
}
