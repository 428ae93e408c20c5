//! Mini-batch SGD over per-epoch resampled training examples.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::backward::backward;
use super::config::{Reduction, TrainConfig};
use super::gradients::Gradients;
use super::loss::{add_l2_gradient, l2_penalty, sample_loss, score_gradient};
use super::sgd::sgd_step;
use crate::codec::write_atomic;
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalConfig, EvalReport, ModelScorer};
use crate::ingest::{build_train_example, sample_negative, Dataset, Example, ItemRef};
use crate::model::{checkpoint, forward, HyperParams, ModelParams};

/// Examples handled by one parallel task; fixed so the reduction order does
/// not depend on the thread count.
const CHUNK: usize = 4;

pub const METRICS_HEADER: &str = "step,epoch,lr,loss,auc,p_at_k,r_at_k";

/// A training example with its labelled candidates (target first).
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub example: Example,
    pub candidates: Vec<(ItemRef, bool)>,
}

/// Forward and backward for one observation. Returns the `(score, label)`
/// pairs and accumulates the data gradient into `grads`.
pub fn observation_gradients(obs: &Observation, params: &ModelParams, grads: &mut Gradients) -> Result<Vec<(f64, bool)>> {
    let refs: Vec<ItemRef> = obs.candidates.iter().map(|c| c.0).collect();
    let (scores, cache) = forward(&obs.example, &refs, params)?;
    let dscores: Vec<(ItemRef, f64)> = obs
        .candidates
        .iter()
        .zip(&scores)
        .map(|(&(c, y), &s)| (c, score_gradient(s, y)))
        .collect();
    backward(&cache, &dscores, params, grads)?;
    Ok(scores.into_iter().zip(obs.candidates.iter().map(|c| c.1)).collect())
}

/// Data gradient and samples of a whole batch, computed in parallel and
/// reduced in batch order. Each observation's gradient is formed on its own
/// before being added, so a repeated observation adds exactly the same
/// amount twice.
pub fn batch_gradients(batch: &[Observation], params: &ModelParams) -> Result<(Gradients, Vec<(f64, bool)>)> {
    let parts = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = Gradients::new(&params.hyper);
            let mut one = Gradients::new(&params.hyper);
            let mut samples = Vec::new();
            for obs in chunk {
                one.clear();
                samples.extend(observation_gradients(obs, params, &mut one)?);
                g.accumulate(&one);
            }
            Ok((g, samples))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut grads = Gradients::new(&params.hyper);
    let mut samples = Vec::with_capacity(batch.len() * 2);
    for (g, s) in parts {
        grads.accumulate(&g);
        samples.extend(s);
    }
    Ok((grads, samples))
}

/// One SGD step on a batch; returns the batch objective (reduced data loss
/// plus L2 on the touched rows) evaluated before the update.
pub fn train_step(
    params: &mut ModelParams,
    batch: &[Observation],
    lambda: f64,
    lr: f64,
    reduction: Reduction,
    clip_norm: Option<f64>,
) -> Result<StepLoss> {
    let (mut grads, samples) = batch_gradients(batch, params)?;
    let data: f64 = samples.iter().map(|&(s, y)| sample_loss(s, y)).sum();
    let factor = match reduction {
        Reduction::Mean => 1.0 / batch.len().max(1) as f64,
        Reduction::Sum => 1.0,
    };
    if factor != 1.0 {
        grads.scale(factor);
    }
    let total = factor * data + l2_penalty(params, &grads, lambda);
    if !total.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    add_l2_gradient(&mut grads, params, lambda);
    if let Some(c) = clip_norm {
        let norm = grads.global_norm();
        if norm > c {
            grads.scale(c / norm);
        }
    }
    sgd_step(params, &grads, lr)?;
    Ok(StepLoss {
        total,
        data,
        samples: samples.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLoss {
    /// Reduced data loss plus the L2 term (the minimized objective).
    pub total: f64,
    /// Summed sample losses only.
    pub data: f64,
    pub samples: usize,
}

impl StepLoss {
    /// Mean per-sample data loss.
    pub fn mean(&self) -> f64 {
        self.data / self.samples.max(1) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub lr: f64,
    pub loss: StepLoss,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub step: usize,
    pub epoch: usize,
    pub report: EvalReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub steps: Vec<StepRecord>,
    pub evals: Vec<EvalRecord>,
    /// Mean per-sample data loss of every epoch.
    pub epoch_loss: Vec<f64>,
    pub wall_clock_secs: f64,
    pub checkpoint: Option<PathBuf>,
}

impl TrainReport {
    pub fn final_epoch_loss(&self) -> Option<f64> {
        self.epoch_loss.last().copied()
    }

    /// Mean per-sample loss over the last `window` steps.
    pub fn trailing_loss(&self, window: usize) -> Option<f64> {
        let n = self.steps.len().min(window);
        if n == 0 {
            return None;
        }
        let tail = &self.steps[self.steps.len() - n..];
        Some(tail.iter().map(|s| s.loss.mean()).sum::<f64>() / n as f64)
    }

    /// Metrics stream; eval columns are empty except on eval steps.
    pub fn metrics_csv(&self, k: usize) -> String {
        let mut out = String::from(METRICS_HEADER);
        out.push('\n');
        for s in &self.steps {
            let _ = write!(out, "{},{},{},{:.9}", s.step, s.epoch, s.lr, s.loss.total);
            match self.evals.iter().find(|e| e.step == s.step) {
                Some(e) => {
                    let at = e.report.at(k);
                    let _ = writeln!(
                        out,
                        ",{:.6},{},{}",
                        e.report.auc,
                        at.map_or(String::new(), |a| format!("{:.6}", a.precision)),
                        at.map_or(String::new(), |a| format!("{:.6}", a.recall)),
                    );
                }
                None => out.push_str(",,,\n"),
            }
        }
        out
    }
}

/// Where training artifacts go. Both are optional.
#[derive(Clone, Debug, Default)]
pub struct TrainOutputs {
    pub checkpoint: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
}

pub fn hyper_for(dataset: &Dataset, config: &TrainConfig) -> HyperParams {
    HyperParams {
        dim: config.dim,
        max_long: config.max_long,
        heads: config.heads,
        n_users: dataset.n_users(),
        n_items: dataset.n_items(),
        n_categories: dataset.n_categories(),
        variant: config.variant,
    }
}

/// Users that can produce a training example.
fn trainable_users(dataset: &Dataset) -> Vec<usize> {
    dataset
        .histories
        .iter()
        .filter(|h| h.sessions.len() >= 2)
        .map(|h| h.user)
        .collect()
}

/// Resample one epoch of observations in shuffled user order.
fn draw_epoch(
    dataset: &Dataset,
    users: &mut [usize],
    item_sets: &[Vec<usize>],
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<Observation> {
    users.shuffle(rng);
    let n_items = dataset.n_items();
    let mut out = Vec::with_capacity(users.len());
    for &u in users.iter() {
        let Some(example) = build_train_example(&dataset.histories[u], config.max_long, rng) else {
            continue;
        };
        if example.short_items.is_empty() && example.long_items.is_empty() {
            log::debug!("user {u}: empty context, skipped this epoch");
            continue;
        }
        let mut candidates = vec![(example.target, true)];
        if item_sets[u].len() < n_items {
            for _ in 0..config.negatives {
                let j = sample_negative(rng, &item_sets[u], n_items);
                candidates.push((dataset.item_ref(j), false));
            }
        }
        out.push(Observation { example, candidates });
    }
    out
}

fn run_eval(dataset: &Dataset, params: &ModelParams, config: &TrainConfig) -> Result<Option<EvalReport>> {
    let examples = if dataset.test.is_empty() { &dataset.train } else { &dataset.test };
    if examples.is_empty() {
        return Ok(None);
    }
    let scorer = ModelScorer {
        params,
        item_categories: &dataset.item_categories,
    };
    let eval_config = EvalConfig {
        ks: config.eval_ks.clone(),
        seed: config.seed,
    };
    evaluate(examples, &scorer, dataset, &eval_config).map(Some)
}

fn write_outputs(params: &ModelParams, report: &TrainReport, config: &TrainConfig, outputs: &TrainOutputs) -> Result<()> {
    if let Some(path) = &outputs.checkpoint {
        checkpoint::save(params, path)?;
    }
    if let Some(path) = &outputs.metrics {
        write_atomic(path, report.metrics_csv(config.report_k()).as_bytes())?;
    }
    Ok(())
}

/// Train from freshly initialized parameters.
pub fn train(dataset: &Dataset, config: &TrainConfig, outputs: &TrainOutputs) -> Result<(ModelParams, TrainReport)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let params = ModelParams::init(hyper_for(dataset, config), &mut rng)?;
    train_from(dataset, config, outputs, params, &mut rng)
}

/// Train starting from `params`, drawing all randomness from `rng`.
pub fn train_from(
    dataset: &Dataset,
    config: &TrainConfig,
    outputs: &TrainOutputs,
    mut params: ModelParams,
    rng: &mut ChaCha8Rng,
) -> Result<(ModelParams, TrainReport)> {
    config.validate()?;
    if config.max_long != dataset.manifest.max_long {
        return Err(Error::Config(format!(
            "max_long {} differs from the dataset's {}",
            config.max_long, dataset.manifest.max_long
        )));
    }
    if params.hyper != hyper_for(dataset, config) {
        return Err(Error::Config("parameters do not match the dataset and config".into()));
    }
    let start = Instant::now();
    let mut users = trainable_users(dataset);
    if users.is_empty() {
        return Err(Error::Config("no trainable users in dataset".into()));
    }
    let item_sets: Vec<Vec<usize>> = dataset.histories.iter().map(|h| h.item_set()).collect();
    let total = config.planned_steps(users.len());
    log::info!(
        "training {} users, {} epochs, {total} steps, variant {}",
        users.len(),
        config.epochs,
        config.variant
    );

    let mut report = TrainReport {
        steps: Vec::with_capacity(total),
        evals: Vec::new(),
        epoch_loss: Vec::with_capacity(config.epochs),
        wall_clock_secs: 0.0,
        checkpoint: outputs.checkpoint.clone(),
    };
    let mut step = 0;
    for epoch in 0..config.epochs {
        let observations = draw_epoch(dataset, &mut users, &item_sets, config, rng);
        let (mut data, mut samples) = (0.0, 0usize);
        for batch in observations.chunks(config.batch_size) {
            let lr = config.lr_at(step, total);
            let loss = match train_step(&mut params, batch, config.lambda, lr, config.reduction, config.clip_norm) {
                Ok(l) => l,
                Err(Error::NonFinite(what)) => {
                    log::error!("non-finite {what} at step {step}; keeping last good parameters");
                    report.wall_clock_secs = start.elapsed().as_secs_f64();
                    write_outputs(&params, &report, config, outputs)?;
                    return Err(Error::Diverged { step });
                }
                Err(e) => return Err(e),
            };
            data += loss.data;
            samples += loss.samples;
            report.steps.push(StepRecord { step, epoch, lr, loss });
            step += 1;
        }
        let mean = data / samples.max(1) as f64;
        report.epoch_loss.push(mean);
        log::debug!("epoch {epoch}: mean loss {mean:.6}");

        let last = epoch + 1 == config.epochs;
        let due = config.eval_every > 0 && (epoch + 1) % config.eval_every == 0;
        if (due || last) && step > 0 {
            if let Some(r) = run_eval(dataset, &params, config)? {
                log::info!("epoch {epoch}: auc {:.4}", r.auc);
                report.evals.push(EvalRecord {
                    step: step - 1,
                    epoch,
                    report: r,
                });
            }
        }
    }
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    write_outputs(&params, &report, config, outputs)?;
    Ok((params, report))
}
