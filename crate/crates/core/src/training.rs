//! Supervised training with Adam at batch size 1, solution-rate evaluation
//! by exact simulation, and the iteration sweep driver.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use asymsat_autodiff::{adam_step, checkpoint::checkpoint_bytes, clip_grad_norm, AdamConfig, ParamStore, Tape};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::Assignment;
use crate::datagen::LabeledInstance;
use crate::model::{save_model, ModelConfig, ModelError, ModelParams, ModelSidecar};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("non-finite loss {loss} on instance {instance} (epoch {epoch})")]
    NonFiniteLoss { instance: usize, epoch: usize, loss: f64 },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, TrainError>;

/// Learning-rate schedule over the whole run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Half-cosine decay from `learning_rate` to zero over `epochs * instances` steps.
    Cosine,
}

impl LrSchedule {
    /// Rate for 0-based `step` out of `total` steps.
    pub fn rate(self, base: f64, step: usize, total: usize) -> f64 {
        match self {
            LrSchedule::Constant => base,
            LrSchedule::Cosine => {
                let frac = step as f64 / total.max(1) as f64;
                base * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub lr_schedule: LrSchedule,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    /// Seeds both parameter initialization and the per-epoch shuffle.
    pub seed: u64,
    /// Stop once the mean epoch loss falls below this value.
    pub early_stop_loss: f64,
    /// Clip the per-step gradient to this joint L2 norm; 0 disables clipping.
    pub grad_clip: f64,
    /// Also stop once every training instance is solved (checked after each epoch).
    pub stop_when_solved: bool,
    /// Write an intermediate checkpoint every this many epochs; 0 disables.
    pub checkpoint_every: usize,
    pub train_manifest: Option<PathBuf>,
    pub test_manifest: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            learning_rate: adam.lr,
            lr_schedule: LrSchedule::Constant,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.eps,
            epochs: 100,
            seed: 0,
            early_stop_loss: 1e-3,
            grad_clip: 0.0,
            stop_when_solved: false,
            checkpoint_every: 0,
            train_manifest: None,
            test_manifest: None,
            out_dir: None,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(TrainError::Config("learning_rate must be > 0".into()));
        }
        if !(self.grad_clip >= 0.0 && self.grad_clip.is_finite()) {
            return Err(TrainError::Config("grad_clip must be finite and >= 0".into()));
        }
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be >= 1".into()));
        }
        self.model.validate()?;
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.learning_rate, beta1: self.beta1, beta2: self.beta2, eps: self.epsilon }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Parameters after the last epoch.
    pub store: ParamStore,
    /// Parameters after the epoch with the lowest mean loss.
    pub best_store: ParamStore,
    pub best_epoch: usize,
    /// `(step, loss)` for every update.
    pub loss_curve: Vec<(usize, f64)>,
    pub epoch_losses: Vec<f64>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TrainError + '_ {
    move |source| TrainError::Io { path: path.to_path_buf(), source }
}

/// Trains a freshly initialized model. With `config.out_dir` set, writes
/// `final.ckpt`, `best.ckpt` (each with a sidecar), `loss.csv` and
/// `config.toml` there.
pub fn train(instances: &[LabeledInstance], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if instances.is_empty() {
        return Err(TrainError::EmptyTrainSet);
    }
    let (params, mut store) = ModelParams::init(config.model.clone(), config.seed)?;
    let mut adam = config.adam();
    let total_steps = config.epochs * instances.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x7368_7566_666c_65);
    let mut order: Vec<usize> = (0..instances.len()).collect();
    let mut loss_curve = Vec::new();
    let mut epoch_losses = Vec::new();
    let mut best = (f64::INFINITY, 0, store.clone());
    let sidecar = ModelSidecar { seed: config.seed, model: config.model.clone() };
    if let Some(dir) = &config.out_dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let p = dir.join("config.toml");
        std::fs::write(&p, config.to_toml()).map_err(io_err(&p))?;
    }

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let inst = &instances[i];
            let mut tape = Tape::new();
            let loss = params.loss(&mut tape, &store, &inst.circuit, &inst.label)?;
            let lv = tape.value(loss).data()[0];
            if !lv.is_finite() {
                return Err(TrainError::NonFiniteLoss { instance: i, epoch, loss: lv });
            }
            tape.backward(loss, &mut store).map_err(ModelError::from)?;
            if config.grad_clip > 0.0 {
                clip_grad_norm(&mut store, config.grad_clip);
            }
            adam.lr = config.lr_schedule.rate(config.learning_rate, loss_curve.len(), total_steps);
            adam_step(&mut store, &adam).map_err(ModelError::from)?;
            loss_curve.push((loss_curve.len(), lv));
            total += lv;
        }
        let mean = total / instances.len() as f64;
        epoch_losses.push(mean);
        log::info!("epoch {epoch}: mean loss {mean:.6}");
        if mean < best.0 {
            best = (mean, epoch, store.clone());
        }
        if let Some(dir) = &config.out_dir {
            if config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0 {
                save_model(&dir.join(format!("epoch{:04}.ckpt", epoch + 1)), &store, &sidecar)?;
            }
        }
        if mean < config.early_stop_loss {
            break;
        }
        if config.stop_when_solved && evaluate_solution_rate(&params, &store, instances, 1)?.solved == instances.len() {
            break;
        }
    }

    if let Some(dir) = &config.out_dir {
        save_model(&dir.join("final.ckpt"), &store, &sidecar)?;
        save_model(&dir.join("best.ckpt"), &best.2, &sidecar)?;
        let p = dir.join("loss.csv");
        std::fs::write(&p, loss_csv(&loss_curve)).map_err(io_err(&p))?;
    }
    Ok(TrainOutcome { params, store, best_store: best.2, best_epoch: best.1, loss_curve, epoch_losses })
}

pub fn loss_csv(curve: &[(usize, f64)]) -> String {
    let mut s = String::from("step,loss\n");
    for (step, l) in curve {
        let _ = writeln!(s, "{step},{l}");
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub n: usize,
    pub solved: usize,
    pub total: usize,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub buckets: Vec<Bucket>,
    pub solved: usize,
    pub total: usize,
    pub rate: f64,
    pub runtime_secs: f64,
    /// Hash of the model config and parameter bytes; empty when no model was involved.
    pub fingerprint: String,
    /// Per-instance verdicts in dataset order.
    pub outcomes: Vec<bool>,
}

impl EvalReport {
    /// Equality of everything except the wall-clock runtime.
    pub fn same_outcome(&self, other: &EvalReport) -> bool {
        EvalReport { runtime_secs: 0.0, ..self.clone() } == EvalReport { runtime_secs: 0.0, ..other.clone() }
    }

    /// One JSON record per bucket followed by a total record.
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for b in &self.buckets {
            let rec = serde_json::json!({"kind": "bucket", "n": b.n, "solved": b.solved, "total": b.total, "rate": b.rate});
            let _ = writeln!(s, "{rec}");
        }
        let rec = serde_json::json!({
            "kind": "total", "solved": self.solved, "total": self.total, "rate": self.rate,
            "runtime_secs": self.runtime_secs, "fingerprint": self.fingerprint,
        });
        let _ = writeln!(s, "{rec}");
        s
    }

    pub fn table(&self) -> String {
        let mut s = String::from("    n   solved    total     rate\n");
        for b in &self.buckets {
            let _ = writeln!(s, "{:>5} {:>8} {:>8} {:>7.2}%", b.n, b.solved, b.total, 100.0 * b.rate);
        }
        let _ = writeln!(s, "  all {:>8} {:>8} {:>7.2}%", self.solved, self.total, 100.0 * self.rate);
        s
    }
}

fn rate(solved: usize, total: usize) -> f64 {
    if total == 0 { 0.0 } else { solved as f64 / total as f64 }
}

/// FNV-1a, used only to label reports with the model they came from.
fn fnv1a(chunks: &[&[u8]]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for c in chunks {
        for &b in *c {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

pub fn fingerprint(config: &ModelConfig, store: &ParamStore) -> String {
    let cfg = serde_json::to_vec(config).expect("config serializes");
    fnv1a(&[&cfg, &checkpoint_bytes(store)])
}

/// Scores arbitrary predictions: an instance counts as solved iff the
/// circuit evaluates to 1 under the predicted assignment. Work is split into
/// `jobs` contiguous chunks run on scoped threads.
pub fn evaluate_with<F>(instances: &[LabeledInstance], jobs: usize, predict: F) -> Result<EvalReport>
where
    F: Fn(&LabeledInstance) -> Result<Assignment> + Sync,
{
    let start = Instant::now();
    let jobs = jobs.max(1).min(instances.len().max(1));
    let chunk = instances.len().div_ceil(jobs).max(1);
    let score = |part: &[LabeledInstance]| -> Result<Vec<bool>> {
        part.iter()
            .map(|inst| Ok(inst.circuit.evaluate(&predict(inst)?).unwrap_or(false)))
            .collect()
    };
    let outcomes: Vec<bool> = if jobs == 1 {
        score(instances)?
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = instances.chunks(chunk).map(|part| s.spawn(move || score(part))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("evaluation worker panicked"))
                .collect::<Result<Vec<_>>>()
                .map(|v| v.concat())
        })?
    };
    let mut per_n: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (inst, &ok) in instances.iter().zip(&outcomes) {
        let e = per_n.entry(inst.n).or_default();
        e.0 += ok as usize;
        e.1 += 1;
    }
    let buckets = per_n
        .into_iter()
        .map(|(n, (solved, total))| Bucket { n, solved, total, rate: rate(solved, total) })
        .collect();
    let solved = outcomes.iter().filter(|&&o| o).count();
    Ok(EvalReport {
        buckets,
        solved,
        total: instances.len(),
        rate: rate(solved, instances.len()),
        runtime_secs: start.elapsed().as_secs_f64(),
        fingerprint: String::new(),
        outcomes,
    })
}

pub fn evaluate_solution_rate(
    params: &ModelParams,
    store: &ParamStore,
    instances: &[LabeledInstance],
    jobs: usize,
) -> Result<EvalReport> {
    let mut r = evaluate_with(instances, jobs, |inst| Ok(params.predict_assignment(store, &inst.circuit)?.0))?;
    r.fingerprint = fingerprint(&params.config, store);
    Ok(r)
}

#[derive(Clone, Debug)]
pub struct SweepRow {
    pub iterations: usize,
    pub report: EvalReport,
}

/// Trains and evaluates one model per iteration count, everything else fixed.
pub fn iteration_sweep(
    train_set: &[LabeledInstance],
    test_set: &[LabeledInstance],
    base: &TrainConfig,
    iterations: &[usize],
    jobs: usize,
) -> Result<Vec<SweepRow>> {
    if iterations.is_empty() {
        return Err(TrainError::Config("iteration list is empty".into()));
    }
    iterations
        .iter()
        .map(|&t| {
            let mut cfg = base.clone();
            cfg.model.iterations = t;
            cfg.out_dir = base.out_dir.as_ref().map(|d| d.join(format!("t{t}")));
            let out = train(train_set, &cfg)?;
            let report = evaluate_solution_rate(&out.params, &out.store, test_set, jobs)?;
            Ok(SweepRow { iterations: t, report })
        })
        .collect()
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut s = String::from("iterations  solution rate\n");
    for r in rows {
        let _ = writeln!(s, "{:>10}  {:>12.2}%", r.iterations, 100.0 * r.report.rate);
    }
    s
}
