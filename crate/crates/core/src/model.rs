//! The AsymSAT network: DAG message passing over the circuit followed by a
//! bidirectional recurrent decoder over the input nodes, plus the concurrent
//! per-node decoder used as an ablation.
//!
//! One iteration is a forward pass in topological order followed by a
//! backward pass in reverse order. When a node is visited, the messages of
//! its neighbors (predecessors going forward, successors going backward) are
//! aggregated and fed to a GRU together with the node's previous state.
//! A node's message is recomputed right after its own update, so later nodes
//! in the same pass see the fresh value.

use std::path::Path;

use asymsat_autodiff::{
    AdError, GruCell, LstmCell, Mlp, Activation, ParamStore, Tape, Tensor, Var,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Assignment, Circuit, CircuitError, NodeId, NodeKind};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Autodiff(#[from] AdError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("decoder needs at least one input state")]
    EmptySequence,
    #[error("label covers {found} inputs, circuit has {expected}")]
    LabelDomain { expected: usize, found: usize },
    #[error("{path}: {message}")]
    File { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    Lstm,
    Gru,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    Sum,
    Mean,
}

/// Which GRU argument carries what.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Wiring {
    /// The node's previous state (or type vector) is the cell input and the
    /// aggregated message is the recurrent state.
    AggregateAsState,
    /// The aggregated message is the cell input and the node's previous state
    /// is the recurrent state; the type vector is zero-padded to `d`.
    AggregateAsInput,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    pub iterations: usize,
    pub decoder_kind: DecoderKind,
    pub decoder_dim: usize,
    pub aggregator: Aggregator,
    pub message_hidden: usize,
    /// Hidden width of the selector MLP; 0 means `2 * decoder_dim`.
    pub selector_hidden: usize,
    pub threshold: f64,
    pub ablation_concurrent: bool,
    pub wiring: Wiring,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 64,
            iterations: 10,
            decoder_kind: DecoderKind::Lstm,
            decoder_dim: 10,
            aggregator: Aggregator::Sum,
            message_hidden: 64,
            selector_hidden: 0,
            threshold: 0.5,
            ablation_concurrent: false,
            wiring: Wiring::AggregateAsState,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ModelError::Config(m.to_string()));
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be >= 1");
        }
        if self.iterations == 0 {
            return bad("iterations must be >= 1");
        }
        if self.decoder_dim == 0 {
            return bad("decoder_dim must be >= 1");
        }
        if self.message_hidden == 0 {
            return bad("message_hidden must be >= 1");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie in (0, 1)");
        }
        if self.wiring == Wiring::AggregateAsInput && self.hidden_dim < NodeKind::COUNT {
            return bad("aggregate-as-input wiring needs hidden_dim >= 3");
        }
        Ok(())
    }

    pub fn selector_width(&self) -> usize {
        if self.selector_hidden == 0 { 2 * self.decoder_dim } else { self.selector_hidden }
    }
}

#[derive(Clone, Debug)]
enum Recurrent {
    Lstm(LstmCell),
    Gru(GruCell),
}

impl Recurrent {
    fn new(kind: DecoderKind, store: &mut ParamStore, name: &str, i: usize, d: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(match kind {
            DecoderKind::Lstm => Recurrent::Lstm(LstmCell::new(store, name, i, d, rng)?),
            DecoderKind::Gru => Recurrent::Gru(GruCell::new(store, name, i, d, rng)?),
        })
    }

    /// Runs the cell over `xs` from a zero state and returns every output.
    fn run(&self, tape: &mut Tape, store: &ParamStore, xs: impl Iterator<Item = Var>, d: usize) -> Result<Vec<Var>> {
        let mut out = Vec::new();
        match self {
            Recurrent::Lstm(cell) => {
                let mut state = (tape.constant(Tensor::zeros(d, 1)), tape.constant(Tensor::zeros(d, 1)));
                for x in xs {
                    state = cell.forward(tape, store, x, state)?;
                    out.push(state.0);
                }
            }
            Recurrent::Gru(cell) => {
                let mut h = tape.constant(Tensor::zeros(d, 1));
                for x in xs {
                    h = cell.forward(tape, store, x, h)?;
                    out.push(h);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug)]
enum Head {
    Sequential { forward: Recurrent, backward: Recurrent, selector: Mlp },
    Concurrent(Mlp),
}

/// Layer handles; the values live in the accompanying [`ParamStore`].
#[derive(Clone, Debug)]
pub struct ModelParams {
    pub config: ModelConfig,
    gru_init: GruCell,
    gru_f: GruCell,
    gru_b: GruCell,
    msg: Mlp,
    head: Head,
}

/// One node update, recorded when tracing is enabled.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    /// 0-based pass index; even passes run forward, odd passes backward.
    pub pass: usize,
    pub node: NodeId,
    /// Neighbors whose messages were aggregated, in aggregation order.
    pub neighbors: Vec<NodeId>,
    /// For each neighbor, whether its message was already refreshed in this pass.
    pub fresh: Vec<bool>,
}

impl ModelParams {
    pub fn new(config: ModelConfig, store: &mut ParamStore, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.hidden_dim;
        let init_in = match config.wiring {
            Wiring::AggregateAsState => NodeKind::COUNT,
            Wiring::AggregateAsInput => d,
        };
        let gru_init = GruCell::new(store, "gru_init", init_in, d, &mut rng)?;
        let gru_f = GruCell::new(store, "gru_f", d, d, &mut rng)?;
        let gru_b = GruCell::new(store, "gru_b", d, d, &mut rng)?;
        let msg = Mlp::new(
            store,
            "msg",
            &[d, config.message_hidden, d],
            &[Activation::Tanh, Activation::Tanh],
            &mut rng,
        )?;
        let dd = config.decoder_dim;
        let sw = config.selector_width();
        let head = if config.ablation_concurrent {
            Head::Concurrent(Mlp::new(store, "concurrent", &[d, sw, 1], &[Activation::Tanh, Activation::Identity], &mut rng)?)
        } else {
            Head::Sequential {
                forward: Recurrent::new(config.decoder_kind, store, "decoder_fw", d, dd, &mut rng)?,
                backward: Recurrent::new(config.decoder_kind, store, "decoder_bw", d, dd, &mut rng)?,
                selector: Mlp::new(store, "selector", &[2 * dd, sw, 1], &[Activation::Tanh, Activation::Identity], &mut rng)?,
            }
        };
        Ok(Self { config, gru_init, gru_f, gru_b, msg, head })
    }

    /// A fresh store holding freshly initialized parameters.
    pub fn init(config: ModelConfig, seed: u64) -> Result<(Self, ParamStore)> {
        let mut store = ParamStore::new();
        let p = Self::new(config, &mut store, seed)?;
        Ok((p, store))
    }

    fn aggregate(&self, tape: &mut Tape, msgs: &[Option<Var>], neighbors: &[NodeId]) -> Result<Var> {
        let d = self.config.hidden_dim;
        let mut acc: Option<Var> = None;
        for &n in neighbors {
            let m = msgs[n].expect("neighbor messages exist before aggregation");
            acc = Some(match acc {
                None => m,
                Some(a) => tape.add(a, m)?,
            });
        }
        Ok(match acc {
            None => tape.constant(Tensor::zeros(d, 1)),
            Some(s) => match self.config.aggregator {
                Aggregator::Sum => s,
                Aggregator::Mean => tape.scalar_mul(s, 1.0 / neighbors.len() as f64),
            },
        })
    }

    fn type_vector(&self, kind: NodeKind) -> Tensor {
        let mut v = kind.one_hot().to_vec();
        if self.config.wiring == Wiring::AggregateAsInput {
            v.resize(self.config.hidden_dim, 0.0);
        }
        Tensor::vector(v).expect("one-hot entries are finite")
    }

    /// All node states after every pass: `2 * iterations` entries, each
    /// indexed by node id. The last entry is the final embedding.
    pub fn embed(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        circuit: &Circuit,
        mut trace: Option<&mut Vec<TraceEvent>>,
    ) -> Result<Vec<Vec<Var>>> {
        let order = circuit.topological_order()?;
        let succ = circuit.successors();
        let preds: Vec<Vec<NodeId>> = circuit
            .nodes()
            .iter()
            .map(|n| {
                let mut p = n.preds.clone();
                p.sort_unstable();
                p
            })
            .collect();
        let n = circuit.len();
        let mut passes: Vec<Vec<Var>> = Vec::with_capacity(2 * self.config.iterations);
        let mut prev: Option<Vec<Var>> = None;

        for pass in 0..2 * self.config.iterations {
            let backward = pass % 2 == 1;
            let cell = match (pass, backward) {
                (0, _) => &self.gru_init,
                (_, false) => &self.gru_f,
                (_, true) => &self.gru_b,
            };
            let neighbors = if backward { &succ } else { &preds };
            let mut msgs: Vec<Option<Var>> = vec![None; n];
            let mut states: Vec<Option<Var>> = vec![None; n];
            let visit: Box<dyn Iterator<Item = &NodeId>> =
                if backward { Box::new(order.iter().rev()) } else { Box::new(order.iter()) };
            for &v in visit {
                if let Some(t) = trace.as_deref_mut() {
                    t.push(TraceEvent {
                        pass,
                        node: v,
                        neighbors: neighbors[v].clone(),
                        fresh: neighbors[v].iter().map(|&u| msgs[u].is_some()).collect(),
                    });
                }
                let agg = self.aggregate(tape, &msgs, &neighbors[v])?;
                let own = match &prev {
                    None => tape.constant(self.type_vector(circuit.node(v).kind)),
                    Some(p) => p[v],
                };
                let x = match self.config.wiring {
                    Wiring::AggregateAsState => cell.forward(tape, store, own, agg)?,
                    Wiring::AggregateAsInput => cell.forward(tape, store, agg, own)?,
                };
                states[v] = Some(x);
                msgs[v] = Some(self.msg.forward(tape, store, x)?);
            }
            let states: Vec<Var> = states.into_iter().map(|s| s.expect("every node visited")).collect();
            prev = Some(states.clone());
            passes.push(states);
        }
        Ok(passes)
    }

    /// Per-input logits from the recurrent decoder.
    pub fn decode_sequential(&self, tape: &mut Tape, store: &ParamStore, inputs: &[Var]) -> Result<Vec<Var>> {
        if inputs.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        let Head::Sequential { forward, backward, selector } = &self.head else {
            return Err(ModelError::Config("model was built with the concurrent head".into()));
        };
        let dd = self.config.decoder_dim;
        let fw = forward.run(tape, store, inputs.iter().copied(), dd)?;
        let mut bw = backward.run(tape, store, inputs.iter().rev().copied(), dd)?;
        bw.reverse();
        fw.into_iter()
            .zip(bw)
            .map(|(f, b)| {
                let both = tape.concat(&[f, b])?;
                Ok(selector.forward(tape, store, both)?)
            })
            .collect()
    }

    /// Per-input logits, each a function of that input's state alone.
    pub fn decode_concurrent(&self, tape: &mut Tape, store: &ParamStore, inputs: &[Var]) -> Result<Vec<Var>> {
        if inputs.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        let Head::Concurrent(mlp) = &self.head else {
            return Err(ModelError::Config("model was built with the sequential head".into()));
        };
        inputs.iter().map(|&x| Ok(mlp.forward(tape, store, x)?)).collect()
    }

    /// Embeds the circuit and decodes with the configured head. Returns the
    /// logits, one per input node in ascending node order.
    pub fn logits(&self, tape: &mut Tape, store: &ParamStore, circuit: &Circuit) -> Result<Vec<Var>> {
        let passes = self.embed(tape, store, circuit, None)?;
        let last = passes.last().expect("at least one pass");
        let inputs: Vec<Var> = circuit.inputs().into_iter().map(|i| last[i]).collect();
        if self.config.ablation_concurrent {
            self.decode_concurrent(tape, store, &inputs)
        } else {
            self.decode_sequential(tape, store, &inputs)
        }
    }

    /// Summed binary cross-entropy of the predictions against `label`.
    pub fn loss(&self, tape: &mut Tape, store: &ParamStore, circuit: &Circuit, label: &Assignment) -> Result<Var> {
        let logits = self.logits(tape, store, circuit)?;
        bce_loss(tape, &logits, label, circuit)
    }

    /// Thresholded assignment and the per-input probabilities.
    pub fn predict_assignment(&self, store: &ParamStore, circuit: &Circuit) -> Result<(Assignment, Vec<f64>)> {
        let mut tape = Tape::new();
        let logits = self.logits(&mut tape, store, circuit)?;
        let probs: Vec<f64> = logits
            .iter()
            .map(|&l| asymsat_autodiff::sigmoid(tape.value(l).data()[0]))
            .collect();
        let bits: Vec<bool> = probs.iter().map(|&p| p >= self.config.threshold).collect();
        Ok((Assignment::from_bits(circuit, &bits)?, probs))
    }
}

/// Summed binary cross-entropy `Σ_i -[g_i ln p_i + (1 - g_i) ln(1 - p_i)]` with
/// `p_i = σ(logit_i)`, computed stably from the logits.
pub fn bce_loss(tape: &mut Tape, logits: &[Var], label: &Assignment, circuit: &Circuit) -> Result<Var> {
    let inputs = circuit.inputs();
    if label.len() != inputs.len() || logits.len() != inputs.len() {
        return Err(ModelError::LabelDomain { expected: inputs.len(), found: label.len() });
    }
    let targets: Vec<f64> = inputs
        .iter()
        .map(|&i| label.get(i).map(|b| b as u8 as f64).ok_or(ModelError::LabelDomain { expected: inputs.len(), found: label.len() }))
        .collect::<Result<_>>()?;
    let all = tape.concat(logits)?;
    Ok(tape.bce_with_logits(all, &targets)?)
}

/// Sidecar written next to a checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSidecar {
    pub seed: u64,
    pub model: ModelConfig,
}

impl ModelSidecar {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| file_err(path, e))?;
        std::fs::write(path, text).map_err(|e| file_err(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| file_err(path, e))?;
        toml::from_str(&text).map_err(|e| file_err(path, e))
    }
}

fn file_err(path: &Path, e: impl std::fmt::Display) -> ModelError {
    ModelError::File { path: path.display().to_string(), message: e.to_string() }
}

/// Path of the sidecar for a checkpoint file.
pub fn sidecar_path(checkpoint: &Path) -> std::path::PathBuf {
    checkpoint.with_extension("toml")
}

/// Loads a checkpoint together with its sidecar config.
pub fn load_model(checkpoint: &Path) -> Result<(ModelParams, ParamStore, ModelSidecar)> {
    let sidecar = ModelSidecar::read(&sidecar_path(checkpoint))?;
    let (params, mut store) = ModelParams::init(sidecar.model.clone(), sidecar.seed)?;
    let file = std::fs::File::open(checkpoint).map_err(|e| file_err(checkpoint, e))?;
    let loaded = asymsat_autodiff::checkpoint::read_checkpoint(std::io::BufReader::new(file))?;
    asymsat_autodiff::checkpoint::load_into(&mut store, &loaded)?;
    Ok((params, store, sidecar))
}

/// Writes the checkpoint and its sidecar.
pub fn save_model(checkpoint: &Path, store: &ParamStore, sidecar: &ModelSidecar) -> Result<()> {
    let bytes = asymsat_autodiff::checkpoint::checkpoint_bytes(store);
    std::fs::write(checkpoint, bytes).map_err(|e| file_err(checkpoint, e))?;
    sidecar.write(&sidecar_path(checkpoint))
}
