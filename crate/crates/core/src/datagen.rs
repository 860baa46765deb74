//! Dataset generators: the hand-built symmetric suite, SR(n) random CNF
//! pairs, and random AIGs, all labeled by the deterministic oracle. Also the
//! on-disk dataset manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Geometric};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{read_circuit, write_circuit, Assignment, Circuit, CircuitBuilder, CircuitError, NodeId};
use crate::cnf::{cnf_to_circuit, Clause, CnfError, CnfFormula, Literal};
use crate::oracle::{dpll_solve, solve_circuit, SolveResult};

/// Consecutive unsatisfiable random AIGs tolerated before giving up.
pub const MAX_UNSAT_DRAWS: usize = 100;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("unsatisfiable region: {0} consecutive draws were UNSAT")]
    UnsatRegion(usize),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Cnf(#[from] CnfError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("manifest line {line}: label {label} does not satisfy {path}")]
    LabelMismatch { line: usize, label: String, path: String },
}

type Result<T> = std::result::Result<T, DatagenError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Symmetric,
    Sr,
    Aig,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Symmetric => "symmetric",
            Origin::Sr => "sr",
            Origin::Aig => "aig",
        })
    }
}

impl FromStr for Origin {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "symmetric" => Ok(Origin::Symmetric),
            "sr" => Ok(Origin::Sr),
            "aig" => Ok(Origin::Aig),
            _ => Err(format!("unknown origin `{s}`")),
        }
    }
}

/// A circuit together with a satisfying input assignment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledInstance {
    pub circuit: Circuit,
    pub label: Assignment,
    pub origin: Origin,
    /// Generator size parameter: variable count for SR, input count otherwise.
    pub n: usize,
    pub seed: u64,
}

impl LabeledInstance {
    /// Checks that the label satisfies the circuit.
    pub fn verify(&self) -> bool {
        self.circuit.evaluate(&self.label).unwrap_or(false)
    }
}

/// Per-instance seed derived from a master seed by a counter (SplitMix64).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------------------
// Symmetric suite

/// One hand-built circuit plus the symmetric input pair it is built around.
#[derive(Clone, Debug)]
pub struct SymmetricCase {
    pub name: &'static str,
    pub instance: LabeledInstance,
    pub pair: (NodeId, NodeId),
}

/// `¬(a ∧ b) ∧ ¬(¬a ∧ ¬b)`
fn xor_and_form(b: &mut CircuitBuilder, x: NodeId, y: NodeId) -> NodeId {
    let nx = b.not(x);
    let ny = b.not(y);
    let both = b.and(x, y);
    let neither = b.and(nx, ny);
    let nb = b.not(both);
    let nn = b.not(neither);
    b.and(nb, nn)
}

/// `¬(¬(a ∧ ¬b) ∧ ¬(¬a ∧ b))`
fn xor_or_form(b: &mut CircuitBuilder, x: NodeId, y: NodeId) -> NodeId {
    let nx = b.not(x);
    let ny = b.not(y);
    let l = b.and(x, ny);
    let r = b.and(nx, y);
    let nl = b.not(l);
    let nr = b.not(r);
    let both = b.and(nl, nr);
    b.not(both)
}

fn symmetric_case(
    name: &'static str,
    inputs: usize,
    pair: (usize, usize),
    build: impl FnOnce(&mut CircuitBuilder, &[NodeId]) -> NodeId,
) -> SymmetricCase {
    let mut b = CircuitBuilder::new();
    let ins: Vec<NodeId> = (0..inputs).map(|_| b.input()).collect();
    let out = build(&mut b, &ins);
    let circuit = b.finish(out).expect("suite circuits are valid");
    let label = solve_circuit(&circuit).expect("suite circuits are satisfiable");
    SymmetricCase {
        name,
        pair: (ins[pair.0], ins[pair.1]),
        instance: LabeledInstance { circuit, label, origin: Origin::Symmetric, n: inputs, seed: 0 },
    }
}

/// Ten circuits with at most three inputs. Each contains a pair of inputs
/// that can be exchanged without changing the function, yet must take
/// different values in every satisfying assignment.
pub fn symmetric_cases() -> Vec<SymmetricCase> {
    vec![
        symmetric_case("xor", 2, (0, 1), |b, i| xor_and_form(b, i[0], i[1])),
        symmetric_case("xor-or-form", 2, (0, 1), |b, i| xor_or_form(b, i[0], i[1])),
        symmetric_case("xor(x,y)&z", 3, (0, 1), |b, i| {
            let x = xor_and_form(b, i[0], i[1]);
            b.and(x, i[2])
        }),
        symmetric_case("xor(x,y)&!z", 3, (0, 1), |b, i| {
            let x = xor_and_form(b, i[0], i[1]);
            let nz = b.not(i[2]);
            b.and(x, nz)
        }),
        symmetric_case("xor(x,z)&y", 3, (0, 2), |b, i| {
            let x = xor_and_form(b, i[0], i[2]);
            b.and(x, i[1])
        }),
        symmetric_case("xor(y,z)&x", 3, (1, 2), |b, i| {
            let x = xor_and_form(b, i[1], i[2]);
            b.and(x, i[0])
        }),
        symmetric_case("xor(y,z)&!x", 3, (1, 2), |b, i| {
            let x = xor_or_form(b, i[1], i[2]);
            let nx = b.not(i[0]);
            b.and(x, nx)
        }),
        symmetric_case("xor(x,y)&(x|y|z)", 3, (0, 1), |b, i| {
            let x = xor_and_form(b, i[0], i[1]);
            let nx = b.not(i[0]);
            let ny = b.not(i[1]);
            let nz = b.not(i[2]);
            let a = b.and(nx, ny);
            let none = b.and(a, nz);
            let any = b.not(none);
            b.and(x, any)
        }),
        symmetric_case("xor(x,y)&!(x&y&z)", 3, (0, 1), |b, i| {
            let x = xor_or_form(b, i[0], i[1]);
            let a = b.and(i[0], i[1]);
            let all = b.and(a, i[2]);
            let nall = b.not(all);
            b.and(x, nall)
        }),
        symmetric_case("xor(x,z)&!y", 3, (0, 2), |b, i| {
            let x = xor_or_form(b, i[0], i[2]);
            let ny = b.not(i[1]);
            b.and(x, ny)
        }),
    ]
}

pub fn symmetric_suite() -> Vec<LabeledInstance> {
    symmetric_cases().into_iter().map(|c| c.instance).collect()
}

/// Whether color refinement over node kinds, predecessors and successors
/// assigns `a` and `b` the same class. Any permutation-invariant message
/// passing then produces identical states for the two nodes.
pub fn structurally_equivalent(circuit: &Circuit, a: NodeId, b: NodeId) -> bool {
    let succ = circuit.successors();
    let mut color: Vec<usize> = circuit.nodes().iter().map(|n| n.kind as usize).collect();
    loop {
        let sigs: Vec<(usize, Vec<usize>, Vec<usize>)> = circuit
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let mut p: Vec<usize> = n.preds.iter().map(|&q| color[q]).collect();
                let mut s: Vec<usize> = succ[i].iter().map(|&q| color[q]).collect();
                p.sort_unstable();
                s.sort_unstable();
                (color[i], p, s)
            })
            .collect();
        let mut ids: BTreeMap<&(usize, Vec<usize>, Vec<usize>), usize> = BTreeMap::new();
        for s in &sigs {
            let next = ids.len();
            ids.entry(s).or_insert(next);
        }
        let new: Vec<usize> = sigs.iter().map(|s| ids[s]).collect();
        let classes_before = color.iter().collect::<std::collections::BTreeSet<_>>().len();
        let stable = ids.len() == classes_before;
        color = new;
        if stable {
            return color[a] == color[b];
        }
    }
}

// ---------------------------------------------------------------------------
// SR(n)

/// Clause-size distribution for SR(n): `k = 1 + Bernoulli(p_bernoulli) +
/// Geometric(p_geometric)`, with the geometric counting trials (support ≥ 1),
/// capped at n.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrConfig {
    pub p_bernoulli: f64,
    pub p_geometric: f64,
}

impl Default for SrConfig {
    fn default() -> Self {
        Self { p_bernoulli: 0.7, p_geometric: 0.4 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SrPair {
    pub sat: CnfFormula,
    pub unsat: CnfFormula,
    /// Clause index and the literal as it appears in the unsat member.
    pub flipped: (usize, Literal),
}

fn sample_clause(n: usize, cfg: &SrConfig, rng: &mut ChaCha8Rng) -> Clause {
    let bern = Bernoulli::new(cfg.p_bernoulli).expect("probability in [0,1]");
    let geo = Geometric::new(cfg.p_geometric).expect("probability in (0,1]");
    let k = (1 + bern.sample(rng) as usize + geo.sample(rng) as usize + 1).min(n);
    sample(rng, n, k)
        .into_iter()
        .map(|v| Literal::new(v as u32 + 1, rng.gen_bool(0.5)).expect("variable ≥ 1"))
        .collect()
}

/// Adds random clauses until the formula first becomes UNSAT; the SAT twin
/// negates the first literal of the final clause.
pub fn gen_sr_pair(n: usize, seed: u64) -> Result<SrPair> {
    gen_sr_pair_with(n, seed, &SrConfig::default())
}

pub fn gen_sr_pair_with(n: usize, seed: u64, cfg: &SrConfig) -> Result<SrPair> {
    if n < 2 {
        return Err(DatagenError::InvalidParam(format!("SR(n) needs n >= 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clauses: Vec<Clause> = Vec::new();
    loop {
        clauses.push(sample_clause(n, cfg, &mut rng));
        let f = CnfFormula::new(n, clauses.clone())?;
        if dpll_solve(&f) == SolveResult::Unsat {
            let last = clauses.len() - 1;
            let lit = clauses[last][0];
            let mut sat_clauses = clauses;
            sat_clauses[last][0] = lit.negate();
            let sat = CnfFormula::new(n, sat_clauses)?;
            return Ok(SrPair { sat, unsat: f, flipped: (last, lit) });
        }
    }
}

/// Circuit instance for the SAT member, labeled by the oracle's model.
pub fn sr_instance(n: usize, seed: u64) -> Result<LabeledInstance> {
    sr_instance_from_pair(&gen_sr_pair(n, seed)?, seed)
}

pub fn sr_instance_from_pair(pair: &SrPair, seed: u64) -> Result<LabeledInstance> {
    let model = match dpll_solve(&pair.sat) {
        SolveResult::Sat(m) => m,
        SolveResult::Unsat => unreachable!("the SAT twin is satisfiable by construction"),
    };
    let circuit = cnf_to_circuit(&pair.sat)?;
    let label = Assignment::from_bits(&circuit, &model)?;
    Ok(LabeledInstance { circuit, label, origin: Origin::Sr, n: pair.sat.num_vars(), seed })
}

/// Variable count and seed of the `index`-th member of an SR dataset with n
/// drawn uniformly from `n_min..=n_max`.
pub fn sr_params(n_min: usize, n_max: usize, master_seed: u64, index: u64) -> (usize, u64) {
    let seed = derive_seed(master_seed, index);
    let n = ChaCha8Rng::seed_from_u64(seed ^ 0x5352).gen_range(n_min..=n_max);
    (n, seed)
}

/// `count` SR instances with n drawn uniformly from `n_min..=n_max`.
pub fn sr_dataset(n_min: usize, n_max: usize, count: usize, master_seed: u64) -> Result<Vec<LabeledInstance>> {
    if n_min < 2 || n_max < n_min {
        return Err(DatagenError::InvalidParam(format!("bad SR range {n_min}..={n_max}")));
    }
    (0..count as u64)
        .map(|i| {
            let (n, seed) = sr_params(n_min, n_max, master_seed, i);
            sr_instance(n, seed)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Random AIGs

/// One random AIG with `n_inputs` inputs and `max(target_gates, n_inputs-1)`
/// AND gates, without satisfiability filtering.
///
/// Each AND takes its first operand from the nodes that have no successor yet
/// and its second uniformly from all distinct earlier nodes, and is wrapped in
/// a NOT with probability 1/2. Once the gate budget only suffices to join the
/// remaining open nodes, they are folded into a single output by ANDs.
pub fn build_random_aig(n_inputs: usize, target_gates: usize, rng: &mut ChaCha8Rng) -> Result<Circuit> {
    if n_inputs == 0 || target_gates == 0 {
        return Err(DatagenError::InvalidParam("n_inputs and target_gates must be >= 1".into()));
    }
    let mut b = CircuitBuilder::new();
    let mut open: Vec<NodeId> = (0..n_inputs).map(|_| b.input()).collect();
    if n_inputs == 1 {
        open = vec![b.not(open[0])];
    }
    let mut ands = 0;
    let gate = |b: &mut CircuitBuilder, x: NodeId, y: NodeId, rng: &mut ChaCha8Rng| {
        let a = b.and(x, y);
        if rng.gen_bool(0.5) { b.not(a) } else { a }
    };
    while ands + open.len() - 1 < target_gates {
        let total = b.len();
        let x = open.swap_remove(rng.gen_range(0..open.len()));
        let mut y = rng.gen_range(0..total - 1);
        if y >= x {
            y += 1;
        }
        if let Some(pos) = open.iter().position(|&o| o == y) {
            open.swap_remove(pos);
        }
        open.push(gate(&mut b, x, y, rng));
        ands += 1;
    }
    open.sort_unstable();
    while open.len() > 1 {
        let x = open.remove(0);
        let y = open.remove(0);
        open.push(gate(&mut b, x, y, rng));
    }
    Ok(b.finish(open[0]).map_err(CircuitError::from)?)
}

/// A satisfiable random AIG; draws are repeated from the same stream until
/// one is SAT.
pub fn gen_random_aig(n_inputs: usize, target_gates: usize, seed: u64) -> Result<LabeledInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_UNSAT_DRAWS {
        let circuit = build_random_aig(n_inputs, target_gates, &mut rng)?;
        if let Some(label) = solve_circuit(&circuit) {
            return Ok(LabeledInstance { circuit, label, origin: Origin::Aig, n: n_inputs, seed });
        }
    }
    Err(DatagenError::UnsatRegion(MAX_UNSAT_DRAWS))
}

pub fn aig_dataset(n_inputs: usize, target_gates: usize, count: usize, master_seed: u64) -> Result<Vec<LabeledInstance>> {
    (0..count as u64)
        .map(|i| gen_random_aig(n_inputs, target_gates, derive_seed(master_seed, i)))
        .collect()
}

// ---------------------------------------------------------------------------
// Manifest

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatagenError + '_ {
    move |source| DatagenError::Io { path: path.to_path_buf(), source }
}

fn bits_string(a: &Assignment) -> String {
    a.to_string()
}

/// Writes each circuit under `circuits/` next to the manifest and one record
/// per instance: `<circuit path> <label bits> <origin> <n> <seed>`.
/// `metadata` lines are written first as `#` comments.
pub fn write_manifest(instances: &[LabeledInstance], path: &Path, metadata: &[String]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let cdir = dir.join("circuits");
    fs::create_dir_all(&cdir).map_err(io_err(&cdir))?;
    let mut out = String::new();
    for m in metadata {
        for line in m.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    for (i, inst) in instances.iter().enumerate() {
        let rel = format!("circuits/{i:06}.circ");
        let file = dir.join(&rel);
        fs::write(&file, write_circuit(&inst.circuit)).map_err(io_err(&file))?;
        out.push_str(&format!("{rel} {} {} {} {}\n", bits_string(&inst.label), inst.origin, inst.n, inst.seed));
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Loads a manifest and re-verifies every label by simulation.
pub fn read_manifest(path: &Path) -> Result<Vec<LabeledInstance>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let bad = |message: String| DatagenError::Manifest { line, message };
        let [rel, bits, origin, n, seed] = l.split_whitespace().collect::<Vec<_>>()[..] else {
            return Err(bad("expected `<path> <bits> <origin> <n> <seed>`".into()));
        };
        let file = dir.join(rel);
        let text = fs::read_to_string(&file).map_err(io_err(&file))?;
        let circuit = read_circuit(&text).map_err(|e| bad(format!("{rel}: {e}")))?;
        let bits: Vec<bool> = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(bad(format!("bad label bit `{c}`"))),
            })
            .collect::<Result<_>>()?;
        let label = Assignment::from_bits(&circuit, &bits).map_err(|e| bad(e.to_string()))?;
        let inst = LabeledInstance {
            circuit,
            label,
            origin: origin.parse().map_err(bad)?,
            n: n.parse().map_err(|_| bad(format!("bad n `{n}`")))?,
            seed: seed.parse().map_err(|_| bad(format!("bad seed `{seed}`")))?,
        };
        if !inst.verify() {
            return Err(DatagenError::LabelMismatch { line, label: bits_string(&inst.label), path: rel.to_string() });
        }
        out.push(inst);
    }
    Ok(out)
}
