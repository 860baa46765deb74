//! Finite-difference gradient suite covering every tape primitive, both
//! recurrent cells and the full network loss.

use asymsat_autodiff::{grad_check, GruCell, LstmCell, ParamStore, Result as AdResult, Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{xor_fixture, Assignment};
use crate::model::{DecoderKind, ModelConfig, ModelError, ModelParams};

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCase {
    pub name: String,
    pub max_rel_error: f64,
}

impl GradCase {
    pub fn passes(&self) -> bool {
        self.max_rel_error < TOLERANCE
    }
}

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.5..1.5)).collect())
        .expect("finite values")
}

type Op = fn(&mut Tape, Var, Var) -> AdResult<Var>;

fn binary_case(rng: &mut ChaCha8Rng, name: &str, a: (usize, usize), b: (usize, usize), op: Op) -> AdResult<GradCase> {
    let mut s = ParamStore::new();
    s.add("a", random(rng, a.0, a.1))?;
    s.add("b", random(rng, b.0, b.1))?;
    let out_shape = {
        let mut t = Tape::new();
        let (x, y) = (t.param(&s, s.id("a")?), t.param(&s, s.id("b")?));
        let z = op(&mut t, x, y)?;
        t.value(z).shape()
    };
    let proj = random(rng, out_shape.0, out_shape.1);
    let r = grad_check(
        &s,
        |t, st| {
            let (x, y) = (t.param(st, st.id("a")?), t.param(st, st.id("b")?));
            let z = op(t, x, y)?;
            let k = t.constant(proj.clone());
            let p = t.mul(z, k)?;
            Ok(t.sum(p))
        },
        STEP,
    )?;
    Ok(GradCase { name: name.to_string(), max_rel_error: r.max_rel_error })
}

fn randomize(store: &mut ParamStore, rng: &mut ChaCha8Rng) -> AdResult<()> {
    for id in store.ids().collect::<Vec<_>>() {
        let (r, c) = store.value(id).shape();
        store.set_value(id, random(rng, r, c))?;
    }
    Ok(())
}

fn model_case(kind: DecoderKind, ablation: bool, seed: u64) -> std::result::Result<GradCase, ModelError> {
    let c = xor_fixture();
    let label = Assignment::from_bits(&c, &[true, false])?;
    let config = ModelConfig {
        hidden_dim: 4,
        message_hidden: 4,
        decoder_dim: 3,
        iterations: 2,
        decoder_kind: kind,
        ablation_concurrent: ablation,
        ..Default::default()
    };
    let (p, s) = ModelParams::init(config, seed)?;
    let r = grad_check(
        &s,
        |t, st| {
            p.loss(t, st, &c, &label).map_err(|e| match e {
                ModelError::Autodiff(a) => a,
                other => asymsat_autodiff::AdError::Checkpoint(other.to_string()),
            })
        },
        STEP,
    )?;
    let head = if ablation { "concurrent" } else { "sequential" };
    Ok(GradCase { name: format!("full loss ({kind:?}, {head})"), max_rel_error: r.max_rel_error })
}

/// Runs every case with shapes and values drawn from `seed`.
pub fn gradient_suite(seed: u64) -> std::result::Result<Vec<GradCase>, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let (r, k, c) = (rng.gen_range(1..6), rng.gen_range(1..6), rng.gen_range(1..4));
    out.push(binary_case(&mut rng, "add", (r, c), (r, c), |t, a, b| t.add(a, b))?);
    out.push(binary_case(&mut rng, "sub", (r, c), (r, c), |t, a, b| t.sub(a, b))?);
    out.push(binary_case(&mut rng, "mul", (r, c), (r, c), |t, a, b| t.mul(a, b))?);
    out.push(binary_case(&mut rng, "matvec", (r, k), (k, 1), |t, a, b| t.matvec(a, b))?);
    out.push(binary_case(&mut rng, "matmul", (r, k), (k, c), |t, a, b| t.matmul(a, b))?);
    out.push(binary_case(&mut rng, "concat", (r, c), (k, c), |t, a, b| t.concat(&[a, b]))?);
    out.push(binary_case(&mut rng, "sum", (r, c), (1, 1), |t, a, b| {
        let s = t.sum(a);
        t.mul(s, b)
    })?);
    out.push(binary_case(&mut rng, "mean", (r, c), (1, 1), |t, a, b| {
        let s = t.mean(a)?;
        t.mul(s, b)
    })?);
    out.push(binary_case(&mut rng, "sigmoid", (r, c), (r, c), |t, a, b| {
        let s = t.sigmoid(a);
        t.add(s, b)
    })?);
    out.push(binary_case(&mut rng, "tanh", (r, c), (r, c), |t, a, b| {
        let s = t.tanh(a);
        t.add(s, b)
    })?);
    out.push(binary_case(&mut rng, "scalar_mul", (r, c), (r, c), |t, a, b| {
        let s = t.scalar_mul(a, -1.75);
        t.mul(s, b)
    })?);

    let n = rng.gen_range(1..8);
    let mut s = ParamStore::new();
    s.add("l", random(&mut rng, n, 1))?;
    let targets: Vec<f64> = (0..n).map(|_| rng.gen_bool(0.5) as u8 as f64).collect();
    let bce = grad_check(&s, |t, st| {
        let l = t.param(st, st.id("l")?);
        t.bce_with_logits(l, &targets)
    }, STEP)?;
    out.push(GradCase { name: "bce_with_logits".into(), max_rel_error: bce.max_rel_error });

    let (i, d) = (rng.gen_range(1..5), rng.gen_range(1..5));
    let mut s = ParamStore::new();
    let gru = GruCell::new(&mut s, "gru", i, d, &mut rng)?;
    randomize(&mut s, &mut rng)?;
    let (x, h0, proj) = (random(&mut rng, i, 1), random(&mut rng, d, 1), random(&mut rng, d, 1));
    let r = grad_check(&s, |t, st| {
        let (x, h) = (t.constant(x.clone()), t.constant(h0.clone()));
        let h = gru.forward(t, st, x, h)?;
        let h = gru.forward(t, st, x, h)?;
        let k = t.constant(proj.clone());
        let p = t.mul(h, k)?;
        Ok(t.sum(p))
    }, STEP)?;
    out.push(GradCase { name: "gru cell".into(), max_rel_error: r.max_rel_error });

    let mut s = ParamStore::new();
    let lstm = LstmCell::new(&mut s, "lstm", i, d, &mut rng)?;
    randomize(&mut s, &mut rng)?;
    let (c0, proj2) = (random(&mut rng, d, 1), random(&mut rng, d, 1));
    let r = grad_check(&s, |t, st| {
        let (xv, h, c) = (t.constant(x.clone()), t.constant(h0.clone()), t.constant(c0.clone()));
        let (h, c) = lstm.forward(t, st, xv, (h, c))?;
        let (h, c) = lstm.forward(t, st, xv, (h, c))?;
        let (k1, k2) = (t.constant(proj.clone()), t.constant(proj2.clone()));
        let a = t.mul(h, k1)?;
        let b = t.mul(c, k2)?;
        let a = t.sum(a);
        let b = t.sum(b);
        t.add(a, b)
    }, STEP)?;
    out.push(GradCase { name: "lstm cell".into(), max_rel_error: r.max_rel_error });

    for kind in [DecoderKind::Lstm, DecoderKind::Gru] {
        out.push(model_case(kind, false, seed)?);
    }
    out.push(model_case(DecoderKind::Lstm, true, seed)?);
    Ok(out)
}
