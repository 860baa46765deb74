//! Layers built from tape primitives. Each layer only stores parameter ids;
//! values live in a [`ParamStore`].

use rand::Rng;

use crate::error::{AdError, Result};
use crate::params::{ParamId, ParamStore};
use crate::tape::{Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Identity => x,
            Activation::Tanh => tape.tanh(x),
            Activation::Sigmoid => tape.sigmoid(x),
        }
    }
}

/// `y = W x + b`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl Linear {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input_dim: usize,
        output_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            w: store.add_uniform(format!("{name}.w"), output_dim, input_dim, rng)?,
            b: store.add_zeros(format!("{name}.b"), output_dim, 1)?,
            input_dim,
            output_dim,
        })
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.w);
        let b = tape.param(store, self.b);
        let wx = tape.matvec(w, x)?;
        tape.add(wx, b)
    }
}

/// Stack of linear layers, each followed by its own activation.
#[derive(Clone, Debug)]
pub struct Mlp {
    layers: Vec<(Linear, Activation)>,
}

impl Mlp {
    /// `dims` lists input, hidden and output widths; `acts` has one entry per layer.
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        dims: &[usize],
        acts: &[Activation],
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 || acts.len() != dims.len() - 1 {
            return Err(AdError::Empty("mlp layers"));
        }
        let layers = dims
            .windows(2)
            .zip(acts)
            .enumerate()
            .map(|(i, (w, &act))| Ok((Linear::new(store, &format!("{name}.{i}"), w[0], w[1], rng)?, act)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].0.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.0.output_dim).unwrap_or(0)
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let mut h = x;
        for (layer, act) in &self.layers {
            h = layer.forward(tape, store, h)?;
            h = act.apply(tape, h);
        }
        Ok(h)
    }
}

fn check_dim(tape: &Tape, v: Var, want: usize, op: &'static str) -> Result<()> {
    let t = tape.value(v);
    if t.shape() != (want, 1) {
        return Err(AdError::ShapeMismatch {
            op,
            left: t.shape(),
            right: (want, 1),
        });
    }
    Ok(())
}

/// Gated recurrent unit:
///
/// ```text
/// z  = σ(W_z x + U_z h + b_z)
/// r  = σ(W_r x + U_r h + b_r)
/// n  = tanh(W_n x + U_n (r ∘ h) + b_n)
/// h' = (1 - z) ∘ n + z ∘ h
/// ```
#[derive(Clone, Debug)]
pub struct GruCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    wz: ParamId,
    wr: ParamId,
    wn: ParamId,
    uz: ParamId,
    ur: ParamId,
    un: ParamId,
    bz: ParamId,
    br: ParamId,
    bn: ParamId,
}

impl GruCell {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let (i, h) = (input_dim, hidden_dim);
        Ok(Self {
            input_dim,
            hidden_dim,
            wz: store.add_uniform(format!("{name}.w_z"), h, i, rng)?,
            wr: store.add_uniform(format!("{name}.w_r"), h, i, rng)?,
            wn: store.add_uniform(format!("{name}.w_n"), h, i, rng)?,
            uz: store.add_uniform(format!("{name}.u_z"), h, h, rng)?,
            ur: store.add_uniform(format!("{name}.u_r"), h, h, rng)?,
            un: store.add_uniform(format!("{name}.u_n"), h, h, rng)?,
            bz: store.add_zeros(format!("{name}.b_z"), h, 1)?,
            br: store.add_zeros(format!("{name}.b_r"), h, 1)?,
            bn: store.add_zeros(format!("{name}.b_n"), h, 1)?,
        })
    }

    fn gate(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        (w, u, b): (ParamId, ParamId, ParamId),
        x: Var,
        h: Var,
    ) -> Result<Var> {
        let (w, u, b) = (tape.param(store, w), tape.param(store, u), tape.param(store, b));
        let wx = tape.matvec(w, x)?;
        let uh = tape.matvec(u, h)?;
        let s = tape.add(wx, uh)?;
        tape.add(s, b)
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var, h: Var) -> Result<Var> {
        check_dim(tape, x, self.input_dim, "gru input")?;
        check_dim(tape, h, self.hidden_dim, "gru state")?;
        let z = self.gate(tape, store, (self.wz, self.uz, self.bz), x, h)?;
        let z = tape.sigmoid(z);
        let r = self.gate(tape, store, (self.wr, self.ur, self.br), x, h)?;
        let r = tape.sigmoid(r);
        let rh = tape.mul(r, h)?;
        let n = self.gate(tape, store, (self.wn, self.un, self.bn), x, rh)?;
        let n = tape.tanh(n);
        let keep = tape.one_minus(z);
        let a = tape.mul(keep, n)?;
        let b = tape.mul(z, h)?;
        tape.add(a, b)
    }
}

/// Long short-term memory cell:
///
/// ```text
/// i = σ(W_i x + U_i h + b_i)    f = σ(W_f x + U_f h + b_f)
/// o = σ(W_o x + U_o h + b_o)    g = tanh(W_g x + U_g h + b_g)
/// c' = f ∘ c + i ∘ g            h' = o ∘ tanh(c')
/// ```
#[derive(Clone, Debug)]
pub struct LstmCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    gates: [(ParamId, ParamId, ParamId); 4],
}

impl LstmCell {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut make = |g: &str| -> Result<(ParamId, ParamId, ParamId)> {
            Ok((
                store.add_uniform(format!("{name}.w_{g}"), hidden_dim, input_dim, rng)?,
                store.add_uniform(format!("{name}.u_{g}"), hidden_dim, hidden_dim, rng)?,
                store.add_zeros(format!("{name}.b_{g}"), hidden_dim, 1)?,
            ))
        };
        let gates = [make("i")?, make("f")?, make("o")?, make("g")?];
        Ok(Self {
            input_dim,
            hidden_dim,
            gates,
        })
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Var,
        (h, c): (Var, Var),
    ) -> Result<(Var, Var)> {
        check_dim(tape, x, self.input_dim, "lstm input")?;
        check_dim(tape, h, self.hidden_dim, "lstm state")?;
        check_dim(tape, c, self.hidden_dim, "lstm cell")?;
        let mut pre = [x; 4];
        for (slot, &(w, u, b)) in pre.iter_mut().zip(&self.gates) {
            let (w, u, b) = (tape.param(store, w), tape.param(store, u), tape.param(store, b));
            let wx = tape.matvec(w, x)?;
            let uh = tape.matvec(u, h)?;
            let s = tape.add(wx, uh)?;
            *slot = tape.add(s, b)?;
        }
        let i = tape.sigmoid(pre[0]);
        let f = tape.sigmoid(pre[1]);
        let o = tape.sigmoid(pre[2]);
        let g = tape.tanh(pre[3]);
        let fc = tape.mul(f, c)?;
        let ig = tape.mul(i, g)?;
        let c2 = tape.add(fc, ig)?;
        let tc = tape.tanh(c2);
        let h2 = tape.mul(o, tc)?;
        Ok((h2, c2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_all(store: &mut ParamStore) {
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let (r, c) = store.value(id).shape();
            store.set_value(id, Tensor::zeros(r, c)).unwrap();
        }
    }

    #[test]
    fn gru_all_zero_is_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let cell = GruCell::new(&mut store, "g", 3, 4, &mut rng).unwrap();
        zero_all(&mut store);
        let mut t = Tape::new();
        let x = t.constant(Tensor::zeros(3, 1));
        let h = t.constant(Tensor::zeros(4, 1));
        let y = cell.forward(&mut t, &store, x, h).unwrap();
        assert_eq!(t.value(y).data(), &[0.0; 4]);
    }

    #[test]
    fn lstm_all_zero_is_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::new();
        let cell = LstmCell::new(&mut store, "l", 2, 3, &mut rng).unwrap();
        zero_all(&mut store);
        let mut t = Tape::new();
        let x = t.constant(Tensor::zeros(2, 1));
        let h = t.constant(Tensor::zeros(3, 1));
        let c = t.constant(Tensor::zeros(3, 1));
        let (h2, c2) = cell.forward(&mut t, &store, x, (h, c)).unwrap();
        assert_eq!(t.value(h2).data(), &[0.0; 3]);
        assert_eq!(t.value(c2).data(), &[0.0; 3]);
    }

    #[test]
    fn gru_rejects_wrong_state_dim() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        let cell = GruCell::new(&mut store, "g", 3, 4, &mut rng).unwrap();
        let mut t = Tape::new();
        let x = t.constant(Tensor::zeros(3, 1));
        let h = t.constant(Tensor::zeros(5, 1));
        assert!(matches!(
            cell.forward(&mut t, &store, x, h),
            Err(AdError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn lstm_rejects_wrong_input_dim() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::new();
        let cell = LstmCell::new(&mut store, "l", 2, 3, &mut rng).unwrap();
        let mut t = Tape::new();
        let x = t.constant(Tensor::zeros(4, 1));
        let h = t.constant(Tensor::zeros(3, 1));
        assert!(cell.forward(&mut t, &store, x, (h, h)).is_err());
    }
}
