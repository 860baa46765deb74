use crate::error::{AdError, Result};
use crate::params::ParamStore;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of every parameter, then clears gradients.
///
/// Every parameter must carry a gradient; `Tape::backward` fills zeros for
/// parameters a loss does not touch.
pub fn adam_step(store: &mut ParamStore, cfg: &AdamConfig) -> Result<()> {
    let ids: Vec<_> = store.ids().collect();
    if let Some(&missing) = ids.iter().find(|&&id| store.grad(id).is_none()) {
        return Err(AdError::MissingGradient(store.name(missing).to_string()));
    }
    for id in ids {
        let g = store.take_grad(id).expect("checked above");
        let state = &mut store.adam[id.index()];
        state.step += 1;
        let t = state.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        let mut deltas = Vec::with_capacity(g.len());
        for ((m, v), gi) in state.m.iter_mut().zip(state.v.iter_mut()).zip(&g) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * gi;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * gi * gi;
            let mhat = *m / c1;
            let vhat = *v / c2;
            deltas.push(cfg.lr * mhat / (vhat.sqrt() + cfg.eps));
        }
        for (p, d) in store.value_mut(id).data_mut().iter_mut().zip(deltas) {
            *p -= d;
        }
    }
    Ok(())
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before rescaling.
pub fn clip_grad_norm(store: &mut ParamStore, max_norm: f64) -> f64 {
    let ids: Vec<_> = store.ids().collect();
    let norm = ids
        .iter()
        .filter_map(|&id| store.grad(id))
        .flat_map(|g| g.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let k = max_norm / norm;
        for id in ids {
            if let Some(g) = store.grad_mut(id) {
                g.iter_mut().for_each(|x| *x *= k);
            }
        }
    }
    norm
}
