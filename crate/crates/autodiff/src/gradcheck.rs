//! Central-difference gradient checking against the tape.

use crate::error::Result;
use crate::params::{ParamId, ParamStore};
use crate::tape::{Tape, Var};

/// Denominator floor for the relative error, so entries whose true gradient
/// is ~0 are judged by absolute error instead.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub entries: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn eval<F>(store: &ParamStore, f: &F) -> Result<f64>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut tape = Tape::new();
    let out = f(&mut tape, store)?;
    let v = tape.value(out);
    v.item().ok_or(crate::AdError::NotScalar(v.shape()))
}

/// Gradients of `f` with respect to every parameter, by backpropagation.
pub fn analytic_gradients<F>(store: &ParamStore, f: &F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut work = store.clone();
    work.clear_grads();
    let mut tape = Tape::new();
    let out = f(&mut tape, &work)?;
    tape.backward(out, &mut work)?;
    Ok(work
        .ids()
        .map(|id| work.grad(id).map(<[f64]>::to_vec).unwrap_or_default())
        .collect())
}

/// Central differences `(f(θ+h) - f(θ-h)) / 2h`, one entry at a time.
pub fn numeric_gradients<F>(store: &ParamStore, f: &F, h: f64) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut work = store.clone();
    let ids: Vec<ParamId> = work.ids().collect();
    let mut out = Vec::with_capacity(ids.len());
    for id in ids {
        let n = work.value(id).len();
        let mut g = Vec::with_capacity(n);
        for k in 0..n {
            let orig = work.entry(id, k);
            work.set_entry(id, k, orig + h);
            let up = eval(&work, f)?;
            work.set_entry(id, k, orig - h);
            let down = eval(&work, f)?;
            work.set_entry(id, k, orig);
            g.push((up - down) / (2.0 * h));
        }
        out.push(g);
    }
    Ok(out)
}

pub fn compare(store: &ParamStore, analytic: &[Vec<f64>], numeric: &[Vec<f64>]) -> GradCheckReport {
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        entries: 0,
    };
    for (id, (a, n)) in store.ids().zip(analytic.iter().zip(numeric)) {
        for (k, (&x, &y)) in a.iter().zip(n).enumerate() {
            report.entries += 1;
            let e = relative_error(x, y);
            if e > report.max_rel_error || e.is_nan() {
                report.max_rel_error = if e.is_nan() { f64::INFINITY } else { e };
                report.worst = Some((store.name(id).to_string(), k));
            }
        }
    }
    report
}

/// Compares backpropagated gradients of the scalar `f` against central
/// differences for every entry of every parameter in `store`.
pub fn grad_check<F>(store: &ParamStore, f: F, h: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    let analytic = analytic_gradients(store, &f)?;
    let numeric = numeric_gradients(store, &f, h)?;
    Ok(compare(store, &analytic, &numeric))
}
