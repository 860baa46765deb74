//! Deterministic SAT oracle: DPLL with two-watched-literal propagation and
//! chronological backtracking, plus an enumerating solver used to check it.
//!
//! Branching takes the lowest-numbered unassigned variable that still occurs
//! in an unsatisfied clause and tries `true` first. Pure literals are fixed
//! once, before the first decision. Variables left unassigned when every
//! clause is satisfied are reported as `false`.

use thiserror::Error;

use crate::circuit::{Assignment, Circuit};
use crate::cnf::{tseitin, Clause, CnfFormula, Literal};

pub const DEFAULT_VAR_LIMIT: usize = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("{vars} variables exceed the enumeration limit of {limit}")]
    TooManyVars { vars: usize, limit: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SolveResult {
    /// A model; index `i` holds the value of variable `i + 1`.
    Sat(Vec<bool>),
    Unsat,
}

impl SolveResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolveResult::Sat(_))
    }

    pub fn model(&self) -> Option<&[bool]> {
        match self {
            SolveResult::Sat(m) => Some(m),
            SolveResult::Unsat => None,
        }
    }
}

/// Outcome of [`unit_propagate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Propagation {
    Conflict,
    Fixpoint {
        /// Satisfied clauses removed and false literals dropped.
        formula: CnfFormula,
        assignment: Vec<Option<bool>>,
    },
}

fn lit_value(l: Literal, assign: &[Option<bool>]) -> Option<bool> {
    assign[l.index()].map(|v| v != l.is_negated())
}

/// Repeatedly assigns the remaining literal of unit clauses until nothing
/// changes. Reports a conflict as soon as some clause has every literal false.
pub fn unit_propagate(formula: &CnfFormula, partial: &[Option<bool>]) -> Propagation {
    let mut assign = partial.to_vec();
    assign.resize(formula.num_vars(), None);
    loop {
        let mut changed = false;
        for clause in formula.clauses() {
            let mut unassigned = None;
            let mut open = 0;
            let mut satisfied = false;
            for &l in clause {
                match lit_value(l, &assign) {
                    Some(true) => {
                        satisfied = true;
                        break;
                    }
                    Some(false) => {}
                    None => {
                        open += 1;
                        unassigned = Some(l);
                    }
                }
            }
            if satisfied {
                continue;
            }
            match (open, unassigned) {
                (0, _) => return Propagation::Conflict,
                (1, Some(l)) => {
                    assign[l.index()] = Some(!l.is_negated());
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }
    let clauses: Vec<Clause> = formula
        .clauses()
        .iter()
        .filter(|c| !c.iter().any(|&l| lit_value(l, &assign) == Some(true)))
        .map(|c| c.iter().copied().filter(|&l| lit_value(l, &assign).is_none()).collect())
        .collect();
    let formula = CnfFormula::new(formula.num_vars(), clauses).expect("simplification keeps invariants");
    Propagation::Fixpoint { formula, assignment: assign }
}

fn code(l: Literal) -> usize {
    2 * l.index() + l.is_negated() as usize
}

struct Dpll {
    clauses: Vec<Clause>,
    units: Vec<Literal>,
    watches: Vec<Vec<usize>>,
    assign: Vec<Option<bool>>,
    trail: Vec<Literal>,
    qhead: usize,
}

impl Dpll {
    fn new(f: &CnfFormula) -> Self {
        let n = f.num_vars();
        let mut s = Self {
            clauses: Vec::new(),
            units: Vec::new(),
            watches: vec![Vec::new(); 2 * n],
            assign: vec![None; n],
            trail: Vec::new(),
            qhead: 0,
        };
        for c in f.clauses() {
            if c.len() == 1 {
                s.units.push(c[0]);
            } else {
                let ci = s.clauses.len();
                s.watches[code(c[0])].push(ci);
                s.watches[code(c[1])].push(ci);
                s.clauses.push(c.clone());
            }
        }
        s
    }

    fn value(&self, l: Literal) -> Option<bool> {
        lit_value(l, &self.assign)
    }

    /// Makes `l` true. Returns false if it is already false.
    fn enqueue(&mut self, l: Literal) -> bool {
        match self.value(l) {
            Some(v) => v,
            None => {
                self.assign[l.index()] = Some(!l.is_negated());
                self.trail.push(l);
                true
            }
        }
    }

    /// Returns false on conflict.
    fn propagate(&mut self) -> bool {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let falsified = p.negate();
            let mut ws = std::mem::take(&mut self.watches[code(falsified)]);
            let mut i = 0;
            let mut ok = true;
            while i < ws.len() {
                let ci = ws[i];
                let clause = &mut self.clauses[ci];
                if clause[0] == falsified {
                    clause.swap(0, 1);
                }
                let first = clause[0];
                if lit_value(first, &self.assign) == Some(true) {
                    i += 1;
                    continue;
                }
                let replacement = (2..clause.len()).find(|&k| lit_value(clause[k], &self.assign) != Some(false));
                if let Some(k) = replacement {
                    clause.swap(1, k);
                    let w = clause[1];
                    self.watches[code(w)].push(ci);
                    ws.swap_remove(i);
                    continue;
                }
                i += 1;
                if !self.enqueue(first) {
                    ok = false;
                    break;
                }
            }
            self.watches[code(falsified)] = ws;
            if !ok {
                return false;
            }
        }
        true
    }

    fn satisfied(&self, c: &[Literal]) -> bool {
        c.iter().any(|&l| self.value(l) == Some(true))
    }

    /// Lowest unassigned variable of any unsatisfied clause, or `None` when
    /// every clause is satisfied.
    fn pick_branch(&self) -> Option<usize> {
        self.clauses
            .iter()
            .filter(|c| !self.satisfied(c))
            .flat_map(|c| c.iter().filter(|&&l| self.value(l).is_none()).map(|l| l.index()))
            .min()
    }

    fn fix_pure_literals(&mut self) {
        loop {
            let n = self.assign.len();
            let mut seen = vec![(false, false); n];
            for c in self.clauses.iter().filter(|c| !self.satisfied(c)) {
                for &l in c {
                    if self.value(l).is_none() {
                        let s = &mut seen[l.index()];
                        if l.is_negated() { s.1 = true } else { s.0 = true }
                    }
                }
            }
            let mut found = false;
            for (v, &(p, q)) in seen.iter().enumerate() {
                if p != q {
                    found = true;
                    let var = (v + 1) as u32;
                    self.enqueue(if p { Literal::pos(var) } else { Literal::neg(var) });
                }
            }
            if !found {
                return;
            }
            let ok = self.propagate();
            debug_assert!(ok, "pure literals cannot cause conflicts");
        }
    }

    fn undo_to(&mut self, len: usize) {
        while self.trail.len() > len {
            let l = self.trail.pop().expect("len checked");
            self.assign[l.index()] = None;
        }
        self.qhead = self.qhead.min(len);
    }

    fn solve(mut self) -> SolveResult {
        let units = std::mem::take(&mut self.units);
        for l in units {
            if !self.enqueue(l) {
                return SolveResult::Unsat;
            }
        }
        if !self.propagate() {
            return SolveResult::Unsat;
        }
        self.fix_pure_literals();

        // (trail length before the decision, variable, already flipped)
        let mut decisions: Vec<(usize, usize, bool)> = Vec::new();
        loop {
            match self.pick_branch() {
                None => {
                    return SolveResult::Sat(self.assign.iter().map(|v| v.unwrap_or(false)).collect());
                }
                Some(v) => {
                    decisions.push((self.trail.len(), v, false));
                    self.enqueue(Literal::pos((v + 1) as u32));
                }
            }
            while !self.propagate() {
                loop {
                    let Some((lim, v, flipped)) = decisions.pop() else {
                        return SolveResult::Unsat;
                    };
                    self.undo_to(lim);
                    if !flipped {
                        decisions.push((lim, v, true));
                        self.enqueue(Literal::neg((v + 1) as u32));
                        break;
                    }
                }
            }
        }
    }
}

pub fn dpll_solve(formula: &CnfFormula) -> SolveResult {
    Dpll::new(formula).solve()
}

/// Tries assignments in ascending binary order, reading variable 1 as the
/// most significant bit, and returns the first model found.
pub fn brute_force_solve(formula: &CnfFormula, var_limit: usize) -> Result<SolveResult, OracleError> {
    let n = formula.num_vars();
    if n > var_limit {
        return Err(OracleError::TooManyVars { vars: n, limit: var_limit });
    }
    let mut model = vec![false; n];
    for k in 0u64..(1u64 << n) {
        for (i, m) in model.iter_mut().enumerate() {
            *m = (k >> (n - 1 - i)) & 1 == 1;
        }
        if formula.eval(&model).expect("model has num_vars entries") {
            return Ok(SolveResult::Sat(model));
        }
    }
    Ok(SolveResult::Unsat)
}

/// Satisfying input assignment for a circuit via Tseitin + DPLL.
pub fn solve_circuit(circuit: &Circuit) -> Option<Assignment> {
    let (cnf, map) = tseitin(circuit);
    dpll_solve(&cnf).model().map(|m| map.project(m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(n: usize, cs: &[&[i64]]) -> CnfFormula {
        CnfFormula::new(
            n,
            cs.iter()
                .map(|c| c.iter().map(|&v| Literal::from_dimacs(v).unwrap()).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn dpll_examples() {
        assert_eq!(dpll_solve(&f(3, &[])), SolveResult::Sat(vec![false; 3]));
        assert_eq!(dpll_solve(&f(1, &[&[1], &[-1]])), SolveResult::Unsat);
        let m = dpll_solve(&f(2, &[&[1, 2], &[-1, 2]]));
        assert_eq!(m.model().unwrap()[1], true);
    }

    #[test]
    fn every_model_of_the_two_clause_formula_sets_x2() {
        let g = f(2, &[&[1, 2], &[-1, 2]]);
        let models: Vec<(bool, bool)> = [(false, false), (false, true), (true, false), (true, true)]
            .into_iter()
            .filter(|&(a, b)| g.eval(&[a, b]).unwrap())
            .collect();
        assert!(models.iter().all(|&(_, b)| b));
    }

    #[test]
    fn brute_force_examples() {
        assert_eq!(brute_force_solve(&f(1, &[&[-1]]), 16).unwrap(), SolveResult::Sat(vec![false]));
        assert_eq!(
            brute_force_solve(&f(2, &[&[1, 2], &[-1, -2]]), 16).unwrap(),
            SolveResult::Sat(vec![false, true])
        );
        assert_eq!(
            brute_force_solve(&f(17, &[]), DEFAULT_VAR_LIMIT),
            Err(OracleError::TooManyVars { vars: 17, limit: 16 })
        );
    }

    #[test]
    fn unit_propagation_examples() {
        match unit_propagate(&f(2, &[&[1], &[-1, 2]]), &[None, None]) {
            Propagation::Fixpoint { formula, assignment } => {
                assert_eq!(assignment, vec![Some(true), Some(true)]);
                assert_eq!(formula.num_clauses(), 0);
            }
            Propagation::Conflict => panic!("unexpected conflict"),
        }
        assert_eq!(unit_propagate(&f(1, &[&[1], &[-1]]), &[None]), Propagation::Conflict);
        let g = f(3, &[&[1, 2], &[-2, 3]]);
        assert_eq!(
            unit_propagate(&g, &[None; 3]),
            Propagation::Fixpoint { formula: g.clone(), assignment: vec![None; 3] }
        );
    }

    #[test]
    fn long_implication_chain_and_backtracking() {
        // x1 -> x2 -> ... -> x6, and x6 false forces x1 false
        let g = f(6, &[&[-1, 2], &[-2, 3], &[-3, 4], &[-4, 5], &[-5, 6], &[-6], &[1, 2, 3]]);
        let r = dpll_solve(&g);
        assert_eq!(r, SolveResult::Unsat);
        let g = f(3, &[&[-1, 2], &[-2, 3], &[-3, -1], &[1, 2, 3], &[-2, -3, 1]]);
        let r = dpll_solve(&g);
        assert!(g.eval(r.model().unwrap()).unwrap());
    }

    #[test]
    fn pure_literal_sets_polarity() {
        // x2 only appears negated
        let g = f(2, &[&[1, -2], &[-1, -2]]);
        let m = dpll_solve(&g);
        assert_eq!(m.model().unwrap()[1], false);
        assert!(g.eval(m.model().unwrap()).unwrap());
    }

    #[test]
    fn circuit_helper() {
        let a = solve_circuit(&crate::circuit::xor_fixture()).unwrap();
        assert_eq!(a.to_bits(), vec![true, false]);
    }
}
