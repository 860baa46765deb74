//! CNF formulas, DIMACS I/O, and conversions to and from circuits.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::circuit::{Assignment, Circuit, CircuitBuilder, NodeId, NodeKind};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CnfError {
    #[error("literal variable must be >= 1")]
    ZeroVariable,
    #[error("clause {clause}: variable {var} exceeds num_vars {num_vars}")]
    VarOutOfRange { clause: usize, var: u32, num_vars: usize },
    #[error("clause {0} is empty")]
    EmptyClause(usize),
    #[error("tautological clause {clause}: contains {var} and -{var}")]
    Tautology { clause: usize, var: u32 },
    #[error("assignment covers {found} variables, formula has {expected}")]
    AssignmentLength { expected: usize, found: usize },
    #[error("formula has no variables")]
    NoVariables,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    var: u32,
    negated: bool,
}

impl Literal {
    pub fn new(var: u32, negated: bool) -> Result<Self, CnfError> {
        if var == 0 {
            return Err(CnfError::ZeroVariable);
        }
        Ok(Self { var, negated })
    }

    pub fn pos(var: u32) -> Self {
        Self::new(var, false).expect("variable must be >= 1")
    }

    pub fn neg(var: u32) -> Self {
        Self::new(var, true).expect("variable must be >= 1")
    }

    pub fn from_dimacs(v: i64) -> Result<Self, CnfError> {
        let var = u32::try_from(v.unsigned_abs()).map_err(|_| CnfError::ZeroVariable)?;
        Self::new(var, v < 0)
    }

    pub fn to_dimacs(self) -> i64 {
        if self.negated { -(self.var as i64) } else { self.var as i64 }
    }

    pub fn var(self) -> u32 {
        self.var
    }

    /// Zero-based index of the variable.
    pub fn index(self) -> usize {
        self.var as usize - 1
    }

    pub fn is_negated(self) -> bool {
        self.negated
    }

    pub fn negate(self) -> Self {
        Self { var: self.var, negated: !self.negated }
    }

    pub fn eval(self, model: &[bool]) -> bool {
        model[self.index()] != self.negated
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

pub type Clause = Vec<Literal>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CnfFormula {
    num_vars: usize,
    clauses: Vec<Clause>,
}

impl CnfFormula {
    /// Drops repeated literals inside a clause (first occurrence kept) and
    /// rejects empty or tautological clauses.
    pub fn new(num_vars: usize, clauses: Vec<Clause>) -> Result<Self, CnfError> {
        let mut out = Vec::with_capacity(clauses.len());
        for (ci, clause) in clauses.into_iter().enumerate() {
            if clause.is_empty() {
                return Err(CnfError::EmptyClause(ci));
            }
            let mut kept: Clause = Vec::with_capacity(clause.len());
            for lit in clause {
                if lit.index() >= num_vars {
                    return Err(CnfError::VarOutOfRange { clause: ci, var: lit.var, num_vars });
                }
                if kept.contains(&lit.negate()) {
                    return Err(CnfError::Tautology { clause: ci, var: lit.var });
                }
                if !kept.contains(&lit) {
                    kept.push(lit);
                }
            }
            out.push(kept);
        }
        Ok(Self { num_vars, clauses: out })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    /// Copy with the last clause removed.
    pub fn without_last_clause(&self) -> Self {
        let mut f = self.clone();
        f.clauses.pop();
        f
    }

    /// True iff every clause has a satisfied literal under `model`
    /// (`model[i]` is the value of variable `i + 1`).
    pub fn eval(&self, model: &[bool]) -> Result<bool, CnfError> {
        if model.len() != self.num_vars {
            return Err(CnfError::AssignmentLength { expected: self.num_vars, found: model.len() });
        }
        Ok(self.clauses.iter().all(|c| c.iter().any(|l| l.eval(model))))
    }
}

/// Free-function form of [`CnfFormula::eval`].
pub fn eval_cnf(formula: &CnfFormula, model: &[bool]) -> Result<bool, CnfError> {
    formula.eval(model)
}

/// Which CNF variable stands for which circuit node after [`tseitin`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TseitinMap {
    /// `node_var[i]` is the variable of node `i`; covers every node.
    pub node_var: Vec<u32>,
    pub input_var: BTreeMap<NodeId, u32>,
}

impl TseitinMap {
    /// Restricts a model of the Tseitin formula to the circuit inputs.
    pub fn project(&self, model: &[bool]) -> Assignment {
        Assignment::new(
            self.input_var
                .iter()
                .map(|(&node, &var)| (node, model[var as usize - 1]))
                .collect(),
        )
    }
}

/// Equi-satisfiable CNF with one variable per node (node `i` gets variable
/// `i + 1`) and full gate encodings, plus a unit clause asserting the output.
pub fn tseitin(circuit: &Circuit) -> (CnfFormula, TseitinMap) {
    let var = |i: NodeId| (i + 1) as u32;
    let mut clauses = Vec::with_capacity(3 * circuit.len() + 1);
    for (i, node) in circuit.nodes().iter().enumerate() {
        let z = var(i);
        match node.kind {
            NodeKind::Input => {}
            NodeKind::And => {
                let (a, b) = (var(node.preds[0]), var(node.preds[1]));
                clauses.push(vec![Literal::neg(z), Literal::pos(a)]);
                clauses.push(vec![Literal::neg(z), Literal::pos(b)]);
                clauses.push(vec![Literal::pos(z), Literal::neg(a), Literal::neg(b)]);
            }
            NodeKind::Not => {
                let a = var(node.preds[0]);
                clauses.push(vec![Literal::pos(z), Literal::pos(a)]);
                clauses.push(vec![Literal::neg(z), Literal::neg(a)]);
            }
        }
    }
    clauses.push(vec![Literal::pos(var(circuit.output()))]);
    let formula = CnfFormula::new(circuit.len(), clauses).expect("gate clauses are well formed");
    let map = TseitinMap {
        node_var: (0..circuit.len()).map(var).collect(),
        input_var: circuit.inputs().into_iter().map(|i| (i, var(i))).collect(),
    };
    (formula, map)
}

/// Truth-table exact circuit for a CNF. Variable `v` becomes input node
/// `v - 1`. Each clause is `¬(¬l1 ∧ ¬l2 ∧ ...)` with a left-leaning AND
/// chain (a unit clause is its literal), clauses are joined by a left-leaning
/// AND chain, and `¬x` nodes are shared per variable. Variables that occur in
/// no clause are tied in through the tautology `¬(x ∧ ¬x)`.
pub fn cnf_to_circuit(formula: &CnfFormula) -> Result<Circuit, CnfError> {
    let n = formula.num_vars();
    if n == 0 {
        return Err(CnfError::NoVariables);
    }
    let mut b = CircuitBuilder::new();
    let inputs: Vec<NodeId> = (0..n).map(|_| b.input()).collect();
    let mut negs: Vec<Option<NodeId>> = vec![None; n];
    let mut not_of = |b: &mut CircuitBuilder, v: usize| *negs[v].get_or_insert_with(|| b.not(inputs[v]));

    let mut terms: Vec<NodeId> = Vec::with_capacity(formula.num_clauses());
    let mut used = vec![false; n];
    for clause in formula.clauses() {
        for l in clause {
            used[l.index()] = true;
        }
        let term = if let [only] = clause.as_slice() {
            if only.is_negated() { not_of(&mut b, only.index()) } else { inputs[only.index()] }
        } else {
            let mut acc: Option<NodeId> = None;
            for l in clause {
                // ¬l
                let neg_l = if l.is_negated() { inputs[l.index()] } else { not_of(&mut b, l.index()) };
                acc = Some(match acc {
                    None => neg_l,
                    Some(a) => b.and(a, neg_l),
                });
            }
            b.not(acc.expect("clauses are nonempty"))
        };
        if !terms.contains(&term) {
            terms.push(term);
        }
    }
    for v in (0..n).filter(|&v| !used[v]) {
        let nv = not_of(&mut b, v);
        let contradiction = b.and(inputs[v], nv);
        terms.push(b.not(contradiction));
    }
    let mut out = terms[0];
    for &t in &terms[1..] {
        out = b.and(out, t);
    }
    Ok(b.finish(out).expect("construction yields a valid circuit"))
}

fn perr(line: usize, message: impl Into<String>) -> CnfError {
    CnfError::Parse { line, message: message.into() }
}

/// Parses DIMACS CNF. Comment lines start with `c`; clauses may span lines;
/// a `%` line ends the data.
pub fn read_dimacs(text: &str) -> Result<CnfFormula, CnfError> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut clauses: Vec<Clause> = Vec::new();
    let mut clause_lines: Vec<usize> = Vec::new();
    let mut current: Clause = Vec::new();
    let mut current_start = 0;
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        last_line = ln;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(perr(ln, "duplicate header"));
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let ["p", "cnf", v, c] = toks.as_slice() else {
                return Err(perr(ln, "expected `p cnf <vars> <clauses>`"));
            };
            let v = v.parse().map_err(|_| perr(ln, "bad variable count"))?;
            let c = c.parse().map_err(|_| perr(ln, "bad clause count"))?;
            header = Some((v, c, ln));
            continue;
        }
        let Some((num_vars, _, _)) = header else {
            return Err(perr(ln, "clause before `p cnf` header"));
        };
        for tok in line.split_whitespace() {
            let v: i64 = tok.parse().map_err(|_| perr(ln, format!("bad literal `{tok}`")))?;
            if v == 0 {
                if current.is_empty() {
                    return Err(perr(ln, "empty clause"));
                }
                clauses.push(std::mem::take(&mut current));
                clause_lines.push(current_start);
                continue;
            }
            if v.unsigned_abs() as usize > num_vars {
                return Err(perr(ln, format!("literal {v} out of range 1..={num_vars}")));
            }
            if current.is_empty() {
                current_start = ln;
            }
            current.push(Literal::from_dimacs(v)?);
        }
    }
    let (num_vars, num_clauses, hline) = header.ok_or_else(|| perr(1, "missing `p cnf` header"))?;
    if !current.is_empty() {
        return Err(perr(last_line, "last clause is missing its 0 terminator"));
    }
    if clauses.len() != num_clauses {
        return Err(perr(hline, format!("header declares {num_clauses} clauses, found {}", clauses.len())));
    }
    CnfFormula::new(num_vars, clauses).map_err(|e| match e {
        CnfError::Tautology { clause, var } => {
            perr(clause_lines[clause], format!("tautological clause (contains {var} and -{var})"))
        }
        other => other,
    })
}

pub fn write_dimacs(formula: &CnfFormula) -> String {
    write_dimacs_with_comments(formula, &[])
}

pub fn write_dimacs_with_comments(formula: &CnfFormula, comments: &[String]) -> String {
    let mut s = String::new();
    for c in comments {
        s.push_str("c ");
        s.push_str(c);
        s.push('\n');
    }
    s.push_str(&format!("p cnf {} {}\n", formula.num_vars(), formula.num_clauses()));
    for clause in formula.clauses() {
        for l in clause {
            s.push_str(&l.to_dimacs().to_string());
            s.push(' ');
        }
        s.push_str("0\n");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{xor_fixture, Node};

    fn lits(xs: &[i64]) -> Clause {
        xs.iter().map(|&v| Literal::from_dimacs(v).unwrap()).collect()
    }

    fn f(n: usize, cs: &[&[i64]]) -> CnfFormula {
        CnfFormula::new(n, cs.iter().map(|c| lits(c)).collect()).unwrap()
    }

    #[test]
    fn eval_basics() {
        assert!(f(2, &[]).eval(&[false, true]).unwrap());
        assert!(!f(1, &[&[1]]).eval(&[false]).unwrap());
        assert!(matches!(f(2, &[&[1]]).eval(&[true]), Err(CnfError::AssignmentLength { .. })));
    }

    #[test]
    fn xor_cnf_with_aux_gates() {
        // x=1, y=2, a=x∧y (3), b=¬x∧¬y (4); xor = ¬a ∧ ¬b
        let cnf = f(
            4,
            &[&[-3, 1], &[-3, 2], &[3, -1, -2], &[-4, -1], &[-4, -2], &[4, 1, 2], &[-3], &[-4]],
        );
        let sat: Vec<(bool, bool)> = [(false, false), (false, true), (true, false), (true, true)]
            .into_iter()
            .filter(|&(a, b)| cnf.eval(&[true, false, a, b]).unwrap())
            .collect();
        assert_eq!(sat, vec![(false, false)]);
    }

    #[test]
    fn construction_invariants() {
        assert!(matches!(CnfFormula::new(2, vec![lits(&[1, -1])]), Err(CnfError::Tautology { clause: 0, var: 1 })));
        assert!(matches!(CnfFormula::new(2, vec![vec![]]), Err(CnfError::EmptyClause(0))));
        assert!(matches!(CnfFormula::new(1, vec![lits(&[2])]), Err(CnfError::VarOutOfRange { .. })));
        assert_eq!(CnfFormula::new(2, vec![lits(&[1, 2, 1])]).unwrap().clauses()[0], lits(&[1, 2]));
        assert_eq!(Literal::new(0, false), Err(CnfError::ZeroVariable));
    }

    #[test]
    fn tseitin_not_gate() {
        let c = Circuit::new(vec![Node::input(), Node::not(0)], 1).unwrap();
        let (cnf, map) = tseitin(&c);
        // x = var 1, z = var 2
        assert_eq!(cnf.clauses(), &[lits(&[2, 1]), lits(&[-2, -1]), lits(&[2])]);
        assert!(cnf.eval(&[false, true]).unwrap());
        assert!(!cnf.eval(&[true, false]).unwrap());
        assert!(!cnf.eval(&[true, true]).unwrap());
        assert_eq!(map.project(&[false, true]).to_bits(), vec![false]);
    }

    #[test]
    fn tseitin_and_gate() {
        let c = Circuit::new(vec![Node::input(), Node::input(), Node::and(0, 1)], 2).unwrap();
        let (cnf, _) = tseitin(&c);
        assert_eq!(cnf.num_clauses(), 4);
        let models: Vec<Vec<bool>> = (0..8)
            .map(|k| (0..3).map(|j| (k >> j) & 1 == 1).collect::<Vec<_>>())
            .filter(|m| cnf.eval(m).unwrap())
            .collect();
        assert_eq!(models, vec![vec![true, true, true]]);
    }

    #[test]
    fn tseitin_clause_count_is_linear() {
        let c = xor_fixture();
        let (cnf, map) = tseitin(&c);
        assert_eq!(cnf.num_clauses(), 3 * 3 + 2 * 4 + 1);
        assert_eq!(map.node_var.len(), c.len());
    }

    #[test]
    fn cnf_to_circuit_shapes() {
        let c = cnf_to_circuit(&f(1, &[&[1]])).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.output(), 0);

        let c = cnf_to_circuit(&f(2, &[&[1, 2]])).unwrap();
        let kinds: Vec<_> = c.nodes().iter().map(|n| (n.kind, n.preds.clone())).collect();
        assert_eq!(
            kinds,
            vec![
                (NodeKind::Input, vec![]),
                (NodeKind::Input, vec![]),
                (NodeKind::Not, vec![0]),
                (NodeKind::Not, vec![1]),
                (NodeKind::And, vec![2, 3]),
                (NodeKind::Not, vec![4]),
            ]
        );
        assert_eq!(c.output(), 5);
    }

    #[test]
    fn cnf_to_circuit_unused_vars_and_empty() {
        let c = cnf_to_circuit(&f(3, &[&[2]])).unwrap();
        assert_eq!(c.num_inputs(), 3);
        let table = c.truth_table().unwrap();
        for (k, &out) in table.iter().enumerate() {
            assert_eq!(out, (k >> 1) & 1 == 1);
        }
        let c = cnf_to_circuit(&f(2, &[])).unwrap();
        assert!(c.truth_table().unwrap().iter().all(|&b| b));
        assert_eq!(cnf_to_circuit(&f(0, &[])), Err(CnfError::NoVariables));
        // repeated unit clauses collapse to one term
        let c = cnf_to_circuit(&f(1, &[&[-1], &[-1]])).unwrap();
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn dimacs_reading() {
        let one = read_dimacs("p cnf 1 1\n1 0\n").unwrap();
        assert_eq!(one, f(1, &[&[1]]));
        let two = read_dimacs("c hello\np cnf 2 2\n1 2 0\n-1 -2 0\n").unwrap();
        assert_eq!(two, f(2, &[&[1, 2], &[-1, -2]]));
        let multi = read_dimacs("p cnf 3 2\n1 2\n 3 0 -1\n0\n%\n0\n").unwrap();
        assert_eq!(multi, f(3, &[&[1, 2, 3], &[-1]]));
    }

    #[test]
    fn dimacs_errors() {
        let line = |s: &str| match read_dimacs(s) {
            Err(CnfError::Parse { line, message }) => (line, message),
            other => panic!("expected parse error, got {other:?}"),
        };
        let (l, m) = line("p cnf 1 1\n1 -1 0\n");
        assert_eq!(l, 2);
        assert!(m.contains("tautological"));
        assert_eq!(line("p cnf 2 3\n1 2 0\n").0, 1);
        assert_eq!(line("p cnf 2 1\n1 3 0\n").0, 2);
        assert!(line("p cnf 2 1\n1 2\n").1.contains("terminator"));
        assert!(line("1 2 0\n").1.contains("header"));
        assert!(line("p cnf 2 1\n1 x 0\n").1.contains("bad literal"));
        assert!(line("p cnf 2 1\n0\n").1.contains("empty clause"));
    }

    #[test]
    fn dimacs_dedups_literals_keeps_duplicate_clauses() {
        let g = read_dimacs("p cnf 2 2\n1 1 2 0\n1 2 0\n").unwrap();
        assert_eq!(g.clauses(), &[lits(&[1, 2]), lits(&[1, 2])]);
        assert_eq!(read_dimacs(&write_dimacs(&g)).unwrap(), g);
    }
}
