//! And-Inverter Graphs with explicit NOT nodes.
//!
//! A node's id is its index in [`Circuit::nodes`]. Circuits built through
//! [`Circuit::new`] or [`CircuitBuilder`] are validated and immutable.

use std::collections::{BTreeMap, BinaryHeap};
use std::cmp::Reverse;
use std::fmt;

use thiserror::Error;

pub type NodeId = usize;

/// Brute-force bound for truth-table based queries.
pub const MAX_ENUM_INPUTS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Input,
    And,
    Not,
}

impl NodeKind {
    pub const COUNT: usize = 3;

    pub fn arity(self) -> usize {
        match self {
            NodeKind::Input => 0,
            NodeKind::And => 2,
            NodeKind::Not => 1,
        }
    }

    pub fn one_hot(self) -> [f64; 3] {
        match self {
            NodeKind::Input => [1.0, 0.0, 0.0],
            NodeKind::And => [0.0, 1.0, 0.0],
            NodeKind::Not => [0.0, 0.0, 1.0],
        }
    }

    pub fn code(self) -> char {
        match self {
            NodeKind::Input => 'I',
            NodeKind::And => 'A',
            NodeKind::Not => 'N',
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        match s {
            "I" => Some(NodeKind::Input),
            "A" => Some(NodeKind::And),
            "N" => Some(NodeKind::Not),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Node {
    pub kind: NodeKind,
    pub preds: Vec<NodeId>,
}

impl Node {
    pub fn input() -> Self {
        Self { kind: NodeKind::Input, preds: vec![] }
    }
    pub fn and(a: NodeId, b: NodeId) -> Self {
        Self { kind: NodeKind::And, preds: vec![a, b] }
    }
    pub fn not(a: NodeId) -> Self {
        Self { kind: NodeKind::Not, preds: vec![a] }
    }
}

/// The first broken structural invariant found by [`Circuit::validate`].
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("circuit has no nodes")]
    Empty,
    #[error("output {output} is not a node")]
    OutputOutOfRange { output: NodeId },
    #[error("node {node}: predecessor {pred} does not exist")]
    DanglingRef { node: NodeId, pred: NodeId },
    #[error("arity: node {node} ({kind:?}) has {found} predecessors")]
    Arity { node: NodeId, kind: NodeKind, found: usize },
    #[error("node {node} lists predecessor {pred} twice")]
    DuplicatePred { node: NodeId, pred: NodeId },
    #[error("cycle through node {node}")]
    Cycle { node: NodeId },
    #[error("node {node} has no successors but is not the output")]
    ExtraSink { node: NodeId },
    #[error("output {node} has successors")]
    OutputHasSuccessors { node: NodeId },
    #[error("node {node} does not reach the output")]
    Unreachable { node: NodeId },
}

impl Violation {
    pub fn node(&self) -> Option<NodeId> {
        match *self {
            Violation::Empty => None,
            Violation::OutputOutOfRange { output } => Some(output),
            Violation::DanglingRef { node, .. }
            | Violation::Arity { node, .. }
            | Violation::DuplicatePred { node, .. }
            | Violation::Cycle { node }
            | Violation::ExtraSink { node }
            | Violation::OutputHasSuccessors { node }
            | Violation::Unreachable { node } => Some(node),
        }
    }
}

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("invalid circuit: {0}")]
    Invalid(#[from] Violation),
    #[error("assignment is missing input {0}")]
    MissingInput(NodeId),
    #[error("assignment has key {0}, which is not an input")]
    ExtraKey(NodeId),
    #[error("expected {expected} input bits, got {found}")]
    BitCount { expected: usize, found: usize },
    #[error("{0} inputs exceed the enumeration bound of {MAX_ENUM_INPUTS}")]
    TooManyInputs(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Bits for exactly the input nodes of one circuit.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Assignment {
    bits: BTreeMap<NodeId, bool>,
}

impl Assignment {
    pub fn new(bits: BTreeMap<NodeId, bool>) -> Self {
        Self { bits }
    }

    /// Pairs `bits` with the circuit's inputs in ascending node order.
    pub fn from_bits(circuit: &Circuit, bits: &[bool]) -> Result<Self, CircuitError> {
        let inputs = circuit.inputs();
        if inputs.len() != bits.len() {
            return Err(CircuitError::BitCount { expected: inputs.len(), found: bits.len() });
        }
        Ok(Self { bits: inputs.into_iter().zip(bits.iter().copied()).collect() })
    }

    pub fn get(&self, node: NodeId) -> Option<bool> {
        self.bits.get(&node).copied()
    }

    pub fn set(&mut self, node: NodeId, v: bool) {
        self.bits.insert(node, v);
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Values in ascending node order.
    pub fn to_bits(&self) -> Vec<bool> {
        self.bits.values().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, bool)> + '_ {
        self.bits.iter().map(|(&k, &v)| (k, v))
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in self.bits.values() {
            f.write_str(if *v { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Circuit {
    nodes: Vec<Node>,
    output: NodeId,
    /// Cached topological order; present once validated.
    order: Option<Vec<NodeId>>,
}

impl Circuit {
    pub fn new(nodes: Vec<Node>, output: NodeId) -> Result<Self, Violation> {
        let mut c = Self { nodes, output, order: None };
        c.validate()?;
        c.order = Some(c.compute_order().expect("validated circuits are acyclic"));
        Ok(c)
    }

    /// Builds without checking invariants; use [`Circuit::validate`] afterwards.
    pub fn from_parts_unchecked(nodes: Vec<Node>, output: NodeId) -> Self {
        Self { nodes, output, order: None }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn output(&self) -> NodeId {
        self.output
    }

    /// Input node ids in ascending order.
    pub fn inputs(&self) -> Vec<NodeId> {
        self.ids_of(NodeKind::Input)
    }

    pub fn num_inputs(&self) -> usize {
        self.count(NodeKind::Input)
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    fn ids_of(&self, kind: NodeKind) -> Vec<NodeId> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].kind == kind).collect()
    }

    /// Successor lists, each in ascending node order.
    pub fn successors(&self) -> Vec<Vec<NodeId>> {
        let mut succ = vec![Vec::new(); self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            for &p in &n.preds {
                if p < succ.len() {
                    succ[p].push(i);
                }
            }
        }
        for s in &mut succ {
            s.sort_unstable();
        }
        succ
    }

    pub fn validate(&self) -> Result<(), Violation> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(Violation::Empty);
        }
        if self.output >= n {
            return Err(Violation::OutputOutOfRange { output: self.output });
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if let Some(&p) = node.preds.iter().find(|&&p| p >= n) {
                return Err(Violation::DanglingRef { node: i, pred: p });
            }
            if node.preds.len() != node.kind.arity() {
                return Err(Violation::Arity { node: i, kind: node.kind, found: node.preds.len() });
            }
            if node.kind == NodeKind::And && node.preds[0] == node.preds[1] {
                return Err(Violation::DuplicatePred { node: i, pred: node.preds[0] });
            }
        }
        self.compute_order()?;
        let succ = self.successors();
        if !succ[self.output].is_empty() {
            return Err(Violation::OutputHasSuccessors { node: self.output });
        }
        if let Some(i) = (0..n).find(|&i| i != self.output && succ[i].is_empty()) {
            return Err(Violation::ExtraSink { node: i });
        }
        let mut seen = vec![false; n];
        let mut stack = vec![self.output];
        seen[self.output] = true;
        while let Some(v) = stack.pop() {
            for &p in &self.nodes[v].preds {
                if !seen[p] {
                    seen[p] = true;
                    stack.push(p);
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Violation::Unreachable { node: i });
        }
        Ok(())
    }

    /// Kahn's algorithm; among ready nodes the smallest id goes first.
    fn compute_order(&self) -> Result<Vec<NodeId>, Violation> {
        let n = self.nodes.len();
        let succ = self.successors();
        let mut indeg: Vec<usize> = self.nodes.iter().map(|x| x.preds.len()).collect();
        let mut ready: BinaryHeap<Reverse<NodeId>> =
            (0..n).filter(|&i| indeg[i] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(v)) = ready.pop() {
            order.push(v);
            for &s in &succ[v] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    ready.push(Reverse(s));
                }
            }
        }
        if order.len() < n {
            let node = (0..n).find(|&i| indeg[i] > 0).unwrap_or(0);
            return Err(Violation::Cycle { node });
        }
        Ok(order)
    }

    /// Every node after all of its predecessors; ties broken by ascending id.
    pub fn topological_order(&self) -> Result<Vec<NodeId>, CircuitError> {
        match &self.order {
            Some(o) => Ok(o.clone()),
            None => Ok(self.compute_order()?),
        }
    }

    fn order_ref(&self) -> std::borrow::Cow<'_, [NodeId]> {
        match &self.order {
            Some(o) => std::borrow::Cow::Borrowed(o),
            None => std::borrow::Cow::Owned(self.compute_order().unwrap_or_default()),
        }
    }

    /// Exact simulation. The assignment must cover exactly the input nodes.
    pub fn evaluate(&self, assignment: &Assignment) -> Result<bool, CircuitError> {
        let inputs = self.inputs();
        for (k, _) in assignment.iter() {
            if self.nodes.get(k).map(|n| n.kind) != Some(NodeKind::Input) {
                return Err(CircuitError::ExtraKey(k));
            }
        }
        let mut bits = Vec::with_capacity(inputs.len());
        for i in inputs {
            bits.push(assignment.get(i).ok_or(CircuitError::MissingInput(i))?);
        }
        self.simulate(&bits)
    }

    /// Simulates with input values given in ascending input-node order.
    pub fn simulate(&self, input_bits: &[bool]) -> Result<bool, CircuitError> {
        let words: Vec<u64> = input_bits.iter().map(|&b| if b { 1 } else { 0 }).collect();
        Ok(self.simulate_words(&words)? & 1 == 1)
    }

    /// Bit-parallel simulation of 64 assignments at once: bit `k` of each
    /// word belongs to the `k`-th assignment.
    pub fn simulate_words(&self, input_words: &[u64]) -> Result<u64, CircuitError> {
        let expected = self.num_inputs();
        if input_words.len() != expected {
            return Err(CircuitError::BitCount { expected, found: input_words.len() });
        }
        self.validate_cached()?;
        let mut val = vec![0u64; self.nodes.len()];
        let mut next_input = 0;
        // inputs are numbered in ascending id order regardless of topological position
        let mut input_rank = vec![usize::MAX; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if n.kind == NodeKind::Input {
                input_rank[i] = next_input;
                next_input += 1;
            }
        }
        for &v in self.order_ref().iter() {
            let n = &self.nodes[v];
            val[v] = match n.kind {
                NodeKind::Input => input_words[input_rank[v]],
                NodeKind::And => val[n.preds[0]] & val[n.preds[1]],
                NodeKind::Not => !val[n.preds[0]],
            };
        }
        Ok(val[self.output])
    }

    fn validate_cached(&self) -> Result<(), Violation> {
        if self.order.is_some() {
            Ok(())
        } else {
            self.validate()
        }
    }

    /// Output for every input combination; entry `k` uses bit `j` of `k` as
    /// the value of the `j`-th input.
    pub fn truth_table(&self) -> Result<Vec<bool>, CircuitError> {
        let n = self.num_inputs();
        if n > MAX_ENUM_INPUTS {
            return Err(CircuitError::TooManyInputs(n));
        }
        let total = 1usize << n;
        let mut table = Vec::with_capacity(total);
        let mut base = 0usize;
        while base < total {
            let words: Vec<u64> = (0..n)
                .map(|j| {
                    (0..64u64).fold(0u64, |w, k| {
                        let idx = base + k as usize;
                        if idx < total && (idx >> j) & 1 == 1 { w | (1 << k) } else { w }
                    })
                })
                .collect();
            let out = self.simulate_words(&words)?;
            for k in 0..64.min(total - base) {
                table.push((out >> k) & 1 == 1);
            }
            base += 64;
        }
        Ok(table)
    }

    /// Some satisfying input assignment by enumeration, if one exists.
    pub fn brute_force_sat(&self) -> Result<Option<Vec<bool>>, CircuitError> {
        let n = self.num_inputs();
        let table = self.truth_table()?;
        Ok(table
            .iter()
            .position(|&b| b)
            .map(|k| (0..n).map(|j| (k >> j) & 1 == 1).collect()))
    }

    /// Input pairs `(a, b)`, `a < b`, whose values can be exchanged without
    /// changing the output under any assignment.
    pub fn semantic_symmetric_input_pairs(&self) -> Result<Vec<(NodeId, NodeId)>, CircuitError> {
        let inputs = self.inputs();
        let table = self.truth_table()?;
        let mut pairs = Vec::new();
        for a in 0..inputs.len() {
            for b in a + 1..inputs.len() {
                let symmetric = (0..table.len()).all(|k| {
                    let (ba, bb) = ((k >> a) & 1, (k >> b) & 1);
                    if ba == bb {
                        return true;
                    }
                    let swapped = k ^ (1 << a) ^ (1 << b);
                    table[k] == table[swapped]
                });
                if symmetric {
                    pairs.push((inputs[a], inputs[b]));
                }
            }
        }
        Ok(pairs)
    }
}

/// Appends nodes in creation order; ids are returned as nodes are added.
#[derive(Clone, Debug, Default)]
pub struct CircuitBuilder {
    nodes: Vec<Node>,
}

impl CircuitBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn input(&mut self) -> NodeId {
        self.push(Node::input())
    }

    pub fn and(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.push(Node::and(a, b))
    }

    pub fn not(&mut self, a: NodeId) -> NodeId {
        self.push(Node::not(a))
    }

    fn push(&mut self, n: Node) -> NodeId {
        self.nodes.push(n);
        self.nodes.len() - 1
    }

    pub fn finish(self, output: NodeId) -> Result<Circuit, Violation> {
        Circuit::new(self.nodes, output)
    }
}

/// Renders the line-oriented circuit text format.
pub fn write_circuit(c: &Circuit) -> String {
    let mut s = format!("circuit {} {}\n", c.len(), c.num_inputs());
    for (i, n) in c.nodes().iter().enumerate() {
        s.push_str(&i.to_string());
        s.push(' ');
        s.push(n.kind.code());
        for p in &n.preds {
            s.push(' ');
            s.push_str(&p.to_string());
        }
        s.push('\n');
    }
    s.push_str(&format!("output {}\n", c.output()));
    s
}

fn perr(line: usize, message: impl Into<String>) -> CircuitError {
    CircuitError::Parse { line, message: message.into() }
}

/// Parses the circuit text format. Ids may have gaps; nodes are renumbered
/// densely in file order.
pub fn read_circuit(text: &str) -> Result<Circuit, CircuitError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or_else(|| perr(1, "missing header"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    let (num_nodes, num_inputs) = match h.as_slice() {
        ["circuit", a, b] => (
            a.parse::<usize>().map_err(|_| perr(hline, "bad node count"))?,
            b.parse::<usize>().map_err(|_| perr(hline, "bad input count"))?,
        ),
        _ => return Err(perr(hline, "expected `circuit <num_nodes> <num_inputs>`")),
    };

    let mut remap: BTreeMap<usize, NodeId> = BTreeMap::new();
    let mut node_lines = Vec::new();
    let mut nodes = Vec::new();
    let mut output = None;
    let mut last_id: Option<usize> = None;
    for (ln, line) in lines {
        if output.is_some() {
            return Err(perr(ln, "content after output line"));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks[0] == "output" {
            let [_, id] = toks.as_slice() else {
                return Err(perr(ln, "expected `output <id>`"));
            };
            let id: usize = id.parse().map_err(|_| perr(ln, "bad output id"))?;
            let mapped = *remap.get(&id).ok_or_else(|| perr(ln, format!("output refers to unknown node {id}")))?;
            output = Some(mapped);
            continue;
        }
        if toks.len() < 2 {
            return Err(perr(ln, "expected `<id> <I|A|N> [pred ...]`"));
        }
        let id: usize = toks[0].parse().map_err(|_| perr(ln, "bad node id"))?;
        if last_id.is_some_and(|l| id <= l) {
            return Err(perr(ln, format!("node id {id} is not strictly increasing")));
        }
        last_id = Some(id);
        let kind = NodeKind::from_code(toks[1]).ok_or_else(|| perr(ln, format!("unknown node kind `{}`", toks[1])))?;
        let preds = toks[2..]
            .iter()
            .map(|t| {
                let p: usize = t.parse().map_err(|_| perr(ln, format!("bad predecessor `{t}`")))?;
                remap
                    .get(&p)
                    .copied()
                    .ok_or_else(|| perr(ln, format!("dangling reference to node {p}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if preds.len() != kind.arity() {
            return Err(perr(ln, format!("arity mismatch: {kind:?} needs {} predecessors, got {}", kind.arity(), preds.len())));
        }
        remap.insert(id, nodes.len());
        nodes.push(Node { kind, preds });
        node_lines.push(ln);
    }
    let last_line = text.lines().count().max(1);
    let output = output.ok_or_else(|| perr(last_line, "missing output line"))?;
    if nodes.is_empty() {
        return Err(perr(hline, "empty node list"));
    }
    if nodes.len() != num_nodes {
        return Err(perr(hline, format!("header declares {num_nodes} nodes, found {}", nodes.len())));
    }
    let found_inputs = nodes.iter().filter(|n| n.kind == NodeKind::Input).count();
    if found_inputs != num_inputs {
        return Err(perr(hline, format!("header declares {num_inputs} inputs, found {found_inputs}")));
    }
    Circuit::new(nodes, output).map_err(|v| {
        let line = v.node().and_then(|n| node_lines.get(n).copied()).unwrap_or(hline);
        perr(line, v.to_string())
    })
}

/// The two-input XOR as `¬(x ∧ y) ∧ ¬(¬x ∧ ¬y)`: 2 inputs, 3 AND, 4 NOT.
pub fn xor_fixture() -> Circuit {
    let mut b = CircuitBuilder::new();
    let x = b.input();
    let y = b.input();
    let nx = b.not(x);
    let ny = b.not(y);
    let both = b.and(x, y);
    let neither = b.and(nx, ny);
    let not_both = b.not(both);
    let not_neither = b.not(neither);
    let out = b.and(not_both, not_neither);
    b.finish(out).expect("xor fixture is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> Circuit {
        Circuit::new(vec![Node::input(), Node::not(0)], 1).unwrap()
    }

    #[test]
    fn xor_fixture_is_valid_with_expected_shape() {
        let c = xor_fixture();
        assert!(c.validate().is_ok());
        assert_eq!(c.num_inputs(), 2);
        assert_eq!(c.count(NodeKind::And), 3);
        assert_eq!(c.count(NodeKind::Not), 4);
    }

    #[test]
    fn single_input_circuit_is_legal() {
        let c = Circuit::new(vec![Node::input()], 0).unwrap();
        assert_eq!(c.simulate(&[true]).unwrap(), true);
    }

    #[test]
    fn and_with_one_pred_violates_arity() {
        let c = Circuit::from_parts_unchecked(
            vec![Node::input(), Node { kind: NodeKind::And, preds: vec![0] }],
            1,
        );
        let v = c.validate().unwrap_err();
        assert!(matches!(v, Violation::Arity { node: 1, .. }));
        assert!(v.to_string().contains("arity"));
    }

    #[test]
    fn other_violations() {
        let dead = Circuit::from_parts_unchecked(vec![Node::input(), Node::input(), Node::not(0)], 2);
        assert_eq!(dead.validate(), Err(Violation::ExtraSink { node: 1 }));
        let cyc = Circuit::from_parts_unchecked(
            vec![Node::input(), Node::and(0, 2), Node::not(1), Node::not(1)],
            3,
        );
        assert!(matches!(cyc.validate(), Err(Violation::Cycle { .. })));
        let dup = Circuit::from_parts_unchecked(vec![Node::input(), Node::and(0, 0)], 1);
        assert!(matches!(dup.validate(), Err(Violation::DuplicatePred { node: 1, .. })));
        let dangling = Circuit::from_parts_unchecked(vec![Node::input(), Node::not(5)], 1);
        assert!(matches!(dangling.validate(), Err(Violation::DanglingRef { node: 1, pred: 5 })));
        assert_eq!(Circuit::from_parts_unchecked(vec![], 0).validate(), Err(Violation::Empty));
        let out_has_succ = Circuit::from_parts_unchecked(vec![Node::input(), Node::not(0)], 0);
        assert_eq!(out_has_succ.validate(), Err(Violation::OutputHasSuccessors { node: 0 }));
    }

    #[test]
    fn topo_order_chain_and_ties() {
        assert_eq!(chain().topological_order().unwrap(), vec![0, 1]);
        // inputs 0 and 2 both ready first; lower index wins
        let c = Circuit::new(vec![Node::input(), Node::not(2), Node::input(), Node::and(0, 1)], 3).unwrap();
        assert_eq!(c.topological_order().unwrap(), vec![0, 2, 1, 3]);
    }

    #[test]
    fn xor_truth_values() {
        let c = xor_fixture();
        let a = |x, y| Assignment::from_bits(&c, &[x, y]).unwrap();
        assert!(c.evaluate(&a(true, false)).unwrap());
        assert!(!c.evaluate(&a(true, true)).unwrap());
        assert!(c.evaluate(&a(false, true)).unwrap());
        assert!(!c.evaluate(&a(false, false)).unwrap());
        assert!(!chain().simulate(&[true]).unwrap());
        assert!(chain().simulate(&[false]).unwrap());
    }

    #[test]
    fn assignment_domain_errors() {
        let c = xor_fixture();
        let mut a = Assignment::default();
        a.set(0, true);
        assert!(matches!(c.evaluate(&a), Err(CircuitError::MissingInput(1))));
        a.set(1, false);
        a.set(4, true);
        assert!(matches!(c.evaluate(&a), Err(CircuitError::ExtraKey(4))));
    }

    #[test]
    fn symmetric_pairs() {
        assert_eq!(xor_fixture().semantic_symmetric_input_pairs().unwrap(), vec![(0, 1)]);

        // (x xor y) and z
        let mut b = CircuitBuilder::new();
        let (x, y, z) = (b.input(), b.input(), b.input());
        let (nx, ny) = (b.not(x), b.not(y));
        let a1 = b.and(x, ny);
        let a2 = b.and(nx, y);
        let (n1, n2) = (b.not(a1), b.not(a2));
        let or = b.and(n1, n2);
        let xor = b.not(or);
        let out = b.and(xor, z);
        let c = b.finish(out).unwrap();
        assert_eq!(c.semantic_symmetric_input_pairs().unwrap(), vec![(x, y)]);

        // x and not x over one input: no pairs
        let c = Circuit::new(vec![Node::input(), Node::not(0), Node::and(0, 1)], 2).unwrap();
        assert!(c.semantic_symmetric_input_pairs().unwrap().is_empty());
    }

    #[test]
    fn too_many_inputs_for_enumeration() {
        let mut b = CircuitBuilder::new();
        let mut acc = b.input();
        for _ in 0..MAX_ENUM_INPUTS {
            let x = b.input();
            acc = b.and(acc, x);
        }
        let c = b.finish(acc).unwrap();
        assert!(matches!(c.semantic_symmetric_input_pairs(), Err(CircuitError::TooManyInputs(21))));
    }

    #[test]
    fn text_round_trip_and_errors() {
        let c = xor_fixture();
        let text = write_circuit(&c);
        assert!(text.starts_with("circuit 9 2\n0 I\n1 I\n2 N 0\n"));
        assert_eq!(read_circuit(&text).unwrap(), c);

        let gappy = "circuit 3 1\n0 I\n5 N 0\n9 N 5\noutput 9\n";
        let g = read_circuit(gappy).unwrap();
        assert_eq!(g.output(), 2);
        assert_eq!(g.node(2).preds, vec![1]);

        let err = |s: &str| match read_circuit(s) {
            Err(CircuitError::Parse { line, message }) => (line, message),
            other => panic!("expected parse error, got {other:?}"),
        };
        assert!(err("circuit 0 0\noutput 0\n").1.contains("unknown node"));
        assert!(err("circuit 0 0\n").1.contains("missing output"));
        assert_eq!(err("circ 1 1\n0 I\noutput 0\n").0, 1);
        assert_eq!(err("circuit 2 1\n0 I\n1 N 3\noutput 1\n"), (3, "dangling reference to node 3".into()));
        assert_eq!(err("circuit 2 1\n0 I\n1 A 0\noutput 1\n").0, 3);
        assert!(err("circuit 3 1\n0 I\n1 N 0\n2 N 0\noutput 2\n").1.contains("no successors"));
        assert!(err("circuit 2 1\n1 I\n0 N 1\noutput 0\n").1.contains("strictly increasing"));
    }
}
