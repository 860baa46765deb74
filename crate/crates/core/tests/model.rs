//! Structural properties of the network: symmetric inputs stay tied through
//! message passing, only the recurrent decoder can split them, updates are
//! causal, and the full loss has correct gradients.

use asymsat::circuit::{xor_fixture, Assignment, Circuit, Node};
use asymsat::datagen::{structurally_equivalent, symmetric_cases};
use asymsat::model::{Aggregator, DecoderKind, ModelConfig, ModelParams, TraceEvent, Wiring};
use asymsat::training::evaluate_solution_rate;
use asymsat_autodiff::{grad_check, Tape};
use proptest::prelude::*;

fn cfg(t: usize, kind: DecoderKind) -> ModelConfig {
    ModelConfig { hidden_dim: 16, message_hidden: 16, iterations: t, decoder_kind: kind, ..Default::default() }
}

fn max_pair_gap(p: &ModelParams, s: &asymsat_autodiff::ParamStore, c: &Circuit, a: usize, b: usize) -> f64 {
    let mut tape = Tape::new();
    let passes = p.embed(&mut tape, s, c, None).unwrap();
    passes
        .iter()
        .map(|states| tape.value(states[a]).max_abs_diff(tape.value(states[b])))
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn mirrored_inputs_keep_equal_states(seed in any::<u64>(), t in prop::sample::select(vec![1usize, 5, 10])) {
        for wiring in [Wiring::AggregateAsState, Wiring::AggregateAsInput] {
            for agg in [Aggregator::Sum, Aggregator::Mean] {
                let (p, s) = ModelParams::init(ModelConfig { wiring, aggregator: agg, ..cfg(t, DecoderKind::Lstm) }, seed).unwrap();
                prop_assert!(max_pair_gap(&p, &s, &xor_fixture(), 0, 1) <= 1e-9);
            }
        }
        let (p, s) = ModelParams::init(cfg(t, DecoderKind::Gru), seed).unwrap();
        for case in symmetric_cases() {
            let (a, b) = case.pair;
            if structurally_equivalent(&case.instance.circuit, a, b) {
                prop_assert!(max_pair_gap(&p, &s, &case.instance.circuit, a, b) <= 1e-9, "{}", case.name);
            }
        }
    }

    #[test]
    fn concurrent_head_never_splits_a_tied_pair(seed in any::<u64>()) {
        let c = ModelConfig { ablation_concurrent: true, ..cfg(3, DecoderKind::Lstm) };
        let (p, s) = ModelParams::init(c, seed).unwrap();
        let suite: Vec<_> = symmetric_cases().into_iter().map(|c| c.instance).collect();
        prop_assert_eq!(evaluate_solution_rate(&p, &s, &suite, 1).unwrap().solved, 0);
        let (a, probs) = p.predict_assignment(&s, &xor_fixture()).unwrap();
        prop_assert_eq!(probs[0], probs[1]);
        prop_assert!(!xor_fixture().evaluate(&a).unwrap());
    }
}

#[test]
fn every_suite_pair_is_structurally_mirrored() {
    for case in symmetric_cases() {
        assert!(structurally_equivalent(&case.instance.circuit, case.pair.0, case.pair.1), "{}", case.name);
    }
}

#[test]
fn predecessor_order_does_not_change_states() {
    // the same XOR with each AND listing its operands the other way round
    let a = xor_fixture();
    let nodes: Vec<Node> = a
        .nodes()
        .iter()
        .map(|n| Node { kind: n.kind, preds: n.preds.iter().rev().copied().collect() })
        .collect();
    let b = Circuit::new(nodes, a.output()).unwrap();
    assert_ne!(a, b);
    let (p, s) = ModelParams::init(cfg(4, DecoderKind::Lstm), 3).unwrap();
    let (mut ta, mut tb) = (Tape::new(), Tape::new());
    let ea = p.embed(&mut ta, &s, &a, None).unwrap();
    let eb = p.embed(&mut tb, &s, &b, None).unwrap();
    for (pa, pb) in ea.iter().zip(&eb) {
        for (&x, &y) in pa.iter().zip(pb) {
            assert_eq!(ta.value(x).data(), tb.value(y).data());
        }
    }
}

#[test]
fn updates_only_read_already_updated_neighbors() {
    let case = &symmetric_cases()[7];
    let c = &case.instance.circuit;
    let (p, s) = ModelParams::init(cfg(3, DecoderKind::Lstm), 1).unwrap();
    let mut trace: Vec<TraceEvent> = Vec::new();
    p.embed(&mut Tape::new(), &s, c, Some(&mut trace)).unwrap();
    assert_eq!(trace.len(), 6 * c.len());
    let order = c.topological_order().unwrap();
    let pos: Vec<usize> = {
        let mut v = vec![0; c.len()];
        for (i, &n) in order.iter().enumerate() {
            v[n] = i;
        }
        v
    };
    for e in &trace {
        assert!(e.fresh.iter().all(|&f| f), "stale message at pass {} node {}", e.pass, e.node);
        for &u in &e.neighbors {
            if e.pass % 2 == 0 {
                assert!(pos[u] < pos[e.node]);
                assert!(c.node(e.node).preds.contains(&u));
            } else {
                assert!(pos[u] > pos[e.node]);
                assert!(c.node(u).preds.contains(&e.node));
            }
        }
    }
}

#[test]
fn decoder_is_order_sensitive() {
    let (p, s) = ModelParams::init(cfg(2, DecoderKind::Lstm), 8).unwrap();
    let mut t = Tape::new();
    let a = t.constant(asymsat_autodiff::Tensor::vector((0..16).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap());
    let b = t.constant(asymsat_autodiff::Tensor::vector((0..16).map(|i| (i as f64 * 0.91).cos()).collect()).unwrap());
    let fwd = p.decode_sequential(&mut t, &s, &[a, b]).unwrap();
    let rev = p.decode_sequential(&mut t, &s, &[b, a]).unwrap();
    assert_ne!(t.value(fwd[0]).data(), t.value(rev[1]).data());
}

#[test]
fn full_loss_matches_finite_differences() {
    for kind in [DecoderKind::Lstm, DecoderKind::Gru] {
        for ablation in [false, true] {
            let c = xor_fixture();
            let label = Assignment::from_bits(&c, &[true, false]).unwrap();
            let config = ModelConfig {
                hidden_dim: 4,
                message_hidden: 4,
                decoder_dim: 3,
                iterations: 2,
                decoder_kind: kind,
                ablation_concurrent: ablation,
                ..Default::default()
            };
            let (p, s) = ModelParams::init(config, 21).unwrap();
            let r = grad_check(
                &s,
                |t, st| p.loss(t, st, &c, &label).map_err(|e| match e {
                    asymsat::model::ModelError::Autodiff(a) => a,
                    other => panic!("{other}"),
                }),
                1e-5,
            )
            .unwrap();
            assert!(r.passes(1e-4), "{kind:?} ablation={ablation}: {r:?}");
        }
    }
}
