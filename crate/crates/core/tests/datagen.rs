//! Generator contracts checked with the oracle and by enumeration.

use asymsat::circuit::{NodeKind};
use asymsat::datagen::{
    aig_dataset, build_random_aig, gen_random_aig, gen_sr_pair, read_manifest, sr_dataset, sr_instance,
    symmetric_cases, symmetric_suite, write_manifest, DatagenError, Origin,
};
use asymsat::oracle::{brute_force_solve, dpll_solve};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn sr_pairs_differ_in_one_polarity(n in 3usize..=8, seed in any::<u64>()) {
        let p = gen_sr_pair(n, seed).unwrap();
        prop_assert!(!dpll_solve(&p.unsat).is_sat());
        prop_assert!(dpll_solve(&p.sat).is_sat());
        prop_assert!(dpll_solve(&p.unsat.without_last_clause()).is_sat());
        prop_assert_eq!(p.sat.num_clauses(), p.unsat.num_clauses());
        let mut diffs = 0;
        for (a, b) in p.sat.clauses().iter().zip(p.unsat.clauses()) {
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(b) {
                prop_assert_eq!(x.var(), y.var());
                if x != y {
                    diffs += 1;
                }
            }
        }
        prop_assert_eq!(diffs, 1);
        prop_assert_eq!(p.flipped.0, p.unsat.num_clauses() - 1);
        if n <= 12 {
            prop_assert!(!brute_force_solve(&p.unsat, 16).unwrap().is_sat());
        }
    }

    #[test]
    fn sr_instances_are_labeled_by_the_oracle(n in 3usize..=8, seed in any::<u64>()) {
        let i = sr_instance(n, seed).unwrap();
        prop_assert!(i.verify());
        prop_assert_eq!(i.circuit.num_inputs(), n);
        prop_assert_eq!(i.origin, Origin::Sr);
    }

    #[test]
    fn random_aigs_hit_the_gate_target(inputs in 1usize..=10, gates in 10usize..=200, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = build_random_aig(inputs, gates, &mut rng).unwrap();
        prop_assert!(c.validate().is_ok());
        prop_assert_eq!(c.num_inputs(), inputs);
        let ands = c.count(NodeKind::And) as f64;
        prop_assert!((ands - gates as f64).abs() <= 0.1 * gates as f64);
    }

    #[test]
    fn retained_aigs_are_satisfied_by_their_label(seed in any::<u64>()) {
        let i = gen_random_aig(4, 30, seed).unwrap();
        prop_assert!(i.verify());
    }
}

#[test]
fn large_aigs_reach_the_thousand_gate_scale() {
    let data = aig_dataset(10, 1000, 3, 17).unwrap();
    for i in &data {
        assert!(i.circuit.count(NodeKind::And) >= 1000);
        assert!(i.verify());
    }
}

#[test]
fn generators_are_pure_functions_of_the_seed() {
    assert_eq!(gen_sr_pair(6, 99).unwrap(), gen_sr_pair(6, 99).unwrap());
    assert_eq!(sr_dataset(3, 8, 20, 5).unwrap(), sr_dataset(3, 8, 20, 5).unwrap());
    assert_ne!(sr_dataset(3, 8, 20, 5).unwrap(), sr_dataset(3, 8, 20, 6).unwrap());
    assert_eq!(aig_dataset(5, 50, 5, 1).unwrap(), aig_dataset(5, 50, 5, 1).unwrap());
    // prefixes are stable when a dataset is extended
    assert_eq!(sr_dataset(3, 8, 10, 5).unwrap()[..], sr_dataset(3, 8, 20, 5).unwrap()[..10]);
}

#[test]
fn smallest_aig_is_an_and_or_its_negation() {
    for seed in 0..10 {
        let i = gen_random_aig(2, 1, seed).unwrap();
        let kinds: Vec<NodeKind> = i.circuit.nodes().iter().map(|n| n.kind).collect();
        assert!(
            kinds == [NodeKind::Input, NodeKind::Input, NodeKind::And]
                || kinds == [NodeKind::Input, NodeKind::Input, NodeKind::And, NodeKind::Not]
        );
    }
}

#[test]
fn every_suite_pair_must_split_in_every_model() {
    for case in symmetric_cases() {
        let c = &case.instance.circuit;
        assert!(c.num_inputs() <= 3);
        let pairs = c.semantic_symmetric_input_pairs().unwrap();
        assert!(pairs.contains(&case.pair), "{}", case.name);
        let inputs = c.inputs();
        let ia = inputs.iter().position(|&x| x == case.pair.0).unwrap();
        let ib = inputs.iter().position(|&x| x == case.pair.1).unwrap();
        let n = inputs.len();
        for k in 0u32..1 << n {
            let bits: Vec<bool> = (0..n).map(|i| (k >> i) & 1 == 1).collect();
            if bits[ia] == bits[ib] {
                assert!(!c.simulate(&bits).unwrap(), "{}: equal values satisfy", case.name);
            } else {
                let mut swapped = bits.clone();
                swapped.swap(ia, ib);
                assert_eq!(c.simulate(&bits).unwrap(), c.simulate(&swapped).unwrap());
            }
        }
        let label = case.instance.label.to_bits();
        let mut swapped = label.clone();
        swapped.swap(ia, ib);
        assert!(c.simulate(&swapped).unwrap(), "{}", case.name);
    }
}

#[test]
fn suite_circuits_are_distinct() {
    let s = symmetric_suite();
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            assert_ne!(s[i].circuit, s[j].circuit);
        }
    }
}

#[test]
fn manifest_round_trip_and_tamper_detection() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("suite.manifest");
    let suite = symmetric_suite();
    write_manifest(&suite, &path, &["generator = \"symmetric\"".to_string()]).unwrap();
    assert_eq!(read_manifest(&path).unwrap(), suite);

    let text = std::fs::read_to_string(&path).unwrap();
    let first = text.lines().find(|l| !l.starts_with('#')).unwrap();
    // XOR with label 10 becomes 11, which does not satisfy
    let tampered = text.replacen(&format!("{} 10 ", first.split(' ').next().unwrap()), &format!("{} 11 ", first.split(' ').next().unwrap()), 1);
    assert_ne!(tampered, text);
    std::fs::write(&path, tampered).unwrap();
    assert!(matches!(read_manifest(&path), Err(DatagenError::LabelMismatch { .. })));

    let empty = dir.path().join("empty.manifest");
    std::fs::write(&empty, "# nothing here\n").unwrap();
    assert!(read_manifest(&empty).unwrap().is_empty());
}

#[test]
fn manifest_reports_malformed_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.manifest");
    std::fs::write(&path, "circuits/x.circ 10 sr\n").unwrap();
    assert!(matches!(read_manifest(&path), Err(DatagenError::Manifest { line: 1, .. })));
}
