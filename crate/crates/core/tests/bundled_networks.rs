mod common;

use common::load_spec;
use hygrid_core::stability::{
    algorithm1, corollary1, def1_partition, eigen_oracle, reduced_graph, Certificate, EigenVerdict, RankOutcome,
};
use hygrid_core::{HybridGrid, StabilityOptions, Verdict};

fn grid(name: &str) -> HybridGrid {
    HybridGrid::from_spec(&load_spec(name)).unwrap()
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn sorted(mut v: Vec<String>) -> Vec<String> {
    v.sort();
    v
}

#[test]
fn converter_dominated_walkthrough() {
    let r = grid("fig5a_converter_dominated.json").verify(&StabilityOptions::default());
    let sg = &r.subgrids[0];
    assert!(sg.partition.converter_dominated);
    assert_eq!(sorted(sg.partition.c.clone()), strings(&["4", "5"]));
    assert_eq!(sorted(sg.partition.d.clone()), strings(&["1", "2", "3"]));
    assert!(sg.partition.f.is_empty());
    assert_eq!(sorted(sg.reduced_edges.clone()), strings(&["e4", "e5"]));
    assert!(sg.cycle_rule.pass_case1);
    assert_eq!(sg.certified_by, Some(Certificate::CycleRule));
    assert_eq!(r.verdict, Verdict::Pass);
}

#[test]
fn machine_dominated_walkthrough() {
    let r = grid("fig5b_machine_dominated.json").verify(&StabilityOptions::default());
    let sg = &r.subgrids[0];
    assert!(!sg.partition.converter_dominated);
    assert_eq!(sg.partition.c, strings(&["3"]));
    assert_eq!(sorted(sg.partition.d.clone()), strings(&["1", "2", "4"]));
    assert_eq!(sg.partition.f, strings(&["5"]));
    assert_eq!(sorted(sg.reduced_edges.clone()), strings(&["e1", "e2", "e4", "e5", "e6"]));
    // Node 3 lies on the cycle 3-2-5 of the reduced graph.
    assert!(sg.cycle_rule.nodes[0].case2);
    assert!(sg.cycle_rule.pass);
    assert_eq!(r.verdict, Verdict::Pass);
}

#[test]
fn case_study_is_certified_by_the_cycle_rule() {
    let r = grid("fig7_two_area_hvdc.json").verify(&StabilityOptions::default());
    assert!(r.condition1_pass);
    assert!(r.assumption1.pass);
    let expect = [(["2", "3", "10"], "1"), (["12", "13", "20"], "11")];
    for (sg, (d, c)) in r.subgrids.iter().zip(expect) {
        assert_eq!(sorted(sg.partition.d.clone()), sorted(strings(&d)));
        assert_eq!(sg.partition.c, strings(&[c]));
        assert!(sg.cycle_rule.pass_case1);
        assert_eq!(sg.reduced_edges.len(), 3);
        assert!(sg.reduced_edges.iter().all(|e| e.split('-').any(|n| n == c)));
    }
    assert_eq!(r.verdict, Verdict::Pass);
    assert_eq!(r.eigen.verdict, EigenVerdict::Stable);
}

#[test]
fn full_transmission_network_reduces_to_the_case_study_pattern() {
    let g = grid("ieee9_two_area_full.json");
    assert_eq!(g.graph.len(), 8);
    // Kron reduction of a connected passive network couples every pair.
    assert_eq!(g.graph.ac_edges().len(), 12);
    let r = g.verify(&StabilityOptions::default());
    assert_eq!(r.subgrids[0].partition.c, strings(&["1"]));
    assert_eq!(r.subgrids[1].partition.c, strings(&["11"]));
    assert_eq!(r.verdict, Verdict::Pass);
    assert_eq!(r.eigen.verdict, EigenVerdict::Stable);
}

#[test]
fn three_machine_counterexample_fails_with_marginal_modes() {
    let g = grid("example1_three_machines.json");
    let r = g.verify(&StabilityOptions::default());
    assert_eq!(r.verdict, Verdict::Fail);
    assert_eq!(r.subgrids[0].rank.outcome, RankOutcome::Deficient);
    assert_eq!(r.eigen.verdict, EigenVerdict::Marginal);
    let pair: Vec<_> = r.eigen.eigenvalues.iter().filter(|z| (z[1].abs() - 1.0).abs() < 1e-9).collect();
    assert_eq!(pair.len(), 2);
    assert!(pair.iter().all(|z| z[0].abs() <= 1e-9));
}

#[test]
fn wind_compositions_pass() {
    for name in ["back_to_back_wind.json", "offshore_wind.json", "machines_only.json"] {
        let g = grid(name);
        let r = g.verify(&StabilityOptions::default());
        assert_eq!(r.verdict, Verdict::Pass, "{name}");
        assert_eq!(eigen_oracle(&g.model, 1e-9).verdict, EigenVerdict::Stable, "{name}");
    }
    let g = grid("offshore_wind.json");
    let r = g.verify(&StabilityOptions::default());
    let offshore = r.subgrids.iter().find(|s| s.nodes.contains(&"hv_off".to_string())).unwrap();
    assert_eq!(offshore.certified_by, Some(Certificate::NoMachines));
    assert_eq!(offshore.rank.outcome, RankOutcome::NotApplicable);
}

#[test]
fn mismatched_hvdc_gains_fail_condition1() {
    let mut spec = load_spec("fig7_two_area_hvdc.json");
    if let Some(hygrid_core::devices::DeviceBlock::Converter(c)) = spec.devices.get_mut("20") {
        c.vdc_droop = 1.2;
    }
    let g = HybridGrid::from_spec(&spec).unwrap();
    let r = g.verify(&StabilityOptions::default());
    assert!(!r.condition1_pass);
    assert!(!r.lasalle_certificate_valid);
    let bad = r.condition1.iter().find(|c| !c.pass).unwrap();
    assert_eq!(bad.gains, vec![("10".to_string(), 1.0), ("20".to_string(), 1.2)]);
    assert_eq!(r.verdict, Verdict::Fail);
}

#[test]
fn lossless_sourceless_network_fails_assumption1() {
    let mut spec = load_spec("machines_only.json");
    for block in spec.devices.values_mut() {
        if let hygrid_core::devices::DeviceBlock::Machine(m) = block {
            m.damping = 0.0;
            m.turbine = None;
        }
    }
    let r = HybridGrid::from_spec(&spec).unwrap().verify(&StabilityOptions::default());
    assert!(!r.assumption1.pass);
    assert_eq!(r.assumption1.witness, None);
    assert_eq!(r.verdict, Verdict::Fail);
}

const SHARED_D: &str = r#"{
    "nodes": [
        {"id": "a", "kind": "ac-machine"},
        {"id": "b", "kind": "ac-machine"},
        {"id": "d", "kind": "ac-machine"}
    ],
    "ac_edges": [
        {"from": "a", "to": "d", "susceptance": 1.3},
        {"from": "b", "to": "d", "susceptance": 0.7}
    ],
    "devices": {
        "a": {"type": "machine", "inertia": 1.0},
        "b": {"type": "machine", "inertia": 2.0},
        "d": {"type": "machine", "inertia": 1.0, "damping": 1.0}
    }
}"#;

#[test]
fn shared_degree_two_node_blocks_removal() {
    let g = HybridGrid::from_json(SHARED_D).unwrap();
    let sg = &g.partition.ac[0];
    let def1 = def1_partition(sg, &g.roles.ac[0]);
    let reduced = reduced_graph(&g.graph, sg, &def1);
    let removal = algorithm1(&g.graph, &reduced, &def1);
    assert!(!removal.emptied);
    assert!(removal.removals.is_empty());
    assert!(!corollary1(&g.graph, &reduced, &def1).pass);
    // The rank test agrees: one damped row against two undamped columns.
    let r = g.verify(&StabilityOptions::default());
    assert_eq!(r.subgrids[0].rank.outcome, RankOutcome::Deficient);
}

#[test]
fn empty_c_set_needs_no_removals() {
    let g = grid("machines_only.json");
    let sg = &g.partition.ac[0];
    let def1 = def1_partition(sg, &g.roles.ac[0]);
    assert!(def1.c.is_empty());
    let reduced = reduced_graph(&g.graph, sg, &def1);
    let removal = algorithm1(&g.graph, &reduced, &def1);
    assert!(removal.emptied);
    assert!(removal.removals.is_empty());
}

const ISOLATED_C: &str = r#"{
    "nodes": [
        {"id": "c1", "kind": "converter"},
        {"id": "c2", "kind": "converter"},
        {"id": "m", "kind": "ac-machine"},
        {"id": "o", "kind": "ac-machine"}
    ],
    "ac_edges": [
        {"from": "c1", "to": "c2", "susceptance": 1.0},
        {"from": "c2", "to": "m", "susceptance": 1.0},
        {"from": "m", "to": "o", "susceptance": 1.0}
    ],
    "devices": {
        "c1": {"type": "converter", "capacitance": 1.0, "p_droop": 0.1, "vdc_droop": 1.0},
        "c2": {"type": "converter", "capacitance": 1.0, "p_droop": 0.1, "vdc_droop": 1.0},
        "m": {"type": "machine", "inertia": 1.0, "damping": 1.0},
        "o": {"type": "machine", "inertia": 1.0}
    }
}"#;

#[test]
fn c_node_without_reduced_edges_fails_the_cycle_rule() {
    let g = HybridGrid::from_json(ISOLATED_C).unwrap();
    let sg = &g.partition.ac[0];
    let def1 = def1_partition(sg, &g.roles.ac[0]);
    assert!(def1.converter_dominated);
    let reduced = reduced_graph(&g.graph, sg, &def1);
    // Machine "o" only touches machine "m", so the reduced graph isolates it.
    let o = g.graph.index_of("o").unwrap();
    assert_eq!(reduced.degree(&g.graph, o), 0);
    let cor = corollary1(&g.graph, &reduced, &def1);
    assert!(!cor.pass);
    let node = cor.nodes.iter().find(|n| n.node == o).unwrap();
    assert!(!node.case1 && !node.case2);
}

#[test]
fn complete_bipartite_reduced_graph_keeps_every_edge() {
    let text = r#"{
        "nodes": [
            {"id": "c1", "kind": "converter"}, {"id": "c2", "kind": "converter"},
            {"id": "m1", "kind": "ac-machine"}, {"id": "m2", "kind": "ac-machine"}
        ],
        "ac_edges": [
            {"from": "c1", "to": "m1", "b": 1.0}, {"from": "c1", "to": "m2", "b": 1.0},
            {"from": "c2", "to": "m1", "b": 1.0}, {"from": "c2", "to": "m2", "b": 1.0}
        ],
        "devices": {
            "c1": {"type": "converter", "C": 1.0, "m_p": 0.1, "k_theta": 1.0},
            "c2": {"type": "converter", "C": 1.0, "m_p": 0.1, "k_theta": 1.0},
            "m1": {"type": "machine", "M": 1.0}, "m2": {"type": "machine", "M": 1.0}
        }
    }"#;
    let g = HybridGrid::from_json(text).unwrap();
    let sg = &g.partition.ac[0];
    let def1 = def1_partition(sg, &g.roles.ac[0]);
    let reduced = reduced_graph(&g.graph, sg, &def1);
    assert_eq!(reduced.edges.len(), 4);
}
