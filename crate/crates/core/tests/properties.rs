mod common;

use std::collections::BTreeMap;

use common::{random_network, random_vector, GenOptions};
use hygrid_core::network::{ac_graph_matrices, build_network, partition_subgrids, AcEdgeSpec, DcEdgeSpec, NodeSpec};
use hygrid_core::sim::{simulate, DisturbanceSchedule, SimOptions};
use hygrid_core::stability::{
    algorithm1, corollary1, def1_partition, reduced_graph, EigenVerdict, Group, LaSalleFunction,
};
use hygrid_core::steady_state::{frequency_balance, solve_equilibrium, voltage_balance};
use hygrid_core::{Disturbance, HybridGrid, NetworkSpec, StabilityOptions, StabilityReport, Verdict};
use nalgebra::DVector;
use proptest::prelude::*;

fn build(seed: u64, opts: GenOptions) -> HybridGrid {
    HybridGrid::from_spec(&random_network(seed, opts)).expect("generated networks are valid")
}

fn verify(g: &HybridGrid) -> StabilityReport {
    g.verify(&StabilityOptions::default())
}

/// Same network with node ids permuted.
fn relabel(spec: &NetworkSpec, perm: &[usize]) -> NetworkSpec {
    let map: BTreeMap<String, String> = spec
        .nodes
        .iter()
        .enumerate()
        .map(|(k, n)| (n.id.clone(), format!("q{:02}", perm[k])))
        .collect();
    NetworkSpec {
        name: None,
        notes: None,
        nodes: spec
            .nodes
            .iter()
            .map(|n| NodeSpec {
                id: map[&n.id].clone(),
                kind: n.kind,
            })
            .collect(),
        ac_edges: spec
            .ac_edges
            .iter()
            .map(|e| AcEdgeSpec {
                id: None,
                from: map[&e.from].clone(),
                to: map[&e.to].clone(),
                susceptance: e.susceptance,
            })
            .collect(),
        dc_edges: spec
            .dc_edges
            .iter()
            .map(|e| DcEdgeSpec {
                id: None,
                from: map[&e.from].clone(),
                to: map[&e.to].clone(),
                conductance: e.conductance,
            })
            .collect(),
        devices: spec.devices.iter().map(|(k, v)| (map[k].clone(), *v)).collect(),
    }
}

/// Per-subgrid node-removal verdict, keyed by the sorted original node ids.
fn removal_verdicts(g: &HybridGrid, back: &BTreeMap<String, String>) -> BTreeMap<Vec<String>, bool> {
    verify(g)
        .subgrids
        .iter()
        .map(|s| {
            let mut ids: Vec<String> = s.nodes.iter().map(|n| back.get(n).cloned().unwrap_or(n.clone())).collect();
            ids.sort();
            (ids, s.node_removal.emptied)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn partition_covers_subgrid_disjointly(seed in any::<u64>()) {
        let g = build(seed, GenOptions::default());
        for (sg, roles) in g.partition.ac.iter().zip(&g.roles.ac) {
            let def1 = def1_partition(sg, roles);
            let mut all: Vec<usize> = def1.d.iter().chain(&def1.c).chain(&def1.f).copied().collect();
            all.sort_unstable();
            let mut nodes = sg.nodes();
            nodes.sort_unstable();
            prop_assert_eq!(all, nodes);
            if def1.converter_dominated {
                prop_assert!(def1.f.is_empty());
            }
        }
    }

    #[test]
    fn reduced_graph_has_no_c_c_or_d_d_edges(seed in any::<u64>()) {
        let g = build(seed, GenOptions::default());
        for (sg, roles) in g.partition.ac.iter().zip(&g.roles.ac) {
            let def1 = def1_partition(sg, roles);
            let reduced = reduced_graph(&g.graph, sg, &def1);
            for &e in &reduced.edges {
                let edge = &g.graph.ac_edges()[e];
                let (a, b) = (def1.group(edge.from), def1.group(edge.to));
                prop_assert!(!(a == b && a != Some(Group::F)));
            }
            let dropped = sg.edges.len() - reduced.edges.len();
            let same = sg.edges.iter().filter(|&&e| {
                let edge = &g.graph.ac_edges()[e];
                let (a, b) = (def1.group(edge.from), def1.group(edge.to));
                a == b && a != Some(Group::F)
            }).count();
            prop_assert_eq!(dropped, same);
        }
    }

    #[test]
    fn node_removal_is_bounded_and_label_invariant(seed in any::<u64>(), shift in 1usize..11) {
        let spec = random_network(seed, GenOptions::default());
        let g = HybridGrid::from_spec(&spec).unwrap();
        for (sg, roles) in g.partition.ac.iter().zip(&g.roles.ac) {
            let def1 = def1_partition(sg, roles);
            let reduced = reduced_graph(&g.graph, sg, &def1);
            let run = algorithm1(&g.graph, &reduced, &def1);
            prop_assert!(run.removals.len() <= def1.c.len());
            prop_assert_eq!(run.emptied, run.remaining.is_empty());
        }
        // Reverse-and-rotate the node order.
        let n = spec.nodes.len();
        let perm: Vec<usize> = (0..n).map(|k| (n - 1 - k + shift) % n).collect();
        let renamed = relabel(&spec, &perm);
        let back: BTreeMap<String, String> = spec
            .nodes
            .iter()
            .zip(&renamed.nodes)
            .map(|(a, b)| (b.id.clone(), a.id.clone()))
            .collect();
        let h = HybridGrid::from_spec(&renamed).unwrap();
        prop_assert_eq!(removal_verdicts(&g, &BTreeMap::new()), removal_verdicts(&h, &back));
        prop_assert_eq!(verify(&g).verdict, verify(&h).verdict);
    }

    #[test]
    fn cycle_rule_implies_node_removal_empties(seed in any::<u64>()) {
        let g = build(seed, GenOptions::default());
        for (sg, roles) in g.partition.ac.iter().zip(&g.roles.ac) {
            let def1 = def1_partition(sg, roles);
            let reduced = reduced_graph(&g.graph, sg, &def1);
            if corollary1(&g.graph, &reduced, &def1).pass {
                prop_assert!(algorithm1(&g.graph, &reduced, &def1).emptied);
            }
        }
    }

    #[test]
    fn node_removal_implies_full_rank(seed in any::<u64>()) {
        let g = build(seed, GenOptions::default());
        for s in verify(&g).subgrids {
            if s.node_removal.emptied {
                prop_assert!(s.rank.pass(), "subgrid {:?}", s.nodes);
            }
        }
    }

    #[test]
    fn certified_networks_have_stable_spectra(seed in any::<u64>()) {
        let g = build(seed, GenOptions::default());
        let r = verify(&g);
        if r.verdict == Verdict::Pass {
            prop_assert_eq!(r.eigen.verdict, EigenVerdict::Stable);
            prop_assert!(r.eigen.max_real.unwrap() < 0.0);
        }
    }

    #[test]
    fn gain_mismatch_invalidates_the_certificate(seed in any::<u64>()) {
        let g = build(seed, GenOptions { gain_mismatch: 1.0, ..GenOptions::default() });
        let r = verify(&g);
        prop_assert_eq!(r.condition1_pass, g.model.condition1_holds());
        prop_assert_eq!(r.lasalle_certificate_valid, r.condition1_pass);
        if !r.condition1_pass {
            prop_assert_eq!(r.verdict, Verdict::Fail);
        }
    }

    #[test]
    fn lasalle_rate_matches_chain_rule(seed in any::<u64>(), xs in any::<u64>()) {
        let g = build(seed, GenOptions::default());
        let m = &g.model;
        let f = LaSalleFunction::new(m).unwrap();
        let mut x = random_vector(xs, m.dim());
        x.rows_mut(m.layout.p_bar.start, m.layout.p_bar.len()).fill(0.0);
        let closed = f.derivative(&x);
        let chain = f.chain_rule_derivative(&x);
        let scale = closed.abs().max(chain.abs()).max(f64::MIN_POSITIVE);
        prop_assert!((closed - chain).abs() <= 1e-10 * scale, "{} vs {}", closed, chain);
        prop_assert!(closed <= 1e-12 * f.value(&x).max(1.0));
        prop_assert!(f.value(&x) >= 0.0);
    }

    #[test]
    fn laplacians_are_symmetric_with_zero_row_sums(seed in any::<u64>()) {
        let spec = random_network(seed, GenOptions::default());
        let graph = build_network(&spec).unwrap();
        let partition = partition_subgrids(&graph);
        for sg in &partition.ac {
            let l = ac_graph_matrices(&graph, sg).laplacian;
            prop_assert!((&l - l.transpose()).amax() == 0.0);
            for r in 0..l.nrows() {
                prop_assert!(l.row(r).sum().abs() < 1e-12);
            }
        }
        let mut seen: Vec<usize> = partition.ac.iter().flat_map(|s| s.nodes()).collect();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), graph.nodes().iter().filter(|n| n.kind.is_ac()).count());
    }

    #[test]
    fn report_json_round_trips(seed in any::<u64>()) {
        let r = verify(&build(seed, GenOptions { gain_mismatch: 0.3, ..GenOptions::default() }));
        let text = serde_json::to_string(&r).unwrap();
        let back: StabilityReport = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn equilibrium_meets_the_balance_relations(seed in any::<u64>(), ds in any::<u64>()) {
        let g = build(seed, GenOptions::default());
        prop_assume!(verify(&g).verdict == Verdict::Pass);
        let m = &g.model;
        let d = Disturbance {
            ac: random_vector(ds, m.theta_nodes.len()) * 0.2,
            dc: random_vector(ds ^ 1, m.v_nodes.len()) * 0.2,
        };
        let eq = solve_equilibrium(m, &d).unwrap();
        // A true equilibrium of the state equation.
        prop_assert!(m.derivative(&eq.state, &d.input()).amax() < 1e-9);
        for b in frequency_balance(m, &eq, &d) {
            prop_assert!(b.residual <= 1e-9, "{:?}", b);
        }
        for b in voltage_balance(m, &eq, &d) {
            prop_assert!(b.residual <= 1e-9, "{:?}", b);
        }
    }

    #[test]
    fn simulation_is_linear_in_the_initial_state(seed in any::<u64>(), xs in any::<u64>(), alpha in -3.0f64..3.0) {
        let g = build(seed, GenOptions::default());
        let m = &g.model;
        let x0 = random_vector(xs, m.dim());
        let opts = SimOptions { t_final: 0.5, dt: 1e-2, record_every: 1 };
        let schedule = DisturbanceSchedule::default();
        let a = simulate(m, &x0, &schedule, &opts).unwrap();
        let b = simulate(m, &(&x0 * alpha), &schedule, &opts).unwrap();
        for (xa, xb) in a.states.iter().zip(&b.states) {
            let scale = (xa * alpha).amax().max(1e-300);
            prop_assert!((xa * alpha - xb).amax() <= 1e-10 * scale.max(1.0));
        }
        let again = simulate(m, &x0, &schedule, &opts).unwrap();
        prop_assert_eq!(again.states, a.states);
    }

    #[test]
    fn logged_rate_matches_the_logged_value(seed in any::<u64>(), xs in any::<u64>()) {
        let g = build(seed, GenOptions::default());
        let m = &g.model;
        let mut x0 = random_vector(xs, m.dim());
        x0.rows_mut(m.layout.p_bar.start, m.layout.p_bar.len()).fill(0.0);
        let dt = 1e-3;
        let opts = SimOptions { t_final: 0.2, dt, record_every: 1 };
        let traj = simulate(m, &x0, &DisturbanceSchedule::default(), &opts).unwrap();
        let log = traj.lasalle.as_ref().unwrap();
        let scale = log.rate.iter().fold(1.0f64, |a, r| a.max(r.abs()));
        for k in 1..traj.len() - 1 {
            let fd = (log.value[k + 1] - log.value[k - 1]) / (2.0 * dt);
            prop_assert!((fd - log.rate[k]).abs() <= 1e-3 * scale, "k {}: {} vs {}", k, fd, log.rate[k]);
        }
        for w in log.value.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
        let _ = DVector::<f64>::zeros(0);
    }
}
