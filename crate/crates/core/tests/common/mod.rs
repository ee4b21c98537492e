//! Seeded random hybrid networks for property tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use hygrid_core::devices::{ConverterParams, DcBusParams, DeviceBlock, MachineParams, SourceParams};
use hygrid_core::network::{AcEdgeSpec, DcEdgeSpec, NodeKind, NodeSpec};
use hygrid_core::NetworkSpec;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MAX_NODES: usize = 12;

pub fn network_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../networks").join(name)
}

pub fn load_spec(name: &str) -> NetworkSpec {
    let text = std::fs::read_to_string(network_path(name)).expect("bundled network");
    NetworkSpec::from_json(&text).expect("valid network")
}

#[derive(Debug, Clone, Copy)]
pub struct GenOptions {
    /// Chance that a dc subgrid gets one converter with a different gain.
    pub gain_mismatch: f64,
    /// Chance that a device gets losses.
    pub loss: f64,
    /// Chance that a device gets a source, and that the source responds.
    pub source: f64,
    pub responsive: f64,
}

impl Default for GenOptions {
    fn default() -> Self {
        Self {
            gain_mismatch: 0.0,
            loss: 0.4,
            source: 0.5,
            responsive: 0.7,
        }
    }
}

struct Builder {
    rng: ChaCha8Rng,
    opts: GenOptions,
    spec: NetworkSpec,
}

impl Builder {
    fn id(k: usize) -> String {
        format!("n{k:02}")
    }

    fn add_node(&mut self, kind: NodeKind) -> String {
        let id = Self::id(self.spec.nodes.len());
        self.spec.nodes.push(NodeSpec { id: id.clone(), kind });
        id
    }

    fn weight(&mut self) -> f64 {
        self.rng.gen_range(0.5..2.0)
    }

    fn source(&mut self) -> Option<SourceParams> {
        if self.rng.gen_bool(self.opts.source) {
            let sensitivity = if self.rng.gen_bool(self.opts.responsive) {
                self.rng.gen_range(0.5..20.0)
            } else {
                0.0
            };
            Some(SourceParams {
                time_constant: self.rng.gen_range(0.05..1.0),
                sensitivity,
            })
        } else {
            None
        }
    }

    fn loss(&mut self) -> f64 {
        if self.rng.gen_bool(self.opts.loss) {
            self.rng.gen_range(0.05..2.0)
        } else {
            0.0
        }
    }

    /// Random connected graph on `nodes`: a random tree plus a few chords.
    fn connect(&mut self, nodes: &[String]) -> Vec<(String, String)> {
        let mut order = nodes.to_vec();
        order.shuffle(&mut self.rng);
        let mut pairs = Vec::new();
        for k in 1..order.len() {
            let j = self.rng.gen_range(0..k);
            pairs.push((order[j].clone(), order[k].clone()));
        }
        for a in 0..order.len() {
            for b in a + 1..order.len() {
                let present = pairs
                    .iter()
                    .any(|(x, y)| (x == &order[a] && y == &order[b]) || (x == &order[b] && y == &order[a]));
                if !present && self.rng.gen_bool(0.25) {
                    pairs.push((order[a].clone(), order[b].clone()));
                }
            }
        }
        pairs
    }
}

/// Draws a connected hybrid network with at most [`MAX_NODES`] nodes, at
/// most three ac subgrids and at most two dc subgrids. Edge weights are
/// uniform in (0.5, 2).
pub fn random_network(seed: u64, opts: GenOptions) -> NetworkSpec {
    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(seed),
        opts,
        spec: NetworkSpec::default(),
    };
    let n_ac: usize = b.rng.gen_range(1..=3);
    let n_dc: usize = if n_ac == 1 { b.rng.gen_range(0..=2) } else { b.rng.gen_range(1..=2) };

    // Converters needed in each ac subgrid to link the dc subgrids.
    // dc subgrid 0 links every ac subgrid when there is only one dc subgrid;
    // with two, dc 0 links ac 0 and ac 1, and dc 1 links the last ac subgrid
    // to ac 1 (or hangs off ac 0 when there is a single ac subgrid).
    let mut dc_members: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_dc];
    let mut need = vec![0usize; n_ac];
    let mut plan = |dc: usize, ac: usize, need: &mut Vec<usize>| {
        dc_members[dc].push((ac, need[ac]));
        need[ac] += 1;
    };
    match (n_ac, n_dc) {
        (1, 0) => {}
        (1, _) => {
            for dc in 0..n_dc {
                plan(dc, 0, &mut need);
            }
        }
        (_, 1) => {
            for ac in 0..n_ac {
                plan(0, ac, &mut need);
            }
        }
        (2, 2) => {
            plan(0, 0, &mut need);
            plan(0, 1, &mut need);
            let ac = b.rng.gen_range(0..2);
            plan(1, ac, &mut need);
        }
        _ => {
            plan(0, 0, &mut need);
            plan(0, 1, &mut need);
            plan(1, 1, &mut need);
            plan(1, 2, &mut need);
        }
    }
    let dc_buses: Vec<usize> = (0..n_dc).map(|_| b.rng.gen_range(0..=1)).collect();
    let budget = MAX_NODES - dc_buses.iter().sum::<usize>();

    // Ac subgrid sizes: at least the linking converters, at least one node.
    let mut sizes: Vec<usize> = need.iter().map(|&n| n.max(1)).collect();
    let mut spare = budget - sizes.iter().sum::<usize>();
    for s in sizes.iter_mut() {
        let extra = b.rng.gen_range(0..=spare.min(3));
        *s += extra;
        spare -= extra;
    }

    let mut ac_converters: Vec<Vec<String>> = Vec::new();
    for (ac, &size) in sizes.iter().enumerate() {
        let mut members = Vec::new();
        let mut convs = Vec::new();
        for k in 0..size {
            let kind = if k < need[ac] || b.rng.gen_bool(0.5) {
                NodeKind::Converter
            } else {
                NodeKind::AcMachine
            };
            let id = b.add_node(kind);
            if kind == NodeKind::Converter {
                convs.push(id.clone());
            }
            members.push(id);
        }
        for (from, to) in b.connect(&members) {
            let w = b.weight();
            b.spec.ac_edges.push(AcEdgeSpec {
                id: None,
                from,
                to,
                susceptance: w,
            });
        }
        ac_converters.push(convs);
    }

    // Gains: one common value per dc subgrid, optionally perturbed once.
    let mut gain_of: BTreeMap<String, f64> = BTreeMap::new();
    for (dc, members) in dc_members.iter().enumerate() {
        let gain = b.rng.gen_range(0.2..2.0);
        let mut nodes: Vec<String> = members.iter().map(|&(ac, k)| ac_converters[ac][k].clone()).collect();
        for (k, n) in nodes.iter().enumerate() {
            let g = if k == 1 && b.rng.gen_bool(b.opts.gain_mismatch) {
                gain * 1.25
            } else {
                gain
            };
            gain_of.insert(n.clone(), g);
        }
        for _ in 0..dc_buses[dc] {
            nodes.push(b.add_node(NodeKind::DcBus));
        }
        for (from, to) in b.connect(&nodes) {
            let w = b.weight();
            b.spec.dc_edges.push(DcEdgeSpec {
                id: None,
                from,
                to,
                conductance: w,
            });
        }
    }

    for node in b.spec.nodes.clone() {
        let block = match node.kind {
            NodeKind::AcMachine => DeviceBlock::Machine(MachineParams {
                inertia: b.rng.gen_range(0.5..5.0),
                damping: b.loss(),
                turbine: b.source(),
            }),
            NodeKind::DcBus => DeviceBlock::DcBus(DcBusParams {
                capacitance: b.rng.gen_range(0.5..2.0),
                conductance: b.loss(),
                source: b.source(),
            }),
            NodeKind::Converter => {
                let vdc_droop = match gain_of.get(&node.id) {
                    Some(&g) => g,
                    None => b.rng.gen_range(0.2..2.0),
                };
                DeviceBlock::Converter(ConverterParams {
                    capacitance: b.rng.gen_range(0.5..2.0),
                    conductance: b.loss(),
                    p_droop: b.rng.gen_range(0.02..0.2),
                    vdc_droop,
                    source: b.source(),
                })
            }
            NodeKind::AcBus => unreachable!(),
        };
        b.spec.devices.insert(node.id.clone(), block);
    }
    b.spec
}

/// Deterministic random vector in [-1, 1]^n.
pub fn random_vector(seed: u64, n: usize) -> nalgebra::DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    nalgebra::DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}
