//! One-shot structured pruning: partition, redundancy graphs, components,
//! sensitivity, merge.

mod graph;
mod merge;

pub use graph::{
    build_graph, components, nodes_of, partition, DistanceMethod, Edge, Node, PairRecord,
    RedundancyGraph, Subgroup,
};
pub use merge::{
    delta_max, generators_of, max_commutator, merge, merge_weights, select_core, sensitivity,
    unit_sensitivity, MergeMode, Merged, ZERO_SENSITIVITY,
};

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, GateInstance};
use crate::dualrep::LocalityPolicy;
use crate::error::{Error, Result};
use crate::fsdist::ReferenceStrategy;
use crate::train::{gate_gradients, wrap_angle, GradMethod, Objective};

/// Constants of the functional-preservation bound `C1 |C| ε + C2 |C|^2 η`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c1: f64,
    pub c2: f64,
}

impl BoundConstants {
    /// `verify::calibrate_bound` on 300 cross-qubit components of seed 2024,
    /// doubled and rounded up. The envelope fit puts no weight on `η`.
    pub const CALIBRATED: Self = Self {
        c1: 1.0225,
        c2: 0.0,
    };
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self::CALIBRATED
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    /// Redundancy threshold in radians.
    pub epsilon: f64,
    /// Pairs whose commutator norm exceeds this use the exact distance.
    pub eta_cap: f64,
    /// Reference states drawn from the data.
    pub batch_size: usize,
    pub locality_policy: LocalityPolicy,
    pub merge_mode: MergeMode,
    pub use_fast_distance: bool,
    /// Candidate neighbours examined per node (`D`).
    pub max_neighbors: usize,
    pub seed: u64,
    pub reference_strategy: ReferenceStrategy,
    pub sensitivity_method: GradMethod,
    pub bound: BoundConstants,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            eta_cap: 0.1,
            batch_size: 16,
            locality_policy: LocalityPolicy::SameLayer,
            merge_mode: MergeMode::Tie,
            use_fast_distance: true,
            max_neighbors: 5,
            seed: 0,
            reference_strategy: ReferenceStrategy::Dominant,
            sensitivity_method: GradMethod::ParamShift,
            bound: BoundConstants::CALIBRATED,
        }
    }
}

impl PruneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        if self.eta_cap.is_nan() || self.eta_cap < 0.0 {
            return Err(Error::Config(format!(
                "eta_cap must be >= 0, got {}",
                self.eta_cap
            )));
        }
        if self.max_neighbors == 0 {
            return Err(Error::Config("max_neighbors must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if let LocalityPolicy::QubitBlock(0) = self.locality_policy {
            return Err(Error::Config("qubit block size must be at least 1".into()));
        }
        Ok(())
    }
}

/// One connected component and how it was merged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub subgroup: String,
    pub core: usize,
    /// Node ids (smallest gate id of each unit), ascending.
    pub members: Vec<usize>,
    /// Every gate touched by the merge.
    pub gates: Vec<usize>,
    pub alphas: Vec<f64>,
    pub sensitivities: Vec<f64>,
    pub eta: f64,
    pub delta_max: f64,
    pub theta_new: Option<f64>,
    pub mode: MergeMode,
    /// False when a non-member gate on a member qubit sits between members.
    pub contiguous: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub partition: f64,
    pub graph: f64,
    pub components: f64,
    pub sensitivity: f64,
    pub merge: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub config: PruneConfig,
    pub num_subgroups: usize,
    pub components: Vec<ComponentReport>,
    pub params_before: usize,
    pub params_after: usize,
    pub compression: f64,
    pub left_percent: f64,
    pub edges: usize,
    pub pairs_evaluated: usize,
    pub max_degree_observed: usize,
    /// Edges joining different subgroup labels; must be 0.
    pub cross_label_edges: usize,
    pub timing: PhaseTimings,
    pub threads: usize,
    #[serde(skip)]
    pub pairs: Vec<(String, PairRecord)>,
}

impl PruneReport {
    /// CSV of every evaluated candidate pair.
    pub fn pairs_csv(&self) -> String {
        let mut s = String::from("subgroup,a,b,coeff_distance,distance,method,delta_x,eta\n");
        for (label, p) in &self.pairs {
            s.push_str(&format!(
                "{label},{},{},{:.12e},{:.12e},{:?},{:.12e},{:.12e}\n",
                p.a, p.b, p.coeff_distance, p.distance, p.method, p.delta_x, p.eta
            ));
        }
        s
    }

    pub fn merged_components(&self) -> impl Iterator<Item = &ComponentReport> {
        self.components.iter().filter(|c| c.members.len() > 1)
    }
}

fn seconds(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// True when no gate outside `gates` acting on their qubits lies between the
/// first and last member.
fn is_contiguous(circuit: &Circuit, gates: &[usize]) -> bool {
    let members: BTreeSet<usize> = gates.iter().copied().collect();
    let (Some(&lo), Some(&hi)) = (members.first(), members.last()) else {
        return true;
    };
    let qubits: BTreeSet<usize> = gates
        .iter()
        .flat_map(|&g| circuit.gates[g].qubits.clone())
        .collect();
    (lo..=hi)
        .filter(|k| !members.contains(k))
        .all(|k| circuit.gates[k].qubits.iter().all(|q| !qubits.contains(q)))
}

/// Runs the full pipeline and returns the pruned circuit with its report.
/// No training happens inside; the result is deterministic for a fixed seed.
pub fn prune(
    circuit: &Circuit,
    objective: &Objective,
    config: &PruneConfig,
) -> Result<(Circuit, PruneReport)> {
    config.validate()?;
    circuit.validate()?;
    let start = Instant::now();
    let mut timing = PhaseTimings::default();
    let batch = objective.batch(config.batch_size, config.seed);
    let references = batch.initial_states();

    let t = Instant::now();
    let subgroups = partition(circuit, config.locality_policy)?;
    let nodes: Vec<Vec<Node>> = subgroups
        .iter()
        .map(|s| nodes_of(circuit, s, config.locality_policy))
        .collect::<Result<_>>()?;
    timing.partition = seconds(t);

    let t = Instant::now();
    let graphs = subgroups
        .par_iter()
        .map(|s| build_graph(circuit, s, &references, config))
        .collect::<Result<Vec<_>>>()?;
    timing.graph = seconds(t);

    let t = Instant::now();
    let comps: Vec<Vec<Vec<usize>>> = graphs.iter().map(components).collect();
    timing.components = seconds(t);

    let t = Instant::now();
    let any_merge = comps.iter().flatten().any(|c| c.len() > 1);
    let gate_grads = if any_merge {
        gate_gradients(circuit, &batch, config.sensitivity_method)?
    } else {
        Vec::new()
    };
    timing.sensitivity = seconds(t);

    let t = Instant::now();
    let mut out = circuit.clone();
    let mut deleted = BTreeSet::new();
    let mut next_tie = circuit
        .gates
        .iter()
        .filter_map(|g| g.tie)
        .max()
        .map_or(0, |t| t + 1);
    let mut reports = Vec::new();
    for ((graph, comp_list), node_list) in graphs.iter().zip(&comps).zip(&nodes) {
        for comp in comp_list {
            let members: Vec<&Node> = comp
                .iter()
                .map(|id| {
                    node_list
                        .iter()
                        .find(|n| n.gate == *id)
                        .expect("component node")
                })
                .collect();
            let gates: Vec<usize> = members.iter().flat_map(|n| n.members.clone()).collect();
            let generators: Vec<_> = members.iter().map(|n| n.generator.clone()).collect();
            let eta = max_commutator(&generators)?;
            let bound = delta_max(members.len(), config.epsilon, eta, config.bound);
            if members.len() == 1 {
                reports.push(ComponentReport {
                    subgroup: graph.label.to_string(),
                    core: comp[0],
                    members: comp.clone(),
                    gates,
                    alphas: vec![1.0],
                    sensitivities: Vec::new(),
                    eta,
                    delta_max: bound,
                    theta_new: None,
                    mode: config.merge_mode,
                    contiguous: true,
                });
                continue;
            }
            let sens: Vec<f64> = members
                .iter()
                .map(|n| unit_sensitivity(circuit, &n.members, &gate_grads))
                .collect();
            let core_gate = &circuit.gates[comp[select_core(comp, &sens)]];
            let axis = core_gate.kind.axis();
            let merged = merge(comp, &generators, &sens, axis)?;
            let mode = if axis.is_some() {
                config.merge_mode
            } else {
                MergeMode::Replace
            };
            match mode {
                MergeMode::Tie => {
                    let theta = merged.theta_new.unwrap_or(0.0);
                    let theta = if theta.abs() > std::f64::consts::PI {
                        wrap_angle(theta)
                    } else {
                        theta
                    };
                    for &g in &gates {
                        out.gates[g].theta = Some(theta);
                        out.gates[g].tie = Some(next_tie);
                    }
                    next_tie += 1;
                }
                MergeMode::Replace => {
                    let x_new = merged.generator.relocated(core_gate.qubits.clone())?;
                    let mut replacement =
                        GateInstance::generic(core_gate.id, x_new, core_gate.layer);
                    replacement.qubits = core_gate.qubits.clone();
                    let dev = replacement.local_unitary()?.unitarity_deviation();
                    if dev > 1e-10 {
                        return Err(Error::NotUnitary { deviation: dev });
                    }
                    out.gates[core_gate.id] = replacement;
                    deleted.extend(gates.iter().copied().filter(|&g| g != core_gate.id));
                }
            }
            reports.push(ComponentReport {
                subgroup: graph.label.to_string(),
                core: merged.core,
                members: comp.clone(),
                contiguous: is_contiguous(circuit, &gates),
                gates,
                alphas: merged.alphas,
                sensitivities: sens,
                eta,
                delta_max: bound,
                theta_new: if mode == MergeMode::Tie {
                    merged.theta_new
                } else {
                    None
                },
                mode,
            });
        }
    }
    if !deleted.is_empty() {
        out.gates.retain(|g| !deleted.contains(&g.id));
        out.renumber();
    }
    out.validate()?;
    timing.merge = seconds(t);
    timing.total = seconds(start);

    let params_before = circuit.num_parameters();
    let params_after = out.num_parameters();
    let report = PruneReport {
        config: config.clone(),
        num_subgroups: subgroups.len(),
        params_before,
        params_after,
        compression: params_before as f64 / params_after.max(1) as f64,
        left_percent: 100.0 * params_after as f64 / params_before.max(1) as f64,
        edges: graphs.iter().map(|g| g.edges.len()).sum(),
        pairs_evaluated: graphs.iter().map(|g| g.evaluated.len()).sum(),
        max_degree_observed: graphs
            .iter()
            .map(|g| g.max_degree_observed)
            .max()
            .unwrap_or(0),
        cross_label_edges: graphs.iter().map(RedundancyGraph::cross_label_edges).sum(),
        timing,
        threads: rayon::current_num_threads(),
        pairs: graphs
            .iter()
            .flat_map(|g| g.evaluated.iter().map(move |p| (g.label.to_string(), *p)))
            .collect(),
        components: reports,
    };
    Ok((out, report))
}
