use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PruneConfig;
use crate::circuit::{apply_gate, Circuit, StateVector};
use crate::dualrep::{extract_generator, subgroup_label, Generator, LocalityPolicy, SubgroupLabel};
use crate::error::{Error, Result};
use crate::fsdist::{
    bch_diagnostics, bch_unitary, fast_overlap_local, overlap_gates_fast_with, overlap_to_distance,
    LocalReference, ReferenceStrategy,
};

/// Parameterized gates sharing one subgroup label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subgroup {
    pub label: SubgroupLabel,
    /// Gate ids in circuit order.
    pub gates: Vec<usize>,
}

/// Disjoint cover of the parameterized gates by subgroup label, ordered by
/// each subgroup's first gate id. CNOTs are excluded.
pub fn partition(circuit: &Circuit, policy: LocalityPolicy) -> Result<Vec<Subgroup>> {
    let mut groups: BTreeMap<SubgroupLabel, Vec<usize>> = BTreeMap::new();
    for g in circuit.gates.iter().filter(|g| g.is_parameterized()) {
        groups
            .entry(subgroup_label(g, policy)?)
            .or_default()
            .push(g.id);
    }
    let mut out: Vec<Subgroup> = groups
        .into_iter()
        .map(|(label, gates)| Subgroup { label, gates })
        .collect();
    out.sort_by_key(|s| s.gates[0]);
    Ok(out)
}

/// A graph node: one gate, or a set of tied gates sharing one angle.
#[derive(Clone, Debug)]
pub struct Node {
    /// Smallest member id; used as the node id.
    pub gate: usize,
    pub members: Vec<usize>,
    pub generator: Generator,
    pub label: SubgroupLabel,
}

/// Nodes of a subgroup, collapsing gates that share a tie id.
pub fn nodes_of(
    circuit: &Circuit,
    subgroup: &Subgroup,
    policy: LocalityPolicy,
) -> Result<Vec<Node>> {
    let mut by_unit: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for &id in &subgroup.gates {
        // untied gates are their own unit
        let key = match circuit.gates[id].tie {
            Some(t) => (0, t),
            None => (1, id),
        };
        by_unit.entry(key).or_default().push(id);
    }
    let mut nodes = by_unit
        .into_values()
        .map(|members| {
            let rep = &circuit.gates[members[0]];
            Ok(Node {
                gate: rep.id,
                generator: extract_generator(rep)?,
                label: subgroup_label(rep, policy)?,
                members,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    nodes.sort_by_key(|n| n.gate);
    Ok(nodes)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistanceMethod {
    Fast,
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// One evaluated candidate pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub a: usize,
    pub b: usize,
    pub coeff_distance: f64,
    /// Max over the reference batch, radians.
    pub distance: f64,
    pub method: DistanceMethod,
    pub delta_x: f64,
    pub eta: f64,
}

/// Redundancy graph of one subgroup. Edges are stored once with `a < b`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RedundancyGraph {
    pub label: SubgroupLabel,
    pub nodes: Vec<usize>,
    pub node_labels: Vec<SubgroupLabel>,
    pub edges: Vec<Edge>,
    pub epsilon: f64,
    pub max_degree_observed: usize,
    #[serde(skip)]
    pub evaluated: Vec<PairRecord>,
}

impl RedundancyGraph {
    /// Every edge joins two nodes of this graph carrying the graph's label,
    /// weights respect the threshold, and no edge is repeated.
    pub fn check_invariants(&self) -> Result<()> {
        let index: BTreeMap<usize, usize> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(k, &n)| (n, k))
            .collect();
        let mut seen = BTreeSet::new();
        for e in &self.edges {
            let (Some(&ia), Some(&ib)) = (index.get(&e.a), index.get(&e.b)) else {
                return Err(Error::InvariantViolation(format!(
                    "edge ({}, {}) leaves the node set",
                    e.a, e.b
                )));
            };
            if self.node_labels[ia] != self.label || self.node_labels[ib] != self.label {
                return Err(Error::InvariantViolation(format!(
                    "edge ({}, {}) joins labels {} and {} in subgroup {}",
                    e.a, e.b, self.node_labels[ia], self.node_labels[ib], self.label
                )));
            }
            if e.a >= e.b || !seen.insert((e.a, e.b)) {
                return Err(Error::InvariantViolation(format!(
                    "edge ({}, {}) is a loop or duplicate",
                    e.a, e.b
                )));
            }
            if e.weight.is_nan() || e.weight > self.epsilon {
                return Err(Error::InvariantViolation(format!(
                    "edge ({}, {}) weight {} exceeds epsilon {}",
                    e.a, e.b, e.weight, self.epsilon
                )));
            }
        }
        Ok(())
    }

    /// Number of edges where the label invariant fails (always 0 for graphs
    /// built by [`build_graph`]).
    pub fn cross_label_edges(&self) -> usize {
        let label_of: BTreeMap<usize, &SubgroupLabel> =
            self.nodes.iter().copied().zip(&self.node_labels).collect();
        self.edges
            .iter()
            .filter(|e| label_of.get(&e.a) != label_of.get(&e.b))
            .count()
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges
            .iter()
            .filter(|e| e.a == node || e.b == node)
            .count()
    }
}

/// Per-node data reused across all pairs of a subgroup.
struct NodeCache {
    refs: Vec<Vec<LocalReference>>,
    applied: Vec<Vec<StateVector>>,
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Builds the ε-redundancy graph of one subgroup.
///
/// Each node examines its `max_neighbors` nearest candidates in Pauli
/// coefficient space; a candidate pair becomes an edge when its FS distance,
/// maximized over `reference_states`, is at most ε.
pub fn build_graph(
    circuit: &Circuit,
    subgroup: &Subgroup,
    reference_states: &[StateVector],
    config: &PruneConfig,
) -> Result<RedundancyGraph> {
    if reference_states.is_empty() {
        return Err(Error::Empty("reference states"));
    }
    let nodes = nodes_of(circuit, subgroup, config.locality_policy)?;
    let n = nodes.len();
    let coeffs: Vec<Vec<f64>> = nodes.iter().map(|nd| nd.generator.coeff_vector()).collect();

    let mut pairs = BTreeSet::new();
    for i in 0..n {
        let mut cand: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (euclid(&coeffs[i], &coeffs[j]), j))
            .collect();
        let d = config.max_neighbors.min(cand.len());
        if d < cand.len() {
            cand.select_nth_unstable_by(d, |x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        }
        for &(_, j) in &cand[..d] {
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    let pairs: Vec<(usize, usize)> = pairs.into_iter().collect();

    let cache = NodeCache {
        refs: if config.use_fast_distance {
            nodes
                .par_iter()
                .map(|nd| {
                    reference_states
                        .iter()
                        .map(|s| LocalReference::new(s, nd.generator.support()))
                        .collect()
                })
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        },
        applied: if config.use_fast_distance {
            Vec::new()
        } else {
            nodes
                .par_iter()
                .map(|nd| {
                    reference_states
                        .iter()
                        .map(|s| apply_gate(s, &circuit.gates[nd.gate]))
                        .collect()
                })
                .collect::<Result<_>>()?
        },
    };

    let evaluated = pairs
        .par_iter()
        .map(|&(i, j)| {
            evaluate_pair(
                circuit,
                &nodes,
                &cache,
                i,
                j,
                &coeffs,
                reference_states,
                config,
            )
        })
        .collect::<Result<Vec<PairRecord>>>()?;

    let edges: Vec<Edge> = evaluated
        .iter()
        .filter(|r| r.distance <= config.epsilon)
        .map(|r| Edge {
            a: r.a,
            b: r.b,
            weight: r.distance,
        })
        .collect();
    let mut degree: BTreeMap<usize, usize> = BTreeMap::new();
    for e in &edges {
        *degree.entry(e.a).or_default() += 1;
        *degree.entry(e.b).or_default() += 1;
    }
    let graph = RedundancyGraph {
        label: subgroup.label.clone(),
        nodes: nodes.iter().map(|nd| nd.gate).collect(),
        node_labels: nodes.iter().map(|nd| nd.label.clone()).collect(),
        edges,
        epsilon: config.epsilon,
        max_degree_observed: degree.values().copied().max().unwrap_or(0),
        evaluated,
    };
    graph.check_invariants()?;
    Ok(graph)
}

#[allow(clippy::too_many_arguments)]
fn evaluate_pair(
    circuit: &Circuit,
    nodes: &[Node],
    cache: &NodeCache,
    i: usize,
    j: usize,
    coeffs: &[Vec<f64>],
    reference_states: &[StateVector],
    config: &PruneConfig,
) -> Result<PairRecord> {
    let (xi, xj) = (&nodes[i].generator, &nodes[j].generator);
    let (delta_x, eta) = bch_diagnostics(xi, xj)?;
    let fast = config.use_fast_distance && eta <= config.eta_cap;
    let mut worst_overlap = f64::INFINITY;
    if fast {
        let same = xi.support() == xj.support();
        if !same && config.reference_strategy == ReferenceStrategy::Embed {
            for s in reference_states {
                worst_overlap = worst_overlap.min(overlap_gates_fast_with(
                    xi,
                    xj,
                    s,
                    config.reference_strategy,
                )?);
            }
        } else {
            let u = bch_unitary(xi, xj)?;
            for (ri, rj) in cache.refs[i].iter().zip(&cache.refs[j]) {
                worst_overlap = worst_overlap.min(fast_overlap_local(
                    &u,
                    ri,
                    rj,
                    same,
                    config.reference_strategy,
                ));
            }
        }
    } else if cache.applied.is_empty() {
        let (gi, gj) = (&circuit.gates[nodes[i].gate], &circuit.gates[nodes[j].gate]);
        for s in reference_states {
            let a = apply_gate(s, gi)?;
            let b = apply_gate(s, gj)?;
            worst_overlap = worst_overlap.min(a.inner(&b)?.norm());
        }
    } else {
        for (a, b) in cache.applied[i].iter().zip(&cache.applied[j]) {
            worst_overlap = worst_overlap.min(a.inner(b)?.norm());
        }
    }
    Ok(PairRecord {
        a: nodes[i].gate,
        b: nodes[j].gate,
        coeff_distance: euclid(&coeffs[i], &coeffs[j]),
        distance: overlap_to_distance(worst_overlap),
        method: if fast {
            DistanceMethod::Fast
        } else {
            DistanceMethod::Exact
        },
        delta_x,
        eta,
    })
}

/// Connected components by union-find, each sorted, ordered by smallest member.
pub fn components(graph: &RedundancyGraph) -> Vec<Vec<usize>> {
    let index: BTreeMap<usize, usize> = graph
        .nodes
        .iter()
        .enumerate()
        .map(|(k, &n)| (n, k))
        .collect();
    let mut parent: Vec<usize> = (0..graph.nodes.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for e in &graph.edges {
        let (a, b) = (
            find(&mut parent, index[&e.a]),
            find(&mut parent, index[&e.b]),
        );
        if a != b {
            // attach the larger root below the smaller to keep roots minimal
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for k in 0..graph.nodes.len() {
        let r = find(&mut parent, k);
        groups.entry(r).or_default().push(graph.nodes[k]);
    }
    let mut out: Vec<Vec<usize>> = groups
        .into_values()
        .map(|mut c| {
            c.sort_unstable();
            c
        })
        .collect();
    out.sort_by_key(|c| c[0]);
    out
}
