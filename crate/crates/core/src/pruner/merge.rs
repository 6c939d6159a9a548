use serde::{Deserialize, Serialize};

use super::BoundConstants;
use crate::circuit::{Circuit, GateInstance};
use crate::dualrep::{extract_generator, Generator};
use crate::error::{Error, Result};
use crate::qmath::{commutator, op_norm, Pauli};
use crate::train::{gate_gradients, GradMethod, Objective};

/// Sensitivities at or below this are treated as zero.
pub const ZERO_SENSITIVITY: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum MergeMode {
    /// One GENERIC gate at the core's position replaces the component.
    Replace,
    /// Every member keeps its place and shares one angle.
    #[default]
    Tie,
}

impl std::str::FromStr for MergeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "replace" => Ok(MergeMode::Replace),
            "tie" => Ok(MergeMode::Tie),
            _ => Err(Error::Parse(format!(
                "unknown merge mode '{s}' (replace | tie)"
            ))),
        }
    }
}

/// `||grad_c L||` from per-gate gradients, where `c` are the Pauli
/// coefficients of the unit's generator. A rotation has `c = theta / 2`, so
/// its sensitivity is `2 |dL/dtheta|`; tied members share that coefficient and
/// their angle derivatives add.
pub fn unit_sensitivity(circuit: &Circuit, members: &[usize], gate_grads: &[Vec<f64>]) -> f64 {
    let rep = &circuit.gates[members[0]];
    if rep.kind.axis().is_some() {
        let d_theta: f64 = members
            .iter()
            .map(|&m| gate_grads[m].first().copied().unwrap_or(0.0))
            .sum();
        2.0 * d_theta.abs()
    } else {
        gate_grads[members[0]]
            .iter()
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

/// Sensitivity of one gate: parameter shift for rotations, central
/// differences on the generator coefficients for GENERIC gates.
pub fn sensitivity(
    gate: &GateInstance,
    circuit: &Circuit,
    objective: &Objective,
    method: GradMethod,
) -> Result<f64> {
    if !gate.is_parameterized() {
        return Err(Error::NotParameterized {
            id: gate.id,
            kind: gate.kind.to_string(),
        });
    }
    let grads = gate_gradients(circuit, objective, method)?;
    Ok(unit_sensitivity(circuit, &[gate.id], &grads))
}

/// Index of the core member: maximal sensitivity, ties to the smallest id.
pub fn select_core(ids: &[usize], sensitivities: &[f64]) -> usize {
    let mut best = 0;
    for k in 1..ids.len() {
        let better = sensitivities[k] > sensitivities[best]
            || (sensitivities[k] == sensitivities[best] && ids[k] < ids[best]);
        if better {
            best = k;
        }
    }
    best
}

/// `S_m / Σ S` over all members, or uniform when every sensitivity vanishes.
pub fn merge_weights(sensitivities: &[f64]) -> Vec<f64> {
    let n = sensitivities.len() as f64;
    if sensitivities.iter().all(|&s| s <= ZERO_SENSITIVITY) {
        return vec![1.0 / n; sensitivities.len()];
    }
    let total: f64 = sensitivities.iter().sum();
    sensitivities.iter().map(|s| s / total).collect()
}

/// Result of merging one component.
#[derive(Clone, Debug)]
pub struct Merged {
    pub core: usize,
    /// Weights of all members including the core, aligned with the input ids.
    pub alphas: Vec<f64>,
    /// `X_core + Σ_{m != core} α_m X_m`, on the core's support.
    pub generator: Generator,
    /// Twice the coefficient of `generator` along `axis`, when one is given.
    pub theta_new: Option<f64>,
}

/// Weighted Lie-algebra addition of the component's generators.
pub fn merge(
    ids: &[usize],
    generators: &[Generator],
    sensitivities: &[f64],
    axis: Option<Pauli>,
) -> Result<Merged> {
    if ids.is_empty() {
        return Err(Error::Empty("component"));
    }
    let core = select_core(ids, sensitivities);
    let alphas = merge_weights(sensitivities);
    let mut x_new = generators[core].clone();
    for (k, g) in generators.iter().enumerate() {
        if k != core {
            x_new = x_new.add_scaled(g, alphas[k])?;
        }
    }
    let theta_new = axis.map(|p| 2.0 * x_new.coeff(&[p]));
    Ok(Merged {
        core: ids[core],
        alphas,
        generator: x_new,
        theta_new,
    })
}

/// Largest pairwise commutator norm of a component.
pub fn max_commutator(generators: &[Generator]) -> Result<f64> {
    let mut eta: f64 = 0.0;
    for (a, ga) in generators.iter().enumerate() {
        for gb in &generators[a + 1..] {
            eta = eta.max(op_norm(&commutator(ga.matrix(), gb.matrix())?)?);
        }
    }
    Ok(eta)
}

/// `C1 |C| ε + C2 |C|^2 η`.
pub fn delta_max(size: usize, epsilon: f64, eta: f64, bound: BoundConstants) -> f64 {
    let k = size as f64;
    bound.c1 * k * epsilon + bound.c2 * k * k * eta
}

/// Generators of a list of gates.
pub fn generators_of(circuit: &Circuit, ids: &[usize]) -> Result<Vec<Generator>> {
    ids.iter()
        .map(|&id| extract_generator(&circuit.gates[id]))
        .collect()
}
