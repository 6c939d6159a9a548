//! Circuit representation, hardware-efficient ansatz, and statevector simulation.

mod hamiltonian;
mod json;
mod state;

pub use hamiltonian::{pauli_expectation, Hamiltonian};
pub use state::{amplitude_embed, StateVector};

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dualrep::Generator;
use crate::error::{Error, Result};
use crate::qmath::{mat_exp, ComplexMatrix, Pauli, C64, ONE, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateKind {
    #[serde(rename = "RX")]
    Rx,
    #[serde(rename = "RY")]
    Ry,
    #[serde(rename = "RZ")]
    Rz,
    #[serde(rename = "CNOT")]
    Cnot,
    #[serde(rename = "GENERIC")]
    Generic,
}

impl GateKind {
    /// Rotation axis for RX/RY/RZ.
    pub fn axis(self) -> Option<Pauli> {
        match self {
            GateKind::Rx => Some(Pauli::X),
            GateKind::Ry => Some(Pauli::Y),
            GateKind::Rz => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn from_axis(axis: Pauli) -> Option<Self> {
        match axis {
            Pauli::X => Some(GateKind::Rx),
            Pauli::Y => Some(GateKind::Ry),
            Pauli::Z => Some(GateKind::Rz),
            Pauli::I => None,
        }
    }

    pub fn is_parameterized(self) -> bool {
        self != GateKind::Cnot
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Rx => "RX",
            GateKind::Ry => "RY",
            GateKind::Rz => "RZ",
            GateKind::Cnot => "CNOT",
            GateKind::Generic => "GENERIC",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One gate of a circuit.
///
/// Rotations implement `exp(-i theta P / 2)`. GENERIC gates implement
/// `exp(X)` for their stored generator. Gates sharing a `tie` id share one
/// trainable angle.
#[derive(Clone, Debug, PartialEq)]
pub struct GateInstance {
    pub id: usize,
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub theta: Option<f64>,
    pub layer: usize,
    pub generator_override: Option<Generator>,
    pub tie: Option<usize>,
}

impl GateInstance {
    pub fn rotation(id: usize, kind: GateKind, qubit: usize, theta: f64, layer: usize) -> Self {
        debug_assert!(kind.axis().is_some());
        Self {
            id,
            kind,
            qubits: vec![qubit],
            theta: Some(theta),
            layer,
            generator_override: None,
            tie: None,
        }
    }

    pub fn cnot(id: usize, control: usize, target: usize, layer: usize) -> Self {
        Self {
            id,
            kind: GateKind::Cnot,
            qubits: vec![control, target],
            theta: None,
            layer,
            generator_override: None,
            tie: None,
        }
    }

    pub fn generic(id: usize, generator: Generator, layer: usize) -> Self {
        Self {
            id,
            kind: GateKind::Generic,
            qubits: generator.support().to_vec(),
            theta: None,
            layer,
            generator_override: Some(generator),
            tie: None,
        }
    }

    pub fn is_parameterized(&self) -> bool {
        self.kind.is_parameterized()
    }

    /// Checks the per-gate invariants against a register of `num_qubits`.
    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        let bad = |reason: String| Error::InvalidGate {
            id: self.id,
            reason,
        };
        for (k, &q) in self.qubits.iter().enumerate() {
            if q >= num_qubits {
                return Err(Error::QubitOutOfRange {
                    qubit: q,
                    num_qubits,
                });
            }
            if self.qubits[..k].contains(&q) {
                return Err(bad(format!("repeated qubit {q}")));
            }
        }
        match self.kind {
            GateKind::Rx | GateKind::Ry | GateKind::Rz => {
                if self.qubits.len() != 1 {
                    return Err(bad("rotations act on exactly one qubit".into()));
                }
                match self.theta {
                    Some(t) if t.is_finite() => {}
                    Some(_) => return Err(Error::NonFinite(format!("theta of gate {}", self.id))),
                    None => return Err(bad("rotation without theta".into())),
                }
            }
            GateKind::Cnot => {
                if self.qubits.len() != 2 {
                    return Err(bad("CNOT needs control and target".into()));
                }
                if self.theta.is_some() {
                    return Err(bad("CNOT carries no parameter".into()));
                }
            }
            GateKind::Generic => {
                let g = self
                    .generator_override
                    .as_ref()
                    .ok_or_else(|| bad("GENERIC gate without generator".into()))?;
                if g.support() != self.qubits.as_slice() {
                    return Err(bad("generator support differs from gate qubits".into()));
                }
                if !(1..=2).contains(&self.qubits.len()) {
                    return Err(bad("GENERIC gates act on one or two qubits".into()));
                }
                let dev = g.matrix().anti_hermiticity_deviation();
                if dev > 1e-10 {
                    return Err(bad(format!("generator not anti-Hermitian ({dev:.2e})")));
                }
            }
        }
        Ok(())
    }

    /// Gate unitary on its own qubits (first qubit most significant).
    pub fn local_unitary(&self) -> Result<ComplexMatrix> {
        match self.kind {
            GateKind::Rx | GateKind::Ry | GateKind::Rz => {
                let theta = self.theta.ok_or_else(|| Error::InvalidGate {
                    id: self.id,
                    reason: "rotation without theta".into(),
                })?;
                Ok(rotation_matrix(self.kind.axis().unwrap_or(Pauli::Z), theta))
            }
            GateKind::Cnot => Ok(cnot_matrix()),
            GateKind::Generic => {
                let g = self
                    .generator_override
                    .as_ref()
                    .ok_or_else(|| Error::InvalidGate {
                        id: self.id,
                        reason: "GENERIC gate without generator".into(),
                    })?;
                mat_exp(g.matrix())
            }
        }
    }

    /// The inverse gate.
    pub fn inverse(&self) -> Self {
        let mut g = self.clone();
        g.theta = self.theta.map(|t| -t);
        g.generator_override = self.generator_override.as_ref().map(Generator::negated);
        g
    }
}

/// `exp(-i theta P / 2)` for a single-qubit Pauli axis.
pub fn rotation_matrix(axis: Pauli, theta: f64) -> ComplexMatrix {
    let (s, c) = (theta / 2.0).sin_cos();
    let c = C64::new(c, 0.0);
    match axis {
        Pauli::X => {
            ComplexMatrix::from_rows(&[vec![c, C64::new(0.0, -s)], vec![C64::new(0.0, -s), c]])
        }
        Pauli::Y => {
            ComplexMatrix::from_rows(&[vec![c, C64::new(-s, 0.0)], vec![C64::new(s, 0.0), c]])
        }
        Pauli::Z => ComplexMatrix::diag(&[
            C64::from_polar(1.0, -theta / 2.0),
            C64::from_polar(1.0, theta / 2.0),
        ]),
        Pauli::I => ComplexMatrix::identity(2).scale(C64::from_polar(1.0, -theta / 2.0)),
    }
}

/// CNOT with the first qubit as control.
pub fn cnot_matrix() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[
        vec![ONE, ZERO, ZERO, ZERO],
        vec![ZERO, ONE, ZERO, ZERO],
        vec![ZERO, ZERO, ZERO, ONE],
        vec![ZERO, ZERO, ONE, ZERO],
    ])
}

/// An ordered gate list on a fixed register.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub num_qubits: usize,
    pub num_layers: usize,
    pub gates: Vec<GateInstance>,
}

impl Circuit {
    pub fn new(num_qubits: usize, num_layers: usize, gates: Vec<GateInstance>) -> Result<Self> {
        let c = Self {
            num_qubits,
            num_layers,
            gates,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn empty(num_qubits: usize) -> Self {
        Self {
            num_qubits,
            num_layers: 1,
            gates: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (k, g) in self.gates.iter().enumerate() {
            if g.id != k {
                return Err(Error::InvalidGate {
                    id: g.id,
                    reason: format!("gate ids must be dense; expected {k}"),
                });
            }
            if g.layer >= self.num_layers {
                return Err(Error::InvalidGate {
                    id: g.id,
                    reason: format!("layer {} >= num_layers {}", g.layer, self.num_layers),
                });
            }
            g.validate(self.num_qubits)?;
        }
        self.validate_ties()
    }

    fn validate_ties(&self) -> Result<()> {
        let mut seen: std::collections::HashMap<usize, &GateInstance> = Default::default();
        for g in &self.gates {
            let Some(t) = g.tie else { continue };
            if g.kind.axis().is_none() {
                return Err(Error::InvalidGate {
                    id: g.id,
                    reason: "only rotations can be tied".into(),
                });
            }
            if let Some(first) = seen.get(&t) {
                if first.theta != g.theta {
                    return Err(Error::InvalidGate {
                        id: g.id,
                        reason: format!("tied gates {} and {} disagree on theta", first.id, g.id),
                    });
                }
            } else {
                seen.insert(t, g);
            }
        }
        Ok(())
    }

    /// Rewrites ids as `0..N` in list order.
    pub fn renumber(&mut self) {
        for (k, g) in self.gates.iter_mut().enumerate() {
            g.id = k;
        }
    }

    pub fn num_parameterized_gates(&self) -> usize {
        self.gates.iter().filter(|g| g.is_parameterized()).count()
    }

    /// Number of independent trainable scalars.
    pub fn num_parameters(&self) -> usize {
        self.param_layout().len()
    }

    pub fn param_layout(&self) -> ParamLayout {
        ParamLayout::of(self)
    }

    /// The circuit implementing the inverse unitary.
    pub fn inverse(&self) -> Self {
        let mut gates: Vec<GateInstance> =
            self.gates.iter().rev().map(GateInstance::inverse).collect();
        for (k, g) in gates.iter_mut().enumerate() {
            g.id = k;
        }
        Self {
            num_qubits: self.num_qubits,
            num_layers: self.num_layers,
            gates,
        }
    }

    /// Precomputes gate unitaries for repeated simulation.
    pub fn compile(&self) -> Result<CompiledCircuit> {
        let ops = self
            .gates
            .iter()
            .map(|g| {
                g.validate(self.num_qubits)?;
                let matrix = match g.kind {
                    GateKind::Cnot => None,
                    _ => Some(g.local_unitary()?),
                };
                Ok(CompiledGate {
                    qubits: g.qubits.clone(),
                    matrix,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CompiledCircuit {
            num_qubits: self.num_qubits,
            ops,
        })
    }

    /// Left-to-right application of all gates.
    pub fn run(&self, initial: &StateVector) -> Result<StateVector> {
        self.compile()?.run(initial)
    }
}

/// A gate with its unitary evaluated; `matrix` is `None` for CNOT.
#[derive(Clone, Debug)]
pub struct CompiledGate {
    pub qubits: Vec<usize>,
    pub matrix: Option<ComplexMatrix>,
}

impl CompiledGate {
    pub fn apply(&self, state: &mut StateVector) -> Result<()> {
        match &self.matrix {
            Some(m) => state.apply_local(&self.qubits, m),
            None => state.apply_cnot(self.qubits[0], self.qubits[1]),
        }
    }

    pub fn apply_inverse(&self, state: &mut StateVector) -> Result<()> {
        match &self.matrix {
            Some(m) => state.apply_local(&self.qubits, &m.adjoint()),
            None => state.apply_cnot(self.qubits[0], self.qubits[1]),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CompiledCircuit {
    pub num_qubits: usize,
    pub ops: Vec<CompiledGate>,
}

impl CompiledCircuit {
    pub fn run(&self, initial: &StateVector) -> Result<StateVector> {
        if initial.num_qubits() != self.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                found: initial.num_qubits(),
            });
        }
        let mut state = initial.clone();
        for op in &self.ops {
            op.apply(&mut state)?;
        }
        let norm = state.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NormViolation { norm });
        }
        Ok(state)
    }
}

/// Applies a single gate to a copy of `state`.
pub fn apply_gate(state: &StateVector, gate: &GateInstance) -> Result<StateVector> {
    gate.validate(state.num_qubits())?;
    let mut out = state.clone();
    match gate.kind {
        GateKind::Cnot => out.apply_cnot(gate.qubits[0], gate.qubits[1])?,
        _ => out.apply_local(&gate.qubits, &gate.local_unitary()?)?,
    }
    Ok(out)
}

/// `<psi|H|psi>`.
pub fn expectation(state: &StateVector, h: &Hamiltonian) -> Result<f64> {
    h.expectation(state)
}

/// Layered hardware-efficient ansatz: RX, RY, RZ on every qubit, then a
/// nearest-neighbour CNOT chain. Angles are uniform in `[-π, π)`.
pub fn build_hea(num_qubits: usize, num_layers: usize, seed: u64) -> Result<Circuit> {
    if num_qubits < 2 || num_layers < 1 {
        return Err(Error::Config(format!(
            "ansatz needs >= 2 qubits and >= 1 layer, got {num_qubits} x {num_layers}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gates = Vec::new();
    for layer in 0..num_layers {
        for q in 0..num_qubits {
            for kind in [GateKind::Rx, GateKind::Ry, GateKind::Rz] {
                let theta = rng.random_range(-PI..PI);
                gates.push(GateInstance::rotation(gates.len(), kind, q, theta, layer));
            }
        }
        for q in 0..num_qubits - 1 {
            gates.push(GateInstance::cnot(gates.len(), q, q + 1, layer));
        }
    }
    Circuit::new(num_qubits, num_layers, gates)
}

/// One trainable scalar of a circuit.
#[derive(Clone, Debug, PartialEq)]
pub enum ParamSlot {
    /// Angle shared by the listed gate indices (one entry unless tied).
    Angle(Vec<usize>),
    /// Coefficient `term` of a GENERIC gate's generator.
    GeneratorCoeff { gate: usize, term: usize },
}

/// Mapping from a flat parameter vector to gate fields.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamLayout {
    pub slots: Vec<ParamSlot>,
}

impl ParamLayout {
    fn of(circuit: &Circuit) -> Self {
        let mut slots = Vec::new();
        let mut tie_slot: std::collections::HashMap<usize, usize> = Default::default();
        for (k, g) in circuit.gates.iter().enumerate() {
            match g.kind {
                GateKind::Cnot => {}
                GateKind::Generic => {
                    let n = g.generator_override.as_ref().map_or(0, |x| x.terms().len());
                    slots.extend((0..n).map(|term| ParamSlot::GeneratorCoeff { gate: k, term }));
                }
                _ => match g.tie {
                    Some(t) => match tie_slot.get(&t) {
                        Some(&s) => {
                            if let ParamSlot::Angle(members) = &mut slots[s] {
                                members.push(k);
                            }
                        }
                        None => {
                            tie_slot.insert(t, slots.len());
                            slots.push(ParamSlot::Angle(vec![k]));
                        }
                    },
                    None => slots.push(ParamSlot::Angle(vec![k])),
                },
            }
        }
        Self { slots }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn get(&self, circuit: &Circuit) -> Vec<f64> {
        self.slots
            .iter()
            .map(|s| match s {
                ParamSlot::Angle(members) => circuit.gates[members[0]].theta.unwrap_or(0.0),
                ParamSlot::GeneratorCoeff { gate, term } => circuit.gates[*gate]
                    .generator_override
                    .as_ref()
                    .map_or(0.0, |g| g.terms()[*term].coeff),
            })
            .collect()
    }

    pub fn set(&self, circuit: &mut Circuit, values: &[f64]) -> Result<()> {
        if values.len() != self.slots.len() {
            return Err(Error::DimensionMismatch {
                expected: self.slots.len(),
                found: values.len(),
            });
        }
        let mut generic_updates: std::collections::BTreeMap<usize, Vec<(usize, f64)>> =
            Default::default();
        for (slot, &v) in self.slots.iter().zip(values) {
            match slot {
                ParamSlot::Angle(members) => {
                    for &m in members {
                        circuit.gates[m].theta = Some(v);
                    }
                }
                ParamSlot::GeneratorCoeff { gate, term } => {
                    generic_updates.entry(*gate).or_default().push((*term, v));
                }
            }
        }
        for (gate, updates) in generic_updates {
            if let Some(g) = circuit.gates[gate].generator_override.as_mut() {
                let mut coeffs: Vec<f64> = g.terms().iter().map(|t| t.coeff).collect();
                for (term, v) in updates {
                    coeffs[term] = v;
                }
                *g = g.with_coeffs(&coeffs)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::PauliString;
    use std::f64::consts::FRAC_1_SQRT_2;

    /// Dense register unitary of a circuit via Kronecker products.
    fn dense_unitary(c: &Circuit) -> ComplexMatrix {
        let n = c.num_qubits;
        let dim = 1 << n;
        let mut total = ComplexMatrix::identity(dim);
        for g in &c.gates {
            let local = g.local_unitary().unwrap();
            let full = embed(&local, &g.qubits, n);
            total = &full * &total;
        }
        total
    }

    /// Embeds a local operator by building a permuted Kronecker product.
    fn embed(local: &ComplexMatrix, qubits: &[usize], n: usize) -> ComplexMatrix {
        // kron(local, I_rest) acts on a basis where `qubits` are the most
        // significant bits; permute into register order
        let k = qubits.len();
        let rest: Vec<usize> = (0..n).filter(|q| !qubits.contains(q)).collect();
        let big = local.kron(&ComplexMatrix::identity(1 << (n - k)));
        let to_register = |idx: usize| -> usize {
            let mut r = 0;
            for (pos, &q) in qubits.iter().enumerate() {
                if idx >> (n - 1 - pos) & 1 == 1 {
                    r |= 1 << q;
                }
            }
            for (pos, &q) in rest.iter().rev().enumerate() {
                if idx >> pos & 1 == 1 {
                    r |= 1 << q;
                }
            }
            r
        };
        let dim = 1 << n;
        let mut out = ComplexMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                out[(to_register(i), to_register(j))] = big[(i, j)];
            }
        }
        out
    }

    fn random_circuit(n: usize, gates: usize, seed: u64) -> Circuit {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut list = Vec::new();
        for id in 0..gates {
            let g = match rng.random_range(0..5) {
                0 => GateInstance::rotation(
                    id,
                    GateKind::Rx,
                    rng.random_range(0..n),
                    rng.random_range(-PI..PI),
                    0,
                ),
                1 => GateInstance::rotation(
                    id,
                    GateKind::Ry,
                    rng.random_range(0..n),
                    rng.random_range(-PI..PI),
                    0,
                ),
                2 => GateInstance::rotation(
                    id,
                    GateKind::Rz,
                    rng.random_range(0..n),
                    rng.random_range(-PI..PI),
                    0,
                ),
                3 => {
                    let a = rng.random_range(0..n);
                    let b = (a + rng.random_range(1..n)) % n;
                    GateInstance::cnot(id, a, b, 0)
                }
                _ => {
                    let a = rng.random_range(0..n);
                    let b = (a + rng.random_range(1..n)) % n;
                    let terms = vec![
                        PauliString::parse("XZ", rng.random_range(-1.0..1.0)).unwrap(),
                        PauliString::parse("YY", rng.random_range(-1.0..1.0)).unwrap(),
                    ];
                    GateInstance::generic(id, Generator::from_terms(vec![a, b], terms).unwrap(), 0)
                }
            };
            list.push(g);
        }
        Circuit::new(n, 1, list).unwrap()
    }

    fn random_state(n: usize, seed: u64) -> StateVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        StateVector::normalized(
            (0..1 << n)
                .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn hea_parameter_counts() {
        assert_eq!(build_hea(8, 12, 0).unwrap().num_parameters(), 288);
        assert_eq!(build_hea(10, 12, 0).unwrap().num_parameters(), 360);
        let small = build_hea(2, 1, 0).unwrap();
        assert_eq!(small.num_parameters(), 6);
        assert_eq!(
            small
                .gates
                .iter()
                .filter(|g| g.kind == GateKind::Cnot)
                .count(),
            1
        );
        assert!(build_hea(1, 3, 0).is_err());
    }

    #[test]
    fn hea_is_seeded() {
        assert_eq!(build_hea(3, 2, 9).unwrap(), build_hea(3, 2, 9).unwrap());
        assert_ne!(build_hea(3, 2, 9).unwrap(), build_hea(3, 2, 10).unwrap());
        let c = build_hea(3, 2, 9).unwrap();
        assert!(c
            .gates
            .iter()
            .filter_map(|g| g.theta)
            .all(|t| (-PI..PI).contains(&t)));
    }

    #[test]
    fn rz_on_zero_is_a_phase() {
        let g = GateInstance::rotation(0, GateKind::Rz, 0, 0.7, 0);
        let out = apply_gate(&StateVector::zero(1), &g).unwrap();
        let a = out.amplitudes()[0];
        assert!((a - C64::from_polar(1.0, -0.35)).norm() < 1e-15);
        assert!(out.amplitudes()[1].norm() < 1e-15);
    }

    #[test]
    fn cnot_truth_table() {
        // control qubit 0 set: |q1 q0> = |01> -> |11>
        let g = GateInstance::cnot(0, 0, 1, 0);
        let out = apply_gate(&StateVector::basis(2, 0b01), &g).unwrap();
        assert_eq!(out, StateVector::basis(2, 0b11));
        let out = apply_gate(&StateVector::basis(2, 0b10), &g).unwrap();
        assert_eq!(out, StateVector::basis(2, 0b10));
    }

    #[test]
    fn ry_half_pi_makes_plus() {
        let g = GateInstance::rotation(0, GateKind::Ry, 0, PI / 2.0, 0);
        let out = apply_gate(&StateVector::zero(1), &g).unwrap();
        for a in out.amplitudes() {
            assert!((a.re - FRAC_1_SQRT_2).abs() < 1e-15 && a.im.abs() < 1e-15);
        }
    }

    #[test]
    fn qubit_out_of_range_is_an_error() {
        let g = GateInstance::rotation(0, GateKind::Rx, 3, 0.1, 0);
        assert!(matches!(
            apply_gate(&StateVector::zero(2), &g),
            Err(Error::QubitOutOfRange { qubit: 3, .. })
        ));
    }

    #[test]
    fn empty_circuit_is_identity() {
        let s = random_state(3, 1);
        assert_eq!(Circuit::empty(3).run(&s).unwrap(), s);
    }

    #[test]
    fn circuit_then_inverse_is_identity() {
        for seed in 0..10 {
            let c = random_circuit(4, 30, seed);
            let s = random_state(4, seed + 100);
            let back = c.inverse().run(&c.run(&s).unwrap()).unwrap();
            let err = back
                .amplitudes()
                .iter()
                .zip(s.amplitudes())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-9);
        }
    }

    #[test]
    fn simulator_matches_dense_oracle() {
        for seed in 0..20 {
            let n = 2 + (seed as usize % 3);
            let c = random_circuit(n, 25, seed);
            let s = random_state(n, seed + 50);
            let out = c.run(&s).unwrap();
            let oracle = dense_unitary(&c).mul_vec(s.amplitudes());
            for (a, b) in out.amplitudes().iter().zip(&oracle) {
                assert!((a - b).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn expectation_matches_dense_quadratic_form() {
        let n = 6;
        let mut terms = Vec::new();
        for q in 0..n - 1 {
            let mut l = vec![Pauli::I; n];
            l[q] = Pauli::Z;
            l[q + 1] = Pauli::Z;
            terms.push(PauliString::new(l, -1.0));
        }
        for q in 0..n {
            let mut l = vec![Pauli::I; n];
            l[q] = Pauli::X;
            terms.push(PauliString::new(l, -0.7));
        }
        let mut l = vec![Pauli::I; n];
        l[2] = Pauli::Y;
        l[4] = Pauli::Y;
        terms.push(PauliString::new(l, 0.3));
        let h = Hamiltonian::new(n, terms).unwrap();
        // dense oracle from per-letter Kronecker products, qubit n-1 most significant
        let mut dense = ComplexMatrix::zeros(1 << n, 1 << n);
        for t in h.terms() {
            let m = t
                .letters
                .iter()
                .rev()
                .fold(ComplexMatrix::identity(1), |acc, p| acc.kron(&p.matrix()));
            dense = &dense + &m.scale_real(t.coeff);
        }
        let s = random_state(n, 4);
        let hv = dense.mul_vec(s.amplitudes());
        let oracle: C64 = s
            .amplitudes()
            .iter()
            .zip(&hv)
            .map(|(a, b)| a.conj() * b)
            .sum();
        assert!((expectation(&s, &h).unwrap() - oracle.re).abs() < 1e-9);
        // global phase invariance
        let rotated = StateVector::from_amplitudes(
            s.amplitudes()
                .iter()
                .map(|a| a * C64::from_polar(1.0, 1.3))
                .collect(),
        )
        .unwrap();
        assert!((expectation(&rotated, &h).unwrap() - oracle.re).abs() < 1e-9);
    }

    #[test]
    fn norm_preserved_gate_by_gate() {
        let c = build_hea(5, 3, 2).unwrap();
        let mut s = random_state(5, 2);
        for (k, g) in c.gates.iter().enumerate() {
            s = apply_gate(&s, g).unwrap();
            assert!((s.norm() - 1.0).abs() <= 1e-12 * (k + 1) as f64);
        }
    }

    #[test]
    fn tied_parameters_share_a_slot() {
        let mut c = build_hea(3, 1, 0).unwrap();
        for g in c.gates.iter_mut().filter(|g| g.kind == GateKind::Ry) {
            g.tie = Some(7);
            g.theta = Some(0.25);
        }
        c.validate().unwrap();
        assert_eq!(c.num_parameters(), 7);
        let layout = c.param_layout();
        let mut p = layout.get(&c);
        let slot = layout
            .slots
            .iter()
            .position(|s| matches!(s, ParamSlot::Angle(m) if m.len() == 3))
            .unwrap();
        p[slot] = -1.0;
        layout.set(&mut c, &p).unwrap();
        assert!(c
            .gates
            .iter()
            .filter(|g| g.kind == GateKind::Ry)
            .all(|g| g.theta == Some(-1.0)));
    }

    #[test]
    fn invalid_circuits_rejected() {
        let g = GateInstance::rotation(1, GateKind::Rx, 0, 0.1, 0);
        assert!(Circuit::new(1, 1, vec![g]).is_err());
        let g = GateInstance::rotation(0, GateKind::Rx, 0, 0.1, 2);
        assert!(Circuit::new(1, 1, vec![g]).is_err());
        let mut g = GateInstance::cnot(0, 0, 1, 0);
        g.qubits = vec![1, 1];
        assert!(Circuit::new(2, 1, vec![g]).is_err());
    }
}
