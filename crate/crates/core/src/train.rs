//! Losses, gradients and optimizers.
//!
//! An [`Objective`] is a function of expectation values: per-sample `<Z_0>`
//! for classification, `<H>` for VQE. Gradients are computed per gate and then
//! gathered into the circuit's parameter slots, so tied angles receive the
//! sum of their members' gradients.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{
    amplitude_embed, rotation_matrix, Circuit, CompiledCircuit, GateKind, Hamiltonian, ParamSlot,
    StateVector,
};
use crate::error::{Error, Result};
use crate::qmath::{mat_exp, ComplexMatrix, C64};

/// Central finite-difference step.
pub const FD_STEP: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: u8,
}

/// Binary classification data.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        if let Some(first) = samples.first() {
            let width = first.features.len();
            for (k, s) in samples.iter().enumerate() {
                if s.features.len() != width {
                    return Err(Error::Parse(format!(
                        "sample {k} has {} features, expected {width}",
                        s.features.len()
                    )));
                }
                if s.label > 1 {
                    return Err(Error::Parse(format!("sample {k} has label {}", s.label)));
                }
                if s.features.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite(format!("features of sample {k}")));
                }
            }
        }
        Ok(Self { samples })
    }

    /// Reads rows of `feature, ..., feature, label`; `#` lines are comments.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn from_reader(reader: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut samples = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let values = record
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("row {}: '{f}': {e}", row + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            let (label, features) = values
                .split_last()
                .ok_or_else(|| Error::Parse(format!("row {} is empty", row + 1)))?;
            if *label != 0.0 && *label != 1.0 {
                return Err(Error::Parse(format!(
                    "row {}: label {label} is not 0 or 1",
                    row + 1
                )));
            }
            samples.push(Sample {
                features: features.to_vec(),
                label: *label as u8,
            });
        }
        Self::new(samples)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.samples.first().map_or(0, |s| s.features.len())
    }

    /// Amplitude embedding of every sample.
    pub fn embed(&self, num_qubits: usize) -> Result<Vec<StateVector>> {
        self.samples
            .iter()
            .map(|s| amplitude_embed(&s.features, num_qubits))
            .collect()
    }

    /// Targets for `<Z_0>`: label 0 maps to +1, label 1 to -1.
    pub fn targets(&self) -> Vec<f64> {
        self.samples
            .iter()
            .map(|s| if s.label == 0 { 1.0 } else { -1.0 })
            .collect()
    }

    /// Seeded subset of `size` samples (all samples when `size >= len`).
    pub fn subsample(&self, size: usize, seed: u64) -> Self {
        if size >= self.len() {
            return self.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = sample(&mut rng, self.len(), size).into_vec();
        idx.sort_unstable();
        Self {
            samples: idx.into_iter().map(|k| self.samples[k].clone()).collect(),
        }
    }
}

#[derive(Clone, Debug)]
enum Task {
    /// MSE between `<Z_0>` and the +-1 targets.
    Classify {
        states: Vec<StateVector>,
        targets: Vec<f64>,
    },
    /// `<0...0| U^† H U |0...0>`.
    Vqe { hamiltonian: Hamiltonian },
}

/// A loss expressed through expectation values.
#[derive(Clone, Debug)]
pub struct Objective {
    num_qubits: usize,
    task: Task,
}

/// Loss plus accuracy (classification) or energy (VQE).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub loss: f64,
    pub metric: f64,
}

impl Objective {
    pub fn classify(dataset: &Dataset, num_qubits: usize) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        Self::classify_states(dataset.embed(num_qubits)?, dataset.targets())
    }

    pub fn classify_states(states: Vec<StateVector>, targets: Vec<f64>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        if states.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: states.len(),
                found: targets.len(),
            });
        }
        let num_qubits = states[0].num_qubits();
        for s in &states {
            s.check_same_register(&states[0])?;
        }
        Ok(Self {
            num_qubits,
            task: Task::Classify { states, targets },
        })
    }

    pub fn vqe(hamiltonian: Hamiltonian) -> Self {
        Self {
            num_qubits: hamiltonian.num_qubits(),
            task: Task::Vqe { hamiltonian },
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn is_classification(&self) -> bool {
        matches!(self.task, Task::Classify { .. })
    }

    /// Input states: the embedded samples, or `|0...0>` for VQE.
    pub fn initial_states(&self) -> Vec<StateVector> {
        match &self.task {
            Task::Classify { states, .. } => states.clone(),
            Task::Vqe { .. } => vec![StateVector::zero(self.num_qubits)],
        }
    }

    /// Seeded mini-batch of a classification objective; VQE is returned unchanged.
    pub fn batch(&self, size: usize, seed: u64) -> Self {
        match &self.task {
            Task::Classify { states, targets } if size < states.len() => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut idx = sample(&mut rng, states.len(), size).into_vec();
                idx.sort_unstable();
                Self {
                    num_qubits: self.num_qubits,
                    task: Task::Classify {
                        states: idx.iter().map(|&k| states[k].clone()).collect(),
                        targets: idx.iter().map(|&k| targets[k]).collect(),
                    },
                }
            }
            _ => self.clone(),
        }
    }

    fn check_circuit(&self, circuit: &Circuit) -> Result<()> {
        if circuit.num_qubits != self.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                found: circuit.num_qubits,
            });
        }
        Ok(())
    }

    /// `<O>` of the final state, where `O` is `Z_0` or `H`.
    fn observe(&self, state: &StateVector) -> Result<f64> {
        match &self.task {
            Task::Classify { .. } => Ok(z0_expectation(state.amplitudes())),
            Task::Vqe { hamiltonian } => hamiltonian.expectation(state),
        }
    }

    fn apply_observable(&self, amps: &[C64]) -> Vec<C64> {
        match &self.task {
            Task::Classify { .. } => amps
                .iter()
                .enumerate()
                .map(|(x, &a)| if x & 1 == 0 { a } else { -a })
                .collect(),
            Task::Vqe { hamiltonian } => hamiltonian.apply(amps),
        }
    }

    /// One expectation value per input state.
    pub fn outputs(&self, compiled: &CompiledCircuit) -> Result<Vec<f64>> {
        match &self.task {
            Task::Classify { states, .. } => states
                .par_iter()
                .map(|s| self.observe(&compiled.run(s)?))
                .collect(),
            Task::Vqe { .. } => {
                Ok(vec![self.observe(
                    &compiled.run(&StateVector::zero(self.num_qubits))?,
                )?])
            }
        }
    }

    pub fn loss_from_outputs(&self, outputs: &[f64]) -> f64 {
        match &self.task {
            Task::Classify { targets, .. } => {
                outputs
                    .iter()
                    .zip(targets)
                    .map(|(z, t)| (z - t) * (z - t))
                    .sum::<f64>()
                    / outputs.len() as f64
            }
            Task::Vqe { .. } => outputs[0],
        }
    }

    /// `dL / d output_s`.
    fn output_weights(&self, outputs: &[f64]) -> Vec<f64> {
        match &self.task {
            Task::Classify { targets, .. } => {
                let n = outputs.len() as f64;
                outputs
                    .iter()
                    .zip(targets)
                    .map(|(z, t)| 2.0 * (z - t) / n)
                    .collect()
            }
            Task::Vqe { .. } => vec![1.0],
        }
    }

    fn metric_from_outputs(&self, outputs: &[f64]) -> f64 {
        match &self.task {
            Task::Classify { targets, .. } => {
                let correct = outputs
                    .iter()
                    .zip(targets)
                    .filter(|(z, t)| (**z >= 0.0) == (**t > 0.0))
                    .count();
                correct as f64 / outputs.len() as f64
            }
            Task::Vqe { .. } => outputs[0],
        }
    }

    pub fn loss(&self, circuit: &Circuit) -> Result<f64> {
        Ok(self.evaluate(circuit)?.loss)
    }

    pub fn evaluate(&self, circuit: &Circuit) -> Result<Evaluation> {
        self.check_circuit(circuit)?;
        let outputs = self.outputs(&circuit.compile()?)?;
        Ok(Evaluation {
            loss: self.loss_from_outputs(&outputs),
            metric: self.metric_from_outputs(&outputs),
        })
    }
}

fn z0_expectation(amps: &[C64]) -> f64 {
    amps.iter()
        .enumerate()
        .map(|(x, a)| {
            if x & 1 == 0 {
                a.norm_sqr()
            } else {
                -a.norm_sqr()
            }
        })
        .sum()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum GradMethod {
    /// Shift rule for rotations, central differences for GENERIC coefficients.
    #[default]
    ParamShift,
    FiniteDiff,
    /// Reverse-mode statevector differentiation.
    Adjoint,
}

impl std::str::FromStr for GradMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "param-shift" | "ps" => Ok(GradMethod::ParamShift),
            "finite-diff" | "fd" => Ok(GradMethod::FiniteDiff),
            "adjoint" => Ok(GradMethod::Adjoint),
            _ => Err(Error::Parse(format!(
                "unknown gradient method '{s}' (param-shift | finite-diff | adjoint)"
            ))),
        }
    }
}

/// Derivatives of the loss with respect to each gate's own parameters:
/// `[dL/dtheta]` for rotations, `dL/dc_P` per term for GENERIC gates, empty
/// for CNOT. Tied gates are differentiated individually.
pub fn gate_gradients(
    circuit: &Circuit,
    objective: &Objective,
    method: GradMethod,
) -> Result<Vec<Vec<f64>>> {
    objective.check_circuit(circuit)?;
    match method {
        GradMethod::Adjoint => adjoint_gradients(circuit, objective),
        GradMethod::ParamShift | GradMethod::FiniteDiff => {
            let compiled = circuit.compile()?;
            let weights = objective.output_weights(&objective.outputs(&compiled)?);
            circuit
                .gates
                .par_iter()
                .enumerate()
                .map(|(k, g)| match g.kind {
                    GateKind::Cnot => Ok(Vec::new()),
                    GateKind::Generic => generic_fd(circuit, &compiled, objective, k),
                    _ if method == GradMethod::ParamShift => Ok(vec![rotation_shift(
                        circuit, &compiled, objective, &weights, k,
                    )?]),
                    _ => Ok(vec![rotation_fd(circuit, &compiled, objective, k)?]),
                })
                .collect()
        }
    }
}

fn with_op(compiled: &CompiledCircuit, k: usize, m: ComplexMatrix) -> CompiledCircuit {
    let mut c = compiled.clone();
    c.ops[k].matrix = Some(m);
    c
}

fn rotation_shift(
    circuit: &Circuit,
    compiled: &CompiledCircuit,
    objective: &Objective,
    weights: &[f64],
    k: usize,
) -> Result<f64> {
    let g = &circuit.gates[k];
    let axis = g.kind.axis().unwrap_or(crate::qmath::Pauli::Z);
    let theta = g.theta.unwrap_or(0.0);
    let plus = objective.outputs(&with_op(
        compiled,
        k,
        rotation_matrix(axis, theta + FRAC_PI_2),
    ))?;
    let minus = objective.outputs(&with_op(
        compiled,
        k,
        rotation_matrix(axis, theta - FRAC_PI_2),
    ))?;
    Ok(weights
        .iter()
        .zip(plus.iter().zip(&minus))
        .map(|(w, (p, m))| w * (p - m) / 2.0)
        .sum())
}

fn rotation_fd(
    circuit: &Circuit,
    compiled: &CompiledCircuit,
    objective: &Objective,
    k: usize,
) -> Result<f64> {
    let g = &circuit.gates[k];
    let axis = g.kind.axis().unwrap_or(crate::qmath::Pauli::Z);
    let theta = g.theta.unwrap_or(0.0);
    let lp = objective.loss_from_outputs(&objective.outputs(&with_op(
        compiled,
        k,
        rotation_matrix(axis, theta + FD_STEP),
    ))?);
    let lm = objective.loss_from_outputs(&objective.outputs(&with_op(
        compiled,
        k,
        rotation_matrix(axis, theta - FD_STEP),
    ))?);
    Ok((lp - lm) / (2.0 * FD_STEP))
}

fn generic_fd(
    circuit: &Circuit,
    compiled: &CompiledCircuit,
    objective: &Objective,
    k: usize,
) -> Result<Vec<f64>> {
    let gen = circuit.gates[k]
        .generator_override
        .as_ref()
        .ok_or_else(|| Error::InvalidGate {
            id: k,
            reason: "GENERIC gate without generator".into(),
        })?;
    let coeffs: Vec<f64> = gen.terms().iter().map(|t| t.coeff).collect();
    (0..coeffs.len())
        .map(|term| {
            let eval = |delta: f64| -> Result<f64> {
                let mut c = coeffs.clone();
                c[term] += delta;
                let m = mat_exp(gen.with_coeffs(&c)?.matrix())?;
                Ok(objective.loss_from_outputs(&objective.outputs(&with_op(compiled, k, m))?))
            };
            Ok((eval(FD_STEP)? - eval(-FD_STEP)?) / (2.0 * FD_STEP))
        })
        .collect()
}

/// `d exp(X) / d c_P` with `X = -i Σ c P`, from the block exponential
/// `exp([[X, E], [0, X]])` whose upper-right block is the Fréchet derivative in direction `E`.
fn exp_derivative(x: &ComplexMatrix, direction: &ComplexMatrix) -> Result<ComplexMatrix> {
    let d = x.rows();
    let mut block = ComplexMatrix::zeros(2 * d, 2 * d);
    for r in 0..d {
        for c in 0..d {
            block[(r, c)] = x[(r, c)];
            block[(r + d, c + d)] = x[(r, c)];
            block[(r, c + d)] = direction[(r, c)];
        }
    }
    let e = mat_exp(&block)?;
    let mut out = ComplexMatrix::zeros(d, d);
    for r in 0..d {
        for c in 0..d {
            out[(r, c)] = e[(r, c + d)];
        }
    }
    Ok(out)
}

/// Per-gate local derivative operators `dG/dp` (applied to the state before the gate).
enum GateDerivative {
    None,
    /// `dG/dtheta = -i/2 P G`; stored as `-i/2 P` acting after the gate.
    Rotation(ComplexMatrix),
    Generic(Vec<ComplexMatrix>),
}

fn adjoint_gradients(circuit: &Circuit, objective: &Objective) -> Result<Vec<Vec<f64>>> {
    let compiled = circuit.compile()?;
    let derivs = circuit
        .gates
        .iter()
        .map(|g| match g.kind {
            GateKind::Cnot => Ok(GateDerivative::None),
            GateKind::Generic => {
                let gen = g
                    .generator_override
                    .as_ref()
                    .ok_or_else(|| Error::InvalidGate {
                        id: g.id,
                        reason: "GENERIC gate without generator".into(),
                    })?;
                gen.terms()
                    .iter()
                    .map(|t| exp_derivative(gen.matrix(), &t.matrix().scale(C64::new(0.0, -1.0))))
                    .collect::<Result<Vec<_>>>()
                    .map(GateDerivative::Generic)
            }
            kind => Ok(GateDerivative::Rotation(
                kind.axis()
                    .unwrap_or(crate::qmath::Pauli::Z)
                    .matrix()
                    .scale(C64::new(0.0, -0.5)),
            )),
        })
        .collect::<Result<Vec<_>>>()?;
    let adjoints: Vec<Option<ComplexMatrix>> = compiled
        .ops
        .iter()
        .map(|op| op.matrix.as_ref().map(ComplexMatrix::adjoint))
        .collect();

    let initial = objective.initial_states();
    let finals = initial
        .par_iter()
        .map(|s| compiled.run(s))
        .collect::<Result<Vec<_>>>()?;
    let outputs = finals
        .iter()
        .map(|s| objective.observe(s))
        .collect::<Result<Vec<_>>>()?;
    let weights = objective.output_weights(&outputs);

    let per_sample = finals
        .into_par_iter()
        .zip(weights)
        .map(|(psi_n, w)| -> Result<Vec<Vec<f64>>> {
            let mut grads: Vec<Vec<f64>> = vec![Vec::new(); compiled.ops.len()];
            if w == 0.0 {
                for (g, d) in grads.iter_mut().zip(&derivs) {
                    *g = match d {
                        GateDerivative::None => Vec::new(),
                        GateDerivative::Rotation(_) => vec![0.0],
                        GateDerivative::Generic(ms) => vec![0.0; ms.len()],
                    };
                }
                return Ok(grads);
            }
            let mut lambda = StateVector::from_raw(objective.apply_observable(psi_n.amplitudes()));
            let mut psi = psi_n;
            for k in (0..compiled.ops.len()).rev() {
                let op = &compiled.ops[k];
                match &derivs[k] {
                    GateDerivative::None => {}
                    GateDerivative::Rotation(m) => {
                        // psi is the state right after gate k
                        let mut mu = psi.clone();
                        mu.apply_local(&op.qubits, m)?;
                        grads[k] = vec![2.0 * w * lambda.inner(&mu)?.re];
                    }
                    GateDerivative::Generic(ms) => {
                        let mut before = psi.clone();
                        apply_adjoint(&mut before, op, adjoints[k].as_ref())?;
                        grads[k] = ms
                            .iter()
                            .map(|m| {
                                let mut mu = before.clone();
                                mu.apply_local(&op.qubits, m)?;
                                Ok(2.0 * w * lambda.inner(&mu)?.re)
                            })
                            .collect::<Result<Vec<_>>>()?;
                    }
                }
                apply_adjoint(&mut psi, op, adjoints[k].as_ref())?;
                apply_adjoint(&mut lambda, op, adjoints[k].as_ref())?;
            }
            Ok(grads)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut total: Vec<Vec<f64>> = per_sample[0].iter().map(|g| vec![0.0; g.len()]).collect();
    for sample_grads in &per_sample {
        for (acc, g) in total.iter_mut().zip(sample_grads) {
            for (a, v) in acc.iter_mut().zip(g) {
                *a += v;
            }
        }
    }
    Ok(total)
}

fn apply_adjoint(
    state: &mut StateVector,
    op: &crate::circuit::CompiledGate,
    adjoint: Option<&ComplexMatrix>,
) -> Result<()> {
    match adjoint {
        Some(m) => state.apply_local(&op.qubits, m),
        None => state.apply_cnot(op.qubits[0], op.qubits[1]),
    }
}

/// Gradient with respect to the circuit's parameter slots.
pub fn grad(circuit: &Circuit, objective: &Objective, method: GradMethod) -> Result<Vec<f64>> {
    let layout = circuit.param_layout();
    if method == GradMethod::FiniteDiff {
        return slot_finite_diff(circuit, objective);
    }
    let gates = gate_gradients(circuit, objective, method)?;
    Ok(layout
        .slots
        .iter()
        .map(|s| match s {
            ParamSlot::Angle(members) => members.iter().map(|&m| gates[m][0]).sum(),
            ParamSlot::GeneratorCoeff { gate, term } => gates[*gate][*term],
        })
        .collect())
}

/// Central differences on each slot value, moving all tied gates together.
pub fn slot_finite_diff(circuit: &Circuit, objective: &Objective) -> Result<Vec<f64>> {
    objective.check_circuit(circuit)?;
    let layout = circuit.param_layout();
    let values = layout.get(circuit);
    (0..values.len())
        .into_par_iter()
        .map(|k| {
            let eval = |delta: f64| -> Result<f64> {
                let mut c = circuit.clone();
                let mut v = values.clone();
                v[k] += delta;
                layout.set(&mut c, &v)?;
                objective.loss(&c)
            };
            Ok((eval(FD_STEP)? - eval(-FD_STEP)?) / (2.0 * FD_STEP))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    Gd,
    Momentum,
    #[default]
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gd" | "sgd" => Ok(OptimizerKind::Gd),
            "momentum" => Ok(OptimizerKind::Momentum),
            "adam" => Ok(OptimizerKind::Adam),
            _ => Err(Error::Parse(format!(
                "unknown optimizer '{s}' (gd | momentum | adam)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Mini-batch size for classification; ignored for VQE.
    pub batch_size: usize,
    pub seed: u64,
    pub grad_method: GradMethod,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 200,
            learning_rate: 0.05,
            optimizer: OptimizerKind::Adam,
            batch_size: 16,
            seed: 0,
            grad_method: GradMethod::ParamShift,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Stateful first-order update rule.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(kind: OptimizerKind, lr: f64, dim: usize) -> Self {
        Self {
            kind,
            lr,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        match self.kind {
            OptimizerKind::Gd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.lr * g;
                }
            }
            OptimizerKind::Momentum => {
                for ((p, g), m) in params.iter_mut().zip(grad).zip(&mut self.m) {
                    *m = Self::BETA1 * *m + g;
                    *p -= self.lr * *m;
                }
            }
            OptimizerKind::Adam => {
                let c1 = 1.0 - Self::BETA1.powi(self.t);
                let c2 = 1.0 - Self::BETA2.powi(self.t);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grad)
                    .zip(&mut self.m)
                    .zip(&mut self.v)
                {
                    *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
                    *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
                    *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
                }
            }
        }
    }
}

/// One row of a loss trace; step 0 is the starting point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub loss: f64,
    /// Accuracy for classification, energy for VQE.
    pub metric: f64,
}

/// Maps an angle into `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t <= -PI {
        t + 2.0 * PI
    } else {
        t
    }
}

/// Runs `config.steps` optimizer updates on mini-batches of `objective` and
/// records the full-objective loss after every step. Aborts on NaN.
pub fn finetune(
    circuit: &Circuit,
    objective: &Objective,
    config: &TrainConfig,
) -> Result<(Circuit, Vec<TraceRow>)> {
    config.validate()?;
    objective.check_circuit(circuit)?;
    let mut current = circuit.clone();
    let layout = current.param_layout();
    let mut params = layout.get(&current);
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, params.len());
    let start = objective.evaluate(&current)?;
    let mut trace = vec![TraceRow {
        step: 0,
        loss: start.loss,
        metric: start.metric,
    }];
    for step in 1..=config.steps {
        let batch = objective.batch(config.batch_size, config.seed.wrapping_add(step as u64));
        let g = grad(&current, &batch, config.grad_method)?;
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient diverged at step {step}"
            )));
        }
        opt.step(&mut params, &g);
        for (slot, p) in layout.slots.iter().zip(params.iter_mut()) {
            if matches!(slot, ParamSlot::Angle(_)) {
                *p = wrap_angle(*p);
            }
        }
        layout.set(&mut current, &params)?;
        let eval = objective.evaluate(&current)?;
        if !eval.loss.is_finite() {
            return Err(Error::NonFinite(format!("loss diverged at step {step}")));
        }
        trace.push(TraceRow {
            step,
            loss: eval.loss,
            metric: eval.metric,
        });
    }
    Ok((current, trace))
}

/// CSV text `step,loss,metric`.
pub fn trace_csv(trace: &[TraceRow], metric_name: &str) -> String {
    let mut s = format!("step,loss,{metric_name}\n");
    for r in trace {
        s.push_str(&format!("{},{:.12e},{:.12e}\n", r.step, r.loss, r.metric));
    }
    s
}
