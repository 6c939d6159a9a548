//! Randomized checks of the algebraic and geometric guarantees, and the
//! calibration of the constants they depend on.

use std::time::Instant;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bench::random_states;
use crate::circuit::{apply_gate, Circuit, GateInstance, GateKind, StateVector};
use crate::dualrep::{subgroup_label, Generator, LocalityPolicy};
use crate::error::{Error, Result};
use crate::fsdist::{
    fs_gates_exact, fs_state, overlap_gates_exact, overlap_gates_fast_with, ReferenceStrategy,
};
use crate::pruner::{
    build_graph, components, max_commutator, merge, partition, BoundConstants, PruneConfig,
};
use crate::qmath::{
    all_strings, commutator, hermitian_eigen, mat_exp, op_norm, principal_log, ComplexMatrix,
    Pauli, PauliString, C64,
};
use crate::train::{grad, slot_finite_diff, GradMethod, Objective};

/// Constant of the fast-distance error law `|fast - exact| <= C η δ_X` at the
/// overlap level: `calibrate_lemma` on seed 2024, doubled and rounded up.
pub const LEMMA_CONSTANT: f64 = 0.3679;

/// Seed of the calibration suites; checks run on other seeds.
pub const CALIBRATION_SEED: u64 = 2024;
pub const LEMMA_CALIBRATION_SAMPLES: usize = 1000;
pub const BOUND_CALIBRATION_SAMPLES: usize = 300;
pub const SAFETY_FACTOR: f64 = 2.0;

/// Outcome of one check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "[{tag}] {}: {} ({:.2}s)",
            self.name, self.detail, self.seconds
        )
    }
}

fn timed(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> Result<Check> {
    let t = Instant::now();
    let (passed, detail) = f()?;
    Ok(Check {
        name: name.to_string(),
        passed,
        detail,
        seconds: t.elapsed().as_secs_f64(),
    })
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Haar-random unitary from Gram-Schmidt on a complex Gaussian matrix.
pub fn haar_unitary(dim: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v: Vec<C64> = (0..dim)
            .map(|_| C64::new(gaussian(rng), gaussian(rng)))
            .collect();
        for c in &cols {
            let p: C64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            v.iter_mut().zip(c).for_each(|(x, y)| *x -= p * y);
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-8 {
            cols.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    let mut m = ComplexMatrix::zeros(dim, dim);
    for (j, c) in cols.iter().enumerate() {
        for (i, x) in c.iter().enumerate() {
            m[(i, j)] = *x;
        }
    }
    m
}

/// Random special unitary whose eigenphases stay at least `margin` away
/// from the branch cut at `±π`.
pub fn random_special_unitary(dim: usize, margin: f64, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let limit = std::f64::consts::PI - margin;
    let phases = loop {
        let mut p: Vec<f64> = (0..dim - 1)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        let last = -p.iter().sum::<f64>();
        if last.abs() < limit {
            p.push(last);
            break p;
        }
    };
    let v = haar_unitary(dim, rng);
    let d = ComplexMatrix::diag(
        &phases
            .iter()
            .map(|&t| C64::from_polar(1.0, t))
            .collect::<Vec<_>>(),
    );
    v.matmul(&d)
        .and_then(|vd| vd.matmul(&v.adjoint()))
        .expect("square factors")
}

/// `max ||exp(log U) - U||` over `count` elements each of SU(2) and SU(4).
pub fn roundtrip_error(count: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for dim in [2, 4] {
        for _ in 0..count {
            let u = random_special_unitary(dim, 1e-3, &mut rng);
            let back = mat_exp(&principal_log(&u)?)?;
            worst = worst.max(op_norm(&back.try_sub(&u)?)?);
        }
    }
    Ok(worst)
}

pub fn roundtrip_check(count: usize, seed: u64) -> Result<Check> {
    timed("exp/log round trip", || {
        let err = roundtrip_error(count, seed)?;
        Ok((
            err <= 1e-10,
            format!("max error {err:.2e} over {count} SU(2) + {count} SU(4)"),
        ))
    })
}

/// Random element of the local algebra on `support` with operator norm `norm`.
pub fn random_generator(support: Vec<usize>, norm: f64, rng: &mut ChaCha8Rng) -> Result<Generator> {
    let terms: Vec<PauliString> = all_strings(support.len())
        .into_iter()
        .filter(|w| w.iter().any(|&p| p != Pauli::I))
        .map(|w| PauliString::new(w, gaussian(rng)))
        .collect();
    let g = Generator::from_terms(support, terms)?;
    let current = op_norm(g.matrix())?;
    Ok(g.scaled(norm / current))
}

/// Single-qubit generator `-i (θ/2) n·σ`.
pub fn axis_generator(qubit: usize, axis: [f64; 3], theta: f64) -> Result<Generator> {
    let terms = [Pauli::X, Pauli::Y, Pauli::Z]
        .iter()
        .zip(axis)
        .map(|(&p, a)| PauliString::new(vec![p], 0.5 * theta * a))
        .collect();
    Generator::from_terms(vec![qubit], terms)
}

fn random_unit_vector(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let v = [gaussian(rng), gaussian(rng), gaussian(rng)];
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn generic_gate(id: usize, generator: Generator) -> GateInstance {
    GateInstance::generic(id, generator, 0)
}

/// One pair of the fast-distance error sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaSample {
    pub support_size: usize,
    pub delta_x: f64,
    pub eta: f64,
    /// `| |<psi_i|psi_j>| - |<psi0|e^{X_j - X_i}|psi0>| |`.
    pub error: f64,
}

const LEMMA_QUBITS: usize = 3;

fn lemma_sample(xi: Generator, xj: Generator, rng: &mut ChaCha8Rng) -> Result<LemmaSample> {
    let psi = random_states(LEMMA_QUBITS, 1, rng.random())?.remove(0);
    let exact = overlap_gates_exact(
        &generic_gate(0, xi.clone()),
        &generic_gate(1, xj.clone()),
        &psi,
    )?;
    let fast = overlap_gates_fast_with(&xi, &xj, &psi, ReferenceStrategy::Dominant)?;
    let delta_x = op_norm(&xj.matrix().try_sub(xi.matrix())?)?;
    let eta = op_norm(&commutator(xi.matrix(), xj.matrix())?)?;
    Ok(LemmaSample {
        support_size: xi.support().len(),
        delta_x,
        eta,
        error: (fast - exact).abs(),
    })
}

fn random_support(rng: &mut ChaCha8Rng) -> Vec<usize> {
    let k = rng.random_range(1..=2);
    let mut qubits: Vec<usize> = (0..LEMMA_QUBITS).collect();
    qubits.shuffle(rng);
    qubits.truncate(k);
    qubits
}

/// Non-commuting same-support pairs with `η δ_X` in `[1e-6, 1e-1]` and
/// `||X_i|| <= 1.5`.
pub fn lemma_samples(count: usize, seed: u64) -> Result<Vec<LemmaSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let support = random_support(&mut rng);
        let xi = random_generator(support.clone(), log_uniform(&mut rng, 0.05, 1.5), &mut rng)?;
        let d = random_generator(support, log_uniform(&mut rng, 1e-4, 1.0), &mut rng)?;
        let xj = xi.add_scaled(&d, 1.0)?;
        let s = lemma_sample(xi, xj, &mut rng)?;
        let product = s.eta * s.delta_x;
        if (1e-6..=1e-1).contains(&product) {
            out.push(s);
        }
    }
    Ok(out)
}

/// Commuting pairs `X_j = a X_i + b X_i^3`, for which the first-order BCH
/// truncation is exact.
pub fn commuting_lemma_samples(count: usize, seed: u64) -> Result<Vec<LemmaSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let support = random_support(&mut rng);
            let xi = random_generator(support.clone(), rng.random_range(0.05..1.5), &mut rng)?;
            let cube = xi.matrix().matmul(xi.matrix())?.matmul(xi.matrix())?;
            let (a, b) = (rng.random_range(-1.5..1.5), rng.random_range(-0.5..0.5));
            let m = xi.matrix().scale_real(a).try_add(&cube.scale_real(b))?;
            let xj = Generator::from_matrix(support, &m)?;
            lemma_sample(xi, xj, &mut rng)
        })
        .collect()
}

/// `max error / (η δ_X)` of a calibration sweep, before any safety factor.
pub fn calibrate_lemma(count: usize, seed: u64) -> Result<f64> {
    Ok(lemma_samples(count, seed)?
        .iter()
        .map(|s| s.error / (s.eta * s.delta_x))
        .fold(0.0, f64::max))
}

pub fn lemma_check(count: usize, seed: u64) -> Result<Check> {
    timed("fast distance error law", || {
        let commuting = commuting_lemma_samples(count, seed)?
            .iter()
            .map(|s| s.error)
            .fold(0.0, f64::max);
        let samples = lemma_samples(count, seed)?;
        let worst = samples
            .iter()
            .map(|s| s.error / (s.eta * s.delta_x))
            .fold(0.0, f64::max);
        Ok((
            commuting <= 1e-9 && worst <= LEMMA_CONSTANT,
            format!(
                "commuting max |fast-exact| {commuting:.2e}; max error/(η δ) {worst:.3} vs C {LEMMA_CONSTANT}"
            ),
        ))
    })
}

/// How the members of a synthetic component are laid out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComponentFamily {
    /// One member per qubit, as produced by a per-layer subgroup.
    CrossQubit,
    /// All members in sequence on qubit 0.
    SameSupport,
}

/// One randomized merge and its measured effect.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundSample {
    pub size: usize,
    /// Largest exact pairwise distance over the batch: the smallest ε for
    /// which the component is ε-redundant.
    pub epsilon: f64,
    pub eta: f64,
    /// `max_psi d_FS(U_new psi, U_orig psi)`.
    pub deviation: f64,
}

impl BoundSample {
    pub fn bound(&self, constants: BoundConstants) -> f64 {
        crate::pruner::delta_max(self.size, self.epsilon, self.eta, constants)
    }
}

const BOUND_BATCH: usize = 4;

/// Builds a component from `generators` (member `m` on the qubit of its
/// generator), merges it with random sensitivities and measures the result.
pub fn measure_component(
    generators: &[Generator],
    num_qubits: usize,
    rng: &mut ChaCha8Rng,
) -> Result<BoundSample> {
    let gates: Vec<GateInstance> = generators
        .iter()
        .enumerate()
        .map(|(k, g)| generic_gate(k, g.clone()))
        .collect();
    let states = random_states(num_qubits, BOUND_BATCH, rng.random())?;
    let mut epsilon: f64 = 0.0;
    for (a, ga) in gates.iter().enumerate() {
        for gb in &gates[a + 1..] {
            for psi in &states {
                epsilon = epsilon.max(fs_gates_exact(ga, gb, psi)?);
            }
        }
    }
    let eta = max_commutator(generators)?;
    let sens: Vec<f64> = if rng.random_bool(0.1) {
        vec![0.0; gates.len()]
    } else {
        (0..gates.len())
            .map(|_| rng.random_range(0.0..1.0))
            .collect()
    };
    let ids: Vec<usize> = (0..gates.len()).collect();
    let merged = merge(&ids, generators, &sens, None)?;
    let replacement = generic_gate(0, merged.generator);
    let mut deviation: f64 = 0.0;
    for psi in &states {
        let mut orig = psi.clone();
        for g in &gates {
            orig = apply_gate(&orig, g)?;
        }
        let new = apply_gate(psi, &replacement)?;
        deviation = deviation.max(fs_state(&new, &orig)?);
    }
    Ok(BoundSample {
        size: gates.len(),
        epsilon,
        eta,
        deviation,
    })
}

/// Random component of `size` members around a common axis. `scale` sets
/// the rotation angles and `spread` the axis tilt, hence `η`.
pub fn random_component(
    family: ComponentFamily,
    size: usize,
    scale: f64,
    spread: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Generator>, usize)> {
    let base = random_unit_vector(rng);
    let generators = (0..size)
        .map(|m| {
            let g = [gaussian(rng), gaussian(rng), gaussian(rng)];
            let v: Vec<f64> = (0..3).map(|k| base[k] + spread * g[k]).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let theta = scale * rng.random_range(0.5..1.5);
            let qubit = match family {
                ComponentFamily::CrossQubit => m,
                ComponentFamily::SameSupport => 0,
            };
            axis_generator(qubit, [v[0] / n, v[1] / n, v[2] / n], theta)
        })
        .collect::<Result<Vec<_>>>()?;
    let qubits = match family {
        ComponentFamily::CrossQubit => size,
        ComponentFamily::SameSupport => 2,
    };
    Ok((generators, qubits))
}

/// Components of sizes 2 to 8 with angle scale log-uniform in `[1e-3, 0.6]`
/// and axis spread uniform in `[0, 0.5]`.
pub fn bound_samples(family: ComponentFamily, count: usize, seed: u64) -> Result<Vec<BoundSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let size = rng.random_range(2..=8);
            let scale = log_uniform(&mut rng, 1e-3, 0.6);
            let spread = rng.random_range(0.0..0.5);
            let (gens, n) = random_component(family, size, scale, spread, &mut rng)?;
            measure_component(&gens, n, &mut rng)
        })
        .collect()
}

/// Commuting components (common axis) with vanishing angle scale.
pub fn commuting_bound_samples(
    family: ComponentFamily,
    scales: &[f64],
    seed: u64,
) -> Result<Vec<BoundSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    scales
        .iter()
        .map(|&scale| {
            let size = rng.random_range(2..=8);
            let (gens, n) = random_component(family, size, scale, 0.0, &mut rng)?;
            measure_component(&gens, n, &mut rng)
        })
        .collect()
}

/// Least squares for `deviation ≈ c1 |C| ε + c2 |C|^2 η` subject to the fit
/// bounding every sample from above and `c1, c2 >= 0`. The optimum of this
/// two-variable problem lies on a vertex or edge of the feasible polygon or
/// at the unconstrained solution, so the candidates are enumerated.
pub fn fit_bound(samples: &[BoundSample]) -> Result<BoundConstants> {
    if samples.is_empty() {
        return Err(Error::Empty("calibration samples"));
    }
    let rows: Vec<([f64; 2], f64)> = samples
        .iter()
        .map(|s| {
            let k = s.size as f64;
            ([k * s.epsilon, k * k * s.eta], s.deviation)
        })
        .collect();
    let objective = |c: [f64; 2]| -> f64 {
        rows.iter()
            .map(|(x, y)| (c[0] * x[0] + c[1] * x[1] - y).powi(2))
            .sum()
    };
    let feasible = |c: [f64; 2]| {
        c[0] >= 0.0
            && c[1] >= 0.0
            && rows
                .iter()
                .all(|(x, y)| c[0] * x[0] + c[1] * x[1] >= y * (1.0 - 1e-12) - 1e-300)
    };
    let (mut sxx, mut sxy) = ([[0.0f64; 2]; 2], [0.0f64; 2]);
    for (x, y) in &rows {
        for a in 0..2 {
            sxy[a] += x[a] * y;
            for b in 0..2 {
                sxx[a][b] += x[a] * x[b];
            }
        }
    }
    let mut candidates = Vec::new();
    let det = sxx[0][0] * sxx[1][1] - sxx[0][1] * sxx[1][0];
    if det.abs() > 1e-300 {
        candidates.push([
            (sxy[0] * sxx[1][1] - sxy[1] * sxx[0][1]) / det,
            (sxy[1] * sxx[0][0] - sxy[0] * sxx[1][0]) / det,
        ]);
    }
    // one coefficient pinned to zero: tightest envelope on the other axis
    for a in 0..2 {
        let c = rows
            .iter()
            .filter(|(x, _)| x[a] > 0.0)
            .map(|(x, y)| y / x[a])
            .fold(0.0, f64::max);
        let mut v = [0.0; 2];
        v[a] = c;
        candidates.push(v);
    }
    // minimizer restricted to the line of each single constraint
    for (x, y) in &rows {
        let norm = x[0] * x[0] + x[1] * x[1];
        if norm == 0.0 {
            continue;
        }
        let p = [x[0] * y / norm, x[1] * y / norm];
        let d = [-x[1], x[0]];
        let (mut num, mut den) = (0.0, 0.0);
        for (xr, yr) in &rows {
            let base = p[0] * xr[0] + p[1] * xr[1] - yr;
            let slope = d[0] * xr[0] + d[1] * xr[1];
            num += base * slope;
            den += slope * slope;
        }
        if den > 0.0 {
            let t = -num / den;
            candidates.push([p[0] + t * d[0], p[1] + t * d[1]]);
        }
        // intersections with the axes
        if x[0] > 0.0 {
            candidates.push([y / x[0], 0.0]);
        }
        if x[1] > 0.0 {
            candidates.push([0.0, y / x[1]]);
        }
    }
    // vertices between pairs of constraints
    for (i, (xi, yi)) in rows.iter().enumerate() {
        for (xj, yj) in &rows[i + 1..] {
            let det = xi[0] * xj[1] - xi[1] * xj[0];
            if det.abs() > 1e-300 {
                candidates.push([
                    (yi * xj[1] - yj * xi[1]) / det,
                    (xi[0] * yj - xj[0] * yi) / det,
                ]);
            }
        }
    }
    candidates
        .into_iter()
        .filter(|&c| feasible(c))
        .min_by(|a, b| objective(*a).total_cmp(&objective(*b)))
        .map(|c| BoundConstants { c1: c[0], c2: c[1] })
        .ok_or_else(|| Error::InvariantViolation("no feasible bound constants".into()))
}

/// Fitted constants for the cross-qubit family, multiplied by `safety`.
pub fn calibrate_bound(count: usize, seed: u64, safety: f64) -> Result<BoundConstants> {
    let fit = fit_bound(&bound_samples(ComponentFamily::CrossQubit, count, seed)?)?;
    Ok(BoundConstants {
        c1: safety * fit.c1,
        c2: safety * fit.c2,
    })
}

/// Largest `deviation / Δ_max` over a suite, with the calibrated constants.
pub fn worst_bound_ratio(samples: &[BoundSample], constants: BoundConstants) -> f64 {
    samples
        .iter()
        .map(|s| s.deviation / s.bound(constants))
        .fold(0.0, f64::max)
}

pub fn bound_check(count: usize, seed: u64) -> Result<Check> {
    timed("merge error bound", || {
        let constants = BoundConstants::CALIBRATED;
        let samples = bound_samples(ComponentFamily::CrossQubit, count, seed)?;
        let worst = worst_bound_ratio(&samples, constants);
        let vanishing = commuting_bound_samples(
            ComponentFamily::CrossQubit,
            &[1e-4, 1e-6, 1e-8, 1e-10],
            seed,
        )?;
        let tail = vanishing.last().map_or(0.0, |s| s.deviation);
        let same = bound_samples(ComponentFamily::SameSupport, count, seed)?;
        let same_worst = worst_bound_ratio(&same, constants);
        Ok((
            worst <= 1.0 && tail <= 1e-8,
            format!(
                "cross-qubit max deviation/Δmax {worst:.3}; deviation at scale 1e-10 {tail:.1e}; \
same-support diagnostic max ratio {same_worst:.3e}"
            ),
        ))
    })
}

/// Random circuit with at most `max_params` rotations on 2 to 4 qubits.
/// Angles cluster around a few centers so that redundancy occurs at small ε.
pub fn random_small_circuit(max_params: usize, rng: &mut ChaCha8Rng) -> Result<Circuit> {
    let n = rng.random_range(2..=4);
    let layers = rng.random_range(1..=3);
    let centers: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
    let mut gates = Vec::new();
    let mut params = 0;
    for layer in 0..layers {
        for _ in 0..rng.random_range(n..=2 * n) {
            if params == max_params {
                break;
            }
            let kind = *[GateKind::Rx, GateKind::Ry, GateKind::Rz]
                .choose(rng)
                .expect("nonempty");
            let q = rng.random_range(0..n);
            let c = *centers.choose(rng).expect("nonempty");
            let theta = c + 0.2 * gaussian(rng);
            gates.push(GateInstance::rotation(gates.len(), kind, q, theta, layer));
            params += 1;
        }
        let c = rng.random_range(0..n);
        let t = (c + 1) % n;
        gates.push(GateInstance::cnot(gates.len(), c, t, layer));
    }
    Circuit::new(n, layers, gates)
}

/// Transitive closure of `d_exact <= ε` over all pairs of each subgroup,
/// by repeated relaxation; returned as sorted classes.
fn closure_classes(
    circuit: &Circuit,
    members: &[usize],
    refs: &[StateVector],
    epsilon: f64,
) -> Result<Vec<Vec<usize>>> {
    let k = members.len();
    let mut reach = vec![vec![false; k]; k];
    for a in 0..k {
        reach[a][a] = true;
        for b in a + 1..k {
            let mut d: f64 = 0.0;
            for psi in refs {
                d = d.max(fs_gates_exact(
                    &circuit.gates[members[a]],
                    &circuit.gates[members[b]],
                    psi,
                )?);
            }
            if d <= epsilon {
                reach[a][b] = true;
                reach[b][a] = true;
            }
        }
    }
    for m in 0..k {
        for a in 0..k {
            for b in 0..k {
                if reach[a][m] && reach[m][b] {
                    reach[a][b] = true;
                }
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for row in &reach {
        let class: Vec<usize> = (0..k).filter(|&b| row[b]).map(|b| members[b]).collect();
        if !classes.contains(&class) {
            classes.push(class);
        }
    }
    classes.sort();
    Ok(classes)
}

/// Components from exhaustive exact graphs against the brute-force closure.
pub fn completeness_check(circuits: usize, seed: u64) -> Result<Check> {
    timed("component completeness", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mismatches = 0;
        let mut merged = 0;
        for _ in 0..circuits {
            let circuit = random_small_circuit(24, &mut rng)?;
            let refs = random_states(circuit.num_qubits, 4, rng.random())?;
            for epsilon in [0.01, 0.1, 0.5] {
                let config = PruneConfig {
                    epsilon,
                    use_fast_distance: false,
                    max_neighbors: usize::MAX,
                    ..PruneConfig::default()
                };
                for s in partition(&circuit, LocalityPolicy::SameLayer)? {
                    let graph = build_graph(&circuit, &s, &refs, &config)?;
                    let mut comps = components(&graph);
                    comps.sort();
                    merged += comps.iter().filter(|c| c.len() > 1).count();
                    if comps != closure_classes(&circuit, &s.gates, &refs, epsilon)? {
                        mismatches += 1;
                    }
                }
            }
        }
        Ok((
            mismatches == 0,
            format!("{circuits} circuits x 3 thresholds, {merged} merged classes, {mismatches} mismatches"),
        ))
    })
}

/// Edges whose endpoints carry different labels, recomputed from the gates.
pub fn label_violations(
    circuit: &Circuit,
    policy: LocalityPolicy,
    edges: &[(usize, usize)],
) -> Result<usize> {
    let mut bad = 0;
    for &(a, b) in edges {
        if subgroup_label(&circuit.gates[a], policy)? != subgroup_label(&circuit.gates[b], policy)?
        {
            bad += 1;
        }
    }
    Ok(bad)
}

/// Random rotation-and-CNOT circuit on 2 to 5 qubits.
pub fn random_circuit(rng: &mut ChaCha8Rng) -> Result<Circuit> {
    let n = rng.random_range(2..=5);
    let mut gates = Vec::new();
    for _ in 0..rng.random_range(3..=20) {
        if rng.random_bool(0.25) {
            let c = rng.random_range(0..n);
            let t = (c + rng.random_range(1..n)) % n;
            gates.push(GateInstance::cnot(gates.len(), c, t, 0));
        } else {
            let kind = *[GateKind::Rx, GateKind::Ry, GateKind::Rz]
                .choose(rng)
                .expect("nonempty");
            let q = rng.random_range(0..n);
            gates.push(GateInstance::rotation(
                gates.len(),
                kind,
                q,
                rng.random_range(-3.1..3.1),
                0,
            ));
        }
    }
    if !gates.iter().any(GateInstance::is_parameterized) {
        gates.push(GateInstance::rotation(gates.len(), GateKind::Ry, 0, 0.7, 0));
    }
    Circuit::new(n, 1, gates)
}

/// Random Hamiltonian with a handful of Pauli terms.
pub fn random_hamiltonian(n: usize, rng: &mut ChaCha8Rng) -> Result<crate::circuit::Hamiltonian> {
    let terms = (0..rng.random_range(1..=6))
        .map(|_| {
            let letters = (0..n)
                .map(|_| *Pauli::ALL.choose(rng).expect("nonempty"))
                .collect();
            PauliString::new(letters, rng.random_range(-1.0..1.0))
        })
        .collect();
    crate::circuit::Hamiltonian::new(n, terms)
}

/// `||ps - fd|| / ||ps||` on one circuit and objective.
pub fn gradient_disagreement(circuit: &Circuit, objective: &Objective) -> Result<f64> {
    let ps = grad(circuit, objective, GradMethod::ParamShift)?;
    let fd = slot_finite_diff(circuit, objective)?;
    let diff = ps
        .iter()
        .zip(&fd)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm = ps.iter().map(|a| a * a).sum::<f64>().sqrt();
    Ok(if norm < 1e-12 { diff } else { diff / norm })
}

pub fn gradient_check(circuits: usize, seed: u64) -> Result<Check> {
    timed("gradients and variational bound", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        let mut below: f64 = f64::INFINITY;
        for _ in 0..circuits {
            let circuit = random_circuit(&mut rng)?;
            let h = random_hamiltonian(circuit.num_qubits, &mut rng)?;
            let ground = hermitian_eigen(&h.dense_matrix())?.values[0];
            let objective = Objective::vqe(h);
            worst = worst.max(gradient_disagreement(&circuit, &objective)?);
            below = below.min(objective.loss(&circuit)? - ground);
        }
        Ok((
            worst <= 1e-6 && below >= -1e-9,
            format!("max relative ps/fd gap {worst:.2e}; min E - E0 {below:.2e}"),
        ))
    })
}

/// Fast suites by default; `full` adds more samples.
pub fn run_all(full: bool, seed: u64) -> Result<Vec<Check>> {
    let scale = if full { 5 } else { 1 };
    Ok(vec![
        roundtrip_check(200 * scale, seed)?,
        lemma_check(100 * scale, seed)?,
        completeness_check(10 * scale, seed)?,
        bound_check(20 * scale, seed)?,
        gradient_check(20 * scale, seed)?,
    ])
}
