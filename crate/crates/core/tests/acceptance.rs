//! Acceptance criteria, each checked against oracles written here: a small
//! statevector simulator, dense Hamiltonians and nalgebra's `exp`, SVD and
//! Hermitian eigensolver.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{FRAC_PI_2, PI};
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use lieprune::bench::{
    bench_scaling, prune_and_finetune, run_bars_and_stripes, run_vqe_sweep, train_schedule,
    BasConfig, ScalingConfig, VqeSweepConfig,
};
use lieprune::circuit::{build_hea, Circuit, GateInstance, GateKind, Hamiltonian, StateVector};
use lieprune::data::{gen_bars_and_stripes, gen_tfim};
use lieprune::dualrep::{Generator, LocalityPolicy};
use lieprune::fsdist::{overlap_gates_fast_with, ReferenceStrategy};
use lieprune::pruner::{
    generators_of, merge, prune, BoundConstants, MergeMode, PruneConfig, PruneReport,
};
use lieprune::qmath::{mat_exp, principal_log, ComplexMatrix, Pauli, C64};
use lieprune::train::{finetune, grad, Dataset, GradMethod, Objective, OptimizerKind, TrainConfig};
use lieprune::verify::{
    calibrate_bound, calibrate_lemma, random_circuit, random_component, random_generator,
    random_hamiltonian, random_small_circuit, ComponentFamily, BOUND_CALIBRATION_SAMPLES,
    CALIBRATION_SEED, LEMMA_CALIBRATION_SAMPLES, LEMMA_CONSTANT, SAFETY_FACTOR,
};

type M = DMatrix<C64>;

// ---------------------------------------------------------------- oracles

fn to_na(m: &ComplexMatrix) -> M {
    M::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn from_na(m: &M) -> ComplexMatrix {
    let data = (0..m.nrows())
        .flat_map(|r| (0..m.ncols()).map(move |c| (r, c)))
        .map(|(r, c)| m[(r, c)])
        .collect();
    ComplexMatrix::from_vec(m.nrows(), m.ncols(), data).unwrap()
}

fn op_norm(m: &M) -> f64 {
    m.clone().singular_values().max()
}

fn gaussian_c(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn haar_state(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let v: Vec<C64> = (0..1usize << n).map(|_| gaussian_c(rng)).collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / norm).collect()
}

fn haar_unitary(d: usize, rng: &mut ChaCha8Rng) -> M {
    let g = M::from_fn(d, d, |_, _| gaussian_c(rng));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = M::from_diagonal(&nalgebra::DVector::from_fn(d, |k, _| {
        r[(k, k)] / r[(k, k)].norm()
    }));
    q * phases
}

/// `V diag(e^{iφ}) V†` with `Σ φ = 0` and every `|φ| <= π - margin`.
fn special_unitary(d: usize, margin: f64, rng: &mut ChaCha8Rng) -> M {
    let lim = PI - margin;
    let phases = loop {
        let mut p: Vec<f64> = (0..d - 1).map(|_| rng.random_range(-lim..lim)).collect();
        let last = -p.iter().sum::<f64>();
        if last.abs() < lim {
            p.push(last);
            break p;
        }
    };
    let v = haar_unitary(d, rng);
    let diag = M::from_diagonal(&nalgebra::DVector::from_fn(d, |k, _| {
        C64::from_polar(1.0, phases[k])
    }));
    &v * diag * v.adjoint()
}

/// Applies a local matrix whose first support qubit is the most significant
/// local bit; register qubit `q` is bit `q` of the basis index.
fn apply_local(state: &mut [C64], support: &[usize], u: &M) {
    let k = support.len();
    let mask: usize = support.iter().map(|&q| 1 << q).sum();
    let offsets: Vec<usize> = (0..1usize << k)
        .map(|l| {
            (0..k)
                .filter(|&j| (l >> (k - 1 - j)) & 1 == 1)
                .map(|j| 1 << support[j])
                .sum()
        })
        .collect();
    let mut buf = vec![C64::new(0.0, 0.0); offsets.len()];
    for base in 0..state.len() {
        if base & mask != 0 {
            continue;
        }
        for (r, b) in buf.iter_mut().enumerate() {
            *b = (0..offsets.len())
                .map(|c| u[(r, c)] * state[base | offsets[c]])
                .sum();
        }
        for (r, b) in buf.iter().enumerate() {
            state[base | offsets[r]] = *b;
        }
    }
}

fn rotation(kind: GateKind, theta: f64) -> M {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let z = C64::new(0.0, 0.0);
    let m = match kind {
        GateKind::Rx => [
            C64::new(c, 0.0),
            C64::new(0.0, -s),
            C64::new(0.0, -s),
            C64::new(c, 0.0),
        ],
        GateKind::Ry => [
            C64::new(c, 0.0),
            C64::new(-s, 0.0),
            C64::new(s, 0.0),
            C64::new(c, 0.0),
        ],
        GateKind::Rz => [
            C64::from_polar(1.0, -theta / 2.0),
            z,
            z,
            C64::from_polar(1.0, theta / 2.0),
        ],
        _ => unreachable!("not a rotation"),
    };
    M::from_row_slice(2, 2, &m)
}

fn generator_unitary(g: &Generator) -> M {
    to_na(g.matrix()).exp()
}

fn apply_gate(state: &mut [C64], g: &GateInstance) {
    match g.kind {
        GateKind::Cnot => {
            let (c, t) = (g.qubits[0], g.qubits[1]);
            for x in 0..state.len() {
                if (x >> c) & 1 == 1 && (x >> t) & 1 == 0 {
                    state.swap(x, x | (1 << t));
                }
            }
        }
        GateKind::Generic => {
            let gen = g.generator_override.as_ref().expect("generic generator");
            apply_local(state, gen.support(), &generator_unitary(gen));
        }
        kind => apply_local(
            state,
            &g.qubits,
            &rotation(kind, g.theta.expect("rotation angle")),
        ),
    }
}

fn run(circuit: &Circuit, input: &[C64]) -> Vec<C64> {
    let mut s = input.to_vec();
    for g in &circuit.gates {
        apply_gate(&mut s, g);
    }
    s
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Fubini-Study distance, by the phase-aligned chord so that tiny angles
/// resolve.
fn fs(a: &[C64], b: &[C64]) -> f64 {
    let c = inner(a, b);
    if c.norm() < 0.5 {
        return c.norm().min(1.0).acos();
    }
    let phase = c / c.norm();
    let chord = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x * phase - y).norm_sqr())
        .sum::<f64>()
        .sqrt();
    2.0 * (chord / 2.0).min(1.0).asin()
}

fn dense_hamiltonian(h: &Hamiltonian) -> M {
    let n = h.num_qubits();
    let dim = 1usize << n;
    let mut m = M::zeros(dim, dim);
    for t in h.terms() {
        for x in 0..dim {
            let mut y = x;
            let mut amp = C64::new(t.coeff, 0.0);
            for (q, p) in t.letters.iter().enumerate() {
                let bit = (x >> q) & 1;
                match p {
                    Pauli::I => {}
                    Pauli::X => y ^= 1 << q,
                    Pauli::Y => {
                        y ^= 1 << q;
                        amp *= if bit == 0 {
                            C64::new(0.0, 1.0)
                        } else {
                            C64::new(0.0, -1.0)
                        };
                    }
                    Pauli::Z => {
                        if bit == 1 {
                            amp = -amp;
                        }
                    }
                }
            }
            m[(y, x)] += amp;
        }
    }
    m
}

fn ground_energy(m: &M) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

fn energy(m: &M, circuit: &Circuit) -> f64 {
    let mut zero = vec![C64::new(0.0, 0.0); 1 << circuit.num_qubits];
    zero[0] = C64::new(1.0, 0.0);
    let psi = run(circuit, &zero);
    let v = nalgebra::DVector::from_vec(psi.clone());
    inner(&psi, (m * v).as_slice()).re
}

fn accuracy(circuit: &Circuit, data: &Dataset) -> f64 {
    let dim = 1usize << circuit.num_qubits;
    let correct = data
        .samples
        .iter()
        .filter(|s| {
            let norm = s.features.iter().map(|x| x * x).sum::<f64>().sqrt();
            let mut psi = vec![C64::new(0.0, 0.0); dim];
            for (a, x) in psi.iter_mut().zip(&s.features) {
                *a = C64::new(x / norm, 0.0);
            }
            let out = run(circuit, &psi);
            let z: f64 = out
                .iter()
                .enumerate()
                .map(|(x, a)| {
                    if x & 1 == 0 {
                        a.norm_sqr()
                    } else {
                        -a.norm_sqr()
                    }
                })
                .sum();
            (z >= 0.0) == (s.label == 0)
        })
        .count();
    correct as f64 / data.len() as f64
}

/// Distinct trainable parameters: untied rotations, one per tie group, and
/// the coefficients of generic gates.
fn count_params(circuit: &Circuit) -> usize {
    let mut ties = BTreeSet::new();
    let mut n = 0;
    for g in &circuit.gates {
        match (g.kind, g.tie) {
            (GateKind::Cnot, _) => {}
            (GateKind::Generic, _) => n += g.generator_override.as_ref().unwrap().terms().len(),
            (_, Some(t)) => {
                ties.insert(t);
            }
            (_, None) => n += 1,
        }
    }
    n + ties.len()
}

fn oracle_label(g: &GateInstance, policy: LocalityPolicy) -> (GateKind, usize, usize) {
    let q = g.qubits[0];
    match policy {
        LocalityPolicy::SameQubit => (g.kind, g.layer, q),
        LocalityPolicy::SameLayer => (g.kind, g.layer, 0),
        LocalityPolicy::Global => (g.kind, 0, 0),
        LocalityPolicy::QubitBlock(k) => (g.kind, g.layer, q / k),
    }
}

/// Candidate pairs and merged components whose gates carry different labels.
fn report_violations(circuit: &Circuit, report: &PruneReport) -> usize {
    let policy = report.config.locality_policy;
    let label = |id: usize| oracle_label(&circuit.gates[id], policy);
    let pairs = report
        .pairs
        .iter()
        .filter(|(_, p)| label(p.a) != label(p.b))
        .count();
    let comps = report
        .components
        .iter()
        .filter(|c| c.gates.iter().any(|&g| label(g) != label(c.gates[0])))
        .count();
    pairs + comps + report.cross_label_edges
}

fn state_vector(amps: &[C64]) -> StateVector {
    StateVector::from_amplitudes(amps.to_vec()).unwrap()
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

// --------------------------------------------------------------- harness

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

struct Ledger {
    failures: usize,
    label_checks: Vec<(String, usize)>,
}

impl Ledger {
    fn record(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Outcome) {
        let t = Instant::now();
        let o = f(self);
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!(
            "[{tag}] {name}: {} ({:.1}s)",
            o.detail,
            t.elapsed().as_secs_f64()
        );
        if !o.passed {
            self.failures += 1;
        }
    }

    fn labels(&mut self, source: impl Into<String>, violations: usize) {
        self.label_checks.push((source.into(), violations));
    }
}

// -------------------------------------------------------------- criteria

fn c1_roundtrip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc1);
    let mut samples = Vec::new();
    for d in [2, 4] {
        for _ in 0..1000 {
            samples.push(special_unitary(d, 1e-3, &mut rng));
        }
    }
    let t = Instant::now();
    let mut logs = Vec::new();
    let mut worst: f64 = 0.0;
    for u in &samples {
        let log = principal_log(&from_na(u)).unwrap();
        let back = to_na(&mat_exp(&log).unwrap());
        worst = worst.max(op_norm(&(back - u)));
        logs.push(to_na(&log));
    }
    let seconds = t.elapsed().as_secs_f64();
    let mut oracle: f64 = 0.0;
    let mut skew: f64 = 0.0;
    for (u, l) in samples.iter().zip(&logs) {
        oracle = oracle.max(op_norm(&(l.exp() - u)));
        skew = skew.max(op_norm(&(l + l.adjoint())));
    }
    outcome(
        worst <= 1e-10 && oracle <= 1e-10 && skew <= 1e-10 && seconds < 10.0,
        format!(
            "1000 SU(2) + 1000 SU(4): max ||exp(log U) - U|| {worst:.2e}, nalgebra exp {oracle:.2e}, \
anti-Hermitian defect {skew:.1e}, {seconds:.2}s"
        ),
    )
}

struct LemmaPoint {
    error: f64,
    eta_delta: f64,
    fast_gap: f64,
}

fn lemma_point(xi: &Generator, xj: &Generator, rng: &mut ChaCha8Rng) -> LemmaPoint {
    let psi = haar_state(3, rng);
    let (ui, uj) = (generator_unitary(xi), generator_unitary(xj));
    let mut a = psi.clone();
    apply_local(&mut a, xi.support(), &ui);
    let mut b = psi.clone();
    apply_local(&mut b, xj.support(), &uj);
    let exact = inner(&a, &b).norm();
    let (mi, mj) = (to_na(xi.matrix()), to_na(xj.matrix()));
    let mut c = psi.clone();
    apply_local(&mut c, xi.support(), &(&mj - &mi).exp());
    let fast_oracle = inner(&psi, &c).norm();
    let fast =
        overlap_gates_fast_with(xi, xj, &state_vector(&psi), ReferenceStrategy::Dominant).unwrap();
    let delta = op_norm(&(&mj - &mi));
    let eta = op_norm(&(&mi * &mj - &mj * &mi));
    LemmaPoint {
        error: (fast - exact).abs(),
        eta_delta: eta * delta,
        fast_gap: (fast - fast_oracle).abs(),
    }
}

fn random_support(rng: &mut ChaCha8Rng) -> Vec<usize> {
    let first = rng.random_range(0..3);
    if rng.random_bool(0.5) {
        vec![first]
    } else {
        vec![first, (first + rng.random_range(1..3)) % 3]
    }
}

fn c2_lemma() -> Outcome {
    let calibrated =
        SAFETY_FACTOR * calibrate_lemma(LEMMA_CALIBRATION_SAMPLES, CALIBRATION_SEED).unwrap();
    let constant_ok = calibrated <= LEMMA_CONSTANT && LEMMA_CONSTANT - calibrated <= 1e-4;

    let mut rng = ChaCha8Rng::seed_from_u64(0xc2);
    let mut commuting: f64 = 0.0;
    let mut gap: f64 = 0.0;
    for _ in 0..200 {
        let support = random_support(&mut rng);
        let norm = rng.random_range(0.05..1.5);
        let xi = random_generator(support.clone(), norm, &mut rng).unwrap();
        let mi = to_na(xi.matrix());
        let (a, b) = (rng.random_range(-1.5..1.5), rng.random_range(-0.5..0.5));
        let mj = &mi * C64::new(a, 0.0) + &mi * &mi * &mi * C64::new(b, 0.0);
        let xj = Generator::from_matrix(support, &from_na(&mj)).unwrap();
        let p = lemma_point(&xi, &xj, &mut rng);
        commuting = commuting.max(p.error);
        gap = gap.max(p.fast_gap);
    }

    let mut worst: f64 = 0.0;
    let mut kept = 0;
    let mut span = (f64::INFINITY, 0.0f64);
    while kept < 500 {
        let support = random_support(&mut rng);
        let norm = log_uniform(&mut rng, 0.05, 1.5);
        let xi = random_generator(support.clone(), norm, &mut rng).unwrap();
        let d_norm = log_uniform(&mut rng, 1e-4, 1.0);
        let d = random_generator(support, d_norm, &mut rng).unwrap();
        let xj = xi.add_scaled(&d, 1.0).unwrap();
        let p = lemma_point(&xi, &xj, &mut rng);
        if !(1e-6..=1e-1).contains(&p.eta_delta) {
            continue;
        }
        kept += 1;
        span = (span.0.min(p.eta_delta), span.1.max(p.eta_delta));
        worst = worst.max(p.error / p.eta_delta);
        gap = gap.max(p.fast_gap);
    }
    outcome(
        commuting <= 1e-9 && worst <= LEMMA_CONSTANT && constant_ok && gap <= 1e-12,
        format!(
            "(a) 200 commuting pairs max |fast - exact| {commuting:.2e}; (b) 500 pairs, ηδ in [{:.1e}, {:.1e}], \
max error/(ηδ) {worst:.4} <= C {LEMMA_CONSTANT} (2x calibration {calibrated:.4}); fast vs oracle {gap:.1e}",
            span.0, span.1
        ),
    )
}

fn closure(
    circuit: &Circuit,
    refs: &[Vec<C64>],
    epsilon: f64,
    near_ties: &mut usize,
) -> BTreeSet<Vec<usize>> {
    let outputs: Vec<Vec<Vec<C64>>> = circuit
        .gates
        .iter()
        .map(|g| {
            refs.iter()
                .map(|psi| {
                    let mut s = psi.clone();
                    apply_gate(&mut s, g);
                    s
                })
                .collect()
        })
        .collect();
    let mut groups: BTreeMap<(GateKind, usize, usize), Vec<usize>> = BTreeMap::new();
    for g in circuit.gates.iter().filter(|g| g.is_parameterized()) {
        groups
            .entry(oracle_label(g, LocalityPolicy::SameLayer))
            .or_default()
            .push(g.id);
    }
    let mut classes = BTreeSet::new();
    for members in groups.values() {
        let k = members.len();
        let mut parent: Vec<usize> = (0..k).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        for a in 0..k {
            for b in a + 1..k {
                let d = (0..refs.len())
                    .map(|r| fs(&outputs[members[a]][r], &outputs[members[b]][r]))
                    .fold(0.0, f64::max);
                if (d - epsilon).abs() < 1e-9 {
                    *near_ties += 1;
                }
                if d <= epsilon {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    parent[ra] = rb;
                }
            }
        }
        let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (a, &gate) in members.iter().enumerate() {
            let r = find(&mut parent, a);
            by_root.entry(r).or_default().push(gate);
        }
        classes.extend(by_root.into_values());
    }
    classes
}

fn c4_completeness(ledger: &mut Ledger) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc4);
    let (mut mismatches, mut merged, mut near_ties, mut max_params, mut violations) =
        (0, 0, 0, 0, 0);
    for _ in 0..50 {
        let circuit = random_small_circuit(24, &mut rng).unwrap();
        max_params = max_params.max(circuit.num_parameterized_gates());
        let refs: Vec<Vec<C64>> = (0..4)
            .map(|_| haar_state(circuit.num_qubits, &mut rng))
            .collect();
        let objective = Objective::classify_states(
            refs.iter().map(|r| state_vector(r)).collect(),
            vec![1.0, -1.0, 1.0, -1.0],
        )
        .unwrap();
        for epsilon in [0.01, 0.1, 0.5] {
            let config = PruneConfig {
                epsilon,
                batch_size: refs.len(),
                use_fast_distance: false,
                max_neighbors: usize::MAX,
                ..PruneConfig::default()
            };
            let (_, report) = prune(&circuit, &objective, &config).unwrap();
            violations += report_violations(&circuit, &report);
            let found: BTreeSet<Vec<usize>> = report
                .components
                .iter()
                .map(|c| {
                    let mut g = c.gates.clone();
                    g.sort_unstable();
                    g
                })
                .collect();
            let expected = closure(&circuit, &refs, epsilon, &mut near_ties);
            merged += expected.iter().filter(|c| c.len() > 1).count();
            if found != expected {
                mismatches += 1;
            }
        }
    }
    ledger.labels(
        "50 exhaustive completeness circuits x 3 thresholds",
        violations,
    );
    outcome(
        mismatches == 0 && max_params <= 24,
        format!(
            "50 circuits (<= {max_params} parameterized gates) x ε in {{0.01, 0.1, 0.5}}: {merged} merged classes, \
{mismatches} partition mismatches, {near_ties} pairs within 1e-9 of ε"
        ),
    )
}

struct Measured {
    size: usize,
    epsilon: f64,
    eta: f64,
    deviation: f64,
}

fn measure(generators: &[Generator], num_qubits: usize, rng: &mut ChaCha8Rng) -> Measured {
    let states: Vec<Vec<C64>> = (0..4).map(|_| haar_state(num_qubits, rng)).collect();
    let unitaries: Vec<M> = generators.iter().map(generator_unitary).collect();
    let single = |k: usize, psi: &[C64]| {
        let mut s = psi.to_vec();
        apply_local(&mut s, generators[k].support(), &unitaries[k]);
        s
    };
    let mut epsilon: f64 = 0.0;
    let mut eta: f64 = 0.0;
    for a in 0..generators.len() {
        for b in a + 1..generators.len() {
            for psi in &states {
                epsilon = epsilon.max(fs(&single(a, psi), &single(b, psi)));
            }
            let (ma, mb) = (to_na(generators[a].matrix()), to_na(generators[b].matrix()));
            eta = eta.max(op_norm(&(&ma * &mb - &mb * &ma)));
        }
    }
    let sens: Vec<f64> = if rng.random_bool(0.1) {
        vec![0.0; generators.len()]
    } else {
        (0..generators.len())
            .map(|_| rng.random_range(0.0..1.0))
            .collect()
    };
    let ids: Vec<usize> = (0..generators.len()).collect();
    let merged = merge(&ids, generators, &sens, None).unwrap();
    let u_new = generator_unitary(&merged.generator);
    let mut deviation: f64 = 0.0;
    for psi in &states {
        let mut orig = psi.clone();
        for (g, u) in generators.iter().zip(&unitaries) {
            apply_local(&mut orig, g.support(), u);
        }
        let mut new = psi.clone();
        apply_local(&mut new, merged.generator.support(), &u_new);
        deviation = deviation.max(fs(&new, &orig));
    }
    Measured {
        size: generators.len(),
        epsilon,
        eta,
        deviation,
    }
}

/// Merged components of real HEA layers, where CNOTs interleave the members.
/// Each component is merged alone, REPLACE style, and the whole circuit's
/// output deviation is compared with its `Δ_max`. Reported, not gated.
fn interleaved_layers() -> (usize, usize, f64) {
    let (mut count, mut over, mut worst) = (0, 0, 0.0f64);
    for seed in 0..10u64 {
        let circuit = build_hea(4, 3, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let refs: Vec<Vec<C64>> = (0..4).map(|_| haar_state(4, &mut rng)).collect();
        let objective = Objective::classify_states(
            refs.iter().map(|r| state_vector(r)).collect(),
            vec![1.0, -1.0, 1.0, -1.0],
        )
        .unwrap();
        let config = PruneConfig {
            epsilon: 1.0,
            batch_size: refs.len(),
            merge_mode: MergeMode::Replace,
            use_fast_distance: false,
            ..PruneConfig::default()
        };
        let (_, report) = prune(&circuit, &objective, &config).unwrap();
        for c in report.merged_components() {
            let gens = generators_of(&circuit, &c.members).unwrap();
            let merged = merge(&c.members, &gens, &c.sensitivities, None).unwrap();
            let core = &circuit.gates[c.core];
            let x_new = merged.generator.relocated(core.qubits.clone()).unwrap();
            let mut gates = circuit.gates.clone();
            gates[c.core] = GateInstance::generic(c.core, x_new, core.layer);
            let gates: Vec<GateInstance> = gates
                .into_iter()
                .filter(|g| g.id == c.core || !c.members.contains(&g.id))
                .collect();
            let deviation = refs
                .iter()
                .map(|psi| {
                    let mut new = psi.clone();
                    for g in &gates {
                        apply_gate(&mut new, g);
                    }
                    fs(&new, &run(&circuit, psi))
                })
                .fold(0.0, f64::max);
            count += 1;
            let ratio = deviation / c.delta_max;
            if ratio > 1.0 {
                over += 1;
            }
            worst = worst.max(ratio);
        }
    }
    (count, over, worst)
}

fn c5_bound() -> Outcome {
    let constants = BoundConstants::CALIBRATED;
    let refit =
        calibrate_bound(BOUND_CALIBRATION_SAMPLES, CALIBRATION_SEED, SAFETY_FACTOR).unwrap();
    let constant_ok = refit.c1 <= constants.c1
        && refit.c2 <= constants.c2
        && constants.c1 - refit.c1 <= 1e-4
        && constants.c2 - refit.c2 <= 1e-4;
    let bound = |m: &Measured| {
        let k = m.size as f64;
        constants.c1 * k * m.epsilon + constants.c2 * k * k * m.eta
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0xc5);
    let mut worst: f64 = 0.0;
    let mut sizes = BTreeSet::new();
    for _ in 0..100 {
        let size = rng.random_range(2..=8);
        let scale = log_uniform(&mut rng, 1e-3, 0.6);
        let spread = rng.random_range(0.0..0.5);
        let (gens, n) =
            random_component(ComponentFamily::CrossQubit, size, scale, spread, &mut rng).unwrap();
        let m = measure(&gens, n, &mut rng);
        sizes.insert(m.size);
        worst = worst.max(m.deviation / bound(&m));
    }

    let mut vanishing = Vec::new();
    for scale in [1e-2, 1e-4, 1e-6, 1e-8, 1e-10] {
        let size = rng.random_range(2..=8);
        let (gens, n) =
            random_component(ComponentFamily::CrossQubit, size, scale, 0.0, &mut rng).unwrap();
        let m = measure(&gens, n, &mut rng);
        vanishing.push((m.epsilon, m.deviation));
    }
    let (tail_eps, tail) = *vanishing.last().unwrap();
    let decreasing = vanishing.windows(2).all(|w| w[1].1 < w[0].1);
    let trail: Vec<String> = vanishing.iter().map(|(_, d)| format!("{d:.1e}")).collect();
    let (layer_count, layer_over, layer_worst) = interleaved_layers();
    outcome(
        worst <= 1.0 && tail <= 1e-8 && decreasing && constant_ok,
        format!(
            "100 components, sizes {:?}..={:?}: max deviation/Δmax {worst:.3} (c1 {}, c2 {}, refit c1 {:.4}); \
commuting deviation as scale -> 0: [{}], {tail:.1e} at ε {tail_eps:.1e}; \
interleaved HEA layers (not gated): {layer_over} of {layer_count} components above Δmax, max ratio {layer_worst:.3}",
            sizes.first().unwrap(),
            sizes.last().unwrap(),
            constants.c1,
            constants.c2,
            refit.c1,
            trail.join(", ")
        ),
    )
}

fn c6_compression(ledger: &mut Ledger) -> Outcome {
    let data = gen_bars_and_stripes(4, 0).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (n, before, after, ratio, left) in [(8, 288, 36, 8.0, 12.5), (10, 360, 36, 10.0, 10.0)] {
        let objective = Objective::classify(&data, n).unwrap();
        let circuit = build_hea(n, 12, 0).unwrap();
        let config = PruneConfig {
            epsilon: FRAC_PI_2,
            sensitivity_method: GradMethod::Adjoint,
            ..PruneConfig::default()
        };
        let (pruned, report) = prune(&circuit, &objective, &config).unwrap();
        ledger.labels(
            format!("{n}q/12L compression run"),
            report_violations(&circuit, &report),
        );
        let (p0, p1) = (count_params(&circuit), count_params(&pruned));
        let exact = p0 == before
            && p1 == after
            && report.params_before == before
            && report.params_after == after
            && report.compression == ratio
            && report.left_percent == left
            && p0 as f64 / p1 as f64 == ratio
            && 100.0 * p1 as f64 / p0 as f64 == left;
        ok &= exact;
        parts.push(format!(
            "{n}q/12L {p0}->{p1}, {}x, {}% left",
            report.compression, report.left_percent
        ));
    }
    outcome(ok, parts.join("; "))
}

fn c7_bas(ledger: &mut Ledger) -> Outcome {
    let config = BasConfig::default();
    let (mut before, mut no_ft, mut ft) = (0.0, 0.0, 0.0);
    let mut consistent = true;
    let mut per_seed = Vec::new();
    for seed in 0..3u64 {
        let data = gen_bars_and_stripes(4, seed).unwrap();
        let objective = Objective::classify(&data, config.num_qubits).unwrap();
        let initial = build_hea(config.num_qubits, config.num_layers, seed).unwrap();
        let trained = train_schedule(
            &initial,
            &objective,
            &[TrainConfig {
                seed,
                ..config.train.clone()
            }],
        )
        .unwrap();
        let prune_config = PruneConfig {
            seed,
            ..config.prune.clone()
        };
        let ft_config = TrainConfig {
            seed,
            ..config.finetune.clone()
        };
        let (result, report, tuned) = prune_and_finetune(
            "bars-and-stripes",
            &trained,
            &objective,
            &prune_config,
            &ft_config,
        )
        .unwrap();
        let (pruned, _) = prune(&trained, &objective, &prune_config).unwrap();
        ledger.labels(
            format!("bars-and-stripes seed {seed}"),
            report_violations(&trained, &report),
        );
        let acc = [
            accuracy(&trained, &data),
            accuracy(&pruned, &data),
            accuracy(&tuned, &data),
        ];
        consistent &= (acc[0] - result.metric_before).abs() < 1e-12
            && (acc[1] - result.metric_no_ft).abs() < 1e-12
            && (acc[2] - result.metric_ft).abs() < 1e-12;
        if seed == 0 {
            let (bench, bench_report) = run_bars_and_stripes(seed, &config).unwrap();
            consistent &= bench.metric_before == result.metric_before
                && bench.metric_no_ft == result.metric_no_ft
                && bench.metric_ft == result.metric_ft;
            ledger.labels("bench-bas seed 0", bench_report.cross_label_edges);
        }
        per_seed.push(format!("{:.3}/{:.3}/{:.3}", acc[0], acc[1], acc[2]));
        before += acc[0] / 3.0;
        no_ft += acc[1] / 3.0;
        ft += acc[2] / 3.0;
    }
    outcome(
        before >= 0.70 && no_ft < before && (ft - before).abs() <= 0.10 && consistent,
        format!(
            "8q/12L mean accuracy {before:.3} -> {no_ft:.3} pruned -> {ft:.3} fine-tuned (seeds: {})",
            per_seed.join(", ")
        ),
    )
}

fn c8_vqe(ledger: &mut Ledger, energies: &mut Vec<(f64, f64)>) -> Outcome {
    let config = VqeSweepConfig::default();
    let (baseline, sweep) = run_vqe_sweep(&config).unwrap();
    let h = gen_tfim(config.num_qubits, config.coupling, config.field).unwrap();
    let e0 = ground_energy(&dense_hamiltonian(&h));
    let exact_ok = (e0 - baseline.exact_energy).abs() <= 1e-9;
    energies.push((baseline.energy, e0));
    for r in &sweep.rows {
        ledger.labels(
            format!("TFIM sweep {}x", r.ratio),
            r.result.cross_label_edges,
        );
        energies.push((r.result.metric_no_ft, e0));
        energies.push((r.result.metric_ft, e0));
    }
    let row = |k: usize| sweep.rows.iter().find(|r| r.ratio == k);
    let max_ratio = sweep.rows.iter().map(|r| r.ratio).max().unwrap_or(0);
    let (Some(one), Some(two), Some(top)) = (row(1), row(2), row(max_ratio)) else {
        return outcome(
            false,
            format!(
                "missing sweep rows {:?}",
                sweep.rows.iter().map(|r| r.ratio).collect::<Vec<_>>()
            ),
        );
    };
    let rows: Vec<String> = sweep
        .rows
        .iter()
        .map(|r| {
            format!(
                "{}x {}p {:.1e}/{:.1e}",
                r.ratio, r.params, r.delta_direct, r.delta_ft
            )
        })
        .collect();
    outcome(
        exact_ok
            && one.delta_direct.abs() <= 1e-3
            && one.delta_ft.abs() <= 1e-4
            && max_ratio > 2
            && top.delta_ft.abs() > two.delta_ft.abs(),
        format!(
            "{}q TFIM E0 {e0:.10} (library {:.10}), baseline gap {:.1e}; ΔE direct/ft: {}",
            config.num_qubits,
            baseline.exact_energy,
            baseline.energy - e0,
            rows.join(", ")
        ),
    )
}

fn c9_scaling(ledger: &mut Ledger) -> Outcome {
    let config = ScalingConfig::default();
    let t = Instant::now();
    let rows = bench_scaling(&[96, 192, 384, 768], &config).unwrap();
    let total = t.elapsed().as_secs_f64();
    for r in &rows {
        ledger.labels(format!("scaling N={}", r.gates), r.cross_label_edges);
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.gates as f64).ln(), r.seconds.ln()))
        .collect();
    let n = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let times: Vec<String> = rows
        .iter()
        .map(|r| format!("{}:{:.4}s", r.gates, r.seconds))
        .collect();
    outcome(
        config.prune.max_neighbors == 5 && slope <= 1.2 && total < 60.0,
        format!(
            "D = {}, median prune times [{}], log-log slope {slope:.3}, {total:.1}s total",
            config.prune.max_neighbors,
            times.join(", ")
        ),
    )
}

fn c10_gradients(energies: &mut Vec<(f64, f64)>) -> Outcome {
    const H: f64 = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(0xc10);
    let mut worst: f64 = 0.0;
    let mut sim_gap: f64 = 0.0;
    for k in 0..100 {
        let circuit = random_circuit(&mut rng).unwrap();
        let h = random_hamiltonian(circuit.num_qubits, &mut rng).unwrap();
        let dense = dense_hamiltonian(&h);
        let e0 = ground_energy(&dense);
        let objective = Objective::vqe(h);
        let ps = grad(&circuit, &objective, GradMethod::ParamShift).unwrap();
        let slots: Vec<usize> = (0..circuit.gates.len())
            .filter(|&i| circuit.gates[i].is_parameterized())
            .collect();
        let fd: Vec<f64> = slots
            .iter()
            .map(|&i| {
                let mut plus = circuit.clone();
                let mut minus = circuit.clone();
                *plus.gates[i].theta.as_mut().unwrap() += H;
                *minus.gates[i].theta.as_mut().unwrap() -= H;
                (energy(&dense, &plus) - energy(&dense, &minus)) / (2.0 * H)
            })
            .collect();
        let diff = ps
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm = ps.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max(if norm < 1e-12 { diff } else { diff / norm });
        let e = energy(&dense, &circuit);
        sim_gap = sim_gap.max((e - objective.loss(&circuit).unwrap()).abs());
        energies.push((e, e0));
        if k < 10 {
            let config = TrainConfig {
                steps: 40,
                learning_rate: 0.1,
                optimizer: OptimizerKind::Adam,
                seed: k,
                ..TrainConfig::default()
            };
            let (_, trace) = finetune(&circuit, &objective, &config).unwrap();
            energies.extend(trace.iter().map(|r| (r.metric, e0)));
        }
    }
    let below = energies
        .iter()
        .map(|(e, e0)| e - e0)
        .fold(f64::INFINITY, f64::min);
    outcome(
        worst <= 1e-6 && below >= -1e-9 && sim_gap <= 1e-10,
        format!(
            "100 circuits: max ||ps - fd|| / ||ps|| {worst:.2e}; {} VQE energies, min E - E0 {below:.2e}; \
simulator agreement {sim_gap:.1e}",
            energies.len()
        ),
    )
}

fn c3_labels(ledger: &Ledger) -> Outcome {
    let total: usize = ledger.label_checks.iter().map(|(_, v)| v).sum();
    let worst: Vec<&str> = ledger
        .label_checks
        .iter()
        .filter(|(_, v)| *v > 0)
        .map(|(s, _)| s.as_str())
        .collect();
    outcome(
        total == 0 && !ledger.label_checks.is_empty(),
        format!(
            "{} benchmark runs, {total} edges or components across subgroup labels{}",
            ledger.label_checks.len(),
            if worst.is_empty() {
                String::new()
            } else {
                format!(" in {}", worst.join(", "))
            }
        ),
    )
}

fn main() -> ExitCode {
    let mut ledger = Ledger {
        failures: 0,
        label_checks: Vec::new(),
    };
    let mut energies = Vec::new();
    ledger.record("1 exp/log round trip", |_| c1_roundtrip());
    ledger.record("2 fast distance error law", |_| c2_lemma());
    ledger.record("4 component completeness", c4_completeness);
    ledger.record("5 merge error bound", |_| c5_bound());
    ledger.record("6 compression arithmetic", c6_compression);
    ledger.record("7 bars-and-stripes end to end", c7_bas);
    ledger.record("8 VQE compression sweep", |l| c8_vqe(l, &mut energies));
    ledger.record("9 prune-phase scaling", c9_scaling);
    ledger.record("10 gradients and variational bound", |_| {
        c10_gradients(&mut energies)
    });
    ledger.record("3 subgroup labels", |l| c3_labels(l));
    println!("{} of 10 criteria failed", ledger.failures);
    if ledger.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
