//! Dual-space identifiers: each parameterized gate is described by its Lie
//! algebra generator, the label of the subgroup it is searched in, and a small
//! vector of geometric features measured on reference states.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circuit::{GateInstance, GateKind, StateVector};
use crate::error::{Error, Result};
use crate::qmath::{
    all_strings, mat_exp, pauli_decompose, ComplexMatrix, Pauli, PauliString, C64, COEFF_CUTOFF,
    ZERO,
};

/// Anti-Hermitian generator `X = -i Σ c_P P` on a gate's qubits, kept both as
/// a dense matrix and as identity-free Pauli coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    support: Vec<usize>,
    matrix: ComplexMatrix,
    terms: Vec<PauliString>,
}

impl Generator {
    /// Builds `-i Σ c_P P`. Terms are canonicalized (sorted, duplicates summed).
    pub fn from_terms(support: Vec<usize>, terms: Vec<PauliString>) -> Result<Self> {
        let k = support.len();
        if k == 0 || k > 2 {
            return Err(Error::Config(format!(
                "generators act on one or two qubits, got {k}"
            )));
        }
        let mut merged: BTreeMap<Vec<Pauli>, f64> = BTreeMap::new();
        for t in terms {
            if t.num_qubits() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: t.num_qubits(),
                });
            }
            if t.is_identity() {
                return Err(Error::Config(
                    "generator terms must not include the identity".into(),
                ));
            }
            if !t.coeff.is_finite() {
                return Err(Error::NonFinite(format!(
                    "generator coefficient {}",
                    t.label()
                )));
            }
            *merged.entry(t.letters).or_default() += t.coeff;
        }
        let terms: Vec<PauliString> = merged
            .into_iter()
            .map(|(letters, coeff)| PauliString::new(letters, coeff))
            .collect();
        let dim = 1usize << k;
        let mut matrix = ComplexMatrix::zeros(dim, dim);
        for t in &terms {
            matrix = &matrix + &t.matrix().scale(C64::new(0.0, -t.coeff));
        }
        Ok(Self {
            support,
            matrix,
            terms,
        })
    }

    /// Projects an anti-Hermitian matrix onto the traceless Pauli span.
    pub fn from_matrix(support: Vec<usize>, matrix: &ComplexMatrix) -> Result<Self> {
        let dev = matrix.anti_hermiticity_deviation();
        if dev > 1e-8 {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let hermitian = matrix.scale(C64::new(0.0, 1.0));
        let terms = pauli_decompose(&hermitian)?
            .into_iter()
            .filter(|t| !t.is_identity())
            .collect();
        Self::from_terms(support, terms)
    }

    /// `-i (theta/2) P` for a single-qubit rotation.
    pub fn rotation(qubit: usize, axis: Pauli, theta: f64) -> Result<Self> {
        Self::from_terms(vec![qubit], vec![PauliString::new(vec![axis], theta / 2.0)])
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Identity-free, sorted Pauli coefficients.
    pub fn terms(&self) -> &[PauliString] {
        &self.terms
    }

    pub fn local_dim(&self) -> usize {
        self.matrix.rows()
    }

    /// Coefficient of the Pauli word `letters` (zero when absent).
    pub fn coeff(&self, letters: &[Pauli]) -> f64 {
        self.terms
            .iter()
            .find(|t| t.letters == letters)
            .map_or(0.0, |t| t.coeff)
    }

    /// Coefficients over all non-identity Pauli words in lexicographic order.
    pub fn coeff_vector(&self) -> Vec<f64> {
        all_strings(self.support.len())
            .into_iter()
            .skip(1)
            .map(|letters| self.coeff(&letters))
            .collect()
    }

    pub fn coeff_norm(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff * t.coeff)
            .sum::<f64>()
            .sqrt()
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            support: self.support.clone(),
            matrix: self.matrix.scale_real(s),
            terms: self
                .terms
                .iter()
                .map(|t| PauliString::new(t.letters.clone(), t.coeff * s))
                .collect(),
        }
    }

    /// Same operator, attached to other qubits.
    pub fn relocated(&self, support: Vec<usize>) -> Result<Self> {
        if support.len() != self.support.len() {
            return Err(Error::DimensionMismatch {
                expected: self.support.len(),
                found: support.len(),
            });
        }
        Ok(Self {
            support,
            ..self.clone()
        })
    }

    /// Replaces coefficients term by term, keeping the term list.
    pub fn with_coeffs(&self, coeffs: &[f64]) -> Result<Self> {
        if coeffs.len() != self.terms.len() {
            return Err(Error::DimensionMismatch {
                expected: self.terms.len(),
                found: coeffs.len(),
            });
        }
        let terms = self
            .terms
            .iter()
            .zip(coeffs)
            .map(|(t, &c)| PauliString::new(t.letters.clone(), c))
            .collect();
        let mut g = Self::from_terms(self.support.clone(), terms)?;
        // keep zero-coefficient terms so parameter slots stay stable
        g.terms = self
            .terms
            .iter()
            .zip(coeffs)
            .map(|(t, &c)| PauliString::new(t.letters.clone(), c))
            .collect();
        Ok(g)
    }

    /// `self + s * other`, computed in the abstract local algebra (qubit
    /// indices of `other` are ignored). The result keeps `self`'s support.
    pub fn add_scaled(&self, other: &Self, s: f64) -> Result<Self> {
        if other.support.len() != self.support.len() {
            return Err(Error::DimensionMismatch {
                expected: self.support.len(),
                found: other.support.len(),
            });
        }
        let mut terms = self.terms.clone();
        terms.extend(
            other
                .terms
                .iter()
                .map(|t| PauliString::new(t.letters.clone(), t.coeff * s)),
        );
        Self::from_terms(self.support.clone(), terms)
    }

    /// `exp(X)` on the local space.
    pub fn unitary(&self) -> Result<ComplexMatrix> {
        mat_exp(&self.matrix)
    }
}

/// How gates are grouped before redundancy search.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LocalityPolicy {
    /// Key `(qubit, layer)`: no two ansatz gates share a label.
    SameQubit,
    /// Key `layer`: gates with the same axis in one layer are compared across qubits.
    #[default]
    SameLayer,
    /// Single key: gates are grouped by axis only.
    Global,
    /// Key `(layer, first_qubit / size)`: qubits split into contiguous blocks.
    QubitBlock(usize),
}

impl fmt::Display for LocalityPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocalityPolicy::SameQubit => f.write_str("same-qubit"),
            LocalityPolicy::SameLayer => f.write_str("same-layer"),
            LocalityPolicy::Global => f.write_str("global"),
            LocalityPolicy::QubitBlock(k) => write!(f, "block:{k}"),
        }
    }
}

impl FromStr for LocalityPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "same-qubit" => Ok(LocalityPolicy::SameQubit),
            "same-layer" => Ok(LocalityPolicy::SameLayer),
            "global" => Ok(LocalityPolicy::Global),
            other => match other.strip_prefix("block:").map(str::parse::<usize>) {
                Some(Ok(k)) if k >= 1 => Ok(LocalityPolicy::QubitBlock(k)),
                _ => Err(Error::Parse(format!(
                    "unknown locality policy '{s}' (same-qubit | same-layer | global | block:K)"
                ))),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LocalityKey {
    QubitLayer { qubit: usize, layer: usize },
    Layer(usize),
    LayerBlock { layer: usize, block: usize },
    Global,
}

/// Label of the subgroup a gate is searched in. Equal labels are the only
/// pairs ever compared for redundancy.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubgroupLabel {
    /// Sorted Pauli words with nonzero coefficient, qubit indices erased.
    pub axis_signature: Vec<String>,
    pub locality_key: LocalityKey,
    pub kind_tag: GateKind,
}

impl SubgroupLabel {
    pub fn signature(&self) -> String {
        self.axis_signature.join("+")
    }
}

impl fmt::Display for SubgroupLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}[{}]@{:?}",
            self.kind_tag,
            self.signature(),
            self.locality_key
        )
    }
}

/// Geometric features of a gate on a set of reference states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Mean FS displacement from the identity, radians in `[0, π/2]`.
    pub displacement: f64,
    /// Mean pure-state quantum Fisher information `4 Var(iX)`.
    pub qfi: f64,
    pub support_mask: u64,
    pub coeff_norm: f64,
}

/// The concatenated identifier of one gate.
#[derive(Clone, Debug, PartialEq)]
pub struct Identifier {
    pub coeffs: Vec<PauliString>,
    pub label: SubgroupLabel,
    pub features: FeatureVector,
}

/// Generator of a parameterized gate. Rotations use the closed form
/// `-i (theta/2) P`; GENERIC gates return their stored generator.
pub fn extract_generator(gate: &GateInstance) -> Result<Generator> {
    match gate.kind {
        GateKind::Cnot => Err(Error::NotParameterized {
            id: gate.id,
            kind: gate.kind.to_string(),
        }),
        GateKind::Generic => gate
            .generator_override
            .clone()
            .ok_or_else(|| Error::InvalidGate {
                id: gate.id,
                reason: "GENERIC gate without generator".into(),
            }),
        kind => {
            let theta = gate.theta.ok_or_else(|| Error::InvalidGate {
                id: gate.id,
                reason: "rotation without theta".into(),
            })?;
            if theta.abs() >= 2.0 * PI - 1e-6 {
                return Err(Error::BranchAmbiguity {
                    phase: theta / 2.0,
                    tol: 5e-7,
                });
            }
            let axis = kind.axis().unwrap_or(Pauli::Z);
            Generator::rotation(gate.qubits[0], axis, theta)
        }
    }
}

/// Axis signature: for rotations the kind's axis, otherwise the Pauli words
/// carrying a nonzero coefficient.
fn axis_signature(gate: &GateInstance) -> Result<Vec<String>> {
    if let Some(axis) = gate.kind.axis() {
        return Ok(vec![axis.as_char().to_string()]);
    }
    let gen = extract_generator(gate)?;
    let mut sig: Vec<String> = gen
        .terms()
        .iter()
        .filter(|t| t.coeff.abs() > COEFF_CUTOFF)
        .map(PauliString::label)
        .collect();
    sig.sort();
    Ok(sig)
}

pub fn subgroup_label(gate: &GateInstance, policy: LocalityPolicy) -> Result<SubgroupLabel> {
    if !gate.is_parameterized() {
        return Err(Error::NotParameterized {
            id: gate.id,
            kind: gate.kind.to_string(),
        });
    }
    let first = gate.qubits.first().copied().unwrap_or(0);
    let locality_key = match policy {
        LocalityPolicy::SameQubit => LocalityKey::QubitLayer {
            qubit: first,
            layer: gate.layer,
        },
        LocalityPolicy::SameLayer => LocalityKey::Layer(gate.layer),
        LocalityPolicy::Global => LocalityKey::Global,
        LocalityPolicy::QubitBlock(size) => LocalityKey::LayerBlock {
            layer: gate.layer,
            block: first / size.max(1),
        },
    };
    Ok(SubgroupLabel {
        axis_signature: axis_signature(gate)?,
        locality_key,
        kind_tag: gate.kind,
    })
}

/// Displacement, QFI and support features averaged over `reference_states`.
pub fn geo_features(
    gate: &GateInstance,
    reference_states: &[StateVector],
) -> Result<FeatureVector> {
    if reference_states.is_empty() {
        return Err(Error::Empty("reference states"));
    }
    let gen = extract_generator(gate)?;
    let unitary = gate.local_unitary()?;
    let h = gen.matrix().scale(C64::new(0.0, 1.0));
    let h2 = &h * &h;
    let mut displacement = 0.0;
    let mut qfi = 0.0;
    for psi in reference_states {
        let rho = psi.reduced_density(&gate.qubits)?;
        let overlap = trace_product(&rho, &unitary).norm();
        displacement += overlap.clamp(0.0, 1.0).acos();
        let mean = trace_product(&rho, &h).re;
        let second = trace_product(&rho, &h2).re;
        qfi += 4.0 * (second - mean * mean);
    }
    let n = reference_states.len() as f64;
    Ok(FeatureVector {
        displacement: displacement / n,
        qfi: qfi / n,
        support_mask: gate.qubits.iter().fold(0u64, |m, &q| m | (1u64 << q)),
        coeff_norm: gen.coeff_norm(),
    })
}

pub fn identifier(
    gate: &GateInstance,
    reference_states: &[StateVector],
    policy: LocalityPolicy,
) -> Result<Identifier> {
    let gen = extract_generator(gate)?;
    Ok(Identifier {
        coeffs: gen.terms().to_vec(),
        label: subgroup_label(gate, policy)?,
        features: geo_features(gate, reference_states)?,
    })
}

/// `Tr(A B)`.
pub(crate) fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    let n = a.rows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::build_hea;
    use crate::qmath::principal_log;
    use std::collections::HashSet;

    fn plus() -> StateVector {
        StateVector::normalized(vec![C64::new(1.0, 0.0); 2]).unwrap()
    }

    #[test]
    fn rz_generator_matches_principal_log() {
        let g = GateInstance::rotation(0, GateKind::Rz, 0, 0.3, 0);
        let gen = extract_generator(&g).unwrap();
        assert_eq!(gen.terms().len(), 1);
        assert!((gen.coeff(&[Pauli::Z]) - 0.15).abs() < 1e-15);
        let oracle = principal_log(&g.local_unitary().unwrap()).unwrap();
        assert!(gen.matrix().max_abs_diff(&oracle) < 1e-10);
    }

    #[test]
    fn zero_angle_gives_zero_generator() {
        let g = GateInstance::rotation(0, GateKind::Rx, 0, 0.0, 0);
        let gen = extract_generator(&g).unwrap();
        assert_eq!(gen.coeff_norm(), 0.0);
        assert!(gen.matrix().max_abs() == 0.0);
    }

    #[test]
    fn generic_round_trip() {
        let terms = vec![
            PauliString::parse("X", 0.1).unwrap(),
            PauliString::parse("Z", 0.2).unwrap(),
        ];
        let gen = Generator::from_terms(vec![0], terms).unwrap();
        let g = GateInstance::generic(0, gen, 0);
        let back = extract_generator(&g).unwrap();
        assert_eq!(back.coeff(&[Pauli::X]), 0.1);
        assert_eq!(back.coeff(&[Pauli::Z]), 0.2);
        let from_matrix = Generator::from_matrix(vec![0], back.matrix()).unwrap();
        assert!((from_matrix.coeff(&[Pauli::Z]) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn cnot_and_branch_errors() {
        let c = GateInstance::cnot(3, 0, 1, 0);
        assert!(matches!(
            extract_generator(&c),
            Err(Error::NotParameterized { id: 3, .. })
        ));
        let g = GateInstance::rotation(0, GateKind::Rx, 0, 2.0 * PI, 0);
        assert!(matches!(
            extract_generator(&g),
            Err(Error::BranchAmbiguity { .. })
        ));
    }

    #[test]
    fn generator_exp_recovers_gate() {
        for kind in [GateKind::Rx, GateKind::Ry, GateKind::Rz] {
            let g = GateInstance::rotation(0, kind, 0, -2.1, 0);
            let gen = extract_generator(&g).unwrap();
            assert!(
                gen.unitary()
                    .unwrap()
                    .max_abs_diff(&g.local_unitary().unwrap())
                    < 1e-14
            );
            let back = principal_log(&gen.unitary().unwrap()).unwrap();
            assert!(back.max_abs_diff(gen.matrix()) < 1e-8);
        }
    }

    #[test]
    fn labels() {
        let ry = GateInstance::rotation(0, GateKind::Ry, 2, 0.5, 3);
        let l = subgroup_label(&ry, LocalityPolicy::SameLayer).unwrap();
        assert_eq!(l.axis_signature, vec!["Y".to_string()]);
        assert_eq!(l.locality_key, LocalityKey::Layer(3));

        let a = GateInstance::rotation(0, GateKind::Ry, 0, 0.1, 1);
        let b = GateInstance::rotation(1, GateKind::Ry, 5, -0.4, 1);
        assert_eq!(
            subgroup_label(&a, LocalityPolicy::SameLayer).unwrap(),
            subgroup_label(&b, LocalityPolicy::SameLayer).unwrap()
        );
        let x = GateInstance::rotation(2, GateKind::Rx, 0, 0.1, 1);
        assert_ne!(
            subgroup_label(&a, LocalityPolicy::SameLayer).unwrap(),
            subgroup_label(&x, LocalityPolicy::SameLayer).unwrap()
        );
    }

    #[test]
    fn labels_partition_the_ansatz() {
        let c = build_hea(8, 12, 1).unwrap();
        for (policy, classes) in [
            (LocalityPolicy::SameLayer, 36),
            (LocalityPolicy::SameQubit, 288),
            (LocalityPolicy::Global, 3),
            (LocalityPolicy::QubitBlock(4), 72),
        ] {
            let labels: HashSet<SubgroupLabel> = c
                .gates
                .iter()
                .filter(|g| g.is_parameterized())
                .map(|g| subgroup_label(g, policy).unwrap())
                .collect();
            assert_eq!(labels.len(), classes, "{policy}");
        }
    }

    #[test]
    fn policy_parsing() {
        assert_eq!(
            "same-layer".parse::<LocalityPolicy>().unwrap(),
            LocalityPolicy::SameLayer
        );
        assert_eq!(
            "block:3".parse::<LocalityPolicy>().unwrap(),
            LocalityPolicy::QubitBlock(3)
        );
        assert!("block:0".parse::<LocalityPolicy>().is_err());
        for p in [
            LocalityPolicy::SameQubit,
            LocalityPolicy::Global,
            LocalityPolicy::QubitBlock(2),
        ] {
            assert_eq!(p.to_string().parse::<LocalityPolicy>().unwrap(), p);
        }
    }

    #[test]
    fn features_of_identity_gate() {
        let g = GateInstance::rotation(0, GateKind::Rz, 0, 0.0, 0);
        let f = geo_features(&g, &[plus()]).unwrap();
        assert!(f.displacement < 1e-7);
        assert!(f.qfi.abs() < 1e-15);
    }

    #[test]
    fn rz_displacement_on_plus() {
        for theta in [0.1, 0.7, 1.5, 2.9, PI] {
            let g = GateInstance::rotation(0, GateKind::Rz, 0, theta, 0);
            let f = geo_features(&g, &[plus()]).unwrap();
            assert!((f.displacement - theta / 2.0).abs() < 1e-7, "{theta}");
            // Var(Z/2 * theta... ) on |+>: H = (theta/2) Z, variance (theta/2)^2
            assert!((f.qfi - theta * theta).abs() < 1e-12);
        }
    }

    #[test]
    fn rz_on_eigenstate_has_no_displacement() {
        let g = GateInstance::rotation(0, GateKind::Rz, 0, 1.2, 0);
        let f = geo_features(&g, &[StateVector::zero(1)]).unwrap();
        assert!(f.displacement.abs() < 1e-7);
        assert!(f.qfi.abs() < 1e-12);
        assert!(geo_features(&g, &[]).is_err());
    }

    #[test]
    fn displacement_ignores_global_phase() {
        let g = GateInstance::rotation(0, GateKind::Rx, 1, 0.8, 0);
        let psi = crate::circuit::amplitude_embed(&[0.3, -0.2, 0.5, 0.7], 2).unwrap();
        let rotated = StateVector::from_amplitudes(
            psi.amplitudes()
                .iter()
                .map(|a| a * C64::from_polar(1.0, 0.9))
                .collect(),
        )
        .unwrap();
        let f1 = geo_features(&g, &[psi]).unwrap();
        let f2 = geo_features(&g, &[rotated]).unwrap();
        assert!((f1.displacement - f2.displacement).abs() < 1e-12);
        assert_eq!(f1.support_mask, 0b10);
    }

    #[test]
    fn identifier_composes() {
        let g = GateInstance::rotation(0, GateKind::Rz, 0, 0.3, 0);
        let id = identifier(&g, &[plus()], LocalityPolicy::SameLayer).unwrap();
        assert!((id.coeffs[0].coeff - 0.15).abs() < 1e-15);
        assert_eq!(id.label.axis_signature, vec!["Z".to_string()]);
        assert!((id.features.displacement - 0.15).abs() < 1e-7);
    }
}
