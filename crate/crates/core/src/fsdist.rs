//! Fubini–Study distances between states and between gates.
//!
//! The fast gate distance replaces `O_i^† O_j = e^{-X_i} e^{X_j}` by the first
//! order BCH truncation `e^{X_j - X_i}` and evaluates it on the gate's local
//! marginal only, so its cost does not grow with the register size beyond one
//! partial trace.

use serde::{Deserialize, Serialize};

use crate::circuit::{apply_gate, GateInstance, StateVector};
use crate::dualrep::{trace_product, Generator};
use crate::error::{Error, Result};
use crate::qmath::{commutator, hermitian_eigen, mat_exp, op_norm, ComplexMatrix, C64};

/// How two generators on different qubits are compared by the fast distance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReferenceStrategy {
    /// Abstract local algebra, reference = dominant eigenvector of each gate's
    /// marginal; the larger of the two distances is returned.
    #[default]
    Dominant,
    /// Abstract local algebra, reference = the mixed marginal itself.
    Marginal,
    /// Both generators embedded on the union of supports, identity padded.
    Embed,
}

/// `arccos |<phi|psi>|`. Near overlap 1 it is evaluated as
/// `2 asin(||e^{ia} phi - psi|| / 2)` with the phase aligned, which keeps
/// distances far below `sqrt(machine epsilon)` resolvable.
pub fn fs_state(phi: &StateVector, psi: &StateVector) -> Result<f64> {
    for s in [phi, psi] {
        let norm = s.norm();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::NormViolation { norm });
        }
    }
    let c = phi.inner(psi)?;
    let m = c.norm();
    if m < 0.5 {
        return Ok(overlap_to_distance(m));
    }
    let phase = c / m;
    let chord = phi
        .amplitudes()
        .iter()
        .zip(psi.amplitudes())
        .map(|(a, b)| (a * phase - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(2.0 * (0.5 * chord).min(1.0).asin())
}

pub fn overlap_to_distance(overlap: f64) -> f64 {
    overlap.clamp(0.0, 1.0).acos()
}

/// `|<psi0| O_i^† O_j |psi0>|` by full statevector simulation.
pub fn overlap_gates_exact(
    oi: &GateInstance,
    oj: &GateInstance,
    psi0: &StateVector,
) -> Result<f64> {
    let a = apply_gate(psi0, oi)?;
    let b = apply_gate(psi0, oj)?;
    Ok(a.inner(&b)?.norm())
}

pub fn fs_gates_exact(oi: &GateInstance, oj: &GateInstance, psi0: &StateVector) -> Result<f64> {
    let a = apply_gate(psi0, oi)?;
    let b = apply_gate(psi0, oj)?;
    fs_state(&a, &b)
}

/// Marginal of a reference state on a gate support, with its dominant eigenvector.
#[derive(Clone, Debug)]
pub struct LocalReference {
    pub rho: ComplexMatrix,
    pub dominant: Vec<C64>,
}

impl LocalReference {
    pub fn new(psi: &StateVector, support: &[usize]) -> Result<Self> {
        let rho = psi.reduced_density(support)?;
        let eig = hermitian_eigen(&rho)?;
        let top = rho.rows() - 1;
        let dominant = (0..rho.rows()).map(|r| eig.vectors[(r, top)]).collect();
        Ok(Self { rho, dominant })
    }

    /// `|Tr(rho U)|`.
    pub fn mixed_overlap(&self, u: &ComplexMatrix) -> f64 {
        trace_product(&self.rho, u).norm()
    }

    /// `|<v|U|v>|` for the dominant eigenvector `v`.
    pub fn pure_overlap(&self, u: &ComplexMatrix) -> f64 {
        let uv = u.mul_vec(&self.dominant);
        self.dominant
            .iter()
            .zip(&uv)
            .map(|(a, b)| a.conj() * b)
            .sum::<C64>()
            .norm()
    }
}

/// `exp(X_j - X_i)` in the abstract local algebra.
pub fn bch_unitary(xi: &Generator, xj: &Generator) -> Result<ComplexMatrix> {
    mat_exp(&xj.matrix().try_sub(xi.matrix())?)
}

/// Fast overlap from precomputed marginals. `ri` and `rj` are the marginals on
/// the supports of `X_i` and `X_j`; when supports coincide they are the same
/// matrix and the result is `|<psi0|e^{X_j - X_i}|psi0>|` exactly.
pub fn fast_overlap_local(
    bch: &ComplexMatrix,
    ri: &LocalReference,
    rj: &LocalReference,
    same_support: bool,
    strategy: ReferenceStrategy,
) -> f64 {
    if same_support {
        return ri.mixed_overlap(bch);
    }
    match strategy {
        ReferenceStrategy::Dominant => ri.pure_overlap(bch).min(rj.pure_overlap(bch)),
        _ => ri.mixed_overlap(bch).min(rj.mixed_overlap(bch)),
    }
}

/// Fast overlap for a single reference state.
pub fn overlap_gates_fast_with(
    xi: &Generator,
    xj: &Generator,
    psi0: &StateVector,
    strategy: ReferenceStrategy,
) -> Result<f64> {
    if xi.support() == xj.support() {
        let r = LocalReference::new(psi0, xi.support())?;
        return Ok(r.mixed_overlap(&bch_unitary(xi, xj)?));
    }
    if strategy == ReferenceStrategy::Embed {
        let union = union_support(xi.support(), xj.support());
        let a = embed_local(xi.matrix(), xi.support(), &union)?;
        let b = embed_local(xj.matrix(), xj.support(), &union)?;
        let rho = psi0.reduced_density(&union)?;
        return Ok(trace_product(&rho, &mat_exp(&b.try_sub(&a)?)?).norm());
    }
    if xi.local_dim() != xj.local_dim() {
        return Err(Error::DimensionMismatch {
            expected: xi.local_dim(),
            found: xj.local_dim(),
        });
    }
    let ri = LocalReference::new(psi0, xi.support())?;
    let rj = LocalReference::new(psi0, xj.support())?;
    Ok(fast_overlap_local(
        &bch_unitary(xi, xj)?,
        &ri,
        &rj,
        false,
        strategy,
    ))
}

pub fn fs_gates_fast_with(
    xi: &Generator,
    xj: &Generator,
    psi0: &StateVector,
    strategy: ReferenceStrategy,
) -> Result<f64> {
    Ok(overlap_to_distance(overlap_gates_fast_with(
        xi, xj, psi0, strategy,
    )?))
}

pub fn fs_gates_fast(xi: &Generator, xj: &Generator, psi0: &StateVector) -> Result<f64> {
    fs_gates_fast_with(xi, xj, psi0, ReferenceStrategy::default())
}

/// `(||X_j - X_i||, ||[X_i, X_j]||)` in operator norm, local algebra.
pub fn bch_diagnostics(xi: &Generator, xj: &Generator) -> Result<(f64, f64)> {
    let delta = op_norm(&xj.matrix().try_sub(xi.matrix())?)?;
    let eta = op_norm(&commutator(xi.matrix(), xj.matrix())?)?;
    Ok((delta, eta))
}

/// Qubits of `a` followed by the new qubits of `b`.
fn union_support(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = a.to_vec();
    for &q in b {
        if !out.contains(&q) {
            out.push(q);
        }
    }
    out
}

/// Embeds `m` acting on `support` into the space of `union` (both ordered with
/// the first qubit most significant), padding with identities.
pub fn embed_local(m: &ComplexMatrix, support: &[usize], union: &[usize]) -> Result<ComplexMatrix> {
    let k = union.len();
    let positions: Vec<usize> = support
        .iter()
        .map(|q| {
            union
                .iter()
                .position(|u| u == q)
                .ok_or(Error::QubitOutOfRange {
                    qubit: *q,
                    num_qubits: k,
                })
        })
        .collect::<Result<_>>()?;
    let bit = |idx: usize, pos: usize| (idx >> (k - 1 - pos)) & 1;
    let local = |idx: usize| {
        positions
            .iter()
            .fold(0usize, |acc, &p| (acc << 1) | bit(idx, p))
    };
    let rest_mask: usize = (0..k)
        .filter(|p| !positions.contains(p))
        .map(|p| 1usize << (k - 1 - p))
        .sum();
    let dim = 1usize << k;
    let mut out = ComplexMatrix::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            if r & rest_mask != c & rest_mask {
                continue;
            }
            out[(r, c)] = m[(local(r), local(c))];
        }
    }
    Ok(out)
}
