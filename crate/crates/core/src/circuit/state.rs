use crate::error::{Error, Result};
use crate::qmath::{ComplexMatrix, C64, ONE, ZERO};

/// Pure state of `num_qubits` qubits. Qubit `q` is bit `q` of the basis index.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// `|0...0>`.
    pub fn zero(num_qubits: usize) -> Self {
        Self::basis(num_qubits, 0)
    }

    pub fn basis(num_qubits: usize, index: usize) -> Self {
        let mut amps = vec![ZERO; 1 << num_qubits];
        amps[index] = ONE;
        Self { num_qubits, amps }
    }

    /// Wraps amplitudes that must already be unit norm within 1e-8.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if !len.is_power_of_two() || len == 0 {
            return Err(Error::DimensionMismatch {
                expected: len.next_power_of_two(),
                found: len,
            });
        }
        let state = Self {
            num_qubits: len.trailing_zeros() as usize,
            amps,
        };
        let norm = state.norm();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::NormViolation { norm });
        }
        Ok(state)
    }

    /// Wraps amplitudes of any norm; used for adjoint (costate) vectors.
    pub(crate) fn from_raw(amps: Vec<C64>) -> Self {
        Self {
            num_qubits: amps.len().trailing_zeros() as usize,
            amps,
        }
    }

    /// Normalizes arbitrary amplitudes.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroVector);
        }
        Self::from_amplitudes(amps.into_iter().map(|z| z / norm).collect())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.check_same_register(other)?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn check_same_register(&self, other: &Self) -> Result<()> {
        if self.num_qubits != other.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                found: other.num_qubits,
            });
        }
        Ok(())
    }

    fn check_qubits(&self, qubits: &[usize]) -> Result<()> {
        for (k, &q) in qubits.iter().enumerate() {
            if q >= self.num_qubits {
                return Err(Error::QubitOutOfRange {
                    qubit: q,
                    num_qubits: self.num_qubits,
                });
            }
            if qubits[..k].contains(&q) {
                return Err(Error::InvalidGate {
                    id: usize::MAX,
                    reason: format!("repeated qubit {q}"),
                });
            }
        }
        Ok(())
    }

    /// Applies a local operator on `qubits` (first qubit = most significant
    /// local index bit). Supports one and two qubits.
    pub fn apply_local(&mut self, qubits: &[usize], m: &ComplexMatrix) -> Result<()> {
        self.check_qubits(qubits)?;
        let dim = 1usize << qubits.len();
        if m.rows() != dim || m.cols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: m.rows(),
            });
        }
        match qubits {
            [q] => {
                apply_1q(&mut self.amps, *q, m);
                Ok(())
            }
            [q0, q1] => {
                apply_2q(&mut self.amps, *q0, *q1, m);
                Ok(())
            }
            _ => {
                apply_kq(&mut self.amps, qubits, m);
                Ok(())
            }
        }
    }

    /// Controlled NOT, swapping amplitudes instead of multiplying.
    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        self.check_qubits(&[control, target])?;
        let (cm, tm) = (1usize << control, 1usize << target);
        for i in 0..self.amps.len() {
            if i & cm != 0 && i & tm == 0 {
                self.amps.swap(i, i | tm);
            }
        }
        Ok(())
    }

    /// Reduced density matrix on `support` (first qubit most significant).
    pub fn reduced_density(&self, support: &[usize]) -> Result<ComplexMatrix> {
        self.check_qubits(support)?;
        let k = support.len();
        let dim = 1usize << k;
        let mask: usize = support.iter().map(|&q| 1usize << q).sum();
        let mut rho = ComplexMatrix::zeros(dim, dim);
        for base in 0..self.amps.len() {
            if base & mask != 0 {
                continue;
            }
            let idx = |local: usize| -> usize {
                let mut i = base;
                for (pos, &q) in support.iter().enumerate() {
                    if local >> (k - 1 - pos) & 1 == 1 {
                        i |= 1 << q;
                    }
                }
                i
            };
            let col: Vec<C64> = (0..dim).map(|l| self.amps[idx(l)]).collect();
            for a in 0..dim {
                for b in 0..dim {
                    rho[(a, b)] += col[a] * col[b].conj();
                }
            }
        }
        Ok(rho)
    }
}

fn apply_1q(amps: &mut [C64], q: usize, m: &ComplexMatrix) {
    let bit = 1usize << q;
    let (m00, m01, m10, m11) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    for i in 0..amps.len() {
        if i & bit != 0 {
            continue;
        }
        let j = i | bit;
        let (a, b) = (amps[i], amps[j]);
        amps[i] = m00 * a + m01 * b;
        amps[j] = m10 * a + m11 * b;
    }
}

fn apply_2q(amps: &mut [C64], q0: usize, q1: usize, m: &ComplexMatrix) {
    let (b0, b1) = (1usize << q0, 1usize << q1);
    let mut local = [[ZERO; 4]; 4];
    for (r, row) in local.iter_mut().enumerate() {
        for (c, x) in row.iter_mut().enumerate() {
            *x = m[(r, c)];
        }
    }
    for i in 0..amps.len() {
        if i & (b0 | b1) != 0 {
            continue;
        }
        let idx = [i, i | b1, i | b0, i | b0 | b1];
        let v = idx.map(|k| amps[k]);
        for (r, &k) in idx.iter().enumerate() {
            amps[k] =
                local[r][0] * v[0] + local[r][1] * v[1] + local[r][2] * v[2] + local[r][3] * v[3];
        }
    }
}

fn apply_kq(amps: &mut [C64], qubits: &[usize], m: &ComplexMatrix) {
    let k = qubits.len();
    let dim = 1usize << k;
    let mask: usize = qubits.iter().map(|&q| 1usize << q).sum();
    let mut idx = vec![0usize; dim];
    for base in 0..amps.len() {
        if base & mask != 0 {
            continue;
        }
        for (local, slot) in idx.iter_mut().enumerate() {
            let mut i = base;
            for (pos, &q) in qubits.iter().enumerate() {
                if local >> (k - 1 - pos) & 1 == 1 {
                    i |= 1 << q;
                }
            }
            *slot = i;
        }
        let v: Vec<C64> = idx.iter().map(|&i| amps[i]).collect();
        for (r, &i) in idx.iter().enumerate() {
            amps[i] = (0..dim).map(|c| m[(r, c)] * v[c]).sum();
        }
    }
}

/// Pads `data` with zeros to `2^num_qubits` entries and L2-normalizes.
pub fn amplitude_embed(data: &[f64], num_qubits: usize) -> Result<StateVector> {
    let dim = 1usize << num_qubits;
    if data.len() > dim {
        return Err(Error::DimensionTooLarge {
            dim: data.len(),
            max: dim,
        });
    }
    let mut amps = vec![ZERO; dim];
    for (a, &x) in amps.iter_mut().zip(data) {
        *a = C64::new(x, 0.0);
    }
    StateVector::normalized(amps)
}
