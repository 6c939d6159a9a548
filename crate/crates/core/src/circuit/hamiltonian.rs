use std::fmt::Write as _;

use super::state::StateVector;
use crate::error::{Error, Result};
use crate::qmath::{ComplexMatrix, Pauli, PauliString, C64, ZERO};

/// Real linear combination of Pauli strings; letter `k` of each term acts on qubit `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    num_qubits: usize,
    terms: Vec<PauliString>,
}

impl Hamiltonian {
    pub fn new(num_qubits: usize, terms: Vec<PauliString>) -> Result<Self> {
        for t in &terms {
            if t.num_qubits() != num_qubits {
                return Err(Error::DimensionMismatch {
                    expected: num_qubits,
                    found: t.num_qubits(),
                });
            }
            if !t.coeff.is_finite() {
                return Err(Error::NonFinite(format!("coefficient of {}", t.label())));
            }
        }
        Ok(Self { num_qubits, terms })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn terms(&self) -> &[PauliString] {
        &self.terms
    }

    /// Parses the line format `coefficient PAULI_STRING`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let term: PauliString = line
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            terms.push(term);
        }
        let n = terms
            .first()
            .map(PauliString::num_qubits)
            .ok_or(Error::Empty("Hamiltonian has no terms"))?;
        Self::new(n, terms)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.terms {
            let _ = writeln!(s, "{} {}", t.coeff, t.label());
        }
        s
    }

    /// `<psi|H|psi>`. The imaginary residue must vanish to 1e-10.
    pub fn expectation(&self, state: &StateVector) -> Result<f64> {
        if state.num_qubits() != self.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                found: state.num_qubits(),
            });
        }
        let mut total = ZERO;
        for t in &self.terms {
            total += pauli_expectation(&t.letters, state.amplitudes()) * t.coeff;
        }
        if total.im.abs() > 1e-10 {
            return Err(Error::NonFinite(format!(
                "expectation has imaginary part {:.3e}",
                total.im
            )));
        }
        Ok(total.re)
    }

    /// `H|psi>` without forming the dense matrix.
    pub fn apply(&self, amps: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; amps.len()];
        for t in &self.terms {
            let (xmask, zmask, phase) = masks(&t.letters);
            let phase = phase * t.coeff;
            for (x, &a) in amps.iter().enumerate() {
                let sign = if (x & zmask).count_ones() % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                out[x ^ xmask] += phase * a * sign;
            }
        }
        out
    }

    /// Dense `2^n x 2^n` matrix in the register basis (qubit `q` = bit `q`).
    pub fn dense_matrix(&self) -> ComplexMatrix {
        let dim = 1usize << self.num_qubits;
        let mut m = ComplexMatrix::zeros(dim, dim);
        for col in 0..dim {
            let mut e = vec![ZERO; dim];
            e[col] = C64::new(1.0, 0.0);
            for (row, v) in self.apply(&e).into_iter().enumerate() {
                m[(row, col)] = v;
            }
        }
        m
    }
}

/// `(xmask, zmask, i^{#Y})` such that `P|x> = i^{#Y} (-1)^{|x & zmask|} |x ^ xmask>`.
fn masks(letters: &[Pauli]) -> (usize, usize, C64) {
    let mut xmask = 0usize;
    let mut zmask = 0usize;
    let mut ny = 0u32;
    for (q, p) in letters.iter().enumerate() {
        match p {
            Pauli::I => {}
            Pauli::X => xmask |= 1 << q,
            Pauli::Y => {
                xmask |= 1 << q;
                zmask |= 1 << q;
                ny += 1;
            }
            Pauli::Z => zmask |= 1 << q,
        }
    }
    let phase = match ny % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    };
    (xmask, zmask, phase)
}

/// `<psi|P|psi>` for a bare Pauli string over the full register.
pub fn pauli_expectation(letters: &[Pauli], amps: &[C64]) -> C64 {
    let (xmask, zmask, phase) = masks(letters);
    let mut acc = ZERO;
    for (x, &a) in amps.iter().enumerate() {
        let sign = if (x & zmask).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        acc += amps[x ^ xmask].conj() * a * sign;
    }
    acc * phase
}
