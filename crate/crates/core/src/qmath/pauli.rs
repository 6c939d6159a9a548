use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::matrix::{ComplexMatrix, C64, I, ONE, ZERO};
use crate::error::{Error, Result};

/// Coefficients below this magnitude are dropped from decompositions.
pub const COEFF_CUTOFF: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> ComplexMatrix {
        match self {
            Pauli::I => ComplexMatrix::identity(2),
            Pauli::X => ComplexMatrix::from_rows(&[vec![ZERO, ONE], vec![ONE, ZERO]]),
            Pauli::Y => ComplexMatrix::from_rows(&[vec![ZERO, -I], vec![I, ZERO]]),
            Pauli::Z => ComplexMatrix::from_rows(&[vec![ONE, ZERO], vec![ZERO, -ONE]]),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Result<Self> {
        match c.to_ascii_uppercase() {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(Error::Parse(format!("invalid Pauli letter '{other}'"))),
        }
    }
}

/// Tensor product of single-qubit Paulis with a real coefficient.
///
/// Letter `k` acts on the `k`-th qubit of the owning register (a Hamiltonian's
/// full register, or a gate's support list). In matrix form letter 0 is the
/// most significant Kronecker factor.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliString {
    pub letters: Vec<Pauli>,
    pub coeff: f64,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>, coeff: f64) -> Self {
        Self { letters, coeff }
    }

    pub fn parse(label: &str, coeff: f64) -> Result<Self> {
        let letters = label
            .chars()
            .map(Pauli::from_char)
            .collect::<Result<Vec<_>>>()?;
        if letters.is_empty() {
            return Err(Error::Parse("empty Pauli string".into()));
        }
        Ok(Self { letters, coeff })
    }

    pub fn num_qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn label(&self) -> String {
        self.letters.iter().map(|p| p.as_char()).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.iter().all(|&p| p == Pauli::I)
    }

    /// Dense matrix of the bare string (coefficient not applied).
    pub fn matrix(&self) -> ComplexMatrix {
        self.letters
            .iter()
            .fold(ComplexMatrix::identity(1), |acc, p| acc.kron(&p.matrix()))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.coeff, self.label())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Parses `"<coeff> <LABEL>"`.
    fn from_str(s: &str) -> Result<Self> {
        let mut it = s.split_whitespace();
        let (Some(c), Some(label), None) = (it.next(), it.next(), it.next()) else {
            return Err(Error::Parse(format!(
                "expected '<coeff> <PAULIS>', got '{s}'"
            )));
        };
        let coeff: f64 = c
            .parse()
            .map_err(|_| Error::Parse(format!("bad coefficient '{c}'")))?;
        PauliString::parse(label, coeff)
    }
}

/// All `4^k` Pauli labels on `k` qubits in lexicographic I < X < Y < Z order.
pub fn all_strings(k: usize) -> Vec<Vec<Pauli>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                Pauli::ALL.iter().map(move |&p| {
                    let mut s = prefix.clone();
                    s.push(p);
                    s
                })
            })
            .collect();
    }
    out
}

/// Expands a Hermitian matrix on `k <= 2` qubits as `Σ c_P P` with
/// `c_P = Tr(P H) / 2^k`. Near-zero coefficients are omitted.
pub fn pauli_decompose(h: &ComplexMatrix) -> Result<Vec<PauliString>> {
    let dim = h.ensure_square()?;
    if !dim.is_power_of_two() || dim > 4 {
        return Err(Error::DimensionTooLarge { dim, max: 4 });
    }
    let deviation = h.hermiticity_deviation();
    if deviation > 1e-8 {
        return Err(Error::NotHermitian { deviation });
    }
    let k = dim.trailing_zeros() as usize;
    let mut out = Vec::new();
    for letters in all_strings(k) {
        let p = PauliString::new(letters, 1.0);
        let c = trace_product(&p.matrix(), h).re / dim as f64;
        if c.abs() >= COEFF_CUTOFF {
            out.push(PauliString::new(p.letters, c));
        }
    }
    Ok(out)
}

/// `Σ c_P P` as a dense matrix.
pub fn pauli_sum(terms: &[PauliString], k: usize) -> ComplexMatrix {
    let dim = 1 << k;
    let mut acc = ComplexMatrix::zeros(dim, dim);
    for t in terms {
        acc = &acc + &t.matrix().scale_real(t.coeff);
    }
    acc
}

/// `Tr(A B)` without forming the product.
fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    let n = a.rows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}
