//! Dataset and Hamiltonian generators, and exact ground energies.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::Hamiltonian;
use crate::error::{Error, Result};
use crate::qmath::{hermitian_eigen, Pauli, PauliString, C64};
use crate::train::{Dataset, Sample};

/// Largest register handled by `exact_ground_energy`.
pub const MAX_EXACT_QUBITS: usize = 12;
/// Registers up to this size are diagonalized densely.
const DENSE_QUBITS: usize = 8;

/// Every nonconstant `size x size` bar and stripe image, row-major with
/// pixels in `{0, 1}`. A bar has all rows equal (label 0), a stripe has all
/// columns equal (label 1). `seed` only fixes the sample order.
pub fn gen_bars_and_stripes(size: usize, seed: u64) -> Result<Dataset> {
    if size < 2 || size * size > 16 {
        return Err(Error::Config(format!(
            "bars-and-stripes size must be 2..=4, got {size}"
        )));
    }
    let mut samples = Vec::new();
    for mask in 1..(1u32 << size) - 1 {
        let line: Vec<f64> = (0..size).map(|k| f64::from((mask >> k) & 1)).collect();
        let bar: Vec<f64> = (0..size * size).map(|p| line[p % size]).collect();
        let stripe: Vec<f64> = (0..size * size).map(|p| line[p / size]).collect();
        samples.push(Sample {
            features: bar,
            label: 0,
        });
        samples.push(Sample {
            features: stripe,
            label: 1,
        });
    }
    samples.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Dataset::new(samples)
}

/// `-J Σ Z_q Z_{q+1} - h Σ X_q` on an open chain.
pub fn gen_tfim(num_qubits: usize, coupling: f64, field: f64) -> Result<Hamiltonian> {
    if num_qubits == 0 || num_qubits > MAX_EXACT_QUBITS {
        return Err(Error::Config(format!(
            "TFIM size must be 1..={MAX_EXACT_QUBITS}, got {num_qubits}"
        )));
    }
    let mut terms = Vec::new();
    for q in 0..num_qubits.saturating_sub(1) {
        let mut letters = vec![Pauli::I; num_qubits];
        letters[q] = Pauli::Z;
        letters[q + 1] = Pauli::Z;
        terms.push(PauliString::new(letters, -coupling));
    }
    for q in 0..num_qubits {
        let mut letters = vec![Pauli::I; num_qubits];
        letters[q] = Pauli::X;
        terms.push(PauliString::new(letters, -field));
    }
    Hamiltonian::new(num_qubits, terms)
}

/// Smallest eigenvalue of `h`: dense diagonalization up to 8 qubits, Lanczos
/// with full reorthogonalization above.
pub fn exact_ground_energy(h: &Hamiltonian) -> Result<f64> {
    let n = h.num_qubits();
    if n > MAX_EXACT_QUBITS {
        return Err(Error::DimensionTooLarge {
            dim: 1 << n,
            max: 1 << MAX_EXACT_QUBITS,
        });
    }
    if n <= DENSE_QUBITS {
        let eig = hermitian_eigen(&h.dense_matrix())?;
        return Ok(eig.values[0]);
    }
    lanczos_ground(h)
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn lanczos_ground(h: &Hamiltonian) -> Result<f64> {
    let dim = 1usize << h.num_qubits();
    let max_iter = dim.min(400);
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a2c);
    let mut v: Vec<C64> = (0..dim)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), 0.0))
        .collect();
    let norm = dot(&v, &v).re.sqrt();
    v.iter_mut().for_each(|x| *x /= norm);

    let mut basis: Vec<Vec<C64>> = Vec::new();
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut previous = f64::INFINITY;
    for k in 0..max_iter {
        let mut w = h.apply(&v);
        let a = dot(&v, &w).re;
        alpha.push(a);
        basis.push(v);
        // full reorthogonalization, twice for stability
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let e = tridiagonal_min(&alpha, &beta);
        let b = dot(&w, &w).re.sqrt();
        if b < 1e-12 || (k >= 10 && (previous - e).abs() < 1e-13 * e.abs().max(1.0)) {
            return Ok(e);
        }
        previous = e;
        beta.push(b);
        v = w.into_iter().map(|x| x / b).collect();
    }
    Ok(previous)
}

/// Sturm-sequence count of eigenvalues below `x`.
fn count_below(alpha: &[f64], beta: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for (k, &a) in alpha.iter().enumerate() {
        let off = if k == 0 {
            0.0
        } else {
            beta[k - 1] * beta[k - 1]
        };
        d = a - x - if k == 0 { 0.0 } else { off / d };
        if d == 0.0 {
            d = -f64::EPSILON;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest eigenvalue of the symmetric tridiagonal matrix with diagonal
/// `alpha` and off-diagonal `beta`, by bisection.
fn tridiagonal_min(alpha: &[f64], beta: &[f64]) -> f64 {
    let radius = |k: usize| {
        let left = if k > 0 { beta[k - 1].abs() } else { 0.0 };
        let right = if k < beta.len() { beta[k].abs() } else { 0.0 };
        left + right
    };
    let mut lo = (0..alpha.len())
        .map(|k| alpha[k] - radius(k))
        .fold(f64::INFINITY, f64::min);
    let mut hi = (0..alpha.len())
        .map(|k| alpha[k] + radius(k))
        .fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(alpha, &beta[..alpha.len() - 1], mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
