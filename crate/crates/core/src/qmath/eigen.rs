//! Cyclic complex Jacobi eigensolver for Hermitian matrices, and a unitary
//! eigendecomposition built on top of it.

use super::matrix::{ComplexMatrix, C64, ZERO};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition `A = V diag(values) V†` of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: ComplexMatrix,
}

/// Diagonalizes a Hermitian matrix. Only the Hermitian part of `a` is used;
/// callers validate hermiticity themselves when it matters.
pub fn hermitian_eigen(a: &ComplexMatrix) -> Result<HermitianEigen> {
    let n = a.ensure_square()?;
    let mut m = a.clone();
    // symmetrize so round-off in the input does not bias the rotations
    for i in 0..n {
        m[(i, i)] = C64::new(m[(i, i)].re, 0.0);
        for j in i + 1..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
    let mut v = ComplexMatrix::identity(n);
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);

    let target = 4.0 * f64::EPSILON * (n as f64) * scale;
    let mut converged = n <= 1;
    let mut previous = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        // stagnation at round-off level also counts as converged
        if off <= target || (off >= previous && off <= 1e-10 * scale) {
            converged = true;
            break;
        }
        previous = off;
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[(x, x)].re.total_cmp(&m[(y, y)].re));
    let values = order.iter().map(|&k| m[(k, k)].re).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, col)] = v[(r, k)];
        }
    }
    Ok(HermitianEigen { values, vectors })
}

/// One Jacobi rotation annihilating `m[(p, q)]`.
fn rotate(m: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let b = m[(p, q)];
    let babs = b.norm();
    if babs < 1e-300 {
        return;
    }
    let phase = b / babs;
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    let theta = (aqq - app) / (2.0 * babs);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    // G = diag(1, conj(phase)) * [[c, s], [-s, c]]
    let g00 = C64::new(c, 0.0);
    let g01 = C64::new(s, 0.0);
    let g10 = -phase.conj() * s;
    let g11 = phase.conj() * c;

    let n = m.rows();
    for k in 0..n {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = mkp * g00 + mkq * g10;
        m[(k, q)] = mkp * g01 + mkq * g11;
    }
    for k in 0..n {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = g00.conj() * mpk + g10.conj() * mqk;
        m[(q, k)] = g01.conj() * mpk + g11.conj() * mqk;
    }
    m[(p, q)] = ZERO;
    m[(q, p)] = ZERO;
    m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
    m[(q, q)] = C64::new(m[(q, q)].re, 0.0);
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * g00 + vkq * g10;
        v[(k, q)] = vkp * g01 + vkq * g11;
    }
}

/// Eigen-decomposition `U = V diag(values) V†` of a unitary (normal) matrix.
#[derive(Clone, Debug)]
pub struct UnitaryEigen {
    pub values: Vec<C64>,
    pub vectors: ComplexMatrix,
}

/// Diagonalizes a unitary matrix through the commuting Hermitian pair
/// `(U + U†)/2`, `(U - U†)/2i`. A generic real mix of the pair is diagonalized
/// first; clusters it fails to split are refined with different mixes.
pub fn unitary_eigen(u: &ComplexMatrix) -> Result<UnitaryEigen> {
    const MIXES: [f64; 5] = [
        0.618_033_988_749_894_9,
        -1.324_717_957_244_746,
        std::f64::consts::E,
        0.414_213_562_373_095_1,
        -0.577_215_664_901_532_9,
    ];
    let n = u.ensure_square()?;
    let mut basis = ComplexMatrix::identity(n);
    let mut current = u.clone();
    for &gamma in &MIXES {
        let adj = current.adjoint();
        let mut mix = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let h1 = (current[(i, j)] + adj[(i, j)]) * 0.5;
                let h2 = (current[(i, j)] - adj[(i, j)]) * C64::new(0.0, -0.5);
                mix[(i, j)] = h1 + h2 * gamma;
            }
        }
        let eig = hermitian_eigen(&mix)?;
        basis = &basis * &eig.vectors;
        current = &(&basis.adjoint() * u) * &basis;
        let off = off_diagonal_max(&current);
        if off <= 1e-13 {
            break;
        }
    }
    let values = (0..n).map(|i| current[(i, i)]).collect();
    Ok(UnitaryEigen {
        values,
        vectors: basis,
    })
}

fn off_diagonal_max(m: &ComplexMatrix) -> f64 {
    let n = m.rows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst
}

/// `V diag(values) V†`.
pub fn reassemble(vectors: &ComplexMatrix, values: &[C64]) -> ComplexMatrix {
    let n = vectors.rows();
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = ZERO;
            for (k, &d) in values.iter().enumerate() {
                acc += vectors[(i, k)] * d * vectors[(j, k)].conj();
            }
            out[(i, j)] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(rng.random_range(-1.0..1.0), 0.0);
            for j in i + 1..n {
                let z = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn hermitian_eigen_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 3, 4, 8, 16, 32] {
            let a = random_hermitian(n, &mut rng);
            let eig = hermitian_eigen(&a).unwrap();
            let vals: Vec<C64> = eig.values.iter().map(|&x| C64::new(x, 0.0)).collect();
            let back = reassemble(&eig.vectors, &vals);
            assert!(back.max_abs_diff(&a) < 1e-12, "n={n}");
            assert!(eig.vectors.unitarity_deviation() < 1e-12);
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn degenerate_spectrum() {
        let a = ComplexMatrix::identity(4).scale_real(2.5);
        let eig = hermitian_eigen(&a).unwrap();
        assert!(eig.values.iter().all(|&x| (x - 2.5).abs() < 1e-15));
    }

    #[test]
    fn unitary_eigen_handles_degenerate_phases() {
        // Pauli X ⊗ I has eigenvalues {1, 1, -1, -1}
        let x = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let u = x.kron(&ComplexMatrix::identity(2));
        let eig = unitary_eigen(&u).unwrap();
        let back = reassemble(&eig.vectors, &eig.values);
        assert!(back.max_abs_diff(&u) < 1e-13);
    }
}
