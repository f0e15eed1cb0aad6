//! Cyclic Jacobi eigendecomposition for dense real symmetric matrices.

use crate::{Error, Result};

pub const MAX_SWEEPS: usize = 100;

/// A dense square matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds from row-major data of length `n * n`.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::dims(n * n, data.len()));
        }
        Ok(SymMatrix { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::dims(n, row.len()));
            }
            data.extend_from_slice(row);
        }
        Ok(SymMatrix { n, data })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    fn off_diagonal_norm(&self) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    sum += self.get(i, j).powi(2);
                }
            }
        }
        sum.sqrt()
    }
}

/// Eigenpairs sorted by descending eigenvalue. `vectors[i]` pairs with
/// `values[i]` and has unit length.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Flips `v` so that its largest-magnitude entry is positive.
pub(crate) fn canonical_sign(v: &mut [f64]) {
    let mut pivot = 0.0f64;
    for &x in v.iter() {
        if x.abs() > pivot.abs() {
            pivot = x;
        }
    }
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Diagonalizes `a` by cyclic Jacobi rotations until the off-diagonal
/// Frobenius norm drops below `tol`.
pub fn eig_symmetric(a: &SymMatrix, tol: f64) -> Result<SymmetricEigen> {
    eig_symmetric_limited(a, tol, MAX_SWEEPS)
}

fn eig_symmetric_limited(a: &SymMatrix, tol: f64, max_sweeps: usize) -> Result<SymmetricEigen> {
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be positive, got {tol}")));
    }
    let n = a.n;
    for i in 0..n {
        for j in i + 1..n {
            let (x, y) = (a.get(i, j), a.get(j, i));
            if (x - y).abs() > 1e-12 * (1.0 + x.abs().max(y.abs())) {
                return Err(Error::NotSymmetric);
            }
        }
    }

    let mut m = a.clone();
    // symmetrize so that rotations keep exact symmetry
    for i in 0..n {
        for j in i + 1..n {
            let avg = 0.5 * (m.get(i, j) + m.get(j, i));
            m.set(i, j, avg);
            m.set(j, i, avg);
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let mut sweeps = 0;
    while m.off_diagonal_norm() >= tol {
        if sweeps == max_sweeps {
            return Err(Error::NoConvergence { sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).total_cmp(&m.get(i, i)));
    let values = order.iter().map(|&i| m.get(i, i)).collect();
    let vectors = order
        .iter()
        .map(|&col| {
            let mut vec: Vec<f64> = (0..n).map(|row| v[row * n + col]).collect();
            canonical_sign(&mut vec);
            vec
        })
        .collect();
    Ok(SymmetricEigen { values, vectors })
}

/// One Jacobi rotation zeroing `m[p][q]`; accumulates the rotation into the
/// columns of `v` (row-major n x n).
fn rotate(m: &mut SymMatrix, v: &mut [f64], p: usize, q: usize) {
    let apq = m.get(p, q);
    if apq == 0.0 {
        return;
    }
    let n = m.n;
    let (app, aqq) = (m.get(p, p), m.get(q, q));
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
    let c = 1.0 / t.hypot(1.0);
    let s = t * c;

    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let (akp, akq) = (m.get(k, p), m.get(k, q));
        let new_kp = c * akp - s * akq;
        let new_kq = s * akp + c * akq;
        m.set(k, p, new_kp);
        m.set(p, k, new_kp);
        m.set(k, q, new_kq);
        m.set(q, k, new_kq);
    }
    m.set(p, p, app - t * apq);
    m.set(q, q, aqq + t * apq);
    m.set(p, q, 0.0);
    m.set(q, p, 0.0);

    for k in 0..n {
        let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
        v[k * n + p] = c * vkp - s * vkq;
        v[k * n + q] = s * vkp + c * vkq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn diagonal_input() {
        let a = SymMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let e = eig_symmetric(&a, 1e-10).unwrap();
        assert_eq!(e.values, vec![2.0, 1.0]);
        assert_eq!(e.vectors[0], vec![1.0, 0.0]);
        assert_eq!(e.vectors[1], vec![0.0, 1.0]);
    }

    #[test]
    fn swap_matrix() {
        let a = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let e = eig_symmetric(&a, 1e-10).unwrap();
        assert!(close(&e.values, &[1.0, -1.0], 1e-12));
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(&e.vectors[0], &[r, r], 1e-12));
        // second vector is (1,-1)/sqrt2 up to sign
        assert!((e.vectors[1][0] + e.vectors[1][1]).abs() < 1e-12);
        assert!((e.vectors[1][0].abs() - r).abs() < 1e-12);
    }

    #[test]
    fn rejects_asymmetric() {
        let a = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(eig_symmetric(&a, 1e-10), Err(Error::NotSymmetric)));
    }

    #[test]
    fn sweep_limit_reports_no_convergence() {
        let a = random_symmetric(6, 9);
        assert!(matches!(
            eig_symmetric_limited(&a, 1e-10, 1),
            Err(Error::NoConvergence { sweeps: 1 })
        ));
        assert!(eig_symmetric(&a, 1e-10).is_ok());
        assert!(matches!(eig_symmetric(&a, 0.0), Err(Error::InvalidConfig(_))));
    }

    fn random_symmetric(n: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let x: f64 = rng.random_range(-1.0..1.0);
                data[i * n + j] = x;
                data[j * n + i] = x;
            }
        }
        SymMatrix::from_row_major(n, data).unwrap()
    }

    #[test]
    fn reconstruction_of_random_8x8() {
        for seed in 0..5 {
            let a = random_symmetric(8, seed);
            let e = eig_symmetric(&a, 1e-10).unwrap();
            // direct rebuild V diag(lambda) V^T
            let mut err = 0.0;
            for i in 0..8 {
                for j in 0..8 {
                    let rebuilt: f64 = (0..8)
                        .map(|k| e.values[k] * e.vectors[k][i] * e.vectors[k][j])
                        .sum();
                    err += (rebuilt - a.get(i, j)).powi(2);
                }
            }
            assert!(err.sqrt() < 1e-8, "seed {seed}: {}", err.sqrt());
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
            for i in 0..8 {
                for j in 0..8 {
                    let dot: f64 = (0..8).map(|k| e.vectors[i][k] * e.vectors[j][k]).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() < 1e-10);
                }
            }
        }
    }
}
