//! PCA eigenspace ("eigenfaces") computed through the small Gram matrix.
//!
//! With `n` training vectors of length `d` and `n << d`, the covariance
//! eigenvectors are recovered from the `n x n` matrix `L = AᵀA` of the centered
//! data `A`: if `L v = μ v` then `A v` is an eigenvector of `A Aᵀ` with the same
//! eigenvalue. Stored eigenvalues are those of the covariance `A Aᵀ / n`.

use std::path::Path;

use crate::eigen::{canonical_sign, eig_symmetric, SymMatrix};
use crate::textfmt::{push_decimals, Tokens};
use crate::{Error, Result};

/// Number of components kept by default.
pub const DEFAULT_COMPONENTS: usize = 40;

/// Jacobi stopping tolerance, relative to the Frobenius norm of the Gram matrix.
pub const JACOBI_TOL: f64 = 1e-10;

/// Eigenvalues at or below this fraction of the largest are treated as zero.
pub const NEGLIGIBLE_EIGENVALUE: f64 = 1e-12;

/// Projection coefficients of one image; the network input.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub coeffs: Vec<f64>,
}

impl FeatureVector {
    pub fn new(coeffs: Vec<f64>) -> Self {
        FeatureVector { coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.coeffs
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(coeffs: Vec<f64>) -> Self {
        FeatureVector { coeffs }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Eigenspace {
    mean: Vec<f64>,
    /// Orthonormal eigenfaces, each of length `dim`, by descending eigenvalue.
    basis: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Eigenspace {
    /// Builds an eigenspace from parts, checking shapes.
    pub fn from_parts(mean: Vec<f64>, basis: Vec<Vec<f64>>, eigenvalues: Vec<f64>) -> Result<Self> {
        if basis.len() != eigenvalues.len() {
            return Err(Error::dims(basis.len(), eigenvalues.len()));
        }
        if let Some(bad) = basis.iter().find(|b| b.len() != mean.len()) {
            return Err(Error::dims(mean.len(), bad.len()));
        }
        Ok(Eigenspace {
            mean,
            basis,
            eigenvalues,
        })
    }

    /// Original vector length `d`.
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Number of retained components `m`.
    pub fn components(&self) -> usize {
        self.basis.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Keeps only the leading `m` components.
    pub fn truncated(&self, m: usize) -> Eigenspace {
        let m = m.min(self.components());
        Eigenspace {
            mean: self.mean.clone(),
            basis: self.basis[..m].to_vec(),
            eigenvalues: self.eigenvalues[..m].to_vec(),
        }
    }

    pub fn project(&self, v: &[f64]) -> Result<FeatureVector> {
        if v.len() != self.dim() {
            return Err(Error::dims(self.dim(), v.len()));
        }
        let centered: Vec<f64> = v.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        Ok(FeatureVector::new(
            self.basis.iter().map(|b| dot(b, &centered)).collect(),
        ))
    }

    pub fn reconstruct(&self, f: &FeatureVector) -> Result<Vec<f64>> {
        if f.len() != self.components() {
            return Err(Error::dims(self.components(), f.len()));
        }
        let mut out = self.mean.clone();
        for (c, b) in f.coeffs.iter().zip(&self.basis) {
            for (o, x) in out.iter_mut().zip(b) {
                *o += c * x;
            }
        }
        Ok(out)
    }

    /// Text form: `EIGEN1 <d> <m>`, then the mean, the eigenvalues and each
    /// basis vector in turn, at 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = format!("EIGEN1 {} {}\n", self.dim(), self.components());
        push_decimals(&mut out, &self.mean);
        push_decimals(&mut out, &self.eigenvalues);
        for b in &self.basis {
            push_decimals(&mut out, b);
        }
        out
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Eigenspace> {
        let bad = |m: String| Error::malformed(origin, m);
        let mut toks = Tokens::new(text);
        if toks.next_token() != Some("EIGEN1") {
            return Err(bad("missing EIGEN1 header".into()));
        }
        let d = toks.next_usize().map_err(bad)?;
        let m = toks.next_usize().map_err(bad)?;
        let mean = toks.read_f64s(d).map_err(bad)?;
        let eigenvalues = toks.read_f64s(m).map_err(bad)?;
        let basis = (0..m)
            .map(|_| toks.read_f64s(d))
            .collect::<Result<Vec<_>, _>>()
            .map_err(bad)?;
        if !toks.is_exhausted() {
            return Err(bad("trailing data after basis".into()));
        }
        Eigenspace::from_parts(mean, basis, eigenvalues)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: &Path) -> Result<Eigenspace> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Eigenspace::from_text(&text, path)
    }
}

/// Computes the mean and up to `m` leading eigenfaces of `train`.
///
/// Keeps `min(m, n - 1, #non-negligible eigenvalues)` components.
pub fn compute_eigenspace(train: &[Vec<f64>], m: usize) -> Result<Eigenspace> {
    if train.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 training vectors, got {}",
            train.len()
        )));
    }
    if m == 0 {
        return Err(Error::InvalidConfig("component count must be >= 1".into()));
    }
    let d = train[0].len();
    if let Some(bad) = train.iter().find(|v| v.len() != d) {
        return Err(Error::dims(d, bad.len()));
    }
    let n = train.len();

    let mut mean = vec![0.0; d];
    for v in train {
        for (acc, x) in mean.iter_mut().zip(v) {
            *acc += x;
        }
    }
    mean.iter_mut().for_each(|x| *x /= n as f64);
    let centered: Vec<Vec<f64>> = train
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, mu)| x - mu).collect())
        .collect();

    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let g = dot(&centered[i], &centered[j]);
            gram[i * n + j] = g;
            gram[j * n + i] = g;
        }
    }
    let scale = gram.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    let gram = SymMatrix::from_row_major(n, gram)?;
    let eig = eig_symmetric(&gram, JACOBI_TOL * scale)?;

    let largest = eig.values[0].max(0.0);
    let floor = NEGLIGIBLE_EIGENVALUE * largest.max(1.0);
    let keep = eig
        .values
        .iter()
        .take(m.min(n - 1))
        .take_while(|&&lambda| lambda > floor)
        .count();

    let mut basis = Vec::with_capacity(keep);
    let mut eigenvalues = Vec::with_capacity(keep);
    for (lambda, v) in eig.values.iter().zip(&eig.vectors).take(keep) {
        let mut face = vec![0.0; d];
        for (coef, a) in v.iter().zip(&centered) {
            for (f, x) in face.iter_mut().zip(a) {
                *f += coef * x;
            }
        }
        let norm = dot(&face, &face).sqrt();
        face.iter_mut().for_each(|x| *x /= norm);
        canonical_sign(&mut face);
        basis.push(face);
        eigenvalues.push((lambda / n as f64).max(0.0));
    }
    Eigenspace::from_parts(mean, basis, eigenvalues)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vectors(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect()
    }

    fn norm(v: &[f64]) -> f64 {
        dot(v, v).sqrt()
    }

    #[test]
    fn rank_one_geometry() {
        let space = compute_eigenspace(&[vec![0.0, 0.0], vec![2.0, 0.0]], 40).unwrap();
        assert_eq!(space.mean(), &[1.0, 0.0]);
        assert_eq!(space.components(), 1);
        assert_eq!(space.basis()[0], vec![1.0, 0.0]);
        // covariance eigenvalue with 1/n: ((-1)^2 + 1^2) / 2
        assert!((space.eigenvalues()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn error_paths() {
        assert!(matches!(
            compute_eigenspace(&[vec![1.0]], 3),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            compute_eigenspace(&[vec![1.0, 2.0], vec![1.0]], 3),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        let space = compute_eigenspace(&random_vectors(4, 5, 1), 2).unwrap();
        assert!(matches!(space.project(&[0.0; 4]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(
            space.reconstruct(&FeatureVector::new(vec![0.0; 3])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn component_count_is_capped() {
        let train = random_vectors(10, 64, 2);
        assert_eq!(compute_eigenspace(&train, 40).unwrap().components(), 9);
        assert_eq!(compute_eigenspace(&train, 4).unwrap().components(), 4);
        let train = random_vectors(200, 64, 3);
        // rank is bounded by d = 64 here, so 40 of 199 survive the m cap
        assert_eq!(compute_eigenspace(&train, 40).unwrap().components(), 40);
    }

    #[test]
    fn basis_is_orthonormal_and_sorted() {
        let space = compute_eigenspace(&random_vectors(10, 64, 4), 40).unwrap();
        for (i, a) in space.basis().iter().enumerate() {
            for (j, b) in space.basis().iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot(a, b) - want).abs() < 1e-8);
            }
        }
        assert!(space.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
        for b in space.basis() {
            let pivot = b.iter().copied().fold(0.0f64, |p, x| if x.abs() > p.abs() { x } else { p });
            assert!(pivot > 0.0);
        }
    }

    #[test]
    fn projection_identities() {
        let space = compute_eigenspace(&random_vectors(8, 16, 5), 40).unwrap();
        let zero = space.project(space.mean()).unwrap();
        assert!(zero.coeffs.iter().all(|c| c.abs() < 1e-12));

        let shifted: Vec<f64> = space
            .mean()
            .iter()
            .zip(&space.basis()[0])
            .map(|(m, b)| m + b)
            .collect();
        let f = space.project(&shifted).unwrap();
        assert!((f.coeffs[0] - 1.0).abs() < 1e-10);
        assert!(f.coeffs[1..].iter().all(|c| c.abs() < 1e-10));

        let back = space
            .reconstruct(&FeatureVector::new(vec![0.0; space.components()]))
            .unwrap();
        assert_eq!(back, space.mean());
    }

    #[test]
    fn reconstruct_is_exact_within_span() {
        let space = compute_eigenspace(&random_vectors(6, 20, 6), 40).unwrap();
        let coeffs: Vec<f64> = (0..space.components()).map(|i| i as f64 * 0.3 - 0.5).collect();
        let x = space.reconstruct(&FeatureVector::new(coeffs.clone())).unwrap();
        let again = space.reconstruct(&space.project(&x).unwrap()).unwrap();
        for (a, b) in x.iter().zip(&again) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn training_reconstruction_beats_raw_norm() {
        let train = random_vectors(12, 30, 7);
        let space = compute_eigenspace(&train, 11).unwrap();
        for x in &train {
            let rec = space.reconstruct(&space.project(x).unwrap()).unwrap();
            let err: Vec<f64> = x.iter().zip(&rec).map(|(a, b)| a - b).collect();
            assert!(norm(&err) < norm(x));
        }
    }

    #[test]
    fn projection_is_affine_linear() {
        let space = compute_eigenspace(&random_vectors(9, 25, 8), 40).unwrap();
        let extra = random_vectors(2, 25, 9);
        let (x, y) = (&extra[0], &extra[1]);
        let (alpha, beta) = (0.7, -1.9);
        let combo: Vec<f64> = (0..25)
            .map(|i| alpha * x[i] + beta * y[i] - (alpha + beta - 1.0) * space.mean()[i])
            .collect();
        let lhs = space.project(&combo).unwrap();
        let (px, py) = (space.project(x).unwrap(), space.project(y).unwrap());
        for i in 0..space.components() {
            let rhs = alpha * px.coeffs[i] + beta * py.coeffs[i];
            assert!((lhs.coeffs[i] - rhs).abs() < 1e-8);
        }
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let space = compute_eigenspace(&random_vectors(5, 7, 10), 3).unwrap();
        let text = space.to_text();
        assert!(text.starts_with("EIGEN1 7 3\n"));
        let back = Eigenspace::from_text(&text, Path::new("mem")).unwrap();
        assert_eq!(back, space);
        assert!(matches!(
            Eigenspace::from_text("EIGEN1 7 3\n1 2", Path::new("mem")),
            Err(Error::MalformedFile { .. })
        ));
    }
}
