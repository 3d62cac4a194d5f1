//! Dense complex linear-algebra helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Largest absolute entry of `m - m^H`.
pub fn hermitian_asymmetry(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            worst = worst.max(d);
        }
    }
    worst
}

pub fn ensure_hermitian(m: &CMat, tol: f64) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let asymmetry = hermitian_asymmetry(m);
    if asymmetry > tol {
        return Err(Error::NonHermitian { asymmetry });
    }
    Ok(())
}

pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}

pub fn real_to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(c)
}

pub fn determinant(m: &CMat) -> Complex64 {
    m.clone().lu().determinant()
}

/// Inverse of a square matrix, rejecting condition numbers above `max_condition`.
pub fn checked_inverse(m: &CMat, max_condition: f64, what: &'static str) -> Result<CMat> {
    let cond = condition_number(m);
    if !(cond <= max_condition) {
        return Err(Error::Singular(what));
    }
    m.clone().try_inverse().ok_or(Error::Singular(what))
}

pub fn condition_number(m: &CMat) -> f64 {
    let sv = m.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Spectral decomposition `H = V diag(λ) V^H` of a Hermitian matrix with
/// eigenvalues sorted ascending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn new(h: &CMat) -> Result<Self> {
        let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
        ensure_hermitian(h, 1e-12 * scale)?;
        let n = h.nrows();
        // symmetrize exactly so the QR iteration sees a Hermitian input
        let sym = (h + h.adjoint()) * c(0.5);
        let eig = nalgebra::SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = CMat::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Ok(HermitianEigen { values, vectors })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Largest residual `‖Hv - λv‖` over the eigenpairs.
    pub fn residual(&self, h: &CMat) -> f64 {
        (0..self.dim())
            .map(|k| {
                let v = self.vectors.column(k);
                (h * v - v * c(self.values[k])).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Groups of consecutive eigenvalue indices whose neighbouring gaps are below `tol`.
    pub fn clusters(&self, tol: f64) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for k in 1..=self.dim() {
            if k == self.dim() || self.values[k] - self.values[k - 1] >= tol {
                out.push(start..k);
                start = k;
            }
        }
        out
    }

    /// `V diag(f(λ)) V^H`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> Complex64) -> CMat {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let fj = f(self.values[j]);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

/// Dominant eigenvalue of a general complex matrix together with unit right
/// and left eigenvectors (`M x = λ x`, `y^H M = λ y^H`).
pub fn dominant_eigen(m: &CMat) -> (Complex64, CVec, CVec) {
    let (lambda, x) = dominant_right(m);
    let adj = m.adjoint();
    let schur = Schur::new(adj);
    let (q, t) = schur.unpack();
    let target = lambda.conj();
    let k = (0..t.nrows())
        .min_by(|&a, &b| (t[(a, a)] - target).norm().total_cmp(&(t[(b, b)] - target).norm()))
        .unwrap_or(0);
    let y = triangular_eigvec(&q, &t, k);
    (lambda, x, y)
}

fn dominant_right(m: &CMat) -> (Complex64, CVec) {
    let schur = Schur::new(m.clone());
    let (q, t) = schur.unpack();
    let k = (0..t.nrows())
        .max_by(|&a, &b| t[(a, a)].norm().total_cmp(&t[(b, b)].norm()))
        .unwrap_or(0);
    (t[(k, k)], triangular_eigvec(&q, &t, k))
}

pub fn spectral_radius(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    Schur::new(m.clone())
        .eigenvalues()
        .map(|ev| ev.iter().map(|z| z.norm()).fold(0.0, f64::max))
        .unwrap_or(0.0)
}

// Eigenvector for diagonal entry `k` of the Schur factor `t`, mapped back by `q`.
fn triangular_eigvec(q: &CMat, t: &CMat, k: usize) -> CVec {
    let n = t.nrows();
    let lambda = t[(k, k)];
    let tiny = f64::EPSILON * t.iter().map(|z| z.norm()).fold(1e-300, f64::max);
    let mut v = CVec::zeros(n);
    v[k] = c(1.0);
    for j in (0..k).rev() {
        let mut acc = Complex64::new(0.0, 0.0);
        for l in (j + 1)..=k {
            acc += t[(j, l)] * v[l];
        }
        let mut denom = t[(j, j)] - lambda;
        if denom.norm() < tiny {
            denom = c(tiny);
        }
        v[j] = -acc / denom;
    }
    let x = q * v;
    let nrm = x.norm();
    x / c(nrm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_eigen_reconstructs() {
        let h = CMat::from_row_slice(
            3,
            3,
            &[
                c(2.0),
                Complex64::new(0.0, 1.0),
                c(0.0),
                Complex64::new(0.0, -1.0),
                c(1.0),
                c(0.5),
                c(0.0),
                c(0.5),
                c(-1.0),
            ],
        );
        let e = HermitianEigen::new(&h).unwrap();
        assert!(e.residual(&h) < 1e-12);
        let back = e.apply_fn(c);
        assert!((back - &h).norm() < 1e-12);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        assert!(matches!(HermitianEigen::new(&m), Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn dominant_eigen_pairs() {
        let m = CMat::from_row_slice(
            3,
            3,
            &[c(1.0), c(2.0), c(0.0), c(0.0), c(3.0), Complex64::new(0.0, 1.0), c(1.0), c(0.0), c(-0.5)],
        );
        let (l, x, y) = dominant_eigen(&m);
        assert!((&m * &x - &x * l).norm() < 1e-10);
        assert!((y.adjoint() * &m - y.adjoint() * l).norm() < 1e-10);
        assert!((l.norm() - spectral_radius(&m)).abs() < 1e-12);
    }

    #[test]
    fn clusters_group_degenerate_levels() {
        let e = HermitianEigen {
            values: vec![-1.0, 0.0, 1e-12, 2.0],
            vectors: CMat::identity(4, 4),
        };
        assert_eq!(e.clusters(1e-9), vec![0..1, 1..3, 3..4]);
    }
}
