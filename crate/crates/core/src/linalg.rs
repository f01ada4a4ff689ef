//! Small dense symmetric matrices and a cyclic Jacobi eigensolver.

use std::fmt;

/// Row-major symmetric matrix of order `n`.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    a: Vec<f64>,
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = self.a.chunks(self.n.max(1)).collect();
        f.debug_struct("SymMatrix").field("rows", &rows).finish()
    }
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, a: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, v) in d.iter().enumerate() {
            m.a[i * d.len() + i] = *v;
        }
        m
    }

    /// `v v^T`.
    pub fn outer(v: &[f64]) -> Self {
        let n = v.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.a[i * n + j] = v[i] * v[j];
            }
        }
        m
    }

    /// Builds from a closure evaluated on the upper triangle and mirrored.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m.a[i * n + j] = v;
                m.a[j * n + i] = v;
            }
        }
        m
    }

    /// Symmetrizes a general row-major square matrix as `(A + A^T) / 2`.
    pub fn from_rows(n: usize, rows: &[f64]) -> Self {
        assert_eq!(rows.len(), n * n, "expected {n}x{n} entries");
        Self::from_fn(n, |i, j| 0.5 * (rows[i * n + j] + rows[j * n + i]))
    }

    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
        self.a[j * self.n + i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.a
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { n: self.n, a: self.a.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        Self { n: self.n, a: self.a.iter().zip(&other.a).map(|(x, y)| x + y).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(-1.0))
    }

    /// `self + c I`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut m = self.clone();
        for i in 0..self.n {
            m.a[i * self.n + i] += c;
        }
        m
    }

    /// `self * other`, symmetrized (exact when the two commute).
    pub fn mul_sym(&self, other: &Self) -> Self {
        let n = self.n;
        let mut rows = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                rows[i * n + j] = (0..n).map(|k| self.get(i, k) * other.get(k, j)).sum();
            }
        }
        Self::from_rows(n, &rows)
    }

    /// `D self D` for a diagonal `D = diag(d)`.
    pub fn congruence_diag(&self, d: &[f64]) -> Self {
        Self::from_fn(self.n, |i, j| d[i] * self.get(i, j) * d[j])
    }

    pub fn quad_form(&self, v: &[f64]) -> f64 {
        let n = self.n;
        (0..n).map(|i| v[i] * (0..n).map(|j| self.get(i, j) * v[j]).sum::<f64>()).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.a.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Block matrix `[[a, b], [b, c]]` of order `2n`.
    pub fn block2(a: &Self, b: &Self, c: &Self) -> Self {
        let n = a.n;
        Self::from_fn(2 * n, |i, j| match (i < n, j < n) {
            (true, true) => a.get(i, j),
            (false, false) => c.get(i - n, j - n),
            (true, false) => b.get(i, j - n),
            (false, true) => b.get(j, i - n),
        })
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen().0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues().last().copied().unwrap_or(0.0)
    }

    /// Spectral norm `max |lambda_i|`.
    pub fn norm(&self) -> f64 {
        self.eigenvalues().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Ascending eigenvalues and matching unit eigenvectors (columns of the
    /// returned row-major matrix, i.e. vector `k` is `vecs[i * n + k]`).
    pub fn eigen(&self) -> (Vec<f64>, Vec<f64>) {
        jacobi(self)
    }
}

/// Cyclic Jacobi rotations. A pair is rotated while its off-diagonal entry is
/// not negligible relative to both the matrix scale and its own diagonal
/// entries, which keeps small eigenvalues of graded matrices accurate.
fn jacobi(m: &SymMatrix) -> (Vec<f64>, Vec<f64>) {
    // power-of-two rescaling keeps squared entries in range
    let big = m.a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let unit = 2f64.powi(-(big.log2().ceil() as i32));
    let unit = if unit.is_normal() { unit } else { 1.0 };
    let (vals, vecs) = jacobi_scaled(&m.scaled(unit));
    (vals.into_iter().map(|v| v / unit).collect(), vecs)
}

fn jacobi_scaled(m: &SymMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = m.n;
    let mut a = m.a.clone();
    let mut v = SymMatrix::identity(n).a;
    let scale = m.frobenius();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let stop = 1e-13 * scale;
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off == 0.0 {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let tiny = f64::EPSILON * (app.abs() * aqq.abs()).sqrt();
                if apq == 0.0 || (apq.abs() <= tiny && apq.abs() <= stop) {
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated || off <= f64::MIN_POSITIVE {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let vals = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vecs = vec![0.0; n * n];
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vecs[k * n + new] = v[k * n + old];
        }
    }
    (vals, vecs)
}
