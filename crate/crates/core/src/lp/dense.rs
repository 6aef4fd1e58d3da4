//! Dense LU factorization with partial pivoting.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DenseError {
    #[error("matrix is singular to working precision (pivot column {column})")]
    Singular { column: usize },
    #[error("expected a {expected}x{expected} matrix, got {got} entries")]
    Shape { expected: usize, got: usize },
}

/// Row-major square matrix factorized in place as `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

const SINGULAR_TOL: f64 = 1e-13;

impl Lu {
    pub fn factorize(n: usize, mut a: Vec<f64>) -> Result<Self, DenseError> {
        if a.len() != n * n {
            return Err(DenseError::Shape { expected: n, got: a.len() });
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())).max(1.0);
        for k in 0..n {
            let mut piv = k;
            let mut best = a[k * n + k].abs();
            for i in (k + 1)..n {
                let v = a[i * n + k].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best <= SINGULAR_TOL * scale {
                return Err(DenseError::Singular { column: k });
            }
            if piv != k {
                for j in 0..n {
                    a.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
            }
            let pivot = a[k * n + k];
            for i in (k + 1)..n {
                let factor = a[i * n + k] / pivot;
                a[i * n + k] = factor;
                if factor != 0.0 {
                    for j in (k + 1)..n {
                        a[i * n + j] -= factor * a[k * n + j];
                    }
                }
            }
        }
        Ok(Self { n, lu: a, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n, "rhs length must match matrix dimension");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        // Column-oriented substitutions skip zero entries, which keeps
        // mostly-identity factors cheap.
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                for i in (j + 1)..n {
                    x[i] -= self.lu[i * n + j] * xj;
                }
            }
        }
        for j in (0..n).rev() {
            if x[j] != 0.0 {
                x[j] /= self.lu[j * n + j];
                let xj = x[j];
                for i in 0..j {
                    x[i] -= self.lu[i * n + j] * xj;
                }
            }
        }
        x
    }

    /// Explicit inverse, row-major.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        inv
    }
}

/// Solves `A x = b` for a row-major square `A`.
pub fn solve_linear_system(n: usize, a: Vec<f64>, b: &[f64]) -> Result<Vec<f64>, DenseError> {
    Ok(Lu::factorize(n, a)?.solve(b))
}
