//! Small dense linear algebra for Newton steps (n is the ODE dimension).

use crate::scalar::Real;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "matrix must be square");
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn set_column(&mut self, j: usize, col: &[T]) {
        for (i, c) in col.iter().enumerate() {
            self[(i, j)] = *c;
        }
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .fold(T::zero(), |s, x| s + x.abs())
            })
            .fold(T::zero(), T::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn lu(&self) -> Option<Lu<T>> {
        Lu::factor(self)
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    /// `None` when a pivot is exactly zero or non-finite.
    pub fn factor(a: &Matrix<T>) -> Option<Self> {
        let n = a.n;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| {
                lu[(i, k)]
                    .abs()
                    .partial_cmp(&lu[(j, k)].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })?;
            let pivot = lu[(p, k)];
            if pivot == T::zero() || !pivot.is_finite() {
                return None;
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            for i in k + 1..n {
                let m = lu[(i, k)] / lu[(k, k)];
                lu[(i, k)] = m;
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] = lu[(i, j)] - m * u;
                }
            }
        }
        Some(Self { lu, perm })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.n;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] = x[i] - self.lu[(i, j)] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] = x[i] - self.lu[(i, j)] * x[j];
            }
            x[i] = x[i] / self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Matrix<T> {
        let n = self.lu.n;
        let mut inv = Matrix::zeros(n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = T::zero());
            e[j] = T::one();
            inv.set_column(j, &self.solve(&e));
        }
        inv
    }
}
