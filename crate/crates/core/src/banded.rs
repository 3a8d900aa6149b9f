//! Symmetric positive definite band matrices and their Cholesky factorization.
//!
//! Newton systems of the discrete p-Laplacian are tridiagonal on intervals and
//! balls and have half-bandwidth `nx - 2` on rectangles.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub(crate) struct BandSpd {
    n: usize,
    bw: usize,
    /// `data[i * (bw + 1) + k]` holds `A[i][i - k]`.
    data: Vec<f64>,
}

impl BandSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandSpd {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    /// Adds `v` to `A[i][j]` (and implicitly `A[j][i]`). Only call with
    /// `i >= j`, or with `i == j` for the diagonal.
    #[inline]
    pub fn add_lower(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i >= j && i - j <= self.bw);
        self.data[i * (self.bw + 1) + (i - j)] += v;
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.data[i * (self.bw + 1)]
    }

    pub fn add_diag(&mut self, shift: f64) {
        for i in 0..self.n {
            self.data[i * (self.bw + 1)] += shift;
        }
    }

    /// In-place Cholesky `A = L Lᵀ`, then solves `A x = b` overwriting `b`.
    pub fn solve_in_place(mut self, b: &mut [f64]) -> Result<()> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let l = &mut self.data;
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let kmin = j0.max(j.saturating_sub(bw));
                let mut sum = l[i * w + (i - j)];
                for k in kmin..j {
                    sum -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                if j == i {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return Err(Error::Invariant(format!(
                            "band matrix not positive definite at row {i} (pivot {sum:e})"
                        )));
                    }
                    l[i * w] = sum.sqrt();
                } else {
                    l[i * w + (i - j)] = sum / l[j * w];
                }
            }
        }
        // L y = b
        for i in 0..n {
            let mut sum = b[i];
            for k in i.saturating_sub(bw)..i {
                sum -= l[i * w + (i - k)] * b[k];
            }
            b[i] = sum / l[i * w];
        }
        // Lᵀ x = y
        for i in (0..n).rev() {
            let mut sum = b[i];
            for k in i + 1..n.min(i + bw + 1) {
                sum -= l[k * w + (k - i)] * b[k];
            }
            b[i] = sum / l[i * w];
        }
        Ok(())
    }
}
