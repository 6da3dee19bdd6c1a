//! Small dense kernels: real LU solves for Newton steps and complex
//! Cholesky log-determinants for the Monte Carlo oracle.

use alloc::vec::Vec;

use num_complex::Complex64;
// only needed when std is absent
#[allow(unused_imports)]
use num_traits::Float;

/// Solves `a x = b` in place (`a` is `n x n` row-major, overwritten).
/// Returns `None` when a pivot vanishes.
pub fn lu_solve(a: &mut [f64], b: &mut [f64], n: usize) -> Option<()> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    for col in 0..n {
        let (piv, max) =
            (col..n)
                .map(|r| (r, a[r * n + col].abs()))
                .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if !(max > 0.0) || !max.is_finite() {
            return None;
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f != 0.0 {
                for c in col..n {
                    a[r * n + c] -= f * a[col * n + c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r * n + c] * b[c]).sum();
        b[r] = (b[r] - s) / a[r * n + r];
    }
    Some(())
}

/// Hermitian matrix stored row-major, `n x n`.
#[derive(Clone, Debug)]
pub struct HermitianMatrix {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl HermitianMatrix {
    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut data = alloc::vec![Complex64::new(0.0, 0.0); n * n];
        for (i, d) in diag.iter().enumerate() {
            data[i * n + i] = Complex64::new(*d, 0.0);
        }
        HermitianMatrix { n, data }
    }

    /// `self += w * v v^H`
    pub fn rank_one_update(&mut self, w: f64, v: &[Complex64]) {
        let n = self.n;
        for i in 0..n {
            let vi = v[i] * w;
            for j in 0..n {
                self.data[i * n + j] += vi * v[j].conj();
            }
        }
    }

    pub fn add_diag(&mut self, x: f64) {
        for i in 0..self.n {
            self.data[i * self.n + i] += x;
        }
    }

    /// Natural log-determinant through a Cholesky factorization, `None`
    /// when the matrix is not numerically positive definite.
    pub fn log_det(&self) -> Option<f64> {
        let n = self.n;
        let mut l = self.data.clone();
        let mut acc = 0.0;
        for j in 0..n {
            let mut d = l[j * n + j].re;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            l[j * n + j] = Complex64::new(djj, 0.0);
            acc += d.ln();
            for i in j + 1..n {
                let mut s = l[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / djj;
            }
        }
        Some(acc)
    }
}
