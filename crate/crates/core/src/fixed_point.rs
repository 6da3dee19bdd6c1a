//! Fixed-point engine shared by the base-station and pool equivalents.
//!
//! Both are instances of one system over a diagonal resolvent:
//!
//! ```text
//! Lambda_l = sum_m g_lm / (1 + b_m) + d_l
//! b_m      = w * sum_l g_lm / Lambda_l
//! ```
//!
//! with `g_lm = p_m mu_lm`. The pool uses one row per radio head (`w = 1`);
//! the base station collapses its `N` identical rows into a single row of
//! weight `w = N`, so `Gamma = gamma I_N` is stored as one scalar.

use alloc::vec::Vec;

// only needed when std is absent
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::lu_solve;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct FixedPointOptions {
    /// Picard damping `alpha` in `b <- (1 - alpha) b + alpha T(b)`.
    pub damping: f64,
    /// Convergence threshold on `max_m |T(b)_m - b_m| / (1 + b_m)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Polish with Newton steps once Picard has warmed up.
    pub newton: bool,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            damping: 0.5,
            tol: 1e-10,
            max_iter: 10_000,
            newton: true,
        }
    }
}

const NEWTON_WARMUP: usize = 20;
const NEWTON_START_RESIDUAL: f64 = 1e-2;
const NEWTON_HALVINGS: usize = 40;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Resolvent<'a> {
    /// `rows x cols`, row-major.
    pub gains: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub weight: f64,
    /// Per-row additive term `d_l`.
    pub noise: &'a [f64],
    /// Leave-one-out column, treated as absent.
    pub exclude: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Solution {
    /// `b_m`; zero at the excluded column.
    pub aux: Vec<f64>,
    /// `Lambda_l`.
    pub diag: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl<'a> Resolvent<'a> {
    fn active(&self, m: usize) -> bool {
        self.exclude != Some(m)
    }

    pub fn diag(&self, b: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|l| {
                let row = &self.gains[l * self.cols..(l + 1) * self.cols];
                let s: f64 = row
                    .iter()
                    .zip(b)
                    .enumerate()
                    .filter(|(m, _)| self.active(*m))
                    .map(|(_, (g, bm))| g / (1.0 + bm))
                    .sum();
                s + self.noise[l]
            })
            .collect()
    }

    fn map(&self, diag: &[f64]) -> Vec<f64> {
        (0..self.cols)
            .map(|m| {
                if !self.active(m) {
                    return 0.0;
                }
                let s: f64 = (0..self.rows).map(|l| self.gains[l * self.cols + m] / diag[l]).sum();
                self.weight * s
            })
            .collect()
    }

    fn residual(b: &[f64], t: &[f64]) -> f64 {
        b.iter()
            .zip(t)
            .map(|(x, y)| (y - x).abs() / (1.0 + x.abs()))
            .fold(0.0, f64::max)
    }

    /// Newton direction for `F(b) = b - T(b)` restricted to active columns.
    fn newton_direction(&self, b: &[f64], diag: &[f64], t: &[f64]) -> Option<Vec<f64>> {
        let idx: Vec<usize> = (0..self.cols).filter(|&m| self.active(m)).collect();
        let n = idx.len();
        let mut jac = alloc::vec![0.0; n * n];
        let mut rhs: Vec<f64> = idx.iter().map(|&m| t[m] - b[m]).collect();
        let inv_d2: Vec<f64> = diag.iter().map(|d| 1.0 / (d * d)).collect();
        for (i, &m) in idx.iter().enumerate() {
            for (j, &k) in idx.iter().enumerate() {
                let s: f64 = (0..self.rows)
                    .map(|l| self.gains[l * self.cols + m] * self.gains[l * self.cols + k] * inv_d2[l])
                    .sum();
                let dk = 1.0 + b[k];
                jac[i * n + j] = -self.weight * s / (dk * dk);
            }
            jac[i * n + i] += 1.0;
        }
        lu_solve(&mut jac, &mut rhs, n)?;
        let mut dir = alloc::vec![0.0; self.cols];
        for (i, &m) in idx.iter().enumerate() {
            dir[m] = rhs[i];
        }
        Some(dir)
    }

    /// Newton step, halved until the residual drops below `res`. Near-singular
    /// Jacobians (one strong user alone at a row) overshoot by orders of
    /// magnitude, so the full step alone is often useless.
    fn newton_step(&self, b: &[f64], diag: &[f64], t: &[f64], res: f64) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
        let dir = self.newton_direction(b, diag, t)?;
        let mut step = 1.0;
        for _ in 0..NEWTON_HALVINGS {
            let nb: Vec<f64> = b.iter().zip(&dir).map(|(x, d)| x + step * d).collect();
            if nb.iter().all(|v| *v >= 0.0 && v.is_finite()) {
                let nd = self.diag(&nb);
                let nt = self.map(&nd);
                let nr = Self::residual(&nb, &nt);
                if nr < res {
                    return Some((nb, nd, nt, nr));
                }
            }
            step *= 0.5;
        }
        None
    }

    /// Damped Picard from `b = 0`, with optional Newton polishing.
    pub fn solve(&self, opts: &FixedPointOptions) -> Result<Solution> {
        let mut b = alloc::vec![0.0; self.cols];
        let mut diag = self.diag(&b);
        let mut t = self.map(&diag);
        let mut res = Self::residual(&b, &t);
        let mut it = 0;
        while res > opts.tol {
            if it >= opts.max_iter {
                return Err(Error::FixedPoint {
                    iterations: it,
                    residual: res,
                });
            }
            it += 1;
            if opts.newton && (it > NEWTON_WARMUP || res < NEWTON_START_RESIDUAL) {
                if let Some((nb, nd, nt, nr)) = self.newton_step(&b, &diag, &t, res) {
                    b = nb;
                    diag = nd;
                    t = nt;
                    res = nr;
                    continue;
                }
            }
            let a = opts.damping;
            for (x, y) in b.iter_mut().zip(&t) {
                *x = (1.0 - a) * *x + a * y;
            }
            diag = self.diag(&b);
            t = self.map(&diag);
            res = Self::residual(&b, &t);
        }
        // One more Newton step: quadratic convergence takes the error well
        // below the residual threshold at negligible cost.
        if opts.newton && res > 0.0 {
            if let Some((nb, nd, _, nr)) = self.newton_step(&b, &diag, &t, res) {
                b = nb;
                diag = nd;
                res = nr;
            }
        }
        Ok(Solution {
            aux: b,
            diag,
            iterations: it,
            residual: res,
        })
    }
}

impl Solution {
    /// `w log|Lambda| + sum_m (1/(1+b_m) - log(1/(1+b_m))) - M_active`, the
    /// equivalent of `log|sum_m g_m g_m^H + D|` in nats.
    pub fn log_det_equivalent(&self, weight: f64, exclude: Option<usize>) -> f64 {
        let logdet: f64 = self.diag.iter().map(|d| d.ln()).sum::<f64>() * weight;
        let tail: f64 = self
            .aux
            .iter()
            .enumerate()
            .filter(|(m, _)| exclude != Some(*m))
            .map(|(_, b)| 1.0 / (1.0 + b) + (1.0 + b).ln() - 1.0)
            .sum();
        logdet + tail
    }
}
