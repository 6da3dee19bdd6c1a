//! Minorizer of the pool rate built from `-log|X| >= log|W| - tr(W X) + n`.
//!
//! SIC: `R_P = nabla_0 - log|Psi + sigma^2 I|` and only the second term is
//! bounded. LIN: `R_P = sum_m (nabla_0 - nabla_m)`; each `nabla_m` is first
//! bounded above by freezing its leave-one-out fixed point (it is the
//! minimum over that point), then its log-determinant is linearized. In
//! both cases the surrogate reads
//!
//! ```text
//! S(x) = terms * nabla_0(x) + offset - sum_l weight_l x_l     [nats]
//! ```
//!
//! and touches `R_P` at the point it was built.

use alloc::vec::Vec;

// only needed when std is absent
#[allow(unused_imports)]
use num_traits::Float;

use crate::detequiv::{solve_fp_pool, FixedPointPool};
use crate::error::Result;
use crate::fixed_point::FixedPointOptions;
use crate::scenario::{QuantNoise, Scenario};
use crate::RxMode;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SurrogateState {
    pub mode: RxMode,
    /// SIC: one diagonal. LIN: one diagonal per user.
    pub omega: Vec<Vec<f64>>,
    /// `sum` of the `omega` diagonals, the linear coefficient on `psi^2`.
    pub weight: Vec<f64>,
    /// Multiplicity of `nabla_0`: 1 for SIC, `M` for LIN.
    pub terms: f64,
    pub offset: f64,
}

impl SurrogateState {
    /// Builds the surrogate touching the pool rate at `psi`.
    pub fn at(sc: &Scenario, psi: &QuantNoise, mode: RxMode, opts: &FixedPointOptions) -> Result<SurrogateState> {
        let fp = solve_fp_pool(sc, psi, opts, mode == RxMode::Lin)?;
        SurrogateState::from_fixed_point(sc, psi, &fp, mode, opts)
    }

    /// Same as [`SurrogateState::at`] with the fixed point already solved.
    pub fn from_fixed_point(
        sc: &Scenario,
        psi: &QuantNoise,
        fp: &FixedPointPool,
        mode: RxMode,
        opts: &FixedPointOptions,
    ) -> Result<SurrogateState> {
        psi.check_len(sc.n_rrh)?;
        let l = sc.n_rrh as f64;
        let x = &psi.psi2;
        match mode {
            RxMode::Sic => {
                let omega: Vec<f64> = x.iter().map(|v| 1.0 / (v + sc.sigma2)).collect();
                let offset = omega.iter().map(|w| w.ln() - sc.sigma2 * w).sum::<f64>() + l;
                Ok(SurrogateState {
                    mode,
                    weight: omega.clone(),
                    omega: alloc::vec![omega],
                    terms: 1.0,
                    offset,
                })
            }
            RxMode::Lin => {
                let owned;
                let loo = match &fp.leave_one_out {
                    Some(v) => v,
                    None => {
                        owned = solve_fp_pool(sc, psi, opts, true)?
                            .leave_one_out
                            .expect("leave-one-out present");
                        &owned
                    }
                };
                let m = loo.len();
                let mut weight = alloc::vec![0.0; sc.n_rrh];
                let mut omega = Vec::with_capacity(m);
                let mut offset = 0.0;
                for (k, t) in loo.iter().enumerate() {
                    let w: Vec<f64> = t.diag.iter().map(|d| 1.0 / d).collect();
                    let tail: f64 = t
                        .aux
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != k)
                        .map(|(_, b)| 1.0 / (1.0 + b) + (1.0 + b).ln())
                        .sum();
                    // tr(W (A~ + sigma^2 I)) with A~ + sigma^2 = Lambda~ - psi.
                    let tr: f64 = w.iter().zip(&t.diag).zip(x).map(|((w, d), x)| w * (d - x)).sum();
                    offset += w.iter().map(|v| v.ln()).sum::<f64>() - tr + l - tail + (m as f64 - 1.0);
                    for (acc, v) in weight.iter_mut().zip(&w) {
                        *acc += v;
                    }
                    omega.push(w);
                }
                Ok(SurrogateState {
                    mode,
                    omega,
                    weight,
                    terms: m as f64,
                    offset,
                })
            }
        }
    }

    /// Surrogate value in nats given `nabla_0` solved at `x`.
    pub fn value_nats(&self, nabla0: f64, x: &[f64]) -> f64 {
        self.terms * nabla0 + self.offset - self.weight.iter().zip(x).map(|(w, x)| w * x).sum::<f64>()
    }

    /// Surrogate value in bps/Hz.
    pub fn value(&self, fp: &FixedPointPool, psi: &QuantNoise) -> f64 {
        self.value_nats(fp.nabla0(), &psi.psi2) / core::f64::consts::LN_2
    }

    /// Gradient in nats per W with `fp` solved at `x` (envelope theorem).
    pub fn gradient_nats(&self, fp: &FixedPointPool) -> Vec<f64> {
        fp.lambda_diag
            .iter()
            .zip(&self.weight)
            .map(|(lam, w)| self.terms / lam - w)
            .collect()
    }
}
