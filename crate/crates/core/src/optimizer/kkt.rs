//! Stationarity residual of the fixed-`eta` Lagrangian.

use alloc::vec::Vec;

use crate::detequiv::solve_fp_pool;
use crate::error::{Error, Result};
use crate::fixed_point::FixedPointOptions;
use crate::scenario::{QuantNoise, Scenario};
use crate::{RxMode, Scheme};

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KktReport {
    /// `psi_l^2 * dL/dpsi_l^2`, dimensionless.
    pub residual: Vec<f64>,
    /// `A_l = sum_m p_m mu_lm / (1 + b_m)`.
    pub a: Vec<f64>,
    /// `A_l` under Wyner-Ziv, `S_l = sum_m p_m mu_lm` under point-to-point.
    pub a_kappa: Vec<f64>,
    /// `sum_m sum_{m' != m} p_m' mu_lm' / (1 + b~_mm')` for LIN, zero for SIC.
    pub b_lin: Vec<f64>,
}

impl KktReport {
    pub fn max_abs(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Per-element derivative of
/// `eta (R_B + R_P) - lambda1 (eta R_fh - (1 - eta) C0)` with respect to
/// `psi_l^2`, divided by `eta` (which cancels) and scaled by `psi_l^2`.
///
/// SIC:
///
/// ```text
/// 1/(A_l + psi + s2) - 1/(psi + s2) - lambda1 [1/(A^k_l + psi + s2) - 1/psi]
/// ```
///
/// LIN uses the exact pool-rate derivative
/// `M / Lambda_ll - sum_m 1 / Lambda~_m,ll` in place of the first two terms.
pub fn kkt_residual(
    sc: &Scenario,
    psi: &QuantNoise,
    eta: f64,
    lambda1: f64,
    scheme: Scheme,
    mode: RxMode,
    opts: &FixedPointOptions,
) -> Result<KktReport> {
    psi.check_len(sc.n_rrh)?;
    psi.check_positive()?;
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Domain {
            what: "eta",
            value: eta,
        });
    }
    if !(lambda1 >= 0.0) || !lambda1.is_finite() {
        return Err(Error::Domain {
            what: "lambda1",
            value: lambda1,
        });
    }
    let s2 = sc.sigma2;
    let x = &psi.psi2;
    let fp = solve_fp_pool(sc, psi, opts, mode == RxMode::Lin)?;
    let a: Vec<f64> = fp.lambda_diag.iter().zip(x).map(|(lam, x)| lam - x - s2).collect();
    let a_kappa = match scheme {
        Scheme::Wz => a.clone(),
        Scheme::P2p => sc.rx_signal_power(),
    };
    let mut b_lin = alloc::vec![0.0; sc.n_rrh];
    let mut inv_loo = alloc::vec![0.0; sc.n_rrh];
    if let Some(loo) = &fp.leave_one_out {
        for t in loo {
            for l in 0..sc.n_rrh {
                b_lin[l] += t.diag[l] - x[l] - s2;
                inv_loo[l] += 1.0 / t.diag[l];
            }
        }
    }
    let m = sc.n_users() as f64;
    let residual = (0..sc.n_rrh)
        .map(|l| {
            let pool = match mode {
                RxMode::Sic => 1.0 / (a[l] + x[l] + s2) - 1.0 / (x[l] + s2),
                RxMode::Lin => m / fp.lambda_diag[l] - inv_loo[l],
            };
            let fh = 1.0 / (a_kappa[l] + x[l] + s2) - 1.0 / x[l];
            x[l] * (pool - lambda1 * fh)
        })
        .collect();
    Ok(KktReport {
        residual,
        a,
        a_kappa,
        b_lin,
    })
}
