//! Deterministic equivalents of the ergodic sum rates and fronthaul rates.
//!
//! All rates are in bps/Hz and are the pre-bandwidth-split values; the
//! caller multiplies by `eta` where needed. Log-determinant quantities are
//! kept in nats internally and divided by `ln 2` on the way out.

use alloc::vec::Vec;
use core::f64::consts::LN_2;

// only needed when std is absent
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::Result;
use crate::fixed_point::{FixedPointOptions, Resolvent, Solution};
use crate::scenario::{QuantNoise, Scenario};
use crate::{RxMode, Scheme};

/// Fixed point with one user removed. `aux` is zero at the removed index.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LeaveOneOut {
    pub aux: Vec<f64>,
    pub diag: Vec<f64>,
}

/// Base-station fixed point: `e_k` and the scalar `gamma` of `Gamma = gamma I_N`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FixedPointBS {
    pub e: Vec<f64>,
    pub gamma: f64,
    pub n_antennas: usize,
    pub iterations: usize,
    pub residual: f64,
    /// `(e~_k, gamma~_k)` per excluded macro user.
    pub leave_one_out: Option<Vec<LeaveOneOut>>,
}

/// Pool fixed point: `b_m` and the diagonal of `Lambda`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FixedPointPool {
    pub b: Vec<f64>,
    pub lambda_diag: Vec<f64>,
    /// `psi_l^2 + sigma^2` the point was solved at.
    pub noise: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// `(b~_m, Lambda~_m)` per excluded user.
    pub leave_one_out: Option<Vec<LeaveOneOut>>,
}

/// A sum rate, with the per-user split for linear reception (empty for SIC).
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Rates {
    pub sum: f64,
    pub per_user: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RateReport {
    pub r_bs_sic: f64,
    pub r_bs_lin: f64,
    pub r_pool_sic: f64,
    pub r_pool_lin: f64,
    pub r_fh_p2p: f64,
    pub r_fh_wz: f64,
    pub bs_lin_per_user: Vec<f64>,
    pub pool_lin_per_user: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GradTarget {
    PoolSic,
    PoolLin,
    FhP2p,
    FhWz,
}

impl GradTarget {
    pub fn pool(mode: RxMode) -> GradTarget {
        match mode {
            RxMode::Sic => GradTarget::PoolSic,
            RxMode::Lin => GradTarget::PoolLin,
        }
    }

    pub fn fronthaul(scheme: Scheme) -> GradTarget {
        match scheme {
            Scheme::P2p => GradTarget::FhP2p,
            Scheme::Wz => GradTarget::FhWz,
        }
    }
}

fn bs_resolvent<'a>(gains: &'a [f64], noise: &'a [f64], n: usize, exclude: Option<usize>) -> Resolvent<'a> {
    Resolvent {
        gains,
        rows: 1,
        cols: gains.len(),
        weight: n as f64,
        noise,
        exclude,
    }
}

fn pool_resolvent<'a>(sc: &Scenario, gains: &'a [f64], noise: &'a [f64], exclude: Option<usize>) -> Resolvent<'a> {
    Resolvent {
        gains,
        rows: sc.n_rrh,
        cols: sc.n_users(),
        weight: 1.0,
        noise,
        exclude,
    }
}

fn loo_all(r: Resolvent<'_>, opts: &FixedPointOptions) -> Result<Vec<LeaveOneOut>> {
    (0..r.cols)
        .map(|k| {
            let s = Resolvent { exclude: Some(k), ..r }.solve(opts)?;
            Ok(LeaveOneOut {
                aux: s.aux,
                diag: s.diag,
            })
        })
        .collect()
}

/// Solves `gamma = sum_k p_k nu_k / (1 + e_k) + sigma^2`,
/// `e_k = p_k nu_k N / gamma`. Leave-one-out points are added when asked.
pub fn solve_fp_bs(sc: &Scenario, opts: &FixedPointOptions, leave_one_out: bool) -> Result<FixedPointBS> {
    let gains = sc.bs_gains();
    let noise = [sc.sigma2];
    let r = bs_resolvent(&gains, &noise, sc.n_bs_antennas, None);
    let s = r.solve(opts)?;
    let loo = if leave_one_out { Some(loo_all(r, opts)?) } else { None };
    Ok(FixedPointBS {
        e: s.aux,
        gamma: s.diag[0],
        n_antennas: sc.n_bs_antennas,
        iterations: s.iterations,
        residual: s.residual,
        leave_one_out: loo,
    })
}

/// Solves `Lambda = sum_m p_m U_m / (1 + b_m) + Psi + sigma^2 I`,
/// `b_m = p_m tr(U_m Lambda^-1)`.
pub fn solve_fp_pool(
    sc: &Scenario,
    psi: &QuantNoise,
    opts: &FixedPointOptions,
    leave_one_out: bool,
) -> Result<FixedPointPool> {
    psi.check_len(sc.n_rrh)?;
    let gains = sc.pool_gains();
    let noise: Vec<f64> = psi.psi2.iter().map(|x| x + sc.sigma2).collect();
    let r = pool_resolvent(sc, &gains, &noise, None);
    let s = r.solve(opts)?;
    let loo = if leave_one_out { Some(loo_all(r, opts)?) } else { None };
    Ok(FixedPointPool {
        b: s.aux,
        lambda_diag: s.diag,
        iterations: s.iterations,
        residual: s.residual,
        noise,
        leave_one_out: loo,
    })
}

fn ld(aux: &[f64], diag: &[f64], weight: f64, exclude: Option<usize>) -> f64 {
    Solution {
        aux: aux.to_vec(),
        diag: diag.to_vec(),
        iterations: 0,
        residual: 0.0,
    }
    .log_det_equivalent(weight, exclude)
}

impl FixedPointBS {
    /// `Delta_0` in nats.
    pub fn delta0(&self) -> f64 {
        ld(&self.e, &[self.gamma], self.n_antennas as f64, None)
    }

    /// `Delta_k`, the equivalent with macro user `k` removed.
    pub fn delta_without(&self, k: usize) -> Option<f64> {
        let l = &self.leave_one_out.as_ref()?[k];
        Some(ld(&l.aux, &l.diag, self.n_antennas as f64, Some(k)))
    }
}

impl FixedPointPool {
    /// `nabla_0` in nats.
    pub fn nabla0(&self) -> f64 {
        ld(&self.b, &self.lambda_diag, 1.0, None)
    }

    pub fn nabla_without(&self, m: usize) -> Option<f64> {
        let l = &self.leave_one_out.as_ref()?[m];
        Some(ld(&l.aux, &l.diag, 1.0, Some(m)))
    }
}

/// Evaluates the `nabla` functional at an arbitrary `b`, not necessarily the
/// fixed point. The fixed point is a stationary point of this map.
pub fn pool_log_det_at(sc: &Scenario, psi: &QuantNoise, b: &[f64]) -> Result<f64> {
    psi.check_len(sc.n_rrh)?;
    let gains = sc.pool_gains();
    let noise: Vec<f64> = psi.psi2.iter().map(|x| x + sc.sigma2).collect();
    let diag = pool_resolvent(sc, &gains, &noise, None).diag(b);
    Ok(ld(b, &diag, 1.0, None))
}

fn lin_rates(total: f64, without: impl Iterator<Item = Option<f64>>) -> Option<Rates> {
    let per_user: Vec<f64> = without.map(|d| d.map(|d| (total - d) / LN_2)).collect::<Option<_>>()?;
    Some(Rates {
        sum: per_user.iter().sum(),
        per_user,
    })
}

/// Base-station rate. LIN needs leave-one-out points and solves them on the
/// fly when `fp` lacks them.
pub fn rbar_bs(fp: &FixedPointBS, sc: &Scenario, mode: RxMode, opts: &FixedPointOptions) -> Result<Rates> {
    let d0 = fp.delta0();
    match mode {
        RxMode::Sic => Ok(Rates {
            sum: (d0 - fp.n_antennas as f64 * sc.sigma2.ln()) / LN_2,
            per_user: Vec::new(),
        }),
        RxMode::Lin => {
            if let Some(r) = lin_rates(d0, (0..fp.e.len()).map(|k| fp.delta_without(k))) {
                return Ok(r);
            }
            let full = solve_fp_bs(sc, opts, true)?;
            Ok(lin_rates(d0, (0..fp.e.len()).map(|k| full.delta_without(k))).expect("leave-one-out present"))
        }
    }
}

/// Pool rate at the `Psi` the fixed point was solved for.
pub fn rbar_pool(
    fp: &FixedPointPool,
    sc: &Scenario,
    psi: &QuantNoise,
    mode: RxMode,
    opts: &FixedPointOptions,
) -> Result<Rates> {
    let n0 = fp.nabla0();
    match mode {
        RxMode::Sic => {
            let base: f64 = fp.noise.iter().map(|d| d.ln()).sum();
            Ok(Rates {
                sum: (n0 - base) / LN_2,
                per_user: Vec::new(),
            })
        }
        RxMode::Lin => {
            if let Some(r) = lin_rates(n0, (0..fp.b.len()).map(|m| fp.nabla_without(m))) {
                return Ok(r);
            }
            let full = solve_fp_pool(sc, psi, opts, true)?;
            Ok(lin_rates(n0, (0..fp.b.len()).map(|m| full.nabla_without(m))).expect("leave-one-out present"))
        }
    }
}

/// Fronthaul rate. Both schemes diverge at `psi_l^2 = 0`.
pub fn rbar_fh(sc: &Scenario, psi: &QuantNoise, fp: &FixedPointPool, scheme: Scheme) -> Result<f64> {
    psi.check_len(sc.n_rrh)?;
    psi.check_positive()?;
    Ok(match scheme {
        Scheme::P2p => sc
            .rx_signal_power()
            .iter()
            .zip(&psi.psi2)
            .map(|(s, x)| ((s + sc.sigma2 + x) / x).log2())
            .sum(),
        Scheme::Wz => {
            let base: f64 = psi.psi2.iter().map(|x| x.ln()).sum();
            (fp.nabla0() - base) / LN_2
        }
    })
}

/// Gradient with respect to `psi_l^2`, in bps/Hz per W.
///
/// By the envelope theorem the fixed point can be held constant, so every
/// component is a difference of resolvent inverses.
pub fn grad_psi(sc: &Scenario, psi: &QuantNoise, fp: &FixedPointPool, target: GradTarget) -> Result<Vec<f64>> {
    psi.check_len(sc.n_rrh)?;
    let s2 = sc.sigma2;
    let lam = &fp.lambda_diag;
    let x = &psi.psi2;
    let g: Vec<f64> = match target {
        GradTarget::PoolSic => (0..sc.n_rrh).map(|l| 1.0 / lam[l] - 1.0 / (x[l] + s2)).collect(),
        GradTarget::FhWz => {
            psi.check_positive()?;
            (0..sc.n_rrh).map(|l| 1.0 / lam[l] - 1.0 / x[l]).collect()
        }
        GradTarget::FhP2p => {
            psi.check_positive()?;
            let s = sc.rx_signal_power();
            (0..sc.n_rrh).map(|l| 1.0 / (s[l] + s2 + x[l]) - 1.0 / x[l]).collect()
        }
        GradTarget::PoolLin => {
            let owned;
            let loo = match &fp.leave_one_out {
                Some(v) => v,
                None => {
                    owned = solve_fp_pool(sc, psi, &FixedPointOptions::default(), true)?
                        .leave_one_out
                        .expect("leave-one-out present");
                    &owned
                }
            };
            let m = fp.b.len() as f64;
            (0..sc.n_rrh)
                .map(|l| m / lam[l] - loo.iter().map(|t| 1.0 / t.diag[l]).sum::<f64>())
                .collect()
        }
    };
    Ok(g.into_iter().map(|v| v / LN_2).collect())
}

/// All six deterministic-equivalent rates at one `Psi`.
pub fn rate_report(sc: &Scenario, psi: &QuantNoise, opts: &FixedPointOptions) -> Result<RateReport> {
    let bs = solve_fp_bs(sc, opts, true)?;
    let pool = solve_fp_pool(sc, psi, opts, true)?;
    let bs_sic = rbar_bs(&bs, sc, RxMode::Sic, opts)?;
    let bs_lin = rbar_bs(&bs, sc, RxMode::Lin, opts)?;
    let pool_sic = rbar_pool(&pool, sc, psi, RxMode::Sic, opts)?;
    let pool_lin = rbar_pool(&pool, sc, psi, RxMode::Lin, opts)?;
    Ok(RateReport {
        r_bs_sic: bs_sic.sum,
        r_bs_lin: bs_lin.sum,
        r_pool_sic: pool_sic.sum,
        r_pool_lin: pool_lin.sum,
        r_fh_p2p: rbar_fh(sc, psi, &pool, Scheme::P2p)?,
        r_fh_wz: rbar_fh(sc, psi, &pool, Scheme::Wz)?,
        bs_lin_per_user: bs_lin.per_user,
        pool_lin_per_user: pool_lin.per_user,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, ScenarioConfig};
    use approx::assert_relative_eq;

    fn opts() -> FixedPointOptions {
        FixedPointOptions::default()
    }

    fn unit(n_rrh: usize) -> Scenario {
        Scenario::from_parts(
            1,
            alloc::vec![1.0],
            n_rrh,
            0,
            alloc::vec![1.0; n_rrh],
            alloc::vec![1.0],
            1.0,
            1.0,
        )
        .unwrap()
    }

    fn small(seed: u64) -> Scenario {
        generate_scenario(&ScenarioConfig {
            n_bs_antennas: 6,
            n_mue: 3,
            n_rrh: 8,
            n_sue: 4,
            rng_seed: seed,
            ..ScenarioConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn bs_golden_ratio() {
        let fp = solve_fp_bs(&unit(1), &opts(), false).unwrap();
        assert_relative_eq!(fp.e[0], (5f64.sqrt() - 1.0) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn pool_golden_ratio() {
        let sc = unit(1);
        let fp = solve_fp_pool(&sc, &QuantNoise::uniform(1, 0.0).unwrap(), &opts(), false).unwrap();
        assert_relative_eq!(fp.b[0], (5f64.sqrt() - 1.0) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_power_gives_noise_only() {
        let sc = Scenario::from_parts(
            4,
            alloc::vec![0.0; 2],
            3,
            1,
            alloc::vec![0.5; 9],
            alloc::vec![0.0; 3],
            2.0,
            1.0,
        )
        .unwrap();
        let psi = QuantNoise::new(alloc::vec![0.1, 0.2, 0.3]).unwrap();
        let bs = solve_fp_bs(&sc, &opts(), true).unwrap();
        assert!(bs.e.iter().all(|&e| e == 0.0));
        assert_eq!(bs.gamma, 2.0);
        let pool = solve_fp_pool(&sc, &psi, &opts(), true).unwrap();
        for l in 0..3 {
            assert_relative_eq!(pool.lambda_diag[l], psi.psi2[l] + 2.0);
        }
        for mode in RxMode::ALL {
            assert_relative_eq!(rbar_bs(&bs, &sc, mode, &opts()).unwrap().sum, 0.0, epsilon = 1e-14);
            assert_relative_eq!(
                rbar_pool(&pool, &sc, &psi, mode, &opts()).unwrap().sum,
                0.0,
                epsilon = 1e-14
            );
        }
        let g = grad_psi(&sc, &psi, &pool, GradTarget::PoolSic).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn single_user_sic_equals_lin() {
        let sc = Scenario::from_parts(
            3,
            alloc::vec![0.7],
            2,
            0,
            alloc::vec![0.4, 1.3],
            alloc::vec![2.0],
            0.5,
            1.0,
        )
        .unwrap();
        let bs = solve_fp_bs(&sc, &opts(), true).unwrap();
        let sic = rbar_bs(&bs, &sc, RxMode::Sic, &opts()).unwrap().sum;
        let lin = rbar_bs(&bs, &sc, RxMode::Lin, &opts()).unwrap().sum;
        assert_relative_eq!(sic, lin, max_relative = 1e-12);
    }

    #[test]
    fn unit_p2p_rate_is_log2_3() {
        let sc = unit(1);
        let psi = QuantNoise::uniform(1, 1.0).unwrap();
        let fp = solve_fp_pool(&sc, &psi, &opts(), false).unwrap();
        assert_relative_eq!(
            rbar_fh(&sc, &psi, &fp, Scheme::P2p).unwrap(),
            3f64.log2(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn fronthaul_rejects_zero_psi() {
        let sc = unit(2);
        let psi = QuantNoise::new(alloc::vec![1.0, 0.0]).unwrap();
        let fp = solve_fp_pool(&sc, &psi, &opts(), false).unwrap();
        for scheme in Scheme::ALL {
            assert!(rbar_fh(&sc, &psi, &fp, scheme).is_err());
            assert!(grad_psi(&sc, &psi, &fp, GradTarget::fronthaul(scheme)).is_err());
        }
    }

    #[test]
    fn fronthaul_vanishes_for_huge_psi() {
        let sc = small(3);
        let psi = QuantNoise::uniform(sc.n_rrh, 1e12 * sc.sigma2).unwrap();
        let fp = solve_fp_pool(&sc, &psi, &opts(), false).unwrap();
        for scheme in Scheme::ALL {
            assert!(rbar_fh(&sc, &psi, &fp, scheme).unwrap() < 1e-6);
        }
    }

    #[test]
    fn report_orderings() {
        let sc = small(11);
        let psi = QuantNoise::uniform(sc.n_rrh, 0.3 * sc.sigma2).unwrap();
        let r = rate_report(&sc, &psi, &opts()).unwrap();
        assert!(r.r_bs_sic >= r.r_bs_lin);
        assert!(r.r_pool_sic >= r.r_pool_lin);
        assert!(r.r_fh_wz <= r.r_fh_p2p);
        assert_relative_eq!(r.pool_lin_per_user.iter().sum::<f64>(), r.r_pool_lin, epsilon = 1e-12);
        assert_eq!(r.bs_lin_per_user.len(), 3);
        assert_eq!(r.pool_lin_per_user.len(), 7);
    }

    #[test]
    fn envelope_is_second_order() {
        let sc = small(5);
        let psi = QuantNoise::uniform(sc.n_rrh, sc.sigma2).unwrap();
        let fp = solve_fp_pool(&sc, &psi, &opts(), false).unwrap();
        let base = pool_log_det_at(&sc, &psi, &fp.b).unwrap();
        assert_relative_eq!(base, fp.nabla0(), max_relative = 1e-14);
        let shift = |d: f64| {
            let b: Vec<f64> = fp.b.iter().map(|x| x + d).collect();
            (pool_log_det_at(&sc, &psi, &b).unwrap() - base).abs()
        };
        // Halving the perturbation should quarter the change.
        let (a, c) = (shift(1e-3), shift(5e-4));
        assert!(a < 1e-4);
        assert!(c < 0.3 * a, "{a} {c}");
    }
}
