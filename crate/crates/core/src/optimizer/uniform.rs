//! Uniform quantization `Psi = rho sigma^2 I`.

use alloc::vec::Vec;

// only needed when std is absent
#[allow(unused_imports)]
use num_traits::Float;

use super::{eta_for_rate, fronthaul_budget, OptResult, OptTrace, OptimizerOptions, Problem};
use crate::error::{Error, Result};
use crate::scenario::{QuantNoise, Scenario};
use crate::{RxMode, Scheme};

/// Starting point of the bracket expansion and lower end of the joint search.
pub const RHO_MIN: f64 = 1e-10;
/// Upper end of the joint search.
pub const RHO_MAX: f64 = 1.0;

const GRID: usize = 65;
const GOLDEN_TOL: f64 = 1e-10;

/// Smallest `rho` (within `eps` of the budget) whose fronthaul rate fits.
pub(crate) fn uniform_point(p: &Problem<'_>, eta: f64, theta: f64, eps: f64) -> Result<Vec<f64>> {
    if !(theta > 1.0) {
        return Err(Error::Domain {
            what: "theta",
            value: theta,
        });
    }
    if !(eps > 0.0) {
        return Err(Error::Domain {
            what: "eps",
            value: eps,
        });
    }
    fronthaul_budget(p.sc, eta)?;
    let s2 = p.sc.sigma2;
    let l = p.sc.n_rrh;
    let c0 = p.sc.fronthaul_se;
    let gap = |rho: f64| -> Result<f64> {
        let x = alloc::vec![rho * s2; l];
        let fp = p.fixed_point(&x, false)?;
        Ok(eta * p.fh_from(&x, &fp)? - (1.0 - eta) * c0)
    };
    let mut rho = RHO_MIN;
    if gap(rho)? <= 0.0 {
        return Ok(alloc::vec![rho * s2; l]);
    }
    let mut lo = rho;
    for _ in 0..2000 {
        lo = rho;
        rho *= theta;
        if gap(rho)? <= 0.0 {
            break;
        }
    }
    let mut hi = rho;
    let mut g_hi = gap(hi)?;
    if g_hi > 0.0 {
        return Err(Error::Bracket {
            stage: "uniform quantization",
            detail: alloc::format!("fronthaul still over budget at rho = {hi}"),
        });
    }
    while g_hi.abs() >= eps && (hi / lo).ln() > 1e-15 {
        let mid = (lo * hi).sqrt();
        let g = gap(mid)?;
        if g <= 0.0 {
            hi = mid;
            g_hi = g;
        } else {
            lo = mid;
        }
    }
    Ok(alloc::vec![hi * s2; l])
}

/// Bracket expansion by `theta` from `rho = 1e-10`, then bisection on
/// `log rho` until `|eta R_fh - (1 - eta) C0| < eps`. The returned point is
/// always on the feasible side.
pub fn uniform_quantization(
    sc: &Scenario,
    eta: f64,
    scheme: Scheme,
    theta: f64,
    eps: f64,
    opts: &OptimizerOptions,
) -> Result<QuantNoise> {
    let p = Problem::new(sc, scheme, RxMode::Sic, opts)?;
    Ok(p.psi(&uniform_point(&p, eta, theta, eps)?))
}

/// Maximizes `(R_B + R_P(rho)) / (R_fh(rho) + C0)` over
/// `rho in [RHO_MIN, RHO_MAX]`: a log-spaced grid picks the bracket, then
/// golden-section search on `log rho` refines it. `eta` is set to its
/// optimum for the returned `Psi`.
pub fn uniform_joint_search(sc: &Scenario, scheme: Scheme, mode: RxMode, opts: &OptimizerOptions) -> Result<OptResult> {
    let p = Problem::new(sc, scheme, mode, opts)?;
    let c0 = sc.fronthaul_se;
    let s2 = sc.sigma2;
    let ratio = |t: f64| -> Result<f64> {
        let q = p.evaluate(&alloc::vec![t.exp() * s2; sc.n_rrh])?;
        Ok((p.r_bs + q.r_pool) / (q.r_fh + c0))
    };
    let (a, b) = (RHO_MIN.ln(), RHO_MAX.ln());
    let grid: Vec<f64> = (0..GRID).map(|i| a + (b - a) * i as f64 / (GRID - 1) as f64).collect();
    let vals = grid.iter().map(|&t| ratio(t)).collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for i in 1..GRID {
        if vals[i] > vals[best] {
            best = i;
        }
    }
    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(GRID - 1)];
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - invphi * (hi - lo);
    let mut d = lo + invphi * (hi - lo);
    let (mut fc, mut fd) = (ratio(c)?, ratio(d)?);
    while hi - lo > GOLDEN_TOL {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - invphi * (hi - lo);
            fc = ratio(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + invphi * (hi - lo);
            fd = ratio(d)?;
        }
    }
    let (mut t, mut v) = (grid[best], vals[best]);
    let (tg, vg) = if fc >= fd { (c, fc) } else { (d, fd) };
    if vg > v || (vg == v && tg < t) {
        t = tg;
        v = vg;
    }
    let q = p.evaluate(&alloc::vec![t.exp() * s2; sc.n_rrh])?;
    let eta = eta_for_rate(c0, q.r_fh);
    let mut r = p.result(&q, eta, OptTrace::default());
    r.omega = Some(v);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, ScenarioConfig};

    fn sc(c0: f64) -> Scenario {
        generate_scenario(&ScenarioConfig {
            n_bs_antennas: 10,
            n_mue: 2,
            n_rrh: 4,
            n_sue: 4,
            fronthaul_se: c0,
            rng_seed: 5,
            ..ScenarioConfig::default()
        })
        .unwrap()
    }

    fn fh(s: &Scenario, psi: &QuantNoise, scheme: Scheme) -> f64 {
        let fp = crate::detequiv::solve_fp_pool(s, psi, &Default::default(), false).unwrap();
        crate::detequiv::rbar_fh(s, psi, &fp, scheme).unwrap()
    }

    #[test]
    fn huge_budget_returns_start() {
        let s = sc(1e9);
        let psi = uniform_quantization(&s, 0.5, Scheme::Wz, 10.0, 1e-9, &OptimizerOptions::default()).unwrap();
        assert!(psi.psi2.iter().all(|&x| x == RHO_MIN * s.sigma2));
    }

    #[test]
    fn meets_budget_within_eps() {
        let s = sc(30.0);
        for scheme in Scheme::ALL {
            for eta in [0.3, 0.6, 0.9] {
                let psi = uniform_quantization(&s, eta, scheme, 10.0, 1e-9, &OptimizerOptions::default()).unwrap();
                let gap = eta * fh(&s, &psi, scheme) - (1.0 - eta) * 30.0;
                assert!(gap <= 0.0 && gap > -1e-9, "{scheme} {eta}: {gap}");
            }
        }
    }

    #[test]
    fn rejects_bad_theta() {
        let s = sc(30.0);
        assert!(uniform_quantization(&s, 0.5, Scheme::Wz, 1.0, 1e-9, &OptimizerOptions::default()).is_err());
    }

    #[test]
    fn joint_search_beats_endpoints() {
        let s = sc(30.0);
        let opts = OptimizerOptions::default();
        let r = uniform_joint_search(&s, Scheme::Wz, RxMode::Sic, &opts).unwrap();
        let p = Problem::new(&s, Scheme::Wz, RxMode::Sic, &opts).unwrap();
        for rho in [RHO_MIN, RHO_MAX] {
            let q = p.evaluate(&alloc::vec![rho * s.sigma2; 4]).unwrap();
            assert!(r.omega.unwrap() >= (p.r_bs + q.r_pool) / (q.r_fh + 30.0));
        }
        assert!((r.objective - 30.0 * r.omega.unwrap()).abs() < 1e-9 * r.objective);
    }
}
