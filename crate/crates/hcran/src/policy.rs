//! Compression and bandwidth policies compared in the sweeps.
//!
//! The coordinate ascent and Dinkelbach solvers return stationary points.
//! The objective is not concave, so the harness runs them from a fixed set
//! of deterministic starts and keeps the best result. Every policy that is
//! labelled "optimal" or "proposed" goes through the same rule.

use hcran_core::{
    dinkelbach_joint_from, optimize_psi_fixed_eta_from, rate_report, uniform_quantization, OptResult, OptimizerOptions,
    QuantNoise, RateReport, RxMode, Scenario, Scheme,
};
use serde::Serialize;

use crate::error::Result;

/// Dinkelbach outer tolerance on `F(omega)`.
pub const DINKELBACH_EPS1: f64 = 1e-8;
/// Dinkelbach inner tolerance on the surrogate value.
pub const DINKELBACH_EPS2: f64 = 1e-10;
/// Bracket growth factor and constraint tolerance of the uniform search.
pub const UNIFORM_THETA: f64 = 10.0;
pub const UNIFORM_EPS: f64 = 1e-9;
/// Factor by which one head is pushed off the uniform point to form an
/// extra start.
const PERTURB: f64 = 100.0;

/// Objective, split and rates of one policy at one point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolicyPoint {
    /// `eta (R_B + R_P)` in bps/Hz.
    pub objective: f64,
    pub eta: f64,
    pub r_bs: f64,
    pub r_pool: f64,
    pub r_fh: f64,
}

impl From<&OptResult> for PolicyPoint {
    fn from(r: &OptResult) -> Self {
        PolicyPoint {
            objective: r.objective,
            eta: r.eta_star,
            r_bs: r.r_bs,
            r_pool: r.r_pool,
            r_fh: r.r_fh,
        }
    }
}

fn pick(rep: &RateReport, scheme: Scheme, mode: RxMode) -> (f64, f64, f64) {
    let (bs, pool) = match mode {
        RxMode::Sic => (rep.r_bs_sic, rep.r_pool_sic),
        RxMode::Lin => (rep.r_bs_lin, rep.r_pool_lin),
    };
    let fh = match scheme {
        Scheme::P2p => rep.r_fh_p2p,
        Scheme::Wz => rep.r_fh_wz,
    };
    (bs, pool, fh)
}

/// Policy value at a given `Psi` and `eta`.
pub fn evaluate(
    sc: &Scenario,
    psi: &QuantNoise,
    eta: f64,
    scheme: Scheme,
    mode: RxMode,
    opts: &OptimizerOptions,
) -> Result<PolicyPoint> {
    let rep = rate_report(sc, psi, &opts.fixed_point)?;
    let (r_bs, r_pool, r_fh) = pick(&rep, scheme, mode);
    Ok(PolicyPoint {
        objective: eta * (r_bs + r_pool),
        eta,
        r_bs,
        r_pool,
        r_fh,
    })
}

/// Starts for the fixed-split search: `sigma^2 I`, the uniform point, and
/// the uniform point with each head in turn scaled up and down by 100.
pub fn compression_starts(sc: &Scenario, eta: f64, scheme: Scheme, opts: &OptimizerOptions) -> Result<Vec<QuantNoise>> {
    let uni = uniform_quantization(sc, eta, scheme, UNIFORM_THETA, UNIFORM_EPS, opts)?;
    let mut starts = vec![QuantNoise::uniform(sc.n_rrh, sc.sigma2)?, uni.clone()];
    for l in 0..sc.n_rrh {
        for f in [PERTURB, 1.0 / PERTURB] {
            let mut s = uni.clone();
            s.psi2[l] *= f;
            starts.push(s);
        }
    }
    Ok(starts)
}

fn best(results: impl IntoIterator<Item = Result<OptResult>>) -> Result<OptResult> {
    let mut out: Option<OptResult> = None;
    for r in results {
        let r = r?;
        // strict improvement only, so ties keep the earliest start
        if out.as_ref().is_none_or(|b| r.objective > b.objective) {
            out = Some(r);
        }
    }
    Ok(out.expect("at least one start"))
}

/// Best coordinate-ascent result at a fixed split over [`compression_starts`].
pub fn optimal_compression(
    sc: &Scenario,
    eta: f64,
    scheme: Scheme,
    mode: RxMode,
    opts: &OptimizerOptions,
) -> Result<OptResult> {
    let starts = compression_starts(sc, eta, scheme, opts)?;
    best(
        starts
            .iter()
            .map(|s| Ok(optimize_psi_fixed_eta_from(sc, eta, scheme, mode, s, opts)?)),
    )
}

/// `Psi = rho sigma^2 I` with the smallest `rho` that fits the budget.
pub fn uniform_compression(
    sc: &Scenario,
    eta: f64,
    scheme: Scheme,
    mode: RxMode,
    opts: &OptimizerOptions,
) -> Result<PolicyPoint> {
    let psi = uniform_quantization(sc, eta, scheme, UNIFORM_THETA, UNIFORM_EPS, opts)?;
    evaluate(sc, &psi, eta, scheme, mode, opts)
}

/// Fixed `Psi = psi I`, split `eta* = C0 / (R_fh + C0)`.
pub fn bandwidth_only(
    sc: &Scenario,
    psi: f64,
    scheme: Scheme,
    mode: RxMode,
    opts: &OptimizerOptions,
) -> Result<PolicyPoint> {
    let q = QuantNoise::uniform(sc.n_rrh, psi)?;
    let rep = rate_report(sc, &q, &opts.fixed_point)?;
    let (_, _, r_fh) = pick(&rep, scheme, mode);
    let eta = hcran_core::eta_for_rate(sc.fronthaul_se, r_fh);
    evaluate(sc, &q, eta, scheme, mode, opts)
}

/// Best Dinkelbach result over the given starts. Since the returned ratio
/// never falls below the ratio at its start, this dominates every policy
/// whose `Psi` is among the starts once its split is made optimal.
pub fn proposed(
    sc: &Scenario,
    scheme: Scheme,
    mode: RxMode,
    starts: &[QuantNoise],
    opts: &OptimizerOptions,
) -> Result<OptResult> {
    best(starts.iter().map(|s| {
        Ok(dinkelbach_joint_from(
            sc,
            scheme,
            mode,
            s,
            DINKELBACH_EPS1,
            DINKELBACH_EPS2,
            opts,
        )?)
    }))
}

/// Starts for [`proposed`]: `sigma^2 I`, the compression-only optimum at
/// `eta_fixed` and the bandwidth-only noise level.
pub fn proposed_starts(sc: &Scenario, compression: &OptResult, psi_fixed: f64) -> Result<Vec<QuantNoise>> {
    Ok(vec![
        QuantNoise::uniform(sc.n_rrh, sc.sigma2)?,
        compression.psi_star.clone(),
        QuantNoise::uniform(sc.n_rrh, psi_fixed)?,
    ])
}
