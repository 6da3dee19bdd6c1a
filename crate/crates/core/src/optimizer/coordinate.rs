//! Surrogate maximization over `Psi` and the fixed-`eta` coordinate ascent.

use alloc::vec::Vec;

// only needed when std is absent
#[allow(unused_imports)]
use num_traits::Float;

use super::kkt::kkt_residual;
use super::surrogate::SurrogateState;
use super::uniform::uniform_point;
use super::{
    fronthaul_budget, safeguard, Extrapolator, InnerEngine, OptResult, OptTrace, OptimizerOptions, Point, Problem,
};
use crate::error::{Error, Result};
use crate::scenario::{QuantNoise, Scenario};
use crate::{RxMode, Scheme};

/// Relative width at which per-element root bisection stops.
const ROOT_TOL: f64 = 1e-14;
/// Stationarity passes stop when no `log psi^2` moves by more than this.
const PASS_TOL: f64 = 1e-12;
/// Inner ascent also stops after `STALL_STEPS` successive steps that each
/// gain less than this, relative.
const STALL_TOL: f64 = 1e-12;
const STALL_STEPS: usize = 20;
/// Coordinate ascent also waits for the iterate to settle to this in `log psi^2`.
const ROUND_STEP_TOL: f64 = 1e-9;
/// ... or for the scaled stationarity residual to drop below this.
const ROUND_KKT_TOL: f64 = 1e-7;
/// Largest scaled gradient move of one `log psi^2` per projected step.
const MAX_LOG_STEP: f64 = 8.0;
const UNIFORM_THETA: f64 = 10.0;
const UNIFORM_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InnerStep {
    pub psi: QuantNoise,
    /// Fronthaul multiplier; zero when the constraint is slack.
    pub lambda1: f64,
}

/// Penalized surrogate `S(x) - mu * R_fh(x)` in nats and its gradient.
fn penalized(p: &Problem<'_>, s: &SurrogateState, mu: f64, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    let fp = p.fixed_point(x, false)?;
    let (fh, dfh) = p.fh_nats_grad(x, &fp);
    let v = s.value_nats(fp.nabla0(), x) - mu * fh;
    let g = s.gradient_nats(&fp).iter().zip(&dfh).map(|(a, b)| a - mu * b).collect();
    Ok((v, g))
}

/// Root of a strictly decreasing `h` on `[floor, ceil]`, clamped to the
/// ends when `h` keeps one sign. Bisects in `log x` starting around `guess`.
fn decreasing_root<H: Fn(f64) -> f64>(h: H, floor: f64, ceil: f64, guess: f64) -> f64 {
    if h(floor) <= 0.0 {
        return floor;
    }
    if h(ceil) >= 0.0 {
        return ceil;
    }
    let g = guess.clamp(floor, ceil);
    let (mut lo, mut hi) = if h(g) > 0.0 {
        let mut lo = g;
        let mut hi = (g * 4.0).min(ceil);
        while h(hi) > 0.0 {
            lo = hi;
            hi = (hi * 4.0).min(ceil);
        }
        (lo, hi)
    } else {
        let mut lo = (g / 4.0).max(floor);
        let mut hi = g;
        while h(lo) <= 0.0 {
            hi = lo;
            lo = (lo / 4.0).max(floor);
        }
        (lo, hi)
    };
    while hi / lo - 1.0 > ROOT_TOL {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        let v = h(mid);
        if v > 0.0 {
            lo = mid;
        } else if v < 0.0 {
            hi = mid;
        } else {
            return mid;
        }
    }
    // Prefer the smaller quantization noise on ties.
    lo
}

/// Maximizes the penalized surrogate. Each pass solves, per radio head,
///
/// ```text
/// (terms - mu_wz) / (A_l + sigma^2 + x) - mu_p2p / (S_l + sigma^2 + x) + mu / x = weight_l
/// ```
///
/// with `A_l` frozen at the current fixed point. The left side at the
/// current `x` is the exact partial derivative, so the move toward these
/// roots is an ascent direction; it is taken with Armijo backtracking in
/// `log x`.
fn stationarity(p: &Problem<'_>, s: &SurrogateState, mu: f64, start: &[f64]) -> Result<Vec<f64>> {
    let s2 = p.sc.sigma2;
    let (mu_wz, mu_p2p) = match p.scheme {
        Scheme::Wz => (mu, 0.0),
        Scheme::P2p => (0.0, mu),
    };
    let mut x: Vec<f64> = p.clamp(start);
    let (mut val, mut grad) = penalized(p, s, mu, &x)?;
    let mut delta = f64::INFINITY;
    let mut stalled = 0;
    for _ in 0..p.opts.max_inner_steps {
        let fp = p.fixed_point(&x, false)?;
        let dir: Vec<f64> = (0..x.len())
            .map(|l| {
                let a = (fp.lambda_diag[l] - x[l] - s2).max(0.0);
                let (w, rx) = (s.weight[l], p.rx[l]);
                let h = |v: f64| (s.terms - mu_wz) / (a + s2 + v) - mu_p2p / (rx + s2 + v) + mu / v - w;
                (decreasing_root(h, p.floor, p.ceil[l], x[l]) / x[l]).ln()
            })
            .collect();
        delta = dir.iter().fold(0.0, |m, d| m.max(d.abs()));
        if delta <= PASS_TOL {
            return Ok(x);
        }
        let slope: f64 = dir.iter().zip(&grad).zip(&x).map(|((d, g), x)| d * g * x).sum();
        let mut t = 1.0;
        let mut moved = false;
        while t * delta > PASS_TOL {
            let xt: Vec<f64> = x.iter().zip(&dir).map(|(x, d)| x * (t * d).exp()).collect();
            let xt = p.clamp(&xt);
            let (vt, gt) = penalized(p, s, mu, &xt)?;
            if vt >= val + 1e-4 * t * slope.max(0.0) {
                if vt - val <= STALL_TOL * (1.0 + val.abs()) {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
                x = xt;
                val = vt;
                grad = gt;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved || stalled >= STALL_STEPS {
            return Ok(x);
        }
    }
    Err(Error::IterationCap {
        stage: "stationarity passes",
        iterations: p.opts.max_inner_steps,
        trace: alloc::vec![delta],
    })
}

/// Projected gradient ascent in `z = log x` with Armijo backtracking. Each
/// coordinate of the gradient is scaled by the inverse curvature of its
/// own per-element model, since heads near the floor and near the ceiling
/// differ in scale by many orders of magnitude.
fn projected_gradient(p: &Problem<'_>, s: &SurrogateState, mu: f64, start: &[f64]) -> Result<Vec<f64>> {
    let s2 = p.sc.sigma2;
    let (mu_wz, mu_p2p) = match p.scheme {
        Scheme::Wz => (mu, 0.0),
        Scheme::P2p => (0.0, mu),
    };
    let zmin = p.floor.ln();
    let zmax: Vec<f64> = p.ceil.iter().map(|c| c.ln()).collect();
    let mut z: Vec<f64> = p.clamp(start).iter().map(|v| v.ln()).collect();
    let exp = |z: &[f64]| p.clamp(&z.iter().map(|v| v.exp()).collect::<Vec<f64>>());
    let mut x = exp(&z);
    let (mut val, mut grad) = penalized(p, s, mu, &x)?;
    let mut t0 = p.opts.armijo_step;
    let mut stalled = 0;
    for _ in 0..p.opts.max_inner_steps {
        let fp = p.fixed_point(&x, false)?;
        let dir: Vec<f64> = (0..x.len())
            .map(|l| {
                let v = x[l];
                let a = (fp.lambda_diag[l] - v - s2).max(0.0);
                let dh = -(s.terms - mu_wz) / (a + s2 + v).powi(2) + mu_p2p / (p.rx[l] + s2 + v).powi(2) - mu / (v * v);
                let gz = grad[l] * v;
                let curv = (gz + v * v * dh).abs().max(1e-300);
                (gz / curv).clamp(-MAX_LOG_STEP, MAX_LOG_STEP)
            })
            .collect();
        let mut t = t0;
        let mut moved = None;
        while t > 1e-14 {
            let zn: Vec<f64> = z
                .iter()
                .zip(&dir)
                .zip(&zmax)
                .map(|((z, d), hi)| (z + t * d).clamp(zmin, *hi))
                .collect();
            let ascent: f64 = zn
                .iter()
                .zip(&z)
                .zip(&grad)
                .zip(&x)
                .map(|(((a, b), g), x)| g * x * (a - b))
                .sum();
            if ascent <= 0.0 {
                break;
            }
            let xn = exp(&zn);
            let (vn, gn) = penalized(p, s, mu, &xn)?;
            // Below roundoff the value cannot confirm a step, so the slope
            // alone has to; such steps count toward the stall limit.
            let blind = ascent <= 1e-13 * (1.0 + val.abs());
            if vn >= val + 1e-4 * ascent || blind {
                t0 = (2.0 * t).min(p.opts.armijo_step);
                moved = Some((zn, xn, vn, gn, blind));
                break;
            }
            t *= p.opts.armijo_shrink;
        }
        let Some((zn, xn, vn, gn, blind)) = moved else {
            return Ok(x);
        };
        let step = zn.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if blind || vn - val <= STALL_TOL * (1.0 + val.abs()) {
            stalled += 1;
        } else {
            stalled = 0;
        }
        z = zn;
        x = xn;
        val = vn;
        grad = gn;
        if step <= PASS_TOL || stalled >= STALL_STEPS {
            return Ok(x);
        }
    }
    Err(Error::IterationCap {
        stage: "projected gradient",
        iterations: p.opts.max_inner_steps,
        trace: alloc::vec![val],
    })
}

pub(crate) fn maximize_penalized(p: &Problem<'_>, s: &SurrogateState, mu: f64, start: &[f64]) -> Result<Vec<f64>> {
    match p.opts.engine {
        InnerEngine::Stationarity => stationarity(p, s, mu, start),
        InnerEngine::ProjectedGradient => projected_gradient(p, s, mu, start),
    }
}

/// Maximizer of `S(Psi) - mu * R_fh(Psi)` (nats) over `Psi >= psi_min`.
pub fn penalized_step(
    sc: &Scenario,
    surrogate: &SurrogateState,
    mu: f64,
    scheme: Scheme,
    start: &QuantNoise,
    opts: &OptimizerOptions,
) -> Result<QuantNoise> {
    start.check_len(sc.n_rrh)?;
    let p = Problem::new(sc, scheme, surrogate.mode, opts)?;
    Ok(p.psi(&maximize_penalized(&p, surrogate, mu, &start.psi2)?))
}

fn fh_at(p: &Problem<'_>, x: &[f64]) -> Result<f64> {
    let fp = p.fixed_point(x, false)?;
    p.fh_from(x, &fp)
}

pub(crate) fn constrained_step(
    p: &Problem<'_>,
    s: &SurrogateState,
    budget: f64,
    start: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let x0 = maximize_penalized(p, s, 0.0, start)?;
    if fh_at(p, &x0)? <= budget {
        return Ok((x0, 0.0));
    }
    let tol = p.opts.lambda_tol;
    let mut lo = 0.0;
    let mut hi = p.opts.lambda_max;
    let mut x_hi = maximize_penalized(p, s, hi, &x0)?;
    let mut fh_hi = fh_at(p, &x_hi)?;
    let mut expansions = 0;
    while fh_hi > budget {
        // The surrogate's curvature can call for a multiplier beyond 1.
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::Bracket {
                stage: "fronthaul multiplier",
                detail: alloc::format!("R_fh = {fh_hi} > budget {budget} at lambda = {hi}"),
            });
        }
        x_hi = maximize_penalized(p, s, hi, &x_hi)?;
        fh_hi = fh_at(p, &x_hi)?;
    }
    let mut x_lo = None;
    for _ in 0..200 {
        if hi - lo <= tol * hi.max(1.0) || budget - fh_hi <= tol * budget.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let x = maximize_penalized(p, s, mid, &x_hi)?;
        let fh = fh_at(p, &x)?;
        if fh <= budget {
            hi = mid;
            x_hi = x;
            fh_hi = fh;
        } else {
            lo = mid;
            x_lo = Some(x);
        }
    }
    // The penalized maximizer is only known to limited accuracy, so the
    // feasible end can keep some slack. Close it along the log-linear path
    // to the infeasible end.
    if let Some(x_lo) = x_lo {
        let at = |t: f64| -> Vec<f64> { x_hi.iter().zip(&x_lo).map(|(a, b)| a * (b / a).powf(t)).collect() };
        let (mut t_lo, mut t_hi) = (0.0, 1.0);
        for _ in 0..60 {
            if budget - fh_hi <= tol * budget.max(1.0) {
                break;
            }
            let t = 0.5 * (t_lo + t_hi);
            let fh = fh_at(p, &at(t))?;
            if fh <= budget {
                t_lo = t;
                fh_hi = fh;
            } else {
                t_hi = t;
            }
        }
        if t_lo > 0.0 {
            x_hi = at(t_lo);
        }
    }
    Ok((x_hi, hi))
}

/// Maximizes the surrogate subject to `eta * R_fh <= (1 - eta) C0` by
/// bisection on the fronthaul multiplier. Returns the feasible end.
pub fn inner_psi_step(
    sc: &Scenario,
    surrogate: &SurrogateState,
    eta: f64,
    scheme: Scheme,
    start: &QuantNoise,
    opts: &OptimizerOptions,
) -> Result<InnerStep> {
    start.check_len(sc.n_rrh)?;
    let budget = fronthaul_budget(sc, eta)?;
    let p = Problem::new(sc, scheme, surrogate.mode, opts)?;
    let (x, lambda1) = constrained_step(&p, surrogate, budget, &start.psi2)?;
    Ok(InnerStep {
        psi: p.psi(&x),
        lambda1,
    })
}

fn log_step(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (b / a).ln().abs()).fold(0.0, f64::max)
}

/// Coordinate ascent on `Psi` at a fixed split `eta`.
///
/// Starts at `Psi = sigma^2 I`, or at the uniform point that meets the
/// fronthaul budget when that start is infeasible. Every round rebuilds the
/// surrogate, maximizes it under the budget and keeps the result only if
/// the pool rate does not drop.
pub fn optimize_psi_fixed_eta(
    sc: &Scenario,
    eta: f64,
    scheme: Scheme,
    mode: RxMode,
    opts: &OptimizerOptions,
) -> Result<OptResult> {
    let start = QuantNoise::uniform(sc.n_rrh, sc.sigma2)?;
    optimize_psi_fixed_eta_from(sc, eta, scheme, mode, &start, opts)
}

/// [`optimize_psi_fixed_eta`] from a given `Psi`, clamped to the admissible
/// range. An infeasible start is replaced by the uniform point.
pub fn optimize_psi_fixed_eta_from(
    sc: &Scenario,
    eta: f64,
    scheme: Scheme,
    mode: RxMode,
    start: &QuantNoise,
    opts: &OptimizerOptions,
) -> Result<OptResult> {
    start.check_len(sc.n_rrh)?;
    let budget = fronthaul_budget(sc, eta)?;
    let p = Problem::new(sc, scheme, mode, opts)?;
    let mut pt = p.evaluate(&p.clamp(&start.psi2))?;
    if pt.r_fh > budget {
        pt = p.evaluate(&uniform_point(&p, eta, UNIFORM_THETA, UNIFORM_EPS)?)?;
    }
    let slack = budget * (1.0 + 1e-12) + 1e-12;
    let merit = |x: &[f64]| -> Result<Option<(Point, f64)>> {
        let q = p.evaluate(x)?;
        Ok((q.r_fh <= slack).then(|| {
            let m = q.r_pool;
            (q, m)
        }))
    };
    let mut trace = OptTrace::default();
    let mut obj = eta * (p.r_bs + pt.r_pool);
    trace.objective.push(obj);
    let mut lambda1;
    let mut accel = Extrapolator::default();
    accel.reset(&pt.x);
    for _ in 0..opts.max_rounds {
        let s = SurrogateState::from_fixed_point(sc, &p.psi(&pt.x), &pt.fp, mode, &opts.fixed_point)?;
        let (x, lam) = constrained_step(&p, &s, budget, &pt.x)?;
        let (next, m) = safeguard(&pt, pt.r_pool, x, merit)?;
        // one more surrogate step from an extrapolated point lets the other
        // heads take up the budget it frees
        let (next, _, lam) = accel.accelerate(
            &p,
            (next, m, lam),
            |y| {
                let s = SurrogateState::from_fixed_point(sc, &p.psi(&y.x), &y.fp, mode, &opts.fixed_point)?;
                constrained_step(&p, &s, budget, &y.x)
            },
            merit,
        )?;
        lambda1 = lam;
        let moved = log_step(&pt.x, &next.x);
        pt = next;
        let new_obj = eta * (p.r_bs + pt.r_pool);
        trace.lambda1.push(lambda1);
        trace.objective.push(new_obj);
        let mut settled = (new_obj - obj).abs() <= opts.round_tol * (1.0 + obj.abs());
        if settled && moved > ROUND_STEP_TOL {
            let k = kkt_residual(sc, &p.psi(&pt.x), eta, lambda1, scheme, mode, &opts.fixed_point)?;
            settled = k.max_abs() < ROUND_KKT_TOL;
        }
        obj = new_obj;
        if settled {
            let mut r = p.result(&pt, eta, trace);
            r.lambda1 = Some(lambda1);
            return Ok(r);
        }
    }
    Err(Error::IterationCap {
        stage: "coordinate ascent",
        iterations: opts.max_rounds,
        trace: trace.objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, ScenarioConfig};
    use approx::assert_relative_eq;

    fn sc(c0: f64) -> Scenario {
        generate_scenario(&ScenarioConfig {
            n_bs_antennas: 10,
            n_mue: 2,
            n_rrh: 4,
            n_sue: 4,
            fronthaul_se: c0,
            rng_seed: 3,
            ..ScenarioConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn decreasing_root_finds_root_and_floor() {
        let r = decreasing_root(|x| 1.0 / x - 2.0, 1e-9, 1e9, 7.0);
        assert_relative_eq!(r, 0.5, max_relative = 1e-13);
        assert_eq!(decreasing_root(|x| -x, 1e-3, 1e3, 1.0), 1e-3);
        assert_eq!(decreasing_root(|x| 1.0 / x, 1e-3, 1e3, 1.0), 1e3);
    }

    #[test]
    fn objective_nondecreasing_and_feasible() {
        let opts = OptimizerOptions::default();
        for scheme in Scheme::ALL {
            for mode in RxMode::ALL {
                let s = sc(30.0);
                let r = optimize_psi_fixed_eta(&s, 0.6, scheme, mode, &opts).unwrap();
                for w in r.trace.objective.windows(2) {
                    assert!(w[1] >= w[0], "{scheme}/{mode}: {w:?}");
                }
                assert!(r.constraint_gap(30.0) <= 1e-9, "{}", r.constraint_gap(30.0));
            }
        }
    }

    #[test]
    fn slack_constraint_drives_psi_to_floor() {
        let opts = OptimizerOptions::default();
        let s = sc(1e9);
        let r = optimize_psi_fixed_eta(&s, 0.5, Scheme::Wz, RxMode::Sic, &opts).unwrap();
        assert_eq!(r.lambda1, Some(0.0));
        let floor = opts.psi_floor * s.sigma2;
        assert!(
            r.psi_star.psi2.iter().all(|&x| x <= floor * 1.0001),
            "{:?}",
            r.psi_star.psi2
        );
    }

    #[test]
    fn engines_agree() {
        let s = sc(30.0);
        let roots = OptimizerOptions {
            engine: InnerEngine::Stationarity,
            ..OptimizerOptions::default()
        };
        for scheme in Scheme::ALL {
            for mode in RxMode::ALL {
                let a = optimize_psi_fixed_eta(&s, 0.6, scheme, mode, &OptimizerOptions::default()).unwrap();
                let b = optimize_psi_fixed_eta(&s, 0.6, scheme, mode, &roots).unwrap();
                assert_relative_eq!(a.objective, b.objective, max_relative = 1e-6);
            }
        }
    }
}
