//! Dinkelbach iterations for `max (R_B + R_P(Psi)) / (R_fh(Psi) + C0)`.

use alloc::vec::Vec;
use core::f64::consts::LN_2;

use super::coordinate::maximize_penalized;
use super::surrogate::SurrogateState;
use super::{
    eta_for_rate, safeguard, DinkelbachStep, Extrapolator, OptResult, OptTrace, OptimizerOptions, Point, Problem,
};
use crate::error::{Error, Result};
use crate::scenario::{QuantNoise, Scenario};
use crate::{RxMode, Scheme};

/// Joint `(Psi, eta)` optimization.
///
/// Outer loop: `omega <- f / g` until `F(omega) = max f - omega g <= eps1`.
/// Inner loop: surrogate rounds on `f - omega g` until the surrogate value
/// `G` changes by at most `eps2`. Each inner problem is warm-started from the
/// previous `Psi`, and a round is kept only if the exact `f - omega g` does
/// not drop, so `F(omega) >= 0` and `omega` never decreases.
pub fn dinkelbach_joint(
    sc: &Scenario,
    scheme: Scheme,
    mode: RxMode,
    eps1: f64,
    eps2: f64,
    opts: &OptimizerOptions,
) -> Result<OptResult> {
    let start = QuantNoise::uniform(sc.n_rrh, sc.sigma2)?;
    dinkelbach_joint_from(sc, scheme, mode, &start, eps1, eps2, opts)
}

/// [`dinkelbach_joint`] from a given `Psi`, clamped to the admissible range.
/// The returned ratio is never below the ratio at the start.
pub fn dinkelbach_joint_from(
    sc: &Scenario,
    scheme: Scheme,
    mode: RxMode,
    start: &QuantNoise,
    eps1: f64,
    eps2: f64,
    opts: &OptimizerOptions,
) -> Result<OptResult> {
    start.check_len(sc.n_rrh)?;
    for (what, v) in [("eps1", eps1), ("eps2", eps2)] {
        if !(v > 0.0) {
            return Err(Error::Domain { what, value: v });
        }
    }
    let p = Problem::new(sc, scheme, mode, opts)?;
    let c0 = sc.fronthaul_se;
    let mut pt = p.evaluate(&p.clamp(&start.psi2))?;
    let mut omega = 0.0;
    let mut trace = OptTrace::default();
    let exact = |q: &Point, omega: f64| p.r_bs + q.r_pool - omega * (q.r_fh + c0);
    for _ in 0..opts.max_outer {
        let outer_start = pt.clone();
        let mut inner = Vec::new();
        let mut g_prev = exact(&pt, omega);
        inner.push(g_prev);
        let mut rounds = 0;
        let mut accel = Extrapolator::default();
        accel.reset(&pt.x);
        loop {
            if rounds == opts.max_rounds {
                return Err(Error::IterationCap {
                    stage: "dinkelbach inner",
                    iterations: rounds,
                    trace: inner,
                });
            }
            rounds += 1;
            let s = SurrogateState::from_fixed_point(sc, &p.psi(&pt.x), &pt.fp, mode, &opts.fixed_point)?;
            let x = maximize_penalized(&p, &s, omega, &pt.x)?;
            let merit = |x: &[f64]| -> Result<Option<(Point, f64)>> {
                let q = p.evaluate(x)?;
                let m = exact(&q, omega);
                Ok(Some((q, m)))
            };
            let (next, m_next) = safeguard(&pt, exact(&pt, omega), x, merit)?;
            let (next, _, ()) = accel.accelerate(
                &p,
                (next, m_next, ()),
                |y| {
                    let s = SurrogateState::from_fixed_point(sc, &p.psi(&y.x), &y.fp, mode, &opts.fixed_point)?;
                    Ok((maximize_penalized(&p, &s, omega, &y.x)?, ()))
                },
                merit,
            )?;
            pt = next;
            // G = R_B - omega C0 + (S(Psi) - omega R_fh(Psi)) / ln 2
            let fh_nats = pt.r_fh * LN_2;
            let g = p.r_bs - omega * c0 + (s.value_nats(pt.fp.nabla0(), &pt.x) - omega * fh_nats) / LN_2;
            inner.push(g);
            if (g - g_prev).abs() <= eps2 {
                break;
            }
            g_prev = g;
        }
        let (mut f, mut g) = (p.r_bs + pt.r_pool, pt.r_fh + c0);
        if f / g < omega {
            // only roundoff can get here; the start point has ratio omega
            pt = outer_start;
            (f, g) = (p.r_bs + pt.r_pool, pt.r_fh + c0);
        }
        if !(f > 0.0) {
            return Err(Error::NonPositiveNumerator(f));
        }
        // f - omega g, written so that it is exactly zero when the ratio
        // did not move
        let f_omega = g * (f / g - omega);
        trace.dinkelbach.push(DinkelbachStep {
            omega,
            f_omega,
            inner_iterations: rounds,
            inner_objective: inner,
        });
        if f_omega <= eps1 {
            let eta = eta_for_rate(c0, pt.r_fh);
            let mut r = p.result(&pt, eta, trace);
            r.omega = Some(f / g);
            return Ok(r);
        }
        omega = f / g;
    }
    Err(Error::IterationCap {
        stage: "dinkelbach outer",
        iterations: opts.max_outer,
        trace: trace.dinkelbach.iter().map(|s| s.omega).collect(),
    })
}
