//! Quantization-noise and bandwidth-split optimization.
//!
//! The fixed-`eta` subproblem maximizes the pool rate subject to
//! `eta * R_fh(Psi) <= (1 - eta) * C0` by minorize-maximize rounds on a
//! log-determinant surrogate. The joint problem is the ratio
//! `(R_B + R_P(Psi)) / (R_fh(Psi) + C0)`, solved by Dinkelbach iterations
//! whose inner problem reuses the same surrogate machinery.

mod coordinate;
mod dinkelbach;
mod kkt;
mod surrogate;
mod uniform;

use alloc::vec::Vec;

// only needed when std is absent
#[allow(unused_imports)]
use num_traits::Float;

use crate::detequiv::{rbar_bs, rbar_fh, rbar_pool, solve_fp_bs, solve_fp_pool, FixedPointPool};
use crate::error::{Error, Result};
use crate::fixed_point::FixedPointOptions;
use crate::scenario::{QuantNoise, Scenario};
use crate::{RxMode, Scheme};

pub use coordinate::{inner_psi_step, optimize_psi_fixed_eta, optimize_psi_fixed_eta_from, penalized_step, InnerStep};
pub use dinkelbach::{dinkelbach_joint, dinkelbach_joint_from};
pub use kkt::{kkt_residual, KktReport};
pub use surrogate::SurrogateState;
pub use uniform::{uniform_joint_search, uniform_quantization, RHO_MAX, RHO_MIN};

/// Method for the per-round surrogate maximization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum InnerEngine {
    /// Per-element stationarity roots with the fixed point refreshed
    /// between passes.
    Stationarity,
    /// Projected gradient ascent in `log psi^2` with Armijo backtracking.
    ProjectedGradient,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct OptimizerOptions {
    pub fixed_point: FixedPointOptions,
    pub engine: InnerEngine,
    /// Relative stopping threshold on successive round objectives.
    pub round_tol: f64,
    /// Minorize-maximize rounds per subproblem.
    pub max_rounds: usize,
    /// Dinkelbach outer iterations.
    pub max_outer: usize,
    /// Gradient steps or stationarity passes per surrogate maximization.
    pub max_inner_steps: usize,
    /// Initial upper end of the fronthaul multiplier bracket.
    pub lambda_max: f64,
    /// Bracket width and relative constraint slack at which bisection stops.
    pub lambda_tol: f64,
    /// `psi_min = psi_floor * sigma^2`.
    pub psi_floor: f64,
    /// Per-head cap `psi_ceiling * (S_l + sigma^2)`; a head at the cap is
    /// effectively switched off.
    pub psi_ceiling: f64,
    pub armijo_shrink: f64,
    pub armijo_step: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            fixed_point: FixedPointOptions::default(),
            engine: InnerEngine::ProjectedGradient,
            round_tol: 1e-10,
            max_rounds: 5000,
            max_outer: 200,
            max_inner_steps: 10_000,
            lambda_max: 1.0 - 1e-9,
            lambda_tol: 1e-12,
            psi_floor: 1e-16,
            psi_ceiling: 1e12,
            armijo_shrink: 0.5,
            armijo_step: 1.0,
        }
    }
}

/// One outer Dinkelbach iteration.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DinkelbachStep {
    pub omega: f64,
    /// `F(omega) = f - omega g` after the inner maximization.
    pub f_omega: f64,
    pub inner_iterations: usize,
    /// Surrogate objective `G` per inner round.
    pub inner_objective: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptTrace {
    /// Objective after every coordinate-ascent round, starting point first.
    pub objective: Vec<f64>,
    /// Fronthaul multiplier found in every round.
    pub lambda1: Vec<f64>,
    pub dinkelbach: Vec<DinkelbachStep>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptResult {
    pub psi_star: QuantNoise,
    pub eta_star: f64,
    /// `eta * (R_B + R_P)`, bps/Hz.
    pub objective: f64,
    pub r_bs: f64,
    pub r_pool: f64,
    pub r_fh: f64,
    /// Final multiplier of fixed-`eta` runs.
    pub lambda1: Option<f64>,
    /// Final Dinkelbach parameter.
    pub omega: Option<f64>,
    pub scheme: Scheme,
    pub mode: RxMode,
    pub trace: OptTrace,
}

impl OptResult {
    /// `eta * R_fh - (1 - eta) C0`; nonpositive when feasible.
    pub fn constraint_gap(&self, c0: f64) -> f64 {
        self.eta_star * self.r_fh - (1.0 - self.eta_star) * c0
    }
}

/// `eta* = C0 / (R_fh + C0)`, the optimal split for a fixed `Psi`.
pub fn optimal_eta(sc: &Scenario, psi: &QuantNoise, scheme: Scheme, fp: &FixedPointPool) -> Result<f64> {
    Ok(eta_for_rate(sc.fronthaul_se, rbar_fh(sc, psi, fp, scheme)?))
}

/// `C0 / (r_fh + C0)`
pub fn eta_for_rate(c0: f64, r_fh: f64) -> f64 {
    c0 / (r_fh + c0)
}

/// Fronthaul budget `(1 - eta) C0 / eta` on `R_fh` at split `eta`.
pub(crate) fn fronthaul_budget(sc: &Scenario, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Domain {
            what: "eta",
            value: eta,
        });
    }
    Ok((1.0 - eta) * sc.fronthaul_se / eta)
}

/// Evaluation of all rates at one `Psi`.
#[derive(Clone, Debug)]
pub(crate) struct Point {
    pub x: Vec<f64>,
    pub fp: FixedPointPool,
    pub r_pool: f64,
    pub r_fh: f64,
}

/// A scenario bound to a scheme and mode, with cached constants.
pub(crate) struct Problem<'a> {
    pub sc: &'a Scenario,
    pub scheme: Scheme,
    pub mode: RxMode,
    pub opts: &'a OptimizerOptions,
    pub rx: Vec<f64>,
    pub floor: f64,
    pub ceil: Vec<f64>,
    pub r_bs: f64,
}

impl<'a> Problem<'a> {
    pub fn new(sc: &'a Scenario, scheme: Scheme, mode: RxMode, opts: &'a OptimizerOptions) -> Result<Self> {
        let bs = solve_fp_bs(sc, &opts.fixed_point, mode == RxMode::Lin)?;
        let r_bs = rbar_bs(&bs, sc, mode, &opts.fixed_point)?.sum;
        let rx = sc.rx_signal_power();
        let floor = opts.psi_floor * sc.sigma2;
        let ceil = rx
            .iter()
            .map(|s| (opts.psi_ceiling * (s + sc.sigma2)).max(floor))
            .collect();
        Ok(Problem {
            sc,
            scheme,
            mode,
            opts,
            rx,
            floor,
            ceil,
            r_bs,
        })
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.ceil).map(|(v, c)| v.clamp(self.floor, *c)).collect()
    }

    pub fn psi(&self, x: &[f64]) -> QuantNoise {
        QuantNoise { psi2: x.to_vec() }
    }

    pub fn fixed_point(&self, x: &[f64], leave_one_out: bool) -> Result<FixedPointPool> {
        solve_fp_pool(self.sc, &self.psi(x), &self.opts.fixed_point, leave_one_out)
    }

    pub fn fh_from(&self, x: &[f64], fp: &FixedPointPool) -> Result<f64> {
        rbar_fh(self.sc, &self.psi(x), fp, self.scheme)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Point> {
        let fp = self.fixed_point(x, self.mode == RxMode::Lin)?;
        let psi = self.psi(x);
        let r_pool = rbar_pool(&fp, self.sc, &psi, self.mode, &self.opts.fixed_point)?.sum;
        let r_fh = rbar_fh(self.sc, &psi, &fp, self.scheme)?;
        Ok(Point {
            x: x.to_vec(),
            fp,
            r_pool,
            r_fh,
        })
    }

    /// Fronthaul rate in nats and its gradient, with `fp` solved at `x`.
    pub fn fh_nats_grad(&self, x: &[f64], fp: &FixedPointPool) -> (f64, Vec<f64>) {
        let s2 = self.sc.sigma2;
        match self.scheme {
            Scheme::Wz => {
                let v = fp.nabla0() - x.iter().map(|v| v.ln()).sum::<f64>();
                let g = fp
                    .lambda_diag
                    .iter()
                    .zip(x)
                    .map(|(lam, x)| 1.0 / lam - 1.0 / x)
                    .collect();
                (v, g)
            }
            Scheme::P2p => {
                let v = self.rx.iter().zip(x).map(|(s, x)| ((s + s2 + x) / x).ln()).sum();
                let g = self
                    .rx
                    .iter()
                    .zip(x)
                    .map(|(s, x)| 1.0 / (s + s2 + x) - 1.0 / x)
                    .collect();
                (v, g)
            }
        }
    }

    pub fn result(&self, p: &Point, eta: f64, trace: OptTrace) -> OptResult {
        OptResult {
            psi_star: self.psi(&p.x),
            eta_star: eta,
            objective: eta * (self.r_bs + p.r_pool),
            r_bs: self.r_bs,
            r_pool: p.r_pool,
            r_fh: p.r_fh,
            lambda1: None,
            omega: None,
            scheme: self.scheme,
            mode: self.mode,
            trace,
        }
    }
}

/// Accepts `new` only if `merit` does not decrease. Otherwise backtracks
/// geometrically toward `old` and falls back to `old`.
pub(crate) fn safeguard<F>(old: &Point, old_merit: f64, new: Vec<f64>, mut merit: F) -> Result<(Point, f64)>
where
    F: FnMut(&[f64]) -> Result<Option<(Point, f64)>>,
{
    let mut t = 1.0;
    for _ in 0..40 {
        let x: Vec<f64> = old
            .x
            .iter()
            .zip(&new)
            .map(|(a, b)| if t == 1.0 { *b } else { a * (b / a).powf(t) })
            .collect();
        if let Some((p, m)) = merit(&x)? {
            if m >= old_merit {
                return Ok((p, m));
            }
        }
        t *= 0.5;
    }
    Ok((old.clone(), old_merit))
}

const DRIFT_COS: f64 = 0.99;
const DRIFT_RATIO: f64 = 0.1;
const DRIFT_MULTIPLIERS: [f64; 4] = [1024.0, 128.0, 16.0, 2.0];

/// Extrapolation of three successive minorize-maximize iterates.
///
/// The first candidate is componentwise Aitken: a head whose steps do not
/// shrink is sent to the end of the box it is heading for, where
/// minorize-maximize would otherwise creep by a constant amount per round.
/// Squared-iteration steps in `log psi^2` with a shrinking multiplier come
/// next, which follow slow drifts along flat valleys. When the whole iterate
/// moves by nearly equal steps, long steps along the last step come last,
/// largest first.
#[derive(Default)]
pub(crate) struct Extrapolator {
    hist: Vec<Vec<f64>>,
}

impl Extrapolator {
    pub fn push(&mut self, x: &[f64]) {
        if self.hist.len() == 3 {
            self.hist.remove(0);
        }
        self.hist.push(x.to_vec());
    }

    pub fn reset(&mut self, x: &[f64]) {
        self.hist.clear();
        self.hist.push(x.to_vec());
    }

    fn candidates(&self, p: &Problem<'_>) -> Vec<Vec<f64>> {
        let [a, b, c] = self.hist.as_slice() else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut changed = false;
        let aitken: Vec<f64> = (0..c.len())
            .map(|l| {
                let (d1, d2) = (b[l] - a[l], c[l] - b[l]);
                if d1 == 0.0 || d2 == 0.0 {
                    return c[l];
                }
                let rho = d2 / d1;
                changed = true;
                if rho >= 0.999 {
                    if d2 > 0.0 {
                        p.ceil[l]
                    } else {
                        p.floor
                    }
                } else if rho > -1.0 {
                    (c[l] + d2 * rho / (1.0 - rho)).clamp(p.floor, p.ceil[l])
                } else {
                    c[l]
                }
            })
            .collect();
        if changed {
            out.push(aitken);
        }
        let za: Vec<f64> = a.iter().map(|v| v.ln()).collect();
        let r: Vec<f64> = b.iter().zip(&za).map(|(b, a)| b.ln() - a).collect();
        let v: Vec<f64> = c.iter().zip(b).zip(&r).map(|((c, b), r)| c.ln() - b.ln() - r).collect();
        let norm = |u: &[f64]| u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let (nr, nv) = (norm(&r), norm(&v));
        if nr == 0.0 || nv == 0.0 {
            return out;
        }
        let zmin = p.floor.ln();
        let zmax: Vec<f64> = p.ceil.iter().map(|c| c.ln()).collect();
        let mut alpha = -nr / nv;
        for _ in 0..4 {
            if alpha > -1.5 {
                break;
            }
            let x: Vec<f64> = (0..c.len())
                .map(|l| {
                    (za[l] - 2.0 * alpha * r[l] + alpha * alpha * v[l])
                        .clamp(zmin, zmax[l])
                        .exp()
                })
                .collect();
            out.push(p.clamp(&x));
            alpha = 0.5 * (alpha - 1.0);
        }
        // steady drift: the last two steps are nearly equal, so the second
        // difference is roundoff and the squared steps above are too short
        let d: Vec<f64> = r.iter().zip(&v).map(|(r, v)| r + v).collect();
        let nd = norm(&d);
        let cos = r.iter().zip(&d).map(|(r, d)| r * d).sum::<f64>() / (nr * nd);
        if cos > DRIFT_COS && (nd / nr - 1.0).abs() < DRIFT_RATIO {
            for t in DRIFT_MULTIPLIERS {
                let x: Vec<f64> = (0..c.len())
                    .map(|l| (c[l].ln() + t * d[l]).clamp(zmin, zmax[l]).exp())
                    .collect();
                out.push(p.clamp(&x));
            }
        }
        out
    }

    /// Records `next` and tries the extrapolated candidates. Each one is
    /// followed by one surrogate step (`step`), which lets the heads that
    /// were not extrapolated respond, and is kept only if `merit` strictly
    /// improves on `next`.
    pub fn accelerate<E, S, M>(
        &mut self,
        p: &Problem<'_>,
        next: (Point, f64, E),
        mut step: S,
        mut merit: M,
    ) -> Result<(Point, f64, E)>
    where
        S: FnMut(&Point) -> Result<(Vec<f64>, E)>,
        M: FnMut(&[f64]) -> Result<Option<(Point, f64)>>,
    {
        self.push(&next.0.x);
        for cand in self.candidates(p) {
            let y = p.evaluate(&cand)?;
            let (z, extra) = step(&y)?;
            let (q, m) = safeguard(&next.0, next.1, z, &mut merit)?;
            if m > next.1 {
                self.reset(&q.x);
                return Ok((q, m, extra));
            }
        }
        Ok(next)
    }
}
