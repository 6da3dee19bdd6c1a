//! Monte Carlo ergodic-rate oracle over Rayleigh small-scale fading.
//!
//! Each trial draws `H` and `G`, forms the exact covariance matrices and
//! evaluates log-determinants through a complex Cholesky factorization.
//! Trial `t` uses a ChaCha8 stream `t` under the caller's seed, so estimates
//! are reproducible regardless of how trials are scheduled.

use alloc::vec::Vec;
use core::f64::consts::LN_2;

use num_complex::Complex64;
// only needed when std is absent
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::HermitianMatrix;
use crate::scenario::{QuantNoise, Scenario};

/// Relative diagonal loading that guards the factorization.
pub const DIAGONAL_LOADING: f64 = 1e-14;

const MAX_REDRAWS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum McMode {
    BsSic,
    BsLin,
    PoolSic,
    PoolLin,
    FhP2p,
    FhWz,
}

impl McMode {
    pub const ALL: [McMode; 6] = [
        McMode::BsSic,
        McMode::BsLin,
        McMode::PoolSic,
        McMode::PoolLin,
        McMode::FhP2p,
        McMode::FhWz,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            McMode::BsSic => "bs_sic",
            McMode::BsLin => "bs_lin",
            McMode::PoolSic => "pool_sic",
            McMode::PoolLin => "pool_lin",
            McMode::FhP2p => "fh_p2p",
            McMode::FhWz => "fh_wz",
        }
    }

    fn needs_positive_psi(self) -> bool {
        matches!(self, McMode::FhP2p | McMode::FhWz)
    }
}

impl core::fmt::Display for McMode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One fading realization. Both matrices are row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelDraw {
    /// `N x K`; `E|H_nk|^2 = nu_k`.
    pub h: Vec<Complex64>,
    /// `L x M`; `E|G_lm|^2 = mu_lm`.
    pub g: Vec<Complex64>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n_trials)`.
    pub std_error: f64,
    pub n_trials: usize,
    /// Draws discarded because a covariance failed to factor.
    pub redraws: usize,
}

impl McEstimate {
    /// Reduces per-trial values in the order given.
    pub fn from_samples(samples: &[f64], redraws: usize) -> McEstimate {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        McEstimate {
            mean,
            std_error,
            n_trials: n,
            redraws,
        }
    }
}

fn cn<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Draws `H` then `G` with independent circularly-symmetric Gaussian entries.
pub fn sample_channels<R: Rng + ?Sized>(sc: &Scenario, rng: &mut R) -> ChannelDraw {
    let (n, k) = (sc.n_bs_antennas, sc.n_mue);
    let (l, m) = (sc.n_rrh, sc.n_users());
    let mut h = Vec::with_capacity(n * k);
    for _ in 0..n {
        for j in 0..k {
            h.push(cn(rng, sc.nu[j]));
        }
    }
    let g = (0..l * m).map(|i| cn(rng, sc.mu[i])).collect();
    ChannelDraw { h, g }
}

fn column(data: &[Complex64], cols: usize, j: usize) -> Vec<Complex64> {
    data.iter().skip(j).step_by(cols).copied().collect()
}

fn covariance(data: &[Complex64], rows: usize, cols: usize, power: &[f64], diag: &[f64]) -> HermitianMatrix {
    let mut a = HermitianMatrix::from_diag(diag);
    for j in 0..cols {
        a.rank_one_update(power[j], &column(data, cols, j));
    }
    debug_assert_eq!(a.n, rows);
    a
}

fn loaded_log_det(a: &HermitianMatrix, load: f64) -> Option<f64> {
    let mut a = a.clone();
    a.add_diag(load);
    a.log_det()
}

/// `sum_k [log|A| - log|A - p_k c_k c_k^H|]`, the leave-one-out columns
/// formed by downdating the full covariance.
fn lin_sum(a: &HermitianMatrix, data: &[Complex64], cols: usize, power: &[f64], load: f64) -> Option<f64> {
    let full = loaded_log_det(a, load)?;
    let mut acc = 0.0;
    for j in 0..cols {
        if power[j] == 0.0 {
            continue;
        }
        let mut r = a.clone();
        r.rank_one_update(-power[j], &column(data, cols, j));
        acc += full - loaded_log_det(&r, load)?;
    }
    Some(acc)
}

/// Rate of one draw in bps/Hz, `None` when a covariance failed to factor.
pub fn draw_rate(sc: &Scenario, psi: &QuantNoise, draw: &ChannelDraw, mode: McMode) -> Option<f64> {
    let s2 = sc.sigma2;
    let load = DIAGONAL_LOADING * s2;
    let nats = match mode {
        McMode::BsSic | McMode::BsLin => {
            let (n, k) = (sc.n_bs_antennas, sc.n_mue);
            let p = sc.p_mue();
            let a = covariance(&draw.h, n, k, p, &alloc::vec![s2; n]);
            if mode == McMode::BsSic {
                loaded_log_det(&a, load)? - n as f64 * s2.ln()
            } else {
                lin_sum(&a, &draw.h, k, p, load)?
            }
        }
        McMode::PoolSic | McMode::PoolLin | McMode::FhWz => {
            let (l, m) = (sc.n_rrh, sc.n_users());
            let d: Vec<f64> = psi.psi2.iter().map(|x| x + s2).collect();
            let a = covariance(&draw.g, l, m, &sc.p, &d);
            match mode {
                McMode::PoolSic => loaded_log_det(&a, load)? - d.iter().map(|x| x.ln()).sum::<f64>(),
                McMode::PoolLin => lin_sum(&a, &draw.g, m, &sc.p, load)?,
                _ => loaded_log_det(&a, load)? - psi.psi2.iter().map(|x| x.ln()).sum::<f64>(),
            }
        }
        McMode::FhP2p => {
            let m = sc.n_users();
            (0..sc.n_rrh)
                .map(|l| {
                    let rx: f64 = (0..m).map(|j| sc.p[j] * draw.g[l * m + j].norm_sqr()).sum();
                    ((rx + s2 + psi.psi2[l]) / psi.psi2[l]).ln()
                })
                .sum()
        }
    };
    Some(nats / LN_2)
}

/// Per-user base-station SIC rates for decoding order `1..K` on one draw.
/// User `k` sees interference only from users `k+1..K`.
pub fn bs_sic_per_user(sc: &Scenario, draw: &ChannelDraw) -> Option<Vec<f64>> {
    let (n, k) = (sc.n_bs_antennas, sc.n_mue);
    let p = sc.p_mue();
    let s2 = sc.sigma2;
    let load = DIAGONAL_LOADING * s2;
    let mut a = HermitianMatrix::from_diag(&alloc::vec![s2; n]);
    let mut prev = loaded_log_det(&a, load)?;
    let mut rates = alloc::vec![0.0; k];
    for j in (0..k).rev() {
        a.rank_one_update(p[j], &column(&draw.h, k, j));
        let cur = loaded_log_det(&a, load)?;
        rates[j] = (cur - prev) / LN_2;
        prev = cur;
    }
    Some(rates)
}

/// The RNG of trial `trial` under `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn check(sc: &Scenario, psi: &QuantNoise, mode: McMode) -> Result<()> {
    psi.check_len(sc.n_rrh)?;
    if mode.needs_positive_psi() {
        psi.check_positive()?;
    }
    Ok(())
}

/// One trial: returns the rate and the number of discarded draws.
pub fn mc_trial(sc: &Scenario, psi: &QuantNoise, mode: McMode, seed: u64, trial: u64) -> Result<(f64, usize)> {
    check(sc, psi, mode)?;
    let mut rng = trial_rng(seed, trial);
    for redraws in 0..MAX_REDRAWS {
        let draw = sample_channels(sc, &mut rng);
        if let Some(v) = draw_rate(sc, psi, &draw, mode) {
            return Ok((v, redraws));
        }
    }
    Err(Error::IterationCap {
        stage: "monte carlo redraw",
        iterations: MAX_REDRAWS,
        trace: Vec::new(),
    })
}

/// Sequential estimate over trials `0..n_trials`.
pub fn mc_rate(sc: &Scenario, psi: &QuantNoise, mode: McMode, n_trials: usize, seed: u64) -> Result<McEstimate> {
    if n_trials == 0 {
        return Err(Error::Domain {
            what: "n_trials",
            value: 0.0,
        });
    }
    let mut samples = Vec::with_capacity(n_trials);
    let mut redraws = 0;
    for t in 0..n_trials {
        let (v, r) = mc_trial(sc, psi, mode, seed, t as u64)?;
        samples.push(v);
        redraws += r;
    }
    Ok(McEstimate::from_samples(&samples, redraws))
}
