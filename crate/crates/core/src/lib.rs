//! Large-system analysis and joint fronthaul-compression / bandwidth
//! optimization for an uplink heterogeneous cloud radio access network.
//!
//! A macro base station with `N` antennas serves `K` macro users over fiber,
//! while `L` single-antenna remote radio heads forward quantized signals of
//! `J` small-cell users (and overheard macro users) to a central pool over
//! wireless fronthaul that shares the band with the access links. The crate
//! provides:
//!
//! - [`scenario`]: reproducible problem instances (geometry, path loss, powers).
//! - [`detequiv`]: deterministic equivalents of the ergodic sum rates and of
//!   both fronthaul rates (point-to-point and Wyner-Ziv), with gradients.
//! - [`montecarlo`]: an independent ergodic-rate oracle over Rayleigh draws.
//! - [`optimizer`]: coordinate ascent on the quantization noise, closed-form
//!   bandwidth split, Dinkelbach joint optimization, uniform quantization and
//!   KKT diagnostics.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` style checks also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod detequiv;
pub mod error;
pub mod fixed_point;
pub mod linalg;
pub mod montecarlo;
pub mod optimizer;
pub mod scenario;

pub use detequiv::{
    grad_psi, rate_report, rbar_bs, rbar_fh, rbar_pool, solve_fp_bs, solve_fp_pool, FixedPointBS, FixedPointPool,
    GradTarget, RateReport, Rates,
};
pub use error::{Error, Result};
pub use fixed_point::FixedPointOptions;
pub use montecarlo::{mc_rate, sample_channels, ChannelDraw, McEstimate, McMode};
pub use optimizer::{
    dinkelbach_joint, dinkelbach_joint_from, eta_for_rate, inner_psi_step, kkt_residual, optimal_eta,
    optimize_psi_fixed_eta, optimize_psi_fixed_eta_from, penalized_step, uniform_joint_search, uniform_quantization,
    DinkelbachStep, InnerEngine, InnerStep, KktReport, OptResult, OptTrace, OptimizerOptions, SurrogateState,
};
pub use scenario::{dbm_to_watt, generate_scenario, pathloss_gain, LinkClass, QuantNoise, Scenario, ScenarioConfig};

/// Receiver processing at the base station and at the central pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum RxMode {
    /// Linear reception with successive interference cancellation.
    Sic,
    /// Linear (MMSE) reception without interference cancellation.
    Lin,
}

/// Fronthaul compression scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Scheme {
    /// Per-radio-head point-to-point compression.
    P2p,
    /// Wyner-Ziv coding with decoder side information.
    Wz,
}

impl RxMode {
    pub const ALL: [RxMode; 2] = [RxMode::Sic, RxMode::Lin];

    pub fn as_str(self) -> &'static str {
        match self {
            RxMode::Sic => "sic",
            RxMode::Lin => "lin",
        }
    }
}

impl Scheme {
    pub const ALL: [Scheme; 2] = [Scheme::P2p, Scheme::Wz];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::P2p => "p2p",
            Scheme::Wz => "wz",
        }
    }
}

impl core::fmt::Display for RxMode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::fmt::Display for Scheme {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}
