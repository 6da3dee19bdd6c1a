//! Problem instances: node placement, large-scale fading, powers and noise.
//!
//! The base station sits at the origin. Radio heads and macro users are
//! dropped uniformly in the macro disc; every small-cell user picks a parent
//! radio head uniformly at random and is dropped uniformly in that head's
//! disc. Only large-scale fading lives here; small-scale fading is drawn by
//! [`crate::montecarlo`].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

// only needed when std is absent
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Link classes with distinct path-loss laws.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LinkClass {
    /// Any user (small-cell or macro) to a radio head.
    UeToRrh,
    /// Macro user to the base station array.
    MueToBs,
}

/// `PL_dB(d) = intercept_db + slope_db * log10(d)`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct PathLossModel {
    pub intercept_db: f64,
    /// Ten times the path-loss exponent.
    pub slope_db: f64,
}

impl PathLossModel {
    pub const UE_TO_RRH: PathLossModel = PathLossModel {
        intercept_db: 31.5,
        slope_db: 40.0,
    };
    pub const MUE_TO_BS: PathLossModel = PathLossModel {
        intercept_db: 31.5,
        slope_db: 35.0,
    };

    pub fn loss_db(&self, d: f64) -> Result<f64> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::Domain {
                what: "distance",
                value: d,
            });
        }
        Ok(self.intercept_db + self.slope_db * d.log10())
    }

    /// Linear power gain `10^(-PL_dB/10)`.
    pub fn gain(&self, d: f64) -> Result<f64> {
        Ok(db_to_linear(-self.loss_db(d)?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct PathLossConfig {
    pub ue_to_rrh: PathLossModel,
    pub mue_to_bs: PathLossModel,
}

impl Default for PathLossConfig {
    fn default() -> Self {
        PathLossConfig {
            ue_to_rrh: PathLossModel::UE_TO_RRH,
            mue_to_bs: PathLossModel::MUE_TO_BS,
        }
    }
}

impl PathLossConfig {
    pub fn model(&self, class: LinkClass) -> &PathLossModel {
        match class {
            LinkClass::UeToRrh => &self.ue_to_rrh,
            LinkClass::MueToBs => &self.mue_to_bs,
        }
    }
}

/// Path-loss gain with the default per-class models.
pub fn pathloss_gain(d: f64, class: LinkClass) -> Result<f64> {
    PathLossConfig::default().model(class).gain(d)
}

pub fn db_to_linear(x_db: f64) -> f64 {
    10.0.powf(x_db / 10.0)
}

pub fn dbm_to_watt(x_dbm: f64) -> f64 {
    db_to_linear(x_dbm - 30.0)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ScenarioConfig {
    /// `N`
    pub n_bs_antennas: usize,
    /// `K`
    pub n_mue: usize,
    /// `L`
    pub n_rrh: usize,
    /// `J`
    pub n_sue: usize,
    pub macro_radius_m: f64,
    pub rrh_radius_m: f64,
    pub tx_power_mue_dbm: f64,
    pub tx_power_sue_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    /// `F`
    pub total_bandwidth_hz: f64,
    /// `C0`, normalized fronthaul spectral efficiency (bps/Hz).
    pub fronthaul_se: f64,
    #[cfg_attr(feature = "serde", serde(default = "default_min_distance"))]
    pub min_distance_m: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub pathloss: PathLossConfig,
    pub rng_seed: u64,
}

#[cfg(feature = "serde")]
fn default_min_distance() -> f64 {
    1.0
}

impl Default for ScenarioConfig {
    /// Macro cell of 250 m, 50 m radio-head discs, 23 dBm users,
    /// -174 dBm/Hz noise over 20 MHz.
    fn default() -> Self {
        ScenarioConfig {
            n_bs_antennas: 10,
            n_mue: 5,
            n_rrh: 30,
            n_sue: 10,
            macro_radius_m: 250.0,
            rrh_radius_m: 50.0,
            tx_power_mue_dbm: 23.0,
            tx_power_sue_dbm: 23.0,
            noise_psd_dbm_hz: -174.0,
            total_bandwidth_hz: 20e6,
            fronthaul_se: 30.0,
            min_distance_m: 1.0,
            pathloss: PathLossConfig::default(),
            rng_seed: 1,
        }
    }
}

/// Non-fatal departures from the large-system regime.
#[derive(Clone, Debug, PartialEq)]
pub enum ConfigWarning {
    /// `K >= N`
    BsOverloaded { k: usize, n: usize },
    /// `J + K >= L`
    PoolOverloaded { m: usize, l: usize },
}

impl ScenarioConfig {
    /// Checks hard constraints and returns the soft ones as warnings.
    pub fn validate(&self) -> Result<Vec<ConfigWarning>> {
        let mut bad: Vec<String> = Vec::new();
        let counts = [
            ("n_bs_antennas", self.n_bs_antennas),
            ("n_mue", self.n_mue),
            ("n_rrh", self.n_rrh),
            ("n_sue", self.n_sue),
        ];
        for (name, v) in counts {
            if v == 0 {
                bad.push(format!("{name} must be >= 1"));
            }
        }
        let positive = [
            ("macro_radius_m", self.macro_radius_m),
            ("rrh_radius_m", self.rrh_radius_m),
            ("total_bandwidth_hz", self.total_bandwidth_hz),
            ("fronthaul_se", self.fronthaul_se),
            ("min_distance_m", self.min_distance_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                bad.push(format!("{name} must be positive and finite (got {v})"));
            }
        }
        let finite = [
            ("tx_power_mue_dbm", self.tx_power_mue_dbm),
            ("tx_power_sue_dbm", self.tx_power_sue_dbm),
            ("noise_psd_dbm_hz", self.noise_psd_dbm_hz),
            ("pathloss.ue_to_rrh.intercept_db", self.pathloss.ue_to_rrh.intercept_db),
            ("pathloss.ue_to_rrh.slope_db", self.pathloss.ue_to_rrh.slope_db),
            ("pathloss.mue_to_bs.intercept_db", self.pathloss.mue_to_bs.intercept_db),
            ("pathloss.mue_to_bs.slope_db", self.pathloss.mue_to_bs.slope_db),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                bad.push(format!("{name} must be finite (got {v})"));
            }
        }
        if !bad.is_empty() {
            return Err(Error::InvalidConfig(bad));
        }

        let mut warnings = Vec::new();
        if self.n_mue >= self.n_bs_antennas {
            warnings.push(ConfigWarning::BsOverloaded {
                k: self.n_mue,
                n: self.n_bs_antennas,
            });
        }
        let m = self.n_mue + self.n_sue;
        if m >= self.n_rrh {
            warnings.push(ConfigWarning::PoolOverloaded { m, l: self.n_rrh });
        }
        Ok(warnings)
    }

    /// `sigma^2 = N0 * F`, fixed over the full band.
    pub fn noise_power(&self) -> f64 {
        dbm_to_watt(self.noise_psd_dbm_hz) * self.total_bandwidth_hz
    }
}

/// Node positions in meters; the base station is at the origin.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Geometry {
    pub rrh: Vec<[f64; 2]>,
    pub mue: Vec<[f64; 2]>,
    pub sue: Vec<[f64; 2]>,
    /// Parent radio head of every small-cell user.
    pub sue_parent: Vec<usize>,
}

/// An immutable problem instance.
///
/// User index `m` runs over `[SUE_1..SUE_J, MUE_1..MUE_K]`, matching the
/// column order of the composite radio-head channel.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scenario {
    pub n_bs_antennas: usize,
    pub n_sue: usize,
    pub n_mue: usize,
    pub n_rrh: usize,
    /// Macro user to base station gains, length `K`.
    pub nu: Vec<f64>,
    /// User to radio head gains, `L x M` row-major (`mu[l * M + m]`).
    pub mu: Vec<f64>,
    /// Transmit powers in W, length `M`.
    pub p: Vec<f64>,
    pub sigma2: f64,
    /// `C0` in bps/Hz.
    pub fronthaul_se: f64,
    pub config: Option<ScenarioConfig>,
    pub geometry: Option<Geometry>,
}

impl Scenario {
    /// Builds an instance from explicit large-scale statistics.
    ///
    /// Unlike generated instances, zero gains and powers are accepted here so
    /// that degenerate cases can be exercised.
    pub fn from_parts(
        n_bs_antennas: usize,
        nu: Vec<f64>,
        n_rrh: usize,
        n_sue: usize,
        mu: Vec<f64>,
        p: Vec<f64>,
        sigma2: f64,
        fronthaul_se: f64,
    ) -> Result<Scenario> {
        let n_mue = nu.len();
        let m = n_sue + n_mue;
        if p.len() != m {
            return Err(Error::Dimension {
                what: "p",
                expected: m,
                got: p.len(),
            });
        }
        if mu.len() != n_rrh * m {
            return Err(Error::Dimension {
                what: "mu",
                expected: n_rrh * m,
                got: mu.len(),
            });
        }
        if n_bs_antennas == 0 || n_rrh == 0 {
            return Err(Error::InvalidConfig(alloc::vec![String::from(
                "n_bs_antennas and n_rrh must be >= 1"
            )]));
        }
        for (what, v) in [("sigma2", sigma2), ("fronthaul_se", fronthaul_se)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain { what, value: v });
            }
        }
        let all = nu.iter().chain(mu.iter()).chain(p.iter());
        for &v in all {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Domain {
                    what: "gain or power",
                    value: v,
                });
            }
        }
        Ok(Scenario {
            n_bs_antennas,
            n_sue,
            n_mue,
            n_rrh,
            nu,
            mu,
            p,
            sigma2,
            fronthaul_se,
            config: None,
            geometry: None,
        })
    }

    /// `M = J + K`
    pub fn n_users(&self) -> usize {
        self.n_sue + self.n_mue
    }

    pub fn mu_at(&self, l: usize, m: usize) -> f64 {
        self.mu[l * self.n_users() + m]
    }

    /// Macro-user powers, the tail of `p`.
    pub fn p_mue(&self) -> &[f64] {
        &self.p[self.n_sue..]
    }

    /// `p_k nu_k` for every macro user.
    pub fn bs_gains(&self) -> Vec<f64> {
        self.p_mue().iter().zip(&self.nu).map(|(p, v)| p * v).collect()
    }

    /// `p_m mu_lm`, `L x M` row-major.
    pub fn pool_gains(&self) -> Vec<f64> {
        let m = self.n_users();
        self.mu.iter().enumerate().map(|(i, mu)| mu * self.p[i % m]).collect()
    }

    /// Mean received signal power `S_l = sum_m p_m mu_lm` per radio head.
    pub fn rx_signal_power(&self) -> Vec<f64> {
        let m = self.n_users();
        (0..self.n_rrh)
            .map(|l| (0..m).map(|j| self.p[j] * self.mu[l * m + j]).sum())
            .collect()
    }

    pub fn with_fronthaul_se(&self, c0: f64) -> Result<Scenario> {
        if !(c0 > 0.0) || !c0.is_finite() {
            return Err(Error::Domain {
                what: "fronthaul_se",
                value: c0,
            });
        }
        let mut s = self.clone();
        s.fronthaul_se = c0;
        if let Some(cfg) = s.config.as_mut() {
            cfg.fronthaul_se = c0;
        }
        Ok(s)
    }
}

/// Diagonal quantization-noise covariance `Psi = diag(psi2)`, in W.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuantNoise {
    pub psi2: Vec<f64>,
}

impl QuantNoise {
    pub fn new(psi2: Vec<f64>) -> Result<QuantNoise> {
        for &v in &psi2 {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Domain { what: "psi2", value: v });
            }
        }
        Ok(QuantNoise { psi2 })
    }

    pub fn uniform(n_rrh: usize, value: f64) -> Result<QuantNoise> {
        QuantNoise::new(alloc::vec![value; n_rrh])
    }

    pub fn len(&self) -> usize {
        self.psi2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi2.is_empty()
    }

    pub(crate) fn check_len(&self, n_rrh: usize) -> Result<()> {
        if self.psi2.len() != n_rrh {
            return Err(Error::Dimension {
                what: "psi2",
                expected: n_rrh,
                got: self.psi2.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_positive(&self) -> Result<()> {
        match self.psi2.iter().find(|&&v| !(v > 0.0)) {
            Some(&v) => Err(Error::Domain {
                what: "psi2 (fronthaul rate diverges at zero)",
                value: v,
            }),
            None => Ok(()),
        }
    }
}

fn uniform_in_disc<R: Rng>(rng: &mut R, radius: f64) -> [f64; 2] {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = 2.0 * PI * rng.random::<f64>();
    [r * theta.cos(), r * theta.sin()]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Draws a scenario. Equal configs give bit-identical instances.
///
/// Draw order is radio heads, macro users, then small-cell users, so the
/// first `J` small-cell users are shared by every config that differs only
/// in a larger `n_sue`.
pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

    let rrh: Vec<[f64; 2]> = (0..cfg.n_rrh)
        .map(|_| uniform_in_disc(&mut rng, cfg.macro_radius_m))
        .collect();
    let mue: Vec<[f64; 2]> = (0..cfg.n_mue)
        .map(|_| uniform_in_disc(&mut rng, cfg.macro_radius_m))
        .collect();
    let mut sue = Vec::with_capacity(cfg.n_sue);
    let mut sue_parent = Vec::with_capacity(cfg.n_sue);
    for _ in 0..cfg.n_sue {
        let parent = rng.random_range(0..cfg.n_rrh);
        let off = uniform_in_disc(&mut rng, cfg.rrh_radius_m);
        sue.push([rrh[parent][0] + off[0], rrh[parent][1] + off[1]]);
        sue_parent.push(parent);
    }

    let d_min = cfg.min_distance_m;
    let rrh_model = cfg.pathloss.ue_to_rrh;
    let bs_model = cfg.pathloss.mue_to_bs;

    let nu = mue
        .iter()
        .map(|&u| bs_model.gain(dist(u, [0.0, 0.0]).max(d_min)))
        .collect::<Result<Vec<_>>>()?;

    let users: Vec<[f64; 2]> = sue.iter().chain(mue.iter()).copied().collect();
    let mut mu = Vec::with_capacity(cfg.n_rrh * users.len());
    for &r in &rrh {
        for &u in &users {
            mu.push(rrh_model.gain(dist(r, u).max(d_min))?);
        }
    }

    let mut p = alloc::vec![dbm_to_watt(cfg.tx_power_sue_dbm); cfg.n_sue];
    p.extend(core::iter::repeat_n(dbm_to_watt(cfg.tx_power_mue_dbm), cfg.n_mue));

    Ok(Scenario {
        n_bs_antennas: cfg.n_bs_antennas,
        n_sue: cfg.n_sue,
        n_mue: cfg.n_mue,
        n_rrh: cfg.n_rrh,
        nu,
        mu,
        p,
        sigma2: cfg.noise_power(),
        fronthaul_se: cfg.fronthaul_se,
        config: Some(cfg.clone()),
        geometry: Some(Geometry {
            rrh,
            mue,
            sue,
            sue_parent,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pathloss_reference_points() {
        assert_relative_eq!(
            pathloss_gain(10.0, LinkClass::UeToRrh).unwrap(),
            10f64.powf(-7.15),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            pathloss_gain(100.0, LinkClass::MueToBs).unwrap(),
            10f64.powf(-10.15),
            max_relative = 1e-12
        );
        let pl = PathLossModel::UE_TO_RRH.loss_db(1.0).unwrap();
        assert_relative_eq!(pl, 31.5, epsilon = 1e-12);
    }

    #[test]
    fn pathloss_rejects_nonpositive_distance() {
        for d in [0.0, -3.0, f64::NAN] {
            assert!(matches!(
                pathloss_gain(d, LinkClass::UeToRrh),
                Err(Error::Domain { .. })
            ));
        }
    }

    #[test]
    fn dbm_conversion() {
        assert_relative_eq!(dbm_to_watt(0.0), 1e-3, max_relative = 1e-14);
        assert_relative_eq!(dbm_to_watt(23.0), 0.199526231496888, max_relative = 1e-12);
        assert_relative_eq!(dbm_to_watt(30.0), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn same_seed_same_scenario() {
        let cfg = ScenarioConfig::default();
        assert_eq!(generate_scenario(&cfg).unwrap(), generate_scenario(&cfg).unwrap());
        let other = ScenarioConfig {
            rng_seed: 2,
            ..cfg.clone()
        };
        assert_ne!(
            generate_scenario(&cfg).unwrap().mu,
            generate_scenario(&other).unwrap().mu
        );
    }

    #[test]
    fn zero_users_rejected() {
        let cfg = ScenarioConfig {
            n_mue: 0,
            ..ScenarioConfig::default()
        };
        match generate_scenario(&cfg) {
            Err(Error::InvalidConfig(fields)) => {
                assert_eq!(fields.len(), 1);
                assert!(fields[0].contains("n_mue"));
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_config_lists_every_field() {
        let cfg = ScenarioConfig {
            n_rrh: 0,
            macro_radius_m: -1.0,
            fronthaul_se: 0.0,
            ..ScenarioConfig::default()
        };
        let Err(Error::InvalidConfig(fields)) = cfg.validate() else {
            panic!("expected failure");
        };
        assert_eq!(fields.len(), 3);
    }

    #[test]
    fn regime_warnings() {
        let cfg = ScenarioConfig {
            n_mue: 12,
            n_sue: 30,
            ..ScenarioConfig::default()
        };
        let w = cfg.validate().unwrap();
        assert_eq!(w.len(), 2);
    }

    #[test]
    fn fig2_shapes() {
        let cfg = ScenarioConfig {
            n_bs_antennas: 10,
            n_mue: 5,
            n_rrh: 30,
            n_sue: 20,
            ..ScenarioConfig::default()
        };
        let s = generate_scenario(&cfg).unwrap();
        assert_eq!(s.nu.len(), 5);
        assert_eq!(s.mu.len(), 30 * 25);
        assert_eq!(s.p.len(), 25);
        assert_eq!(s.p_mue().len(), 5);
        // -174 dBm/Hz over 20 MHz is about -101 dBm.
        assert_relative_eq!(
            s.sigma2,
            dbm_to_watt(-174.0 + 10.0 * 20e6f64.log10()),
            max_relative = 1e-12
        );
    }

    #[test]
    fn sue_prefix_is_shared_across_j() {
        let small = generate_scenario(&ScenarioConfig::default()).unwrap();
        let big = generate_scenario(&ScenarioConfig {
            n_sue: 40,
            ..ScenarioConfig::default()
        })
        .unwrap();
        let (gs, gb) = (small.geometry.unwrap(), big.geometry.unwrap());
        assert_eq!(gs.rrh, gb.rrh);
        assert_eq!(gs.mue, gb.mue);
        assert_eq!(gs.sue[..], gb.sue[..10]);
    }

    #[test]
    fn sue_stays_in_parent_disc() {
        let s = generate_scenario(&ScenarioConfig {
            n_sue: 200,
            ..ScenarioConfig::default()
        })
        .unwrap();
        let g = s.geometry.unwrap();
        for (u, &par) in g.sue.iter().zip(&g.sue_parent) {
            assert!(dist(*u, g.rrh[par]) <= 50.0 + 1e-9);
        }
        for r in &g.rrh {
            assert!(dist(*r, [0.0, 0.0]) <= 250.0 + 1e-9);
        }
    }

    #[test]
    fn from_parts_checks_dimensions() {
        let r = Scenario::from_parts(
            1,
            alloc::vec![1.0],
            2,
            1,
            alloc::vec![1.0; 3],
            alloc::vec![1.0; 2],
            1.0,
            1.0,
        );
        assert!(matches!(r, Err(Error::Dimension { what: "mu", .. })));
    }
}
