//! Experiment files and preset defaults.
//!
//! An experiment file is TOML:
//!
//! ```toml
//! preset = "uniform_vs_optimal"
//! seeds = [1, 2, 3]
//! schemes = ["p2p"]
//!
//! [sweep]
//! variable = "eta"
//! values = [0.1, 0.5, 0.9]
//!
//! [scenario]
//! fronthaul_se = 20.0
//! ```
//!
//! Anything left out takes the preset default. [`ExperimentSpec::resolve`]
//! fills the defaults in and validates the result.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use hcran_core::{OptimizerOptions, RxMode, ScenarioConfig, Scheme};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Deterministic equivalents against Monte Carlo over a sweep of `J`.
    Validate,
    /// Joint optimization against the fixed-split and fixed-noise baselines
    /// over a sweep of `C0`.
    JointVsBaselines,
    /// Pool rate of both compression schemes over a sweep of `J`.
    WzVsP2p,
    /// Optimized against uniform quantization over a sweep of `eta`.
    UniformVsOptimal,
    /// Any sweep variable; joint optimization, or fixed-split optimization
    /// when sweeping `eta`.
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Validate,
        Preset::JointVsBaselines,
        Preset::WzVsP2p,
        Preset::UniformVsOptimal,
        Preset::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Validate => "validate",
            Preset::JointVsBaselines => "joint_vs_baselines",
            Preset::WzVsP2p => "wz_vs_p2p",
            Preset::UniformVsOptimal => "uniform_vs_optimal",
            Preset::Custom => "custom",
        }
    }

    fn allowed(self) -> &'static [SweepVar] {
        match self {
            Preset::Validate | Preset::WzVsP2p => &[SweepVar::J],
            Preset::JointVsBaselines => &[SweepVar::C0],
            Preset::UniformVsOptimal => &[SweepVar::Eta],
            Preset::Custom => &[SweepVar::J, SweepVar::C0, SweepVar::Eta],
        }
    }
}

impl FromStr for Preset {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = Preset::ALL.iter().map(|p| p.as_str()).collect();
            HarnessError::Spec(format!("unknown preset `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    /// Number of small-cell users.
    J,
    /// Normalized fronthaul capacity.
    C0,
    /// Access share of the bandwidth.
    Eta,
}

impl SweepVar {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVar::J => "j",
            SweepVar::C0 => "c0",
            SweepVar::Eta => "eta",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVar,
    pub values: Vec<f64>,
}

/// Partial [`ScenarioConfig`]; unset fields keep the preset value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioOverrides {
    pub n_bs_antennas: Option<usize>,
    pub n_mue: Option<usize>,
    pub n_rrh: Option<usize>,
    pub n_sue: Option<usize>,
    pub fronthaul_se: Option<f64>,
    pub macro_radius_m: Option<f64>,
    pub rrh_radius_m: Option<f64>,
    pub tx_power_mue_dbm: Option<f64>,
    pub tx_power_sue_dbm: Option<f64>,
    pub noise_psd_dbm_hz: Option<f64>,
    pub total_bandwidth_hz: Option<f64>,
}

impl ScenarioOverrides {
    fn apply(&self, cfg: &mut ScenarioConfig) {
        macro_rules! set {
            ($($f:ident),*) => {$( if let Some(v) = self.$f { cfg.$f = v; } )*};
        }
        set!(
            n_bs_antennas,
            n_mue,
            n_rrh,
            n_sue,
            fronthaul_se,
            macro_radius_m,
            rrh_radius_m,
            tx_power_mue_dbm,
            tx_power_sue_dbm,
            noise_psd_dbm_hz,
            total_bandwidth_hz
        );
    }
}

/// Experiment as written by the user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub preset: Preset,
    pub sweep: Option<Sweep>,
    /// Monte Carlo trials per point (validate only).
    pub trials: Option<usize>,
    /// Scenario drops; every seed is run over the whole grid.
    pub seeds: Option<Vec<u64>>,
    /// Output directory.
    pub out: Option<PathBuf>,
    pub schemes: Option<Vec<Scheme>>,
    pub modes: Option<Vec<RxMode>>,
    /// Fixed access share for validate, wz_vs_p2p and the compression-only
    /// baseline.
    pub eta: Option<f64>,
    /// `psi^2` in watts for validate and the bandwidth-only baseline.
    pub psi: Option<f64>,
    /// Second grid of `C0` values for wz_vs_p2p.
    pub c0_values: Option<Vec<f64>>,
    #[serde(default)]
    pub scenario: ScenarioOverrides,
    pub optimizer: Option<OptimizerOptions>,
}

impl ExperimentSpec {
    pub fn preset(preset: Preset) -> Self {
        ExperimentSpec {
            preset,
            sweep: None,
            trials: None,
            seeds: None,
            out: None,
            schemes: None,
            modes: None,
            eta: None,
            psi: None,
            c0_values: None,
            scenario: ScenarioOverrides::default(),
            optimizer: None,
        }
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|source| HarnessError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text, path)
    }

    /// Fills in preset defaults and checks the result.
    pub fn resolve(&self) -> Result<Experiment> {
        let d = Defaults::of(self.preset);
        let mut scenario = d.scenario;
        self.scenario.apply(&mut scenario);
        let sweep = match (&self.sweep, d.sweep) {
            (Some(s), _) => s.clone(),
            (None, Some(s)) => s,
            (None, None) => return Err(spec_err(format!("preset {} needs a [sweep] section", self.preset))),
        };
        let e = Experiment {
            preset: self.preset,
            sweep,
            trials: self.trials.unwrap_or(d.trials),
            seeds: self.seeds.clone().unwrap_or(d.seeds),
            schemes: self.schemes.clone().unwrap_or(d.schemes),
            modes: self.modes.clone().unwrap_or_else(|| RxMode::ALL.to_vec()),
            eta: self.eta.unwrap_or(0.5),
            psi: self.psi.unwrap_or(d.psi),
            c0_values: self.c0_values.clone().unwrap_or(d.c0_values),
            scenario,
            optimizer: self.optimizer.unwrap_or_default(),
        };
        e.validate()?;
        Ok(e)
    }
}

fn spec_err(msg: String) -> HarnessError {
    HarnessError::Spec(msg)
}

struct Defaults {
    sweep: Option<Sweep>,
    trials: usize,
    seeds: Vec<u64>,
    schemes: Vec<Scheme>,
    psi: f64,
    c0_values: Vec<f64>,
    scenario: ScenarioConfig,
}

impl Defaults {
    fn of(preset: Preset) -> Self {
        let small = ScenarioConfig {
            n_bs_antennas: 10,
            n_mue: 2,
            n_rrh: 4,
            n_sue: 4,
            fronthaul_se: 30.0,
            ..ScenarioConfig::default()
        };
        let sweep = |variable, values: Vec<f64>| Some(Sweep { variable, values });
        let base = Defaults {
            sweep: None,
            trials: 1000,
            seeds: vec![1],
            schemes: Scheme::ALL.to_vec(),
            psi: 1e-13,
            c0_values: vec![5.0, 15.0, 30.0],
            scenario: small.clone(),
        };
        match preset {
            Preset::Validate => Defaults {
                sweep: sweep(SweepVar::J, (1..=6).map(|i| 10.0 * i as f64).collect()),
                psi: 1e-10,
                scenario: ScenarioConfig {
                    n_bs_antennas: 10,
                    n_mue: 5,
                    n_rrh: 30,
                    ..ScenarioConfig::default()
                },
                ..base
            },
            Preset::JointVsBaselines => Defaults {
                sweep: sweep(
                    SweepVar::C0,
                    vec![0.5, 1.0, 2.0, 5.0, 10.0, 15.0, 20.0, 30.0, 50.0, 100.0],
                ),
                schemes: vec![Scheme::Wz],
                ..base
            },
            Preset::WzVsP2p => Defaults {
                sweep: sweep(SweepVar::J, (1..=10).map(|i| 2.0 * i as f64).collect()),
                ..base
            },
            Preset::UniformVsOptimal => Defaults {
                sweep: sweep(SweepVar::Eta, (1..20).map(|i| i as f64 / 20.0).collect()),
                seeds: (1..=10).collect(),
                ..base
            },
            Preset::Custom => base,
        }
    }
}

/// Fully specified experiment. Its JSON form is what the config hash covers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub preset: Preset,
    pub sweep: Sweep,
    pub trials: usize,
    pub seeds: Vec<u64>,
    pub schemes: Vec<Scheme>,
    pub modes: Vec<RxMode>,
    pub eta: f64,
    pub psi: f64,
    pub c0_values: Vec<f64>,
    pub scenario: ScenarioConfig,
    pub optimizer: OptimizerOptions,
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        let s = &self.sweep;
        if s.values.is_empty() {
            return Err(spec_err(format!("sweep grid for `{}` is empty", s.variable.as_str())));
        }
        if !self.preset.allowed().contains(&s.variable) {
            return Err(spec_err(format!(
                "preset {} cannot sweep `{}`",
                self.preset,
                s.variable.as_str()
            )));
        }
        for &v in &s.values {
            let ok = match s.variable {
                SweepVar::J => v >= 1.0 && v.fract() == 0.0 && v <= 1e6,
                SweepVar::C0 => v.is_finite() && v > 0.0,
                SweepVar::Eta => v > 0.0 && v < 1.0,
            };
            if !ok {
                return Err(spec_err(format!("bad `{}` grid value {v}", s.variable.as_str())));
            }
        }
        if self.trials == 0 {
            return Err(spec_err("trials must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(spec_err("seed list is empty".into()));
        }
        if self.schemes.is_empty() || self.modes.is_empty() {
            return Err(spec_err("scheme and mode lists must be nonempty".into()));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(spec_err(format!("eta must lie in (0, 1), got {}", self.eta)));
        }
        if !(self.psi.is_finite() && self.psi > 0.0) {
            return Err(spec_err(format!("psi must be positive, got {}", self.psi)));
        }
        if self.preset == Preset::WzVsP2p && self.c0_values.is_empty() {
            return Err(spec_err("c0_values is empty".into()));
        }
        if let Some(v) = self.c0_values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(spec_err(format!("bad c0_values entry {v}")));
        }
        self.scenario.validate().map_err(|e| spec_err(e.to_string()))?;
        Ok(())
    }

    /// Scenario config for one seed, with the sweep value applied when it
    /// is a scenario parameter.
    pub fn scenario_at(&self, seed: u64, value: f64) -> ScenarioConfig {
        let mut cfg = self.scenario.clone();
        cfg.rng_seed = seed;
        match self.sweep.variable {
            SweepVar::J => cfg.n_sue = value as usize,
            SweepVar::C0 => cfg.fronthaul_se = value,
            SweepVar::Eta => {}
        }
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ExperimentSpec> {
        ExperimentSpec::from_toml(s, Path::new("test.toml"))
    }

    #[test]
    fn preset_defaults_resolve() {
        for p in Preset::ALL {
            let r = ExperimentSpec::preset(p).resolve();
            assert_eq!(r.is_ok(), p != Preset::Custom, "{p}");
        }
        let v = ExperimentSpec::preset(Preset::Validate).resolve().unwrap();
        assert_eq!(v.sweep.values, vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0]);
        assert_eq!((v.scenario.n_rrh, v.scenario.n_mue, v.trials), (30, 5, 1000));
    }

    #[test]
    fn overrides_apply() {
        let s = parse(
            r#"
            preset = "uniform_vs_optimal"
            seeds = [3]
            schemes = ["wz"]
            modes = ["sic"]
            [sweep]
            variable = "eta"
            values = [0.25]
            [scenario]
            fronthaul_se = 12.5
            "#,
        )
        .unwrap();
        let e = s.resolve().unwrap();
        assert_eq!(e.scenario.fronthaul_se, 12.5);
        assert_eq!(e.schemes, vec![Scheme::Wz]);
        assert_eq!(e.scenario_at(3, 0.25).rng_seed, 3);
    }

    #[test]
    fn custom_with_empty_grid_is_rejected() {
        let s = parse("preset = \"custom\"\n[sweep]\nvariable = \"c0\"\nvalues = []\n").unwrap();
        assert!(matches!(s.resolve(), Err(HarnessError::Spec(m)) if m.contains("empty")));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse("preset = \"fig9\"").is_err());
        assert!(parse("preset = \"validate\"\nbogus = 1").is_err());
        assert!(parse("preset = \"validate\"\n[scenario]\nn_antennas = 3").is_err());
        let bad = [
            "preset = \"validate\"\ntrials = 0",
            "preset = \"validate\"\nseeds = []",
            "preset = \"validate\"\n[sweep]\nvariable = \"eta\"\nvalues = [0.5]",
            "preset = \"custom\"\n[sweep]\nvariable = \"eta\"\nvalues = [1.0]",
            "preset = \"custom\"\n[sweep]\nvariable = \"j\"\nvalues = [2.5]",
            "preset = \"custom\"",
        ];
        for b in bad {
            assert!(parse(b).unwrap().resolve().is_err(), "{b}");
        }
        assert!("nope".parse::<Preset>().is_err());
        assert_eq!("wz_vs_p2p".parse::<Preset>().unwrap(), Preset::WzVsP2p);
    }
}
