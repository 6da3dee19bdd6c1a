//! Preset runners. Each returns one [`Table`] per output panel.
//!
//! Work is split into independent jobs over immutable scenarios and run on
//! the rayon pool. Results are collected in job order, so the output does
//! not depend on scheduling.

use hcran_core::montecarlo::mc_trial;
use hcran_core::{generate_scenario, rate_report, McEstimate, McMode, OptResult, QuantNoise, RxMode, Scenario, Scheme};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Experiment, Preset, SweepVar};
use crate::error::Result;
use crate::io::{fmt_f64, Table};
use crate::policy::{self, PolicyPoint};

pub fn run_experiment(exp: &Experiment) -> Result<Vec<Table>> {
    exp.validate()?;
    match exp.preset {
        Preset::Validate => validate(exp),
        Preset::JointVsBaselines => joint_vs_baselines(exp),
        Preset::WzVsP2p => wz_vs_p2p(exp),
        Preset::UniformVsOptimal => uniform_vs_optimal(exp),
        Preset::Custom => custom(exp),
    }
}

fn scenario(exp: &Experiment, seed: u64, value: f64) -> Result<Scenario> {
    Ok(generate_scenario(&exp.scenario_at(seed, value))?)
}

fn par_map<T: Sync, U: Send>(jobs: &[T], f: impl Fn(&T) -> Result<U> + Sync + Send) -> Result<Vec<U>> {
    jobs.par_iter().map(f).collect()
}

fn grid(exp: &Experiment) -> Vec<(u64, f64)> {
    exp.seeds
        .iter()
        .flat_map(|&s| exp.sweep.values.iter().map(move |&v| (s, v)))
        .collect()
}

fn fmt_value(var: SweepVar, v: f64) -> String {
    match var {
        SweepVar::J => (v as usize).to_string(),
        _ => fmt_f64(v),
    }
}

/// Monte Carlo estimate of a sum of per-trial rates, one channel draw per
/// trial shared by all terms.
fn mc_sum(sc: &Scenario, psi: &QuantNoise, modes: &[McMode], trials: usize, seed: u64) -> Result<McEstimate> {
    let per: Vec<(f64, usize)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            modes.iter().try_fold((0.0, 0), |(v, r), &m| {
                let (x, k) = mc_trial(sc, psi, m, seed, t)?;
                Ok((v + x, r + k))
            })
        })
        .collect::<Result<_>>()?;
    let samples: Vec<f64> = per.iter().map(|p| p.0).collect();
    Ok(McEstimate::from_samples(&samples, per.iter().map(|p| p.1).sum()))
}

/// Quantities compared in the validation panel.
pub const VALIDATE_QUANTITIES: [&str; 4] = ["sum_sic", "sum_lin", "fh_p2p", "fh_wz"];

fn validate(exp: &Experiment) -> Result<Vec<Table>> {
    let jobs = grid(exp);
    let rows = par_map(&jobs, |&(seed, j)| {
        let sc = scenario(exp, seed, j)?;
        let psi = QuantNoise::uniform(sc.n_rrh, exp.psi)?;
        let de = rate_report(&sc, &psi, &exp.optimizer.fixed_point)?;
        let cases: [(f64, &[McMode]); 4] = [
            (de.r_bs_sic + de.r_pool_sic, &[McMode::BsSic, McMode::PoolSic]),
            (de.r_bs_lin + de.r_pool_lin, &[McMode::BsLin, McMode::PoolLin]),
            (de.r_fh_p2p, &[McMode::FhP2p]),
            (de.r_fh_wz, &[McMode::FhWz]),
        ];
        let mut out = Vec::new();
        for (q, (de, modes)) in VALIDATE_QUANTITIES.iter().zip(cases) {
            let mc = mc_sum(&sc, &psi, modes, exp.trials, seed)?;
            out.push(vec![
                seed.to_string(),
                fmt_value(SweepVar::J, j),
                q.to_string(),
                fmt_f64(de),
                fmt_f64(mc.mean),
                fmt_f64(mc.std_error),
                fmt_f64((de - mc.mean).abs() / mc.mean.abs()),
                mc.n_trials.to_string(),
                mc.redraws.to_string(),
            ]);
        }
        Ok(out)
    })?;
    let mut t = Table::new(
        "validate",
        &[
            "seed",
            "j",
            "quantity",
            "de",
            "mc",
            "mc_stderr",
            "rel_err",
            "trials",
            "redraws",
        ],
    );
    rows.into_iter().flatten().for_each(|r| t.push(r));
    Ok(vec![t])
}

fn policy_cells(p: &PolicyPoint) -> [String; 5] {
    [p.objective, p.eta, p.r_bs, p.r_pool, p.r_fh].map(fmt_f64)
}

fn scheme_mode_grid(exp: &Experiment) -> Vec<(u64, f64, Scheme, RxMode)> {
    let mut jobs = Vec::new();
    for (seed, v) in grid(exp) {
        for &scheme in &exp.schemes {
            for &mode in &exp.modes {
                jobs.push((seed, v, scheme, mode));
            }
        }
    }
    jobs
}

/// Proposed joint optimization and both single-variable baselines.
pub struct JointComparison {
    pub proposed: OptResult,
    pub compression: OptResult,
    pub bandwidth: PolicyPoint,
}

pub fn joint_comparison(exp: &Experiment, sc: &Scenario, scheme: Scheme, mode: RxMode) -> Result<JointComparison> {
    let o = &exp.optimizer;
    let compression = policy::optimal_compression(sc, exp.eta, scheme, mode, o)?;
    let bandwidth = policy::bandwidth_only(sc, exp.psi, scheme, mode, o)?;
    let starts = policy::proposed_starts(sc, &compression, exp.psi)?;
    let proposed = policy::proposed(sc, scheme, mode, &starts, o)?;
    Ok(JointComparison {
        proposed,
        compression,
        bandwidth,
    })
}

fn joint_vs_baselines(exp: &Experiment) -> Result<Vec<Table>> {
    let jobs = scheme_mode_grid(exp);
    let rows = par_map(&jobs, |&(seed, c0, scheme, mode)| {
        let sc = scenario(exp, seed, c0)?;
        let j = joint_comparison(exp, &sc, scheme, mode)?;
        let head = [seed.to_string(), fmt_f64(c0), scheme.to_string(), mode.to_string()];
        Ok([
            ("proposed", PolicyPoint::from(&j.proposed)),
            ("compression", PolicyPoint::from(&j.compression)),
            ("bandwidth", j.bandwidth),
        ]
        .map(|(name, p)| {
            let mut r = head.to_vec();
            r.push(name.to_string());
            r.extend(policy_cells(&p));
            r
        }))
    })?;
    let mut objective = Table::new(
        "joint_vs_baselines_objective",
        &[
            "seed",
            "c0",
            "scheme",
            "mode",
            "policy",
            "objective",
            "eta",
            "r_bs",
            "r_pool",
            "r_fh",
        ],
    );
    let mut eta = Table::new(
        "joint_vs_baselines_eta",
        &["seed", "c0", "scheme", "mode", "policy", "eta"],
    );
    for r in rows.into_iter().flatten() {
        eta.push(vec![
            r[0].clone(),
            r[1].clone(),
            r[2].clone(),
            r[3].clone(),
            r[4].clone(),
            r[6].clone(),
        ]);
        objective.push(r);
    }
    Ok(vec![objective, eta])
}

fn wz_vs_p2p(exp: &Experiment) -> Result<Vec<Table>> {
    let mut jobs = Vec::new();
    for &mode in &exp.modes {
        for &seed in &exp.seeds {
            for &c0 in &exp.c0_values {
                for &j in &exp.sweep.values {
                    for &scheme in &exp.schemes {
                        jobs.push((mode, seed, c0, j, scheme));
                    }
                }
            }
        }
    }
    let rows = par_map(&jobs, |&(mode, seed, c0, j, scheme)| {
        let sc = scenario(exp, seed, j)?.with_fronthaul_se(c0)?;
        let r = policy::optimal_compression(&sc, exp.eta, scheme, mode, &exp.optimizer)?;
        Ok((
            mode,
            vec![
                seed.to_string(),
                fmt_f64(c0),
                fmt_value(SweepVar::J, j),
                scheme.to_string(),
                fmt_f64(r.r_pool),
                fmt_f64(r.objective),
                fmt_f64(r.r_fh),
            ],
        ))
    })?;
    let cols = ["seed", "c0", "j", "scheme", "r_pool", "objective", "r_fh"];
    Ok(exp
        .modes
        .iter()
        .map(|&m| {
            let mut t = Table::new(format!("wz_vs_p2p_{m}"), &cols);
            rows.iter()
                .filter(|(rm, _)| *rm == m)
                .for_each(|(_, r)| t.push(r.clone()));
            t
        })
        .collect())
}

fn uniform_vs_optimal(exp: &Experiment) -> Result<Vec<Table>> {
    let jobs = scheme_mode_grid(exp);
    let rows = par_map(&jobs, |&(seed, eta, scheme, mode)| {
        let sc = scenario(exp, seed, eta)?;
        let opt = policy::optimal_compression(&sc, eta, scheme, mode, &exp.optimizer)?;
        let uni = policy::uniform_compression(&sc, eta, scheme, mode, &exp.optimizer)?;
        let row = |name: &str, p: &PolicyPoint| {
            vec![
                seed.to_string(),
                fmt_f64(eta),
                mode.to_string(),
                name.to_string(),
                fmt_f64(p.objective),
                fmt_f64(p.r_pool),
                fmt_f64(p.r_fh),
            ]
        };
        Ok((scheme, [row("optimal", &PolicyPoint::from(&opt)), row("uniform", &uni)]))
    })?;
    let cols = ["seed", "eta", "mode", "policy", "objective", "r_pool", "r_fh"];
    Ok(exp
        .schemes
        .iter()
        .map(|&s| {
            let mut t = Table::new(format!("uniform_vs_optimal_{s}"), &cols);
            rows.iter()
                .filter(|(rs, _)| *rs == s)
                .flat_map(|(_, r)| r.iter())
                .for_each(|r| t.push(r.clone()));
            t
        })
        .collect())
}

fn custom(exp: &Experiment) -> Result<Vec<Table>> {
    let var = exp.sweep.variable;
    let jobs = scheme_mode_grid(exp);
    let rows = par_map(&jobs, |&(seed, v, scheme, mode)| {
        let sc = scenario(exp, seed, v)?;
        let p = match var {
            SweepVar::Eta => PolicyPoint::from(&policy::optimal_compression(&sc, v, scheme, mode, &exp.optimizer)?),
            _ => PolicyPoint::from(&joint_comparison(exp, &sc, scheme, mode)?.proposed),
        };
        let mut r = vec![
            seed.to_string(),
            fmt_value(var, v),
            scheme.to_string(),
            mode.to_string(),
        ];
        r.extend(policy_cells(&p));
        Ok(r)
    })?;
    let mut t = Table::new(
        "custom",
        &[
            "seed",
            var.as_str(),
            "scheme",
            "mode",
            "objective",
            "eta_star",
            "r_bs",
            "r_pool",
            "r_fh",
        ],
    );
    rows.into_iter().for_each(|r| t.push(r));
    Ok(vec![t])
}

/// Output of a single joint optimization.
#[derive(Debug, Serialize)]
pub struct OptimizeReport {
    pub scenario: Scenario,
    pub result: OptResult,
}

/// Joint optimization of one drop at the experiment's base scenario.
pub fn optimize_one(exp: &Experiment, seed: u64, scheme: Scheme, mode: RxMode) -> Result<OptimizeReport> {
    let mut cfg = exp.scenario.clone();
    cfg.rng_seed = seed;
    let sc = generate_scenario(&cfg)?;
    let result = joint_comparison(exp, &sc, scheme, mode)?.proposed;
    Ok(OptimizeReport { scenario: sc, result })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ExperimentSpec, Sweep};

    fn small(preset: Preset, var: SweepVar, values: Vec<f64>) -> Experiment {
        let mut e = ExperimentSpec::preset(preset);
        e.sweep = Some(Sweep { variable: var, values });
        e.seeds = Some(vec![2]);
        e.trials = Some(20);
        e.scenario.n_rrh = Some(3);
        e.scenario.n_sue = Some(3);
        e.scenario.n_mue = Some(2);
        e.scenario.n_bs_antennas = Some(4);
        e.c0_values = Some(vec![10.0]);
        e.resolve().unwrap()
    }

    #[test]
    fn every_preset_emits_its_panels() {
        let cases = [
            (Preset::Validate, SweepVar::J, vec![3.0], vec!["validate"]),
            (
                Preset::JointVsBaselines,
                SweepVar::C0,
                vec![1.0, 10.0],
                vec!["joint_vs_baselines_objective", "joint_vs_baselines_eta"],
            ),
            (
                Preset::WzVsP2p,
                SweepVar::J,
                vec![2.0],
                vec!["wz_vs_p2p_sic", "wz_vs_p2p_lin"],
            ),
            (
                Preset::UniformVsOptimal,
                SweepVar::Eta,
                vec![0.3],
                vec!["uniform_vs_optimal_p2p", "uniform_vs_optimal_wz"],
            ),
            (Preset::Custom, SweepVar::C0, vec![5.0], vec!["custom"]),
        ];
        for (preset, var, values, names) in cases {
            let exp = small(preset, var, values);
            let tables = run_experiment(&exp).unwrap();
            let got: Vec<&str> = tables.iter().map(|t| t.name.as_str()).collect();
            assert_eq!(got, names);
            assert!(tables.iter().all(|t| !t.rows.is_empty()));
        }
    }

    #[test]
    fn rows_follow_grid_order() {
        let exp = small(Preset::Custom, SweepVar::Eta, vec![0.8, 0.2, 0.5]);
        let t = &run_experiment(&exp).unwrap()[0];
        let etas: Vec<String> = t.rows.iter().map(|r| r[1].clone()).collect();
        let want: Vec<String> = [0.8, 0.2, 0.5]
            .iter()
            .flat_map(|v| std::iter::repeat_n(fmt_f64(*v), 4))
            .collect();
        assert_eq!(etas, want);
    }
}
