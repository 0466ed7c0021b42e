//! Elasticity of the average `I(a; m̄)` with respect to model parameters.
//!
//! `S = (I₊ − I₋) / (2 ε I₀)`. The three conditions reuse the same seeds, so every
//! condition sees identical noise streams.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::{burn_in_start, ksg_mi, SamplePairs, DEFAULT_K};
use crate::model::{SimConfig, SpeciesId};
use crate::sde::simulate;

/// Perturbable parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    /// Secretion rate of both species.
    AlphaLuxs,
    /// AI lifetime; `k_out` and `mu_gut` scale by `1/(1 ± ε)`.
    TauA,
    /// Monitor lifetime `1/δ`; `δ` of both species scales by `1/(1 ± ε)`.
    TauDelta,
    /// Stored but not read by the model.
    Gamma,
}

impl Param {
    pub const ALL: [Param; 4] = [Param::AlphaLuxs, Param::TauA, Param::TauDelta, Param::Gamma];

    pub fn name(self) -> &'static str {
        match self {
            Param::AlphaLuxs => "alpha_luxs",
            Param::TauA => "tau_a",
            Param::TauDelta => "tau_delta",
            Param::Gamma => "gamma",
        }
    }

    pub fn valid_names() -> String {
        Param::ALL.map(Param::name).join(", ")
    }

    /// `cfg` with this parameter multiplied by `factor`.
    pub fn scaled(self, cfg: &SimConfig, factor: f64) -> SimConfig {
        let mut c = cfg.clone();
        match self {
            Param::AlphaLuxs => {
                for p in c.species.iter_mut() {
                    p.alpha_luxs *= factor;
                }
            }
            Param::TauA => {
                c.env.k_out /= factor;
                c.env.mu_gut /= factor;
            }
            Param::TauDelta => {
                for p in c.species.iter_mut() {
                    p.delta /= factor;
                }
            }
            Param::Gamma => {
                c.inert.gamma = if c.inert.gamma == 0.0 {
                    factor - 1.0
                } else {
                    c.inert.gamma * factor
                };
            }
        }
        c
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Param::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                Error::invalid(
                    "params",
                    format!("unknown parameter `{s}`; valid names: {}", Param::valid_names()),
                )
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticityReport {
    pub param: String,
    pub epsilon: f64,
    #[serde(rename = "I0")]
    pub i0: f64,
    #[serde(rename = "I_plus")]
    pub i_plus: f64,
    #[serde(rename = "I_minus")]
    pub i_minus: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub seeds: Vec<u64>,
    pub k: usize,
    pub burn_in_frac: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityOptions {
    pub k: usize,
    pub burn_in_frac: f64,
    /// Smallest admissible `I₀` in bits.
    pub min_i0: f64,
}

impl Default for SensitivityOptions {
    fn default() -> Self {
        SensitivityOptions {
            k: DEFAULT_K,
            burn_in_frac: 0.1,
            min_i0: 0.1,
        }
    }
}

/// Mean of `I(a; m̄_B)` and `I(a; m̄_F)` after the burn-in, for one seed.
pub fn average_mi(cfg: &SimConfig, opts: &SensitivityOptions) -> Result<f64> {
    let tr = simulate(cfg)?;
    let start = burn_in_start(tr.len(), opts.burn_in_frac);
    let mut total = 0.0;
    for id in SpeciesId::ALL {
        let pairs = SamplePairs::new(tr.a[start..].to_vec(), tr.m_mean(id)[start..].to_vec())?;
        total += ksg_mi(&pairs, opts.k)?;
    }
    Ok(total / 2.0)
}

/// `S = (I₊ − I₋)/(2 ε I₀)` with `I` averaged over species and `seeds`.
pub fn elasticity(cfg: &SimConfig, param: Param, epsilon: f64, seeds: &[u64]) -> Result<ElasticityReport> {
    elasticity_with(cfg, param, epsilon, seeds, &SensitivityOptions::default())
}

pub fn elasticity_with(
    cfg: &SimConfig,
    param: Param,
    epsilon: f64,
    seeds: &[u64],
    opts: &SensitivityOptions,
) -> Result<ElasticityReport> {
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(Error::invalid(
            "epsilon",
            format!("must be in (0, 0.5] (got {epsilon})"),
        ));
    }
    if seeds.is_empty() {
        return Err(Error::invalid("seeds", "need at least one seed"));
    }
    cfg.validate()?;
    let conditions = [
        cfg.clone(),
        param.scaled(cfg, 1.0 + epsilon),
        param.scaled(cfg, 1.0 - epsilon),
    ];
    let jobs: Vec<(usize, u64)> = (0..3)
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let values: Vec<f64> = jobs
        .par_iter()
        .map(|&(c, s)| average_mi(&conditions[c].clone().with_seed(s), opts))
        .collect::<Result<_>>()?;
    let n = seeds.len();
    let mean_of = |c: usize| values[c * n..(c + 1) * n].iter().sum::<f64>() / n as f64;
    let (i0, i_plus, i_minus) = (mean_of(0), mean_of(1), mean_of(2));
    if !(i0 >= opts.min_i0) {
        return Err(Error::IllConditioned(format!(
            "baseline MI {i0:.4} bits is below {} bits",
            opts.min_i0
        )));
    }
    Ok(ElasticityReport {
        param: param.name().to_string(),
        epsilon,
        i0,
        i_plus,
        i_minus,
        s: (i_plus - i_minus) / (2.0 * epsilon * i0),
        seeds: seeds.to_vec(),
        k: opts.k,
        burn_in_frac: opts.burn_in_frac,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parse_names() {
        for p in Param::ALL {
            assert_eq!(p.name().parse::<Param>().unwrap(), p);
        }
        let err = "tau_b".parse::<Param>().unwrap_err().to_string();
        assert!(err.contains("alpha_luxs") && err.contains("tau_delta"));
    }

    #[test]
    fn scaling_rules() {
        let cfg = SimConfig::baseline();
        let up = Param::TauA.scaled(&cfg, 1.2);
        assert_relative_eq!(up.ai_time_constant(), 12.0, max_relative = 1e-12);
        let up = Param::TauDelta.scaled(&cfg, 1.2);
        for p in &up.species {
            assert_relative_eq!(1.0 / p.delta, 1800.0 * 1.2, max_relative = 1e-12);
        }
        let up = Param::AlphaLuxs.scaled(&cfg, 0.8);
        assert_relative_eq!(up.species[1].alpha_luxs, 0.04, max_relative = 1e-12);
        let up = Param::Gamma.scaled(&cfg, 1.2);
        assert!(up.inert.gamma != cfg.inert.gamma);
    }

    fn short() -> SimConfig {
        let mut cfg = SimConfig::baseline();
        cfg.species[0].n_cells = 10;
        cfg.species[1].n_cells = 10;
        cfg
    }

    #[test]
    fn unused_parameter_has_zero_elasticity() {
        let r = elasticity(&short(), Param::Gamma, 0.2, &[0]).unwrap();
        assert_eq!(r.i_plus, r.i_minus);
        assert_eq!(r.s, 0.0);
    }

    #[test]
    fn epsilon_range() {
        assert!(elasticity(&short(), Param::TauA, 0.0, &[0]).is_err());
        assert!(elasticity(&short(), Param::TauA, 0.6, &[0]).is_err());
        assert!(elasticity(&short(), Param::TauA, 0.2, &[]).is_err());
    }

    #[test]
    fn low_baseline_mi_aborts() {
        let opts = SensitivityOptions {
            min_i0: 1e3,
            ..SensitivityOptions::default()
        };
        let r = elasticity_with(&short(), Param::TauA, 0.2, &[0], &opts);
        assert!(matches!(r, Err(Error::IllConditioned(_))), "{r:?}");
    }
}
