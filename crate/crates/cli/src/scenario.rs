//! Named community compositions.

use std::fmt;
use std::str::FromStr;

use quorum_core::model::{SimConfig, SpeciesId};
use serde::{Deserialize, Serialize};

use crate::config::apply_override;
use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    Baseline,
    FirmicutesDominant,
    BacteroidetesDominant,
    Custom,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 4] = [
        ScenarioName::Baseline,
        ScenarioName::FirmicutesDominant,
        ScenarioName::BacteroidetesDominant,
        ScenarioName::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::Baseline => "baseline",
            ScenarioName::FirmicutesDominant => "firmicutes_dominant",
            ScenarioName::BacteroidetesDominant => "bacteroidetes_dominant",
            ScenarioName::Custom => "custom",
        }
    }

    /// Final `(ρ_F, ρ_B)`; `None` for `custom`.
    pub fn split(self) -> Option<(f64, f64)> {
        match self {
            ScenarioName::Baseline => Some((0.7, 0.3)),
            ScenarioName::FirmicutesDominant => Some((0.9, 0.1)),
            ScenarioName::BacteroidetesDominant => Some((0.4, 0.6)),
            ScenarioName::Custom => None,
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        ScenarioName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = ScenarioName::ALL.iter().map(|n| n.as_str()).collect();
                CliError::Config(format!("unknown scenario `{s}`; valid names: {}", names.join(", ")))
            })
    }
}

/// A composition plus config overrides (`dotted.key`, TOML literal).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: ScenarioName,
    /// Final densities `(ρ_F, ρ_B)`.
    pub fb_split: (f64, f64),
    pub overrides: Vec<(String, String)>,
}

impl ScenarioSpec {
    pub fn named(name: ScenarioName) -> CliResult<Self> {
        let fb_split = name
            .split()
            .ok_or_else(|| CliError::Config("scenario `custom` needs an explicit --split F,B".into()))?;
        Ok(ScenarioSpec {
            name,
            fb_split,
            overrides: Vec::new(),
        })
    }

    pub fn custom(fb_split: (f64, f64)) -> CliResult<Self> {
        let (f, b) = fb_split;
        if !(f > 0.0 && b > 0.0 && f.is_finite() && b.is_finite()) {
            return Err(CliError::Config(format!("split: both densities must be positive (got {f}, {b})")));
        }
        Ok(ScenarioSpec {
            name: ScenarioName::Custom,
            fb_split,
            overrides: Vec::new(),
        })
    }

    /// Applies the overrides to `base`, then rescales both density schedules so their
    /// final values equal the split. Cells are reallocated in proportion to the split,
    /// keeping the total, unless the split already matches the config.
    pub fn apply(&self, base: &SimConfig) -> CliResult<SimConfig> {
        let mut cfg = base.clone();
        for (k, v) in &self.overrides {
            cfg = apply_override(&cfg, k, v)?;
        }
        let (f, b) = self.fb_split;
        let target = [b, f];
        let current = SpeciesId::ALL.map(|id| cfg.species(id).density_schedule.at(f64::INFINITY));
        let unchanged = (0..2).all(|s| (current[s] - target[s]).abs() <= 1e-12 * target[s].max(1.0));
        if unchanged {
            return Ok(cfg);
        }
        for s in 0..2 {
            if !(current[s] > 0.0) {
                return Err(CliError::Config(format!(
                    "species[{s}].density_schedule: final density must be positive to rescale"
                )));
            }
            cfg.species[s].density_schedule = cfg.species[s].density_schedule.scaled(target[s] / current[s]);
        }
        let total = cfg.total_cells();
        let n_f = ((total as f64 * f / (f + b)).round() as usize).clamp(1, total.saturating_sub(1).max(1));
        cfg.species[SpeciesId::Firmicutes.index()].n_cells = n_f;
        cfg.species[SpeciesId::Bacteroidetes.index()].n_cells = total - n_f;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn splits() {
        assert_eq!(ScenarioName::Baseline.split(), Some((0.7, 0.3)));
        assert_eq!(ScenarioName::FirmicutesDominant.split(), Some((0.9, 0.1)));
        assert_eq!(ScenarioName::BacteroidetesDominant.split(), Some((0.4, 0.6)));
        assert!(ScenarioSpec::named(ScenarioName::Custom).is_err());
        assert!(ScenarioSpec::custom((0.5, 0.0)).is_err());
    }

    #[test]
    fn baseline_keeps_the_config() {
        let base = SimConfig::baseline();
        let spec = ScenarioSpec::named(ScenarioName::Baseline).unwrap();
        assert_eq!(spec.apply(&base).unwrap(), base);
    }

    #[test]
    fn dominant_split_rescales_and_reallocates() {
        let base = SimConfig::baseline();
        let cfg = ScenarioSpec::named(ScenarioName::FirmicutesDominant)
            .unwrap()
            .apply(&base)
            .unwrap();
        assert_relative_eq!(cfg.density(SpeciesId::Firmicutes, 1800.0), 0.9, max_relative = 1e-12);
        assert_relative_eq!(cfg.density(SpeciesId::Bacteroidetes, 1800.0), 0.1, max_relative = 1e-12);
        let ratio0 = cfg.density(SpeciesId::Firmicutes, 0.0) / cfg.density(SpeciesId::Bacteroidetes, 0.0);
        assert_relative_eq!(ratio0, 9.0, max_relative = 1e-12);
        assert_eq!(cfg.species[1].n_cells, 180);
        assert_eq!(cfg.species[0].n_cells, 20);
    }

    #[test]
    fn names_round_trip() {
        for n in ScenarioName::ALL {
            assert_eq!(n.as_str().parse::<ScenarioName>().unwrap(), n);
        }
        let err = "bdom".parse::<ScenarioName>().unwrap_err().to_string();
        assert!(err.contains("bacteroidetes_dominant"));
    }
}
