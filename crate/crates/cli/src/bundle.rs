//! `results.json`.

use quorum_core::freq::BodePoint;
use quorum_core::model::SimConfig;
use quorum_core::sensitivity::ElasticityReport;
use serde::{Deserialize, Serialize};

use crate::analysis::{AnalysisSettings, CrossTable, MiTable, NoiseTable, TeTable, TrajectorySummary};
use crate::io::{Provenance, RESULTS_SCHEMA_VERSION};
use crate::scenario::ScenarioSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodeSettings {
    pub freq_min: f64,
    pub freq_max: f64,
    pub freq_points: usize,
    pub n_cycles: usize,
    pub amplitude: f64,
    pub replicates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySettings {
    pub epsilon: f64,
    pub seeds: Vec<u64>,
    pub k: usize,
    pub burn_in_frac: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsBundle {
    pub schema_version: u32,
    pub command: String,
    pub scenario: Option<ScenarioSpec>,
    pub provenance: Provenance,
    pub analysis_settings: Option<AnalysisSettings>,
    pub summaries: Vec<TrajectorySummary>,
    pub mi: Option<MiTable>,
    pub cross: Option<CrossTable>,
    pub te: Option<TeTable>,
    pub noise: Option<NoiseTable>,
    pub bode_settings: Option<BodeSettings>,
    pub bode: Option<Vec<BodePoint>>,
    pub sensitivity_settings: Option<SensitivitySettings>,
    pub sensitivity: Option<Vec<ElasticityReport>>,
    pub config: SimConfig,
}

impl ResultsBundle {
    pub fn new(command: &str, cfg: &SimConfig, replicates: usize) -> Self {
        ResultsBundle {
            schema_version: RESULTS_SCHEMA_VERSION,
            command: command.to_string(),
            scenario: None,
            provenance: Provenance::new(cfg, replicates),
            analysis_settings: None,
            summaries: Vec::new(),
            mi: None,
            cross: None,
            te: None,
            noise: None,
            bode_settings: None,
            bode: None,
            sensitivity_settings: None,
            sensitivity: None,
            config: cfg.clone(),
        }
    }
}
