//! Tables built from replicate trajectories.

use std::fmt;
use std::str::FromStr;

use quorum_core::info::{
    burn_in_start, ksg_mi, mi_estimate, noise_decomposition_tail, pooled_single_cell_pairs, transfer_entropy,
    MIEstimate, MiSettings, NoiseSplit, SamplePairs, DEFAULT_K, DEFAULT_TAIL_FRAC,
};
use quorum_core::model::{SpeciesId, Trajectory};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Mi,
    Cross,
    Te,
    Noise,
}

impl Analysis {
    pub const ALL: [Analysis; 4] = [Analysis::Mi, Analysis::Cross, Analysis::Te, Analysis::Noise];

    pub fn as_str(self) -> &'static str {
        match self {
            Analysis::Mi => "mi",
            Analysis::Cross => "cross",
            Analysis::Te => "te",
            Analysis::Noise => "noise",
        }
    }

    /// Whether the analysis reads per-cell trajectories.
    pub fn needs_cells(self) -> bool {
        matches!(self, Analysis::Mi | Analysis::Noise)
    }

    /// Parses a comma-separated list; duplicates collapse, order is canonical.
    pub fn parse_list(s: &str) -> CliResult<Vec<Analysis>> {
        let mut out: Vec<Analysis> = s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(str::parse)
            .collect::<CliResult<_>>()?;
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(CliError::Config("analyses: the list is empty".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Analysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Analysis {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Analysis::ALL.into_iter().find(|a| a.as_str() == s).ok_or_else(|| {
            CliError::Config(format!("analyses: unknown analysis `{s}`; valid names: mi, cross, te, noise"))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSettings {
    pub k: usize,
    pub burn_in_frac: f64,
    pub n_boot: usize,
    pub alpha: f64,
    /// Cap on pooled single-cell pairs per replicate.
    pub max_pairs: usize,
    pub te_lag: usize,
    pub noise_tail_frac: f64,
    pub seed: u64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            k: DEFAULT_K,
            burn_in_frac: 0.1,
            n_boot: 200,
            alpha: 0.05,
            max_pairs: 20_000,
            te_lag: 1,
            noise_tail_frac: DEFAULT_TAIL_FRAC,
            seed: 0,
        }
    }
}

impl AnalysisSettings {
    fn mi_settings(&self) -> MiSettings {
        MiSettings {
            k: self.k,
            n_boot: self.n_boot,
            alpha: self.alpha,
            block_len: None,
            seed: self.seed,
        }
    }
}

/// One MI quantity: interval from replicate 0 and point values for every replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiEntry {
    pub label: String,
    pub estimate: MIEstimate,
    pub replicate_bits: Vec<f64>,
    pub mean_bits: f64,
}

/// `I(a; m̄)` and pooled single-cell `I(a; m)`, each `[Bacteroidetes, Firmicutes]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiTable {
    pub averaged: [MiEntry; 2],
    pub single_cell: [MiEntry; 2],
}

/// Cross-species `I[m̄_i; ρ_j]`; population 1 is Firmicutes, population 2 Bacteroidetes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossTable {
    /// `I[m̄₁; ρ₂]`.
    pub m1_rho2: MiEntry,
    /// `I[m̄₂; ρ₁]`.
    pub m2_rho1: MiEntry,
    /// Replicate mean of `I[m̄₁; ρ₂] − I[m̄₂; ρ₁]`.
    pub asymmetry_bits: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TeEntry {
    pub label: String,
    pub replicate_bits: Vec<f64>,
    pub replicate_raw_bits: Vec<f64>,
    pub mean_bits: f64,
}

/// Transfer entropy between the increments of the two cell-mean series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TeTable {
    pub lag: usize,
    pub k: usize,
    /// `TE(pop1 → pop2)`, Firmicutes to Bacteroidetes.
    pub p1_to_p2: TeEntry,
    /// `TE(pop2 → pop1)`.
    pub p2_to_p1: TeEntry,
    /// `mean TE(1→2) − mean TE(2→1)`.
    pub asymmetry_bits: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseTable {
    pub tail_frac: f64,
    pub replicates: usize,
    /// `[Bacteroidetes, Firmicutes]`.
    pub split: [NoiseSplit; 2],
}

fn tail<'a>(v: &'a [f64], s: &AnalysisSettings) -> &'a [f64] {
    &v[burn_in_start(v.len(), s.burn_in_frac)..]
}

fn entry<F>(reps: &[Trajectory], label: String, s: &AnalysisSettings, pairs: F) -> CliResult<MiEntry>
where
    F: Fn(&Trajectory) -> quorum_core::Result<SamplePairs> + Sync,
{
    let first = pairs(&reps[0])?;
    let estimate = mi_estimate(&first, &s.mi_settings())?;
    let mut replicate_bits = vec![estimate.bits];
    let rest: Vec<f64> = reps[1..]
        .par_iter()
        .map(|tr| pairs(tr).and_then(|p| ksg_mi(&p, s.k)))
        .collect::<quorum_core::Result<_>>()?;
    replicate_bits.extend(rest);
    let mean_bits = replicate_bits.iter().sum::<f64>() / replicate_bits.len() as f64;
    Ok(MiEntry {
        label,
        estimate,
        replicate_bits,
        mean_bits,
    })
}

fn require_reps(reps: &[Trajectory]) -> CliResult<()> {
    if reps.is_empty() {
        return Err(CliError::Config("replicates: need at least one trajectory".into()));
    }
    Ok(())
}

fn require_cells(reps: &[Trajectory], what: Analysis) -> CliResult<()> {
    for id in SpeciesId::ALL {
        if reps.iter().any(|tr| tr.cells(id).n_cells() == 0) {
            return Err(CliError::Io(format!(
                "analysis `{what}` needs the per-cell matrix of {} (cells_{}.csv), which is absent",
                id.label(),
                id.tag()
            )));
        }
    }
    Ok(())
}

pub fn mi_table(reps: &[Trajectory], s: &AnalysisSettings) -> CliResult<MiTable> {
    require_reps(reps)?;
    require_cells(reps, Analysis::Mi)?;
    let averaged = SpeciesId::ALL.map(|id| {
        entry(reps, format!("I(a; m_mean_{})", id.tag()), s, |tr| {
            SamplePairs::new(tail(&tr.a, s).to_vec(), tail(tr.m_mean(id), s).to_vec())
        })
    });
    let single_cell = SpeciesId::ALL.map(|id| {
        entry(reps, format!("I(a; m_{}) pooled over cells", id.tag()), s, |tr| {
            pooled_single_cell_pairs(tr, id, s.burn_in_frac, s.max_pairs, s.seed)
        })
    });
    let [a0, a1] = averaged;
    let [s0, s1] = single_cell;
    Ok(MiTable {
        averaged: [a0?, a1?],
        single_cell: [s0?, s1?],
    })
}

pub fn cross_table(reps: &[Trajectory], s: &AnalysisSettings) -> CliResult<CrossTable> {
    require_reps(reps)?;
    let (p1, p2) = (SpeciesId::Firmicutes, SpeciesId::Bacteroidetes);
    let cross = |m: SpeciesId, r: SpeciesId| {
        entry(reps, format!("I(m_mean_{}; rho_{})", m.tag(), r.tag()), s, move |tr| {
            SamplePairs::new(tail(tr.m_mean(m), s).to_vec(), tail(tr.rho(r), s).to_vec())
        })
    };
    let m1_rho2 = cross(p1, p2)?;
    let m2_rho1 = cross(p2, p1)?;
    let asymmetry_bits = m1_rho2.mean_bits - m2_rho1.mean_bits;
    Ok(CrossTable {
        m1_rho2,
        m2_rho1,
        asymmetry_bits,
    })
}

fn increments(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| w[1] - w[0]).collect()
}

pub fn te_table(reps: &[Trajectory], s: &AnalysisSettings) -> CliResult<TeTable> {
    require_reps(reps)?;
    let (p1, p2) = (SpeciesId::Firmicutes, SpeciesId::Bacteroidetes);
    let per_rep: Vec<[(f64, f64); 2]> = reps
        .par_iter()
        .map(|tr| {
            let d1 = increments(tail(tr.m_mean(p1), s));
            let d2 = increments(tail(tr.m_mean(p2), s));
            let fwd = transfer_entropy(&d1, &d2, s.te_lag, s.k)?;
            let back = transfer_entropy(&d2, &d1, s.te_lag, s.k)?;
            Ok([(fwd.bits, fwd.raw_bits), (back.bits, back.raw_bits)])
        })
        .collect::<quorum_core::Result<_>>()?;
    let make = |i: usize, label: &str| {
        let replicate_bits: Vec<f64> = per_rep.iter().map(|r| r[i].0).collect();
        let replicate_raw_bits = per_rep.iter().map(|r| r[i].1).collect();
        let mean_bits = replicate_bits.iter().sum::<f64>() / replicate_bits.len() as f64;
        TeEntry {
            label: label.to_string(),
            replicate_bits,
            replicate_raw_bits,
            mean_bits,
        }
    };
    let p1_to_p2 = make(0, "TE(dm_mean_F -> dm_mean_B)");
    let p2_to_p1 = make(1, "TE(dm_mean_B -> dm_mean_F)");
    let asymmetry_bits = p1_to_p2.mean_bits - p2_to_p1.mean_bits;
    Ok(TeTable {
        lag: s.te_lag,
        k: s.k,
        p1_to_p2,
        p2_to_p1,
        asymmetry_bits,
    })
}

pub fn noise_table(reps: &[Trajectory], s: &AnalysisSettings) -> CliResult<NoiseTable> {
    require_reps(reps)?;
    require_cells(reps, Analysis::Noise)?;
    let [b, f] = SpeciesId::ALL.map(|id| noise_decomposition_tail(reps, id, s.noise_tail_frac));
    Ok(NoiseTable {
        tail_frac: s.noise_tail_frac,
        replicates: reps.len(),
        split: [b?, f?],
    })
}

/// Per-replicate landmarks of the autoinducer and monitor series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub n_records: usize,
    pub a_final: f64,
    /// Largest `a` over the first quarter of the records.
    pub a_max_first_quarter: f64,
    /// First recorded time with `a ≥ 0.05 · a_final`.
    pub t_threshold: Option<f64>,
    /// `[Bacteroidetes, Firmicutes]`.
    pub m_mean_final: [f64; 2],
}

pub fn summarize(tr: &Trajectory) -> TrajectorySummary {
    let n = tr.len();
    let a_final = tr.a[n - 1];
    let a_max_first_quarter = tr.a[..n.div_ceil(4).max(1)].iter().copied().fold(0.0, f64::max);
    let t_threshold = tr
        .a
        .iter()
        .position(|&a| a >= 0.05 * a_final)
        .map(|i| tr.times[i]);
    TrajectorySummary {
        n_records: n,
        a_final,
        a_max_first_quarter,
        t_threshold,
        m_mean_final: SpeciesId::ALL.map(|id| tr.m_mean(id)[n - 1]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analysis_lists() {
        assert_eq!(
            Analysis::parse_list("te,mi,te").unwrap(),
            vec![Analysis::Mi, Analysis::Te]
        );
        assert!(Analysis::parse_list("").is_err());
        assert!(Analysis::parse_list(" , ").is_err());
        let err = Analysis::parse_list("mi,entropy").unwrap_err().to_string();
        assert!(err.contains("entropy"));
    }

    #[test]
    fn increments_of_a_ramp() {
        assert_eq!(increments(&[1.0, 3.0, 6.0]), vec![2.0, 3.0]);
    }
}
