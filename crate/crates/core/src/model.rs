//! Domain types and the deterministic parts of the two-species quorum-sensing model.
//!
//! Two populations, Bacteroidetes (`B`, index 0) and Firmicutes (`F`, index 1),
//! share one extracellular autoinducer pool `a(t)`. Each simulated cell carries a
//! monitor-protein level `m` that is driven by a Hill response to `a`.
//!
//! Population densities are prescribed functions of time ([`DensitySchedule`]);
//! they are never integrated.
//!
//! Time is in seconds. Densities share the volume unit of [`EnvironmentParams::volume`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which of the two populations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpeciesId {
    Bacteroidetes,
    Firmicutes,
}

impl SpeciesId {
    pub const ALL: [SpeciesId; 2] = [SpeciesId::Bacteroidetes, SpeciesId::Firmicutes];

    /// Position in every `[_; 2]` per-species array.
    pub const fn index(self) -> usize {
        match self {
            SpeciesId::Bacteroidetes => 0,
            SpeciesId::Firmicutes => 1,
        }
    }

    /// One-letter tag used in file columns (`rho_B`, `m_mean_F`, ...).
    pub const fn tag(self) -> &'static str {
        match self {
            SpeciesId::Bacteroidetes => "B",
            SpeciesId::Firmicutes => "F",
        }
    }

    pub const fn label(self) -> &'static str {
        match self {
            SpeciesId::Bacteroidetes => "Bacteroidetes",
            SpeciesId::Firmicutes => "Firmicutes",
        }
    }

    pub const fn other(self) -> SpeciesId {
        match self {
            SpeciesId::Bacteroidetes => SpeciesId::Firmicutes,
            SpeciesId::Firmicutes => SpeciesId::Bacteroidetes,
        }
    }
}

/// Prescribed population density as a function of time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySchedule {
    /// `rho_minus * (rho_plus / rho_minus)^(t / duration)`, held at `rho_plus` after `duration`.
    ExpRamp {
        rho_minus: f64,
        rho_plus: f64,
        duration: f64,
    },
    /// Jumps from `rho_before` to `rho_after` at `t_switch`.
    Step {
        rho_before: f64,
        rho_after: f64,
        t_switch: f64,
    },
    /// Logistic transition between `rho_minus` and `rho_plus` centred at `midpoint`.
    Logistic {
        rho_minus: f64,
        rho_plus: f64,
        midpoint: f64,
        steepness: f64,
    },
    /// `(t, rho)` knots, interpolated linearly in log-density and held flat outside.
    Piecewise { knots: Vec<[f64; 2]> },
    /// Fixed density; used for frozen operating points.
    Constant { rho: f64 },
}

impl DensitySchedule {
    pub fn validate(&self, field: &str) -> Result<()> {
        let positive = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(
                    format!("{field}.{name}"),
                    format!("must be a finite density > 0 (got {v})"),
                ))
            }
        };
        match self {
            DensitySchedule::ExpRamp {
                rho_minus,
                rho_plus,
                duration,
            } => {
                positive("rho_minus", *rho_minus)?;
                positive("rho_plus", *rho_plus)?;
                if !(duration.is_finite() && *duration > 0.0) {
                    return Err(Error::invalid(
                        format!("{field}.duration"),
                        format!("must be > 0 (got {duration})"),
                    ));
                }
            }
            DensitySchedule::Step {
                rho_before,
                rho_after,
                t_switch,
            } => {
                positive("rho_before", *rho_before)?;
                positive("rho_after", *rho_after)?;
                if !t_switch.is_finite() {
                    return Err(Error::invalid(format!("{field}.t_switch"), "must be finite"));
                }
            }
            DensitySchedule::Logistic {
                rho_minus,
                rho_plus,
                midpoint,
                steepness,
            } => {
                positive("rho_minus", *rho_minus)?;
                positive("rho_plus", *rho_plus)?;
                if !midpoint.is_finite() {
                    return Err(Error::invalid(format!("{field}.midpoint"), "must be finite"));
                }
                if !(steepness.is_finite() && *steepness > 0.0) {
                    return Err(Error::invalid(
                        format!("{field}.steepness"),
                        format!("must be > 0 (got {steepness})"),
                    ));
                }
            }
            DensitySchedule::Piecewise { knots } => {
                if knots.is_empty() {
                    return Err(Error::invalid(
                        format!("{field}.knots"),
                        "needs at least one knot",
                    ));
                }
                for (i, [t, rho]) in knots.iter().enumerate() {
                    if !t.is_finite() {
                        return Err(Error::invalid(
                            format!("{field}.knots[{i}]"),
                            "time must be finite",
                        ));
                    }
                    positive(&format!("knots[{i}]"), *rho)?;
                }
                if knots.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err(Error::invalid(
                        format!("{field}.knots"),
                        "knot times must be strictly increasing",
                    ));
                }
            }
            DensitySchedule::Constant { rho } => positive("rho", *rho)?,
        }
        Ok(())
    }

    /// Density at time `t`. See [`density_at`].
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            DensitySchedule::ExpRamp {
                rho_minus,
                rho_plus,
                duration,
            } => {
                let frac = (t / duration).clamp(0.0, 1.0);
                if frac >= 1.0 {
                    rho_plus
                } else {
                    rho_minus * (frac * (rho_plus / rho_minus).ln()).exp()
                }
            }
            DensitySchedule::Step {
                rho_before,
                rho_after,
                t_switch,
            } => {
                if t < t_switch {
                    rho_before
                } else {
                    rho_after
                }
            }
            DensitySchedule::Logistic {
                rho_minus,
                rho_plus,
                midpoint,
                steepness,
            } => rho_minus + (rho_plus - rho_minus) / (1.0 + (-steepness * (t - midpoint)).exp()),
            DensitySchedule::Piecewise { ref knots } => {
                let first = knots[0];
                let last = knots[knots.len() - 1];
                if t <= first[0] {
                    return first[1];
                }
                if t >= last[0] {
                    return last[1];
                }
                // first knot with time > t; guaranteed in 1..len
                let hi = knots.partition_point(|k| k[0] <= t);
                let [t0, r0] = knots[hi - 1];
                let [t1, r1] = knots[hi];
                let w = (t - t0) / (t1 - t0);
                (r0.ln() + w * (r1.ln() - r0.ln())).exp()
            }
            DensitySchedule::Constant { rho } => rho,
        }
    }

    /// The same schedule with every density multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> DensitySchedule {
        match self.clone() {
            DensitySchedule::ExpRamp {
                rho_minus,
                rho_plus,
                duration,
            } => DensitySchedule::ExpRamp {
                rho_minus: rho_minus * factor,
                rho_plus: rho_plus * factor,
                duration,
            },
            DensitySchedule::Step {
                rho_before,
                rho_after,
                t_switch,
            } => DensitySchedule::Step {
                rho_before: rho_before * factor,
                rho_after: rho_after * factor,
                t_switch,
            },
            DensitySchedule::Logistic {
                rho_minus,
                rho_plus,
                midpoint,
                steepness,
            } => DensitySchedule::Logistic {
                rho_minus: rho_minus * factor,
                rho_plus: rho_plus * factor,
                midpoint,
                steepness,
            },
            DensitySchedule::Piecewise { knots } => DensitySchedule::Piecewise {
                knots: knots.into_iter().map(|[t, r]| [t, r * factor]).collect(),
            },
            DensitySchedule::Constant { rho } => DensitySchedule::Constant { rho: rho * factor },
        }
    }
}

/// Prescribed density `ρ(t)`; `t ≥ 0`.
pub fn density_at(schedule: &DensitySchedule, t: f64) -> f64 {
    schedule.at(t)
}

/// Shape of the AI-dependent production term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    /// `k_resp · aⁿ / (K_Aⁿ + aⁿ)`.
    #[default]
    Hill,
    /// `k_resp · a`. Only meant for linear-response checks.
    Linear,
}

/// Rate constants and noise amplitude of one population.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesParams {
    pub name: String,
    /// Basal monitor-protein degradation rate (1/s).
    pub delta: f64,
    /// Growth-dilution coefficient: dilution rate = `mu_g_coeff · (ρ_B + ρ_F)`.
    pub mu_g_coeff: f64,
    /// Maximum monitor-protein synthesis rate.
    pub k_resp: f64,
    /// Half-saturation autoinducer concentration.
    #[serde(rename = "K_A")]
    pub k_a: f64,
    /// Hill coefficient.
    pub n: f64,
    /// Constant per-cell autoinducer secretion rate.
    pub alpha_luxs: f64,
    /// Intrinsic noise amplitude; the per-step increment is `sqrt(2 σ_m dt) ξ`.
    pub sigma_m: f64,
    /// Production scaling factor.
    pub mu_scale: f64,
    pub n_cells: usize,
    #[serde(default)]
    pub response: Response,
    pub density_schedule: DensitySchedule,
}

impl SpeciesParams {
    pub fn validate(&self, field: &str) -> Result<()> {
        let check = |name: &str, ok: bool, rule: &str, v: f64| -> Result<()> {
            if ok && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(
                    format!("{field}.{name}"),
                    format!("must be {rule} (got {v})"),
                ))
            }
        };
        check("delta", self.delta > 0.0, "> 0", self.delta)?;
        check("mu_g_coeff", self.mu_g_coeff >= 0.0, ">= 0", self.mu_g_coeff)?;
        check("k_resp", self.k_resp >= 0.0, ">= 0", self.k_resp)?;
        check("K_A", self.k_a > 0.0, "> 0", self.k_a)?;
        check("n", self.n >= 1.0, ">= 1", self.n)?;
        check("alpha_luxs", self.alpha_luxs >= 0.0, ">= 0", self.alpha_luxs)?;
        check("sigma_m", self.sigma_m >= 0.0, ">= 0", self.sigma_m)?;
        check("mu_scale", self.mu_scale >= 0.0, ">= 0", self.mu_scale)?;
        if self.n_cells < 1 {
            return Err(Error::invalid(format!("{field}.n_cells"), "must be >= 1 (got 0)"));
        }
        self.density_schedule
            .validate(&format!("{field}.density_schedule"))
    }

    /// Production scaling `μ(ρ_B, ρ_F)`. Currently density independent.
    pub fn production_scale(&self, _rho_b: f64, _rho_f: f64) -> f64 {
        self.mu_scale
    }

    /// Per-cell AI secretion as a function of the cell's monitor level.
    pub fn secretion_rate(&self, _m: f64) -> f64 {
        self.alpha_luxs
    }

    /// Mean secretion over a population with monitor levels `cells`.
    pub fn mean_secretion(&self, _cells: &[f64]) -> f64 {
        self.alpha_luxs
    }

    /// AI-dependent production rate, before `mu_scale`.
    pub fn activation(&self, a: f64) -> f64 {
        match self.response {
            Response::Hill => hill_activation(a, self),
            Response::Linear => self.k_resp * a,
        }
    }

    /// `1 / (δ + mu_g_coeff · ρ_total)`.
    pub fn monitor_time_constant(&self, rho_total: f64) -> f64 {
        monitor_time_constant(self, rho_total)
    }
}

/// Saturating activation `k_resp · aⁿ / (K_Aⁿ + aⁿ)`, in `[0, k_resp]`.
pub fn hill_activation(a: f64, p: &SpeciesParams) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let x = a / p.k_a;
    let r = if p.n == p.n.trunc() && p.n <= 64.0 {
        x.powi(p.n as i32)
    } else {
        x.powf(p.n)
    };
    if r.is_infinite() {
        return p.k_resp;
    }
    p.k_resp * r / (1.0 + r)
}

pub fn monitor_time_constant(p: &SpeciesParams, rho_total: f64) -> f64 {
    1.0 / (p.delta + p.mu_g_coeff * rho_total)
}

/// Shared extracellular environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentParams {
    /// Environmental AI loss rate (1/s).
    pub k_out: f64,
    /// Gut clearance rate (1/s).
    pub mu_gut: f64,
    /// Extrinsic noise amplitude.
    pub sigma_a: f64,
    /// System volume.
    pub volume: f64,
}

impl EnvironmentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_out.is_finite() && self.mu_gut.is_finite()) {
            return Err(Error::invalid("env.k_out", "k_out and mu_gut must be finite"));
        }
        if self.k_out + self.mu_gut <= 0.0 {
            return Err(Error::invalid(
                "env.k_out",
                format!(
                    "k_out + mu_gut must be > 0, otherwise the AI never decays (got {})",
                    self.k_out + self.mu_gut
                ),
            ));
        }
        if !(self.sigma_a.is_finite() && self.sigma_a >= 0.0) {
            return Err(Error::invalid(
                "env.sigma_a",
                format!("must be >= 0 (got {})", self.sigma_a),
            ));
        }
        if !(self.volume.is_finite() && self.volume > 0.0) {
            return Err(Error::invalid(
                "env.volume",
                format!("must be > 0 (got {})", self.volume),
            ));
        }
        Ok(())
    }

    pub fn ai_time_constant(&self) -> f64 {
        ai_time_constant(self)
    }
}

/// `τ_a = 1 / (k_out + μ_gut)`.
pub fn ai_time_constant(env: &EnvironmentParams) -> f64 {
    1.0 / (env.k_out + env.mu_gut)
}

/// Reported settings that no model equation reads. Kept so a config round-trips
/// the full parameter table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InertParams {
    pub gamma: f64,
    pub v_avg: f64,
    pub omega0: f64,
}

impl Default for InertParams {
    fn default() -> Self {
        InertParams {
            gamma: 0.0,
            v_avg: 1.0e-18,
            omega0: 0.1,
        }
    }
}

pub const DEFAULT_MEMORY_CAP: u64 = 4 << 30;

fn default_memory_cap() -> u64 {
    DEFAULT_MEMORY_CAP
}

/// Complete description of one simulation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// `[Bacteroidetes, Firmicutes]`.
    pub species: [SpeciesParams; 2],
    pub env: EnvironmentParams,
    pub dt: f64,
    pub t_max: f64,
    pub record_stride: usize,
    pub seed: u64,
    pub a0: f64,
    pub m0: f64,
    #[serde(default)]
    pub inert: InertParams,
    #[serde(default = "default_memory_cap")]
    pub memory_cap_bytes: u64,
}

const TABLE_RHO_MINUS: f64 = 1.0e-4;
const TABLE_RHO_PLUS: f64 = 1.0;
const TABLE_T_DIV: f64 = 1800.0;
const TABLE_TAU_DELTA: f64 = 1800.0;
const FIRMICUTES_SHARE: f64 = 0.7;
const BACTEROIDETES_SHARE: f64 = 0.3;

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig::baseline()
    }
}

impl SimConfig {
    /// Reference two-species parameter set: F/B = 7/3, 100 cells per species,
    /// `dt = 0.01`, `t_max = 1800`, `τ_a = 10`, `τ_δ = 1800`.
    pub fn baseline() -> Self {
        let ramp = |share: f64| DensitySchedule::ExpRamp {
            rho_minus: TABLE_RHO_MINUS * share,
            rho_plus: TABLE_RHO_PLUS * share,
            duration: TABLE_T_DIV,
        };
        let bacteroidetes = SpeciesParams {
            name: SpeciesId::Bacteroidetes.label().to_string(),
            delta: 1.0 / TABLE_TAU_DELTA,
            mu_g_coeff: 0.8,
            k_resp: 1.0,
            k_a: 0.5,
            n: 2.0,
            alpha_luxs: 0.05,
            sigma_m: 1.6e-4,
            mu_scale: 1.0,
            n_cells: 100,
            response: Response::Hill,
            density_schedule: ramp(BACTEROIDETES_SHARE),
        };
        let firmicutes = SpeciesParams {
            name: SpeciesId::Firmicutes.label().to_string(),
            mu_g_coeff: 1.0,
            k_resp: 2.0,
            sigma_m: 1.0e-3,
            density_schedule: ramp(FIRMICUTES_SHARE),
            ..bacteroidetes.clone()
        };
        SimConfig {
            species: [bacteroidetes, firmicutes],
            env: EnvironmentParams {
                k_out: 0.1,
                mu_gut: 0.0,
                sigma_a: 6.0e-9,
                volume: 1.0e-12,
            },
            dt: 0.01,
            t_max: 1800.0,
            record_stride: 100,
            seed: 0,
            a0: 0.0,
            m0: 0.01,
            inert: InertParams::default(),
            memory_cap_bytes: DEFAULT_MEMORY_CAP,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn species(&self, id: SpeciesId) -> &SpeciesParams {
        &self.species[id.index()]
    }

    pub fn species_mut(&mut self, id: SpeciesId) -> &mut SpeciesParams {
        &mut self.species[id.index()]
    }

    pub fn validate(&self) -> Result<()> {
        for id in SpeciesId::ALL {
            self.species(id)
                .validate(&format!("species[{}]", id.index()))?;
        }
        self.env.validate()?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be > 0 (got {})", self.dt)));
        }
        if !(self.t_max.is_finite() && self.t_max >= 0.0) {
            return Err(Error::invalid(
                "t_max",
                format!("must be >= 0 (got {})", self.t_max),
            ));
        }
        if self.t_max > 0.0 && self.t_max < self.dt * (1.0 - 1e-9) {
            return Err(Error::invalid(
                "t_max",
                format!("must be 0 or >= dt (got {} < {})", self.t_max, self.dt),
            ));
        }
        if self.record_stride < 1 {
            return Err(Error::invalid("record_stride", "must be >= 1 (got 0)"));
        }
        if !(self.a0.is_finite() && self.a0 >= 0.0) {
            return Err(Error::invalid("a0", format!("must be >= 0 (got {})", self.a0)));
        }
        if !(self.m0.is_finite() && self.m0 >= 0.0) {
            return Err(Error::invalid("m0", format!("must be >= 0 (got {})", self.m0)));
        }
        Ok(())
    }

    /// `floor(t_max / dt)`, tolerant of representation error in the ratio.
    pub fn n_steps(&self) -> u64 {
        (self.t_max / self.dt + 1e-9).floor() as u64
    }

    /// Number of recorded samples including the initial state.
    pub fn n_records(&self) -> usize {
        (self.n_steps() / self.record_stride as u64) as usize + 1
    }

    pub fn total_cells(&self) -> usize {
        self.species.iter().map(|s| s.n_cells).sum()
    }

    /// Bytes held by the recorded trajectory.
    pub fn trajectory_bytes(&self) -> u64 {
        let per_sample = 4 + 2 + 2 * self.total_cells() as u64;
        self.n_records() as u64 * per_sample * std::mem::size_of::<f64>() as u64
    }

    pub fn density(&self, id: SpeciesId, t: f64) -> f64 {
        self.species(id).density_schedule.at(t)
    }

    pub fn ai_time_constant(&self) -> f64 {
        self.env.ai_time_constant()
    }
}

/// Per-cell monitor levels of one species, stored time-major.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CellMatrix {
    n_cells: usize,
    data: Vec<f64>,
}

impl CellMatrix {
    pub fn with_capacity(n_cells: usize, n_times: usize) -> Self {
        CellMatrix {
            n_cells,
            data: Vec::with_capacity(n_cells * n_times),
        }
    }

    pub fn from_rows(n_cells: usize, data: Vec<f64>) -> Result<Self> {
        if n_cells == 0 || data.len() % n_cells != 0 {
            return Err(Error::invalid(
                "cells",
                format!("{} values do not form rows of {} cells", data.len(), n_cells),
            ));
        }
        Ok(CellMatrix { n_cells, data })
    }

    pub fn push_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.n_cells);
        self.data.extend_from_slice(row);
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_times(&self) -> usize {
        if self.n_cells == 0 {
            0
        } else {
            self.data.len() / self.n_cells
        }
    }

    /// All cells at sample `t`.
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.n_cells..(t + 1) * self.n_cells]
    }

    pub fn at(&self, t: usize, cell: usize) -> f64 {
        self.data[t * self.n_cells + cell]
    }

    /// Time series of one cell.
    pub fn cell(&self, cell: usize) -> Vec<f64> {
        (0..self.n_times()).map(|t| self.at(t, cell)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Recorded run.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `[ρ_B, ρ_F]` series.
    pub rho: [Vec<f64>; 2],
    pub a: Vec<f64>,
    pub m: [CellMatrix; 2],
    pub m_mean: [Vec<f64>; 2],
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn rho(&self, id: SpeciesId) -> &[f64] {
        &self.rho[id.index()]
    }

    pub fn cells(&self, id: SpeciesId) -> &CellMatrix {
        &self.m[id.index()]
    }

    pub fn m_mean(&self, id: SpeciesId) -> &[f64] {
        &self.m_mean[id.index()]
    }

    /// Checks the shape and sign invariants.
    pub fn check(&self) -> Result<()> {
        let n = self.times.len();
        let lens = [
            self.a.len(),
            self.rho[0].len(),
            self.rho[1].len(),
            self.m_mean[0].len(),
            self.m_mean[1].len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::invalid("trajectory", "series lengths differ"));
        }
        for id in SpeciesId::ALL {
            let cells = self.cells(id);
            if cells.n_times() != n {
                return Err(Error::invalid(
                    format!("trajectory.m[{}]", id.index()),
                    "cell matrix length differs from the time axis",
                ));
            }
        }
        if self.a.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::invalid("trajectory.a", "negative or NaN value"));
        }
        for id in SpeciesId::ALL {
            if self.cells(id).as_slice().iter().any(|&v| !(v >= 0.0)) {
                return Err(Error::invalid(
                    format!("trajectory.m[{}]", id.index()),
                    "negative or NaN value",
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ramp() -> DensitySchedule {
        DensitySchedule::ExpRamp {
            rho_minus: 1e-4,
            rho_plus: 1.0,
            duration: 1800.0,
        }
    }

    fn species() -> SpeciesParams {
        SimConfig::baseline().species[0].clone()
    }

    #[test]
    fn exp_ramp_values() {
        let s = ramp();
        assert_relative_eq!(density_at(&s, 0.0), 1e-4, max_relative = 1e-14);
        assert_relative_eq!(density_at(&s, 1800.0), 1.0, max_relative = 1e-14);
        assert_relative_eq!(density_at(&s, 900.0), 1e-2, max_relative = 1e-12);
        assert_eq!(density_at(&s, 5000.0), 1.0);
    }

    #[test]
    fn exp_ramp_is_log_linear() {
        let s = ramp();
        let (l0, l1, l2) = (s.at(100.0).ln(), s.at(700.0).ln(), s.at(1300.0).ln());
        assert_relative_eq!(l1 - l0, l2 - l1, max_relative = 1e-10);
    }

    #[test]
    fn other_schedules() {
        let step = DensitySchedule::Step {
            rho_before: 0.1,
            rho_after: 0.5,
            t_switch: 10.0,
        };
        assert_eq!(step.at(9.99), 0.1);
        assert_eq!(step.at(10.0), 0.5);

        let logistic = DensitySchedule::Logistic {
            rho_minus: 0.1,
            rho_plus: 0.9,
            midpoint: 50.0,
            steepness: 0.2,
        };
        assert_relative_eq!(logistic.at(50.0), 0.5, max_relative = 1e-14);
        assert!(logistic.at(0.0) < 0.11 && logistic.at(1000.0) > 0.89);

        let pw = DensitySchedule::Piecewise {
            knots: vec![[0.0, 1e-3], [10.0, 1e-1], [20.0, 1e-1]],
        };
        assert_relative_eq!(pw.at(5.0), 1e-2, max_relative = 1e-12);
        assert_eq!(pw.at(-1.0), 1e-3);
        assert_relative_eq!(pw.at(15.0), 1e-1, max_relative = 1e-14);
        assert_eq!(pw.at(99.0), 1e-1);
    }

    #[test]
    fn schedule_validation() {
        let bad = DensitySchedule::Piecewise {
            knots: vec![[0.0, 1.0], [0.0, 2.0]],
        };
        assert!(bad.validate("s").is_err());
        let bad = DensitySchedule::ExpRamp {
            rho_minus: 0.0,
            rho_plus: 1.0,
            duration: 1.0,
        };
        let err = bad.validate("s").unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field == "s.rho_minus"));
        let bad = DensitySchedule::ExpRamp {
            rho_minus: 1.0,
            rho_plus: 1.0,
            duration: 0.0,
        };
        assert!(bad.validate("s").is_err());
    }

    #[test]
    fn hill_values() {
        let mut p = species();
        p.k_resp = 1.0;
        p.k_a = 0.5;
        p.n = 2.0;
        assert_eq!(hill_activation(0.0, &p), 0.0);
        assert_eq!(hill_activation(0.5, &p), 0.5);
        assert_relative_eq!(hill_activation(1.0, &p), 0.8, max_relative = 1e-15);
        p.n = 3.7;
        assert_eq!(hill_activation(0.5, &p), 0.5);
        assert_eq!(hill_activation(f64::MAX, &p), 1.0);
    }

    #[test]
    fn time_constants() {
        let mut p = species();
        p.mu_g_coeff = 0.0;
        p.delta = 1.0 / 1800.0;
        assert_relative_eq!(monitor_time_constant(&p, 1.0), 1800.0, max_relative = 1e-12);
        p.delta = 0.5;
        p.mu_g_coeff = 0.5;
        assert_eq!(monitor_time_constant(&p, 1.0), 1.0);
        p.delta = 1.0 / 1800.0;
        p.mu_g_coeff = 1.0;
        assert_relative_eq!(monitor_time_constant(&p, 1.0), 0.99944, max_relative = 1e-5);

        let env = |k_out, mu_gut| EnvironmentParams {
            k_out,
            mu_gut,
            sigma_a: 0.0,
            volume: 1.0,
        };
        assert_relative_eq!(ai_time_constant(&env(0.1, 0.0)), 10.0, max_relative = 1e-14);
        assert_relative_eq!(ai_time_constant(&env(0.05, 0.05)), 10.0, max_relative = 1e-14);
        assert_eq!(ai_time_constant(&env(1.0, 1.0)), 0.5);
        assert!(env(0.0, 0.0).validate().is_err());
        assert!(env(0.1, -0.1).validate().is_err());
    }

    #[test]
    fn baseline_config_is_valid() {
        let cfg = SimConfig::baseline();
        cfg.validate().unwrap();
        assert_eq!(cfg.n_steps(), 180_000);
        assert_eq!(cfg.n_records(), 1801);
        let ratio = cfg.density(SpeciesId::Firmicutes, 1800.0)
            / cfg.density(SpeciesId::Bacteroidetes, 1800.0);
        assert_relative_eq!(ratio, 7.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn config_validation_names_field() {
        let mut cfg = SimConfig::baseline();
        cfg.dt = 0.0;
        assert!(matches!(cfg.validate(), Err(Error::Validation { ref field, .. }) if field == "dt"));

        let mut cfg = SimConfig::baseline();
        cfg.species[1].n = 0.5;
        assert!(matches!(cfg.validate(), Err(Error::Validation { ref field, .. }) if field == "species[1].n"));

        let mut cfg = SimConfig::baseline();
        cfg.species[0].n_cells = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = SimConfig::baseline();
        cfg.m0 = -1.0;
        assert!(cfg.validate().is_err());

        let mut cfg = SimConfig::baseline();
        cfg.record_stride = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = SimConfig::baseline();
        cfg.t_max = 0.0;
        cfg.validate().unwrap();
        assert_eq!(cfg.n_records(), 1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn hill_strictly_monotone(a in 0.0f64..10.0, da in 1e-6f64..10.0, n in 1.0f64..6.0) {
                let mut p = species();
                p.n = n;
                prop_assert!(hill_activation(a, &p) < hill_activation(a + da, &p));
                let h = hill_activation(a, &p);
                prop_assert!((0.0..=p.k_resp).contains(&h));
            }

            #[test]
            fn hill_saturates(scale in 100.0f64..1e6, n in 2.0f64..8.0) {
                let mut p = species();
                p.n = n;
                prop_assert!(hill_activation(scale * p.k_a, &p) >= 0.9999 * p.k_resp);
            }

            #[test]
            fn tau_m_non_increasing(r in 0.0f64..10.0, dr in 0.0f64..10.0, g in 0.0f64..5.0) {
                let mut p = species();
                p.mu_g_coeff = g;
                prop_assert!(monitor_time_constant(&p, r + dr) <= monitor_time_constant(&p, r));
            }

            #[test]
            fn ramp_and_logistic_continuous(t in 0.0f64..2000.0) {
                let h = 1e-7;
                for s in [ramp(), DensitySchedule::Logistic { rho_minus: 1e-3, rho_plus: 1.0, midpoint: 900.0, steepness: 0.01 }] {
                    let (lo, hi) = (s.at(t), s.at(t + h));
                    prop_assert!((hi - lo).abs() <= 1e-6 * lo.max(hi));
                }
            }
        }
    }
}
