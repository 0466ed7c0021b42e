//! Euler–Maruyama integration of the coupled monitor-protein / autoinducer system.
//!
//! Each step updates, in order: the prescribed densities at `t + dt`, the shared
//! autoinducer `a` (using the monitor levels from the start of the step), then
//! every cell's monitor level `m` (using the new `a`). Both `a` and `m` are clamped
//! at zero after their update.
//!
//! Noise comes from one counter-based stream per variable, so adding cells never
//! changes the increments seen by existing cells.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{CellMatrix, SimConfig, SpeciesId, Trajectory};

/// Instantaneous system state.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    /// Steps taken so far; `t = step · dt`.
    pub step: u64,
    pub t: f64,
    /// `[ρ_B, ρ_F]`.
    pub rho: [f64; 2],
    pub a: f64,
    /// `[m_B, m_F]` per-cell levels.
    pub m: [Vec<f64>; 2],
}

impl SimState {
    pub fn initial(cfg: &SimConfig) -> Self {
        SimState {
            step: 0,
            t: 0.0,
            rho: [
                cfg.density(SpeciesId::Bacteroidetes, 0.0),
                cfg.density(SpeciesId::Firmicutes, 0.0),
            ],
            a: cfg.a0,
            m: [
                vec![cfg.m0; cfg.species[0].n_cells],
                vec![cfg.m0; cfg.species[1].n_cells],
            ],
        }
    }

    pub fn rho_total(&self) -> f64 {
        self.rho[0] + self.rho[1]
    }

    /// Arithmetic mean of one species' monitor levels, summed in cell order.
    pub fn m_mean(&self, id: SpeciesId) -> f64 {
        mean(&self.m[id.index()])
    }
}

/// Identity of one Wiener process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StreamId {
    Autoinducer,
    Monitor { species: usize, cell: usize },
}

impl StreamId {
    pub fn word(self) -> u64 {
        match self {
            StreamId::Autoinducer => 0,
            StreamId::Monitor { species, cell } => {
                (1u64 << 56) | ((species as u64) << 48) | cell as u64
            }
        }
    }
}

/// Standard-normal increments for one `(seed, stream)` pair. The `k`-th draw is the
/// same on every run.
#[derive(Clone, Debug)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(seed: u64, id: StreamId) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id.word());
        NoiseStream { rng }
    }

    #[inline]
    pub fn next_gaussian(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `r`. Replicate 0 keeps the base seed.
pub fn replicate_seed(base: u64, r: usize) -> u64 {
    if r == 0 {
        base
    } else {
        base ^ splitmix64(r as u64)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Stepper holding the state and all noise streams of one run.
#[derive(Clone, Debug)]
pub struct Integrator<'c> {
    cfg: &'c SimConfig,
    state: SimState,
    ai_noise: NoiseStream,
    mp_noise: [Vec<NoiseStream>; 2],
    frozen_rho: Option<[f64; 2]>,
    held_ai: Option<f64>,
    tau_a: f64,
    mp_sd: [f64; 2],
}

impl<'c> Integrator<'c> {
    /// Validates `cfg` and starts from `(a0, m0)` with noise seeded by `cfg.seed`.
    pub fn new(cfg: &'c SimConfig) -> Result<Self> {
        cfg.validate()?;
        let streams = |s: usize| {
            (0..cfg.species[s].n_cells)
                .map(|cell| NoiseStream::new(cfg.seed, StreamId::Monitor { species: s, cell }))
                .collect::<Vec<_>>()
        };
        Ok(Integrator {
            cfg,
            state: SimState::initial(cfg),
            ai_noise: NoiseStream::new(cfg.seed, StreamId::Autoinducer),
            mp_noise: [streams(0), streams(1)],
            frozen_rho: None,
            held_ai: None,
            tau_a: cfg.ai_time_constant(),
            mp_sd: [
                (2.0 * cfg.species[0].sigma_m * cfg.dt).sqrt(),
                (2.0 * cfg.species[1].sigma_m * cfg.dt).sqrt(),
            ],
        })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn config(&self) -> &SimConfig {
        self.cfg
    }

    /// Holds the densities at `rho` from now on instead of following the schedules.
    pub fn freeze_densities(&mut self, rho: [f64; 2]) {
        self.frozen_rho = Some(rho);
        self.state.rho = rho;
    }

    /// Pins `a` to a fixed value (`None` releases it). The AI noise stream still advances.
    pub fn hold_ai(&mut self, a: Option<f64>) {
        self.held_ai = a;
        if let Some(v) = a {
            self.state.a = v;
        }
    }

    pub fn set_ai(&mut self, a: f64) {
        self.state.a = a.max(0.0);
    }

    /// Sets every cell of `id` to `m`.
    pub fn set_monitor(&mut self, id: SpeciesId, m: f64) {
        self.state.m[id.index()].fill(m.max(0.0));
    }

    /// Advances one step. `extra_ai_drift` is added to the AI drift for this step.
    pub fn step(&mut self, extra_ai_drift: f64) -> Result<()> {
        let cfg = self.cfg;
        let dt = cfg.dt;
        let next = self.state.step + 1;
        let t_next = next as f64 * dt;

        let rho = match self.frozen_rho {
            Some(r) => r,
            None => [
                cfg.density(SpeciesId::Bacteroidetes, t_next),
                cfg.density(SpeciesId::Firmicutes, t_next),
            ],
        };
        let rho_total = rho[0] + rho[1];

        let xi = self.ai_noise.next_gaussian();
        let a = match self.held_ai {
            Some(v) => v,
            None => {
                let mut production = 0.0;
                for (s, p) in cfg.species.iter().enumerate() {
                    production += rho[s] * p.mean_secretion(&self.state.m[s]);
                }
                let drift = -self.state.a / self.tau_a + production + extra_ai_drift;
                let sd = (2.0 * (rho_total / cfg.env.volume) * cfg.env.sigma_a * cfg.env.sigma_a * dt)
                    .sqrt();
                self.state.a + dt * drift + sd * xi
            }
        };
        if !a.is_finite() {
            return Err(Error::NonFinite {
                step: next,
                variable: "a".to_string(),
            });
        }

        let a = a.max(0.0);
        for (s, p) in cfg.species.iter().enumerate() {
            let decay = 1.0 / p.monitor_time_constant(rho_total);
            let synthesis = p.production_scale(rho[0], rho[1]) * p.activation(a);
            let sd = self.mp_sd[s];
            let mut check = 0.0;
            for (m, noise) in self.state.m[s].iter_mut().zip(self.mp_noise[s].iter_mut()) {
                let v = *m + dt * (synthesis - *m * decay) + sd * noise.next_gaussian();
                check += v;
                *m = v.max(0.0);
            }
            if !check.is_finite() {
                return Err(Error::NonFinite {
                    step: next,
                    variable: format!("m[{s}]"),
                });
            }
        }

        self.state.step = next;
        self.state.t = t_next;
        self.state.rho = rho;
        self.state.a = a;
        Ok(())
    }
}

struct Recorder {
    traj: Trajectory,
}

impl Recorder {
    fn new(cfg: &SimConfig) -> Self {
        let n = cfg.n_records();
        let series = || Vec::with_capacity(n);
        Recorder {
            traj: Trajectory {
                times: series(),
                rho: [series(), series()],
                a: series(),
                m: [
                    CellMatrix::with_capacity(cfg.species[0].n_cells, n),
                    CellMatrix::with_capacity(cfg.species[1].n_cells, n),
                ],
                m_mean: [series(), series()],
            },
        }
    }

    fn push(&mut self, s: &SimState) {
        let tr = &mut self.traj;
        tr.times.push(s.t);
        tr.a.push(s.a);
        for i in 0..2 {
            tr.rho[i].push(s.rho[i]);
            tr.m[i].push_row(&s.m[i]);
            tr.m_mean[i].push(mean(&s.m[i]));
        }
    }
}

fn check_memory(cfg: &SimConfig) -> Result<()> {
    let required = cfg.trajectory_bytes();
    if required > cfg.memory_cap_bytes {
        return Err(Error::MemoryCap {
            required,
            cap: cfg.memory_cap_bytes,
        });
    }
    Ok(())
}

/// Runs `floor(t_max / dt)` steps and records every `record_stride`-th state,
/// starting with the initial one.
pub fn simulate(cfg: &SimConfig) -> Result<Trajectory> {
    cfg.validate()?;
    check_memory(cfg)?;
    let mut integ = Integrator::new(cfg)?;
    let mut rec = Recorder::new(cfg);
    rec.push(integ.state());
    let stride = cfg.record_stride as u64;
    for n in 1..=cfg.n_steps() {
        integ.step(0.0)?;
        if n % stride == 0 {
            rec.push(integ.state());
        }
    }
    Ok(rec.traj)
}

/// `n_reps` independent runs; replicate `r` uses [`replicate_seed`]`(cfg.seed, r)`.
/// The output order and contents do not depend on the thread pool.
pub fn run_replicates(cfg: &SimConfig, n_reps: usize) -> Result<Vec<Trajectory>> {
    if n_reps < 1 {
        return Err(Error::invalid("replicates", "must be >= 1 (got 0)"));
    }
    cfg.validate()?;
    let total = cfg.trajectory_bytes().saturating_mul(n_reps as u64);
    if total > cfg.memory_cap_bytes {
        return Err(Error::MemoryCap {
            required: total,
            cap: cfg.memory_cap_bytes,
        });
    }
    (0..n_reps)
        .into_par_iter()
        .map(|r| simulate(&cfg.clone().with_seed(replicate_seed(cfg.seed, r))))
        .collect()
}
