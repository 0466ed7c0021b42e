//! Frequency response of the population-mean monitor level to a sinusoidal
//! perturbation of the shared autoinducer.
//!
//! Densities are frozen at their `t_max` values, the state starts at the
//! deterministic fixed point and is relaxed before forcing. An extra AI drift term
//! is chosen each step so that the deterministic part of `a` follows `a* + u(t)`
//! with `u(t) = A sin(ωt)` sampled at step midpoints. Gain and phase of each
//! species' `m̄` relative to `u` come from a least-squares lock-in fit on
//! `[1, t, sin ωt, cos ωt]`.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SimConfig, SpeciesId};
use crate::sde::{replicate_seed, Integrator};

/// One species at one frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodePoint {
    /// Hz.
    pub freq: f64,
    /// `|m̄ amplitude| / A`.
    pub gain: f64,
    pub gain_db: f64,
    /// Radians in `(−π, π]`, relative to `A sin(ωt)`.
    pub phase: f64,
    pub species: SpeciesId,
    /// `snr >= snr_threshold`.
    pub reliable: bool,
    /// Output amplitude over the neighbour-frequency noise floor; `None` without noise.
    pub snr: Option<f64>,
    /// Noise floor in gain units.
    pub noise_floor: f64,
}

/// Deterministic steady state with densities frozen at `t_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub rho: [f64; 2],
    pub a: f64,
    pub m: [f64; 2],
    pub tau_a: f64,
    pub tau_m: [f64; 2],
}

pub fn operating_point(cfg: &SimConfig) -> OperatingPoint {
    let rho = [
        cfg.density(SpeciesId::Bacteroidetes, cfg.t_max),
        cfg.density(SpeciesId::Firmicutes, cfg.t_max),
    ];
    let total = rho[0] + rho[1];
    let tau_a = cfg.ai_time_constant();
    let a = tau_a
        * cfg
            .species
            .iter()
            .zip(rho)
            .map(|(p, r)| r * p.alpha_luxs)
            .sum::<f64>();
    let tau_m = [
        cfg.species[0].monitor_time_constant(total),
        cfg.species[1].monitor_time_constant(total),
    ];
    let m = [0, 1].map(|s| {
        let p = &cfg.species[s];
        tau_m[s] * p.production_scale(rho[0], rho[1]) * p.activation(a)
    });
    OperatingPoint {
        rho,
        a,
        m,
        tau_a,
        tau_m,
    }
}

/// 5% of the steady-state autoinducer level.
pub fn default_amplitude(cfg: &SimConfig) -> f64 {
    0.05 * operating_point(cfg).a
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreqOptions {
    pub replicates: usize,
    pub burn_in_cycles: usize,
    /// Analysis windows are stretched to whole cycles covering at least this long.
    pub min_analysis_time: f64,
    /// Pre-relaxation length in multiples of the slowest time constant.
    pub relax_time_constants: f64,
    pub snr_threshold: f64,
}

impl Default for FreqOptions {
    fn default() -> Self {
        FreqOptions {
            replicates: 1,
            burn_in_cycles: 2,
            min_analysis_time: 100.0,
            relax_time_constants: 5.0,
            snr_threshold: 2.0,
        }
    }
}

/// `n` log-spaced points from `min` to `max` inclusive.
pub fn log_spaced(min: f64, max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![min],
        _ => {
            let (l0, l1) = (min.log10(), max.log10());
            (0..n)
                .map(|i| {
                    if i == 0 {
                        min
                    } else if i == n - 1 {
                        max
                    } else {
                        10f64.powf(l0 + (l1 - l0) * i as f64 / (n - 1) as f64)
                    }
                })
                .collect()
        }
    }
}

/// Wraps to `(−π, π]`.
pub fn wrap_phase(p: f64) -> f64 {
    let w = p.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Streaming least squares on `[1, τ, sin ωt, cos ωt]` for both species.
#[derive(Clone, Debug)]
struct LockIn {
    omega: f64,
    xtx: [[f64; 4]; 4],
    xty: [[f64; 4]; 2],
}

impl LockIn {
    fn new(omega: f64) -> Self {
        LockIn {
            omega,
            xtx: [[0.0; 4]; 4],
            xty: [[0.0; 4]; 2],
        }
    }

    #[inline]
    fn add(&mut self, t: f64, trend: f64, y: [f64; 2]) {
        let (s, c) = (self.omega * t).sin_cos();
        let row = [1.0, trend, s, c];
        for i in 0..4 {
            for j in i..4 {
                self.xtx[i][j] += row[i] * row[j];
            }
            self.xty[0][i] += row[i] * y[0];
            self.xty[1][i] += row[i] * y[1];
        }
    }

    /// `(sin, cos)` coefficients per species.
    fn solve(&self) -> Result<[(f64, f64); 2]> {
        let mut full = self.xtx;
        for i in 0..4 {
            for j in 0..i {
                full[i][j] = full[j][i];
            }
        }
        let mut out = [(0.0, 0.0); 2];
        for s in 0..2 {
            let b = solve4(full, self.xty[s])?;
            out[s] = (b[2], b[3]);
        }
        Ok(out)
    }
}

fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Result<[f64; 4]> {
    for col in 0..4 {
        let piv = (col..4)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if !(a[piv][col].abs() > 1e-300) {
            return Err(Error::IllConditioned("lock-in normal equations are singular".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..4 {
            let f = a[r][col] / a[col][col];
            for c in col..4 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for r in (0..4).rev() {
        let mut acc = b[r];
        for c in r + 1..4 {
            acc -= a[r][c] * x[c];
        }
        x[r] = acc / a[r][r];
    }
    Ok(x)
}

/// Number of analysed cycles: at least `n_cycles` and at least `min_time` long.
fn effective_cycles(freq: f64, n_cycles: usize, min_time: f64) -> usize {
    n_cycles.max((min_time * freq - 1e-9).ceil() as usize)
}

fn probe_offsets() -> [f64; 5] {
    [0.0, -1.0, 1.0, -2.0, 2.0]
}

/// Complex responses `[species][probe]` of one replicate, in units of `A`.
fn forced_run(
    cfg: &SimConfig,
    op: &OperatingPoint,
    freq: f64,
    amplitude: f64,
    n_eff: usize,
    opts: &FreqOptions,
) -> Result<[[(f64, f64); 5]; 2]> {
    let dt = cfg.dt;
    let omega = TAU * freq;
    let mut integ = Integrator::new(cfg)?;
    integ.freeze_densities(op.rho);
    integ.set_ai(op.a);
    integ.set_monitor(SpeciesId::Bacteroidetes, op.m[0]);
    integ.set_monitor(SpeciesId::Firmicutes, op.m[1]);

    let slowest = op.tau_a.max(op.tau_m[0]).max(op.tau_m[1]);
    let relax_steps = (opts.relax_time_constants * slowest / dt).ceil() as u64;
    for _ in 0..relax_steps {
        integ.step(0.0)?;
    }

    let period = 1.0 / freq;
    let burn_steps = (opts.burn_in_cycles as f64 * period / dt).round() as u64;
    let window = n_eff as f64 * period;
    let analysis_steps = ((window / dt).round() as u64).max(4);
    let t0 = burn_steps as f64 * dt;
    let t_mid = t0 + 0.5 * analysis_steps as f64 * dt;
    let half = 0.5 * analysis_steps as f64 * dt;

    let mut probes: Vec<LockIn> = probe_offsets()
        .iter()
        .map(|j| LockIn::new(omega * (1.0 + j / n_eff as f64)))
        .collect();

    // u sampled at step midpoints; the extra drift makes the Euler AI update
    // reproduce u exactly in the noise-free part.
    let decay = 1.0 - dt / op.tau_a;
    let mut u_prev = amplitude * (-0.5 * omega * dt).sin();
    for n in 0..burn_steps + analysis_steps {
        let u_next = amplitude * (omega * (n as f64 + 0.5) * dt).sin();
        let forcing = (u_next - decay * u_prev) / dt;
        u_prev = u_next;
        integ.step(forcing)?;
        if n >= burn_steps {
            let st = integ.state();
            let t = (n + 1) as f64 * dt;
            let y = [st.m_mean(SpeciesId::Bacteroidetes), st.m_mean(SpeciesId::Firmicutes)];
            let trend = (t - t_mid) / half;
            for p in probes.iter_mut() {
                p.add(t, trend, y);
            }
        }
    }

    let mut out = [[(0.0, 0.0); 5]; 2];
    for (j, p) in probes.iter().enumerate() {
        let coef = p.solve()?;
        for s in 0..2 {
            // m ≈ B sin + C cos = G A sin(ωt + φ): B = G A cos φ, C = G A sin φ
            out[s][j] = (coef[s].0 / amplitude, coef[s].1 / amplitude);
        }
    }
    Ok(out)
}

fn validate_inputs(freq: f64, amplitude: f64, n_cycles: usize, opts: &FreqOptions) -> Result<()> {
    if !(freq.is_finite() && freq > 0.0) {
        return Err(Error::invalid("freq", format!("must be > 0 (got {freq})")));
    }
    if !(amplitude.is_finite() && amplitude > 0.0) {
        return Err(Error::invalid(
            "amplitude",
            format!("must be > 0 (got {amplitude})"),
        ));
    }
    if n_cycles < 5 {
        return Err(Error::invalid(
            "n_cycles",
            format!("must be >= 5 (got {n_cycles})"),
        ));
    }
    if opts.replicates < 1 {
        return Err(Error::invalid("replicates", "must be >= 1 (got 0)"));
    }
    Ok(())
}

/// [`frequency_response_with`] using [`FreqOptions::default`].
pub fn frequency_response(
    cfg: &SimConfig,
    freq: f64,
    amplitude: f64,
    n_cycles: usize,
) -> Result<[BodePoint; 2]> {
    frequency_response_with(cfg, freq, amplitude, n_cycles, &FreqOptions::default())
}

/// Gain and phase of `m̄_B` and `m̄_F` at `freq`, averaged over replicates as complex
/// responses. Replicate `r` uses seed [`replicate_seed`]`(cfg.seed, r)`.
pub fn frequency_response_with(
    cfg: &SimConfig,
    freq: f64,
    amplitude: f64,
    n_cycles: usize,
    opts: &FreqOptions,
) -> Result<[BodePoint; 2]> {
    validate_inputs(freq, amplitude, n_cycles, opts)?;
    cfg.validate()?;
    let op = operating_point(cfg);
    let n_eff = effective_cycles(freq, n_cycles, opts.min_analysis_time);
    let runs: Vec<[[(f64, f64); 5]; 2]> = (0..opts.replicates)
        .into_par_iter()
        .map(|r| {
            let cfg_r = cfg.clone().with_seed(replicate_seed(cfg.seed, r));
            forced_run(&cfg_r, &op, freq, amplitude, n_eff, opts)
        })
        .collect::<Result<_>>()?;
    let n = runs.len() as f64;
    let point = |s: usize| {
        let mut avg = [(0.0, 0.0); 5];
        for run in &runs {
            for j in 0..5 {
                avg[j].0 += run[s][j].0 / n;
                avg[j].1 += run[s][j].1 / n;
            }
        }
        let (b, c) = avg[0];
        let gain = b.hypot(c);
        let floor = (avg[1..].iter().map(|(x, y)| x * x + y * y).sum::<f64>() / 4.0).sqrt();
        let snr = (floor > 0.0).then(|| gain / floor);
        BodePoint {
            freq,
            gain,
            gain_db: 20.0 * gain.log10(),
            phase: wrap_phase(c.atan2(b)),
            species: SpeciesId::ALL[s],
            reliable: snr.is_none_or(|v| v >= opts.snr_threshold),
            snr,
            noise_floor: floor,
        }
    };
    Ok([point(0), point(1)])
}

/// [`bode_sweep_with`] using [`FreqOptions::default`].
pub fn bode_sweep(
    cfg: &SimConfig,
    freqs: &[f64],
    amplitude: f64,
    n_cycles: usize,
) -> Result<Vec<BodePoint>> {
    bode_sweep_with(cfg, freqs, amplitude, n_cycles, &FreqOptions::default())
}

/// One [`frequency_response_with`] per frequency, ordered by frequency then species.
pub fn bode_sweep_with(
    cfg: &SimConfig,
    freqs: &[f64],
    amplitude: f64,
    n_cycles: usize,
    opts: &FreqOptions,
) -> Result<Vec<BodePoint>> {
    if freqs.is_empty() {
        return Err(Error::invalid("freqs", "sweep needs at least one frequency"));
    }
    if freqs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("freqs", "frequencies must be strictly increasing"));
    }
    let rows: Vec<[BodePoint; 2]> = freqs
        .par_iter()
        .map(|&f| frequency_response_with(cfg, f, amplitude, n_cycles, opts))
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DensitySchedule, Response};

    /// Noise-free linear first-order system with `τ_m = 10`.
    pub(crate) fn linear_system() -> SimConfig {
        let mut cfg = SimConfig::baseline();
        cfg.env.sigma_a = 0.0;
        for p in cfg.species.iter_mut() {
            p.sigma_m = 0.0;
            p.response = Response::Linear;
            p.mu_g_coeff = 0.0;
            p.delta = 0.1;
            p.n_cells = 1;
            p.density_schedule = DensitySchedule::Constant { rho: 0.5 };
        }
        cfg
    }

    #[test]
    fn lock_in_recovers_synthetic_sinusoid() {
        let omega = TAU * 0.37;
        let mut li = LockIn::new(omega);
        let (amp, phi) = (0.8, -0.6);
        let n = 20_000;
        for i in 0..n {
            let t = i as f64 * 0.01;
            let y = 3.0 + 0.2 * (t - 100.0) / 100.0 + amp * (omega * t + phi).sin();
            li.add(t, (t - 100.0) / 100.0, [y, 2.0 * y]);
        }
        let [(b, c), (b2, c2)] = li.solve().unwrap();
        assert!((b.hypot(c) - amp).abs() < 1e-6 * amp);
        assert!((c.atan2(b) - phi).abs() < 1e-6);
        assert!((b2.hypot(c2) - 2.0 * amp).abs() < 1e-6 * amp);
    }

    #[test]
    fn wrap_phase_range() {
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!((wrap_phase(-0.3) + 0.3).abs() < 1e-15);
    }

    #[test]
    fn log_spacing() {
        let f = log_spaced(1e-3, 10.0, 20);
        assert_eq!(f.len(), 20);
        assert!((f[0] - 1e-3).abs() < 1e-18);
        assert_eq!(f[19], 10.0);
        assert!(f.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn linear_system_matches_first_order_filter() {
        let cfg = linear_system();
        let op = operating_point(&cfg);
        let tau = op.tau_m[0];
        for f in [0.003, 0.05, 0.4, 1.0] {
            let amp = 0.05 * op.a;
            let [b, _] = frequency_response(&cfg, f, amp, 10).unwrap();
            let wt = TAU * f * tau;
            let dc = tau * cfg.species[0].k_resp;
            let g = b.gain / dc;
            let g_ref = 1.0 / (1.0 + wt * wt).sqrt();
            let p_ref = -wt.atan();
            assert!((g - g_ref).abs() <= 0.02 * g_ref, "f={f}: gain {g} vs {g_ref}");
            assert!((b.phase - p_ref).abs() <= 0.02 * p_ref.abs(), "f={f}: phase {} vs {p_ref}", b.phase);
            assert!(b.reliable);
        }
    }

    #[test]
    fn input_validation() {
        let cfg = linear_system();
        assert!(frequency_response(&cfg, 0.0, 1.0, 10).is_err());
        assert!(frequency_response(&cfg, 1.0, 0.0, 10).is_err());
        assert!(frequency_response(&cfg, 1.0, 1.0, 4).is_err());
        assert!(bode_sweep(&cfg, &[], 1.0, 10).is_err());
        assert!(bode_sweep(&cfg, &[1.0, 0.5], 1.0, 10).is_err());
    }
}
