use std::f64::consts::TAU;

use quorum_core::freq::{bode_sweep, default_amplitude, frequency_response, operating_point};
use quorum_core::model::{DensitySchedule, Response, SimConfig, SpeciesId};

fn linear_system() -> SimConfig {
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
fn static_limit_of_the_linear_system() {
    let cfg = linear_system();
    let op = operating_point(&cfg);
    let [b, _] = frequency_response(&cfg, 1e-4, 0.05 * op.a, 5).unwrap();
    let dc = op.tau_m[0] * cfg.species[0].k_resp;
    let wt = TAU * 1e-4 * op.tau_m[0];
    assert!((b.gain / dc - 1.0).abs() < 0.01 + wt * wt, "gain {} vs {dc}", b.gain);
    assert!(b.phase.abs() <= 0.05, "phase {}", b.phase);
}

fn noiseless_baseline() -> SimConfig {
    let mut cfg = SimConfig::baseline();
    cfg.env.sigma_a = 0.0;
    for p in cfg.species.iter_mut() {
        p.sigma_m = 0.0;
        p.n_cells = 1;
    }
    cfg
}

#[test]
fn small_forcing_is_in_the_linear_regime() {
    let cfg = noiseless_baseline();
    let amp = default_amplitude(&cfg);
    for f in [0.01, 0.1] {
        let single = frequency_response(&cfg, f, amp, 10).unwrap();
        let double = frequency_response(&cfg, f, 2.0 * amp, 10).unwrap();
        for s in 0..2 {
            let rel = (double[s].gain / single[s].gain - 1.0).abs();
            assert!(rel <= 0.05, "f={f} species {s}: {rel}");
        }
    }
}

#[test]
fn baseline_phases_are_lags_that_grow() {
    let cfg = noiseless_baseline();
    let freqs = [0.001, 0.01, 0.1, 1.0];
    let pts = bode_sweep(&cfg, &freqs, default_amplitude(&cfg), 10).unwrap();
    for id in SpeciesId::ALL {
        let series: Vec<_> = pts.iter().filter(|p| p.species == id).collect();
        assert!(series.iter().all(|p| p.phase <= 0.0));
        assert!(series.windows(2).all(|w| w[1].phase.abs() > w[0].phase.abs()));
        assert!(series.windows(2).all(|w| w[1].gain <= w[0].gain));
    }
}
