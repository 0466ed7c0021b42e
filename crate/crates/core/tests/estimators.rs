use quorum_core::info::{
    block_bootstrap_ci, burn_in_start, ksg_mi, noise_decomposition, transfer_entropy, Ksg, SamplePairs,
};
use quorum_core::model::{SimConfig, SpeciesId};
use quorum_core::sde::{run_replicates, simulate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const GAUSS_MI: f64 = 0.32192809488736235;

fn gaussian(n: usize, rho: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = StandardNormal.sample(&mut rng);
            let v: f64 = StandardNormal.sample(&mut rng);
            (u, rho * u + (1.0 - rho * rho).sqrt() * v)
        })
        .unzip()
}

#[test]
fn ksg_is_invariant_under_monotone_maps() {
    let (x, y) = gaussian(5000, 0.6, 3);
    let base = ksg_mi(&SamplePairs::new(x.clone(), y.clone()).unwrap(), 4).unwrap();
    let ex: Vec<f64> = x.iter().map(|v| v.exp()).collect();
    let mapped = ksg_mi(&SamplePairs::new(ex, y).unwrap(), 4).unwrap();
    assert!((base - mapped).abs() <= 0.05, "{base} vs {mapped}");
}

#[test]
fn independent_estimates_are_not_very_negative() {
    for seed in 0..3 {
        let (x, _) = gaussian(2000, 0.0, seed);
        let (y, _) = gaussian(2000, 0.0, seed + 100);
        let mi = ksg_mi(&SamplePairs::new(x, y).unwrap(), 4).unwrap();
        assert!(mi >= -0.05, "{mi}");
    }
}

#[test]
fn bootstrap_interval_covers_the_gaussian_oracle() {
    let reps = 50;
    let mut covered = 0;
    for r in 0..reps {
        let (x, y) = gaussian(5000, 0.6, 1000 + r);
        let pairs = SamplePairs::new(x, y).unwrap();
        let (lo, hi) = block_bootstrap_ci(&pairs, &Ksg { k: 4 }, 18, 100, 0.05, r).unwrap();
        if lo <= GAUSS_MI && GAUSS_MI <= hi {
            covered += 1;
        }
    }
    assert!(covered * 10 >= reps * 9, "covered {covered} of {reps}");
}

#[test]
fn averaging_never_loses_information() {
    let tr = simulate(&SimConfig::baseline()).unwrap();
    let start = burn_in_start(tr.len(), 0.1);
    let a = tr.a[start..].to_vec();
    for id in SpeciesId::ALL {
        let avg = ksg_mi(&SamplePairs::new(a.clone(), tr.m_mean(id)[start..].to_vec()).unwrap(), 4).unwrap();
        let cells = tr.cells(id);
        let best = (0..cells.n_cells())
            .map(|c| ksg_mi(&SamplePairs::new(a.clone(), cells.cell(c)[start..].to_vec()).unwrap(), 4).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(avg >= best - 0.1, "{}: averaged {avg} vs best cell {best}", id.label());
    }
}

#[test]
fn noise_controls() {
    let mut quiet_ai = SimConfig::baseline();
    quiet_ai.env.sigma_a = 0.0;
    let mut quiet_mp = SimConfig::baseline();
    for p in quiet_mp.species.iter_mut() {
        p.sigma_m = 0.0;
    }
    let a = run_replicates(&quiet_ai, 5).unwrap();
    let m = run_replicates(&quiet_mp, 5).unwrap();
    for id in SpeciesId::ALL {
        let sa = noise_decomposition(&a, id).unwrap();
        let sm = noise_decomposition(&m, id).unwrap();
        assert!(sa.extrinsic_frac <= 0.05, "{sa:?}");
        assert!(sm.intrinsic_frac <= 0.05, "{sm:?}");
        assert!((sa.extrinsic_frac + sa.intrinsic_frac - 1.0).abs() < 1e-9);
    }
}

#[test]
fn transfer_entropy_is_small_between_baseline_means() {
    let tr = simulate(&SimConfig::baseline()).unwrap();
    let start = burn_in_start(tr.len(), 0.1);
    let d = |id: SpeciesId| -> Vec<f64> {
        tr.m_mean(id)[start..].windows(2).map(|w| w[1] - w[0]).collect()
    };
    let (b, f) = (d(SpeciesId::Bacteroidetes), d(SpeciesId::Firmicutes));
    for te in [transfer_entropy(&f, &b, 1, 4).unwrap(), transfer_entropy(&b, &f, 1, 4).unwrap()] {
        assert!(te.bits < 0.2, "{te:?}");
        assert!(te.bits >= 0.0 && te.raw_bits <= te.bits);
    }
}
