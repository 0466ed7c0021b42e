//! Information measures on trajectories: KSG mutual information, a binned
//! cross-check, circular block-bootstrap intervals, kNN transfer entropy and the
//! intrinsic/extrinsic noise split.
//!
//! All values are in bits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::digamma;

use crate::error::{Error, Result};
use crate::knn::{KdTree, SortedAxis};
use crate::model::{SpeciesId, Trajectory};
use crate::sde::splitmix64;

pub const DEFAULT_K: usize = 4;
pub const MIN_SAMPLES: usize = 8;
const JITTER: f64 = 1e-10;

/// Paired scalar observations.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePairs {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl SamplePairs {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::invalid(
                "pairs",
                format!("x has {} samples but y has {}", x.len(), y.len()),
            ));
        }
        if x.len() < MIN_SAMPLES {
            return Err(Error::InsufficientData(format!(
                "{} samples, need at least {MIN_SAMPLES}",
                x.len()
            )));
        }
        if let Some(i) = x.iter().chain(&y).position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "pairs",
                format!("non-finite value at position {}", i % x.len()),
            ));
        }
        Ok(SamplePairs { x, y })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Swaps the roles of `x` and `y`.
    pub fn swapped(&self) -> SamplePairs {
        SamplePairs {
            x: self.y.clone(),
            y: self.x.clone(),
        }
    }
}

/// Point estimate with its bootstrap interval and the settings that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MIEstimate {
    pub bits: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub k: usize,
    pub n_samples: usize,
    pub block_len: usize,
    pub n_boot: usize,
    pub alpha: f64,
}

/// Fractions of the output variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSplit {
    pub intrinsic_frac: f64,
    pub extrinsic_frac: f64,
    pub intrinsic_var: f64,
    pub extrinsic_var: f64,
}

/// Transfer entropy with the unclamped estimator output.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferEntropy {
    /// `max(raw_bits, 0)`.
    pub bits: f64,
    pub raw_bits: f64,
    pub lag: usize,
    pub k: usize,
    pub n_samples: usize,
}

fn uniform_jitter(origin: u32) -> f64 {
    // 53 random bits mapped to [-0.5, 0.5)
    (splitmix64(origin as u64 ^ 0x5DEE_CE66_D1CE_4E5B) >> 11) as f64 / (1u64 << 53) as f64 - 0.5
}

fn standardized(v: &[f64], what: &str) -> Result<Vec<f64>> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if !(sd > 0.0) || sd <= 1e-14 * mean.abs() {
        return Err(Error::Degenerate(format!("{what} is constant")));
    }
    Ok(v.iter().map(|x| (x - mean) / sd).collect())
}

/// `ψ(1..=n)`.
struct DigammaTable(Vec<f64>);

impl DigammaTable {
    fn new(n: usize) -> Self {
        DigammaTable((0..=n).map(|i| if i == 0 { f64::NAN } else { digamma(i as f64) }).collect())
    }

    #[inline]
    fn at(&self, i: usize) -> f64 {
        self.0[i]
    }
}

fn multiplicities(origin: &[u32]) -> Vec<u32> {
    let top = origin.iter().copied().max().map_or(0, |m| m as usize + 1);
    let mut mult = vec![0u32; top];
    for &o in origin {
        mult[o as usize] += 1;
    }
    mult
}

/// KSG algorithm 1 on `(x, y)`, where equal `origin` marks copies of one observation.
pub(crate) fn ksg_grouped(x: &[f64], y: &[f64], origin: &[u32], k: usize) -> Result<f64> {
    let n = x.len();
    if k < 1 {
        return Err(Error::invalid("k", "must be >= 1"));
    }
    let mult = multiplicities(origin);
    let distinct = mult.iter().filter(|&&m| m > 0).count();
    if distinct <= k {
        return Err(Error::InsufficientData(format!(
            "{distinct} distinct samples, need more than k = {k}"
        )));
    }
    let xs = standardized(x, "x")?;
    let ys = standardized(y, "y")?;
    let pts: Vec<[f64; 2]> = (0..n)
        .map(|i| {
            let j = JITTER * uniform_jitter(origin[i]);
            [xs[i] + j, ys[i] + j]
        })
        .collect();
    let xa = SortedAxis::new(&pts.iter().map(|p| p[0]).collect::<Vec<_>>());
    let ya = SortedAxis::new(&pts.iter().map(|p| p[1]).collect::<Vec<_>>());
    let tree = KdTree::with_groups(&pts, origin);
    let psi = DigammaTable::new(n + 1);
    let mut acc = 0.0;
    for (i, p) in pts.iter().enumerate() {
        let eps = tree.kth_distance(p, origin[i], k);
        let own = mult[origin[i] as usize] as usize;
        let nx = xa.count_within(p[0], eps) - own;
        let ny = ya.count_within(p[1], eps) - own;
        acc += psi.at(nx + 1) + psi.at(ny + 1);
    }
    let nats = psi.at(k) + psi.at(n) - acc / n as f64;
    Ok(nats / std::f64::consts::LN_2)
}

fn identity_origins(n: usize) -> Vec<u32> {
    (0..n as u32).collect()
}

/// Kraskov–Stögbauer–Grassberger estimate (algorithm 1, max-norm) in bits.
///
/// Marginals are standardized first. Ties are broken by a deterministic jitter of
/// relative size `1e-10` keyed by sample index and shared by both coordinates, so
/// `ksg_mi(x, y) == ksg_mi(y, x)`.
pub fn ksg_mi(pairs: &SamplePairs, k: usize) -> Result<f64> {
    if pairs.len() <= k {
        return Err(Error::InsufficientData(format!(
            "{} samples, need more than k = {k}",
            pairs.len()
        )));
    }
    ksg_grouped(&pairs.x, &pairs.y, &identity_origins(pairs.len()), k)
}

fn bin_index(v: f64, lo: f64, width: f64, bins: usize) -> usize {
    (((v - lo) / width) as usize).min(bins - 1)
}

/// Plug-in estimate from an equal-width `bins × bins` histogram, in bits.
pub fn binned_mi(pairs: &SamplePairs, bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::invalid("bins", format!("must be >= 2 (got {bins})")));
    }
    let range = |v: &[f64], what: &str| -> Result<(f64, f64)> {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            return Err(Error::Degenerate(format!("{what} is constant")));
        }
        Ok((lo, (hi - lo) / bins as f64))
    };
    let (xl, xw) = range(&pairs.x, "x")?;
    let (yl, yw) = range(&pairs.y, "y")?;
    let mut joint = vec![0usize; bins * bins];
    let mut px = vec![0usize; bins];
    let mut py = vec![0usize; bins];
    for (&x, &y) in pairs.x.iter().zip(&pairs.y) {
        let (i, j) = (bin_index(x, xl, xw, bins), bin_index(y, yl, yw, bins));
        joint[i * bins + j] += 1;
        px[i] += 1;
        py[j] += 1;
    }
    let n = pairs.len() as f64;
    let mut mi = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            let c = joint[i * bins + j];
            if c > 0 {
                let c = c as f64;
                mi += c / n * (c * n / (px[i] as f64 * py[j] as f64)).log2();
            }
        }
    }
    Ok(mi.max(0.0))
}

/// An MI estimator usable inside the bootstrap. `origin[i]` names the original
/// observation that resampled point `i` copies.
pub trait MiEstimator: Sync {
    fn estimate(&self, x: &[f64], y: &[f64], origin: &[u32]) -> Result<f64>;
}

#[derive(Clone, Copy, Debug)]
pub struct Ksg {
    pub k: usize,
}

impl MiEstimator for Ksg {
    fn estimate(&self, x: &[f64], y: &[f64], origin: &[u32]) -> Result<f64> {
        ksg_grouped(x, y, origin, self.k)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Binned {
    pub bins: usize,
}

impl MiEstimator for Binned {
    fn estimate(&self, x: &[f64], y: &[f64], _origin: &[u32]) -> Result<f64> {
        binned_mi(&SamplePairs::new(x.to_vec(), y.to_vec())?, self.bins)
    }
}

/// `ceil(n^(1/3))`.
pub fn default_block_len(n: usize) -> usize {
    let b = (n as f64).cbrt().ceil() as usize;
    // guard against cbrt rounding just above an exact cube
    let b = if b > 1 && (b - 1).pow(3) >= n { b - 1 } else { b };
    b.max(1)
}

/// Indices of one circular moving-block resample.
fn block_resample(n: usize, block_len: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut idx = Vec::with_capacity(n + block_len);
    while idx.len() < n {
        let start = rng.random_range(0..n);
        idx.extend((0..block_len).map(|j| ((start + j) % n) as u32));
    }
    idx.truncate(n);
    idx
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile interval from a circular moving-block bootstrap.
///
/// Resample `b` draws its block starts from stream `b` of a generator seeded with
/// `seed`, so the interval is independent of the thread count.
pub fn block_bootstrap_ci(
    pairs: &SamplePairs,
    estimator: &dyn MiEstimator,
    block_len: usize,
    n_boot: usize,
    alpha: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    let n = pairs.len();
    if block_len < 1 || block_len > n {
        return Err(Error::invalid(
            "block_len",
            format!("must be in 1..={n} (got {block_len})"),
        ));
    }
    if n_boot < 100 {
        return Err(Error::invalid("n_boot", format!("must be >= 100 (got {n_boot})")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha", format!("must be in (0, 1) (got {alpha})")));
    }
    let stats: Vec<f64> = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let idx = block_resample(n, block_len, &mut rng);
            let x: Vec<f64> = idx.iter().map(|&i| pairs.x[i as usize]).collect();
            let y: Vec<f64> = idx.iter().map(|&i| pairs.y[i as usize]).collect();
            estimator.estimate(&x, &y, &idx).map_err(|e| match e {
                Error::Degenerate(m) => Error::Degenerate(format!("bootstrap resample {b}: {m}")),
                Error::InsufficientData(m) => {
                    Error::InsufficientData(format!("bootstrap resample {b}: {m}"))
                }
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    let mut sorted = stats;
    sorted.sort_unstable_by(f64::total_cmp);
    Ok((quantile(&sorted, alpha / 2.0), quantile(&sorted, 1.0 - alpha / 2.0)))
}

/// Settings for [`mi_estimate`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiSettings {
    pub k: usize,
    pub n_boot: usize,
    pub alpha: f64,
    /// `None` selects [`default_block_len`].
    pub block_len: Option<usize>,
    pub seed: u64,
}

impl Default for MiSettings {
    fn default() -> Self {
        MiSettings {
            k: DEFAULT_K,
            n_boot: 200,
            alpha: 0.05,
            block_len: None,
            seed: 0,
        }
    }
}

/// KSG point estimate plus block-bootstrap interval.
pub fn mi_estimate(pairs: &SamplePairs, settings: &MiSettings) -> Result<MIEstimate> {
    let bits = ksg_mi(pairs, settings.k)?;
    let block_len = settings
        .block_len
        .unwrap_or_else(|| default_block_len(pairs.len()));
    let (ci_low, ci_high) = block_bootstrap_ci(
        pairs,
        &Ksg { k: settings.k },
        block_len,
        settings.n_boot,
        settings.alpha,
        settings.seed,
    )?;
    Ok(MIEstimate {
        bits,
        ci_low,
        ci_high,
        k: settings.k,
        n_samples: pairs.len(),
        block_len,
        n_boot: settings.n_boot,
        alpha: settings.alpha,
    })
}

/// Frenzel–Pompe estimate of `I(x; y | z)` in bits.
pub fn conditional_mi(x: &[f64], y: &[f64], z: &[f64], k: usize) -> Result<f64> {
    let n = x.len();
    if y.len() != n || z.len() != n {
        return Err(Error::invalid("series", "x, y and z must have equal length"));
    }
    if n <= k {
        return Err(Error::InsufficientData(format!(
            "{n} samples, need more than k = {k}"
        )));
    }
    let xs = standardized(x, "x")?;
    let ys = standardized(y, "y")?;
    let zs = standardized(z, "z")?;
    let jit: Vec<f64> = (0..n as u32).map(|i| JITTER * uniform_jitter(i)).collect();
    let xyz: Vec<[f64; 3]> = (0..n)
        .map(|i| [xs[i] + jit[i], ys[i] + jit[i], zs[i] + jit[i]])
        .collect();
    let xz: Vec<[f64; 2]> = xyz.iter().map(|p| [p[0], p[2]]).collect();
    let yz: Vec<[f64; 2]> = xyz.iter().map(|p| [p[1], p[2]]).collect();
    let zaxis = SortedAxis::new(&xyz.iter().map(|p| p[2]).collect::<Vec<_>>());
    let joint = KdTree::new(&xyz);
    let txz = KdTree::new(&xz);
    let tyz = KdTree::new(&yz);
    let psi = DigammaTable::new(n + 1);
    let mut acc = 0.0;
    for i in 0..n {
        let eps = joint.kth_distance(&xyz[i], i as u32, k);
        let nxz = txz.count_within(&xz[i], eps) - 1;
        let nyz = tyz.count_within(&yz[i], eps) - 1;
        let nz = zaxis.count_within(xyz[i][2], eps) - 1;
        acc += psi.at(nxz + 1) + psi.at(nyz + 1) - psi.at(nz + 1);
    }
    Ok((psi.at(k) - acc / n as f64) / std::f64::consts::LN_2)
}

/// `TE(src → dst) = I(dst_t ; src_{t−lag} | dst_{t−lag})`.
pub fn transfer_entropy(src: &[f64], dst: &[f64], lag: usize, k: usize) -> Result<TransferEntropy> {
    if lag < 1 {
        return Err(Error::invalid("lag", "must be >= 1 (got 0)"));
    }
    if src.len() != dst.len() {
        return Err(Error::invalid(
            "series",
            format!("src has {} samples but dst has {}", src.len(), dst.len()),
        ));
    }
    let n = src.len();
    if n <= lag + k {
        return Err(Error::InsufficientData(format!(
            "series of length {n} is too short for lag {lag} and k = {k}"
        )));
    }
    if src.iter().chain(dst).any(|v| !v.is_finite()) {
        return Err(Error::invalid("series", "non-finite value"));
    }
    let check = |v: &[f64], what: &str| -> Result<()> {
        if v.iter().all(|&x| x == v[0]) {
            Err(Error::Degenerate(format!("{what} series is constant")))
        } else {
            Ok(())
        }
    };
    check(src, "source")?;
    check(dst, "target")?;
    let raw = conditional_mi(&dst[lag..], &src[..n - lag], &dst[..n - lag], k)?;
    Ok(TransferEntropy {
        bits: raw.max(0.0),
        raw_bits: raw,
        lag,
        k,
        n_samples: n - lag,
    })
}

/// Per-time cell average of one species, summed in cell order.
pub fn mean_monitor(traj: &Trajectory, species: SpeciesId) -> Vec<f64> {
    let cells = traj.cells(species);
    (0..cells.n_times())
        .map(|t| {
            let row = cells.row(t);
            row.iter().sum::<f64>() / row.len() as f64
        })
        .collect()
}

pub const DEFAULT_TAIL_FRAC: f64 = 0.1;

/// [`noise_decomposition_tail`] over the last 10% of the samples.
pub fn noise_decomposition(reps: &[Trajectory], species: SpeciesId) -> Result<NoiseSplit> {
    noise_decomposition_tail(reps, species, DEFAULT_TAIL_FRAC)
}

/// Law-of-total-variance split of single-cell monitor levels.
///
/// At each sampled time in the tail window the variance across every cell of every
/// replicate is split into the variance of the replicate cell-means (shared,
/// extrinsic) and the mean within-replicate variance across cells (intrinsic). Both
/// parts are averaged over the window.
pub fn noise_decomposition_tail(
    reps: &[Trajectory],
    species: SpeciesId,
    tail_frac: f64,
) -> Result<NoiseSplit> {
    if reps.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} replicate(s), need at least 2",
            reps.len()
        )));
    }
    if !(tail_frac > 0.0 && tail_frac <= 1.0) {
        return Err(Error::invalid(
            "tail_frac",
            format!("must be in (0, 1] (got {tail_frac})"),
        ));
    }
    let n_t = reps[0].len();
    let n_cells = reps[0].cells(species).n_cells();
    if n_cells < 2 {
        return Err(Error::InsufficientData(format!(
            "{n_cells} cell(s) of {}, need at least 2",
            species.label()
        )));
    }
    if reps
        .iter()
        .any(|r| r.len() != n_t || r.cells(species).n_cells() != n_cells)
    {
        return Err(Error::invalid("replicates", "replicates differ in shape"));
    }
    let window = ((n_t as f64 * tail_frac).ceil() as usize).clamp(1, n_t);
    let start = n_t - window;
    let r = reps.len() as f64;
    let mut between = 0.0;
    let mut within = 0.0;
    for t in start..n_t {
        let mut means = Vec::with_capacity(reps.len());
        for rep in reps {
            let row = rep.cells(species).row(t);
            let mu = row.iter().sum::<f64>() / n_cells as f64;
            within += row.iter().map(|m| (m - mu) * (m - mu)).sum::<f64>() / n_cells as f64;
            means.push(mu);
        }
        let grand = means.iter().sum::<f64>() / r;
        between += means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / r;
    }
    let extrinsic_var = between / window as f64;
    let intrinsic_var = within / (window as f64 * r);
    let total = extrinsic_var + intrinsic_var;
    if !(total > 0.0) {
        return Err(Error::Degenerate(
            "monitor levels have zero variance in the analysis window".into(),
        ));
    }
    Ok(NoiseSplit {
        intrinsic_frac: intrinsic_var / total,
        extrinsic_frac: extrinsic_var / total,
        intrinsic_var,
        extrinsic_var,
    })
}

/// Index of the first sample after discarding `frac` of the series.
pub fn burn_in_start(len: usize, frac: f64) -> usize {
    ((len as f64 * frac).ceil() as usize).min(len)
}

/// `(a_t, m_k,t)` pairs pooled over all cells of `species` after the burn-in.
/// When there are more than `max_pairs`, a uniform subset chosen with `seed` is
/// kept, in time-major order.
pub fn pooled_single_cell_pairs(
    traj: &Trajectory,
    species: SpeciesId,
    burn_in_frac: f64,
    max_pairs: usize,
    seed: u64,
) -> Result<SamplePairs> {
    let cells = traj.cells(species);
    let start = burn_in_start(traj.len(), burn_in_frac);
    let n_cells = cells.n_cells();
    let total = (traj.len() - start) * n_cells;
    let pick = |flat: usize| (traj.a[start + flat / n_cells], cells.at(start + flat / n_cells, flat % n_cells));
    let (x, y): (Vec<f64>, Vec<f64>) = if total > max_pairs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut chosen = rand::seq::index::sample(&mut rng, total, max_pairs).into_vec();
        chosen.sort_unstable();
        chosen.into_iter().map(pick).unzip()
    } else {
        (0..total).map(pick).unzip()
    };
    SamplePairs::new(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CellMatrix;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, rho: f64, seed: u64) -> SamplePairs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            x.push(a);
            y.push(rho * a + (1.0 - rho * rho).sqrt() * b);
        }
        SamplePairs::new(x, y).unwrap()
    }

    fn uniform(n: usize, seed: u64) -> SamplePairs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = (0..n).map(|_| rng.random::<f64>()).collect();
        let y = (0..n).map(|_| rng.random::<f64>()).collect();
        SamplePairs::new(x, y).unwrap()
    }

    #[test]
    fn pairs_validation() {
        assert!(SamplePairs::new(vec![1.0; 7], vec![1.0; 7]).is_err());
        assert!(SamplePairs::new(vec![1.0; 8], vec![1.0; 9]).is_err());
        let mut x = vec![1.0; 8];
        x[3] = f64::NAN;
        assert!(SamplePairs::new(x, vec![1.0; 8]).is_err());
    }

    #[test]
    fn ksg_gaussian_oracle() {
        let est = ksg_mi(&gaussian(5000, 0.6, 1), 4).unwrap();
        let truth = -0.5 * (1.0f64 - 0.36).log2();
        assert!((est - truth).abs() < 0.05, "{est} vs {truth}");
    }

    #[test]
    fn ksg_independent() {
        let est = ksg_mi(&uniform(2000, 2), 4).unwrap();
        assert!(est.abs() < 0.05, "{est}");
    }

    #[test]
    fn ksg_rejects_constant_marginal() {
        let p = SamplePairs::new(vec![2.0; 20], (0..20).map(f64::from).collect()).unwrap();
        assert!(matches!(ksg_mi(&p, 4), Err(Error::Degenerate(_))));
        assert!(matches!(binned_mi(&p, 4), Err(Error::Degenerate(_))));
    }

    #[test]
    fn ksg_symmetric_and_handles_ties() {
        let x: Vec<f64> = (0..300).map(|i| (i % 7) as f64).collect();
        let y: Vec<f64> = (0..300).map(|i| ((i * 3) % 11) as f64 + (i % 7) as f64).collect();
        let p = SamplePairs::new(x, y).unwrap();
        let a = ksg_mi(&p, 4).unwrap();
        assert!(a.is_finite());
        assert_eq!(a, ksg_mi(&p.swapped(), 4).unwrap());
    }

    #[test]
    fn binned_deterministic_dependence() {
        let x: Vec<f64> = (0..16).map(f64::from).collect();
        let p = SamplePairs::new(x.clone(), x).unwrap();
        assert!((binned_mi(&p, 16).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn binned_independent_and_cross_check() {
        assert!(binned_mi(&uniform(10_000, 3), 16).unwrap() <= 0.05);
        let g = gaussian(5000, 0.6, 4);
        let diff = (binned_mi(&g, 16).unwrap() - ksg_mi(&g, 4).unwrap()).abs();
        assert!(diff <= 0.1, "{diff}");
        assert!(binned_mi(&g, 1).is_err());
    }

    #[test]
    fn block_len_rule() {
        assert_eq!(default_block_len(1), 1);
        assert_eq!(default_block_len(8), 2);
        assert_eq!(default_block_len(9), 3);
        assert_eq!(default_block_len(1000), 10);
        assert_eq!(default_block_len(1001), 11);
    }

    #[test]
    fn bootstrap_rotation_is_degenerate() {
        let g = gaussian(500, 0.6, 5);
        let (lo, hi) = block_bootstrap_ci(&g, &Ksg { k: 4 }, 500, 100, 0.05, 9).unwrap();
        assert!(hi - lo <= 0.02, "{lo}..{hi}");
    }

    #[test]
    fn bootstrap_independent_contains_zero() {
        let u = uniform(1000, 6);
        let (lo, hi) = block_bootstrap_ci(&u, &Ksg { k: 4 }, 10, 200, 0.05, 1).unwrap();
        assert!(lo <= 0.02 && hi >= -0.02, "{lo}..{hi}");
        assert!(lo <= hi);
    }

    #[test]
    fn bootstrap_rejects_bad_settings() {
        let u = uniform(100, 7);
        assert!(block_bootstrap_ci(&u, &Ksg { k: 4 }, 0, 200, 0.05, 1).is_err());
        assert!(block_bootstrap_ci(&u, &Ksg { k: 4 }, 5, 99, 0.05, 1).is_err());
        assert!(block_bootstrap_ci(&u, &Ksg { k: 4 }, 5, 100, 1.5, 1).is_err());
    }

    #[test]
    fn bootstrap_is_seeded() {
        let g = gaussian(400, 0.5, 8);
        let a = block_bootstrap_ci(&g, &Ksg { k: 4 }, 8, 100, 0.05, 3).unwrap();
        let b = block_bootstrap_ci(&g, &Ksg { k: 4 }, 8, 100, 0.05, 3).unwrap();
        assert_eq!(a, b);
    }

    fn ar1(n: usize, phi: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = Vec::with_capacity(n);
        let mut s = 0.0;
        for _ in 0..n {
            let e: f64 = StandardNormal.sample(&mut rng);
            s = phi * s + e;
            v.push(s);
        }
        v
    }

    #[test]
    fn te_uncoupled() {
        let a = ar1(5000, 0.7, 1);
        let b = ar1(5000, 0.7, 2);
        let te = transfer_entropy(&a, &b, 1, 4).unwrap();
        assert!(te.raw_bits.abs() < 0.02, "{}", te.raw_bits);
    }

    #[test]
    fn te_directional() {
        let src = ar1(3000, 0.5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut dst = vec![0.0];
        for t in 1..src.len() {
            let e: f64 = StandardNormal.sample(&mut rng);
            dst.push(src[t - 1] + 0.1 * e);
        }
        let fwd = transfer_entropy(&src, &dst, 1, 4).unwrap();
        let back = transfer_entropy(&dst, &src, 1, 4).unwrap();
        assert!(fwd.bits > 0.5, "{}", fwd.bits);
        assert!(back.bits < 0.05, "{}", back.bits);
    }

    #[test]
    fn te_self_is_zero() {
        let a = ar1(2000, 0.8, 5);
        let te = transfer_entropy(&a, &a, 1, 4).unwrap();
        assert!(te.raw_bits.abs() < 0.02, "{}", te.raw_bits);
    }

    #[test]
    fn te_errors() {
        let a = ar1(100, 0.8, 5);
        assert!(transfer_entropy(&a, &a, 0, 4).is_err());
        assert!(transfer_entropy(&a[..5], &a[..5], 1, 4).is_err());
        assert!(matches!(
            transfer_entropy(&[1.0; 50], &a[..50], 1, 4),
            Err(Error::Degenerate(_))
        ));
    }

    fn traj_from(cells: &[Vec<f64>]) -> Trajectory {
        let n_t = cells[0].len();
        let mut data = Vec::new();
        for t in 0..n_t {
            for c in cells {
                data.push(c[t]);
            }
        }
        let m = CellMatrix::from_rows(cells.len(), data).unwrap();
        Trajectory {
            times: (0..n_t).map(|t| t as f64).collect(),
            rho: [vec![1.0; n_t], vec![1.0; n_t]],
            a: vec![0.0; n_t],
            m: [m.clone(), m],
            m_mean: [vec![0.0; n_t], vec![0.0; n_t]],
        }
    }

    #[test]
    fn mean_monitor_examples() {
        let c = vec![1.0, 3.0, 2.0, 5.0];
        let tr = traj_from(&[c.clone()]);
        assert_eq!(mean_monitor(&tr, SpeciesId::Firmicutes), c);
        let b = 1.5;
        let mirror: Vec<f64> = c.iter().map(|v| -v + 2.0 * b).collect();
        let tr = traj_from(&[c.clone(), mirror]);
        assert!(mean_monitor(&tr, SpeciesId::Bacteroidetes).iter().all(|&v| (v - b).abs() < 1e-15));
        let tr = traj_from(&[c.clone(), c.clone(), c.clone()]);
        assert_eq!(mean_monitor(&tr, SpeciesId::Bacteroidetes), c);
    }

    #[test]
    fn noise_split_limits() {
        // identical cells in every replicate: all variance is shared
        let r1 = traj_from(&[vec![1.0; 10], vec![1.0; 10]]);
        let r2 = traj_from(&[vec![2.0; 10], vec![2.0; 10]]);
        let s = noise_decomposition(&[r1.clone(), r2], SpeciesId::Firmicutes).unwrap();
        assert_eq!(s.intrinsic_frac, 0.0);
        assert_eq!(s.extrinsic_frac, 1.0);
        // identical replicates: all variance is per cell
        let r = traj_from(&[vec![1.0; 10], vec![3.0; 10]]);
        let s = noise_decomposition(&[r.clone(), r.clone()], SpeciesId::Firmicutes).unwrap();
        assert_eq!(s.extrinsic_frac, 0.0);
        assert!((s.intrinsic_frac + s.extrinsic_frac - 1.0).abs() < 1e-9);
        assert!(noise_decomposition(&[r.clone()], SpeciesId::Firmicutes).is_err());
        let flat = traj_from(&[vec![1.0; 10], vec![1.0; 10]]);
        assert!(matches!(
            noise_decomposition(&[flat.clone(), flat], SpeciesId::Firmicutes),
            Err(Error::Degenerate(_))
        ));
        let single = traj_from(&[vec![1.0; 10]]);
        assert!(noise_decomposition(&[single.clone(), single], SpeciesId::Firmicutes).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn ksg_exactly_symmetric(seed in 0u64..1000, rho in -0.9f64..0.9) {
                let g = gaussian(200, rho, seed);
                prop_assert_eq!(ksg_mi(&g, 4).unwrap(), ksg_mi(&g.swapped(), 4).unwrap());
            }

            #[test]
            fn binned_non_negative(seed in 0u64..1000, bins in 2usize..30) {
                prop_assert!(binned_mi(&uniform(300, seed), bins).unwrap() >= 0.0);
            }

            #[test]
            fn noise_fractions_sum_to_one(vals in prop::collection::vec(0.0f64..5.0, 24)) {
                let r1 = traj_from(&[vals[0..6].to_vec(), vals[6..12].to_vec()]);
                let r2 = traj_from(&[vals[12..18].to_vec(), vals[18..24].to_vec()]);
                if let Ok(s) = noise_decomposition_tail(&[r1, r2], SpeciesId::Firmicutes, 0.5) {
                    prop_assert!((s.intrinsic_frac + s.extrinsic_frac - 1.0).abs() < 1e-9);
                    prop_assert!((0.0..=1.0).contains(&s.intrinsic_frac));
                }
            }
        }
    }
}
