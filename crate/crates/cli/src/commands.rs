//! One function per subcommand. Each writes into `out` and returns the paths it wrote.

use std::path::{Path, PathBuf};

use quorum_core::freq::{bode_sweep_with, default_amplitude, log_spaced, BodePoint, FreqOptions};
use quorum_core::model::{SimConfig, Trajectory};
use quorum_core::sde::{replicate_seed, run_replicates};
use quorum_core::sensitivity::{elasticity_with, ElasticityReport, Param, SensitivityOptions};

use crate::analysis::{cross_table, mi_table, noise_table, summarize, te_table, Analysis, AnalysisSettings};
use crate::bundle::{BodeSettings, ResultsBundle, SensitivitySettings};
use crate::error::{CliError, CliResult};
use crate::io::{
    ensure_dir, load_trajectory, read_json, replicate_names, write_bode_csv, write_cells_csv, write_json,
    write_trajectory_csv, Manifest, ReplicateFiles, MANIFEST,
};
use crate::scenario::ScenarioSpec;

pub const RESULTS: &str = "results.json";
pub const BODE: &str = "bode.csv";
pub const SENSITIVITY: &str = "sensitivity.json";

fn check_replicates(n: usize) -> CliResult<()> {
    if n == 0 {
        return Err(CliError::Config("replicates: must be >= 1 (got 0)".into()));
    }
    Ok(())
}

fn write_replicates(
    dir: &Path,
    reps: &[Trajectory],
    cfg: &SimConfig,
    cells: bool,
    manifest: &mut Manifest,
    names: &mut Vec<String>,
) -> CliResult<()> {
    for (r, tr) in reps.iter().enumerate() {
        let (traj_name, cell_names) = replicate_names(r);
        write_trajectory_csv(&dir.join(&traj_name), tr)?;
        names.push(traj_name.clone());
        if cells {
            for (s, name) in cell_names.iter().enumerate() {
                write_cells_csv(&dir.join(name), &tr.times, &tr.m[s])?;
                names.push(name.clone());
            }
        }
        manifest.trajectories.push(ReplicateFiles {
            seed: replicate_seed(cfg.seed, r),
            trajectory: traj_name,
            cells: cells.then_some(cell_names),
        });
    }
    Ok(())
}

/// Trajectory CSVs (and optionally per-cell matrices) for `replicates` runs.
pub fn cmd_simulate(cfg: &SimConfig, out: &Path, replicates: usize, cells: bool) -> CliResult<PathBuf> {
    check_replicates(replicates)?;
    ensure_dir(out)?;
    let reps = run_replicates(cfg, replicates)?;
    let mut manifest = Manifest::new("simulate", cfg, replicates);
    let mut names = Vec::new();
    write_replicates(out, &reps, cfg, cells, &mut manifest, &mut names)?;
    manifest.finish(out, &names)
}

/// Where `analyze` gets its trajectories.
#[derive(Clone, Debug)]
pub enum AnalyzeInput {
    /// Simulate `replicates` runs of the config.
    Config { cfg: SimConfig, replicates: usize },
    /// A directory written by `simulate`.
    Dir(PathBuf),
}

/// Config and replicate trajectories for an analysis input.
pub fn load_input(input: &AnalyzeInput, analyses: &[Analysis]) -> CliResult<(SimConfig, Vec<Trajectory>)> {
    match input {
        AnalyzeInput::Config { cfg, replicates } => {
            check_replicates(*replicates)?;
            Ok((cfg.clone(), run_replicates(cfg, *replicates)?))
        }
        AnalyzeInput::Dir(dir) => {
            let manifest: Manifest = read_json(&dir.join(MANIFEST))?;
            if let Some(a) = analyses.iter().find(|a| a.needs_cells()) {
                if manifest.trajectories.iter().any(|f| f.cells.is_none()) {
                    return Err(CliError::Io(format!(
                        "analysis `{a}` needs per-cell matrices (cells_B.csv, cells_F.csv) that are absent from {}; \
                         re-run simulate with --cells",
                        dir.display()
                    )));
                }
            }
            if manifest.trajectories.is_empty() {
                return Err(CliError::Io(format!("{}: manifest lists no trajectories", dir.display())));
            }
            let reps = manifest
                .trajectories
                .iter()
                .map(|f| load_trajectory(dir, f))
                .collect::<CliResult<Vec<_>>>()?;
            Ok((manifest.config, reps))
        }
    }
}

/// Fills the requested tables of `bundle`.
pub fn run_analyses(
    bundle: &mut ResultsBundle,
    reps: &[Trajectory],
    analyses: &[Analysis],
    settings: &AnalysisSettings,
) -> CliResult<()> {
    if analyses.is_empty() {
        return Err(CliError::Config("analyses: the list is empty".into()));
    }
    bundle.analysis_settings = Some(*settings);
    bundle.summaries = reps.iter().map(summarize).collect();
    for a in analyses {
        match a {
            Analysis::Mi => bundle.mi = Some(mi_table(reps, settings)?),
            Analysis::Cross => bundle.cross = Some(cross_table(reps, settings)?),
            Analysis::Te => bundle.te = Some(te_table(reps, settings)?),
            Analysis::Noise => bundle.noise = Some(noise_table(reps, settings)?),
        }
    }
    Ok(())
}

pub fn cmd_analyze(
    input: &AnalyzeInput,
    analyses: &[Analysis],
    settings: &AnalysisSettings,
    out: &Path,
) -> CliResult<ResultsBundle> {
    if analyses.is_empty() {
        return Err(CliError::Config("analyses: the list is empty".into()));
    }
    let (cfg, reps) = load_input(input, analyses)?;
    ensure_dir(out)?;
    let mut bundle = ResultsBundle::new("analyze", &cfg, reps.len());
    run_analyses(&mut bundle, &reps, analyses, settings)?;
    write_json(&out.join(RESULTS), &bundle)?;
    Manifest::new("analyze", &cfg, reps.len()).finish(out, &[RESULTS.to_string()])?;
    Ok(bundle)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BodeOptions {
    pub freq_min: f64,
    pub freq_max: f64,
    pub freq_points: usize,
    pub n_cycles: usize,
    /// `None` selects 5% of the steady-state autoinducer level.
    pub amplitude: Option<f64>,
    pub replicates: usize,
}

impl Default for BodeOptions {
    fn default() -> Self {
        BodeOptions {
            freq_min: 1e-3,
            freq_max: 10.0,
            freq_points: 20,
            n_cycles: 10,
            amplitude: None,
            replicates: 4,
        }
    }
}

/// Gain and phase per frequency and species.
pub fn bode(cfg: &SimConfig, opts: &BodeOptions) -> CliResult<(BodeSettings, Vec<BodePoint>)> {
    check_replicates(opts.replicates)?;
    let valid = |v: f64| v.is_finite() && v > 0.0;
    if !valid(opts.freq_min) || !valid(opts.freq_max) {
        return Err(CliError::Config(format!(
            "freq-min/freq-max: must be positive (got {}, {})",
            opts.freq_min, opts.freq_max
        )));
    }
    if opts.freq_min >= opts.freq_max {
        return Err(CliError::Config(format!(
            "freq-min: must be below freq-max (got {} >= {})",
            opts.freq_min, opts.freq_max
        )));
    }
    if opts.freq_points < 2 {
        return Err(CliError::Config(format!(
            "freq-points: need at least 2 (got {})",
            opts.freq_points
        )));
    }
    let amplitude = opts.amplitude.unwrap_or_else(|| default_amplitude(cfg));
    let freqs = log_spaced(opts.freq_min, opts.freq_max, opts.freq_points);
    let fopts = FreqOptions {
        replicates: opts.replicates,
        ..FreqOptions::default()
    };
    let points = bode_sweep_with(cfg, &freqs, amplitude, opts.n_cycles, &fopts)?;
    let settings = BodeSettings {
        freq_min: opts.freq_min,
        freq_max: opts.freq_max,
        freq_points: opts.freq_points,
        n_cycles: opts.n_cycles,
        amplitude,
        replicates: opts.replicates,
    };
    Ok((settings, points))
}

pub fn cmd_bode(cfg: &SimConfig, opts: &BodeOptions, out: &Path) -> CliResult<Vec<BodePoint>> {
    let (_, points) = bode(cfg, opts)?;
    ensure_dir(out)?;
    write_bode_csv(&out.join(BODE), &points)?;
    Manifest::new("bode", cfg, opts.replicates).finish(out, &[BODE.to_string()])?;
    Ok(points)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityRequest {
    pub params: Vec<Param>,
    pub epsilon: f64,
    /// Seeds are `replicate_seed(cfg.seed, r)` for `r < replicates`.
    pub replicates: usize,
}

impl Default for SensitivityRequest {
    fn default() -> Self {
        SensitivityRequest {
            params: vec![Param::AlphaLuxs, Param::TauA, Param::TauDelta],
            epsilon: 0.2,
            replicates: 3,
        }
    }
}

/// Parses a comma-separated parameter list.
pub fn parse_params(s: &str) -> CliResult<Vec<Param>> {
    let params: Vec<Param> = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<Param>().map_err(CliError::from))
        .collect::<CliResult<_>>()?;
    if params.is_empty() {
        return Err(CliError::Config(format!(
            "params: the list is empty; valid names: {}",
            Param::valid_names()
        )));
    }
    Ok(params)
}

pub fn sensitivity(
    cfg: &SimConfig,
    req: &SensitivityRequest,
) -> CliResult<(SensitivitySettings, Vec<ElasticityReport>)> {
    check_replicates(req.replicates)?;
    let seeds: Vec<u64> = (0..req.replicates).map(|r| replicate_seed(cfg.seed, r)).collect();
    let opts = SensitivityOptions::default();
    let reports = req
        .params
        .iter()
        .map(|&p| elasticity_with(cfg, p, req.epsilon, &seeds, &opts))
        .collect::<quorum_core::Result<Vec<_>>>()?;
    let settings = SensitivitySettings {
        epsilon: req.epsilon,
        seeds,
        k: opts.k,
        burn_in_frac: opts.burn_in_frac,
    };
    Ok((settings, reports))
}

pub fn cmd_sensitivity(cfg: &SimConfig, req: &SensitivityRequest, out: &Path) -> CliResult<ResultsBundle> {
    let (settings, reports) = sensitivity(cfg, req)?;
    ensure_dir(out)?;
    let mut bundle = ResultsBundle::new("sensitivity", cfg, req.replicates);
    bundle.sensitivity_settings = Some(settings);
    bundle.sensitivity = Some(reports);
    write_json(&out.join(SENSITIVITY), &bundle)?;
    Manifest::new("sensitivity", cfg, req.replicates).finish(out, &[SENSITIVITY.to_string()])?;
    Ok(bundle)
}

/// What `scenario` runs besides the trajectory analyses.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioOptions {
    pub replicates: usize,
    pub analyses: Vec<Analysis>,
    pub settings: AnalysisSettings,
    pub bode: Option<BodeOptions>,
    pub sensitivity: Option<SensitivityRequest>,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        ScenarioOptions {
            replicates: 5,
            analyses: Analysis::ALL.to_vec(),
            settings: AnalysisSettings::default(),
            bode: Some(BodeOptions::default()),
            sensitivity: Some(SensitivityRequest::default()),
        }
    }
}

/// Simulates the scenario, writes replicate 0 and every requested table.
pub fn cmd_scenario(
    base: &SimConfig,
    spec: &ScenarioSpec,
    opts: &ScenarioOptions,
    out: &Path,
) -> CliResult<ResultsBundle> {
    check_replicates(opts.replicates)?;
    let cfg = spec.apply(base)?;
    let reps = run_replicates(&cfg, opts.replicates)?;
    ensure_dir(out)?;
    let mut bundle = ResultsBundle::new("scenario", &cfg, opts.replicates);
    bundle.scenario = Some(spec.clone());
    if opts.analyses.is_empty() {
        bundle.summaries = reps.iter().map(summarize).collect();
    } else {
        run_analyses(&mut bundle, &reps, &opts.analyses, &opts.settings)?;
    }
    let mut names = Vec::new();
    if let Some(b) = &opts.bode {
        let (settings, points) = bode(&cfg, b)?;
        write_bode_csv(&out.join(BODE), &points)?;
        names.push(BODE.to_string());
        bundle.bode_settings = Some(settings);
        bundle.bode = Some(points);
    }
    if let Some(req) = &opts.sensitivity {
        let (settings, reports) = sensitivity(&cfg, req)?;
        bundle.sensitivity_settings = Some(settings);
        bundle.sensitivity = Some(reports);
    }
    let mut manifest = Manifest::new("scenario", &cfg, opts.replicates);
    write_replicates(out, &reps[..1], &cfg, false, &mut manifest, &mut names)?;
    write_json(&out.join(RESULTS), &bundle)?;
    names.push(RESULTS.to_string());
    manifest.finish(out, &names)?;
    Ok(bundle)
}
