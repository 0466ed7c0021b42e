use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use quorum_cli::analysis::{Analysis, AnalysisSettings};
use quorum_cli::commands::{
    cmd_analyze, cmd_bode, cmd_scenario, cmd_sensitivity, cmd_simulate, parse_params, AnalyzeInput, BodeOptions,
    ScenarioOptions, SensitivityRequest,
};
use quorum_cli::config::{apply_override, load_or_default, split_override};
use quorum_cli::scenario::{ScenarioName, ScenarioSpec};
use quorum_cli::{CliError, CliResult};
use quorum_core::model::SimConfig;

#[derive(Parser)]
#[command(name = "quorum", version, about = "Two-species quorum-sensing channel experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML config or a run manifest; defaults to the bundled baseline.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Config override as dotted.key=TOML_VALUE, e.g. env.sigma_a=0.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Clone)]
struct ScenarioArg {
    /// Applies a named composition before running.
    #[arg(long)]
    scenario: Option<String>,
    /// Final densities F,B for the custom scenario.
    #[arg(long, value_name = "F,B")]
    split: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate and write trajectory CSVs plus a manifest.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        /// Also write the per-cell monitor matrices.
        #[arg(long)]
        cells: bool,
    },
    /// MI, cross-species MI, transfer entropy and noise decomposition.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Directory written by `simulate`; otherwise the config is simulated.
        #[arg(long, conflicts_with_all = ["config", "seed", "scenario", "split", "overrides"])]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        replicates: usize,
        #[arg(long, default_value = "mi,cross,te,noise")]
        analyses: String,
        #[command(flatten)]
        est: EstimatorArgs,
    },
    /// Frequency response of the cell-mean monitors to autoinducer forcing.
    Bode {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        scenario: ScenarioArg,
        #[command(flatten)]
        freq: FreqArgs,
    },
    /// Elasticities of the average MI.
    Sensitivity {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        scenario: ScenarioArg,
        #[command(flatten)]
        sens: SensArgs,
    },
    /// Runs a named scenario end to end.
    Scenario {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, default_value_t = 5)]
        replicates: usize,
        #[arg(long, default_value = "mi,cross,te,noise")]
        analyses: String,
        #[command(flatten)]
        est: EstimatorArgs,
        #[arg(long)]
        no_bode: bool,
        #[arg(long)]
        no_sensitivity: bool,
        #[command(flatten)]
        freq: FreqArgs,
        #[command(flatten)]
        sens: SensArgs,
    },
}

#[derive(Args, Clone)]
struct EstimatorArgs {
    #[arg(long, default_value_t = 4)]
    k: usize,
    /// Fraction of records discarded before estimation.
    #[arg(long, default_value_t = 0.1)]
    burn_in: f64,
    #[arg(long, default_value_t = 200)]
    n_boot: usize,
}

#[derive(Args, Clone)]
struct FreqArgs {
    #[arg(long, default_value_t = 1e-3)]
    freq_min: f64,
    #[arg(long, default_value_t = 10.0)]
    freq_max: f64,
    #[arg(long, default_value_t = 20)]
    freq_points: usize,
    #[arg(long, default_value_t = 10)]
    cycles: usize,
    /// Forcing amplitude; defaults to 5% of the steady-state autoinducer.
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long = "bode-replicates", default_value_t = 4)]
    bode_replicates: usize,
}

#[derive(Args, Clone)]
struct SensArgs {
    #[arg(long, default_value = "alpha_luxs,tau_a,tau_delta")]
    params: String,
    #[arg(long, default_value_t = 0.2)]
    epsilon: f64,
    #[arg(long = "sensitivity-replicates", default_value_t = 3)]
    sensitivity_replicates: usize,
}

impl EstimatorArgs {
    fn settings(&self, seed: u64) -> CliResult<AnalysisSettings> {
        if self.k == 0 {
            return Err(CliError::Config("k: must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(CliError::Config(format!("burn-in: must be in [0, 1) (got {})", self.burn_in)));
        }
        Ok(AnalysisSettings {
            k: self.k,
            burn_in_frac: self.burn_in,
            n_boot: self.n_boot,
            seed,
            ..AnalysisSettings::default()
        })
    }
}

impl FreqArgs {
    fn options(&self) -> BodeOptions {
        BodeOptions {
            freq_min: self.freq_min,
            freq_max: self.freq_max,
            freq_points: self.freq_points,
            n_cycles: self.cycles,
            amplitude: self.amplitude,
            replicates: self.bode_replicates,
        }
    }
}

impl SensArgs {
    fn request(&self) -> CliResult<SensitivityRequest> {
        Ok(SensitivityRequest {
            params: parse_params(&self.params)?,
            epsilon: self.epsilon,
            replicates: self.sensitivity_replicates,
        })
    }
}

fn base_config(common: &Common) -> CliResult<SimConfig> {
    let mut cfg = load_or_default(common.config.as_deref())?;
    for o in &common.overrides {
        let (k, v) = split_override(o)?;
        cfg = apply_override(&cfg, k, v)?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn scenario_spec(arg: &ScenarioArg) -> CliResult<Option<ScenarioSpec>> {
    let split = arg
        .split
        .as_deref()
        .map(|s| {
            let parts: Vec<&str> = s.split(',').map(str::trim).collect();
            match parts.as_slice() {
                [f, b] => match (f.parse::<f64>(), b.parse::<f64>()) {
                    (Ok(f), Ok(b)) => Ok((f, b)),
                    _ => Err(CliError::Config(format!("split: `{s}` is not F,B"))),
                },
                _ => Err(CliError::Config(format!("split: `{s}` is not F,B"))),
            }
        })
        .transpose()?;
    match (arg.scenario.as_deref(), split) {
        (None, None) => Ok(None),
        (None, Some(fb)) | (Some("custom"), Some(fb)) => ScenarioSpec::custom(fb).map(Some),
        (Some(name), None) => ScenarioSpec::named(name.parse::<ScenarioName>()?).map(Some),
        (Some(name), Some(_)) => Err(CliError::Config(format!(
            "split: only valid with --scenario custom (got --scenario {name})"
        ))),
    }
}

fn configured(common: &Common, arg: &ScenarioArg) -> CliResult<SimConfig> {
    let cfg = base_config(common)?;
    match scenario_spec(arg)? {
        Some(spec) => spec.apply(&cfg),
        None => Ok(cfg),
    }
}

fn init_threads(n: Option<usize>) -> CliResult<()> {
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Config("threads: must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    }
    Ok(())
}

fn report(out: &Path, what: &str) {
    eprintln!("wrote {what} to {}", out.display());
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate {
            common,
            scenario,
            replicates,
            cells,
        } => {
            init_threads(common.threads)?;
            let cfg = configured(&common, &scenario)?;
            cmd_simulate(&cfg, &common.out, replicates, cells)?;
            report(&common.out, "trajectories");
        }
        Command::Analyze {
            common,
            scenario,
            input,
            replicates,
            analyses,
            est,
        } => {
            init_threads(common.threads)?;
            let analyses = Analysis::parse_list(&analyses)?;
            let (source, seed) = match input {
                Some(dir) => (AnalyzeInput::Dir(dir), 0),
                None => {
                    let cfg = configured(&common, &scenario)?;
                    let seed = cfg.seed;
                    (AnalyzeInput::Config { cfg, replicates }, seed)
                }
            };
            cmd_analyze(&source, &analyses, &est.settings(seed)?, &common.out)?;
            report(&common.out, "results");
        }
        Command::Bode { common, scenario, freq } => {
            init_threads(common.threads)?;
            let cfg = configured(&common, &scenario)?;
            cmd_bode(&cfg, &freq.options(), &common.out)?;
            report(&common.out, "Bode table");
        }
        Command::Sensitivity { common, scenario, sens } => {
            init_threads(common.threads)?;
            let cfg = configured(&common, &scenario)?;
            cmd_sensitivity(&cfg, &sens.request()?, &common.out)?;
            report(&common.out, "elasticities");
        }
        Command::Scenario {
            common,
            scenario,
            replicates,
            analyses,
            est,
            no_bode,
            no_sensitivity,
            freq,
            sens,
        } => {
            init_threads(common.threads)?;
            let spec = scenario_spec(&scenario)?
                .ok_or_else(|| CliError::Config("scenario: --scenario NAME is required".into()))?;
            let base = base_config(&common)?;
            let opts = ScenarioOptions {
                replicates,
                analyses: Analysis::parse_list(&analyses)?,
                settings: est.settings(base.seed)?,
                bode: (!no_bode).then(|| freq.options()),
                sensitivity: if no_sensitivity { None } else { Some(sens.request()?) },
            };
            cmd_scenario(&base, &spec, &opts, &common.out)?;
            report(&common.out, "scenario results");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
