use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use divrec::diversity::{profile_domains, Level, Metric};
use divrec::evaluation::{false_positive_rates, resampling_null, DEFAULT_FAIRNESS_K_MAX, DEFAULT_MIN_BIN_USERS};
use divrec::ingest::{load_panel, parse_timestamp, split, PanelDataset, SplitMode, DEFAULT_MIN_VISITORS};
use divrec::pipeline::{Experiment, ExperimentConfig};
use divrec::recommender::{write_lists, Algorithm, DEFAULT_NEIGHBORS};
use divrec::report;
use divrec::similarity::Kernel;
use divrec::stats::{self, StratumKey};
use divrec::synth::{generate, SynthConfig};
use divrec::{Error, Result};

#[derive(Debug, Parser, Serialize)]
#[command(name = "divrec", version, about = "Diversity-aware news-domain recommendation and evaluation")]
struct Cli {
    /// Directory for reports and resolved configs.
    #[arg(long, global = true, env = "DIVREC_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,

    /// Worker thread cap (default: all cores).
    #[arg(long, global = true, env = "DIVREC_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Generate a synthetic panel with a planted effect.
    Simulate(SimulateArgs),
    /// Load traffic, survey, score and slant files into panel.json.
    Ingest(IngestArgs),
    /// Audience diversity per domain.
    Diversity(DiversityArgs),
    /// Ranked lists per user and algorithm.
    Recommend(RecommendArgs),
    /// Per-k trust, precision and RMSE.
    Evaluate(EvaluateArgs),
    /// Rank-discounted trust change against actual visits.
    Deltaq(DeltaqArgs),
    /// ΔQ by user stratum.
    Stratify(StratifyArgs),
    /// Resampling null for CF+D precision.
    Nulltest(NulltestArgs),
    /// Left/right false-positive rates of CF+D.
    Fairness(FairnessArgs),
    /// Correlations and regressions over news domains.
    Stats(StatsArgs),
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[arg(long, default_value_t = 1000)]
    users: usize,
    #[arg(long, default_value_t = 200)]
    domains: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = SynthConfig::default().beta0)]
    beta0: f64,
    #[arg(long, default_value_t = SynthConfig::default().beta1)]
    beta1: f64,
    #[arg(long, default_value_t = SynthConfig::default().beta2)]
    beta2: f64,
    #[arg(long, default_value_t = SynthConfig::default().noise_sd)]
    noise: f64,
    #[arg(long, default_value_t = 2)]
    waves: usize,
    /// Shift slants off the audience midpoint.
    #[arg(long)]
    asymmetric_slants: bool,
    /// Pair every domain and user with a twin reflected about the midpoint.
    #[arg(long)]
    mirror: bool,
}

#[derive(Debug, Args, Serialize)]
struct SplitArgs {
    /// random | longitudinal
    #[arg(long = "split", default_value = "random")]
    mode: String,
    #[arg(long, default_value_t = 0.7)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Longitudinal boundary (ISO-8601 or epoch seconds).
    #[arg(long)]
    boundary: Option<String>,
}

impl SplitArgs {
    fn resolve(&self) -> Result<SplitMode> {
        match self.mode.as_str() {
            "random" => {
                if self.boundary.is_some() {
                    return Err(Error::InvalidInput("--boundary only applies to --split longitudinal".into()));
                }
                Ok(SplitMode::Random {
                    train_fraction: self.train_fraction,
                    seed: self.seed,
                })
            }
            "longitudinal" => {
                let raw = self
                    .boundary
                    .as_deref()
                    .ok_or_else(|| Error::InvalidInput("--split longitudinal needs --boundary".into()))?;
                let boundary = parse_timestamp(raw)?
                    .ok_or_else(|| Error::InvalidInput("empty --boundary".into()))?;
                Ok(SplitMode::Longitudinal { boundary })
            }
            other => Err(Error::InvalidInput(format!("unknown split mode {other:?}"))),
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct IngestArgs {
    /// One traffic file per wave.
    #[arg(long, required = true)]
    traffic: Vec<PathBuf>,
    #[arg(long)]
    survey: PathBuf,
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    slants: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MIN_VISITORS)]
    min_visitors: usize,
    #[command(flatten)]
    split: SplitArgs,
}

#[derive(Debug, Args, Serialize)]
struct ExperimentArgs {
    /// panel.json written by `ingest`.
    #[arg(long)]
    panel: PathBuf,
    #[arg(long, default_value = "kendall")]
    kernel: Kernel,
    #[arg(long, default_value_t = DEFAULT_NEIGHBORS)]
    neighbors: usize,
    #[arg(long, default_value = "variance")]
    metric: Metric,
    #[arg(long, default_value = "user")]
    level: Level,
    /// Compute diversity from the whole panel instead of training traffic.
    #[arg(long)]
    whole_panel_diversity: bool,
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    psi: f64,
    /// Logistic location (default: mean training diversity).
    #[arg(long)]
    t: Option<f64>,
    #[command(flatten)]
    split: SplitArgs,
}

impl ExperimentArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig {
            split: self.split.resolve()?,
            kernel: self.kernel,
            n_neighbors: self.neighbors,
            metric: self.metric,
            level: self.level,
            restrict_to_train: !self.whole_panel_diversity,
            a: self.a,
            psi: self.psi,
            t: self.t,
        })
    }

    fn build(&self) -> Result<(PanelDataset, Experiment)> {
        let panel = read_panel(&self.panel)?;
        let exp = Experiment::build(&panel, &self.config()?)?;
        Ok((panel, exp))
    }
}

fn parse_list<T: std::str::FromStr<Err = Error>>(raw: &str) -> Result<Vec<T>> {
    raw.split(',').filter(|s| !s.trim().is_empty()).map(|s| s.trim().parse()).collect()
}

#[derive(Debug, Args, Serialize)]
struct DiversityArgs {
    #[arg(long)]
    panel: PathBuf,
    /// Comma-separated metrics (default: all six).
    #[arg(long)]
    metrics: Option<String>,
    /// Count only training traffic of the given split.
    #[arg(long)]
    restrict_to_train: bool,
    #[command(flatten)]
    split: SplitArgs,
}

#[derive(Debug, Args, Serialize)]
struct RecommendArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[arg(long, default_value = "cf,cfd,popularity,actual")]
    algo: String,
}

#[derive(Debug, Args, Serialize)]
struct EvaluateArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[arg(long, default_value = "cf,cfd,popularity,actual")]
    algo: String,
    #[arg(long, default_value_t = DEFAULT_FAIRNESS_K_MAX)]
    k_max: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_BIN_USERS)]
    min_bin_users: usize,
    /// Also report bins with fewer users than --min-bin-users.
    #[arg(long)]
    no_cap: bool,
}

#[derive(Debug, Args, Serialize)]
struct DeltaqArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[arg(long, default_value = "cf,cfd,popularity")]
    algo: String,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
}

#[derive(Debug, Args, Serialize)]
struct StratifyArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[arg(long, default_value = "cf,cfd,popularity")]
    algo: String,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Comma-separated keys (default: all that the inputs allow).
    #[arg(long)]
    keys: Option<String>,
}

#[derive(Debug, Args, Serialize)]
struct NulltestArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 1000)]
    replicates: usize,
    /// Resampling seed (default: the split seed).
    #[arg(long)]
    null_seed: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
struct FairnessArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    #[arg(long, default_value_t = DEFAULT_FAIRNESS_K_MAX)]
    k_max: usize,
}

#[derive(Debug, Args, Serialize)]
struct StatsArgs {
    #[arg(long)]
    panel: PathBuf,
}

fn read_panel(path: &Path) -> Result<PanelDataset> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    PanelDataset::from_json(&raw)
}

fn write_config(cli: &Cli, name: &str) -> Result<()> {
    #[derive(Serialize)]
    struct Resolved<'a> {
        version: &'a str,
        #[serde(flatten)]
        cli: &'a Cli,
    }
    report::write_json(
        &cli.out_dir.join(format!("{name}.config.json")),
        &Resolved {
            version: env!("CARGO_PKG_VERSION"),
            cli,
        },
    )
}

fn run(cli: &Cli) -> Result<()> {
    let out = cli.out_dir.as_path();
    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    let csv_to = |name: &str| out.join(name);
    match &cli.command {
        Command::Simulate(a) => {
            write_config(cli, "simulate")?;
            let cfg = SynthConfig {
                n_users: a.users,
                n_domains: a.domains,
                seed: a.seed,
                beta0: a.beta0,
                beta1: a.beta1,
                beta2: a.beta2,
                noise_sd: a.noise,
                waves: a.waves,
                symmetric_slants: !a.asymmetric_slants,
                mirror: a.mirror,
                ..SynthConfig::default()
            };
            let data = generate(&cfg)?;
            for p in data.write(out)? {
                info!("wrote {}", p.display());
            }
        }
        Command::Ingest(a) => {
            write_config(cli, "ingest")?;
            let panel = load_panel(&a.traffic, &a.survey, &a.scores, a.slants.as_deref(), a.min_visitors)?;
            let matrix = split(&panel, a.split.resolve()?)?;
            let path = out.join("panel.json");
            std::fs::write(&path, panel.to_json()? + "\n").map_err(|e| Error::Io { path, source: e })?;
            report::to_file(&csv_to("ratings.csv"), |w| matrix.write_triplets(&panel, w))?;
            info!(
                "{} users, {} domains, {} dropped without survey",
                panel.n_users(),
                panel.n_domains(),
                panel.dropped_users_without_survey
            );
        }
        Command::Diversity(a) => {
            write_config(cli, "diversity")?;
            let panel = read_panel(&a.panel)?;
            let metrics = match &a.metrics {
                Some(raw) => parse_list(raw)?,
                None => Metric::ALL.to_vec(),
            };
            let matrix = if a.restrict_to_train {
                Some(split(&panel, a.split.resolve()?)?)
            } else {
                None
            };
            let profiles = profile_domains(&panel, matrix.as_ref());
            report::to_file(&csv_to("diversity.csv"), |w| {
                report::write_diversity(&profiles, &metrics, &[Level::User, Level::Pageview], w)
            })?;
        }
        Command::Recommend(a) => {
            write_config(cli, "recommend")?;
            let algos: Vec<Algorithm> = parse_list(&a.algo)?;
            let (panel, exp) = a.experiment.build()?;
            let lists: Vec<_> = algos.iter().flat_map(|&al| exp.lists(al)).collect();
            report::to_file(&csv_to("recommendations.csv"), |w| write_lists(&panel, &lists, w))?;
        }
        Command::Evaluate(a) => {
            write_config(cli, "evaluate")?;
            let algos: Vec<Algorithm> = parse_list(&a.algo)?;
            let (_, exp) = a.experiment.build()?;
            let bins = exp.per_k(&algos, a.k_max, a.min_bin_users)?;
            report::to_file(&csv_to("per_k.csv"), |w| report::write_per_k(&bins, a.no_cap, w))?;
        }
        Command::Deltaq(a) => {
            write_config(cli, "deltaq")?;
            let algos: Vec<Algorithm> = parse_list(&a.algo)?;
            let (panel, exp) = a.experiment.build()?;
            let results = exp.delta_q(&algos, a.alpha)?;
            report::to_file(&csv_to("delta_q.csv"), |w| report::write_delta_q(&panel, &results, w))?;
        }
        Command::Stratify(a) => {
            write_config(cli, "stratify")?;
            let algos: Vec<Algorithm> = parse_list(&a.algo)?;
            let (panel, exp) = a.experiment.build()?;
            let keys: Vec<StratumKey> = match &a.keys {
                Some(raw) => parse_list(raw)?,
                None => StratumKey::ALL
                    .into_iter()
                    .filter(|k| panel.has_slants() || !k.needs_slants())
                    .collect(),
            };
            let results = exp.delta_q(&algos, a.alpha)?;
            let population: std::collections::BTreeSet<u32> = results.iter().map(|r| r.user).collect();
            let mut rows = Vec::new();
            for key in keys {
                let values: Vec<(u32, f64)> = stats::user_statistic(key, &panel, &exp.model)?
                    .into_iter()
                    .filter(|(u, _)| population.contains(u))
                    .collect();
                let strata = stats::stratify(key, &values)?;
                rows.extend(stats::stratified_delta_q(&strata, &results)?);
            }
            report::to_file(&csv_to("stratified.csv"), |w| report::write_stratified(&rows, w))?;
        }
        Command::Nulltest(a) => {
            write_config(cli, "nulltest")?;
            let (_, exp) = a.experiment.build()?;
            let seed = a.null_seed.unwrap_or(a.experiment.split.seed);
            let result = resampling_null(&exp.candidates, a.k, a.replicates, seed)?;
            info!(
                "observed precision {:.4}, p = {:.4}",
                result.observed_precision, result.p_plus_one
            );
            report::write_json(&csv_to("null_test.json"), &result)?;
        }
        Command::Fairness(a) => {
            write_config(cli, "fairness")?;
            let (panel, exp) = a.experiment.build()?;
            let rows = false_positive_rates(
                &exp.lists(Algorithm::Cf),
                &exp.lists(Algorithm::Cfd),
                &exp.news_scores,
                &panel.slants,
                a.k_max,
            )?;
            report::to_file(&csv_to("fairness.csv"), |w| report::write_fairness(&rows, w))?;
        }
        Command::Stats(a) => {
            write_config(cli, "stats")?;
            let panel = read_panel(&a.panel)?;
            let obs = stats::domain_observations(&panel)?;
            let corr = stats::correlation_report(&obs);
            let reg = stats::regression_report(&obs)?;
            report::to_file(&csv_to("correlations.csv"), |w| report::write_correlations(&corr, w))?;
            report::to_file(&csv_to("regressions.csv"), |w| report::write_regressions(&reg, w))?;
        }
    }
    Ok(())
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    let body = serde_json::json!({ "error": kind, "message": message, "exit_code": code });
    eprintln!("{body}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return fail("usage", e.to_string().trim(), 1);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return fail("invalid_input", "--threads must be at least 1", 1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail("invalid_input", &e.to_string(), 1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string(), if e.is_input() { 1 } else { 2 }),
    }
}
