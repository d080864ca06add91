//! Command-line surface. Every command writes its numeric results into an
//! output directory together with `manifest.json`, and prints a short
//! summary on standard output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use indist_core::bayes::{
    self, confidence_curve, infer_x, log_likelihood_ratio, stage_a, stage_b, Favored, InputFamily, OutcomeModel, ThresholdScan,
};
use indist_core::distance::{tvd_report, tvd_report_for};
use indist_core::interference::collision_free_inputs;
use indist_core::matrices::{self, fidelity, CircuitParams, NotableId};
use indist_core::scattershot::{analyze, sample_from_family, ResequenceOptions};
use indist_core::search::{self, EnsembleHistogram, EnsembleResult, TvdStatistic};
use indist_core::tomography::{
    canonical_phases, eight_mode_input_pairs, all_pairs, reconstruct, synth_dataset, DeviceModel, FastTemplate, FitOptions,
    ReconstructOptions,
};
use indist_core::{CollisionPolicy, ModeConfig, UnitaryMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formats::{self, num, FormatError};
use crate::manifest::{FileDigest, RunManifest};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Core(#[from] indist_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Args(#[from] clap::Error),
}

impl CliError {
    /// 2 for invalid input, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Core(indist_core::Error::NoConvergence(_) | indist_core::Error::NoSignChange(_)) => 3,
            _ => 2,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Parser, Debug)]
#[command(name = "indist", version, about = "Photon indistinguishability tests for linear interferometers", args_override_self = true)]
pub struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true, env = "INDIST_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Interferometer matrices.
    #[command(subcommand)]
    Matrix(MatrixCommand),
    /// Distance between indistinguishable and distinguishable statistics.
    Tvd(TvdArgs),
    /// Ensembles and optimization of interferometers.
    #[command(subcommand)]
    Search(SearchCommand),
    /// Hypothesis tests and inference of the indistinguishability.
    #[command(subcommand)]
    Bayes(BayesCommand),
    /// Device reconstruction from single-photon and two-photon data.
    #[command(subcommand)]
    Tomo(TomoCommand),
    /// Random-input event streams.
    #[command(subcommand)]
    Scattershot(ScattershotCommand),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Subcommand, Debug)]
pub enum MatrixCommand {
    Gen(MatrixGenArgs),
}

#[derive(Subcommand, Debug)]
pub enum SearchCommand {
    /// Screen Haar-random unitaries.
    Haar(HaarArgs),
    /// Random phases on the fast architecture.
    Phases(PhasesArgs),
    /// Multi-restart local maximization.
    Optimize(OptimizeArgs),
}

#[derive(Subcommand, Debug)]
pub enum BayesCommand {
    /// Confidence of the binary test versus the number of events.
    Test(BayesTestArgs),
    /// Posterior over the indistinguishability from an event file.
    Infer(BayesInferArgs),
    /// Convex likelihood-ratio test on an event file.
    Convex(BayesConvexArgs),
    /// Indistinguishability at which the binary test flips.
    Threshold(BayesThresholdArgs),
}

#[derive(Subcommand, Debug)]
pub enum TomoCommand {
    /// Synthetic probabilities and visibilities from a reference device.
    Synth(TomoSynthArgs),
    /// Reconstruct a device from data files.
    Fit(TomoFitArgs),
}

#[derive(Subcommand, Debug)]
pub enum ScattershotCommand {
    Simulate(SimulateArgs),
    Analyze(AnalyzeArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Out {
    /// Output directory (created if missing).
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct Inputs {
    /// One-based input modes, e.g. `1,3`; repeatable. Default: every collision-free input.
    #[arg(long = "input", value_name = "MODES")]
    pub inputs: Vec<String>,
    /// Use every collision-free input (the default).
    #[arg(long, conflicts_with = "inputs")]
    pub all: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Policy {
    /// Every occupation pattern separately.
    Col,
    /// Collision patterns merged into one outcome.
    Binned,
}

impl From<Policy> for CollisionPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Col => CollisionPolicy::WithCollisions,
            Policy::Binned => CollisionPolicy::Binned,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Model {
    /// Collision-free outcomes only, renormalized.
    Postselected,
    Col,
    Binned,
}

impl From<Model> for OutcomeModel {
    fn from(m: Model) -> Self {
        match m {
            Model::Postselected => OutcomeModel::PostSelected,
            Model::Col => OutcomeModel::Policy(CollisionPolicy::WithCollisions),
            Model::Binned => OutcomeModel::Policy(CollisionPolicy::Binned),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Statistic {
    /// Best single input.
    Max,
    /// Mean over all collision-free inputs.
    Avg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Sylvester,
    Fourier,
    Notable,
    Haar,
    Fast,
}

#[derive(Args, Debug)]
pub struct MatrixGenArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    /// Log2 of the mode count (sylvester, fast).
    #[arg(long)]
    pub p: Option<u32>,
    /// Mode count (fourier, haar).
    #[arg(long)]
    pub modes: Option<usize>,
    /// Notable matrix name: U1..U10 or U4main.
    #[arg(long)]
    pub name: Option<String>,
    /// Seed (haar, fast with random phases).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Transmissivity of every coupler (fast; default 2^-1/2).
    #[arg(long)]
    pub tau: Option<f64>,
    /// Phase of every phase shifter (fast; default 0).
    #[arg(long)]
    pub phi: Option<f64>,
    /// Phases drawn uniformly from [0, 2π) (fast).
    #[arg(long)]
    pub random_phases: bool,
    #[command(flatten)]
    pub out: Out,
}

#[derive(Args, Debug)]
pub struct TvdArgs {
    /// Matrix file.
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub photons: usize,
    #[arg(long, value_enum, default_value = "col")]
    pub policy: Policy,
    #[command(flatten)]
    pub inputs: Inputs,
    #[command(flatten)]
    pub out: Out,
}

#[derive(Args, Debug, Clone)]
pub struct EnsembleOpts {
    #[arg(long)]
    pub photons: usize,
    #[arg(long, value_enum, default_value = "col")]
    pub policy: Policy,
    #[arg(long, value_enum, default_value = "avg")]
    pub statistic: Statistic,
    /// Score one fixed input (one-based modes) instead of a statistic.
    #[arg(long, conflicts_with = "statistic")]
    pub input: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = EnsembleHistogram::DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct HaarArgs {
    #[arg(long)]
    pub modes: usize,
    #[command(flatten)]
    pub ensemble: EnsembleOpts,
    #[command(flatten)]
    pub out: Out,
}

#[derive(Args, Debug)]
pub struct PhasesArgs {
    /// Log2 of the mode count.
    #[arg(long)]
    pub p: u32,
    #[command(flatten)]
    pub ensemble: EnsembleOpts,
    #[command(flatten)]
    pub out: Out,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub modes: usize,
    #[arg(long)]
    pub photons: usize,
    #[arg(long, value_enum, default_value = "col")]
    pub policy: Policy,
    #[arg(long, value_enum, default_value = "avg")]
    pub statistic: Statistic,
    #[arg(long, conflicts_with = "statistic")]
    pub input: Option<String>,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub out: Out,
}

#[derive(Args, Debug, Clone)]
pub struct Setup {
    /// Matrix file.
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub photons: usize,
    #[command(flatten)]
    pub inputs: Inputs,
    #[arg(long, value_enum, default_value = "postselected")]
    pub model: Model,
}

#[derive(Args, Debug)]
pub struct BayesTestArgs {
    #[command(flatten)]
    pub setup: Setup,
    #[arg(long, default_value_t = 100)]
    pub max_events: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub out: Out,
}

#[derive(Args, Debug)]
pub struct BayesInferArgs {
    #[command(flatten)]
    pub setup: Setup,
    /// Event file.
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long, default_value_t = bayes::DEFAULT_GRID)]
    pub grid: usize,
    #[command(flatten)]
    pub out: Out,
}

#[derive(Args, Debug)]
pub struct BayesConvexArgs {
    #[command(flatten)]
    pub setup: Setup,
    #[arg(long)]
    pub events: PathBuf,
    /// Simulated events per repeat (default: as many as in the data).
    #[arg(long)]
    pub n_sim: Option<usize>,
    #[arg(long, default_value_t = 20)]
    pub repeats: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub out: Out,
}

#[derive(Args, Debug)]
pub struct BayesThresholdArgs {
    #[command(flatten)]
    pub setup: Setup,
    #[arg(long, default_value_t = 1000)]
    pub events_per_sample: usize,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub out: Out,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Device {
    /// 4-mode reference device.
    Four,
    /// 8-mode reference device.
    Eight,
}

#[derive(Args, Debug)]
pub struct TomoSynthArgs {
    #[arg(long, value_enum)]
    pub device: Device,
    /// Relative noise on probabilities, absolute noise on visibilities.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub out: Out,
}

#[derive(Args, Debug)]
pub struct TomoFitArgs {
    /// Single-photon probability matrix (row: output, column: input).
    #[arg(long)]
    pub probs: PathBuf,
    /// Error bars of the probabilities.
    #[arg(long)]
    pub errors: PathBuf,
    #[arg(long)]
    pub visibilities: PathBuf,
    /// Device file to compare against.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub restarts: usize,
    #[arg(long, default_value_t = 100)]
    pub bootstrap: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub out: Out,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub setup: Setup,
    /// Indistinguishability of the simulated photons.
    #[arg(long)]
    pub x: f64,
    #[arg(long)]
    pub events: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub out: Out,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub setup: Setup,
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long, default_value_t = bayes::DEFAULT_GRID)]
    pub grid: usize,
    /// Also estimate the spread over reorderings of the events.
    #[arg(long)]
    pub band: bool,
    #[arg(long, default_value_t = 100)]
    pub permutations: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub out: Out,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    /// Manifest of the run to repeat.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for the repeat.
    #[arg(long, short)]
    pub out: PathBuf,
}

/// Reference device parameters as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceFile {
    pub p: u32,
    pub tau: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
    pub eta: Vec<f64>,
}

impl DeviceFile {
    pub fn from_model(m: &DeviceModel) -> Self {
        Self { p: m.circuit().p(), tau: m.circuit().tau().to_vec(), phi: m.circuit().phi().to_vec(), eta: m.eta().to_vec() }
    }

    pub fn to_model(&self) -> indist_core::Result<DeviceModel> {
        DeviceModel::new(CircuitParams::new(self.p, self.tau.clone(), self.phi.clone())?, self.eta.clone())
    }
}

#[derive(Clone, Debug, Serialize)]
struct PhaseEntry {
    layer: u32,
    mode: usize,
    value: f64,
    error: f64,
}

#[derive(Clone, Debug, Serialize)]
struct TomoReport {
    p: u32,
    tau: Vec<Vec<f64>>,
    tau_err: Vec<Vec<f64>>,
    eta: Vec<f64>,
    eta_err: Vec<f64>,
    phases: Vec<PhaseEntry>,
    chi2_tau: f64,
    chi2_phi: f64,
    fidelity_to_ideal: f64,
    fidelity_to_truth: Option<f64>,
    bootstrap_samples: usize,
}

/// Bookkeeping for one run: output directory, digests and summary text.
struct Run {
    out: PathBuf,
    manifest: RunManifest,
    summary: String,
}

impl Run {
    fn new(command: &str, argv: &[String], out: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(out).map_err(|source| FormatError::Io { path: out.to_path_buf(), source })?;
        Ok(Self {
            out: out.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                argv: argv.to_vec(),
                seed: None,
                version: env!("CARGO_PKG_VERSION").to_string(),
                inputs: Vec::new(),
                outputs: Vec::new(),
            },
            summary: String::new(),
        })
    }

    /// The given seed, or a fresh one recorded in the manifest's argv.
    fn seed(&mut self, given: Option<u64>) -> u64 {
        let seed = given.unwrap_or_else(fresh_seed);
        if given.is_none() {
            self.manifest.argv.push("--seed".into());
            self.manifest.argv.push(seed.to_string());
        }
        self.manifest.seed = Some(seed);
        seed
    }

    fn read(&mut self, path: &Path) -> CliResult<String> {
        let text = formats::read_text(path)?;
        self.manifest.inputs.push(FileDigest::of(&path.display().to_string(), text.as_bytes()));
        Ok(text)
    }

    fn parse<T>(&mut self, path: &Path, parse: impl FnOnce(&str) -> Result<T, formats::ParseError>) -> CliResult<T> {
        let text = self.read(path)?;
        parse(&text).map_err(|e| CliError::Format(e.at(path)))
    }

    fn write(&mut self, name: &str, text: &str) -> CliResult<()> {
        formats::write_text(&self.out.join(name), text)?;
        self.manifest.outputs.push(FileDigest::of(name, text.as_bytes()));
        Ok(())
    }

    fn say(&mut self, line: impl AsRef<str>) {
        self.summary.push_str(line.as_ref());
        self.summary.push('\n');
    }

    fn finish(self) -> CliResult<String> {
        self.manifest.write(&self.out.join("manifest.json"))?;
        Ok(self.summary)
    }
}

fn fresh_seed() -> u64 {
    use std::hash::{BuildHasher, Hasher};
    let mut h = std::collections::hash_map::RandomState::new().build_hasher();
    if let Ok(t) = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH) {
        h.write_u128(t.as_nanos());
    }
    h.finish()
}

/// Drops an option and its value from a command line.
fn strip_option(argv: &[String], names: &[&str]) -> Vec<String> {
    let mut out = Vec::with_capacity(argv.len());
    let mut skip = false;
    for a in argv {
        if skip {
            skip = false;
        } else if names.contains(&a.as_str()) {
            skip = true;
        } else if !names.iter().any(|n| a.starts_with(&format!("{n}="))) {
            out.push(a.clone());
        }
    }
    out
}

/// Parses and runs a command line; returns the summary text.
pub fn run_args<I, T>(argv: I) -> CliResult<String>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = argv.into_iter().map(Into::into).collect();
    let cli = Cli::try_parse_from(&argv)?;
    let recorded: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    run(cli, &recorded)
}

/// Runs a parsed command. `argv` is the command line recorded in the manifest.
pub fn run(cli: Cli, argv: &[String]) -> CliResult<String> {
    let argv = strip_option(argv, &["--threads"]);
    match cli.threads {
        Some(0) => Err(usage("--threads must be at least 1")),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(k).build().map_err(|e| usage(e.to_string()))?;
            pool.install(|| dispatch(cli.command, &argv))
        }
        None => dispatch(cli.command, &argv),
    }
}

fn dispatch(command: Command, argv: &[String]) -> CliResult<String> {
    match command {
        Command::Matrix(MatrixCommand::Gen(a)) => matrix_gen(a, argv),
        Command::Tvd(a) => tvd(a, argv),
        Command::Search(SearchCommand::Haar(a)) => search_haar(a, argv),
        Command::Search(SearchCommand::Phases(a)) => search_phases(a, argv),
        Command::Search(SearchCommand::Optimize(a)) => search_optimize(a, argv),
        Command::Bayes(BayesCommand::Test(a)) => bayes_test(a, argv),
        Command::Bayes(BayesCommand::Infer(a)) => bayes_infer(a, argv),
        Command::Bayes(BayesCommand::Convex(a)) => bayes_convex(a, argv),
        Command::Bayes(BayesCommand::Threshold(a)) => bayes_threshold(a, argv),
        Command::Tomo(TomoCommand::Synth(a)) => tomo_synth(a, argv),
        Command::Tomo(TomoCommand::Fit(a)) => tomo_fit(a, argv),
        Command::Scattershot(ScattershotCommand::Simulate(a)) => simulate(a, argv),
        Command::Scattershot(ScattershotCommand::Analyze(a)) => scattershot_analyze(a, argv),
        Command::Replay(a) => replay(a),
    }
}

fn replay(a: ReplayArgs) -> CliResult<String> {
    let manifest = RunManifest::read(&a.manifest)?;
    let mut argv = strip_option(&manifest.argv, &["--out", "-o"]);
    argv.push("--out".into());
    argv.push(a.out.display().to_string());
    let cli = Cli::try_parse_from(&argv)?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(usage("a manifest cannot record a replay"));
    }
    dispatch(cli.command, &argv)
}

fn input_list(inputs: &Inputs, photons: usize, modes: usize) -> CliResult<Vec<ModeConfig>> {
    if photons == 0 || photons > modes {
        return Err(indist_core::Error::TooManyPhotons { photons, modes }.into());
    }
    if inputs.inputs.is_empty() {
        return Ok(collision_free_inputs(photons, modes));
    }
    let list = inputs.inputs.iter().map(|s| formats::parse_mode_list(s, modes).map_err(usage)).collect::<CliResult<Vec<_>>>()?;
    if let Some(bad) = list.iter().find(|c| c.photons() != photons) {
        return Err(usage(format!("input {} has {} photons, expected {photons}", formats_modes(bad), bad.photons())));
    }
    Ok(list)
}

fn formats_modes(c: &ModeConfig) -> String {
    indist_core::interference::one_based_modes(c)
}

fn statistic(stat: Statistic, input: &Option<String>, photons: usize, modes: usize) -> CliResult<TvdStatistic> {
    Ok(match (input, stat) {
        (Some(s), _) => {
            let c = formats::parse_mode_list(s, modes).map_err(usage)?;
            if c.photons() != photons {
                return Err(usage(format!("input `{s}` has {} photons, expected {photons}", c.photons())));
            }
            TvdStatistic::Input(c)
        }
        (None, Statistic::Max) => TvdStatistic::BestInput,
        (None, Statistic::Avg) => TvdStatistic::Average,
    })
}

fn matrix_gen(a: MatrixGenArgs, argv: &[String]) -> CliResult<String> {
    let mut run = Run::new("matrix gen", argv, &a.out.out)?;
    let need_p = || a.p.ok_or_else(|| usage("--p is required for this kind"));
    let need_m = || a.modes.filter(|&m| m > 0).ok_or_else(|| usage("--modes (>= 1) is required for this kind"));
    let u: UnitaryMatrix = match a.kind {
        Kind::Sylvester => matrices::sylvester(need_p()?),
        Kind::Fourier => matrices::fourier(need_m()?),
        Kind::Notable => {
            let name = a.name.as_deref().ok_or_else(|| usage("--name is required for kind notable"))?;
            matrices::notable(name.parse::<NotableId>()?)
        }
        Kind::Haar => {
            let m = need_m()?;
            let seed = run.seed(a.seed);
            matrices::haar_random(m, seed)
        }
        Kind::Fast => {
            let p = need_p()?;
            if p == 0 {
                return Err(usage("--p must be at least 1 for kind fast"));
            }
            let tau = a.tau.unwrap_or(indist_core::math::FRAC_1_SQRT_2);
            let params = if a.random_phases {
                let seed = run.seed(a.seed);
                let c = search::random_phase_circuit(p, &mut indist_core::rng::seeded(seed))?;
                c.with_tau(vec![vec![tau; c.pairs_per_layer()]; p as usize])?
            } else {
                CircuitParams::uniform(p, tau, a.phi.unwrap_or(0.0))?
            };
            matrices::fast_circuit(&params)
        }
    };
    run.write("matrix.json", &formats::format_complex_matrix(u.matrix()))?;
    run.say(format!("wrote {}x{} matrix", u.dim(), u.dim()));
    run.finish()
}

fn tvd(a: TvdArgs, argv: &[String]) -> CliResult<String> {
    let mut run = Run::new("tvd", argv, &a.out.out)?;
    let u = run.parse(&a.matrix, formats::parse_unitary)?;
    let policy = a.policy.into();
    let report = if a.inputs.inputs.is_empty() {
        tvd_report(&u, a.photons, policy)?
    } else {
        tvd_report_for(&u, &input_list(&a.inputs, a.photons, u.dim())?, policy)?
    };
    run.write("tvd.tsv", &formats::format_tvd_report(&report))?;
    run.say(format!("max_tvd = {:.6} (input {})", report.max_tvd, formats_modes(&report.best_input)));
    run.say(format!("avg_tvd = {:.6} over {} inputs", report.avg_tvd, report.per_input.len()));
    run.finish()
}

fn write_ensemble(run: &mut Run, r: &EnsembleResult, bins: usize) -> CliResult<()> {
    let mut h = EnsembleHistogram::from_values(&r.values, bins);
    for (name, v) in &r.histogram.markers {
        h = h.with_marker(name, *v);
    }
    run.write("histogram.tsv", &formats::format_histogram(&h))?;
    run.write("values.tsv", &formats::format_values(&r.values))?;
    run.write("best.json", &formats::format_complex_matrix(r.best.matrix()))?;
    run.write("worst.json", &formats::format_complex_matrix(r.worst.matrix()))?;
    run.say(format!("samples = {}, min = {:.6}, mean = {:.6}, max = {:.6}", h.sample_count, h.min, h.mean, h.max));
    for (name, v) in &h.markers {
        run.say(format!("{name} = {v:.6}"));
    }
    Ok(())
}

fn search_haar(a: HaarArgs, argv: &[String]) -> CliResult<String> {
    let mut run = Run::new("search haar", argv, &a.out.out)?;
    let e = &a.ensemble;
    let seed = run.seed(e.seed);
    let stat = statistic(e.statistic, &e.input, e.photons, a.modes)?;
    let r = search::haar_screen(a.modes, e.photons, e.policy.into(), stat, e.samples, seed)?;
    write_ensemble(&mut run, &r, e.bins)?;
    run.finish()
}

fn search_phases(a: PhasesArgs, argv: &[String]) -> CliResult<String> {
    let mut run = Run::new("search phases", argv, &a.out.out)?;
    let e = &a.ensemble;
    let seed = run.seed(e.seed);
    let m = 1usize.checked_shl(a.p).ok_or_else(|| usage("--p too large"))?;
    let stat = statistic(e.statistic, &e.input, e.photons, m)?;
    let r = search::phase_noise_ensemble(a.p, e.photons, e.policy.into(), stat, e.samples, seed)?;
    write_ensemble(&mut run, &r, e.bins)?;
    run.finish()
}

fn search_optimize(a: OptimizeArgs, argv: &[String]) -> CliResult<String> {
    let mut run = Run::new("search optimize", argv, &a.out.out)?;
    let seed = run.seed(a.seed);
    let stat = statistic(a.statistic, &a.input, a.photons, a.modes)?;
    let r = search::local_optimize(a.modes, a.photons, a.policy.into(), stat, seed, a.restarts)?;
    run.write("best.json", &formats::format_complex_matrix(r.unitary.matrix()))?;
    run.write("restarts.tsv", &formats::format_values(&r.restart_values))?;
    let mut trace = String::from("restart\tstep\tvalue\n");
    for (k, t) in r.traces.iter().enumerate() {
        for (s, v) in t.iter().enumerate() {
            let _ = writeln!(trace, "{k}\t{s}\t{}", num(*v));
        }
    }
    run.write("trace.tsv", &trace)?;
    run.say(format!("best value = {:.6} (restart {})", r.value, r.best_restart));
    run.finish()
}

fn family(run: &mut Run, s: &Setup) -> CliResult<InputFamily> {
    let u = run.parse(&s.matrix, formats::parse_unitary)?;
    let inputs = input_list(&s.inputs, s.photons, u.dim())?;
    Ok(InputFamily::from_unitary(&u, inputs, s.model.into(), None)?)
}

fn bayes_test(a: BayesTestArgs, argv: &[String]) -> CliResult<String> {
    let mut run = Run::new("bayes test", argv, &a.out.out)?;
    let seed = run.seed(a.seed);
    let fam = family(&mut run, &a.setup)?;
    let curve = confidence_curve(&fam, a.max_events, a.trials, seed)?;
    run.write("confidence.tsv", &formats::format_confidence(&curve))?;
    let (n, p) = *curve.last().expect("curve includes N = 0");
    run.say(format!("P_conf({n}) = {p:.6}"));
    run.finish()
}

fn resolve_events(run: &mut Run, fam: &InputFamily, path: &Path, photons: usize) -> CliResult<Vec<(f64, f64)>> {
    let events = run.parse(path, |t| formats::parse_events(t, Some(photons)))?;
    events
        .iter()
        .enumerate()
        .map(|(k, e)| fam.resolve(e).map_err(|err| usage(format!("{}: event {}: {err}", path.display(), k + 1))))
        .collect()
}

fn bayes_infer(a: BayesInferArgs, argv: &[String]) -> CliResult<String> {
    let mut run = Run::new("bayes infer", argv, &a.out.out)?;
    let fam = family(&mut run, &a.setup)?;
    let qp = resolve_events(&mut run, &fam, &a.events, a.setup.photons)?;
    let post = infer_x(&qp, a.grid)?;
    run.write("posterior.tsv", &formats::format_posterior(&post))?;
    run.say(format!("x = {:.6} ± {:.6} (N = {})", post.x_est, post.sigma_est, qp.len()));
    run.finish()
}

fn bayes_convex(a: BayesConvexArgs, argv: &[String]) -> CliResult<String> {
    let mut run = Run::new("bayes convex", argv, &a.out.out)?;
    let seed = run.seed(a.seed);
    let fam = family(&mut run, &a.setup)?;
    let qp = resolve_events(&mut run, &fam, &a.events, a.setup.photons)?;
    if qp.is_empty() {
        return Err(usage("event file is empty"));
    }
    let llr = log_likelihood_ratio(&qp, |e| e.0, |e| e.1)?;
    let favored = if llr.value >= 0.0 { Favored::Q } else { Favored::P };
    let x_th = stage_a(&qp, favored)?;
    let b = stage_b(x_th, favored, &fam, a.n_sim.unwrap_or(qp.len()), a.repeats, seed)?;
    let mut records = vec![
        ("events".to_string(), qp.len().to_string()),
        ("log_lr".to_string(), num(llr.value)),
        ("favored".to_string(), if favored == Favored::Q { "Q" } else { "P" }.to_string()),
        ("x_th".to_string(), num(x_th)),
        ("y_lo".to_string(), num(b.interval.0)),
        ("y_hi".to_string(), num(b.interval.1)),
    ];
    records.extend(b.roots.iter().enumerate().map(|(k, r)| (format!("root_{k}"), num(*r))));
    run.write("convex.tsv", &formats::format_records(&records))?;
    run.say(format!("favoured {}; x_th = {x_th:.6}; x in [{:.6}, {:.6}]", records[2].1, b.interval.0, b.interval.1));
    run.finish()
}

fn bayes_threshold(a: BayesThresholdArgs, argv: &[String]) -> CliResult<String> {
    let mut run = Run::new("bayes threshold", argv, &a.out.out)?;
    let seed = run.seed(a.seed);
    let fam = family(&mut run, &a.setup)?;
    let scan = ThresholdScan::new(&fam, a.events_per_sample, a.samples, seed)?;
    let crossing = scan.crossing()?;
    let mut curve = String::from("x\tp_conf\n");
    for k in 0..=100 {
        let x = k as f64 / 100.0;
        let _ = writeln!(curve, "{}\t{}", num(x), num(scan.confidence(x)));
    }
    run.write("curve.tsv", &curve)?;
    run.write("threshold.tsv", &formats::format_records(&[("crossing".into(), num(crossing))]))?;
    run.say(format!("P_conf = 0.5 at x = {crossing:.6}"));
    run.finish()
}

fn tomo_synth(a: TomoSynthArgs, argv: &[String]) -> CliResult<String> {
    let mut run = Run::new("tomo synth", argv, &a.out.out)?;
    let seed = run.seed(a.seed);
    let (model, pairs) = match a.device {
        Device::Four => (DeviceModel::reference_four_mode(), all_pairs(4)),
        Device::Eight => (DeviceModel::reference_eight_mode(), eight_mode_input_pairs()),
    };
    let data = synth_dataset(&model, &pairs, a.noise, seed)?;
    run.write("probs.json", &formats::format_real_matrix(&data.probs))?;
    run.write("prob_errors.json", &formats::format_real_matrix(&data.prob_errors))?;
    run.write("visibilities.tsv", &formats::format_visibilities(&data.visibilities))?;
    let mut device = serde_json::to_string_pretty(&DeviceFile::from_model(&model)).expect("serializable");
    device.push('\n');
    run.write("device.json", &device)?;
    run.say(format!("{} modes, {} visibilities", model.dim(), data.visibilities.len()));
    run.finish()
}

fn tomo_fit(a: TomoFitArgs, argv: &[String]) -> CliResult<String> {
    let mut run = Run::new("tomo fit", argv, &a.out.out)?;
    let seed = run.seed(a.seed);
    let probs = run.parse(&a.probs, formats::parse_real_matrix)?;
    let prob_errors = run.parse(&a.errors, formats::parse_real_matrix)?;
    let visibilities = run.parse(&a.visibilities, formats::parse_visibilities)?;
    let d = probs.rows();
    if !d.is_power_of_two() || d < 2 {
        return Err(usage(format!("probability matrix has dimension {d}, expected a power of two")));
    }
    let template = FastTemplate::standard(d.trailing_zeros())?;
    let data = indist_core::tomography::SyntheticData { probs, prob_errors, visibilities };
    let opts = ReconstructOptions { fit: FitOptions { restarts: a.restarts, seed, ..FitOptions::default() }, bootstrap: a.bootstrap };
    let rec = reconstruct(&data, &template, &opts)?;
    let fidelity_to_truth = match &a.truth {
        Some(path) => {
            let text = run.read(path)?;
            let file: DeviceFile = serde_json::from_str(&text)
                .map_err(|e| CliError::Format(formats::ParseError { line: e.line(), message: e.to_string() }.at(path)))?;
            let truth = file.to_model()?;
            let free = canonical_phases(&template.free_values(truth.circuit().phi()));
            let truth = DeviceModel::new(truth.circuit().with_phi(template.phase_table(&free)?)?, truth.eta().to_vec())?;
            Some(fidelity(&truth.unitary(), &rec.model.unitary())?)
        }
        None => None,
    };
    let free = rec.free_phases(&template);
    let phases = template
        .free_phase_labels()
        .iter()
        .zip(free.iter().zip(&rec.phi_err))
        .map(|(&(layer, mode), (&value, &error))| PhaseEntry { layer, mode, value, error })
        .collect();
    let report = TomoReport {
        p: template.p(),
        tau: rec.model.circuit().tau().to_vec(),
        tau_err: rec.tau_err.clone(),
        eta: rec.model.eta().to_vec(),
        eta_err: rec.eta_err.clone(),
        phases,
        chi2_tau: rec.chi2_tau,
        chi2_phi: rec.chi2_phi,
        fidelity_to_ideal: rec.fidelity_to_ideal,
        fidelity_to_truth,
        bootstrap_samples: rec.bootstrap_samples,
    };
    let mut json = serde_json::to_string_pretty(&report).expect("serializable");
    json.push('\n');
    run.write("report.json", &json)?;
    run.write("unitary.json", &formats::format_complex_matrix(rec.model.unitary().matrix()))?;
    run.say(format!("chi2_tau = {:.4}, chi2_phi = {:.4}", rec.chi2_tau, rec.chi2_phi));
    run.say(format!("fidelity to ideal = {:.6}", rec.fidelity_to_ideal));
    if let Some(f) = fidelity_to_truth {
        run.say(format!("fidelity to truth = {f:.8}"));
    }
    run.finish()
}

fn simulate(a: SimulateArgs, argv: &[String]) -> CliResult<String> {
    let mut run = Run::new("scattershot simulate", argv, &a.out.out)?;
    let seed = run.seed(a.seed);
    let fam = family(&mut run, &a.setup)?;
    let events = sample_from_family(&fam, a.x, a.events, seed)?;
    run.write("events.tsv", &formats::format_events(&events))?;
    run.say(format!("{} events at x = {}", events.len(), a.x));
    run.finish()
}

fn scattershot_analyze(a: AnalyzeArgs, argv: &[String]) -> CliResult<String> {
    let mut run = Run::new("scattershot analyze", argv, &a.out.out)?;
    let seed = if a.band { Some(run.seed(a.seed)) } else { None };
    let fam = family(&mut run, &a.setup)?;
    let events = run.parse(&a.events, |t| formats::parse_events(t, Some(a.setup.photons)))?;
    let opts = seed.map(|s| ResequenceOptions { permutations: a.permutations, ..ResequenceOptions::new(events.len(), s) });
    let r = analyze(&events, &fam, a.grid, opts.as_ref())?;
    run.write("posterior.tsv", &formats::format_posterior(&r.posterior))?;
    let mut records = vec![
        ("events".to_string(), events.len().to_string()),
        ("x_est".to_string(), num(r.posterior.x_est)),
        ("sigma_est".to_string(), num(r.posterior.sigma_est)),
    ];
    records.extend(r.input_counts.iter().map(|(c, n)| (format!("count:{c}"), n.to_string())));
    run.write("summary.tsv", &formats::format_records(&records))?;
    if let Some(band) = &r.band {
        run.write("band.tsv", &formats::format_band(band))?;
    }
    run.say(format!("x = {:.6} ± {:.6} (N = {})", r.posterior.x_est, r.posterior.sigma_est, events.len()));
    for (c, n) in &r.input_counts {
        run.say(format!("  input {}: {n}", formats_modes(c)));
    }
    run.finish()
}
