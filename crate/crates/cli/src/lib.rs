//! Command-line front end for the `tmcmc` library.
//!
//! Settings resolve as flag, then the matching table of the TOML file given
//! by `--config`, then the built-in default.

pub mod schema;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;
use tmcmc::baseline::{Hmc, HmcConfig, Rwmh};
use tmcmc::challenger::{run_challenger, ChallengerSpec};
use tmcmc::diagnostics::scaling::{run_scaling_study, ScalingStudySpec, StudyKernel};
use tmcmc::report::summarize;
use tmcmc::targets::{ChallengerLogistic, IidGaussian};
use tmcmc::tmcmc::{AdditiveTmcmc, DependentZConfig, DependentZTmcmc, GeneralTmcmc, TmcmcConfig};
use tmcmc::verify::{self, run_suite, Suite, SuiteOptions, Verdict};
use tmcmc::{run_chains, Execution, Kernel, RunOptions, Target};

pub const OUTPUT_DIR_ENV: &str = "TMCMC_OUTPUT_DIR";

/// Exit status for rejected configuration, matching clap's usage errors.
pub const EXIT_CONFIG: u8 = 2;
/// Exit status when a verification run reports an unexpected verdict.
pub const EXIT_VERDICT: u8 = 1;

#[derive(Parser, Debug)]
#[command(name = "tmcmc", version, about = "Transformation-based MCMC samplers and checks")]
pub struct Cli {
    /// TOML file with one table per subcommand (`[sample]`, `[scaling-study]`, ...).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory [default: ./tmcmc-out].
    #[arg(long, global = true, env = OUTPUT_DIR_ENV)]
    pub output_dir: Option<PathBuf>,

    /// Worker threads, in [1, 1024] [default: available cores].
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Run seed, any 64-bit unsigned integer [default: 7; challenger 1986; db-check and discrete-check 2024].
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Report zero wall time so repeated runs are byte-identical.
    #[arg(long, global = true)]
    pub no_timing: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one or more chains and write traces plus a summary.
    Sample(SampleArgs),
    /// Sweep the scale over a grid of dimensions for TMCMC and RWMH.
    ScalingStudy(StudyArgs),
    /// Run the detailed-balance and reachability verification suites.
    DbCheck(DbCheckArgs),
    /// Logistic regression on the O-ring data with both kernels.
    Challenger(ChallengerArgs),
    /// Exact checks for the spin and lattice kernels.
    DiscreteCheck(DiscreteArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    AdditiveTmcmc,
    GeneralTmcmc,
    DependentZTmcmc,
    Rwmh,
    Hmc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    IidGaussian,
    Challenger,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteArg {
    All,
    Continuous,
    DependentZ,
    Reachability,
    Hmc,
    Discrete,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::All => Suite::All,
            SuiteArg::Continuous => Suite::Continuous,
            SuiteArg::DependentZ => Suite::DependentZ,
            SuiteArg::Reachability => Suite::Reachability,
            SuiteArg::Hmc => Suite::Hmc,
            SuiteArg::Discrete => Suite::Discrete,
        }
    }
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SampleArgs {
    /// Kernel [default: additive-tmcmc].
    #[arg(long, value_enum)]
    pub kernel: Option<KernelKind>,
    /// Target [default: iid-gaussian].
    #[arg(long, value_enum)]
    pub target: Option<TargetKind>,
    /// Dimension k of the Gaussian target, in [1, 100000] [default: 10]. The O-ring target is 2-d.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Iterations per chain, in [1, 10^9], keeping at least 100 after burn-in [default: 10000].
    #[arg(long)]
    pub iters: Option<usize>,
    /// Iterations dropped from the summary, in [0, iters) [default: iters / 10].
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Number of chains, in [1, 1024] [default: 1].
    #[arg(long)]
    pub chains: Option<usize>,
    /// TMCMC eps scale or RWMH step size, > 0 [default: 2.4 / sqrt(k)].
    #[arg(long)]
    pub scale: Option<f64>,
    /// TMCMC forward-move probability p, in (0, 1) [default: 0.5].
    #[arg(long)]
    pub forward_prob: Option<f64>,
    /// General TMCMC no-change probability, in [0, 1) with p + r < 1 [default: 0].
    #[arg(long)]
    pub no_move_prob: Option<f64>,
    /// HMC leapfrog steps L, in [1, 10000] [default: 10].
    #[arg(long)]
    pub steps: Option<usize>,
    /// HMC step size, > 0 [default: 0.1].
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct StudyArgs {
    /// Kernels to compare [default: additive-tmcmc,rwmh].
    #[arg(long, value_enum, value_delimiter = ',')]
    pub kernels: Option<Vec<StudyKernelArg>>,
    /// Dimensions, each in [1, 100000] [default: 10,30,100].
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Values of ell (scale = ell / sqrt(k)), each > 0 [default: 1.2,1.5,...,3.6].
    #[arg(long, value_delimiter = ',')]
    pub ell_grid: Option<Vec<f64>>,
    /// Iterations per cell, in [200, 10^9] [default: 200000].
    #[arg(long)]
    pub iters: Option<usize>,
    /// Burn-in per cell, in [0, iters) [default: iters / 10].
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Replicate seeds per cell [default: 1,2,3,4].
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Leading coordinates averaged for ESS, in [1, min dims] [default: 20, clamped].
    #[arg(long)]
    pub tracked_coords: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKernelArg {
    AdditiveTmcmc,
    Rwmh,
}

impl From<StudyKernelArg> for StudyKernel {
    fn from(k: StudyKernelArg) -> Self {
        match k {
            StudyKernelArg::AdditiveTmcmc => StudyKernel::AdditiveTmcmc,
            StudyKernelArg::Rwmh => StudyKernel::Rwmh,
        }
    }
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct DbCheckArgs {
    /// Suite to run [default: all].
    #[arg(long, value_enum)]
    pub suite: Option<SuiteArg>,
    /// Monte Carlo size for the dependent-z check, in [100000, 10^9] [default: 100000].
    #[arg(long)]
    pub mc_size: Option<usize>,
    /// Debug: drop the move-type ratio from the continuous check, which must then fail.
    #[arg(long)]
    #[serde(skip)]
    pub corrupt_acceptance: bool,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ChallengerArgs {
    /// Prior standard deviation of each coefficient, > 0 [default: 10].
    #[arg(long)]
    pub prior_sd: Option<f64>,
    /// Chains per kernel, in [2, 1024] [default: 4].
    #[arg(long)]
    pub chains: Option<usize>,
    /// Iterations per chain, in [1000, 10^9] [default: 200000].
    #[arg(long)]
    pub iters: Option<usize>,
    /// Burn-in fraction, in [0, 0.9] [default: 0.1].
    #[arg(long)]
    pub burn_in_frac: Option<f64>,
    /// TMCMC eps scale in whitened coordinates, > 0 [default: 1.7].
    #[arg(long)]
    pub tmcmc_scale: Option<f64>,
    /// RWMH step size in whitened coordinates, > 0 [default: 1.7].
    #[arg(long)]
    pub rwmh_scale: Option<f64>,
    /// Sample in the raw coefficients instead of Laplace-whitened ones.
    #[arg(long)]
    #[serde(skip)]
    pub no_precondition: bool,
}

#[derive(Args, Debug, Default, Clone, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct DiscreteArgs {
    /// Check irreducibility of the Z^2 lattice kernel only.
    #[arg(long)]
    #[serde(skip)]
    pub lattice: bool,
    /// Single-coordinate move probability for --lattice, in [0, 1] [default: 0.3].
    #[arg(long)]
    pub r: Option<f64>,
    /// Chain length of the lattice parity run, in [1, 10^9] [default: 100000].
    #[arg(long)]
    pub iters: Option<usize>,
}

/// Contents of a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub sample: SampleArgs,
    pub scaling_study: StudyArgs,
    pub db_check: DbCheckArgs,
    pub challenger: ChallengerArgs,
    pub discrete_check: DiscreteArgs,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

fn bad(field: &'static str, reason: impl Into<String>) -> anyhow::Error {
    tmcmc::Error::InvalidConfig {
        field,
        reason: reason.into(),
    }
    .into()
}

/// Exit status for an error: 2 for configuration problems, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<tmcmc::Error>() {
        Some(tmcmc::Error::InvalidConfig { .. }) => EXIT_CONFIG,
        _ => 1,
    }
}

struct Common {
    seed: u64,
    out: PathBuf,
    timing: bool,
    exec: Execution,
}

fn execution() -> Execution {
    if cfg!(feature = "parallel") {
        Execution::Parallel
    } else {
        Execution::Sequential
    }
}

#[cfg(feature = "parallel")]
fn set_threads(n: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the worker pool")
}

#[cfg(not(feature = "parallel"))]
fn set_threads(_n: usize) -> Result<()> {
    Ok(())
}

/// Runs a parsed command line and returns the process exit status.
pub fn run(cli: Cli) -> Result<u8> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    if let Some(n) = cli.threads.or(file.threads) {
        if !(1..=1024).contains(&n) {
            return Err(bad("threads", "must lie in [1, 1024]"));
        }
        set_threads(n)?;
    }
    let out = cli
        .output_dir
        .clone()
        .or(file.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("tmcmc-out"));
    let common = Common {
        seed: cli.seed.or(file.seed).unwrap_or(match cli.command {
            Command::Challenger(_) => ChallengerSpec::default().seed,
            Command::DbCheck(_) | Command::DiscreteCheck(_) => SuiteOptions::default().seed,
            _ => 7,
        }),
        out,
        timing: !cli.no_timing,
        exec: execution(),
    };
    match &cli.command {
        Command::Sample(a) => cmd_sample(&merge_sample(a, &file.sample), &common),
        Command::ScalingStudy(a) => cmd_scaling_study(&merge_study(a, &file.scaling_study), &common),
        Command::DbCheck(a) => {
            let merged = DbCheckArgs {
                suite: a.suite.or(file.db_check.suite),
                mc_size: a.mc_size.or(file.db_check.mc_size),
                corrupt_acceptance: a.corrupt_acceptance,
            };
            cmd_db_check(&merged, &common)
        }
        Command::Challenger(a) => {
            let f = &file.challenger;
            let merged = ChallengerArgs {
                prior_sd: a.prior_sd.or(f.prior_sd),
                chains: a.chains.or(f.chains),
                iters: a.iters.or(f.iters),
                burn_in_frac: a.burn_in_frac.or(f.burn_in_frac),
                tmcmc_scale: a.tmcmc_scale.or(f.tmcmc_scale),
                rwmh_scale: a.rwmh_scale.or(f.rwmh_scale),
                no_precondition: a.no_precondition,
            };
            cmd_challenger(&merged, &common)
        }
        Command::DiscreteCheck(a) => {
            let merged = DiscreteArgs {
                lattice: a.lattice,
                r: a.r.or(file.discrete_check.r),
                iters: a.iters.or(file.discrete_check.iters),
            };
            cmd_discrete_check(&merged, &common)
        }
    }
}

fn merge_sample(a: &SampleArgs, f: &SampleArgs) -> SampleArgs {
    SampleArgs {
        kernel: a.kernel.or(f.kernel),
        target: a.target.or(f.target),
        dim: a.dim.or(f.dim),
        iters: a.iters.or(f.iters),
        burn_in: a.burn_in.or(f.burn_in),
        chains: a.chains.or(f.chains),
        scale: a.scale.or(f.scale),
        forward_prob: a.forward_prob.or(f.forward_prob),
        no_move_prob: a.no_move_prob.or(f.no_move_prob),
        steps: a.steps.or(f.steps),
        dt: a.dt.or(f.dt),
    }
}

fn merge_study(a: &StudyArgs, f: &StudyArgs) -> StudyArgs {
    StudyArgs {
        kernels: a.kernels.clone().or(f.kernels.clone()),
        dims: a.dims.clone().or(f.dims.clone()),
        ell_grid: a.ell_grid.clone().or(f.ell_grid.clone()),
        iters: a.iters.or(f.iters),
        burn_in: a.burn_in.or(f.burn_in),
        seeds: a.seeds.clone().or(f.seeds.clone()),
        tracked_coords: a.tracked_coords.or(f.tracked_coords),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn positive(field: &'static str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(bad(field, format!("must be positive and finite, got {v}")))
    }
}

fn in_range(field: &'static str, v: usize, lo: usize, hi: usize) -> Result<usize> {
    if (lo..=hi).contains(&v) {
        Ok(v)
    } else {
        Err(bad(field, format!("must lie in [{lo}, {hi}], got {v}")))
    }
}

/// Fully resolved `sample` settings.
#[derive(Debug, Clone, Serialize)]
pub struct SampleConfig {
    pub kernel: KernelKind,
    pub target: TargetKind,
    pub dim: usize,
    pub iters: usize,
    pub burn_in: usize,
    pub chains: usize,
    pub scale: f64,
    pub forward_prob: f64,
    pub no_move_prob: f64,
    pub steps: usize,
    pub dt: f64,
    pub seed: u64,
}

impl SampleConfig {
    pub fn resolve(a: &SampleArgs, seed: u64) -> Result<Self> {
        let target = a.target.unwrap_or(TargetKind::IidGaussian);
        let dim = match target {
            TargetKind::IidGaussian => in_range("dim", a.dim.unwrap_or(10), 1, 100_000)?,
            TargetKind::Challenger => {
                if let Some(d) = a.dim.filter(|&d| d != 2) {
                    return Err(bad("dim", format!("the O-ring target is 2-dimensional, got {d}")));
                }
                2
            }
        };
        let iters = in_range("iters", a.iters.unwrap_or(10_000), 1, 1_000_000_000)?;
        let burn_in = a.burn_in.unwrap_or(iters / 10);
        if burn_in >= iters {
            return Err(bad("burn_in", format!("must be below iters ({iters}), got {burn_in}")));
        }
        let forward_prob = a.forward_prob.unwrap_or(0.5);
        if !(forward_prob > 0.0 && forward_prob < 1.0) {
            return Err(bad("forward_prob", format!("must lie in (0, 1), got {forward_prob}")));
        }
        if iters - burn_in < tmcmc::diagnostics::MIN_SERIES {
            return Err(bad(
                "iters",
                format!("must leave at least {} iterations after burn-in", tmcmc::diagnostics::MIN_SERIES),
            ));
        }
        let kernel = a.kernel.unwrap_or(KernelKind::AdditiveTmcmc);
        let no_move_prob = a.no_move_prob.unwrap_or(0.0);
        if no_move_prob > 0.0 && kernel != KernelKind::GeneralTmcmc {
            return Err(bad("no_move_prob", "only the general-tmcmc kernel has no-change moves"));
        }
        if !(0.0..1.0).contains(&no_move_prob) || forward_prob + no_move_prob >= 1.0 {
            return Err(bad("no_move_prob", "must lie in [0, 1) with forward_prob + no_move_prob < 1"));
        }
        Ok(Self {
            kernel,
            target,
            dim,
            iters,
            burn_in,
            chains: in_range("chains", a.chains.unwrap_or(1), 1, 1024)?,
            scale: positive("scale", a.scale.unwrap_or(2.4 / (dim as f64).sqrt()))?,
            forward_prob,
            no_move_prob,
            steps: in_range("steps", a.steps.unwrap_or(10), 1, 10_000)?,
            dt: positive("dt", a.dt.unwrap_or(0.1))?,
            seed,
        })
    }
}

#[derive(Serialize)]
struct SampleSummary<'a> {
    config: &'a SampleConfig,
    traces: Vec<String>,
    #[serde(flatten)]
    summary: tmcmc::report::RunSummary,
}

fn tmcmc_config(c: &SampleConfig) -> TmcmcConfig {
    let q = 1.0 - c.forward_prob - c.no_move_prob;
    TmcmcConfig::symmetric(c.dim, c.scale).with_move_probs(vec![c.forward_prob; c.dim], vec![q; c.dim])
}

fn cmd_sample(a: &SampleArgs, common: &Common) -> Result<u8> {
    let cfg = SampleConfig::resolve(a, common.seed)?;
    match cfg.target {
        TargetKind::IidGaussian => {
            let t = IidGaussian::new(cfg.dim)?;
            sample_target(&cfg, &t, vec![0.0; cfg.dim], common)
        }
        TargetKind::Challenger => {
            let t = ChallengerLogistic::new(10.0)?;
            let (mode, _) = t.laplace_approximation();
            sample_target(&cfg, &t, mode, common)
        }
    }
}

fn sample_target<T: Target>(cfg: &SampleConfig, t: &T, x0: Vec<f64>, common: &Common) -> Result<u8> {
    match cfg.kernel {
        KernelKind::AdditiveTmcmc => sample_with(cfg, &AdditiveTmcmc::new(tmcmc_config(cfg))?, t, x0, common),
        KernelKind::GeneralTmcmc => sample_with(cfg, &GeneralTmcmc::additive(tmcmc_config(cfg))?, t, x0, common),
        KernelKind::DependentZTmcmc => {
            let kern = DependentZTmcmc::new(DependentZConfig::standard(cfg.dim, cfg.scale))?;
            sample_with(cfg, &kern, t, x0, common)
        }
        KernelKind::Rwmh => sample_with(cfg, &Rwmh::isotropic(cfg.dim, cfg.scale)?, t, x0, common),
        KernelKind::Hmc => sample_with(cfg, &Hmc::new(HmcConfig::new(cfg.steps, cfg.dt, cfg.dim))?, t, x0, common),
    }
}

fn sample_with<K: Kernel, T: Target>(
    cfg: &SampleConfig,
    kernel: &K,
    target: &T,
    x0: Vec<f64>,
    common: &Common,
) -> Result<u8> {
    create_dir(&common.out)?;
    let start = Instant::now();
    let traces = run_chains(
        kernel,
        target,
        vec![x0; cfg.chains],
        RunOptions::new(cfg.iters),
        cfg.seed,
        common.exec,
    )?;
    let wall_ms = if common.timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    let mut names = Vec::with_capacity(traces.len());
    for (c, tr) in traces.iter().enumerate() {
        let name = format!("trace_chain{c}.csv");
        let f = fs::File::create(common.out.join(&name))?;
        tr.write_csv(std::io::BufWriter::new(f))?;
        names.push(name);
    }
    let summary = summarize(kernel.name(), &target.name(), cfg.seed, &traces, cfg.burn_in, wall_ms)?;
    println!(
        "{} on {}: {} chain(s) x {} iterations, acceptance {:.4}",
        summary.kernel, summary.target, cfg.chains, cfg.iters, summary.mean_accept_rate
    );
    write_json(
        &common.out.join("summary.json"),
        &SampleSummary {
            config: cfg,
            traces: names,
            summary,
        },
    )?;
    Ok(0)
}

pub fn study_spec(a: &StudyArgs, timing: bool) -> Result<ScalingStudySpec> {
    let d = ScalingStudySpec::default();
    let dims = a.dims.clone().unwrap_or(d.dims);
    for &k in &dims {
        in_range("dims", k, 1, 100_000)?;
    }
    let n_iter = in_range("iters", a.iters.unwrap_or(d.n_iter), 200, 1_000_000_000)?;
    let burn_in = a.burn_in.unwrap_or(n_iter / 10);
    if burn_in >= n_iter {
        return Err(bad("burn_in", format!("must be below iters ({n_iter}), got {burn_in}")));
    }
    let min_dim = dims.iter().copied().min().unwrap_or(1);
    let spec = ScalingStudySpec {
        kernels: a
            .kernels
            .clone()
            .map(|ks| ks.into_iter().map(StudyKernel::from).collect())
            .unwrap_or(d.kernels),
        dims,
        ell_grid: a.ell_grid.clone().unwrap_or(d.ell_grid),
        n_iter,
        burn_in,
        target_family: d.target_family,
        seeds: a.seeds.clone().unwrap_or(d.seeds),
        tracked_coords: a.tracked_coords.unwrap_or(d.tracked_coords.min(min_dim)),
        timing,
    };
    spec.validate()?;
    Ok(spec)
}

fn cmd_scaling_study(a: &StudyArgs, common: &Common) -> Result<u8> {
    let spec = study_spec(a, common.timing)?;
    create_dir(&common.out)?;
    let report = run_scaling_study(&spec, common.exec)?;
    report.write_grid_csv(fs::File::create(common.out.join("study.csv"))?)?;
    report.write_long_csv(fs::File::create(common.out.join("study_long.csv"))?)?;
    write_json(&common.out.join("study_summary.json"), &report.summary_json())?;
    println!("{:<16} {:>6} {:>8} {:>10} {:>12}", "kernel", "k", "ell*", "accept", "ess/iter");
    for r in &report.optimal {
        println!(
            "{:<16} {:>6} {:>8.3} {:>10.4} {:>12.5}",
            r.kernel.label(),
            r.k,
            r.ell_star,
            r.accept_rate,
            r.ess_per_iter
        );
    }
    Ok(0)
}

fn finish_verdicts(verdicts: &[Verdict], common: &Common, file: &str) -> Result<u8> {
    create_dir(&common.out)?;
    write_json(&common.out.join(file), &verdicts)?;
    print!("{}", verify::summary_table(verdicts));
    if verify::all_ok(verdicts) {
        Ok(0)
    } else {
        eprintln!("one or more checks failed; see {}", common.out.join(file).display());
        Ok(EXIT_VERDICT)
    }
}

fn cmd_db_check(a: &DbCheckArgs, common: &Common) -> Result<u8> {
    let opts = SuiteOptions {
        seed: common.seed,
        mc_size: in_range("mc_size", a.mc_size.unwrap_or(verify::MIN_MC_SIZE), verify::MIN_MC_SIZE, 1_000_000_000)?,
        corrupt_acceptance: a.corrupt_acceptance,
        exec: common.exec,
    };
    let verdicts = run_suite(a.suite.unwrap_or(SuiteArg::All).into(), &opts)?;
    finish_verdicts(&verdicts, common, "verdicts.json")
}

fn cmd_challenger(a: &ChallengerArgs, common: &Common) -> Result<u8> {
    let d = ChallengerSpec::default();
    let n_iter = a.iters.unwrap_or(d.n_iter);
    if n_iter < 1000 {
        return Err(bad("iters", format!("must be at least 1000, got {n_iter}")));
    }
    let spec = ChallengerSpec {
        prior_sd: a.prior_sd.unwrap_or(d.prior_sd),
        n_chains: a.chains.unwrap_or(d.n_chains),
        n_iter,
        burn_in_frac: a.burn_in_frac.unwrap_or(d.burn_in_frac),
        seed: common.seed,
        precondition: !a.no_precondition,
        tmcmc_scale: a.tmcmc_scale.unwrap_or(d.tmcmc_scale),
        rwmh_scale: a.rwmh_scale.unwrap_or(d.rwmh_scale),
        overdispersion: d.overdispersion,
        timing: common.timing,
    };
    spec.validate()?;
    if spec.n_chains > 1024 {
        return Err(bad("n_chains", "must be at most 1024"));
    }
    create_dir(&common.out)?;
    let report = run_challenger(&spec, common.exec)?;
    write_json(&common.out.join("challenger.json"), &report)?;
    for s in [&report.tmcmc, &report.rwmh] {
        let c = &s.coordinates;
        println!(
            "{:<16} beta0 {:>9.4} ({:.4})  beta1 {:>9.5} ({:.5})  accept {:.3}",
            s.kernel, c[0].mean, c[0].sd, c[1].mean, c[1].sd, s.mean_accept_rate
        );
    }
    println!("max R-hat {:.4}", report.max_rhat);
    if report.disagreement {
        println!("DISAGREEMENT: kernel posterior means differ by more than 3 combined standard errors");
    }
    Ok(0)
}

fn cmd_discrete_check(a: &DiscreteArgs, common: &Common) -> Result<u8> {
    if !a.lattice {
        let verdicts = verify::discrete_exact_suite(common.seed)?;
        return finish_verdicts(&verdicts, common, "discrete_verdicts.json");
    }
    let r = a.r.unwrap_or(0.3);
    if !(0.0..=1.0).contains(&r) {
        return Err(bad("r", format!("must lie in [0, 1], got {r}")));
    }
    let iters = in_range("iters", a.iters.unwrap_or(100_000), 1, 1_000_000_000)?;
    let verdicts = lattice_verdicts(r, iters, common.seed)?;
    if verdicts.iter().any(|v| v.expected_failure) {
        println!("expected_failure: with r = 0 the lattice kernel keeps x1 - x2 mod 2 fixed and is reducible");
    }
    finish_verdicts(&verdicts, common, "discrete_verdicts.json")
}

/// Irreducibility of the Z^2 kernel: exact reachability on a box plus a
/// parity count along a chain. With `r = 0` both are negative controls.
pub fn lattice_verdicts(r: f64, iters: usize, seed: u64) -> Result<Vec<Verdict>> {
    use tmcmc::discrete::lattice_exact_matrix;
    use tmcmc::targets::LatticeLaplace;

    let t = LatticeLaplace::new(2, 0.5)?;
    let m = lattice_exact_matrix(&t, 2, 3, r, 1.5)?;
    let connected = m.is_strongly_connected(1e-14);
    let reach = m.reachable_from(0, 1e-14).iter().filter(|&&b| b).count();
    let mut exact = Verdict::new(format!("lattice-k2-r{r}-irreducible"), if connected { 0.0 } else { 1.0 }, 0.0)
        .with_details(serde_json::json!({"reachable_states": reach, "states": m.len()}));
    let run_seed = tmcmc::rng::chain_seed(seed, 10);
    let (changes, both) = verify::lattice_parity_run(r, iters, run_seed)?;
    let mut parity = Verdict::new(
        format!("lattice-k2-r{r}-both-parities-visited"),
        if both { 0.0 } else { 1.0 },
        0.0,
    )
    .with_seed(run_seed)
    .with_details(serde_json::json!({"iterations": iters, "parity_changes": changes}));
    if r == 0.0 {
        exact = exact.negative_control();
        parity = parity.negative_control();
    }
    Ok(vec![exact, parity])
}
