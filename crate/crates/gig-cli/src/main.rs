//! `gig` — command-line workbench for the GIG distribution library.
//!
//! Every subcommand is a thin wrapper over one library operation (named in
//! its help text) and reports through the same canonical JSON renderer the
//! library uses, so numbers always carry 17 significant digits and reruns
//! with the same seed are byte-identical regardless of `--workers`.
//!
//! Exit codes: 0 success, 2 domain/validation error, 3 characterization
//! failure (a probe or test verdict that CI may want to assert), 64 unknown
//! command.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{Map, Value};

use gig::dist;
use gig::error::GigError;
use gig::estimate::{self, FitMode};
use gig::lab::{self, PuszReading, VTransform};
use gig::params::{Branch, GammaParams, GigParams};
use gig::report::{render_json, ProbeReport, Verdict};
use gig::sampling::{self, ChainState, ContinuedFractionChain, GigSampler, SampleBatch};
use gig::seed::{self, SeedPlan};
use gig::special::{self, BesselEvalConfig};
use gig::stats;
use gig::stein;

type Result<T> = std::result::Result<T, GigError>;

/// Master seed used when neither `--seed` nor `GIG_DEFAULT_SEED` is set.
const DEFAULT_SEED: u64 = 2_439_041;

const EXIT_VALIDATION: u8 = 2;
const EXIT_CHARACTERIZATION: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(
    name = "gig",
    version = gig::VERSION,
    about = "Workbench for the generalized inverse Gaussian distribution",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Shared `(p, a, b)` parameter flags.
#[derive(Args)]
struct ParamArgs {
    /// Index p (any real).
    #[arg(long, allow_negative_numbers = true)]
    p: f64,
    /// Linear rate a >= 0.
    #[arg(long, allow_negative_numbers = true)]
    a: f64,
    /// Reciprocal rate b >= 0.
    #[arg(long, allow_negative_numbers = true)]
    b: f64,
}

impl ParamArgs {
    fn build(&self) -> Result<GigParams> {
        GigParams::new(self.p, self.a, self.b)
    }
}

/// Seed and parallelism flags shared by every randomized subcommand.
#[derive(Args)]
struct RunArgs {
    /// Master seed (default: $GIG_DEFAULT_SEED, else a built-in constant).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for replicate loops; the output does not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

impl RunArgs {
    fn seed(&self) -> Result<u64> {
        if let Some(seed) = self.seed {
            return Ok(seed);
        }
        match std::env::var("GIG_DEFAULT_SEED") {
            Ok(raw) => raw.trim().parse().map_err(|_| {
                GigError::Config(format!("GIG_DEFAULT_SEED is not a valid u64: {raw:?}"))
            }),
            Err(_) => Ok(DEFAULT_SEED),
        }
    }

    /// Stream 0 of the resolved master seed; commands derive children.
    fn plan(&self) -> Result<SeedPlan> {
        Ok(SeedPlan::new(self.seed()?, 0))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PointStat {
    Pdf,
    Cdf,
    Logpdf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    #[value(name = "fixed-p")]
    FixedP,
    Ig,
}

#[derive(Clone, Copy, ValueEnum, Default)]
enum TransformArg {
    /// Regress on V itself.
    #[default]
    V,
    /// Regress on 1/V.
    Reciprocal,
}

#[derive(Clone, Copy, ValueEnum, Default)]
enum ReadingArg {
    /// Coefficients from the index-is-mu reading (the one simulation confirms).
    #[default]
    Mu,
    /// The literal index-is-p reading, kept for falsification runs.
    #[value(name = "p-coef")]
    PCoef,
}

#[derive(Subcommand)]
enum Command {
    /// Modified Bessel K: special::bessel_k / special::bessel_k_dlog_dorder.
    Bessel {
        /// Order p (any real).
        #[arg(long, allow_negative_numbers = true)]
        order: f64,
        /// Argument z > 0.
        #[arg(long)]
        arg: f64,
        /// Report d/dp log K_p(z) instead of K_p(z).
        #[arg(long)]
        dlog_dorder: bool,
    },
    /// Density, CDF, or log-density at a point: dist::density / cdf / log_density.
    Eval {
        #[command(flatten)]
        params: ParamArgs,
        /// Evaluation point x > 0.
        #[arg(long)]
        x: f64,
        /// Report the density (default).
        #[arg(long, conflicts_with_all = ["cdf", "logpdf"])]
        pdf: bool,
        /// Report the CDF.
        #[arg(long, conflicts_with = "logpdf")]
        cdf: bool,
        /// Report the log-density.
        #[arg(long)]
        logpdf: bool,
    },
    /// Quantile at probability q: dist::quantile.
    Quantile {
        #[command(flatten)]
        params: ParamArgs,
        /// Probability in (0, 1).
        #[arg(long)]
        q: f64,
    },
    /// Fractional moment E[X^r]: dist::moment.
    Moment {
        #[command(flatten)]
        params: ParamArgs,
        /// Moment order r (any real; existence depends on the branch).
        #[arg(long, allow_negative_numbers = true)]
        r: f64,
    },
    /// Differential entropy: dist::entropy.
    Entropy {
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Draw samples: sampling::sample_gig, or chain iterates with --chain.
    ///
    /// Prints a JSON metadata line, then one value per line (17 significant
    /// digits). With --output the values go to the file instead, header-free,
    /// and only the metadata line stays on stdout.
    Sample {
        #[command(flatten)]
        params: ParamArgs,
        /// Number of draws.
        #[arg(long)]
        n: u64,
        /// Iterate the continued-fraction chain for GIG(-p, a, b) instead of
        /// sampling GIG(p, a, b) directly: sampling::chain_iterates.
        #[arg(long)]
        chain: bool,
        /// Chain steps m per replicate.
        #[arg(long, default_value_t = 1, requires = "chain")]
        steps: u64,
        /// Chain starting point (default sqrt(b/a)).
        #[arg(long, requires = "chain")]
        init: Option<f64>,
        /// Write values to this file instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Maximum-likelihood fit of a CSV sample: estimate::fit_gig.
    ///
    /// The input is header-free, one positive value per line.
    Fit {
        /// CSV file: one value per line, no header.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Full)]
        mode: ModeArg,
        /// Fixed index for --mode fixed-p.
        #[arg(long, allow_negative_numbers = true, required_if_eq("mode", "fixed-p"))]
        p: Option<f64>,
    },
    /// Run one characterization probe and print its ProbeReport.
    ///
    /// A Fail verdict exits 3; Pass and Degenerate exit 0.
    Verify {
        #[command(subcommand)]
        probe: Probe,
    },
    /// Stein-discrepancy goodness of fit on a CSV sample: stein::stein_gof.
    ///
    /// Exits 3 when the bootstrap p-value is at most 0.01.
    SteinGof {
        /// CSV file: one value per line, no header.
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
        /// Bootstrap replicates (>= 99).
        #[arg(long, default_value_t = 199)]
        bootstrap: u64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Stein discrepancy of chain iterates vs. their stationary law across
    /// step counts: stein::chain_convergence_experiment.
    SteinRate {
        #[command(flatten)]
        params: ParamArgs,
        /// Comma-separated step counts, strictly increasing.
        #[arg(long, value_delimiter = ',', required = true)]
        steps: Vec<u64>,
        /// Replicates per step count.
        #[arg(long)]
        n: u64,
        /// Also write an (m, discrepancy) CSV table to this file.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Subcommand)]
enum Probe {
    /// Matsumoto-Yor independence of (U, V): lab::independence_test.
    ///
    /// Draws X ~ GIG(-p, a, b) and Y ~ Gamma(p, a/2), maps through
    /// lab::my_pair_batch, and permutation-tests the dependence score.
    MatsumotoYor {
        #[command(flatten)]
        params: ParamArgs,
        /// Pair count.
        #[arg(long)]
        n: u64,
        /// Permutation budget.
        #[arg(long, default_value_t = lab::DEFAULT_PERMUTATIONS)]
        permutations: usize,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Constancy of E[transform(V) | U]: lab::regression_probe.
    Regression {
        #[command(flatten)]
        params: ParamArgs,
        /// Pair count.
        #[arg(long)]
        n: u64,
        #[arg(long, value_enum, default_value_t)]
        transform: TransformArg,
        /// Regress on V^power instead of a named transform.
        #[arg(long, allow_negative_numbers = true, conflicts_with = "transform")]
        power: Option<i32>,
        /// Conditioning bins (default max(5, sqrt(n)/5)).
        #[arg(long)]
        bins: Option<usize>,
        /// Write the bin table as CSV.
        #[arg(long)]
        bin_csv: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Chou-Huang moment-ratio constancy: lab::chou_huang_probe.
    ChouHuang {
        #[command(flatten)]
        params: ParamArgs,
        /// Pair count.
        #[arg(long)]
        n: u64,
        /// Ratio order r.
        #[arg(long, allow_negative_numbers = true, default_value_t = 0)]
        r: i32,
        /// Conditioning bins (default max(5, sqrt(n)/5)).
        #[arg(long)]
        bins: Option<usize>,
        /// Write the bin table as CSV.
        #[arg(long)]
        bin_csv: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Pusz conditional-constancy: lab::pusz_coefficients + lab::pusz_probe.
    Pusz {
        #[command(flatten)]
        params: ParamArgs,
        /// Sample rows.
        #[arg(long)]
        n: u64,
        /// I.i.d. draws per row.
        #[arg(long, default_value_t = 3)]
        columns: usize,
        /// Scale delta in the statistic.
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[arg(long, value_enum, default_value_t)]
        reading: ReadingArg,
        /// Conditioning bins (default max(5, sqrt(n)/5)).
        #[arg(long)]
        bins: Option<usize>,
        /// Write the bin table as CSV.
        #[arg(long)]
        bin_csv: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Maximum-entropy moment constraints: lab::entropy_constraint_check.
    Entropy {
        #[command(flatten)]
        params: ParamArgs,
        /// Sample size.
        #[arg(long)]
        n: u64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Mudholkar-Tian IG characterization: lab::mudholkar_tian_check.
    ///
    /// Samples GIG(p, a, b) and tests it against the IG(a, b) null; leave
    /// --p at its -0.5 default to probe the null itself.
    MudholkarTian {
        /// Index of the sampled law.
        #[arg(long, allow_negative_numbers = true, default_value_t = -0.5)]
        p: f64,
        /// Linear rate a > 0.
        #[arg(long, allow_negative_numbers = true)]
        a: f64,
        /// Reciprocal rate b > 0.
        #[arg(long, allow_negative_numbers = true)]
        b: f64,
        /// Sample size.
        #[arg(long)]
        n: u64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Khatri independence-of-statistics probe: lab::khatri_probe.
    Khatri {
        #[command(flatten)]
        params: ParamArgs,
        /// Observations per replicate sample.
        #[arg(long, default_value_t = 10)]
        per_sample: usize,
        /// Replicates.
        #[arg(long)]
        n: u64,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Martingale mean/variance ladder for IG(a, b): lab::martingale_probe.
    Martingale {
        /// Linear rate a > 0.
        #[arg(long, allow_negative_numbers = true)]
        a: f64,
        /// Reciprocal rate b > 0.
        #[arg(long, allow_negative_numbers = true)]
        b: f64,
        /// Series index n of S_n.
        #[arg(long, default_value_t = 3)]
        index: u64,
        /// Replicates.
        #[arg(long)]
        n: u64,
        /// Conditioning bins (default max(5, sqrt(n)/5)).
        #[arg(long)]
        bins: Option<usize>,
        /// Write the bin table as CSV.
        #[arg(long)]
        bin_csv: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Continued-fraction chain stationarity: KS of iterates vs GIG(-p, a, b).
    ///
    /// Without --init each replicate starts at a stationary draw, so any
    /// number of steps should preserve the law; with --init it runs
    /// sampling::chain_iterates from the fixed point instead.
    Chain {
        #[command(flatten)]
        params: ParamArgs,
        /// Replicates.
        #[arg(long)]
        n: u64,
        /// Chain steps per replicate.
        #[arg(long, default_value_t = 1)]
        steps: u64,
        /// Fixed starting point for all replicates.
        #[arg(long)]
        init: Option<f64>,
        #[command(flatten)]
        run: RunArgs,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                ErrorKind::InvalidSubcommand => EXIT_USAGE,
                _ => EXIT_VALIDATION,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Bessel { order, arg, dlog_dorder } => bessel(order, arg, dlog_dorder),
        Command::Eval { params, x, pdf: _, cdf, logpdf } => {
            let what = if cdf {
                PointStat::Cdf
            } else if logpdf {
                PointStat::Logpdf
            } else {
                PointStat::Pdf
            };
            eval(&params.build()?, x, what)
        }
        Command::Quantile { params, q } => quantile(&params.build()?, q),
        Command::Moment { params, r } => moment(&params.build()?, r),
        Command::Entropy { params } => entropy(&params.build()?),
        Command::Sample { params, n, chain, steps, init, output, run } => {
            sample(&params, n, chain, steps, init, output.as_deref(), &run)
        }
        Command::Fit { input, mode, p } => fit(&input, mode, p),
        Command::Verify { probe } => verify(probe),
        Command::SteinGof { input, params, bootstrap, run } => {
            stein_gof(&input, &params.build()?, bootstrap, &run)
        }
        Command::SteinRate { params, steps, n, csv, run } => {
            stein_rate(&params, &steps, n, csv.as_deref(), &run)
        }
    }
}

/// Start of every JSON report: schema/version stamps plus the command name.
fn envelope(command: &str) -> Map<String, Value> {
    let mut map = Map::new();
    map.insert("schema_version".into(), gig::report::SCHEMA_VERSION.into());
    map.insert("library_version".into(), gig::VERSION.into());
    map.insert("command".into(), command.into());
    map
}

fn params_value(params: &GigParams) -> Value {
    serde_json::to_value(estimate::ParamsView::from(params)).expect("params serialize")
}

/// Write to stdout, treating a closed pipe downstream as a quiet exit so
/// `gig sample ... | head` behaves.
fn emit_raw(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Ok(()) => Ok(()),
        Err(err) if err.kind() == std::io::ErrorKind::BrokenPipe => std::process::exit(0),
        Err(err) => Err(GigError::Config(format!("cannot write to stdout: {err}"))),
    }
}

fn emit(line: &str) -> Result<()> {
    emit_raw(line)?;
    emit_raw("\n")
}

fn print_json(map: Map<String, Value>) -> Result<()> {
    emit(&render_json(&Value::Object(map))?)
}

fn bessel(order: f64, argument: f64, dlog_dorder: bool) -> Result<ExitCode> {
    let config = BesselEvalConfig::default();
    let mut map = envelope("bessel");
    map.insert("order".into(), order.into());
    map.insert("argument".into(), argument.into());
    if dlog_dorder {
        let value = special::bessel_k_dlog_dorder(order, argument, &config)?;
        map.insert("method".into(), "central difference of log K in the order".into());
        map.insert("value".into(), value.into());
        // Step h = config.order_derivative_step; the difference is O(h^2)
        // accurate and the two K evaluations each carry ~1e-12 relative
        // error amplified by 1/(2h).
        let est = config.order_derivative_step * config.order_derivative_step
            + 1e-12 * (1.0 + value.abs()) / config.order_derivative_step;
        map.insert("estimated_error".into(), est.into());
    } else {
        let eval = special::bessel_k(order, argument, &config)?;
        map.insert("method".into(), "adaptive quadrature of the cosh integral".into());
        map.insert("value".into(), eval.value.into());
        map.insert("estimated_error".into(), eval.estimated_error.into());
    }
    print_json(map)?;
    Ok(ExitCode::SUCCESS)
}

fn eval(params: &GigParams, x: f64, what: PointStat) -> Result<ExitCode> {
    let (name, value, method, est_error) = match what {
        PointStat::Pdf => {
            let value = dist::density(params, x)?;
            ("pdf", value, "closed form via log K", 1e-12 * value.abs())
        }
        PointStat::Logpdf => {
            let value = dist::log_density(params, x)?;
            ("logpdf", value, "closed form via log K", 1e-12 * (1.0 + value.abs()))
        }
        PointStat::Cdf => {
            let value = dist::cdf(params, x)?;
            let method = match params.branch() {
                Branch::Full => "adaptive quadrature of the density",
                Branch::Gamma | Branch::ReciprocalGamma => "regularized incomplete gamma",
            };
            (
                "cdf",
                value,
                method,
                // Quadrature targets 1e-10 relative; the gamma branches are
                // series/continued-fraction evaluations near machine precision.
                match params.branch() {
                    Branch::Full => 1e-10,
                    _ => 1e-14,
                },
            )
        }
    };
    let mut map = envelope("eval");
    map.insert("params".into(), params_value(params));
    map.insert("x".into(), x.into());
    map.insert("statistic".into(), name.into());
    map.insert("method".into(), method.into());
    map.insert("value".into(), value.into());
    map.insert("estimated_error".into(), est_error.into());
    print_json(map)?;
    Ok(ExitCode::SUCCESS)
}

fn quantile(params: &GigParams, q: f64) -> Result<ExitCode> {
    let value = dist::quantile(params, q)?;
    let mut map = envelope("quantile");
    map.insert("params".into(), params_value(params));
    map.insert("q".into(), q.into());
    map.insert("method".into(), "bracketed root of the CDF".into());
    map.insert("value".into(), value.into());
    // The root is polished until the CDF bracket collapses; the residual in
    // x is the CDF tolerance over the local density.
    let density = dist::density(params, value).unwrap_or(f64::INFINITY);
    let est = if density > 0.0 { 1e-10 / density } else { f64::INFINITY };
    map.insert("estimated_error".into(), est.into());
    print_json(map)?;
    Ok(ExitCode::SUCCESS)
}

fn moment(params: &GigParams, r: f64) -> Result<ExitCode> {
    let value = dist::moment(params, r)?;
    let mut map = envelope("moment");
    map.insert("params".into(), params_value(params));
    map.insert("r".into(), r.into());
    map.insert("method".into(), "Bessel/gamma ratio in log space".into());
    map.insert("value".into(), value.into());
    map.insert("estimated_error".into(), (1e-12 * value.abs()).into());
    print_json(map)?;
    Ok(ExitCode::SUCCESS)
}

fn entropy(params: &GigParams) -> Result<ExitCode> {
    let value = dist::entropy(params)?;
    let mut map = envelope("entropy");
    map.insert("params".into(), params_value(params));
    map.insert(
        "method".into(),
        "closed form with a differentiated Bessel order".into(),
    );
    map.insert("value".into(), value.into());
    // Dominated by the O(h^2) order-derivative step inside the formula.
    map.insert("estimated_error".into(), (1e-8 * (1.0 + value.abs())).into());
    print_json(map)?;
    Ok(ExitCode::SUCCESS)
}

fn sample(
    args: &ParamArgs,
    n: u64,
    chain: bool,
    steps: u64,
    init: Option<f64>,
    output: Option<&Path>,
    run: &RunArgs,
) -> Result<ExitCode> {
    let plan = run.plan()?;
    let mut map = envelope("sample");
    let batch = if chain {
        // Chain parameters are (p, a, b) with p > 0; iterates target
        // GIG(-p, a, b).
        let init = init.unwrap_or_else(|| sampling::default_chain_init(args.a, args.b));
        let batch = sampling::chain_iterates_with_workers(
            args.p,
            args.a,
            args.b,
            steps,
            n,
            &plan.child(1),
            init,
            run.workers,
        )?;
        map.insert("mode".into(), "chain".into());
        map.insert(
            "params".into(),
            params_value(&GigParams::new(-args.p, args.a, args.b)?),
        );
        map.insert("steps".into(), steps.into());
        map.insert("init".into(), init.into());
        batch
    } else {
        let params = GigParams::new(args.p, args.a, args.b)?;
        let batch = sampling::sample_gig_with_workers(params, n, &plan.child(1), run.workers)?;
        map.insert("mode".into(), "iid".into());
        map.insert("params".into(), params_value(&params));
        batch
    };
    map.insert("n".into(), n.into());
    map.insert("seed_plan".into(), serde_json::to_value(plan).expect("seed plan serialize"));
    map.insert("params_tag".into(), batch.params_tag.clone().into());
    map.insert("degenerate".into(), batch.degenerate.into());
    map.insert(
        "output".into(),
        match output {
            Some(path) => path.display().to_string().into(),
            None => Value::Null,
        },
    );
    print_json(map)?;
    let mut body = String::with_capacity(batch.values.len() * 24);
    for value in &batch.values {
        writeln!(body, "{value:.16e}").expect("string write");
    }
    match output {
        Some(path) => fs::write(path, body)
            .map_err(|err| GigError::Config(format!("cannot write {}: {err}", path.display())))?,
        None => emit_raw(&body)?,
    }
    Ok(ExitCode::SUCCESS)
}

/// Header-free CSV reader: one value per line, blank lines ignored.
fn read_values(path: &Path) -> Result<Vec<f64>> {
    let raw = fs::read_to_string(path)
        .map_err(|err| GigError::Config(format!("cannot read {}: {err}", path.display())))?;
    let mut values = Vec::new();
    for (index, line) in raw.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let value: f64 = line.parse().map_err(|_| {
            GigError::Config(format!(
                "{} line {}: not a number: {line:?}",
                path.display(),
                index + 1
            ))
        })?;
        values.push(value);
    }
    Ok(values)
}

/// Wrap file-sourced values in a batch; the seed plan is a placeholder since
/// nothing was drawn here.
fn file_batch(path: &Path, values: Vec<f64>) -> SampleBatch {
    SampleBatch {
        values,
        params_tag: format!("file: {}", path.display()),
        seed_plan: SeedPlan::new(0, 0),
        degenerate: false,
    }
}

fn fit(input: &Path, mode: ModeArg, p: Option<f64>) -> Result<ExitCode> {
    let values = read_values(input)?;
    let batch = file_batch(input, values);
    let (mode, mode_name) = match mode {
        ModeArg::Full => (FitMode::Full, "full"),
        ModeArg::FixedP => {
            let p = p.ok_or_else(|| GigError::Config("--mode fixed-p needs --p".into()))?;
            (FitMode::FixedP(p), "fixed-p")
        }
        ModeArg::Ig => (FitMode::Ig, "ig"),
    };
    let result = estimate::fit_gig(&batch, mode)?;
    let mut map = envelope("fit");
    map.insert("input".into(), input.display().to_string().into());
    map.insert("mode".into(), mode_name.into());
    map.insert("n".into(), (batch.values.len() as u64).into());
    map.insert("result".into(), serde_json::to_value(&result).expect("result serialize"));
    print_json(map)?;
    Ok(ExitCode::SUCCESS)
}

fn exit_for(verdict: Verdict) -> ExitCode {
    match verdict {
        Verdict::Fail => ExitCode::from(EXIT_CHARACTERIZATION),
        Verdict::Pass | Verdict::Degenerate => ExitCode::SUCCESS,
    }
}

fn write_bin_csv(path: &Path, report: &ProbeReport) -> Result<()> {
    let bins = report.bin_table.as_deref().ok_or_else(|| {
        GigError::Config(format!("probe {} produced no bin table", report.probe_name))
    })?;
    let mut body = String::from("lower,upper,count,mean,se,cond_mean\n");
    for bin in bins {
        writeln!(
            body,
            "{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e}",
            bin.lower, bin.upper, bin.count, bin.mean, bin.se, bin.cond_mean
        )
        .expect("string write");
    }
    fs::write(path, body)
        .map_err(|err| GigError::Config(format!("cannot write {}: {err}", path.display())))
}

/// Print a finished report (with the CLI's own seed lineage patched in) and
/// map its verdict to an exit code.
fn finish_probe(
    mut report: ProbeReport,
    plan: &SeedPlan,
    bin_csv: Option<&Path>,
) -> Result<ExitCode> {
    report.seed_plan = *plan;
    if let Some(path) = bin_csv {
        write_bin_csv(path, &report)?;
    }
    emit(&render_json(&report)?)?;
    Ok(exit_for(report.verdict))
}

/// Null pairs for the Matsumoto-Yor family: X ~ GIG(-p, a, b) from child 1,
/// Y ~ Gamma(p, a/2) from child 2.
fn my_null_pairs(
    args: &ParamArgs,
    n: u64,
    plan: &SeedPlan,
    workers: Option<usize>,
) -> Result<lab::PairBatch> {
    if !(args.p > 0.0) {
        return Err(GigError::InvalidParams(format!(
            "the Matsumoto-Yor pairing needs p > 0, got p = {}",
            args.p
        )));
    }
    let gig_batch = sampling::sample_gig_with_workers(
        GigParams::new(-args.p, args.a, args.b)?,
        n,
        &plan.child(1),
        workers,
    )?;
    let gamma_batch = sampling::sample_gamma_with_workers(
        GammaParams::new(args.p, 0.5 * args.a)?,
        n,
        &plan.child(2),
        workers,
    )?;
    lab::my_pair_batch(&gig_batch.values, &gamma_batch.values)
}

fn bin_count(requested: Option<usize>, n: u64) -> usize {
    requested.unwrap_or_else(|| stats::default_bin_count(n as usize))
}

fn verify(probe: Probe) -> Result<ExitCode> {
    match probe {
        Probe::MatsumotoYor { params, n, permutations, run } => {
            let plan = run.plan()?;
            let pairs = my_null_pairs(&params, n, &plan, run.workers)?;
            let report = lab::independence_test(&pairs, permutations, &plan.child(3))?;
            finish_probe(report, &plan, None)
        }
        Probe::Regression { params, n, transform, power, bins, bin_csv, run } => {
            let plan = run.plan()?;
            let pairs = my_null_pairs(&params, n, &plan, run.workers)?;
            let transform = match (power, transform) {
                (Some(r), _) => VTransform::Power(r),
                (None, TransformArg::V) => VTransform::V,
                (None, TransformArg::Reciprocal) => VTransform::ReciprocalV,
            };
            let report = lab::regression_probe(&pairs, transform, bin_count(bins, n))?;
            finish_probe(report, &plan, bin_csv.as_deref())
        }
        Probe::ChouHuang { params, n, r, bins, bin_csv, run } => {
            let plan = run.plan()?;
            let pairs = my_null_pairs(&params, n, &plan, run.workers)?;
            let report = lab::chou_huang_probe(&pairs, r, bin_count(bins, n))?;
            finish_probe(report, &plan, bin_csv.as_deref())
        }
        Probe::Pusz { params, n, columns, delta, reading, bins, bin_csv, run } => {
            let plan = run.plan()?;
            let gig_params = params.build()?;
            let reading = match reading {
                ReadingArg::Mu => PuszReading::IndexIsMu,
                ReadingArg::PCoef => PuszReading::IndexIsPCoef,
            };
            let (p_coef, q_coef, _) = lab::pusz_coefficients(&gig_params, delta, columns, reading)?;
            if columns == 0 || n.checked_mul(columns as u64).is_none() {
                return Err(GigError::Config(format!(
                    "invalid row layout: {n} rows x {columns} columns"
                )));
            }
            let flat = sampling::sample_gig_with_workers(
                gig_params,
                n * columns as u64,
                &plan.child(1),
                run.workers,
            )?;
            let rows: Vec<Vec<f64>> = flat
                .values
                .chunks_exact(columns)
                .map(<[f64]>::to_vec)
                .collect();
            let report = lab::pusz_probe(&rows, p_coef, q_coef, bin_count(bins, n))?;
            finish_probe(report, &plan, bin_csv.as_deref())
        }
        Probe::Entropy { params, n, run } => {
            let plan = run.plan()?;
            let gig_params = params.build()?;
            let batch =
                sampling::sample_gig_with_workers(gig_params, n, &plan.child(1), run.workers)?;
            let report = lab::entropy_constraint_check(&gig_params, &batch)?;
            finish_probe(report, &plan, None)
        }
        Probe::MudholkarTian { p, a, b, n, run } => {
            let plan = run.plan()?;
            let batch = sampling::sample_gig_with_workers(
                GigParams::new(p, a, b)?,
                n,
                &plan.child(1),
                run.workers,
            )?;
            let report = lab::mudholkar_tian_check(&batch, a, b)?;
            finish_probe(report, &plan, None)
        }
        Probe::Khatri { params, per_sample, n, run } => {
            let plan = run.plan()?;
            let report = lab::khatri_probe(per_sample, n, &params.build()?, &plan.child(1))?;
            finish_probe(report, &plan, None)
        }
        Probe::Martingale { a, b, index, n, bins, bin_csv, run } => {
            let plan = run.plan()?;
            let report =
                lab::martingale_probe(b, a, index, n, bin_count(bins, n), &plan.child(1))?;
            finish_probe(report, &plan, bin_csv.as_deref())
        }
        Probe::Chain { params, n, steps, init, run } => {
            let plan = run.plan()?;
            chain_probe(&params, n, steps, init, &plan, run.workers)
        }
    }
}

/// KS test of chain iterates against the stationary law GIG(-p, a, b).
fn chain_probe(
    args: &ParamArgs,
    n: u64,
    steps: u64,
    init: Option<f64>,
    plan: &SeedPlan,
    workers: Option<usize>,
) -> Result<ExitCode> {
    let stationary = GigParams::new(-args.p, args.a, args.b)?;
    let (values, start_tag) = match init {
        Some(init) => {
            let batch = sampling::chain_iterates_with_workers(
                args.p, args.a, args.b, steps, n, &plan.child(1), init, workers,
            )?;
            (batch.values, format!("init = {init}"))
        }
        None => {
            // Stationary start: each replicate draws X_0 from the target law
            // and advances `steps` transitions with its own keyed stream.
            let sampler = GigSampler::new(stationary)?;
            let chain = ContinuedFractionChain::new(args.p, args.a, args.b)?;
            if n == 0 {
                return Err(GigError::Sample("need n >= 1".into()));
            }
            let values = seed::collect_replicates(&plan.child(1), n, workers, |_, rng| {
                let mut state = ChainState { iterate_index: 0, value: sampler.sample(rng) };
                for _ in 0..steps {
                    state = chain.step(state, rng);
                }
                state.value
            });
            (values, "stationary start".into())
        }
    };
    let mut sorted = values;
    sorted.sort_by(f64::total_cmp);
    let cdf = dist::cdf_sorted(&stationary, &sorted)?;
    let ks = stats::ks_from_sorted_cdf(&cdf)?;
    let mut report = ProbeReport::new(
        "chain",
        format!("{stationary}, m = {steps}, {start_tag}"),
        *plan,
    );
    report.stat("n", n as f64);
    report.stat("steps", steps as f64);
    report.stat("ks_statistic", ks.statistic);
    report.set_p_value(ks.p_value)?;
    report.note("KS of chain iterates against the stationary law");
    report.verdict = if ks.p_value > 0.01 { Verdict::Pass } else { Verdict::Fail };
    emit(&render_json(&report)?)?;
    Ok(exit_for(report.verdict))
}

fn stein_gof(input: &Path, params: &GigParams, bootstrap: u64, run: &RunArgs) -> Result<ExitCode> {
    let plan = run.plan()?;
    let values = read_values(input)?;
    let n = values.len() as u64;
    let batch = file_batch(input, values);
    let class = stein::default_function_class(params);
    let result = stein::stein_gof_with_workers(
        &batch,
        params,
        &class,
        bootstrap,
        &plan.child(1),
        run.workers,
    )?;
    let mut map = envelope("stein-gof");
    map.insert("input".into(), input.display().to_string().into());
    map.insert("params".into(), params_value(params));
    map.insert("n".into(), n.into());
    map.insert("seed_plan".into(), serde_json::to_value(plan).expect("seed plan serialize"));
    let p_value = result.p_value;
    map.insert("result".into(), serde_json::to_value(&result).expect("result serialize"));
    print_json(map)?;
    if p_value <= 0.01 {
        Ok(ExitCode::from(EXIT_CHARACTERIZATION))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn stein_rate(
    args: &ParamArgs,
    steps: &[u64],
    n: u64,
    csv: Option<&Path>,
    run: &RunArgs,
) -> Result<ExitCode> {
    let plan = run.plan()?;
    let rows = stein::chain_convergence_experiment_with_workers(
        args.p,
        args.a,
        args.b,
        steps,
        n,
        &plan,
        run.workers,
    )?;
    let mut map = envelope("stein-rate");
    map.insert(
        "params".into(),
        params_value(&GigParams::new(-args.p, args.a, args.b)?),
    );
    map.insert("n".into(), n.into());
    map.insert("seed_plan".into(), serde_json::to_value(plan).expect("seed plan serialize"));
    let rows_json: Vec<Value> = rows
        .iter()
        .map(|&(m, discrepancy)| {
            let mut row = Map::new();
            row.insert("m".into(), m.into());
            row.insert("discrepancy".into(), discrepancy.into());
            Value::Object(row)
        })
        .collect();
    map.insert("rows".into(), rows_json.into());
    if let Some(path) = csv {
        let mut body = String::from("m,discrepancy\n");
        for &(m, discrepancy) in &rows {
            if discrepancy.is_finite() {
                writeln!(body, "{m},{discrepancy:.16e}").expect("string write");
            } else {
                writeln!(body, "{m},{discrepancy}").expect("string write");
            }
        }
        fs::write(path, body).map_err(|err| {
            GigError::Config(format!("cannot write {}: {err}", path.display()))
        })?;
        map.insert("csv".into(), path.display().to_string().into());
    }
    print_json(map)?;
    Ok(ExitCode::SUCCESS)
}
