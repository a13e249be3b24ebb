//! `dppscreen`: generate data, solve, and run screened λ-paths.
//!
//! Exit codes: 0 success, 1 IO or input-file failure, 2 usage error,
//! 3 numerical failure (the failing λ is named on stderr).

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dppscreen::bench::{self, BenchConfig, ReportFormat};
use dppscreen::data::{self, Correlation, SyntheticSpec};
use dppscreen::screening;
use dppscreen::solver;
use dppscreen::{Dataset, Error, GroupLayout, LambdaGrid, Rule, SolverConfig, Spacing};

#[derive(Parser)]
#[command(name = "dppscreen", version, about = "Safe screening (DPP/EDPP) for Lasso and group Lasso")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic regression problem
    Gen(GenArgs),
    /// Solve a single Lasso or group Lasso problem
    Solve(SolveArgs),
    /// Solve a λ-path with one screening rule and write a report
    Path(PathArgs),
    /// Benchmark several rules against the unscreened path
    Bench(BenchArgs),
    /// Basic-rule discard counts at selected λ/λ_max ratios
    ScreenReport(ScreenReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Number of samples
    #[arg(long)]
    n: usize,
    /// Number of features
    #[arg(long)]
    p: usize,
    /// Nonzero coefficients (nonzero groups with --groups)
    #[arg(long)]
    nnz: usize,
    /// Noise standard deviation
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    /// Column correlation: `iid` or `ar1:RHO`
    #[arg(long, default_value = "iid", value_parser = parse_corr)]
    corr: Correlation,
    /// Random seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output prefix; writes PREFIX.x.csv (or .x.bin), PREFIX.y.csv, PREFIX.beta_true.csv
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated group sizes
    #[arg(long, value_parser = parse_sizes)]
    groups: Option<Sizes>,
    /// Write X and y as one DPPS binary file instead of CSV
    #[arg(long)]
    binary: bool,
}

#[derive(Args)]
struct Input {
    /// Design matrix: CSV, or a DPPS binary file when the name ends in .bin
    #[arg(long)]
    x: PathBuf,
    /// Response CSV (ignored for .bin designs)
    #[arg(long)]
    y: Option<PathBuf>,
    /// Comma-separated group sizes; switches to group Lasso
    #[arg(long, value_parser = parse_sizes)]
    groups: Option<Sizes>,
    /// Relative duality-gap tolerance
    #[arg(long, default_value_t = 1e-8)]
    gap_tol: f64,
    /// Iteration cap per solve
    #[arg(long, default_value_t = 100_000)]
    max_iters: usize,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    input: Input,
    /// Absolute λ
    #[arg(long, conflicts_with = "ratio", required_unless_present = "ratio")]
    lambda: Option<f64>,
    /// λ as a fraction of λ_max
    #[arg(long)]
    ratio: Option<f64>,
    /// Write β here (one value per line) instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PathRule {
    None,
    Dpp,
    Imp1,
    Imp2,
    Edpp,
    Safe,
    Strong,
    GroupEdpp,
}

impl PathRule {
    fn rule(self) -> Option<Rule> {
        match self {
            PathRule::None => None,
            PathRule::Dpp => Some(Rule::Dpp),
            PathRule::Imp1 => Some(Rule::Imp1),
            PathRule::Imp2 => Some(Rule::Imp2),
            PathRule::Edpp => Some(Rule::Edpp),
            PathRule::Safe => Some(Rule::Safe),
            PathRule::Strong => Some(Rule::Strong),
            PathRule::GroupEdpp => Some(Rule::GroupEdpp),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SpacingArg {
    Linear,
    Log,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Jsonl => ReportFormat::JsonLines,
        }
    }
}

#[derive(Args)]
struct GridArgs {
    /// Number of λ values
    #[arg(long, default_value_t = 100)]
    points: usize,
    /// Smallest λ/λ_max
    #[arg(long, default_value_t = 0.05)]
    lo: f64,
    /// Largest λ/λ_max
    #[arg(long, default_value_t = 1.0)]
    hi: f64,
    /// Spacing of the ratios
    #[arg(long, value_enum, default_value_t = SpacingArg::Linear)]
    spacing: SpacingArg,
}

impl GridArgs {
    fn spacing(&self) -> Spacing {
        match self.spacing {
            SpacingArg::Linear => Spacing::Linear,
            SpacingArg::Log => Spacing::Log,
        }
    }
}

#[derive(Args)]
struct PathArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    grid: GridArgs,
    /// Screening rule (`none` solves the unscreened path only)
    #[arg(long, value_enum, default_value_t = PathRule::Edpp)]
    rule: PathRule,
    /// Report file
    #[arg(long, default_value = "report.csv")]
    out: PathBuf,
    /// Report format
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Write the coefficients at the last grid point here, one per line
    #[arg(long)]
    coef: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    grid: GridArgs,
    /// Comma-separated rules; empty for the baseline only
    #[arg(long, default_value = "edpp,dpp,safe", value_parser = parse_rules)]
    rules: RuleList,
    /// Repetitions; per-λ timings are medians
    #[arg(long, default_value_t = 3)]
    trials: usize,
    /// Seeds the arm order within each trial
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Extra safety margin subtracted from every screening threshold
    #[arg(long, default_value_t = 0.0)]
    safety_margin: f64,
    /// Report file
    #[arg(long, default_value = "bench.csv")]
    out: PathBuf,
    /// Report format
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Args)]
struct ScreenReportArgs {
    #[command(flatten)]
    input: Input,
    /// Comma-separated basic rules
    #[arg(long, default_value = "safe,dpp,imp1,imp2,edpp,strong", value_parser = parse_rules)]
    rules: RuleList,
    /// Comma-separated λ/λ_max ratios in (0, 1]
    #[arg(long, default_value = "0.9,0.7,0.5,0.3,0.1", value_parser = parse_ratios)]
    ratios: Ratios,
}

#[derive(Clone)]
struct Sizes(Vec<usize>);
#[derive(Clone)]
struct RuleList(Vec<Rule>);
#[derive(Clone)]
struct Ratios(Vec<f64>);

fn parse_corr(s: &str) -> Result<Correlation, String> {
    if s.eq_ignore_ascii_case("iid") {
        return Ok(Correlation::Iid);
    }
    let rho = s
        .strip_prefix("ar1:")
        .ok_or_else(|| format!("expected `iid` or `ar1:RHO`, got {s:?}"))?;
    rho.parse().map(Correlation::Ar1).map_err(|e| format!("bad rho {rho:?}: {e}"))
}

fn split(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty())
}

fn parse_sizes(s: &str) -> Result<Sizes, String> {
    split(s)
        .map(|t| t.parse::<usize>().map_err(|e| format!("bad group size {t:?}: {e}")))
        .collect::<Result<_, _>>()
        .map(Sizes)
}

fn parse_rules(s: &str) -> Result<RuleList, String> {
    split(s)
        .map(|t| t.parse::<Rule>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()
        .map(RuleList)
}

fn parse_ratios(s: &str) -> Result<Ratios, String> {
    split(s)
        .map(|t| t.parse::<f64>().map_err(|e| format!("bad ratio {t:?}: {e}")))
        .collect::<Result<_, _>>()
        .map(Ratios)
}

enum Failure {
    Io(String),
    Usage(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        if e.is_numeric() {
            Failure::Numeric(msg)
        } else if e.is_io() {
            Failure::Io(msg)
        } else {
            match e {
                Error::Parse { .. }
                | Error::BadMagic
                | Error::UnsupportedVersion(_)
                | Error::TruncatedFile { .. }
                | Error::DimensionMismatch(_)
                | Error::NonFiniteInput(_) => Failure::Io(msg),
                _ => Failure::Usage(msg),
            }
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Path(a) => cmd_path(a),
        Command::Bench(a) => cmd_bench(a),
        Command::ScreenReport(a) => cmd_screen_report(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(3)
        }
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_column(path: &Path, values: &[f64]) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in values {
        writeln!(w, "{v}")?;
    }
    w.flush()
}

fn cmd_gen(a: GenArgs) -> CmdResult {
    let mut spec = SyntheticSpec::new(a.n, a.p, a.nnz, a.sigma, a.seed).with_correlation(a.corr);
    if let Some(Sizes(s)) = a.groups {
        spec = spec.with_groups(s);
    }
    let (d, beta) = data::generate_synthetic(&spec).map_err(|e| Failure::Usage(e.to_string()))?;
    if a.binary {
        data::save_binary(&d, &with_suffix(&a.out, ".x.bin"))?;
        write_column(&with_suffix(&a.out, ".y.csv"), d.y())?;
    } else {
        data::save_csv(&d, &with_suffix(&a.out, ".x.csv"), &with_suffix(&a.out, ".y.csv"))?;
    }
    write_column(&with_suffix(&a.out, ".beta_true.csv"), &beta)?;
    Ok(())
}

fn load(input: &Input) -> Result<(Dataset, Option<GroupLayout>, SolverConfig), Failure> {
    let d = if input.x.extension().is_some_and(|e| e == "bin") {
        data::load_binary(&input.x)?
    } else {
        let y = input
            .y
            .as_ref()
            .ok_or_else(|| Failure::Usage("--y is required for CSV designs".into()))?;
        data::load_csv(&input.x, y)?
    };
    let g = match &input.groups {
        Some(Sizes(s)) => Some(GroupLayout::for_features(s.clone(), d.n_features())?),
        None => None,
    };
    let cfg = SolverConfig {
        gap_tol: input.gap_tol,
        max_iters: input.max_iters,
        ..SolverConfig::default()
    };
    cfg.validate()?;
    Ok((d, g, cfg))
}

fn cmd_solve(a: SolveArgs) -> CmdResult {
    let (d, g, cfg) = load(&a.input)?;
    let lambda = match (a.lambda, a.ratio) {
        (Some(l), _) => l,
        (None, Some(r)) => r * bench::problem_lambda_max(&d, g.as_ref())?,
        (None, None) => unreachable!("clap requires one of them"),
    };
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Failure::Usage(format!("lambda must be positive, got {lambda}")));
    }
    let sol = match &g {
        None => solver::solve_lasso(&d, lambda, None, &cfg),
        Some(g) => solver::solve_group_lasso(&d, g, lambda, None, &cfg),
    }
    .map_err(|e| Failure::Numeric(format!("lambda = {lambda}: {e}")))?;
    eprintln!(
        "lambda = {lambda}, duality gap = {}, iterations = {}, nonzeros = {}",
        sol.duality_gap,
        sol.iterations,
        sol.support(0.0).len()
    );
    match a.out {
        Some(path) => write_column(&path, &sol.beta)?,
        None => {
            let mut out = io::stdout().lock();
            for v in &sol.beta {
                writeln!(out, "{v}")?;
            }
        }
    }
    Ok(())
}

fn cmd_path(a: PathArgs) -> CmdResult {
    let (d, g, cfg) = load(&a.input)?;
    let lmax = bench::problem_lambda_max(&d, g.as_ref())?;
    let grid = LambdaGrid::spaced(lmax, a.grid.points, a.grid.lo, a.grid.hi, a.grid.spacing())?;
    let rule = a.rule.rule();
    let bench::SinglePath { result, solutions } = bench::run_single_path(&d, rule, &grid, &cfg, g.as_ref())?;
    bench::emit_report(&result, &a.out, a.format.into())?;
    if let (Some(path), Some(last)) = (&a.coef, solutions.last()) {
        write_column(path, &last.beta)?;
    }
    let name = rule.map_or(bench::BASELINE, Rule::name);
    if let Some(s) = result.summary_for(name) {
        print!("{}", bench::summary_csv(s));
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> CmdResult {
    let (d, g, solver_cfg) = load(&a.input)?;
    let cfg = BenchConfig {
        n_points: a.grid.points,
        ratio_lo: a.grid.lo,
        ratio_hi: a.grid.hi,
        spacing: a.grid.spacing(),
        rules: a.rules.0,
        trials: a.trials,
        seed: a.seed,
        solver: solver_cfg,
        safety_margin: a.safety_margin,
    };
    let result = bench::run_path_benchmark(&d, &cfg, g.as_ref())?;
    bench::emit_report(&result, &a.out, a.format.into())?;
    for f in &result.failures {
        eprintln!("warning: {} at lambda = {}: {}", f.rule, f.lambda, f.message);
    }
    let mut out = io::stdout().lock();
    writeln!(out, "rule,speedup,mean_rejection_ratio,screen_seconds,solver_seconds")?;
    for s in &result.summaries {
        writeln!(
            out,
            "{},{},{},{},{}",
            s.rule,
            s.speedup,
            s.mean_rejection_ratio.map(|v| v.to_string()).unwrap_or_default(),
            s.screen_seconds,
            s.solver_seconds
        )?;
    }
    Ok(())
}

fn cmd_screen_report(a: ScreenReportArgs) -> CmdResult {
    let (d, g, _) = load(&a.input)?;
    if g.is_some() {
        return Err(Failure::Usage("screen-report covers the Lasso rules only".into()));
    }
    let (lmax, _) = screening::lambda_max(&d)?;
    let mut out = io::stdout().lock();
    writeln!(out, "rule,lambda,lambda_over_lambda_max,n_discarded,n_features")?;
    for rule in &a.rules.0 {
        for &r in &a.ratios.0 {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Failure::Usage(format!("ratio {r} must lie in (0, 1]")));
            }
            let lambda = r * lmax;
            let mask = screening::basic_screen(*rule, &d, lambda)?;
            writeln!(out, "{},{lambda},{r},{},{}", rule.name(), mask.n_discarded(), d.n_features())?;
        }
    }
    Ok(())
}
