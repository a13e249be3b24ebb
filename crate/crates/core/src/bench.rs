//! Path benchmark: the unscreened warm-started path against each screening
//! rule, with rejection ratios, timings and speedups.
//!
//! Report schema (CSV, one row per rule and λ):
//!
//! ```text
//! rule,lambda,lambda_over_lambda_max,n_discarded,n_true_zero,rejection_ratio,screen_seconds,solver_seconds
//! ```
//!
//! The unscreened path appears as rule `none`. Each rule is followed by a
//! summary row named `summary:<rule>` whose `lambda` is empty,
//! `lambda_over_lambda_max` holds the speedup, the counts and seconds are
//! path totals and `rejection_ratio` is the mean over rows that have one.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::screening::{self, PathOptions, ScreenedPath};
use crate::solver::{self, SolverConfig};
use crate::types::{Dataset, GroupLayout, LambdaGrid, PathFailure, PathRecord, PathResult, PrimalSolution, Rule, RuleSummary, Spacing};

/// `|β_i|` at or below this counts as zero in the reference solve.
pub const ZERO_THRESHOLD: f64 = 1e-10;

pub const BASELINE: &str = "none";
const SUMMARY_PREFIX: &str = "summary:";
const HEADER: [&str; 8] = [
    "rule",
    "lambda",
    "lambda_over_lambda_max",
    "n_discarded",
    "n_true_zero",
    "rejection_ratio",
    "screen_seconds",
    "solver_seconds",
];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub n_points: usize,
    pub ratio_lo: f64,
    pub ratio_hi: f64,
    pub spacing: Spacing,
    pub rules: Vec<Rule>,
    pub trials: usize,
    /// Shuffles the order in which the arms run within each trial.
    pub seed: u64,
    pub solver: SolverConfig,
    pub safety_margin: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n_points: 100,
            ratio_lo: 0.05,
            ratio_hi: 1.0,
            spacing: Spacing::Linear,
            rules: vec![Rule::Edpp],
            trials: 1,
            seed: 0,
            solver: SolverConfig::default(),
            safety_margin: 0.0,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 2 {
            return Err(Error::InvalidArgument(format!("n_points = {} must be >= 2", self.n_points)));
        }
        if !(self.ratio_lo > 0.0 && self.ratio_lo < self.ratio_hi && self.ratio_hi <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < ratio_lo < ratio_hi <= 1, got {} and {}",
                self.ratio_lo, self.ratio_hi
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be >= 1".into()));
        }
        self.solver.validate()
    }
}

/// `λ_max` of the problem: the Lasso one, or the group one when `g` is given.
pub fn problem_lambda_max(d: &Dataset, g: Option<&GroupLayout>) -> Result<f64> {
    Ok(match g {
        None => screening::lambda_max(d)?.0,
        Some(g) => screening::group_lambda_max(d, g)?.0,
    })
}

fn check_rule(rule: Rule, grouped: bool) -> Result<()> {
    let ok = match rule {
        Rule::GroupEdpp => grouped,
        Rule::Strong => true,
        _ => !grouped,
    };
    if ok {
        Ok(())
    } else if grouped {
        Err(Error::InvalidArgument(format!("rule {rule} is not available for group Lasso")))
    } else {
        Err(Error::InvalidArgument(format!("rule {rule} needs a group layout")))
    }
}

struct Arm {
    solutions: Vec<PrimalSolution>,
    n_discarded: Vec<usize>,
    screen: Vec<f64>,
    solver: Vec<f64>,
    failures: Vec<(f64, String)>,
}

fn baseline_arm(d: &Dataset, g: Option<&GroupLayout>, grid: &LambdaGrid, cfg: &SolverConfig, fail_fast: bool) -> Result<Arm> {
    let mut arm = Arm {
        solutions: Vec::with_capacity(grid.len()),
        n_discarded: vec![0; grid.len()],
        screen: vec![0.0; grid.len()],
        solver: Vec::with_capacity(grid.len()),
        failures: Vec::new(),
    };
    for (k, &lambda) in grid.values().iter().enumerate() {
        let warm = arm.solutions.last().map(|s| s.beta.as_slice());
        let t0 = Instant::now();
        let res = match g {
            None => solver::solve_lasso(d, lambda, warm, cfg),
            Some(g) => solver::solve_group_lasso(d, g, lambda, warm, cfg),
        };
        arm.solver.push(t0.elapsed().as_secs_f64());
        let sol = match res {
            Ok(s) => s,
            Err(Error::MaxItersExceeded { best, gap, .. }) if !fail_fast => {
                arm.failures.push((lambda, format!("max_iters reached with gap {gap:e}")));
                *best
            }
            Err(e) => {
                return Err(Error::PathStep {
                    index: k,
                    lambda,
                    source: Box::new(e),
                })
            }
        };
        arm.solutions.push(sol);
    }
    Ok(arm)
}

fn rule_arm(
    d: &Dataset,
    g: Option<&GroupLayout>,
    rule: Rule,
    grid: &LambdaGrid,
    cfg: &SolverConfig,
    opts: &PathOptions,
) -> Result<Arm> {
    let path: ScreenedPath = match (g, rule) {
        (None, r) => screening::sequential_screen_with(r, d, grid, cfg, opts)?,
        (Some(g), Rule::GroupEdpp) => screening::group_sequential_screen_with(d, g, grid, cfg, opts)?,
        (Some(g), Rule::Strong) => screening::group_strong_rule_path(d, g, grid, cfg)?,
        (Some(_), r) => return Err(Error::InvalidArgument(format!("rule {r} is not available for group Lasso"))),
    };
    let failures = path
        .steps
        .iter()
        .zip(grid.values())
        .filter_map(|(s, l)| s.failure.clone().map(|m| (*l, m)))
        .collect();
    Ok(Arm {
        n_discarded: path.masks.iter().map(|m| m.n_discarded()).collect(),
        screen: path.steps.iter().map(|s| s.screen_seconds).collect(),
        solver: path.steps.iter().map(|s| s.solver_seconds).collect(),
        solutions: path.solutions,
        failures,
    })
}

fn zero_units(beta: &[f64], g: Option<&GroupLayout>) -> usize {
    match g {
        None => beta.iter().filter(|b| b.abs() <= ZERO_THRESHOLD).count(),
        Some(g) => (0..g.n_groups())
            .filter(|&k| beta[g.range(k)].iter().all(|b| b.abs() <= ZERO_THRESHOLD))
            .count(),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn summarize(name: &str, rows: &[PathRecord], baseline_total: f64) -> RuleSummary {
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.rejection_ratio).collect();
    let screen: f64 = rows.iter().map(|r| r.screen_seconds).sum();
    let solve: f64 = rows.iter().map(|r| r.solver_seconds).sum();
    RuleSummary {
        rule: name.to_string(),
        n_discarded: rows.iter().map(|r| r.n_discarded).sum(),
        n_true_zero: rows.iter().map(|r| r.n_true_zero).sum(),
        mean_rejection_ratio: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
        screen_seconds: screen,
        solver_seconds: solve,
        speedup: baseline_total / (screen + solve),
    }
}

struct RunSpec<'a> {
    grid: &'a LambdaGrid,
    rules: &'a [Rule],
    trials: usize,
    seed: u64,
    solver: SolverConfig,
    opts: PathOptions,
}

/// Report plus the per-λ solutions of each arm (baseline first).
fn run(d: &Dataset, g: Option<&GroupLayout>, spec: &RunSpec) -> Result<(PathResult, Vec<Vec<PrimalSolution>>)> {
    for &r in spec.rules {
        check_rule(r, g.is_some())?;
    }
    let grid = spec.grid;
    let fail_fast = !spec.opts.continue_on_failure;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // arm 0 is the baseline; arm k+1 is rules[k]
    let n_arms = spec.rules.len() + 1;
    let mut first: Vec<Option<Arm>> = (0..n_arms).map(|_| None).collect();
    let mut screen_times: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); grid.len()]; n_arms];
    let mut solver_times = screen_times.clone();
    for _ in 0..spec.trials {
        let mut order: Vec<usize> = (0..n_arms).collect();
        order.shuffle(&mut rng);
        for a in order {
            let arm = if a == 0 {
                baseline_arm(d, g, grid, &spec.solver, fail_fast)?
            } else {
                rule_arm(d, g, spec.rules[a - 1], grid, &spec.solver, &spec.opts)?
            };
            for k in 0..grid.len() {
                screen_times[a][k].push(arm.screen[k]);
                solver_times[a][k].push(arm.solver[k]);
            }
            if first[a].is_none() {
                first[a] = Some(arm);
            }
        }
    }
    let arms: Vec<Arm> = first.into_iter().map(|a| a.expect("trials >= 1")).collect();
    let true_zero: Vec<usize> = arms[0].solutions.iter().map(|s| zero_units(&s.beta, g)).collect();

    let mut result = PathResult {
        lambda_max: grid.lambda_max(),
        ..PathResult::default()
    };
    let names: Vec<String> = std::iter::once(BASELINE.to_string())
        .chain(spec.rules.iter().map(|r| r.name().to_string()))
        .collect();
    let mut baseline_total = 0.0;
    for (a, (arm, name)) in arms.iter().zip(&names).enumerate() {
        let rows: Vec<PathRecord> = (0..grid.len())
            .map(|k| PathRecord {
                rule: name.clone(),
                lambda: grid.values()[k],
                lambda_over_lambda_max: grid.ratios()[k],
                n_discarded: arm.n_discarded[k],
                n_true_zero: true_zero[k],
                // the unscreened arm rejects nothing by construction
                rejection_ratio: if a == 0 {
                    None
                } else {
                    PathRecord::ratio(arm.n_discarded[k], true_zero[k])
                },
                screen_seconds: median(screen_times[a][k].clone()),
                solver_seconds: median(solver_times[a][k].clone()),
            })
            .collect();
        if a == 0 {
            baseline_total = rows.iter().map(|r| r.screen_seconds + r.solver_seconds).sum();
            result.baseline_seconds = baseline_total;
        }
        result.summaries.push(summarize(name, &rows, baseline_total));
        result.records.extend(rows);
        result.failures.extend(arm.failures.iter().map(|(lambda, message)| PathFailure {
            rule: name.clone(),
            lambda: *lambda,
            message: message.clone(),
        }));
    }
    Ok((result, arms.into_iter().map(|a| a.solutions).collect()))
}

/// Runs the unscreened path and every configured rule `trials` times over
/// the same grid and reports per-λ medians. Solver failures are recorded in
/// `PathResult::failures` and the path continues from the best iterate.
pub fn run_path_benchmark(d: &Dataset, cfg: &BenchConfig, g: Option<&GroupLayout>) -> Result<PathResult> {
    cfg.validate()?;
    let lmax = problem_lambda_max(d, g)?;
    let grid = LambdaGrid::spaced(lmax, cfg.n_points, cfg.ratio_lo, cfg.ratio_hi, cfg.spacing)?;
    run(
        d,
        g,
        &RunSpec {
            grid: &grid,
            rules: &cfg.rules,
            trials: cfg.trials,
            seed: cfg.seed,
            solver: cfg.solver,
            opts: PathOptions {
                safety_margin: cfg.safety_margin,
                continue_on_failure: true,
            },
        },
    )
    .map(|(r, _)| r)
}

/// Outcome of [`run_single_path`].
#[derive(Debug, Clone)]
pub struct SinglePath {
    pub result: PathResult,
    /// Solutions of the requested arm (the baseline when no rule was given).
    pub solutions: Vec<PrimalSolution>,
}

/// Single run of one rule (or only the baseline when `rule` is `None`) along
/// `grid`. Any solver failure aborts with the failing λ.
pub fn run_single_path(
    d: &Dataset,
    rule: Option<Rule>,
    grid: &LambdaGrid,
    cfg: &SolverConfig,
    g: Option<&GroupLayout>,
) -> Result<SinglePath> {
    let rules: Vec<Rule> = rule.into_iter().collect();
    let (result, mut arms) = run(
        d,
        g,
        &RunSpec {
            grid,
            rules: &rules,
            trials: 1,
            seed: 0,
            solver: *cfg,
            opts: PathOptions::default(),
        },
    )?;
    let solutions = arms.pop().expect("at least the baseline arm");
    Ok(SinglePath { result, solutions })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    JsonLines,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "jsonl" | "json-lines" | "json_lines" => Ok(Self::JsonLines),
            other => Err(Error::InvalidArgument(format!("unknown report format {other:?}"))),
        }
    }
}

/// One report line as written: a per-λ row or a rule summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub rule: String,
    pub lambda: Option<f64>,
    pub lambda_over_lambda_max: f64,
    pub n_discarded: usize,
    pub n_true_zero: usize,
    pub rejection_ratio: Option<f64>,
    pub screen_seconds: f64,
    pub solver_seconds: f64,
}

impl ReportRow {
    pub fn is_summary(&self) -> bool {
        self.rule.starts_with(SUMMARY_PREFIX)
    }

    pub fn speedup(&self) -> Option<f64> {
        self.is_summary().then_some(self.lambda_over_lambda_max)
    }
}

impl From<&PathRecord> for ReportRow {
    fn from(r: &PathRecord) -> Self {
        Self {
            rule: r.rule.clone(),
            lambda: Some(r.lambda),
            lambda_over_lambda_max: r.lambda_over_lambda_max,
            n_discarded: r.n_discarded,
            n_true_zero: r.n_true_zero,
            rejection_ratio: r.rejection_ratio,
            screen_seconds: r.screen_seconds,
            solver_seconds: r.solver_seconds,
        }
    }
}

impl From<&RuleSummary> for ReportRow {
    fn from(s: &RuleSummary) -> Self {
        Self {
            rule: format!("{SUMMARY_PREFIX}{}", s.rule),
            lambda: None,
            lambda_over_lambda_max: s.speedup,
            n_discarded: s.n_discarded,
            n_true_zero: s.n_true_zero,
            rejection_ratio: s.mean_rejection_ratio,
            screen_seconds: s.screen_seconds,
            solver_seconds: s.solver_seconds,
        }
    }
}

/// Rows in output order: each rule's per-λ rows followed by its summary.
pub fn report_rows(r: &PathResult) -> Vec<ReportRow> {
    let mut out = Vec::with_capacity(r.records.len() + r.summaries.len());
    for s in &r.summaries {
        out.extend(r.records_for(&s.rule).map(ReportRow::from));
        out.push(ReportRow::from(s));
    }
    // records whose rule has no summary (hand-built results)
    out.extend(
        r.records
            .iter()
            .filter(|rec| r.summary_for(&rec.rule).is_none())
            .map(ReportRow::from),
    );
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_fields(row: &ReportRow) -> [String; 8] {
    [
        row.rule.clone(),
        opt(row.lambda),
        row.lambda_over_lambda_max.to_string(),
        row.n_discarded.to_string(),
        row.n_true_zero.to_string(),
        opt(row.rejection_ratio),
        row.screen_seconds.to_string(),
        row.solver_seconds.to_string(),
    ]
}

pub fn write_report<W: Write>(r: &PathResult, out: W, format: ReportFormat) -> Result<()> {
    let rows = report_rows(r);
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(HEADER)?;
            for row in &rows {
                w.write_record(csv_fields(row))?;
            }
            w.flush()?;
        }
        ReportFormat::JsonLines => {
            let mut w = BufWriter::new(out);
            for row in &rows {
                serde_json::to_writer(&mut w, row)?;
                writeln!(w)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn emit_report(r: &PathResult, path: &Path, format: ReportFormat) -> Result<()> {
    write_report(r, File::create(path)?, format)
}

/// Summary row rendered as CSV (header included), as printed by the CLI.
pub fn summary_csv(s: &RuleSummary) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    w.write_record(csv_fields(&ReportRow::from(s))).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
}

fn parse_field<T: FromStr>(path: &Path, row: usize, col: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        row,
        column: col + 1,
        message: format!("cannot parse {s:?} as {}", HEADER[col]),
    })
}

fn parse_opt(path: &Path, row: usize, col: usize, s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_field(path, row, col, s).map(Some)
    }
}

/// Reads a CSV report back.
pub fn parse_report_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != HEADER {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            row: 1,
            column: 1,
            message: format!("unexpected header {header:?}"),
        });
    }
    let mut rows = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = k + 2;
        let f = |c: usize| rec.get(c).unwrap_or("");
        rows.push(ReportRow {
            rule: f(0).to_string(),
            lambda: parse_opt(path, row, 1, f(1))?,
            lambda_over_lambda_max: parse_field(path, row, 2, f(2))?,
            n_discarded: parse_field(path, row, 3, f(3))?,
            n_true_zero: parse_field(path, row, 4, f(4))?,
            rejection_ratio: parse_opt(path, row, 5, f(5))?,
            screen_seconds: parse_field(path, row, 6, f(6))?,
            solver_seconds: parse_field(path, row, 7, f(7))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};

    fn small() -> Dataset {
        generate_synthetic(&SyntheticSpec::new(20, 40, 4, 0.1, 11)).unwrap().0
    }

    fn quick_cfg(rules: Vec<Rule>) -> BenchConfig {
        BenchConfig {
            n_points: 10,
            rules,
            ..BenchConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(BenchConfig::default().validate().is_ok());
        assert!(BenchConfig { n_points: 1, ..BenchConfig::default() }.validate().is_err());
        assert!(BenchConfig { ratio_lo: 1.0, ..BenchConfig::default() }.validate().is_err());
    }

    #[test]
    fn empty_rules_baseline_only() {
        let r = run_path_benchmark(&small(), &quick_cfg(vec![]), None).unwrap();
        assert_eq!(r.summaries.len(), 1);
        assert_eq!(r.summaries[0].rule, BASELINE);
        assert!(r.records.iter().all(|x| x.rule == BASELINE && x.n_discarded == 0));
        assert!(r.records.iter().all(|x| x.rejection_ratio.is_none()));
        assert_eq!(r.summaries[0].mean_rejection_ratio, None);
    }

    #[test]
    fn ratio_arithmetic() {
        assert_eq!(PathRecord::ratio(90, 100), Some(0.9));
        assert_eq!(PathRecord::ratio(0, 0), None);
    }

    #[test]
    fn rules_checked_against_layout() {
        let d = small();
        assert!(run_path_benchmark(&d, &quick_cfg(vec![Rule::GroupEdpp]), None).is_err());
        let g = GroupLayout::new(vec![2; 20]).unwrap();
        assert!(run_path_benchmark(&d, &quick_cfg(vec![Rule::Dpp]), Some(&g)).is_err());
        let r = run_path_benchmark(&d, &quick_cfg(vec![Rule::GroupEdpp, Rule::Strong]), Some(&g)).unwrap();
        assert_eq!(r.summaries.len(), 3);
    }

    #[test]
    fn rows_sane_and_speedup_consistent() {
        let r = run_path_benchmark(&small(), &quick_cfg(vec![Rule::Edpp, Rule::Dpp]), None).unwrap();
        for rec in &r.records {
            assert!(rec.screen_seconds >= 0.0);
            assert!(rec.solver_seconds > 0.0, "{rec:?}");
            assert!(rec.rejection_ratio.is_none_or(|x| (0.0..=1.0).contains(&x)));
        }
        let s = r.summary_for("edpp").unwrap();
        let total: f64 = r.records_for("edpp").map(|x| x.screen_seconds + x.solver_seconds).sum();
        assert!((s.speedup - r.baseline_seconds / total).abs() <= 1e-9 * s.speedup);
    }

    #[test]
    fn empty_result_header_only() {
        let mut buf = Vec::new();
        write_report(&PathResult::default(), &mut buf, ReportFormat::Csv).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim_end(), HEADER.join(","));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
