use std::fs;

use dppscreen::bench::{self, BenchConfig, ReportFormat, ReportRow, BASELINE};
use dppscreen::data::{generate_synthetic, SyntheticSpec};
use dppscreen::{PathResult, Rule};

fn close12(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn small_run(rules: Vec<Rule>) -> PathResult {
    let d = generate_synthetic(&SyntheticSpec::new(30, 80, 5, 0.1, 3)).unwrap().0;
    let cfg = BenchConfig {
        n_points: 15,
        rules,
        trials: 2,
        ..BenchConfig::default()
    };
    bench::run_path_benchmark(&d, &cfg, None).unwrap()
}

#[test]
fn csv_report_round_trips() {
    let r = small_run(vec![Rule::Edpp, Rule::Dpp, Rule::Strong]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    bench::emit_report(&r, &path, ReportFormat::Csv).unwrap();
    let first = fs::read_to_string(&path).unwrap();
    assert!(first.starts_with(
        "rule,lambda,lambda_over_lambda_max,n_discarded,n_true_zero,rejection_ratio,screen_seconds,solver_seconds\n"
    ));
    let parsed = bench::parse_report_csv(&path).unwrap();
    assert_same_rows(&parsed, &bench::report_rows(&r));
}

fn assert_same_rows(parsed: &[ReportRow], expected: &[ReportRow]) {
    assert_eq!(parsed.len(), expected.len());
    for (a, b) in parsed.iter().zip(expected) {
        assert_eq!(a.rule, b.rule);
        assert_eq!(a.n_discarded, b.n_discarded);
        assert_eq!(a.n_true_zero, b.n_true_zero);
        assert_eq!(a.lambda.is_some(), b.lambda.is_some());
        if let (Some(x), Some(y)) = (a.lambda, b.lambda) {
            assert!(close12(x, y));
        }
        assert!(close12(a.lambda_over_lambda_max, b.lambda_over_lambda_max));
        assert_eq!(a.rejection_ratio.is_some(), b.rejection_ratio.is_some());
        if let (Some(x), Some(y)) = (a.rejection_ratio, b.rejection_ratio) {
            assert!(close12(x, y));
        }
        assert!(close12(a.screen_seconds, b.screen_seconds));
        assert!(close12(a.solver_seconds, b.solver_seconds));
    }
}

#[test]
fn summary_speedup_recomputes_from_rows() {
    let r = small_run(vec![Rule::Edpp, Rule::Imp1]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    bench::emit_report(&r, &path, ReportFormat::Csv).unwrap();
    let rows = bench::parse_report_csv(&path).unwrap();
    let total = |rule: &str| -> f64 {
        rows.iter()
            .filter(|x| x.rule == rule)
            .map(|x| x.screen_seconds + x.solver_seconds)
            .sum()
    };
    let baseline = total(BASELINE);
    for s in rows.iter().filter(|x| x.is_summary()) {
        let name = s.rule.trim_start_matches("summary:");
        let recomputed = baseline / total(name);
        let speedup = s.speedup().unwrap();
        assert!((speedup - recomputed).abs() <= 1e-9 * recomputed, "{name}: {speedup} vs {recomputed}");
    }
}

#[test]
fn json_lines_mirror_csv_rows() {
    let r = small_run(vec![Rule::Edpp]);
    let mut buf = Vec::new();
    bench::write_report(&r, &mut buf, ReportFormat::JsonLines).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let rows: Vec<ReportRow> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_same_rows(&rows, &bench::report_rows(&r));
}

#[test]
fn rows_are_sane_and_edpp_dominates_dpp() {
    let r = small_run(vec![Rule::Edpp, Rule::Dpp]);
    for rec in &r.records {
        assert!(rec.screen_seconds >= 0.0 && rec.solver_seconds > 0.0);
        if let Some(ratio) = rec.rejection_ratio {
            assert!(ratio <= 1.0, "{}: ratio {ratio}", rec.rule);
        }
    }
    let edpp: Vec<_> = r.records_for("edpp").collect();
    let dpp: Vec<_> = r.records_for("dpp").collect();
    for (e, p) in edpp.iter().zip(&dpp) {
        assert!(e.n_discarded >= p.n_discarded);
    }
    assert!(r.failures.is_empty());
}

#[test]
fn empty_result_is_header_only() {
    let mut buf = Vec::new();
    bench::write_report(&PathResult::default(), &mut buf, ReportFormat::Csv).unwrap();
    assert_eq!(
        String::from_utf8(buf).unwrap(),
        "rule,lambda,lambda_over_lambda_max,n_discarded,n_true_zero,rejection_ratio,screen_seconds,solver_seconds\n"
    );
}

#[test]
fn replica_orders_rules_by_mean_rejection() {
    let d = generate_synthetic(&SyntheticSpec::new(50, 2000, 20, 0.1, 1)).unwrap().0;
    let cfg = BenchConfig {
        n_points: 20,
        rules: vec![Rule::Edpp, Rule::Imp1, Rule::Dpp],
        ..BenchConfig::default()
    };
    let r = bench::run_path_benchmark(&d, &cfg, None).unwrap();
    let mean = |rule: &str| r.summary_for(rule).unwrap().mean_rejection_ratio.unwrap();
    assert!(mean("edpp") >= mean("imp1"));
    assert!(mean("imp1") >= mean("dpp"));
}

#[test]
fn screened_solutions_match_the_baseline() {
    let d = generate_synthetic(&SyntheticSpec::new(40, 120, 8, 0.1, 8)).unwrap().0;
    let lmax = bench::problem_lambda_max(&d, None).unwrap();
    let grid = dppscreen::LambdaGrid::linear(lmax, 20, 0.05, 1.0).unwrap();
    let cfg = dppscreen::SolverConfig::default();
    let base = dppscreen::screening::baseline_path(&d, None, &grid, &cfg).unwrap();
    let screened = dppscreen::screening::sequential_screen(Rule::Edpp, &d, &grid, &cfg).unwrap();
    for (a, b) in base.iter().zip(&screened.solutions) {
        let diff = a.beta.iter().zip(&b.beta).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff <= 1e-3, "λ = {}: coefficients differ by {diff:e}", a.lambda);
    }
}
