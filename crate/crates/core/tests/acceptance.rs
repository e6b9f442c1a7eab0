//! Acceptance criteria, one verdict line each.
//!
//! Runs as a plain binary so the lines are always shown. Every criterion is
//! evaluated at its stated bound; a FAIL line is a measured result, not a test
//! crash. The process exits nonzero only if a computation itself errors.

use std::fs::File;
use std::time::Instant;

use torus_bie::harness::{convergence_study, fitted_order, write_csv, ConvergenceRow, PaperCase};
use torus_bie::validation::{
    bounds, gauss_identities, recursion_suite, regime_boundary_suite, self_interaction_suite, OracleComparison,
};

/// A mesh counts as resolved once its tube-center error is at most this.
const RESOLVED_ERROR: f64 = 1e-6;

struct Report {
    lines: Vec<(String, bool)>,
}

impl Report {
    fn line(&mut self, id: &str, passed: bool, detail: String) {
        let verdict = if passed { "PASS" } else { "FAIL" };
        println!("[{verdict}] criterion {id}: {detail}");
        self.lines.push((id.to_string(), passed));
    }
}

fn strictly_decreasing(rows: &[ConvergenceRow]) -> bool {
    rows.windows(2).all(|w| w[1].rel_l2_error < w[0].rel_l2_error)
}

fn errors(rows: &[ConvergenceRow]) -> String {
    rows.iter()
        .map(|r| format!("p1={}: {:.2e}", r.p1, r.rel_l2_error))
        .collect::<Vec<_>>()
        .join(", ")
}

fn study(case: PaperCase, p1: std::ops::RangeInclusive<usize>, name: &str) -> Vec<ConvergenceRow> {
    let configs: Vec<_> = p1.map(|p| case.config(p).expect("valid configuration")).collect();
    let rows = convergence_study(&configs, |_, _| {});
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join(format!("convergence_{name}.csv"));
    write_csv(File::create(&path).expect("create CSV"), &rows).expect("write CSV");
    println!("         wrote {}", path.display());
    rows
}

fn worst(c: &[OracleComparison]) -> f64 {
    c.iter().map(OracleComparison::relative_error).fold(0.0, f64::max)
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        // Keeps `cargo test -- --list` working.
        return;
    }
    let mut report = Report { lines: Vec::new() };

    // 1. Gauss identities.
    let start = Instant::now();
    let gauss = gauss_identities(8, 1, 100).expect("Gauss identities");
    let secs = start.elapsed().as_secs_f64();
    report.line(
        "1",
        gauss.surface_max_error <= bounds::GAUSS_SURFACE && gauss.interior_max_error <= bounds::GAUSS_INTERIOR && secs <= 60.0,
        format!(
            "surface max |apply(1)-2| = {:.3e} (<= {:.0e}), interior max |U-1| = {:.3e} (<= {:.0e}), {secs:.1} s (<= 60 s)",
            gauss.surface_max_error,
            bounds::GAUSS_SURFACE,
            gauss.interior_max_error,
            bounds::GAUSS_INTERIOR
        ),
    );

    // 2. Convergence, circular torus.
    let start = Instant::now();
    let rows_a = study(PaperCase::A, 3..=10, "a");
    let secs = start.elapsed().as_secs_f64();
    let order = fitted_order(&rows_a[..5]);
    let finest = rows_a.last().unwrap().rel_l2_error;
    let monotone = strictly_decreasing(&rows_a);
    report.line(
        "2",
        monotone && order >= 8.0 && finest <= 5e-9 && secs <= 900.0,
        format!(
            "monotone: {monotone}; fitted order over p1=3..7 = {order:.2} (>= 8); finest {finest:.3e} (<= 5e-9); {secs:.0} s; errors {}",
            errors(&rows_a)
        ),
    );

    // 3. Convergence, perturbed and thin tori.
    let rows_b = study(PaperCase::B, 3..=8, "b");
    let rows_c = study(PaperCase::C, 2..=6, "c");
    let ok_b = strictly_decreasing(&rows_b) && rows_b.last().unwrap().rel_l2_error <= 1e-7;
    let ok_c = strictly_decreasing(&rows_c) && rows_c.last().unwrap().rel_l2_error <= 1e-7;
    report.line(
        "3",
        ok_b && ok_c,
        format!("case b: {}; case c: {}", errors(&rows_b), errors(&rows_c)),
    );

    // 4. GMRES on resolved meshes.
    let resolved: Vec<&ConvergenceRow> = rows_a
        .iter()
        .chain(&rows_b)
        .chain(&rows_c)
        .filter(|r| r.rel_l2_error <= RESOLVED_ERROR)
        .collect();
    let offenders: Vec<String> = resolved
        .iter()
        .filter(|r| r.gmres_iters > 25)
        .map(|r| format!("{}x{} took {}", r.p1, r.p2, r.gmres_iters))
        .collect();
    let iters: Vec<usize> = resolved.iter().map(|r| r.gmres_iters).collect();
    report.line(
        "4",
        offenders.is_empty(),
        format!(
            "{} resolved meshes (error <= {RESOLVED_ERROR:.0e}), iterations {iters:?} (<= 25, residual <= 1e-13){}",
            resolved.len(),
            if offenders.is_empty() { String::new() } else { format!("; over: {}", offenders.join(", ")) }
        ),
    );

    // 5. Recursion oracles.
    let start = Instant::now();
    let rec = recursion_suite(50, 2024).expect("recursion suite");
    let secs = start.elapsed().as_secs_f64();
    report.line(
        "5",
        rec.max_relative_error <= bounds::MOMENT_RELATIVE
            && rec.max_derivative_error <= bounds::DERIVATIVE_RELATIVE
            && rec.max_branch_mismatch <= bounds::BRANCH_AGREEMENT
            && secs <= 120.0,
        format!(
            "{} configurations: moments {:.3e} (<= 1e-9), derivatives {:.3e} (<= 1e-5), branches {:.3e} (<= 1e-10), {secs:.1} s",
            rec.configs, rec.max_relative_error, rec.max_derivative_error, rec.max_branch_mismatch
        ),
    );

    // 6. Self-interactions.
    let start = Instant::now();
    let selfs = self_interaction_suite(8, 10, 11).expect("self-interaction suite");
    let secs = start.elapsed().as_secs_f64();
    let per: Vec<String> = selfs.iter().map(|c| format!("{:.1e}", c.relative_error())).collect();
    report.line(
        "6",
        worst(&selfs) <= bounds::SELF_INTERACTION_RELATIVE && secs <= 300.0,
        format!(
            "max relative error {:.3e} (<= 1e-7) over [{}], {secs:.1} s",
            worst(&selfs),
            per.join(", ")
        ),
    );

    // 7. Regime boundaries.
    let regimes = regime_boundary_suite(8).expect("regime boundary suite");
    let by_radius: Vec<String> = [1.99, 2.01, 3.49, 3.51]
        .iter()
        .map(|&rad| {
            let group: Vec<OracleComparison> = regimes
                .iter()
                .filter(|c| (c.t[0].hypot(c.t[1]) - rad).abs() < 1e-9)
                .cloned()
                .collect();
            format!("|t|={rad}: {:.2e}", worst(&group))
        })
        .collect();
    report.line(
        "7",
        worst(&regimes) <= bounds::REGIME_BOUNDARY_RELATIVE,
        format!("max relative error (<= 1e-8) {}", by_radius.join(", ")),
    );

    // 8. Informational timing.
    let near = rows_c.iter().find(|r| r.unknowns == 10_000);
    report.line(
        "8",
        true,
        match near {
            Some(r) => format!(
                "informational: case c at {} unknowns spent {:.1} s on near-field weights, {:.1} s in total",
                r.unknowns, r.near_seconds, r.total_seconds
            ),
            None => "informational: no 10,000-unknown mesh in the run".into(),
        },
    );

    let failed: Vec<&str> = report.lines.iter().filter(|l| !l.1).map(|l| l.0.as_str()).collect();
    println!(
        "acceptance: {} of {} criteria pass{}",
        report.lines.len() - failed.len(),
        report.lines.len(),
        if failed.is_empty() { String::new() } else { format!("; failing: {}", failed.join(", ")) }
    );
}
