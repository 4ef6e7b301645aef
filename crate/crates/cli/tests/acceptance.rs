//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use peakcert::certificates::{
    check_claim1, check_claim2, check_eps_condition, check_first_shell, check_radius_bound,
};
use peakcert::hypothesis::{default_p_grid, derive_pq, GUARD};
use peakcert::schedule::check_sum_brackets;
use peakcert::{
    audit_family, BuildOptions, DerivedConstants, DiskExponentialFamily, GridSpec,
    HypothesisConstants, Overrides, PeakSeries, Schedule, SyntheticFamily, WeightEngine,
};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome, u64);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn reference() -> (HypothesisConstants, DerivedConstants) {
    let h = HypothesisConstants::new(0.5, 1.0, 0.75, 0.5, 2.0).unwrap();
    DerivedConstants::derive(&h, &Overrides::default(), 120).unwrap()
}

fn engine() -> WeightEngine {
    let (h, d) = reference();
    WeightEngine::new(&h, &d, 1e-10).unwrap()
}

fn peeque() -> Outcome {
    let (p, q) = derive_pq(0.75, 4.0).map_err(|e| e.to_string())?;
    ensure!(p == 0.25 && q == 0.9375, "(p, q) = ({p}, {q})");
    let r1 = ((1.0 + p) * 0.75 - q).abs();
    let r2 = ((1.0 - q) - p / 4.0).abs();
    ensure!(r1 <= 1e-12 && r2 <= 1e-12, "residuals {r1:e}, {r2:e}");
    Ok(format!("p = {p}, q = {q}, residuals {r1:e}, {r2:e}"))
}

fn schedule_equivalence() -> Outcome {
    let (h, d) = reference();
    let s = Schedule::new(&h, &d);
    let mut worst = 0.0f64;
    for m in 1..=200 {
        let (a, b) = (s.log_inv_radius(m), s.log_inv_radius_closed_form(m));
        worst = worst.max((a - b).abs() / a.abs().max(b.abs()));
    }
    ensure!(worst <= 1e-9, "max relative gap {worst:e}");
    let (r1, r2) = (s.log_inv_radius(1), s.log_inv_radius(2));
    ensure!(
        (r1 - std::f64::consts::LN_10).abs() < 1e-6,
        "log(1/r_1) = {r1}"
    );
    ensure!((r2 - 5.991_465).abs() < 1e-6, "log(1/r_2) = {r2}");
    Ok(format!(
        "max relative gap {worst:.2e}; log(1/r_1) = {r1:.6}, log(1/r_2) = {r2:.6}"
    ))
}

fn brackets() -> Outcome {
    for p in default_p_grid() {
        let r = check_sum_brackets(10_000, p).map_err(|e| e.to_string())?;
        ensure!(
            r.passed,
            "brackets fail at p = {p}, m = {:?}",
            r.first_violation
        );
    }
    let (_, d) = reference();
    let rec = check_radius_bound(&d, 1000);
    ensure!(rec.passed, "radius bound fails: {rec:?}");
    ensure!(d.l == 5.0, "L = {}", d.l);
    Ok(format!(
        "19 p values x m in [2, 1e4]; radius bound with L = 5 min slack {:.3e}",
        rec.min_margin
    ))
}

fn lemma() -> Outcome {
    let e = engine();
    let mut worst = 0.0f64;
    for x in [0.0, 1.0, 5.0, 25.0] {
        let r = e.lemma_residual(x, 50.0).map_err(|e| e.to_string())?.abs();
        ensure!(r <= 1e-6, "residual {r:e} at x = {x}");
        worst = worst.max(r);
    }
    Ok(format!("max relative residual {worst:.2e}"))
}

fn certificates() -> Outcome {
    let (h, d) = reference();
    let shell = check_first_shell(&h, &d, GUARD);
    ensure!(
        shell.passed && (shell.min_margin - 0.0406).abs() < 5e-4,
        "first shell {shell:?}"
    );
    let bad = DerivedConstants::from_parts(&h, 0.2, d.m, d.l).unwrap();
    let shell_bad = check_first_shell(&h, &bad, GUARD);
    ensure!(!shell_bad.passed, "D = 0.2 passed the first shell");
    let eps = check_eps_condition(&h, &d, 120, GUARD);
    ensure!(eps.passed && d.m == 4.0, "eps condition {eps:?}");
    let e = WeightEngine::new(&h, &d, 1e-10).unwrap();
    let c1 = check_claim1(&h, &e, 120, GUARD);
    ensure!(c1.passed && c1.min_margin > 0.0, "claim 1 {c1:?}");
    let c2 = check_claim2(&h, &e, &Schedule::new(&h, &d), 120, GUARD);
    ensure!(c2.passed && c2.min_margin > 0.0, "claim 2 {c2:?}");
    Ok(format!(
        "first shell {:+.4} (D=0.2: {:+.4}); eps min {:.3e}; claim 1 min {:.3e}; claim 2 min {:.3e}",
        shell.min_margin, shell_bad.min_margin, eps.min_margin, c1.min_margin, c2.min_margin
    ))
}

fn normalizer() -> Outcome {
    let e = engine();
    let coarse = e.normalizer(1000).map_err(|e| e.to_string())?;
    let fine = e.normalizer(10_000).map_err(|e| e.to_string())?;
    ensure!(
        coarse.relative_width() <= 1e-3,
        "relative width {:e}",
        coarse.relative_width()
    );
    ensure!(
        coarse.contains_enclosure(&fine),
        "{coarse} does not contain {fine}"
    );
    Ok(format!(
        "N=1e3 {coarse} (rel. width {:.2e}) contains N=1e4 {fine}",
        coarse.relative_width()
    ))
}

fn audits() -> Outcome {
    let (h, _) = reference();
    let syn = SyntheticFamily::new(h, 0.1).map_err(|e| e.to_string())?;
    let radii: Vec<f64> = (1..=6).map(|e| 10f64.powi(-e)).collect();
    let a = audit_family(&syn, &radii, 1000).map_err(|e| e.to_string())?;
    ensure!(a.passed, "synthetic audit: {:?}", a.first_failure());
    let disk = DiskExponentialFamily::new(h, 0.2).map_err(|e| e.to_string())?;
    let b = audit_family(&disk, &[0.05, 0.1, 0.2], 10_000).map_err(|e| e.to_string())?;
    ensure!(b.passed, "disk audit: {:?}", b.first_failure());
    Ok(format!(
        "synthetic {} points, disk {} points",
        a.points_checked, b.points_checked
    ))
}

fn peaking() -> Outcome {
    let (h, d) = reference();
    let fam = SyntheticFamily::new(h, d.d).map_err(|e| e.to_string())?;
    let opts = BuildOptions {
        terms: 100,
        ..Default::default()
    };
    let series = PeakSeries::build(Box::new(fam), d, &opts).map_err(|e| e.to_string())?;
    let grid: GridSpec = "log:1e-30:1:500".parse().unwrap();
    let rep = series.verify_peak(&grid).map_err(|e| e.to_string())?;
    ensure!(rep.peak_contains_one, "F(0) = {}", rep.peak_value.re);
    ensure!(
        rep.passed,
        "max |F| {} at {:?}",
        rep.max_abs_hi,
        rep.worst_point
    );
    let mut forced = 0;
    for p in rep.points.iter().filter(|p| p.y.re >= 0.1) {
        let v = series.evaluate(&p.y).map_err(|e| e.to_string())?;
        ensure!(v.abs.contains(0.5), "|F({})| = {}", p.y.re, v.abs);
        ensure!(
            (v.abs.hi - 0.5).abs() <= v.abs.width(),
            "|F({})| = {}",
            p.y.re,
            v.abs
        );
        forced += 1;
    }
    ensure!(forced > 0, "grid has no point with y ≥ 0.1");
    Ok(format!(
        "F(0) in {}; max |F|.hi = {:.6} (min margin {:.6}); {forced} points at y ≥ 0.1 equal 0.5",
        rep.peak_value.re, rep.max_abs_hi, rep.min_margin
    ))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], out: Option<&Path>) -> (i32, Vec<u8>) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_peakcert"));
    cmd.args(args);
    if let Some(p) = out {
        cmd.arg("--out").arg(p);
    }
    let o = cmd.output().expect("run peakcert");
    let bytes = match out {
        Some(p) => std::fs::read(p).unwrap_or_default(),
        None => o.stdout,
    };
    (o.status.code().unwrap_or(-1), bytes)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = configs().join("ref.toml");
    let cfg = cfg.to_str().unwrap();
    let series = dir.path().join("series.toml");
    let (code, _) = run(&["build", "--config", cfg], Some(&series));
    ensure!(code == 0, "build exited {code}");
    let series = series.to_str().unwrap();
    let commands: [&[&str]; 3] = [
        &["certify", "--config", cfg],
        &["eval", "--config", cfg, "--series", series],
        &["verify", "--config", cfg, "--series", series],
    ];
    for args in commands {
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        let (ca, ba) = run(args, Some(&a));
        let (cb, bb) = run(args, Some(&b));
        ensure!(ca == 0 && cb == 0, "{} exited {ca}/{cb}", args[0]);
        ensure!(!ba.is_empty() && ba == bb, "{} outputs differ", args[0]);
    }
    let expected = [
        ("invalid_alpha.toml", "params", 1),
        ("first_shell_failure.toml", "params", 2),
        ("small_m.toml", "certify", 2),
    ];
    for (file, command, want) in expected {
        let path = configs().join(file);
        let (code, _) = run(&[command, "--config", path.to_str().unwrap()], None);
        ensure!(
            code == want,
            "{command} {file} exited {code}, expected {want}"
        );
    }
    let (code, _) = run(&["frobnicate"], None);
    ensure!(code == 1, "unknown subcommand exited {code}");
    Ok("certify/eval/verify byte-identical; exit codes 0/1/2 as designed".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "p-q-M identities", peeque, 1),
        (2, "schedule closed form", schedule_equivalence, 1),
        (3, "sum/integral brackets and radius bound", brackets, 10),
        (4, "integral equation", lemma, 5),
        (5, "certificates", certificates, 30),
        (6, "normalizer enclosure", normalizer, 10),
        (7, "family audits", audits, 30),
        (8, "peaking", peaking, 60),
        (9, "determinism and exit codes", determinism, 60),
    ];
    let mut failed = 0;
    for (id, name, check, budget) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(_) if elapsed > Duration::from_secs(budget) => Err(format!(
                "took {:.2}s, budget {budget}s",
                elapsed.as_secs_f64()
            )),
            other => other,
        };
        match outcome {
            Ok(detail) => println!(
                "PASS criterion {id} ({name}) [{:.2}s]: {detail}",
                elapsed.as_secs_f64()
            ),
            Err(detail) => {
                failed += 1;
                println!(
                    "FAIL criterion {id} ({name}) [{:.2}s]: {detail}",
                    elapsed.as_secs_f64()
                );
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
