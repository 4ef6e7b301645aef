//! Subcommand implementations. Each returns the process exit status; errors
//! are mapped to exit codes in `main`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use peakcert::certificates::{check_eps_condition, check_first_shell, check_peeque, CheckRecord};
use peakcert::hypothesis::GUARD;
use peakcert::{
    make_family, run_all, BuildOptions, CaseLabel, CertificateReport, DerivedConstants, FValue,
    GridSpec, HypothesisConstants, PeakSeries, VerifyReport,
};
use serde::Serialize;

use crate::config::{Config, DEFAULT_TERMS};

pub const EXIT_FAILED: u8 = 2;

/// Flags shared by the subcommands.
#[derive(Debug, Default)]
pub struct Flags {
    pub m_max: Option<u64>,
    pub terms: Option<u64>,
    pub series: Option<PathBuf>,
    pub grid: Option<String>,
    pub out: Option<PathBuf>,
}

fn status(passed: bool) -> ExitCode {
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILED)
    }
}

/// Writes `text` to `path`, or to stdout when there is none.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    Ok(toml::to_string(value)?)
}

fn derive(cfg: &Config, m_max: u64) -> Result<(HypothesisConstants, DerivedConstants)> {
    let h = cfg.hypothesis()?;
    Ok(DerivedConstants::derive(&h, &cfg.overrides(), m_max)?)
}

#[derive(Serialize)]
struct ParamsReport {
    passed: bool,
    hypothesis: HypothesisConstants,
    normalized: HypothesisConstants,
    derived: DerivedConstants,
    checks: Vec<CheckRecord>,
}

pub fn params(cfg: &Config, flags: &Flags) -> Result<ExitCode> {
    let opts = cfg.certificate_options(flags.m_max);
    let (normalized, derived) = derive(cfg, opts.m_max)?;
    let checks = vec![
        check_first_shell(&normalized, &derived, GUARD),
        check_peeque(&normalized, &derived),
        check_eps_condition(&normalized, &derived, opts.m_max, GUARD),
    ];
    let passed = checks.iter().all(|c| c.passed);
    let report = ParamsReport {
        passed,
        hypothesis: cfg.hypothesis()?,
        normalized,
        derived,
        checks,
    };
    emit(
        flags.out.as_deref().or(cfg.output.report.as_deref()),
        &to_toml(&report)?,
    )?;
    if !passed {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        eprintln!("parameter checks failed: {}", failed.join(", "));
    }
    Ok(status(passed))
}

#[derive(Serialize)]
struct CertifyReport {
    passed: bool,
    m_max: u64,
    normalized: HypothesisConstants,
    derived: DerivedConstants,
    certificates: CertificateReport,
}

pub fn certify(cfg: &Config, flags: &Flags) -> Result<ExitCode> {
    let opts = cfg.certificate_options(flags.m_max);
    let (normalized, derived) = derive(cfg, opts.m_max)?;
    let certificates = run_all(&normalized, &derived, &opts)?;
    let passed = certificates.passed;
    if !passed {
        eprintln!(
            "certificates failed: {}",
            certificates.failed_checks().join(", ")
        );
    }
    let report = CertifyReport {
        passed,
        m_max: opts.m_max,
        normalized,
        derived,
        certificates,
    };
    emit(
        flags.out.as_deref().or(cfg.output.report.as_deref()),
        &to_toml(&report)?,
    )?;
    Ok(status(passed))
}

fn build_series(cfg: &Config, flags: &Flags) -> Result<PeakSeries> {
    let certificates = cfg.certificate_options(flags.m_max);
    let (_, derived) = derive(cfg, certificates.m_max)?;
    let family = make_family(cfg.family(), cfg.hypothesis()?, derived.d)?;
    let opts = BuildOptions {
        terms: flags.terms.or(cfg.terms).unwrap_or(DEFAULT_TERMS),
        certificates,
        ..Default::default()
    };
    Ok(PeakSeries::build(family, derived, &opts)?)
}

/// The series named by `--series`, or one built from the config.
fn load_or_build(cfg: &Config, flags: &Flags) -> Result<PeakSeries> {
    match &flags.series {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading series {}", path.display()))?;
            Ok(PeakSeries::from_toml(&text)?)
        }
        None => build_series(cfg, flags),
    }
}

pub fn build(cfg: &Config, flags: &Flags) -> Result<ExitCode> {
    let series = build_series(cfg, flags)?;
    let path = flags.out.as_deref().or(cfg.output.series.as_deref());
    emit(path, &series.to_toml()?)?;
    if let Some(p) = path {
        let n = series.normalizer();
        eprintln!(
            "wrote {} ({} terms, normalizer [{:e}, {:e}])",
            p.display(),
            series.terms(),
            n.lo,
            n.hi
        );
    }
    Ok(ExitCode::SUCCESS)
}

/// CSV with one row per grid point; planar domains get two coordinate columns.
pub fn table(series: &PeakSeries, rows: &[(FValue, CaseLabel)]) -> String {
    let domain = series.family().domain();
    let planar = domain.dimension() == 2;
    let mut out = String::new();
    out.push_str(if planar { "y_re,y_im" } else { "y" });
    out.push_str(",F_re_lo,F_re_hi,F_im_lo,F_im_hi,absF_hi,case,m_of_y\n");
    for (v, case) in rows {
        let y = domain.absolute(&v.y);
        if planar {
            let _ = write!(out, "{:.16e},{:.16e}", y.re, y.im);
        } else {
            let _ = write!(out, "{:.16e}", y.re);
        }
        let m = v.m_of_y.map(|m| m.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            ",{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
            v.re.lo, v.re.hi, v.im.lo, v.im.hi, v.abs.hi, case, m
        );
    }
    out
}

pub fn eval(cfg: &Config, flags: &Flags) -> Result<ExitCode> {
    let series = load_or_build(cfg, flags)?;
    let grid = cfg.grid(flags.grid.as_deref())?;
    let rows = series.evaluate_grid(&grid)?;
    emit(
        flags.out.as_deref().or(cfg.output.table.as_deref()),
        &table(&series, &rows),
    )?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct VerifyOutput {
    passed: bool,
    terms: u64,
    grid: String,
    min_margin: f64,
    max_abs_hi: f64,
    worst_y: [f64; 2],
    peak_value: PeakValue,
    points: Vec<PointRow>,
}

#[derive(Serialize)]
struct PeakValue {
    re: [f64; 2],
    im: [f64; 2],
    contains_one: bool,
}

#[derive(Serialize)]
struct PointRow {
    y: [f64; 2],
    abs_hi: f64,
    margin: f64,
    case: String,
    m_of_y: u64,
}

fn verify_output(series: &PeakSeries, grid: &GridSpec, rep: &VerifyReport) -> VerifyOutput {
    let domain = series.family().domain();
    let abs = |p| {
        let z = domain.absolute(p);
        [z.re, z.im]
    };
    VerifyOutput {
        passed: rep.passed,
        terms: series.terms(),
        grid: grid.to_string(),
        min_margin: rep.min_margin,
        max_abs_hi: rep.max_abs_hi,
        worst_y: abs(&rep.worst_point),
        peak_value: PeakValue {
            re: [rep.peak_value.re.lo, rep.peak_value.re.hi],
            im: [rep.peak_value.im.lo, rep.peak_value.im.hi],
            contains_one: rep.peak_contains_one,
        },
        points: rep
            .points
            .iter()
            .map(|p| PointRow {
                y: abs(&p.y),
                abs_hi: p.abs_hi,
                margin: p.margin,
                case: p.case.to_string(),
                // grid points are never the peak, so m(y) exists
                m_of_y: p.m_of_y.unwrap_or(0),
            })
            .collect(),
    }
}

pub fn verify(cfg: &Config, flags: &Flags) -> Result<ExitCode> {
    let series = load_or_build(cfg, flags)?;
    let grid = cfg.grid(flags.grid.as_deref())?;
    let rep = series.verify_peak(&grid)?;
    let out = verify_output(&series, &grid, &rep);
    emit(
        flags.out.as_deref().or(cfg.output.report.as_deref()),
        &to_toml(&out)?,
    )?;
    if let Err(e) = rep.into_result() {
        eprintln!("{e}");
        return Ok(ExitCode::from(EXIT_FAILED));
    }
    Ok(ExitCode::SUCCESS)
}
