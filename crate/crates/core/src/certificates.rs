//! Numerical certificates for every inequality the construction relies on.
//!
//! Each check yields a [`CheckRecord`]; failures are data, not errors.
//! Comparisons use [`clears`] with a relative guard band, and claims compare
//! the upper enclosure of the small side with the lower enclosure of the
//! large side.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::enclosure::{clears, Enclosure};
use crate::error::Result;
use crate::hypothesis::{
    default_p_grid, derive_pq, eps_report, first_shell_margin, radius_bound_lhs, DerivedConstants,
    HypothesisConstants, GUARD,
};
use crate::schedule::{check_sum_brackets, Schedule};
use crate::weights::{WeightEngine, DEFAULT_QUAD_TOL};

const MAX_LISTED_FAILURES: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    /// Human-readable range, e.g. `m in [1, 120]`.
    pub range: String,
    /// Smallest slack over the range; negative on failure.
    pub min_margin: f64,
    /// Index (or sample) where the smallest slack occurred.
    pub worst_at: Option<f64>,
    pub passed: bool,
    /// Guard band or absolute tolerance the check was held to.
    pub tolerance: f64,
    /// First failing indices, capped.
    pub failures: Vec<f64>,
    pub note: Option<String>,
}

impl CheckRecord {
    fn new(name: &str, range: String, tolerance: f64) -> Self {
        CheckRecord {
            name: name.to_string(),
            range,
            min_margin: f64::INFINITY,
            worst_at: None,
            passed: true,
            tolerance,
            failures: Vec::new(),
            note: None,
        }
    }

    fn observe(&mut self, at: f64, margin: f64, ok: bool) {
        if margin < self.min_margin || self.worst_at.is_none() {
            self.min_margin = margin;
            self.worst_at = Some(at);
        }
        if !ok {
            self.passed = false;
            if self.failures.len() < MAX_LISTED_FAILURES {
                self.failures.push(at);
            }
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    fn errored(name: &str, range: String, tolerance: f64, err: impl std::fmt::Display) -> Self {
        CheckRecord {
            min_margin: f64::NEG_INFINITY,
            passed: false,
            ..CheckRecord::new(name, range, tolerance)
        }
        .with_note(format!("check aborted: {err}"))
    }

    /// Replaces an empty range's `+∞` slack by 0 so reports stay finite.
    fn finish(mut self) -> Self {
        if !self.min_margin.is_finite() {
            if self.min_margin == f64::INFINITY {
                self.min_margin = 0.0;
            } else {
                self.min_margin = f64::MIN;
            }
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub passed: bool,
    pub records: Vec<CheckRecord>,
}

impl CertificateReport {
    pub fn from_records(records: Vec<CheckRecord>) -> Self {
        let passed = records.iter().all(|r| r.passed);
        CertificateReport { passed, records }
    }

    pub fn record(&self, name: &str) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn failed_checks(&self) -> Vec<&str> {
        self.records
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.name.as_str())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateOptions {
    /// Upper end of the per-m sweeps for the selection inequality and claims.
    pub m_max: u64,
    pub guard: f64,
    pub quad_tol: f64,
    pub lemma_points: Vec<f64>,
    pub lemma_offset: f64,
    pub lemma_tolerance: f64,
    pub decay_onset: f64,
    pub decay_samples: Vec<f64>,
    pub divergence_start: f64,
    pub divergence_target: f64,
    pub radpow_m: u64,
    pub bracket_m: u64,
    pub majorant_m: u64,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        CertificateOptions {
            m_max: 120,
            guard: GUARD,
            quad_tol: DEFAULT_QUAD_TOL,
            lemma_points: vec![0.0, 1.0, 5.0, 25.0],
            lemma_offset: 50.0,
            lemma_tolerance: 1e-6,
            decay_onset: 10.0,
            decay_samples: vec![1.0, 10.0, 100.0],
            divergence_start: 1e3,
            divergence_target: 1.0,
            radpow_m: 200,
            bracket_m: 10_000,
            majorant_m: 1000,
        }
    }
}

/// `(1−alpha)/2 · D^((1−alpha)/C) ≥ D^s`, held strictly.
pub fn check_first_shell(h: &HypothesisConstants, d: &DerivedConstants, guard: f64) -> CheckRecord {
    let mut rec = CheckRecord::new("first_shell", format!("D = {}", d.d), guard);
    let big = 0.5 * (1.0 - h.alpha) * d.d.powf((1.0 - h.alpha) / h.c);
    let small = d.d.powf(h.s);
    rec.observe(
        d.d,
        first_shell_margin(h.alpha, h.s, h.c, d.d),
        clears(small, big, guard),
    );
    rec.finish()
}

/// The selection inequality for `m ∈ [3, m_max]`, evaluated in its original
/// exponential form (compared through the exponents), plus `M ≥ C` and the
/// tail certificate beyond `m_max`.
pub fn check_eps_condition(
    h: &HypothesisConstants,
    d: &DerivedConstants,
    m_max: u64,
    guard: f64,
) -> CheckRecord {
    let name = "eps_condition";
    let range = format!("m in [3, {m_max}] + tail");
    let mut rec = CheckRecord::new(name, range.clone(), guard);
    let (p, _) = match derive_pq(h.t, d.m) {
        Ok(pq) => pq,
        Err(e) => return CheckRecord::errored(name, range, guard, e),
    };
    let big_m = d.m;
    let pre = (1.0 + big_m * h.t) / (1.0 - h.t);
    let log_inv_a = (1.0 / h.a).ln();
    let mut notes = Vec::new();
    if big_m < h.c {
        rec.passed = false;
        notes.push(format!("M = {big_m} below C = {}", h.c));
    }
    for m in 3..=m_max {
        let mf = m as f64;
        let lhs = pre * (1.0 - h.alpha) / (2.0 * big_m)
            * ((mf + 1.0).powf(p / big_m) - 2f64.powf(p / big_m));
        let rhs = log_inv_a * h.s * (1.0 + big_m * h.t) / (big_m * (1.0 - h.t))
            * ((mf - 1.0).powf(p) - 1.0);
        // exp(−lhs) ≥ exp(−rhs) ⇔ lhs ≤ rhs
        rec.observe(mf, rhs - lhs, clears(lhs, rhs, guard));
    }
    match eps_report(h, big_m, m_max.max(3)) {
        Ok(report) => {
            let tail = &report.tail;
            if !(tail.heuristic_passed && tail.rigorous_passed) {
                rec.passed = false;
            }
            notes.push(format!(
                "tail: d(m_check) = {:.6e}, min step = {:.6e}, p − (1−q) = {:.6e}, d' > 0 from m = {}",
                tail.margin_at_check,
                tail.min_difference,
                tail.exponent_gap,
                tail.derivative_checked_at.map_or("none".to_string(), |m| m.to_string())
            ));
        }
        Err(e) => {
            rec.passed = false;
            notes.push(format!("tail certificate aborted: {e}"));
        }
    }
    rec.with_note(notes.join("; ")).finish()
}

/// `(C·ψ(m)^t − 1)·σ_m < (1−alpha)/2 · Σ_{j≥m+1} σ_j` for `m ∈ [1, m_max]`.
pub fn check_claim1(
    h: &HypothesisConstants,
    engine: &WeightEngine,
    m_max: u64,
    guard: f64,
) -> CheckRecord {
    let name = "claim1";
    let range = format!("m in [1, {m_max}]");
    let run = || -> Result<CheckRecord> {
        let mut rec = CheckRecord::new(name, range.clone(), guard);
        for m in 1..=m_max {
            let factor = h.c * engine.majorant().eval(m as f64)?.powf(h.t) - 1.0;
            let small = factor * engine.sigma(m)?.hi;
            let big = 0.5 * (1.0 - h.alpha) * engine.tail(m)?.lo;
            rec.observe(m as f64, big - small, clears(small, big, guard));
        }
        Ok(rec.finish())
    };
    run().unwrap_or_else(|e| CheckRecord::errored(name, range.clone(), guard, e))
}

/// `(1−alpha)/2 · Σ_{j≥m+1} σ_j > ε_{m−1}^s · Σ_{j<m} σ_j` for `m ∈ [2, m_max]`.
pub fn check_claim2(
    h: &HypothesisConstants,
    engine: &WeightEngine,
    schedule: &Schedule,
    m_max: u64,
    guard: f64,
) -> CheckRecord {
    let name = "claim2";
    let range = format!("m in [2, {m_max}]");
    let run = || -> Result<CheckRecord> {
        let mut rec = CheckRecord::new(name, range.clone(), guard);
        let mut head = Enclosure::ZERO;
        for m in 2..=m_max {
            head = head + engine.sigma(m - 1)?;
            let small = (h.s * schedule.log_epsilon(m - 1)).exp() * head.hi;
            let big = 0.5 * (1.0 - h.alpha) * engine.tail(m)?.lo;
            rec.observe(m as f64, big - small, clears(small, big, guard));
        }
        Ok(rec.finish())
    };
    run().unwrap_or_else(|e| CheckRecord::errored(name, range.clone(), guard, e))
}

/// Integral equation `k·∫_x^X g·ψ^(−t) + g(X) = g(x)` at `X = x + offset`,
/// relative to `g(x)`.
pub fn check_integral_equation(
    engine: &WeightEngine,
    points: &[f64],
    offset: f64,
    tol: f64,
) -> CheckRecord {
    let name = "lemma_integral_equation";
    let range = format!("x in {points:?}, X = x + {offset}");
    let run = || -> Result<CheckRecord> {
        let mut rec = CheckRecord::new(name, range.clone(), tol);
        let mut worst = 0.0f64;
        for &x in points {
            let res = engine.lemma_residual(x, offset)?.abs();
            worst = worst.max(res);
            rec.observe(x, tol - res, res <= tol);
        }
        Ok(rec
            .with_note(format!("max relative residual {worst:.3e}"))
            .finish())
    };
    run().unwrap_or_else(|e| CheckRecord::errored(name, range.clone(), tol, e))
}

/// Power-law decay bound `g(x) ≤ A_1·exp(−k·x^(1−q)/(A_2(1−q)))` with its
/// witness constants.
pub fn check_decay_bound(engine: &WeightEngine, onset: f64, samples: &[f64]) -> CheckRecord {
    let name = "lemma_decay_bound";
    let range = format!("x in {samples:?}, onset {onset}");
    let run = || -> Result<CheckRecord> {
        let mut rec = CheckRecord::new(name, range.clone(), 0.0);
        let report = engine.decay_bound_check(onset, samples)?;
        for s in &report.samples {
            rec.observe(s.x, s.bound - s.g_hi, s.passed);
        }
        let w = report.witness;
        Ok(rec
            .with_note(format!(
                "A1 = {:.6e}, A2 = {:.6e}, A3 = {:.6e}",
                w.a1, w.a2, w.a3
            ))
            .finish())
    };
    run().unwrap_or_else(|e| CheckRecord::errored(name, range.clone(), 0.0, e))
}

/// `u(s) = k·∫_0^s ψ^(−t)` is unbounded: from `x0` the decay witness picks
/// `X` with predicted growth `target`, and quadrature confirms
/// `u(X) − u(x0) > target`.
pub fn check_divergence(
    engine: &WeightEngine,
    onset: f64,
    x0: f64,
    target: f64,
    guard: f64,
) -> CheckRecord {
    let name = "lemma_divergence";
    let range = format!("u(X) − u({x0:e}) > {target}");
    let run = || -> Result<CheckRecord> {
        let mut rec = CheckRecord::new(name, range.clone(), guard);
        let w = engine.decay_witness(onset)?;
        let (x_big, growth) = engine.divergence_witness(&w, x0, target)?;
        rec.observe(x_big, growth.lo - target, clears(target, growth.lo, guard));
        Ok(rec
            .with_note(format!(
                "X = {x_big:.6e}, u(X) − u(x0) in [{:.6e}, {:.6e}]",
                growth.lo, growth.hi
            ))
            .finish())
    };
    run().unwrap_or_else(|e| CheckRecord::errored(name, range.clone(), guard, e))
}

/// All three lemma checks.
pub fn check_lemma(engine: &WeightEngine, opts: &CertificateOptions) -> Vec<CheckRecord> {
    vec![
        check_integral_equation(
            engine,
            &opts.lemma_points,
            opts.lemma_offset,
            opts.lemma_tolerance,
        ),
        check_decay_bound(engine, opts.decay_onset, &opts.decay_samples),
        check_divergence(
            engine,
            opts.decay_onset,
            opts.divergence_start,
            opts.divergence_target,
            opts.guard,
        ),
    ]
}

/// The `p`–`q`–`M` identities `(1+p)t = q` and `1−q = p/M`.
pub fn check_peeque(h: &HypothesisConstants, d: &DerivedConstants) -> CheckRecord {
    let tol = 1e-12;
    let mut rec = CheckRecord::new("peeque", format!("M = {}", d.m), tol);
    let (a, b) = d.identity_residuals(h.t);
    let worst = a.abs().max(b.abs());
    rec.observe(d.m, tol - worst, worst <= tol);
    rec.finish()
}

/// Recursive and closed-form `log(1/r_m)` agree to relative `1e−9`.
pub fn check_radius_equivalence(schedule: &Schedule, m_max: u64) -> CheckRecord {
    let tol = 1e-9;
    let mut rec = CheckRecord::new("radius_equivalence", format!("m in [1, {m_max}]"), tol);
    for m in 1..=m_max {
        let a = schedule.log_inv_radius(m);
        let b = schedule.log_inv_radius_closed_form(m);
        let rel = (a - b).abs() / a.abs().max(b.abs());
        rec.observe(m as f64, tol - rel, rel <= tol);
    }
    rec.finish()
}

/// Sum/integral brackets over `m ∈ [2, m_max]` for every `p` on the default
/// grid and the construction's own `p`.
pub fn check_brackets(p_own: f64, m_max: u64, guard: f64) -> CheckRecord {
    let name = "sum_brackets";
    let range = format!("m in [2, {m_max}], p grid + p = {p_own}");
    let mut grid = default_p_grid();
    grid.push(p_own);
    let mut rec = CheckRecord::new(name, range.clone(), guard);
    for &p in &grid {
        match check_sum_brackets(m_max, p) {
            Ok(r) => {
                let slack = r
                    .harmonic_lower
                    .min(r.harmonic_upper)
                    .min(r.power_lower)
                    .min(r.power_upper);
                rec.observe(p, slack, r.passed);
            }
            Err(e) => return CheckRecord::errored(name, range, guard, e),
        }
    }
    rec.finish()
}

/// `ψ(m) ≥ log(1/r_m)`, i.e. `ψ` majorizes the radius schedule.
pub fn check_psi_majorant(schedule: &Schedule, m_max: u64, guard: f64) -> CheckRecord {
    let mut rec = CheckRecord::new("psi_majorant", format!("m in [1, {m_max}]"), guard);
    for m in 1..=m_max {
        let psi = schedule.majorant().at(m as f64);
        let lir = schedule.log_inv_radius(m);
        rec.observe(m as f64, psi - lir, clears(lir, psi, guard) || psi == lir);
    }
    rec.finish()
}

/// `log(1/r_m) ≤ m·log(1/D) + log(1/A)·L·m^(1+p)/(p(p+1))`, through the
/// bound `2(m−1) + [m^(1+p) − (p+1)m + p]/(p(p+1)) ≤ L·m^(1+p)/(p(p+1))` on
/// the default `p` grid and the construction's own `p`.
pub fn check_radius_bound(d: &DerivedConstants, m_max: u64) -> CheckRecord {
    let mut rec = CheckRecord::new(
        "radius_bound",
        format!("m in [1, {m_max}], p grid + p = {}, L = {}", d.p, d.l),
        0.0,
    );
    let mut grid = default_p_grid();
    grid.push(d.p);
    for &p in &grid {
        let mut worst = f64::INFINITY;
        for m in 1..=m_max {
            let lhs = radius_bound_lhs(m, p);
            let rhs = d.l * (m as f64).powf(1.0 + p) / (p * (p + 1.0));
            worst = worst.min(rhs - lhs);
        }
        rec.observe(p, worst, worst >= 0.0);
    }
    rec.finish()
}

/// Runs every check. Setup failures (invalid constants, an engine that cannot
/// be built) are errors; check failures are recorded in the report.
pub fn run_all(
    h: &HypothesisConstants,
    d: &DerivedConstants,
    opts: &CertificateOptions,
) -> Result<CertificateReport> {
    h.validate()?;
    let engine = WeightEngine::new(h, d, opts.quad_tol)?;
    let schedule = Schedule::new(h, d);
    let guard = opts.guard;

    type Job<'a> = Box<dyn Fn() -> Vec<CheckRecord> + Send + Sync + 'a>;
    let jobs: Vec<Job> = vec![
        Box::new(|| vec![check_first_shell(h, d, guard)]),
        Box::new(|| vec![check_peeque(h, d)]),
        Box::new(|| vec![check_eps_condition(h, d, opts.m_max, guard)]),
        Box::new(|| vec![check_claim1(h, &engine, opts.m_max, guard)]),
        Box::new(|| vec![check_claim2(h, &engine, &schedule, opts.m_max, guard)]),
        Box::new(|| check_lemma(&engine, opts)),
        Box::new(|| vec![check_radius_equivalence(&schedule, opts.radpow_m)]),
        Box::new(|| vec![check_brackets(d.p, opts.bracket_m, guard)]),
        Box::new(|| vec![check_psi_majorant(&schedule, opts.majorant_m, guard)]),
        Box::new(|| vec![check_radius_bound(d, opts.majorant_m)]),
    ];
    let records: Vec<CheckRecord> = jobs
        .par_iter()
        .map(|job| job())
        .collect::<Vec<_>>()
        .concat();
    Ok(CertificateReport::from_records(records))
}
