//! The peak function `F = σ⁻¹ Σ_j σ_j f_j` with `f_j = f_{r_j}`, evaluated
//! with a head–tail scheme.
//!
//! For `y ≠ x` let `m(y)` be the first index with `r_j ≤ |y − x|`. Every
//! `j ≥ m(y)` has `|f_j(y)| ≤ alpha`, so only the head `j < m(y)` needs
//! explicit evaluation; the rest is bounded through the closed-form tail
//! enclosure of the weights.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificates::{run_all, CertificateOptions, CertificateReport};
use crate::enclosure::{ratio_range, Enclosure};
use crate::error::{Error, Result};
use crate::families::{
    audit_family, make_family, off_neighborhood_bound, AuditReport, BarrierFamily, FamilyId, Point,
};
use crate::hypothesis::{DerivedConstants, HypothesisConstants};
use crate::schedule::Schedule;
use crate::weights::WeightEngine;

pub const SERIES_FORMAT: &str = "peak-series/1";

/// Radii whose `A·r·1e−3` would underflow are not audited.
const AUDIT_LOG_RADIUS_CAP: f64 = 680.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    pub terms: u64,
    pub audit_grid: usize,
    /// Number of leading schedule radii the family is audited on.
    pub audit_radii: usize,
    pub certificates: CertificateOptions,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            terms: 100,
            audit_grid: 1000,
            audit_radii: 6,
            certificates: CertificateOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BuildReport {
    pub certificates: CertificateReport,
    pub audit: AuditReport,
}

/// Position of a point in the nested sets
/// `W_m = {y : max_{j≤m} |f_j(y)| ≥ 1 + ε_m^s}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "case", content = "m", rename_all = "kebab-case")]
pub enum CaseLabel {
    OutsideAllW,
    InW1,
    InWm(u64),
    HeadExhausted,
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseLabel::OutsideAllW => f.write_str("outside-all-W"),
            CaseLabel::InW1 => f.write_str("in-W1"),
            CaseLabel::InWm(m) => write!(f, "in-W{m}"),
            CaseLabel::HeadExhausted => f.write_str("head-exhausted"),
        }
    }
}

/// Certified value of `F` at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FValue {
    pub y: Point,
    pub re: Enclosure,
    pub im: Enclosure,
    pub abs: Enclosure,
    /// `None` at the peak point, where no radius is small enough.
    pub m_of_y: Option<u64>,
    pub head_exhausted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Log,
    Linear,
}

/// Distances from the peak point: `count` values from `lo` to `hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub kind: GridKind,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn new(kind: GridKind, lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo > 0.0 && lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidArgument(format!(
                "grid needs 0 < lo ≤ hi, got [{lo}, {hi}]"
            )));
        }
        if count == 0 || (count == 1 && lo != hi) {
            return Err(Error::InvalidArgument(format!(
                "grid count {count} too small"
            )));
        }
        Ok(GridSpec {
            kind,
            lo,
            hi,
            count,
        })
    }

    pub fn distances(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.lo];
        }
        let n = (self.count - 1) as f64;
        let mut v: Vec<f64> = match self.kind {
            GridKind::Linear => (0..self.count)
                .map(|i| self.lo + (self.hi - self.lo) * i as f64 / n)
                .collect(),
            GridKind::Log => {
                let (a, b) = (self.lo.ln(), self.hi.ln());
                (0..self.count)
                    .map(|i| (a + (b - a) * i as f64 / n).exp())
                    .collect()
            }
        };
        v[0] = self.lo;
        v[self.count - 1] = self.hi;
        v
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    /// `KIND:LO:HI:COUNT`, e.g. `log:1e-30:1:500`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidArgument(format!("grid {s:?} is not KIND:LO:HI:COUNT"));
        if parts.len() != 4 {
            return Err(bad());
        }
        let kind = match parts[0] {
            "log" => GridKind::Log,
            "linear" => GridKind::Linear,
            _ => return Err(bad()),
        };
        let lo = parts[1].parse().map_err(|_| bad())?;
        let hi = parts[2].parse().map_err(|_| bad())?;
        let count = parts[3].parse().map_err(|_| bad())?;
        GridSpec::new(kind, lo, hi, count)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            GridKind::Log => "log",
            GridKind::Linear => "linear",
        };
        write!(f, "{kind}:{:e}:{:e}:{}", self.lo, self.hi, self.count)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub y: Point,
    pub abs_hi: f64,
    /// `1 − |F(y)|.hi`.
    pub margin: f64,
    pub case: CaseLabel,
    pub m_of_y: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub grid: GridSpec,
    pub peak_value: FValue,
    pub peak_contains_one: bool,
    pub max_abs_hi: f64,
    pub min_margin: f64,
    pub worst_point: Point,
    pub points: Vec<PointResult>,
    pub passed: bool,
}

impl VerifyReport {
    /// Turns a failed verification into an error naming the first bad point.
    pub fn into_result(self) -> Result<Self> {
        if self.passed {
            return Ok(self);
        }
        if !self.peak_contains_one {
            return Err(Error::PeakVerification {
                point: "the peak point (enclosure misses 1)".into(),
                abs_hi: self.peak_value.abs.hi,
            });
        }
        let bad = self
            .points
            .iter()
            .find(|p| p.margin <= 0.0)
            .expect("a failing point");
        Err(Error::PeakVerification {
            point: format!("({:e}, {:e})", bad.y.re, bad.y.im),
            abs_hi: bad.abs_hi,
        })
    }
}

/// Serialized form of a [`PeakSeries`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesFile {
    pub format: String,
    pub family: FamilyId,
    pub max_radius: f64,
    pub terms: u64,
    pub quad_tol: f64,
    /// Constants the family was built for.
    pub hypothesis: HypothesisConstants,
    /// Normalized constants the weights and schedule use.
    pub normalized: HypothesisConstants,
    pub derived: DerivedConstants,
    pub normalizer: Enclosure,
    /// `Σ_{j>N} σ_j`.
    pub tail: Enclosure,
    pub sigma: Vec<Enclosure>,
    pub log_inv_radius: Vec<f64>,
    pub log_epsilon: Vec<f64>,
}

#[derive(Debug)]
pub struct PeakSeries {
    family: Box<dyn BarrierFamily>,
    normalized: HypothesisConstants,
    derived: DerivedConstants,
    quad_tol: f64,
    sigma: Vec<Enclosure>,
    tail: Enclosure,
    /// `prefix[m−1] = Σ_{j<m} σ_j` for `m ∈ [1, N+1]`.
    prefix: Vec<Enclosure>,
    /// `suffix[m−1] = Σ_{j≥m} σ_j` for `m ∈ [1, N+1]`.
    suffix: Vec<Enclosure>,
    log_inv_radius: Vec<f64>,
    log_epsilon: Vec<f64>,
    schedule: Schedule,
}

impl PeakSeries {
    /// Runs the certificates and the family audit, then assembles the series.
    pub fn build(
        family: Box<dyn BarrierFamily>,
        derived: DerivedConstants,
        opts: &BuildOptions,
    ) -> Result<Self> {
        Self::build_reported(family, derived, opts).map(|(s, _)| s)
    }

    pub fn build_reported(
        family: Box<dyn BarrierFamily>,
        derived: DerivedConstants,
        opts: &BuildOptions,
    ) -> Result<(Self, BuildReport)> {
        if opts.terms == 0 {
            return Err(Error::InvalidArgument(
                "series needs at least one term".into(),
            ));
        }
        let normalized = family.constants().normalized()?;
        let certificates = run_all(&normalized, &derived, &opts.certificates)?;
        if !certificates.passed {
            return Err(Error::RefuseToBuild(format!(
                "certificates failed: {}",
                certificates.failed_checks().join(", ")
            )));
        }
        let schedule = Schedule::new(&normalized, &derived);
        family.admits(schedule.log_inv_radius(1))?;
        let radii: Vec<f64> = (1..=opts.audit_radii as u64)
            .map(|j| schedule.log_inv_radius(j))
            .take_while(|&l| l < AUDIT_LOG_RADIUS_CAP)
            .map(|l| (-l).exp())
            .collect();
        let audit = audit_family(family.as_ref(), &radii, opts.audit_grid)?;
        if !audit.passed {
            let first = audit.first_failure().expect("a recorded failure");
            return Err(Error::RefuseToBuild(format!(
                "family audit failed: condition ({}) at r = {:e}, y = ({:e}, {:e}): {} vs bound {}",
                first.condition,
                first.radius,
                first.point.re,
                first.point.im,
                first.value,
                first.bound
            )));
        }

        let quad_tol = opts.certificates.quad_tol;
        let engine = WeightEngine::new(&normalized, &derived, quad_tol)?;
        let n = opts.terms;
        let sigma = (1..=n)
            .map(|j| engine.sigma(j))
            .collect::<Result<Vec<_>>>()?;
        let tail = engine.tail(n)?;
        let log_inv_radius = (1..=n).map(|j| schedule.log_inv_radius(j)).collect();
        let log_epsilon = (1..=n).map(|j| schedule.log_epsilon(j)).collect();
        let series = Self::assemble(
            family,
            normalized,
            derived,
            quad_tol,
            sigma,
            tail,
            log_inv_radius,
            log_epsilon,
            schedule,
        );
        Ok((
            series,
            BuildReport {
                certificates,
                audit,
            },
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        family: Box<dyn BarrierFamily>,
        normalized: HypothesisConstants,
        derived: DerivedConstants,
        quad_tol: f64,
        sigma: Vec<Enclosure>,
        tail: Enclosure,
        log_inv_radius: Vec<f64>,
        log_epsilon: Vec<f64>,
        schedule: Schedule,
    ) -> Self {
        let n = sigma.len();
        let mut prefix = Vec::with_capacity(n + 1);
        let mut acc = Enclosure::ZERO;
        prefix.push(acc);
        for s in &sigma {
            acc = acc + *s;
            prefix.push(acc);
        }
        let mut suffix = vec![tail; n + 1];
        for j in (0..n).rev() {
            suffix[j] = suffix[j + 1] + sigma[j];
        }
        PeakSeries {
            family,
            normalized,
            derived,
            quad_tol,
            sigma,
            tail,
            prefix,
            suffix,
            log_inv_radius,
            log_epsilon,
            schedule,
        }
    }

    pub fn terms(&self) -> u64 {
        self.sigma.len() as u64
    }

    pub fn family(&self) -> &dyn BarrierFamily {
        self.family.as_ref()
    }

    pub fn derived(&self) -> &DerivedConstants {
        &self.derived
    }

    pub fn normalized_constants(&self) -> &HypothesisConstants {
        &self.normalized
    }

    pub fn sigma(&self) -> &[Enclosure] {
        &self.sigma
    }

    /// Enclosure of `σ = Σ_{j≥1} σ_j`.
    pub fn normalizer(&self) -> Enclosure {
        self.suffix[0]
    }

    pub fn tail(&self) -> Enclosure {
        self.tail
    }

    pub fn to_file(&self) -> SeriesFile {
        SeriesFile {
            format: SERIES_FORMAT.to_string(),
            family: self.family.id(),
            max_radius: self.family.max_radius(),
            terms: self.terms(),
            quad_tol: self.quad_tol,
            hypothesis: *self.family.constants(),
            normalized: self.normalized,
            derived: self.derived,
            normalizer: self.normalizer(),
            tail: self.tail,
            sigma: self.sigma.clone(),
            log_inv_radius: self.log_inv_radius.clone(),
            log_epsilon: self.log_epsilon.clone(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(&self.to_file()).map_err(|e| Error::SeriesFormat(e.to_string()))
    }

    /// Rebuilds a series from its file form, checking that the stored
    /// schedule and sums agree with a recomputation.
    pub fn from_file(file: SeriesFile) -> Result<Self> {
        if file.format != SERIES_FORMAT {
            return Err(Error::SeriesFormat(format!(
                "format {:?}, expected {SERIES_FORMAT:?}",
                file.format
            )));
        }
        let n = file.terms as usize;
        if n == 0
            || file.sigma.len() != n
            || file.log_inv_radius.len() != n
            || file.log_epsilon.len() != n
        {
            return Err(Error::SeriesFormat(format!("expected {n} head entries")));
        }
        if file.hypothesis.normalized()? != file.normalized {
            return Err(Error::SeriesFormat(
                "normalized constants do not match".into(),
            ));
        }
        let check = DerivedConstants::from_parts(
            &file.normalized,
            file.derived.d,
            file.derived.m,
            file.derived.l,
        )?;
        if check != file.derived {
            return Err(Error::SeriesFormat(
                "derived constants are inconsistent".into(),
            ));
        }
        for e in file.sigma.iter().chain([&file.tail, &file.normalizer]) {
            if !(e.lo.is_finite() && e.hi.is_finite() && e.lo <= e.hi && e.lo > 0.0) {
                return Err(Error::SeriesFormat(format!("bad weight enclosure {e}")));
            }
        }
        let family = make_family(file.family, file.hypothesis, file.max_radius)?;
        let schedule = Schedule::new(&file.normalized, &file.derived);
        for (j, (&lr, &le)) in file
            .log_inv_radius
            .iter()
            .zip(&file.log_epsilon)
            .enumerate()
        {
            let j = j as u64 + 1;
            if lr != schedule.log_inv_radius(j) || le != schedule.log_epsilon(j) {
                return Err(Error::SeriesFormat(format!("schedule mismatch at j = {j}")));
            }
        }
        let series = Self::assemble(
            family,
            file.normalized,
            file.derived,
            file.quad_tol,
            file.sigma,
            file.tail,
            file.log_inv_radius,
            file.log_epsilon,
            schedule,
        );
        if series.normalizer() != file.normalizer {
            return Err(Error::SeriesFormat(
                "stored normalizer does not match the weights".into(),
            ));
        }
        Ok(series)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: SeriesFile =
            toml::from_str(text).map_err(|e| Error::SeriesFormat(e.to_string()))?;
        Self::from_file(file)
    }

    fn log_inv_radius_at(&self, j: u64) -> f64 {
        match self.log_inv_radius.get(j as usize - 1) {
            Some(&l) => l,
            None => self.schedule.log_inv_radius(j),
        }
    }

    fn check_domain(&self, y: &Point) -> Result<()> {
        if self.family.domain().contains(y) {
            Ok(())
        } else {
            Err(Error::Domain(format!("({}, {})", y.re, y.im)))
        }
    }

    /// `m(y)`, or `None` at the peak point.
    pub fn m_of_y(&self, y: &Point) -> Result<Option<u64>> {
        self.check_domain(y)?;
        let dist = self.family.domain().distance_to_peak(y);
        Ok(self.schedule.first_index_outside(-dist.ln()))
    }

    pub fn evaluate(&self, y: &Point) -> Result<FValue> {
        let m = self.m_of_y(y)?;
        let n = self.terms();
        let alpha = self.normalized.alpha;
        let off = off_neighborhood_bound(self.family.as_ref());
        let Some(m) = m else {
            // f_j(x) = 1 for every j
            let h = self.prefix[n as usize];
            let re = ratio_range(h, 1.0, h, self.tail);
            return Ok(FValue {
                y: *y,
                re,
                im: Enclosure::ZERO,
                abs: abs_of(re, Enclosure::ZERO),
                m_of_y: None,
                head_exhausted: false,
            });
        };

        let head_end = (m - 1).min(n);
        let (mut head_re, mut head_im) = (Enclosure::ZERO, Enclosure::ZERO);
        for j in 1..=head_end {
            let f = self.family.eval(self.log_inv_radius[j as usize - 1], y);
            let s = self.sigma[j as usize - 1];
            head_re = head_re + s * Enclosure::point(f.re);
            head_im = head_im + s * Enclosure::point(f.im);
        }
        let h = self.prefix[head_end as usize];
        let head_exhausted = m - 1 > n;
        let (t, bound) = if head_exhausted {
            // N < j < m may sit inside their neighborhoods: bounded by the
            // largest sup-norm among them, which is the last one
            let sup = self.family.sup_bound(self.log_inv_radius_at(m - 1));
            (self.tail, off.max(sup))
        } else {
            (self.suffix[head_end as usize], off)
        };

        let (re, im, abs) = if !head_exhausted && self.family.exact_off_neighborhood() {
            let re = ratio_range(head_re, alpha, h, t);
            let im = ratio_range(head_im, 0.0, h, t);
            (re, im, abs_of(re, im))
        } else {
            let re = ratio_range(head_re, -bound, h, t).hull(&ratio_range(head_re, bound, h, t));
            let im = ratio_range(head_im, -bound, h, t).hull(&ratio_range(head_im, bound, h, t));
            let head_abs = abs_of(head_re, head_im);
            let hi = ratio_range(head_abs, bound, h, t).hi;
            let lo = ratio_range(head_abs, -bound, h, t).lo.max(0.0);
            (re, im, intersect(Enclosure::new(lo, hi), abs_of(re, im)))
        };
        Ok(FValue {
            y: *y,
            re,
            im,
            abs,
            m_of_y: Some(m),
            head_exhausted,
        })
    }

    pub fn classify(&self, y: &Point) -> Result<CaseLabel> {
        let m = self
            .m_of_y(y)?
            .ok_or_else(|| Error::InvalidArgument("the peak point has no case label".into()))?;
        let n = self.terms();
        let s = self.normalized.s;
        let mut running = 0.0f64;
        for j in 1..=n {
            if j < m {
                running = running.max(
                    self.family
                        .eval(self.log_inv_radius[j as usize - 1], y)
                        .norm(),
                );
            }
            if running >= 1.0 + (s * self.log_epsilon[j as usize - 1]).exp() {
                return Ok(if j == 1 {
                    CaseLabel::InW1
                } else {
                    CaseLabel::InWm(j)
                });
            }
            if j >= m - 1 && running <= 1.0 {
                // every later f_j is bounded by alpha, and 1 + ε^s > 1
                return Ok(CaseLabel::OutsideAllW);
            }
        }
        Ok(CaseLabel::HeadExhausted)
    }

    /// Grid points for the family's domain at the given distances.
    pub fn grid_points(&self, grid: &GridSpec) -> Vec<Point> {
        let domain = self.family.domain();
        let angles = if domain.dimension() == 1 { 1 } else { 16 };
        grid.distances()
            .into_iter()
            .flat_map(|d| domain.points_at_distance(d, angles))
            .collect()
    }

    /// Evaluates and classifies every grid point, in grid order.
    pub fn evaluate_grid(&self, grid: &GridSpec) -> Result<Vec<(FValue, CaseLabel)>> {
        let points = self.grid_points(grid);
        if points.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "grid {grid} has no points in the domain"
            )));
        }
        points
            .par_iter()
            .map(|y| Ok((self.evaluate(y)?, self.classify(y)?)))
            .collect()
    }

    /// Certifies `|F(y)| < 1` on the grid and `1 ∈ F(x)`.
    pub fn verify_peak(&self, grid: &GridSpec) -> Result<VerifyReport> {
        let peak_value = self.evaluate(&Point::real(0.0))?;
        let peak_contains_one = peak_value.re.contains(1.0) && peak_value.im.contains(0.0);
        let evaluated = self.evaluate_grid(grid)?;
        let points: Vec<PointResult> = evaluated
            .iter()
            .map(|(v, c)| PointResult {
                y: v.y,
                abs_hi: v.abs.hi,
                margin: 1.0 - v.abs.hi,
                case: *c,
                m_of_y: v.m_of_y,
            })
            .collect();
        let worst = points
            .iter()
            .fold(&points[0], |w, p| if p.abs_hi > w.abs_hi { p } else { w });
        let passed = peak_contains_one && points.iter().all(|p| p.margin > 0.0);
        Ok(VerifyReport {
            grid: *grid,
            peak_value,
            peak_contains_one,
            max_abs_hi: worst.abs_hi,
            min_margin: worst.margin,
            worst_point: worst.y,
            points,
            passed,
        })
    }
}

/// Enclosure of `|z|` for `z` in the box `re × im`.
fn abs_of(re: Enclosure, im: Enclosure) -> Enclosure {
    let far = |e: Enclosure| e.lo.abs().max(e.hi.abs());
    let near = |e: Enclosure| {
        if e.contains(0.0) {
            0.0
        } else {
            e.lo.abs().min(e.hi.abs())
        }
    };
    let hi = far(re).hypot(far(im)).next_up();
    let lo = near(re).hypot(near(im));
    let lo = if lo == 0.0 { 0.0 } else { lo.next_down() };
    Enclosure::new(lo, hi)
}

/// Both arguments enclose the same quantity; keep the tighter bounds.
fn intersect(a: Enclosure, b: Enclosure) -> Enclosure {
    let (lo, hi) = (a.lo.max(b.lo), a.hi.min(b.hi));
    if lo <= hi {
        Enclosure::new(lo, hi)
    } else {
        a.hull(&b)
    }
}
