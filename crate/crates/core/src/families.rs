//! Approximate barrier families: for each neighborhood radius `r` a function
//! `f_r` with `f_r(x) = 1`, `|f_r| ≤ alpha` off `B(x;r)`, `|f_r| ≤ C·log^t(1/r)`
//! on `B(x;r)`, and `|f_r| < 1 + ε^s` on `B(x; A·r·ε)`.
//!
//! Radii are passed as `log(1/r)` because the construction's radii underflow,
//! and points are stored as displacements `y − x` from the peak point so that
//! evaluations near `x` do not cancel.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::{HypothesisConstants, GUARD};

/// Displacement `y − x` of a point of the domain closure from the peak
/// point; 1-D domains use the real part only.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub re: f64,
    pub im: f64,
}

impl Point {
    pub fn new(re: f64, im: f64) -> Self {
        Point { re, im }
    }

    pub fn real(re: f64) -> Self {
        Point { re, im: 0.0 }
    }

    fn to_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// Bounded domains the shipped families live on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainModel {
    /// `[0, 1] ⊂ ℝ` with peak point `0`.
    UnitInterval,
    /// Closed unit disk in `ℂ ≅ ℝ²` with peak point `1`.
    UnitDisk,
}

impl DomainModel {
    pub fn dimension(&self) -> usize {
        match self {
            DomainModel::UnitInterval => 1,
            DomainModel::UnitDisk => 2,
        }
    }

    /// The peak point in absolute coordinates.
    pub fn peak(&self) -> Point {
        match self {
            DomainModel::UnitInterval => Point::real(0.0),
            DomainModel::UnitDisk => Point::real(1.0),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            DomainModel::UnitInterval => 1.0,
            DomainModel::UnitDisk => 2.0,
        }
    }

    pub fn contains(&self, y: &Point) -> bool {
        match self {
            DomainModel::UnitInterval => y.im == 0.0 && (0.0..=1.0).contains(&y.re),
            // |1 + w| ≤ 1 ⇔ 2·Re w + |w|² ≤ 0, with slack relative to |w|²
            DomainModel::UnitDisk => {
                let n2 = y.re * y.re + y.im * y.im;
                2.0 * y.re + n2 <= 1e-12 * n2
            }
        }
    }

    pub fn distance_to_peak(&self, y: &Point) -> f64 {
        y.re.hypot(y.im)
    }

    /// Absolute coordinates `x + y` of a displacement.
    pub fn absolute(&self, y: &Point) -> Point {
        match self {
            DomainModel::UnitInterval => *y,
            DomainModel::UnitDisk => Point::new(1.0 + y.re, y.im),
        }
    }

    /// Displacement of a point given in absolute coordinates.
    pub fn displacement(&self, z: &Point) -> Point {
        match self {
            DomainModel::UnitInterval => *z,
            DomainModel::UnitDisk => Point::new(z.re - 1.0, z.im),
        }
    }

    /// Points of the closure at distance `rho` from the peak point; the disk
    /// samples `angles` directions on the arc that stays inside.
    pub fn points_at_distance(&self, rho: f64, angles: usize) -> Vec<Point> {
        match self {
            DomainModel::UnitInterval => {
                if rho <= 1.0 {
                    vec![Point::real(rho)]
                } else {
                    Vec::new()
                }
            }
            DomainModel::UnitDisk => {
                if rho > 2.0 {
                    return Vec::new();
                }
                if rho == 2.0 {
                    return vec![Point::real(-2.0)];
                }
                // w = ρe^{iθ} lies in the disk iff cos θ ≤ −ρ/2
                let theta0 = (-0.5 * rho).acos();
                let span = 2.0 * (PI - theta0);
                let n = angles.max(1);
                (0..n)
                    .map(|i| {
                        let frac = if n == 1 {
                            0.5
                        } else {
                            i as f64 / (n - 1) as f64
                        };
                        let th = theta0 + span * frac;
                        let (re, im) = (rho * th.cos(), rho * th.sin());
                        // pull boundary points back onto |1 + w| = 1 when rounding pushed them out
                        if 2.0 * re + re * re + im * im > 0.0 {
                            Point::new(-0.5 * (re * re + im * im), im)
                        } else {
                            Point::new(re, im)
                        }
                    })
                    .collect()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyId {
    Synthetic,
    DiskExp,
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FamilyId::Synthetic => "synthetic",
            FamilyId::DiskExp => "disk-exp",
        })
    }
}

impl FromStr for FamilyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(FamilyId::Synthetic),
            "disk-exp" => Ok(FamilyId::DiskExp),
            other => Err(Error::InvalidArgument(format!("unknown family {other:?}"))),
        }
    }
}

/// An oracle producing, for each radius, a barrier function on the domain.
pub trait BarrierFamily: Send + Sync + fmt::Debug {
    fn id(&self) -> FamilyId;

    /// Constants the family claims to satisfy.
    fn constants(&self) -> &HypothesisConstants;

    fn domain(&self) -> DomainModel;

    /// Largest radius the family is documented (and audited) for.
    fn max_radius(&self) -> f64;

    /// True when `f_r = alpha` identically outside `B(x;r)`.
    fn exact_off_neighborhood(&self) -> bool;

    /// `f_r(y)` with `r = exp(−log_inv_r)`.
    fn eval(&self, log_inv_r: f64, y: &Point) -> Complex64;

    /// Upper bound for `sup |f_r|` over the closure.
    fn sup_bound(&self, log_inv_r: f64) -> f64;

    fn admits(&self, log_inv_r: f64) -> Result<()> {
        if log_inv_r >= -self.max_radius().ln() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "radius {:e} above the family's maximum {:e}",
                (-log_inv_r).exp(),
                self.max_radius()
            )))
        }
    }
}

/// Piecewise-linear family on `[0,1]` with sup-norm exactly `C·log^t(1/r)`.
///
/// `f_r(y) = 1 + (y/(A·r))^s / 2` on `[0, A·r]`, then linear up to
/// `C·log^t(1/r)` at the midpoint of `[A·r, r]`, linear down to `alpha` at
/// `r`, and `alpha` on `[r, 1]`.
#[derive(Clone, Debug)]
pub struct SyntheticFamily {
    h: HypothesisConstants,
    max_radius: f64,
    log_inv_a: f64,
}

impl SyntheticFamily {
    /// Fails when the tent peak `C·log^t(1/max_radius)` is below `3/2`, the
    /// value where the first segment ends.
    pub fn new(h: HypothesisConstants, max_radius: f64) -> Result<Self> {
        h.validate()?;
        if !(max_radius > 0.0 && max_radius < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "max radius {max_radius} outside (0,1)"
            )));
        }
        let fam = SyntheticFamily {
            h,
            max_radius,
            log_inv_a: (1.0 / h.a).ln(),
        };
        let peak = fam.peak_value(-max_radius.ln());
        if peak < 1.5 {
            return Err(Error::FamilyAudit(format!(
                "condition (3) inconsistent: C·log^t(1/r) = {peak} < 3/2 at r = {max_radius}"
            )));
        }
        Ok(fam)
    }

    pub fn peak_value(&self, log_inv_r: f64) -> f64 {
        self.h.c * log_inv_r.powf(self.h.t)
    }

    fn value(&self, log_inv_r: f64, y: f64) -> f64 {
        if y <= 0.0 {
            return 1.0;
        }
        let ln_y = y.ln();
        if ln_y >= -log_inv_r {
            return self.h.alpha;
        }
        // log(y/(A·r))
        let log_scaled = ln_y + log_inv_r + self.log_inv_a;
        if log_scaled <= 0.0 {
            return 1.0 + 0.5 * (self.h.s * log_scaled).exp();
        }
        let v = (ln_y + log_inv_r).exp();
        let a = self.h.a;
        let mid = 0.5 * (a + 1.0);
        let top = self.peak_value(log_inv_r);
        if v <= mid {
            1.5 + (top - 1.5) * (v - a) / (mid - a)
        } else {
            top + (self.h.alpha - top) * (v - mid) / (1.0 - mid)
        }
    }
}

impl BarrierFamily for SyntheticFamily {
    fn id(&self) -> FamilyId {
        FamilyId::Synthetic
    }

    fn constants(&self) -> &HypothesisConstants {
        &self.h
    }

    fn domain(&self) -> DomainModel {
        DomainModel::UnitInterval
    }

    fn max_radius(&self) -> f64 {
        self.max_radius
    }

    fn exact_off_neighborhood(&self) -> bool {
        true
    }

    fn eval(&self, log_inv_r: f64, y: &Point) -> Complex64 {
        Complex64::new(self.value(log_inv_r, y.re), 0.0)
    }

    fn sup_bound(&self, log_inv_r: f64) -> f64 {
        self.peak_value(log_inv_r).max(1.5)
    }
}

/// `f_r(z) = exp(λ_r(z−1))` on the closed unit disk with `λ_r = 2·log(1/alpha)/r²`.
///
/// For `|z| ≤ 1`, `Re(z−1) ≤ −|z−1|²/2`, so `|f_r| ≤ alpha` once
/// `|z−1| ≥ r`, and `|f_r| ≤ 1` everywhere.
#[derive(Clone, Debug)]
pub struct DiskExponentialFamily {
    h: HypothesisConstants,
    max_radius: f64,
    log_inv_alpha: f64,
}

impl DiskExponentialFamily {
    /// Fails when `C·log^t(1/max_radius) < 1`, which would break condition (3).
    pub fn new(h: HypothesisConstants, max_radius: f64) -> Result<Self> {
        h.validate()?;
        if !(max_radius > 0.0 && max_radius < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "max radius {max_radius} outside (0,1)"
            )));
        }
        let bound = h.c * (-max_radius.ln()).powf(h.t);
        if bound < 1.0 {
            return Err(Error::FamilyAudit(format!(
                "condition (3) inconsistent: C·log^t(1/r) = {bound} < 1 at r = {max_radius}"
            )));
        }
        Ok(DiskExponentialFamily {
            h,
            max_radius,
            log_inv_alpha: (1.0 / h.alpha).ln(),
        })
    }

    pub fn rate(&self, log_inv_r: f64) -> f64 {
        2.0 * self.log_inv_alpha * (2.0 * log_inv_r).exp()
    }
}

impl BarrierFamily for DiskExponentialFamily {
    fn id(&self) -> FamilyId {
        FamilyId::DiskExp
    }

    fn constants(&self) -> &HypothesisConstants {
        &self.h
    }

    fn domain(&self) -> DomainModel {
        DomainModel::UnitDisk
    }

    fn max_radius(&self) -> f64 {
        self.max_radius
    }

    fn exact_off_neighborhood(&self) -> bool {
        false
    }

    fn eval(&self, log_inv_r: f64, y: &Point) -> Complex64 {
        let w = y.to_complex();
        if w == Complex64::new(0.0, 0.0) {
            return Complex64::new(1.0, 0.0);
        }
        let rate = self.rate(log_inv_r);
        let re = rate * w.re;
        // also catches rate = ∞ with Re(w) < 0
        if re < -745.0 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::new(re, rate * w.im).exp()
    }

    fn sup_bound(&self, _log_inv_r: f64) -> f64 {
        1.0
    }
}

/// Builds a shipped family by id.
pub fn make_family(
    id: FamilyId,
    h: HypothesisConstants,
    max_radius: f64,
) -> Result<Box<dyn BarrierFamily>> {
    Ok(match id {
        FamilyId::Synthetic => Box::new(SyntheticFamily::new(h, max_radius)?),
        FamilyId::DiskExp => Box::new(DiskExponentialFamily::new(h, max_radius)?),
    })
}

/// Relative slack on `|f_r| ≤ alpha` for families evaluated in floating point
/// (not exactly `alpha` off the neighborhood). On the disk the bound is
/// attained where `|z| = 1` and `|z−1| = r`, and `z − 1` loses about
/// `log10(1/r)` digits to cancellation.
pub const OFF_NEIGHBORHOOD_TOL: f64 = 1e-9;

/// Bound used for `|f_r|` outside `B(x;r)`.
pub fn off_neighborhood_bound(fam: &dyn BarrierFamily) -> f64 {
    let alpha = fam.constants().alpha;
    if fam.exact_off_neighborhood() {
        alpha
    } else {
        alpha * (1.0 + OFF_NEIGHBORHOOD_TOL)
    }
}

/// Grid used for condition (4): `{0.01, 0.02, …, 0.99}`.
pub fn epsilon_grid() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditFailure {
    pub condition: u8,
    pub radius: f64,
    pub point: Point,
    pub value: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditReport {
    pub family: FamilyId,
    pub radii: Vec<f64>,
    pub points_checked: usize,
    /// Worst slack per condition (1)–(4); `+∞` when a condition had no points.
    pub worst_margins: [f64; 4],
    pub failures: Vec<AuditFailure>,
    pub passed: bool,
}

impl AuditReport {
    pub fn first_failure(&self) -> Option<&AuditFailure> {
        self.failures.first()
    }
}

const MAX_RECORDED_FAILURES: usize = 32;

fn log_spaced(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |i| (a + (b - a) * i as f64 / (n.max(2) - 1) as f64).exp())
}

fn audit_points(domain: DomainModel, r: f64, a: f64, grid_size: usize) -> Vec<Point> {
    let mut pts = Vec::new();
    match domain {
        DomainModel::UnitInterval => {
            let n = grid_size.max(2);
            pts.extend((0..n).map(|i| Point::real(i as f64 / (n - 1) as f64)));
            pts.extend(log_spaced(a * r * 1e-3, (10.0 * r).min(1.0), n).map(Point::real));
            pts.push(Point::real(r));
            for eps in epsilon_grid() {
                for theta in [0.5, 0.9, 0.999_999] {
                    pts.push(Point::real(a * r * eps * theta));
                }
            }
        }
        DomainModel::UnitDisk => {
            let side = (grid_size as f64).sqrt().ceil().max(2.0) as usize;
            for i in 0..side {
                let rho = i as f64 / (side - 1) as f64;
                for j in 0..side {
                    let th = 2.0 * PI * j as f64 / side as f64;
                    pts.push(domain.displacement(&Point::new(rho * th.cos(), rho * th.sin())));
                }
            }
            let local: Vec<f64> = log_spaced(a * r * 1e-3, (10.0 * r).min(2.0), side).collect();
            for rho in local.into_iter().chain([r]) {
                pts.extend(domain.points_at_distance(rho, 16));
            }
            for eps in epsilon_grid() {
                pts.extend(domain.points_at_distance(a * r * eps * 0.999_999, 4));
            }
        }
    }
    pts.push(Point::real(0.0));
    pts
}

/// Checks conditions (1)–(4) pointwise for every radius in `radii`.
pub fn audit_family(
    fam: &dyn BarrierFamily,
    radii: &[f64],
    grid_size: usize,
) -> Result<AuditReport> {
    let h = *fam.constants();
    let domain = fam.domain();
    let eps_grid = epsilon_grid();
    let off_bound = off_neighborhood_bound(fam);
    let mut worst = [f64::INFINITY; 4];
    let mut failures = Vec::new();
    let mut failed = false;
    let mut points_checked = 0;
    for &r in radii {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "audit radius {r} outside (0,1)"
            )));
        }
        let lam = -r.ln();
        fam.admits(lam)?;
        let growth = h.c * lam.powf(h.t);
        for y in audit_points(domain, r, h.a, grid_size) {
            points_checked += 1;
            let f = fam.eval(lam, &y);
            let val = f.norm();
            let dist = domain.distance_to_peak(&y);
            let mut record = |cond: u8, margin: f64, ok: bool, bound: f64| {
                let slot = &mut worst[cond as usize - 1];
                *slot = slot.min(margin);
                if !ok {
                    failed = true;
                    if failures.len() < MAX_RECORDED_FAILURES {
                        failures.push(AuditFailure {
                            condition: cond,
                            radius: r,
                            point: y,
                            value: val,
                            bound,
                        });
                    }
                }
            };
            if dist == 0.0 {
                let dev = (f - Complex64::new(1.0, 0.0)).norm();
                record(1, -dev, dev <= 4.0 * f64::EPSILON, 1.0);
                continue;
            }
            if dist.ln() >= -lam {
                let ok = if fam.exact_off_neighborhood() {
                    f.re == h.alpha && f.im == 0.0
                } else {
                    val <= off_bound
                };
                record(2, h.alpha - val, ok, off_bound);
            } else {
                record(3, growth - val, val <= growth * (1.0 + GUARD), growth);
                // hardest ε is the smallest with A·r·ε > dist
                if let Some(&eps) = eps_grid.iter().find(|&&e| h.a * r * e > dist) {
                    let bound = 1.0 + eps.powf(h.s);
                    record(4, bound - val, val < bound, bound);
                }
            }
        }
    }
    Ok(AuditReport {
        family: fam.id(),
        radii: radii.to_vec(),
        points_checked,
        worst_margins: worst,
        failures,
        passed: !failed,
    })
}
