//! Given constants of the barrier hypotheses and the free constants the
//! construction derives from them.

use serde::{Deserialize, Serialize};

use crate::enclosure::clears;
use crate::error::{Error, Result};

/// Floor used when raising the log-growth exponent `t` into (1/2, 1).
pub const T_FLOOR: f64 = 0.75;
/// Minimum slack of the largeness parameter above 1.
pub const M_SLACK: f64 = 0.5;
/// Relative guard band applied to every strict inequality check.
pub const GUARD: f64 = 1e-12;
/// Largest first radius handed out by [`choose_d`].
pub const D_CAP: f64 = 0.1;
/// Radius-bound constant tried first by [`choose_l`].
pub const L_CANDIDATE: f64 = 5.0;
/// Cap on the largeness parameter, as a multiple of `C`.
pub const M_CAP_FACTOR: f64 = 1048576.0;
/// Largest index the rigorous E:eps tail extension will walk to.
const TAIL_WALK_CAP: u64 = 10_000_000;

/// The constants `alpha, s, t, A, C` a barrier family promises.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisConstants {
    pub alpha: f64,
    pub s: f64,
    pub t: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "C")]
    pub c: f64,
}

impl HypothesisConstants {
    pub fn new(alpha: f64, s: f64, t: f64, a: f64, c: f64) -> Result<Self> {
        let h = HypothesisConstants { alpha, s, t, a, c };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (
                self.alpha > 0.0 && self.alpha < 1.0,
                "alpha must lie in (0,1)",
            ),
            (self.s > 0.0 && self.s <= 1.0, "s must lie in (0,1]"),
            (self.t > 0.0 && self.t < 1.0, "t must lie in (0,1)"),
            (self.a > 0.0 && self.a < 1.0, "A must lie in (0,1)"),
            (self.c > 0.0 && self.c.is_finite(), "C must be positive"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::InvalidHypothesis(format!("{msg}: {self:?}")));
            }
        }
        Ok(())
    }

    /// Raise `t` and `C` so that `1/2 < t < 1` and `s − (1−alpha)/C > 0`.
    /// Both raises only weaken the growth bound, so a family that satisfied
    /// the original constants still satisfies the normalized ones for radii
    /// below `1/e`.
    pub fn normalized(&self) -> Result<Self> {
        self.validate()?;
        Ok(HypothesisConstants {
            t: adjust_t(self.t)?,
            c: adjust_c(self.alpha, self.s, self.c),
            ..*self
        })
    }

    pub fn is_normalized(&self) -> bool {
        self.t > 0.5 && clears((1.0 - self.alpha) / self.c, self.s, GUARD)
    }
}

/// Returns `max(t, T_FLOOR)`.
pub fn adjust_t(t: f64) -> Result<f64> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidHypothesis(format!("t = {t} outside (0,1)")));
    }
    Ok(t.max(T_FLOOR))
}

/// Leaves `C` alone when `s − (1−alpha)/C > 0` already holds strictly,
/// otherwise raises it to `max(C, 2(1−alpha)/s)`.
pub fn adjust_c(alpha: f64, s: f64, c: f64) -> f64 {
    if clears((1.0 - alpha) / c, s, GUARD) {
        c
    } else {
        c.max(2.0 * (1.0 - alpha) / s)
    }
}

/// `(1−alpha)/2 · D^((1−alpha)/C) − D^s`, the slack of the first-shell inequality.
pub fn first_shell_margin(alpha: f64, s: f64, c: f64, d: f64) -> f64 {
    0.5 * (1.0 - alpha) * d.powf((1.0 - alpha) / c) - d.powf(s)
}

/// Picks the first radius `D`.
///
/// With `β = (1−alpha)/C < s` the first-shell inequality is equivalent to
/// `D^(s−β) ≤ (1−alpha)/2`, so its equality point is
/// `D* = ((1−alpha)/2)^(1/(s−β))`. Returns `D_CAP` when that sits strictly
/// below `D*`, and `D*/2` otherwise.
pub fn choose_d(alpha: f64, s: f64, c: f64) -> Result<f64> {
    let beta = (1.0 - alpha) / c;
    if !clears(beta, s, GUARD) {
        return Err(Error::InvalidHypothesis(format!(
            "first shell needs s − (1−alpha)/C > 0, got s = {s}, (1−alpha)/C = {beta}"
        )));
    }
    let d_star = (0.5 * (1.0 - alpha)).powf(1.0 / (s - beta));
    let d = if clears(D_CAP, d_star, GUARD) {
        D_CAP
    } else {
        0.5 * d_star
    };
    let margin = first_shell_margin(alpha, s, c, d);
    if !clears(0.0, margin, GUARD) || d <= 0.0 {
        return Err(Error::Infeasible {
            reason: format!("first-shell slack vanished at D = {d:e}"),
            best_margin: margin,
        });
    }
    Ok(d)
}

/// `p = M(1−t)/(1+Mt)` and `q = (t+Mt)/(1+Mt)`.
pub fn derive_pq(t: f64, m: f64) -> Result<(f64, f64)> {
    if !(t > 0.5 && t < 1.0) {
        return Err(Error::InvalidParameter(format!("t = {t} outside (1/2,1)")));
    }
    if m.is_nan() || m <= 1.0 || !m.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "largeness parameter M = {m} must exceed 1"
        )));
    }
    let den = 1.0 + m * t;
    Ok((m * (1.0 - t) / den, (t + m * t) / den))
}

/// Both sides of the exponent form of the M-selection inequality at `m`:
///
/// `(1+Mt)(1−alpha)/(2M(1−t)) · [(m+1)^(1−q) − 2^(1−q)]`
/// `  ≤ log(1/A) · (s/p) · [(m−1)^p − 1]`.
pub fn eps_exponents(h: &HypothesisConstants, big_m: f64, m: u64) -> Result<(f64, f64)> {
    let (p, q) = derive_pq(h.t, big_m)?;
    let mf = m as f64;
    let c1 = (1.0 + big_m * h.t) * (1.0 - h.alpha) / (2.0 * big_m * (1.0 - h.t));
    let c2 = (1.0 / h.a).ln() * h.s / p;
    let lhs = c1 * ((mf + 1.0).powf(1.0 - q) - 2f64.powf(1.0 - q));
    let rhs = c2 * ((mf - 1.0).powf(p) - 1.0);
    Ok((lhs, rhs))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpsMargin {
    pub m: u64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

/// Evidence that the M-selection inequality holds beyond the checked range.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpsTailCertificate {
    pub m_check: u64,
    /// `d(m) = rhs − lhs` at `m_check`.
    pub margin_at_check: f64,
    /// Smallest `d(m+1) − d(m)` over `[m_check, 4·m_check]`.
    pub min_difference: f64,
    /// `p − (1−q)`, positive when the right side grows faster.
    pub exponent_gap: f64,
    /// Onset past which `d'(m) > 0` propagates (`(1+q−p)/(p+q−1)`).
    pub derivative_onset: f64,
    /// Index at which `d'` was checked to be positive, if the walk succeeded.
    pub derivative_checked_at: Option<u64>,
    pub heuristic_passed: bool,
    pub rigorous_passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpsReport {
    pub big_m: f64,
    pub per_m: Vec<EpsMargin>,
    pub tail: EpsTailCertificate,
    pub passed: bool,
}

impl EpsReport {
    pub fn min_margin(&self) -> f64 {
        self.per_m
            .iter()
            .map(|e| e.margin)
            .fold(self.tail.margin_at_check, f64::min)
    }
}

fn eps_tail(h: &HypothesisConstants, big_m: f64, m_check: u64) -> Result<EpsTailCertificate> {
    let (p, q) = derive_pq(h.t, big_m)?;
    let d = |m: u64| -> Result<f64> {
        let (l, r) = eps_exponents(h, big_m, m)?;
        Ok(r - l)
    };
    let margin_at_check = d(m_check)?;
    let mut min_difference = f64::INFINITY;
    let mut prev = margin_at_check;
    for m in m_check..4 * m_check {
        let next = d(m + 1)?;
        min_difference = min_difference.min(next - prev);
        prev = next;
    }
    let exponent_gap = p - (1.0 - q);
    let heuristic_passed =
        clears(0.0, margin_at_check, GUARD) && min_difference > 0.0 && exponent_gap > 0.0;

    // (m−1)^(1−p)·(m+1)^(−q) decreases once m ≥ onset, so a positive
    // derivative of d at any m1 ≥ onset stays positive from there on.
    let onset = if exponent_gap > 0.0 {
        (1.0 + q - p) / exponent_gap
    } else {
        f64::INFINITY
    };
    let c1 = (1.0 + big_m * h.t) * (1.0 - h.alpha) / (2.0 * big_m * (1.0 - h.t));
    let c2 = (1.0 / h.a).ln() * h.s / p;
    let d_prime = |m: f64| c2 * p * (m - 1.0).powf(p - 1.0) - c1 * (1.0 - q) * (m + 1.0).powf(-q);
    let mut derivative_checked_at = None;
    let mut rigorous_passed = false;
    if onset.is_finite() && onset < TAIL_WALK_CAP as f64 {
        let m1 = m_check.max(onset.ceil() as u64);
        let mut all_positive = true;
        for m in m_check..=m1 {
            if !clears(0.0, d(m)?, GUARD) {
                all_positive = false;
                break;
            }
        }
        if all_positive && d_prime(m1 as f64) > 0.0 {
            derivative_checked_at = Some(m1);
            rigorous_passed = true;
        }
    }
    Ok(EpsTailCertificate {
        m_check,
        margin_at_check,
        min_difference,
        exponent_gap,
        derivative_onset: onset,
        derivative_checked_at,
        heuristic_passed,
        rigorous_passed,
    })
}

/// Evaluates the M-selection inequality for `m ∈ [3, m_check]` plus the tail
/// certificate for `m > m_check`.
pub fn eps_report(h: &HypothesisConstants, big_m: f64, m_check: u64) -> Result<EpsReport> {
    if m_check < 3 {
        return Err(Error::InvalidArgument(format!("m_check = {m_check} < 3")));
    }
    let mut per_m = Vec::with_capacity(m_check as usize);
    for m in 3..=m_check {
        let (lhs, rhs) = eps_exponents(h, big_m, m)?;
        per_m.push(EpsMargin {
            m,
            lhs,
            rhs,
            margin: rhs - lhs,
        });
    }
    let tail = eps_tail(h, big_m, m_check)?;
    let passed = per_m.iter().all(|e| clears(e.lhs, e.rhs, GUARD))
        && tail.heuristic_passed
        && tail.rigorous_passed;
    Ok(EpsReport {
        big_m,
        per_m,
        tail,
        passed,
    })
}

/// Smallest `M` on the grid `2·max(C, 1+M_SLACK)·2^i` (i ≥ 0) passing
/// [`eps_report`]. Starting one doubling above `C` keeps `C/M ≤ 1/2`.
pub fn choose_m(h: &HypothesisConstants, m_check: u64) -> Result<(f64, EpsReport)> {
    let start = 2.0 * h.c.max(1.0 + M_SLACK);
    let cap = M_CAP_FACTOR * h.c.max(1.0 + M_SLACK);
    let mut big_m = start;
    let mut best = f64::NEG_INFINITY;
    while big_m <= cap {
        let report = eps_report(h, big_m, m_check)?;
        if report.passed {
            return Ok((big_m, report));
        }
        best = best.max(report.min_margin());
        big_m *= 2.0;
    }
    Err(Error::Infeasible {
        reason: format!("no M below {cap:e} satisfies the selection inequality"),
        best_margin: best,
    })
}

/// Left side of the radius bound, `2(m−1) + [m^(1+p) − (p+1)m + p]/(p(p+1))`.
pub fn radius_bound_lhs(m: u64, p: f64) -> f64 {
    let mf = m as f64;
    2.0 * (mf - 1.0) + (mf.powf(1.0 + p) - (p + 1.0) * mf + p) / (p * (p + 1.0))
}

/// Largest violation-free check of `radius_bound_lhs ≤ L·m^(1+p)/(p(p+1))`.
fn radius_bound_holds(l: f64, p_grid: &[f64], m_max: u64) -> bool {
    p_grid.iter().all(|&p| {
        (1..=m_max).all(|m| {
            let rhs = l * (m as f64).powf(1.0 + p) / (p * (p + 1.0));
            radius_bound_lhs(m, p) <= rhs
        })
    })
}

/// Radius-bound constant valid for every `p` in `p_grid` and `m ≤ m_max`.
///
/// `L = 5` always works: `p(p+1) ≤ 2` gives `2(m−1)p(p+1) ≤ 4m^(1+p)`, and
/// `−(p+1)m + p ≤ 0`. The sweep re-checks it and doubles on failure.
pub fn choose_l(p_grid: &[f64], m_max: u64) -> Result<f64> {
    if p_grid.iter().any(|&p| !(p > 0.0 && p < 1.0)) || m_max < 2 {
        return Err(Error::InvalidArgument(format!(
            "p grid must lie in (0,1) and m_max ≥ 2 (got {p_grid:?}, {m_max})"
        )));
    }
    let mut l = L_CANDIDATE;
    while !radius_bound_holds(l, p_grid, m_max) {
        l *= 2.0;
    }
    Ok(l)
}

/// The grid `{0.05, 0.10, …, 0.95}`.
pub fn default_p_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

/// Optional overrides of the derived constants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    #[serde(rename = "D", skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
}

/// Constants chosen by the construction: first radius `D`, largeness `M`,
/// exponents `p, q`, radius-bound constant `L` and decay rate `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub p: f64,
    pub q: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub k: f64,
}

impl DerivedConstants {
    /// Assembles the constants from `D, M, L`; `p, q, k` follow.
    pub fn from_parts(h: &HypothesisConstants, d: f64, big_m: f64, l: f64) -> Result<Self> {
        if !(d > 0.0 && d < 1.0) {
            return Err(Error::InvalidParameter(format!("D = {d} outside (0,1)")));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidParameter(format!("L = {l} must be positive")));
        }
        let (p, q) = derive_pq(h.t, big_m)?;
        Ok(DerivedConstants {
            d,
            m: big_m,
            p,
            q,
            l,
            k: (1.0 - h.alpha) / (2.0 * big_m),
        })
    }

    /// Normalizes `h` and derives every constant not fixed by `overrides`.
    /// Overridden values are only range-checked here; certificates decide
    /// whether they are usable.
    pub fn derive(
        h: &HypothesisConstants,
        overrides: &Overrides,
        m_check: u64,
    ) -> Result<(HypothesisConstants, DerivedConstants)> {
        let n = h.normalized()?;
        let d = match overrides.d {
            Some(d) => d,
            None => choose_d(n.alpha, n.s, n.c)?,
        };
        let big_m = match overrides.m {
            Some(m) => m,
            None => choose_m(&n, m_check)?.0,
        };
        let l = match overrides.l {
            Some(l) => l,
            None => {
                let (p, _) = derive_pq(n.t, big_m)?;
                let mut grid = default_p_grid();
                grid.push(p);
                choose_l(&grid, 10_000)?
            }
        };
        Ok((n, DerivedConstants::from_parts(&n, d, big_m, l)?))
    }

    /// Relative residuals of `(1+p)t = q` and `1−q = p/M`.
    pub fn identity_residuals(&self, t: f64) -> (f64, f64) {
        let r1 = ((1.0 + self.p) * t - self.q).abs() / self.q;
        let r2 = ((1.0 - self.q) - self.p / self.m).abs() / (self.p / self.m);
        (r1, r2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference() -> HypothesisConstants {
        HypothesisConstants::new(0.5, 1.0, 0.75, 0.5, 2.0).unwrap()
    }

    #[test]
    fn adjust_t_examples() {
        assert_eq!(adjust_t(0.75).unwrap(), 0.75);
        assert_eq!(adjust_t(0.30).unwrap(), 0.75);
        assert_eq!(adjust_t(0.99).unwrap(), 0.99);
        assert!(adjust_t(1.0).is_err());
        assert!(adjust_t(0.0).is_err());
    }

    #[test]
    fn adjust_c_examples() {
        assert_eq!(adjust_c(0.5, 1.0, 2.0), 2.0);
        assert_eq!(adjust_c(0.5, 0.25, 2.0), 4.0);
        assert_eq!(adjust_c(0.99, 1.0, 1.0), 1.0);
        let c = adjust_c(0.5, 0.25, 2.0);
        assert!(0.25 - 0.5 / c > 0.0);
    }

    #[test]
    fn choose_d_reference() {
        assert_eq!(choose_d(0.5, 1.0, 2.0).unwrap(), 0.1);
        // 0.25·0.1^0.25 − 0.1 ≈ 0.0406
        assert_relative_eq!(
            first_shell_margin(0.5, 1.0, 2.0, 0.1),
            0.040_585_331,
            max_relative = 1e-8
        );
        assert!(first_shell_margin(0.5, 1.0, 2.0, 0.2) < 0.0);
        assert!(first_shell_margin(0.5, 1.0, 2.0, 0.01) > 0.0);
    }

    #[test]
    fn choose_d_halves_below_cap() {
        // s − β = 0.125, D* = 0.25^8
        let d = choose_d(0.5, 0.25, 4.0).unwrap();
        assert_relative_eq!(d, 0.5 * 0.25f64.powi(8), max_relative = 1e-12);
        assert!(first_shell_margin(0.5, 0.25, 4.0, d) > 0.0);
    }

    #[test]
    fn choose_d_rejects_boundary() {
        assert!(choose_d(0.5, 0.25, 2.0).is_err());
    }

    #[test]
    fn derive_pq_examples() {
        let (p, q) = derive_pq(0.75, 4.0).unwrap();
        assert_relative_eq!(p, 0.25, max_relative = 1e-15);
        assert_relative_eq!(q, 0.9375, max_relative = 1e-15);
        let (p, q) = derive_pq(0.75, 8.0).unwrap();
        assert_relative_eq!(p, 2.0 / 7.0, max_relative = 1e-15);
        assert_relative_eq!(q, 0.964_285_714_285_714_3, max_relative = 1e-15);
        assert_relative_eq!(1.0 - q, p / 8.0, max_relative = 1e-12);
        assert!(derive_pq(0.75, 1.0).is_err());
    }

    #[test]
    fn eps_exponent_values() {
        let h = reference();
        let (l, r) = eps_exponents(&h, 4.0, 3).unwrap();
        // 1·(4^0.0625 − 2^0.0625) and 4·ln2·(2^0.25 − 1)
        assert_relative_eq!(
            l,
            4f64.powf(0.0625) - 2f64.powf(0.0625),
            max_relative = 1e-14
        );
        assert_relative_eq!(l, 0.046_26, max_relative = 1e-3);
        assert_relative_eq!(r, 0.524_58, max_relative = 1e-4);
        let (l, r) = eps_exponents(&h, 4.0, 10).unwrap();
        assert_relative_eq!(l, 0.1173, max_relative = 1e-3);
        assert_relative_eq!(r, 2.0298, max_relative = 1e-4);
    }

    #[test]
    fn choose_m_reference_is_four() {
        let (m, report) = choose_m(&reference(), 120).unwrap();
        assert_eq!(m, 4.0);
        assert!(report.passed);
        assert!(report.per_m.iter().all(|e| e.margin > 0.0));
        assert!(report.tail.rigorous_passed && report.tail.heuristic_passed);
        assert_eq!(report.tail.derivative_checked_at, Some(120));
    }

    #[test]
    fn choose_m_fails_as_a_tends_to_one() {
        let h = HypothesisConstants::new(0.5, 1.0, 0.75, 1.0 - 1e-12, 2.0).unwrap();
        let err = choose_m(&h, 120).unwrap_err();
        assert!(matches!(err, Error::Infeasible { .. }));
    }

    #[test]
    fn choose_l_examples() {
        // m = 2, p = 0.25: need L·7.611 ≥ 2.411
        let lhs = radius_bound_lhs(2, 0.25) * 0.3125;
        let rhs_unit = 2f64.powf(1.25);
        assert_relative_eq!(lhs / rhs_unit, 0.3168, max_relative = 1e-3);
        for p in default_p_grid() {
            assert!(radius_bound_lhs(1, p).abs() < 1e-14);
        }
        assert_eq!(choose_l(&default_p_grid(), 10_000).unwrap(), 5.0);
        assert!(choose_l(&[1.5], 10).is_err());
    }

    #[test]
    fn derive_reference() {
        let (n, d) = DerivedConstants::derive(&reference(), &Overrides::default(), 120).unwrap();
        assert_eq!(n, reference());
        assert_eq!((d.d, d.m, d.l), (0.1, 4.0, 5.0));
        assert_relative_eq!(d.p, 0.25);
        assert_relative_eq!(d.q, 0.9375);
        assert_relative_eq!(d.k, 0.0625);
    }

    #[test]
    fn derive_normalizes_low_t() {
        let h = HypothesisConstants::new(0.5, 1.0, 0.3, 0.5, 2.0).unwrap();
        let (n, d) = DerivedConstants::derive(&h, &Overrides::default(), 120).unwrap();
        assert_eq!(n.t, 0.75);
        assert_eq!(d.m, 4.0);
    }

    #[test]
    fn validation_rejects_out_of_range() {
        assert!(HypothesisConstants::new(1.5, 1.0, 0.75, 0.5, 2.0).is_err());
        assert!(HypothesisConstants::new(0.5, 0.0, 0.75, 0.5, 2.0).is_err());
        assert!(HypothesisConstants::new(0.5, 1.0, 0.75, 1.0, 2.0).is_err());
        assert!(HypothesisConstants::new(0.5, 1.0, 0.75, 0.5, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn peeque_identities(t in 0.5001f64..0.9999, m in 1.0001f64..1e6) {
            let (p, q) = derive_pq(t, m).unwrap();
            prop_assert!(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0);
            prop_assert!(((1.0 + p) * t - q).abs() <= 1e-12 * q);
            prop_assert!(((1.0 - q) - p / m).abs() <= 1e-12 * (p / m).max(1e-300) + 4.0 * f64::EPSILON);
            prop_assert!(1.0 - q < p);
        }

        #[test]
        fn chosen_d_always_passes_first_shell(
            alpha in 0.01f64..0.99, s in 0.05f64..1.0, c in 0.1f64..50.0,
        ) {
            let c = adjust_c(alpha, s, c);
            prop_assume!(s - (1.0 - alpha) / c > 0.01);
            let d = choose_d(alpha, s, c).unwrap();
            prop_assert!(d > 0.0 && d <= D_CAP);
            prop_assert!(clears(0.0, first_shell_margin(alpha, s, c, d), GUARD));
        }
    }
}
