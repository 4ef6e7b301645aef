//! Two-sided numeric enclosures with outward rounding.
//!
//! Every arithmetic result is widened by one ulp on each side, so an
//! enclosure computed from enclosures of the inputs contains the exact
//! result of the same operation. Quadrature errors enter through the
//! initial widths, which is the "tolerance level" these enclosures certify.

use std::fmt;
use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Enclosure {
    pub lo: f64,
    pub hi: f64,
}

#[inline]
fn down(x: f64) -> f64 {
    if x == 0.0 {
        // exact zero stays exact; products with zero are exact
        0.0
    } else {
        x.next_down()
    }
}

#[inline]
fn up(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.next_up()
    }
}

impl Enclosure {
    pub const ZERO: Enclosure = Enclosure { lo: 0.0, hi: 0.0 };
    pub const ONE: Enclosure = Enclosure { lo: 1.0, hi: 1.0 };

    /// Panics if `lo > hi` or either bound is not finite.
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(
            lo.is_finite() && hi.is_finite() && lo <= hi,
            "bad enclosure [{lo}, {hi}]"
        );
        Enclosure { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Enclosure::new(x, x)
    }

    /// Enclosure of `center ± radius`, rounded outward.
    pub fn around(center: f64, radius: f64) -> Self {
        let r = radius.abs();
        Enclosure::new(down(center - r), up(center + r))
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Width relative to the larger endpoint magnitude (0 for a point at 0).
    pub fn relative_width(&self) -> f64 {
        let scale = self.lo.abs().max(self.hi.abs());
        if scale == 0.0 {
            0.0
        } else {
            self.width() / scale
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_enclosure(&self, other: &Enclosure) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn scale(&self, c: f64) -> Self {
        let a = self.lo * c;
        let b = self.hi * c;
        Enclosure::new(down(a.min(b)), up(a.max(b)))
    }

    /// Division by an enclosure that lies strictly above zero.
    pub fn div_positive(&self, d: &Enclosure) -> Self {
        assert!(d.lo > 0.0, "divisor enclosure must be positive");
        let c = [
            self.lo / d.lo,
            self.lo / d.hi,
            self.hi / d.lo,
            self.hi / d.hi,
        ];
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Enclosure::new(down(lo), up(hi))
    }

    /// `exp(-self)`; decreasing, so the endpoints swap.
    pub fn exp_neg(&self) -> Self {
        Enclosure::new(down((-self.hi).exp()).max(0.0), up((-self.lo).exp()))
    }

    /// `self^e` for an enclosure of positive reals and a real exponent.
    pub fn powf_positive(&self, e: f64) -> Self {
        assert!(self.lo > 0.0);
        let a = self.lo.powf(e);
        let b = self.hi.powf(e);
        // powf is faithful to within a couple of ulps
        Enclosure::new(down(down(a.min(b))), up(up(a.max(b))))
    }

    pub fn max(&self, other: &Enclosure) -> Self {
        Enclosure::new(self.lo.max(other.lo), self.hi.max(other.hi))
    }

    pub fn hull(&self, other: &Enclosure) -> Self {
        Enclosure::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }
}

impl Add for Enclosure {
    type Output = Enclosure;

    fn add(self, rhs: Enclosure) -> Enclosure {
        Enclosure::new(down(self.lo + rhs.lo), up(self.hi + rhs.hi))
    }
}

impl Mul for Enclosure {
    type Output = Enclosure;

    fn mul(self, rhs: Enclosure) -> Enclosure {
        let c = [
            self.lo * rhs.lo,
            self.lo * rhs.hi,
            self.hi * rhs.lo,
            self.hi * rhs.hi,
        ];
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Enclosure::new(down(lo), up(hi))
    }
}

impl std::iter::Sum for Enclosure {
    fn sum<I: Iterator<Item = Enclosure>>(iter: I) -> Enclosure {
        iter.fold(Enclosure::ZERO, |acc, e| acc + e)
    }
}

impl fmt::Display for Enclosure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

/// Range of `(a + coef·T) / (H + T)` over the box `a × H × T`.
///
/// The map is monotone in each argument separately (the sign of its
/// T-derivative is the sign of `coef·H − a`, independent of T), so the
/// range is attained at the eight corners. `H + T` must stay positive.
pub fn ratio_range(a: Enclosure, coef: f64, h: Enclosure, t: Enclosure) -> Enclosure {
    assert!(h.lo + t.lo > 0.0, "denominator must be positive");
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &av in &[a.lo, a.hi] {
        for &hv in &[h.lo, h.hi] {
            for &tv in &[t.lo, t.hi] {
                let r = (av + coef * tv) / (hv + tv);
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
    }
    // three roundings per corner
    Enclosure::new(down(down(down(lo))), up(up(up(hi))))
}

/// Strict `small < big` with a relative guard band: ties and near-ties fail.
pub fn clears(small: f64, big: f64, guard: f64) -> bool {
    let scale = small.abs().max(big.abs()).max(f64::MIN_POSITIVE);
    big - small > guard * scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ratio_range_collapses_when_numerator_tracks_denominator() {
        let t = Enclosure::new(3.96, 4.0);
        let r = ratio_range(Enclosure::ZERO, 0.5, Enclosure::ZERO, t);
        assert!(r.contains(0.5));
        assert!(r.width() < 1e-15);
    }

    #[test]
    fn clears_rejects_ties() {
        assert!(!clears(1.0, 1.0, 1e-12));
        assert!(!clears(1.0, 1.0 + 1e-14, 1e-12));
        assert!(clears(1.0, 1.0 + 1e-9, 1e-12));
    }

    #[test]
    fn exp_neg_swaps_endpoints() {
        let e = Enclosure::new(1.0, 2.0).exp_neg();
        assert!(e.contains((-1.0f64).exp()) && e.contains((-2.0f64).exp()));
        assert!(e.lo < e.hi);
    }

    proptest! {
        #[test]
        fn arithmetic_contains_point_results(
            a in -1e3f64..1e3, b in -1e3f64..1e3, c in 0.1f64..1e3, w in 0.0f64..1.0,
        ) {
            let ea = Enclosure::around(a, w);
            let eb = Enclosure::around(b, w);
            let ec = Enclosure::around(c, 0.01 * w);
            prop_assert!((ea + eb).contains(a + b));
            prop_assert!((ea * eb).contains(a * b));
            prop_assert!(ea.div_positive(&ec).contains(a / c));
            prop_assert!(ea.scale(-2.5).contains(a * -2.5));
        }

        #[test]
        fn ratio_range_contains_interior_samples(
            a in 0.0f64..2.0, h in 0.0f64..2.0, t in 0.1f64..5.0,
            coef in 0.0f64..1.5, u in 0.0f64..1.0, v in 0.0f64..1.0, s in 0.0f64..1.0,
        ) {
            let ea = Enclosure::new(a, a + 0.3);
            let eh = Enclosure::new(h, h + 0.2);
            let et = Enclosure::new(t, t + 0.4);
            let r = ratio_range(ea, coef, eh, et);
            let (av, hv, tv) = (a + 0.3 * u, h + 0.2 * v, t + 0.4 * s);
            prop_assert!(r.contains((av + coef * tv) / (hv + tv)));
        }
    }
}
