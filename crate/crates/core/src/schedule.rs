//! Shrinking-neighborhood schedule `ε_k`, radii `r_k = r_x(U_k)` and the
//! majorant `ψ`, all kept in log-space.
//!
//! Radii are stored as `log(1/r)`: under the reference constants `r_m`
//! underflows double precision near `m ≈ 85`.

use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::enclosure::clears;
use crate::error::{Error, Result};
use crate::hypothesis::{DerivedConstants, HypothesisConstants, GUARD};

/// `ψ(τ) = τ·log(1/D) + log(1/A)·L·τ^(1+p)/(p(p+1))` for `τ ≥ 1`, flat below 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Majorant {
    log_inv_d: f64,
    log_inv_a: f64,
    l: f64,
    p: f64,
}

impl Majorant {
    pub fn new(h: &HypothesisConstants, d: &DerivedConstants) -> Self {
        Majorant {
            log_inv_d: (1.0 / d.d).ln(),
            log_inv_a: (1.0 / h.a).ln(),
            l: d.l,
            p: d.p,
        }
    }

    pub fn eval(&self, tau: f64) -> Result<f64> {
        if tau.is_nan() || tau < 0.0 {
            return Err(Error::InvalidArgument(format!("ψ undefined at τ = {tau}")));
        }
        Ok(self.at(tau))
    }

    /// Unchecked evaluation for `τ ≥ 0`.
    #[inline]
    pub fn at(&self, tau: f64) -> f64 {
        let tau = tau.max(1.0);
        tau * self.log_inv_d + self.coefficient() * tau.powf(1.0 + self.p)
    }

    /// `log(1/A)·L/(p(p+1))`, the limit of `ψ(τ)/τ^(1+p)`.
    pub fn coefficient(&self) -> f64 {
        self.log_inv_a * self.l / (self.p * (self.p + 1.0))
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn log_inv_d(&self) -> f64 {
        self.log_inv_d
    }
}

#[derive(Default)]
struct Cache {
    // S_k at index k-1
    partial_sums: Vec<f64>,
    // log(1/r_m) at index m-1
    log_inv_r: Vec<f64>,
}

pub struct Schedule {
    psi: Majorant,
    log_inv_d: f64,
    log_inv_a: f64,
    p: f64,
    cache: RwLock<Cache>,
}

impl std::fmt::Debug for Schedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Schedule")
            .field("psi", &self.psi)
            .field(
                "cached",
                &self.cache.read().map(|c| c.log_inv_r.len()).unwrap_or(0),
            )
            .finish()
    }
}

impl Schedule {
    pub fn new(h: &HypothesisConstants, d: &DerivedConstants) -> Self {
        Schedule {
            psi: Majorant::new(h, d),
            log_inv_d: (1.0 / d.d).ln(),
            log_inv_a: (1.0 / h.a).ln(),
            p: d.p,
            cache: RwLock::new(Cache::default()),
        }
    }

    pub fn majorant(&self) -> &Majorant {
        &self.psi
    }

    fn ensure(&self, n: usize) {
        if self
            .cache
            .read()
            .expect("schedule cache poisoned")
            .log_inv_r
            .len()
            >= n
        {
            return;
        }
        let mut c = self.cache.write().expect("schedule cache poisoned");
        while c.partial_sums.len() < n {
            let k = c.partial_sums.len() + 1;
            let prev = c.partial_sums.last().copied().unwrap_or(0.0);
            c.partial_sums.push(prev + (k as f64).powf(self.p - 1.0));
        }
        while c.log_inv_r.len() < n {
            let m = c.log_inv_r.len() + 1;
            let next = if m == 1 {
                self.log_inv_d
            } else {
                // r_m = A·r_{m−1}·ε_{m−1}
                let log_inv_eps = self.log_inv_d + self.log_inv_a * c.partial_sums[m - 2];
                self.log_inv_a + c.log_inv_r[m - 2] + log_inv_eps
            };
            c.log_inv_r.push(next);
        }
    }

    /// `S_k = Σ_{j≤k} j^(p−1)`.
    pub fn partial_sum(&self, k: u64) -> f64 {
        assert!(k >= 1, "partial sums start at k = 1");
        self.ensure(k as usize);
        self.cache
            .read()
            .expect("schedule cache poisoned")
            .partial_sums[k as usize - 1]
    }

    /// `log ε_k = log D + (log A)·S_k`.
    pub fn log_epsilon(&self, k: u64) -> f64 {
        -(self.log_inv_d + self.log_inv_a * self.partial_sum(k))
    }

    pub fn epsilon(&self, k: u64) -> f64 {
        self.log_epsilon(k).exp()
    }

    /// `log(1/r_m)` by the neighborhood recursion, with `r_1 = D`.
    pub fn log_inv_radius(&self, m: u64) -> f64 {
        assert!(m >= 1, "radii start at m = 1");
        self.ensure(m as usize);
        self.cache
            .read()
            .expect("schedule cache poisoned")
            .log_inv_r[m as usize - 1]
    }

    /// Closed form `m·log(1/D) + log(1/A)·[(m−1) + Σ_{j<m} (m−j)·j^(p−1)]`,
    /// summed directly without the cache.
    pub fn log_inv_radius_closed_form(&self, m: u64) -> f64 {
        let mf = m as f64;
        let weighted: f64 = (1..m)
            .map(|j| (mf - j as f64) * (j as f64).powf(self.p - 1.0))
            .sum();
        mf * self.log_inv_d + self.log_inv_a * ((mf - 1.0) + weighted)
    }

    /// `ψ(τ)`.
    pub fn psi(&self, tau: f64) -> Result<f64> {
        self.psi.eval(tau)
    }

    /// Smallest `j` with `r_j ≤ ρ`, where `ρ = exp(−log_inv_dist)` is a
    /// distance to the peak point. `ρ = 0` (`+∞`) has no such index.
    pub fn first_index_outside(&self, log_inv_dist: f64) -> Option<u64> {
        if log_inv_dist == f64::INFINITY {
            return None;
        }
        let mut j = 1;
        loop {
            if self.log_inv_radius(j) >= log_inv_dist {
                return Some(j);
            }
            j += 1;
        }
    }
}

/// Margins of the two sum/integral brackets over `m ∈ [2, m_max]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BracketReport {
    pub m_max: u64,
    pub p: f64,
    /// Smallest slack of `(m^p−1)/p < Σ_{j<m} j^(p−1)`.
    pub harmonic_lower: f64,
    /// Smallest slack of `Σ_{j<m} j^(p−1) < (m^p−1)/p + 1 − m^(p−1)`.
    pub harmonic_upper: f64,
    /// Smallest slack of `(m^(p+1)−1)/(p+1) + 1 − m^p < Σ_{j<m} j^p`.
    pub power_lower: f64,
    /// Smallest slack of `Σ_{j<m} j^p < (m^(p+1)−1)/(p+1)`.
    pub power_upper: f64,
    pub first_violation: Option<u64>,
    pub passed: bool,
}

pub fn check_sum_brackets(m_max: u64, p: f64) -> Result<BracketReport> {
    if m_max < 2 || !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "brackets need m_max ≥ 2 and p ∈ (0,1), got {m_max}, {p}"
        )));
    }
    let mut r = BracketReport {
        m_max,
        p,
        harmonic_lower: f64::INFINITY,
        harmonic_upper: f64::INFINITY,
        power_lower: f64::INFINITY,
        power_upper: f64::INFINITY,
        first_violation: None,
        passed: true,
    };
    let (mut harmonic, mut power) = (0.0f64, 0.0f64);
    for m in 2..=m_max {
        let j = (m - 1) as f64;
        harmonic += j.powf(p - 1.0);
        power += j.powf(p);
        let mf = m as f64;
        let h_lo = (mf.powf(p) - 1.0) / p;
        let h_hi = h_lo + (1.0 - mf.powf(p - 1.0));
        let p_hi = (mf.powf(p + 1.0) - 1.0) / (p + 1.0);
        let p_lo = p_hi + (1.0 - mf.powf(p));
        r.harmonic_lower = r.harmonic_lower.min(harmonic - h_lo);
        r.harmonic_upper = r.harmonic_upper.min(h_hi - harmonic);
        r.power_lower = r.power_lower.min(power - p_lo);
        r.power_upper = r.power_upper.min(p_hi - power);
        let ok = clears(h_lo, harmonic, GUARD)
            && clears(harmonic, h_hi, GUARD)
            && clears(p_lo, power, GUARD)
            && clears(power, p_hi, GUARD);
        if !ok && r.first_violation.is_none() {
            r.first_violation = Some(m);
            r.passed = false;
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference() -> Schedule {
        let h = HypothesisConstants::new(0.5, 1.0, 0.75, 0.5, 2.0).unwrap();
        let d = DerivedConstants::from_parts(&h, 0.1, 4.0, 5.0).unwrap();
        Schedule::new(&h, &d)
    }

    #[test]
    fn epsilon_examples() {
        let s = reference();
        assert_relative_eq!(s.epsilon(1), 0.05, max_relative = 1e-14);
        // S_2 = 1 + 2^(−0.75)
        let s2 = 1.0 + 2f64.powf(-0.75);
        assert_relative_eq!(s.partial_sum(2), s2, max_relative = 1e-15);
        assert_relative_eq!(s.epsilon(2), 0.1 * 0.5f64.powf(s2), max_relative = 1e-14);
        assert_relative_eq!(s.epsilon(2), 0.033_113, max_relative = 1e-4);
        assert!(s.epsilon(2) < s.epsilon(1));
    }

    #[test]
    fn epsilon_log_space_matches_direct_product() {
        let s = reference();
        for k in 1..=400u64 {
            let direct = 0.1 * 0.5f64.powf(s.partial_sum(k));
            if direct < 1e-300 {
                break;
            }
            assert_relative_eq!(s.epsilon(k), direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn radius_examples() {
        let s = reference();
        assert_relative_eq!(s.log_inv_radius(1), 10f64.ln(), max_relative = 1e-15);
        let expected = 2.0 * 10f64.ln() + 2f64.ln() * 2.0;
        assert_relative_eq!(s.log_inv_radius(2), expected, max_relative = 1e-14);
        assert_relative_eq!(s.log_inv_radius(2), 5.991_465, max_relative = 1e-6);
        assert_relative_eq!((-s.log_inv_radius(2)).exp(), 0.0025, max_relative = 1e-12);
    }

    #[test]
    fn radii_survive_underflow() {
        let s = reference();
        let far = s.log_inv_radius(500);
        assert!(far.is_finite() && far > 745.0);
        for m in 2..=500 {
            assert!(s.log_inv_radius(m) > s.log_inv_radius(m - 1));
        }
    }

    #[test]
    fn psi_examples() {
        let s = reference();
        let psi1 = 10f64.ln() + 2f64.ln() * 5.0 / 0.3125;
        assert_relative_eq!(s.psi(1.0).unwrap(), psi1, max_relative = 1e-15);
        assert_relative_eq!(s.psi(1.0).unwrap(), 13.3929, max_relative = 1e-5);
        assert_eq!(s.psi(0.5).unwrap(), s.psi(1.0).unwrap());
        assert_eq!(s.psi(0.0).unwrap(), s.psi(1.0).unwrap());
        let psi2 = s.psi(2.0).unwrap();
        assert_relative_eq!(psi2, 30.98, max_relative = 1e-3);
        assert!(psi2 >= s.log_inv_radius(2));
        assert!(s.psi(-1.0).is_err());
    }

    #[test]
    fn first_index_outside() {
        let s = reference();
        assert_eq!(s.first_index_outside(-(0.5f64.ln())), Some(1));
        assert_eq!(s.first_index_outside(-(0.1f64.ln())), Some(1));
        assert_eq!(s.first_index_outside(-(0.05f64.ln())), Some(2));
        assert_eq!(s.first_index_outside(f64::INFINITY), None);
        // 1e−300 classifies without touching subnormal radii
        let j = s.first_index_outside(300.0 * 10f64.ln()).unwrap();
        assert!(s.log_inv_radius(j) >= 690.0 && s.log_inv_radius(j - 1) < 690.8);
    }

    #[test]
    fn bracket_examples() {
        let r = check_sum_brackets(2, 0.25).unwrap();
        assert!(r.passed);
        assert_relative_eq!(1.0 - r.harmonic_lower, 0.756_828, max_relative = 1e-6);
        assert_relative_eq!(r.harmonic_upper + 1.0, 1.162_225, max_relative = 1e-6);
        assert_relative_eq!(1.0 - r.power_lower, 0.913_524, max_relative = 1e-6);
        assert_relative_eq!(r.power_upper + 1.0, 1.102_731, max_relative = 1e-6);
        assert!(check_sum_brackets(1, 0.25).is_err());
    }

    #[test]
    fn concurrent_readers_agree() {
        let s = reference();
        let values: Vec<f64> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..4)
                .map(|i| {
                    let s = &s;
                    scope.spawn(move || s.log_inv_radius(100 + 10 * i))
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for (i, v) in values.iter().enumerate() {
            assert_eq!(*v, reference().log_inv_radius(100 + 10 * i as u64));
        }
    }
}
