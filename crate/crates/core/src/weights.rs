//! Decay profile `g`, series weights `σ_j` and enclosures of their tails.
//!
//! `g(x) = exp(−k·I(x))` with `I(x) = ∫_0^x ψ^(−t)`. Because
//! `k·∫_x^∞ g·ψ^(−t) = g(x)`, every tail of the weight series has a
//! closed-form integral; only finite intervals are ever integrated
//! numerically.

use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::enclosure::Enclosure;
use crate::error::{Error, Result};
use crate::hypothesis::{DerivedConstants, HypothesisConstants};
use crate::quadrature::{gauss_kronrod_15, integrate};
use crate::schedule::Majorant;

pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

/// Enclosure of a floating-point `ψ` value, allowing a few ulps of error.
fn psi_enclosure(v: f64) -> Enclosure {
    Enclosure::around(v, 8.0 * f64::EPSILON * v)
}

pub struct WeightEngine {
    psi: Majorant,
    t: f64,
    big_m: f64,
    k: f64,
    q: f64,
    tol: f64,
    // I(j) for j = 0, 1, 2, …
    table: RwLock<Vec<Enclosure>>,
}

impl std::fmt::Debug for WeightEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WeightEngine")
            .field("t", &self.t)
            .field("M", &self.big_m)
            .field("k", &self.k)
            .field("tol", &self.tol)
            .finish()
    }
}

impl WeightEngine {
    pub fn new(h: &HypothesisConstants, d: &DerivedConstants, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol < 1e-3) {
            return Err(Error::InvalidArgument(format!(
                "quadrature tolerance {tol} outside (0, 1e-3)"
            )));
        }
        let psi = Majorant::new(h, d);
        let i1 = psi.at(1.0).powf(-h.t);
        Ok(WeightEngine {
            psi,
            t: h.t,
            big_m: d.m,
            k: d.k,
            q: d.q,
            tol,
            table: RwLock::new(vec![
                Enclosure::ZERO,
                Enclosure::around(i1, 4.0 * f64::EPSILON * i1),
            ]),
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn majorant(&self) -> &Majorant {
        &self.psi
    }

    fn integrand(&self, s: f64) -> f64 {
        self.psi.at(s).powf(-self.t)
    }

    fn ensure_table(&self, n: usize) -> Result<()> {
        if self.table.read().expect("weight cache poisoned").len() > n {
            return Ok(());
        }
        let mut table = self.table.write().expect("weight cache poisoned");
        while table.len() <= n {
            let j = (table.len() - 1) as f64;
            let panel = integrate(|s| self.integrand(s), j, j + 1.0, self.tol)?.enclosure();
            let next = *table.last().expect("table starts non-empty") + panel;
            table.push(next);
        }
        Ok(())
    }

    fn table_at(&self, j: usize) -> Enclosure {
        self.table.read().expect("weight cache poisoned")[j]
    }

    /// `∫_a^b ψ^(−t)` for `0 ≤ a ≤ b`; exact on the flat part below 1.
    pub fn integral_between(&self, a: f64, b: f64) -> Result<Enclosure> {
        if !(a >= 0.0 && b >= a && b.is_finite()) {
            return Err(Error::InvalidArgument(format!("bad interval [{a}, {b}]")));
        }
        let flat_end = b.min(1.0);
        let mut total = Enclosure::ZERO;
        if a < flat_end {
            let w = self.integrand(0.0);
            total = total + Enclosure::around((flat_end - a) * w, 4.0 * f64::EPSILON * w);
        }
        let start = a.max(1.0);
        if b > start {
            total = total + integrate(|s| self.integrand(s), start, b, self.tol)?.enclosure();
        }
        Ok(total)
    }

    /// `∫_a^b ψ^(−t)` for `1 ≤ a ≤ b`, integrated in the variable `log s`.
    /// Suited to ranges spanning many decades.
    pub fn integral_log_variable(&self, a: f64, b: f64) -> Result<Enclosure> {
        if !(a >= 1.0 && b >= a && b.is_finite()) {
            return Err(Error::InvalidArgument(format!("bad interval [{a}, {b}]")));
        }
        let q = integrate(
            |v: f64| self.integrand(v.exp()) * v.exp(),
            a.ln(),
            b.ln(),
            self.tol,
        )?;
        Ok(q.enclosure())
    }

    /// `I(x) = ∫_0^x ψ^(−t)`, using the integer-point cache.
    pub fn integral_i(&self, x: f64) -> Result<Enclosure> {
        if x.is_nan() || x < 0.0 || !x.is_finite() {
            return Err(Error::InvalidArgument(format!("I undefined at x = {x}")));
        }
        if x == 0.0 {
            return Ok(Enclosure::ZERO);
        }
        if x <= 1.0 {
            let w = self.integrand(0.0);
            return Ok(Enclosure::around(x * w, 4.0 * f64::EPSILON * w));
        }
        let j = x.floor() as usize;
        self.ensure_table(j)?;
        let base = self.table_at(j);
        if x == j as f64 {
            Ok(base)
        } else {
            Ok(base + self.integral_between(j as f64, x)?)
        }
    }

    pub fn g(&self, x: f64) -> Result<Enclosure> {
        if x == 0.0 {
            return Ok(Enclosure::ONE);
        }
        Ok(self.integral_i(x)?.scale(self.k).exp_neg())
    }

    /// `σ_j = g(j) / (M·ψ(j)^t)`.
    pub fn sigma(&self, j: u64) -> Result<Enclosure> {
        if j == 0 {
            return Err(Error::InvalidArgument("weights start at j = 1".into()));
        }
        let x = j as f64;
        let den = psi_enclosure(self.psi.at(x))
            .powf_positive(self.t)
            .scale(self.big_m);
        Ok(self.g(x)?.div_positive(&den))
    }

    fn m_times_k(&self) -> Enclosure {
        Enclosure::point(self.big_m) * Enclosure::point(self.k)
    }

    /// Enclosure of `Σ_{j≥m+1} σ_j`.
    ///
    /// The summand is decreasing, so the sum lies between
    /// `∫_{m+1}^∞ h` and `h(m+1) + ∫_{m+1}^∞ h`, and the integral equals
    /// `g(m+1)/(M·k)` exactly.
    pub fn tail(&self, m: u64) -> Result<Enclosure> {
        let integral = self.g((m + 1) as f64)?.div_positive(&self.m_times_k());
        let first = self.sigma(m + 1)?;
        Ok(Enclosure::new(integral.lo, (integral + first).hi))
    }

    /// `Σ_{j=lo..=hi} σ_j` (zero when `lo > hi`).
    pub fn weight_sum(&self, lo: u64, hi: u64) -> Result<Enclosure> {
        (lo.max(1)..=hi).map(|j| self.sigma(j)).sum()
    }

    /// Tail `Σ_{j≥m+1} σ_j` with the first `n` terms summed explicitly.
    pub fn tail_sharpened(&self, m: u64, n: u64) -> Result<Enclosure> {
        Ok(self.weight_sum(m + 1, m + n)? + self.tail(m + n)?)
    }

    /// Enclosure of `σ = Σ_{j≥1} σ_j` with a head of `n` explicit terms.
    pub fn normalizer(&self, n: u64) -> Result<Enclosure> {
        self.tail_sharpened(0, n)
    }

    /// Point value of `g` for the integral-equation check; the fractional
    /// panel uses a single Gauss–Kronrod rule.
    fn g_mid(&self, s: f64) -> f64 {
        let i = if s <= 1.0 {
            s * self.integrand(0.0)
        } else {
            let j = s.floor();
            let base = self.table_at(j as usize).mid();
            if s == j {
                base
            } else {
                base + gauss_kronrod_15(&|u| self.integrand(u), j, s).0
            }
        };
        (-self.k * i).exp()
    }

    /// `(k·∫_x^{x+offset} g·ψ^(−t) + g(x+offset) − g(x)) / g(x)`.
    pub fn lemma_residual(&self, x: f64, offset: f64) -> Result<f64> {
        if !(x >= 0.0 && offset >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "bad residual window {x} + {offset}"
            )));
        }
        let end = x + offset;
        self.ensure_table(end.ceil() as usize + 1)?;
        let mut integral = 0.0;
        let mut a = x;
        while a < end {
            let b = (a.floor() + 1.0).min(end);
            integral += integrate(|s| self.g_mid(s) * self.integrand(s), a, b, self.tol)?.value;
            a = b;
        }
        let gx = self.g_mid(x);
        Ok((self.k * integral + self.g_mid(end) - gx) / gx)
    }

    /// Constants witnessing the power-law decay of `g` from the onset `x_on`.
    ///
    /// `ψ(s)/s^(1+p) = log(1/D)/s^p + log(1/A)·L/(p(p+1))` decreases on
    /// `s ≥ 1`, so for `s ≥ x_on` it sits between its limit (`A_3^(1/t)`) and
    /// its value at `x_on` (`A_2^(1/t)`, inflated slightly). Integrating
    /// `ψ^(−t) ≥ s^(−q)/A_2` from `x_on` and using `g ≤ 1` gives `A_1`.
    pub fn decay_witness(&self, x_on: f64) -> Result<DecayWitness> {
        if x_on.is_nan() || x_on < 1.0 {
            return Err(Error::InvalidArgument(format!("onset {x_on} below 1")));
        }
        let p = self.psi.p();
        let ratio = self.psi.at(x_on) / x_on.powf(1.0 + p);
        let a2 = (ratio * (1.0 + 1e-9)).powf(self.t);
        let a3 = self.psi.coefficient().powf(self.t);
        let one_minus_q = 1.0 - self.q;
        let a1 = (self.k * x_on.powf(one_minus_q) / (a2 * one_minus_q)).exp();
        Ok(DecayWitness { x_on, a1, a2, a3 })
    }

    pub fn decay_bound_check(&self, x_on: f64, samples: &[f64]) -> Result<DecayReport> {
        let w = self.decay_witness(x_on)?;
        let p = self.psi.p();
        let one_minus_q = 1.0 - self.q;
        let mut records = Vec::with_capacity(samples.len());
        for &x in samples {
            let g = self.g(x)?;
            let bound = w.a1 * (-self.k * x.powf(one_minus_q) / (w.a2 * one_minus_q)).exp();
            let psi_ok = if x >= x_on {
                let scale = x.powf(1.0 + p);
                let psi = self.psi.at(x);
                w.a3.powf(1.0 / self.t) * scale <= psi && psi <= w.a2.powf(1.0 / self.t) * scale
            } else {
                true
            };
            records.push(DecaySample {
                x,
                g_hi: g.hi,
                bound,
                passed: g.lo > 0.0 && g.hi <= bound && psi_ok,
            });
        }
        let passed = records.iter().all(|r| r.passed);
        Ok(DecayReport {
            witness: w,
            samples: records,
            passed,
        })
    }

    /// Certifies `u(s) = k·I(s) → ∞` past `x0 ≥ x_on`: the witness lower
    /// bound `u(X) − u(x0) ≥ k(X^(1−q) − x0^(1−q))/(A_2(1−q))` picks `X`
    /// with a bound of `target` (plus 1% slack), then quadrature confirms.
    pub fn divergence_witness(
        &self,
        w: &DecayWitness,
        x0: f64,
        target: f64,
    ) -> Result<(f64, Enclosure)> {
        if x0 < w.x_on {
            return Err(Error::InvalidArgument(format!(
                "x0 = {x0} below onset {}",
                w.x_on
            )));
        }
        let one_minus_q = 1.0 - self.q;
        let needed = 1.01 * target * w.a2 * one_minus_q / self.k;
        let x_big = (x0.powf(one_minus_q) + needed).powf(1.0 / one_minus_q);
        if !x_big.is_finite() {
            return Err(Error::Infeasible {
                reason: "divergence witness overflows double precision".into(),
                best_margin: f64::NEG_INFINITY,
            });
        }
        let growth = self.integral_log_variable(x0, x_big)?.scale(self.k);
        Ok((x_big, growth))
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DecayWitness {
    pub x_on: f64,
    #[serde(rename = "A1")]
    pub a1: f64,
    #[serde(rename = "A2")]
    pub a2: f64,
    #[serde(rename = "A3")]
    pub a3: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecaySample {
    pub x: f64,
    pub g_hi: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayReport {
    pub witness: DecayWitness,
    pub samples: Vec<DecaySample>,
    pub passed: bool,
}
