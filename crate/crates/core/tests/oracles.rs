//! Reference values computed independently (high-precision quadrature and
//! direct summation to j = 20000 with an Euler–Maclaurin remainder) under
//! alpha = 0.5, s = 1, t = 0.75, A = 0.5, C = 2, D = 0.1, M = 4, L = 5.

use approx::assert_relative_eq;
use peakcert::hypothesis::derive_pq;
use peakcert::{DerivedConstants, HypothesisConstants, Overrides, Schedule, WeightEngine};

fn reference() -> (HypothesisConstants, DerivedConstants) {
    let h = HypothesisConstants::new(0.5, 1.0, 0.75, 0.5, 2.0).unwrap();
    DerivedConstants::derive(&h, &Overrides::default(), 120).unwrap()
}

fn engine() -> WeightEngine {
    let (h, d) = reference();
    WeightEngine::new(&h, &d, 1e-10).unwrap()
}

fn psi(x: f64) -> f64 {
    let x = x.max(1.0);
    x * 10f64.ln() + 2f64.ln() * 5.0 * x.powf(1.25) / (0.25 * 1.25)
}

#[test]
fn derived_reference_constants() {
    let (_, d) = reference();
    assert_eq!((d.d, d.m, d.l), (0.1, 4.0, 5.0));
    assert_relative_eq!(d.p, 0.25, max_relative = 1e-15);
    assert_relative_eq!(d.q, 0.9375, max_relative = 1e-15);
    assert_relative_eq!(d.k, 0.0625, max_relative = 1e-15);
    let (p, q) = derive_pq(0.75, 4.0).unwrap();
    assert!(((1.0 + p) * 0.75 - q).abs() <= 1e-12);
    assert!(((1.0 - q) - p / 4.0).abs() <= 1e-12);
}

#[test]
fn majorant_values() {
    let e = engine();
    assert_relative_eq!(
        e.majorant().at(1.0),
        13.392_939_981_953_17,
        max_relative = 1e-14
    );
    assert_relative_eq!(
        e.majorant().at(2.0),
        30.982_628_069_698_899,
        max_relative = 1e-14
    );
    assert_eq!(e.majorant().at(0.3), e.majorant().at(1.0));
}

#[test]
fn integral_and_decay_profile() {
    let e = engine();
    let cases = [
        (0.5, 0.071_418_884_459_340_8),
        (1.0, 0.142_837_768_918_681_63),
        (2.0, 0.245_114_432_829_449_37),
        (5.0, 0.390_484_920_964_056_3),
        (10.0, 0.508_298_033_909_179_8),
        (50.0, 0.808_713_391_235_446_6),
    ];
    for (x, expected) in cases {
        let i = e.integral_i(x).unwrap();
        assert!(
            (i.mid() - expected).abs() <= 1e-9 * expected,
            "I({x}) = {i}, expected {expected}"
        );
    }
    assert_relative_eq!(
        e.g(2.0).unwrap().mid(),
        0.984_797_096_873_019,
        max_relative = 1e-9
    );
    assert_relative_eq!(
        e.g(10.0).unwrap().mid(),
        0.968_730_694_162_776_6,
        max_relative = 1e-9
    );
}

/// `ψ^(−t)` is decreasing on `[1, ∞)`, so left and right Riemann sums bracket
/// the integral.
#[test]
fn integral_within_riemann_brackets() {
    let e = engine();
    let f = |u: f64| psi(u).powf(-0.75);
    for x in [3.0, 10.0, 37.5] {
        let n = 200_000;
        let h = (x - 1.0) / n as f64;
        let (mut lower, mut upper) = (f(1.0), f(1.0));
        for i in 0..n {
            let a = 1.0 + i as f64 * h;
            upper += h * f(a);
            lower += h * f(a + h);
        }
        let i = e.integral_i(x).unwrap();
        assert!(
            lower <= i.hi && i.lo <= upper,
            "I({x}) = {i} outside [{lower}, {upper}]"
        );
    }
}

#[test]
fn weights() {
    let e = engine();
    assert_relative_eq!(
        e.sigma(1).unwrap().mid(),
        0.035_392_069_919_921_124,
        max_relative = 1e-9
    );
    assert_relative_eq!(
        e.sigma(10).unwrap().mid(),
        0.004_236_097_703_763_028,
        max_relative = 1e-9
    );
    assert_relative_eq!(
        e.sigma(100).unwrap().mid(),
        0.000_492_868_605_096_913_4,
        max_relative = 1e-8
    );
}

#[test]
fn tails_contain_direct_sums() {
    let e = engine();
    let sums = [
        (0, 3.984_657_224_120_081_5),
        (1, 3.949_265_154_200_16),
        (10, 3.872_837_485_675_211),
        (100, 3.769_158_962_507_418),
        (1000, 3.647_912_656_777_514_4),
    ];
    for (m, sum) in sums {
        let t = e.tail(m).unwrap();
        assert!(t.contains(sum), "tail({m}) = {t} misses {sum}");
        let sharp = e.tail_sharpened(m, 200).unwrap();
        assert!(
            sharp.contains(sum),
            "sharpened tail({m}) = {sharp} misses {sum}"
        );
    }
    let t0 = e.tail(0).unwrap();
    assert_relative_eq!(t0.lo, 3.964_449_480_032_977_5, max_relative = 1e-9);
    assert_relative_eq!(t0.hi, 3.999_841_549_952_898_8, max_relative = 1e-9);
}

#[test]
fn normalizer_refines_consistently() {
    let e = engine();
    let coarse = e.normalizer(1000).unwrap();
    let fine = e.normalizer(10_000).unwrap();
    assert!(coarse.relative_width() <= 1e-3);
    assert!(coarse.contains_enclosure(&fine), "{coarse} vs {fine}");
    assert!(fine.contains(3.984_657_224_120_081_5));
}

#[test]
fn radii_follow_the_recursion() {
    let (h, d) = reference();
    let s = Schedule::new(&h, &d);
    // log(1/ε_k) = log(1/D) + S_k·log(1/A) with S_k = Σ_{j≤k} j^(p−1)
    let mut partial = 0.0;
    let mut log_inv_r = 10f64.ln();
    for m in 1..=200u64 {
        if m > 1 {
            partial += ((m - 1) as f64).powf(-0.75);
            log_inv_r += 2f64.ln() + 10f64.ln() + partial * 2f64.ln();
        }
        assert_relative_eq!(s.log_inv_radius(m), log_inv_r, max_relative = 1e-12);
        assert_relative_eq!(
            s.log_inv_radius_closed_form(m),
            log_inv_r,
            max_relative = 1e-9
        );
    }
    assert_eq!(s.log_inv_radius(1), std::f64::consts::LN_10);
    assert_relative_eq!(
        s.log_inv_radius(2),
        5.991_464_547_107_982,
        max_relative = 1e-14
    );
}

#[test]
fn claim_inequalities_at_the_ends() {
    let e = engine();
    let (h, _) = reference();
    let lhs1 = (2.0 * psi(1.0).powf(0.75) - 1.0) * 0.035_392_069_919_921_124;
    assert_relative_eq!(lhs1, 0.4602, epsilon = 1e-4);
    let t1 = e.tail(1).unwrap();
    assert!(lhs1 < 0.5 * (1.0 - h.alpha) * t1.lo);
    let small = 0.05 * e.sigma(1).unwrap().hi;
    assert_relative_eq!(small, 0.001_77, epsilon = 1e-5);
    assert!(small < 0.25 * e.tail(2).unwrap().lo);
}
