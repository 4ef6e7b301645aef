//! Shared fixtures for the benchmarks.

use peakcert::{
    BuildOptions, DerivedConstants, HypothesisConstants, Overrides, PeakSeries, SyntheticFamily,
};

/// `alpha = 0.5, s = 1, t = 0.75, A = 0.5, C = 2` with its derived constants.
pub fn reference() -> (HypothesisConstants, DerivedConstants) {
    let h = HypothesisConstants::new(0.5, 1.0, 0.75, 0.5, 2.0).expect("valid constants");
    DerivedConstants::derive(&h, &Overrides::default(), 120).expect("derivable constants")
}

/// Synthetic-family series with `terms` explicit terms.
pub fn synthetic_series(terms: u64) -> PeakSeries {
    let (h, d) = reference();
    let fam = SyntheticFamily::new(h, d.d).expect("family");
    let opts = BuildOptions {
        terms,
        ..Default::default()
    };
    PeakSeries::build(Box::new(fam), d, &opts).expect("series builds")
}
