//! Certified construction of peak functions from approximate barriers whose
//! sup-norms grow like `C·log^t(1/r)`.
//!
//! The pipeline: [`hypothesis`] derives the construction's constants,
//! [`schedule`] produces the shrinking neighborhoods, [`weights`] the series
//! weights with closed-form tail enclosures, [`certificates`] checks every
//! inequality the construction relies on, [`families`] supplies concrete
//! barriers and [`series`] assembles and evaluates the peak function.

pub mod certificates;
pub mod enclosure;
pub mod error;
pub mod families;
pub mod hypothesis;
pub mod quadrature;
pub mod schedule;
pub mod series;
pub mod weights;

pub use certificates::{run_all, CertificateOptions, CertificateReport, CheckRecord};
pub use enclosure::Enclosure;
pub use error::{Error, Result};
pub use families::{
    audit_family, make_family, AuditReport, BarrierFamily, DiskExponentialFamily, DomainModel,
    FamilyId, Point, SyntheticFamily,
};
pub use hypothesis::{DerivedConstants, HypothesisConstants, Overrides};
pub use schedule::{Majorant, Schedule};
pub use series::{BuildOptions, CaseLabel, FValue, GridKind, GridSpec, PeakSeries, VerifyReport};
pub use weights::WeightEngine;
