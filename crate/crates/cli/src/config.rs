//! Run configuration, read from a TOML file.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use peakcert::{CertificateOptions, FamilyId, GridKind, GridSpec, HypothesisConstants, Overrides};
use serde::Deserialize;

pub const DEFAULT_TERMS: u64 = 100;
pub const DEFAULT_M_MAX: u64 = 120;
pub const DEFAULT_GRID: &str = "log:1e-30:1:500";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub alpha: f64,
    pub s: f64,
    pub t: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(default)]
    pub family: Option<FamilyId>,
    #[serde(default)]
    pub quad_tol: Option<f64>,
    #[serde(default, rename = "N", alias = "terms")]
    pub terms: Option<u64>,
    #[serde(default)]
    pub m_max: Option<u64>,
    #[serde(default, rename = "D")]
    pub d: Option<f64>,
    #[serde(default, rename = "M")]
    pub m: Option<f64>,
    #[serde(default, rename = "L")]
    pub l: Option<f64>,
    #[serde(default)]
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub kind: GridKind,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Default destinations; `--out` overrides the one the command writes.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub report: Option<PathBuf>,
    pub series: Option<PathBuf>,
    pub table: Option<PathBuf>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Config =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.hypothesis()?;
        if let Some(tol) = cfg.quad_tol {
            anyhow::ensure!(
                tol > 0.0 && tol < 1e-3,
                "quad_tol = {tol} outside (0, 1e-3)"
            );
        }
        anyhow::ensure!(cfg.terms != Some(0), "N must be at least 1");
        anyhow::ensure!(cfg.m_max.is_none_or(|m| m >= 3), "m_max must be at least 3");
        Ok(cfg)
    }

    pub fn hypothesis(&self) -> peakcert::Result<HypothesisConstants> {
        HypothesisConstants::new(self.alpha, self.s, self.t, self.a, self.c)
    }

    pub fn overrides(&self) -> Overrides {
        Overrides {
            d: self.d,
            m: self.m,
            l: self.l,
        }
    }

    pub fn family(&self) -> FamilyId {
        self.family.unwrap_or(FamilyId::Synthetic)
    }

    pub fn certificate_options(&self, m_max: Option<u64>) -> CertificateOptions {
        let mut opts = CertificateOptions {
            m_max: m_max.or(self.m_max).unwrap_or(DEFAULT_M_MAX),
            ..CertificateOptions::default()
        };
        if let Some(tol) = self.quad_tol {
            opts.quad_tol = tol;
        }
        opts
    }

    pub fn grid(&self, flag: Option<&str>) -> Result<GridSpec> {
        if let Some(g) = flag {
            return Ok(g.parse()?);
        }
        match &self.grid {
            Some(g) => Ok(GridSpec::new(g.kind, g.lo, g.hi, g.count)?),
            None => Ok(DEFAULT_GRID.parse()?),
        }
    }
}
