use std::path::Path;

use serde::Deserialize;

use super::{checks, runs};
use crate::analysis::PhaseThresholds;
use crate::error::{Error, Result};

/// Contents of a `--config` file.
///
/// ```toml
/// threads = 4
///
/// [sweep]
/// grid = "circle"
/// angles = 180
/// seeds = 8
/// steps = 1000000
///
/// [thresholds]
/// diffusive = [0.45, 0.55]
/// ```
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub threads: Option<usize>,
    pub(crate) run: Option<runs::RunArgs>,
    pub(crate) classify: Option<runs::ClassifyArgs>,
    pub(crate) sweep: Option<runs::SweepArgs>,
    pub(crate) stuck_scan: Option<runs::StuckScanArgs>,
    pub(crate) gibbs_check: Option<checks::GibbsArgs>,
    pub(crate) coupling_check: Option<checks::CouplingArgs>,
    #[serde(default)]
    pub thresholds: PhaseThresholds,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }
}
