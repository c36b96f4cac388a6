use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ProfileConfig;
use crate::error::{Error, Result};
use crate::solver::SolverConfig;
use crate::spectral::{BasisDescriptor, SpectralState};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Restartable solver state. Floats round-trip bit-exactly through JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub basis: BasisDescriptor,
    pub profile: ProfileConfig,
    pub forcing: Vec<f64>,
    pub solver: SolverConfig,
    pub state: SpectralState,
}

impl Checkpoint {
    pub fn new(
        basis: BasisDescriptor,
        profile: ProfileConfig,
        forcing: Vec<f64>,
        solver: SolverConfig,
        state: SpectralState,
    ) -> Self {
        Self {
            format_version: CHECKPOINT_VERSION,
            basis,
            profile,
            forcing,
            solver,
            state,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        self.state.check_finite()?;
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cp: Checkpoint = serde_json::from_str(text)?;
        if cp.format_version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "format version {} is not supported (expected {CHECKPOINT_VERSION})",
                cp.format_version
            )));
        }
        let basis = cp.basis.build()?;
        cp.state.check(&basis)?;
        if cp.forcing.len() != basis.len() {
            return Err(Error::Checkpoint("forcing length does not match the basis".into()));
        }
        Ok(cp)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
