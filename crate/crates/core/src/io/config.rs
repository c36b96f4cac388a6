//! TOML run configuration.
//!
//! ```toml
//! version = 1
//! seed = 42
//! output_dir = "out"
//!
//! [basis]
//! dim = 1
//! modes_per_axis = 16
//!
//! [profile]
//! damping_linear = 1.0
//! damping_quintic = 1.0
//! source = [[1.0, 5.0]]   # (coefficient, exponent) pairs
//!
//! [forcing]
//! preset = "mode1"
//! norm = 0.5
//!
//! [solver]
//! dt = 0.01
//! t_end = 10.0
//!
//! [initial]
//! kind = "random"
//! radius = 2.0
//!
//! [experiment]
//! name = "absorb"
//! r0 = 5.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{member_rng, AbsorbingParams, AttractorParams, QuasiParams};
use crate::model::{AuditedProfile, Forcing, NonlinearityProfile, PowerTerm, DEFAULT_AUDIT_RANGE, DEFAULT_AUDIT_SAMPLES};
use crate::solver::{project_state, random_state, SolverConfig};
use crate::spectral::{BasisDescriptor, SpectralBasis, SpectralState};

pub const CONFIG_VERSION: u32 = 1;
/// Largest modes per axis accepted for three-dimensional runs.
pub const MAX_3D_MODES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub basis: BasisDescriptor,
    pub profile: ProfileConfig,
    #[serde(default)]
    pub forcing: ForcingConfig,
    pub solver: SolverConfig,
    #[serde(default)]
    pub initial: InitialData,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
}

fn default_output() -> PathBuf {
    PathBuf::from("dampwave-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    #[serde(default)]
    pub damping_linear: f64,
    pub damping_quintic: f64,
    /// `(a, p)` pairs for the terms `a|s|^{p-1}s`.
    #[serde(default)]
    pub source: Vec<(f64, f64)>,
    #[serde(default = "default_range")]
    pub audit_range: f64,
    #[serde(default = "default_samples")]
    pub audit_samples: usize,
}

fn default_range() -> f64 {
    DEFAULT_AUDIT_RANGE
}
fn default_samples() -> usize {
    DEFAULT_AUDIT_SAMPLES
}

impl ProfileConfig {
    pub fn profile(&self) -> NonlinearityProfile {
        NonlinearityProfile::new(
            self.damping_linear,
            self.damping_quintic,
            self.source.iter().map(|&(a, p)| PowerTerm::new(a, p)).collect(),
        )
    }

    pub fn audit(&self, lambda1: f64) -> Result<AuditedProfile> {
        self.profile().audit_with(lambda1, self.audit_range, self.audit_samples)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcingConfig {
    #[default]
    Zero,
    /// `h = norm·φ_{(1,…,1)}`
    Mode1 { norm: f64 },
    Coeffs { coeffs: Vec<f64> },
}

impl ForcingConfig {
    pub fn build(&self, basis: &SpectralBasis) -> Result<Forcing> {
        match self {
            ForcingConfig::Zero => Ok(Forcing::zero(basis)),
            ForcingConfig::Mode1 { norm } => Forcing::principal_mode(basis, *norm),
            ForcingConfig::Coeffs { coeffs } => Forcing::from_coeffs(basis, coeffs.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    #[default]
    Zero,
    /// Random modal data with `‖U₀‖_H = radius`, drawn from the run seed.
    Random { radius: f64 },
    /// `u₀ = a Π sin xᵢ`, `u₁ = b Π sin xᵢ(1 + cos xᵢ/2)`.
    Sine {
        #[serde(default)]
        u_amplitude: f64,
        #[serde(default)]
        v_amplitude: f64,
    },
    Modal { u: Vec<f64>, v: Vec<f64> },
    Checkpoint { path: PathBuf },
}

impl InitialData {
    pub fn build(&self, basis: &SpectralBasis, seed: u64) -> Result<SpectralState> {
        let state = match self {
            InitialData::Zero => SpectralState::zeros(basis),
            InitialData::Random { radius } => {
                if !(*radius >= 0.0 && radius.is_finite()) {
                    return Err(Error::Config {
                        key: "initial.radius".into(),
                        message: "must be finite and nonnegative".into(),
                    });
                }
                random_state(basis, &mut member_rng(seed, 0), *radius)
            }
            InitialData::Sine { u_amplitude, v_amplitude } => {
                let (a, b) = (*u_amplitude, *v_amplitude);
                project_state(
                    basis,
                    |x| a * x.iter().map(|t| t.sin()).product::<f64>(),
                    |x| b * x.iter().map(|t| t.sin() * (1.0 + 0.5 * t.cos())).product::<f64>(),
                )
            }
            InitialData::Modal { u, v } => SpectralState::new(basis, u.clone(), v.clone())?,
            InitialData::Checkpoint { path } => {
                let cp = super::checkpoint::Checkpoint::load(path)?;
                if cp.basis != basis.descriptor() {
                    return Err(Error::Checkpoint("checkpoint basis differs from the configured basis".into()));
                }
                cp.state
            }
        };
        state.check_finite()?;
        Ok(state)
    }
}

fn default_eps0() -> f64 {
    0.16
}
fn default_levels() -> usize {
    5
}
fn default_gap() -> f64 {
    1e-4
}
fn default_lip_radius() -> f64 {
    2.0
}
fn default_starts() -> usize {
    16
}
fn default_true() -> bool {
    true
}
fn default_s() -> f64 {
    1.0
}
fn default_dim_samples() -> usize {
    1000
}
fn default_radius_count() -> usize {
    8
}

/// Experiment block; `name` selects the driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Simulate {},
    EnergyAudit {
        /// Step sizes for an order study; empty runs only the configured step.
        #[serde(default)]
        dts: Vec<f64>,
    },
    Steklov {
        #[serde(default = "default_eps0")]
        eps0: f64,
        #[serde(default = "default_levels")]
        levels: usize,
    },
    Lipschitz {
        #[serde(default = "default_gap")]
        gap: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        second_gap: Option<f64>,
        #[serde(default = "default_lip_radius")]
        radius: f64,
    },
    Absorb(AbsorbingParams),
    Quasistab(QuasiParams),
    Stationary {
        #[serde(default = "default_starts")]
        starts: usize,
        #[serde(default = "default_true")]
        check_uniqueness: bool,
    },
    Attractor(AttractorParams),
    Dimension {
        #[serde(default)]
        ensemble_size: Option<usize>,
        #[serde(default)]
        r0: Option<f64>,
        #[serde(default)]
        burn_in: Option<f64>,
        #[serde(default = "default_dim_samples")]
        sample_count: usize,
        /// Radii span `[radius_lo, radius_hi]`; both default to fractions of the cloud diameter.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius_lo: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius_hi: Option<f64>,
        #[serde(default = "default_radius_count")]
        radius_count: usize,
    },
    Holder {
        #[serde(default = "default_s")]
        s: f64,
        #[serde(default)]
        burn_in: f64,
    },
    Selftest {},
}

pub const EXPERIMENT_NAMES: [&str; 11] = [
    "simulate",
    "energy-audit",
    "steklov",
    "lipschitz",
    "absorb",
    "quasistab",
    "stationary",
    "attractor",
    "dimension",
    "holder",
    "selftest",
];

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Simulate {} => "simulate",
            Experiment::EnergyAudit { .. } => "energy-audit",
            Experiment::Steklov { .. } => "steklov",
            Experiment::Lipschitz { .. } => "lipschitz",
            Experiment::Absorb(_) => "absorb",
            Experiment::Quasistab(_) => "quasistab",
            Experiment::Stationary { .. } => "stationary",
            Experiment::Attractor(_) => "attractor",
            Experiment::Dimension { .. } => "dimension",
            Experiment::Holder { .. } => "holder",
            Experiment::Selftest {} => "selftest",
        }
    }

    /// The experiment with every parameter at its default.
    pub fn from_name(name: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Wrap {
            experiment: Experiment,
        }
        let text = format!("[experiment]\nname = {:?}\n", name);
        toml::from_str::<Wrap>(&text)
            .map(|w| w.experiment)
            .map_err(|_| Error::Config {
                key: "experiment.name".into(),
                message: format!("unknown experiment `{name}`; expected one of {}", EXPERIMENT_NAMES.join(", ")),
            })
    }
}

/// Everything a driver needs, built from a validated config.
pub struct Prepared {
    pub basis: SpectralBasis,
    pub profile: AuditedProfile,
    pub forcing: Forcing,
}

impl RunConfig {
    /// Builds the basis, audits the profile and checks every block.
    pub fn prepare(&self) -> Result<Prepared> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config {
                key: "version".into(),
                message: format!("unsupported version {}; expected {CONFIG_VERSION}", self.version),
            });
        }
        let b = self.basis;
        if b.dim == 3 && b.modes_per_axis > MAX_3D_MODES {
            return Err(Error::Refused(format!(
                "3D runs are limited to {MAX_3D_MODES} modes per axis (got {})",
                b.modes_per_axis
            )));
        }
        let basis = b.build().map_err(|e| Error::Config {
            key: "basis".into(),
            message: e.to_string(),
        })?;
        self.solver.validate().map_err(|e| Error::Config {
            key: "solver".into(),
            message: e.to_string(),
        })?;
        let profile = match self.profile.audit(basis.lambda1()) {
            Err(Error::InvalidProfile(m)) => {
                return Err(Error::Config {
                    key: "profile".into(),
                    message: m,
                })
            }
            other => other?,
        };
        let forcing = self.forcing.build(&basis).map_err(|e| Error::Config {
            key: "forcing".into(),
            message: e.to_string(),
        })?;
        Ok(Prepared { basis, profile, forcing })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        parse_config(&std::fs::read_to_string(path)?)
    }
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

/// Parses and validates a config; the profile audit runs eagerly.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        let message = e.message().to_string();
        match message.strip_prefix("unknown field `").and_then(|r| r.split('`').next()) {
            Some(key) => Error::Config {
                key: key.to_string(),
                message: format!("unknown key at line {line}, column {column}: {message}"),
            },
            None => Error::Parse { line, column, message },
        }
    })?;
    cfg.prepare()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
version = 1

[basis]
dim = 1
modes_per_axis = 8

[profile]
damping_linear = 1.0
damping_quintic = 1.0
source = [[1.0, 5.0]]

[solver]
dt = 0.01
t_end = 1.0
"#;

    #[test]
    fn minimal_config_parses() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.basis.modes_per_axis, 8);
        assert_eq!(c.forcing, ForcingConfig::Zero);
        assert!(c.experiment.is_none());
    }

    #[test]
    fn round_trip_is_identical() {
        let mut c = parse_config(MINIMAL).unwrap();
        c.forcing = ForcingConfig::Coeffs {
            coeffs: (0..8).map(|i| 0.1 / (i as f64 + 3.0)).collect(),
        };
        c.experiment = Some(Experiment::Absorb(AbsorbingParams::new(4, 1.0 / 3.0)));
        c.initial = InitialData::Sine {
            u_amplitude: 0.1,
            v_amplitude: std::f64::consts::PI,
        };
        let again = parse_config(&c.to_toml()).unwrap();
        assert_eq!(c, again);
        for name in EXPERIMENT_NAMES {
            c.experiment = Some(Experiment::from_name(name).unwrap());
            assert_eq!(parse_config(&c.to_toml()).unwrap(), c, "{name}");
        }
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace("dt = 0.01", "dt = 0.01\nstep = 2");
        match parse_config(&text) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "step"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_position() {
        let text = MINIMAL.replace("dim = 1", "dim = = 1");
        match parse_config(&text) {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 5);
                assert!(column > 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dissipativity_violation_reported() {
        let text = MINIMAL.replace("source = [[1.0, 5.0]]", "source = [[-2.0, 1.0]]");
        match parse_config(&text) {
            Err(Error::AssumptionViolation { inequality, .. }) => assert_eq!(inequality, "hyp-inf-f"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn large_3d_basis_refused() {
        let text = MINIMAL.replace("dim = 1\nmodes_per_axis = 8", "dim = 3\nmodes_per_axis = 9");
        assert!(matches!(parse_config(&text), Err(Error::Refused(_))));
        let ok = MINIMAL.replace("dim = 1\nmodes_per_axis = 8", "dim = 3\nmodes_per_axis = 4");
        assert!(parse_config(&ok).is_ok());
    }

    #[test]
    fn unknown_experiment_name() {
        assert!(Experiment::from_name("nope").is_err());
        assert_eq!(Experiment::from_name("energy-audit").unwrap().name(), "energy-audit");
    }
}
