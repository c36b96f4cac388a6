use serde::{Deserialize, Serialize};

use super::report::{BoundCheck, ExperimentReport};
use super::stationary::{stationary_set, StationaryOptions, StationaryState};
use super::{ensemble_states, DEFAULT_ENSEMBLE};
use crate::diagnostics::{energy_audit, gradient_check, GradientCheck};
use crate::error::{Error, Result};
use crate::par;
use crate::solver::{GalerkinSystem, SolverConfig};
use crate::spectral::{SpectralBasis, SpectralState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttractorParams {
    #[serde(default = "default_ensemble")]
    pub ensemble_size: usize,
    #[serde(default = "default_r0")]
    pub r0: f64,
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    /// Total number of states kept across the ensemble.
    #[serde(default = "default_samples")]
    pub sample_count: usize,
    #[serde(default = "default_starts")]
    pub stationary_starts: usize,
}

fn default_ensemble() -> usize {
    DEFAULT_ENSEMBLE
}
fn default_starts() -> usize {
    16
}
fn default_r0() -> f64 {
    2.0
}
fn default_burn_in() -> f64 {
    10.0
}
fn default_samples() -> usize {
    1000
}

impl Default for AttractorParams {
    fn default() -> Self {
        Self {
            ensemble_size: default_ensemble(),
            r0: default_r0(),
            burn_in: default_burn_in(),
            sample_count: default_samples(),
            stationary_starts: default_starts(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttractorSample {
    pub cloud: Vec<SpectralState>,
    pub stationary: Vec<StationaryState>,
    /// `dist_H(U, N)` for each cloud point.
    pub distances: Vec<f64>,
    /// `dist_H(U(T), N)` for each member.
    pub final_distances: Vec<f64>,
    pub gradient: Vec<GradientCheck>,
}

impl AttractorSample {
    pub fn max_distance(&self) -> f64 {
        self.distances.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_final_distance(&self) -> f64 {
        self.final_distances.iter().copied().fold(0.0, f64::max)
    }

    pub fn energy_monotone(&self) -> bool {
        self.gradient.iter().all(|g| g.monotone_ok)
    }

    pub fn report(&self) -> ExperimentReport {
        let worst_increase = self
            .gradient
            .iter()
            .map(|g| g.max_energy_increase - g.tolerance)
            .fold(f64::NEG_INFINITY, f64::max);
        ExperimentReport::new("attractor")
            .input("cloud_size", self.cloud.len())
            .fit("stationary_states", self.stationary.len() as f64)
            .fit("max_distance", self.max_distance())
            .fit("max_final_distance", self.max_final_distance())
            .bound(BoundCheck::upper(
                "energy nonincreasing",
                "max_n E(t_n+1) - E(t_n) - tol",
                0.0,
                worst_increase,
            ))
            .note("distances are to the stationary states found, with no completeness claim")
    }
}

/// `dist_H(U, {(u*, 0)})`.
pub fn distance_to_set(basis: &SpectralBasis, state: &SpectralState, set: &[StationaryState]) -> f64 {
    let lam = basis.eigenvalues();
    let vel: f64 = state.v.iter().map(|x| x * x).sum();
    set.iter()
        .map(|s| {
            let g: f64 = lam
                .iter()
                .zip(&state.u)
                .zip(&s.u)
                .map(|((l, a), b)| l * (a - b) * (a - b))
                .sum();
            (g + vel).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn attractor_sample(
    system: &GalerkinSystem<'_>,
    config: &SolverConfig,
    params: &AttractorParams,
    seed: u64,
) -> Result<AttractorSample> {
    if params.ensemble_size == 0 || params.sample_count == 0 {
        return Err(Error::InvalidInput("ensemble_size and sample_count must be positive".into()));
    }
    if !(params.burn_in >= 0.0 && params.burn_in < config.t_end) {
        return Err(Error::InvalidInput("burn_in must lie in [0, t_end)".into()));
    }
    let stationary = stationary_set(
        system,
        params.stationary_starts,
        &StationaryOptions {
            check_uniqueness: false,
            seed,
            ..StationaryOptions::default()
        },
    )?;
    let initial = ensemble_states(system.basis, params.ensemble_size, params.r0, seed);
    let runs = par::try_map(&initial, |s| {
        let traj = system.simulate(s, config)?;
        let ledger = energy_audit(&traj, system)?;
        let check = gradient_check(&ledger, config.dt);
        let kept: Vec<SpectralState> = traj
            .snapshots
            .into_iter()
            .filter(|s| s.time >= params.burn_in)
            .collect();
        Ok::<_, Error>((kept, check))
    })?;
    let per_member = params.sample_count.div_ceil(params.ensemble_size);
    let mut cloud = Vec::with_capacity(params.sample_count);
    let mut gradient = Vec::with_capacity(runs.len());
    let mut final_distances = Vec::with_capacity(runs.len());
    for (kept, check) in runs {
        gradient.push(check);
        if let Some(last) = kept.last() {
            final_distances.push(distance_to_set(system.basis, last, &stationary));
        }
        let stride = (kept.len() / per_member.max(1)).max(1);
        cloud.extend(kept.into_iter().rev().step_by(stride).take(per_member));
    }
    cloud.truncate(params.sample_count);
    let distances = par::map(&cloud, |s| distance_to_set(system.basis, s, &stationary));
    Ok(AttractorSample {
        cloud,
        stationary,
        distances,
        final_distances,
        gradient,
    })
}
