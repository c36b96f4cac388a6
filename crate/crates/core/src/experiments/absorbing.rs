use serde::{Deserialize, Serialize};

use super::report::{BoundCheck, ExperimentReport};
use super::{ensemble_states, DEFAULT_ENSEMBLE};
use crate::diagnostics::{energy_audit, gradient_check, GradientCheck};
use crate::error::{Error, Result};
use crate::par;
use crate::solver::{GalerkinSystem, SolverConfig, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorbingParams {
    #[serde(default = "default_ensemble")]
    pub ensemble_size: usize,
    /// Initial data satisfy `‖U₀‖_H ≤ r0`.
    #[serde(default = "default_r0")]
    pub r0: f64,
    /// Time the state must stay below the threshold to count as entry.
    #[serde(default = "default_dwell")]
    pub dwell: f64,
    /// Required `‖U(T)‖²_H / ‖U(0)‖²_H` when the threshold is zero.
    #[serde(default = "default_decay")]
    pub decay_ratio: f64,
}

fn default_ensemble() -> usize {
    DEFAULT_ENSEMBLE
}
fn default_r0() -> f64 {
    5.0
}
fn default_dwell() -> f64 {
    1.0
}
fn default_decay() -> f64 {
    1e-2
}

impl Default for AbsorbingParams {
    fn default() -> Self {
        Self::new(default_ensemble(), default_r0())
    }
}

impl AbsorbingParams {
    pub fn new(ensemble_size: usize, r0: f64) -> Self {
        Self {
            ensemble_size,
            r0,
            dwell: default_dwell(),
            decay_ratio: default_decay(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemberOutcome {
    pub initial_norm_sq: f64,
    pub final_norm_sq: f64,
    /// First time after which the state stays below the threshold for `dwell`.
    pub entry_time: Option<f64>,
    pub exited_after_entry: bool,
    /// `max_{t ∈ [0.9T, T]} ‖U(t)‖²_H`
    pub limsup_proxy: f64,
    pub gradient: GradientCheck,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AbsorbingResult {
    /// `L = ‖h‖²/(ωλ₁) + C_ν|Ω|`
    pub l_const: f64,
    /// `R² = 2^{14/3} L / ω`
    pub radius_sq: f64,
    pub t_end: f64,
    pub members: Vec<MemberOutcome>,
    pub decay_mode: bool,
    pub decay_ratio: f64,
}

impl AbsorbingResult {
    pub fn passed(&self) -> bool {
        if self.decay_mode {
            self.members
                .iter()
                .all(|m| m.final_norm_sq <= self.decay_ratio * m.initial_norm_sq)
        } else {
            self.members.iter().all(|m| {
                m.entry_time.is_some() && !m.exited_after_entry && m.limsup_proxy <= self.radius_sq
            })
        }
    }

    /// Largest `‖U(T)‖²_H / ‖U(0)‖²_H` over the ensemble.
    pub fn worst_decay(&self) -> f64 {
        self.members
            .iter()
            .map(|m| m.final_norm_sq / m.initial_norm_sq.max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }

    pub fn max_limsup(&self) -> f64 {
        self.members.iter().map(|m| m.limsup_proxy).fold(0.0, f64::max)
    }

    pub fn report(&self) -> ExperimentReport {
        let mut r = ExperimentReport::new("absorb")
            .input("t_end", self.t_end)
            .input("ensemble_size", self.members.len())
            .fit("L", self.l_const)
            .fit("radius_sq", self.radius_sq)
            .fit("max_limsup_proxy", self.max_limsup());
        if self.decay_mode {
            let worst = self.worst_decay();
            r = r
                .note("threshold is zero: checking decay to the trivial attractor")
                .bound(BoundCheck::upper(
                    "trivial attractor decay",
                    "|U(T)|_H^2 / |U(0)|_H^2",
                    self.decay_ratio,
                    worst,
                ));
        } else {
            let last_entry = self
                .members
                .iter()
                .map(|m| m.entry_time.unwrap_or(f64::INFINITY))
                .fold(0.0, f64::max);
            r = r
                .fit("latest_entry_time", last_entry)
                .bound(BoundCheck::upper(
                    "absorbing radius",
                    "limsup |U(t)|_H^2 <= 2^(14/3) L / omega",
                    self.radius_sq,
                    self.max_limsup(),
                ))
                .require(
                    self.members.iter().all(|m| m.entry_time.is_some()),
                    "every member enters the ball with dwell",
                )
                .require(
                    self.members.iter().all(|m| !m.exited_after_entry),
                    "no member leaves the ball after entry",
                );
        }
        r
    }
}

/// `(L, R²)` from the audited constants and `‖h‖`.
pub fn absorbing_radius(system: &GalerkinSystem<'_>) -> (f64, f64) {
    let c = system.profile.report();
    let h2 = system.forcing.norm().powi(2);
    let l = h2 / (c.omega * c.lambda1) + c.c_nu * system.basis.domain_volume();
    (l, 2f64.powf(14.0 / 3.0) * l / c.omega)
}

/// Entry time with dwell, and whether the state later leaves the ball.
pub fn entry_analysis(times: &[f64], norms: &[f64], radius_sq: f64, dwell: f64) -> (Option<f64>, bool) {
    let t_end = *times.last().unwrap_or(&0.0);
    let mut entry = None;
    let mut i = 0;
    while i < times.len() {
        if times[i] + dwell > t_end + 1e-12 {
            break;
        }
        let stays = times
            .iter()
            .zip(norms)
            .skip(i)
            .take_while(|(t, _)| **t <= times[i] + dwell + 1e-12)
            .all(|(_, n)| *n <= radius_sq);
        if stays {
            entry = Some(i);
            break;
        }
        i += 1;
    }
    match entry {
        None => (None, false),
        Some(i) => {
            let exited = norms[i..].iter().any(|n| *n > radius_sq * (1.0 + 1e-6));
            (Some(times[i]), exited)
        }
    }
}

fn member_outcome(
    traj: &Trajectory,
    system: &GalerkinSystem<'_>,
    radius_sq: f64,
    dwell: f64,
) -> Result<MemberOutcome> {
    let basis = system.basis;
    let norms = traj
        .snapshots
        .iter()
        .map(|s| basis.h_norms(s).map(|n| n.energy_sq))
        .collect::<Result<Vec<_>>>()?;
    let times = traj.times();
    let t_end = *times.last().unwrap();
    let t0 = times[0];
    let limsup_proxy = times
        .iter()
        .zip(&norms)
        .filter(|(t, _)| **t >= t0 + 0.9 * (t_end - t0) - 1e-12)
        .map(|(_, n)| *n)
        .fold(0.0, f64::max);
    let (entry_time, exited_after_entry) = entry_analysis(&times, &norms, radius_sq, dwell);
    let ledger = energy_audit(traj, system)?;
    Ok(MemberOutcome {
        initial_norm_sq: norms[0],
        final_norm_sq: *norms.last().unwrap(),
        entry_time,
        exited_after_entry,
        limsup_proxy,
        gradient: gradient_check(&ledger, traj.dt),
    })
}

pub fn absorbing_ball(
    system: &GalerkinSystem<'_>,
    config: &SolverConfig,
    params: &AbsorbingParams,
    seed: u64,
) -> Result<AbsorbingResult> {
    if params.ensemble_size == 0 || !(params.r0 > 0.0) {
        return Err(Error::InvalidInput("ensemble_size and r0 must be positive".into()));
    }
    let (l_const, radius_sq) = absorbing_radius(system);
    let initial = ensemble_states(system.basis, params.ensemble_size, params.r0, seed);
    let members = par::try_map(&initial, |s| {
        let traj = system.simulate(s, config)?;
        member_outcome(&traj, system, radius_sq, params.dwell)
    })?;
    Ok(AbsorbingResult {
        l_const,
        radius_sq,
        t_end: config.t_end,
        members,
        decay_mode: radius_sq == 0.0,
        decay_ratio: params.decay_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entry_requires_dwell() {
        let times: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
        // Dips below 1.0 briefly at t = 1, then for good from t = 3.
        let norms: Vec<f64> = times
            .iter()
            .map(|&t| if (t - 1.0).abs() < 0.1 || t >= 3.0 { 0.5 } else { 2.0 })
            .collect();
        let (entry, exited) = entry_analysis(&times, &norms, 1.0, 1.0);
        assert_eq!(entry, Some(3.0));
        assert!(!exited);
    }

    #[test]
    fn exit_after_entry_is_flagged() {
        let times: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
        let norms: Vec<f64> = times.iter().map(|&t| if t > 8.0 { 1.5 } else { 0.5 }).collect();
        let (entry, exited) = entry_analysis(&times, &norms, 1.0, 1.0);
        assert_eq!(entry, Some(0.0));
        assert!(exited);
    }

    #[test]
    fn no_entry_when_dwell_exceeds_horizon() {
        let times = vec![0.0, 0.5];
        let norms = vec![0.0, 0.0];
        assert_eq!(entry_analysis(&times, &norms, 1.0, 1.0), (None, false));
    }
}
