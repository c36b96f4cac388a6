use serde::{Deserialize, Serialize};

use super::report::{BoundCheck, ExperimentReport};
use crate::error::{Error, Result};
use crate::par;
use crate::solver::{GalerkinSystem, SolverConfig};
use crate::spectral::SpectralState;

/// Growth of the `H`-distance between two trajectories.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LipschitzResult {
    pub times: Vec<f64>,
    /// `ρ(t) = ‖U¹(t) − U²(t)‖_H / ‖U¹₀ − U²₀‖_H`
    pub rho: Vec<f64>,
    pub initial_gap: f64,
    /// `max ‖U^i_0‖_H` over the pair.
    pub radius: f64,
    /// `Ĉ = max_{t>0} ln ρ(t) / t`
    pub fitted_c: f64,
    pub envelope_ok: bool,
}

impl LipschitzResult {
    pub fn passed(&self) -> bool {
        self.envelope_ok && self.fitted_c.is_finite()
    }

    pub fn report(&self) -> ExperimentReport {
        let worst = self
            .times
            .iter()
            .zip(&self.rho)
            .map(|(t, r)| r / (self.fitted_c * t).exp())
            .fold(0.0, f64::max);
        ExperimentReport::new("lipschitz")
            .input("initial_gap", self.initial_gap)
            .input("radius", self.radius)
            .fit("C", self.fitted_c)
            .fit("rho_final", *self.rho.last().unwrap_or(&f64::NAN))
            .bound(BoundCheck::upper(
                "exponential envelope",
                "max_t rho(t) exp(-C t) <= 1",
                1.0 + 1e-12,
                worst,
            ))
            .require(self.passed(), "finite exponential envelope")
    }
}

/// Runs both initial data and fits the Lipschitz growth constant.
pub fn continuous_dependence(
    a: &SpectralState,
    b: &SpectralState,
    system: &GalerkinSystem<'_>,
    config: &SolverConfig,
) -> Result<LipschitzResult> {
    let basis = system.basis;
    let gap = basis.h_distance_sq(a, b).sqrt();
    if gap == 0.0 {
        return Err(Error::InvalidInput(
            "identical initial data: the Lipschitz ratio is undefined".into(),
        ));
    }
    let radius = basis
        .h_norms(a)?
        .energy_sq
        .sqrt()
        .max(basis.h_norms(b)?.energy_sq.sqrt());
    let pair = [a.clone(), b.clone()];
    let trajs = par::try_map(&pair, |s| system.simulate(s, config))?;
    let (ta, tb) = (&trajs[0], &trajs[1]);
    let times = ta.times();
    let rho: Vec<f64> = ta
        .snapshots
        .iter()
        .zip(&tb.snapshots)
        .map(|(x, y)| basis.h_distance_sq(x, y).sqrt() / gap)
        .collect();
    let fitted_c = times
        .iter()
        .zip(&rho)
        .filter(|(t, _)| **t > times[0])
        .map(|(t, r)| r.ln() / (t - times[0]))
        .fold(f64::NEG_INFINITY, f64::max);
    let envelope_ok = rho.iter().all(|r| r.is_finite())
        && times
            .iter()
            .zip(&rho)
            .all(|(t, r)| *r <= (fitted_c * (t - times[0])).exp() * (1.0 + 1e-12));
    Ok(LipschitzResult {
        times,
        rho,
        initial_gap: gap,
        radius,
        fitted_c,
        envelope_ok,
    })
}

/// `ρ(t)` for `U0 + gap·d` against `U0`, for each gap, with `d` normalized in `H`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingResult {
    pub gaps: Vec<f64>,
    pub runs: Vec<LipschitzResult>,
    /// `max_t |ρ_i(t) − ρ_{i+1}(t)| / ρ_i(t)` over consecutive gaps.
    pub max_relative_change: f64,
}

pub fn perturbation_scaling(
    base: &SpectralState,
    direction: &SpectralState,
    gaps: &[f64],
    system: &GalerkinSystem<'_>,
    config: &SolverConfig,
) -> Result<ScalingResult> {
    let basis = system.basis;
    let norm = basis.h_norms(direction)?.energy_sq.sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidInput("zero perturbation direction".into()));
    }
    let runs = gaps
        .iter()
        .map(|&g| {
            let s = g / norm;
            let pert = SpectralState {
                u: base.u.iter().zip(&direction.u).map(|(x, d)| x + s * d).collect(),
                v: base.v.iter().zip(&direction.v).map(|(x, d)| x + s * d).collect(),
                time: base.time,
            };
            continuous_dependence(&pert, base, system, config)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut max_rel: f64 = 0.0;
    for w in runs.windows(2) {
        for (r1, r2) in w[0].rho.iter().zip(&w[1].rho) {
            max_rel = max_rel.max((r1 - r2).abs() / r1);
        }
    }
    Ok(ScalingResult {
        gaps: gaps.to_vec(),
        runs,
        max_relative_change: max_rel,
    })
}
