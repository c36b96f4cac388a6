use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::absorbing::absorbing_radius;
use super::ensemble_states;
use super::report::{BoundCheck, ExperimentReport};
use crate::diagnostics::{energy_audit, gradient_check, GradientCheck};
use crate::error::{Error, Result};
use crate::par;
use crate::solver::{GalerkinSystem, SolverConfig, Trajectory};
use crate::stats::linear_fit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuasiParams {
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    /// Radius of the initial data; defaults to the absorbing radius, or 1 if that is zero.
    #[serde(default)]
    pub radius: Option<f64>,
    /// Envelope window; defaults to one period of the lowest mode.
    #[serde(default)]
    pub window: Option<f64>,
    #[serde(default = "default_min_r2")]
    pub min_r_squared: f64,
}

fn default_pairs() -> usize {
    8
}
fn default_min_r2() -> f64 {
    0.9
}

impl Default for QuasiParams {
    fn default() -> Self {
        Self {
            pairs: default_pairs(),
            radius: None,
            window: None,
            min_r_squared: default_min_r2(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairFit {
    pub initial_gap_sq: f64,
    /// Smallest `ĉ` making the envelope of `Q` nonincreasing on `[T/4, T]`.
    pub c_hat: f64,
    /// Windowed maximum of `Q(t)`, the empirical `b̂(t)`.
    pub envelope: Vec<f64>,
    pub rate: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuasiResult {
    pub times: Vec<f64>,
    pub pairs: Vec<PairFit>,
    pub window: f64,
    pub min_r_squared: f64,
    pub gradient: Vec<GradientCheck>,
}

impl QuasiResult {
    pub fn min_rate(&self) -> f64 {
        self.pairs.iter().map(|p| p.rate).fold(f64::INFINITY, f64::min)
    }

    pub fn min_r_squared_observed(&self) -> f64 {
        self.pairs.iter().map(|p| p.r_squared).fold(f64::INFINITY, f64::min)
    }

    pub fn passed(&self) -> bool {
        self.pairs
            .iter()
            .all(|p| p.rate > 0.0 && p.r_squared >= self.min_r_squared)
    }

    pub fn report(&self) -> ExperimentReport {
        let c_max = self.pairs.iter().map(|p| p.c_hat).fold(0.0, f64::max);
        ExperimentReport::new("quasistab")
            .input("pairs", self.pairs.len())
            .input("window", self.window)
            .fit("rate_min", self.min_rate())
            .fit("c_hat_max", c_max)
            .bound(BoundCheck::lower("envelope decays", "rate > 0", 0.0, self.min_rate()))
            .bound(BoundCheck::lower(
                "log-linear envelope",
                "R^2 of log b(t) fit",
                self.min_r_squared,
                self.min_r_squared_observed(),
            ))
            .note("only the net exponential envelope is fitted")
    }
}

/// Windowed maximum `max_{s ∈ [t, t+w]} q(s)`, truncated at the end.
pub fn forward_window_max(times: &[f64], q: &[f64], window: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(q.len());
    let mut j = 0;
    for i in 0..q.len() {
        j = j.max(i);
        while j + 1 < q.len() && times[j + 1] <= times[i] + window + 1e-12 {
            j += 1;
        }
        out.push(q[i..=j].iter().copied().fold(0.0, f64::max));
    }
    out
}

fn nonincreasing(env: &[f64]) -> bool {
    env.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-300)
}

/// `Q(t)` for a given `ĉ`.
fn q_series(dist: &[f64], sup_z: &[f64], c: f64, d0: f64) -> Vec<f64> {
    dist.iter()
        .zip(sup_z)
        .map(|(d, z)| (d - c * z).max(0.0) / d0)
        .collect()
}

fn fit_pair(a: &Trajectory, b: &Trajectory, sys: &GalerkinSystem<'_>, window: f64) -> PairFit {
    let basis = sys.basis;
    let times = a.times();
    let dist: Vec<f64> = a
        .snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(x, y)| basis.h_distance_sq(x, y))
        .collect();
    let mut run = 0.0f64;
    let sup_z: Vec<f64> = a
        .snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(x, y)| {
            let z: f64 = x.u.iter().zip(&y.u).map(|(p, q)| (p - q).powi(2)).sum();
            run = run.max(z);
            run
        })
        .collect();
    let d0 = dist[0];
    if d0 == 0.0 {
        return PairFit {
            initial_gap_sq: 0.0,
            c_hat: 0.0,
            envelope: vec![0.0; times.len()],
            rate: f64::INFINITY,
            r_squared: 1.0,
        };
    }
    let t_end = *times.last().unwrap();
    let start = times.iter().position(|t| *t >= times[0] + 0.25 * (t_end - times[0])).unwrap_or(0);
    let tail_ok = |c: f64| {
        let q = q_series(&dist, &sup_z, c, d0);
        nonincreasing(&forward_window_max(&times, &q, window)[start..])
    };
    let c_hat = if tail_ok(0.0) {
        0.0
    } else {
        // At c_hi every tail value of Q is zero.
        let mut hi = dist[start..]
            .iter()
            .zip(&sup_z[start..])
            .filter(|(_, z)| **z > 0.0)
            .map(|(d, z)| d / z)
            .fold(0.0, f64::max);
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if tail_ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let envelope = forward_window_max(&times, &q_series(&dist, &sup_z, c_hat, d0), window);
    // Fit over the part of the record where a full window is available.
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(&envelope)
        .filter(|(t, e)| **t + window <= t_end + 1e-12 && **e > 0.0)
        .map(|(t, e)| (*t, e.ln()))
        .collect();
    let (rate, r_squared) = match linear_fit(&pts) {
        Some(f) => (-f.slope, f.r_squared),
        // Q vanishes identically: decay is immediate.
        None if pts.is_empty() => (f64::INFINITY, 1.0),
        None => (0.0, 0.0),
    };
    PairFit {
        initial_gap_sq: d0,
        c_hat,
        envelope,
        rate,
        r_squared,
    }
}

/// Fits the quasi-stability envelope over an ensemble of trajectory pairs.
pub fn quasi_stability_fit(
    system: &GalerkinSystem<'_>,
    config: &SolverConfig,
    params: &QuasiParams,
    seed: u64,
) -> Result<QuasiResult> {
    let kappa2 = system.profile.report().kappa2;
    if !(kappa2 > 0.0) {
        return Err(Error::Refused(
            "quasi-stability requires g'(0) > 0 (kappa2 > 0); the damping has no linear part".into(),
        ));
    }
    if params.pairs == 0 {
        return Err(Error::InvalidInput("pairs must be positive".into()));
    }
    let radius = params.radius.unwrap_or_else(|| {
        let r2 = absorbing_radius(system).1;
        if r2 > 0.0 {
            r2.sqrt()
        } else {
            1.0
        }
    });
    let window = params
        .window
        .unwrap_or(2.0 * PI / system.basis.lambda1().sqrt());
    let initial = ensemble_states(system.basis, 2 * params.pairs, radius, seed);
    let trajs = par::try_map(&initial, |s| system.simulate(s, config))?;
    let gradient = par::try_map(&trajs, |t| energy_audit(t, system).map(|l| gradient_check(&l, config.dt)))?;
    let pairs = par::map_range(params.pairs, |i| fit_pair(&trajs[2 * i], &trajs[2 * i + 1], system, window));
    Ok(QuasiResult {
        times: trajs[0].times(),
        pairs,
        window,
        min_r_squared: params.min_r_squared,
        gradient,
    })
}

/// Fit for one explicit pair, exposed for oracle tests.
pub fn pair_fit(a: &Trajectory, b: &Trajectory, system: &GalerkinSystem<'_>, window: f64) -> PairFit {
    fit_pair(a, b, system, window)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_max_of_decreasing_signal_is_shifted_start() {
        let t: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let q: Vec<f64> = (0..10).map(|i| 10.0 - i as f64).collect();
        assert_eq!(forward_window_max(&t, &q, 2.0), q);
    }

    #[test]
    fn window_max_covers_oscillation() {
        let t: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let q = [1.0, 0.0, 3.0, 0.0, 2.0, 0.0];
        assert_eq!(forward_window_max(&t, &q, 2.0), vec![3.0, 3.0, 3.0, 2.0, 2.0, 0.0]);
    }
}
