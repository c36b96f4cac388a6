//! Higher-norm tracking and time-regularity of trajectories.

use serde::{Deserialize, Serialize};

use super::report::{BoundCheck, ExperimentReport};
use crate::error::{Error, Result};
use crate::solver::Trajectory;
use crate::spectral::SpectralBasis;
use crate::stats::linear_fit;

/// Allowed growth rate of `log sup` per unit time before a trend counts as growth.
pub const GROWTH_TOL: f64 = 1e-2;
const CHUNKS: usize = 4;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct H2Tracking {
    pub times: Vec<f64>,
    /// `‖Δu‖²`
    pub lap_sq: Vec<f64>,
    /// `‖u_t‖²_{H¹}`
    pub vel_h1_sq: Vec<f64>,
    /// `‖u_tt‖²` from central differences of `u_t`.
    pub acc_sq: Vec<f64>,
    pub burn_in: f64,
    /// Sup of `lap + vel_h1 + acc` over each chunk of the post-burn-in window.
    pub chunk_sups: Vec<f64>,
    pub growth_slope: f64,
    pub window_sup: f64,
}

impl H2Tracking {
    pub fn passed(&self) -> bool {
        self.window_sup.is_finite() && self.growth_slope <= GROWTH_TOL
    }

    pub fn report(&self) -> ExperimentReport {
        let sup = |x: &[f64]| x.iter().copied().fold(0.0, f64::max);
        ExperimentReport::new("h2-tracking")
            .input("burn_in", self.burn_in)
            .fit("sup_lap_sq", sup(&self.lap_sq))
            .fit("sup_vel_h1_sq", sup(&self.vel_h1_sq))
            .fit("sup_acc_sq", sup(&self.acc_sq))
            .fit("window_sup", self.window_sup)
            .bound(BoundCheck::upper(
                "no growth trend",
                "slope of log chunk sup",
                GROWTH_TOL,
                self.growth_slope,
            ))
    }
}

/// Tracks `‖Δu‖²`, `‖u_t‖²_{H¹}` and `‖u_tt‖²` along `traj`.
pub fn h2_tracking(traj: &Trajectory, basis: &SpectralBasis, burn_in: f64) -> Result<H2Tracking> {
    if traj.len() < 3 {
        return Err(Error::InvalidInput("h2 tracking needs at least three snapshots".into()));
    }
    let spacing = traj
        .uniform_spacing()
        .ok_or_else(|| Error::InvalidInput("snapshots are not uniformly spaced".into()))?;
    let lam = basis.eigenvalues();
    let snaps = &traj.snapshots;
    let n = snaps.len();
    let mut lap_sq = Vec::with_capacity(n);
    let mut vel_h1_sq = Vec::with_capacity(n);
    let mut acc_sq = Vec::with_capacity(n);
    for (i, s) in snaps.iter().enumerate() {
        let h = basis.h_norms(s)?;
        lap_sq.push(h.lap_sq);
        vel_h1_sq.push(lam.iter().zip(&s.v).map(|(l, v)| l * v * v).sum());
        let (a, b, d) = match i {
            0 => (0, 1, spacing),
            _ if i == n - 1 => (n - 2, n - 1, spacing),
            _ => (i - 1, i + 1, 2.0 * spacing),
        };
        acc_sq.push(
            snaps[b]
                .v
                .iter()
                .zip(&snaps[a].v)
                .map(|(p, q)| ((p - q) / d).powi(2))
                .sum(),
        );
    }
    let times = traj.times();
    let total: Vec<f64> = (0..n).map(|i| lap_sq[i] + vel_h1_sq[i] + acc_sq[i]).collect();
    let start = times.iter().position(|t| *t >= burn_in).unwrap_or(n - 1);
    let window = &total[start..];
    let window_sup = window.iter().copied().fold(0.0, f64::max);
    // Equal-length chunks; the last one absorbs the remainder.
    let chunks = CHUNKS.min(window.len());
    let size = window.len() / chunks;
    let mut chunk_sups = Vec::new();
    let mut pts = Vec::new();
    for k in 0..chunks {
        let lo = k * size;
        let hi = if k + 1 == chunks { window.len() } else { lo + size };
        let sup = window[lo..hi].iter().copied().fold(0.0, f64::max);
        chunk_sups.push(sup);
        if sup > 0.0 {
            pts.push((times[start + (lo + hi) / 2], sup.ln()));
        }
    }
    let growth_slope = linear_fit(&pts).map_or(0.0, |f| f.slope);
    Ok(H2Tracking {
        times,
        lap_sq,
        vel_h1_sq,
        acc_sq,
        burn_in,
        chunk_sups,
        growth_slope,
        window_sup,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolderFit {
    pub s: f64,
    pub gaps: Vec<f64>,
    /// `sup_t ‖z(t+δ) − z(t)‖` in `H^{1−s} × H^{−s}` for each gap.
    pub increments: Vec<f64>,
    /// `None` when every increment vanishes.
    pub exponent: Option<f64>,
    pub r_squared: f64,
}

impl HolderFit {
    pub fn threshold(&self) -> f64 {
        self.s / 6.0 - 0.05
    }

    pub fn passed(&self) -> bool {
        self.exponent.is_none_or(|g| g >= self.threshold())
    }

    pub fn report(&self) -> ExperimentReport {
        let r = ExperimentReport::new("holder").input("s", self.s).input("gaps", &self.gaps);
        match self.exponent {
            Some(g) => r
                .fit("exponent", g)
                .fit("r_squared", self.r_squared)
                .bound(BoundCheck::lower("holder exponent", "gamma >= s/6 - 0.05", self.threshold(), g)),
            None => r.note("all increments vanish: exponent check is vacuous"),
        }
    }
}

/// Weighted increment norm with weights `λ^{(1−s)/2}` on `u` and `λ^{−s/2}` on `u_t`.
pub fn weak_norm_sq(basis: &SpectralBasis, du: &[f64], dv: &[f64], s: f64) -> f64 {
    basis
        .eigenvalues()
        .iter()
        .zip(du.iter().zip(dv))
        .map(|(l, (a, b))| l.powf(1.0 - s) * a * a + l.powf(-s) * b * b)
        .sum()
}

/// Fits the time-Hölder exponent of `t ↦ U(t)` in the weak norm.
pub fn holder_weak_norm(traj: &Trajectory, basis: &SpectralBasis, s: f64) -> Result<HolderFit> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::InvalidInput(format!("s = {s} outside (0, 1]")));
    }
    if traj.len() < 11 {
        return Err(Error::InvalidInput(format!(
            "{} snapshot pairs; at least 10 are required",
            traj.len().saturating_sub(1)
        )));
    }
    let spacing = traj
        .uniform_spacing()
        .ok_or_else(|| Error::InvalidInput("snapshots are not uniformly spaced".into()))?;
    let snaps = &traj.snapshots;
    let span = traj.last().time - snaps[0].time;
    let mut gaps = Vec::new();
    let mut increments = Vec::new();
    let mut k = 1usize;
    while k as f64 * spacing <= span / 8.0 + 1e-12 {
        let sup = (0..snaps.len() - k)
            .map(|i| {
                let du: Vec<f64> = snaps[i + k].u.iter().zip(&snaps[i].u).map(|(a, b)| a - b).collect();
                let dv: Vec<f64> = snaps[i + k].v.iter().zip(&snaps[i].v).map(|(a, b)| a - b).collect();
                weak_norm_sq(basis, &du, &dv, s).sqrt()
            })
            .fold(0.0, f64::max);
        gaps.push(k as f64 * spacing);
        increments.push(sup);
        k *= 2;
    }
    if gaps.len() < 2 {
        return Err(Error::InvalidInput("record too short for two gap levels".into()));
    }
    let pts: Vec<(f64, f64)> = gaps
        .iter()
        .zip(&increments)
        .filter(|(_, d)| **d > 0.0)
        .map(|(g, d)| (g.ln(), d.ln()))
        .collect();
    let (exponent, r_squared) = match linear_fit(&pts) {
        Some(f) => (Some(f.slope), f.r_squared),
        None if pts.is_empty() => (None, 1.0),
        None => (Some(0.0), 0.0),
    };
    Ok(HolderFit {
        s,
        gaps,
        increments,
        exponent,
        r_squared,
    })
}
