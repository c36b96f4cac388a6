//! Correlation-sum dimension estimate for point clouds in `H`.
//!
//! This is a heuristic companion to the finite-dimensionality of the
//! attractor. It estimates a slope and proves nothing.

use serde::{Deserialize, Serialize};

use super::report::ExperimentReport;
use crate::error::{Error, Result};
use crate::par;
use crate::spectral::{SpectralBasis, SpectralState};
use crate::stats::linear_fit;

pub const MIN_CLOUD: usize = 1000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub points: usize,
    pub radii: Vec<f64>,
    /// Fraction of pairs closer than each radius.
    pub correlation: Vec<f64>,
    pub dimension: f64,
    pub stderr: f64,
    /// `dimension ± 2·stderr`
    pub band: (f64, f64),
    pub degenerate: bool,
}

impl DimensionEstimate {
    pub fn report(&self) -> ExperimentReport {
        ExperimentReport::new("dimension")
            .input("points", self.points)
            .input("radii", &self.radii)
            .fit("dimension", self.dimension)
            .fit("band_low", self.band.0)
            .fit("band_high", self.band.1)
            .note("heuristic correlation-sum slope; not a bound")
    }
}

/// `count` radii from `lo` to `hi` in geometric progression.
pub fn geometric_radii(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let q = (hi / lo).powf(1.0 / (count - 1) as f64);
    (0..count).map(|i| lo * q.powi(i as i32)).collect()
}

/// States mapped to coordinates where the Euclidean norm is the `H` norm.
pub fn embed_cloud(basis: &SpectralBasis, states: &[SpectralState]) -> Vec<Vec<f64>> {
    states.iter().map(|s| basis.h_embedding(s)).collect()
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.len() < 2 || radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::InvalidInput("need at least two positive radii".into()));
    }
    let q = radii[1] / radii[0];
    if !(q > 1.0) || radii.windows(2).any(|w| ((w[1] / w[0]) / q - 1.0).abs() > 1e-9) {
        return Err(Error::InvalidInput("radii must be increasing and geometric".into()));
    }
    Ok(())
}

pub fn fractal_dimension_estimate(cloud: &[Vec<f64>], radii: &[f64]) -> Result<DimensionEstimate> {
    if cloud.len() < MIN_CLOUD {
        return Err(Error::InvalidInput(format!(
            "cloud has {} points; at least {MIN_CLOUD} are required",
            cloud.len()
        )));
    }
    check_radii(radii)?;
    let n = cloud.len();
    let mut dists: Vec<f64> = par::map_range(n, |i| {
        cloud[i + 1..]
            .iter()
            .map(|q| {
                cloud[i]
                    .iter()
                    .zip(q)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect::<Vec<f64>>()
    })
    .concat();
    dists.sort_by(f64::total_cmp);
    let total = dists.len() as f64;
    let correlation: Vec<f64> = radii
        .iter()
        .map(|r| dists.partition_point(|d| d < r) as f64 / total)
        .collect();
    let base = DimensionEstimate {
        points: n,
        radii: radii.to_vec(),
        correlation: correlation.clone(),
        dimension: 0.0,
        stderr: 0.0,
        band: (0.0, 0.0),
        degenerate: true,
    };
    if correlation[0] >= 1.0 {
        return Ok(base);
    }
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(&correlation)
        .filter(|(_, c)| **c > 0.0 && **c < 1.0)
        .map(|(r, c)| (r.ln(), c.ln()))
        .collect();
    let fit = linear_fit(&pts)
        .ok_or_else(|| Error::InvalidInput("radii resolve fewer than two correlation levels".into()))?;
    Ok(DimensionEstimate {
        dimension: fit.slope,
        stderr: fit.slope_stderr,
        band: (fit.slope - 2.0 * fit.slope_stderr, fit.slope + 2.0 * fit.slope_stderr),
        degenerate: false,
        ..base
    })
}
