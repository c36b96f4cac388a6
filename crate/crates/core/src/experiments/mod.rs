//! Drivers that turn trajectories into pass/fail reports.

pub mod absorbing;
pub mod attractor;
pub mod dimension;
pub mod lipschitz;
pub mod quasistab;
pub mod regularity;
pub mod report;
pub mod stationary;

pub use absorbing::{absorbing_ball, absorbing_radius, AbsorbingParams, AbsorbingResult};
pub use attractor::{attractor_sample, AttractorParams, AttractorSample};
pub use dimension::{fractal_dimension_estimate, geometric_radii, DimensionEstimate};
pub use lipschitz::{continuous_dependence, perturbation_scaling, LipschitzResult, ScalingResult};
pub use quasistab::{quasi_stability_fit, QuasiParams, QuasiResult};
pub use regularity::{h2_tracking, holder_weak_norm, H2Tracking, HolderFit};
pub use report::{BoundCheck, ExperimentReport};
pub use stationary::{random_guess, solve_stationary, stationary_bounds, stationary_set, StationaryOptions, StationaryState};

use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::solver::random_state;
use crate::spectral::{SpectralBasis, SpectralState};

pub const DEFAULT_ENSEMBLE: usize = 16;

/// Independent stream `index` of the generator seeded by `seed`.
pub fn member_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// `count` random states with `‖U₀‖_H` drawn uniformly from `[r/2, r]`.
pub fn ensemble_states(basis: &SpectralBasis, count: usize, radius: f64, seed: u64) -> Vec<SpectralState> {
    (0..count)
        .map(|i| {
            let mut rng = member_rng(seed, i);
            let r = radius * rng.gen_range(0.5..=1.0);
            random_state(basis, &mut rng, r)
        })
        .collect()
}
