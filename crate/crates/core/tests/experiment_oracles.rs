use dampwave::experiments::dimension::embed_cloud;
use dampwave::experiments::{
    attractor_sample, continuous_dependence, fractal_dimension_estimate, geometric_radii, h2_tracking,
    holder_weak_norm, member_rng, solve_stationary, stationary_set, AttractorParams, StationaryOptions,
};
use dampwave::model::{AuditedProfile, Forcing, NonlinearityProfile, PowerTerm};
use dampwave::solver::{random_state, GalerkinSystem, SolverConfig};
use dampwave::spectral::{SpectralBasis, SpectralState};

const NEGLIGIBLE: f64 = 1e-300;

fn linear(damping: f64) -> AuditedProfile {
    NonlinearityProfile::new(damping, NEGLIGIBLE, vec![]).audit(1.0).unwrap()
}

fn mode1(b: &SpectralBasis) -> SpectralState {
    let mut s = SpectralState::zeros(b);
    s.u[b.principal_index()] = 1.0;
    s
}

#[test]
fn linear_stationary_state_is_resolvent_of_forcing() {
    let b = SpectralBasis::new(1, 8, 3).unwrap();
    let p = linear(1.0);
    let coeffs: Vec<f64> = (0..8).map(|k| 1.0 / (k as f64 + 1.0).powi(2)).collect();
    let h = Forcing::from_coeffs(&b, coeffs.clone()).unwrap();
    let sys = GalerkinSystem::new(&b, &p, &h).unwrap();
    let st = solve_stationary(&sys, &[0.3; 8], &StationaryOptions::default()).unwrap();
    for ((u, c), l) in st.u.iter().zip(&coeffs).zip(b.eigenvalues()) {
        assert!((u - c / l).abs() <= 1e-12);
    }
    assert!(st.passed(), "{st:?}");
}

#[test]
fn non_monotone_stationary_states_satisfy_bounds() {
    let b = SpectralBasis::new(1, 8, 3).unwrap();
    let p = NonlinearityProfile::new(1.0, 1.0, vec![PowerTerm::new(1.0, 5.0), PowerTerm::new(-1.5, 3.0)]);
    let p = p.audit(1.0).unwrap();
    let h = Forcing::principal_mode(&b, 3.0).unwrap();
    let sys = GalerkinSystem::new(&b, &p, &h).unwrap();
    let set = stationary_set(&sys, 8, &StationaryOptions { check_uniqueness: false, ..Default::default() }).unwrap();
    assert!(!set.is_empty());
    assert!(set.iter().all(|s| s.residual <= 1e-9 && s.grad_bound_ok() && s.lap_bound_ok()));
}

#[test]
fn gradient_flow_settles_on_stationary_set() {
    let b = SpectralBasis::new(1, 8, 3).unwrap();
    let p = NonlinearityProfile::new(1.0, 1.0, vec![PowerTerm::new(1.0, 5.0), PowerTerm::new(-1.0, 3.0)])
        .audit(1.0)
        .unwrap();
    let h = Forcing::principal_mode(&b, 0.5).unwrap();
    let sys = GalerkinSystem::new(&b, &p, &h).unwrap();
    let params = AttractorParams {
        ensemble_size: 4,
        r0: 2.0,
        burn_in: 20.0,
        sample_count: 50,
        stationary_starts: 8,
    };
    let s = attractor_sample(&sys, &SolverConfig::new(0.01, 30.0).with_stride(10), &params, 3).unwrap();
    assert!(s.energy_monotone());
    assert!(s.max_final_distance() < 1e-3, "{}", s.max_final_distance());
}

#[test]
fn unforced_attractor_is_the_origin() {
    let b = SpectralBasis::new(1, 8, 3).unwrap();
    let p = NonlinearityProfile::new(1.0, 1.0, vec![PowerTerm::new(1.0, 5.0)]).audit(1.0).unwrap();
    let h = Forcing::zero(&b);
    let sys = GalerkinSystem::new(&b, &p, &h).unwrap();
    let params = AttractorParams { ensemble_size: 4, burn_in: 20.0, sample_count: 100, ..Default::default() };
    let s = attractor_sample(&sys, &SolverConfig::new(0.01, 30.0).with_stride(10), &params, 1).unwrap();
    assert_eq!(s.stationary.len(), 1);
    assert!(s.stationary[0].u.iter().all(|x| x.abs() <= 1e-9));
    assert!(s.max_final_distance() < 1e-6);
}

#[test]
fn linear_attractor_is_resolvent_of_mode1_forcing() {
    let b = SpectralBasis::new(1, 8, 3).unwrap();
    let p = linear(1.0);
    let h = Forcing::principal_mode(&b, 0.7).unwrap();
    let sys = GalerkinSystem::new(&b, &p, &h).unwrap();
    let params = AttractorParams { ensemble_size: 3, burn_in: 30.0, sample_count: 50, ..Default::default() };
    let s = attractor_sample(&sys, &SolverConfig::new(0.01, 40.0).with_stride(10), &params, 2).unwrap();
    assert_eq!(s.stationary.len(), 1);
    assert!((s.stationary[0].u[0] - 0.7 / b.lambda1()).abs() <= 1e-12);
    assert!(s.max_final_distance() < 1e-5);
}

#[test]
fn lipschitz_ratio_is_one_for_conservative_linear_waves() {
    let b = SpectralBasis::new(1, 8, 3).unwrap();
    let p = linear(0.0);
    let h = Forcing::zero(&b);
    let sys = GalerkinSystem::new(&b, &p, &h).unwrap();
    let mut rng = member_rng(4, 0);
    let a = random_state(&b, &mut rng, 1.0);
    let c = random_state(&b, &mut rng, 1.0);
    let cfg = SolverConfig::new(0.01, 3.0).with_stride(5);
    let r = continuous_dependence(&a, &c, &sys, &cfg).unwrap();
    assert!(r.rho.iter().all(|x| (x - 1.0).abs() <= 1e-10));
}

#[test]
fn lipschitz_ratio_is_symmetric() {
    let b = SpectralBasis::new(1, 8, 3).unwrap();
    let p = NonlinearityProfile::new(0.0, 1.0, vec![PowerTerm::new(1.0, 5.0)]).audit(1.0).unwrap();
    let h = Forcing::zero(&b);
    let sys = GalerkinSystem::new(&b, &p, &h).unwrap();
    let mut rng = member_rng(5, 0);
    let a = random_state(&b, &mut rng, 1.0);
    let c = random_state(&b, &mut rng, 0.5);
    let cfg = SolverConfig::new(0.01, 2.0).with_stride(5);
    let r1 = continuous_dependence(&a, &c, &sys, &cfg).unwrap();
    let r2 = continuous_dependence(&c, &a, &sys, &cfg).unwrap();
    assert_eq!(r1.rho, r2.rho);
    assert!(r1.passed());
}

#[test]
fn single_mode_is_lipschitz_in_time() {
    let b = SpectralBasis::new(1, 8, 3).unwrap();
    let p = linear(0.0);
    let h = Forcing::zero(&b);
    let sys = GalerkinSystem::new(&b, &p, &h).unwrap();
    let traj = sys.simulate(&mode1(&b), &SolverConfig::new(0.01, 20.0)).unwrap();
    let fit = holder_weak_norm(&traj, &b, 1.0).unwrap();
    assert!(fit.exponent.unwrap() > 0.9, "{:?}", fit.exponent);
    let h2 = h2_tracking(&traj, &b, 2.0).unwrap();
    assert!(h2.passed());
    assert!(h2.growth_slope.abs() < 1e-3, "{:?}", h2.chunk_sups);
}

#[test]
fn constant_trajectory_gives_vacuous_holder_pass() {
    let b = SpectralBasis::new(1, 4, 3).unwrap();
    let p = linear(1.0);
    let h = Forcing::zero(&b);
    let sys = GalerkinSystem::new(&b, &p, &h).unwrap();
    let traj = sys.simulate(&SpectralState::zeros(&b), &SolverConfig::new(0.01, 1.0)).unwrap();
    let fit = holder_weak_norm(&traj, &b, 0.5).unwrap();
    assert!(fit.exponent.is_none());
    assert!(fit.passed());
}

#[test]
fn periodic_orbit_has_dimension_one() {
    let b = SpectralBasis::new(1, 4, 3).unwrap();
    let p = linear(0.0);
    let h = Forcing::zero(&b);
    let sys = GalerkinSystem::new(&b, &p, &h).unwrap();
    let period = 2.0 * std::f64::consts::PI;
    let traj = sys.simulate(&mode1(&b), &SolverConfig::new(period / 2000.0, period)).unwrap();
    let cloud = embed_cloud(&b, &traj.snapshots[..2000]);
    let est = fractal_dimension_estimate(&cloud, &geometric_radii(0.01, 0.3, 8)).unwrap();
    assert!(!est.degenerate);
    assert!((est.dimension - 1.0).abs() < 0.1, "{}", est.dimension);
}

#[test]
fn collapsed_cloud_has_dimension_zero() {
    let b = SpectralBasis::new(1, 8, 3).unwrap();
    let p = NonlinearityProfile::new(1.0, 1.0, vec![PowerTerm::new(1.0, 5.0)]).audit(1.0).unwrap();
    let h = Forcing::zero(&b);
    let sys = GalerkinSystem::new(&b, &p, &h).unwrap();
    let params = AttractorParams { ensemble_size: 2, burn_in: 40.0, sample_count: 1000, ..Default::default() };
    let s = attractor_sample(&sys, &SolverConfig::new(0.01, 50.0).with_stride(2), &params, 8).unwrap();
    let cloud = embed_cloud(&b, &s.cloud);
    let est = fractal_dimension_estimate(&cloud, &geometric_radii(1e-3, 1e-1, 6)).unwrap();
    assert!(est.dimension.abs() < 1e-12);
}
