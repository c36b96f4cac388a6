use dampwave::diagnostics::{energy_audit, gradient_check};
use dampwave::model::{AuditedProfile, Forcing, NonlinearityProfile, PowerTerm};
use dampwave::solver::{project_state, GalerkinSystem, SolverConfig};
use dampwave::spectral::{SpectralBasis, SpectralState};

/// Damping small enough to leave linear dynamics untouched.
const NEGLIGIBLE: f64 = 1e-300;

fn linear(damping: f64, b: &SpectralBasis) -> AuditedProfile {
    NonlinearityProfile::new(damping, NEGLIGIBLE, vec![]).audit(b.lambda1()).unwrap()
}

fn mode1(b: &SpectralBasis) -> SpectralState {
    let mut s = SpectralState::zeros(b);
    s.u[b.principal_index()] = 1.0;
    s
}

#[test]
fn harmonic_mode_follows_cosine() {
    let b = SpectralBasis::new(1, 4, 3).unwrap();
    let p = linear(0.0, &b);
    let h = Forcing::zero(&b);
    let sys = GalerkinSystem::new(&b, &p, &h).unwrap();
    let dt = 0.01;
    let traj = sys.simulate(&mode1(&b), &SolverConfig::new(dt, 5.0)).unwrap();
    for s in &traj.snapshots {
        // Midpoint has phase error t·dt²/12 at unit frequency.
        assert!((s.u[0] - s.time.cos()).abs() <= s.time * dt * dt / 10.0 + 1e-12);
        assert!(s.u[1..].iter().all(|x| x.abs() <= 1e-14));
    }
    // Quadratic energy is conserved exactly by the midpoint rule.
    let ledger = energy_audit(&traj, &sys).unwrap();
    assert!(ledger.max_abs_residual() <= 1e-13);
}

#[test]
fn damped_mode_matches_closed_form() {
    let b = SpectralBasis::new(1, 4, 3).unwrap();
    let p = linear(1.0, &b);
    let h = Forcing::zero(&b);
    let sys = GalerkinSystem::new(&b, &p, &h).unwrap();
    let w = 3f64.sqrt() / 2.0;
    let exact = |t: f64| (-t / 2.0).exp() * ((w * t).cos() + (w * t).sin() / (2.0 * w));
    let err = |dt: f64| {
        let traj = sys.simulate(&mode1(&b), &SolverConfig::new(dt, 4.0)).unwrap();
        traj.snapshots.iter().map(|s| (s.u[0] - exact(s.time)).abs()).fold(0.0, f64::max)
    };
    let (e1, e2) = (err(0.02), err(0.01));
    assert!(e1 < 1e-4);
    assert!((e1 / e2).log2() > 1.9);
}

#[test]
fn galerkin_truncation_converges() {
    let p = NonlinearityProfile::new(0.5, 1.0, vec![PowerTerm::new(1.0, 5.0)]).audit(1.0).unwrap();
    let run = |n: usize| {
        let b = SpectralBasis::new(1, n, 3).unwrap();
        let h = Forcing::zero(&b);
        let sys = GalerkinSystem::new(&b, &p, &h).unwrap();
        let s0 = project_state(&b, |x| x[0] * (std::f64::consts::PI - x[0]), |_| 0.0);
        sys.simulate(&s0, &SolverConfig::new(0.01, 2.0)).unwrap().last().u.clone()
    };
    let (a, b, c) = (run(8), run(16), run(32));
    let gap = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let d1 = gap(&a, &b[..8]);
    let d2 = gap(&b, &c[..16]);
    assert!(d2 < d1, "{d1} {d2}");
    assert!(d2 < 1e-3);
}

#[test]
fn default_step_is_stable_at_large_amplitude() {
    let b = SpectralBasis::new(1, 16, 3).unwrap();
    let p = NonlinearityProfile::new(0.0, 1.0, vec![PowerTerm::new(1.0, 5.0)]).audit(1.0).unwrap();
    let h = Forcing::zero(&b);
    let sys = GalerkinSystem::new(&b, &p, &h).unwrap();
    let s0 = project_state(&b, |_| 0.0, |x| 3.0 * x[0].sin());
    let dt = sys.find_dt_max(&s0, &SolverConfig::new(0.01, 1.0), 0.1).unwrap();
    assert!(dt >= 1e-3);
}

#[test]
fn forced_run_keeps_energy_balance() {
    let b = SpectralBasis::new(2, 6, 3).unwrap();
    let p = NonlinearityProfile::new(1.0, 1.0, vec![PowerTerm::new(1.0, 3.0)]).audit(b.lambda1()).unwrap();
    let h = Forcing::principal_mode(&b, 1.0).unwrap();
    let sys = GalerkinSystem::new(&b, &p, &h).unwrap();
    let s0 = project_state(&b, |x| x[0].sin() * x[1].sin(), |_| 0.0);
    let dt = 0.01;
    let traj = sys.simulate(&s0, &SolverConfig::new(dt, 3.0)).unwrap();
    let check = gradient_check(&energy_audit(&traj, &sys).unwrap(), dt);
    assert!(check.passed(), "{check:?}");
}

#[test]
fn simulation_is_deterministic() {
    let b = SpectralBasis::new(1, 8, 3).unwrap();
    let p = NonlinearityProfile::new(0.2, 1.0, vec![PowerTerm::new(1.0, 5.0)]).audit(1.0).unwrap();
    let h = Forcing::principal_mode(&b, 0.3).unwrap();
    let sys = GalerkinSystem::new(&b, &p, &h).unwrap();
    let s0 = project_state(&b, |x| x[0].sin(), |x| (2.0 * x[0]).sin());
    let cfg = SolverConfig::new(0.01, 1.0);
    let a = sys.simulate(&s0, &cfg).unwrap();
    let c = sys.simulate(&s0, &cfg).unwrap();
    assert_eq!(a.last(), c.last());
}
