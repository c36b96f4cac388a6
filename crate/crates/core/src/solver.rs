//! Time integration of the Galerkin system
//!
//! ```text
//! u_k' = v_k
//! v_k' = −λ_k u_k − ⟨g(v), φ_k⟩ − ⟨f(u), φ_k⟩ + h_k
//! ```
//!
//! The default scheme is the implicit midpoint rule. Writing
//! `v_m = (v_n + v_{n+1})/2` and `u_m = u_n + (dt/2) v_m`, one step reduces to
//! the `N^d`-dimensional system
//!
//! ```text
//! R(v_m) = v_m − v_n − (dt/2)[−λ u_m − P g(v_m) − P f(u_m) + h] = 0
//! ```
//!
//! whose Jacobian `I + (dt/2)[(dt/2)Λ + G(g'(v_m)) + (dt/2)G(f'(u_m))]` is
//! symmetric; it is positive definite whenever `f` is monotone, since `g` is.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dissipation_unchecked, AuditedProfile, Forcing};
use crate::spectral::{SpectralBasis, SpectralState};

pub const DEFAULT_NEWTON_TOL: f64 = 1e-10;
pub const DEFAULT_NEWTON_MAX_ITERS: usize = 50;
pub const MAX_HALVINGS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    ImplicitMidpoint,
    /// Damping and linear part implicit; source evaluated at the explicit
    /// midpoint predictor `u_n + (dt/2) v_n`.
    SemiImplicitImex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_iters")]
    pub newton_max_iters: usize,
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub observer_stride: usize,
}

fn default_tol() -> f64 {
    DEFAULT_NEWTON_TOL
}
fn default_iters() -> usize {
    DEFAULT_NEWTON_MAX_ITERS
}
fn default_stride() -> usize {
    1
}

impl SolverConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            scheme: Scheme::ImplicitMidpoint,
            newton_tol: DEFAULT_NEWTON_TOL,
            newton_max_iters: DEFAULT_NEWTON_MAX_ITERS,
            t_end,
            observer_stride: 1,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.observer_stride = stride;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_newton_tol(mut self, tol: f64) -> Self {
        self.newton_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidSolverConfig(format!("dt must be positive (got {})", self.dt)));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::InvalidSolverConfig("newton_tol must be positive".into()));
        }
        if self.newton_max_iters == 0 {
            return Err(Error::InvalidSolverConfig("newton_max_iters must be >= 1".into()));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidSolverConfig("t_end must be finite and >= 0".into()));
        }
        if self.observer_stride == 0 {
            return Err(Error::InvalidSolverConfig("observer_stride must be >= 1".into()));
        }
        Ok(())
    }
}

/// `(du, dv)` for the Galerkin system.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalDerivative {
    pub du: Vec<f64>,
    pub dv: Vec<f64>,
}

/// Result of one (possibly subdivided) step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: SpectralState,
    /// `∫_{t_n}^{t_{n+1}} ∫ g(u_t) u_t` by the midpoint rule.
    pub dissipation: f64,
    /// `∫_{t_n}^{t_{n+1}} ‖u_t‖⁶₆` by the midpoint rule.
    pub l6: f64,
    pub newton_iters: usize,
    pub halvings: usize,
}

/// Snapshots of a run plus the dissipation budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub snapshots: Vec<SpectralState>,
    /// Cumulative dissipation from the initial time, per snapshot.
    pub cumulative_dissipation: Vec<f64>,
    /// Cumulative `∫‖u_t‖⁶₆`, per snapshot.
    pub cumulative_l6: Vec<f64>,
    /// One entry per outer step.
    pub dissipation_increments: Vec<f64>,
    pub dt: f64,
    pub observer_stride: usize,
    pub halvings: usize,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn last(&self) -> &SpectralState {
        self.snapshots.last().expect("trajectory has at least the initial snapshot")
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// The part of the record with `time >= t`, budgets measured from there.
    pub fn tail_from(&self, t: f64) -> Trajectory {
        let start = self
            .snapshots
            .iter()
            .position(|s| s.time >= t)
            .unwrap_or(self.snapshots.len().saturating_sub(1));
        let d0 = self.cumulative_dissipation[start];
        let l0 = self.cumulative_l6[start];
        Trajectory {
            snapshots: self.snapshots[start..].to_vec(),
            cumulative_dissipation: self.cumulative_dissipation[start..].iter().map(|d| d - d0).collect(),
            cumulative_l6: self.cumulative_l6[start..].iter().map(|d| d - l0).collect(),
            dissipation_increments: self.dissipation_increments[(start * self.observer_stride).min(self.dissipation_increments.len())..].to_vec(),
            dt: self.dt,
            observer_stride: self.observer_stride,
            halvings: self.halvings,
        }
    }

    /// Sample spacing when snapshots are uniform in time.
    pub fn uniform_spacing(&self) -> Option<f64> {
        if self.snapshots.len() < 2 {
            return None;
        }
        let t = self.times();
        let h = t[1] - t[0];
        let ok = t
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.max(1.0));
        ok.then_some(h)
    }
}

/// The Galerkin ODE system for a fixed basis, audited profile, and forcing.
#[derive(Debug, Clone, Copy)]
pub struct GalerkinSystem<'a> {
    pub basis: &'a SpectralBasis,
    pub profile: &'a AuditedProfile,
    pub forcing: &'a Forcing,
}

impl<'a> GalerkinSystem<'a> {
    pub fn new(basis: &'a SpectralBasis, profile: &'a AuditedProfile, forcing: &'a Forcing) -> Result<Self> {
        if forcing.coeffs().len() != basis.len() {
            return Err(Error::SizeMismatch {
                expected: basis.len(),
                found: forcing.coeffs().len(),
            });
        }
        if (profile.lambda1() - basis.lambda1()).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "profile audited for lambda1 = {} but basis has lambda1 = {}",
                profile.lambda1(),
                basis.lambda1()
            )));
        }
        Ok(Self { basis, profile, forcing })
    }

    /// `P_N[q(w)]` for a modal vector `w` and a pointwise map `q`.
    fn project_map(&self, grid: &[f64], q: impl Fn(f64) -> f64) -> Vec<f64> {
        let mapped: Vec<f64> = grid.iter().map(|&s| q(s)).collect();
        self.basis.to_modal_unchecked(&mapped)
    }

    /// Acceleration `−λu − P g(v) − P f(u) + h`.
    pub fn acceleration(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let p = self.profile.profile();
        let ug = self.basis.to_physical_unchecked(u);
        let vg = self.basis.to_physical_unchecked(v);
        let fu = self.project_map(&ug, |s| p.f(s));
        let gv = self.project_map(&vg, |s| p.g(s));
        let lam = self.basis.eigenvalues();
        let h = self.forcing.coeffs();
        (0..u.len())
            .map(|k| -lam[k] * u[k] - gv[k] - fu[k] + h[k])
            .collect()
    }

    pub fn rhs(&self, state: &SpectralState) -> Result<ModalDerivative> {
        state.check(self.basis)?;
        let dv = self.acceleration(&state.u, &state.v);
        if dv.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("rhs at t = {}", state.time)));
        }
        Ok(ModalDerivative {
            du: state.v.clone(),
            dv,
        })
    }

    /// Advances by `config.dt`, halving the step up to five times when Newton fails.
    pub fn step(&self, state: &SpectralState, config: &SolverConfig) -> Result<StepOutcome> {
        config.validate()?;
        state.check(self.basis)?;
        self.step_adaptive(state, config.dt, config, MAX_HALVINGS)
    }

    fn step_adaptive(
        &self,
        state: &SpectralState,
        dt: f64,
        config: &SolverConfig,
        halvings_left: usize,
    ) -> Result<StepOutcome> {
        match self.step_signed(state, dt, config) {
            Ok(out) => Ok(out),
            Err(Error::NewtonDivergence { .. } | Error::SingularJacobian(_)) if halvings_left > 0 => {
                let first = self.step_adaptive(state, 0.5 * dt, config, halvings_left - 1)?;
                let second = self.step_adaptive(&first.state, 0.5 * dt, config, halvings_left - 1)?;
                let mut st = second.state;
                st.time = state.time + dt;
                Ok(StepOutcome {
                    state: st,
                    dissipation: first.dissipation + second.dissipation,
                    l6: first.l6 + second.l6,
                    newton_iters: first.newton_iters + second.newton_iters,
                    halvings: 1 + first.halvings + second.halvings,
                })
            }
            Err(e) => Err(e),
        }
    }

    /// A single step of signed size `dt` without halving. Negative steps are
    /// allowed (time reversal of the conservative part).
    pub fn step_signed(&self, state: &SpectralState, dt: f64, config: &SolverConfig) -> Result<StepOutcome> {
        let basis = self.basis;
        let p = self.profile.profile();
        let lam = basis.eigenvalues();
        let h = self.forcing.coeffs();
        let n = basis.len();
        let half = 0.5 * dt;
        let (u0, v0) = (&state.u, &state.v);

        // Explicit predictor.
        let a0 = self.acceleration(u0, v0);
        let mut vm: Vec<f64> = (0..n).map(|k| v0[k] + half * a0[k]).collect();

        let explicit_source = match config.scheme {
            Scheme::ImplicitMidpoint => None,
            Scheme::SemiImplicitImex => {
                let upred: Vec<f64> = (0..n).map(|k| u0[k] + half * v0[k]).collect();
                let ug = basis.to_physical_unchecked(&upred);
                Some(self.project_map(&ug, |s| p.f(s)))
            }
        };

        let mut residual = f64::INFINITY;
        for iter in 0..=config.newton_max_iters {
            let um: Vec<f64> = (0..n).map(|k| u0[k] + half * vm[k]).collect();
            let vg = basis.to_physical_unchecked(&vm);
            let gv = self.project_map(&vg, |s| p.g(s));
            let (fu, ug) = match &explicit_source {
                Some(f) => (f.clone(), None),
                None => {
                    let ug = basis.to_physical_unchecked(&um);
                    (self.project_map(&ug, |s| p.f(s)), Some(ug))
                }
            };
            let r: Vec<f64> = (0..n)
                .map(|k| vm[k] - v0[k] - half * (-lam[k] * um[k] - gv[k] - fu[k] + h[k]))
                .collect();
            residual = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if !residual.is_finite() {
                break;
            }
            if residual <= config.newton_tol {
                let u1: Vec<f64> = (0..n).map(|k| u0[k] + dt * vm[k]).collect();
                let v1: Vec<f64> = (0..n).map(|k| 2.0 * vm[k] - v0[k]).collect();
                let next = SpectralState {
                    u: u1,
                    v: v1,
                    time: state.time + dt,
                };
                next.check_finite()?;
                let l6 = dt * basis.cell_weight() * vg.iter().map(|x| (x * x).powi(3)).sum::<f64>();
                return Ok(StepOutcome {
                    state: next,
                    dissipation: dt * dissipation_unchecked(&vg, p, basis),
                    l6,
                    newton_iters: iter,
                    halvings: 0,
                });
            }
            if iter == config.newton_max_iters {
                break;
            }
            let gp_grid: Vec<f64> = vg.iter().map(|&s| p.gp(s)).collect();
            let mut jac: DMatrix<f64> = basis.galerkin_matrix_unchecked(&gp_grid) * half;
            if let Some(ug) = ug {
                let fp_grid: Vec<f64> = ug.iter().map(|&s| p.fp(s)).collect();
                jac += basis.galerkin_matrix_unchecked(&fp_grid) * (half * half);
            }
            for k in 0..n {
                jac[(k, k)] += 1.0 + half * half * lam[k];
            }
            let rhs = DVector::from_iterator(n, r.iter().map(|x| -x));
            let delta = jac
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::SingularJacobian("implicit midpoint step".into()))?;
            for k in 0..n {
                vm[k] += delta[k];
            }
        }
        Err(Error::NewtonDivergence {
            iters: config.newton_max_iters,
            residual,
        })
    }

    /// Integrates from `initial` to `initial.time + config.t_end`.
    pub fn simulate(&self, initial: &SpectralState, config: &SolverConfig) -> Result<Trajectory> {
        config.validate()?;
        initial.check(self.basis)?;
        let t0 = initial.time;
        let ratio = config.t_end / config.dt;
        let mut n_steps = ratio.round() as usize;
        let exact = (ratio - n_steps as f64).abs() <= 1e-9 * ratio.max(1.0);
        if !exact {
            n_steps = ratio.ceil() as usize;
        }

        let mut snapshots = vec![initial.clone()];
        let mut cum_d = vec![0.0];
        let mut cum_l6 = vec![0.0];
        let mut increments = Vec::with_capacity(n_steps);
        let (mut d_acc, mut l6_acc) = (0.0, 0.0);
        let mut halvings = 0;
        let mut cur = initial.clone();
        for i in 1..=n_steps {
            let target = if i == n_steps { t0 + config.t_end } else { t0 + i as f64 * config.dt };
            let dt = target - cur.time;
            let out = self.step_adaptive(&cur, dt, config, MAX_HALVINGS)?;
            cur = out.state;
            cur.time = target;
            d_acc += out.dissipation;
            l6_acc += out.l6;
            halvings += out.halvings;
            increments.push(out.dissipation);
            if i % config.observer_stride == 0 || i == n_steps {
                snapshots.push(cur.clone());
                cum_d.push(d_acc);
                cum_l6.push(l6_acc);
            }
        }
        Ok(Trajectory {
            snapshots,
            cumulative_dissipation: cum_d,
            cumulative_l6: cum_l6,
            dissipation_increments: increments,
            dt: config.dt,
            observer_stride: config.observer_stride,
            halvings,
        })
    }

    /// Largest candidate step for which Newton converges from the explicit
    /// predictor without halving, searching `dt_hi · 2^{-j}`.
    pub fn find_dt_max(&self, state: &SpectralState, config: &SolverConfig, dt_hi: f64) -> Option<f64> {
        (0..30)
            .map(|j| dt_hi * 0.5f64.powi(j))
            .find(|&dt| self.step_signed(state, dt, config).is_ok())
    }
}

/// Gaussian modal data with standard deviation `λ_k^{-1}`, rescaled so that
/// `‖U‖_H = radius`.
pub fn random_state<R: Rng + ?Sized>(basis: &SpectralBasis, rng: &mut R, radius: f64) -> SpectralState {
    let lam = basis.eigenvalues();
    let mut draw = |l: &f64| {
        let z: f64 = StandardNormal.sample(rng);
        z / l
    };
    let mut u: Vec<f64> = lam.iter().map(&mut draw).collect();
    let mut v: Vec<f64> = lam.iter().map(&mut draw).collect();
    let mut st = SpectralState { u: u.clone(), v: v.clone(), time: 0.0 };
    let norm = basis.h_norms(&st).map(|n| n.energy_sq.sqrt()).unwrap_or(0.0);
    if norm > 0.0 {
        let s = radius / norm;
        u.iter_mut().for_each(|x| *x *= s);
        v.iter_mut().for_each(|x| *x *= s);
    }
    st.u = u;
    st.v = v;
    st
}

/// Projects physical initial data `(u₀, u₁)` onto the modal space.
pub fn project_state<F, G>(basis: &SpectralBasis, u0: F, u1: G) -> SpectralState
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> f64,
{
    SpectralState {
        u: basis.to_modal_unchecked(&basis.sample(u0)),
        v: basis.to_modal_unchecked(&basis.sample(u1)),
        time: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NonlinearityProfile, PowerTerm};
    use std::f64::consts::PI;

    fn linear_profile(lin_damp: f64) -> NonlinearityProfile {
        // The audit needs coercive quintic damping; a tiny quintic coefficient
        // is negligible for small-amplitude single-mode tests.
        NonlinearityProfile::new(lin_damp, 1e-300, vec![])
    }

    #[test]
    fn rhs_linear_wave() {
        let b = SpectralBasis::new(1, 4, 3).unwrap();
        let a = linear_profile(0.0).audit(1.0).unwrap();
        let h = Forcing::zero(&b);
        let sys = GalerkinSystem::new(&b, &a, &h).unwrap();
        let s = SpectralState::new(&b, b.unit(0), vec![0.0; 4]).unwrap();
        let d = sys.rhs(&s).unwrap();
        assert_eq!(d.du, vec![0.0; 4]);
        assert!((d.dv[0] + 1.0).abs() < 1e-15);
        assert!(d.dv[1..].iter().all(|x| x.abs() < 1e-15));

        let h = Forcing::principal_mode(&b, 1.0).unwrap();
        let sys = GalerkinSystem::new(&b, &a, &h).unwrap();
        let d = sys.rhs(&SpectralState::zeros(&b)).unwrap();
        assert!((d.dv[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rhs_quintic_source_on_sine() {
        // u = sin x, so P[u⁵] follows sin⁵x = (10 sin x − 5 sin 3x + sin 5x)/16.
        let b = SpectralBasis::new(1, 6, 3).unwrap();
        let a = NonlinearityProfile::new(0.0, 1.0, vec![PowerTerm::new(1.0, 5.0)])
            .audit(1.0)
            .unwrap();
        let h = Forcing::zero(&b);
        let sys = GalerkinSystem::new(&b, &a, &h).unwrap();
        let c = (PI / 2.0).sqrt();
        let mut u = vec![0.0; 6];
        u[0] = c;
        let d = sys.rhs(&SpectralState::new(&b, u, vec![0.0; 6]).unwrap()).unwrap();
        let expect = [-c * (1.0 + 10.0 / 16.0), 0.0, c * 5.0 / 16.0, 0.0, -c / 16.0, 0.0];
        for (x, e) in d.dv.iter().zip(expect) {
            assert!((x - e).abs() < 1e-13, "{x} vs {e}");
        }
    }

    #[test]
    fn mismatched_lambda_rejected() {
        let b = SpectralBasis::new(2, 3, 3).unwrap();
        let a = linear_profile(1.0).audit(1.0).unwrap();
        let h = Forcing::zero(&b);
        assert!(GalerkinSystem::new(&b, &a, &h).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(0.0, 1.0).validate().is_err());
        assert!(SolverConfig::new(0.1, -1.0).validate().is_err());
        assert!(SolverConfig::new(0.1, 1.0).with_stride(0).validate().is_err());
        assert!(SolverConfig::new(0.1, 1.0).validate().is_ok());
    }

    #[test]
    fn time_reversal_linear_undamped() {
        let b = SpectralBasis::new(1, 8, 3).unwrap();
        let a = NonlinearityProfile::new(0.0, 1e-300, vec![]).audit(1.0).unwrap();
        let h = Forcing::zero(&b);
        let sys = GalerkinSystem::new(&b, &a, &h).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let s0 = random_state(&b, &mut rng, 0.5);
        let cfg = SolverConfig::new(0.01, 1.0);
        let fwd = sys.step_signed(&s0, 0.01, &cfg).unwrap().state;
        let back = sys.step_signed(&fwd, -0.01, &cfg).unwrap().state;
        for (x, y) in s0.u.iter().chain(&s0.v).zip(back.u.iter().chain(&back.v)) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    use rand::SeedableRng;

    #[test]
    fn random_state_has_requested_radius() {
        let b = SpectralBasis::new(2, 4, 3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let s = random_state(&b, &mut rng, 2.5);
        let n = b.h_norms(&s).unwrap();
        assert!((n.energy_sq.sqrt() - 2.5).abs() < 1e-12);
    }
}
