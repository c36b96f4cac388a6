//! Nonlinearities, forcing, and the energy functional.
//!
//! The source is an odd power sum `f(s) = Σ a_i |s|^{p_i-1} s` with
//! `p_i ∈ [1, 5]`; the damping is `g(s) = κ₂ s + κ |s|⁴ s`. Profiles must pass
//! [`NonlinearityProfile::audit`] before solvers accept them; the audit fixes
//! the structural constants (`κ₀, κ₁, L_f, C_f, ν, C_ν, ω, K_f`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{SpectralBasis, SpectralState};

pub const DEFAULT_AUDIT_RANGE: f64 = 10.0;
pub const DEFAULT_AUDIT_SAMPLES: usize = 20_001;
pub const MIN_AUDIT_SAMPLES: usize = 10_000;
/// Resolution of the `ν` search grid on `[0, λ₁)`.
const NU_GRID: usize = 10_000;
/// Multiplicative safety applied to `K_f`.
const K_F_SAFETY: f64 = 1.05;

/// One term `a |s|^{p-1} s` of the source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub coeff: f64,
    pub exponent: f64,
}

impl PowerTerm {
    pub fn new(coeff: f64, exponent: f64) -> Self {
        Self { coeff, exponent }
    }

    fn is_integer(&self) -> bool {
        self.exponent.fract() == 0.0
    }

    /// `|s|^e` with an integer fast path.
    fn abs_pow(&self, s: f64, e: f64) -> f64 {
        let m = s.abs();
        if e == 0.0 {
            1.0
        } else if self.is_integer() {
            m.powi(e as i32)
        } else {
            m.powf(e)
        }
    }

    pub fn f(&self, s: f64) -> f64 {
        self.coeff * self.abs_pow(s, self.exponent - 1.0) * s
    }

    pub fn fp(&self, s: f64) -> f64 {
        self.coeff * self.exponent * self.abs_pow(s, self.exponent - 1.0)
    }

    pub fn fpp(&self, s: f64) -> f64 {
        let p = self.exponent;
        if p == 1.0 {
            return 0.0;
        }
        if s == 0.0 {
            return if p < 2.0 { f64::INFINITY } else { 0.0 };
        }
        self.coeff * p * (p - 1.0) * self.abs_pow(s, p - 2.0) * s.signum()
    }

    pub fn antiderivative(&self, s: f64) -> f64 {
        let p = self.exponent;
        self.coeff * self.abs_pow(s, p + 1.0) / (p + 1.0)
    }
}

/// Linear-plus-quintic monotone damping `g(s) = κ₂ s + κ s⁵`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Damping {
    pub linear: f64,
    pub quintic: f64,
}

impl Damping {
    pub fn g(&self, s: f64) -> f64 {
        let s2 = s * s;
        s * (self.linear + self.quintic * s2 * s2)
    }

    pub fn gp(&self, s: f64) -> f64 {
        let s2 = s * s;
        self.linear + 5.0 * self.quintic * s2 * s2
    }
}

/// Raw (unaudited) parameters of `f` and `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityProfile {
    pub damping: Damping,
    pub source: Vec<PowerTerm>,
}

impl NonlinearityProfile {
    pub fn new(damping_linear: f64, damping_quintic: f64, source: Vec<PowerTerm>) -> Self {
        Self {
            damping: Damping {
                linear: damping_linear,
                quintic: damping_quintic,
            },
            source,
        }
    }

    pub fn f(&self, s: f64) -> f64 {
        self.source.iter().map(|t| t.f(s)).sum()
    }

    pub fn fp(&self, s: f64) -> f64 {
        self.source.iter().map(|t| t.fp(s)).sum()
    }

    pub fn fpp(&self, s: f64) -> f64 {
        self.source.iter().map(|t| t.fpp(s)).sum()
    }

    /// `F(s) = ∫₀^s f`.
    pub fn antiderivative(&self, s: f64) -> f64 {
        self.source.iter().map(|t| t.antiderivative(s)).sum()
    }

    pub fn g(&self, s: f64) -> f64 {
        self.damping.g(s)
    }

    pub fn gp(&self, s: f64) -> f64 {
        self.damping.gp(s)
    }

    /// True when every source coefficient is nonnegative, so `f` is nondecreasing.
    pub fn is_monotone_source(&self) -> bool {
        self.source.iter().all(|t| t.coeff >= 0.0)
    }

    /// Sum of coefficients sharing the largest exponent with a nonzero sum.
    fn leading(&self) -> Option<(f64, f64)> {
        let mut exps: Vec<f64> = self.source.iter().map(|t| t.exponent).collect();
        exps.sort_by(|a, b| b.total_cmp(a));
        exps.dedup();
        exps.into_iter().find_map(|p| {
            let a: f64 = self
                .source
                .iter()
                .filter(|t| t.exponent == p)
                .map(|t| t.coeff)
                .sum();
            (a != 0.0).then_some((p, a))
        })
    }

    fn coeff_sum_at(&self, p: f64) -> f64 {
        self.source
            .iter()
            .filter(|t| t.exponent == p)
            .map(|t| t.coeff)
            .sum()
    }

    fn validate(&self) -> Result<()> {
        let d = self.damping;
        if !(d.linear.is_finite() && d.quintic.is_finite()) {
            return Err(Error::InvalidProfile("damping coefficients must be finite".into()));
        }
        if d.linear < 0.0 || d.quintic < 0.0 {
            return Err(Error::InvalidProfile(
                "damping coefficients must be nonnegative (g increasing)".into(),
            ));
        }
        for t in &self.source {
            if !t.coeff.is_finite() || !t.exponent.is_finite() {
                return Err(Error::InvalidProfile("source terms must be finite".into()));
            }
            if !(1.0..=5.0).contains(&t.exponent) {
                return Err(Error::InvalidProfile(format!(
                    "source exponent {} outside [1, 5]",
                    t.exponent
                )));
            }
        }
        Ok(())
    }

    /// Audits the structural inequalities with the default sampling grid.
    pub fn audit(&self, lambda1: f64) -> Result<AuditedProfile> {
        self.audit_with(lambda1, DEFAULT_AUDIT_RANGE, DEFAULT_AUDIT_SAMPLES)
    }

    /// Samples `[-range, range]` at `samples` points, fits the tightest
    /// constants, and checks every inequality. Asymptotic behaviour beyond the
    /// grid is settled analytically from the leading power.
    pub fn audit_with(&self, lambda1: f64, range: f64, samples: usize) -> Result<AuditedProfile> {
        self.validate()?;
        if !(lambda1 > 0.0 && lambda1.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda1 must be positive (got {lambda1})")));
        }
        if range < DEFAULT_AUDIT_RANGE || samples < MIN_AUDIT_SAMPLES {
            return Err(Error::InvalidInput(format!(
                "audit grid must span [-S, S] with S >= {DEFAULT_AUDIT_RANGE} and >= {MIN_AUDIT_SAMPLES} samples"
            )));
        }
        let grid: Vec<f64> = (0..samples)
            .map(|i| -range + 2.0 * range * i as f64 / (samples - 1) as f64)
            .collect();
        let mut notes = Vec::new();

        // Damping: κ₀|s|⁴ ≤ g'(s) ≤ κ₁(1 + |s|⁴).
        let d = self.damping;
        if d.quintic <= 0.0 {
            return Err(Error::AssumptionViolation {
                inequality: "hyp_g'".into(),
                witness: range,
            });
        }
        let tail_g = 5.0 * d.quintic;
        let mut kappa0 = tail_g;
        let mut kappa1 = tail_g;
        for &s in &grid {
            let gp = d.gp(s);
            let s4 = s.powi(4);
            if s != 0.0 {
                kappa0 = kappa0.min(gp / s4);
            }
            kappa1 = kappa1.max(gp / (1.0 + s4));
        }
        notes.push(format!(
            "g'(s)/|s|^4 -> {tail_g} and g'(s)/(1+|s|^4) -> {tail_g} as |s| -> inf"
        ));

        // Source: |f''| ≤ L_f(1 + |s|³), |f'| ≤ C_f(1 + |s|⁴).
        if let Some(t) = self
            .source
            .iter()
            .find(|t| t.coeff != 0.0 && t.exponent > 1.0 && t.exponent < 2.0)
        {
            let witness = grid.iter().copied().find(|&s| s > 0.0).unwrap_or(1e-3);
            let _ = t;
            return Err(Error::AssumptionViolation {
                inequality: "hyp_f''".into(),
                witness,
            });
        }
        let tail_lf = (20.0 * self.coeff_sum_at(5.0)).abs();
        let tail_cf = (5.0 * self.coeff_sum_at(5.0)).abs();
        let mut l_f = tail_lf;
        let mut c_f = tail_cf;
        for &s in &grid {
            let a = s.abs();
            l_f = l_f.max(self.fpp(s).abs() / (1.0 + a.powi(3)));
            c_f = c_f.max(self.fp(s).abs() / (1.0 + a.powi(4)));
        }
        notes.push(format!(
            "|f''|/(1+|s|^3) -> {tail_lf} and |f'|/(1+|s|^4) -> {tail_cf} as |s| -> inf"
        ));

        // lim f(s)/s > -λ₁.
        let limit = match self.leading() {
            None => 0.0,
            Some((p, a)) if p > 1.0 => a.signum() * f64::INFINITY,
            Some((_, a)) => a,
        };
        notes.push(format!("lim f(s)/s = {limit} (leading power)"));
        if limit <= -lambda1 {
            return Err(Error::AssumptionViolation {
                inequality: "hyp-inf-f".into(),
                witness: range,
            });
        }

        // ν: smallest grid value in [0, λ₁) with F ≤ f s + (ν/2)s² everywhere and
        // F + (ν/2)s² bounded below at infinity.
        let mut nu_needed = 0.0f64;
        let mut nu_witness = 0.0;
        for &s in &grid {
            if s == 0.0 {
                continue;
            }
            let need = 2.0 * (self.antiderivative(s) - self.f(s) * s) / (s * s);
            if need > nu_needed {
                nu_needed = need;
                nu_witness = s;
            }
        }
        if let Some((p, a)) = self.leading() {
            if p == 1.0 && a < 0.0 {
                // F + (ν/2)s² = (a + ν)s²/2
                if -a > nu_needed {
                    nu_needed = -a;
                    nu_witness = range;
                }
            }
        }
        let step = lambda1 / NU_GRID as f64;
        let nu_index = (0..NU_GRID).find(|&i| i as f64 * step >= nu_needed - 1e-12);
        let nu = match nu_index {
            Some(i) => i as f64 * step,
            None => {
                return Err(Error::AssumptionViolation {
                    inequality: "hyp_f2".into(),
                    witness: nu_witness,
                })
            }
        };
        let shifted = |s: f64| self.antiderivative(s) + 0.5 * nu * s * s;
        let (min_shifted, _) = refined_min(&grid, shifted);
        let c_nu = (-min_shifted).max(0.0);
        for &s in &grid {
            let fs = self.antiderivative(s);
            let upper = self.f(s) * s + 0.5 * nu * s * s;
            let tol = 1e-12 * (1.0 + fs.abs() + upper.abs());
            if fs < -c_nu - 0.5 * nu * s * s - tol || fs > upper + tol {
                return Err(Error::AssumptionViolation {
                    inequality: "hyp_f2".into(),
                    witness: s,
                });
            }
        }
        let omega = 1.0 - nu / lambda1;

        // K_f from the global lower bound of f'.
        let (min_fp, _) = refined_min(&grid, |s| self.fp(s));
        let k_f = K_F_SAFETY * (-min_fp).max(0.0);
        // (μ, N) with f' ≥ -μ for |s| > N, and the structural K_f = max{μ, C_f(1+N⁴)}.
        let tail_fp = self.fp(range).min(self.fp(-range));
        let mu = (-tail_fp).max(0.0);
        let mut n_threshold = 0.0;
        for &s in grid.iter().rev().filter(|s| **s >= 0.0) {
            if self.fp(s) < -mu - 1e-12 || self.fp(-s) < -mu - 1e-12 {
                n_threshold = s;
                break;
            }
        }
        let k_f_structural = mu.max(c_f * (1.0 + n_threshold.powi(4)));

        let constants = AuditReport {
            lambda1,
            kappa0,
            kappa1,
            kappa2: d.linear,
            l_f,
            c_f,
            nu,
            c_nu,
            omega,
            k_f,
            mu,
            n_threshold,
            k_f_structural,
            sample_range: range,
            samples,
            tail_notes: notes,
        };
        Ok(AuditedProfile {
            profile: self.clone(),
            report: constants,
        })
    }
}

/// Minimum over the grid refined by golden-section search around the argmin.
fn refined_min<F: Fn(f64) -> f64>(grid: &[f64], f: F) -> (f64, f64) {
    let (mut best_i, mut best) = (0, f64::INFINITY);
    for (i, &s) in grid.iter().enumerate() {
        let v = f(s);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let lo = grid[best_i.saturating_sub(1)];
    let hi = grid[(best_i + 1).min(grid.len() - 1)];
    let (mut a, mut b) = (lo, hi);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let s = 0.5 * (a + b);
    let v = f(s);
    if v < best {
        (v, s)
    } else {
        (best, grid[best_i])
    }
}

/// Constants certified by the audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub lambda1: f64,
    pub kappa0: f64,
    pub kappa1: f64,
    /// `min g' = g'(0)` for the implemented family.
    pub kappa2: f64,
    pub l_f: f64,
    pub c_f: f64,
    pub nu: f64,
    pub c_nu: f64,
    pub omega: f64,
    /// Global lower-bound constant: `f' ≥ -K_f / 1.05`.
    pub k_f: f64,
    pub mu: f64,
    pub n_threshold: f64,
    /// `max{μ, C_f(1 + N⁴)}`.
    pub k_f_structural: f64,
    pub sample_range: f64,
    pub samples: usize,
    pub tail_notes: Vec<String>,
}

/// A profile that passed the audit. Only this type is accepted by solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditedProfile {
    profile: NonlinearityProfile,
    report: AuditReport,
}

impl AuditedProfile {
    pub fn profile(&self) -> &NonlinearityProfile {
        &self.profile
    }

    pub fn report(&self) -> &AuditReport {
        &self.report
    }

    pub fn omega(&self) -> f64 {
        self.report.omega
    }

    pub fn lambda1(&self) -> f64 {
        self.report.lambda1
    }
}

impl std::ops::Deref for AuditedProfile {
    type Target = NonlinearityProfile;
    fn deref(&self) -> &NonlinearityProfile {
        &self.profile
    }
}

/// Time-independent external force `h` in modal coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forcing {
    coeffs: Vec<f64>,
}

impl Forcing {
    pub fn zero(basis: &SpectralBasis) -> Self {
        Self {
            coeffs: vec![0.0; basis.len()],
        }
    }

    pub fn from_coeffs(basis: &SpectralBasis, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::SizeMismatch {
                expected: basis.len(),
                found: coeffs.len(),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("forcing".into()));
        }
        Ok(Self { coeffs })
    }

    /// `h = norm · φ_{(1,…,1)}`.
    pub fn principal_mode(basis: &SpectralBasis, norm: f64) -> Result<Self> {
        let mut c = vec![0.0; basis.len()];
        c[basis.principal_index()] = norm;
        Self::from_coeffs(basis, c)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `‖h‖` by Parseval.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySnapshot {
    pub total: f64,
    /// `½‖u_t‖²`
    pub kinetic: f64,
    /// `½‖∇u‖²`
    pub gradient: f64,
    /// `∫ F(u)`
    pub potential: f64,
    /// `∫ h u`
    pub forcing_term: f64,
}

/// `E(U) = ½‖U‖²_H + ∫F(u) − ∫hu`.
pub fn energy(
    state: &SpectralState,
    profile: &AuditedProfile,
    forcing: &Forcing,
    basis: &SpectralBasis,
) -> Result<EnergySnapshot> {
    let norms = basis.h_norms(state)?;
    let ug = basis.to_physical_unchecked(&state.u);
    Ok(energy_with_grid(state, &ug, norms.grad_sq, norms.vel_sq, profile, forcing, basis))
}

pub(crate) fn energy_with_grid(
    state: &SpectralState,
    u_grid: &[f64],
    grad_sq: f64,
    vel_sq: f64,
    profile: &NonlinearityProfile,
    forcing: &Forcing,
    basis: &SpectralBasis,
) -> EnergySnapshot {
    let potential =
        basis.cell_weight() * u_grid.iter().map(|&s| profile.antiderivative(s)).sum::<f64>();
    let forcing_term: f64 = forcing
        .coeffs
        .iter()
        .zip(&state.u)
        .map(|(h, u)| h * u)
        .sum();
    let kinetic = 0.5 * vel_sq;
    let gradient = 0.5 * grad_sq;
    EnergySnapshot {
        total: kinetic + gradient + potential - forcing_term,
        kinetic,
        gradient,
        potential,
        forcing_term,
    }
}

/// `∫_Ω g(u_t) u_t dx` for velocity samples on the grid.
pub fn dissipation_density(v_grid: &[f64], profile: &NonlinearityProfile, basis: &SpectralBasis) -> Result<f64> {
    if v_grid.len() != basis.grid_len() {
        return Err(Error::SizeMismatch {
            expected: basis.grid_len(),
            found: v_grid.len(),
        });
    }
    Ok(dissipation_unchecked(v_grid, profile, basis))
}

pub(crate) fn dissipation_unchecked(v_grid: &[f64], profile: &NonlinearityProfile, basis: &SpectralBasis) -> f64 {
    basis.cell_weight() * v_grid.iter().map(|&s| profile.g(s) * s).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn quintic() -> NonlinearityProfile {
        NonlinearityProfile::new(0.0, 1.0, vec![PowerTerm::new(1.0, 5.0)])
    }

    #[test]
    fn pure_quintic_damping_constants() {
        let a = quintic().audit(1.0).unwrap();
        let r = a.report();
        assert!((r.kappa0 - 5.0).abs() < 1e-12);
        assert!((r.kappa1 - 5.0).abs() < 1e-12);
        assert_eq!(a.gp(2.0), 80.0);
    }

    #[test]
    fn quintic_source_constants() {
        let p = quintic();
        assert_eq!(p.antiderivative(2.0), 64.0 / 6.0);
        assert_eq!(p.fpp(2.0), 160.0);
        let r = p.audit(1.0).unwrap().report().clone();
        assert!((r.l_f - 20.0).abs() < 1e-9, "L_f = {}", r.l_f);
        assert!((r.c_f - 5.0).abs() < 1e-9);
        assert_eq!(r.nu, 0.0);
        assert_eq!(r.c_nu, 0.0);
        assert_eq!(r.omega, 1.0);
        assert_eq!(r.k_f, 0.0);
    }

    #[test]
    fn negative_linear_source_shifts_nu() {
        let p = NonlinearityProfile::new(1.0, 1.0, vec![PowerTerm::new(-0.5, 1.0)]);
        let r = p.audit(1.0).unwrap().report().clone();
        assert!((r.nu - 0.5).abs() < 1e-9);
        assert!((r.omega - 0.5).abs() < 1e-9);
        assert!(r.c_nu < 1e-12);
        assert!((r.k_f - 0.5 * 1.05).abs() < 1e-12);
    }

    #[test]
    fn strongly_negative_linear_source_rejected() {
        let p = NonlinearityProfile::new(1.0, 1.0, vec![PowerTerm::new(-2.0, 1.0)]);
        match p.audit(1.0) {
            Err(Error::AssumptionViolation { inequality, .. }) => assert_eq!(inequality, "hyp-inf-f"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cubic_minus_linear() {
        let p = NonlinearityProfile::new(1.0, 1.0, vec![PowerTerm::new(1.0, 3.0), PowerTerm::new(-1.0, 1.0)]);
        // λ₁ = 1 sits exactly on the boundary of the ν range: F ≤ fs + νs²/2 needs ν ≥ −f'(0) = 1.
        match p.audit(1.0) {
            Err(Error::AssumptionViolation { inequality, .. }) => assert_eq!(inequality, "hyp_f2"),
            other => panic!("unexpected {other:?}"),
        }
        let r = p.audit(2.0).unwrap().report().clone();
        assert!((r.nu - 1.0).abs() < 1e-9);
        assert!((r.omega - 0.5).abs() < 1e-9);
        // min f' = -1 at s = 0
        assert!((r.k_f - 1.05).abs() < 1e-9);
        assert_eq!(r.mu, 0.0);
    }

    #[test]
    fn coercive_damping_required() {
        let p = NonlinearityProfile::new(1.0, 0.0, vec![PowerTerm::new(1.0, 5.0)]);
        assert!(matches!(p.audit(1.0), Err(Error::AssumptionViolation { .. })));
    }

    #[test]
    fn singular_second_derivative_rejected() {
        let p = NonlinearityProfile::new(0.0, 1.0, vec![PowerTerm::new(1.0, 1.5)]);
        match p.audit(1.0) {
            Err(Error::AssumptionViolation { inequality, .. }) => assert_eq!(inequality, "hyp_f''"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_exponent_and_grid() {
        let p = NonlinearityProfile::new(0.0, 1.0, vec![PowerTerm::new(1.0, 7.0)]);
        assert!(matches!(p.audit(1.0), Err(Error::InvalidProfile(_))));
        assert!(quintic().audit_with(1.0, 5.0, 20_001).is_err());
        assert!(quintic().audit_with(1.0, 10.0, 100).is_err());
        let p = NonlinearityProfile::new(-1.0, 1.0, vec![]);
        assert!(matches!(p.audit(1.0), Err(Error::InvalidProfile(_))));
    }

    #[test]
    fn energy_of_sine_with_quintic_potential() {
        let b = SpectralBasis::new(1, 8, 3).unwrap();
        let a = quintic().audit(1.0).unwrap();
        let mut u = vec![0.0; 8];
        u[0] = (PI / 2.0).sqrt();
        let s = SpectralState::new(&b, u, vec![0.0; 8]).unwrap();
        let e = energy(&s, &a, &Forcing::zero(&b), &b).unwrap();
        let expect = PI / 4.0 + 5.0 * PI / 96.0;
        assert!((e.total - expect).abs() < 1e-13);
        assert_eq!(e.total, e.kinetic + e.gradient + e.potential - e.forcing_term);
    }

    #[test]
    fn energy_trivial_cases() {
        let b = SpectralBasis::new(2, 3, 3).unwrap();
        let a = quintic().audit(2.0).unwrap();
        let z = SpectralState::zeros(&b);
        assert_eq!(energy(&z, &a, &Forcing::zero(&b), &b).unwrap().total, 0.0);
        let mut v = vec![0.0; b.len()];
        v[2] = 2.0;
        let s = SpectralState::new(&b, vec![0.0; b.len()], v).unwrap();
        assert!((energy(&s, &a, &Forcing::zero(&b), &b).unwrap().total - 2.0).abs() < 1e-15);
    }

    #[test]
    fn dissipation_examples() {
        let b = SpectralBasis::new(1, 4, 3).unwrap();
        let sine = b.sample(|x| x[0].sin());
        let quint = NonlinearityProfile::new(0.0, 1.0, vec![]);
        let lin = NonlinearityProfile::new(1.0, 0.0, vec![]);
        assert!((dissipation_density(&sine, &quint, &b).unwrap() - 5.0 * PI / 16.0).abs() < 1e-13);
        assert!((dissipation_density(&sine, &lin, &b).unwrap() - PI / 2.0).abs() < 1e-13);
        assert_eq!(dissipation_density(&vec![0.0; b.grid_len()], &quint, &b).unwrap(), 0.0);
    }

    #[test]
    fn forcing_norm_is_parseval() {
        let b = SpectralBasis::new(2, 3, 3).unwrap();
        let h = Forcing::principal_mode(&b, 0.5).unwrap();
        assert_eq!(h.norm(), 0.5);
        let g = b.to_physical(h.coeffs()).unwrap();
        assert!((b.lp_norm(&g, 2.0).unwrap() - 0.5).abs() < 1e-13);
        assert!(Forcing::from_coeffs(&b, vec![1.0]).is_err());
    }
}
