//! Stationary solutions of `−Δu + f(u) = h` in the Galerkin space.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::member_rng;
use super::report::{BoundCheck, ExperimentReport};
use crate::error::{Error, Result};
use crate::par;
use crate::solver::GalerkinSystem;

pub const STATIONARY_TOL: f64 = 1e-9;
const TARGET_TOL: f64 = 1e-11;
const UNIQUENESS_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationaryOptions {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Rerun from three random guesses when `f` is monotone.
    #[serde(default = "default_true")]
    pub check_uniqueness: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_max_iters() -> usize {
    100
}
fn default_restarts() -> usize {
    10
}
fn default_true() -> bool {
    true
}

impl Default for StationaryOptions {
    fn default() -> Self {
        Self {
            max_iters: default_max_iters(),
            restarts: default_restarts(),
            check_uniqueness: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationaryState {
    pub u: Vec<f64>,
    /// `‖−Δu + P f(u) − h‖` in modal coordinates.
    pub residual: f64,
    pub grad_sq: f64,
    pub lap_sq: f64,
    /// `‖h‖²/(ω²λ₁) + 2C_ν|Ω|/ω`
    pub grad_bound: f64,
    /// `‖h‖²/ω² + (2K_f/ω)·grad_bound`
    pub lap_bound: f64,
    pub iterations: usize,
    pub restarts_used: usize,
    /// Largest coefficient deviation among the uniqueness reruns.
    pub uniqueness_deviation: Option<f64>,
}

/// Relative slack for bounds that are attained exactly in the linear case.
const BOUND_ROUNDOFF: f64 = 1e-12;

impl StationaryState {
    pub fn grad_bound_ok(&self) -> bool {
        self.grad_sq <= self.grad_bound * (1.0 + BOUND_ROUNDOFF)
    }

    pub fn lap_bound_ok(&self) -> bool {
        self.lap_sq <= self.lap_bound * (1.0 + BOUND_ROUNDOFF)
    }

    pub fn unique_ok(&self) -> bool {
        self.uniqueness_deviation.is_none_or(|d| d <= UNIQUENESS_TOL)
    }

    pub fn passed(&self) -> bool {
        self.residual <= STATIONARY_TOL && self.grad_bound_ok() && self.lap_bound_ok() && self.unique_ok()
    }

    pub fn report(&self) -> ExperimentReport {
        let mut r = ExperimentReport::new("stationary")
            .fit("grad_sq", self.grad_sq)
            .fit("lap_sq", self.lap_sq)
            .fit("iterations", self.iterations as f64)
            .bound(BoundCheck::upper("newton residual", "|-Lap u + f(u) - h|", STATIONARY_TOL, self.residual))
            .bound(BoundCheck::upper(
                "gradient bound",
                "|grad u|^2 <= |h|^2/(omega^2 lambda1) + 2 C_nu |Omega| / omega",
                self.grad_bound,
                self.grad_sq,
            ))
            .bound(BoundCheck::upper(
                "H2 bound",
                "|Lap u|^2 <= |h|^2/omega^2 + (2 K_f/omega) * gradient bound",
                self.lap_bound,
                self.lap_sq,
            ));
        if let Some(d) = self.uniqueness_deviation {
            r = r.bound(BoundCheck::upper(
                "uniqueness",
                "max deviation over 3 random starts",
                UNIQUENESS_TOL,
                d,
            ));
        }
        r
    }
}

struct Solver<'s, 'a> {
    sys: &'s GalerkinSystem<'a>,
}

impl Solver<'_, '_> {
    fn residual(&self, u: &[f64]) -> Vec<f64> {
        let b = self.sys.basis;
        let p = self.sys.profile.profile();
        let ug = b.to_physical_unchecked(u);
        let fg: Vec<f64> = ug.iter().map(|&s| p.f(s)).collect();
        let pf = b.to_modal_unchecked(&fg);
        b.eigenvalues()
            .iter()
            .zip(u)
            .zip(pf)
            .zip(self.sys.forcing.coeffs())
            .map(|(((l, u), f), h)| l * u + f - h)
            .collect()
    }

    fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        let b = self.sys.basis;
        let p = self.sys.profile.profile();
        let ug = b.to_physical_unchecked(u);
        let fp: Vec<f64> = ug.iter().map(|&s| p.fp(s)).collect();
        let mut j = b.galerkin_matrix(&fp).expect("grid length matches basis");
        for (i, l) in b.eigenvalues().iter().enumerate() {
            j[(i, i)] += l;
        }
        j
    }

    /// Damped Newton from `guess`. Returns `(u, ‖R‖, iterations)`.
    fn newton(&self, guess: &[f64], max_iters: usize) -> (Vec<f64>, f64, usize) {
        let mut u = guess.to_vec();
        let mut r = self.residual(&u);
        let mut phi = 0.5 * dot(&r, &r);
        for it in 0..max_iters {
            let norm = (2.0 * phi).sqrt();
            if norm <= TARGET_TOL {
                return (u, norm, it);
            }
            let jac = self.jacobian(&u);
            let rv = DVector::from_column_slice(&r);
            let grad = &jac * &rv;
            let newton_dir = jac.clone().lu().solve(&(-&rv)).filter(|d| d.iter().all(|x| x.is_finite()));
            let dir = match newton_dir {
                Some(d) if d.dot(&grad) < 0.0 => d,
                _ => -grad.clone(),
            };
            let slope = dir.dot(&grad);
            let mut alpha = 1.0;
            let mut accepted = false;
            while alpha > 1e-12 {
                let trial: Vec<f64> = u.iter().zip(dir.iter()).map(|(x, d)| x + alpha * d).collect();
                let rt = self.residual(&trial);
                let pt = 0.5 * dot(&rt, &rt);
                if pt.is_finite() && pt <= phi + 1e-4 * alpha * slope {
                    u = trial;
                    r = rt;
                    phi = pt;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                // Stagnation at roundoff level.
                return (u, (2.0 * phi).sqrt(), it + 1);
            }
        }
        (u, (2.0 * phi).sqrt(), max_iters)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Bounds on `‖∇u‖²` and `‖Δu‖²` for stationary solutions.
pub fn stationary_bounds(sys: &GalerkinSystem<'_>) -> (f64, f64) {
    let c = sys.profile.report();
    let h2 = sys.forcing.norm().powi(2);
    let w = c.omega;
    let grad = h2 / (w * w * c.lambda1) + 2.0 * c.c_nu * sys.basis.domain_volume() / w;
    let lap = h2 / (w * w) + 2.0 * c.k_f / w * grad;
    (grad, lap)
}

/// Random modal guess with `‖∇u‖ = radius`.
pub fn random_guess<R: Rng + ?Sized>(sys: &GalerkinSystem<'_>, rng: &mut R, radius: f64) -> Vec<f64> {
    let lam = sys.basis.eigenvalues();
    let mut u: Vec<f64> = lam
        .iter()
        .map(|l| {
            let z: f64 = StandardNormal.sample(rng);
            z / l
        })
        .collect();
    let g: f64 = lam.iter().zip(&u).map(|(l, x)| l * x * x).sum::<f64>().sqrt();
    if g > 0.0 {
        u.iter_mut().for_each(|x| *x *= radius / g);
    }
    u
}

fn guess_radius(sys: &GalerkinSystem<'_>) -> f64 {
    stationary_bounds(sys).0.sqrt().max(1.0)
}

fn solve_once(sys: &GalerkinSystem<'_>, guess: &[f64], opts: &StationaryOptions, stream: usize) -> Result<(Vec<f64>, f64, usize, usize)> {
    let solver = Solver { sys };
    let mut rng = member_rng(opts.seed, stream);
    let radius = guess_radius(sys);
    let mut start = guess.to_vec();
    let mut total = 0;
    let mut best = f64::INFINITY;
    for attempt in 0..=opts.restarts {
        let (u, res, iters) = solver.newton(&start, opts.max_iters);
        total += iters;
        if res <= STATIONARY_TOL {
            return Ok((u, res, total, attempt));
        }
        best = best.min(res);
        // Perturb the original guess at a growing scale.
        let scale = radius * (attempt + 1) as f64 / opts.restarts.max(1) as f64;
        let kick = random_guess(sys, &mut rng, scale);
        start = guess.iter().zip(&kick).map(|(g, k)| g + k).collect();
    }
    Err(Error::NewtonDivergence {
        iters: total,
        residual: best,
    })
}

/// Solves `−Δu + P f(u) = h` from `guess` with damped Newton and restarts.
pub fn solve_stationary(sys: &GalerkinSystem<'_>, guess: &[f64], opts: &StationaryOptions) -> Result<StationaryState> {
    if guess.len() != sys.basis.len() {
        return Err(Error::SizeMismatch {
            expected: sys.basis.len(),
            found: guess.len(),
        });
    }
    if guess.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("initial guess".into()));
    }
    let (u, residual, iterations, restarts_used) = solve_once(sys, guess, opts, 0)?;
    let uniqueness_deviation = if opts.check_uniqueness && sys.profile.is_monotone_source() {
        let radius = guess_radius(sys);
        let reruns = par::try_map(&[1usize, 2, 3], |&k| {
            let mut rng = member_rng(opts.seed ^ 0x5eed, k);
            let g = random_guess(sys, &mut rng, radius);
            solve_once(sys, &g, opts, 100 + k).map(|r| r.0)
        })?;
        Some(
            reruns
                .iter()
                .flat_map(|w| w.iter().zip(&u).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max),
        )
    } else {
        None
    };
    let lam = sys.basis.eigenvalues();
    let grad_sq = lam.iter().zip(&u).map(|(l, x)| l * x * x).sum();
    let lap_sq = lam.iter().zip(&u).map(|(l, x)| l * l * x * x).sum();
    let (grad_bound, lap_bound) = stationary_bounds(sys);
    Ok(StationaryState {
        u,
        residual,
        grad_sq,
        lap_sq,
        grad_bound,
        lap_bound,
        iterations,
        restarts_used,
        uniqueness_deviation,
    })
}

/// Distinct stationary states found from the zero start and `starts` random ones.
pub fn stationary_set(sys: &GalerkinSystem<'_>, starts: usize, opts: &StationaryOptions) -> Result<Vec<StationaryState>> {
    let radius = guess_radius(sys);
    let single = StationaryOptions {
        check_uniqueness: false,
        ..*opts
    };
    let found = par::map_range(starts + 1, |i| {
        let guess = if i == 0 {
            vec![0.0; sys.basis.len()]
        } else {
            let mut rng = member_rng(opts.seed ^ 0x0057a7, i);
            random_guess(sys, &mut rng, radius)
        };
        solve_stationary(sys, &guess, &StationaryOptions { seed: opts.seed.wrapping_add(i as u64), ..single })
    });
    let mut set: Vec<StationaryState> = Vec::new();
    let mut last_err = None;
    for r in found {
        match r {
            Ok(s) => {
                let dup = set.iter().any(|t| {
                    t.u.iter().zip(&s.u).all(|(a, b)| (a - b).abs() <= 1e-6)
                });
                if !dup {
                    set.push(s);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    if set.is_empty() {
        return Err(last_err.unwrap_or_else(|| Error::InvalidInput("no starts".into())));
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Forcing, NonlinearityProfile, PowerTerm};
    use crate::spectral::SpectralBasis;

    #[test]
    fn zero_forcing_quintic_gives_zero() {
        let b = SpectralBasis::new(1, 8, 3).unwrap();
        let p = NonlinearityProfile::new(0.0, 1.0, vec![PowerTerm::new(1.0, 5.0)]).audit(1.0).unwrap();
        let h = Forcing::zero(&b);
        let sys = GalerkinSystem::new(&b, &p, &h).unwrap();
        let s = solve_stationary(&sys, &[0.3; 8], &StationaryOptions::default()).unwrap();
        assert!(s.residual <= STATIONARY_TOL);
        assert!(s.u.iter().all(|x| x.abs() < 1e-9));
        assert!(s.passed());
    }

    #[test]
    fn wrong_guess_length_rejected() {
        let b = SpectralBasis::new(1, 4, 3).unwrap();
        let p = NonlinearityProfile::new(0.0, 1.0, vec![PowerTerm::new(1.0, 5.0)]).audit(1.0).unwrap();
        let h = Forcing::zero(&b);
        let sys = GalerkinSystem::new(&b, &p, &h).unwrap();
        assert!(matches!(
            solve_stationary(&sys, &[0.0; 3], &StationaryOptions::default()),
            Err(Error::SizeMismatch { .. })
        ));
    }
}
