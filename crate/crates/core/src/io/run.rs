//! Executes a config and writes hashed artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::checkpoint::Checkpoint;
use super::config::{Experiment, RunConfig};
use crate::diagnostics::{
    energy_audit, fmt17, gradient_check, lyapunov_identity, default_lyapunov_eps, steklov_difference,
    steklov_limit_check, GradientCheck,
};
use crate::error::Result;
use crate::experiments::dimension::embed_cloud;
use crate::experiments::{
    absorbing_ball, attractor_sample, continuous_dependence, fractal_dimension_estimate, geometric_radii,
    h2_tracking, holder_weak_norm, member_rng, perturbation_scaling, quasi_stability_fit, solve_stationary,
    stationary_set, AttractorParams, BoundCheck, ExperimentReport, StationaryOptions,
};
use crate::model::{NonlinearityProfile, PowerTerm};
use crate::solver::{random_state, GalerkinSystem, SolverConfig, Trajectory};
use crate::spectral::{SpectralBasis, SpectralState};
use crate::stats::observed_order;

pub const MANIFEST_NAME: &str = "manifest.json";
pub const SCHEME_LEVEL_NOTE: &str =
    "3D results are scheme-level checks only; the energy-critical 3D regime is not reproduced quantitatively";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub seed: u64,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: ExperimentReport,
    pub manifest: Manifest,
    pub output_dir: PathBuf,
}

struct Artifacts {
    dir: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, content: &str) -> Result<()> {
        fs::write(self.dir.join(name), content)?;
        self.entries.push(ManifestEntry {
            path: name.to_string(),
            sha256: sha256_hex(content.as_bytes()),
            bytes: content.len() as u64,
        });
        Ok(())
    }

    fn names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.path.clone()).collect()
    }

    fn finish(mut self, experiment: &str, seed: u64) -> Result<Manifest> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            experiment: experiment.to_string(),
            seed,
            entries: self.entries,
        };
        fs::write(self.dir.join(MANIFEST_NAME), serde_json::to_string_pretty(&manifest)?)?;
        Ok(manifest)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// CSV with a fixed header and 17 significant digits.
pub fn to_csv<I: IntoIterator<Item = Vec<f64>>>(header: &str, rows: I) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.into_iter().map(fmt17).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Runs the configured experiment into `config.output_dir`.
///
/// Failures still leave an `error.json` record and a manifest behind.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    let experiment = config.experiment.clone().unwrap_or(Experiment::Simulate {});
    let mut art = Artifacts::new(&config.output_dir)?;
    // The copy lives in the output directory, so its location is recorded as ".".
    let resolved = RunConfig {
        output_dir: PathBuf::from("."),
        ..config.clone()
    };
    art.write("config.toml", &resolved.to_toml())?;
    match execute(config, &experiment, &mut art) {
        Ok(mut report) => {
            if config.basis.dim == 3 {
                report = report.input("scope", "scheme-level checks only").note(SCHEME_LEVEL_NOTE);
            }
            report = report.input("seed", config.seed).input("basis", config.basis);
            report.artifacts = art.names();
            art.write("report.json", &report.to_json())?;
            let manifest = art.finish(experiment.name(), config.seed)?;
            Ok(RunOutcome {
                report,
                manifest,
                output_dir: config.output_dir.clone(),
            })
        }
        Err(e) => {
            let record = serde_json::json!({
                "experiment": experiment.name(),
                "error": e.kind(),
                "message": e.to_string(),
            });
            art.write("error.json", &serde_json::to_string_pretty(&record)?)?;
            art.finish(experiment.name(), config.seed)?;
            Err(e)
        }
    }
}

fn gradient_bounds(report: ExperimentReport, checks: &[GradientCheck]) -> ExperimentReport {
    let ratio = checks
        .iter()
        .map(|c| c.max_abs_residual / c.tolerance)
        .fold(0.0, f64::max);
    let inc = checks
        .iter()
        .map(|c| c.max_energy_increase / c.tolerance)
        .fold(f64::NEG_INFINITY, f64::max);
    report
        .bound(BoundCheck::upper(
            "energy balance",
            "max |E(t) + D(0,t) - E(0)| / (k dt^2 (1+T) max(1,|E(0)|)^1.5)",
            1.0,
            ratio,
        ))
        .bound(BoundCheck::upper(
            "energy nonincreasing",
            "max (E(t_n+1) - E(t_n)) / tol",
            1.0,
            inc,
        ))
}

fn norms_csv(traj: &Trajectory, basis: &SpectralBasis) -> Result<String> {
    let rows = traj
        .snapshots
        .iter()
        .map(|s| basis.h_norms(s).map(|h| vec![s.time, h.grad_sq, h.vel_sq, h.energy_sq, h.lap_sq]))
        .collect::<Result<Vec<_>>>()?;
    Ok(to_csv("time,grad_sq,vel_sq,energy_sq,lap_sq", rows))
}

fn execute(config: &RunConfig, experiment: &Experiment, art: &mut Artifacts) -> Result<ExperimentReport> {
    if let Experiment::Selftest {} = experiment {
        return selftest();
    }
    let p = config.prepare()?;
    let sys = GalerkinSystem::new(&p.basis, &p.profile, &p.forcing)?;
    let solver = &config.solver;
    let seed = config.seed;
    let initial = || config.initial.build(&p.basis, seed);
    let report = match experiment {
        Experiment::Simulate {} | Experiment::EnergyAudit { .. } => {
            let traj = sys.simulate(&initial()?, solver)?;
            let ledger = energy_audit(&traj, &sys)?;
            art.write("ledger.csv", &ledger.to_csv())?;
            art.write("norms.csv", &norms_csv(&traj, &p.basis)?)?;
            let cp = Checkpoint::new(
                config.basis,
                config.profile.clone(),
                p.forcing.coeffs().to_vec(),
                *solver,
                traj.last().clone(),
            );
            art.write("checkpoint.json", &cp.to_json()?)?;
            let mut r = ExperimentReport::new(experiment.name())
                .input("dt", solver.dt)
                .input("t_end", solver.t_end)
                .fit("initial_energy", ledger.initial_energy())
                .fit("final_energy", ledger.energy.last().map_or(f64::NAN, |e| e.total))
                .fit("max_abs_residual", ledger.max_abs_residual())
                .fit("dissipation", *ledger.cumulative_dissipation.last().unwrap_or(&0.0))
                .fit("l6_budget", *ledger.l6_budget.last().unwrap_or(&0.0))
                .fit("halvings", traj.halvings as f64);
            r = gradient_bounds(r, &[gradient_check(&ledger, solver.dt)]);
            if let Experiment::EnergyAudit { dts } = experiment {
                if !dts.is_empty() {
                    r = energy_order_study(r, &sys, &initial()?, solver, dts, art)?;
                }
            }
            r
        }
        Experiment::Steklov { eps0, levels } => {
            let traj = sys.simulate(&initial()?, solver)?;
            let eps: Vec<f64> = (0..*levels).map(|j| eps0 * 0.5f64.powi(j as i32)).collect();
            let st = steklov_limit_check(&traj, &sys, &eps)?;
            art.write(
                "steklov.csv",
                &to_csv(
                    "eps,lhs_a,gap_a,lhs_c,gap_c",
                    st.rows.iter().map(|r| vec![r.eps, r.lhs_a, r.gap_a, r.lhs_c, r.gap_c]),
                ),
            )?;
            let le = default_lyapunov_eps(&sys);
            let ly = lyapunov_identity(&traj, &sys, le)?;
            // Exactness of the central difference on a quadratic signal.
            let h = solver.dt * solver.observer_stride as f64;
            let quad: Vec<Vec<f64>> = (0..200).map(|i| vec![(i as f64 * h).powi(2)]).collect();
            let d = steklov_difference(&quad, h, eps[0])?;
            let k = (eps[0] / h).round() as usize;
            let quad_err = (k..200 - k)
                .map(|i| (d.central[i][0] - 2.0 * i as f64 * h).abs())
                .fold(0.0, f64::max);
            ExperimentReport::new("steklov")
                .input("eps", &eps)
                .fit("target_a", st.target_a)
                .fit("target_c", st.target_c)
                .fit("rate_a", st.rate_a)
                .fit("rate_c", st.rate_c)
                .fit("lyapunov_eps", le)
                .fit("lyapunov_residual", ly.residual)
                .bound(BoundCheck::upper("quadratic exactness", "max |D_eps t^2 - 2t|", 1e-9, quad_err))
                .require(st.monotone_a, "gap (a) decreases along eps_j")
                .require(st.monotone_c, "gap (c) decreases along eps_j")
        }
        Experiment::Lipschitz { gap, second_gap, radius } => {
            let mut rng = member_rng(seed, 1);
            let base = random_state(&p.basis, &mut rng, 0.5 * radius);
            let dir = random_state(&p.basis, &mut rng, 1.0);
            let shifted = |g: f64| SpectralState {
                u: base.u.iter().zip(&dir.u).map(|(a, d)| a + g * d).collect(),
                v: base.v.iter().zip(&dir.v).map(|(a, d)| a + g * d).collect(),
                time: 0.0,
            };
            let res = continuous_dependence(&shifted(*gap), &base, &sys, solver)?;
            art.write(
                "rho.csv",
                &to_csv("time,rho", res.times.iter().zip(&res.rho).map(|(t, r)| vec![*t, *r])),
            )?;
            let mut r = res.report().input("radius", *radius);
            if let Some(g2) = second_gap {
                let sc = perturbation_scaling(&base, &dir, &[*gap, *g2], &sys, solver)?;
                r = r.fit("max_relative_change", sc.max_relative_change).bound(BoundCheck::upper(
                    "first-order scaling",
                    "max_t |rho_1(t) - rho_2(t)| / rho_1(t)",
                    0.01,
                    sc.max_relative_change,
                ));
            }
            r
        }
        Experiment::Absorb(params) => {
            let res = absorbing_ball(&sys, solver, params, seed)?;
            art.write(
                "members.csv",
                &to_csv(
                    "initial_norm_sq,final_norm_sq,entry_time,exited,limsup_proxy",
                    res.members.iter().map(|m| {
                        vec![
                            m.initial_norm_sq,
                            m.final_norm_sq,
                            m.entry_time.unwrap_or(f64::NAN),
                            m.exited_after_entry as u8 as f64,
                            m.limsup_proxy,
                        ]
                    }),
                ),
            )?;
            let checks: Vec<GradientCheck> = res.members.iter().map(|m| m.gradient).collect();
            gradient_bounds(res.report(), &checks)
        }
        Experiment::Quasistab(params) => {
            let res = quasi_stability_fit(&sys, solver, params, seed)?;
            let header = std::iter::once("time".to_string())
                .chain((0..res.pairs.len()).map(|i| format!("b_{i}")))
                .collect::<Vec<_>>()
                .join(",");
            art.write(
                "envelope.csv",
                &to_csv(
                    &header,
                    res.times.iter().enumerate().map(|(i, t)| {
                        std::iter::once(*t).chain(res.pairs.iter().map(|p| p.envelope[i])).collect()
                    }),
                ),
            )?;
            gradient_bounds(res.report(), &res.gradient)
        }
        Experiment::Stationary { starts, check_uniqueness } => {
            let opts = StationaryOptions {
                check_uniqueness: *check_uniqueness,
                seed,
                ..StationaryOptions::default()
            };
            let primary = solve_stationary(&sys, &vec![0.0; p.basis.len()], &opts)?;
            let set = stationary_set(&sys, *starts, &opts)?;
            art.write(
                "stationary.csv",
                &to_csv(
                    "residual,grad_sq,grad_bound,lap_sq,lap_bound",
                    std::iter::once(&primary)
                        .chain(&set)
                        .map(|s| vec![s.residual, s.grad_sq, s.grad_bound, s.lap_sq, s.lap_bound]),
                ),
            )?;
            let mut r = primary.report().fit("set_size", set.len() as f64);
            for (i, s) in set.iter().enumerate() {
                r = r.bound(BoundCheck::upper(
                    &format!("set member {i} gradient bound"),
                    "|grad u|^2 <= |h|^2/(omega^2 lambda1) + 2 C_nu |Omega| / omega",
                    s.grad_bound,
                    s.grad_sq,
                ));
            }
            r.note("the stationary set is enumerated from finitely many starts; completeness is not claimed")
        }
        Experiment::Attractor(params) => {
            let res = attractor_sample(&sys, solver, params, seed)?;
            art.write(
                "distances.csv",
                &to_csv(
                    "time,distance",
                    res.cloud.iter().zip(&res.distances).map(|(s, d)| vec![s.time, *d]),
                ),
            )?;
            gradient_bounds(res.report(), &res.gradient)
        }
        Experiment::Dimension {
            ensemble_size,
            r0,
            burn_in,
            sample_count,
            radius_lo,
            radius_hi,
            radius_count,
        } => {
            let d = AttractorParams::default();
            let params = AttractorParams {
                ensemble_size: ensemble_size.unwrap_or(d.ensemble_size),
                r0: r0.unwrap_or(d.r0),
                burn_in: burn_in.unwrap_or(d.burn_in),
                sample_count: *sample_count,
                stationary_starts: 0,
            };
            let sample = attractor_sample(&sys, solver, &params, seed)?;
            let cloud = embed_cloud(&p.basis, &sample.cloud);
            let spread = cloud_spread(&cloud);
            let hi = radius_hi.unwrap_or(0.5 * spread);
            let lo = radius_lo.unwrap_or(hi / 100.0);
            let radii = if hi > 0.0 && lo > 0.0 {
                geometric_radii(lo, hi, *radius_count)
            } else {
                geometric_radii(1e-12, 1e-10, *radius_count)
            };
            let est = fractal_dimension_estimate(&cloud, &radii)?;
            art.write(
                "correlation.csv",
                &to_csv("radius,correlation", est.radii.iter().zip(&est.correlation).map(|(r, c)| vec![*r, *c])),
            )?;
            est.report().fit("cloud_spread", spread)
        }
        Experiment::Holder { s, burn_in } => {
            let traj = sys.simulate(&initial()?, solver)?;
            let tail = traj.tail_from(*burn_in);
            let fit = holder_weak_norm(&tail, &p.basis, *s)?;
            let h2 = h2_tracking(&traj, &p.basis, *burn_in)?;
            art.write(
                "holder.csv",
                &to_csv("gap,increment", fit.gaps.iter().zip(&fit.increments).map(|(g, d)| vec![*g, *d])),
            )?;
            art.write(
                "h2.csv",
                &to_csv(
                    "time,lap_sq,vel_h1_sq,acc_sq",
                    (0..h2.times.len()).map(|i| vec![h2.times[i], h2.lap_sq[i], h2.vel_h1_sq[i], h2.acc_sq[i]]),
                ),
            )?;
            let mut r = fit.report().input("burn_in", *burn_in).fit("h2_window_sup", h2.window_sup);
            r = r.bound(BoundCheck::upper(
                "h2 no growth trend",
                "slope of log chunk sup of |Lap u|^2 + |u_t|_H1^2 + |u_tt|^2",
                crate::experiments::regularity::GROWTH_TOL,
                h2.growth_slope,
            ));
            r
        }
        Experiment::Selftest {} => unreachable!("handled above"),
    };
    Ok(report)
}

/// Twice the largest distance from the centroid.
fn cloud_spread(cloud: &[Vec<f64>]) -> f64 {
    if cloud.is_empty() {
        return 0.0;
    }
    let dim = cloud[0].len();
    let n = cloud.len() as f64;
    let c: Vec<f64> = (0..dim).map(|k| cloud.iter().map(|p| p[k]).sum::<f64>() / n).collect();
    2.0 * cloud
        .iter()
        .map(|p| p.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

fn energy_order_study(
    mut report: ExperimentReport,
    sys: &GalerkinSystem<'_>,
    initial: &SpectralState,
    solver: &SolverConfig,
    dts: &[f64],
    art: &mut Artifacts,
) -> Result<ExperimentReport> {
    let residuals = crate::par::try_map(dts, |&dt| {
        let cfg = SolverConfig { dt, ..*solver };
        let traj = sys.simulate(initial, &cfg)?;
        energy_audit(&traj, sys).map(|l| l.max_abs_residual())
    })?;
    art.write(
        "order.csv",
        &to_csv("dt,max_abs_residual", dts.iter().zip(&residuals).map(|(d, r)| vec![*d, *r])),
    )?;
    for i in 1..dts.len() {
        let order = observed_order(residuals[i - 1], residuals[i], dts[i - 1] / dts[i]);
        report = report.bound(BoundCheck::lower(
            &format!("order dt={} -> dt={}", dts[i - 1], dts[i]),
            "log(r_coarse / r_fine) / log(dt_coarse / dt_fine)",
            1.9,
            order,
        ));
    }
    Ok(report)
}

/// Fast built-in checks that need no config.
pub fn selftest() -> Result<ExperimentReport> {
    let mut r = ExperimentReport::new("selftest");

    let b = SpectralBasis::new(2, 4, 3)?;
    let mut gram_err: f64 = 0.0;
    let phys: Vec<Vec<f64>> = (0..b.len()).map(|i| b.to_physical(&b.unit(i))).collect::<Result<_>>()?;
    for i in 0..b.len() {
        for j in 0..b.len() {
            let prod: Vec<f64> = phys[i].iter().zip(&phys[j]).map(|(x, y)| x * y).collect();
            let want = if i == j { 1.0 } else { 0.0 };
            gram_err = gram_err.max((b.integrate(&prod)? - want).abs());
        }
    }
    r = r.bound(BoundCheck::upper("basis orthonormality", "max |<phi_i, phi_j> - delta_ij|", 1e-12, gram_err));

    let quintic = NonlinearityProfile::new(0.0, 1.0, vec![PowerTerm::new(1.0, 5.0)]).audit(1.0)?;
    let c = quintic.report();
    r = r.bound(BoundCheck::upper(
        "quintic audit constants",
        "|kappa0 - 5| + |kappa1 - 5| + |omega - 1|",
        1e-9,
        (c.kappa0 - 5.0).abs() + (c.kappa1 - 5.0).abs() + (c.omega - 1.0).abs(),
    ));

    let b1 = SpectralBasis::new(1, 8, 3)?;
    let h = crate::model::Forcing::zero(&b1);
    let sys = GalerkinSystem::new(&b1, &quintic, &h)?;
    let s0 = crate::solver::project_state(&b1, |_| 0.0, |x| 2.0 * x[0].sin());
    let res = [0.02, 0.01]
        .iter()
        .map(|&dt| {
            let traj = sys.simulate(&s0, &SolverConfig::new(dt, 1.0))?;
            energy_audit(&traj, &sys).map(|l| l.max_abs_residual())
        })
        .collect::<Result<Vec<_>>>()?;
    r = r.bound(BoundCheck::lower(
        "energy identity order",
        "log2(r(0.02) / r(0.01))",
        1.8,
        observed_order(res[0], res[1], 2.0),
    ));

    let st = solve_stationary(&sys, &vec![0.1; b1.len()], &StationaryOptions::default())?;
    r = r.bound(BoundCheck::upper("stationary zero solution", "max |u*|", 1e-9, st.u.iter().fold(0.0, |m, x| m.max(x.abs()))));
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes() {
        let r = selftest().unwrap();
        assert!(r.passed, "{}", r.to_json());
    }

    #[test]
    fn csv_uses_seventeen_digits() {
        let s = to_csv("a,b", vec![vec![0.1, 1.0 / 3.0]]);
        assert_eq!(s, "a,b\n1.0000000000000001e-1,3.3333333333333331e-1\n");
    }

    #[test]
    fn sha_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
