//! transform → JKO / FV → comparison → entropy sweep → diagnostics.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use jkoflow::energy::EnergyFunctional;
use jkoflow::entropycheck::{default_k_grid, sweep_with, test_bank, EntropyReport, SpaceTimeData};
use jkoflow::jko::{self, check_holder, check_maximum_principle, diagnostics_check, JkoConfig, Trajectory};
use jkoflow::measure1d::{Grid, GridDensity, Quantile, Tails};
use jkoflow::profiles::{Barenblatt, InitialDatum};
use jkoflow::refsolver::{FvConfig, FvSolver, FvTrajectory};
use jkoflow::transform::{ConvectionCoefficient, TransformedCoefficients};

use crate::config::{BSpec, ExperimentConfig, InitialConfig};
use crate::plotdata;

/// Tabulation step of α, T and a.
pub const TRANSFORM_STEP: f64 = 1e-3;

/// One named pass/fail outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Coefficients of one instance in both coordinate systems.
#[derive(Debug, Clone)]
pub struct Problem {
    pub m: f64,
    pub b: ConvectionCoefficient,
    pub tc: TransformedCoefficients,
    pub ef: EnergyFunctional,
    pub y_window: (f64, f64),
}

impl Problem {
    /// Build `T` on an x-window whose image covers `y_window`.
    pub fn new(m: f64, b: ConvectionCoefficient, alpha0: f64, y_window: (f64, f64)) -> anyhow::Result<Self> {
        let c = (m - 1.0) / (2.0 * m);
        let alpha_min = alpha0 * (-c * b.l1_norm_bound).exp();
        let reach = y_window.0.abs().max(y_window.1.abs()) / alpha_min * 1.05 + 0.1;
        let tc = TransformedCoefficients::build(&b, m, alpha0, (-reach, reach), TRANSFORM_STEP)
            .context("stage `transform`")?;
        let ef = EnergyFunctional::from_transform(&tc).context("stage `transform`")?;
        Ok(Self {
            m,
            b,
            tc,
            ef,
            y_window,
        })
    }

    pub fn from_config(cfg: &ExperimentConfig) -> anyhow::Result<Self> {
        let p = &cfg.problem;
        let b = p.b.build().context("stage `transform`")?;
        Self::new(p.m, b, p.alpha0, (p.window[0], p.window[1]))
    }

    pub fn y_grid(&self, dy: f64) -> anyhow::Result<Grid> {
        Ok(Grid::covering(self.y_window.0, self.y_window.1, dy)?)
    }

    pub fn x_grid(&self, dx: f64) -> anyhow::Result<Grid> {
        let (lo, hi) = self.tc.x_window();
        Ok(Grid::covering(lo, hi, dx)?)
    }

    /// Initial quantile in x: `T⁻¹ ∘ G_u`.
    pub fn initial_quantile(&self, datum: &InitialDatum, n: usize) -> anyhow::Result<Quantile> {
        let q_u = datum.quantile(n)?;
        Ok(self.tc.rescale_quantile(&q_u)?)
    }

    pub fn run_jko(&self, datum: &InitialDatum, cfg: &JkoConfig, t0: f64) -> anyhow::Result<Trajectory> {
        let g0 = self.initial_quantile(datum, cfg.n_quantiles).context("stage `jko`")?;
        jko::run(g0, &self.ef, cfg, t0).map_err(|e| anyhow!("stage `jko`: {e}"))
    }

    /// The JKO state at `t`, pushed to y and reconstructed on `grid`.
    pub fn jko_frame(&self, traj: &Trajectory, t: f64, grid: Grid) -> anyhow::Result<GridDensity> {
        let q_u = self.jko_quantile_y(traj, t)?;
        Ok(q_u.to_density_with(grid, Tails::front(self.m))?.density)
    }

    pub fn jko_quantile_y(&self, traj: &Trajectory, t: f64) -> anyhow::Result<Quantile> {
        Ok(self.tc.inverse_rescale_quantile(traj.state_at(t))?)
    }

    pub fn run_fv(
        &self,
        datum: &InitialDatum,
        grid: Grid,
        nu: f64,
        cfl_safety: f64,
        t0: f64,
        times: &[f64],
    ) -> anyhow::Result<FvTrajectory> {
        let t_end = times.last().map_or(0.0, |t| t - t0).max(f64::MIN_POSITIVE);
        let cfg = FvConfig {
            nu,
            cfl_safety,
            ..FvConfig::new(grid, t_end)
        };
        let u0 = datum.density(grid).context("stage `fv`")?;
        FvSolver::new(cfg, self.m, &self.b)
            .and_then(|s| s.run(&u0, t0, times))
            .context("stage `fv`")
    }
}

/// JKO vs FV at common times, in y.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonResult {
    pub times: Vec<f64>,
    pub l1_jko_vs_fv: Vec<f64>,
    pub w2_jko_vs_fv: Vec<f64>,
    pub verdicts: Vec<Verdict>,
}

fn fv_frame_at(fv: &FvTrajectory, t: f64) -> anyhow::Result<&GridDensity> {
    fv.times
        .iter()
        .position(|&s| (s - t).abs() <= 1e-12 * (1.0 + t.abs()))
        .map(|i| &fv.states[i])
        .ok_or_else(|| anyhow!("no FV snapshot at t = {t}"))
}

pub fn compare(problem: &Problem, traj: &Trajectory, fv: &FvTrajectory, times: &[f64], l1_tol: f64) -> anyhow::Result<ComparisonResult> {
    let mut out = ComparisonResult {
        times: times.to_vec(),
        l1_jko_vs_fv: Vec::new(),
        w2_jko_vs_fv: Vec::new(),
        verdicts: Vec::new(),
    };
    for &t in times {
        let u = fv_frame_at(fv, t)?;
        let q = problem.jko_quantile_y(traj, t)?;
        let rho = q.to_density_with(u.grid(), Tails::front(problem.m))?.density;
        let l1 = rho.l1_distance(u)?;
        let w2 = q.wasserstein2(&u.to_quantile(q.n())?)?;
        out.l1_jko_vs_fv.push(l1);
        out.w2_jko_vs_fv.push(w2);
        out.verdicts.push(Verdict::new(
            format!("jko vs fv at t={t}"),
            l1 <= l1_tol,
            format!("L1 {l1:.4e} (tol {l1_tol:.1e}), W2 {w2:.4e}"),
        ));
    }
    Ok(out)
}

/// Snapshot times `t0 + j·dt` up to `t0 + duration`, merged with `extra`.
pub fn frame_times(t0: f64, duration: f64, dt: f64, extra: &[f64]) -> Vec<f64> {
    let count = (duration / dt + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (1..=count).map(|j| t0 + j as f64 * dt).collect();
    times.extend_from_slice(extra);
    times.push(t0 + duration);
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    times
}

/// Entropy sweep with the default k-grid over `k_levels` levels and a seeded
/// bank inside `(t0, t1) × y_window`.
pub fn entropy_sweep(
    data: &SpaceTimeData,
    b: &ConvectionCoefficient,
    m: f64,
    k_levels: usize,
    bank_size: usize,
    seed: u64,
    y_window: (f64, f64),
) -> anyhow::Result<EntropyReport> {
    let times = data.times();
    let bank = test_bank(seed, bank_size, (times[0], times[times.len() - 1]), y_window)?;
    let ks = default_k_grid(data.sup(), k_levels);
    Ok(sweep_with(data, b, m, &ks, &bank, |k| data.default_eps_sequence(k, m))?)
}

/// Frames of the JKO run at `times`, reconstructed on `grid` in y.
pub fn jko_space_time(problem: &Problem, traj: &Trajectory, times: &[f64], grid: Grid) -> anyhow::Result<SpaceTimeData> {
    let frames = times
        .iter()
        .map(|&t| problem.jko_frame(traj, t, grid))
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(SpaceTimeData::new(times.to_vec(), &frames)?)
}

/// Result of [`cli_run`].
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub out_dir: PathBuf,
    pub verdicts: Vec<Verdict>,
}

impl PipelineOutcome {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

/// Execute the configured pipeline and write every artifact plus
/// `report.txt` under `out_dir`.
pub fn cli_run(cfg: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<PipelineOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let problem = Problem::from_config(cfg)?;
    let m = problem.m;
    let datum = cfg.initial.datum(m);
    let t0 = cfg.initial.t0();
    let duration = cfg.jko.t_end;
    let checks = &cfg.checks;
    let times = frame_times(t0, duration, checks.frame_dt, &checks.compare_times);
    let y_grid = problem.y_grid(cfg.fv.dy)?;
    let mut verdicts = Vec::new();

    let traj = if cfg.jko.enabled {
        let traj = problem.run_jko(&datum, &cfg.jko.config(), t0)?;
        traj.write_dir(out_dir.join("jko")).context("stage `jko`")?;
        plotdata::emit_trajectory(&traj, out_dir).context("stage `jko`")?;
        let diag = diagnostics_check(&traj, &problem.ef);
        for c in diag.checks.iter().chain([check_holder(&traj, 1)].iter()) {
            verdicts.push(Verdict::new(c.name, c.passed, format!("{} violations, worst excess {:.3e}", c.violations, c.worst_excess)));
        }
        let mp = check_maximum_principle(&traj, &problem.ef, Some(problem.x_grid(cfg.fv.dy)?), checks.max_principle_tol)
            .context("stage `diagnostics`")?;
        verdicts.push(Verdict::new(mp.name, mp.passed, format!("{} violations; {}", mp.violations, mp.detail)));
        if let (BSpec::Zero, InitialConfig::Barenblatt { .. }) = (&cfg.problem.b, &cfg.initial) {
            if (cfg.problem.alpha0 - 1.0).abs() < 1e-15 {
                let exact = Barenblatt::new(m)?;
                for &t in checks.compare_times.iter().chain(std::iter::once(&(t0 + duration))) {
                    let err = problem.jko_frame(&traj, t, y_grid)?.l1_distance(&exact.density(y_grid, t)?)?;
                    verdicts.push(Verdict::new(
                        format!("jko vs barenblatt at t={t}"),
                        err <= checks.l1_tol,
                        format!("L1 {err:.4e} (tol {:.1e})", checks.l1_tol),
                    ));
                }
            }
        }
        Some(traj)
    } else {
        None
    };

    let fv = if cfg.fv.enabled {
        let fv = problem.run_fv(&datum, y_grid, cfg.fv.nu, cfg.fv.cfl_safety, t0, &times)?;
        fv.write_dir(out_dir.join("fv")).context("stage `fv`")?;
        let mass_err = fv.states.iter().map(|s| (s.mass() - 1.0).abs()).fold(0.0, f64::max);
        verdicts.push(Verdict::new("fv mass", mass_err <= 1e-10, format!("max |mass − 1| = {mass_err:.2e} over {} steps", fv.steps)));
        Some(fv)
    } else {
        None
    };

    if let (Some(traj), Some(fv)) = (&traj, &fv) {
        let cmp = compare(&problem, traj, fv, &checks.compare_times, checks.l1_tol).context("stage `compare`")?;
        std::fs::write(out_dir.join("comparison.csv"), comparison_csv(&cmp))?;
        plotdata::emit_comparison(&cmp, out_dir)?;
        verdicts.extend(cmp.verdicts);
    }

    if checks.entropy {
        let mut runs: Vec<(&str, SpaceTimeData)> = Vec::new();
        if let Some(fv) = &fv {
            let mut ts = vec![t0];
            ts.extend_from_slice(&fv.times);
            let mut frames = vec![datum.density(y_grid)?];
            frames.extend(fv.states.iter().cloned());
            runs.push(("fv", SpaceTimeData::new(ts, &frames)?));
        }
        if let Some(traj) = &traj {
            let mut ts = vec![t0];
            ts.extend_from_slice(&times);
            runs.push(("jko", jko_space_time(&problem, traj, &ts, y_grid).context("stage `entropy`")?));
        }
        for (name, data) in runs {
            let report = entropy_sweep(&data, &problem.b, m, checks.k_levels, checks.test_functions, cfg.seed, problem.y_window)
                .context("stage `entropy`")?;
            report.write_csv(out_dir.join(format!("entropy_{name}.csv")))?;
            verdicts.push(Verdict::new(
                format!("entropy {name}"),
                report.passes(checks.entropy_tol),
                format!(
                    "min residual {:.3e}, scale {:.3e}, ratio {:.3e} (tol {:.1e})",
                    report.min_residual,
                    report.scale,
                    report.min_residual / report.scale,
                    checks.entropy_tol
                ),
            ));
        }
    }

    let mut report = String::new();
    let _ = writeln!(report, "# seed {}", cfg.seed);
    let _ = writeln!(report, "# m {} alpha0 {} window {:?} b {:?}", m, cfg.problem.alpha0, cfg.problem.window, cfg.problem.b);
    let _ = writeln!(report, "# initial {:?}", cfg.initial);
    for v in &verdicts {
        let _ = writeln!(report, "{}", v.line());
    }
    let all = verdicts.iter().all(|v| v.passed);
    let _ = writeln!(report, "{}", if all { "ALL PASS" } else { "SOME FAILED" });
    std::fs::write(out_dir.join("report.txt"), report)?;
    Ok(PipelineOutcome {
        out_dir: out_dir.to_path_buf(),
        verdicts,
    })
}

pub fn comparison_csv(cmp: &ComparisonResult) -> String {
    let mut s = String::from("time,l1_jko_vs_fv,w2_jko_vs_fv\n");
    for i in 0..cmp.times.len() {
        let _ = writeln!(s, "{:e},{:e},{:e}", cmp.times[i], cmp.l1_jko_vs_fv[i], cmp.w2_jko_vs_fv[i]);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_times_merge_and_dedup() {
        let t = frame_times(0.1, 0.4, 0.1, &[0.25, 0.3]);
        assert_eq!(t.len(), 5);
        assert!((t[1] - 0.25).abs() < 1e-15);
        assert!((t[4] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_convection_keeps_coordinates() {
        let p = Problem::new(2.0, ConvectionCoefficient::zero(), 1.0, (-3.0, 3.0)).unwrap();
        for x in [-2.0, 0.0, 1.5] {
            assert!((p.tc.t(x) - x).abs() < 1e-12);
            assert!((p.ef.a(x) - 2.0).abs() < 1e-12);
        }
        let (lo, hi) = p.tc.y_window();
        assert!(lo <= -3.0 && hi >= 3.0);
    }
}
