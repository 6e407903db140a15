//! Error tables under τ / n refinement.

use std::fmt::Write as _;

use anyhow::{bail, Context};
use jkoflow::measure1d::{GridDensity, Quantile, Tails};
use jkoflow::profiles::Barenblatt;
use rayon::prelude::*;

use crate::config::{BSpec, ExperimentConfig, InitialConfig};
use crate::pipeline::Problem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub tau: f64,
    pub n: usize,
    pub l1: f64,
    pub lm: f64,
    pub w2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    /// `"barenblatt"` or `"finest run (tau, n)"`.
    pub reference: String,
    pub time: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log L¹` against `log τ` (or `log 1/n` when τ
    /// is fixed); `None` with fewer than two rows.
    pub order_l1: Option<f64>,
    pub order_w2: Option<f64>,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("tau,n,l1,lm,w2\n");
        for r in &self.rows {
            let _ = writeln!(s, "{:e},{},{:e},{:e},{:e}", r.tau, r.n, r.l1, r.lm, r.w2);
        }
        s
    }

    /// Whether each error column decreases down the table.
    pub fn monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].l1 < w[0].l1 && w[1].w2 < w[0].w2)
    }
}

/// Pair τ and n values: equal lengths zip, a singleton broadcasts.
fn pairs(tau_list: &[f64], n_list: &[usize]) -> anyhow::Result<Vec<(f64, usize)>> {
    match (tau_list.len(), n_list.len()) {
        (0, _) | (_, 0) => bail!("tau_list and n_list must be nonempty"),
        (a, b) if a == b => Ok(tau_list.iter().copied().zip(n_list.iter().copied()).collect()),
        (_, 1) => Ok(tau_list.iter().map(|&t| (t, n_list[0])).collect()),
        (1, _) => Ok(n_list.iter().map(|&n| (tau_list[0], n)).collect()),
        (a, b) => bail!("cannot pair {a} tau values with {b} n values"),
    }
}

fn slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

fn lm_distance(u: &GridDensity, v: &GridDensity, m: f64) -> f64 {
    let s: f64 = u.values().iter().zip(v.values()).map(|(a, b)| (a - b).abs().powf(m)).sum();
    (s * u.dx()).powf(1.0 / m)
}

/// Run the configured JKO problem for each `(τ, n)` and tabulate errors at
/// the final time against the closed form (Barenblatt, `b = 0`, `α₀ = 1`)
/// or else against the finest run.
pub fn convergence_study(cfg: &ExperimentConfig, tau_list: &[f64], n_list: &[usize]) -> anyhow::Result<ConvergenceTable> {
    cfg.validate()?;
    let pairs = pairs(tau_list, n_list)?;
    let problem = Problem::from_config(cfg)?;
    let m = problem.m;
    let datum = cfg.initial.datum(m);
    let t0 = cfg.initial.t0();
    let time = t0 + cfg.jko.t_end;
    let grid = problem.y_grid(cfg.fv.dy)?;
    let results: Vec<(f64, usize, Quantile)> = pairs
        .par_iter()
        .map(|&(tau, n)| {
            let jcfg = jkoflow::jko::JkoConfig {
                tau,
                n_quantiles: n,
                ..cfg.jko.config()
            };
            let traj = problem
                .run_jko(&datum, &jcfg, t0)
                .with_context(|| format!("run tau={tau}, n={n}"))?;
            Ok((tau, n, problem.jko_quantile_y(&traj, time)?))
        })
        .collect::<anyhow::Result<_>>()?;

    let closed_form = matches!((&cfg.problem.b, &cfg.initial), (BSpec::Zero, InitialConfig::Barenblatt { .. }))
        && (cfg.problem.alpha0 - 1.0).abs() < 1e-15;
    let (reference, ref_density, ref_index) = if closed_form {
        ("barenblatt".to_string(), Barenblatt::new(m)?.density(grid, time)?, None)
    } else {
        let (i, (tau, n, q)) = results
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
            .expect("nonempty");
        (format!("finest run (tau={tau}, n={n})"), q.to_density_with(grid, Tails::front(m))?.density, Some(i))
    };
    let exact = if closed_form { Some(Barenblatt::new(m)?) } else { None };

    let mut rows = Vec::new();
    for (i, (tau, n, q)) in results.iter().enumerate() {
        if Some(i) == ref_index {
            continue;
        }
        let rho = q.to_density_with(grid, Tails::front(m))?.density;
        let q_ref = match &exact {
            Some(b) => b.quantile(time, *n)?,
            None => ref_density.to_quantile(*n)?,
        };
        rows.push(ConvergenceRow {
            tau: *tau,
            n: *n,
            l1: rho.l1_distance(&ref_density)?,
            lm: lm_distance(&rho, &ref_density, m),
            w2: q.wasserstein2(&q_ref)?,
        });
    }
    let taus: Vec<f64> = rows.iter().map(|r| r.tau).collect();
    let fixed_tau = taus.windows(2).all(|w| w[0] == w[1]);
    let xs: Vec<f64> = if fixed_tau {
        rows.iter().map(|r| 1.0 / r.n as f64).collect()
    } else {
        taus
    };
    let l1: Vec<f64> = rows.iter().map(|r| r.l1).collect();
    let w2: Vec<f64> = rows.iter().map(|r| r.w2).collect();
    Ok(ConvergenceTable {
        reference,
        time,
        order_l1: slope(&xs, &l1),
        order_w2: slope(&xs, &w2),
        rows,
    })
}
