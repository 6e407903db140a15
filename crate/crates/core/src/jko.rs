//! Minimizing-movement (JKO) scheme in quantile coordinates.
//!
//! With quantile samples `G_i`, `i = 0..n`, each step minimizes
//!
//! ```text
//! f(G) = (1/2τ)(1/n) Σ_i (G_i − P_i)² + (1/n) Σ_j H(Ĝ_j, n ΔG_j)
//! ```
//!
//! over the previous state `P`, where `ΔG_j = G_{j+1} − G_j` and `Ĝ_j` is the
//! midpoint. `H(x, ξ) ∝ ξ^{1−m}` blows up as `ξ → 0`, so a backtracking line
//! search that rejects non-increasing iterates is enough to stay feasible.
//! The minimizer is found by Newton's method on `φ = n f`, whose Hessian is
//! tridiagonal.

use std::fmt::{self, Write as _};
use std::path::Path;

use crate::energy::{
    entropy_quantile, h1_seminorm_sq_quantile, norm_m_quantile, potential_quantile, pow, second_moment_quantile,
    EnergyFunctional,
};
use crate::error::{invalid, Error, Result};
use crate::measure1d::{Grid, GridDensity, Quantile, Tails};
use crate::numerics::solve_spd_tridiagonal;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JkoConfig {
    pub tau: f64,
    pub n_quantiles: usize,
    /// Length of the simulated interval.
    pub t_end: f64,
    /// Bound on `‖n ∇f‖_∞` at an accepted step.
    pub inner_tol: f64,
    pub inner_max_iter: usize,
}

impl Default for JkoConfig {
    fn default() -> Self {
        Self {
            tau: 1e-3,
            n_quantiles: 400,
            t_end: 0.4,
            inner_tol: 1e-9,
            inner_max_iter: 100,
        }
    }
}

impl JkoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(invalid("tau", "must be positive"));
        }
        if self.n_quantiles < 8 {
            return Err(invalid("n_quantiles", "must be at least 8"));
        }
        if !(self.t_end > 0.0) {
            return Err(invalid("t_end", "must be positive"));
        }
        if !(self.inner_tol > 0.0) {
            return Err(invalid("inner_tol", "must be positive"));
        }
        if self.inner_max_iter == 0 {
            return Err(invalid("inner_max_iter", "must be at least 1"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.tau - 1e-9).ceil().max(0.0) as usize
    }
}

/// The discrete step objective `f`; `+∞` when an increment is not positive.
pub fn step_objective(g: &Quantile, g_prev: &Quantile, tau: f64, ef: &EnergyFunctional) -> f64 {
    if g.n() != g_prev.n() {
        return f64::INFINITY;
    }
    match phi(g.values(), g_prev.values(), tau, ef) {
        Some((v, _)) => v / g.n() as f64,
        None => f64::INFINITY,
    }
}

// φ = n f, together with the sum of magnitudes of its terms (a rounding scale).
fn phi(g: &[f64], p: &[f64], tau: f64, ef: &EnergyFunctional) -> Option<(f64, f64)> {
    let nf = g.len() as f64;
    let m = ef.m;
    let mut transport = 0.0;
    for (a, b) in g.iter().zip(p) {
        transport += (a - b) * (a - b);
    }
    let mut energy = 0.0;
    for w in g.windows(2) {
        let xi = nf * (w[1] - w[0]);
        if !(xi > 0.0) {
            return None;
        }
        energy += ef.a(0.5 * (w[0] + w[1])) * pow(xi, 1.0 - m);
    }
    let v = transport / (2.0 * tau) + energy / m;
    v.is_finite().then_some((v, v.abs()))
}

// Gradient of φ and, optionally, its tridiagonal Hessian.
fn assemble(g: &[f64], p: &[f64], tau: f64, ef: &EnergyFunctional, hessian: bool) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = g.len();
    let nf = n as f64;
    let mut grad: Vec<f64> = g.iter().zip(p).map(|(a, b)| (a - b) / tau).collect();
    let (mut diag, mut off) = if hessian {
        (vec![1.0 / tau; n], vec![0.0; n - 1])
    } else {
        (Vec::new(), Vec::new())
    };
    for j in 0..n - 1 {
        let x = 0.5 * (g[j] + g[j + 1]);
        let xi = nf * (g[j + 1] - g[j]);
        let h = ef.partials_unchecked(x, xi);
        grad[j] += 0.5 * h.h_x - nf * h.h_xi;
        grad[j + 1] += 0.5 * h.h_x + nf * h.h_xi;
        if hessian {
            let q = 0.25 * h.h_xx;
            let c = nf * h.h_xxi;
            let s = nf * nf * h.h_xixi;
            diag[j] += q - c + s;
            diag[j + 1] += q + c + s;
            off[j] = q - s;
        }
    }
    (grad, diag, off)
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Convergence data of one accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub iterations: usize,
    pub grad_norm: f64,
    pub objective: f64,
}

/// A step that did not reach `inner_tol`; carries the best iterate.
#[derive(Debug, Clone)]
pub struct StepFailure {
    pub best: Quantile,
    pub grad_norm: f64,
    pub iterations: usize,
    pub reason: String,
}

impl fmt::Display for StepFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} after {} iterations (gradient norm {:.3e})",
            self.reason, self.iterations, self.grad_norm
        )
    }
}

impl std::error::Error for StepFailure {}

/// One minimizing-movement step, warm-started at `g_prev`.
pub fn jko_step(
    g_prev: &Quantile,
    cfg: &JkoConfig,
    ef: &EnergyFunctional,
) -> std::result::Result<(Quantile, StepReport), StepFailure> {
    let p = g_prev.values();
    let n = p.len();
    let tau = cfg.tau;
    let fail = |g: &[f64], grad_norm: f64, iterations: usize, reason: &str| StepFailure {
        best: Quantile::from_vec_unchecked(g.to_vec()),
        grad_norm,
        iterations,
        reason: reason.to_string(),
    };
    if n < 2 {
        return Err(fail(p, f64::NAN, 0, "need at least two quantiles"));
    }
    let mut g = p.to_vec();
    let Some((mut val, _)) = phi(&g, p, tau, ef) else {
        return Err(fail(p, f64::NAN, 0, "previous state has a non-positive increment"));
    };
    let mut grad_norm = f64::INFINITY;
    for iter in 0..cfg.inner_max_iter {
        let (grad, diag, off) = assemble(&g, p, tau, ef, true);
        grad_norm = sup_norm(&grad);
        if grad_norm <= cfg.inner_tol {
            return Ok((
                Quantile::from_vec_unchecked(g),
                StepReport {
                    iterations: iter,
                    grad_norm,
                    objective: val / n as f64,
                },
            ));
        }
        let rhs: Vec<f64> = grad.iter().map(|v| -v).collect();
        let mut mu = 0.0;
        let dir = loop {
            let shifted: Vec<f64> = diag.iter().map(|d| d + mu).collect();
            if let Some(d) = solve_spd_tridiagonal(&shifted, &off, &rhs) {
                break d;
            }
            mu = if mu == 0.0 { 1e-10 * sup_norm(&diag) } else { 10.0 * mu };
            if !mu.is_finite() || mu > 1e30 {
                return Err(fail(&g, grad_norm, iter, "Hessian could not be regularized"));
            }
        };
        let slope: f64 = grad.iter().zip(&dir).map(|(a, b)| a * b).sum();
        let mut t = 1.0;
        let mut accepted = false;
        let mut trial = vec![0.0; n];
        while t > 1e-20 {
            for i in 0..n {
                trial[i] = g[i] + t * dir[i];
            }
            if let Some((v, scale)) = phi(&trial, p, tau, ef) {
                if v <= val + 1e-4 * t * slope {
                    val = v;
                    accepted = true;
                    break;
                }
                // Near the minimizer the predicted decrease drops below the
                // rounding level of φ; take the full step if it still
                // reduces the gradient.
                if t == 1.0 && v <= val + 64.0 * f64::EPSILON * scale {
                    let (trial_grad, _, _) = assemble(&trial, p, tau, ef, false);
                    if sup_norm(&trial_grad) < grad_norm {
                        val = v;
                        accepted = true;
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(fail(&g, grad_norm, iter, "line search stalled"));
        }
        std::mem::swap(&mut g, &mut trial);
    }
    Err(fail(&g, grad_norm, cfg.inner_max_iter, "inner_max_iter exceeded"))
}

/// Diagnostics of one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub w2_to_prev: f64,
    pub potential: f64,
    pub entropy: f64,
    pub second_moment: f64,
    /// `‖∂x(ρ^{m/2})‖²`.
    pub h1_seminorm_sq: f64,
    /// `‖ρ‖_m^m`.
    pub norm_m: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

impl StepRecord {
    fn of(q: &Quantile, prev: Option<&Quantile>, ef: &EnergyFunctional, report: Option<StepReport>) -> Self {
        Self {
            w2_to_prev: prev.map_or(0.0, |p| q.wasserstein2(p).unwrap_or(f64::NAN)),
            potential: potential_quantile(q, ef),
            entropy: entropy_quantile(q),
            second_moment: second_moment_quantile(q),
            h1_seminorm_sq: h1_seminorm_sq_quantile(q, ef.m),
            norm_m: norm_m_quantile(q, ef.m),
            grad_norm: report.map_or(0.0, |r| r.grad_norm),
            iterations: report.map_or(0, |r| r.iterations),
        }
    }
}

/// States `ρ_τ^n`, `n = 0..N`, at times `t0 + nτ`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub tau: f64,
    pub t0: f64,
    pub states: Vec<Quantile>,
    pub per_step: Vec<StepRecord>,
}

/// A run aborted by a failed step; `partial` holds every accepted state.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub partial: Trajectory,
    pub step: usize,
    pub failure: StepFailure,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {}: {}", self.step, self.failure)
    }
}

impl std::error::Error for RunFailure {}

impl From<RunFailure> for Error {
    fn from(e: RunFailure) -> Self {
        Error::StepFailed(e.to_string())
    }
}

impl From<Box<RunFailure>> for Error {
    fn from(e: Box<RunFailure>) -> Self {
        Error::StepFailed(e.to_string())
    }
}

/// Run the scheme from the quantile `g0` for `cfg.steps()` steps.
pub fn run(
    g0: Quantile,
    ef: &EnergyFunctional,
    cfg: &JkoConfig,
    t0: f64,
) -> std::result::Result<Trajectory, Box<RunFailure>> {
    let mut traj = Trajectory {
        tau: cfg.tau,
        t0,
        states: Vec::with_capacity(cfg.steps() + 1),
        per_step: Vec::with_capacity(cfg.steps() + 1),
    };
    let abort = |traj: Trajectory, step: usize, failure: StepFailure| Box::new(RunFailure { partial: traj, step, failure });
    if let Err(e) = cfg.validate() {
        let failure = StepFailure {
            best: g0,
            grad_norm: f64::NAN,
            iterations: 0,
            reason: e.to_string(),
        };
        return Err(abort(traj, 0, failure));
    }
    let (lo, hi) = ef.domain();
    traj.per_step.push(StepRecord::of(&g0, None, ef, None));
    traj.states.push(g0);
    for step in 1..=cfg.steps() {
        let prev = &traj.states[step - 1];
        match jko_step(prev, cfg, ef) {
            Ok((g, report)) => {
                let (a, b) = g.support_with(Tails::front(ef.m));
                if a < lo || b > hi {
                    let failure = StepFailure {
                        best: g,
                        grad_norm: report.grad_norm,
                        iterations: report.iterations,
                        reason: format!("support [{a}, {b}] left the coefficient window [{lo}, {hi}]"),
                    };
                    return Err(abort(traj, step, failure));
                }
                traj.per_step.push(StepRecord::of(&g, Some(prev), ef, Some(report)));
                traj.states.push(g);
            }
            Err(failure) => return Err(abort(traj, step, failure)),
        }
    }
    Ok(traj)
}

/// Run from a grid density, converted to `cfg.n_quantiles` quantiles.
pub fn run_density(
    rho0: &GridDensity,
    ef: &EnergyFunctional,
    cfg: &JkoConfig,
    t0: f64,
) -> std::result::Result<Trajectory, Box<RunFailure>> {
    match rho0.to_quantile(cfg.n_quantiles) {
        Ok(q) => run(q, ef, cfg, t0),
        Err(e) => Err(Box::new(RunFailure {
            partial: Trajectory {
                tau: cfg.tau,
                t0,
                states: Vec::new(),
                per_step: Vec::new(),
            },
            step: 0,
            failure: StepFailure {
                best: Quantile::from_vec_unchecked(vec![0.0]),
                grad_norm: f64::NAN,
                iterations: 0,
                reason: e.to_string(),
            },
        })),
    }
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.tau
    }

    /// Index of the piecewise-constant interpolant at `t`:
    /// `ρ̄_τ(t) = ρ_τ^n` for `(n−1)τ < t − t0 ≤ nτ`.
    pub fn index_at(&self, t: f64) -> usize {
        let s = ((t - self.t0) / self.tau - 1e-9).ceil().max(0.0) as usize;
        s.min(self.states.len().saturating_sub(1))
    }

    pub fn state_at(&self, t: f64) -> &Quantile {
        &self.states[self.index_at(t)]
    }

    pub fn meta_csv(&self) -> String {
        let n = self.states.first().map_or(0, Quantile::n);
        let mut s = format!("# tau={:.16e},t0={:.16e},n={n}\n", self.tau, self.t0);
        s.push_str("step,time,w2_to_prev,potential,entropy,second_moment,h1_seminorm_sq,norm_m,grad_norm,iterations\n");
        for (i, r) in self.per_step.iter().enumerate() {
            let _ = writeln!(
                s,
                "{i},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                self.time(i),
                r.w2_to_prev,
                r.potential,
                r.entropy,
                r.second_moment,
                r.h1_seminorm_sq,
                r.norm_m,
                r.grad_norm,
                r.iterations
            );
        }
        s
    }

    /// `meta.csv` plus `state_%06d.csv` per state.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("meta.csv"), self.meta_csv())?;
        for (i, q) in self.states.iter().enumerate() {
            q.write_csv(dir.join(format!("state_{i:06}.csv")))?;
        }
        Ok(())
    }

    pub fn read_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let meta = std::fs::read_to_string(dir.join("meta.csv"))?;
        let mut lines = meta.lines();
        let header = lines
            .next()
            .and_then(|l| l.strip_prefix("# "))
            .ok_or_else(|| Error::Parse("meta.csv: missing header".into()))?;
        let field = |key: &str| -> Result<f64> {
            header
                .split(',')
                .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
                .ok_or_else(|| Error::Parse(format!("meta.csv: missing `{key}`")))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("meta.csv: `{key}`: {e}")))
        };
        let (tau, t0) = (field("tau")?, field("t0")?);
        lines.next();
        let mut per_step = Vec::new();
        let mut states = Vec::new();
        for (i, line) in lines.enumerate() {
            let v: Vec<&str> = line.split(',').collect();
            if v.len() != 10 {
                return Err(Error::Parse(format!("meta.csv line {}: expected 10 columns", i + 3)));
            }
            let num = |k: usize| -> Result<f64> {
                v[k].parse::<f64>()
                    .map_err(|e| Error::Parse(format!("meta.csv line {}: {e}", i + 3)))
            };
            per_step.push(StepRecord {
                w2_to_prev: num(2)?,
                potential: num(3)?,
                entropy: num(4)?,
                second_moment: num(5)?,
                h1_seminorm_sq: num(6)?,
                norm_m: num(7)?,
                grad_norm: num(8)?,
                iterations: num(9)? as usize,
            });
            states.push(Quantile::read_csv(dir.join(format!("state_{i:06}.csv")))?);
        }
        Ok(Self {
            tau,
            t0,
            states,
            per_step,
        })
    }
}

/// Outcome of one a-priori estimate over a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub violations: usize,
    /// Largest `lhs − rhs` over the checked instances (≤ 0 when satisfied).
    pub worst_excess: f64,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, violations: usize, worst_excess: f64, detail: String) -> Self {
        Self {
            name,
            passed: violations == 0,
            violations,
            worst_excess,
            detail,
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} violations, worst excess {:.3e}; {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.violations,
            self.worst_excess,
            self.detail
        )
    }
}

/// (i) `F(ρ^n) ≤ F(ρ^{n−1})` up to `rel_tol` relative.
pub fn check_energy_monotone(traj: &Trajectory, rel_tol: f64) -> CheckResult {
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for w in traj.per_step.windows(2) {
        let excess = w[1].potential - w[0].potential;
        worst = worst.max(excess);
        if excess > rel_tol * w[0].potential.abs() {
            violations += 1;
        }
    }
    CheckResult::new(
        "energy monotone",
        violations,
        if traj.per_step.len() < 2 { 0.0 } else { worst },
        format!("relative tolerance {rel_tol:.1e}"),
    )
}

/// (ii) `Σ W₂(ρ^n, ρ^{n−1})² ≤ 2τ F(ρ⁰)` for every partial sum.
pub fn check_square_summability(traj: &Trajectory, rel_tol: f64) -> CheckResult {
    let Some(first) = traj.per_step.first() else {
        return CheckResult::new("square summability", 0, 0.0, "empty trajectory".into());
    };
    let bound = 2.0 * traj.tau * first.potential;
    let mut sum = 0.0;
    let mut violations = 0;
    let mut worst = if traj.per_step.len() < 2 { 0.0 } else { f64::NEG_INFINITY };
    for r in &traj.per_step[1..] {
        sum += r.w2_to_prev * r.w2_to_prev;
        worst = worst.max(sum - bound);
        if sum > bound * (1.0 + rel_tol) {
            violations += 1;
        }
    }
    CheckResult::new(
        "square summability",
        violations,
        worst,
        format!("sum {sum:.6e} vs bound 2 tau F0 = {bound:.6e}"),
    )
}

/// (iii) `∫x²ρ^N ≤ ∫x²ρ⁰ + M F(ρ⁰) Nτ`, `M = 2(m−1) − 2 inf(z a'/a)`.
pub fn check_second_moment(traj: &Trajectory, ef: &EnergyFunctional, rel_slack: f64) -> CheckResult {
    let Some(first) = traj.per_step.first() else {
        return CheckResult::new("second moment", 0, 0.0, "empty trajectory".into());
    };
    let big_m = 2.0 * (ef.m - 1.0) - 2.0 * ef.inf_z_log_derivative();
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for (n, r) in traj.per_step.iter().enumerate() {
        let bound = first.second_moment + big_m * first.potential * n as f64 * traj.tau;
        worst = worst.max(r.second_moment - bound);
        if r.second_moment > bound * (1.0 + rel_slack) {
            violations += 1;
        }
    }
    CheckResult::new("second moment", violations, worst, format!("M = {big_m:.6e}"))
}

/// (iv) Entropy dissipation:
/// `E(ρ^N) + (4(m−1)ā/m²) τ Σ‖∂x ρ^{m/2}‖² ≤ E(ρ⁰) + (sup a''/m) τ Σ‖ρ‖_m^m`
/// for every `N`, up to `tol`.
pub fn check_entropy_dissipation(traj: &Trajectory, ef: &EnergyFunctional, tol: f64) -> CheckResult {
    let Some(first) = traj.per_step.first() else {
        return CheckResult::new("entropy dissipation", 0, 0.0, "empty trajectory".into());
    };
    let m = ef.m;
    let c_diss = 4.0 * (m - 1.0) * ef.a_lower / (m * m);
    let c_src = ef.a_second_derivative_sup / m;
    let (mut diss, mut src) = (0.0, 0.0);
    let mut violations = 0;
    let mut worst = if traj.per_step.len() < 2 { 0.0 } else { f64::NEG_INFINITY };
    for r in &traj.per_step[1..] {
        diss += traj.tau * r.h1_seminorm_sq;
        src += traj.tau * r.norm_m;
        let excess = r.entropy + c_diss * diss - (first.entropy + c_src * src);
        worst = worst.max(excess);
        if excess > tol {
            violations += 1;
        }
    }
    CheckResult::new("entropy dissipation", violations, worst, format!("tolerance {tol:.3e}"))
}

/// `W₂(ρ̄(t), ρ̄(s)) ≤ √(2F(ρ⁰)) max(τ, |t−s|)^{1/2}` over all pairs of
/// states with indices multiple of `stride`.
pub fn check_holder(traj: &Trajectory, stride: usize) -> CheckResult {
    let Some(first) = traj.per_step.first() else {
        return CheckResult::new("holder", 0, 0.0, "empty trajectory".into());
    };
    let c = (2.0 * first.potential).sqrt();
    let idx: Vec<usize> = (0..traj.len()).step_by(stride.max(1)).chain(std::iter::once(traj.len() - 1)).collect();
    let mut violations = 0;
    let mut pairs = 0;
    let mut worst = f64::NEG_INFINITY;
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            if i == j {
                continue;
            }
            pairs += 1;
            let d = traj.states[i].wasserstein2(&traj.states[j]).unwrap_or(f64::INFINITY);
            let bound = c * (traj.tau.max((j - i) as f64 * traj.tau)).sqrt();
            worst = worst.max(d - bound);
            if d > bound * (1.0 + 1e-12) {
                violations += 1;
            }
        }
    }
    CheckResult::new(
        "holder",
        violations,
        if pairs == 0 { 0.0 } else { worst },
        format!("{pairs} pairs"),
    )
}

/// `ρ(t, x) ≤ k a(x)^{−1/(m−1)} + tol` with `k = sup ρ⁰ a^{1/(m−1)}`.
///
/// Checked on the quantile cell densities and, if `grid` is given, on the
/// reconstructed cell averages; `k` is the larger of the two initial values.
pub fn check_maximum_principle(traj: &Trajectory, ef: &EnergyFunctional, grid: Option<Grid>, tol: f64) -> Result<CheckResult> {
    let Some(g0) = traj.states.first() else {
        return Ok(CheckResult::new("maximum principle", 0, 0.0, "empty trajectory".into()));
    };
    let e = 1.0 / (ef.m - 1.0);
    let cells = |q: &Quantile| -> Vec<(f64, f64)> {
        let n = q.n() as f64;
        q.values()
            .windows(2)
            .map(|w| (0.5 * (w[0] + w[1]), 1.0 / (n * (w[1] - w[0]))))
            .collect()
    };
    let mut k = cells(g0).iter().map(|&(x, r)| r * ef.a(x).powf(e)).fold(0.0, f64::max);
    let recon = |q: &Quantile| -> Result<Option<GridDensity>> {
        grid.map(|g| q.to_density(g).map(|r| r.density)).transpose()
    };
    if let Some(d) = recon(g0)? {
        let g = d.grid();
        for (i, &r) in d.values().iter().enumerate() {
            k = k.max(r * ef.a(g.center(i)).powf(e));
        }
    }
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for q in &traj.states {
        for (x, r) in cells(q) {
            let excess = r - k * ef.a(x).powf(-e);
            worst = worst.max(excess);
            if excess > tol {
                violations += 1;
            }
        }
        if let Some(d) = recon(q)? {
            let g = d.grid();
            for (i, &r) in d.values().iter().enumerate() {
                let excess = r - k * ef.a(g.center(i)).powf(-e);
                worst = worst.max(excess);
                if excess > tol {
                    violations += 1;
                }
            }
        }
    }
    Ok(CheckResult::new("maximum principle", violations, worst, format!("k = {k:.6e}")))
}

/// Estimates (i)–(iv).
#[derive(Debug, Clone)]
pub struct DiagnosticsReport {
    pub checks: Vec<CheckResult>,
}

impl DiagnosticsReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for DiagnosticsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// (i) energy monotonicity and (ii) square summability to `1e-10` relative,
/// (iii) second-moment growth to `1e-6` relative, (iv) entropy dissipation
/// to `1e-3 (1 + |E(ρ⁰)|)`.
pub fn diagnostics_check(traj: &Trajectory, ef: &EnergyFunctional) -> DiagnosticsReport {
    let e0 = traj.per_step.first().map_or(0.0, |r| r.entropy);
    DiagnosticsReport {
        checks: vec![
            check_energy_monotone(traj, 1e-10),
            check_square_summability(traj, 1e-10),
            check_second_moment(traj, ef, 1e-6),
            check_entropy_dissipation(traj, ef, 1e-3 * (1.0 + e0.abs())),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::Barenblatt;

    fn pme() -> EnergyFunctional {
        EnergyFunctional::porous_medium(2.0).unwrap()
    }

    #[test]
    fn two_point_objective() {
        // n = 2, G = (0, 1): one increment, ξ = 2, H = 2·2⁻¹/2 = 0.5, times 1/n
        let ef = EnergyFunctional::constant(2.0, 2.0).unwrap();
        let g = Quantile::new(vec![0.0, 1.0]).unwrap();
        assert!((step_objective(&g, &g, 0.1, &ef) - 0.25).abs() < 1e-15);
        let p = Quantile::new(vec![0.0, 0.5]).unwrap();
        // transport (1/2τ)(1/2)(0.25) with τ = 0.1 adds 0.625
        assert!((step_objective(&g, &p, 0.1, &ef) - 0.875).abs() < 1e-14);
        assert!(step_objective(&g, &p, 1e300, &ef) - 0.25 < 1e-12);
        let flat = Quantile::new(vec![0.0, 0.0]).unwrap();
        assert!(step_objective(&flat, &g, 0.1, &ef).is_infinite());
    }

    #[test]
    fn objective_at_previous_state_is_discrete_energy() {
        let ef = pme();
        let g = Barenblatt::new(2.0).unwrap().quantile(0.1, 64).unwrap();
        assert_eq!(step_objective(&g, &g, 1e-3, &ef), potential_quantile(&g, &ef));
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let ef = EnergyFunctional::from_fn(2.5, -5.0, 5.0, 1e-3, |x| 2.0 + x.sin()).unwrap();
        let g: Vec<f64> = (0..12).map(|i| -1.0 + 0.17 * i as f64 + 0.01 * (i * i) as f64).collect();
        let p: Vec<f64> = g.iter().map(|v| 0.9 * v + 0.05).collect();
        let tau = 0.01;
        let (grad, diag, off) = assemble(&g, &p, tau, &ef, true);
        let f = |x: &[f64]| phi(x, &p, tau, &ef).unwrap().0;
        let h = 1e-6;
        for i in 0..g.len() {
            let mut a = g.clone();
            let mut b = g.clone();
            a[i] += h;
            b[i] -= h;
            let fd = (f(&a) - f(&b)) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-5 * (1.0 + grad[i].abs()), "grad {i}");
            let (ga, _, _) = assemble(&a, &p, tau, &ef, false);
            let (gb, _, _) = assemble(&b, &p, tau, &ef, false);
            let fd_d = (ga[i] - gb[i]) / (2.0 * h);
            assert!((fd_d - diag[i]).abs() < 1e-5 * (1.0 + diag[i].abs()), "diag {i}");
            if i + 1 < g.len() {
                let fd_o = (ga[i + 1] - gb[i + 1]) / (2.0 * h);
                assert!((fd_o - off[i]).abs() < 1e-5 * (1.0 + off[i].abs()), "off {i}");
            }
        }
    }

    #[test]
    fn one_step_is_symmetric_and_spreads() {
        let ef = pme();
        let g0 = Barenblatt::new(2.0).unwrap().quantile(0.1, 400).unwrap();
        let cfg = JkoConfig {
            tau: 1e-4,
            ..JkoConfig::default()
        };
        let (g1, report) = jko_step(&g0, &cfg, &ef).unwrap();
        assert!(report.grad_norm <= cfg.inner_tol);
        let v = g1.values();
        for i in 0..200 {
            assert!((v[i] + v[399 - i]).abs() < 1e-8);
        }
        assert!(v[0] < g0.values()[0] && v[399] > g0.values()[399]);
        let f0 = potential_quantile(&g0, &ef);
        let f1 = potential_quantile(&g1, &ef);
        let w = g1.wasserstein2(&g0).unwrap();
        assert!(f1 <= f0);
        assert!(w * w <= 2.0 * cfg.tau * (f0 - f1) * (1.0 + 1e-10));
    }

    #[test]
    fn short_run_satisfies_the_estimates() {
        let ef = EnergyFunctional::from_fn(2.0, -5.0, 5.0, 1e-3, |x| 2.0 + 0.5 * x.sin()).unwrap();
        let g0 = Barenblatt::new(2.0).unwrap().quantile(0.1, 100).unwrap();
        let cfg = JkoConfig {
            tau: 2e-3,
            n_quantiles: 100,
            t_end: 0.1,
            ..JkoConfig::default()
        };
        let traj = run(g0, &ef, &cfg, 0.1).unwrap();
        assert_eq!(traj.len(), 51);
        let report = diagnostics_check(&traj, &ef);
        assert!(report.passed(), "{report}");
        assert!(check_holder(&traj, 1).passed);
        let grid = Grid::new(-3.0, 0.01, 600).unwrap();
        let mp = check_maximum_principle(&traj, &ef, Some(grid), 1e-3).unwrap();
        assert!(mp.passed, "{mp}");
    }

    #[test]
    fn single_state_trajectory_passes_trivially() {
        let ef = pme();
        let g0 = Barenblatt::new(2.0).unwrap().quantile(0.1, 16).unwrap();
        let traj = Trajectory {
            tau: 1e-3,
            t0: 0.0,
            per_step: vec![StepRecord::of(&g0, None, &ef, None)],
            states: vec![g0],
        };
        assert!(diagnostics_check(&traj, &ef).passed());
        assert!(check_holder(&traj, 1).passed);
    }

    #[test]
    fn constant_weight_has_no_source_term() {
        let ef = pme();
        assert_eq!(ef.a_second_derivative_sup, 0.0);
        assert_eq!(ef.inf_z_log_derivative(), 0.0);
    }

    #[test]
    fn failures_carry_the_best_iterate() {
        let ef = pme();
        let g0 = Barenblatt::new(2.0).unwrap().quantile(0.1, 50).unwrap();
        let cfg = JkoConfig {
            tau: 1e-1,
            n_quantiles: 50,
            inner_max_iter: 1,
            inner_tol: 1e-14,
            ..JkoConfig::default()
        };
        let err = jko_step(&g0, &cfg, &ef).unwrap_err();
        assert_eq!(err.iterations, 1);
        assert!(err.best.increments().all(|d| d > 0.0));
        assert!(err.reason.contains("inner_max_iter"));
        let fail = run(g0, &ef, &JkoConfig { t_end: 0.5, ..cfg }, 0.0).unwrap_err();
        assert_eq!(fail.step, 1);
        assert_eq!(fail.partial.len(), 1);
    }

    #[test]
    fn trajectory_round_trips_through_disk() {
        let ef = pme();
        let g0 = Barenblatt::new(2.0).unwrap().quantile(0.1, 20).unwrap();
        let cfg = JkoConfig {
            tau: 1e-3,
            n_quantiles: 20,
            t_end: 3e-3,
            ..JkoConfig::default()
        };
        let traj = run(g0, &ef, &cfg, 0.1).unwrap();
        let dir = std::env::temp_dir().join(format!("jkoflow-traj-{}", std::process::id()));
        traj.write_dir(&dir).unwrap();
        let back = Trajectory::read_dir(&dir).unwrap();
        assert_eq!(back.states, traj.states);
        assert_eq!(back.per_step, traj.per_step);
        assert_eq!(back.tau, traj.tau);
        std::fs::remove_dir_all(&dir).unwrap();
        assert_eq!(traj.index_at(0.1), 0);
        assert_eq!(traj.index_at(0.1005), 1);
        assert_eq!(traj.index_at(0.101), 1);
        assert_eq!(traj.index_at(0.2), 3);
    }
}
