//! Explicit monotone finite-volume reference solver for
//! `∂t u = (u^m)_yy + (b u^m)_y + ν u_yy` with zero-flux boundaries.
//!
//! The flux through the face between cells `i` and `i+1` is
//! `J = (w_{i+1} − w_i)/dy + ν (u_{i+1} − u_i)/dy + b⁺ w_{i+1} + b⁻ w_i`
//! with `w = u^m`, `b⁺ = max(b, 0)`, `b⁻ = min(b, 0)` evaluated at the face,
//! i.e. the convective flux is upwinded on the sign of `b`. The update is
//! conservative and, under the step restriction, monotone, hence
//! nonnegativity-preserving and L¹-contractive.

use std::fmt::Write as _;
use std::path::Path;

use crate::energy::pow;
use crate::error::{invalid, Error, Result};
use crate::measure1d::{Grid, GridDensity};
use crate::transform::ConvectionCoefficient;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FvConfig {
    pub grid: Grid,
    /// Largest step; `run` additionally respects the stability bound.
    pub dt: f64,
    pub nu: f64,
    pub t_end: f64,
    pub cfl_safety: f64,
}

impl FvConfig {
    pub fn new(grid: Grid, t_end: f64) -> Self {
        Self {
            grid,
            dt: f64::INFINITY,
            nu: 0.0,
            t_end,
            cfl_safety: 0.3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(invalid("dt", "must be positive"));
        }
        if !(self.nu >= 0.0) {
            return Err(invalid("nu", "must be nonnegative"));
        }
        if !(self.t_end > 0.0) {
            return Err(invalid("t_end", "must be positive"));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety < 1.0) {
            return Err(invalid("cfl_safety", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Solver with the face values of `b` precomputed.
#[derive(Debug, Clone)]
pub struct FvSolver {
    cfg: FvConfig,
    m: f64,
    b_face: Vec<f64>,
    b_sup: f64,
}

/// Snapshots of an FV run.
#[derive(Debug, Clone)]
pub struct FvTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<GridDensity>,
    pub steps: usize,
}

impl FvSolver {
    pub fn new(cfg: FvConfig, m: f64, b: &ConvectionCoefficient) -> Result<Self> {
        cfg.validate()?;
        if !(m > 1.0) {
            return Err(invalid("m", format!("nonlinearity exponent must exceed 1, got {m}")));
        }
        let g = cfg.grid;
        let b_face: Vec<f64> = (0..=g.cells).map(|i| if i == 0 || i == g.cells { 0.0 } else { b.eval(g.node(i)) }).collect();
        let b_sup = b_face.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        Ok(Self { cfg, m, b_face, b_sup })
    }

    pub fn config(&self) -> &FvConfig {
        &self.cfg
    }

    /// `cfl_safety · min(dy²/(2(D+ν)), dy/B)` with `D = m (sup u)^{m−1}` and
    /// `B = sup|b| · D`.
    pub fn stable_dt(&self, sup_u: f64) -> f64 {
        let dy = self.cfg.grid.dx;
        let d = self.m * pow(sup_u.max(0.0), self.m - 1.0);
        let diff = if d + self.cfg.nu > 0.0 {
            dy * dy / (2.0 * (d + self.cfg.nu))
        } else {
            f64::INFINITY
        };
        let conv = if self.b_sup * d > 0.0 { dy / (self.b_sup * d) } else { f64::INFINITY };
        self.cfg.cfl_safety * diff.min(conv)
    }

    /// One explicit step of size `dt` on raw cell values.
    pub fn step_values(&self, u: &[f64], dt: f64) -> Result<Vec<f64>> {
        let g = self.cfg.grid;
        if u.len() != g.cells {
            return Err(Error::SizeMismatch {
                left: u.len(),
                right: g.cells,
            });
        }
        let sup = u.iter().fold(0.0f64, |a, &v| a.max(v));
        let recommended = self.stable_dt(sup);
        if dt > recommended * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, recommended });
        }
        let dy = g.dx;
        let nu = self.cfg.nu;
        let w: Vec<f64> = u.iter().map(|&v| pow(v, self.m)).collect();
        let mut flux = vec![0.0; g.cells + 1];
        for i in 1..g.cells {
            let b = self.b_face[i];
            flux[i] = (w[i] - w[i - 1]) / dy + nu * (u[i] - u[i - 1]) / dy + b.max(0.0) * w[i] + b.min(0.0) * w[i - 1];
        }
        let r = dt / dy;
        Ok((0..g.cells).map(|i| u[i] + r * (flux[i + 1] - flux[i])).collect())
    }

    pub fn step(&self, u: &GridDensity, dt: f64) -> Result<GridDensity> {
        if !u.grid().matches(&self.cfg.grid) {
            return Err(Error::GridMismatch);
        }
        let v = self.step_values(u.values(), dt)?;
        GridDensity::new(u.x_min(), u.dx(), v)
    }

    /// Advance from `t0` to each of `snapshot_times` (ascending, `> t0`,
    /// `≤ t0 + t_end`), re-evaluating the stability bound every step.
    pub fn run(&self, u0: &GridDensity, t0: f64, snapshot_times: &[f64]) -> Result<FvTrajectory> {
        if !u0.grid().matches(&self.cfg.grid) {
            return Err(Error::GridMismatch);
        }
        if snapshot_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("snapshot_times", "must be strictly increasing"));
        }
        if let (Some(&first), Some(&last)) = (snapshot_times.first(), snapshot_times.last()) {
            if first < t0 || last > t0 + self.cfg.t_end * (1.0 + 1e-12) {
                return Err(invalid("snapshot_times", "must lie in [t0, t0 + t_end]"));
            }
        }
        let mut u = u0.values().to_vec();
        let mut t = t0;
        let mut steps = 0;
        let mut times = Vec::with_capacity(snapshot_times.len());
        let mut states = Vec::with_capacity(snapshot_times.len());
        for &target in snapshot_times {
            while t < target {
                let sup = u.iter().fold(0.0f64, |a, &v| a.max(v));
                let mut dt = self.stable_dt(sup).min(self.cfg.dt);
                if t + dt >= target || target - (t + dt) < 1e-12 * dt {
                    dt = target - t;
                }
                u = self.step_values(&u, dt)?;
                t = if dt == target - t { target } else { t + dt };
                steps += 1;
            }
            times.push(target);
            states.push(GridDensity::new(u0.x_min(), u0.dx(), u.clone())?);
        }
        Ok(FvTrajectory { times, states, steps })
    }
}

/// One step with `cfg.dt`; fails if it violates the stability bound.
pub fn fv_step(u: &GridDensity, m: f64, b: &ConvectionCoefficient, cfg: &FvConfig) -> Result<GridDensity> {
    FvSolver::new(*cfg, m, b)?.step(u, cfg.dt)
}

/// Run from `t0` with snapshots at the requested times.
pub fn fv_run(
    u0: &GridDensity,
    m: f64,
    b: &ConvectionCoefficient,
    cfg: &FvConfig,
    t0: f64,
    snapshot_times: &[f64],
) -> Result<FvTrajectory> {
    FvSolver::new(*cfg, m, b)?.run(u0, t0, snapshot_times)
}

/// `dy Σ |u_i − v_i|`.
pub fn l1_distance(u: &GridDensity, v: &GridDensity) -> Result<f64> {
    u.l1_distance(v)
}

impl FvTrajectory {
    /// `meta.csv` plus one `state_%06d.csv` per snapshot.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut meta = String::from("index,time,mass,sup\n");
        for (i, (t, s)) in self.times.iter().zip(&self.states).enumerate() {
            let _ = writeln!(meta, "{i},{t:.16e},{:.16e},{:.16e}", s.mass(), s.sup());
            s.write_csv(dir.join(format!("state_{i:06}.csv")))?;
        }
        std::fs::write(dir.join("meta.csv"), meta)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::Barenblatt;

    fn solver(grid: Grid, b: &ConvectionCoefficient, t_end: f64) -> FvSolver {
        FvSolver::new(FvConfig::new(grid, t_end), 2.0, b).unwrap()
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let grid = Grid::new(-1.0, 0.01, 200).unwrap();
        let s = solver(grid, &ConvectionCoefficient::gaussian(0.5, 1.0).unwrap(), 1.0);
        assert!(s.step_values(&vec![0.0; 200], 1e-3).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cfl_violation_is_reported() {
        let grid = Grid::new(-2.0, 0.01, 400).unwrap();
        let u = GridDensity::from_fn(grid, |y| (-(y * y)).exp()).unwrap();
        let mut cfg = FvConfig::new(grid, 1.0);
        cfg.dt = 1e-2;
        match fv_step(&u, 2.0, &ConvectionCoefficient::zero(), &cfg) {
            Err(Error::CflViolation { dt, recommended }) => assert!(recommended < dt),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mass_positivity_and_maximum_principle() {
        let grid = Grid::new(-3.0, 0.01, 600).unwrap();
        let b = ConvectionCoefficient::gaussian(0.5, 1.0).unwrap();
        let s = solver(grid, &b, 1.0);
        let z = ConvectionCoefficient::zero();
        let s0 = solver(grid, &z, 1.0);
        let mut u = GridDensity::from_fn(grid, |y| if y.abs() < 0.5 { 1.0 } else { 0.0 }).unwrap();
        let mut v = u.clone();
        for _ in 0..200 {
            let dt = s.stable_dt(u.sup());
            let next = s.step(&u, dt).unwrap();
            assert!((next.mass() - 1.0).abs() < 1e-12);
            assert!(next.values().iter().all(|&x| x >= 0.0));
            u = next;
            let next = s0.step(&v, s0.stable_dt(v.sup())).unwrap();
            assert!(next.sup() <= v.sup() + 1e-15);
            v = next;
        }
    }

    #[test]
    fn l1_examples() {
        let grid = Grid::new(0.0, 0.1, 20).unwrap();
        let u = GridDensity::from_fn(grid, |y| if y < 1.0 { 1.0 } else { 0.0 }).unwrap();
        let v = GridDensity::from_fn(grid, |y| if y >= 1.0 { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(l1_distance(&u, &u).unwrap(), 0.0);
        assert!((l1_distance(&u, &v).unwrap() - 2.0).abs() < 1e-12);
        let other = GridDensity::from_fn(Grid::new(0.0, 0.1, 21).unwrap(), |_| 1.0).unwrap();
        assert!(l1_distance(&u, &other).is_err());
    }

    #[test]
    fn barenblatt_error_is_first_order() {
        let bb = Barenblatt::new(2.0).unwrap();
        let err = |dy: f64| {
            let grid = Grid::covering(-2.0, 2.0, dy).unwrap();
            let s = solver(grid, &ConvectionCoefficient::zero(), 0.1);
            let u0 = bb.density(grid, 0.1).unwrap();
            let tr = s.run(&u0, 0.1, &[0.2]).unwrap();
            tr.states[0].l1_distance(&bb.density(grid, 0.2).unwrap()).unwrap()
        };
        let (e1, e2) = (err(0.02), err(0.01));
        assert!(e1 < 2e-2 && e2 < e1, "{e1} {e2}");
    }

    #[test]
    fn translation_equivariance() {
        let grid = Grid::new(-2.0, 0.01, 400).unwrap();
        let s = solver(grid, &ConvectionCoefficient::zero(), 0.05);
        let f = |c: f64| GridDensity::from_fn(grid, move |y| (1.0 - ((y - c) / 0.5).powi(2)).max(0.0)).unwrap();
        let a = s.run(&f(0.0), 0.0, &[0.05]).unwrap();
        let b = s.run(&f(0.3), 0.0, &[0.05]).unwrap();
        let (ua, ub) = (a.states[0].values(), b.states[0].values());
        for i in 0..370 {
            assert!((ua[i] - ub[i + 30]).abs() < 1e-10);
        }
    }

    #[test]
    fn vanishing_viscosity() {
        let grid = Grid::new(-2.0, 0.01, 400).unwrap();
        let b = ConvectionCoefficient::gaussian(0.5, 1.0).unwrap();
        let u0 = GridDensity::from_fn(grid, |y| if y.abs() < 0.5 { 1.0 } else { 0.0 }).unwrap();
        let run = |nu: f64| {
            let mut cfg = FvConfig::new(grid, 0.1);
            cfg.nu = nu;
            fv_run(&u0, 2.0, &b, &cfg, 0.0, &[0.1]).unwrap().states.remove(0)
        };
        let (r0, r1, r2, r3) = (run(0.0), run(0.04), run(0.02), run(0.01));
        let d1 = r1.l1_distance(&r0).unwrap();
        let d2 = r2.l1_distance(&r0).unwrap();
        let d3 = r3.l1_distance(&r0).unwrap();
        assert!(d1 > d2 && d2 > d3, "{d1} {d2} {d3}");
    }
}
