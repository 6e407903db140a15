//! One-dimensional probability densities in grid form and quantile form, and
//! the exact L²-Wasserstein distance between them.
//!
//! A [`GridDensity`] stores cell averages on a uniform grid; its distribution
//! function is piecewise linear. A [`Quantile`] stores the pseudo-inverse
//! distribution function sampled at the midpoints `ω_i = (i + ½)/n`. In one
//! dimension the Wasserstein distance is the L² distance between quantile
//! functions, which the midpoint rule evaluates directly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::numerics::{integrate, MonotoneCubic};

/// Absolute tolerance on the unit-mass invariant.
pub const MASS_TOL: f64 = 1e-10;

/// Mass in the boundary cells above which a window overflow is reported.
pub const OVERFLOW_TOL: f64 = 1e-8;

/// Uniform cell grid `[x_min, x_min + cells·dx]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x_min: f64,
    pub dx: f64,
    pub cells: usize,
}

impl Grid {
    pub fn new(x_min: f64, dx: f64, cells: usize) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(invalid("dx", format!("cell width must be positive, got {dx}")));
        }
        if cells == 0 {
            return Err(invalid("cells", "grid needs at least one cell"));
        }
        if !x_min.is_finite() {
            return Err(invalid("x_min", "must be finite"));
        }
        Ok(Self { x_min, dx, cells })
    }

    /// Grid covering `[lo, hi]` with cell width as close to `dx` as possible.
    pub fn covering(lo: f64, hi: f64, dx: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(invalid("window", format!("empty window [{lo}, {hi}]")));
        }
        let cells = ((hi - lo) / dx).round().max(1.0) as usize;
        Self::new(lo, (hi - lo) / cells as f64, cells)
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.dx * self.cells as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.x_min + self.dx * i as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_min + self.dx * (i as f64 + 0.5)
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.cells).map(|i| self.center(i))
    }

    pub fn matches(&self, other: &Grid) -> bool {
        self.cells == other.cells
            && (self.x_min - other.x_min).abs() <= 1e-12 * (1.0 + self.x_min.abs())
            && (self.dx - other.dx).abs() <= 1e-12 * self.dx
    }
}

/// Nonnegative cell-averaged density with unit mass.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    grid: Grid,
    values: Vec<f64>,
}

impl GridDensity {
    /// Validate and wrap cell averages.
    pub fn new(x_min: f64, dx: f64, values: Vec<f64>) -> Result<Self> {
        let grid = Grid::new(x_min, dx, values.len())?;
        check_values(&values)?;
        let mass = dx * values.iter().sum::<f64>();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::NotNormalized { mass, tol: MASS_TOL });
        }
        Ok(Self { grid, values })
    }

    /// Wrap nonnegative cell values after rescaling them to unit mass.
    pub fn normalized(grid: Grid, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells {
            return Err(Error::SizeMismatch {
                left: values.len(),
                right: grid.cells,
            });
        }
        check_values(&values)?;
        let mass = grid.dx * values.iter().sum::<f64>();
        if !(mass > 0.0) {
            return Err(Error::ZeroMass);
        }
        values.iter_mut().for_each(|v| *v /= mass);
        Ok(Self { grid, values })
    }

    /// Cell averages of `f` (integrated by Gauss–Legendre per cell), normalized.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..grid.cells)
            .map(|i| integrate(&f, grid.node(i), grid.node(i + 1), 1) / grid.dx)
            .collect();
        Self::normalized(grid, values)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn x_min(&self) -> f64 {
        self.grid.x_min
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx
    }

    pub fn x_max(&self) -> f64 {
        self.grid.x_max()
    }

    pub fn cells(&self) -> usize {
        self.grid.cells
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.grid.dx * self.values.iter().sum::<f64>()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Mass carried by the first and last cell.
    pub fn boundary_mass(&self) -> f64 {
        let n = self.values.len();
        let edge = if n == 1 {
            self.values[0]
        } else {
            self.values[0] + self.values[n - 1]
        };
        edge * self.grid.dx
    }

    /// Whether mass has reached the boundary cells of the window.
    pub fn window_overflow(&self) -> bool {
        self.boundary_mass() > OVERFLOW_TOL
    }

    /// The piecewise-linear distribution function `U(x) = μ((−∞, x))`.
    pub fn cdf(&self) -> Cdf {
        let mut cumulative = Vec::with_capacity(self.values.len() + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for v in &self.values {
            acc += v * self.grid.dx;
            cumulative.push(acc);
        }
        // Pin the top to exactly 1 so that U(x_max) = 1 without rounding drift.
        let total = acc;
        if total > 0.0 {
            cumulative.iter_mut().for_each(|c| *c /= total);
        }
        Cdf {
            grid: self.grid,
            cumulative,
        }
    }

    /// Sample the pseudo-inverse distribution function at the `n` midpoints.
    pub fn to_quantile(&self, n: usize) -> Result<Quantile> {
        if n < 2 {
            return Err(invalid("n", format!("need at least two quantile cells, got {n}")));
        }
        if !(self.mass() > 0.0) {
            return Err(Error::ZeroMass);
        }
        let cdf = self.cdf();
        let values = (0..n)
            .map(|i| cdf.inverse((i as f64 + 0.5) / n as f64))
            .collect();
        Quantile::new(values)
    }

    /// `dx · Σ |u_i − v_i|` on a shared grid.
    pub fn l1_distance(&self, other: &GridDensity) -> Result<f64> {
        if !self.grid.matches(&other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(self.grid.dx
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }

    pub fn to_csv(&self) -> String {
        format_csv("density", self.values.len(), self.grid.x_min, self.grid.dx, &self.values)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (kind, x_min, dx, values) = parse_csv(text)?;
        if kind != "density" {
            return Err(Error::Parse(format!("expected kind `density`, found `{kind}`")));
        }
        Self::new(x_min, dx, values)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

fn check_values(values: &[f64]) -> Result<()> {
    for (cell, &value) in values.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index: cell });
        }
        if value < 0.0 {
            return Err(Error::NegativeDensity { cell, value });
        }
    }
    Ok(())
}

/// Piecewise-linear distribution function of a [`GridDensity`].
#[derive(Debug, Clone)]
pub struct Cdf {
    grid: Grid,
    cumulative: Vec<f64>,
}

impl Cdf {
    pub fn eval(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x <= g.x_min {
            return 0.0;
        }
        if x >= g.x_max() {
            return 1.0;
        }
        let s = (x - g.x_min) / g.dx;
        let i = (s.floor() as usize).min(g.cells - 1);
        let frac = s - i as f64;
        self.cumulative[i] + frac * (self.cumulative[i + 1] - self.cumulative[i])
    }

    /// `sup{x | U(x) ≤ ω}` restricted to the grid window, by bisection over
    /// the cumulative table followed by linear inversion inside the cell.
    pub fn inverse(&self, omega: f64) -> f64 {
        let g = &self.grid;
        let k = self.cumulative.partition_point(|&u| u <= omega);
        if k == 0 {
            return g.x_min;
        }
        let c = k - 1;
        if c >= g.cells {
            return g.x_max();
        }
        let (u0, u1) = (self.cumulative[c], self.cumulative[c + 1]);
        g.node(c) + (omega - u0) / (u1 - u0) * g.dx
    }
}

/// Monotone samples `G_i ≈ G((i + ½)/n)` of a pseudo-inverse distribution
/// function.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantile {
    values: Vec<f64>,
}

/// How the reconstruction spends the mass `1/2n` beyond each end sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Tails {
    /// Constant density over half an increment; exact for densities with a
    /// jump at the edge of their support (uniform, say).
    #[default]
    Flat,
    /// Density vanishing like `d^p` at distance `d` beyond the support edge,
    /// the profile of a degenerate-diffusion front (`p = 1/(m−1)`). The tail
    /// length is fixed by the first two knots: masses `1/2n` and `3/2n` give
    /// `d₀ = ΔG / (3^{1/(p+1)} − 1)`, and the density is continuous at the
    /// end knots.
    Front(f64),
}

impl Tails {
    /// Front tails for porous-medium exponent `m > 1`.
    pub fn front(m: f64) -> Self {
        Tails::Front(1.0 / (m - 1.0))
    }

    // tail length in units of the end increment
    fn reach(self) -> f64 {
        match self {
            Tails::Flat => 0.5,
            Tails::Front(p) => 1.0 / (3f64.powf(1.0 / (p + 1.0)) - 1.0),
        }
    }
}

/// Result of pushing a quantile to a spatial grid.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub density: GridDensity,
    /// Number of flat quantile segments (point masses); nonzero means the
    /// density is not absolutely continuous at quantile resolution.
    pub atoms: usize,
    /// Mass that fell outside the grid window and was folded into the
    /// boundary cells.
    pub overflow_mass: f64,
}

impl Quantile {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("n", "quantile needs at least one value"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        if let Some(i) = values.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::NonMonotoneQuantile { index: i + 1 });
        }
        Ok(Self { values })
    }

    /// Quantile of the uniform ω-midpoints mapped through `g`.
    pub fn from_fn(n: usize, g: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..n).map(|i| g((i as f64 + 0.5) / n as f64)).collect())
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn omega(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.values.len() as f64
    }

    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }

    /// Number of increments that are zero relative to the spread.
    pub fn atom_count(&self) -> usize {
        let span = self.values[self.values.len() - 1] - self.values[0];
        let tol = 1e-14 * span.max(f64::MIN_POSITIVE);
        self.increments().filter(|&d| d <= tol).count()
    }

    pub fn shift(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|g| g + c).collect(),
        }
    }

    /// Map every sample through a nondecreasing function (push-forward).
    pub fn map_monotone(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.values.iter().map(|&g| f(g)).collect())
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n() as f64
    }

    /// Support of the default reconstruction: the samples extended by half
    /// an increment at each end.
    pub fn support(&self) -> (f64, f64) {
        self.support_with(Tails::Flat)
    }

    pub fn support_with(&self, tails: Tails) -> (f64, f64) {
        let g = &self.values;
        let n = g.len();
        if n < 2 {
            return (g[0], g[0]);
        }
        let f = tails.reach();
        (g[0] - f * (g[1] - g[0]), g[n - 1] + f * (g[n - 1] - g[n - 2]))
    }

    /// Distribution function of the reconstructed density: a monotone cubic
    /// through the knots `(G_i, ω_i)`, each tail carrying mass `1/2n` as
    /// prescribed by `tails`. With atoms the piecewise-linear interpolant
    /// (flat tails) is used instead.
    fn distribution(&self, tails: Tails) -> Result<Box<dyn Fn(f64) -> f64>> {
        let n = self.values.len();
        if n < 2 {
            return Err(invalid("n", "reconstruction needs at least two quantile values"));
        }
        let g = &self.values;
        if let Tails::Front(p) = tails {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(invalid("tails", "front exponent must be finite and nonnegative"));
            }
        }
        let p = match tails {
            Tails::Front(p) if self.atom_count() == 0 && n > 2 => p,
            _ => {
                let (lo, hi) = self.support_with(Tails::Flat);
                let mut xs = Vec::with_capacity(n + 2);
                let mut ws = Vec::with_capacity(n + 2);
                xs.push(lo);
                ws.push(0.0);
                for (i, &v) in g.iter().enumerate() {
                    xs.push(v);
                    ws.push(self.omega(i));
                }
                xs.push(hi);
                ws.push(1.0);
                if self.atom_count() > 0 {
                    return Ok(Box::new(move |x| piecewise_linear_cdf(&xs, &ws, x)));
                }
                let interp = MonotoneCubic::new(xs, ws)?;
                return Ok(Box::new(move |x| interp.eval(x)));
            }
        };
        let (lo, hi) = self.support_with(tails);
        let (g_first, g_last) = (g[0], g[n - 1]);
        let (d_lo, d_hi) = (g_first - lo, hi - g_last);
        let tail = 0.5 / n as f64;
        let ws: Vec<f64> = (0..n).map(|i| self.omega(i)).collect();
        // density at the end knots as seen from the tails
        let interp = MonotoneCubic::with_end_slopes(g.clone(), ws, (p + 1.0) * tail / d_lo, (p + 1.0) * tail / d_hi)?;
        let e = p + 1.0;
        Ok(Box::new(move |x| {
            if x <= lo {
                0.0
            } else if x < g_first {
                tail * ((x - lo) / d_lo).powf(e)
            } else if x <= g_last {
                interp.eval(x)
            } else if x < hi {
                1.0 - tail * ((hi - x) / d_hi).powf(e)
            } else {
                1.0
            }
        }))
    }

    /// Reconstruct cell averages on `grid` with flat tails. Mass beyond the
    /// window is folded into the boundary cells and reported.
    pub fn to_density(&self, grid: Grid) -> Result<Reconstruction> {
        self.to_density_with(grid, Tails::Flat)
    }

    pub fn to_density_with(&self, grid: Grid, tails: Tails) -> Result<Reconstruction> {
        let u = self.distribution(tails)?;
        let atoms = self.atom_count();
        let nodes: Vec<f64> = (0..=grid.cells).map(|i| u(grid.node(i))).collect();
        let overflow_mass = nodes[0] + (1.0 - nodes[grid.cells]);
        let mut values = Vec::with_capacity(grid.cells);
        for i in 0..grid.cells {
            let lo = if i == 0 { 0.0 } else { nodes[i] };
            let hi = if i + 1 == grid.cells { 1.0 } else { nodes[i + 1] };
            values.push(((hi - lo) / grid.dx).max(0.0));
        }
        let density = GridDensity::normalized(grid, values)?;
        Ok(Reconstruction {
            density,
            atoms,
            overflow_mass,
        })
    }

    /// `(Σ (G_i − G̃_i)² / n)^{1/2}`.
    pub fn wasserstein2(&self, other: &Quantile) -> Result<f64> {
        if self.n() != other.n() {
            return Err(Error::SizeMismatch {
                left: self.n(),
                right: other.n(),
            });
        }
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok((s / self.n() as f64).sqrt())
    }

    pub fn to_csv(&self) -> String {
        let n = self.values.len();
        format_csv("quantile", n, 0.0, 1.0 / n as f64, &self.values)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let (kind, _, _, values) = parse_csv(text)?;
        if kind != "quantile" {
            return Err(Error::Parse(format!("expected kind `quantile`, found `{kind}`")));
        }
        Self::new(values)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

fn piecewise_linear_cdf(xs: &[f64], ws: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|&v| v <= x);
    if k == 0 {
        return 0.0;
    }
    let k = k - 1;
    if k + 1 >= xs.len() {
        return 1.0;
    }
    ws[k] + (ws[k + 1] - ws[k]) * (x - xs[k]) / (xs[k + 1] - xs[k])
}

/// Exact W₂ between two quantiles; see [`Quantile::wasserstein2`].
pub fn wasserstein2(q1: &Quantile, q2: &Quantile) -> Result<f64> {
    q1.wasserstein2(q2)
}

pub(crate) fn format_csv(kind: &str, n: usize, x_min: f64, dx: f64, values: &[f64]) -> String {
    let mut s = String::with_capacity(32 + 26 * values.len());
    let _ = writeln!(s, "# {kind},{n},{x_min:.16e},{dx:.16e}");
    for v in values {
        let _ = writeln!(s, "{v:.16e}");
    }
    s
}

pub(crate) fn parse_csv(text: &str) -> Result<(String, f64, f64, Vec<f64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty input".into()))?
        .trim();
    let body = header
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse("missing `# kind,n,x_min,dx` header".into()))?;
    let fields: Vec<&str> = body.split(',').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(Error::Parse(format!("header has {} fields, expected 4", fields.len())));
    }
    let num = |s: &str, what: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|e| Error::Parse(format!("header field {what}: {e}")))
    };
    let n: usize = fields[1]
        .parse()
        .map_err(|e| Error::Parse(format!("header field n: {e}")))?;
    let x_min = num(fields[2], "x_min")?;
    let dx = num(fields[3], "dx")?;
    let values = lines
        .enumerate()
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("value line {}: {e}", i + 2)))
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != n {
        return Err(Error::Parse(format!("header announces {n} values, found {}", values.len())));
    }
    Ok((fields[0].to_string(), x_min, dx, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform01(cells: usize) -> GridDensity {
        GridDensity::new(0.0, 1.0 / cells as f64, vec![1.0; cells]).unwrap()
    }

    #[test]
    fn cdf_of_uniform_and_below_support() {
        let u = uniform01(100).cdf();
        assert!((u.eval(0.5) - 0.5).abs() < 1e-14);
        assert_eq!(u.eval(-3.0), 0.0);
        assert!((u.eval(1.0) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cdf_of_linear_density() {
        // ρ(x) = 2x on [0,1]: cell averages are exact for linear ρ, and the
        // piecewise-linear CDF is exact at nodes.
        let grid = Grid::new(0.0, 0.01, 100).unwrap();
        let d = GridDensity::from_fn(grid, |x| 2.0 * x).unwrap();
        assert!((d.cdf().eval(0.5) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn quantile_of_uniform_hits_midpoints() {
        let q = uniform01(1000).to_quantile(4).unwrap();
        for (g, e) in q.values().iter().zip([0.125, 0.375, 0.625, 0.875]) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn quantile_of_linear_density_inverts_square() {
        let grid = Grid::new(0.0, 1e-3, 1000).unwrap();
        let d = GridDensity::from_fn(grid, |x| 2.0 * x).unwrap();
        // ω_1 = 0.25 for n = 2: G = sqrt(0.25) = 0.5
        let q = d.to_quantile(2).unwrap();
        assert!((q.values()[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn narrow_bump_collapses_quantile() {
        let grid = Grid::new(-1.0, 1e-3, 2000).unwrap();
        let c = 0.3;
        let d = GridDensity::from_fn(grid, |x| if (x - c).abs() < 2e-3 { 1.0 } else { 0.0 }).unwrap();
        let q = d.to_quantile(16).unwrap();
        assert!(q.values().iter().all(|g| (g - c).abs() < 3e-3));
    }

    #[test]
    fn to_quantile_rejects_small_n() {
        assert!(uniform01(10).to_quantile(1).is_err());
    }

    #[test]
    fn to_density_examples() {
        let grid = Grid::new(0.0, 0.01, 100).unwrap();
        let q = Quantile::from_fn(50, |w| w).unwrap();
        let r = q.to_density(grid).unwrap();
        assert_eq!(r.atoms, 0);
        assert!(r.density.values().iter().all(|v| (v - 1.0).abs() < 1e-10));

        let grid2 = Grid::new(0.0, 0.01, 200).unwrap();
        let q2 = Quantile::from_fn(64, |w| 2.0 * w).unwrap();
        let r2 = q2.to_density(grid2).unwrap();
        assert!(r2.density.values().iter().all(|v| (v - 0.5).abs() < 1e-10));
        assert!((r2.density.mass() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn to_density_of_square_quantile() {
        // G(ω) = ω² has density 1/(2√x) on (0,1].
        let grid = Grid::new(0.0, 1e-3, 1000).unwrap();
        let q = Quantile::from_fn(1000, |w| w * w).unwrap();
        let r = q.to_density(grid).unwrap();
        let exact = GridDensity::from_fn(grid, |x| if x > 0.0 { 0.5 / x.sqrt() } else { 0.0 }).unwrap();
        let err = r.density.l1_distance(&exact).unwrap();
        assert!(err < 1e-2, "L1 error {err}");
    }

    #[test]
    fn atoms_are_flagged_not_fatal() {
        let grid = Grid::new(-1.0, 0.1, 20).unwrap();
        let q = Quantile::new(vec![0.0, 0.0, 0.0, 0.5]).unwrap();
        let r = q.to_density(grid).unwrap();
        assert_eq!(r.atoms, 2);
        assert!((r.density.mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn overflow_mass_goes_to_boundary_cells() {
        let grid = Grid::new(0.0, 0.1, 5).unwrap();
        let q = Quantile::from_fn(10, |w| w).unwrap();
        let r = q.to_density(grid).unwrap();
        assert!((r.overflow_mass - 0.5).abs() < 1e-12);
        assert!(r.density.window_overflow());
        assert!((r.density.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wasserstein_examples() {
        let n = 1000;
        let a = Quantile::from_fn(n, |w| w).unwrap();
        let b = Quantile::from_fn(n, |w| 2.0 + w).unwrap();
        assert!((a.wasserstein2(&b).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(a.wasserstein2(&a).unwrap(), 0.0);
        let c = Quantile::from_fn(n, |w| 2.0 * w).unwrap();
        // midpoint rule for ∫ω² has error 1/(12 n²)
        let exact = (1.0f64 / 3.0).sqrt();
        assert!((a.wasserstein2(&c).unwrap() - exact).abs() < 1e-6);
        let short = Quantile::from_fn(10, |w| w).unwrap();
        assert!(matches!(a.wasserstein2(&short), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(matches!(
            GridDensity::new(0.0, 1.0, vec![0.5, -0.1, 0.6]),
            Err(Error::NegativeDensity { cell: 1, .. })
        ));
        assert!(matches!(
            GridDensity::new(0.0, 1.0, vec![0.5, 0.6]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            GridDensity::normalized(Grid::new(0.0, 1.0, 2).unwrap(), vec![0.0, 0.0]),
            Err(Error::ZeroMass)
        ));
        assert!(matches!(
            Quantile::new(vec![0.0, 1.0, 0.5]),
            Err(Error::NonMonotoneQuantile { index: 2 })
        ));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let grid = Grid::new(-1.0, 0.01, 200).unwrap();
        let d = GridDensity::from_fn(grid, |x| (-x * x).exp()).unwrap();
        let back = GridDensity::from_csv(&d.to_csv()).unwrap();
        assert_eq!(back, d);
        assert!(d.to_csv().starts_with("# density,200,"));
        let q = d.to_quantile(33).unwrap();
        assert_eq!(Quantile::from_csv(&q.to_csv()).unwrap(), q);
        assert!(Quantile::from_csv(&d.to_csv()).is_err());
    }
}
