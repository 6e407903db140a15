//! Closed-form Barenblatt profile and the initial-datum presets, with exact
//! quantile functions obtained by inverting a quadrature CDF.

use statrs::function::beta::beta;

use crate::error::{invalid, Result};
use crate::measure1d::{Grid, GridDensity, Quantile};
use crate::numerics::{cumulative_integral, integrate};

/// Unit-mass self-similar solution of `∂t u = (u^m)_yy`:
/// `u(t, y) = t^{−α} (C − k y² t^{−2α})₊^{1/(m−1)}`, `α = 1/(m+1)`,
/// `k = (m−1)/(2m(m+1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barenblatt {
    pub m: f64,
    pub alpha: f64,
    pub k: f64,
    pub c: f64,
}

impl Barenblatt {
    pub fn new(m: f64) -> Result<Self> {
        if !(m > 1.0) || !m.is_finite() {
            return Err(invalid("m", format!("nonlinearity exponent must exceed 1, got {m}")));
        }
        let alpha = 1.0 / (m + 1.0);
        let k = (m - 1.0) / (2.0 * m * (m + 1.0));
        let p = 1.0 / (m - 1.0);
        // ∫(C − k y²)₊^p dy = C^{p+1/2} k^{−1/2} B(1/2, p+1) = 1
        let c = (k.sqrt() / beta(0.5, p + 1.0)).powf(1.0 / (p + 0.5));
        Ok(Self { m, alpha, k, c })
    }

    pub fn eval(&self, t: f64, y: f64) -> f64 {
        let s = t.powf(-self.alpha);
        s * (self.c - self.k * y * y * s * s).max(0.0).powf(1.0 / (self.m - 1.0))
    }

    pub fn support_radius(&self, t: f64) -> f64 {
        (self.c / self.k).sqrt() * t.powf(self.alpha)
    }

    pub fn density(&self, grid: Grid, t: f64) -> Result<GridDensity> {
        GridDensity::from_fn(grid, |y| self.eval(t, y))
    }

    /// Exact quantile function at time `t`; by self-similarity it is
    /// `t^α` times the one at `t = 1`.
    pub fn quantile(&self, t: f64, n: usize) -> Result<Quantile> {
        let r = self.support_radius(1.0);
        let q = quantile_from_fn(|y| self.eval(1.0, y), (-r, r), n)?;
        q.map_monotone(|g| g * t.powf(self.alpha))
    }
}

/// Quantiles `G(ω_i)` of the density proportional to `f ≥ 0` on `support`,
/// by bisection on a Gauss–Legendre CDF.
pub fn quantile_from_fn(f: impl Fn(f64) -> f64, support: (f64, f64), n: usize) -> Result<Quantile> {
    let (lo, hi) = support;
    if !(hi > lo) {
        return Err(invalid("support", "must be a nondegenerate interval"));
    }
    if n < 2 {
        return Err(invalid("n", "need at least 2 quantiles"));
    }
    let cells = 20_000;
    let h = (hi - lo) / cells as f64;
    let nodes: Vec<f64> = (0..=cells).map(|i| lo + h * i as f64).collect();
    let cum = cumulative_integral(&f, &nodes);
    let total = cum[cells];
    if !(total > 0.0) || !total.is_finite() {
        return Err(crate::Error::ZeroMass);
    }
    let values = (0..n)
        .map(|i| {
            let target = total * (i as f64 + 0.5) / n as f64;
            let j = (cum.partition_point(|&c| c < target)).clamp(1, cells) - 1;
            let (mut a, mut b) = (nodes[j], nodes[j + 1]);
            let base = cum[j];
            for _ in 0..60 {
                let mid = 0.5 * (a + b);
                if base + integrate(&f, nodes[j], mid, 1) < target {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            0.5 * (a + b)
        })
        .collect();
    Quantile::new(values)
}

// C¹ step from 0 (z ≤ 0) to 1 (z ≥ 1)
fn smoothstep(z: f64) -> f64 {
    let z = z.clamp(0.0, 1.0);
    z * z * (3.0 - 2.0 * z)
}

/// Compactly supported initial data; values are unnormalized shapes.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDatum {
    /// Barenblatt profile of exponent `m` at time `t0`.
    Barenblatt { m: f64, t0: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Two `cos²` bumps of radius `radius`.
    DoubleBump { centers: (f64, f64), radius: f64, weights: (f64, f64) },
    /// Level `left` on `[lo, mid]`, `right` on `[mid, hi]`, with smoothed
    /// transitions of width `width` at all three points.
    RiemannSmoothed { lo: f64, mid: f64, hi: f64, left: f64, right: f64, width: f64 },
}

impl InitialDatum {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InitialDatum::Barenblatt { m, t0 } => {
                Barenblatt::new(m)?;
                if !(t0 > 0.0) {
                    return Err(invalid("t0", "must be positive"));
                }
            }
            InitialDatum::Uniform { lo, hi } => {
                if !(hi > lo) {
                    return Err(invalid("uniform", "need lo < hi"));
                }
            }
            InitialDatum::DoubleBump { radius, weights, .. } => {
                if !(radius > 0.0 && weights.0 >= 0.0 && weights.1 >= 0.0 && weights.0 + weights.1 > 0.0) {
                    return Err(invalid("double_bump", "need radius > 0 and nonnegative weights, not both zero"));
                }
            }
            InitialDatum::RiemannSmoothed { lo, mid, hi, left, right, width } => {
                if !(lo + width < mid && mid + width < hi && width > 0.0) {
                    return Err(invalid("riemann_smoothed", "need lo + width < mid < hi − width and width > 0"));
                }
                if !(left > 0.0 && right > 0.0) {
                    return Err(invalid("riemann_smoothed", "levels must be positive"));
                }
            }
        }
        Ok(())
    }

    pub fn shape(&self, y: f64) -> f64 {
        match *self {
            InitialDatum::Barenblatt { m, t0 } => Barenblatt::new(m).map(|b| b.eval(t0, y)).unwrap_or(0.0),
            InitialDatum::Uniform { lo, hi } => {
                if (lo..hi).contains(&y) {
                    1.0
                } else {
                    0.0
                }
            }
            InitialDatum::DoubleBump { centers, radius, weights } => {
                let bump = |c: f64| {
                    let s = (y - c) / radius;
                    if s.abs() < 1.0 {
                        (0.5 * std::f64::consts::PI * s).cos().powi(2)
                    } else {
                        0.0
                    }
                };
                weights.0 * bump(centers.0) + weights.1 * bump(centers.1)
            }
            InitialDatum::RiemannSmoothed { lo, mid, hi, left, right, width } => {
                let up = smoothstep((y - lo) / width + 0.5);
                let down = 1.0 - smoothstep((y - hi) / width + 0.5);
                let level = left + (right - left) * smoothstep((y - mid) / width + 0.5);
                up * down * level
            }
        }
    }

    /// Closed interval containing the support.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            InitialDatum::Barenblatt { m, t0 } => {
                let r = Barenblatt::new(m).map(|b| b.support_radius(t0)).unwrap_or(0.0);
                (-r, r)
            }
            InitialDatum::Uniform { lo, hi } => (lo, hi),
            InitialDatum::DoubleBump { centers, radius, .. } => {
                (centers.0.min(centers.1) - radius, centers.0.max(centers.1) + radius)
            }
            InitialDatum::RiemannSmoothed { lo, hi, width, .. } => (lo - 0.5 * width, hi + 0.5 * width),
        }
    }

    /// Normalized cell averages on `grid`.
    pub fn density(&self, grid: Grid) -> Result<GridDensity> {
        self.validate()?;
        GridDensity::from_fn(grid, |y| self.shape(y))
    }

    /// Exact quantiles of the normalized datum.
    pub fn quantile(&self, n: usize) -> Result<Quantile> {
        self.validate()?;
        if let InitialDatum::Barenblatt { m, t0 } = *self {
            return Barenblatt::new(m)?.quantile(t0, n);
        }
        quantile_from_fn(|y| self.shape(y), self.support(), n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn barenblatt_constants() {
        let b = Barenblatt::new(2.0).unwrap();
        assert!((b.c - 0.360562392576852).abs() < 1e-14);
        assert!((b.c - (3.0 / (4.0 * 12f64.sqrt())).powf(2.0 / 3.0)).abs() < 1e-14);
        assert!((b.k - 1.0 / 12.0).abs() < 1e-16);
        for m in [1.5, 2.0, 3.0, 4.5] {
            let b = Barenblatt::new(m).unwrap();
            for t in [0.1, 1.0, 3.0] {
                let r = b.support_radius(t);
                let mass = integrate(|y| b.eval(t, y), -r, r, 4000);
                assert!((mass - 1.0).abs() < 1e-6, "m = {m}, t = {t}: {mass}");
            }
        }
    }

    #[test]
    fn barenblatt_solves_the_pde() {
        // central-difference residual of ∂t u − (u^m)_yy decays like h²
        for m in [2.0, 3.0] {
            let b = Barenblatt::new(m).unwrap();
            let w = |t: f64, y: f64| b.eval(t, y).powf(m);
            let residual = |h: f64| {
                [(0.3, 0.0), (0.3, 0.5), (0.7, -0.9), (1.2, 0.4)]
                    .iter()
                    .map(|&(t, y)| {
                        let ut = (b.eval(t + h, y) - b.eval(t - h, y)) / (2.0 * h);
                        let wyy = (w(t, y + h) - 2.0 * w(t, y) + w(t, y - h)) / (h * h);
                        (ut - wyy).abs()
                    })
                    .fold(0.0, f64::max)
            };
            let (r1, r2) = (residual(1e-2), residual(5e-3));
            assert!(r1 < 1e-3 && r2 < r1 / 3.0, "m = {m}: {r1} {r2}");
        }
    }

    #[test]
    fn front_tails_follow_the_barenblatt_edge() {
        use crate::measure1d::Tails;
        let b = Barenblatt::new(2.0).unwrap();
        let grid = Grid::new(-2.0, 2.5e-3, 1600).unwrap();
        let exact = b.density(grid, 0.5).unwrap();
        let q = b.quantile(0.5, 200).unwrap();
        let flat = q.to_density(grid).unwrap().density;
        let front = q.to_density_with(grid, Tails::front(2.0)).unwrap().density;
        assert!((front.mass() - 1.0).abs() < 1e-12);
        let (e_flat, e_front) = (flat.l1_distance(&exact).unwrap(), front.l1_distance(&exact).unwrap());
        assert!(e_front < 0.5 * e_flat, "{e_front} vs {e_flat}");
        // the linear edge profile puts the support edge where it belongs
        let r = b.support_radius(0.5);
        let (lo, hi) = q.support_with(Tails::front(2.0));
        let reach = hi - q.values()[q.n() - 1];
        assert!((hi - r).abs() < 0.05 * reach && (lo + r).abs() < 0.05 * reach, "{lo} {hi} vs ±{r}, tail {reach}");
        // and no jump at the front
        let jump = |d: &GridDensity| d.values().windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        assert!(jump(&front) < 0.5 * jump(&flat), "{} vs {}", jump(&front), jump(&flat));
    }

    #[test]
    fn front_exponent_is_validated() {
        use crate::measure1d::Tails;
        let q = Barenblatt::new(2.0).unwrap().quantile(0.5, 20).unwrap();
        let grid = Grid::new(-2.0, 1e-2, 400).unwrap();
        assert!(q.to_density_with(grid, Tails::Front(-0.5)).is_err());
        assert!(q.to_density_with(grid, Tails::Front(f64::NAN)).is_err());
        // exponent 0 spends the tail mass at constant density
        let (lo, _) = q.support_with(Tails::Front(0.0));
        assert!((q.values()[0] - lo - 0.5 * (q.values()[1] - q.values()[0])).abs() < 1e-14);
    }

    #[test]
    fn barenblatt_quantiles_are_exact() {
        let b = Barenblatt::new(2.0).unwrap();
        let q = b.quantile(0.1, 400).unwrap();
        // CDF at G_i equals ω_i
        let r = b.support_radius(0.1);
        for i in [0, 57, 199, 200, 399] {
            let g = q.values()[i];
            let cdf = integrate(|y| b.eval(0.1, y), -r, g, 200);
            assert!((cdf - q.omega(i)).abs() < 1e-10);
        }
        for i in 0..200 {
            assert!((q.values()[i] + q.values()[399 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn presets_are_normalized() {
        let grid = Grid::new(-3.0, 5e-3, 1200).unwrap();
        let presets = [
            InitialDatum::Barenblatt { m: 2.0, t0: 0.1 },
            InitialDatum::Uniform { lo: -0.5, hi: 0.7 },
            InitialDatum::DoubleBump { centers: (-0.8, 0.6), radius: 0.5, weights: (1.0, 2.0) },
            InitialDatum::RiemannSmoothed { lo: -1.0, mid: 0.0, hi: 1.0, left: 1.0, right: 0.3, width: 0.2 },
        ];
        for p in presets {
            let d = p.density(grid).unwrap();
            assert!((d.mass() - 1.0).abs() < 1e-12);
            let q = p.quantile(100).unwrap();
            let (lo, hi) = p.support();
            assert!(q.values()[0] > lo && q.values()[99] < hi);
            // empirical CDF of the grid density agrees with the quantiles
            let cdf = d.cdf();
            for i in [5, 50, 94] {
                assert!((cdf.eval(q.values()[i]) - q.omega(i)).abs() < 5e-3, "{p:?}");
            }
        }
    }

    #[test]
    fn invalid_presets_are_rejected() {
        assert!(InitialDatum::Uniform { lo: 1.0, hi: 0.0 }.validate().is_err());
        assert!(InitialDatum::Barenblatt { m: 1.0, t0: 0.1 }.validate().is_err());
        assert!(InitialDatum::RiemannSmoothed { lo: 0.0, mid: 0.1, hi: 1.0, left: 1.0, right: 1.0, width: 0.2 }
            .validate()
            .is_err());
    }
}
