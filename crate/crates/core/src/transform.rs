//! Coordinate change between the convection–diffusion equation in `u(t, y)`
//! and the gradient-flow form `∂t ρ = (ρ [a(x) ρ^{m-1}]_x)_x` in `ρ(t, x)`.
//!
//! Given the convection coefficient `b`, the weight
//! `α(y) = α₀ exp(−((m−1)/2m) ∫₀^y b)` defines the coordinate map through
//! `T' = α(T)`, `T(0) = 0`, and the mobility weight
//! `a(x) = (m/(m−1)) α(T(x))^{−(m+1)}`. Densities transform by
//! `ρ(x) = T'(x) u(T(x))`, which in quantile form is the push-forward
//! `G_ρ = T⁻¹ ∘ G_u`.

use std::fmt;
use std::sync::Arc;

use statrs::function::erf::erf;

use crate::error::{invalid, Error, Result};
use crate::measure1d::{Grid, GridDensity, Quantile};
use crate::numerics::{cumulative_integral, integrate, uniform_nodes, CubicSpline, Extrapolation};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Default tabulation step for all coefficient tables.
pub const DEFAULT_STEP: f64 = 1e-3;

/// The coefficient `b ∈ L¹ ∩ W^{1,∞}` with certified bounds.
#[derive(Clone)]
pub struct ConvectionCoefficient {
    name: String,
    b: RealFn,
    b_prime: RealFn,
    /// Upper bound on `∫|b|`.
    pub l1_norm_bound: f64,
    /// Upper bound on both `sup|b|` and `sup|b'|`.
    pub lipschitz_bound: f64,
    /// Interval outside of which `b` is negligible; used for sampling.
    pub essential_support: (f64, f64),
}

impl fmt::Debug for ConvectionCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvectionCoefficient")
            .field("name", &self.name)
            .field("l1_norm_bound", &self.l1_norm_bound)
            .field("lipschitz_bound", &self.lipschitz_bound)
            .finish()
    }
}

impl ConvectionCoefficient {
    pub fn new(
        name: impl Into<String>,
        b: impl Fn(f64) -> f64 + Send + Sync + 'static,
        b_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
        l1_norm_bound: f64,
        lipschitz_bound: f64,
        essential_support: (f64, f64),
    ) -> Self {
        Self {
            name: name.into(),
            b: Arc::new(b),
            b_prime: Arc::new(b_prime),
            l1_norm_bound,
            lipschitz_bound,
            essential_support,
        }
    }

    /// `b ≡ 0`: the pure porous medium equation.
    pub fn zero() -> Self {
        Self::new("zero", |_| 0.0, |_| 0.0, 0.0, 0.0, (0.0, 0.0))
    }

    /// `b(y) = A exp(−(y/w)²)`.
    pub fn gaussian(amplitude: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(invalid("width", "gaussian width must be positive"));
        }
        let l1 = amplitude.abs() * width * std::f64::consts::PI.sqrt();
        let lip = amplitude.abs() * (1.0f64).max(2f64.sqrt() / (width * 1f64.exp().sqrt()));
        Ok(Self::new(
            format!("gaussian(amplitude={amplitude}, width={width})"),
            move |y| amplitude * (-(y / width).powi(2)).exp(),
            move |y| -2.0 * y / (width * width) * amplitude * (-(y / width).powi(2)).exp(),
            l1 * (1.0 + 1e-12),
            lip * (1.0 + 1e-12),
            (-8.0 * width, 8.0 * width),
        ))
    }

    /// Indicator of `[lo, hi]` smoothed by an error function of width `s`.
    pub fn smoothed_indicator(lo: f64, hi: f64, smoothing: f64) -> Result<Self> {
        if !(hi > lo) || !(smoothing > 0.0) {
            return Err(invalid("smoothed_indicator", "need lo < hi and smoothing > 0"));
        }
        let s = smoothing;
        let norm = 1.0 / (s * std::f64::consts::PI.sqrt());
        Ok(Self::new(
            format!("smoothed_indicator(lo={lo}, hi={hi}, smoothing={s})"),
            move |y| 0.5 * (erf((y - lo) / s) - erf((y - hi) / s)),
            move |y| norm * ((-((y - lo) / s).powi(2)).exp() - (-((y - hi) / s).powi(2)).exp()),
            (hi - lo) * (1.0 + 1e-12),
            1.0f64.max(norm),
            (lo - 8.0 * s, hi + 8.0 * s),
        ))
    }

    /// A constant coefficient. Only zero is admissible.
    pub fn constant(value: f64) -> Result<Self> {
        if value != 0.0 {
            return Err(Error::ConstantConvection);
        }
        Ok(Self::zero())
    }

    /// Tabulated `b` on a uniform grid with user-supplied bounds; the table is
    /// continued by zero outside.
    pub fn from_table(
        y_min: f64,
        dy: f64,
        values: Vec<f64>,
        l1_norm_bound: f64,
        lipschitz_bound: f64,
    ) -> Result<Self> {
        let spline = Arc::new(CubicSpline::new(y_min, dy, values, Extrapolation::Constant)?);
        let (lo, hi) = (spline.lo(), spline.hi());
        let edge = spline.node_values()[0].abs().max(spline.node_values()[spline.len() - 1].abs());
        if edge > 1e-8 {
            return Err(Error::BoundViolated(format!(
                "tabulated b must vanish at the table ends (|b| = {edge})"
            )));
        }
        let s1 = spline.clone();
        let s2 = spline;
        let b = Self::new(
            "table",
            move |y| if s1.contains(y) { s1.eval(y) } else { 0.0 },
            move |y| if s2.contains(y) { s2.derivative(y) } else { 0.0 },
            l1_norm_bound,
            lipschitz_bound,
            (lo, hi),
        );
        b.validate()?;
        Ok(b)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, y: f64) -> f64 {
        (self.b)(y)
    }

    pub fn derivative(&self, y: f64) -> f64 {
        (self.b_prime)(y)
    }

    pub fn is_zero(&self) -> bool {
        self.l1_norm_bound == 0.0 && self.lipschitz_bound == 0.0
    }

    /// Sampled `(sup|b|, sup|b'|)` over the essential support.
    pub fn sampled_sups(&self) -> (f64, f64) {
        let (lo, hi) = self.essential_support;
        if !(hi > lo) {
            return (0.0, 0.0);
        }
        let n = 20_000;
        (0..=n)
            .map(|i| lo + (hi - lo) * i as f64 / n as f64)
            .fold((0.0f64, 0.0f64), |(sb, sd), y| {
                (sb.max(self.eval(y).abs()), sd.max(self.derivative(y).abs()))
            })
    }

    /// Check the declared bounds by sampling and quadrature.
    pub fn validate(&self) -> Result<()> {
        let (sb, sd) = self.sampled_sups();
        let tol = 1e-9 * (1.0 + self.lipschitz_bound);
        if sb > self.lipschitz_bound + tol {
            return Err(Error::BoundViolated(format!(
                "sup|b| = {sb} exceeds lipschitz_bound {}",
                self.lipschitz_bound
            )));
        }
        if sd > self.lipschitz_bound + tol {
            return Err(Error::BoundViolated(format!(
                "sup|b'| = {sd} exceeds lipschitz_bound {}",
                self.lipschitz_bound
            )));
        }
        let (lo, hi) = self.essential_support;
        if hi > lo {
            let l1 = integrate(|y| self.eval(y).abs(), lo, hi, 4000);
            if !l1.is_finite() {
                return Err(Error::Quadrature("∫|b| is not finite".into()));
            }
            if l1 > self.l1_norm_bound * (1.0 + 1e-8) + 1e-12 {
                return Err(Error::BoundViolated(format!(
                    "∫|b| = {l1} exceeds l1_norm_bound {}",
                    self.l1_norm_bound
                )));
            }
        }
        Ok(())
    }
}

fn check_m(m: f64) -> Result<()> {
    if !(m > 1.0) || !m.is_finite() {
        return Err(invalid("m", format!("nonlinearity exponent must exceed 1, got {m}")));
    }
    Ok(())
}

/// Tabulate `α(y) = α₀ exp(−((m−1)/2m) ∫₀^y b)` on `y_window`.
pub fn alpha_from_b(
    b: &ConvectionCoefficient,
    m: f64,
    alpha0: f64,
    y_window: (f64, f64),
    h: f64,
) -> Result<CubicSpline> {
    check_m(m)?;
    if !(alpha0 > 0.0) {
        return Err(invalid("alpha0", format!("must be positive, got {alpha0}")));
    }
    let (lo, hi) = y_window;
    if !(lo < 0.0 && hi > 0.0) {
        return Err(invalid("y_window", "must contain 0 in its interior"));
    }
    let (y0, step, count) = uniform_nodes(lo, hi, h)?;
    let nodes: Vec<f64> = (0..count).map(|i| y0 + step * i as f64).collect();
    let f = |y: f64| b.eval(y);
    let running = cumulative_integral(f, &nodes);
    let to_zero = integrate(f, lo, 0.0, ((-lo / step).ceil() as usize).max(1));
    let c = (m - 1.0) / (2.0 * m);
    let values: Vec<f64> = running
        .iter()
        .map(|r| alpha0 * (-c * (r - to_zero)).exp())
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::Quadrature(format!(
            "alpha is not finite and positive at y = {}",
            nodes[i]
        )));
    }
    CubicSpline::new(y0, step, values, Extrapolation::Constant)
}

fn rk4(alpha: &CubicSpline, y: f64, dx: f64) -> f64 {
    let k1 = alpha.eval(y);
    let k2 = alpha.eval(y + 0.5 * dx * k1);
    let k3 = alpha.eval(y + 0.5 * dx * k2);
    let k4 = alpha.eval(y + dx * k3);
    y + dx / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

// Advance T' = α(T) across one interval, halving the substep until the
// step-doubling estimate of the local error is below `tol`.
fn advance(alpha: &CubicSpline, y: f64, dx: f64, tol: f64) -> Result<f64> {
    let mut sub = 1usize;
    loop {
        let coarse = (0..sub).fold(y, |acc, _| rk4(alpha, acc, dx / sub as f64));
        let fine = (0..2 * sub).fold(y, |acc, _| rk4(alpha, acc, dx / (2 * sub) as f64));
        if (fine - coarse).abs() <= tol || sub >= 1 << 12 {
            if !alpha.contains(fine) {
                return Err(Error::YRangeExhausted { y: fine });
            }
            return Ok(fine);
        }
        sub *= 2;
    }
}

/// Solve `T'(x) = α(T(x))`, `T(0) = 0` on `x_window` with classical RK4.
pub fn solve_t(alpha: &CubicSpline, x_window: (f64, f64), h: f64, tol: f64) -> Result<CubicSpline> {
    let (lo, hi) = x_window;
    if !(lo < 0.0 && hi > 0.0) {
        return Err(invalid("x_window", "must contain 0 in its interior"));
    }
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let (x0, step, count) = uniform_nodes(lo, hi, h)?;
    let first_pos = (0..count)
        .find(|&i| x0 + step * i as f64 >= 0.0)
        .expect("window contains 0");
    let mut values = vec![0.0; count];
    let mut y = 0.0;
    let mut x = 0.0;
    for (i, v) in values.iter_mut().enumerate().skip(first_pos) {
        let xi = x0 + step * i as f64;
        y = advance(alpha, y, xi - x, tol)?;
        x = xi;
        *v = y;
    }
    let (mut y, mut x) = (0.0, 0.0);
    for i in (0..first_pos).rev() {
        let xi = x0 + step * i as f64;
        y = advance(alpha, y, xi - x, tol)?;
        x = xi;
        values[i] = y;
    }
    let slope_lo = alpha.eval(values[0]);
    let slope_hi = alpha.eval(values[count - 1]);
    CubicSpline::clamped(x0, step, values, slope_lo, slope_hi, Extrapolation::Linear)
}

/// `a(x) = (m/(m−1)) α(T(x))^{−(m+1)}` on the nodes of `t_map`.
pub fn a_from_alpha(alpha: &CubicSpline, t_map: &CubicSpline, m: f64) -> Result<CubicSpline> {
    check_m(m)?;
    let c = m / (m - 1.0);
    let values = t_map
        .nodes()
        .map(|x| c * alpha.eval(t_map.eval(x)).powf(-(m + 1.0)))
        .collect();
    CubicSpline::new(t_map.lo(), t_map.step(), values, Extrapolation::Constant)
}

/// Recover `T(x) = ∫₀^x [((m−1)/m) a(ξ)]^{−1/(m+1)} dξ` on the nodes of `a`.
pub fn t_from_a(a: &CubicSpline, m: f64) -> Result<CubicSpline> {
    check_m(m)?;
    let (lo, hi) = (a.lo(), a.hi());
    if !(lo < 0.0 && hi > 0.0) {
        return Err(invalid("a", "tabulation must contain 0 in its interior"));
    }
    let c = (m - 1.0) / m;
    let e = -1.0 / (m + 1.0);
    let f = |x: f64| (c * a.eval(x)).powf(e);
    let nodes: Vec<f64> = a.nodes().collect();
    let running = cumulative_integral(f, &nodes);
    let panels = ((-lo / a.step()).ceil() as usize).max(1);
    let to_zero = integrate(f, lo, 0.0, panels);
    let values: Vec<f64> = running.iter().map(|r| r - to_zero).collect();
    CubicSpline::clamped(lo, a.step(), values, f(lo), f(hi), Extrapolation::Linear)
}

/// `b∘T = (2m/(m²−1)) (log a)' / T'`, tabulated against `x` on the nodes
/// of `a`, with `T' = [((m−1)/m) a]^{−1/(m+1)}` recovered from `a` itself.
///
/// Differentiating `a = (m/(m−1)) α(T)^{−(m+1)}` gives
/// `(log a)' = ((m²−1)/2m) (b∘T) T'`; the factor `T'` is easy to drop.
pub fn b_from_a(a: &CubicSpline, m: f64) -> Result<CubicSpline> {
    check_m(m)?;
    let c = 2.0 * m / (m * m - 1.0);
    let values = a
        .nodes()
        .map(|x| {
            let (v, d1, _) = a.eval3(x);
            let t_prime = ((m - 1.0) / m * v).powf(-1.0 / (m + 1.0));
            c * d1 / (v * t_prime)
        })
        .collect();
    CubicSpline::new(a.lo(), a.step(), values, Extrapolation::Constant)
}

/// Everything the gradient-flow side needs from one choice of `(m, b, α₀)`.
#[derive(Debug, Clone)]
pub struct TransformedCoefficients {
    pub m: f64,
    pub alpha0: f64,
    pub alpha: CubicSpline,
    pub t_map: CubicSpline,
    pub a: CubicSpline,
    /// `min a` over the tabulation (the constant `ā`).
    pub a_lower: f64,
    pub a_upper: f64,
    /// `sup a''` over the tabulation.
    pub a_xx_sup: f64,
    /// `sup |a''|` over the tabulation.
    pub a_xx_abs_sup: f64,
}

impl TransformedCoefficients {
    /// Build α, T and a on `x_window` with tabulation step `h`.
    pub fn build(
        b: &ConvectionCoefficient,
        m: f64,
        alpha0: f64,
        x_window: (f64, f64),
        h: f64,
    ) -> Result<Self> {
        check_m(m)?;
        let c = (m - 1.0) / (2.0 * m);
        let alpha_max = alpha0 * (c * b.l1_norm_bound).exp();
        let reach = x_window.0.abs().max(x_window.1.abs()) * alpha_max * 1.05 + 10.0 * h;
        let alpha = alpha_from_b(b, m, alpha0, (-reach, reach), h)?;
        let t_map = solve_t(&alpha, x_window, h, 1e-13)?;
        let a = a_from_alpha(&alpha, &t_map, m)?;
        Self::from_parts(m, alpha0, alpha, t_map, a)
    }

    fn from_parts(
        m: f64,
        alpha0: f64,
        alpha: CubicSpline,
        t_map: CubicSpline,
        a: CubicSpline,
    ) -> Result<Self> {
        let (a_lower, a_upper) = a.node_range();
        if !(a_lower > 0.0) {
            return Err(Error::BoundViolated(format!("min a = {a_lower} is not positive")));
        }
        let mut a_xx_sup = f64::NEG_INFINITY;
        let mut a_xx_abs_sup = 0.0f64;
        for x in a.nodes() {
            let d2 = a.second_derivative(x);
            a_xx_sup = a_xx_sup.max(d2);
            a_xx_abs_sup = a_xx_abs_sup.max(d2.abs());
        }
        if !a_xx_abs_sup.is_finite() {
            return Err(Error::BoundViolated("a'' is unbounded on the tabulation".into()));
        }
        Ok(Self {
            m,
            alpha0,
            alpha,
            t_map,
            a,
            a_lower,
            a_upper,
            a_xx_sup,
            a_xx_abs_sup,
        })
    }

    pub fn x_window(&self) -> (f64, f64) {
        (self.t_map.lo(), self.t_map.hi())
    }

    /// Image of the x-window under T.
    pub fn y_window(&self) -> (f64, f64) {
        (self.t(self.t_map.lo()), self.t(self.t_map.hi()))
    }

    pub fn t(&self, x: f64) -> f64 {
        self.t_map.eval(x)
    }

    /// `T'(x) = α(T(x))`.
    pub fn t_prime(&self, x: f64) -> f64 {
        self.alpha.eval(self.t(x))
    }

    /// Inverse of the coordinate map.
    pub fn t_inverse(&self, y: f64) -> f64 {
        let tm = &self.t_map;
        let vals = tm.node_values();
        let n = vals.len();
        if y <= vals[0] {
            return tm.lo() + (y - vals[0]) / self.t_prime(tm.lo());
        }
        if y >= vals[n - 1] {
            return tm.hi() + (y - vals[n - 1]) / self.t_prime(tm.hi());
        }
        let k = vals.partition_point(|&v| v <= y) - 1;
        let (mut lo, mut hi) = (tm.lo() + tm.step() * k as f64, tm.lo() + tm.step() * (k + 1) as f64);
        let mut x = lo + (y - vals[k]) / (vals[k + 1] - vals[k]) * (hi - lo);
        for _ in 0..60 {
            let (v, d, _) = tm.eval3(x);
            let r = v - y;
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            if r.abs() <= 1e-15 * (1.0 + y.abs()) {
                break;
            }
            let next = x - r / d;
            x = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
            if hi - lo <= 1e-16 * (1.0 + x.abs()) {
                break;
            }
        }
        x
    }

    /// `ρ(x) = T'(x) u(T(x))` as exact cell averages on `x_grid`. Fails if
    /// mass of `u` lies outside the image of the x-window.
    pub fn rescale(&self, u: &GridDensity, x_grid: Grid) -> Result<GridDensity> {
        let cdf = u.cdf();
        push_through(x_grid, |x| cdf.eval(self.t(x)), "u escapes the T-window")
    }

    /// `u(y) = ρ(T⁻¹(y)) / T'(T⁻¹(y))` as exact cell averages on `y_grid`.
    pub fn inverse_rescale(&self, rho: &GridDensity, y_grid: Grid) -> Result<GridDensity> {
        let cdf = rho.cdf();
        push_through(y_grid, |y| cdf.eval(self.t_inverse(y)), "ρ escapes the y-grid")
    }

    /// Quantile form of [`rescale`](Self::rescale): `G_ρ = T⁻¹ ∘ G_u`.
    pub fn rescale_quantile(&self, q_u: &Quantile) -> Result<Quantile> {
        q_u.map_monotone(|y| self.t_inverse(y))
    }

    /// Quantile form of [`inverse_rescale`](Self::inverse_rescale): `G_u = T ∘ G_ρ`.
    pub fn inverse_rescale_quantile(&self, q_rho: &Quantile) -> Result<Quantile> {
        q_rho.map_monotone(|x| self.t(x))
    }

    /// `inf_z z a'(z)/a(z)` over the tabulation (zero is attained at `z = 0`).
    pub fn inf_z_log_derivative(&self) -> f64 {
        self.a
            .nodes()
            .map(|z| {
                let (v, d, _) = self.a.eval3(z);
                z * d / v
            })
            .fold(0.0, f64::min)
    }
}

fn push_through(grid: Grid, cdf: impl Fn(f64) -> f64, what: &str) -> Result<GridDensity> {
    let nodes: Vec<f64> = (0..=grid.cells).map(|i| cdf(grid.node(i))).collect();
    let outside = nodes[0] + (1.0 - nodes[grid.cells]);
    if outside > 1e-8 {
        return Err(Error::WindowOverflow(format!("{what}: mass {outside} outside")));
    }
    let values = (0..grid.cells)
        .map(|i| {
            let lo = if i == 0 { 0.0 } else { nodes[i] };
            let hi = if i + 1 == grid.cells { 1.0 } else { nodes[i + 1] };
            ((hi - lo) / grid.dx).max(0.0)
        })
        .collect();
    GridDensity::normalized(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn const_alpha(v: f64) -> CubicSpline {
        CubicSpline::from_fn(-10.0, 10.0, 0.01, Extrapolation::Constant, |_| v).unwrap()
    }

    #[test]
    fn alpha_examples() {
        let z = alpha_from_b(&ConvectionCoefficient::zero(), 2.0, 1.7, (-1.0, 1.0), 1e-3).unwrap();
        for y in z.nodes() { assert!((z.eval(y) - 1.7).abs() < 1e-12, "{y} {}", z.eval(y)); }
        let g = ConvectionCoefficient::gaussian(0.5, 1.0).unwrap();
        let a = alpha_from_b(&g, 3.0, 2.5, (-2.0, 2.0), 1e-3).unwrap();
        assert!((a.eval(0.0) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn alpha_of_smoothed_indicator_matches_quadrature_oracle() {
        let b = ConvectionCoefficient::smoothed_indicator(0.0, 1.0, 0.01).unwrap();
        let alpha = alpha_from_b(&b, 2.0, 1.0, (-1.0, 3.0), 1e-3).unwrap();
        // independent oracle: composite Simpson with 2e5 intervals
        let n = 200_000;
        let hh = 2.0 / n as f64;
        let mut s = b.eval(0.0) + b.eval(2.0);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * b.eval(hh * i as f64);
        }
        let integral = s * hh / 3.0;
        let expected = (-0.25 * integral).exp();
        assert!((alpha.eval(2.0) - expected).abs() < 1e-9);
        assert!((alpha.eval(2.0) - (-0.25f64).exp()).abs() < 2e-3);
    }

    #[test]
    fn solve_t_examples() {
        let t1 = solve_t(&const_alpha(1.0), (-2.0, 2.0), 1e-3, 1e-12).unwrap();
        let t2 = solve_t(&const_alpha(2.0), (-2.0, 2.0), 1e-3, 1e-12).unwrap();
        for x in [-1.5, 0.3, 1.9] {
            assert!((t1.eval(x) - x).abs() < 1e-12);
            assert!((t2.eval(x) - 2.0 * x).abs() < 1e-12);
        }
        let alpha = CubicSpline::from_fn(-0.5, 3.0, 1e-3, Extrapolation::Constant, |y| 1.0 / (1.0 + y)).unwrap();
        let t = solve_t(&alpha, (-0.1, 2.0), 1e-3, 1e-12).unwrap();
        assert!((t.eval(1.5) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn solve_t_reports_exhausted_range() {
        let alpha = CubicSpline::from_fn(-1.0, 1.0, 1e-2, Extrapolation::Constant, |_| 1.0).unwrap();
        assert!(matches!(
            solve_t(&alpha, (-0.5, 3.0), 1e-2, 1e-12),
            Err(Error::YRangeExhausted { .. })
        ));
    }

    #[test]
    fn a_from_alpha_examples() {
        let t = solve_t(&const_alpha(1.0), (-1.0, 1.0), 1e-2, 1e-12).unwrap();
        let a2 = a_from_alpha(&const_alpha(1.0), &t, 2.0).unwrap();
        let a3 = a_from_alpha(&const_alpha(1.0), &t, 3.0).unwrap();
        assert!((a2.eval(0.4) - 2.0).abs() < 1e-14);
        assert!((a3.eval(0.4) - 1.5).abs() < 1e-14);
        let t_two = solve_t(&const_alpha(2.0), (-1.0, 1.0), 1e-2, 1e-12).unwrap();
        let a = a_from_alpha(&const_alpha(2.0), &t_two, 2.0).unwrap();
        assert!((a.eval(0.1) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn t_from_a_examples() {
        let m = 2.0;
        let a1 = CubicSpline::from_fn(-1.0, 2.0, 1e-3, Extrapolation::Constant, |_| m / (m - 1.0)).unwrap();
        let t = t_from_a(&a1, m).unwrap();
        assert!((t.eval(1.3) - 1.3).abs() < 1e-12);
        let a_half =
            CubicSpline::from_fn(-1.0, 2.0, 1e-3, Extrapolation::Constant, |_| 2f64.powf(m + 1.0) * m / (m - 1.0)).unwrap();
        assert!((t_from_a(&a_half, m).unwrap().eval(1.3) - 0.65).abs() < 1e-12);
        let a_sq = CubicSpline::from_fn(-0.5, 2.0, 1e-3, Extrapolation::Constant, |x| 2.0 * (1.0 + x).powi(2)).unwrap();
        let t = t_from_a(&a_sq, m).unwrap();
        let exact = 3.0 * (2f64.cbrt() - 1.0);
        assert!((t.eval(1.0) - exact).abs() < 1e-9);
    }

    #[test]
    fn b_from_a_examples() {
        let a = CubicSpline::from_fn(-1.0, 1.0, 1e-2, Extrapolation::Constant, |_| 3.0).unwrap();
        let b = b_from_a(&a, 2.0).unwrap();
        assert!(b.nodes().all(|x| b.eval(x).abs() < 1e-12));
        // prefactor 2m/(m²−1) = 4/3 for m = 2: a = 2e^x has (log a)' = 1 and
        // T' = e^{−x/3}, so b∘T = (4/3) e^{x/3}
        let e = CubicSpline::from_fn(-1.0, 1.0, 1e-3, Extrapolation::Constant, |x| 2.0 * x.exp()).unwrap();
        let b = b_from_a(&e, 2.0).unwrap();
        assert!((b.eval(0.0) - 4.0 / 3.0).abs() < 1e-8);
        assert!((b.eval(0.6) - 4.0 / 3.0 * 0.2f64.exp()).abs() < 1e-8);
    }

    #[test]
    fn constant_convection_is_rejected() {
        assert!(matches!(ConvectionCoefficient::constant(0.3), Err(Error::ConstantConvection)));
        assert!(ConvectionCoefficient::constant(0.0).unwrap().is_zero());
    }

    #[test]
    fn declared_bounds_are_checked() {
        ConvectionCoefficient::gaussian(0.5, 1.0).unwrap().validate().unwrap();
        ConvectionCoefficient::smoothed_indicator(0.0, 1.0, 0.05).unwrap().validate().unwrap();
        let liar = ConvectionCoefficient::new("liar", |y: f64| (-y * y).exp(), |_| 0.0, 0.1, 2.0, (-5.0, 5.0));
        assert!(matches!(liar.validate(), Err(Error::BoundViolated(_))));
    }

    #[test]
    fn rescale_examples() {
        let zero = ConvectionCoefficient::zero();
        let tc = TransformedCoefficients::build(&zero, 2.0, 1.0, (-3.0, 3.0), 1e-3).unwrap();
        let grid = Grid::new(-2.0, 0.01, 400).unwrap();
        let u = GridDensity::from_fn(grid, |y| (-(y * y)).exp()).unwrap();
        let rho = tc.rescale(&u, grid).unwrap();
        assert!(rho.l1_distance(&u).unwrap() < 1e-12);

        // α ≡ 2 gives T(x) = 2x; uniform on [0,2] maps to uniform on [0,1].
        let tc2 = TransformedCoefficients::build(&zero, 2.0, 2.0, (-3.0, 3.0), 1e-3).unwrap();
        let ygrid = Grid::new(-1.0, 0.01, 400).unwrap();
        let u = GridDensity::from_fn(ygrid, |y| if (0.0..2.0).contains(&y) { 0.5 } else { 0.0 }).unwrap();
        let xgrid = Grid::new(-1.0, 0.01, 300).unwrap();
        let rho = tc2.rescale(&u, xgrid).unwrap();
        for (i, v) in rho.values().iter().enumerate() {
            let x = xgrid.center(i);
            let e = if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 };
            assert!((v - e).abs() < 1e-9, "x = {x}: {v}");
        }
        assert!((rho.mass() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn rescale_reports_escaping_support() {
        let tc = TransformedCoefficients::build(&ConvectionCoefficient::zero(), 2.0, 1.0, (-1.0, 1.0), 1e-3).unwrap();
        let grid = Grid::new(-3.0, 0.01, 600).unwrap();
        let u = GridDensity::from_fn(grid, |y| (-(y * y)).exp()).unwrap();
        let small = Grid::new(-1.0, 0.01, 200).unwrap();
        assert!(matches!(tc.rescale(&u, small), Err(Error::WindowOverflow(_))));
    }

    #[test]
    fn t_inverse_inverts() {
        let g = ConvectionCoefficient::gaussian(0.5, 1.0).unwrap();
        let tc = TransformedCoefficients::build(&g, 2.0, 1.0, (-3.0, 3.0), 1e-3).unwrap();
        for x in [-2.9, -0.5, 0.0, 0.77, 2.5, 3.5] {
            assert!((tc.t_inverse(tc.t(x)) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_b_survives_the_round_trip() {
        let g = ConvectionCoefficient::gaussian(0.5, 1.0).unwrap();
        let tc = TransformedCoefficients::build(&g, 2.0, 1.0, (-3.5, 3.5), 1e-3).unwrap();
        let back = b_from_a(&tc.a, 2.0).unwrap();
        let err = back.nodes().map(|x| (back.eval(x) - g.eval(tc.t(x))).abs()).fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
    }
}
