//! Small numerical building blocks shared by the modules: cubic splines on
//! uniform grids, monotone cubic interpolation, tridiagonal solves and
//! composite Gauss–Legendre quadrature.

use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

use crate::error::{invalid, Result};

/// Behaviour of a [`CubicSpline`] outside its tabulated interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extrapolation {
    /// Hold the end value; derivatives vanish.
    Constant,
    /// Continue with the end slope; second derivative vanishes.
    Linear,
}

/// Clamped cubic spline through values on a uniform grid.
///
/// Value, first and second derivative are those of the same piecewise cubic,
/// so gradients computed from it are exact derivatives of the interpolant.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x0: f64,
    h: f64,
    values: Vec<f64>,
    second: Vec<f64>,
    slope_lo: f64,
    slope_hi: f64,
    extrapolation: Extrapolation,
}

impl CubicSpline {
    /// Build a spline with end slopes estimated by fourth-order one-sided
    /// differences.
    pub fn new(x0: f64, h: f64, values: Vec<f64>, extrapolation: Extrapolation) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(invalid("values", "spline needs at least two nodes"));
        }
        let (s0, s1) = end_slopes(&values, h);
        Self::clamped(x0, h, values, s0, s1, extrapolation)
    }

    /// Build a spline with prescribed end slopes.
    pub fn clamped(
        x0: f64,
        h: f64,
        values: Vec<f64>,
        slope_lo: f64,
        slope_hi: f64,
        extrapolation: Extrapolation,
    ) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(invalid("h", format!("grid step must be positive, got {h}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(crate::Error::NonFinite { index: i });
        }
        let n = values.len();
        if n < 2 {
            return Err(invalid("values", "spline needs at least two nodes"));
        }
        let y = &values;
        let mut sub = vec![1.0; n];
        let mut diag = vec![4.0; n];
        let mut sup = vec![1.0; n];
        let mut rhs = vec![0.0; n];
        diag[0] = 2.0;
        diag[n - 1] = 2.0;
        sub[0] = 0.0;
        sup[n - 1] = 0.0;
        rhs[0] = 6.0 / h * ((y[1] - y[0]) / h - slope_lo);
        rhs[n - 1] = 6.0 / h * (slope_hi - (y[n - 1] - y[n - 2]) / h);
        for i in 1..n - 1 {
            rhs[i] = 6.0 / (h * h) * (y[i + 1] - 2.0 * y[i] + y[i - 1]);
        }
        let second = solve_tridiagonal(&sub, &diag, &sup, &rhs)
            .ok_or_else(|| invalid("values", "singular spline system"))?;
        Ok(Self {
            x0,
            h,
            values,
            second,
            slope_lo,
            slope_hi,
            extrapolation,
        })
    }

    /// Tabulate `f` on `[lo, hi]` with (approximately) step `h`.
    pub fn from_fn(
        lo: f64,
        hi: f64,
        h: f64,
        extrapolation: Extrapolation,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let (x0, step, n) = uniform_nodes(lo, hi, h)?;
        let values = (0..n).map(|i| f(x0 + step * i as f64)).collect();
        Self::new(x0, step, values, extrapolation)
    }

    pub fn constant(lo: f64, hi: f64, value: f64) -> Self {
        let h = (hi - lo).max(1e-12);
        Self {
            x0: lo,
            h,
            values: vec![value, value],
            second: vec![0.0, 0.0],
            slope_lo: 0.0,
            slope_hi: 0.0,
            extrapolation: Extrapolation::Constant,
        }
    }

    pub fn lo(&self) -> f64 {
        self.x0
    }

    pub fn hi(&self) -> f64 {
        self.x0 + self.h * (self.values.len() - 1) as f64
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| self.x0 + self.h * i as f64)
    }

    pub fn node_values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo() && x <= self.hi()
    }

    /// Value, first and second derivative at `x`.
    pub fn eval3(&self, x: f64) -> (f64, f64, f64) {
        let n = self.values.len();
        let (lo, hi) = (self.lo(), self.hi());
        if x < lo || x > hi {
            let (edge, v, s) = if x < lo {
                (lo, self.values[0], self.slope_lo)
            } else {
                (hi, self.values[n - 1], self.slope_hi)
            };
            return match self.extrapolation {
                Extrapolation::Constant => (v, 0.0, 0.0),
                Extrapolation::Linear => (v + s * (x - edge), s, 0.0),
            };
        }
        let h = self.h;
        let i = (((x - self.x0) / h).floor() as usize).min(n - 2);
        let xl = self.x0 + h * i as f64;
        let a = (xl + h - x) / h;
        let b = (x - xl) / h;
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d1 = (y1 - y0) / h + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        let d2 = a * m0 + b * m1;
        (v, d1, d2)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval3(x).0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.eval3(x).1
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        self.eval3(x).2
    }

    /// Smallest and largest node value.
    pub fn node_range(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

fn end_slopes(y: &[f64], h: f64) -> (f64, f64) {
    let n = y.len();
    if n >= 5 {
        let lo = (-25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2] + 16.0 * y[3] - 3.0 * y[4]) / (12.0 * h);
        let k = n - 1;
        let hi = (25.0 * y[k] - 48.0 * y[k - 1] + 36.0 * y[k - 2] - 16.0 * y[k - 3]
            + 3.0 * y[k - 4])
            / (12.0 * h);
        (lo, hi)
    } else {
        let s = (y[n - 1] - y[0]) / (h * (n - 1) as f64);
        (s, s)
    }
}

/// Uniform nodes covering `[lo, hi]` with step at most `h`: `(x0, step, count)`.
pub fn uniform_nodes(lo: f64, hi: f64, h: f64) -> Result<(f64, f64, usize)> {
    if !(hi > lo) {
        return Err(invalid("window", format!("empty interval [{lo}, {hi}]")));
    }
    if !(h > 0.0) {
        return Err(invalid("h", format!("step must be positive, got {h}")));
    }
    let cells = ((hi - lo) / h).ceil().max(1.0) as usize;
    let step = (hi - lo) / cells as f64;
    Ok((lo, step, cells + 1))
}

/// Thomas algorithm. `sub[0]` and `sup[n-1]` are ignored.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return None;
    }
    c[0] = sup[0] / beta;
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - sub[i] * c[i - 1];
        if beta == 0.0 || !beta.is_finite() {
            return None;
        }
        c[i] = if i + 1 < n { sup[i] / beta } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / beta;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Some(x)
}

/// Solve a symmetric tridiagonal system by LDLᵀ. Returns `None` unless every
/// pivot is strictly positive, i.e. the matrix is positive definite.
pub fn solve_spd_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    debug_assert_eq!(off.len() + 1, n);
    let mut d = vec![0.0; n];
    let mut l = vec![0.0; n.saturating_sub(1)];
    d[0] = diag[0];
    if !(d[0] > 0.0) {
        return None;
    }
    for i in 1..n {
        l[i - 1] = off[i - 1] / d[i - 1];
        d[i] = diag[i] - l[i - 1] * off[i - 1];
        if !(d[i] > 0.0) || !d[i].is_finite() {
            return None;
        }
    }
    let mut z = rhs.to_vec();
    for i in 1..n {
        z[i] -= l[i - 1] * z[i - 1];
    }
    for i in 0..n {
        z[i] /= d[i];
    }
    for i in (0..n - 1).rev() {
        z[i] -= l[i] * z[i + 1];
    }
    Some(z)
}

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(10).expect("degree 10 rule"))
}

/// Composite 10-point Gauss–Legendre quadrature on `panels` equal panels.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    if a == b {
        return 0.0;
    }
    let panels = panels.max(1);
    let w = (b - a) / panels as f64;
    let r = rule();
    (0..panels)
        .map(|p| {
            let lo = a + w * p as f64;
            r.integrate(lo, lo + w, &f)
        })
        .sum()
}

/// Running integral of `f` from `nodes[0]` evaluated at each node (one panel
/// per node interval).
pub fn cumulative_integral(f: impl Fn(f64) -> f64, nodes: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(nodes.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in nodes.windows(2) {
        acc += rule().integrate(w[0], w[1], &f);
        out.push(acc);
    }
    out
}

/// Monotone piecewise cubic Hermite interpolant (Fritsch–Carlson slopes)
/// through strictly increasing knots.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(invalid("knots", "need at least two matching knots"));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("knots", "abscissae must be strictly increasing"));
        }
        let secant: Vec<f64> = (0..n - 1)
            .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
            .collect();
        let mut ds = vec![0.0; n];
        for i in 1..n - 1 {
            let (s0, s1) = (secant[i - 1], secant[i]);
            if s0 * s1 <= 0.0 {
                ds[i] = 0.0;
            } else {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                let w0 = 2.0 * h1 + h0;
                let w1 = h1 + 2.0 * h0;
                ds[i] = (w0 + w1) / (w0 / s0 + w1 / s1);
            }
        }
        ds[0] = end_slope(xs[1] - xs[0], xs.get(2).map(|x| x - xs[1]), secant[0], secant.get(1).copied());
        ds[n - 1] = end_slope(
            xs[n - 1] - xs[n - 2],
            if n > 2 { Some(xs[n - 2] - xs[n - 3]) } else { None },
            secant[n - 2],
            if n > 2 { Some(secant[n - 3]) } else { None },
        );
        Ok(Self { xs, ys, ds })
    }

    /// As [`new`](Self::new) but with the end derivatives prescribed; each
    /// must lie in `[0, 3·secant]` of its end interval to keep monotonicity.
    pub fn with_end_slopes(xs: Vec<f64>, ys: Vec<f64>, first: f64, last: f64) -> Result<Self> {
        let mut c = Self::new(xs, ys)?;
        let n = c.xs.len();
        let s0 = (c.ys[1] - c.ys[0]) / (c.xs[1] - c.xs[0]);
        let s1 = (c.ys[n - 1] - c.ys[n - 2]) / (c.xs[n - 1] - c.xs[n - 2]);
        if !(first >= 0.0 && first <= 3.0 * s0 && last >= 0.0 && last <= 3.0 * s1) {
            return Err(invalid("end slopes", "outside the monotone range [0, 3·secant]"));
        }
        c.ds[0] = first;
        c.ds[n - 1] = last;
        Ok(c)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.xs.partition_point(|&k| k <= x) - 1;
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.ds[i] + h01 * self.ys[i + 1] + h11 * h * self.ds[i + 1]
    }
}

// Three-point end slope, limited to preserve monotonicity.
fn end_slope(h0: f64, h1: Option<f64>, s0: f64, s1: Option<f64>) -> f64 {
    let (Some(h1), Some(s1)) = (h1, s1) else {
        return s0;
    };
    let d = ((2.0 * h0 + h1) * s0 - h0 * s1) / (h0 + h1);
    if d.signum() != s0.signum() {
        0.0
    } else if s0.signum() != s1.signum() && d.abs() > 3.0 * s0.abs() {
        3.0 * s0
    } else {
        d
    }
}
