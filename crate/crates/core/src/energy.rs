//! The driving functional `F[ρ] = (1/m) ∫ a ρ^m`, the auxiliary functionals
//! used by the a-priori estimates, and the adjoint integrand
//! `H(x, ξ) = ξ F(x, 1/ξ)` whose joint convexity decides whether a κ-flow
//! exists.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::entropycheck::Mollifier;
use crate::error::{invalid, Error, Result};
use crate::measure1d::{GridDensity, Quantile};
use crate::numerics::{integrate, CubicSpline, Extrapolation};
use crate::transform::TransformedCoefficients;

/// `x^e`, using `powi` when the exponent is an integer.
#[inline]
pub(crate) fn pow(x: f64, e: f64) -> f64 {
    if e == e.trunc() && e.abs() < 64.0 {
        x.powi(e as i32)
    } else {
        x.powf(e)
    }
}

/// `F[ρ] = (1/m) ∫ a(x) ρ(x)^m dx` with a tabulated weight `a`.
#[derive(Debug, Clone)]
pub struct EnergyFunctional {
    pub m: f64,
    a: CubicSpline,
    /// `ā = min a` over the tabulation.
    pub a_lower: f64,
    /// `sup a''` over the tabulation.
    pub a_second_derivative_sup: f64,
}

/// `H` and its partial derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HPartials {
    pub h: f64,
    pub h_x: f64,
    pub h_xi: f64,
    pub h_xx: f64,
    pub h_xxi: f64,
    pub h_xixi: f64,
}

impl EnergyFunctional {
    pub fn new(m: f64, a: CubicSpline) -> Result<Self> {
        if !(m > 1.0) || !m.is_finite() {
            return Err(invalid("m", format!("nonlinearity exponent must exceed 1, got {m}")));
        }
        let (a_lower, _) = a.node_range();
        if !(a_lower > 0.0) {
            return Err(Error::BoundViolated(format!("min a = {a_lower} is not positive")));
        }
        let a_second_derivative_sup = a
            .nodes()
            .map(|x| a.second_derivative(x))
            .fold(f64::NEG_INFINITY, f64::max);
        if !a_second_derivative_sup.is_finite() {
            return Err(Error::BoundViolated("a'' is not finite".into()));
        }
        Ok(Self {
            m,
            a,
            a_lower,
            a_second_derivative_sup,
        })
    }

    /// `a ≡ value` on the whole line.
    pub fn constant(m: f64, value: f64) -> Result<Self> {
        Self::new(m, CubicSpline::constant(-1e9, 1e9, value))
    }

    /// The porous-medium weight `a ≡ m/(m−1)`.
    pub fn porous_medium(m: f64) -> Result<Self> {
        if !(m > 1.0) {
            return Err(invalid("m", format!("nonlinearity exponent must exceed 1, got {m}")));
        }
        Self::constant(m, m / (m - 1.0))
    }

    pub fn from_fn(m: f64, lo: f64, hi: f64, h: f64, a: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(m, CubicSpline::from_fn(lo, hi, h, Extrapolation::Constant, a)?)
    }

    pub fn from_transform(tc: &TransformedCoefficients) -> Result<Self> {
        Self::new(tc.m, tc.a.clone())
    }

    pub fn weight(&self) -> &CubicSpline {
        &self.a
    }

    pub fn a(&self, x: f64) -> f64 {
        self.a.eval(x)
    }

    /// `(a, a', a'')` at `x`.
    pub fn a3(&self, x: f64) -> (f64, f64, f64) {
        self.a.eval3(x)
    }

    /// Interval on which `a` is tabulated.
    pub fn domain(&self) -> (f64, f64) {
        (self.a.lo(), self.a.hi())
    }

    /// `H(x, ξ) = a(x) ξ^{1−m} / m`.
    pub fn h(&self, x: f64, xi: f64) -> Result<f64> {
        if !(xi > 0.0) {
            return Err(Error::NonPositiveSlope(xi));
        }
        Ok(self.a(x) * pow(xi, 1.0 - self.m) / self.m)
    }

    pub fn adjoint_partials(&self, x: f64, xi: f64) -> Result<HPartials> {
        if !(xi > 0.0) {
            return Err(Error::NonPositiveSlope(xi));
        }
        Ok(self.partials_unchecked(x, xi))
    }

    #[inline]
    pub(crate) fn partials_unchecked(&self, x: f64, xi: f64) -> HPartials {
        let m = self.m;
        let (a, a1, a2) = self.a3(x);
        let p = pow(xi, -m); // ξ^{−m}
        let q = p * xi; // ξ^{1−m}
        HPartials {
            h: a * q / m,
            h_x: a1 * q / m,
            h_xi: a * (1.0 - m) * p / m,
            h_xx: a2 * q / m,
            h_xxi: a1 * (1.0 - m) * p / m,
            h_xixi: a * (m - 1.0) * p / xi,
        }
    }

    /// `F(x, η) = a(x) η^m / m` and its partials, packed like [`HPartials`]
    /// with `ξ` replaced by `η`.
    pub fn integrand_partials(&self, x: f64, eta: f64) -> HPartials {
        let m = self.m;
        let (a, a1, a2) = self.a3(x);
        let e = pow(eta, m - 1.0);
        HPartials {
            h: a * e * eta / m,
            h_x: a1 * e * eta / m,
            h_xi: a * e,
            h_xx: a2 * e * eta / m,
            h_xxi: a1 * e,
            h_xixi: a * (m - 1.0) * e / eta,
        }
    }

    /// `inf z a'(z)/a(z)` over the tabulation; never positive since the
    /// expression vanishes at `z = 0`.
    pub fn inf_z_log_derivative(&self) -> f64 {
        self.a
            .nodes()
            .map(|z| {
                let (a, a1, _) = self.a3(z);
                z * a1 / a
            })
            .fold(0.0, f64::min)
    }

    /// Schur-complement bracket `a''/m − (m−1) a'²/(m² a)`: the Hessian of
    /// `H − κx²/2` has Schur complement `ξ^{1−m}·bracket − κ`.
    pub fn convexity_bracket(&self, x: f64) -> f64 {
        let m = self.m;
        let (a, a1, a2) = self.a3(x);
        a2 / m - (m - 1.0) * a1 * a1 / (m * m * a)
    }
}

/// Midpoint rule for `(1/m) ∫ a ρ^m`.
pub fn potential(rho: &GridDensity, ef: &EnergyFunctional) -> f64 {
    let g = rho.grid();
    rho.values()
        .iter()
        .enumerate()
        .map(|(i, &r)| ef.a(g.center(i)) * pow(r, ef.m))
        .sum::<f64>()
        * g.dx
        / ef.m
}

/// `∫ ρ log ρ`, with `0 log 0 = 0`.
pub fn entropy(rho: &GridDensity) -> f64 {
    rho.values()
        .iter()
        .filter(|&&r| r > 0.0)
        .map(|&r| r * r.ln())
        .sum::<f64>()
        * rho.dx()
}

/// Midpoint rule for `∫ x² ρ`.
pub fn second_moment(rho: &GridDensity) -> f64 {
    let g = rho.grid();
    rho.values()
        .iter()
        .enumerate()
        .map(|(i, &r)| g.center(i).powi(2) * r)
        .sum::<f64>()
        * g.dx
}

// Quantile forms. A quantile vector of length n carries mass 1/n between
// consecutive entries, so the cell density is ρ̂_j = 1/(n ΔG_j) at the
// midpoint Ĝ_j.

fn cells(q: &Quantile) -> impl Iterator<Item = (f64, f64)> + '_ {
    let n = q.n() as f64;
    q.values()
        .windows(2)
        .map(move |w| (0.5 * (w[0] + w[1]), 1.0 / (n * (w[1] - w[0]))))
}

/// Discrete `F = (1/n) Σ H(Ĝ_j, n ΔG_j)`; `+∞` if an increment is not positive.
pub fn potential_quantile(q: &Quantile, ef: &EnergyFunctional) -> f64 {
    let n = q.n() as f64;
    let mut s = 0.0;
    for w in q.values().windows(2) {
        let xi = n * (w[1] - w[0]);
        if !(xi > 0.0) {
            return f64::INFINITY;
        }
        s += ef.a(0.5 * (w[0] + w[1])) * pow(xi, 1.0 - ef.m);
    }
    s / (ef.m * n)
}

/// Discrete `∫ ρ log ρ = (1/n) Σ log ρ̂_j`.
pub fn entropy_quantile(q: &Quantile) -> f64 {
    let n = q.n() as f64;
    cells(q).map(|(_, r)| r.ln()).sum::<f64>() / n
}

/// Discrete `∫ x² ρ = (1/n) Σ G_i²`.
pub fn second_moment_quantile(q: &Quantile) -> f64 {
    q.values().iter().map(|g| g * g).sum::<f64>() / q.n() as f64
}

/// Discrete `‖ρ‖_m^m = (1/n) Σ ρ̂_j^{m−1}`.
pub fn norm_m_quantile(q: &Quantile, m: f64) -> f64 {
    let n = q.n() as f64;
    cells(q).map(|(_, r)| pow(r, m - 1.0)).sum::<f64>() / n
}

/// Discrete `‖∂x(ρ^{m/2})‖²` from differences of `ρ̂^{m/2}` across
/// neighbouring quantile cells.
pub fn h1_seminorm_sq_quantile(q: &Quantile, m: f64) -> f64 {
    let c: Vec<(f64, f64)> = cells(q).collect();
    c.windows(2)
        .map(|w| {
            let d = pow(w[1].1, 0.5 * m) - pow(w[0].1, 0.5 * m);
            d * d / (w[1].0 - w[0].0)
        })
        .sum()
}

/// An integrand `H(x, ξ)` whose joint convexity can be certified.
pub trait AdjointIntegrand {
    fn h(&self, x: f64, xi: f64) -> f64;

    /// `(H_xx, H_xξ, H_ξξ)`; central differences unless overridden.
    fn hessian(&self, x: f64, xi: f64) -> [f64; 3] {
        let hx = 1e-3 * (1.0 + x.abs());
        let hk = 1e-3 * xi;
        let f = |dx: f64, dk: f64| self.h(x + dx, xi + dk);
        let c = f(0.0, 0.0);
        let hxx = (f(hx, 0.0) - 2.0 * c + f(-hx, 0.0)) / (hx * hx);
        let hkk = (f(0.0, hk) - 2.0 * c + f(0.0, -hk)) / (hk * hk);
        let hxk = (f(hx, hk) - f(hx, -hk) - f(-hx, hk) + f(-hx, -hk)) / (4.0 * hx * hk);
        [hxx, hxk, hkk]
    }
}

impl AdjointIntegrand for EnergyFunctional {
    fn h(&self, x: f64, xi: f64) -> f64 {
        self.partials_unchecked(x, xi).h
    }

    fn hessian(&self, x: f64, xi: f64) -> [f64; 3] {
        let p = self.partials_unchecked(x, xi);
        [p.h_xx, p.h_xxi, p.h_xixi]
    }
}

/// `H` for the regularized entropy functional
/// `Ψ_{ε,ν}(η) = ∫ S_ε(η/T') φ(T) T' dx + ν ∫ η log η`, where
/// `S_ε(s) = ∫₀^s sgn_ε(r^m − k^m) dr`.
pub struct PsiIntegrand<'a> {
    tc: &'a TransformedCoefficients,
    phi: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    mollifier: Mollifier,
    k: f64,
    nu: f64,
    r_lo: f64,
    r_hi: f64,
    plateau: f64,
}

impl<'a> PsiIntegrand<'a> {
    pub fn new(
        tc: &'a TransformedCoefficients,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        k: f64,
        eps: f64,
        nu: f64,
    ) -> Result<Self> {
        let m = tc.m;
        let km = pow(k, m);
        if !(eps > 0.0 && eps < km) {
            return Err(invalid("eps", "need 0 < eps < k^m"));
        }
        if !(nu > 0.0) {
            return Err(invalid("nu", "must be positive"));
        }
        let mollifier = Mollifier::new(eps)?;
        let r_lo = (km - eps).powf(1.0 / m);
        let r_hi = (km + eps).powf(1.0 / m);
        let mut this = Self {
            tc,
            phi: Arc::new(phi),
            mollifier,
            k,
            nu,
            r_lo,
            r_hi,
            plateau: 0.0,
        };
        this.plateau = this.transition(r_hi);
        Ok(this)
    }

    fn transition(&self, s: f64) -> f64 {
        let km = pow(self.k, self.tc.m);
        integrate(|r| self.mollifier.sgn(pow(r, self.tc.m) - km), self.r_lo, s, 16)
    }

    /// `S_ε(s)` for `s ≥ 0`.
    pub fn s_eps(&self, s: f64) -> f64 {
        if s <= self.r_lo {
            -s
        } else if s < self.r_hi {
            -self.r_lo + self.transition(s)
        } else {
            -self.r_lo + self.plateau + (s - self.r_hi)
        }
    }
}

impl AdjointIntegrand for PsiIntegrand<'_> {
    fn h(&self, x: f64, xi: f64) -> f64 {
        let t = self.tc.t(x);
        let tp = self.tc.t_prime(x);
        xi * self.s_eps(1.0 / (xi * tp)) * (self.phi)(t) * tp - self.nu * xi.ln()
    }
}

/// Sampling grid for the convexity scan; `ξ` is spaced logarithmically.
#[derive(Debug, Clone, Copy)]
pub struct ConvexityGrid {
    pub x_range: (f64, f64),
    pub xi_range: (f64, f64),
    pub nx: usize,
    pub nxi: usize,
}

impl ConvexityGrid {
    pub fn new(x_range: (f64, f64), xi_range: (f64, f64)) -> Self {
        Self {
            x_range,
            xi_range,
            nx: 101,
            nxi: 61,
        }
    }

    fn points(&self) -> Result<Vec<(f64, f64)>> {
        let (x0, x1) = self.x_range;
        let (k0, k1) = self.xi_range;
        if !(x1 > x0) || self.nx < 2 || self.nxi < 2 {
            return Err(invalid("grid", "need a nondegenerate x-range and at least 2 points per axis"));
        }
        if !(k0 > 0.0 && k1 > k0) {
            return Err(invalid("xi_range", "must satisfy 0 < xi_min < xi_max"));
        }
        let mut pts = Vec::with_capacity(self.nx * self.nxi);
        for i in 0..self.nx {
            let x = x0 + (x1 - x0) * i as f64 / (self.nx - 1) as f64;
            for j in 0..self.nxi {
                let xi = k0 * (k1 / k0).powf(j as f64 / (self.nxi - 1) as f64);
                pts.push((x, xi));
            }
        }
        Ok(pts)
    }
}

/// Outcome of the joint-convexity check.
#[derive(Debug, Clone)]
pub struct ConvexityCertificate {
    /// Largest κ for which `D²H − diag(κ, 0)` is positive semi-definite on
    /// the sampled region, or `None`.
    pub kappa: Option<f64>,
    /// `(x, ξ, smallest eigenvalue)` with κ (or 0 when `kappa` is `None`)
    /// subtracted from `H_xx`.
    pub min_eigenvalue_map: Vec<(f64, f64, f64)>,
    pub witness: Option<(f64, f64)>,
    pub verdict: String,
}

fn min_eigenvalue(a: f64, b: f64, c: f64) -> f64 {
    let mean = 0.5 * (a + c);
    let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    mean - r
}

fn scan(integrand: &(impl AdjointIntegrand + ?Sized), grid: &ConvexityGrid) -> Result<Vec<(f64, f64, [f64; 3])>> {
    grid.points()?
        .into_iter()
        .map(|(x, xi)| {
            let hess = integrand.hessian(x, xi);
            if hess.iter().any(|v| !v.is_finite()) {
                return Err(Error::Quadrature(format!("non-finite Hessian at ({x}, {xi})")));
            }
            Ok((x, xi, hess))
        })
        .collect()
}

fn eigen_map(samples: &[(f64, f64, [f64; 3])], kappa: f64) -> Vec<(f64, f64, f64)> {
    samples
        .iter()
        .map(|&(x, xi, [hxx, hxk, hkk])| (x, xi, min_eigenvalue(hxx - kappa, hxk, hkk)))
        .collect()
}

/// Grid-only certificate for an arbitrary integrand: the largest κ making
/// every sampled matrix positive semi-definite, or `None` if some `H_ξξ ≤ 0`.
pub fn certify_integrand(integrand: &(impl AdjointIntegrand + ?Sized), grid: &ConvexityGrid) -> Result<ConvexityCertificate> {
    let samples = scan(integrand, grid)?;
    let mut kappa = f64::INFINITY;
    let mut witness = None;
    for &(x, xi, [hxx, hxk, hkk]) in &samples {
        if !(hkk > 0.0) {
            witness = Some((x, xi));
            break;
        }
        kappa = kappa.min(hxx - hxk * hxk / hkk);
    }
    if let Some(w) = witness {
        return Ok(ConvexityCertificate {
            kappa: None,
            min_eigenvalue_map: eigen_map(&samples, 0.0),
            witness: Some(w),
            verdict: format!(
                "NONE: H_xixi <= 0 at (x, xi) = ({}, {}); the sufficient joint-convexity condition fails on the sampled region",
                w.0, w.1
            ),
        });
    }
    Ok(ConvexityCertificate {
        kappa: Some(kappa),
        min_eigenvalue_map: eigen_map(&samples, kappa),
        witness: None,
        verdict: format!("kappa = {kappa:.12e} on the sampled region (sufficient condition for a kappa-flow holds there)"),
    })
}

/// Certificate for `F`'s own adjoint function. The Schur complement is
/// `ξ^{1−m}·bracket(x)`, so if the bracket is negative anywhere no κ works
/// as `ξ → 0`; otherwise κ = 0 is optimal as `ξ → ∞`.
pub fn check_kappa_convexity(ef: &EnergyFunctional, grid: &ConvexityGrid) -> Result<ConvexityCertificate> {
    let samples = scan(ef, grid)?;
    let (x0, x1) = grid.x_range;
    let mut xs: Vec<f64> = ef.weight().nodes().filter(|x| (x0..=x1).contains(x)).collect();
    xs.extend((0..grid.nx).map(|i| x0 + (x1 - x0) * i as f64 / (grid.nx - 1) as f64));
    let (x_bar, worst) = xs
        .iter()
        .map(|&x| (x, ef.convexity_bracket(x)))
        .fold((x0, f64::INFINITY), |acc, p| if p.1 < acc.1 { p } else { acc });
    let (lo, hi) = ef.weight().node_range();
    let tol = 1e-10 * (1.0 + hi.abs().max(lo.abs()));
    if worst < -tol {
        let xi_bar = grid.xi_range.0;
        let (_, _, a2) = ef.a3(x_bar);
        return Ok(ConvexityCertificate {
            kappa: None,
            min_eigenvalue_map: eigen_map(&samples, 0.0),
            witness: Some((x_bar, xi_bar)),
            verdict: format!(
                "NONE: at x = {x_bar} (a'' = {a2:.6e}) the Schur complement {worst:.6e}*xi^(1-m) is unbounded below as xi -> 0 \
                 (witness xi = {xi_bar}); the sufficient joint-convexity condition fails, which does not by itself disprove lambda-convexity"
            ),
        });
    }
    Ok(ConvexityCertificate {
        kappa: Some(0.0),
        min_eigenvalue_map: eigen_map(&samples, 0.0),
        witness: None,
        verdict: "kappa = 0: the Schur complement is nonnegative and tends to 0 as xi -> infinity".into(),
    })
}

impl ConvexityCertificate {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,xi,min_eigenvalue\n");
        for (x, xi, e) in &self.min_eigenvalue_map {
            let _ = writeln!(s, "{x:.16e},{xi:.16e},{e:.16e}");
        }
        s
    }

    /// Writes `convexity.csv` and `verdict.txt` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("convexity.csv"), self.to_csv())?;
        let mut f = std::fs::File::create(dir.join("verdict.txt"))?;
        writeln!(f, "{}", self.verdict)?;
        Ok(())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue_map.iter().map(|p| p.2).fold(f64::INFINITY, f64::min)
    }
}
