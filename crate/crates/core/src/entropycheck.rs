//! Numerical check of the Kruzkov-type entropy inequality with dissipation
//! term, sampled over entropy levels `k` and tensor-product test functions
//! `θ(t) φ(y)`.
//!
//! For data `u` with `w = u^m`, the residual of one pair `(k, θφ)` is
//!
//! ```text
//! lhs − rhs_flux − D,   lhs      = ∬ |u−k| φ θ'
//!                       rhs_flux = ∬ sgn(u−k) ([w_y + b(w−k^m)] φ_y − b_y k^m φ) θ
//!                       D        = ∬ sgn_ε'(w−k^m) w_y² φ θ
//! ```
//!
//! and should be nonnegative up to discretization error. The `w_y φ_y` part
//! of the flux is integrated by parts (`sgn(w−k^m) w_y = |w−k^m|_y`) so no
//! derivative of the data is needed there, and `D` is integrated exactly for
//! the piecewise-linear interpolant of `w`.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::energy::pow;
use crate::error::{invalid, Error, Result};
use crate::measure1d::{Grid, GridDensity};
use crate::numerics::{cumulative_integral, integrate, CubicSpline, Extrapolation};
use crate::transform::ConvectionCoefficient;

fn bump_exponent(y: f64) -> f64 {
    if y.abs() < 1.0 {
        (-1.0 / (1.0 - y * y)).exp()
    } else {
        0.0
    }
}

struct UnitTables {
    z: f64,
    cdf: CubicSpline,
    first_moment: CubicSpline,
}

fn unit_tables() -> &'static UnitTables {
    static TABLES: OnceLock<UnitTables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let z = integrate(bump_exponent, -1.0, 1.0, 2000);
        let h = 1.0 / 1024.0;
        let nodes: Vec<f64> = (0..=2048).map(|i| -1.0 + h * i as f64).collect();
        let mut cdf = cumulative_integral(|y| bump_exponent(y) / z, &nodes);
        let total = cdf[cdf.len() - 1];
        cdf.iter_mut().for_each(|v| *v /= total);
        let mut m1 = cumulative_integral(|y| y * bump_exponent(y) / z, &nodes);
        let n = m1.len();
        m1[n - 1] = 0.0;
        UnitTables {
            z,
            cdf: CubicSpline::new(-1.0, h, cdf, Extrapolation::Constant).expect("valid table"),
            first_moment: CubicSpline::new(-1.0, h, m1, Extrapolation::Constant).expect("valid table"),
        }
    })
}

/// The standard mollifier `δ_ε(y) = ε⁻¹ δ₁(y/ε)`,
/// `δ₁(y) = Z⁻¹ exp(−1/(1−y²))` on `(−1, 1)`, and the mollified sign,
/// step, absolute value and positive part.
#[derive(Debug, Clone, Copy)]
pub struct Mollifier {
    eps: f64,
}

impl Mollifier {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(invalid("eps", format!("must be positive, got {eps}")));
        }
        Ok(Self { eps })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `Z = ∫_{−1}^{1} exp(−1/(1−y²)) dy`.
    pub fn normalization() -> f64 {
        unit_tables().z
    }

    pub fn unit(y: f64) -> f64 {
        bump_exponent(y) / unit_tables().z
    }

    fn cdf_unit(w: f64) -> f64 {
        if w <= -1.0 {
            0.0
        } else if w >= 1.0 {
            1.0
        } else {
            unit_tables().cdf.eval(w)
        }
    }

    fn moment_unit(w: f64) -> f64 {
        if w.abs() >= 1.0 {
            0.0
        } else {
            unit_tables().first_moment.eval(w)
        }
    }

    pub fn delta(&self, z: f64) -> f64 {
        Self::unit(z / self.eps) / self.eps
    }

    /// `stp_ε = H * δ_ε`, with `stp_ε' = δ_ε`.
    pub fn stp(&self, z: f64) -> f64 {
        Self::cdf_unit(z / self.eps)
    }

    /// `sgn_ε = sgn * δ_ε`, with `sgn_ε' = 2δ_ε`.
    pub fn sgn(&self, z: f64) -> f64 {
        2.0 * self.stp(z) - 1.0
    }

    pub fn sgn_derivative(&self, z: f64) -> f64 {
        2.0 * self.delta(z)
    }

    /// `abs_ε = |·| * δ_ε`.
    pub fn abs(&self, z: f64) -> f64 {
        let w = z / self.eps;
        if w.abs() >= 1.0 {
            return z.abs();
        }
        self.eps * (w * (2.0 * Self::cdf_unit(w) - 1.0) - 2.0 * Self::moment_unit(w))
    }

    /// `heav_ε = (·)₊ * δ_ε`.
    pub fn heav(&self, z: f64) -> f64 {
        0.5 * (z + self.abs(z))
    }
}

/// `θ(t) φ(y)` with `θ`, `φ` scaled copies of `exp(−1/(1−s²))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFunction {
    pub id: usize,
    pub t_center: f64,
    pub t_radius: f64,
    pub y_center: f64,
    pub y_radius: f64,
}

// ψ(s) = exp(g(s)), g = −1/(1−s²)
fn psi3(s: f64) -> (f64, f64, f64) {
    if s.abs() >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let q = 1.0 - s * s;
    let p = (-1.0 / q).exp();
    let g1 = -2.0 * s / (q * q);
    let g2 = -2.0 / (q * q) - 8.0 * s * s / (q * q * q);
    (p, p * g1, p * (g1 * g1 + g2))
}

impl TestFunction {
    pub fn new(id: usize, t_center: f64, t_radius: f64, y_center: f64, y_radius: f64) -> Result<Self> {
        if !(t_radius > 0.0 && y_radius > 0.0) {
            return Err(invalid("test_function", "radii must be positive"));
        }
        if !(t_center - t_radius > 0.0) {
            return Err(invalid("test_function", "time support must lie in t > 0"));
        }
        Ok(Self {
            id,
            t_center,
            t_radius,
            y_center,
            y_radius,
        })
    }

    pub fn theta(&self, t: f64) -> f64 {
        psi3((t - self.t_center) / self.t_radius).0
    }

    pub fn theta_prime(&self, t: f64) -> f64 {
        psi3((t - self.t_center) / self.t_radius).1 / self.t_radius
    }

    /// `(φ, φ', φ'')` at `y`.
    pub fn phi3(&self, y: f64) -> (f64, f64, f64) {
        let (p, d1, d2) = psi3((y - self.y_center) / self.y_radius);
        (p, d1 / self.y_radius, d2 / (self.y_radius * self.y_radius))
    }

    pub fn phi(&self, y: f64) -> f64 {
        self.phi3(y).0
    }

    pub fn t_support(&self) -> (f64, f64) {
        (self.t_center - self.t_radius, self.t_center + self.t_radius)
    }

    pub fn y_support(&self) -> (f64, f64) {
        (self.y_center - self.y_radius, self.y_center + self.y_radius)
    }
}

/// `count` bumps with seeded random centers and widths, supported inside
/// `t_window × y_window`.
pub fn test_bank(seed: u64, count: usize, t_window: (f64, f64), y_window: (f64, f64)) -> Result<Vec<TestFunction>> {
    let (t0, t1) = t_window;
    let (y0, y1) = y_window;
    if !(t0 >= 0.0 && t1 > t0 && y1 > y0) {
        return Err(invalid("test_bank", "windows must be nondegenerate with t ≥ 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (tl, yl) = (t1 - t0, y1 - y0);
    (0..count)
        .map(|id| {
            let tr = rng.random_range(0.15..0.45) * tl;
            let tc = rng.random_range(t0 + tr * 1.02..t1 - tr * 1.02);
            let yr = rng.random_range(0.1..0.3) * yl;
            let yc = rng.random_range(y0 + yr * 1.02..y1 - yr * 1.02);
            TestFunction::new(id, tc, tr, yc, yr)
        })
        .collect()
}

/// Snapshots `u(t_n, ·)` on a common grid.
#[derive(Debug, Clone)]
pub struct SpaceTimeData {
    grid: Grid,
    times: Vec<f64>,
    frames: Vec<Vec<f64>>,
}

impl SpaceTimeData {
    pub fn new(times: Vec<f64>, frames: &[GridDensity]) -> Result<Self> {
        if times.len() != frames.len() {
            return Err(Error::SizeMismatch {
                left: times.len(),
                right: frames.len(),
            });
        }
        if times.len() < 2 {
            return Err(invalid("times", "need at least two snapshots"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("times", "must be strictly increasing"));
        }
        let grid = frames[0].grid();
        if frames.iter().any(|f| !f.grid().matches(&grid)) {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid,
            times,
            frames: frames.iter().map(|f| f.values().to_vec()).collect(),
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn sup(&self) -> f64 {
        self.frames.iter().flatten().fold(0.0, |a, &b| a.max(b))
    }

    /// Largest jump of `u^m` between neighbouring cells over all frames.
    pub fn max_jump_w(&self, m: f64) -> f64 {
        self.frames
            .iter()
            .flat_map(|f| f.windows(2).map(|p| (pow(p[1], m) - pow(p[0], m)).abs()))
            .fold(0.0, f64::max)
    }

    /// Largest jump of `u^m` over neighbouring cell pairs whose values
    /// bracket `k^m`; `None` when no frame crosses the level.
    pub fn level_jump_w(&self, k: f64, m: f64) -> Option<f64> {
        let km = pow(k, m);
        self.frames
            .iter()
            .flat_map(|f| f.windows(2).map(|p| (pow(p[0], m), pow(p[1], m))))
            .filter(|&(a, b)| a.min(b) <= km && km <= a.max(b) && a != b)
            .map(|(a, b)| (b - a).abs())
            .reduce(f64::max)
    }

    /// Default mollification widths `{4h, 2h, h}` for level `k`: `h` is the
    /// data resolution in `u^m` where the level set lies (the largest cell
    /// jump among cells crossing `k^m`), or the largest jump anywhere when
    /// nothing crosses it.
    pub fn default_eps_sequence(&self, k: f64, m: f64) -> Vec<f64> {
        let h = self
            .level_jump_w(k, m)
            .unwrap_or_else(|| self.max_jump_w(m))
            .max(f64::MIN_POSITIVE);
        vec![4.0 * h, 2.0 * h, h]
    }
}

/// One `(k, test function)` evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyEntry {
    pub k: f64,
    pub test_id: usize,
    pub lhs: f64,
    pub rhs_flux: f64,
    /// `(ε, D_ε)` for each requested width.
    pub dissipation: Vec<(f64, f64)>,
    pub dissipation_estimate: f64,
    pub residual: f64,
    /// `∬ |u−k| φ |θ'|`, the natural magnitude of `lhs`.
    pub lhs_scale: f64,
}

fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

fn sign(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else if z < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Residual of the entropy inequality for one level `k` and test function.
pub fn entropy_residual(
    data: &SpaceTimeData,
    k: f64,
    tf: &TestFunction,
    b: &ConvectionCoefficient,
    m: f64,
    eps_sequence: &[f64],
) -> Result<EntropyEntry> {
    if !(k >= 0.0) {
        return Err(invalid("k", "entropy level must be nonnegative"));
    }
    let grid = data.grid;
    let (ya, yb) = tf.y_support();
    if !(ya > grid.x_min + grid.dx && yb < grid.x_max() - grid.dx) {
        return Err(Error::SupportOutsideWindow(format!(
            "test {}: y-support [{ya}, {yb}] not inside [{}, {}]",
            tf.id,
            grid.x_min,
            grid.x_max()
        )));
    }
    let (ta, tb) = tf.t_support();
    let (t_first, t_last) = (data.times[0], data.times[data.times.len() - 1]);
    if !(ta >= t_first && tb <= t_last) {
        return Err(Error::SupportOutsideWindow(format!(
            "test {}: t-support [{ta}, {tb}] not inside [{t_first}, {t_last}]",
            tf.id
        )));
    }
    let mollifiers: Vec<Mollifier> = eps_sequence.iter().map(|&e| Mollifier::new(e)).collect::<Result<_>>()?;
    let km = pow(k, m);
    let dy = grid.dx;

    let lo = (((ya - grid.x_min) / dy).floor() as usize).saturating_sub(1);
    let hi = (((yb - grid.x_min) / dy).ceil() as usize + 1).min(grid.cells - 1);
    let centers: Vec<f64> = (lo..=hi).map(|i| grid.center(i)).collect();
    let phis: Vec<(f64, f64, f64)> = centers.iter().map(|&y| tf.phi3(y)).collect();
    let bs: Vec<(f64, f64)> = centers.iter().map(|&y| (b.eval(y), b.derivative(y))).collect();
    // interfaces between consecutive centers
    let phi_mid: Vec<f64> = centers.windows(2).map(|c| tf.phi(0.5 * (c[0] + c[1]))).collect();

    let nt = data.times.len();
    let mut a_abs = vec![0.0; nt];
    let mut a_flux = vec![0.0; nt];
    let mut a_diss = vec![vec![0.0; nt]; mollifiers.len()];
    for (n, frame) in data.frames.iter().enumerate() {
        let u = &frame[lo..=hi];
        let w: Vec<f64> = u.iter().map(|&v| pow(v, m)).collect();
        let (mut s_abs, mut s_flux) = (0.0, 0.0);
        for i in 0..u.len() {
            let (phi, phi1, phi2) = phis[i];
            let (bb, bd) = bs[i];
            let dev = w[i] - km;
            s_abs += (u[i] - k).abs() * phi;
            s_flux += -dev.abs() * phi2 + bb * dev.abs() * phi1 - sign(u[i] - k) * bd * km * phi;
        }
        a_abs[n] = s_abs * dy;
        a_flux[n] = s_flux * dy;
        for (mo, acc) in mollifiers.iter().zip(a_diss.iter_mut()) {
            let mut s = 0.0;
            for i in 0..w.len() - 1 {
                let dw = w[i + 1] - w[i];
                if dw == 0.0 || phi_mid[i] == 0.0 {
                    continue;
                }
                // ∫ 2δ_ε(w(y) − k^m) w_y² dy over one linear piece
                let jump = mo.stp(w[i + 1] - km) - mo.stp(w[i] - km);
                s += 2.0 * (dw / dy) * jump * phi_mid[i];
            }
            acc[n] = s;
        }
    }
    let theta: Vec<f64> = data.times.iter().map(|&t| tf.theta(t)).collect();
    let theta_p: Vec<f64> = data.times.iter().map(|&t| tf.theta_prime(t)).collect();
    let weighted = |a: &[f64], wts: &[f64]| -> Vec<f64> { a.iter().zip(wts).map(|(x, y)| x * y).collect() };
    let lhs = trapezoid(&data.times, &weighted(&a_abs, &theta_p));
    let abs_tp: Vec<f64> = theta_p.iter().map(|v| v.abs()).collect();
    let lhs_scale = trapezoid(&data.times, &weighted(&a_abs, &abs_tp));
    let rhs_flux = trapezoid(&data.times, &weighted(&a_flux, &theta));
    let dissipation: Vec<(f64, f64)> = eps_sequence
        .iter()
        .zip(&a_diss)
        .map(|(&e, d)| (e, trapezoid(&data.times, &weighted(d, &theta))))
        .collect();
    let dissipation_estimate = dissipation.iter().map(|d| d.1).fold(0.0, f64::max);
    Ok(EntropyEntry {
        k,
        test_id: tf.id,
        lhs,
        rhs_flux,
        dissipation,
        dissipation_estimate,
        residual: lhs - rhs_flux - dissipation_estimate,
        lhs_scale,
    })
}

/// Entries for the Cartesian product of levels and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyReport {
    pub entries: Vec<EntropyEntry>,
    /// `+∞` for an empty report.
    pub min_residual: f64,
    /// Largest `lhs_scale` over the sweep.
    pub scale: f64,
}

impl EntropyReport {
    /// `min_residual ≥ −rel_tol · scale`.
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.min_residual >= -rel_tol * self.scale
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,test_id,eps,lhs,rhs_flux,dissipation_eps,dissipation_estimate,residual\n");
        for e in &self.entries {
            for (eps, d) in &e.dissipation {
                let _ = writeln!(
                    s,
                    "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    e.k, e.test_id, eps, e.lhs, e.rhs_flux, d, e.dissipation_estimate, e.residual
                );
            }
        }
        let _ = writeln!(s, "# min_residual={:.16e},scale={:.16e}", self.min_residual, self.scale);
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Evaluate every `(k, test)` pair in parallel with one ε sequence.
pub fn sweep(
    data: &SpaceTimeData,
    b: &ConvectionCoefficient,
    m: f64,
    k_grid: &[f64],
    bank: &[TestFunction],
    eps_sequence: &[f64],
) -> Result<EntropyReport> {
    sweep_with(data, b, m, k_grid, bank, |_| eps_sequence.to_vec())
}

/// As [`sweep`] with the ε sequence chosen per level.
pub fn sweep_with(
    data: &SpaceTimeData,
    b: &ConvectionCoefficient,
    m: f64,
    k_grid: &[f64],
    bank: &[TestFunction],
    eps_for: impl Fn(f64) -> Vec<f64> + Sync,
) -> Result<EntropyReport> {
    let pairs: Vec<(f64, Vec<f64>, &TestFunction)> = k_grid
        .iter()
        .flat_map(|&k| {
            let eps = eps_for(k);
            bank.iter().map(move |t| (k, eps.clone(), t))
        })
        .collect();
    let entries: Vec<EntropyEntry> = pairs
        .par_iter()
        .map(|(k, eps, tf)| entropy_residual(data, *k, tf, b, m, eps))
        .collect::<Result<_>>()?;
    let min_residual = entries.iter().map(|e| e.residual).fold(f64::INFINITY, f64::min);
    let scale = entries.iter().map(|e| e.lhs_scale).fold(0.0, f64::max);
    Ok(EntropyReport {
        entries,
        min_residual,
        scale,
    })
}

/// `count` levels `j · 1.2 · sup u / count`, `j = 1..=count`.
pub fn default_k_grid(sup_u: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|j| j as f64 * 1.2 * sup_u / count as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mollifier_constants() {
        assert!((Mollifier::normalization() - 0.443993816168079).abs() < 1e-12);
        assert!((Mollifier::unit(0.0) - 0.828568839869105).abs() < 1e-12);
        assert_eq!(Mollifier::unit(1.0), 0.0);
        assert_eq!(Mollifier::unit(-1.0), 0.0);
        for y in [0.1, 0.5, 0.93] {
            assert_eq!(Mollifier::unit(y), Mollifier::unit(-y));
        }
    }

    #[test]
    fn mollifier_is_normalized() {
        for eps in [1.0, 0.1, 0.01] {
            let m = Mollifier::new(eps).unwrap();
            let total = integrate(|z| m.delta(z), -eps, eps, 400);
            assert!((total - 1.0).abs() < 1e-10);
            assert_eq!(m.delta(1.0001 * eps), 0.0);
        }
    }

    #[test]
    fn mollified_functions() {
        let m = Mollifier::new(0.2).unwrap();
        let h = 1e-5;
        let mut last = (-1.0, 0.0);
        for i in 0..=400 {
            let z = -0.3 + 0.6 * i as f64 / 400.0;
            let (s, p) = (m.sgn(z), m.stp(z));
            assert!(s >= last.0 - 1e-15 && p >= last.1 - 1e-15);
            last = (s, p);
            let fd_sgn = (m.sgn(z + h) - m.sgn(z - h)) / (2.0 * h);
            let fd_stp = (m.stp(z + h) - m.stp(z - h)) / (2.0 * h);
            assert!((fd_sgn - m.sgn_derivative(z)).abs() < 1e-6 * (1.0 + m.sgn_derivative(z)));
            assert!((fd_stp - m.delta(z)).abs() < 1e-6 * (1.0 + m.delta(z)));
            // abs_ε' = sgn_ε and heav_ε' = stp_ε
            let fd_abs = (m.abs(z + h) - m.abs(z - h)) / (2.0 * h);
            assert!((fd_abs - s).abs() < 1e-6);
            let fd_heav = (m.heav(z + h) - m.heav(z - h)) / (2.0 * h);
            assert!((fd_heav - p).abs() < 1e-6);
        }
        assert_eq!(m.abs(0.5), 0.5);
        assert_eq!(m.heav(-0.5), 0.0);
        assert!(m.abs(0.0) > 0.0);
    }

    #[test]
    fn bank_is_deterministic_and_inside() {
        let a = test_bank(42, 8, (0.0, 0.5), (-2.0, 2.0)).unwrap();
        let b = test_bank(42, 8, (0.0, 0.5), (-2.0, 2.0)).unwrap();
        assert_eq!(a, b);
        for tf in &a {
            let (t0, t1) = tf.t_support();
            let (y0, y1) = tf.y_support();
            assert!(t0 > 0.0 && t1 < 0.5 && y0 > -2.0 && y1 < 2.0);
        }
        assert_ne!(a, test_bank(43, 8, (0.0, 0.5), (-2.0, 2.0)).unwrap());
    }

    #[test]
    fn test_function_derivatives() {
        let tf = TestFunction::new(0, 0.3, 0.1, 0.2, 0.7).unwrap();
        let h = 1e-6;
        for t in [0.25, 0.31, 0.37] {
            let fd = (tf.theta(t + h) - tf.theta(t - h)) / (2.0 * h);
            assert!((fd - tf.theta_prime(t)).abs() < 1e-5);
        }
        for y in [-0.3, 0.1, 0.6] {
            let (_, d1, d2) = tf.phi3(y);
            let fd1 = (tf.phi(y + h) - tf.phi(y - h)) / (2.0 * h);
            let h2 = 1e-4;
            let fd2 = (tf.phi(y + h2) - 2.0 * tf.phi(y) + tf.phi(y - h2)) / (h2 * h2);
            assert!((fd1 - d1).abs() < 1e-6);
            assert!((fd2 - d2).abs() < 1e-5);
        }
    }

    fn barenblatt_data() -> SpaceTimeData {
        // m = 2 Barenblatt profile, an exact solution with b = 0
        let (c, kk) = (0.360562392576852, 1.0 / 12.0);
        let grid = Grid::new(-3.0, 5e-3, 1200).unwrap();
        let times: Vec<f64> = (0..=100).map(|i| 0.1 + 0.004 * i as f64).collect();
        let frames: Vec<GridDensity> = times
            .iter()
            .map(|&t| {
                let a = t.powf(-1.0 / 3.0);
                GridDensity::from_fn(grid, |y| a * (c - kk * y * y * a * a).max(0.0)).unwrap()
            })
            .collect();
        SpaceTimeData::new(times, &frames).unwrap()
    }

    #[test]
    fn exact_solution_satisfies_the_inequality() {
        let data = barenblatt_data();
        let zero = ConvectionCoefficient::zero();
        let bank = test_bank(1, 8, (0.1, 0.5), (-2.0, 2.0)).unwrap();
        let ks = default_k_grid(data.sup(), 16);
        let report = sweep_with(&data, &zero, 2.0, &ks, &bank, |k| data.default_eps_sequence(k, 2.0)).unwrap();
        assert_eq!(report.entries.len(), 128);
        assert!(report.passes(5e-3), "min {} scale {}", report.min_residual, report.scale);
        for e in &report.entries {
            assert!(e.dissipation.iter().all(|d| d.1 >= 0.0));
            assert!((e.residual - (e.lhs - e.rhs_flux - e.dissipation_estimate)).abs() < 1e-15);
        }
    }

    #[test]
    fn level_extremes() {
        let data = barenblatt_data();
        let zero = ConvectionCoefficient::zero();
        let tf = TestFunction::new(0, 0.3, 0.15, 0.3, 1.2).unwrap();
        let eps = data.default_eps_sequence(0.0, 2.0);
        // k = 0: weak form, lhs ≈ rhs_flux
        let e0 = entropy_residual(&data, 0.0, &tf, &zero, 2.0, &eps).unwrap();
        assert!((e0.lhs - e0.rhs_flux).abs() < 1e-4 * e0.lhs_scale.max(1e-3), "{e0:?}");
        // k above sup u: no dissipation at all
        let big = entropy_residual(&data, 1.2 * data.sup() + 0.1, &tf, &zero, 2.0, &eps).unwrap();
        assert_eq!(big.dissipation_estimate, 0.0);
        assert!((big.lhs - big.rhs_flux).abs() < 1e-4 * big.lhs_scale);
    }

    #[test]
    fn eps_follows_the_level_set() {
        let data = barenblatt_data();
        let global = data.max_jump_w(2.0);
        // near the front u^m is flat, so the widths shrink there
        let low = data.level_jump_w(0.02, 2.0).unwrap();
        assert!(low < 0.25 * global, "{low} vs {global}");
        assert!(data.level_jump_w(2.0 * data.sup(), 2.0).is_none());
        assert_eq!(data.default_eps_sequence(2.0 * data.sup(), 2.0), vec![4.0 * global, 2.0 * global, global]);
        let eps = data.default_eps_sequence(0.02, 2.0);
        assert!(eps.windows(2).all(|w| w[1] == 0.5 * w[0]));
    }

    #[test]
    fn sweep_edge_cases() {
        let data = barenblatt_data();
        let zero = ConvectionCoefficient::zero();
        let bank = test_bank(3, 2, (0.1, 0.5), (-2.0, 2.0)).unwrap();
        let eps = data.default_eps_sequence(0.3, 2.0);
        let empty = sweep(&data, &zero, 2.0, &[], &bank, &eps).unwrap();
        assert!(empty.entries.is_empty() && empty.min_residual == f64::INFINITY);
        let dup = sweep(&data, &zero, 2.0, &[0.3, 0.3], &bank, &eps).unwrap();
        assert_eq!(dup.entries[0].residual, dup.entries[2].residual);
        let outside = TestFunction::new(9, 0.3, 0.1, 2.8, 0.5).unwrap();
        assert!(matches!(
            entropy_residual(&data, 0.3, &outside, &zero, 2.0, &eps),
            Err(Error::SupportOutsideWindow(_))
        ));
        let late = TestFunction::new(9, 0.45, 0.1, 0.0, 0.5).unwrap();
        assert!(matches!(
            entropy_residual(&data, 0.3, &late, &zero, 2.0, &eps),
            Err(Error::SupportOutsideWindow(_))
        ));
    }
}
