//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use jkoflow::jko::JkoConfig;
use jkoflow::profiles::InitialDatum;
use jkoflow::transform::ConvectionCoefficient;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub jko: JkoSection,
    #[serde(default)]
    pub fv: FvSection,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Seeds the entropy test bank; nothing else is random.
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub m: f64,
    #[serde(default = "one")]
    pub alpha0: f64,
    /// Computational window in the original coordinate `y`.
    pub window: [f64; 2],
    #[serde(default)]
    pub b: BSpec,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize, PartialEq, Default)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum BSpec {
    #[default]
    Zero,
    /// `amplitude · exp(−(y/width)²)`.
    Gaussian { amplitude: f64, width: f64 },
    SmoothedIndicator { lo: f64, hi: f64, smoothing: f64 },
    /// Rejected during validation; present so the error can say why.
    ConstantNonzero { value: f64 },
    Table {
        y_min: f64,
        dy: f64,
        values: Vec<f64>,
        l1_bound: f64,
        lipschitz_bound: f64,
    },
}

impl BSpec {
    pub fn build(&self) -> jkoflow::Result<ConvectionCoefficient> {
        match self {
            BSpec::Zero => Ok(ConvectionCoefficient::zero()),
            BSpec::Gaussian { amplitude, width } => ConvectionCoefficient::gaussian(*amplitude, *width),
            BSpec::SmoothedIndicator { lo, hi, smoothing } => ConvectionCoefficient::smoothed_indicator(*lo, *hi, *smoothing),
            BSpec::ConstantNonzero { value } => ConvectionCoefficient::constant(*value),
            BSpec::Table {
                y_min,
                dy,
                values,
                l1_bound,
                lipschitz_bound,
            } => ConvectionCoefficient::from_table(*y_min, *dy, values.clone(), *l1_bound, *lipschitz_bound),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Barenblatt {
        t0: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    DoubleBump {
        centers: [f64; 2],
        radius: f64,
        #[serde(default = "equal_weights")]
        weights: [f64; 2],
    },
    RiemannSmoothed {
        lo: f64,
        mid: f64,
        hi: f64,
        left: f64,
        right: f64,
        width: f64,
    },
}

fn equal_weights() -> [f64; 2] {
    [1.0, 1.0]
}

impl InitialConfig {
    pub fn datum(&self, m: f64) -> InitialDatum {
        match *self {
            InitialConfig::Barenblatt { t0 } => InitialDatum::Barenblatt { m, t0 },
            InitialConfig::Uniform { lo, hi } => InitialDatum::Uniform { lo, hi },
            InitialConfig::DoubleBump { centers, radius, weights } => InitialDatum::DoubleBump {
                centers: (centers[0], centers[1]),
                radius,
                weights: (weights[0], weights[1]),
            },
            InitialConfig::RiemannSmoothed { lo, mid, hi, left, right, width } => {
                InitialDatum::RiemannSmoothed { lo, mid, hi, left, right, width }
            }
        }
    }

    /// Start time of the run (the Barenblatt offset, else 0).
    pub fn t0(&self) -> f64 {
        match *self {
            InitialConfig::Barenblatt { t0 } => t0,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct JkoSection {
    pub enabled: bool,
    pub tau: f64,
    pub n_quantiles: usize,
    pub t_end: f64,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
}

impl Default for JkoSection {
    fn default() -> Self {
        let d = JkoConfig::default();
        Self {
            enabled: true,
            tau: d.tau,
            n_quantiles: d.n_quantiles,
            t_end: d.t_end,
            inner_tol: d.inner_tol,
            inner_max_iter: d.inner_max_iter,
        }
    }
}

impl JkoSection {
    pub fn config(&self) -> JkoConfig {
        JkoConfig {
            tau: self.tau,
            n_quantiles: self.n_quantiles,
            t_end: self.t_end,
            inner_tol: self.inner_tol,
            inner_max_iter: self.inner_max_iter,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FvSection {
    pub enabled: bool,
    pub dy: f64,
    pub nu: f64,
    pub cfl_safety: f64,
}

impl Default for FvSection {
    fn default() -> Self {
        Self {
            enabled: true,
            dy: 5e-3,
            nu: 0.0,
            cfl_safety: 0.3,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksConfig {
    /// Times (absolute) at which JKO and FV solutions are compared.
    pub compare_times: Vec<f64>,
    pub l1_tol: f64,
    pub entropy: bool,
    pub k_levels: usize,
    pub test_functions: usize,
    /// Spacing of the space-time frames handed to the entropy check.
    pub frame_dt: f64,
    /// Entropy residual tolerance, relative to the lhs scale.
    pub entropy_tol: f64,
    pub max_principle_tol: f64,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        Self {
            compare_times: Vec::new(),
            l1_tol: 5e-2,
            entropy: true,
            k_levels: 16,
            test_functions: 8,
            frame_dt: 5e-3,
            entropy_tol: 5e-3,
            max_principle_tol: 1e-3,
        }
    }
}

fn field_err(field: &str, reason: impl std::fmt::Display) -> anyhow::Error {
    anyhow!("invalid config field `{field}`: {reason}")
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| anyhow!("config parse error: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> anyhow::Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Checks everything that can be checked without running anything.
    pub fn validate(&self) -> anyhow::Result<()> {
        let p = &self.problem;
        if !(p.m > 1.0) || !p.m.is_finite() {
            return Err(field_err("problem.m", format!("must exceed 1, got {}", p.m)));
        }
        if !(p.alpha0 > 0.0) || !p.alpha0.is_finite() {
            return Err(field_err("problem.alpha0", "must be positive"));
        }
        let [lo, hi] = p.window;
        if !(lo < 0.0 && hi > 0.0) {
            return Err(field_err("problem.window", "must contain 0 in its interior"));
        }
        if let BSpec::ConstantNonzero { value } = p.b {
            if value != 0.0 {
                return Err(field_err(
                    "problem.b",
                    "a constant nonzero convection coefficient cannot be included: it is not integrable, \
                     so the coordinate change degenerates",
                ));
            }
        }
        p.b.build().map_err(|e| field_err("problem.b", e))?;
        let datum = self.initial.datum(p.m);
        datum.validate().map_err(|e| field_err("initial", e))?;
        let (s_lo, s_hi) = datum.support();
        if s_lo < lo || s_hi > hi {
            return Err(field_err(
                "problem.window",
                format!("initial support [{s_lo}, {s_hi}] is not inside the window [{lo}, {hi}]"),
            ));
        }
        if self.jko.enabled {
            self.jko.config().validate().map_err(|e| field_err("jko", e))?;
        }
        if self.fv.enabled {
            if !(self.fv.dy > 0.0) || self.fv.dy > (hi - lo) / 16.0 {
                return Err(field_err("fv.dy", "must be positive and resolve the window"));
            }
            if !(self.fv.nu >= 0.0) {
                return Err(field_err("fv.nu", "must be nonnegative"));
            }
            if !(self.fv.cfl_safety > 0.0 && self.fv.cfl_safety < 1.0) {
                return Err(field_err("fv.cfl_safety", "must lie in (0, 1)"));
            }
        }
        let c = &self.checks;
        let (t0, t1) = (self.initial.t0(), self.initial.t0() + self.jko.t_end);
        if let Some(t) = c.compare_times.iter().find(|&&t| !(t > t0 && t <= t1 * (1.0 + 1e-12))) {
            return Err(field_err("checks.compare_times", format!("{t} is outside ({t0}, {t1}]")));
        }
        if c.compare_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(field_err("checks.compare_times", "must be strictly increasing"));
        }
        if c.entropy && (c.k_levels == 0 || c.test_functions == 0) {
            return Err(field_err("checks", "k_levels and test_functions must be positive"));
        }
        if !(c.frame_dt > 0.0) {
            return Err(field_err("checks.frame_dt", "must be positive"));
        }
        if !(c.l1_tol > 0.0 && c.entropy_tol > 0.0 && c.max_principle_tol >= 0.0) {
            return Err(field_err("checks", "tolerances must be positive"));
        }
        if !self.jko.enabled && !self.fv.enabled {
            bail!("invalid config: at least one of `jko.enabled`, `fv.enabled` must be true");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [problem]
        m = 2.0
        window = [-3.0, 3.0]

        [initial]
        preset = "barenblatt"
        t0 = 0.1
    "#;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.problem.b, BSpec::Zero);
        assert_eq!(cfg.problem.alpha0, 1.0);
        assert_eq!(cfg.jko.config(), JkoConfig::default());
        assert_eq!(cfg.seed, 1);
        assert_eq!(cfg.initial.t0(), 0.1);
    }

    #[test]
    fn m_at_most_one_names_the_field() {
        let text = MINIMAL.replace("m = 2.0", "m = 1.0");
        let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("problem.m"), "{err}");
    }

    #[test]
    fn constant_convection_is_rejected() {
        let text = MINIMAL.replace("[initial]", "[problem.b]\npreset = \"constant_nonzero\"\nvalue = 0.3\n\n[initial]");
        let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("problem.b") && err.contains("cannot be included"), "{err}");
    }

    #[test]
    fn unknown_keys_report_their_location() {
        let text = MINIMAL.replace("window", "windw");
        let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("windw") && err.contains("line"), "{err}");
    }

    #[test]
    fn support_must_fit_the_window() {
        let text = MINIMAL.replace("[-3.0, 3.0]", "[-0.5, 0.5]");
        let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("problem.window"), "{err}");
    }
}
