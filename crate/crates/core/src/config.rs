//! Experiment configuration (TOML). Unknown keys are rejected everywhere.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::localization::ProbeOptions;
use crate::models::{NonlinearitySpec, PotentialSpec};
use crate::solver::SolveOptions;
use crate::diagnostics::{DecayModel, BOUNDARY_MASS_LIMIT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub rng_seed: u64,
    pub problem: ProblemConfig,
    pub potential: PotentialSpec,
    pub nonlinearity: NonlinearityConfig,
    pub boxes: BoxConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub limit: LimitConfig,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub probe: ProbeOptions,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub dim: usize,
    pub alpha: f64,
    /// Box half width in original variables; the rescaled box is `R0/ε`.
    pub box_r0: f64,
    /// Upper bound on the rescaled half width.
    #[serde(default = "default_box_cap")]
    pub box_cap: f64,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    /// Half width of the grid for the autonomous limit problem.
    #[serde(default = "default_limit_half_width")]
    pub limit_half_width: f64,
    #[serde(default = "default_max_points")]
    pub max_points: usize,
}

fn default_box_cap() -> f64 {
    400.0
}
fn default_spacing() -> f64 {
    0.25
}
fn default_limit_half_width() -> f64 {
    40.0
}
fn default_max_points() -> usize {
    1 << 22
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearityConfig {
    Saturable {
        s: f64,
        #[serde(default)]
        growth_q: Option<f64>,
        #[serde(default)]
        c0: Option<f64>,
    },
    Power {
        exponent: f64,
        #[serde(default)]
        growth_q: Option<f64>,
        #[serde(default)]
        c0: Option<f64>,
    },
    Zero,
}

impl NonlinearityConfig {
    pub fn build(&self) -> Result<NonlinearitySpec> {
        let (mut spec, q, c0) = match *self {
            NonlinearityConfig::Saturable { s, growth_q, c0 } => (NonlinearitySpec::saturable(s)?, growth_q, c0),
            NonlinearityConfig::Power { exponent, growth_q, c0 } => (NonlinearitySpec::power(exponent)?, growth_q, c0),
            NonlinearityConfig::Zero => (NonlinearitySpec::zero(), None, None),
        };
        if q.is_some() {
            spec.growth_q = q;
        }
        if c0.is_some() {
            spec.c0 = c0;
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    /// Half side `l` of each hypercube.
    pub half_side: f64,
    /// Bound `L` with every cube inside `(-L, L)^d`.
    pub bound: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_barycenter_exponent")]
    pub barycenter_exponent: f64,
    /// Clamp radius of the `β` map; defaults to `L`.
    #[serde(default)]
    pub beta_radius: Option<f64>,
}

fn default_margin() -> f64 {
    0.05
}
fn default_barycenter_exponent() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Strictly decreasing list of ε values.
    #[serde(default)]
    pub eps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitConfig {
    /// Strictly increasing levels `a` for the `c_a` curve.
    pub levels: Vec<f64>,
}

impl Default for LimitConfig {
    fn default() -> Self {
        Self {
            levels: vec![0.5, 1.0, 1.5, 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub eps: f64,
    pub branch: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { eps: 0.25, branch: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Decay-fit window as fractions of the box half width.
    pub decay_window: [f64; 2],
    pub decay_model: DecayModel,
    pub boundary_mass_limit: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            decay_window: [0.2, 0.5],
            decay_model: DecayModel::Periodized,
            boundary_mass_limit: BOUNDARY_MASS_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub write_fields: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            write_fields: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Structural checks that need no numerics.
    pub fn check(&self) -> Result<()> {
        let p = &self.problem;
        let bad = |m: String| Err(Error::Config(m));
        if !(1..=3).contains(&p.dim) {
            return bad(format!("problem.dim = {} must be 1, 2 or 3", p.dim));
        }
        if !(p.alpha > 0.0 && p.alpha < 1.0) {
            return bad(format!("problem.alpha = {} must lie in (0, 1)", p.alpha));
        }
        for (name, v) in [
            ("problem.box_r0", p.box_r0),
            ("problem.box_cap", p.box_cap),
            ("problem.spacing", p.spacing),
            ("problem.limit_half_width", p.limit_half_width),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        self.potential.check().map_err(|e| Error::Config(format!("potential: {e}")))?;
        if self.potential.dim() != p.dim {
            return bad("potential dimension differs from problem.dim".into());
        }
        if self.sweep.eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return bad("sweep.eps entries must be positive".into());
        }
        if self.sweep.eps.windows(2).any(|w| !(w[1] < w[0])) {
            return bad("sweep.eps must be strictly decreasing".into());
        }
        if self.limit.levels.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("limit.levels must be strictly increasing".into());
        }
        if !(self.solve.eps > 0.0) {
            return bad("solve.eps must be positive".into());
        }
        let [lo, hi] = self.diagnostics.decay_window;
        if !(0.2 <= lo && lo < hi && hi <= 0.5) {
            return bad("diagnostics.decay_window must satisfy 0.2 <= lo < hi <= 0.5".into());
        }
        if !(self.boxes.barycenter_exponent >= 2.0) {
            return bad("boxes.barycenter_exponent must be >= 2".into());
        }
        self.solver.validate().map_err(|e| Error::Config(format!("solver: {e}")))?;
        Ok(())
    }

    pub fn beta_radius(&self) -> f64 {
        self.boxes.beta_radius.unwrap_or(self.boxes.bound)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            rng_seed: self.rng_seed,
            ..self.solver.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const CANONICAL: &str = r#"
rng_seed = 7

[problem]
dim = 1
alpha = 0.5
box_r0 = 12.0

[potential]
background = 2.0
wells = [
  { center = [-2.0], depth = 1.0, width = 1.0 },
  { center = [2.0], depth = 1.0, width = 1.0 },
]

[nonlinearity]
kind = "saturable"
s = 0.4

[boxes]
half_side = 1.0
bound = 4.0

[sweep]
eps = [0.5, 0.25]
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml_str(CANONICAL).unwrap();
        assert_eq!(cfg.problem.spacing, 0.25);
        assert_eq!(cfg.solver, SolveOptions::default());
        assert_eq!(cfg.solve_options().rng_seed, 7);
        assert_eq!(cfg.nonlinearity.build().unwrap().l0, 2.5);
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = CANONICAL.replace("box_r0 = 12.0", "box_r0 = 12.0\nbox_rO = 3.0");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(Error::Config(_))));
        let text = CANONICAL.replace("s = 0.4", "s = 0.4\nsat = 1");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn ordering_checks() {
        let text = CANONICAL.replace("eps = [0.5, 0.25]", "eps = [0.25, 0.5]");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
        let text = CANONICAL.replace("alpha = 0.5", "alpha = 1.5");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
    }
}
