//! Scenario files: TOML with a schema version; unknown keys are rejected and
//! everything except geometry has a default.

use std::path::Path;
use std::time::Duration;

use rtdrax::frs::FrsParams;
use rtdrax::geometry::decompose_simple_polygon;
use rtdrax::repair::RepairConfig;
use rtdrax::{
    ConvexPolygon, DisturbanceBounds, DisturbancePatch, Interval, Point2, Realization,
    UncertaintyConfig, UnicycleState, VehicleLimits,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("reading scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    Schema(u32),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Executes the planner's choice from the inflated FRS directly.
    Standard,
    /// Plans on the non-inflated FRS, then certifies and repairs.
    Rax,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Standard => "standard",
            Mode::Rax => "rax",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" | "standard_rtd" => Ok(Mode::Standard),
            "rax" | "rtd_rax" => Ok(Mode::Rax),
            other => Err(format!("unknown mode {other:?} (expected standard or rax)")),
        }
    }
}

/// Tracking-error sampling used to inflate the standard FRS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingConfig {
    pub samples: usize,
    pub v0_range: Interval,
    pub seed: u64,
}

/// A fully validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub start: UnicycleState,
    pub goal: Point2,
    pub goal_radius: f64,
    pub obstacles: Vec<ConvexPolygon>,
    pub patches: Vec<DisturbancePatch>,
    pub realization: Realization,
    pub limits: VehicleLimits,
    pub frs: FrsParams,
    pub tracking: TrackingConfig,
    /// `w_bounds` is overwritten each cycle by the disturbance measurement.
    pub verifier: UncertaintyConfig,
    pub dt_verify: f64,
    pub repair: RepairConfig,
    pub mode: Mode,
    pub replan_period: f64,
    pub max_cycles: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = toml::from_str(text)?;
        file.into_scenario()
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn robot_radius(&self) -> f64 {
        self.frs.robot_radius
    }

    /// One of the bundled scenarios by name.
    pub fn builtin(name: &str) -> Option<Self> {
        BUILTIN
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Self::from_toml(text).expect("bundled scenarios are valid"))
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_realization(mut self, realization: Realization) -> Self {
        self.realization = realization;
        self
    }
}

pub const BUILTIN: &[(&str, &str)] = &[
    ("empty", include_str!("../scenarios/empty.toml")),
    ("narrow_gap", include_str!("../scenarios/narrow_gap.toml")),
    (
        "angled_obstacle",
        include_str!("../scenarios/angled_obstacle.toml"),
    ),
    (
        "disturbance_gates",
        include_str!("../scenarios/disturbance_gates.toml"),
    ),
];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    schema_version: u32,
    name: String,
    #[serde(default = "default_mode")]
    mode: Mode,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_max_cycles")]
    max_cycles: usize,
    replan_period: Option<f64>,
    start: StartFile,
    goal: [f64; 2],
    #[serde(default = "default_goal_radius")]
    goal_radius: f64,
    #[serde(default)]
    limits: LimitsFile,
    #[serde(default)]
    frs: FrsFile,
    #[serde(default)]
    tracking: TrackingFile,
    #[serde(default)]
    verifier: VerifierFile,
    #[serde(default)]
    repair: RepairFile,
    #[serde(default)]
    disturbance: DisturbanceFile,
    #[serde(default)]
    obstacles: Vec<ShapeFile>,
    #[serde(default)]
    patches: Vec<PatchFile>,
}

fn default_mode() -> Mode {
    Mode::Rax
}

fn default_max_cycles() -> usize {
    30
}

fn default_goal_radius() -> f64 {
    0.3
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StartFile {
    x: f64,
    y: f64,
    #[serde(default)]
    h: f64,
    #[serde(default)]
    v: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct LimitsFile {
    v_max: f64,
    omega_max: f64,
    a_max: f64,
    k_a: f64,
    t_plan: f64,
    t_stop: f64,
}

impl Default for LimitsFile {
    fn default() -> Self {
        let d = VehicleLimits::default();
        Self {
            v_max: d.v_max,
            omega_max: d.omega_max,
            a_max: d.a_max,
            k_a: d.k_a,
            t_plan: d.t_plan,
            t_stop: d.t_stop,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FrsFile {
    n_k: usize,
    dt: f64,
    robot_radius: f64,
}

impl Default for FrsFile {
    fn default() -> Self {
        let d = FrsParams::default();
        Self {
            n_k: d.n_k,
            dt: d.dt,
            robot_radius: d.robot_radius,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct TrackingFile {
    samples: usize,
    /// Defaults to `[0, v_max]`.
    v0_range: Option<[f64; 2]>,
    seed: u64,
}

impl Default for TrackingFile {
    fn default() -> Self {
        Self {
            samples: 200,
            v0_range: None,
            seed: 7,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct VerifierFile {
    epsilon: [f64; 4],
    dt: f64,
    step_pad: f64,
}

impl Default for VerifierFile {
    fn default() -> Self {
        Self {
            epsilon: UncertaintyConfig::default().epsilon,
            dt: 0.01,
            step_pad: 0.0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RepairFile {
    speed_backoff_factors: Vec<f64>,
    lateral_push_steps: Vec<f64>,
    tighten_buffers: Vec<f64>,
    time_budget_ms: f64,
}

impl Default for RepairFile {
    fn default() -> Self {
        let d = RepairConfig::default();
        Self {
            speed_backoff_factors: d.speed_backoff_factors,
            lateral_push_steps: d.lateral_push_steps,
            tighten_buffers: d.tighten_buffers,
            time_budget_ms: d.time_budget.as_secs_f64() * 1e3,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DisturbanceFile {
    #[serde(default)]
    realization: RealizationFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RealizationFile {
    #[default]
    Random,
    WorstCase,
}

/// A rectangle (`center`, `size`, optional `angle`) or a simple polygon
/// (`vertices`, decomposed into convex pieces when concave).
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShapeFile {
    center: Option<[f64; 2]>,
    size: Option<[f64; 2]>,
    angle: Option<f64>,
    vertices: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatchFile {
    center: Option<[f64; 2]>,
    size: Option<[f64; 2]>,
    angle: Option<f64>,
    vertices: Option<Vec<[f64; 2]>>,
    w_lo: [f64; 2],
    w_hi: [f64; 2],
}

impl ShapeFile {
    fn polygons(&self, what: &str) -> Result<Vec<ConvexPolygon>, ScenarioError> {
        match (self.center, self.size, &self.vertices) {
            (Some(c), Some(s), None) => {
                if !(s[0] > 0.0 && s[1] > 0.0) {
                    return Err(invalid(format!("{what}: size must be positive")));
                }
                let angle = self.angle.unwrap_or(0.0);
                ConvexPolygon::rectangle(c, [s[0] / 2.0, s[1] / 2.0], angle)
                    .map(|p| vec![p])
                    .map_err(|e| invalid(format!("{what}: {e}")))
            }
            (None, None, Some(v)) if self.angle.is_none() => match ConvexPolygon::new(v.clone()) {
                Ok(p) => Ok(vec![p]),
                Err(_) => decompose_simple_polygon(v).map_err(|e| invalid(format!("{what}: {e}"))),
            },
            _ => Err(invalid(format!(
                "{what}: give either center + size (+ angle) or vertices"
            ))),
        }
    }
}

impl ScenarioFile {
    fn into_scenario(self) -> Result<Scenario, ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::Schema(self.schema_version));
        }
        let l = &self.limits;
        let limits = VehicleLimits {
            v_max: l.v_max,
            omega_max: l.omega_max,
            a_max: l.a_max,
            k_a: l.k_a,
            t_plan: l.t_plan,
            t_stop: l.t_stop,
        };
        limits.validate().map_err(|e| invalid(e.to_string()))?;
        let frs = FrsParams {
            limits,
            n_k: self.frs.n_k,
            dt: self.frs.dt,
            robot_radius: self.frs.robot_radius,
        };
        frs.validate().map_err(|e| invalid(e.to_string()))?;

        let s = &self.start;
        let start = UnicycleState::new(s.x, s.y, s.h, s.v);
        if !start.to_array().iter().all(|x| x.is_finite()) || s.v < 0.0 || s.v > limits.v_max {
            return Err(invalid("start must be finite with 0 ≤ v ≤ v_max"));
        }
        if !self.goal.iter().all(|g| g.is_finite()) {
            return Err(invalid("goal must be finite"));
        }
        if !(self.goal_radius > 0.0) {
            return Err(invalid("goal_radius must be positive"));
        }
        let replan_period = self.replan_period.unwrap_or(limits.t_plan);
        if !(replan_period > 0.0 && replan_period <= limits.t_plan) {
            return Err(invalid("replan_period must lie in (0, t_plan]"));
        }
        if self.max_cycles == 0 {
            return Err(invalid("max_cycles must be positive"));
        }

        let [lo, hi] = self.tracking.v0_range.unwrap_or([0.0, limits.v_max]);
        let v0_range =
            Interval::try_new(lo, hi).map_err(|e| invalid(format!("tracking.v0_range: {e}")))?;
        if self.tracking.samples == 0 {
            return Err(invalid("tracking.samples must be positive"));
        }

        let v = &self.verifier;
        if v.epsilon.iter().any(|e| !(*e >= 0.0)) {
            return Err(invalid("verifier.epsilon must be nonnegative"));
        }
        if !(v.step_pad >= 0.0) {
            return Err(invalid("verifier.step_pad must be nonnegative"));
        }
        let steps = (limits.horizon() / v.dt).round();
        if !(v.dt > 0.0) || (steps * v.dt - limits.horizon()).abs() > 1e-9 {
            return Err(invalid("verifier.dt must divide t_plan + t_stop"));
        }
        let plan_steps = (replan_period / v.dt).round();
        if (plan_steps * v.dt - replan_period).abs() > 1e-9 {
            return Err(invalid("verifier.dt must divide replan_period"));
        }

        let r = &self.repair;
        let repair = RepairConfig {
            speed_backoff_factors: r.speed_backoff_factors.clone(),
            lateral_push_steps: r.lateral_push_steps.clone(),
            tighten_buffers: r.tighten_buffers.clone(),
            time_budget: Duration::try_from_secs_f64(r.time_budget_ms / 1e3)
                .map_err(|_| invalid("repair.time_budget_ms must be nonnegative"))?,
        };
        repair
            .validate()
            .map_err(|e| invalid(format!("repair: {e}")))?;

        let mut obstacles = Vec::new();
        for (i, o) in self.obstacles.iter().enumerate() {
            obstacles.extend(o.polygons(&format!("obstacles[{i}]"))?);
        }
        let mut patches = Vec::new();
        for (i, p) in self.patches.into_iter().enumerate() {
            let what = format!("patches[{i}]");
            let shape = ShapeFile {
                center: p.center,
                size: p.size,
                angle: p.angle,
                vertices: p.vertices,
            };
            for region in shape.polygons(&what)? {
                patches.push(
                    DisturbancePatch::new(region, p.w_lo, p.w_hi)
                        .map_err(|e| invalid(format!("{what}: {e}")))?,
                );
            }
        }
        let realization = match self.disturbance.realization {
            RealizationFile::Random => Realization::Random,
            RealizationFile::WorstCase => Realization::WorstCase,
        };

        Ok(Scenario {
            name: self.name,
            start,
            goal: self.goal,
            goal_radius: self.goal_radius,
            obstacles,
            patches,
            realization,
            limits,
            frs,
            tracking: TrackingConfig {
                samples: self.tracking.samples,
                v0_range,
                seed: self.tracking.seed,
            },
            verifier: UncertaintyConfig {
                epsilon: v.epsilon,
                w_bounds: DisturbanceBounds::zero(),
                footprint_radius: frs.robot_radius,
                step_pad: v.step_pad,
            },
            dt_verify: v.dt,
            repair,
            mode: self.mode,
            replan_period,
            max_cycles: self.max_cycles,
            seed: self.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
name = "t"
goal = [4.0, 0.0]
[start]
x = 0.0
y = 0.0
"#;

    #[test]
    fn minimal_file_takes_defaults() {
        let s = Scenario::from_toml(MINIMAL).unwrap();
        assert_eq!(s.limits, VehicleLimits::default());
        assert_eq!(s.mode, Mode::Rax);
        assert_eq!(s.replan_period, s.limits.t_plan);
        assert_eq!(s.tracking.v0_range, Interval::new(0.0, 2.0));
        assert!(s.obstacles.is_empty());
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        let extra = format!("{MINIMAL}\nbogus = 1\n");
        assert!(matches!(
            Scenario::from_toml(&extra),
            Err(ScenarioError::Parse(_))
        ));
        let v2 = MINIMAL.replace("schema_version = 1", "schema_version = 2");
        assert!(matches!(
            Scenario::from_toml(&v2),
            Err(ScenarioError::Schema(2))
        ));
        let nested = format!("{MINIMAL}\n[limits]\nvmax = 3.0\n");
        assert!(Scenario::from_toml(&nested).is_err());
    }

    #[test]
    fn shapes_parse() {
        let text = format!(
            "{MINIMAL}
[[obstacles]]
center = [1.0, 1.0]
size = [0.5, 0.2]
angle = 0.3

[[obstacles]]
vertices = [[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [1.0, 2.0], [1.0, 1.0], [0.0, 1.0]]

[[patches]]
center = [1.0, 0.0]
size = [1.0, 1.0]
w_lo = [0.0, 0.0]
w_hi = [0.0, 0.3]
"
        );
        let s = Scenario::from_toml(&text).unwrap();
        assert!(s.obstacles.len() >= 3, "L-shape is split into convex parts");
        assert_eq!(s.patches.len(), 1);
        let both =
            format!("{MINIMAL}\n[[obstacles]]\ncenter = [1.0, 1.0]\nvertices = [[0.0, 0.0]]\n");
        assert!(matches!(
            Scenario::from_toml(&both),
            Err(ScenarioError::Invalid(_))
        ));
    }

    #[test]
    fn builtins_load() {
        for (name, _) in BUILTIN {
            let s = Scenario::builtin(name).unwrap();
            assert_eq!(&s.name, name);
        }
    }
}
