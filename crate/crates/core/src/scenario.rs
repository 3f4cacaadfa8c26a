//! Declarative scenario files: strict TOML parsing, dotted-path overrides,
//! validation and a stable config digest.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::comms::ChannelModel;
use crate::control::{Gains, ReferenceTrajectory};
use crate::estimation::{DtSource, EkfConfig};
use crate::kinematics::Posture;
use crate::planning::{GridSpec, MedianShape};
use crate::sim::{RobotConfig, World};
use crate::streams::{stream, StreamKind, SERVER};
use crate::swarm::ConsensusConfig;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("bad override `{0}`: {1}")]
    Override(String, String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("unknown scenario `{0}` (not a file and not a bundled name)")]
    NotFound(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Application {
    Track,
    Localize,
    Consensus,
    Plan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySpec {
    Circle { start: Posture, radius: f64, speed: f64 },
    Straight { start: Posture, speed: f64 },
    FigureEight { start: Posture, size: f64, period: f64 },
    Stationary { at: Posture },
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        TrajectorySpec::Circle {
            start: Posture::default(),
            radius: 1000.0,
            speed: 100.0,
        }
    }
}

impl TrajectorySpec {
    pub fn build(&self, duration: f64) -> Result<ReferenceTrajectory, crate::control::ControlError> {
        match *self {
            TrajectorySpec::Circle { start, radius, speed } => {
                ReferenceTrajectory::circle(start, radius, speed, duration)
            }
            TrajectorySpec::Straight { start, speed } => ReferenceTrajectory::straight(start, speed, duration),
            TrajectorySpec::FigureEight { start, size, period } => {
                ReferenceTrajectory::figure_eight(start, size, period, duration)
            }
            TrajectorySpec::Stationary { at } => ReferenceTrajectory::stationary(at, duration),
        }
    }
}

/// What the controller closes the loop on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    #[default]
    Truth,
    Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackingConfig {
    pub trajectory: TrajectorySpec,
    pub control_period_ms: u64,
    pub feedback: Feedback,
    /// Errors after this time count as steady state (s).
    pub settle_s: f64,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        TrackingConfig {
            trajectory: TrajectorySpec::default(),
            control_period_ms: 70,
            feedback: Feedback::Truth,
            settle_s: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Slip-adaptive EKF on the configured time source.
    Adaptive,
    /// Same filter with slip inflation off.
    NonAdaptive,
    /// Adaptive EKF that assumes every report is `fixed_dt_s` apart.
    FixedDt,
    /// Adaptive EKF timed by server receive times.
    ReceiveTime,
    EncoderDr,
    FlowDr,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Adaptive,
        Variant::NonAdaptive,
        Variant::FixedDt,
        Variant::ReceiveTime,
        Variant::EncoderDr,
        Variant::FlowDr,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Adaptive => "adaptive",
            Variant::NonAdaptive => "non_adaptive",
            Variant::FixedDt => "fixed_dt",
            Variant::ReceiveTime => "receive_time",
            Variant::EncoderDr => "encoder_dr",
            Variant::FlowDr => "flow_dr",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationConfig {
    pub dt_source: DtSource,
    pub fixed_dt_s: f64,
    pub variants: Vec<Variant>,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            dt_source: DtSource::SenderTimestamp,
            fixed_dt_s: 0.07,
            variants: vec![Variant::Adaptive],
        }
    }
}

/// Generates a line of robots from the first robot entry, with headings
/// drawn uniformly from `[heading_min, heading_max)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwarmLayout {
    pub count: u8,
    #[serde(default = "default_spacing")]
    pub spacing_mm: f64,
    pub heading_min: f64,
    pub heading_max: f64,
}

fn default_spacing() -> f64 {
    400.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanningConfig {
    pub grid: GridSpec,
    pub median_window: usize,
    pub median_shape: MedianShape,
    /// Inflation margin (mm); defaults to body radius + 20 mm.
    pub margin_mm: Option<f64>,
    /// Points where the robot spins in place to scan.
    pub survey: Vec<[f64; 2]>,
    /// rad/s
    pub spin_rate: f64,
    pub start: [f64; 2],
    pub goal: [f64; 2],
}

impl Default for PlanningConfig {
    fn default() -> Self {
        PlanningConfig {
            grid: GridSpec::default(),
            median_window: 3,
            median_shape: MedianShape::Square,
            margin_mm: None,
            survey: Vec::new(),
            spin_rate: 1.0,
            start: [0.0, 0.0],
            goal: [0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub trajectory: bool,
    pub estimates: bool,
    pub consensus: bool,
    pub path: bool,
    pub map: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs {
            trajectory: true,
            estimates: true,
            consensus: true,
            path: true,
            map: true,
        }
    }
}

fn one_robot() -> Vec<RobotConfig> {
    vec![RobotConfig::default()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub application: Application,
    #[serde(default)]
    pub seed: u64,
    pub duration_s: f64,
    #[serde(default)]
    pub world: World,
    #[serde(default = "one_robot")]
    pub robots: Vec<RobotConfig>,
    #[serde(default)]
    pub swarm: Option<SwarmLayout>,
    #[serde(default)]
    pub channel: ChannelModel,
    /// Filter tuning; derived from the first robot's sensor models if absent.
    #[serde(default)]
    pub ekf: Option<EkfConfig>,
    #[serde(default)]
    pub gains: Gains,
    #[serde(default)]
    pub tracking: TrackingConfig,
    #[serde(default)]
    pub estimation: EstimationConfig,
    #[serde(default)]
    pub consensus: ConsensusConfig,
    #[serde(default)]
    pub planning: PlanningConfig,
    #[serde(default)]
    pub outputs: Outputs,
}

/// Scenario files shipped with the crate, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("circle_track", include_str!("../scenarios/circle_track.toml")),
    ("figure_eight_ekf", include_str!("../scenarios/figure_eight_ekf.toml")),
    ("slip_localize", include_str!("../scenarios/slip_localize.toml")),
    ("jitter_localize", include_str!("../scenarios/jitter_localize.toml")),
    ("consensus_ideal", include_str!("../scenarios/consensus_ideal.toml")),
    ("consensus_lossy", include_str!("../scenarios/consensus_lossy.toml")),
    ("consensus_stress", include_str!("../scenarios/consensus_stress.toml")),
    ("arena_plan", include_str!("../scenarios/arena_plan.toml")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Parse a `key=value` override. The value is read as a TOML value, and as
/// a plain string if that fails.
fn parse_override(spec: &str) -> Result<(Vec<String>, toml::Value), ScenarioError> {
    let (key, value) = spec
        .split_once('=')
        .ok_or_else(|| ScenarioError::Override(spec.into(), "expected key=value".into()))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ScenarioError::Override(spec.into(), "empty key".into()));
    }
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((key.split('.').map(str::to_string).collect(), parsed))
}

fn apply_override(root: &mut toml::Value, spec: &str) -> Result<(), ScenarioError> {
    let (path, value) = parse_override(spec)?;
    let err = |m: String| ScenarioError::Override(spec.into(), m);
    let mut node = root;
    for (i, part) in path.iter().enumerate() {
        let last = i + 1 == path.len();
        node = match node {
            toml::Value::Table(t) => {
                if last {
                    t.insert(part.clone(), value);
                    return Ok(());
                }
                t.entry(part.clone())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            }
            toml::Value::Array(a) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| err(format!("`{part}` is not an array index")))?;
                let len = a.len();
                let slot = a
                    .get_mut(idx)
                    .ok_or_else(|| err(format!("index {idx} out of range (length {len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(err(format!("`{}` is not a table or array", path[..i].join(".")))),
        };
    }
    Ok(())
}

impl Scenario {
    pub fn parse(text: &str, overrides: &[String]) -> Result<Scenario, ScenarioError> {
        if overrides.is_empty() {
            // parse straight from text so errors carry line numbers
            return toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()));
        }
        let mut root: toml::Value = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut root, o)?;
        }
        root.try_into()
            .map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))
    }

    /// Load from a file path, or from a bundled scenario of that name.
    pub fn load(path_or_name: &str, overrides: &[String]) -> Result<Scenario, ScenarioError> {
        let text = match std::fs::read_to_string(path_or_name) {
            Ok(t) => t,
            Err(_) => bundled(path_or_name)
                .ok_or_else(|| ScenarioError::NotFound(path_or_name.into()))?
                .to_string(),
        };
        let s = Scenario::parse(&text, overrides)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad("duration_s must be > 0".into());
        }
        self.world
            .validate()
            .map_err(|e| ScenarioError::Invalid(format!("world: {e}")))?;
        let robots = self.robot_configs();
        if robots.is_empty() {
            return bad("at least one robot is required".into());
        }
        for (i, r) in robots.iter().enumerate() {
            r.validate()
                .map_err(|e| ScenarioError::Invalid(format!("robots.{i}: {e}")))?;
        }
        let mut ids: Vec<u8> = robots.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != robots.len() {
            return bad("robot ids must be unique".into());
        }
        if let Some(l) = &self.swarm {
            if l.count < 1 || !(l.heading_min <= l.heading_max) || !l.spacing_mm.is_finite() {
                return bad("swarm: need count >= 1 and heading_min <= heading_max".into());
            }
        }
        self.channel
            .validate()
            .map_err(|e| ScenarioError::Invalid(format!("channel: {e}")))?;
        self.ekf_config()
            .validate()
            .map_err(|e| ScenarioError::Invalid(format!("ekf: {e}")))?;
        self.gains
            .validate()
            .map_err(|e| ScenarioError::Invalid(format!("gains: {e}")))?;
        self.consensus
            .validate()
            .map_err(|e| ScenarioError::Invalid(format!("consensus: {e}")))?;
        if self.tracking.control_period_ms == 0 {
            return bad("tracking.control_period_ms must be >= 1".into());
        }
        self.tracking
            .trajectory
            .build(self.duration_s)
            .map_err(|e| ScenarioError::Invalid(format!("tracking.trajectory: {e}")))?;
        if let DtSource::Fixed(dt) = self.estimation.dt_source {
            if !(dt > 0.0) {
                return bad("estimation.dt_source fixed step must be > 0".into());
            }
        }
        if !(self.estimation.fixed_dt_s > 0.0) {
            return bad("estimation.fixed_dt_s must be > 0".into());
        }
        let p = &self.planning;
        crate::planning::OccupancyGrid::new(p.grid.clone())
            .map_err(|e| ScenarioError::Invalid(format!("planning.grid: {e}")))?;
        if p.median_window < 3 || p.median_window.is_multiple_of(2) {
            return bad("planning.median_window must be odd and >= 3".into());
        }
        if p.margin_mm.is_some_and(|m| !(m >= 0.0)) || !(p.spin_rate > 0.0) {
            return bad("planning: margin_mm must be >= 0 and spin_rate > 0".into());
        }
        match self.application {
            Application::Consensus if robots.len() < 2 => bad("consensus needs at least two robots".into()),
            Application::Plan if p.survey.is_empty() => bad("plan needs at least one survey point".into()),
            _ => Ok(()),
        }
    }

    /// Robots after expanding the swarm layout, if any.
    pub fn robot_configs(&self) -> Vec<RobotConfig> {
        let Some(l) = &self.swarm else {
            return self.robots.clone();
        };
        let template = self.robots.first().cloned().unwrap_or_default();
        let mut rng = stream(self.seed, SERVER, StreamKind::Scenario);
        (0..l.count)
            .map(|i| {
                let theta = if l.heading_max > l.heading_min {
                    rng.random_range(l.heading_min..l.heading_max)
                } else {
                    l.heading_min
                };
                RobotConfig {
                    id: i,
                    initial: Posture::new(template.initial.x + l.spacing_mm * i as f64, template.initial.y, theta),
                    ..template.clone()
                }
            })
            .collect()
    }

    pub fn ekf_config(&self) -> EkfConfig {
        self.ekf.clone().unwrap_or_else(|| {
            let r = self.robots.first().cloned().unwrap_or_default();
            EkfConfig::derived(&r.noise, &r.geometry, &r.rates, self.estimation.fixed_dt_s)
        })
    }

    /// SHA-256 of the canonical JSON form (sorted keys).
    pub fn digest(&self) -> String {
        let v = serde_json::to_value(self).expect("scenario serializes");
        let text = serde_json::to_string(&v).expect("json value serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
