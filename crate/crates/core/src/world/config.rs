//! Scenario configuration, read from TOML.
//!
//! ```toml
//! schema_version = 1
//! kind = "foraging"
//!
//! [field]
//! width = 20.0
//! height = 20.0
//!
//! [attractors]
//! red = 5
//! blue = 5
//!
//! [[robots]]
//! role = "forager"
//! x = 9.0
//! y = 8.0
//! ```
//!
//! Every other key falls back to the defaults in this module.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arena::{Color, FieldGeometry, Team};
use crate::schemas::{Role, SchemaParams};
use crate::vec2::Vec2;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("infeasible placement: {0}")]
    Infeasible(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Foraging,
    Soccer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub width: f64,
    pub height: f64,
    /// Soccer goal mouth width.
    pub goal_width: f64,
    /// Defaults to the field center.
    pub home_base: Option<Vec2>,
    /// Defaults to one meter left of the home base.
    pub red_bin: Option<Vec2>,
    /// Defaults to one meter right of the home base.
    pub blue_bin: Option<Vec2>,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self { width: 20.0, height: 20.0, goal_width: 4.0, home_base: None, red_bin: None, blue_bin: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub step_limit: u64,
    pub max_speed: f64,
    pub max_accel: f64,
    /// Ball velocity decays by `(1 − ball_friction·dt)` per step.
    pub ball_friction: f64,
    pub kick_restitution: f64,
    pub robot_radius: f64,
    pub ball_radius: f64,
    /// A team possesses the ball when its robot is nearest and within this distance.
    pub possession_radius: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            step_limit: 50_000,
            max_speed: 2.0,
            max_accel: 4.0,
            ball_friction: 0.8,
            kick_restitution: 1.2,
            robot_radius: 0.2,
            ball_radius: 0.1,
            possession_radius: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedAttractor {
    pub color: Color,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttractorConfig {
    /// Randomly placed red attractors.
    pub red: u32,
    /// Randomly placed blue attractors.
    pub blue: u32,
    pub min_separation: f64,
    /// Extra distance beyond the bin radius kept free of random attractors.
    pub bin_clearance: f64,
    pub wall_margin: f64,
    pub max_attempts: u32,
    /// Attractors at explicit positions, placed before the random ones.
    pub fixed: Vec<FixedAttractor>,
}

impl Default for AttractorConfig {
    fn default() -> Self {
        Self {
            red: 0,
            blue: 0,
            min_separation: 0.5,
            bin_clearance: 1.0,
            wall_margin: 1.0,
            max_attempts: 1000,
            fixed: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSpec {
    pub role: Role,
    #[serde(default = "default_team")]
    pub team: Team,
    pub x: f64,
    pub y: f64,
}

fn default_team() -> Team {
    Team::Red
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub kind: ScenarioKind,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub attractors: AttractorConfig,
    #[serde(default)]
    pub schema: SchemaParams,
    pub robots: Vec<RobotSpec>,
}

fn positive(name: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("{name} must be positive, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Invalid(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        positive("field.width", self.field.width)?;
        positive("field.height", self.field.height)?;
        positive("sim.dt", self.sim.dt)?;
        positive("sim.max_speed", self.sim.max_speed)?;
        positive("sim.max_accel", self.sim.max_accel)?;
        positive("sim.robot_radius", self.sim.robot_radius)?;
        positive("sim.ball_radius", self.sim.ball_radius)?;
        positive("sim.kick_restitution", self.sim.kick_restitution)?;
        positive("sim.possession_radius", self.sim.possession_radius)?;
        if !(self.sim.ball_friction >= 0.0 && self.sim.ball_friction * self.sim.dt <= 1.0) {
            return Err(ConfigError::Invalid("sim.ball_friction must satisfy 0 <= μ·dt <= 1".into()));
        }
        self.schema.validate().map_err(ConfigError::Invalid)?;
        if self.robots.is_empty() {
            return Err(ConfigError::Invalid("robot roster is empty".into()));
        }
        let geometry = self.geometry();
        for (i, r) in self.robots.iter().enumerate() {
            if !geometry.contains(Vec2::new(r.x, r.y)) {
                return Err(ConfigError::Invalid(format!("robot {i} starts outside the field")));
            }
            let ok = match self.kind {
                ScenarioKind::Foraging => r.role == Role::Forager,
                ScenarioKind::Soccer => r.role.is_soccer(),
            };
            if !ok {
                return Err(ConfigError::Invalid(format!(
                    "role {} does not belong in a {:?} scenario",
                    r.role, self.kind
                )));
            }
        }
        match self.kind {
            ScenarioKind::Foraging => {
                for (name, p) in geometry.bins.iter().map(|(c, p)| (c.as_str(), *p)).chain([("home_base", geometry.home_base)]) {
                    if !geometry.contains(p) {
                        return Err(ConfigError::Invalid(format!("{name} lies outside the field")));
                    }
                }
                for a in &self.attractors.fixed {
                    if !geometry.contains(Vec2::new(a.x, a.y)) {
                        return Err(ConfigError::Invalid("fixed attractor outside the field".into()));
                    }
                }
            }
            ScenarioKind::Soccer => {
                positive("field.goal_width", self.field.goal_width)?;
                if self.field.goal_width > self.field.height {
                    return Err(ConfigError::Invalid("goal wider than the field".into()));
                }
                if self.schema.behind_offset <= self.sim.ball_radius {
                    return Err(ConfigError::Invalid(
                        "schema.behind_offset must exceed sim.ball_radius".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> FieldGeometry {
        let f = &self.field;
        match self.kind {
            ScenarioKind::Foraging => {
                let home = f.home_base.unwrap_or(Vec2::new(f.width / 2.0, f.height / 2.0));
                FieldGeometry::foraging(
                    f.width,
                    f.height,
                    home,
                    f.red_bin.unwrap_or(home - Vec2::new(1.0, 0.0)),
                    f.blue_bin.unwrap_or(home + Vec2::new(1.0, 0.0)),
                )
            }
            ScenarioKind::Soccer => FieldGeometry::soccer(f.width, f.height, f.goal_width),
        }
    }

    /// Four foragers near the bins of a 20×20 field with five attractors
    /// of each color.
    pub fn foraging_demo() -> Self {
        let robots = [(9.0, 8.0), (11.0, 8.0), (9.0, 12.0), (11.0, 12.0)]
            .into_iter()
            .map(|(x, y)| RobotSpec { role: Role::Forager, team: Team::Red, x, y })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            kind: ScenarioKind::Foraging,
            field: FieldConfig::default(),
            sim: SimConfig::default(),
            attractors: AttractorConfig { red: 5, blue: 5, ..AttractorConfig::default() },
            schema: SchemaParams::default(),
            robots,
        }
    }

    /// Five-a-side on a 24×16 field.
    pub fn soccer_demo() -> Self {
        let (w, h) = (24.0, 16.0);
        let red = [
            (Role::GoalKeeper, 2.0, 8.0),
            (Role::OutsideRight, 6.0, 3.0),
            (Role::OutsideLeft, 6.0, 13.0),
            (Role::CenterHalf, 9.0, 8.0),
            (Role::Forward, 11.0, 6.0),
        ];
        let mut robots: Vec<RobotSpec> = red
            .iter()
            .map(|&(role, x, y)| RobotSpec { role, team: Team::Red, x, y })
            .collect();
        robots.extend(red.iter().map(|&(role, x, y)| RobotSpec {
            role,
            team: Team::Blue,
            x: w - x,
            y: h - y,
        }));
        Self {
            schema_version: SCHEMA_VERSION,
            kind: ScenarioKind::Soccer,
            field: FieldConfig { width: w, height: h, ..FieldConfig::default() },
            sim: SimConfig { step_limit: 12_000, ..SimConfig::default() },
            attractors: AttractorConfig::default(),
            schema: SchemaParams { sensor_range: 12.0, ..SchemaParams::default() },
            robots,
        }
    }
}
