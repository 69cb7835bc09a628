//! SVG renders of traces and force fields.
//!
//! Drawing happens inside a group whose transform maps world meters to
//! pixels, so every coordinate in the file is in world units. Arrows and
//! polylines also carry their raw data as `data-*` attributes.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arena::{Color, FieldGeometry, Rect, Team};
use crate::fields::{force_grid, FieldError, ForceRecord};
use crate::schemas::{
    behavior_target, schema_force, Behavior, RobotView, Role, SchemaError, SchemaParams,
    SensedAttractor, WanderState,
};
use crate::vec2::{KinematicState, Vec2};
use crate::world::config::{FieldConfig, ScenarioKind, SCHEMA_VERSION};
use crate::world::TickRecord;

const PX_PER_M: f64 = 30.0;
const MARGIN_PX: f64 = 20.0;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("snapshot parse error: {0}")]
    Parse(String),
    #[error("invalid snapshot: {0}")]
    Invalid(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

fn state_color(state: &str) -> &'static str {
    match state {
        "OFF" => "#888888",
        "WANDER" => "#2ca02c",
        "ACQUIRE_RED" | "DELIVER_RED" => "#d62728",
        "ACQUIRE_BLUE" | "DELIVER_BLUE" => "#1f77b4",
        "GO_TO_BALL" => "#ff7f0e",
        "BEHIND_BALL" => "#9467bd",
        "DEFEND" => "#8c564b",
        _ => "#000000",
    }
}

fn team_color(c: Color) -> &'static str {
    match c {
        Color::Red => "#d62728",
        Color::Blue => "#1f77b4",
    }
}

struct Canvas {
    out: String,
}

impl Canvas {
    fn new(width: f64, height: f64, title: &str) -> Self {
        let (w, h) = (width * PX_PER_M + 2.0 * MARGIN_PX, height * PX_PER_M + 2.0 * MARGIN_PX);
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" data-field-width="{width}" data-field-height="{height}">"#
        );
        let _ = writeln!(out, "<title>{title}</title>");
        let _ = writeln!(
            out,
            r#"<g id="world" transform="translate({MARGIN_PX} {}) scale({PX_PER_M} -{PX_PER_M})" fill="none" stroke-linecap="round">"#,
            h - MARGIN_PX
        );
        let _ = writeln!(
            out,
            r##"<rect id="axes" x="0" y="0" width="{width}" height="{height}" stroke="#444444" stroke-width="1" vector-effect="non-scaling-stroke"/>"##
        );
        Self { out }
    }

    fn line(&mut self, attrs: &str) {
        let _ = writeln!(self.out, "{attrs}");
    }

    fn finish(mut self) -> String {
        self.out.push_str("</g>\n</svg>\n");
        self.out
    }
}

fn draw_geometry(c: &mut Canvas, g: &FieldGeometry, bin_radius: f64) {
    for (color, p) in &g.bins {
        c.line(&format!(
            r#"<circle class="bin" data-color="{color}" cx="{}" cy="{}" r="{bin_radius}" stroke="{}" stroke-width="2" vector-effect="non-scaling-stroke"/>"#,
            p.x,
            p.y,
            team_color(*color)
        ));
    }
    for (team, seg) in &g.goals {
        c.line(&format!(
            r#"<line class="goal" data-team="{team}" x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="5" vector-effect="non-scaling-stroke"/>"#,
            seg.a.x,
            seg.a.y,
            seg.b.x,
            seg.b.y,
            team_color(if *team == Team::Red { Color::Red } else { Color::Blue })
        ));
    }
}

/// Per-robot polylines, split into one segment per contiguous run of the
/// same FSM state. An empty trace yields the axes only.
pub fn trajectory_svg(trace: &[TickRecord], bin_radius: f64) -> String {
    let meta = trace.first().and_then(|r| r.meta.as_ref());
    let (w, h) = meta.map_or((20.0, 20.0), |m| (m.geometry.width, m.geometry.height));
    let mut c = Canvas::new(w, h, "trajectories");
    if let Some(m) = meta {
        draw_geometry(&mut c, &m.geometry, bin_radius);
        for a in &m.attractors {
            c.line(&format!(
                r#"<circle class="attractor" data-id="{}" data-color="{}" cx="{}" cy="{}" r="0.12" fill="{}"/>"#,
                a.id,
                a.color,
                a.x,
                a.y,
                team_color(a.color)
            ));
        }
    }
    let robots = trace.first().map_or(0, |r| r.robots.len());
    for i in 0..robots {
        let mut start = 0;
        while start < trace.len() {
            let state = &trace[start].robots[i].state;
            let mut end = start;
            while end + 1 < trace.len() && trace[end + 1].robots[i].state == *state {
                end += 1;
            }
            // Segments share their boundary point so the path stays connected.
            let last = (end + 1).min(trace.len() - 1);
            let points: Vec<String> = trace[start..=last]
                .iter()
                .map(|r| format!("{},{}", r.robots[i].x, r.robots[i].y))
                .collect();
            c.line(&format!(
                r#"<polyline class="trajectory" data-robot="{}" data-state="{state}" data-from-tick="{}" points="{}" stroke="{}" stroke-width="2" vector-effect="non-scaling-stroke"/>"#,
                trace[start].robots[i].id,
                trace[start].tick,
                points.join(" "),
                state_color(state)
            ));
            start = end + 1;
        }
    }
    c.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntitySpec {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub vx: f64,
    #[serde(default)]
    pub vy: f64,
}

impl EntitySpec {
    pub fn state(&self) -> KinematicState {
        KinematicState::new(Vec2::new(self.x, self.y), Vec2::new(self.vx, self.vy))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttractorSpec {
    pub color: Color,
    pub x: f64,
    pub y: f64,
}

fn default_grid() -> usize {
    24
}

/// A frozen scene for force-field plots: one robot executing `behavior`
/// among the listed entities. Arrows show the force the robot would feel at
/// each grid cell center with its velocity unchanged. The random noise term
/// of goal-directed behaviors has no spatial structure and is left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcefieldSnapshot {
    pub schema_version: u32,
    pub kind: ScenarioKind,
    pub behavior: String,
    #[serde(default = "default_team")]
    pub team: Team,
    pub role: Role,
    /// Cells along the longer side of the window.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Plotted region; the whole field when absent.
    #[serde(default)]
    pub window: Option<Rect>,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub schema: SchemaParams,
    pub robot: EntitySpec,
    #[serde(default)]
    pub ball: Option<EntitySpec>,
    #[serde(default)]
    pub teammates: Vec<EntitySpec>,
    #[serde(default)]
    pub opponents: Vec<EntitySpec>,
    #[serde(default)]
    pub attractors: Vec<AttractorSpec>,
    #[serde(default)]
    pub wander_seed: u64,
}

fn default_team() -> Team {
    Team::Red
}

/// Force at a probe position, plus the behavior's attraction target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeForce {
    pub at: Vec2,
    pub force: Vec2,
    pub target: Option<Vec2>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forcefield {
    pub cells: Vec<ForceRecord>,
    pub robot: ProbeForce,
    pub nx: usize,
    pub ny: usize,
    pub window: Rect,
}

impl ForcefieldSnapshot {
    pub fn from_toml_str(text: &str) -> Result<Self, PlotError> {
        let s: Self = toml::from_str(text).map_err(|e| PlotError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PlotError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| PlotError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), PlotError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(PlotError::Invalid(format!("unsupported schema_version {}", self.schema_version)));
        }
        self.behavior.parse::<Behavior>()?;
        self.schema.validate().map_err(PlotError::Invalid)?;
        if !(self.grid >= 1 && self.grid <= 1000) {
            return Err(PlotError::Invalid("grid must be between 1 and 1000".into()));
        }
        if !(self.field.width > 0.0 && self.field.height > 0.0) {
            return Err(PlotError::Invalid("field dimensions must be positive".into()));
        }
        let g = self.geometry();
        let window = self.window();
        if !(window.max.x > window.min.x && window.max.y > window.min.y) {
            return Err(PlotError::Invalid("window must have positive extent".into()));
        }
        if !g.contains(self.robot.state().p) {
            return Err(PlotError::Invalid("robot lies outside the field".into()));
        }
        Ok(())
    }

    pub fn geometry(&self) -> FieldGeometry {
        crate::world::config::ScenarioConfig {
            schema_version: SCHEMA_VERSION,
            kind: self.kind,
            field: self.field.clone(),
            sim: Default::default(),
            attractors: Default::default(),
            schema: self.schema.clone(),
            robots: Vec::new(),
        }
        .geometry()
    }

    pub fn window(&self) -> Rect {
        self.window.unwrap_or(Rect {
            min: Vec2::ZERO,
            max: Vec2::new(self.field.width, self.field.height),
        })
    }

    fn view_at<'a>(&self, geometry: &'a FieldGeometry, p: Vec2) -> RobotView<'a> {
        let me = KinematicState::new(p, self.robot.state().v);
        let mut view = RobotView::empty(me, self.team, self.role, geometry);
        view.ball = self.ball.map(|b| b.state());
        view.teammates = self.teammates.iter().map(EntitySpec::state).collect();
        view.opponents = self.opponents.iter().map(EntitySpec::state).collect();
        view.sensed_attractors = self
            .attractors
            .iter()
            .map(|a| SensedAttractor { color: a.color, position: Vec2::new(a.x, a.y), claimed: false })
            .collect();
        view
    }

    /// Force the robot feels at `p`.
    pub fn force_at(&self, geometry: &FieldGeometry, p: Vec2) -> Result<Vec2, SchemaError> {
        let view = self.view_at(geometry, p);
        let mut wander = WanderState::new(crate::world::rng_stream(self.wander_seed, 1));
        let params = SchemaParams { noise_gain: 0.0, ..self.schema.clone() };
        schema_force(&self.behavior, &view, &params, &mut wander)
    }

    /// Samples the field on the grid and at the robot itself.
    pub fn evaluate(&self, grid_override: Option<usize>) -> Result<Forcefield, PlotError> {
        let geometry = self.geometry();
        let window = self.window();
        let n = grid_override.unwrap_or(self.grid).max(1);
        let (ww, wh) = (window.max.x - window.min.x, window.max.y - window.min.y);
        let cell = ww.max(wh) / n as f64;
        let nx = ((ww / cell).round() as usize).max(1);
        let ny = ((wh / cell).round() as usize).max(1);
        let cells = force_grid(window.min, window.max, nx, ny, |p| {
            self.force_at(&geometry, p).map_err(|e| match e {
                SchemaError::Field(f) => f,
                other => FieldError::InvalidParams(other.to_string()),
            })
        });
        let p = self.robot.state().p;
        let view = self.view_at(&geometry, p);
        let behavior: Behavior = self.behavior.parse()?;
        let robot = ProbeForce {
            at: p,
            force: self.force_at(&geometry, p)?,
            target: behavior_target(behavior, &view, &self.schema).map(|t| t.p),
        };
        Ok(Forcefield { cells, robot, nx, ny, window })
    }
}

fn arrow(c: &mut Canvas, class: &str, at: Vec2, f: Vec2, len: f64, stroke: &str, width: f64) {
    let tip = at + f.normalized().map_or(Vec2::ZERO, |d| d * len);
    let head = f.normalized().map(|d| {
        let back = d * (-0.3 * len);
        let side = d.perp() * (0.15 * len);
        (tip + back + side, tip + back - side)
    });
    let mut path = format!("M{} {} L{} {}", at.x, at.y, tip.x, tip.y);
    if let Some((l, r)) = head {
        let _ = write!(path, " M{} {} L{} {} L{} {}", l.x, l.y, tip.x, tip.y, r.x, r.y);
    }
    c.line(&format!(
        r#"<path class="{class}" data-x="{}" data-y="{}" data-fx="{}" data-fy="{}" d="{path}" stroke="{stroke}" stroke-width="{width}" vector-effect="non-scaling-stroke"/>"#,
        at.x, at.y, f.x, f.y
    ));
}

/// One arrow per grid cell, scaled by magnitude relative to the strongest
/// cell, plus a highlighted arrow at the robot.
pub fn forcefield_svg(snapshot: &ForcefieldSnapshot, field: &Forcefield) -> String {
    let geometry = snapshot.geometry();
    let mut c = Canvas::new(geometry.width, geometry.height, "force field");
    draw_geometry(&mut c, &geometry, snapshot.schema.bin_radius);
    let w = field.window;
    c.line(&format!(
        r##"<rect id="window" x="{}" y="{}" width="{}" height="{}" stroke="#bbbbbb" stroke-dasharray="4 3" vector-effect="non-scaling-stroke"/>"##,
        w.min.x,
        w.min.y,
        w.max.x - w.min.x,
        w.max.y - w.min.y
    ));
    let cell = ((w.max.x - w.min.x) / field.nx as f64).min((w.max.y - w.min.y) / field.ny as f64);
    let fmax = field.cells.iter().map(|r| Vec2::new(r.fx, r.fy).norm()).fold(0.0, f64::max);
    for r in &field.cells {
        let f = Vec2::new(r.fx, r.fy);
        let len = if fmax > 0.0 { 0.9 * cell * (f.norm() / fmax).sqrt() } else { 0.0 };
        arrow(&mut c, "arrow", Vec2::new(r.x, r.y), f, len, "#333333", 1.0);
    }
    for (class, list, color) in [
        ("teammate", &snapshot.teammates, "#2ca02c"),
        ("opponent", &snapshot.opponents, "#1f77b4"),
    ] {
        for e in list {
            c.line(&format!(
                r#"<circle class="{class}" cx="{}" cy="{}" r="0.2" fill="{color}"/>"#,
                e.x, e.y
            ));
        }
    }
    for a in &snapshot.attractors {
        c.line(&format!(
            r#"<circle class="attractor" data-color="{}" cx="{}" cy="{}" r="0.12" fill="{}"/>"#,
            a.color,
            a.x,
            a.y,
            team_color(a.color)
        ));
    }
    if let Some(b) = &snapshot.ball {
        c.line(&format!(
            r##"<circle id="ball" cx="{}" cy="{}" r="0.12" fill="#ff7f0e" data-x="{}" data-y="{}"/>"##,
            b.x, b.y, b.x, b.y
        ));
    }
    if let Some(t) = field.robot.target {
        c.line(&format!(
            r##"<circle id="target" cx="{}" cy="{}" r="0.1" stroke="#9467bd" stroke-width="2" vector-effect="non-scaling-stroke" data-x="{}" data-y="{}"/>"##,
            t.x, t.y, t.x, t.y
        ));
    }
    let p = field.robot.at;
    c.line(&format!(r##"<circle id="robot" cx="{}" cy="{}" r="0.2" fill="#d62728"/>"##, p.x, p.y));
    arrow(&mut c, "robot-force", p, field.robot.force, 1.5 * cell.max(0.5), "#d62728", 3.0);
    c.finish()
}
