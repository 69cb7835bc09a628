//! JSON-lines trace: one record per tick, the first carrying run metadata.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{ScenarioKind, SCHEMA_VERSION};
use super::{Event, WorldState};
use crate::arena::{FieldGeometry, Team};
use crate::schemas::Role;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace is empty or lacks metadata on its first record")]
    MissingMeta,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotRecord {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub state: String,
    pub gripper: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallRecord {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotMeta {
    pub id: u32,
    pub role: Role,
    pub team: Team,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorMeta {
    pub id: u32,
    pub color: crate::arena::Color,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub schema_version: u32,
    pub kind: ScenarioKind,
    pub seed: u64,
    pub dt: f64,
    pub step_limit: u64,
    pub possession_radius: f64,
    pub geometry: FieldGeometry,
    pub robots: Vec<RobotMeta>,
    /// Initial attractor layout.
    pub attractors: Vec<AttractorMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    pub robots: Vec<RobotRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ball: Option<BallRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<BTreeMap<Team, u32>>,
    #[serde(default)]
    pub events: Vec<Event>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<TraceMeta>,
}

impl TickRecord {
    pub fn capture(world: &WorldState, with_meta: bool) -> Self {
        let robots = world
            .robots
            .iter()
            .map(|r| RobotRecord {
                id: r.id,
                x: r.kin.p.x,
                y: r.kin.p.y,
                vx: r.kin.v.x,
                vy: r.kin.v.y,
                state: r.state_label().to_string(),
                gripper: r.gripper,
            })
            .collect();
        let meta = with_meta.then(|| TraceMeta {
            schema_version: SCHEMA_VERSION,
            kind: world.config.kind,
            seed: world.seed,
            dt: world.config.sim.dt,
            step_limit: world.config.sim.step_limit,
            possession_radius: world.config.sim.possession_radius,
            geometry: world.geometry.clone(),
            robots: world.robots.iter().map(|r| RobotMeta { id: r.id, role: r.role, team: r.team }).collect(),
            attractors: world
                .attractors
                .iter()
                .map(|a| AttractorMeta { id: a.id, color: a.color, x: a.position.x, y: a.position.y })
                .collect(),
        });
        Self {
            tick: world.tick,
            robots,
            ball: world.ball.map(|b| BallRecord { x: b.p.x, y: b.p.y, vx: b.v.x, vy: b.v.y }),
            score: (world.config.kind == ScenarioKind::Soccer).then(|| world.score.clone()),
            events: world.events.clone(),
            meta,
        }
    }
}

pub fn write_trace<W: Write>(records: &[TickRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Parses a trace, checking that the first record carries metadata.
pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<TickRecord>, TraceError> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TickRecord = serde_json::from_str(&line)
            .map_err(|e| TraceError::Parse { line: i + 1, message: e.to_string() })?;
        records.push(rec);
    }
    match records.first() {
        Some(r) if r.meta.is_some() => Ok(records),
        _ => Err(TraceError::MissingMeta),
    }
}
