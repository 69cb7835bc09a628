//! Run metrics derived purely from a trace, so a stored trace reproduces the
//! metrics of the run that wrote it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::ScenarioKind;
use super::trace::TickRecord;
use super::Event;
use crate::arena::{Color, Team};
use crate::schemas::Role;
use crate::vec2::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Metrics {
    Foraging {
        ticks: u64,
        total_attractors: usize,
        /// Tick at which the last attractor was delivered.
        completion_tick: Option<u64>,
        delivered: BTreeMap<Color, u32>,
        /// Path length per robot id.
        distance: BTreeMap<u32, f64>,
    },
    Soccer {
        ticks: u64,
        goals: BTreeMap<Team, u32>,
        /// Seconds each team held possession.
        possession_time: BTreeMap<Team, f64>,
        /// Fraction of ticks robots of each role spent inside their own sectors.
        sector_occupancy: BTreeMap<Role, f64>,
    },
}

/// Metrics of a trace. Panics if the first record lacks metadata, which
/// [`super::read_trace`] rules out.
pub fn compute_metrics(trace: &[TickRecord]) -> Metrics {
    let meta = trace[0].meta.as_ref().expect("first trace record carries metadata");
    let ticks = trace.last().map_or(0, |r| r.tick);
    let later = &trace[1..];
    let pos = |r: &super::trace::RobotRecord| Vec2::new(r.x, r.y);
    match meta.kind {
        ScenarioKind::Foraging => {
            let total = meta.attractors.len();
            let mut delivered: BTreeMap<Color, u32> = Color::ALL.into_iter().map(|c| (c, 0)).collect();
            let mut count = 0;
            let mut completion_tick = (total == 0).then_some(trace[0].tick);
            for rec in later {
                for e in &rec.events {
                    if let Event::Deliver { color, .. } = e {
                        *delivered.entry(*color).or_insert(0) += 1;
                        count += 1;
                        if count == total {
                            completion_tick = Some(rec.tick);
                        }
                    }
                }
            }
            let mut distance: BTreeMap<u32, f64> = meta.robots.iter().map(|r| (r.id, 0.0)).collect();
            for pair in trace.windows(2) {
                for (a, b) in pair[0].robots.iter().zip(&pair[1].robots) {
                    *distance.entry(a.id).or_insert(0.0) += pos(a).distance(pos(b));
                }
            }
            Metrics::Foraging { ticks, total_attractors: total, completion_tick, delivered, distance }
        }
        ScenarioKind::Soccer => {
            let goals = later
                .last()
                .and_then(|r| r.score.clone())
                .unwrap_or_else(|| Team::ALL.into_iter().map(|t| (t, 0)).collect());
            let mut possession_time: BTreeMap<Team, f64> = Team::ALL.into_iter().map(|t| (t, 0.0)).collect();
            let mut inside: BTreeMap<Role, (u64, u64)> = BTreeMap::new();
            for rec in later {
                if let Some(ball) = &rec.ball {
                    let b = Vec2::new(ball.x, ball.y);
                    let nearest = rec
                        .robots
                        .iter()
                        .map(|r| (pos(r).distance(b), r.id))
                        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    if let Some((d, id)) = nearest {
                        if d <= meta.possession_radius {
                            *possession_time.entry(meta.robots[id as usize].team).or_insert(0.0) += meta.dt;
                        }
                    }
                }
                for r in &rec.robots {
                    let m = &meta.robots[r.id as usize];
                    let hit = meta
                        .geometry
                        .team_sector_of(pos(r), m.team)
                        .is_ok_and(|s| m.role.assigned_sectors().contains(&s));
                    let e = inside.entry(m.role).or_insert((0, 0));
                    e.0 += u64::from(hit);
                    e.1 += 1;
                }
            }
            let mut sector_occupancy: BTreeMap<Role, f64> = meta
                .robots
                .iter()
                .map(|r| (r.role, 0.0))
                .collect();
            for (role, (hit, n)) in inside {
                sector_occupancy.insert(role, hit as f64 / n as f64);
            }
            Metrics::Soccer { ticks, goals, possession_time, sector_occupancy }
        }
    }
}
