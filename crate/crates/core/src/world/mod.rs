//! Discrete-time multi-robot simulation.
//!
//! Each tick every robot, in id order, perceives a snapshot of the world
//! taken before the tick, fires at most one transition of its assemblage and
//! computes the steering force of its (new) state. Forces are then integrated
//! with clamped acceleration and speed, after which grippers, bins, the ball
//! and goals are resolved.
//!
//! Random streams derive from a single master seed: stream 0 places
//! attractors, stream `k + 1` drives the wander heading of robot `k`.

pub mod config;
pub mod metrics;
pub mod trace;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arena::{Color, FieldGeometry, Team};
use crate::fsm::{step_fsm_at, Fsm, StepRecord};
use crate::schemas::{
    assemblage_for_role, evaluate_releasers, schema_force, Lifecycle, RobotView, Role,
    SchemaError, SensedAttractor, WanderState,
};
use crate::vec2::{KinematicState, Vec2};

pub use config::{ConfigError, ScenarioConfig, ScenarioKind};
pub use metrics::{compute_metrics, Metrics};
pub use trace::{read_trace, write_trace, TickRecord, TraceError, TraceMeta};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("robot {robot}: {source}")]
    Schema { robot: u32, source: SchemaError },
    #[error("robot {robot} in state {state} has no behavior")]
    UnknownState { robot: u32, state: u32 },
}

/// Generator for one of the independent streams of a master seed.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "robot", rename_all = "snake_case")]
pub enum AttractorStatus {
    Free,
    Held(u32),
    Delivered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attractor {
    pub id: u32,
    pub color: Color,
    pub position: Vec2,
    pub status: AttractorStatus,
}

#[derive(Debug, Clone)]
pub struct Robot {
    pub id: u32,
    pub team: Team,
    pub role: Role,
    pub kin: KinematicState,
    pub state: u32,
    /// Id of the held attractor.
    pub gripper: Option<u32>,
    pub wander: WanderState,
    /// Set when the robot kicked the ball during the last integration.
    pub hit_latch: bool,
}

impl Robot {
    pub fn fsm(&self) -> &'static Fsm {
        assemblage_for_role(self.role)
    }

    pub fn state_label(&self) -> &'static str {
        self.fsm().label(self.state).unwrap_or("?")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Lifecycle { event: Lifecycle },
    Transition { robot: u32, from: String, releaser: String, to: String },
    Grasp { robot: u32, attractor: u32, color: Color },
    Deliver { robot: u32, attractor: u32, color: Color },
    HitBall { robot: u32, normal_before: f64, normal_after: f64 },
    Goal { scorer: Team },
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub tick: u64,
    pub seed: u64,
    pub config: ScenarioConfig,
    pub geometry: FieldGeometry,
    pub robots: Vec<Robot>,
    pub attractors: Vec<Attractor>,
    pub ball: Option<KinematicState>,
    pub score: BTreeMap<Team, u32>,
    /// Lifecycle event delivered to every robot on the next step.
    pub pending_lifecycle: Option<Lifecycle>,
    /// Events raised by the most recent step.
    pub events: Vec<Event>,
}

fn place_attractors(cfg: &ScenarioConfig, geometry: &FieldGeometry, seed: u64) -> Result<Vec<Attractor>, ConfigError> {
    let a = &cfg.attractors;
    let mut placed: Vec<Attractor> = a
        .fixed
        .iter()
        .enumerate()
        .map(|(i, f)| Attractor {
            id: i as u32,
            color: f.color,
            position: Vec2::new(f.x, f.y),
            status: AttractorStatus::Free,
        })
        .collect();
    if a.red + a.blue == 0 {
        return Ok(placed);
    }
    let (lo_x, hi_x) = (a.wall_margin, geometry.width - a.wall_margin);
    let (lo_y, hi_y) = (a.wall_margin, geometry.height - a.wall_margin);
    if lo_x >= hi_x || lo_y >= hi_y {
        return Err(ConfigError::Infeasible("wall margin leaves no room for attractors".into()));
    }
    let keep_out = cfg.schema.bin_radius + a.bin_clearance;
    let mut rng = rng_stream(seed, 0);
    let colors = std::iter::repeat_n(Color::Red, a.red as usize).chain(std::iter::repeat_n(Color::Blue, a.blue as usize));
    for color in colors {
        let mut spot = None;
        for _ in 0..a.max_attempts {
            let p = Vec2::new(rng.random_range(lo_x..hi_x), rng.random_range(lo_y..hi_y));
            let clear_of_bins = geometry.bins.values().all(|b| b.distance(p) >= keep_out);
            let clear_of_others = placed.iter().all(|o| o.position.distance(p) >= a.min_separation);
            if clear_of_bins && clear_of_others {
                spot = Some(p);
                break;
            }
        }
        let Some(position) = spot else {
            return Err(ConfigError::Infeasible(format!(
                "could not place attractor {} after {} attempts",
                placed.len(),
                a.max_attempts
            )));
        };
        placed.push(Attractor { id: placed.len() as u32, color, position, status: AttractorStatus::Free });
    }
    Ok(placed)
}

/// Builds the initial world. All robots start in their machine's start state
/// and receive `on` on the first step.
pub fn init_world(config: &ScenarioConfig, seed: u64) -> Result<WorldState, ConfigError> {
    config.validate()?;
    let geometry = config.geometry();
    let attractors = match config.kind {
        ScenarioKind::Foraging => place_attractors(config, &geometry, seed)?,
        ScenarioKind::Soccer => Vec::new(),
    };
    let robots = config
        .robots
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let id = i as u32;
            Robot {
                id,
                team: spec.team,
                role: spec.role,
                kin: KinematicState::at_rest(Vec2::new(spec.x, spec.y)),
                state: assemblage_for_role(spec.role).start,
                gripper: None,
                wander: WanderState::new(rng_stream(seed, u64::from(id) + 1)),
                hit_latch: false,
            }
        })
        .collect();
    let (ball, score) = match config.kind {
        ScenarioKind::Soccer => (
            Some(KinematicState::at_rest(geometry.center())),
            Team::ALL.into_iter().map(|t| (t, 0)).collect(),
        ),
        ScenarioKind::Foraging => (None, BTreeMap::new()),
    };
    Ok(WorldState {
        tick: 0,
        seed,
        config: config.clone(),
        geometry,
        robots,
        attractors,
        ball,
        score,
        pending_lifecycle: Some(Lifecycle::On),
        events: Vec::new(),
    })
}

impl WorldState {
    /// Whether the run has reached its natural end: every attractor is
    /// delivered and no robot is still in a delivery state.
    pub fn is_complete(&self) -> bool {
        self.config.kind == ScenarioKind::Foraging
            && self.attractors.iter().all(|a| a.status == AttractorStatus::Delivered)
            && self.robots.iter().all(|r| !r.state_label().starts_with("DELIVER_"))
    }

    pub fn delivered(&self) -> usize {
        self.attractors.iter().filter(|a| a.status == AttractorStatus::Delivered).count()
    }

    /// Perception of robot `i` given the current state.
    pub fn view_of(&self, i: usize) -> RobotView<'_> {
        let me = &self.robots[i];
        let range = self.config.schema.sensor_range;
        let p = me.kin.p;
        let mut view = RobotView::empty(me.kin, me.team, me.role, &self.geometry);
        view.sensed_attractors = self
            .attractors
            .iter()
            .filter(|a| a.status != AttractorStatus::Delivered && a.position.distance(p) <= range)
            .map(|a| SensedAttractor {
                color: a.color,
                position: a.position,
                claimed: matches!(a.status, AttractorStatus::Held(_)),
            })
            .collect();
        view.gripper = me.gripper.map(|id| self.attractors[id as usize].color);
        view.ball = self.ball.filter(|b| b.p.distance(p) <= range);
        for other in &self.robots {
            if other.id == me.id || other.kin.p.distance(p) > range {
                continue;
            }
            if other.team == me.team {
                view.teammates.push(other.kin);
            } else {
                view.opponents.push(other.kin);
            }
        }
        view.hit_ball = me.hit_latch;
        view.lifecycle = self.pending_lifecycle;
        view
    }

    /// Advances the world by one tick.
    pub fn step(&mut self) -> Result<(), SimError> {
        let mut events = Vec::new();
        if let Some(l) = self.pending_lifecycle {
            events.push(Event::Lifecycle { event: l });
        }

        // Decide with the pre-step snapshot.
        let mut decisions: Vec<(Option<StepRecord>, Vec2)> = Vec::with_capacity(self.robots.len());
        for i in 0..self.robots.len() {
            let view = self.view_of(i);
            let robot = &self.robots[i];
            let fsm = robot.fsm();
            let active = evaluate_releasers(fsm, &view, &self.config.schema, robot.state);
            let record = step_fsm_at(fsm, robot.state, &active, self.tick)
                .map_err(|_| SimError::UnknownState { robot: robot.id, state: robot.state })?;
            let label = fsm.label(record.to).unwrap_or("?");
            let mut wander = robot.wander.clone();
            let force = schema_force(label, &view, &self.config.schema, &mut wander)
                .map_err(|source| SimError::Schema { robot: robot.id, source })?;
            drop(view);
            self.robots[i].wander = wander;
            decisions.push((record.fired.is_some().then_some(record), force));
        }
        self.pending_lifecycle = None;

        let sim = self.config.sim.clone();
        for (robot, (record, force)) in self.robots.iter_mut().zip(decisions) {
            if let Some(rec) = record {
                let fsm = robot.fsm();
                events.push(Event::Transition {
                    robot: robot.id,
                    from: fsm.label(rec.from).unwrap_or("?").to_string(),
                    releaser: rec.fired.map(|r| r.as_str().to_string()).unwrap_or_default(),
                    to: fsm.label(rec.to).unwrap_or("?").to_string(),
                });
                robot.state = rec.to;
            }
            robot.hit_latch = false;
            let accel = force.clamp_norm(sim.max_accel);
            let mut v = (robot.kin.v + accel * sim.dt).clamp_norm(sim.max_speed);
            let mut p = robot.kin.p + v * sim.dt;
            confine(&mut p, &mut v, &self.geometry, false);
            robot.kin = KinematicState::new(p, v);
        }

        self.resolve_grippers(&mut events);
        if self.ball.is_some() {
            self.advance_ball(&mut events);
        }
        self.tick += 1;
        self.events = events;
        Ok(())
    }

    fn resolve_grippers(&mut self, events: &mut Vec<Event>) {
        let grip = self.config.schema.grip_radius;
        let bin_radius = self.config.schema.bin_radius;
        for robot in &mut self.robots {
            let label = robot.state_label();
            match robot.gripper {
                Some(held) => {
                    let a = &mut self.attractors[held as usize];
                    a.position = robot.kin.p;
                    let target_bin = match label {
                        "DELIVER_RED" => Some(Color::Red),
                        "DELIVER_BLUE" => Some(Color::Blue),
                        _ => None,
                    };
                    if target_bin == Some(a.color)
                        && self.geometry.bins.get(&a.color).is_some_and(|b| b.distance(robot.kin.p) <= bin_radius)
                    {
                        a.status = AttractorStatus::Delivered;
                        robot.gripper = None;
                        events.push(Event::Deliver { robot: robot.id, attractor: a.id, color: a.color });
                    }
                }
                None => {
                    let color = match label {
                        "ACQUIRE_RED" => Color::Red,
                        "ACQUIRE_BLUE" => Color::Blue,
                        _ => continue,
                    };
                    let p = robot.kin.p;
                    let best = self
                        .attractors
                        .iter()
                        .filter(|a| a.status == AttractorStatus::Free && a.color == color)
                        .map(|a| (a.position.distance(p), a.id))
                        .filter(|(d, _)| *d <= grip)
                        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    if let Some((_, id)) = best {
                        let a = &mut self.attractors[id as usize];
                        a.status = AttractorStatus::Held(robot.id);
                        a.position = p;
                        robot.gripper = Some(id);
                        events.push(Event::Grasp { robot: robot.id, attractor: id, color });
                    }
                }
            }
        }
    }

    fn advance_ball(&mut self, events: &mut Vec<Event>) {
        let sim = &self.config.sim;
        let Some(mut ball) = self.ball else { return };
        ball.p += ball.v * sim.dt;

        let reach = sim.robot_radius + sim.ball_radius;
        for robot in &mut self.robots {
            let d = ball.p - robot.kin.p;
            let dist = d.norm();
            if dist > reach {
                continue;
            }
            let Some(n) = d.normalized() else { continue };
            let u = robot.kin.v.dot(n);
            let before = ball.v.dot(n);
            if u > 0.0 && u > before {
                let after = sim.kick_restitution * u;
                ball.v = n * after;
                robot.hit_latch = true;
                events.push(Event::HitBall { robot: robot.id, normal_before: before, normal_after: after });
            } else if before < 0.0 {
                ball.v -= n * (2.0 * before);
            }
            ball.p = robot.kin.p + n * reach;
        }

        ball.v = ball.v * (1.0 - sim.ball_friction * sim.dt);

        let scorer = if ball.p.x <= 0.0 && self.geometry.goals[&Team::Red].spans(ball.p.y) {
            Some(Team::Blue)
        } else if ball.p.x >= self.geometry.width && self.geometry.goals[&Team::Blue].spans(ball.p.y) {
            Some(Team::Red)
        } else {
            None
        };
        match scorer {
            Some(team) => {
                *self.score.entry(team).or_insert(0) += 1;
                events.push(Event::Goal { scorer: team });
                ball = KinematicState::at_rest(self.geometry.center());
            }
            None => confine(&mut ball.p, &mut ball.v, &self.geometry, true),
        }
        self.ball = Some(ball);
    }

    /// Steps until the run completes or the step limit is reached, returning
    /// the record of every tick including the initial one.
    pub fn run(&mut self) -> Result<Vec<TickRecord>, SimError> {
        let mut records = vec![TickRecord::capture(self, true)];
        while self.tick < self.config.sim.step_limit && !self.is_complete() {
            self.step()?;
            records.push(TickRecord::capture(self, false));
        }
        Ok(records)
    }
}

/// Projects `p` into the field. Normal velocity into a wall is zeroed, or
/// reflected when `bounce` is set.
fn confine(p: &mut Vec2, v: &mut Vec2, g: &FieldGeometry, bounce: bool) {
    let fix = |x: &mut f64, vx: &mut f64, hi: f64| {
        if *x < 0.0 {
            *x = 0.0;
            if *vx < 0.0 {
                *vx = if bounce { -*vx } else { 0.0 };
            }
        } else if *x > hi {
            *x = hi;
            if *vx > 0.0 {
                *vx = if bounce { -*vx } else { 0.0 };
            }
        }
    };
    fix(&mut p.x, &mut v.x, g.width);
    fix(&mut p.y, &mut v.y, g.height);
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub trace: Vec<TickRecord>,
    pub metrics: Metrics,
    pub final_state: WorldState,
}

/// Runs one seed of a scenario to completion.
pub fn run_simulation(config: &ScenarioConfig, seed: u64) -> Result<SimulationOutput, SimError> {
    let mut world = init_world(config, seed)?;
    let trace = world.run()?;
    let metrics = compute_metrics(&trace);
    Ok(SimulationOutput { trace, metrics, final_state: world })
}
