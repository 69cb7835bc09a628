//! Motor schemas: perceptual releasers and per-behavior steering forces.
//!
//! Every behavior is a sum of potential-field schemas. All behaviors except
//! `OFF` include repulsion from nearby robots and from the four walls;
//! on top of that each behavior adds its own attraction:
//!
//! | behavior                    | attraction                                        |
//! |-----------------------------|---------------------------------------------------|
//! | `WANDER`                    | random heading, plus home-zone pull for field roles |
//! | `ACQUIRE_RED`/`ACQUIRE_BLUE`| nearest unclaimed attractor of that color         |
//! | `DELIVER_RED`/`DELIVER_BLUE`| that color's bin                                  |
//! | `GO_TO_BALL`                | the ball, matching its velocity                   |
//! | `DEFEND`                    | midpoint between ball and own goal                |
//! | `BEHIND_BALL`               | point behind the ball on the opponent-goal line   |
//!
//! Behaviors with a target also get a small random heading (`noise_gain`).
//!
//! Soccer roles own a set of sectors. Their attraction targets are clamped to
//! the region spanned by those sectors, and `ball_visible` only fires while
//! the ball is inside it.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arena::{ArenaError, Color, FieldGeometry, Sector, Team};
use crate::dsl::compile_source;
use crate::fields::{
    attractive_force, repulsion, total_force, AttractiveParams, FieldError, RepulsiveParams,
};
use crate::fsm::{Fsm, Releaser};
use crate::vec2::{KinematicState, Vec2};

pub const HOM_FOR_SOURCE: &str = include_str!("../assemblages/hom_for.asm.txt");
pub const FORWARD_SOURCE: &str = include_str!("../assemblages/forward.asm.txt");
pub const GOALKEEPER_SOURCE: &str = include_str!("../assemblages/goalkeeper.asm.txt");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemaError {
    #[error("no motor schema for state `{0}`")]
    UnknownBehavior(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Arena(#[from] ArenaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Forager,
    Forward,
    GoalKeeper,
    CenterHalf,
    OutsideLeft,
    OutsideRight,
}

impl Role {
    pub const ALL: [Role; 6] = [
        Role::Forager,
        Role::Forward,
        Role::GoalKeeper,
        Role::CenterHalf,
        Role::OutsideLeft,
        Role::OutsideRight,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Forager => "forager",
            Role::Forward => "forward",
            Role::GoalKeeper => "goal_keeper",
            Role::CenterHalf => "center_half",
            Role::OutsideLeft => "outside_left",
            Role::OutsideRight => "outside_right",
        }
    }

    pub fn is_soccer(self) -> bool {
        self != Role::Forager
    }

    /// Team-relative sectors the role is active in; empty for foragers.
    pub fn assigned_sectors(self) -> BTreeSet<Sector> {
        let cells: &[Sector] = match self {
            Role::Forager => &[],
            Role::Forward => &[(1, 1), (1, 2), (1, 3)],
            Role::OutsideLeft => &[(2, 3), (3, 3)],
            Role::OutsideRight => &[(2, 1), (3, 1)],
            Role::CenterHalf => &[(2, 2)],
            Role::GoalKeeper => &[(3, 2)],
        };
        cells.iter().copied().collect()
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = ArenaError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| ArenaError::Unknown { what: "role", value: s.into() })
    }
}

/// Compiled assemblage for a role. Field players other than the goal keeper
/// all share the forward machine.
pub fn assemblage_for_role(role: Role) -> &'static Fsm {
    static MACHINES: OnceLock<[Fsm; 3]> = OnceLock::new();
    let machines = MACHINES.get_or_init(|| {
        [HOM_FOR_SOURCE, FORWARD_SOURCE, GOALKEEPER_SOURCE]
            .map(|src| compile_source(src).expect("embedded assemblage compiles"))
    });
    match role {
        Role::Forager => &machines[0],
        Role::GoalKeeper => &machines[2],
        _ => &machines[1],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lifecycle {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensedAttractor {
    pub color: Color,
    pub position: Vec2,
    /// Held in some robot's gripper.
    pub claimed: bool,
}

/// What one robot perceives at the start of a tick.
#[derive(Debug, Clone)]
pub struct RobotView<'a> {
    pub me: KinematicState,
    pub team: Team,
    pub role: Role,
    pub sensed_attractors: Vec<SensedAttractor>,
    pub gripper: Option<Color>,
    pub ball: Option<KinematicState>,
    pub teammates: Vec<KinematicState>,
    pub opponents: Vec<KinematicState>,
    pub geometry: &'a FieldGeometry,
    pub assigned_sectors: BTreeSet<Sector>,
    /// Latched robot–ball contact from the previous integration step.
    pub hit_ball: bool,
    pub lifecycle: Option<Lifecycle>,
}

impl<'a> RobotView<'a> {
    /// A view with nothing sensed.
    pub fn empty(me: KinematicState, team: Team, role: Role, geometry: &'a FieldGeometry) -> Self {
        Self {
            me,
            team,
            role,
            sensed_attractors: Vec::new(),
            gripper: None,
            ball: None,
            teammates: Vec::new(),
            opponents: Vec::new(),
            geometry,
            assigned_sectors: role.assigned_sectors(),
            hit_ball: false,
            lifecycle: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemaParams {
    pub sensor_range: f64,
    pub grip_radius: f64,
    pub bin_radius: f64,
    pub ball_close_radius: f64,
    pub ball_near_goal_radius: f64,
    pub behind_offset: f64,
    /// Half-angle of the cone behind the ball inside which `BEHIND_BALL`
    /// switches from positioning to driving through the ball.
    pub behind_cone_deg: f64,
    pub wander_period: u32,
    pub wander_gain: f64,
    /// Scale of the home-zone pull added to `WANDER` for soccer roles.
    pub home_gain: f64,
    /// Magnitude of the random heading added to every goal-directed
    /// behavior, which lets robots escape local minima.
    pub noise_gain: f64,
    /// Soccer targets are clamped to the role's zone shrunk by this margin.
    pub zone_margin: f64,
    pub attr: AttractiveParams,
    pub rep: RepulsiveParams,
    pub wall_rep: RepulsiveParams,
    /// Ball treated as an obstacle while positioning behind it.
    pub ball_rep: RepulsiveParams,
}

impl Default for SchemaParams {
    fn default() -> Self {
        Self {
            sensor_range: 5.0,
            grip_radius: 0.3,
            bin_radius: 0.5,
            ball_close_radius: 1.0,
            ball_near_goal_radius: 2.0,
            behind_offset: 0.8,
            behind_cone_deg: 30.0,
            wander_period: 40,
            wander_gain: 2.0,
            home_gain: 1.0,
            noise_gain: 1.0,
            zone_margin: 0.5,
            attr: AttractiveParams { alpha_p: 1.0, alpha_v: 1.5, m: 2.0, n: 2.0 },
            rep: RepulsiveParams { eta: 1.0, rho_0: 0.5, a_max: 4.0, f_max: 6.0 },
            wall_rep: RepulsiveParams { eta: 0.2, rho_0: 0.3, a_max: 4.0, f_max: 8.0 },
            ball_rep: RepulsiveParams { eta: 1.0, rho_0: 1.5, a_max: 4.0, f_max: 6.0 },
        }
    }
}

impl SchemaParams {
    pub fn validate(&self) -> Result<(), String> {
        let radii = [
            ("sensor_range", self.sensor_range),
            ("grip_radius", self.grip_radius),
            ("bin_radius", self.bin_radius),
            ("ball_close_radius", self.ball_close_radius),
            ("ball_near_goal_radius", self.ball_near_goal_radius),
            ("behind_offset", self.behind_offset),
            ("behind_cone_deg", self.behind_cone_deg),
            ("wander_gain", self.wander_gain),
            ("home_gain", self.home_gain),
        ];
        for (name, v) in radii {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("schema.{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("noise_gain", self.noise_gain), ("zone_margin", self.zone_margin)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("schema.{name} must be non-negative, got {v}"));
            }
        }
        if self.wander_period == 0 {
            return Err("schema.wander_period must be at least 1".into());
        }
        self.attr.validate().map_err(|e| format!("schema.attr: {e}"))?;
        for (name, p) in [("rep", &self.rep), ("wall_rep", &self.wall_rep), ("ball_rep", &self.ball_rep)] {
            p.validate().map_err(|e| format!("schema.{name}: {e}"))?;
        }
        Ok(())
    }
}

/// Per-robot wander generator: a random unit heading held for
/// `wander_period` consecutive `WANDER` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct WanderState {
    rng: ChaCha8Rng,
    heading: Vec2,
    age: u64,
}

impl WanderState {
    pub fn new(rng: ChaCha8Rng) -> Self {
        Self { rng, heading: Vec2::ZERO, age: 0 }
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::new(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn heading(&self) -> Vec2 {
        self.heading
    }

    /// Heading for this step, resampled every `period` calls.
    pub fn next_heading(&mut self, period: u32) -> Vec2 {
        if self.age.is_multiple_of(u64::from(period.max(1))) {
            self.heading = sample_unit(&mut self.rng);
        }
        self.age += 1;
        self.heading
    }
}

/// Uniform direction by rejection from the unit disk; avoids trig so the
/// sequence is bit-identical across platforms.
fn sample_unit(rng: &mut ChaCha8Rng) -> Vec2 {
    loop {
        let v = Vec2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let r2 = v.norm_sq();
        if r2 > 1e-6 && r2 <= 1.0 {
            return v / r2.sqrt();
        }
    }
}

fn nearest_unclaimed(view: &RobotView<'_>, color: Color) -> Option<Vec2> {
    view.sensed_attractors
        .iter()
        .filter(|a| a.color == color && !a.claimed)
        .map(|a| a.position)
        .min_by(|a, b| view.me.p.distance(*a).total_cmp(&view.me.p.distance(*b)))
}

fn releaser_holds(name: &str, view: &RobotView<'_>, params: &SchemaParams) -> bool {
    let visible = |c| nearest_unclaimed(view, c).is_some();
    let near_bin = |c| {
        view.geometry.bins.get(&c).is_some_and(|bin| view.me.p.distance(*bin) <= params.bin_radius)
    };
    match name {
        "on" => view.lifecycle == Some(Lifecycle::On),
        "off" => view.lifecycle == Some(Lifecycle::Off),
        "red_visible" => visible(Color::Red),
        "blue_visible" => visible(Color::Blue),
        "not_red_visible" => !visible(Color::Red),
        "not_blue_visible" => !visible(Color::Blue),
        "red_in_gripper" => view.gripper == Some(Color::Red),
        "blue_in_gripper" => view.gripper == Some(Color::Blue),
        "close_to_red_bin" => near_bin(Color::Red),
        "close_to_blue_bin" => near_bin(Color::Blue),
        "ball_visible" => view.ball.is_some_and(|b| {
            view.me.p.distance(b.p) <= params.sensor_range
                && view
                    .geometry
                    .team_sector_of(b.p, view.team)
                    .is_ok_and(|s| view.assigned_sectors.contains(&s))
        }),
        "close_to_ball" => {
            view.ball.is_some_and(|b| view.me.p.distance(b.p) <= params.ball_close_radius)
        }
        "ball_close" => view.ball.is_some_and(|b| {
            view.geometry
                .own_goal_center(view.team)
                .is_some_and(|g| g.distance(b.p) <= params.ball_near_goal_radius)
        }),
        "hit_ball" => view.hit_ball,
        _ => false,
    }
}

/// Releasers of `fsm`'s alphabet whose predicates hold, with the current
/// state's alternatives first in their priority order, then the rest in
/// alphabet order.
pub fn evaluate_releasers(
    fsm: &Fsm,
    view: &RobotView<'_>,
    params: &SchemaParams,
    current_state: u32,
) -> Vec<Releaser> {
    let mut out: Vec<Releaser> = Vec::new();
    let ordered = fsm
        .outgoing(current_state)
        .map(|t| &t.releaser)
        .chain(fsm.alphabet.iter());
    for r in ordered {
        if !out.contains(r) && releaser_holds(r.as_str(), view, params) {
            out.push(r.clone());
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Behavior {
    Off,
    Wander,
    AcquireRed,
    AcquireBlue,
    DeliverRed,
    DeliverBlue,
    GoToBall,
    Defend,
    BehindBall,
}

impl FromStr for Behavior {
    type Err = SchemaError;
    fn from_str(label: &str) -> Result<Self, Self::Err> {
        Ok(match label {
            "OFF" => Behavior::Off,
            "WANDER" => Behavior::Wander,
            "ACQUIRE_RED" => Behavior::AcquireRed,
            "ACQUIRE_BLUE" => Behavior::AcquireBlue,
            "DELIVER_RED" => Behavior::DeliverRed,
            "DELIVER_BLUE" => Behavior::DeliverBlue,
            "GO_TO_BALL" => Behavior::GoToBall,
            "DEFEND" => Behavior::Defend,
            "BEHIND_BALL" => Behavior::BehindBall,
            other => return Err(SchemaError::UnknownBehavior(other.to_string())),
        })
    }
}

/// Whether `BEHIND_BALL` should drive through the ball: the robot sits in
/// the cone behind it (far side from the opponent goal, close enough), or
/// the point behind it lies off the field so the ball cannot be flanked.
fn is_behind_ball(view: &RobotView<'_>, params: &SchemaParams, ball: Vec2, goal: Vec2) -> bool {
    let Some(u) = (ball - goal).normalized() else { return false };
    if !view.geometry.contains(ball + u * params.behind_offset) {
        return true;
    }
    let r = view.me.p - ball;
    let dist = r.norm();
    dist <= params.behind_offset * 1.5
        && r.dot(u) >= dist * params.behind_cone_deg.to_radians().cos()
}

/// The attraction target of a behavior, before zone clamping; `None` for
/// behaviors without one or when the needed entity is not sensed.
pub fn behavior_target(
    behavior: Behavior,
    view: &RobotView<'_>,
    params: &SchemaParams,
) -> Option<KinematicState> {
    let geometry = view.geometry;
    match behavior {
        Behavior::Off | Behavior::Wander => None,
        Behavior::AcquireRed => nearest_unclaimed(view, Color::Red).map(KinematicState::at_rest),
        Behavior::AcquireBlue => nearest_unclaimed(view, Color::Blue).map(KinematicState::at_rest),
        Behavior::DeliverRed => geometry.bins.get(&Color::Red).copied().map(KinematicState::at_rest),
        Behavior::DeliverBlue => {
            geometry.bins.get(&Color::Blue).copied().map(KinematicState::at_rest)
        }
        Behavior::GoToBall => view.ball,
        Behavior::Defend => {
            let ball = view.ball?;
            let goal = geometry.own_goal_center(view.team)?;
            Some(KinematicState::at_rest((ball.p + goal) * 0.5))
        }
        Behavior::BehindBall => {
            let ball = view.ball?;
            let goal = geometry.opponent_goal_center(view.team)?;
            let u = (ball.p - goal).normalized()?;
            if is_behind_ball(view, params, ball.p, goal) {
                // Aim past the ball along the robot→ball line: the approach
                // stays radial, so the robot never drifts out of the cone.
                let through = (ball.p - view.me.p).normalized().unwrap_or(-u);
                Some(KinematicState::at_rest(ball.p + through * params.behind_offset))
            } else {
                Some(KinematicState::new(ball.p + u * params.behind_offset, ball.v))
            }
        }
    }
}

fn wall_obstacles(view: &RobotView<'_>) -> Vec<KinematicState> {
    let p = view.me.p;
    let (w, h) = (view.geometry.width, view.geometry.height);
    [Vec2::new(0.0, p.y), Vec2::new(w, p.y), Vec2::new(p.x, 0.0), Vec2::new(p.x, h)]
        .into_iter()
        .filter(|q| q.distance(p) > 1e-9)
        .map(KinematicState::at_rest)
        .collect()
}

fn robot_obstacles(view: &RobotView<'_>) -> Vec<KinematicState> {
    view.teammates
        .iter()
        .chain(&view.opponents)
        .filter(|o| o.p.distance(view.me.p) > 1e-9)
        .copied()
        .collect()
}

fn attract(me: &KinematicState, target: &KinematicState, attr: &AttractiveParams) -> Vec2 {
    match attractive_force(me, target, attr) {
        Ok(f) => f,
        // Only reachable with m or n below 2 exactly at the target.
        Err(_) => Vec2::ZERO,
    }
}

/// Steering force for the behavior named by `label`.
pub fn schema_force(
    label: &str,
    view: &RobotView<'_>,
    params: &SchemaParams,
    wander: &mut WanderState,
) -> Result<Vec2, SchemaError> {
    let behavior: Behavior = label.parse()?;
    if behavior == Behavior::Off {
        return Ok(Vec2::ZERO);
    }
    let me = view.me;
    let zone = view.geometry.sectors_region(view.team, &view.assigned_sectors);
    // While the ball is out of reach the robot waits a margin inside its
    // zone; once the ball enters, it may chase it up to the zone edge.
    let ball_in_zone = zone.zip(view.ball).is_some_and(|(z, b)| z.contains(b.p));
    let chasing = ball_in_zone && matches!(behavior, Behavior::GoToBall | Behavior::BehindBall);
    let target_zone = zone.map(|z| if chasing { z } else { z.inset(params.zone_margin) });
    let robots = robot_obstacles(view);
    let mut force = repulsion(&me, &wall_obstacles(view), &params.wall_rep)?;

    match behavior_target(behavior, view, params) {
        Some(mut target) => {
            if let Some(zone) = target_zone {
                let clamped = zone.clamp(target.p);
                if clamped != target.p {
                    // A target pinned to the zone edge does not move with the ball.
                    target = KinematicState::at_rest(clamped);
                }
            }
            let attraction = if matches!(behavior, Behavior::GoToBall) {
                total_force(&me, &target, &robots, &params.attr, &params.rep)?
            } else {
                attract(&me, &target, &params.attr) + repulsion(&me, &robots, &params.rep)?
            };
            force += attraction;
            if params.noise_gain > 0.0 {
                force += wander.next_heading(params.wander_period) * params.noise_gain;
            }
            if behavior == Behavior::BehindBall {
                if let (Some(ball), Some(goal)) =
                    (view.ball, view.geometry.opponent_goal_center(view.team))
                {
                    if !is_behind_ball(view, params, ball.p, goal) && ball.p.distance(me.p) > 1e-9 {
                        force += repulsion(&me, &[ball], &params.ball_rep)?;
                    }
                }
            }
        }
        None => {
            force += repulsion(&me, &robots, &params.rep)?;
            if behavior == Behavior::Wander {
                force += wander.next_heading(params.wander_period) * params.wander_gain;
            }
            if let Some(zone) = zone {
                let home = KinematicState::at_rest(zone.center());
                force += attract(&me, &home, &params.attr) * params.home_gain;
            }
        }
    }
    Ok(force)
}
