//! Field geometry: bounds, color-coded bins, goals and the 3×3 sector grid.
//!
//! Sector convention, as seen by the team that defends the goal at `x = 0`
//! (red) and attacks toward `x = width`:
//!
//! * rows run from the opponent's goal toward the own goal: row 1 is the
//!   third nearest the opponent goal, row 3 the third containing the own
//!   goal;
//! * columns run across the field: column 1 is the team's right flank
//!   (low `y`), column 3 its left flank (high `y`).
//!
//! Blue sees the same grid rotated by 180°, so `(3, 2)` is always the cell in
//! front of a team's own goal and `(2, 2)` is always the center cell.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vec2::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArenaError {
    #[error("point ({x}, {y}) lies outside the {width}×{height} field")]
    OutOfBounds { x: f64, y: f64, width: f64, height: f64 },
    #[error("unknown {what} `{value}`")]
    Unknown { what: &'static str, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Color {
    Red,
    Blue,
}

impl Color {
    pub const ALL: [Color; 2] = [Color::Red, Color::Blue];

    pub fn as_str(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Blue => "blue",
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Color {
    type Err = ArenaError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "red" => Ok(Color::Red),
            "blue" => Ok(Color::Blue),
            _ => Err(ArenaError::Unknown { what: "color", value: s.into() }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Team {
    Red,
    Blue,
}

impl Team {
    pub const ALL: [Team; 2] = [Team::Red, Team::Blue];

    pub fn opponent(self) -> Team {
        match self {
            Team::Red => Team::Blue,
            Team::Blue => Team::Red,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Team::Red => "red",
            Team::Blue => "blue",
        }
    }
}

impl fmt::Display for Team {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Team {
    type Err = ArenaError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "red" => Ok(Team::Red),
            "blue" => Ok(Team::Blue),
            _ => Err(ArenaError::Unknown { what: "team", value: s.into() }),
        }
    }
}

/// `(row, col)`, both in `1..=3`.
pub type Sector = (u8, u8);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn clamp(&self, p: Vec2) -> Vec2 {
        Vec2::new(p.x.clamp(self.min.x, self.max.x), p.y.clamp(self.min.y, self.max.y))
    }

    pub fn center(&self) -> Vec2 {
        (self.min + self.max) * 0.5
    }

    /// The rectangle shrunk by `margin` on every side, never past its center.
    pub fn inset(&self, margin: f64) -> Rect {
        let c = self.center();
        let mx = margin.min((self.max.x - self.min.x) / 2.0).max(0.0);
        let my = margin.min((self.max.y - self.min.y) / 2.0).max(0.0);
        Rect {
            min: Vec2::new((self.min.x + mx).min(c.x), (self.min.y + my).min(c.y)),
            max: Vec2::new((self.max.x - mx).max(c.x), (self.max.y - my).max(c.y)),
        }
    }

    pub fn union(&self, other: &Rect) -> Rect {
        Rect {
            min: Vec2::new(self.min.x.min(other.min.x), self.min.y.min(other.min.y)),
            max: Vec2::new(self.max.x.max(other.max.x), self.max.y.max(other.max.y)),
        }
    }
}

/// A goal mouth on one of the short walls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalSegment {
    pub a: Vec2,
    pub b: Vec2,
}

impl GoalSegment {
    pub fn center(&self) -> Vec2 {
        (self.a + self.b) * 0.5
    }

    /// Whether `y` lies within the mouth (goals sit on vertical walls).
    pub fn spans(&self, y: f64) -> bool {
        y >= self.a.y.min(self.b.y) && y <= self.a.y.max(self.b.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldGeometry {
    pub width: f64,
    pub height: f64,
    /// Delivery bin center per attractor color (foraging).
    pub bins: BTreeMap<Color, Vec2>,
    /// The goal each team defends (soccer).
    pub goals: BTreeMap<Team, GoalSegment>,
    pub home_base: Vec2,
}

impl FieldGeometry {
    pub fn foraging(width: f64, height: f64, home_base: Vec2, red_bin: Vec2, blue_bin: Vec2) -> Self {
        Self {
            width,
            height,
            bins: BTreeMap::from([(Color::Red, red_bin), (Color::Blue, blue_bin)]),
            goals: BTreeMap::new(),
            home_base,
        }
    }

    /// Red defends the goal at `x = 0`, blue the one at `x = width`.
    pub fn soccer(width: f64, height: f64, goal_width: f64) -> Self {
        let (lo, hi) = (height / 2.0 - goal_width / 2.0, height / 2.0 + goal_width / 2.0);
        let goals = BTreeMap::from([
            (Team::Red, GoalSegment { a: Vec2::new(0.0, lo), b: Vec2::new(0.0, hi) }),
            (Team::Blue, GoalSegment { a: Vec2::new(width, lo), b: Vec2::new(width, hi) }),
        ]);
        Self {
            width,
            height,
            bins: BTreeMap::new(),
            goals,
            home_base: Vec2::new(width / 2.0, height / 2.0),
        }
    }

    pub fn bounds(&self) -> Rect {
        Rect { min: Vec2::ZERO, max: Vec2::new(self.width, self.height) }
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.width / 2.0, self.height / 2.0)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.bounds().contains(p)
    }

    pub fn own_goal_center(&self, team: Team) -> Option<Vec2> {
        self.goals.get(&team).map(GoalSegment::center)
    }

    pub fn opponent_goal_center(&self, team: Team) -> Option<Vec2> {
        self.own_goal_center(team.opponent())
    }

    fn check(&self, p: Vec2) -> Result<(), ArenaError> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(ArenaError::OutOfBounds { x: p.x, y: p.y, width: self.width, height: self.height })
        }
    }

    /// Sector in the red team's frame.
    pub fn sector_of(&self, p: Vec2) -> Result<Sector, ArenaError> {
        self.check(p)?;
        let third = |v: f64, extent: f64| ((3.0 * v / extent).floor() as i64).clamp(0, 2) as u8;
        Ok((3 - third(p.x, self.width), third(p.y, self.height) + 1))
    }

    /// Sector in `team`'s own frame.
    pub fn team_sector_of(&self, p: Vec2, team: Team) -> Result<Sector, ArenaError> {
        self.check(p)?;
        self.sector_of(self.to_red_frame(p, team))
    }

    fn to_red_frame(&self, p: Vec2, team: Team) -> Vec2 {
        match team {
            Team::Red => p,
            Team::Blue => Vec2::new(self.width - p.x, self.height - p.y),
        }
    }

    /// Region covered by a team-relative sector.
    pub fn sector_rect(&self, team: Team, (row, col): Sector) -> Rect {
        let (w3, h3) = (self.width / 3.0, self.height / 3.0);
        let x0 = f64::from(3 - row.clamp(1, 3)) * w3;
        let y0 = f64::from(col.clamp(1, 3) - 1) * h3;
        let a = self.to_red_frame(Vec2::new(x0, y0), team);
        let b = self.to_red_frame(Vec2::new(x0 + w3, y0 + h3), team);
        Rect {
            min: Vec2::new(a.x.min(b.x), a.y.min(b.y)),
            max: Vec2::new(a.x.max(b.x), a.y.max(b.y)),
        }
    }

    /// Bounding box of a set of team-relative sectors; `None` when empty.
    pub fn sectors_region(&self, team: Team, sectors: &BTreeSet<Sector>) -> Option<Rect> {
        sectors.iter().map(|s| self.sector_rect(team, *s)).reduce(|a, b| a.union(&b))
    }
}
