//! Dynamic potential fields over position and velocity.
//!
//! The attractive potential pulls a robot toward a (possibly moving) target:
//!
//! ```text
//! U_att = α_p·‖p_tar − p‖^m + α_v·‖v_tar − v‖^n
//! ```
//!
//! The repulsive potential only acts on obstacles the robot is closing on.
//! With `ρ_s` the robot–obstacle distance, `v_RO` the approach speed along
//! the robot→obstacle direction and `ρ_m = v_RO² / (2·a_max)` the braking
//! distance:
//!
//! ```text
//! U_rep = 0                         if ρ_s − ρ_m ≥ ρ_0 or v_RO ≤ 0
//!       = η·(1/(ρ_s − ρ_m) − 1/ρ_0)  if 0 < ρ_s − ρ_m < ρ_0 and v_RO > 0
//!       = undefined                  if v_RO > 0 and ρ_s ≤ ρ_m
//! ```
//!
//! Forces are the negative gradient with respect to both position and
//! velocity, summed into one planar steering vector.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vec2::{KinematicState, Vec2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("invalid field parameters: {0}")]
    InvalidParams(String),
    #[error("gradient is singular: {0}")]
    Singular(&'static str),
    #[error("robot and obstacle positions coincide")]
    Coincident,
    #[error("finite-difference oracle sampled a non-finite value at {0:?}")]
    NonFinite(KinematicState),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttractiveParams {
    pub alpha_p: f64,
    pub alpha_v: f64,
    pub m: f64,
    pub n: f64,
}

impl AttractiveParams {
    pub fn new(alpha_p: f64, alpha_v: f64, m: f64, n: f64) -> Result<Self, FieldError> {
        let p = Self { alpha_p, alpha_v, m, n };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        let ok = self.alpha_p > 0.0
            && self.alpha_v >= 0.0
            && self.m >= 1.0
            && self.n >= 1.0
            && [self.alpha_p, self.alpha_v, self.m, self.n].iter().all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(FieldError::InvalidParams(format!(
                "need alpha_p > 0, alpha_v >= 0, m >= 1, n >= 1; got {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepulsiveParams {
    pub eta: f64,
    pub rho_0: f64,
    pub a_max: f64,
    pub f_max: f64,
}

impl RepulsiveParams {
    pub fn new(eta: f64, rho_0: f64, a_max: f64, f_max: f64) -> Result<Self, FieldError> {
        let p = Self { eta, rho_0, a_max, f_max };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        if [self.eta, self.rho_0, self.a_max, self.f_max].iter().all(|x| *x > 0.0 && x.is_finite()) {
            Ok(())
        } else {
            Err(FieldError::InvalidParams(format!("repulsive parameters must be positive: {self:?}")))
        }
    }

    /// Braking distance `v²/(2·a_max)` for an approach speed.
    pub fn braking_distance(&self, v_ro: f64) -> f64 {
        v_ro * v_ro / (2.0 * self.a_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Zero,
    Active,
    UndefinedCollision,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSample {
    /// `None` on the undefined-collision branch.
    pub potential: Option<f64>,
    pub branch: Branch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub potential: Option<f64>,
    pub force: Vec2,
    pub branch: Branch,
}

pub fn attractive_potential(
    robot: &KinematicState,
    target: &KinematicState,
    params: &AttractiveParams,
) -> f64 {
    let dp = (target.p - robot.p).norm();
    let dv = (target.v - robot.v).norm();
    params.alpha_p * pow(dp, params.m) + params.alpha_v * pow(dv, params.n)
}

/// `(∂U_att/∂p, ∂U_att/∂v)`.
pub fn attractive_gradients(
    robot: &KinematicState,
    target: &KinematicState,
    params: &AttractiveParams,
) -> Result<(Vec2, Vec2), FieldError> {
    let grad_p = power_gradient(target.p - robot.p, params.alpha_p, params.m)
        .ok_or(FieldError::Singular("robot position equals target position with m < 2"))?;
    let grad_v = if params.alpha_v == 0.0 {
        Vec2::ZERO
    } else {
        power_gradient(target.v - robot.v, params.alpha_v, params.n)
            .ok_or(FieldError::Singular("robot velocity equals target velocity with n < 2"))?
    };
    Ok((grad_p, grad_v))
}

/// `x^e`, using repeated multiplication for integral exponents so results do
/// not depend on the platform's `pow`.
fn pow(x: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() <= 64.0 {
        x.powi(e as i32)
    } else {
        x.powf(e)
    }
}

/// Gradient of `gain·‖d‖^k` with respect to the robot-side variable, where
/// `d = target − robot`: `−gain·k·‖d‖^(k−1)·d̂`.
fn power_gradient(d: Vec2, gain: f64, k: f64) -> Option<Vec2> {
    match d.normalized() {
        Some(dir) => Some(dir * (-gain * k * pow(d.norm(), k - 1.0))),
        None if k >= 2.0 => Some(Vec2::ZERO),
        None => None,
    }
}

/// `−∂U_att/∂p − ∂U_att/∂v`.
pub fn attractive_force(
    robot: &KinematicState,
    target: &KinematicState,
    params: &AttractiveParams,
) -> Result<Vec2, FieldError> {
    let (gp, gv) = attractive_gradients(robot, target, params)?;
    Ok(-(gp + gv))
}

/// `v_RO = (v − v_obs)·n̂_RO`, positive when the robot closes on the obstacle.
pub fn relative_approach_speed(
    robot: &KinematicState,
    obstacle: &KinematicState,
) -> Result<f64, FieldError> {
    let n = (obstacle.p - robot.p).normalized().ok_or(FieldError::Coincident)?;
    Ok((robot.v - obstacle.v).dot(n))
}

struct RepulsiveGeometry {
    rho_s: f64,
    n_ro: Vec2,
    v_ro: f64,
    margin: f64,
    branch: Branch,
}

fn repulsive_geometry(
    robot: &KinematicState,
    obstacle: &KinematicState,
    params: &RepulsiveParams,
) -> Result<RepulsiveGeometry, FieldError> {
    let r = obstacle.p - robot.p;
    let rho_s = r.norm();
    let n_ro = r.normalized().ok_or(FieldError::Coincident)?;
    let v_ro = (robot.v - obstacle.v).dot(n_ro);
    let rho_m = params.braking_distance(v_ro);
    let margin = rho_s - rho_m;
    let branch = if v_ro <= 0.0 || margin >= params.rho_0 {
        Branch::Zero
    } else if margin > 0.0 {
        Branch::Active
    } else {
        Branch::UndefinedCollision
    };
    Ok(RepulsiveGeometry { rho_s, n_ro, v_ro, margin, branch })
}

pub fn repulsive_potential(
    robot: &KinematicState,
    obstacle: &KinematicState,
    params: &RepulsiveParams,
) -> Result<PotentialSample, FieldError> {
    let g = repulsive_geometry(robot, obstacle, params)?;
    let potential = match g.branch {
        Branch::Zero => Some(0.0),
        Branch::Active => Some(params.eta * (1.0 / g.margin - 1.0 / params.rho_0)),
        Branch::UndefinedCollision => None,
    };
    Ok(PotentialSample { potential, branch: g.branch })
}

/// `(∂U_rep/∂p, ∂U_rep/∂v)` on the active branch, zero elsewhere.
///
/// With `D = ρ_s − ρ_m` and `w = v − v_obs`:
/// `∂D/∂p = −n̂ + (v_RO/a_max)·(w − v_RO·n̂)/ρ_s` and
/// `∂D/∂v = −(v_RO/a_max)·n̂`; `∂U/∂x = −η/D²·∂D/∂x`.
pub fn repulsive_gradients(
    robot: &KinematicState,
    obstacle: &KinematicState,
    params: &RepulsiveParams,
) -> Result<(Vec2, Vec2), FieldError> {
    let g = repulsive_geometry(robot, obstacle, params)?;
    if g.branch != Branch::Active {
        return Ok((Vec2::ZERO, Vec2::ZERO));
    }
    let w = robot.v - obstacle.v;
    let k = g.v_ro / params.a_max;
    let dd_dp = -g.n_ro + (w - g.n_ro * g.v_ro) * (k / g.rho_s);
    let dd_dv = -g.n_ro * k;
    let s = -params.eta / (g.margin * g.margin);
    Ok((dd_dp * s, dd_dv * s))
}

/// Negative repulsive gradient, clamped to `f_max`. On the undefined
/// (unavoidable collision) branch the result is a maximal push straight away
/// from the obstacle.
pub fn repulsive_force(
    robot: &KinematicState,
    obstacle: &KinematicState,
    params: &RepulsiveParams,
) -> Result<FieldSample, FieldError> {
    let sample = repulsive_potential(robot, obstacle, params)?;
    let force = match sample.branch {
        Branch::Zero => Vec2::ZERO,
        Branch::Active => {
            let (gp, gv) = repulsive_gradients(robot, obstacle, params)?;
            (-(gp + gv)).clamp_norm(params.f_max)
        }
        Branch::UndefinedCollision => {
            let away = (robot.p - obstacle.p).normalized().ok_or(FieldError::Coincident)?;
            away * params.f_max
        }
    };
    Ok(FieldSample { potential: sample.potential, force, branch: sample.branch })
}

/// Sum of clamped repulsive forces from every obstacle.
pub fn repulsion(
    robot: &KinematicState,
    obstacles: &[KinematicState],
    params: &RepulsiveParams,
) -> Result<Vec2, FieldError> {
    obstacles.iter().try_fold(Vec2::ZERO, |acc, obs| {
        Ok(acc + repulsive_force(robot, obs, params)?.force)
    })
}

pub fn total_force(
    robot: &KinematicState,
    target: &KinematicState,
    obstacles: &[KinematicState],
    attr: &AttractiveParams,
    rep: &RepulsiveParams,
) -> Result<Vec2, FieldError> {
    Ok(attractive_force(robot, target, attr)? + repulsion(robot, obstacles, rep)?)
}

/// Central-difference gradient of a scalar field over `(p, v)`, step `h`
/// per component.
pub fn fd_gradient<F>(field: F, at: &KinematicState, h: f64) -> Result<(Vec2, Vec2), FieldError>
where
    F: Fn(Vec2, Vec2) -> f64,
{
    let eval = |p: Vec2, v: Vec2| {
        let value = field(p, v);
        if value.is_finite() {
            Ok(value)
        } else {
            Err(FieldError::NonFinite(KinematicState::new(p, v)))
        }
    };
    let ex = Vec2::new(h, 0.0);
    let ey = Vec2::new(0.0, h);
    let d = |plus: f64, minus: f64| (plus - minus) / (2.0 * h);
    let (p, v) = (at.p, at.v);
    let grad_p = Vec2::new(
        d(eval(p + ex, v)?, eval(p - ex, v)?),
        d(eval(p + ey, v)?, eval(p - ey, v)?),
    );
    let grad_v = Vec2::new(
        d(eval(p, v + ex)?, eval(p, v - ex)?),
        d(eval(p, v + ey)?, eval(p, v - ey)?),
    );
    Ok((grad_p, grad_v))
}

/// One arrow of a sampled force field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceRecord {
    pub x: f64,
    pub y: f64,
    pub fx: f64,
    pub fy: f64,
}

/// Evaluates `force_at` at the centers of an `nx × ny` grid over
/// `[min, max]`, row-major from the lower-left cell. Points where the
/// force is undefined are skipped.
pub fn force_grid<F>(min: Vec2, max: Vec2, nx: usize, ny: usize, force_at: F) -> Vec<ForceRecord>
where
    F: Fn(Vec2) -> Result<Vec2, FieldError> + Sync,
{
    let cell = Vec2::new((max.x - min.x) / nx as f64, (max.y - min.y) / ny as f64);
    (0..nx * ny)
        .into_par_iter()
        .filter_map(|k| {
            let (i, j) = (k % nx, k / nx);
            let p = Vec2::new(min.x + (i as f64 + 0.5) * cell.x, min.y + (j as f64 + 0.5) * cell.y);
            let f = force_at(p).ok()?;
            Some(ForceRecord { x: p.x, y: p.y, fx: f.x, fy: f.y })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ks(px: f64, py: f64, vx: f64, vy: f64) -> KinematicState {
        KinematicState::new(Vec2::new(px, py), Vec2::new(vx, vy))
    }

    fn attr(alpha_p: f64, alpha_v: f64) -> AttractiveParams {
        AttractiveParams::new(alpha_p, alpha_v, 2.0, 2.0).unwrap()
    }

    fn rep() -> RepulsiveParams {
        RepulsiveParams::new(1.0, 5.0, 1.0, 10.0).unwrap()
    }

    #[test]
    fn attractive_potential_zero_at_target() {
        let s = ks(3.0, 4.0, 1.0, 0.0);
        assert_eq!(attractive_potential(&s, &s, &attr(1.0, 0.5)), 0.0);
    }

    #[test]
    fn attractive_potential_hand_value() {
        let u = attractive_potential(&ks(0.0, 0.0, 0.0, 0.0), &ks(3.0, 4.0, 1.0, 0.0), &attr(1.0, 0.5));
        assert_eq!(u, 25.5);
    }

    #[test]
    fn attractive_force_hand_value() {
        let f = attractive_force(&ks(0.0, 0.0, 0.0, 0.0), &ks(3.0, 4.0, 1.0, 0.0), &attr(1.0, 0.5))
            .unwrap();
        assert!((f.x - 7.0).abs() < 1e-12 && (f.y - 8.0).abs() < 1e-12, "{f:?}");
    }

    #[test]
    fn coincident_smooth_regime_is_exact_zero() {
        let s = ks(1.0, 2.0, 0.5, 0.5);
        assert_eq!(attractive_force(&s, &s, &attr(2.0, 1.0)).unwrap(), Vec2::ZERO);
    }

    #[test]
    fn singular_exponent_guard() {
        let s = ks(1.0, 2.0, 0.0, 0.0);
        let p = AttractiveParams::new(1.0, 0.0, 1.5, 2.0).unwrap();
        assert!(matches!(attractive_force(&s, &s, &p), Err(FieldError::Singular(_))));
        let p = AttractiveParams::new(1.0, 1.0, 2.0, 1.0).unwrap();
        assert!(matches!(attractive_force(&s, &s, &p), Err(FieldError::Singular(_))));
        // alpha_v = 0 removes the velocity term entirely.
        let p = AttractiveParams::new(1.0, 0.0, 2.0, 1.0).unwrap();
        assert!(attractive_force(&s, &s, &p).is_ok());
    }

    #[test]
    fn param_validation() {
        assert!(AttractiveParams::new(0.0, 0.0, 2.0, 2.0).is_err());
        assert!(AttractiveParams::new(1.0, -0.1, 2.0, 2.0).is_err());
        assert!(AttractiveParams::new(1.0, 0.0, 0.5, 2.0).is_err());
        assert!(RepulsiveParams::new(1.0, 0.0, 1.0, 1.0).is_err());
        assert!(RepulsiveParams::new(1.0, 1.0, 1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn approach_speed_hand_values() {
        let obs = ks(5.0, 0.0, 0.0, 0.0);
        assert_eq!(relative_approach_speed(&ks(0.0, 0.0, 2.0, 0.0), &obs).unwrap(), 2.0);
        assert_eq!(relative_approach_speed(&ks(0.0, 0.0, -1.0, 0.0), &obs).unwrap(), -1.0);
        let same = ks(0.0, 0.0, 0.3, -0.2);
        let moving = ks(2.0, 1.0, 0.3, -0.2);
        assert_eq!(relative_approach_speed(&same, &moving).unwrap(), 0.0);
        assert_eq!(relative_approach_speed(&obs, &obs), Err(FieldError::Coincident));
    }

    #[test]
    fn repulsive_active_hand_value() {
        let s = repulsive_potential(&ks(0.0, 0.0, 2.0, 0.0), &ks(4.0, 0.0, 0.0, 0.0), &rep()).unwrap();
        assert_eq!(s.branch, Branch::Active);
        assert!((s.potential.unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn repulsive_active_force_pushes_back() {
        let s = repulsive_force(&ks(0.0, 0.0, 2.0, 0.0), &ks(4.0, 0.0, 0.0, 0.0), &rep()).unwrap();
        // η/D²·(−1 − v_RO/a_max) along x with D = 2, v_RO = 2.
        assert!((s.force.x + 0.75).abs() < 1e-12 && s.force.y == 0.0, "{:?}", s.force);
    }

    #[test]
    fn receding_robot_feels_nothing() {
        let s = repulsive_force(&ks(0.0, 0.0, -2.0, 0.0), &ks(0.5, 0.0, 0.0, 0.0), &rep()).unwrap();
        assert_eq!(s.branch, Branch::Zero);
        assert_eq!(s.potential, Some(0.0));
        assert_eq!(s.force, Vec2::ZERO);
    }

    #[test]
    fn inside_braking_distance_is_undefined() {
        let s = repulsive_force(&ks(0.0, 0.0, 2.0, 0.0), &ks(1.0, 0.0, 0.0, 0.0), &rep()).unwrap();
        assert_eq!(s.branch, Branch::UndefinedCollision);
        assert_eq!(s.potential, None);
        assert!((s.force.norm() - 10.0).abs() < 1e-12);
        assert!(s.force.x < 0.0);
    }

    #[test]
    fn active_force_is_clamped() {
        let p = RepulsiveParams::new(1.0, 5.0, 1.0, 0.1).unwrap();
        let s = repulsive_force(&ks(0.0, 0.0, 2.0, 0.0), &ks(4.0, 0.0, 0.0, 0.0), &p).unwrap();
        assert!((s.force.norm() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn total_force_without_obstacles_is_attraction() {
        let (r, t) = (ks(0.0, 0.0, 0.0, 0.0), ks(3.0, 4.0, 1.0, 0.0));
        let a = attr(1.0, 0.5);
        assert_eq!(total_force(&r, &t, &[], &a, &rep()).unwrap(), attractive_force(&r, &t, &a).unwrap());
    }

    #[test]
    fn fd_gradient_simple_fields() {
        let at = ks(2.0, 3.0, 0.0, 0.0);
        let (gp, gv) = fd_gradient(|_, _| 7.0, &at, 1e-6).unwrap();
        assert_eq!((gp, gv), (Vec2::ZERO, Vec2::ZERO));
        let (gp, _) = fd_gradient(|p, _| p.x * p.y, &at, 1e-6).unwrap();
        assert!((gp.x - 3.0).abs() < 1e-6 && (gp.y - 2.0).abs() < 1e-6);
        assert!(fd_gradient(|p, _| 1.0 / (p.x - 2.0), &at, 1e-6).is_err());
    }

    #[test]
    fn grid_covers_cells() {
        let g = force_grid(Vec2::ZERO, Vec2::new(4.0, 2.0), 4, 2, Ok);
        assert_eq!(g.len(), 8);
        assert_eq!((g[0].x, g[0].y), (0.5, 0.5));
        assert_eq!((g[7].x, g[7].y), (3.5, 1.5));
    }
}
