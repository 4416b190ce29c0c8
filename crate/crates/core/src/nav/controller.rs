//! Deterministic local controller: turn toward the local goal, step forward
//! when the way ahead is clear.

use crate::geometry::{heading_of, wrap_deg, Point, Pose};
use crate::sim::{ray_angle, Action};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerParams {
    pub fov: f64,
    pub forward_step: f64,
    pub turn_step: f64,
    pub agent_radius: f64,
    /// Half-width of the center sector checked for obstacles, degrees.
    pub center_half_angle: f64,
    /// Largest lateral offset of the goal, m, at which going straight still
    /// passes within reach of it, so no corrective turn is needed.
    pub lateral_tolerance: f64,
}

impl ControllerParams {
    /// Lateral tolerance for a goal counted as reached within `reach_radius`:
    /// forward steps land at most half a step along-track from the closest
    /// approach.
    pub fn lateral_tolerance_for(reach_radius: f64, forward_step: f64) -> f64 {
        (reach_radius.powi(2) - (forward_step / 2.0).powi(2)).max(0.0).sqrt()
    }
}

impl Default for ControllerParams {
    fn default() -> Self {
        Self {
            fov: 90.0,
            forward_step: 0.25,
            turn_step: 10.0,
            agent_radius: 0.18,
            center_half_angle: 15.0,
            lateral_tolerance: Self::lateral_tolerance_for(0.15, 0.25),
        }
    }
}

/// What the controller knows about the agent's immediate surroundings
/// besides the scan: mapped obstacle cells (centers of squares with side
/// `cell_size`) and headings that produced a collision at this spot.
#[derive(Debug, Clone, Copy, Default)]
pub struct Surroundings<'a> {
    pub obstacles: &'a [Point],
    pub cell_size: f64,
    pub blocked_headings: &'a [f64],
}

/// Signed heading error (degrees, `(-180, 180]`) from `pose` to `target`.
pub fn heading_error(pose: &Pose, target: &Point) -> f64 {
    wrap_deg(heading_of(&target.sub(&pose.position())) - pose.theta)
}

fn square_distance(p: &Point, center: &Point, half: f64) -> f64 {
    let dx = ((p.x - center.x).abs() - half).max(0.0);
    let dy = ((p.y - center.y).abs() - half).max(0.0);
    dx.hypot(dy)
}

/// Whether a disc of `radius` moving `step` from `from` along `heading`
/// closes in on any obstacle square to less than `radius`.
pub fn sweep_blocked(from: &Point, heading: f64, step: f64, radius: f64, around: &Surroundings<'_>) -> bool {
    let a = heading.to_radians();
    let dir = Point::new(a.cos(), a.sin());
    let half = around.cell_size / 2.0;
    let samples = ((step / (around.cell_size / 2.0).max(1e-3)).ceil() as usize).max(1);
    around.obstacles.iter().any(|c| {
        let d0 = square_distance(from, c, half);
        (1..=samples).any(|k| {
            let t = step * k as f64 / samples as f64;
            let d = square_distance(&from.add(&dir.scale(t)), c, half);
            d < radius && d < d0 - 1e-9
        })
    })
}

/// Chooses among the headings reachable by whole turns the one closest to
/// the goal bearing whose forward step stays clear of mapped obstacles and
/// known collisions, and turns toward it. The current heading is kept while
/// the goal bearing is within one turn of it or the goal lies ahead within
/// the lateral tolerance of the line of travel. When the chosen heading is the current one but the center
/// of the scan is blocked, turns toward the side with more clearance (tie to
/// the left); otherwise steps forward.
pub fn local_controller(
    pose: &Pose,
    goal: &Point,
    scan: &[f64],
    params: &ControllerParams,
    around: &Surroundings<'_>,
) -> Action {
    let err = heading_error(pose, goal);
    let pos = pose.position();
    let half_turns = (180.0 / params.turn_step).round() as i64;
    let clear = |k: i64| {
        let h = pose.theta + k as f64 * params.turn_step;
        if around.blocked_headings.iter().any(|&b| wrap_deg(b - h).abs() < params.turn_step / 2.0) {
            return false;
        }
        !sweep_blocked(&pos, h, params.forward_step, params.agent_radius, around)
    };
    let dist = pose.position().distance(goal);
    let on_line = err.abs() <= params.turn_step
        || (err.abs() < 90.0 && dist * err.to_radians().sin().abs() <= params.lateral_tolerance);
    let mut best: Option<(f64, i64)> = None;
    if on_line && clear(0) {
        best = Some((0.0, 0));
    }
    for k in -half_turns..=half_turns {
        if !clear(k) {
            continue;
        }
        let e = wrap_deg(err - k as f64 * params.turn_step).abs();
        // prefer the smaller error, then fewer turns, then turning left
        let better = match best {
            None => true,
            Some((be, bk)) => e < be - 1e-9 || ((e - be).abs() <= 1e-9 && (k.abs(), -k) < (bk.abs(), -bk)),
        };
        if better {
            best = Some((e, k));
        }
    }
    match best {
        Some((_, k)) if k > 0 => return Action::TurnLeft,
        Some((_, k)) if k < 0 => return Action::TurnRight,
        _ => {}
    }
    let n = scan.len();
    let mut center = f64::INFINITY;
    let (mut left, mut right) = (0.0, 0.0);
    for (k, &d) in scan.iter().enumerate() {
        let a = ray_angle(k, n, params.fov);
        if a.abs() <= params.center_half_angle {
            center = center.min(d);
        }
        if a > 0.0 {
            left += d;
        } else if a < 0.0 {
            right += d;
        }
    }
    if best.is_none() || center < params.forward_step + params.agent_radius {
        return if left >= right { Action::TurnLeft } else { Action::TurnRight };
    }
    Action::Forward
}
