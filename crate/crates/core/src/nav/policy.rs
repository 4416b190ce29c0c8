//! Hierarchical policy: periodic global goals, A* local goals, and the
//! local controller, plus PointNav++ terminal alignment.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{heading_of, wrap_deg, Point, Pose};
use crate::mapper::GlobalMap;
use crate::nav::controller::{local_controller, ControllerParams, Surroundings};
use crate::nav::frontier::{select_global_goal, FrontierParams, GlobalGoal, GoalChoice, Strategy};
use crate::nav::planner::{extract_local_goal, plan, LocalGoal};
use crate::sim::Action;
use crate::world::grid::{Cell, CellIndex, OccupancyGrid};
use crate::world::raycast::RayWalker;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Frontier,
    Random,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    /// Global goal cadence N_G, steps.
    pub global_goal_interval: usize,
    /// Local goal distance D for exploration, meters.
    pub exploration_goal_distance: f64,
    /// Local goal distance D for PointNav++, meters.
    pub pointnav_goal_distance: f64,
    pub unknown_cell_cost: f64,
    /// Exploration strategy; PointNav++ always uses the episode goal.
    pub strategy: StrategyKind,
    /// A local goal counts as reached within this distance, meters.
    pub reach_radius: f64,
    /// Distance to the episode goal that starts terminal alignment, meters.
    pub terminal_radius: f64,
    /// Heading tolerance for the final STOP, degrees.
    pub align_tolerance: f64,
    pub classify_threshold: f64,
    pub gain_rays: usize,
    pub min_frontier_gain: usize,
    /// Consecutive planning failures after which PointNav++ stops.
    pub max_plan_failures: usize,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            global_goal_interval: 25,
            exploration_goal_distance: 0.5,
            pointnav_goal_distance: 0.25,
            unknown_cell_cost: 2.0,
            strategy: StrategyKind::Frontier,
            reach_radius: 0.15,
            terminal_radius: 0.15,
            align_tolerance: 5.0,
            classify_threshold: 0.5,
            gain_rays: 72,
            min_frontier_gain: 10,
            max_plan_failures: 3,
        }
    }
}

/// Episode goal in the estimator frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavGoal {
    pub position: Point,
    pub orientation: Point,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Body {
    pub controller: ControllerParams,
    pub max_range: f64,
}

/// What the policy did at one step, for the decision log.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: Action,
    pub global_goal: Option<GlobalGoal>,
    pub local_goal: Option<LocalGoal>,
    /// Estimator-frame point the controller steered toward.
    pub target: Option<Point>,
    pub global_resampled: bool,
    pub local_reset: Option<&'static str>,
    pub terminal: bool,
    pub exploration_complete: bool,
}

pub struct NavPolicy {
    config: PolicyConfig,
    body: Body,
    goal: Option<NavGoal>,
    rng: ChaCha8Rng,
    global: Option<GlobalGoal>,
    local: Option<LocalGoal>,
    terminal: bool,
    complete: bool,
    failures: usize,
    idle_streak: usize,
    /// Headings whose forward step collided, with the position they apply to.
    blocked: Vec<f64>,
    blocked_at: Option<Point>,
    last_action: Option<Action>,
}

const LIVELOCK_STEPS: usize = 24;
/// Collision-blocked headings are forgotten once the agent has moved this far, m.
const BLOCKED_RESET_DISTANCE: f64 = 0.05;

impl NavPolicy {
    pub fn new(config: PolicyConfig, body: Body, goal: Option<NavGoal>, seed: u64) -> Self {
        Self {
            config,
            body,
            goal,
            rng: ChaCha8Rng::seed_from_u64(seed),
            global: None,
            local: None,
            terminal: false,
            complete: false,
            failures: 0,
            idle_streak: 0,
            blocked: Vec::new(),
            blocked_at: None,
            last_action: None,
        }
    }

    pub fn exploration_complete(&self) -> bool {
        self.complete
    }

    fn goal_distance(&self) -> f64 {
        if self.goal.is_some() {
            self.config.pointnav_goal_distance
        } else {
            self.config.exploration_goal_distance
        }
    }

    fn decision(&self, action: Action) -> Decision {
        Decision {
            action,
            global_goal: self.global,
            local_goal: self.local,
            target: None,
            global_resampled: false,
            local_reset: None,
            terminal: self.terminal,
            exploration_complete: self.complete,
        }
    }

    /// Chooses the action for `step` given the current map, pose estimate
    /// (estimator frame), depth scan and whether the previous action
    /// collided.
    pub fn act(&mut self, step: usize, map: &GlobalMap, pose: &Pose, scan: &[f64], collided: bool) -> Decision {
        let d = self.decide(step, map, pose, scan, collided);
        self.last_action = Some(d.action);
        d
    }

    fn decide(&mut self, step: usize, map: &GlobalMap, pose: &Pose, scan: &[f64], collided: bool) -> Decision {
        self.note_collision(pose, collided);
        if let Some(goal) = self.goal {
            if self.terminal || pose.position().distance(&goal.position) <= self.config.terminal_radius {
                self.terminal = true;
                let err = wrap_deg(heading_of(&goal.orientation) - pose.theta);
                let action = if err.abs() <= self.config.align_tolerance {
                    Action::Stop
                } else if err >= 0.0 {
                    Action::TurnLeft
                } else {
                    Action::TurnRight
                };
                return self.decision(action);
            }
            if self.failures >= self.config.max_plan_failures {
                return self.decision(Action::Stop);
            }
        }

        let mut resample = step % self.config.global_goal_interval.max(1) == 0 || self.global.is_none();
        let mut reset: Option<&'static str> = None;
        if resample {
            reset = Some("global_goal");
        } else if let Some(lg) = self.local {
            if map.occupancy(lg.cell).is_some_and(|o| f64::from(o) >= self.config.classify_threshold) {
                reset = Some("occupied");
            } else if pose.position().distance(&self.target_point(map, lg.cell)) <= self.config.reach_radius {
                reset = Some("reached");
                if self.goal.is_none() && self.global.is_some_and(|g| g.cell == lg.cell) {
                    resample = true;
                }
            }
        } else {
            reset = Some("none");
        }
        if self.idle_streak == LIVELOCK_STEPS {
            resample = true;
            reset = Some("stalled");
        }

        if reset.is_some() {
            match self.replan(map, pose, resample) {
                Replan::Ok => {}
                Replan::Complete => {
                    self.local = None;
                    return self.decision(Action::TurnLeft);
                }
                Replan::Failed => {
                    self.local = None;
                    if self.goal.is_some() && self.failures >= self.config.max_plan_failures {
                        return self.decision(Action::Stop);
                    }
                    let mut d = self.decision(Action::TurnLeft);
                    d.global_resampled = resample;
                    return d;
                }
            }
        }

        let lg = self.local.expect("replan sets a local goal");
        let target = self.target_point(map, lg.cell);
        let obstacles = self.nearby_obstacles(map, pose);
        let around = Surroundings { obstacles: &obstacles, cell_size: map.cell_size(), blocked_headings: &self.blocked };
        let mut action = local_controller(pose, &target, scan, &self.body.controller, &around);
        if action == Action::Forward {
            self.idle_streak = 0;
        } else {
            self.idle_streak += 1;
            if self.idle_streak >= 2 * LIVELOCK_STEPS {
                // contact is truncated by the simulator, so pushing on is safe
                action = Action::Forward;
                self.idle_streak = 0;
            }
        }
        Decision {
            action,
            global_goal: self.global,
            local_goal: self.local,
            target: Some(target),
            global_resampled: resample,
            local_reset: reset,
            terminal: false,
            exploration_complete: self.complete,
        }
    }

    fn note_collision(&mut self, pose: &Pose, collided: bool) {
        let here = pose.position();
        if self.blocked_at.is_some_and(|p| p.distance(&here) > BLOCKED_RESET_DISTANCE) {
            self.blocked.clear();
            self.blocked_at = None;
        }
        if collided && self.last_action == Some(Action::Forward) {
            self.blocked.push(pose.theta);
            self.blocked_at.get_or_insert(here);
        }
    }

    /// Centers of mapped OCCUPIED cells the next forward step could touch.
    fn nearby_obstacles(&self, map: &GlobalMap, pose: &Pose) -> Vec<Point> {
        let cs = map.cell_size();
        let c = self.body.controller;
        let reach = c.forward_step + c.agent_radius + cs;
        let k = (reach / cs).ceil() as i64;
        let at = map.cell_of(&pose.position());
        let t = self.config.classify_threshold as f32;
        let mut out = Vec::new();
        for dr in -k..=k {
            for dc in -k..=k {
                let cell = CellIndex::new(at.col + dc, at.row + dr);
                if map.occupancy(cell).is_some_and(|o| o >= t) {
                    out.push(map.cell_center(cell));
                }
            }
        }
        out
    }

    /// The exact episode goal when the local goal is its cell, else the
    /// cell center.
    fn target_point(&self, map: &GlobalMap, cell: CellIndex) -> Point {
        match self.goal {
            Some(goal) if map.cell_of(&goal.position) == cell => goal.position,
            _ => map.cell_center(cell),
        }
    }

    fn replan(&mut self, map: &GlobalMap, pose: &Pose, mut resample: bool) -> Replan {
        let agent = map.cell_of(&pose.position());
        let goal_cell = self.goal.map(|g| map.cell_of(&g.position));
        let cs = map.cell_size();
        let margin = (self.body.max_range / cs).ceil() as i64 + 10;
        let mut region = map.explored_bbox().unwrap_or((agent.col, agent.row, agent.col, agent.row));
        for c in [Some(agent), goal_cell].into_iter().flatten() {
            region = (region.0.min(c.col), region.1.min(c.row), region.2.max(c.col), region.3.max(c.row));
        }
        region = (region.0 - margin, region.1 - margin, region.2 + margin, region.3 + margin);
        let snapshot = map
            .classify_region(self.config.classify_threshold, region)
            .expect("threshold validated by config");
        let (c0, r0) = (region.0.max(0), region.1.max(0));
        let to_local = |c: CellIndex| CellIndex::new(c.col - c0, c.row - r0);
        let to_global = |c: CellIndex| CellIndex::new(c.col + c0, c.row + r0);
        let agent_local = to_local(agent);
        let traversable = inflate(&snapshot, self.body.controller.agent_radius, agent_local);

        for _attempt in 0..2 {
            if resample || self.global.is_none() {
                let strategy = match (self.goal, self.config.strategy) {
                    (Some(_), _) | (None, StrategyKind::Fixed) => {
                        Strategy::Fixed(to_local(goal_cell.unwrap_or(agent)))
                    }
                    (None, StrategyKind::Frontier) => Strategy::Frontier(FrontierParams {
                        gain_rays: self.config.gain_rays,
                        max_range: self.body.max_range,
                        min_gain: self.config.min_frontier_gain,
                        unknown_cost: self.config.unknown_cell_cost,
                    }),
                    (None, StrategyKind::Random) => Strategy::Random(&mut self.rng),
                };
                match select_global_goal(&snapshot, &traversable, agent_local, strategy) {
                    GoalChoice::Goal(g) => {
                        self.global = Some(GlobalGoal { cell: to_global(g.cell), source: g.source });
                        self.complete = false;
                    }
                    GoalChoice::ExplorationComplete => {
                        self.global = None;
                        self.complete = true;
                        return Replan::Complete;
                    }
                }
            }
            let global = self.global.expect("set above");
            let path = plan(&traversable, agent_local, to_local(global.cell), self.config.unknown_cell_cost)
                .expect("agent cell is forced free and the multiplier is validated");
            match path {
                Some(mut path) => {
                    self.failures = 0;
                    for c in path.cells.iter_mut() {
                        *c = to_global(*c);
                    }
                    let mut lg = extract_local_goal(&path, self.goal_distance(), 0).expect("path is non-empty");
                    // pull back so the straight segment to the goal stays on the inflated map
                    let from = map.cell_center(agent);
                    while lg.path_index > 1 {
                        let to = map.cell_center(lg.cell);
                        if segment_clear(&traversable, &from, &to) {
                            break;
                        }
                        lg.path_index -= 1;
                        lg.cell = path.cells[lg.path_index];
                    }
                    self.local = Some(lg);
                    return Replan::Ok;
                }
                None => {
                    self.failures += 1;
                    if self.goal.is_some() {
                        return Replan::Failed;
                    }
                    resample = true;
                }
            }
        }
        Replan::Failed
    }
}

enum Replan {
    Ok,
    Complete,
    Failed,
}

fn segment_clear(map: &OccupancyGrid, from: &Point, to: &Point) -> bool {
    let len = from.distance(to);
    if len == 0.0 {
        return true;
    }
    let dir = to.sub(from).scale(1.0 / len);
    for step in RayWalker::new(map, from, &dir) {
        if step.t_enter > len {
            break;
        }
        if map.get(step.cell).is_none_or(|c| c == Cell::Occupied) {
            return false;
        }
    }
    true
}

/// Planning map: OCCUPIED cells grown by the agent radius (cells whose
/// square comes closer than the radius to a wall cell's square are
/// blocked). Inflation around the agent itself is cleared so a robot
/// pressed against a wall can still leave.
pub fn inflate(snapshot: &OccupancyGrid, radius: f64, agent: CellIndex) -> OccupancyGrid {
    let cs = snapshot.cell_size();
    let reach = (radius / cs).ceil() as i64 + 1;
    let mut offsets = Vec::new();
    for dr in -reach..=reach {
        for dc in -reach..=reach {
            let gx = ((dc.abs() as f64) - 0.5).max(0.0) * cs;
            let gy = ((dr.abs() as f64) - 0.5).max(0.0) * cs;
            if gx.hypot(gy) < radius && (dc, dr) != (0, 0) {
                offsets.push((dc, dr));
            }
        }
    }
    let mut out = snapshot.clone();
    for (i, &label) in snapshot.cells().iter().enumerate() {
        if label != Cell::Occupied {
            continue;
        }
        let c = snapshot.cell_at_index(i);
        for &(dc, dr) in &offsets {
            let n = CellIndex::new(c.col + dc, c.row + dr);
            if snapshot.in_bounds(n) {
                out.set(n, Cell::Occupied);
            }
        }
    }
    let keep = (radius / cs).ceil() as i64;
    for dr in -keep..=keep {
        for dc in -keep..=keep {
            let n = CellIndex::new(agent.col + dc, agent.row + dr);
            if let Some(label) = snapshot.get(n) {
                if label != Cell::Occupied {
                    out.set(n, label);
                }
            }
        }
    }
    if snapshot.in_bounds(agent) {
        out.set(agent, Cell::Free);
    }
    out
}
