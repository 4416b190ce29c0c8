//! Discrete-action agent simulation: a disc agent on a ground-truth grid
//! with a fan of depth rays and an odometry-style pose sensor.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Displacement, Point, Pose};
use crate::world::grid::{Cell, OccupancyGrid};
use crate::world::raycast::cast_unchecked;
use crate::world::WorldError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Action {
    Forward,
    TurnLeft,
    TurnRight,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeKind {
    Exploration,
    Pointnav,
}

/// Independent truncated-Gaussian noise (clipped at ±3σ) on actuation and
/// on the pose sensor's per-step increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub forward_sigma: f64,
    pub turn_sigma: f64,
    pub drift_sigma_xy: f64,
    pub drift_sigma_theta: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::noise_free()
    }
}

impl NoiseModel {
    pub fn noise_free() -> Self {
        Self {
            forward_sigma: 0.0,
            turn_sigma: 0.0,
            drift_sigma_xy: 0.0,
            drift_sigma_theta: 0.0,
            seed: 0,
        }
    }

    pub fn noisy(seed: u64) -> Self {
        Self {
            forward_sigma: 0.025,
            turn_sigma: 1.5,
            drift_sigma_xy: 0.01,
            drift_sigma_theta: 0.5,
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn is_noise_free(&self) -> bool {
        self.forward_sigma == 0.0
            && self.turn_sigma == 0.0
            && self.drift_sigma_xy == 0.0
            && self.drift_sigma_theta == 0.0
    }

    fn validate(&self) -> Result<(), SimError> {
        for (name, v) in [
            ("forward_sigma", self.forward_sigma),
            ("turn_sigma", self.turn_sigma),
            ("drift_sigma_xy", self.drift_sigma_xy),
            ("drift_sigma_theta", self.drift_sigma_theta),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SimError::InvalidConfig(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub agent_radius: f64,
    pub forward_step: f64,
    pub turn_step: f64,
    pub fov: f64,
    pub rays: usize,
    pub max_range: f64,
    /// Episode length: exploration ends here, pointnav is cut off here.
    pub max_steps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            agent_radius: 0.18,
            forward_step: 0.25,
            turn_step: 10.0,
            fov: 90.0,
            rays: 128,
            // half the local map side: L = 101 cells of 5 cm
            max_range: 2.5,
            max_steps: 1000,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("start pose ({}, {}) is within the agent radius of an obstacle", .0.x, .0.y)]
    StartInCollision(Point),
    #[error("start pose ({}, {}) is outside the world", .0.x, .0.y)]
    StartOutOfBounds(Point),
    #[error("STOP is not a legal action in exploration episodes")]
    IllegalStop,
    #[error("episode is already done")]
    EpisodeDone,
    #[error("invalid simulator config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub depth: Vec<f64>,
    pub pose_reading: Pose,
    /// Sensor increment since the previous reading, in the previous
    /// reading's egocentric frame.
    pub odometry: Displacement,
    pub collided: bool,
}

/// Renders a depth scan: ray `k` points at `theta - fov/2 + k*fov/(rays-1)`.
pub fn render_depth(
    world: &OccupancyGrid,
    pose: &Pose,
    fov: f64,
    rays: usize,
    max_range: f64,
) -> Result<Vec<f64>, WorldError> {
    if !(max_range > 0.0) {
        return Err(WorldError::InvalidRange(max_range));
    }
    let p = pose.position();
    match world.get(world.world_to_cell(&p)) {
        None => return Err(WorldError::OutOfBounds(p)),
        Some(Cell::Occupied) => return Err(WorldError::InsideObstacle(p)),
        _ => {}
    }
    let spacing = if rays > 1 { fov / (rays - 1) as f64 } else { 0.0 };
    let first = if rays > 1 { -fov / 2.0 } else { 0.0 };
    Ok((0..rays)
        .map(|k| {
            let a = (pose.theta + first + k as f64 * spacing).to_radians();
            cast_unchecked(world, &p, &Point::new(a.cos(), a.sin()), max_range).distance
        })
        .collect())
}

/// Angle of ray `k` relative to the heading.
pub fn ray_angle(k: usize, rays: usize, fov: f64) -> f64 {
    if rays > 1 {
        -fov / 2.0 + k as f64 * fov / (rays - 1) as f64
    } else {
        0.0
    }
}

fn truncated_gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    loop {
        let v: f64 = normal.sample(rng);
        if v.abs() <= 3.0 * sigma {
            return v;
        }
    }
}

const SWEEP_STEP: f64 = 0.005;
const CONTACT_EPS: f64 = 1e-6;

/// One running episode. The world is shared read-only.
#[derive(Debug, Clone)]
pub struct Simulator {
    world: Arc<OccupancyGrid>,
    config: SimConfig,
    noise: NoiseModel,
    kind: EpisodeKind,
    start: Pose,
    // true and sensed poses relative to `start`, so the noise-free sensor
    // follows exactly the same arithmetic as the truth
    truth: Pose,
    reading: Pose,
    steps: usize,
    done: bool,
    rng: ChaCha8Rng,
}

impl Simulator {
    pub fn reset(
        world: Arc<OccupancyGrid>,
        start: Pose,
        noise: NoiseModel,
        kind: EpisodeKind,
        config: SimConfig,
    ) -> Result<(Self, Observation), SimError> {
        noise.validate()?;
        if config.rays == 0 || !(config.max_range > 0.0) || !(config.agent_radius >= 0.0) {
            return Err(SimError::InvalidConfig("rays, max_range and agent_radius".into()));
        }
        let p = start.position();
        if !world.in_bounds(world.world_to_cell(&p)) {
            return Err(SimError::StartOutOfBounds(p));
        }
        if !world.is_free(world.world_to_cell(&p)) || !world.has_clearance(&p, config.agent_radius) {
            return Err(SimError::StartInCollision(p));
        }
        let sim = Self {
            rng: ChaCha8Rng::seed_from_u64(noise.seed),
            world,
            config,
            noise,
            kind,
            start,
            truth: Pose::origin(),
            reading: Pose::origin(),
            steps: 0,
            done: false,
        };
        let obs = sim.observe(Displacement::ZERO, false)?;
        Ok((sim, obs))
    }

    pub fn true_pose(&self) -> Pose {
        self.start.then(&self.truth)
    }

    /// True pose in the start frame, computed with the same arithmetic as
    /// the sensor reading.
    pub fn true_relative(&self) -> Pose {
        self.truth
    }

    pub fn pose_reading(&self) -> Pose {
        self.start.then(&self.reading)
    }

    pub fn start(&self) -> Pose {
        self.start
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn world(&self) -> &OccupancyGrid {
        &self.world
    }

    fn observe(&self, odometry: Displacement, collided: bool) -> Result<Observation, SimError> {
        let depth = render_depth(
            &self.world,
            &self.true_pose(),
            self.config.fov,
            self.config.rays,
            self.config.max_range,
        )?;
        Ok(Observation {
            depth,
            pose_reading: self.pose_reading(),
            odometry,
            collided,
        })
    }

    fn clear_at(&self, p: &Point) -> bool {
        let r = self.config.agent_radius;
        self.world.obstacle_distance(p, r + self.world.cell_size()) >= r - CONTACT_EPS
    }

    /// Largest distance in `[0, want]` the disc can travel along `dir`
    /// without overlapping an obstacle.
    fn sweep(&self, from: &Point, dir: &Point, want: f64) -> f64 {
        let at = |t: f64| from.add(&dir.scale(t));
        let mut safe = 0.0;
        let mut t = 0.0;
        while t < want {
            let next = (t + SWEEP_STEP).min(want);
            if !self.clear_at(&at(next)) {
                let (mut lo, mut hi) = (safe, next);
                for _ in 0..40 {
                    let mid = 0.5 * (lo + hi);
                    if self.clear_at(&at(mid)) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return lo;
            }
            safe = next;
            t = next;
        }
        want
    }

    /// Applies one action; returns the new observation and the done flag.
    pub fn step(&mut self, action: Action) -> Result<(Observation, bool), SimError> {
        if self.done {
            return Err(SimError::EpisodeDone);
        }
        if action == Action::Stop && self.kind == EpisodeKind::Exploration {
            return Err(SimError::IllegalStop);
        }
        let n = self.noise.clone();
        let mut collided = false;
        let (actual, commanded) = match action {
            Action::Forward => {
                let want = (self.config.forward_step + truncated_gaussian(&mut self.rng, n.forward_sigma)).max(0.0);
                let pose = self.true_pose();
                let moved = self.sweep(&pose.position(), &pose.heading_vector(), want);
                collided = moved < want;
                let sensed = if collided { moved.min(self.config.forward_step) } else { self.config.forward_step };
                (Displacement::new(moved, 0.0, 0.0), Displacement::new(sensed, 0.0, 0.0))
            }
            Action::TurnLeft | Action::TurnRight => {
                let sign = if action == Action::TurnLeft { 1.0 } else { -1.0 };
                let nominal = sign * self.config.turn_step;
                let turned = nominal + truncated_gaussian(&mut self.rng, n.turn_sigma);
                (Displacement::new(0.0, 0.0, turned), Displacement::new(0.0, 0.0, nominal))
            }
            Action::Stop => (Displacement::ZERO, Displacement::ZERO),
        };
        let odometry = if action == Action::Stop {
            Displacement::ZERO
        } else {
            Displacement::new(
                commanded.dx + truncated_gaussian(&mut self.rng, n.drift_sigma_xy),
                commanded.dy + truncated_gaussian(&mut self.rng, n.drift_sigma_xy),
                commanded.dtheta + truncated_gaussian(&mut self.rng, n.drift_sigma_theta),
            )
        };
        self.truth = self.truth.compose(&actual);
        self.reading = self.reading.compose(&odometry);
        self.steps += 1;
        self.done = action == Action::Stop || self.steps >= self.config.max_steps;
        let obs = self.observe(odometry, collided)?;
        Ok((obs, self.done))
    }
}
