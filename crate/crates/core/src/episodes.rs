//! Exploration and PointNav++ episode datasets: sampling, tiers, the JSON
//! lines file format and the geodesic distance histogram.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point, Pose};
use crate::sim::EpisodeKind;
use crate::world::geodesic::DistanceField;
use crate::world::grid::{CellIndex, OccupancyGrid};
use crate::world::FloorPlan;

pub const EPISODE_GENERATOR_VERSION: u32 = 1;
/// Distance of the navigation goal in front of a point of interest, m.
pub const GOAL_OFFSET: f64 = 1.0;
pub const EASY_MAX: f64 = 15.0;
pub const MEDIUM_MAX: f64 = 30.0;
pub const TIER_RULE: &str = "easy: d < 15 m; medium: 15 m < d <= 30 m; difficult: d > 30 m";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no free cell with agent clearance to start from")]
    NoStartCells,
    #[error("world has no points of interest")]
    NoPois,
    #[error("goal of point of interest {0} is not reachable with agent clearance")]
    UnreachableGoal(String),
    #[error("dataset line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("cannot build a histogram from zero episodes")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Medium,
    Difficult,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Difficult];

    /// Tier of a geodesic distance; exactly 15 m belongs to no tier.
    pub fn of(d: f64) -> Option<Difficulty> {
        if d < EASY_MAX {
            Some(Difficulty::Easy)
        } else if d > EASY_MAX && d <= MEDIUM_MAX {
            Some(Difficulty::Medium)
        } else if d > MEDIUM_MAX {
            Some(Difficulty::Difficult)
        } else {
            None
        }
    }

    pub fn contains(self, d: f64) -> bool {
        Difficulty::of(d) == Some(self)
    }

    pub fn name(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Difficult => "difficult",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldRef {
    /// Floorplan file, relative to the dataset file.
    pub floorplan: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub id: String,
    pub world_ref: WorldRef,
    pub kind: EpisodeKind,
    pub start: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_position: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_orientation: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poi_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<Difficulty>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_geodesic: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TierCounts {
    pub easy: usize,
    pub medium: usize,
    pub difficult: usize,
}

impl TierCounts {
    pub fn of(episodes: &[EpisodeSpec]) -> Self {
        let mut t = TierCounts::default();
        for e in episodes {
            match e.difficulty {
                Some(Difficulty::Easy) => t.easy += 1,
                Some(Difficulty::Medium) => t.medium += 1,
                Some(Difficulty::Difficult) => t.difficult += 1,
                None => {}
            }
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingTier {
    pub poi_id: String,
    pub difficulty: Difficulty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub world_ref: WorldRef,
    pub kind: EpisodeKind,
    pub seed: u64,
    pub generator_version: u32,
    pub count: usize,
    pub tiers: TierCounts,
    pub tier_rule: String,
    #[serde(default)]
    pub missing: Vec<MissingTier>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Manifest(Manifest),
    Episode(EpisodeSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub episodes: Vec<EpisodeSpec>,
}

impl Dataset {
    pub fn new(world_ref: WorldRef, kind: EpisodeKind, seed: u64, episodes: Vec<EpisodeSpec>, missing: Vec<MissingTier>) -> Self {
        let manifest = Manifest {
            world_ref,
            kind,
            seed,
            generator_version: EPISODE_GENERATOR_VERSION,
            count: episodes.len(),
            tiers: TierCounts::of(&episodes),
            tier_rule: TIER_RULE.to_string(),
            missing,
        };
        Self { manifest, episodes }
    }

    /// One JSON object per line: the manifest first, then the episodes.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let line = |r: &Record| serde_json::to_string(r).expect("records serialize");
        let _ = writeln!(out, "{}", line(&Record::Manifest(self.manifest.clone())));
        for e in &self.episodes {
            let _ = writeln!(out, "{}", line(&Record::Episode(e.clone())));
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, DatasetError> {
        let mut manifest = None;
        let mut episodes = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(raw)
                .map_err(|e| DatasetError::Format { line: i + 1, message: e.to_string() })?;
            match rec {
                Record::Manifest(m) if manifest.is_none() && episodes.is_empty() => manifest = Some(m),
                Record::Manifest(_) => {
                    return Err(DatasetError::Format { line: i + 1, message: "manifest must be the first record".into() })
                }
                Record::Episode(e) => episodes.push(e),
            }
        }
        let manifest = manifest.ok_or(DatasetError::Format { line: 1, message: "missing manifest".into() })?;
        if manifest.count != episodes.len() {
            return Err(DatasetError::Format {
                line: 1,
                message: format!("manifest counts {} episodes, file has {}", manifest.count, episodes.len()),
            });
        }
        Ok(Self { manifest, episodes })
    }
}

/// Ground truth needed to sample episodes.
pub struct EpisodeWorld<'a> {
    pub plan: &'a FloorPlan,
    pub grid: &'a OccupancyGrid,
    pub world_ref: WorldRef,
    pub agent_radius: f64,
}

impl EpisodeWorld<'_> {
    fn start_cells(&self) -> Vec<usize> {
        let mask = self.grid.clearance_mask(self.agent_radius);
        (0..mask.len()).filter(|&i| mask[i]).collect()
    }
}

fn random_heading(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(0..36) as f64 * 10.0
}

/// `count` starts drawn uniformly over clearance-valid free cells, with
/// headings uniform over the 36 multiples of 10°.
pub fn generate_exploration_episodes(
    world: &EpisodeWorld<'_>,
    count: usize,
    seed: u64,
) -> Result<Vec<EpisodeSpec>, DatasetError> {
    let cells = world.start_cells();
    if cells.is_empty() {
        return Err(DatasetError::NoStartCells);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|k| {
            let i = cells[rng.random_range(0..cells.len())];
            let p = world.grid.cell_center(world.grid.cell_at_index(i));
            EpisodeSpec {
                id: format!("explore-{k:04}"),
                world_ref: world.world_ref.clone(),
                kind: EpisodeKind::Exploration,
                start: Pose::new(p.x, p.y, random_heading(&mut rng)),
                goal_position: None,
                goal_orientation: None,
                poi_id: None,
                difficulty: None,
                gt_geodesic: None,
            }
        })
        .collect())
}

/// Up to one episode per tier per point of interest. Starts are found by
/// rejection sampling with `budget` draws per tier; tiers that cannot be
/// filled are reported, not fabricated.
pub fn generate_pointnav_episodes(
    world: &EpisodeWorld<'_>,
    seed: u64,
    budget: usize,
) -> Result<(Vec<EpisodeSpec>, Vec<MissingTier>), DatasetError> {
    if world.plan.pois.is_empty() {
        return Err(DatasetError::NoPois);
    }
    let cells = world.start_cells();
    if cells.is_empty() {
        return Err(DatasetError::NoStartCells);
    }
    let grid = world.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut episodes = Vec::new();
    let mut missing = Vec::new();
    for poi in &world.plan.pois {
        let goal = poi.anchor.add(&poi.inward_normal.scale(GOAL_OFFSET));
        let goal_cell = grid.world_to_cell(&goal);
        if !grid.is_free(goal_cell) || !grid.has_clearance(&goal, world.agent_radius) {
            return Err(DatasetError::UnreachableGoal(poi.id.clone()));
        }
        let field = DistanceField::over_free(grid, goal_cell)
            .map_err(|_| DatasetError::UnreachableGoal(poi.id.clone()))?;
        for tier in Difficulty::ALL {
            let mut found = None;
            for _ in 0..budget {
                let i = cells[rng.random_range(0..cells.len())];
                let heading = random_heading(&mut rng);
                if let Some(d) = field.raw(i).map(|c| crate::world::geodesic::cost_to_meters(c, grid.cell_size())) {
                    if tier.contains(d) {
                        found = Some((i, heading, d));
                        break;
                    }
                }
            }
            match found {
                Some((i, heading, d)) => {
                    let p = grid.cell_center(grid.cell_at_index(i));
                    episodes.push(EpisodeSpec {
                        id: format!("{}-{}", poi.id, tier.name()),
                        world_ref: world.world_ref.clone(),
                        kind: EpisodeKind::Pointnav,
                        start: Pose::new(p.x, p.y, heading),
                        goal_position: Some(goal),
                        goal_orientation: Some(poi.inward_normal.scale(-1.0)),
                        poi_id: Some(poi.id.clone()),
                        difficulty: Some(tier),
                        gt_geodesic: Some(d),
                    });
                }
                None => missing.push(MissingTier { poi_id: poi.id.clone(), difficulty: tier }),
            }
        }
    }
    Ok((episodes, missing))
}

/// Index of the grid cell holding a start pose.
pub fn start_cell(grid: &OccupancyGrid, e: &EpisodeSpec) -> CellIndex {
    grid.world_to_cell(&e.start.position())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `(bin_start_m, bin_end_m, count)` with 1 m bins from 0.
    pub bins: Vec<(f64, f64, usize)>,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
}

impl Histogram {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_start_m,bin_end_m,count\n");
        for (a, b, n) in &self.bins {
            let _ = writeln!(out, "{a:.0},{b:.0},{n}");
        }
        out
    }

    /// Total count in bins starting at or above `from` meters.
    pub fn mass_from(&self, from: f64) -> usize {
        self.bins.iter().filter(|b| b.0 >= from).map(|b| b.2).sum()
    }
}

/// Histogram of ground-truth geodesic distances in 1 m bins.
pub fn distance_histogram(episodes: &[EpisodeSpec]) -> Result<Histogram, DatasetError> {
    let mut d: Vec<f64> = episodes.iter().filter_map(|e| e.gt_geodesic).collect();
    if d.is_empty() {
        return Err(DatasetError::Empty);
    }
    d.sort_by(f64::total_cmp);
    let max = *d.last().expect("non-empty");
    let nbins = (max.floor() as usize) + 1;
    let mut bins: Vec<(f64, f64, usize)> = (0..nbins).map(|b| (b as f64, b as f64 + 1.0, 0)).collect();
    for &v in &d {
        bins[(v.floor() as usize).min(nbins - 1)].2 += 1;
    }
    let n = d.len();
    let median = if n % 2 == 1 { d[n / 2] } else { 0.5 * (d[n / 2 - 1] + d[n / 2]) };
    Ok(Histogram { bins, count: n, mean: d.iter().sum::<f64>() / n as f64, median, max })
}
