//! Episode runners: the perception-estimation-policy loop, per-episode logs
//! and CSV results, and re-scoring from logs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{effective_window, AgentConfig};
use crate::episodes::{Dataset, Difficulty, EpisodeSpec};
use crate::geometry::{Displacement, Point, Pose};
use crate::mapper::{build_local_map, GlobalMap, MapError};
use crate::metrics::{
    column_means, map_metrics, pointnav_metrics, pose_metrics, ExplorationMetrics, MetricsError, PointnavMetrics,
    EXPLORATION_COLUMNS, POINTNAV_COLUMNS,
};
use crate::nav::{coverage_reward, local_reward, Body, ControllerParams, Decision, GoalSource, NavGoal, NavPolicy};
use crate::pose::{correct_displacement, PoseEstimate, SearchWindow};
use crate::sim::{Action, EpisodeKind, NoiseModel, SimError, Simulator};
use crate::world::grid::OccupancyGrid;
use crate::world::{rasterize, FloorPlan, WorldError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("episode {0} is missing its pointnav goal")]
    MissingGoal(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.display().to_string(), source }
}

fn read(path: &Path) -> Result<String, RunError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn write(path: &Path, text: &str) -> Result<(), RunError> {
    fs::write(path, text).map_err(io_err(path))
}

/// Ground truth an episode runs in.
#[derive(Debug, Clone)]
pub struct World {
    pub plan: Option<FloorPlan>,
    pub grid: Arc<OccupancyGrid>,
}

impl World {
    pub fn from_plan(plan: FloorPlan, cell_size: f64) -> Result<Self, RunError> {
        let grid = rasterize(&plan, cell_size)?;
        Ok(Self { plan: Some(plan), grid: Arc::new(grid) })
    }

    /// Loads a floorplan (`.json`) or a raw grid (`P-OCC` text).
    pub fn load(path: &Path, cell_size: f64) -> Result<Self, RunError> {
        let text = read(path)?;
        if text.starts_with("P-OCC") {
            Ok(Self { plan: None, grid: Arc::new(OccupancyGrid::from_text(&text)?) })
        } else {
            Self::from_plan(FloorPlan::from_json(&text)?, cell_size)
        }
    }
}

/// FNV-1a of the episode id folded with the run seed, then mixed.
pub fn episode_seed(id: &str, seed: u64, stream: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    // splitmix64 finalizer
    let mut z = h ^ seed.rotate_left(17) ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub step: usize,
    /// True world-frame pose after the action.
    pub pose: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<Action>,
    pub collided: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub step: usize,
    /// Estimated pose in the start frame.
    pub estimate: Pose,
    /// True pose in the start frame.
    pub truth: Pose,
    pub sensor: Displacement,
    pub applied: Displacement,
    pub uncorrectable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub step: usize,
    pub action: Action,
    pub global_goal: Option<[i64; 2]>,
    pub goal_source: Option<GoalSource>,
    pub local_goal: Option<[i64; 2]>,
    pub target: Option<Point>,
    pub global_resampled: bool,
    pub local_reset: Option<String>,
    pub terminal: bool,
    pub exploration_complete: bool,
    /// Decrease in estimated distance to the controller target.
    pub local_reward: f64,
    /// Newly explored area, m².
    pub coverage_reward: f64,
}

impl DecisionRecord {
    fn new(step: usize, d: &Decision) -> Self {
        Self {
            step,
            action: d.action,
            global_goal: d.global_goal.map(|g| [g.cell.col, g.cell.row]),
            goal_source: d.global_goal.map(|g| g.source),
            local_goal: d.local_goal.map(|g| [g.cell.col, g.cell.row]),
            target: d.target,
            global_resampled: d.global_resampled,
            local_reset: d.local_reset.map(str::to_string),
            terminal: d.terminal,
            exploration_complete: d.exploration_complete,
            local_reward: 0.0,
            coverage_reward: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpisodeMetrics {
    Exploration(ExplorationMetrics),
    Pointnav(PointnavMetrics),
}

impl EpisodeMetrics {
    pub fn values(&self) -> Vec<f64> {
        match self {
            EpisodeMetrics::Exploration(m) => m.values(),
            EpisodeMetrics::Pointnav(m) => m.values(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeRun {
    pub spec: EpisodeSpec,
    pub trajectory: Vec<TrajectoryRecord>,
    pub estimates: Vec<EstimateRecord>,
    pub decisions: Vec<DecisionRecord>,
    /// Classified global map cropped to the explored region.
    pub map: OccupancyGrid,
    pub steps: usize,
    pub metrics: EpisodeMetrics,
}

impl EpisodeRun {
    /// Translation error of the estimate at the last step, m.
    pub fn final_translation_error(&self) -> f64 {
        let last = self.estimates.last().expect("reset is always logged");
        last.estimate.position().distance(&last.truth.position())
    }
}

/// Classified global map restricted to its explored bounding box.
pub fn explored_crop(map: &GlobalMap, threshold: f64) -> Result<OccupancyGrid, MapError> {
    let c = map.center();
    let region = map.explored_bbox().unwrap_or((c, c, c, c));
    map.classify_region(threshold, region)
}

fn nav_goal(spec: &EpisodeSpec) -> Result<Option<NavGoal>, RunError> {
    if spec.kind == EpisodeKind::Exploration {
        return Ok(None);
    }
    let (Some(p), Some(o)) = (spec.goal_position, spec.goal_orientation) else {
        return Err(RunError::MissingGoal(spec.id.clone()));
    };
    let frame = spec.start;
    let heading_only = Pose::new(0.0, 0.0, frame.theta);
    Ok(Some(NavGoal {
        position: frame.inverse_transform_point(&p),
        orientation: heading_only.inverse_transform_point(&o),
    }))
}

/// Runs one episode end to end.
pub fn run_episode(
    world: &World,
    spec: &EpisodeSpec,
    cfg: &AgentConfig,
    noise: &NoiseModel,
) -> Result<EpisodeRun, RunError> {
    let limit = match spec.kind {
        EpisodeKind::Exploration => cfg.run.exploration_steps,
        EpisodeKind::Pointnav => cfg.run.pointnav_step_limit,
    };
    let mut sim_cfg = cfg.sim.clone();
    sim_cfg.max_steps = limit;
    let noise = noise.with_seed(episode_seed(&spec.id, cfg.run.seed ^ noise.seed, 1));
    let m = &cfg.mapper;
    let local_map = |scan: &[f64]| build_local_map(scan, sim_cfg.fov, sim_cfg.max_range, m.local_size, m.cell_size);

    let (mut sim, mut obs) = Simulator::reset(world.grid.clone(), spec.start, noise.clone(), spec.kind, sim_cfg.clone())?;
    let mut global = GlobalMap::new(m.global_size, m.cell_size)?;
    let mut est = PoseEstimate::new();
    let mut local = local_map(&obs.depth)?;
    global.register(&local, &est.pose);

    let body = Body {
        controller: ControllerParams {
            fov: sim_cfg.fov,
            forward_step: sim_cfg.forward_step,
            turn_step: sim_cfg.turn_step,
            agent_radius: sim_cfg.agent_radius,
            lateral_tolerance: ControllerParams::lateral_tolerance_for(cfg.policy.reach_radius, sim_cfg.forward_step),
            ..ControllerParams::default()
        },
        max_range: sim_cfg.max_range,
    };
    let mut policy_cfg = cfg.policy.clone();
    if spec.kind == EpisodeKind::Pointnav {
        policy_cfg.strategy = crate::nav::StrategyKind::Fixed;
    }
    let mut policy = NavPolicy::new(policy_cfg, body, nav_goal(spec)?, episode_seed(&spec.id, cfg.run.seed, 2));

    let mut trajectory = vec![TrajectoryRecord { step: 0, pose: sim.true_pose(), action: None, collided: false }];
    let mut estimates = vec![EstimateRecord {
        step: 0,
        estimate: est.pose,
        truth: sim.true_relative(),
        sensor: Displacement::ZERO,
        applied: Displacement::ZERO,
        uncorrectable: false,
    }];
    let mut decisions = Vec::new();

    for step in 0..limit {
        let d = policy.act(step, &global, &est.pose, &obs.depth, obs.collided);
        let mut record = DecisionRecord::new(step, &d);
        let (prev_pose, prev_explored) = (est.pose, global.explored_count());
        let (next, done) = sim.step(d.action)?;
        let next_local = local_map(&next.depth)?;
        let window = if cfg.pose.correction { effective_window(&cfg.pose.search, &noise, d.action) } else { SearchWindow::none() };
        let (applied, uncorrectable) = if !window.is_empty() {
            let c = correct_displacement(&next.odometry, &local, &next_local, &window);
            (c.displacement, c.uncorrectable)
        } else {
            (next.odometry, false)
        };
        est.integrate(applied);
        global.register(&next_local, &est.pose);
        if let Some(t) = d.target {
            record.local_reward = local_reward(&prev_pose, &est.pose, &t);
        }
        record.coverage_reward = coverage_reward(prev_explored, global.explored_count(), m.cell_size * m.cell_size);
        decisions.push(record);
        trajectory.push(TrajectoryRecord {
            step: step + 1,
            pose: sim.true_pose(),
            action: Some(d.action),
            collided: next.collided,
        });
        estimates.push(EstimateRecord {
            step: step + 1,
            estimate: est.pose,
            truth: sim.true_relative(),
            sensor: next.odometry,
            applied,
            uncorrectable,
        });
        local = next_local;
        obs = next;
        if done {
            break;
        }
    }

    let map = explored_crop(&global, cfg.policy.classify_threshold)?;
    let steps = sim.steps();
    let metrics = score_logs(spec, &trajectory, &estimates, &map, steps, world)?;
    Ok(EpisodeRun { spec: spec.clone(), trajectory, estimates, decisions, map, steps, metrics })
}

/// Metrics from the logged quantities alone, shared by `run` and `score`.
pub fn score_logs(
    spec: &EpisodeSpec,
    trajectory: &[TrajectoryRecord],
    estimates: &[EstimateRecord],
    map: &OccupancyGrid,
    steps: usize,
    world: &World,
) -> Result<EpisodeMetrics, RunError> {
    Ok(match spec.kind {
        EpisodeKind::Exploration => {
            let pairs: Vec<(Pose, Pose)> = estimates.iter().map(|e| (e.estimate, e.truth)).collect();
            EpisodeMetrics::Exploration(ExplorationMetrics {
                map: map_metrics(map, &world.grid, &spec.start),
                pose: pose_metrics(&pairs)?,
                steps,
            })
        }
        EpisodeKind::Pointnav => {
            let poses: Vec<Pose> = trajectory.iter().map(|t| t.pose).collect();
            EpisodeMetrics::Pointnav(pointnav_metrics(spec, &poses, steps, &world.grid)?)
        }
    })
}

/// One row of the per-episode table.
#[derive(Debug, Clone)]
pub struct EpisodeRow {
    pub id: String,
    pub kind: EpisodeKind,
    pub difficulty: Option<Difficulty>,
    pub result: Result<EpisodeMetrics, String>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub kind: EpisodeKind,
    pub rows: Vec<EpisodeRow>,
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

impl RunReport {
    pub fn columns(&self) -> &'static [&'static str] {
        match self.kind {
            EpisodeKind::Exploration => &EXPLORATION_COLUMNS,
            EpisodeKind::Pointnav => &POINTNAV_COLUMNS,
        }
    }

    pub fn successful(&self) -> impl Iterator<Item = (&EpisodeRow, &EpisodeMetrics)> {
        self.rows.iter().filter_map(|r| r.result.as_ref().ok().map(|m| (r, m)))
    }

    /// `(group, n, means)`: all episodes, then each difficulty tier present.
    pub fn aggregates(&self) -> Vec<(String, usize, Vec<f64>)> {
        let mut groups: Vec<(String, Option<Difficulty>)> = vec![("all".into(), None)];
        if self.kind == EpisodeKind::Pointnav {
            groups.extend(Difficulty::ALL.iter().map(|d| (d.name().to_string(), Some(*d))));
        }
        let mut out = Vec::new();
        for (name, tier) in groups {
            let rows: Vec<Vec<f64>> = self
                .successful()
                .filter(|(r, _)| tier.is_none() || r.difficulty == tier)
                .map(|(_, m)| m.values())
                .collect();
            if let Some(means) = column_means(&rows) {
                out.push((name, rows.len(), means));
            } else if tier.is_none() {
                out.push((name, 0, vec![f64::NAN; self.columns().len()]));
            }
        }
        out
    }

    pub fn per_episode_csv(&self) -> String {
        let mut out = format!("episode_id,kind,difficulty,status,{}\n", self.columns().join(","));
        for r in &self.rows {
            let kind = match r.kind {
                EpisodeKind::Exploration => "exploration",
                EpisodeKind::Pointnav => "pointnav",
            };
            let diff = r.difficulty.map(Difficulty::name).unwrap_or("");
            match &r.result {
                Ok(m) => {
                    let vals: Vec<String> = m.values().into_iter().map(fmt).collect();
                    let _ = writeln!(out, "{},{kind},{diff},ok,{}", r.id, vals.join(","));
                }
                Err(e) => {
                    let blanks = ",".repeat(self.columns().len() - 1);
                    let _ = writeln!(out, "{},{kind},{diff},error: {},{blanks}", r.id, e.replace([',', '\n'], ";"));
                }
            }
        }
        out
    }

    pub fn aggregate_csv(&self) -> String {
        let mut out = format!("group,n,{}\n", self.columns().join(","));
        for (name, n, means) in self.aggregates() {
            let vals: Vec<String> = means.into_iter().map(fmt).collect();
            let _ = writeln!(out, "{name},{n},{}", vals.join(","));
        }
        out
    }

    pub fn write_csvs(&self, dir: &Path) -> Result<(), RunError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        write(&dir.join("per_episode.csv"), &self.per_episode_csv())?;
        write(&dir.join("aggregate.csv"), &self.aggregate_csv())?;
        write(&dir.join("metadata.json"), METADATA)
    }
}

const METADATA: &str = r#"{
  "IoU": "mean of FIoU and OIoU",
  "FIoU": "free-cell IoU over ground-truth cells, built map resampled onto the ground-truth grid",
  "OIoU": "occupied-cell IoU over ground-truth cells",
  "Acc": "m2 of ground-truth cells whose built label matches",
  "AS": "m2 of explored built-map cells; AS = FAS + OAS",
  "TE": "translation error averaged over every step including the reset",
  "AE": "absolute heading error averaged over every step including the reset",
  "D2G": "straight-line distance when unobstructed, otherwise grid geodesic",
  "PNSR": "D2G <= 0.2 m (also called PGSR)",
  "ASR": "OE < 10 degrees",
  "SPL": "SR * l / max(p, l)",
  "SoftSPL": "(1 - min(1, D2G / l)) * l / max(p, l)"
}
"#;

fn jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for it in items {
        let _ = writeln!(out, "{}", serde_json::to_string(it).expect("records serialize"));
    }
    out
}

fn parse_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, RunError> {
    read(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l)
                .map_err(|e| RunError::Format { path: path.display().to_string(), message: e.to_string() })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EpisodeSummary {
    /// Position in the dataset, so rescoring restores the run's row order.
    #[serde(default)]
    index: usize,
    spec: EpisodeSpec,
    steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metrics: Option<EpisodeMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Writes `logs/<id>/` for the episode at `index` in its dataset.
pub fn write_episode_logs(logs: &Path, index: usize, run: &EpisodeRun) -> Result<(), RunError> {
    let dir = logs.join(&run.spec.id);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    write(&dir.join("trajectory.jsonl"), &jsonl(&run.trajectory))?;
    write(&dir.join("estimates.jsonl"), &jsonl(&run.estimates))?;
    write(&dir.join("decisions.jsonl"), &jsonl(&run.decisions))?;
    write(&dir.join("map.pocc"), &run.map.to_text())?;
    let summary = EpisodeSummary { index, spec: run.spec.clone(), steps: run.steps, metrics: Some(run.metrics), error: None };
    write(&dir.join("episode.json"), &serde_json::to_string_pretty(&summary).expect("summary serializes"))
}

/// Runs every episode (in parallel, results kept in dataset order). With
/// `out_dir`, writes logs, `per_episode.csv` and `aggregate.csv` there.
pub fn run_dataset(
    world: &World,
    dataset: &Dataset,
    cfg: &AgentConfig,
    noise: &NoiseModel,
    out_dir: Option<&Path>,
) -> Result<(RunReport, Vec<Result<EpisodeRun, String>>), RunError> {
    let runs: Vec<Result<EpisodeRun, String>> = dataset
        .episodes
        .par_iter()
        .map(|e| run_episode(world, e, cfg, noise).map_err(|err| err.to_string()))
        .collect();
    let rows = dataset
        .episodes
        .iter()
        .zip(&runs)
        .map(|(e, r)| EpisodeRow {
            id: e.id.clone(),
            kind: e.kind,
            difficulty: e.difficulty,
            result: r.as_ref().map(|run| run.metrics).map_err(Clone::clone),
        })
        .collect();
    let report = RunReport { kind: dataset.manifest.kind, rows };
    if let Some(dir) = out_dir {
        let logs = dir.join("logs");
        for (index, (e, r)) in dataset.episodes.iter().zip(&runs).enumerate() {
            match r {
                Ok(run) => write_episode_logs(&logs, index, run)?,
                Err(msg) => {
                    let d = logs.join(&e.id);
                    fs::create_dir_all(&d).map_err(io_err(&d))?;
                    let s = EpisodeSummary { index, spec: e.clone(), steps: 0, metrics: None, error: Some(msg.clone()) };
                    write(&d.join("episode.json"), &serde_json::to_string_pretty(&s).expect("summary serializes"))?;
                }
            }
        }
        report.write_csvs(dir)?;
    }
    Ok((report, runs))
}

/// Recomputes metrics for every episode under `logs` (one directory per
/// episode), in dataset order.
pub fn score_directory(logs: &Path, world: &World) -> Result<RunReport, RunError> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(logs)
        .map_err(io_err(logs))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("episode.json").is_file())
        .collect();
    dirs.sort();
    let mut rows = Vec::new();
    let mut kind = None;
    for dir in dirs {
        let path = dir.join("episode.json");
        let summary: EpisodeSummary = serde_json::from_str(&read(&path)?)
            .map_err(|e| RunError::Format { path: path.display().to_string(), message: e.to_string() })?;
        let spec = summary.spec;
        kind.get_or_insert(spec.kind);
        let result = match summary.error {
            Some(e) => Err(e),
            None => {
                let trajectory: Vec<TrajectoryRecord> = parse_jsonl(&dir.join("trajectory.jsonl"))?;
                let estimates: Vec<EstimateRecord> = parse_jsonl(&dir.join("estimates.jsonl"))?;
                let map = OccupancyGrid::from_text(&read(&dir.join("map.pocc"))?)?;
                score_logs(&spec, &trajectory, &estimates, &map, summary.steps, world).map_err(|e| e.to_string())
            }
        };
        rows.push((summary.index, EpisodeRow { id: spec.id.clone(), kind: spec.kind, difficulty: spec.difficulty, result }));
    }
    rows.sort_by_key(|(i, _)| *i);
    let rows = rows.into_iter().map(|(_, r)| r).collect();
    Ok(RunReport { kind: kind.unwrap_or(EpisodeKind::Exploration), rows })
}

/// Stacks aggregate CSVs of several runs into one table, prefixing each row
/// with its run label. Columns are the union in first-seen order.
pub fn merge_aggregates(runs: &[(String, String)]) -> Result<String, RunError> {
    let mut columns: Vec<String> = Vec::new();
    let mut tables = Vec::new();
    for (label, text) in runs {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| RunError::Format { path: label.clone(), message: e.to_string() })?
            .iter()
            .map(str::to_string)
            .collect();
        for h in &header {
            if !columns.contains(h) {
                columns.push(h.clone());
            }
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| RunError::Format { path: label.clone(), message: e.to_string() })?;
            rows.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
        }
        tables.push((label, header, rows));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head = vec!["run".to_string()];
    head.extend(columns.iter().cloned());
    w.write_record(&head).expect("in-memory write");
    for (label, header, rows) in tables {
        for row in rows {
            let mut rec = vec![label.clone()];
            for c in &columns {
                rec.push(header.iter().position(|h| h == c).map(|i| row[i].clone()).unwrap_or_default());
            }
            w.write_record(&rec).expect("in-memory write");
        }
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8"))
}
