//! Global goal selection: frontier scoring, random and fixed strategies.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::nav::planner::cell_multiplier;
use crate::world::geodesic::{cost_to_meters, DistanceField};
use crate::world::grid::{Cell, CellIndex, OccupancyGrid};
use crate::world::raycast::RayWalker;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalSource {
    Frontier,
    Random,
    FixedEpisodeGoal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalGoal {
    pub cell: CellIndex,
    pub source: GoalSource,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GoalChoice {
    Goal(GlobalGoal),
    ExplorationComplete,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierParams {
    /// Rays cast from a frontier cell to estimate information gain.
    pub gain_rays: usize,
    pub max_range: f64,
    /// Frontiers that would reveal fewer UNKNOWN cells are ignored.
    pub min_gain: usize,
    pub unknown_cost: f64,
}

impl Default for FrontierParams {
    fn default() -> Self {
        Self { gain_rays: 72, max_range: 2.5, min_gain: 10, unknown_cost: 2.0 }
    }
}

pub enum Strategy<'a> {
    Frontier(FrontierParams),
    Random(&'a mut ChaCha8Rng),
    Fixed(CellIndex),
}

/// FREE cells with at least one 4-neighbour UNKNOWN.
pub fn frontier_cells(snapshot: &OccupancyGrid) -> Vec<CellIndex> {
    let mut out = Vec::new();
    for (i, &label) in snapshot.cells().iter().enumerate() {
        if label != Cell::Free {
            continue;
        }
        let c = snapshot.cell_at_index(i);
        let touches_unknown = [(1, 0), (-1, 0), (0, 1), (0, -1)]
            .iter()
            .any(|&(dc, dr)| snapshot.get(CellIndex::new(c.col + dc, c.row + dr)) == Some(Cell::Unknown));
        if touches_unknown {
            out.push(c);
        }
    }
    out
}

/// Distinct UNKNOWN cells seen by a fan of `rays` rays from the center of
/// `cell`, each stopped by the first OCCUPIED cell or at `max_range`.
pub fn information_gain(
    snapshot: &OccupancyGrid,
    cell: CellIndex,
    rays: usize,
    max_range: f64,
    stamp: &mut [u32],
    stamp_id: u32,
) -> usize {
    let origin = snapshot.cell_center(cell);
    let cells = snapshot.cells();
    let mut gain = 0;
    for k in 0..rays {
        let a = (k as f64 * 360.0 / rays as f64).to_radians();
        let dir = Point::new(a.cos(), a.sin());
        for step in RayWalker::new(snapshot, &origin, &dir) {
            if step.t_enter >= max_range || !snapshot.in_bounds(step.cell) {
                break;
            }
            let i = snapshot.index(step.cell);
            match cells[i] {
                Cell::Occupied if !step.corner => break,
                Cell::Unknown if stamp[i] != stamp_id => {
                    stamp[i] = stamp_id;
                    gain += 1;
                }
                _ => {}
            }
        }
    }
    gain
}

/// Upper bound on [`information_gain`]: every cell of the range disc.
fn max_gain(max_range: f64, cell_size: f64) -> usize {
    let r = max_range / cell_size + 1.0;
    (std::f64::consts::PI * r * r).ceil() as usize
}

/// Picks the next global goal.
///
/// `snapshot` is the classified map; `traversable` is the planning map
/// (obstacles inflated) used for reachability and path costs. Both must
/// share dimensions. Frontier scores are `gain / (1 + path_cost_m)`; ties
/// go to the cheaper frontier, then to the lexicographically smaller cell.
pub fn select_global_goal(
    snapshot: &OccupancyGrid,
    traversable: &OccupancyGrid,
    agent: CellIndex,
    strategy: Strategy<'_>,
) -> GoalChoice {
    match strategy {
        Strategy::Fixed(cell) => GoalChoice::Goal(GlobalGoal { cell, source: GoalSource::FixedEpisodeGoal }),
        Strategy::Random(rng) => {
            let field = reach_field(traversable, agent, 1.0);
            let free: Vec<usize> = (0..traversable.len())
                .filter(|&i| traversable.cells()[i] == Cell::Free && field.raw(i).is_some())
                .collect();
            if free.is_empty() {
                return GoalChoice::ExplorationComplete;
            }
            let pick = free[rng.random_range(0..free.len())];
            GoalChoice::Goal(GlobalGoal { cell: traversable.cell_at_index(pick), source: GoalSource::Random })
        }
        Strategy::Frontier(params) => {
            let field = reach_field(traversable, agent, params.unknown_cost);
            let mut candidates: Vec<(u64, CellIndex)> = frontier_cells(snapshot)
                .into_iter()
                .filter_map(|c| field.cost(c).map(|cost| (cost, c)))
                .collect();
            candidates.sort();
            let bound = max_gain(params.max_range, snapshot.cell_size()) as f64;
            let mut stamp = vec![0u32; snapshot.len()];
            let mut best: Option<(f64, u64, CellIndex)> = None;
            for (n, &(cost, c)) in candidates.iter().enumerate() {
                let meters = cost_to_meters(cost, snapshot.cell_size());
                if let Some((score, _, _)) = best {
                    // candidates are sorted by cost, so nothing later can win
                    if bound / (1.0 + meters) < score {
                        break;
                    }
                }
                let gain = information_gain(snapshot, c, params.gain_rays, params.max_range, &mut stamp, n as u32 + 1);
                if gain < params.min_gain {
                    continue;
                }
                let score = gain as f64 / (1.0 + meters);
                let better = match best {
                    None => true,
                    Some((bs, bc, bcell)) => score > bs || (score == bs && (cost, c) < (bc, bcell)),
                };
                if better {
                    best = Some((score, cost, c));
                }
            }
            match best {
                Some((_, _, cell)) => GoalChoice::Goal(GlobalGoal { cell, source: GoalSource::Frontier }),
                None => GoalChoice::ExplorationComplete,
            }
        }
    }
}

fn reach_field(map: &OccupancyGrid, agent: CellIndex, unknown_cost: f64) -> DistanceField {
    let cells = map.cells();
    let sources: Vec<usize> = if map.in_bounds(agent) { vec![map.index(agent)] } else { vec![] };
    DistanceField::compute(map.width(), map.height(), map.cell_size(), &sources, |i| {
        cell_multiplier(cells[i], unknown_cost)
    })
}
