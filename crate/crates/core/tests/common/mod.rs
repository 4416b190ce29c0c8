//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use gallerynav_core::episodes::{generate_exploration_episodes, Dataset, EpisodeSpec, EpisodeWorld, WorldRef};
use gallerynav_core::runner::World;
use gallerynav_core::sim::EpisodeKind;
use gallerynav_core::world::grid::{Cell, CellIndex, OccupancyGrid};
use gallerynav_core::world::{generate_museum, FloorPlan, MuseumParams};
use petgraph::algo::dijkstra;
use petgraph::graph::{DiGraph, NodeIndex};

pub const CELL: f64 = 0.05;
pub const AGENT_RADIUS: f64 = 0.18;

pub fn museum(seed: u64, params: &MuseumParams) -> World {
    let plan = generate_museum(seed, params).expect("museum generates");
    World::from_plan(plan, params.cell_size).expect("museum rasterizes")
}

pub fn plan_of(world: &World) -> &FloorPlan {
    world.plan.as_ref().expect("world built from a floorplan")
}

pub fn episode_world<'a>(world: &'a World, name: &str) -> EpisodeWorld<'a> {
    EpisodeWorld {
        plan: plan_of(world),
        grid: &world.grid,
        world_ref: WorldRef { floorplan: name.to_string(), seed: None },
        agent_radius: AGENT_RADIUS,
    }
}

pub fn exploration_dataset(world: &World, count: usize, seed: u64) -> Dataset {
    let ew = episode_world(world, "world.json");
    let eps = generate_exploration_episodes(&ew, count, seed).expect("start cells exist");
    Dataset::new(ew.world_ref.clone(), EpisodeKind::Exploration, seed, eps, vec![])
}

pub fn pointnav_dataset(episodes: Vec<EpisodeSpec>) -> Dataset {
    let world_ref = episodes[0].world_ref.clone();
    Dataset::new(world_ref, EpisodeKind::Pointnav, 0, episodes, vec![])
}

/// Multiplier for entering a cell, `None` when it is impassable.
fn multiplier(label: Cell, unknown_cost: f64) -> Option<f64> {
    match label {
        Cell::Free => Some(1.0),
        Cell::Unknown => Some(unknown_cost),
        Cell::Occupied => None,
    }
}

/// Shortest 8-connected path cost by petgraph's Dijkstra, in integer units
/// of 1 000 000 per straight step; diagonals may not cut a blocked corner.
pub struct DijkstraOracle {
    graph: DiGraph<(), u64>,
    nodes: HashMap<(i64, i64), NodeIndex>,
}

impl DijkstraOracle {
    pub fn new(grid: &OccupancyGrid, unknown_cost: f64) -> Self {
        let mut graph = DiGraph::new();
        let mut nodes = HashMap::new();
        let label = |c: i64, r: i64| grid.get(CellIndex::new(c, r)).and_then(|l| multiplier(l, unknown_cost));
        for r in 0..grid.height() as i64 {
            for c in 0..grid.width() as i64 {
                if label(c, r).is_some() {
                    nodes.insert((c, r), graph.add_node(()));
                }
            }
        }
        let straight = 1_000_000.0f64;
        let diagonal = (2.0f64.sqrt() * 1e6).round();
        for (&(c, r), &from) in &nodes {
            for dc in -1i64..=1 {
                for dr in -1i64..=1 {
                    if dc == 0 && dr == 0 {
                        continue;
                    }
                    let Some(m) = label(c + dc, r + dr) else { continue };
                    if dc != 0 && dr != 0 && (label(c + dc, r).is_none() || label(c, r + dr).is_none()) {
                        continue;
                    }
                    let base = if dc != 0 && dr != 0 { diagonal } else { straight };
                    let w = (base * m).round() as u64;
                    graph.add_edge(from, nodes[&(c + dc, r + dr)], w);
                }
            }
        }
        Self { graph, nodes }
    }

    pub fn cost(&self, from: CellIndex, to: CellIndex) -> Option<u64> {
        let (&a, &b) = (self.nodes.get(&(from.col, from.row))?, self.nodes.get(&(to.col, to.row))?);
        dijkstra(&self.graph, a, Some(b), |e| *e.weight()).get(&b).copied()
    }

    /// Costs from `from` to every reachable passable cell.
    pub fn all_from(&self, from: CellIndex) -> HashMap<(i64, i64), u64> {
        let Some(&a) = self.nodes.get(&(from.col, from.row)) else { return HashMap::new() };
        let costs = dijkstra(&self.graph, a, None, |e| *e.weight());
        self.nodes.iter().filter_map(|(&k, n)| costs.get(n).map(|&v| (k, v))).collect()
    }
}

pub fn meters(cost: u64) -> f64 {
    cost as f64 / 1e6 * CELL
}

pub fn median(mut v: Vec<f64>) -> f64 {
    assert!(!v.is_empty());
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
