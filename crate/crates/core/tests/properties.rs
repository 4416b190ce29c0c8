mod common;

use std::sync::Arc;

use common::{DijkstraOracle, CELL};
use gallerynav_core::episodes::{Dataset, Difficulty, EpisodeSpec, WorldRef};
use gallerynav_core::geometry::{angle_between_deg, Displacement, Point, Pose};
use gallerynav_core::mapper::{build_local_map, GlobalMap};
use gallerynav_core::metrics::{compare_grids, pointnav_metrics};
use gallerynav_core::nav::{local_controller, local_reward, plan, ControllerParams, Surroundings};
use gallerynav_core::pose::{alignment_score, correct_displacement, sensor_displacement, PoseEstimate, ScoreRule, SearchWindow};
use gallerynav_core::sim::{render_depth, Action, EpisodeKind, NoiseModel, SimConfig, Simulator};
use gallerynav_core::world::raycast::cast_unchecked;
use gallerynav_core::world::{geodesic_distance, rasterize, raycast, Cell, CellIndex, FloorPlan, OccupancyGrid, Rect};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid_from_seed(seed: u64, size: usize, obstacle: f64, unknown: f64) -> OccupancyGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = OccupancyGrid::new(size, size, CELL, Point::new(0.0, 0.0), Cell::Free).unwrap();
    for i in 0..g.len() {
        let u: f64 = rng.random();
        if u < obstacle {
            g.set(g.cell_at_index(i), Cell::Occupied);
        } else if u < obstacle + unknown {
            g.set(g.cell_at_index(i), Cell::Unknown);
        }
    }
    g
}

fn free_cells(g: &OccupancyGrid, seed: u64, n: usize) -> Vec<CellIndex> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let free: Vec<CellIndex> = (0..g.len()).map(|i| g.cell_at_index(i)).filter(|&c| g.is_free(c)).collect();
    (0..n).map(|_| free[rng.random_range(0..free.len())]).collect()
}

fn geodesic(g: &OccupancyGrid, a: CellIndex, b: CellIndex) -> Option<f64> {
    geodesic_distance(g, &g.cell_center(a), &g.cell_center(b)).unwrap().meters()
}

fn room(w: f64, h: f64) -> OccupancyGrid {
    rasterize(&FloorPlan::single_room(Rect::new(0.0, 0.0, w, h)), CELL).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn geodesic_is_a_metric(seed in any::<u64>()) {
        let g = grid_from_seed(seed, 24, 0.15, 0.0);
        let c = free_cells(&g, seed, 3);
        let (a, b, m) = (c[0], c[1], c[2]);
        prop_assert_eq!(geodesic(&g, a, a), Some(0.0));
        prop_assert_eq!(geodesic(&g, a, b), geodesic(&g, b, a));
        if let (Some(ab), Some(bm), Some(am)) = (geodesic(&g, a, b), geodesic(&g, b, m), geodesic(&g, a, m)) {
            prop_assert!(am <= ab + bm + 1e-9);
            prop_assert!(ab + 1e-9 >= g.cell_center(a).distance(&g.cell_center(b)));
        }
    }

    #[test]
    fn astar_matches_dijkstra(seed in any::<u64>(), unknown_cost in prop::sample::select(vec![1.0, 2.0, 3.5])) {
        let g = grid_from_seed(seed, 30, 0.2, 0.2);
        let c = free_cells(&g, seed, 2);
        let astar = plan(&g, c[0], c[1], unknown_cost).unwrap().map(|p| p.cost);
        prop_assert_eq!(astar, DijkstraOracle::new(&g, unknown_cost).cost(c[0], c[1]));
    }

    #[test]
    fn raycast_is_monotone(seed in any::<u64>(), angle in 0.0f64..360.0, range in 0.1f64..2.5, shrink in 0.1f64..1.0) {
        let mut g = grid_from_seed(seed, 60, 0.03, 0.0);
        let origin = free_cells(&g, seed, 1)[0];
        let pose = Pose::new(g.cell_center(origin).x, g.cell_center(origin).y, angle);
        let full = raycast(&g, &pose, 0.0, range).unwrap();
        let short = raycast(&g, &pose, 0.0, range * shrink).unwrap();
        prop_assert!(short.distance <= full.distance + 1e-12);
        // adding an obstacle never lengthens a ray
        let extra = free_cells(&g, seed.wrapping_add(1), 1)[0];
        if extra != origin {
            g.set(extra, Cell::Occupied);
            let blocked = raycast(&g, &pose, 0.0, range).unwrap();
            prop_assert!(blocked.distance <= full.distance + 1e-12);
        }
    }

    #[test]
    fn local_rewards_telescope(steps in prop::collection::vec((-0.3f64..0.3, -0.3f64..0.3), 1..60), gx in -5.0f64..5.0, gy in -5.0f64..5.0) {
        let goal = Point::new(gx, gy);
        let mut poses = vec![Pose::new(0.0, 0.0, 0.0)];
        for (dx, dy) in steps {
            let p = poses.last().unwrap();
            poses.push(Pose::new(p.x + dx, p.y + dy, 0.0));
        }
        let sum: f64 = poses.windows(2).map(|w| local_reward(&w[0], &w[1], &goal)).sum();
        let direct = poses[0].position().distance(&goal) - poses.last().unwrap().position().distance(&goal);
        prop_assert!((sum - direct).abs() < 1e-9);
    }

    #[test]
    fn integrating_sensor_displacements_recovers_the_pose(
        poses in prop::collection::vec((-20.0f64..20.0, -20.0f64..20.0, 0.0f64..360.0), 2..40)
    ) {
        let poses: Vec<Pose> = poses.into_iter().map(|(x, y, t)| Pose::new(x, y, t)).collect();
        let mut est = PoseEstimate::new();
        for w in poses.windows(2) {
            est.integrate(sensor_displacement(&w[0], &w[1]));
        }
        let truth = poses.last().unwrap().relative_to(&poses[0]);
        prop_assert!(est.pose.position().distance(&truth.position()) < 1e-8);
        prop_assert!(angle_between_deg(est.pose.theta, truth.theta) < 1e-8);
    }

    #[test]
    fn map_metric_bounds(seed in any::<u64>()) {
        let built = grid_from_seed(seed, 20, 0.2, 0.4);
        let gt = grid_from_seed(seed.wrapping_mul(31), 20, 0.2, 0.1);
        let m = compare_grids(&built, &gt).unwrap();
        for v in [m.iou, m.fiou, m.oiou] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!((m.area_seen - (m.free_area_seen + m.occupied_area_seen)).abs() < 1e-12);
        prop_assert!(m.acc <= m.area_seen + 1e-12);
    }

    #[test]
    fn pointnav_metric_bounds(
        moves in prop::collection::vec((-0.25f64..0.25, -0.25f64..0.25), 0..80),
        heading in 0.0f64..360.0,
        gx in 1.0f64..7.0,
        gy in 0.5f64..2.5,
    ) {
        let world = room(8.0, 3.0);
        let start = Pose::new(0.6, 1.5, 0.0);
        let goal = Point::new(gx, gy);
        let l = geodesic_distance(&world, &start.position(), &goal).unwrap().meters().unwrap();
        let spec = EpisodeSpec {
            id: "p".into(),
            world_ref: WorldRef { floorplan: "room.json".into(), seed: None },
            kind: EpisodeKind::Pointnav,
            start,
            goal_position: Some(goal),
            goal_orientation: Some(Point::new(1.0, 0.0)),
            poi_id: Some("poi".into()),
            difficulty: Some(Difficulty::Easy),
            gt_geodesic: Some(l),
        };
        let mut traj = vec![start];
        for (dx, dy) in moves {
            let p = traj.last().unwrap();
            traj.push(Pose::new((p.x + dx).clamp(0.3, 7.7), (p.y + dy).clamp(0.3, 2.7), heading));
        }
        let m = pointnav_metrics(&spec, &traj, traj.len() - 1, &world).unwrap();
        prop_assert!(m.spl <= m.sr);
        let eff = l / m.path_length.max(l);
        prop_assert!((m.soft_spl - (1.0 - (m.d2g / l).min(1.0)) * eff).abs() < 1e-12);
        if m.sr == 0.0 {
            prop_assert!(m.soft_spl >= m.spl);
        } else {
            prop_assert!(m.spl - m.soft_spl <= 0.2 / l + 1e-12);
        }
        prop_assert!((0.0..=1.0).contains(&m.soft_spl));
        prop_assert_eq!(m.sr, m.pnsr * m.asr);
    }

    #[test]
    fn dataset_jsonl_roundtrips(
        starts in prop::collection::vec((0.0f64..100.0, 0.0f64..100.0, 0u32..36, prop::option::of(0.1f64..80.0)), 0..20),
        seed in any::<u64>(),
    ) {
        let world_ref = WorldRef { floorplan: "w.json".into(), seed: Some(seed) };
        let episodes: Vec<EpisodeSpec> = starts
            .into_iter()
            .enumerate()
            .map(|(k, (x, y, h, d))| EpisodeSpec {
                id: format!("e{k}"),
                world_ref: world_ref.clone(),
                kind: EpisodeKind::Pointnav,
                start: Pose::new(x, y, h as f64 * 10.0),
                goal_position: Some(Point::new(y / 3.0, x * 0.7)),
                goal_orientation: Some(Point::new(0.0, -1.0)),
                poi_id: Some(format!("poi-{k}")),
                difficulty: d.and_then(Difficulty::of),
                gt_geodesic: d,
            })
            .collect();
        let ds = Dataset::new(world_ref, EpisodeKind::Pointnav, seed, episodes, vec![]);
        let back = Dataset::from_jsonl(&ds.to_jsonl()).unwrap();
        prop_assert_eq!(back.to_jsonl(), ds.to_jsonl());
        prop_assert_eq!(back, ds);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn registration_only_grows_the_explored_area(
        poses in prop::collection::vec((0.6f64..5.4, 0.6f64..5.4, 0.0f64..360.0), 1..6)
    ) {
        let world = room(6.0, 6.0);
        let mut global = GlobalMap::new(401, CELL).unwrap();
        let mut prev = 0;
        let origin = Pose::new(poses[0].0, poses[0].1, poses[0].2);
        for (x, y, t) in poses {
            let p = Pose::new(x, y, t);
            let scan = render_depth(&world, &p, 90.0, 128, 2.5).unwrap();
            let local = build_local_map(&scan, 90.0, 2.5, 101, CELL).unwrap();
            global.register(&local, &p.relative_to(&origin));
            let n = global.explored_count();
            prop_assert!(n >= prev);
            prev = n;
        }
        let c = global.center();
        for dc in -60..=60 {
            for dr in -60..=60 {
                if let Some(o) = global.occupancy(CellIndex::new(c + dc, c + dr)) {
                    prop_assert!((0.0..=1.0).contains(&o));
                }
            }
        }
    }

    #[test]
    fn correction_never_lowers_the_score(
        x in 1.5f64..4.5, y in 1.5f64..4.5, heading in 0.0f64..360.0,
        ex in -0.08f64..0.08, ey in -0.08f64..0.08, et in -3.0f64..3.0,
        signed in any::<bool>(),
    ) {
        let world = room(6.0, 6.0);
        let prev_pose = Pose::new(x, y, heading);
        let curr_pose = prev_pose.compose(&Displacement::new(0.25, 0.0, 0.0));
        let scan = |p: &Pose| render_depth(&world, p, 90.0, 128, 2.5).unwrap();
        let prev = build_local_map(&scan(&prev_pose), 90.0, 2.5, 101, CELL).unwrap();
        let curr = build_local_map(&scan(&curr_pose), 90.0, 2.5, 101, CELL).unwrap();
        let noisy = Displacement::new(0.25 + ex, ey, et);
        let search = SearchWindow { score: if signed { ScoreRule::Signed } else { ScoreRule::Structure }, ..SearchWindow::default() };
        let c = correct_displacement(&noisy, &prev, &curr, &search);
        if let Some(base) = alignment_score(&prev, &curr, &noisy, &noisy, &search) {
            prop_assert!(!c.uncorrectable);
            prop_assert!(c.score >= base);
            prop_assert_eq!(alignment_score(&prev, &curr, &c.displacement, &noisy, &search), Some(c.score));
        }
    }

    #[test]
    fn controller_reaches_goals_in_open_space(heading in 0.0f64..360.0, bearing in 0.0f64..360.0, d in 0.3f64..3.0) {
        let params = ControllerParams::default();
        let goal = Point::new(d * bearing.to_radians().cos(), d * bearing.to_radians().sin());
        let mut pose = Pose::new(0.0, 0.0, heading);
        let turn = angle_between_deg(heading, bearing);
        let bound = (turn / 10.0).ceil() as usize + (d / 0.25).ceil() as usize + 2;
        let open = vec![2.5; 128];
        let mut steps = 0;
        while pose.position().distance(&goal) > 0.15 {
            prop_assert!(steps < bound, "not reached within {} steps", bound);
            let a = local_controller(&pose, &goal, &open, &params, &Surroundings::default());
            pose = pose.compose(&match a {
                Action::Forward => Displacement::new(0.25, 0.0, 0.0),
                Action::TurnLeft => Displacement::new(0.0, 0.0, 10.0),
                Action::TurnRight => Displacement::new(0.0, 0.0, -10.0),
                Action::Stop => Displacement::ZERO,
            });
            steps += 1;
        }
    }

    #[test]
    fn actuation_and_sensor_noise_stay_within_three_sigma(seed in any::<u64>(), actions in prop::collection::vec(0u8..3, 1..60)) {
        let world = Arc::new(room(20.0, 20.0));
        let noise = NoiseModel::noisy(seed);
        let (mut sim, _) = Simulator::reset(world, Pose::new(10.0, 10.0, 0.0), noise.clone(), EpisodeKind::Exploration, SimConfig::default()).unwrap();
        let eps = 1e-9;
        for a in actions {
            let action = [Action::Forward, Action::TurnLeft, Action::TurnRight][a as usize];
            let before = sim.true_pose();
            let (obs, _) = sim.step(action).unwrap();
            let moved = sensor_displacement(&before, &sim.true_pose());
            let (commanded, actual_err) = match action {
                Action::Forward => (Displacement::new(0.25, 0.0, 0.0), (moved.dx - 0.25).abs() / noise.forward_sigma),
                Action::TurnLeft => (Displacement::new(0.0, 0.0, 10.0), (moved.dtheta - 10.0).abs() / noise.turn_sigma),
                _ => (Displacement::new(0.0, 0.0, -10.0), (moved.dtheta + 10.0).abs() / noise.turn_sigma),
            };
            prop_assert!(!obs.collided);
            prop_assert!(actual_err <= 3.0 + eps);
            let o = obs.odometry;
            prop_assert!((o.dx - commanded.dx).abs() <= 3.0 * noise.drift_sigma_xy + eps);
            prop_assert!((o.dy - commanded.dy).abs() <= 3.0 * noise.drift_sigma_xy + eps);
            prop_assert!((o.dtheta - commanded.dtheta).abs() <= 3.0 * noise.drift_sigma_theta + eps);
        }
    }
}

#[test]
fn ray_hits_match_the_dense_line_march() {
    // perpendicular wall 2 m ahead and a 45° ray into a corner
    let world = room(6.0, 6.0);
    let march = |p: &Point, angle: f64| {
        let dir = Point::new(angle.to_radians().cos(), angle.to_radians().sin());
        let mut t = 0.0;
        while world.get(world.world_to_cell(&p.add(&dir.scale(t)))) != Some(Cell::Occupied) {
            t += CELL / 10.0;
        }
        t
    };
    let cases = [(Point::new(3.975, 3.0), 0.0), (Point::new(4.0, 4.0), 45.0), (Point::new(1.0, 1.3), 30.0)];
    for (p, angle) in cases {
        let hit = raycast(&world, &Pose::new(p.x, p.y, angle), 0.0, 10.0).unwrap();
        assert!(hit.hit);
        assert!((hit.distance - march(&p, angle)).abs() <= CELL, "{p:?} {angle}: {}", hit.distance);
    }
    // analytic: the interior of a 6 m room ends at x = 6 - wall thickness
    let d = cast_unchecked(&world, &Point::new(3.975, 3.0), &Point::new(1.0, 0.0), 10.0).distance;
    assert!((d - 2.0).abs() <= CELL, "{d}");
}
