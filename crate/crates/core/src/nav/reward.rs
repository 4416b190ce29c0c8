use crate::geometry::{Point, Pose};

/// Decrease in Euclidean distance to the local goal between two poses.
pub fn local_reward(prev: &Pose, curr: &Pose, goal: &Point) -> f64 {
    prev.position().distance(goal) - curr.position().distance(goal)
}

/// Newly seen area, m².
pub fn coverage_reward(prev_explored: usize, curr_explored: usize, cell_area: f64) -> f64 {
    debug_assert!(curr_explored >= prev_explored, "explored count decreased");
    curr_explored.saturating_sub(prev_explored) as f64 * cell_area
}
