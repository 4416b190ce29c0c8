//! Floorplans, ground-truth grids, ray casting, geodesics and the museum
//! generator.

pub mod floorplan;
pub mod generate;
pub mod geodesic;
pub mod grid;
pub mod raster;
pub mod raycast;

use thiserror::Error;

use crate::geometry::Point;

pub use floorplan::{Doorway, FloorPlan, PoiKind, PointOfInterest, Rect, Segment};
pub use generate::{generate_museum, MuseumParams};
pub use geodesic::{geodesic_distance, DistanceField, GeodesicDistance};
pub use grid::{Cell, CellIndex, OccupancyGrid, DEFAULT_CELL_SIZE};
pub use raster::rasterize;
pub use raycast::{raycast, RayHit};

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("cell size must be positive and finite, got {0}")]
    InvalidCellSize(f64),
    #[error("grid file: {0}")]
    GridFormat(String),
    #[error("invalid floorplan: {0}")]
    InvalidPlan(String),
    #[error("unsupported floorplan version {0}")]
    UnsupportedVersion(u32),
    #[error("floorplan json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("max range must be positive, got {0}")]
    InvalidRange(f64),
    #[error("point ({}, {}) is outside the grid", .0.x, .0.y)]
    OutOfBounds(Point),
    #[error("point ({}, {}) lies inside an obstacle", .0.x, .0.y)]
    InsideObstacle(Point),
    #[error("point ({}, {}) is not on a free cell", .0.x, .0.y)]
    NotFree(Point),
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("generation failed after {attempts} attempts; binding constraint: {constraint}")]
    GenerationFailed { attempts: usize, constraint: String },
}
