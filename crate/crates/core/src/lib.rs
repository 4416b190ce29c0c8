pub mod config;
pub mod episodes;
pub mod geometry;
pub mod mapper;
pub mod metrics;
pub mod nav;
pub mod pose;
pub mod runner;
pub mod sim;
pub mod world;
