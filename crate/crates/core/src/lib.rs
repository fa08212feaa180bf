//! Simulation of a UAV that learns, by tabular Q-learning, to home in on a
//! radio transmitter carried by a victim inside a building. The UAV only
//! senses received signal strength; the map comes from a path-loss model
//! with wall attenuation and antenna patterns.

pub mod agent;
pub mod cli;
pub mod episode;
pub mod export;
pub mod geometry;
pub mod metrics;
pub mod propagation;
pub mod scenario;
