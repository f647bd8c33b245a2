pub mod engine;
pub mod geometry;
pub mod graph;
pub mod ingest;
pub mod model;
pub mod montecarlo;
pub mod transform;
