pub mod alignment;
pub mod clustering;
pub mod constraint;
pub mod geometry;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod ps;
pub mod search;
pub mod time;
