//! Spatio-temporal infestation risk: observation ingest, feature
//! engineering, SMOTE balancing, stacked ensemble learning, per-area
//! prediction, grid aggregation and clock-glyph rendering.

pub mod features;
pub mod geo;
pub mod ingest;
pub mod balance;
pub mod learn;
pub mod predict;
pub mod aggregate;
pub mod glyph;
