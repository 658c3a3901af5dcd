//! Goalkeeper technique analysis from 3D body poses and shot events.
//!
//! The pipeline runs view normalisation, 1v1 detection, technique
//! clustering, an expected-saves classifier and downstream maps, rankings
//! and a penalty regression. Every stage is seeded and deterministic.

pub mod analytics;
pub mod cluster;
pub mod geometry;
pub mod inference;
pub mod io;
pub mod pipeline;
pub mod pose;
pub mod scaler;
pub mod split;
pub mod synthetic;
pub mod technique;
pub mod view;
pub mod xs;
