//! Objectness-driven segmentation of the observed surface.

pub mod adjacency;
pub mod expansion;
pub mod graph;
pub mod maxflow;
pub mod objectness;
pub mod presegment;

pub use expansion::{Labeling, PottsProblem};
pub use graph::{component_adjacency, data_term, post_segment, smoothness_term, Component, ComponentGraph, SegmentedObject};
