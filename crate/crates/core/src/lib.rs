//! Braid-based interaction descriptors for multi-agent trajectories.
//!
//! Future trajectories are projected onto the xt plane of an agent-centric
//! frame. Sign changes of the longitudinal gap give crossing labels
//! (`below`, `over`, `no_crossing`) on a directed interaction graph and,
//! over a whole scene, a braid word. On top of that the crate provides joint
//! prediction metrics including Braid Similarity, the braid-prediction head
//! and its losses, a small multi-task trainer, and a synthetic scene
//! generator with closed-form expected labels.

pub mod braid;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod multitask;
pub mod scene;
pub mod synth;

pub use braid::{
    build_interaction_graph, compose, detect_crossing, extract_braid_word, free_reduce, label_edge, BraidWord,
    CrossingClass, CrossingEvent, Generator, InteractionGraph, Sign,
};
pub use error::{Error, Result};
pub use geometry::{Point2, ReferenceFrame, RigidTransform};
pub use scene::{frame_of_agent, to_frame, AgentId, AgentPrediction, AgentState, PredictionSet, Scene, Trajectory};
