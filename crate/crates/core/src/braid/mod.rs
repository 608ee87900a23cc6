//! Crossing labels, interaction graphs and braid words.

pub mod crossing;
pub mod graph;
pub mod word;

pub use crossing::{detect_crossing, find_crossings, CrossingEvent, RawCrossing, EPS_X, EPS_Y};
pub use graph::{
    build_interaction_graph, label_edge, label_in_frame, CrossingClass, Edge, InteractionGraph, DEFAULT_DELTA,
    DEFAULT_MAX_NEIGHBORS,
};
pub use word::{compose, extract_braid_word, free_reduce, replay_permutation, BraidWord, Generator, Letter, Sign};
