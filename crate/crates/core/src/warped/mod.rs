//! Warped graphs on ε-nets: the warped distance, controlled sets and box spaces.
//!
//! At level `t` a net carries metric edges of weight `t·d(p_i, p_j)` and, for
//! every generator `s`, an edge of weight 1 from `p_i` to the net point nearest
//! `s·p_i`.  Shortest paths in this graph realize the warped distance.

mod graph;
mod quasi;

pub use graph::{
    box_comparison, build_warped_graph, controlled_neighbors, matched_box_level, warped_distance,
    BoxComparison, GeneratorEdge, MetricEdge, SnapMode, WarpedGraph,
};
pub use quasi::{box_space_graph, distortion, Distortion, WeightedGraph};
