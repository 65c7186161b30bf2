//! Set partitions, directed multigraphs and the bridge decomposition.

pub mod digraph;
pub mod partition;

pub use digraph::{
    bridges, forest_leaf_count, is_tree, two_edge_decompose, DiGraph, Multigraph,
    TwoEdgeDecomposition,
};
pub use partition::{bell_number, Partition, UnionFind};
