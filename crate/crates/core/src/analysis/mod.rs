//! Semantic structure of learned labels: rank agreement with a reference
//! hierarchy and average-linkage dendrograms.

pub mod hierarchy;
pub mod kendall;
pub mod linkage;

pub use hierarchy::{tree_distances, HierarchyTree};
pub use kendall::{correlation_score, kendall_tau_b, label_distances, CorrelationScore};
pub use linkage::{average_linkage, parse_newick, Dendrogram, Merge, NewickNode};
