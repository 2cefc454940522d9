//! Flag algebra of rooted leaf-labeled binary trees.
//!
//! Trees, flags and their densities; gluing products and the downward
//! operator; the sum-of-squares hierarchy with an embedded SDP solver;
//! exact certificate rounding and checking; two-tree density profiles.

pub mod certify;
pub mod error;
pub mod flag;
pub mod hierarchy;
pub mod predicate;
pub mod product;
pub mod profiles;
pub mod quantum;
pub mod sdp;
pub mod tree;

pub use error::{Error, Result};
pub use flag::{Flag, TypeSigma};
pub use quantum::QuantumFlag;
pub use tree::Tree;
