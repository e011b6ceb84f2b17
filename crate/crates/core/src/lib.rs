//! Rotation-invariant local descriptors for 3D point clouds: point pair
//! features of a local patch, encoded by a folding auto-encoder, matched by
//! mutual nearest neighbors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod geometry;
pub mod matching;
pub mod network;
pub mod ppf;
pub mod seed;
pub mod training;
