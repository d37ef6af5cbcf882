//! Geometric embeddings for EL++ knowledge bases.

pub mod closure;
pub mod eval;
pub mod geometry;
pub mod kb;
pub mod loss;
pub mod model;
pub mod normalize;
pub mod reasoner;
pub mod sampler;
pub mod tape;
pub mod toy;
pub mod trainer;
