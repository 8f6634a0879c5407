//! Gaussian-splat driving scenes: editing, novel-view rendering, fidelity
//! metrics, viewing-angle coverage and use-case gating.

pub mod coverage;
pub mod edit;
pub mod metrics;
pub mod render;
pub mod report;
pub mod sampler;
pub mod scene;
pub mod synth;
