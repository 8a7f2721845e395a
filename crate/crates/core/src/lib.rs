//! Circle packings on triangulated discs and the reversible random walks
//! their radius labels induce.
//!
//! - [`complex`]: triangulations of a closed disc, stars and hexagonal balls.
//! - [`label`]: angle sums, the boundary-value solver, branch sets and the
//!   discrete maximum principle.
//! - [`layout`]: placing a solved label in the plane, ratio maps, SVG output.
//! - [`network`]: conductance networks, transition kernels, potentials,
//!   effective resistance and Monte Carlo return estimates.
//! - [`variation`]: the first variation of angle sums along label families
//!   and the flow field they induce.
//! - [`experiment`]: boundary profiles and the ratio-flattening experiment.
//! - [`io`]: the `.cpx`, `.lbl` and `.brs` text formats and CSV helpers.
//!
//! Work that splits into independent pieces takes an [`ExecMode`]; with the
//! `parallel` feature disabled every mode runs sequentially.

pub mod complex;
pub mod exec;
pub mod experiment;
pub mod io;
pub mod label;
pub mod layout;
pub mod network;
pub mod variation;

pub use complex::{hex_ball, star, TriangulationComplex, VertexId};
pub use exec::ExecMode;
pub use label::{BranchSet, Label, SolveOptions, TargetAngles};
