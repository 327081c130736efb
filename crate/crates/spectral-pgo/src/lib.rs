//! Uncertainty metrics for pose-graph SLAM, two ways.
//!
//! The expensive way evaluates optimality criteria (T/D/A/E/Emax) on the
//! spectrum of the system information matrix assembled from all edge
//! measurements. The fast way weights the pose-graph edges with scalar
//! summaries of their information matrices and reads the same criteria off
//! connectivity indices of the weighted graph Laplacian: average degree,
//! log-count of spanning trees, Kirchhoff index, algebraic connectivity,
//! and the top Laplacian eigenvalue.
//!
//! Both routes agree exactly under constant or isotropic edge uncertainty,
//! the spectral-norm weighting yields a guaranteed upper bound, and the
//! same-criterion weighting tracks the exact values closely; the
//! [`replay`] module replays a graph's incremental construction to measure
//! exactly how closely, and how much faster.
//!
//! See the crate examples for runnable tours of each capability, or the
//! `spectral-pgo` binary (`validate`, `indices`, `replay`, `synth`,
//! `probe`) for file-based workflows. The `SPECTRAL_PGO_THREADS`
//! environment variable caps worker threads used for per-edge computation.

pub mod cli;
pub mod criteria;
pub mod eigen;
pub mod error;
pub mod fim;
pub mod graph;
pub mod lie;
mod parallel;
pub mod replay;
pub mod report;
pub mod synth;

pub use crate::criteria::{
    algebraic_connectivity, edge_weight, fim_criteria, fim_criteria_with, graph_estimate, kiefer,
    kiefer_with, kirchhoff_index, spanning_trees_log, Criterion, EdgeWeightScheme, Normalization,
    SpectralOptions, Spectrum, WeightScheme,
};
pub use crate::error::{Error, Result};
pub use crate::fim::{
    assemble_fim, constant_fim, fim_generator, kron_constant_fim, world_information, FimMatrix,
    Frame,
};
pub use crate::graph::{
    incidence_column, Edge, EdgeSpec, Parsed, ParseOptions, PoseGraph, Vertex, WeightedLaplacian,
};
pub use crate::lie::{AdjointMatrix, Dim, PlanarPose, Pose};
pub use crate::parallel::{set_thread_cap, thread_cap};
pub use crate::replay::{
    complexity_probe, replay, summarize, CriterionEntry, ProbeRow, ReplayConfig, ReplayRun,
    ReplaySummary, StepRecord, Weighting,
};
pub use crate::synth::{generate, InfoModel, SynthSpec};
