//! Time-series anomaly repair with iterative minimum repairing (IMR).
//!
//! The crate repairs a dirty observation sequence `x` given a sparse set of
//! trusted labels. IMR fits an ARX model to the displacement between repair
//! and observation, and repeatedly applies the single smallest repair the
//! model proposes until nothing significant is left to change.
//!
//! ```
//! use imr_core::{imr_repair, LabeledSeries, RepairConfig, TimeSeries};
//!
//! let x = TimeSeries::new(vec![6.0, 10.0, 9.6, 8.3, 7.7, 5.4, 5.6, 5.9, 6.3, 6.8, 7.5, 8.5])?;
//! let labels = LabeledSeries::from_pairs([(0, 6.0), (1, 5.6), (2, 5.4), (5, 5.4), (11, 8.5)])?;
//! let result = imr_repair(&x, &labels, &RepairConfig::new(1, 0.1))?;
//! assert!(result.converged);
//! assert!((result.values[3] - 5.2).abs() < 0.01);
//! # Ok::<(), imr_core::RepairError>(())
//! ```

pub mod baselines;
pub mod engine;
pub mod error;
pub mod estimation;
pub mod evalkit;
pub mod online;
pub mod pipeline;
pub mod series;

pub use baselines::{ar_repair, arx_repair, ewma, sma, ModelRepair, SmootherConfig};
pub use engine::{
    converged, generate_candidates, imr_repair, imr_repair_static, select_minimum_repair,
    Candidate, CandidateSet, RepairChange, RepairConfig, RepairResult, DEFAULT_MAX_ITERATIONS,
};
pub use error::{RepairError, Result};
pub use estimation::{
    build_design_matrices, estimate, incremental_update, normal_from_design, solve_normal, Backend,
    DesignMatrices, Estimator, ModelParams, NormalEquations, MAX_ORDER, PIVOT_TOLERANCE,
};
pub use online::{
    check_bound_condition, phi_single, repair_multi_segment, repair_single, MultiSegmentRepair,
    OnlinePrefixModel, StreamRepairer,
};
pub use pipeline::{run_method, Method, MethodOutput, MethodParams};
pub use series::{
    diff, init_repair_state, labeled_segments, DiffSeries, LabeledSeries, RepairState, Segment,
    SegmentIndex, TimeSeries,
};
