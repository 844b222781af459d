//! Declarative, replayable pipelines.
//!
//! A document is a `pipeline` list of steps, each with `name` (load,
//! process, split or export), `operation`, `params` and optionally the
//! `checksum` expected after the step:
//!
//! ```yaml
//! pipeline:
//! - name: load
//!   operation: Tabular
//!   params:
//!     path: ratings.tsv
//! - name: process
//!   operation: Binarize
//!   params:
//!     threshold: 4
//! - name: split
//!   operation: RandomHoldOut
//!   params:
//!     test_ratio: 0.2
//!     val_ratio: 0.1
//!     seed: 42
//! ```
//!
//! Split steps record a map with `test`, `val` and `train`; K-repeated
//! hold-out and cross-validation record a list of such maps, one per fold.
//! Export steps carry no checksum.

mod config;
mod execute;
mod ops;

pub use config::{parse_config, parse_config_with, PipelineConfig, PipelineStep};
pub use execute::{
    execute, export_history, DigestMismatch, ExecContext, Mode, PipelineOutput, PipelineResult, StepReport, StepStatus,
    VerificationReport,
};
