//! Reproducible management of recommendation datasets.
//!
//! The crate reads and writes interaction data in tabular, inline and JSON
//! layouts, filters it (binarization, k-core, rating and time filters),
//! splits it into train/validation/test sets, characterizes it with summary
//! metrics, and records every step as a replayable, checksum-verified
//! pipeline document.
//!
//! ```
//! use recdata::{build_dataset, processing, splitting, Interaction};
//!
//! let d = build_dataset(vec![
//!     Interaction::new("u1", "i1").with_rating(5.0).with_timestamp(100),
//!     Interaction::new("u1", "i2").with_rating(3.0).with_timestamp(200),
//!     Interaction::new("u2", "i1").with_rating(4.0).with_timestamp(150),
//! ])?;
//! let implicit = processing::binarize(&d, 4.0, processing::BinarizeMode::DropBelow)?;
//! assert_eq!(implicit.len(), 2);
//!
//! let split = splitting::leave_n_split(&d, 1, splitting::Direction::Out, splitting::Order::Temporal)?;
//! assert_eq!(split.test.len(), 1);
//! # Ok::<(), recdata::Error>(())
//! ```

pub mod checksum;
pub mod dataset;
pub mod error;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod processing;
pub mod registry;
pub mod splitting;

pub use checksum::{canonical_serialize, checksum};
pub use dataset::{
    build_dataset, Dataset, Digest, Interaction, ParamValue, Params, ProvenanceStep, SplitDigests, StepCategory, StepChecksum,
};
pub use error::{Error, Result};
