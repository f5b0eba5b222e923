//! Slack-Pack: a packing engine for harmonically shrinking details.
//!
//! Details `D_n` are either `1/n x 1/(n+1)` rectangles or `1/n x 1/n` squares,
//! packed in index order into a square sheet whose area equals the total area
//! of all details with index `>= n0`. The engine reserves a controlled gap of
//! `1/n^gamma` whenever it opens a row, which keeps the large empty corner
//! piece (the LRP) at a stable fraction of the remaining area.
//!
//! Module map:
//!
//! * [`detail`] and [`numeric`]: closed-form detail dimensions, sheet areas and
//!   compensated accumulation.
//! * [`box_store`]: the live set of empty boxes with a max-width index.
//! * [`engine`]: the Slack-Pack state machine, run orchestration and checkpoints.
//! * [`baselines`]: the Paulhus greedy packer and a snug stacking packer.
//! * [`verify`]: layout and conserved-quantity checks.
//! * [`stats`]: monitors for the LRP ratio and the normal-box shape bound and the endpoint aspect trend.
//! * [`appendix`]: the uniform-width mixture model and its estimators.
//! * [`render`]: SVG output of layouts.
//! * [`output`]: CSV and JSON run artifacts, checkpoint and resume on disk.
//! * [`exec`]: sequential / rayon execution switch used by batch workloads.

pub mod appendix;
pub mod baselines;
pub mod box_store;
pub mod detail;
pub mod engine;
mod codec;
mod error;
pub mod exec;
pub mod geometry;
pub mod numeric;
pub mod output;
pub mod quadrature;
pub mod render;
pub mod stats;
pub mod verify;

pub use box_store::{BoxClass, BoxId, BoxRec, BoxStore};
pub use detail::{detail_dims, sheet_area, DetailKind, Gamma, SheetSpec};
pub use engine::{CriticalEvent, Engine, EngineConfig, Event, RunStatus, RunSummary, StatSnapshot};
pub use error::{Error, Result};
pub use exec::Execution;
pub use geometry::Rect;
