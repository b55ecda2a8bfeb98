//! Quality-cost-aware online task allocation for multi-attribute
//! spatio-temporal sensing.
//!
//! Each sensing cycle a fixed pool of participants is sent to a subset of
//! grid cells. Values at unvisited cells are inferred spatially, and the
//! allocator trades off how much each visit is expected to cut inference
//! error against how far participants must travel.
//!
//! - [`spe`] scores cells per attribute (temporal entropy + spatial mutual information)
//! - [`mpi`] merges attribute scores with online exponential weights
//! - [`nts`] folds travel cost in through value iteration and assigns participants
//! - [`baselines`] holds the comparison allocators
//! - [`sim`] runs the cycle loop, [`eval`] scores it

pub mod baselines;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod inference;
pub mod model;
pub mod mpi;
pub mod nts;
pub mod report;
pub mod sim;
pub mod spe;

pub use config::{Hyperparameters, InferenceKind, RunConfig, Scheme};
pub use data::{generate_synthetic, load_dataset, Dataset, SyntheticConfig};
pub use error::{Error, Result};
pub use model::{AllocationPlan, CellId, CostModel, GridGeometry, MeasurementStore, Participant};
pub use report::{run_sweep, ExperimentReport, SweepConfig};
pub use sim::{run_experiment, Simulator};
