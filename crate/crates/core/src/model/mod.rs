//! Shared domain types: the data mixture, the noise schedule, binary class
//! partitions and normalized time grids.
//!
//! Everything here is validated at construction and immutable afterwards.

mod mixture_model;
mod partition;
mod schedule;
mod time;

pub use mixture_model::MixtureModel;
pub use partition::{make_partition, Partition};
pub use schedule::{linear_schedule, NoiseSchedule};
pub use time::TimeGrid;
