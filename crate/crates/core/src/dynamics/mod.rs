//! Event-driven simulation of the exclusion process with conductances.
//!
//! Only discordant bonds (`η(x) ≠ η(x+e_j)`) carry rate, since exchanging
//! equal occupations is the identity. Bond rates live in a sum tree, so
//! sampling and the local update after each exchange are `O(log n)`.

mod configuration;
mod process;
mod rates;
mod trajectory;
mod walk;

pub use configuration::{sample_bernoulli, Configuration};
pub use process::{simulate, Bond, ExclusionModel, ExclusionProcess, Observer, RunSummary, Step};
pub use rates::{detailed_balance_check, exchange_rate, extended_rates, RateFamily};
pub use trajectory::{read_event_log, write_event_log, Event, Trajectory, EVENT_RECORD_BYTES};
pub use walk::{random_walk_simulate, WalkPath};
