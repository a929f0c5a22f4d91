//! Throughput, interference and sensing-policy optimization for randomized
//! cognitive MAC protocols, where secondary users share licensed channels
//! with a primary network.
//!
//! * [`channel`] and [`scheme`] describe the spectrum and the sensing policy.
//! * [`aloha`] gives slotted-ALOHA throughput when every transmission on a
//!   channel interferes with every other one.
//! * [`spatial`] covers the cell model with Poisson-distributed primaries:
//!   collision probability, detection radius and throughput.
//! * [`csma`] computes optimal CSMA/CA sensing policies, with and without
//!   detection errors.
//! * [`sim`] is a slot-level Monte Carlo simulator for all of the above.

pub mod aloha;
pub mod channel;
pub mod csma;
pub mod error;
pub mod geometry;
pub mod quad;
pub mod scheme;
pub mod sim;
pub mod simplex;
pub mod spatial;

pub use channel::{CapacitySummary, ChannelSet, UtilizationTarget};
pub use error::{Error, Result};
pub use scheme::{GroupCatalog, SensingScheme};
