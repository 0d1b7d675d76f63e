//! Auction, pickup and delivery simulation: sequential reverse sealed-bid
//! auctions over sampled delivery tasks, plan validation and costing,
//! baseline bidding agents, and double all-play-all tournaments.

pub mod agents;
pub mod auction;
pub mod interface;
pub mod model;
pub mod planning;
pub mod rng;
pub mod topology;
pub mod tournament;

pub use model::{Action, ActionKind, Company, Plan, Task, TaskDistribution, TaskId, Vehicle};
pub use topology::{CityId, DistanceMatrix, Topology};
