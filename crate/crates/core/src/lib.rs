//! Scene assessment for chemical, biological, radiological/nuclear and
//! explosive incidents: survey planning for a drone swarm, a seeded
//! simulation of the survey, Bayesian threat fusion, and document retrieval.
//!
//! The modules build on each other in roughly this order:
//!
//! - [`geo`]: projection and survey grids;
//! - [`planner`]: greedy route allocation;
//! - [`world`] and [`swarm`]: the simulated scene and agents;
//! - [`fusion`]: threat beliefs from evidence;
//! - [`retrieval`]: TF-IDF ranking of procedure documents;
//! - [`protocol`] and [`event`]: wire messages and the mission log;
//! - [`scenario`] and [`mission`]: the orchestration used by the hub and CLI.

pub mod event;
pub mod fusion;
pub mod geo;
pub mod mission;
pub mod planner;
pub mod protocol;
pub mod retrieval;
pub mod scenario;
pub mod swarm;
pub mod world;
