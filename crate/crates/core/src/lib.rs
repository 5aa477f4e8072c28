//! Planning and validation for slicing-aware flying access networks.
//!
//! Given ground subareas grouped into network slices (each with a throughput,
//! mean-delay and bit-error-rate target), the crate picks the cheapest set of
//! flying access points (FAPs) from a lattice of candidate sites, assigns every
//! subarea to one FAP, sizes the channel share each subarea needs and packs
//! those shares into physical 20 MHz channels. Two reference placements
//! (geometric center and k-means) and an analytic plus packet-level evaluator
//! are provided for comparison.
//!
//! The numeric core (`radio`, `queueing`, `channel_plan`, `placement`) is
//! generic over [`Scalar`] and defaults to `f64`; the aliases below name the
//! common concrete instantiations.






pub mod baselines;
pub mod channel_plan;
pub mod evaluate;
pub mod lp;
pub mod pipeline;
pub mod placement;
pub mod queueing;
pub mod radio;
pub mod scalar;
pub mod scenario;

pub use scalar::Scalar;

pub type CapacityModelF64 = radio::CapacityModel<f64>;
pub type CapacityModelF32 = radio::CapacityModel<f32>;
pub type McsEntryF64 = radio::McsEntry<f64>;
pub type RadioConfigF64 = radio::RadioConfig<f64>;
pub type RadioConfigF32 = radio::RadioConfig<f32>;
pub type PlacementProblemF64 = placement::PlacementProblem<f64>;
pub type PlacementProblemF32 = placement::PlacementProblem<f32>;
pub type PlacementSolutionF64 = placement::PlacementSolution<f64>;
pub type ChannelPlanF64 = channel_plan::ChannelPlan<f64>;
pub type ChannelPlanF32 = channel_plan::ChannelPlan<f32>;
