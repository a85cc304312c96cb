//! Situation model, world model and hazard assessment.

pub mod hazards;
pub mod situation;
pub mod world;

pub use hazards::{assess_hazards, Hazard, HazardKind};
pub use situation::{update_situation_model, ActorContext, Health, Role, SituationModel, Zone};
pub use world::{predict_world, update_world_model, HealthTrend, WorldModel, WorldProjection};
