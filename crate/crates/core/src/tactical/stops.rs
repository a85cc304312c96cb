//! Stop-point choice and door timing against adjacent-lane traffic.

use crate::ids::{NodeId, Tick};
use crate::odd::PassengerProfile;
use crate::perception::features::Interval;
use crate::plant::map::StopPoint;
use crate::representation::situation::SituationModel;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Clear adjacent-lane time needed to open the door.
pub const DOOR_CLEAR_GAP_MS: u64 = 3_000;
/// How far ahead a door opening may be scheduled.
pub const DOOR_LOOKAHEAD_MS: u64 = 60_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no suitable stop at `{0}`")]
pub struct NoSuitableStop(pub NodeId);

/// Lowest-slope stop at `goal_node`, platform-usable ones only if someone
/// needs the platform. Slot id breaks ties.
pub fn select_stop(
    goal_node: &NodeId,
    candidates: &[StopPoint],
    manifest_profiles: &[&PassengerProfile],
) -> Result<StopPoint, NoSuitableStop> {
    let platform = manifest_profiles.iter().any(|p| p.needs_platform);
    candidates
        .iter()
        .filter(|s| &s.node == goal_node && (!platform || s.platform_usable))
        .min_by(|a, b| {
            a.slope_deg
                .total_cmp(&b.slope_deg)
                .then(a.lateral_slot.cmp(&b.lateral_slot))
        })
        .cloned()
        .ok_or_else(|| NoSuitableStop(goal_node.clone()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoorSchedule {
    pub unlock_at: Tick,
    pub open_at: Tick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DoorDecision {
    Scheduled(DoorSchedule),
    /// No clear gap inside the lookahead.
    Deferred,
}

/// Earliest opening with a clear gap, scanning the occupancy intervals.
/// `unlock_lead_ms` lets the lock release before the door moves.
pub fn schedule_door(sit: &SituationModel, traffic: &[Interval], now: Tick, unlock_lead_ms: u64) -> DoorDecision {
    debug_assert!(sit.self_representation.stationary());
    let mut t = now;
    loop {
        let gap_end = t.plus_ms(DOOR_CLEAR_GAP_MS);
        if gap_end > now.plus_ms(DOOR_LOOKAHEAD_MS) {
            return DoorDecision::Deferred;
        }
        match traffic.iter().filter(|i| i.overlaps(t, gap_end)).map(|i| i.until).max() {
            Some(until) => t = until,
            None => {
                return DoorDecision::Scheduled(DoorSchedule {
                    unlock_at: Tick(t.0.saturating_sub(unlock_lead_ms).max(now.0)),
                    open_at: t,
                })
            }
        }
    }
}
