//! Harm scores for candidate courses of action.

use crate::ids::NodeId;
use crate::odd::profile_of;
use crate::representation::hazards::{dominant, Hazard, HazardKind};
use crate::representation::world::{HealthTrend, WorldModel, WorldProjection};
use crate::strategic::routing::plan_route;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Action {
    Continue,
    Divert,
    Return,
    StopImmediately,
}

impl Action {
    pub const ALL: [Action; 4] = [
        Action::Continue,
        Action::Divert,
        Action::Return,
        Action::StopImmediately,
    ];
}

/// Infinite values travel as `null`.
mod seconds {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Lower is better on every axis; compared lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmScore {
    pub severity: u8,
    #[serde(with = "seconds")]
    pub time_to_resolution: f64,
    #[serde(with = "seconds")]
    pub mission_delay: f64,
}

impl HarmScore {
    pub const ZERO: HarmScore = HarmScore {
        severity: 0,
        time_to_resolution: 0.0,
        mission_delay: 0.0,
    };
}

impl Eq for HarmScore {}

impl PartialOrd for HarmScore {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HarmScore {
    fn cmp(&self, other: &Self) -> Ordering {
        self.severity
            .cmp(&other.severity)
            .then(self.time_to_resolution.total_cmp(&other.time_to_resolution))
            .then(self.mission_delay.total_cmp(&other.mission_delay))
    }
}

/// A course of action to score: where it ends, if anywhere.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionCandidate {
    pub action: Action,
    /// `None` for stopping where the vehicle is.
    pub goal: Option<NodeId>,
}

/// When the option resolves `h`, in seconds from now; `None` if it never does.
pub fn resolution_time(c: &OptionCandidate, proj: &WorldProjection, h: &Hazard, w: &WorldModel) -> Option<f64> {
    let Some(goal) = &c.goal else {
        return match h.kind {
            HazardKind::ExposureRisk | HazardKind::TrappedRisk => Some(0.0),
            _ => None,
        };
    };
    let cand = proj.candidates.get(goal)?;
    let resolves = match h.kind {
        HazardKind::MedicalEmergency => w.map.node(goal).is_some_and(|n| n.care_facility),
        HazardKind::ExposureRisk | HazardKind::TrappedRisk => !w.map.stops_at(goal).is_empty(),
        HazardKind::StrandingRisk => cand.range_feasible,
        HazardKind::UnknownAreaRisk => profile_of(&w.profiles, &h.subject)
            .is_some_and(|p| p.known_nodes.is_empty() || p.known_nodes.contains(goal)),
    };
    resolves.then_some(cand.travel_time)
}

/// Added travel time against heading straight for the mission goal.
pub fn mission_delay(c: &OptionCandidate, proj: &WorldProjection, w: &WorldModel) -> f64 {
    let Some(goal) = &c.goal else { return 0.0 };
    let Some(cand) = proj.candidates.get(goal) else {
        return f64::INFINITY;
    };
    let constraints = w.constraints();
    let onward = plan_route(&w.map, goal, &w.mission_goal, &constraints).map(|r| r.cost_s as f64);
    let direct = proj
        .candidates
        .get(&w.mission_goal)
        .map(|m| m.travel_time)
        .or_else(|| w.travel_time(&w.mission_goal));
    match (onward, direct) {
        (Ok(onward), Some(direct)) => (cand.travel_time + onward - direct).max(0.0),
        _ => f64::INFINITY,
    }
}

pub fn score_option(c: &OptionCandidate, proj: &WorldProjection, hazards: &[Hazard], w: &WorldModel) -> HarmScore {
    let delay = mission_delay(c, proj, w);
    let Some(dom) = dominant(hazards) else {
        return HarmScore {
            mission_delay: delay,
            ..HarmScore::ZERO
        };
    };
    let arrival = c.goal.as_ref().and_then(|g| proj.candidates.get(g));
    let severity = hazards
        .iter()
        .map(|h| match resolution_time(c, proj, h, w) {
            Some(_) => {
                let critical = arrival
                    .and_then(|a| a.arrival_health.get(&h.subject))
                    .is_some_and(|t| *t == HealthTrend::Critical);
                if critical {
                    3
                } else {
                    h.severity
                }
            }
            None => (h.severity + 1).min(3),
        })
        .max()
        .unwrap_or(0);
    HarmScore {
        severity,
        time_to_resolution: resolution_time(c, proj, dom, w).unwrap_or(f64::INFINITY),
        mission_delay: delay,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::{PassengerId, Tick};
    use crate::odd::PassengerProfile;
    use crate::perception::features::FeatureKind;
    use crate::plant::map::reference_graph;
    use crate::representation::world::{predict_world, PassengerProjection};

    fn world_at_b() -> WorldModel {
        let mut w = WorldModel::new(
            reference_graph(),
            vec![PassengerProfile::adult("p1")],
            "A".into(),
            5e4,
            vec![],
        );
        w.planning_node = "B".into();
        w.mission_goal = "C".into();
        w.tick = Tick(300_000);
        w.passenger_projection.insert(
            PassengerId::new("p1"),
            PassengerProjection {
                health_trend: HealthTrend::Critical,
                max_remaining_onboard_time: 0.0,
            },
        );
        w
    }

    fn medical() -> Hazard {
        Hazard {
            kind: HazardKind::MedicalEmergency,
            subject: "p1".into(),
            severity: 3,
            evidence: vec![FeatureKind::HeartRate],
        }
    }

    #[test]
    fn divert_to_care_at_b() {
        let w = world_at_b();
        let proj = predict_world(&w, 3600.0).unwrap();
        let s = score_option(
            &OptionCandidate {
                action: Action::Divert,
                goal: Some("H".into()),
            },
            &proj,
            &[medical()],
            &w,
        );
        // B→H 120, then H→B→C 420, against B→C 300.
        assert_eq!(
            s,
            HarmScore {
                severity: 3,
                time_to_resolution: 120.0,
                mission_delay: 120.0 + 420.0 - 300.0
            }
        );
    }

    #[test]
    fn roadside_stop_never_reaches_care() {
        let w = world_at_b();
        let proj = predict_world(&w, 3600.0).unwrap();
        let s = score_option(
            &OptionCandidate {
                action: Action::StopImmediately,
                goal: None,
            },
            &proj,
            &[medical()],
            &w,
        );
        assert_eq!(s.time_to_resolution, f64::INFINITY);
        assert_eq!(s.severity, 3);
    }

    #[test]
    fn quiet_continue_is_zero() {
        let mut w = world_at_b();
        w.passenger_projection.clear();
        let proj = predict_world(&w, 3600.0).unwrap();
        let s = score_option(
            &OptionCandidate {
                action: Action::Continue,
                goal: Some("C".into()),
            },
            &proj,
            &[],
            &w,
        );
        assert_eq!(s, HarmScore::ZERO);
    }

    #[test]
    fn infinite_seconds_round_trip() {
        let s = HarmScore {
            severity: 3,
            time_to_resolution: f64::INFINITY,
            mission_delay: 0.0,
        };
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"severity":3,"time_to_resolution":null,"mission_delay":0.0}"#);
        assert_eq!(serde_json::from_str::<HarmScore>(&json).unwrap(), s);
    }
}
