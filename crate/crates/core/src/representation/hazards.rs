//! Hazard assessment: what currently threatens which passenger, and how badly.

use crate::ids::PassengerId;
use crate::odd::{profile_of, Capability, PassengerProfile};
use crate::operational::commands::Subsystem;
use crate::perception::faults::SubsystemFault;
use crate::perception::features::FeatureKind;
use crate::plant::vehicle::LockState;
use crate::representation::situation::{Health, SituationModel};
use serde::{Deserialize, Serialize};
use std::cmp::Reverse;

/// Cabin temperatures outside this band are uncomfortable.
pub const COMFORT_BAND_C: (f64, f64) = (5.0, 35.0);
/// Body temperature from which exposure is a health risk.
pub const FEVER_C: f64 = 39.0;
/// Below this much range a stranding becomes likely.
pub const STRANDING_RESERVE_M: f64 = 2_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HazardKind {
    MedicalEmergency,
    TrappedRisk,
    StrandingRisk,
    ExposureRisk,
    UnknownAreaRisk,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hazard {
    pub kind: HazardKind,
    pub subject: PassengerId,
    /// 0 none, 1 discomfort, 2 health risk, 3 acute.
    pub severity: u8,
    pub evidence: Vec<FeatureKind>,
}

impl Hazard {
    fn new(kind: HazardKind, subject: &PassengerId, severity: u8, evidence: Vec<FeatureKind>) -> Self {
        Hazard {
            kind,
            subject: subject.clone(),
            severity,
            evidence,
        }
    }
}

/// The hazard that drives the response: highest severity, then the
/// deterministic ordering of `assess_hazards`.
pub fn dominant(hazards: &[Hazard]) -> Option<&Hazard> {
    hazards
        .iter()
        .min_by_key(|h| (Reverse(h.severity), h.subject.clone(), h.kind))
}

fn door_fault(faults: &[SubsystemFault]) -> bool {
    faults
        .iter()
        .any(|f| matches!(f.subsystem, Subsystem::Door | Subsystem::Lock))
}

pub fn assess_hazards(
    sit: &SituationModel,
    vehicle_faults: &[SubsystemFault],
    profiles: &[PassengerProfile],
) -> Vec<Hazard> {
    let mut out = Vec::new();
    let me = &sit.self_representation;
    let onboard: Vec<_> = sit
        .onboard()
        .filter_map(|a| Some((a, a.passenger_id()?, profile_of(profiles, a.passenger_id()?))))
        .collect();

    for a in sit.passengers() {
        let Some(id) = a.passenger_id() else { continue };
        if a.health == Health::Emergency {
            let mut ev = Vec::new();
            if a.fallen_since.is_some() {
                ev.push(FeatureKind::Fallen);
            }
            if a.hr_emergency_since.is_some() || ev.is_empty() {
                ev.push(FeatureKind::HeartRate);
            }
            out.push(Hazard::new(HazardKind::MedicalEmergency, id, 3, ev));
        }
    }

    let manual_release = onboard
        .iter()
        .any(|(_, _, p)| p.is_some_and(|p| p.has(Capability::CanOperateManualRelease)));
    if door_fault(vehicle_faults) && me.lock == LockState::Locked && !manual_release {
        for (_, id, _) in &onboard {
            out.push(Hazard::new(
                HazardKind::TrappedRisk,
                id,
                2,
                vec![FeatureKind::DoorPosition, FeatureKind::LockState],
            ));
        }
    }

    for (a, id, p) in &onboard {
        if a.body_temp_c.is_some_and(|t| t >= FEVER_C) {
            out.push(Hazard::new(
                HazardKind::ExposureRisk,
                id,
                2,
                vec![FeatureKind::BodyTemp],
            ));
        } else if a
            .exposure_c
            .or(sit.scenery.cabin_temp_c)
            .is_some_and(|t| t < COMFORT_BAND_C.0 || t > COMFORT_BAND_C.1)
        {
            out.push(Hazard::new(
                HazardKind::ExposureRisk,
                id,
                1,
                vec![FeatureKind::CabinTemp],
            ));
        }

        if me.range_m <= 0.0 {
            out.push(Hazard::new(
                HazardKind::StrandingRisk,
                id,
                2,
                vec![FeatureKind::SubsystemHealth],
            ));
        } else if me.range_m < STRANDING_RESERVE_M {
            out.push(Hazard::new(
                HazardKind::StrandingRisk,
                id,
                1,
                vec![FeatureKind::SubsystemHealth],
            ));
        }

        if let Some(p) = p {
            if !p.known_nodes.is_empty() && !p.known_nodes.contains(&me.next_node) {
                out.push(Hazard::new(
                    HazardKind::UnknownAreaRisk,
                    id,
                    1,
                    vec![FeatureKind::VehiclePose],
                ));
            }
        }
    }

    out.sort_by(|a, b| (Reverse(a.severity), &a.subject, a.kind).cmp(&(Reverse(b.severity), &b.subject, b.kind)));
    out
}
