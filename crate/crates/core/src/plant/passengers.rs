//! Passenger ground truth: physiology and where each person is.

use crate::ids::{PassengerId, Tick, OPERATIONAL_PERIOD_MS};
use crate::plant::disturbance::{Disturbance, DisturbanceKind};
use crate::plant::vehicle::{DoorState, PlatformState, VehicleState};
use crate::representation::situation::Zone;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Beat-to-beat heart-rate variability seen by the occupant monitor (bpm),
/// resampled once per second from the scenario seed.
pub const HR_JITTER_BPM: f64 = 2.0;

/// A scripted zone change, applied at the first tick at or after `after`
/// where the move is physically possible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedMove {
    pub after: Tick,
    pub zone: Zone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassengerTruth {
    pub id: PassengerId,
    pub needs_platform: bool,
    pub zone: Zone,
    pub resting_heart_rate: f64,
    pub heart_rate: f64,
    pub breath_rate: f64,
    pub body_temp_c: f64,
    pub fallen: bool,
    pub script: Vec<ScriptedMove>,
    pub script_pos: usize,
    /// Stream index for the seeded jitter.
    pub stream: u64,
}

impl PassengerTruth {
    pub fn new(id: PassengerId, zone: Zone, needs_platform: bool, stream: u64) -> Self {
        PassengerTruth {
            id,
            needs_platform,
            zone,
            resting_heart_rate: 72.0,
            heart_rate: 72.0,
            breath_rate: 14.0,
            body_temp_c: 36.8,
            fallen: false,
            script: Vec::new(),
            script_pos: 0,
            stream,
        }
    }

    pub fn distance_m(&self) -> f64 {
        zone_distance(self.zone)
    }
}

/// Nominal distance to the vehicle body for each zone.
pub fn zone_distance(zone: Zone) -> f64 {
    match zone {
        Zone::CabinSeated | Zone::CabinUnsecured => 0.0,
        Zone::Doorway => 0.5,
        Zone::OnPlatform => 1.0,
        Zone::OutsideNear => 2.0,
        Zone::Absent => 50.0,
    }
}

/// Whether `from → to` is physically possible given the vehicle right now.
pub fn move_feasible(from: Zone, to: Zone, needs_platform: bool, v: &VehicleState) -> bool {
    use Zone::*;
    let door_gap = v.door != DoorState::Closed && v.stationary();
    match (from, to) {
        (a, b) if a == b => true,
        (CabinSeated, CabinUnsecured) | (CabinUnsecured, CabinSeated) => true,
        (CabinSeated | CabinUnsecured | OutsideNear, Doorway) => door_gap,
        (Doorway, CabinUnsecured) => door_gap && !needs_platform,
        (Doorway, OutsideNear) => door_gap,
        (OutsideNear | Doorway, OnPlatform) => v.platform == PlatformState::Deployed,
        (OnPlatform, OutsideNear | Doorway) => v.platform == PlatformState::Deployed,
        (OnPlatform, CabinUnsecured) => v.platform == PlatformState::Lifted,
        (CabinUnsecured, OnPlatform) => v.platform == PlatformState::Lifted,
        (Absent, OutsideNear) | (OutsideNear, Absent) => v.stationary(),
        _ => false,
    }
}

pub(crate) fn jitter(seed: u64, stream: u64, tick: Tick) -> f64 {
    let second = tick.0 / 1000;
    let mix = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ second.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    let mut rng = ChaCha8Rng::seed_from_u64(mix);
    let j: f64 = rng.gen_range(-HR_JITTER_BPM..=HR_JITTER_BPM);
    (j * 10.0).round() / 10.0
}

impl PassengerTruth {
    /// Heart rate as the occupant monitor sees it this second.
    pub fn observed_heart_rate(&self, seed: u64, tick: Tick) -> f64 {
        self.heart_rate + jitter(seed, self.stream, tick)
    }
}

/// Applies medical events and scripted and unscripted movement for one tick.
pub fn step_passengers(
    truths: &[PassengerTruth],
    active: &[Disturbance],
    vehicle: &VehicleState,
    tick: Tick,
) -> Vec<PassengerTruth> {
    truths
        .iter()
        .map(|p| {
            let mut p = p.clone();
            let mut base_hr = p.resting_heart_rate;
            let mut fallen = false;
            let mut body = 36.8;
            for d in active {
                match &d.kind {
                    DisturbanceKind::PaxMedicalEvent {
                        subject,
                        heart_rate,
                        fallen: f,
                        body_temp_c,
                    } if subject == &p.id => {
                        if let Some(hr) = heart_rate {
                            base_hr = *hr;
                        }
                        fallen |= *f;
                        if let Some(t) = body_temp_c {
                            body = *t;
                        }
                    }
                    DisturbanceKind::PaxUnscriptedMovement { subject, zone } if subject == &p.id => {
                        let first_tick = tick.0 < d.onset.0 + OPERATIONAL_PERIOD_MS;
                        if first_tick && move_feasible(p.zone, *zone, p.needs_platform, vehicle) {
                            p.zone = *zone;
                        }
                    }
                    _ => {}
                }
            }
            p.heart_rate = base_hr;
            p.fallen = fallen;
            p.body_temp_c = body;

            if let Some(next) = p.script.get(p.script_pos) {
                if tick >= next.after && move_feasible(p.zone, next.zone, p.needs_platform, vehicle) {
                    p.zone = next.zone;
                    p.script_pos += 1;
                }
            }
            if !vehicle.stationary() && !p.zone.onboard() {
                p.zone = Zone::Absent;
            }
            p
        })
        .collect()
}
