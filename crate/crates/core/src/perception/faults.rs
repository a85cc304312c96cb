//! Debounced detection of actuator faults from command/achieved divergence.

use crate::operational::commands::{ActuatorReport, Subsystem};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, VecDeque};

/// Consecutive diverging operational ticks before a fault is declared.
pub const FAULT_DEBOUNCE_TICKS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FaultMode {
    /// The actuator does not follow its command.
    Stuck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SubsystemFault {
    pub subsystem: Subsystem,
    pub mode: FaultMode,
}

/// Sliding window over the last few report batches. The output is a pure
/// function of that window.
#[derive(Debug, Clone, Default)]
pub struct FaultDetector {
    window: VecDeque<BTreeSet<Subsystem>>,
}

impl FaultDetector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds one tick's reports and returns the subsystems that diverged in
    /// every one of the last `FAULT_DEBOUNCE_TICKS` ticks.
    pub fn detect_subsystem_faults(&mut self, reports: &[ActuatorReport]) -> Vec<SubsystemFault> {
        let diverging: BTreeSet<Subsystem> = reports.iter().filter(|r| r.diverges()).map(|r| r.subsystem).collect();
        self.window.push_back(diverging);
        while self.window.len() > FAULT_DEBOUNCE_TICKS {
            self.window.pop_front();
        }
        if self.window.len() < FAULT_DEBOUNCE_TICKS {
            return Vec::new();
        }
        let mut iter = self.window.iter();
        let first = iter.next().cloned().unwrap_or_default();
        iter.fold(first, |acc, s| acc.intersection(s).copied().collect())
            .into_iter()
            .map(|subsystem| SubsystemFault {
                subsystem,
                mode: FaultMode::Stuck,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::Tick;
    use crate::operational::commands::{DoorCmd, Setpoint};

    fn door(tick: u64, achieved: DoorCmd) -> ActuatorReport {
        ActuatorReport {
            subsystem: Subsystem::Door,
            commanded: Setpoint::Door(DoorCmd::Open),
            achieved: Setpoint::Door(achieved),
            tick: Tick(tick),
        }
    }

    /// Replays a stream and reports the first tick at which a door fault
    /// appears, computed by counting consecutive mismatches directly.
    fn oracle_first_fault(stream: &[bool]) -> Option<usize> {
        let mut run = 0;
        for (i, &bad) in stream.iter().enumerate() {
            run = if bad { run + 1 } else { 0 };
            if run >= 3 {
                return Some(i);
            }
        }
        None
    }

    fn detector_first_fault(stream: &[bool]) -> Option<usize> {
        let mut d = FaultDetector::new();
        stream.iter().enumerate().find_map(|(i, &bad)| {
            let r = door(i as u64 * 100, if bad { DoorCmd::Close } else { DoorCmd::Open });
            (!d.detect_subsystem_faults(&[r]).is_empty()).then_some(i)
        })
    }

    #[test]
    fn stuck_door_three_ticks() {
        let stream = [true, true, true];
        assert_eq!(oracle_first_fault(&stream), Some(2));
        let mut d = FaultDetector::new();
        let mut out = Vec::new();
        for (i, _) in stream.iter().enumerate() {
            out = d.detect_subsystem_faults(&[door(i as u64 * 100, DoorCmd::Close)]);
        }
        assert_eq!(
            out,
            vec![SubsystemFault {
                subsystem: Subsystem::Door,
                mode: FaultMode::Stuck
            }]
        );
    }

    #[test]
    fn matching_reports_are_clean() {
        let mut d = FaultDetector::new();
        for i in 0..10 {
            assert!(d.detect_subsystem_faults(&[door(i * 100, DoorCmd::Open)]).is_empty());
        }
    }

    #[test]
    fn two_tick_glitch_then_recovery() {
        let stream = [true, true, false, false, false];
        assert_eq!(oracle_first_fault(&stream), None);
        assert_eq!(detector_first_fault(&stream), None);
    }

    #[test]
    fn agrees_with_replay_oracle() {
        let patterns: [&[bool]; 5] = [
            &[false, true, true, false, true, true, true],
            &[true, false, true, false, true],
            &[true, true, true, true],
            &[false; 6],
            &[false, false, true, true, true, false],
        ];
        for p in patterns {
            assert_eq!(detector_first_fault(p), oracle_first_fault(p), "{p:?}");
        }
    }
}
