//! Identifiers and simulation time shared by every level.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Simulation time in milliseconds since scenario start.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tick(pub u64);

impl Tick {
    pub const ZERO: Tick = Tick(0);

    pub fn from_secs(s: f64) -> Tick {
        Tick((s * 1000.0).round().max(0.0) as u64)
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn plus_ms(self, ms: u64) -> Tick {
        Tick(self.0 + ms)
    }

    pub fn since(self, earlier: Tick) -> u64 {
        self.0.saturating_sub(earlier.0)
    }
}

impl fmt::Display for Tick {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ms", self.0)
    }
}

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }
    };
}

string_id!(
    /// Road-graph node.
    NodeId
);
string_id!(
    /// Declared passenger.
    PassengerId
);
string_id!(
    /// Stop point (a lateral slot at a node).
    StopId
);
string_id!(
    /// Scripted person outside the vehicle.
    ExternalId
);
string_id!(
    /// Physical or virtual sensor.
    SensorId
);

/// Operational period.
pub const OPERATIONAL_PERIOD_MS: u64 = 100;
/// Tactical period.
pub const TACTICAL_PERIOD_MS: u64 = 1_000;
/// Strategic period (event triggers come on top).
pub const STRATEGIC_PERIOD_MS: u64 = 10_000;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periods_are_nested() {
        const { assert!(STRATEGIC_PERIOD_MS >= TACTICAL_PERIOD_MS) };
        const { assert!(TACTICAL_PERIOD_MS >= OPERATIONAL_PERIOD_MS) };
        assert_eq!(STRATEGIC_PERIOD_MS % TACTICAL_PERIOD_MS, 0);
        assert_eq!(TACTICAL_PERIOD_MS % OPERATIONAL_PERIOD_MS, 0);
    }

    #[test]
    fn tick_conversions() {
        assert_eq!(Tick::from_secs(12.0), Tick(12_000));
        assert_eq!(Tick(1500).as_secs(), 1.5);
        assert_eq!(Tick(100).since(Tick(400)), 0);
    }
}
