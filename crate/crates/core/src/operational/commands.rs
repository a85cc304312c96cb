use crate::ids::{NodeId, Tick};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Subsystem {
    Drivetrain,
    Brake,
    Steering,
    Door,
    Lock,
    Platform,
}

impl fmt::Display for Subsystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Subsystem::Drivetrain => "DRIVETRAIN",
            Subsystem::Brake => "BRAKE",
            Subsystem::Steering => "STEERING",
            Subsystem::Door => "DOOR",
            Subsystem::Lock => "LOCK",
            Subsystem::Platform => "PLATFORM",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DoorCmd {
    Open,
    Close,
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LockCmd {
    Locked,
    Unlocked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PlatformCmd {
    Deploy,
    Lift,
    Stow,
    Hold,
}

/// Setpoint carried by a command or echoed back in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Setpoint {
    /// Tractive acceleration, m/s², non-negative.
    Accel(f64),
    /// Braking deceleration, m/s², non-negative. Zero at standstill still
    /// means the holding brake is applied.
    Decel(f64),
    Steer {
        heading: Option<NodeId>,
        slot: Option<u32>,
    },
    Door(DoorCmd),
    Lock(LockCmd),
    Platform(PlatformCmd),
}

impl Setpoint {
    /// Scalar setpoints compare with a small absolute tolerance.
    pub fn matches(&self, other: &Setpoint) -> bool {
        match (self, other) {
            (Setpoint::Accel(a), Setpoint::Accel(b)) | (Setpoint::Decel(a), Setpoint::Decel(b)) => {
                (a - b).abs() <= 1e-9
            }
            _ => self == other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorCommand {
    pub subsystem: Subsystem,
    pub setpoint: Setpoint,
}

impl ActuatorCommand {
    pub fn new(subsystem: Subsystem, setpoint: Setpoint) -> Self {
        ActuatorCommand { subsystem, setpoint }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorReport {
    pub subsystem: Subsystem,
    pub commanded: Setpoint,
    pub achieved: Setpoint,
    pub tick: Tick,
}

impl ActuatorReport {
    pub fn diverges(&self) -> bool {
        !self.commanded.matches(&self.achieved)
    }
}

/// Looks up the command addressed to `subsystem`, if any.
pub fn command_for(commands: &[ActuatorCommand], subsystem: Subsystem) -> Option<&Setpoint> {
    commands.iter().find(|c| c.subsystem == subsystem).map(|c| &c.setpoint)
}
