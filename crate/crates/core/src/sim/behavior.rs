use std::fmt;
use std::str::FromStr;

/// The six behavior classes and their integer labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum BehaviorClass {
    Other = 0,
    Walking = 1,
    Falling = 2,
    Swing = 3,
    Seizure = 4,
    RestlessMovement = 5,
}

impl BehaviorClass {
    pub const COUNT: usize = 6;

    pub const ALL: [BehaviorClass; 6] = [
        BehaviorClass::Other,
        BehaviorClass::Walking,
        BehaviorClass::Falling,
        BehaviorClass::Swing,
        BehaviorClass::Seizure,
        BehaviorClass::RestlessMovement,
    ];

    pub fn label(self) -> u8 {
        self as u8
    }

    pub fn from_label(label: u8) -> Option<Self> {
        Self::ALL.get(label as usize).copied()
    }

    /// Human-readable name, as printed in reports.
    pub fn name(self) -> &'static str {
        match self {
            BehaviorClass::Other => "Other",
            BehaviorClass::Walking => "Walking",
            BehaviorClass::Falling => "Falling",
            BehaviorClass::Swing => "Swing",
            BehaviorClass::Seizure => "Seizure",
            BehaviorClass::RestlessMovement => "Restless Movement",
        }
    }

    /// Lower-case identifier used in scene files and on the command line.
    pub fn key(self) -> &'static str {
        match self {
            BehaviorClass::Other => "other",
            BehaviorClass::Walking => "walking",
            BehaviorClass::Falling => "falling",
            BehaviorClass::Swing => "swing",
            BehaviorClass::Seizure => "seizure",
            BehaviorClass::RestlessMovement => "restless",
        }
    }
}

impl fmt::Display for BehaviorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BehaviorClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        if let Ok(n) = lower.parse::<u8>() {
            return Self::from_label(n).ok_or_else(|| format!("label {n} out of range 0..=5"));
        }
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.key() == lower || c.name().to_ascii_lowercase() == lower)
            .ok_or_else(|| format!("unknown behavior `{s}`"))
    }
}
