use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Event classes. The first four are the detection targets, in the fixed
/// order used by every per-class vector in the crate. `Vocal` is the merged
/// speech-or-singing class a visual-only system can emit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventClass {
    Silence,
    Speech,
    Singing,
    Others,
    Vocal,
}

impl EventClass {
    pub const TARGETS: [EventClass; 4] = [
        EventClass::Silence,
        EventClass::Speech,
        EventClass::Singing,
        EventClass::Others,
    ];

    /// Position within [`EventClass::TARGETS`]; `None` for `Vocal`.
    pub fn target_index(self) -> Option<usize> {
        match self {
            EventClass::Silence => Some(0),
            EventClass::Speech => Some(1),
            EventClass::Singing => Some(2),
            EventClass::Others => Some(3),
            EventClass::Vocal => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EventClass::Silence => "silence",
            EventClass::Speech => "speech",
            EventClass::Singing => "singing",
            EventClass::Others => "others",
            EventClass::Vocal => "vocal",
        }
    }

    pub fn is_vocal(self) -> bool {
        matches!(
            self,
            EventClass::Speech | EventClass::Singing | EventClass::Vocal
        )
    }
}

impl fmt::Display for EventClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "silence" => Ok(EventClass::Silence),
            "speech" => Ok(EventClass::Speech),
            "singing" => Ok(EventClass::Singing),
            "others" => Ok(EventClass::Others),
            "vocal" => Ok(EventClass::Vocal),
            other => Err(Error::InvalidArgument(format!("unknown event label {other:?}"))),
        }
    }
}
