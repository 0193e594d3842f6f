use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Error;

/// Participant group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    /// Typically developing.
    TD,
    /// Autism spectrum.
    ASD,
}

impl Group {
    pub const ALL: [Group; 2] = [Group::TD, Group::ASD];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::TD => "TD",
            Group::ASD => "ASD",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "TD" => Ok(Group::TD),
            "ASD" => Ok(Group::ASD),
            other => Err(Error::InvalidInput(format!("unknown group {other:?}"))),
        }
    }
}

/// Name-calling stimulus: stranger man/woman, robot with male/female human
/// voice, robot with robotic voice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stimulus {
    SM,
    SW,
    NM,
    NW,
    NR,
}

impl Stimulus {
    pub const ALL: [Stimulus; 5] = [Stimulus::SM, Stimulus::SW, Stimulus::NM, Stimulus::NW, Stimulus::NR];

    pub fn as_str(self) -> &'static str {
        match self {
            Stimulus::SM => "SM",
            Stimulus::SW => "SW",
            Stimulus::NM => "NM",
            Stimulus::NW => "NW",
            Stimulus::NR => "NR",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Stimulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stimulus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stimulus::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown stimulus code {s:?}")))
    }
}

pub const TURNS: [u8; 3] = [1, 2, 3];

/// Checks a turn number against the three-turn protocol.
pub fn check_turn(turn: i64) -> Result<u8, Error> {
    if (1..=3).contains(&turn) {
        Ok(turn as u8)
    } else {
        Err(Error::InvalidInput(format!("turn {turn} outside 1..=3")))
    }
}
