use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// A tool action that a substitute or construction must perform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Hit,
    Cut,
    Scoop,
    Flip,
    Poke,
    Rake,
    Screw,
    Squeegee,
}

#[derive(Debug, Error)]
#[error("unknown action {0:?}")]
pub struct UnknownAction(pub String);

impl Action {
    pub const ALL: [Action; 8] = [
        Action::Hit,
        Action::Cut,
        Action::Scoop,
        Action::Flip,
        Action::Poke,
        Action::Rake,
        Action::Screw,
        Action::Squeegee,
    ];

    /// Actions evaluated as two-part constructions.
    pub const CONSTRUCTION: [Action; 6] = [
        Action::Hit,
        Action::Scoop,
        Action::Flip,
        Action::Screw,
        Action::Rake,
        Action::Squeegee,
    ];

    /// Actions evaluated as single-object substitutions.
    pub const SUBSTITUTION: [Action; 6] = [
        Action::Hit,
        Action::Cut,
        Action::Scoop,
        Action::Flip,
        Action::Poke,
        Action::Rake,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Hit => "hit",
            Action::Cut => "cut",
            Action::Scoop => "scoop",
            Action::Flip => "flip",
            Action::Poke => "poke",
            Action::Rake => "rake",
            Action::Screw => "screw",
            Action::Squeegee => "squeegee",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Action {
    type Err = UnknownAction;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "hit" | "hammer" => Action::Hit,
            "cut" => Action::Cut,
            "scoop" | "contain" | "scoop/contain" => Action::Scoop,
            "flip" => Action::Flip,
            "poke" => Action::Poke,
            "rake" => Action::Rake,
            "screw" => Action::Screw,
            "squeegee" => Action::Squeegee,
            _ => return Err(UnknownAction(s.to_owned())),
        })
    }
}

impl Serialize for Action {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_aliases() {
        assert_eq!("scoop/contain".parse::<Action>().unwrap(), Action::Scoop);
        assert_eq!("Hit".parse::<Action>().unwrap(), Action::Hit);
        assert!("juggle".parse::<Action>().is_err());
        for a in Action::ALL {
            assert_eq!(a.as_str().parse::<Action>().unwrap(), a);
        }
    }
}
