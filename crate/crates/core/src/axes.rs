//! Per-axis containers.
//!
//! Deviations are modeled independently along three axes. Units are fixed:
//! nautical miles for lateral and longitudinal, feet for vertical, minutes
//! for time.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Lateral,
    Vertical,
    Longitudinal,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Lateral, Axis::Vertical, Axis::Longitudinal];

    /// CSV column header for values along this axis.
    pub fn column(self) -> &'static str {
        match self {
            Axis::Lateral => "lat_nm",
            Axis::Vertical => "vert_ft",
            Axis::Longitudinal => "long_nm",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Axis::Vertical => "ft",
            _ => "NM",
        }
    }

    pub fn from_column(name: &str) -> Option<Axis> {
        Axis::ALL.into_iter().find(|a| a.column() == name)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Axis::Lateral => "lateral",
            Axis::Vertical => "vertical",
            Axis::Longitudinal => "longitudinal",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lateral" | "lat" | "lat_nm" => Ok(Axis::Lateral),
            "vertical" | "vert" | "vert_ft" => Ok(Axis::Vertical),
            "longitudinal" | "long" | "long_nm" => Ok(Axis::Longitudinal),
            other => Err(format!("unknown axis `{other}`")),
        }
    }
}

/// One value per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisTriple<T> {
    pub lateral: T,
    pub vertical: T,
    pub longitudinal: T,
}

impl<T> AxisTriple<T> {
    pub fn new(lateral: T, vertical: T, longitudinal: T) -> Self {
        Self {
            lateral,
            vertical,
            longitudinal,
        }
    }

    pub fn get(&self, axis: Axis) -> &T {
        match axis {
            Axis::Lateral => &self.lateral,
            Axis::Vertical => &self.vertical,
            Axis::Longitudinal => &self.longitudinal,
        }
    }

    pub fn get_mut(&mut self, axis: Axis) -> &mut T {
        match axis {
            Axis::Lateral => &mut self.lateral,
            Axis::Vertical => &mut self.vertical,
            Axis::Longitudinal => &mut self.longitudinal,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(Axis, &T) -> U) -> AxisTriple<U> {
        AxisTriple {
            lateral: f(Axis::Lateral, &self.lateral),
            vertical: f(Axis::Vertical, &self.vertical),
            longitudinal: f(Axis::Longitudinal, &self.longitudinal),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Axis, &T)> {
        Axis::ALL.into_iter().map(move |a| (a, self.get(a)))
    }
}

/// Which axes a simulation or analytic pipeline accounts for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisSet {
    LateralOnly,
    #[default]
    All,
}

impl AxisSet {
    pub fn axes(self) -> &'static [Axis] {
        match self {
            AxisSet::LateralOnly => &[Axis::Lateral],
            AxisSet::All => &Axis::ALL,
        }
    }
}
