use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Activity class of a recording or of an individual pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activity {
    Stationary,
    SitToStand,
    LieToStand,
}

impl Activity {
    pub const ALL: [Activity; 3] = [Activity::Stationary, Activity::SitToStand, Activity::LieToStand];

    pub fn index(self) -> usize {
        match self {
            Activity::Stationary => 0,
            Activity::SitToStand => 1,
            Activity::LieToStand => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Activity> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activity::Stationary => "stationary",
            Activity::SitToStand => "sit-to-stand",
            Activity::LieToStand => "lie-to-stand",
        }
    }

    pub fn is_movement(self) -> bool {
        self != Activity::Stationary
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Activity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "stationary" => Ok(Activity::Stationary),
            "sit-to-stand" | "sittostand" => Ok(Activity::SitToStand),
            "lie-to-stand" | "lietostand" => Ok(Activity::LieToStand),
            other => Err(Error::invalid(format!("unknown activity `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Seconds since the start of the session.
    pub time: f64,
    pub value: i64,
}

/// A raw sensor recording on a strictly increasing time base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub samples: Vec<Sample>,
    pub sample_rate: f64,
    pub label: Activity,
    pub source_id: String,
    /// Time of the postural movement, when known.
    pub movement_onset: Option<f64>,
}

impl Recording {
    pub fn new(samples: Vec<Sample>, sample_rate: f64, label: Activity, source_id: impl Into<String>) -> Result<Self> {
        let rec = Recording {
            samples,
            sample_rate,
            label,
            source_id: source_id.into(),
            movement_onset: None,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::invalid(format!("sample rate {} must be positive", self.sample_rate)));
        }
        for pair in self.samples.windows(2) {
            if !(pair[1].time > pair[0].time) {
                return Err(Error::malformed(
                    self.source_id.clone(),
                    format!("time {} does not increase after {}", pair[1].time, pair[0].time),
                ));
            }
        }
        if let Some(s) = self.samples.iter().find(|s| !s.time.is_finite()) {
            return Err(Error::NonFinite(format!("time of sample with value {}", s.value)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.value as f64).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.time).collect()
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.time - a.time + 1.0 / self.sample_rate,
            _ => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn activity_round_trips_through_strings() {
        for a in Activity::ALL {
            assert_eq!(a.as_str().parse::<Activity>().unwrap(), a);
            assert_eq!(Activity::from_index(a.index()), Some(a));
        }
        assert!("walking".parse::<Activity>().is_err());
    }

    #[test]
    fn rejects_non_increasing_times() {
        let samples = vec![Sample { time: 0.0, value: 1 }, Sample { time: 0.0, value: 2 }];
        assert!(Recording::new(samples, 100.0, Activity::Stationary, "x").is_err());
        assert!(Recording::new(vec![], 0.0, Activity::Stationary, "x").is_err());
    }
}
