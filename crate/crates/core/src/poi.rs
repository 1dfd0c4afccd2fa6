//! Per-pulse landmarks: onset, systolic peak, dicrotic notch, diastolic peak and end.
//!
//! The diastolic peak is the rightmost falling zero crossing of the (lightly smoothed)
//! first derivative, confirmed when a second-derivative minimum lies within
//! [`DERIVATIVE_MATCH_TOLERANCE`] samples of it. The dicrotic notch is the local minimum
//! between the two peaks with the strongest upward curvature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segment::{local_minima, moving_average_baseline, Pulse};

/// Samples by which a second-derivative minimum may miss the zero crossing.
pub const DERIVATIVE_MATCH_TOLERANCE: usize = 3;
/// Fraction of the pulse at its end where zero crossings are ignored.
pub const END_EXCLUSION_FRAC: f64 = 0.05;
/// Width of the centred mean applied to the first derivative.
pub const DERIVATIVE_SMOOTHING: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    /// Index local to the pulse.
    pub index: usize,
    /// Seconds since the start of the recording.
    pub t: f64,
    /// Signal value at the landmark.
    pub m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointsOfInterest {
    pub onset: Landmark,
    pub end: Landmark,
    pub systolic: Landmark,
    pub dicrotic: Option<Landmark>,
    pub diastolic: Option<Landmark>,
    pub diastolic_fallback_used: bool,
}

impl PointsOfInterest {
    /// `onset < systolic < dicrotic <= diastolic < end`, skipping absent landmarks.
    pub fn is_ordered(&self) -> bool {
        let mut ts = vec![self.onset.t, self.systolic.t];
        ts.extend(self.dicrotic.map(|l| l.t));
        let strict = ts.windows(2).all(|w| w[0] < w[1]);
        let dia_ok = match (self.dicrotic, self.diastolic) {
            (Some(d), Some(a)) => d.t <= a.t && a.t < self.end.t,
            (None, Some(a)) => self.systolic.t < a.t && a.t < self.end.t,
            (Some(_), None) => false,
            (None, None) => true,
        };
        strict && dia_ok && ts.last().copied().unwrap_or(self.onset.t) < self.end.t
    }
}

/// Landmarks of one pulse on each of the three signal views.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulsePoints {
    pub raw: PointsOfInterest,
    pub detrended: PointsOfInterest,
    pub filtered: PointsOfInterest,
}

/// Global maximum, leftmost on ties.
pub fn find_systolic(view: &[f64]) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in view.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.ok_or_else(|| Error::insufficient("empty pulse"))
}

/// First and second derivatives by central differences, one-sided at the ends.
pub fn derivatives(view: &[f64], sample_rate: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = view.len();
    if n < 5 {
        return Err(Error::insufficient(format!("derivatives need 5 samples, got {n}")));
    }
    let fs = sample_rate;
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    d1[0] = (view[1] - view[0]) * fs;
    d1[n - 1] = (view[n - 1] - view[n - 2]) * fs;
    for i in 1..n - 1 {
        d1[i] = (view[i + 1] - view[i - 1]) * 0.5 * fs;
        d2[i] = (view[i + 1] - 2.0 * view[i] + view[i - 1]) * fs * fs;
    }
    d2[0] = (view[0] - 2.0 * view[1] + view[2]) * fs * fs;
    d2[n - 1] = (view[n - 1] - 2.0 * view[n - 2] + view[n - 3]) * fs * fs;
    Ok((d1, d2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiastolicPoint {
    pub index: usize,
    pub magnitude: f64,
    pub fallback_used: bool,
}

/// Indices where the smoothed first derivative turns from positive to non-positive,
/// restricted to `(after, limit)`. Each crossing reports whichever of the two bracketing
/// samples is closer to zero.
fn falling_zero_crossings(slope: &[f64], after: usize, limit: usize) -> Vec<usize> {
    (after + 1..limit.min(slope.len()).saturating_sub(1))
        .filter(|&i| slope[i] > 0.0 && slope[i + 1] <= 0.0)
        .map(|i| if slope[i].abs() <= slope[i + 1].abs() { i } else { i + 1 })
        .filter(|&i| i > after && i < limit)
        .collect()
}

/// Strict local minima of the second derivative.
fn curvature_minima(d2: &[f64]) -> Vec<usize> {
    (1..d2.len().saturating_sub(1))
        .filter(|&i| d2[i] < d2[i - 1] && d2[i] < d2[i + 1])
        .collect()
}

/// Diastolic peak after `systolic`; `None` when the first derivative never falls through
/// zero before the end-exclusion zone.
pub fn find_diastolic(view: &[f64], sample_rate: f64, systolic: usize) -> Result<Option<DiastolicPoint>> {
    let n = view.len();
    let (d1, d2) = derivatives(view, sample_rate)?;
    let slope = moving_average_baseline(&d1, DERIVATIVE_SMOOTHING)?;
    let excluded = ((END_EXCLUSION_FRAC * n as f64).ceil() as usize).max(1);
    let limit = n.saturating_sub(excluded);
    let Some(&crossing) = falling_zero_crossings(&slope, systolic, limit).last() else {
        return Ok(None);
    };
    let matched = curvature_minima(&d2)
        .into_iter()
        .any(|m| m.abs_diff(crossing) <= DERIVATIVE_MATCH_TOLERANCE);
    Ok(Some(DiastolicPoint {
        index: crossing,
        magnitude: view[crossing],
        fallback_used: !matched,
    }))
}

/// Dicrotic notch strictly between the systolic and diastolic peaks: of the local minima
/// there, the one with the largest second derivative.
pub fn find_dicrotic(
    view: &[f64],
    sample_rate: f64,
    systolic: usize,
    diastolic: Option<usize>,
) -> Result<Option<(usize, f64)>> {
    let Some(diastolic) = diastolic else {
        return Ok(None);
    };
    if diastolic <= systolic + 1 || diastolic >= view.len() {
        return Ok(None);
    }
    let (_, d2) = derivatives(view, sample_rate)?;
    let window = &view[systolic..=diastolic];
    let best = local_minima(window)
        .into_iter()
        .map(|i| i + systolic)
        .max_by(|&a, &b| d2[a].total_cmp(&d2[b]).then(b.cmp(&a)));
    Ok(best.map(|i| (i, view[i])))
}

fn landmark(pulse: &Pulse, view: &[f64], index: usize) -> Landmark {
    Landmark {
        index,
        t: pulse.time_at(index),
        m: view[index],
    }
}

/// Detects landmarks on the filtered view and reads every view at those positions.
/// The systolic peak is located on each view separately.
pub fn locate_points(pulse: &Pulse) -> Result<PulsePoints> {
    let n = pulse.len();
    if n < 5 {
        return Err(Error::insufficient(format!("pulse {} has only {n} samples", pulse.index)));
    }
    let fs = pulse.sample_rate;
    let (sys, _) = find_systolic(&pulse.filtered)?;
    let dia = find_diastolic(&pulse.filtered, fs, sys)?;
    let dic = find_dicrotic(&pulse.filtered, fs, sys, dia.map(|d| d.index))?;

    let on_view = |view: &[f64]| -> Result<PointsOfInterest> {
        let (view_sys, _) = find_systolic(view)?;
        Ok(PointsOfInterest {
            onset: landmark(pulse, view, 0),
            end: landmark(pulse, view, n - 1),
            systolic: landmark(pulse, view, view_sys),
            dicrotic: dic.map(|(i, _)| landmark(pulse, view, i)),
            diastolic: dia.map(|d| landmark(pulse, view, d.index)),
            diastolic_fallback_used: dia.is_some_and(|d| d.fallback_used),
        })
    };
    Ok(PulsePoints {
        raw: on_view(&pulse.raw)?,
        detrended: on_view(&pulse.detrended)?,
        filtered: on_view(&pulse.filtered)?,
    })
}
