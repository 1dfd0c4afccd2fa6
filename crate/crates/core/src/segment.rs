//! Pulse onset detection and slicing.
//!
//! Onsets are local minima of the filtered signal that sit below a centred
//! moving-average baseline and are more than half a pulse period apart. The
//! below-baseline rule rejects dicrotic notches, the spacing rule rejects noise
//! minima near a true onset.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::SignalViews;

/// Autocorrelation below this value means no usable periodicity.
pub const MIN_PERIOD_CORRELATION: f64 = 0.2;
const MIN_PERIOD_S: f64 = 0.5;
const MAX_PERIOD_S: f64 = 2.0;
const MIN_DURATION_S: f64 = 3.0;

/// Centred moving average whose window shrinks symmetrically near the edges.
pub fn moving_average_baseline(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window % 2 == 0 {
        return Err(Error::invalid(format!("baseline window {window} must be odd")));
    }
    if window < 3 || window > series.len() {
        return Err(Error::invalid(format!(
            "baseline window {window} must lie in [3, {}]",
            series.len()
        )));
    }
    let n = series.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in series {
        prefix.push(prefix.last().unwrap() + v);
    }
    let half = window / 2;
    Ok((0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            (prefix[i + h + 1] - prefix[i - h]) / (2 * h + 1) as f64
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodEstimate {
    /// Nominal pulse period in samples.
    pub samples: usize,
    /// Normalised autocorrelation at the chosen lag (0 when falling back).
    pub correlation: f64,
    /// Set when no autocorrelation peak cleared [`MIN_PERIOD_CORRELATION`] and the
    /// one-second fallback was used.
    pub low_confidence: bool,
}

/// Picks the highest autocorrelation peak with a lag between 0.5 s and 2 s.
pub fn estimate_period(filtered: &[f64], sample_rate: f64) -> Result<PeriodEstimate> {
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::invalid("sample rate must be positive"));
    }
    let n = filtered.len();
    if (n as f64) < MIN_DURATION_S * sample_rate {
        return Err(Error::insufficient(format!(
            "period estimation needs {MIN_DURATION_S} s of signal, got {n} samples"
        )));
    }
    let fallback = PeriodEstimate {
        samples: sample_rate.round().max(1.0) as usize,
        correlation: 0.0,
        low_confidence: true,
    };
    let mean = filtered.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = filtered.iter().map(|v| v - mean).collect();
    let energy: f64 = x.iter().map(|v| v * v).sum();
    if energy <= f64::EPSILON * n as f64 {
        return Ok(fallback);
    }
    let lo = (MIN_PERIOD_S * sample_rate).ceil().max(1.0) as usize;
    let hi = ((MAX_PERIOD_S * sample_rate).floor() as usize).min(n - 2);
    if lo + 1 >= hi {
        return Ok(fallback);
    }
    let acf = |lag: usize| x[..n - lag].iter().zip(&x[lag..]).map(|(a, b)| a * b).sum::<f64>() / energy;
    let r: Vec<f64> = (lo - 1..=hi + 1).map(acf).collect();
    let mut best: Option<(usize, f64)> = None;
    for k in 1..r.len() - 1 {
        if r[k] > r[k - 1] && r[k] >= r[k + 1] && best.is_none_or(|(_, b)| r[k] > b) {
            best = Some((k + lo - 1, r[k]));
        }
    }
    match best {
        Some((lag, c)) if c >= MIN_PERIOD_CORRELATION => Ok(PeriodEstimate {
            samples: lag,
            correlation: c,
            low_confidence: false,
        }),
        _ => Ok(fallback),
    }
}

/// Strict local minima; a flat-bottomed minimum reports its leftmost sample.
pub fn local_minima(x: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = x.len();
    let mut i = 1;
    while i + 1 < n {
        if x[i] < x[i - 1] {
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] > x[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

const MIN_RISE_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct OnsetDetection {
    /// Ascending sample indices into the filtered view.
    pub onsets: Vec<usize>,
    pub baseline: Vec<f64>,
    pub period: PeriodEstimate,
    /// Explains an empty or low-confidence result.
    pub diagnostic: Option<String>,
}

/// Finds pulse onsets on the filtered view.
///
/// Candidates are local minima below the baseline. Scanning left to right, a candidate
/// closer than half a period to the last accepted onset replaces it only when the rise
/// over the following half period is strictly larger, since the foot of the systolic
/// upstroke is followed by the biggest climb of the cycle. Survivors whose rise is below
/// half the median rise are dropped.
pub fn detect_onsets(filtered: &[f64], sample_rate: f64) -> Result<OnsetDetection> {
    let period = estimate_period(filtered, sample_rate)?;
    let mut window = period.samples.max(3) | 1;
    if window > filtered.len() {
        window = (filtered.len() - 1) | 1;
    }
    let baseline = moving_average_baseline(filtered, window)?;
    let min_gap = period.samples as f64 / 2.0;

    let reach = min_gap.ceil() as usize;
    let rise = |m: usize| {
        let end = (m + reach).min(filtered.len() - 1);
        filtered[m..=end].iter().copied().fold(f64::NEG_INFINITY, f64::max) - filtered[m]
    };
    let mut onsets: Vec<usize> = Vec::new();
    for m in local_minima(filtered) {
        if filtered[m] >= baseline[m] {
            continue;
        }
        match onsets.last_mut() {
            Some(last) if ((m - *last) as f64) <= min_gap => {
                if rise(m) > rise(*last) {
                    *last = m;
                }
            }
            _ => onsets.push(m),
        }
    }
    // A notch that survived the scan, typically in a partial cycle at the edge, is
    // followed by the dicrotic wave only, a fraction of the systolic climb.
    if onsets.len() >= 3 {
        let mut rises: Vec<f64> = onsets.iter().map(|&m| rise(m)).collect();
        rises.sort_by(f64::total_cmp);
        let floor = MIN_RISE_FRACTION * rises[rises.len() / 2];
        onsets.retain(|&m| rise(m) >= floor);
    }

    let diagnostic = if onsets.is_empty() {
        Some("no local minimum below the moving-average baseline".to_string())
    } else if period.low_confidence {
        Some(format!(
            "no clear periodicity; assumed a period of {} samples",
            period.samples
        ))
    } else {
        None
    };
    Ok(OnsetDetection {
        onsets,
        baseline,
        period,
        diagnostic,
    })
}

/// One cardiac cycle, inclusive of both bounding onsets.
#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    pub index: usize,
    /// Index of the opening onset in the full recording.
    pub start_index: usize,
    pub end_index: usize,
    pub start_time: f64,
    pub end_time: f64,
    pub sample_rate: f64,
    pub raw: Vec<f64>,
    pub detrended: Vec<f64>,
    pub filtered: Vec<f64>,
}

impl Pulse {
    pub fn len(&self) -> usize {
        self.filtered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filtered.is_empty()
    }

    /// Time of a sample index local to this pulse.
    pub fn time_at(&self, local: usize) -> f64 {
        self.start_time + local as f64 / self.sample_rate
    }
}

/// Cuts every view at the same onsets; N onsets give N-1 pulses.
pub fn slice_pulses(views: &SignalViews, onsets: &[usize]) -> Result<Vec<Pulse>> {
    if onsets.len() < 2 {
        return Err(Error::insufficient(format!(
            "slicing needs at least 2 onsets, got {}",
            onsets.len()
        )));
    }
    if let Some(w) = onsets.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::invalid(format!(
            "onsets must strictly increase ({} then {})",
            w[0], w[1]
        )));
    }
    if *onsets.last().unwrap() >= views.len() {
        return Err(Error::invalid("onset index beyond the end of the signal"));
    }
    Ok(onsets
        .windows(2)
        .enumerate()
        .map(|(index, w)| {
            let r = w[0]..=w[1];
            Pulse {
                index,
                start_index: w[0],
                end_index: w[1],
                start_time: views.times[w[0]],
                end_time: views.times[w[1]],
                sample_rate: views.sample_rate,
                raw: views.raw[r.clone()].to_vec(),
                detrended: views.detrended[r.clone()].to_vec(),
                filtered: views.filtered[r].to_vec(),
            }
        })
        .collect())
}
