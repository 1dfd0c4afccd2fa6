//! Morphology features, orthostatic magnitude and chi-squared feature ranking.
//!
//! Unprefixed features are read from the filtered view; `raw_` and `detrended_`
//! features come from the corresponding views. Feature order follows the published
//! importance ranking, most important first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poi::{Landmark, PointsOfInterest, PulsePoints};
use crate::recording::Activity;

pub const FEATURE_COUNT: usize = 21;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "systolic_magnitude",
    "systolic_rise_gradient",
    "raw_systolic_amplitude",
    "systolic_amplitude",
    "peak_difference",
    "detrended_systolic_amplitude",
    "pulse_onset_magnitude",
    "raw_offset",
    "raw_orthostatic_magnitude",
    "pulse_width",
    "end_point_magnitude",
    "detrended_offset",
    "diastolic_amplitude",
    "raw_diastolic_amplitude",
    "systolic_phase",
    "diastolic_phase",
    "offset",
    "detrended_orthostatic_magnitude",
    "detrended_diastolic_amplitude",
    "diastolic_magnitude",
    "dicrotic_magnitude",
];

/// Feature removed before training by default.
pub const DEFAULT_DROP: [&str; 1] = ["dicrotic_magnitude"];

/// Pulses starting this long after the movement carry the movement label, seconds.
pub const DEFAULT_LABEL_WINDOW_S: f64 = 10.0;
/// Stationary period used for the orthostatic baseline, seconds.
pub const DEFAULT_STATIONARY_WINDOW_S: f64 = 20.0;
pub const CHI_SQUARED_BINS: usize = 10;

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|&n| n == name)
}

/// Per-pulse data-quality bits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QualityFlags(pub u8);

impl QualityFlags {
    pub const DIASTOLIC_ABSENT: u8 = 1;
    pub const DICROTIC_ABSENT: u8 = 2;
    pub const DIASTOLIC_FALLBACK: u8 = 4;
    /// Systolic peak coincides with the onset, so the rise gradient is undefined.
    pub const ZERO_RISE_TIME: u8 = 8;

    pub fn contains(self, bit: u8) -> bool {
        self.0 & bit != 0
    }

    fn set(&mut self, bit: u8) {
        self.0 |= bit;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_COUNT],
    pub label: Activity,
    pub pulse_index: usize,
    pub quality: QualityFlags,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).map(|i| self.values[i])
    }
}

/// Orthostatic magnitudes of one pulse on the raw and detrended views.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Orthostatic {
    pub raw: f64,
    pub detrended: f64,
}

/// Systolic height above the stationary baseline for every pulse.
///
/// `peaks` holds `(onset time, systolic magnitude)` per pulse; the baseline is the mean
/// magnitude of pulses whose onset falls in `[0, stationary_window)`.
pub fn orthostatic_magnitude(peaks: &[(f64, f64)], stationary_window: f64) -> Result<Vec<f64>> {
    let stationary: Vec<f64> = peaks
        .iter()
        .filter(|(t, _)| (0.0..stationary_window).contains(t))
        .map(|&(_, m)| m)
        .collect();
    if stationary.len() < 3 {
        return Err(Error::insufficient(format!(
            "{} pulses in the {stationary_window} s stationary window, at least 3 required",
            stationary.len()
        )));
    }
    let baseline = stationary.iter().sum::<f64>() / stationary.len() as f64;
    Ok(peaks.iter().map(|&(_, m)| m - baseline).collect())
}

/// Class of a pulse: the recording's movement label inside
/// `[movement_onset, movement_onset + window)`, stationary elsewhere.
pub fn label_pulse(onset_time: f64, recording_label: Activity, movement_onset: Option<f64>, window: f64) -> Activity {
    match movement_onset {
        Some(m) if recording_label.is_movement() && (m..m + window).contains(&onset_time) => recording_label,
        _ => Activity::Stationary,
    }
}

fn amplitude(poi: &PointsOfInterest, lm: Option<Landmark>) -> f64 {
    lm.map_or(0.0, |l| l.m - poi.onset.m)
}

/// Derives the 21 features of one pulse from its landmarks.
///
/// Missing diastolic points zero the diastolic-derived features; a missing notch moves
/// the systolic/diastolic phase split to the diastolic peak, or to the systolic peak when
/// that is missing too. Every such substitution is recorded in `quality`.
pub fn extract_features(points: &PulsePoints, orthostatic: Orthostatic, label: Activity, pulse_index: usize) -> FeatureVector {
    let f = &points.filtered;
    let raw = &points.raw;
    let det = &points.detrended;
    let mut quality = QualityFlags::default();
    if f.diastolic.is_none() {
        quality.set(QualityFlags::DIASTOLIC_ABSENT);
    }
    if f.dicrotic.is_none() {
        quality.set(QualityFlags::DICROTIC_ABSENT);
    }
    if f.diastolic_fallback_used {
        quality.set(QualityFlags::DIASTOLIC_FALLBACK);
    }

    let rise_time = f.systolic.t - f.onset.t;
    let systolic_amplitude = f.systolic.m - f.onset.m;
    let rise_gradient = if rise_time > 0.0 {
        systolic_amplitude / rise_time
    } else {
        quality.set(QualityFlags::ZERO_RISE_TIME);
        0.0
    };
    let split = f.dicrotic.or(f.diastolic).unwrap_or(f.systolic).t;
    let pulse_width = f.end.t - f.onset.t;

    let values = [
        f.systolic.m,
        rise_gradient,
        raw.systolic.m - raw.onset.m,
        systolic_amplitude,
        f.diastolic.map_or(0.0, |d| f.systolic.m - d.m),
        det.systolic.m - det.onset.m,
        f.onset.m,
        raw.end.m - raw.onset.m,
        orthostatic.raw,
        pulse_width,
        f.end.m,
        det.end.m - det.onset.m,
        amplitude(f, f.diastolic),
        amplitude(raw, raw.diastolic),
        split - f.onset.t,
        f.end.t - split,
        f.end.m - f.onset.m,
        orthostatic.detrended,
        amplitude(det, det.diastolic),
        f.diastolic.map_or(0.0, |d| d.m),
        f.dicrotic.map_or(0.0, |d| d.m),
    ];
    FeatureVector {
        values,
        label,
        pulse_index,
        quality,
    }
}

/// Assigns each value to one of `n_bins` equal-frequency bins using the order statistics
/// at `k * n / n_bins`. Equal values always share a bin, and the assignment depends only
/// on the ranks of the values.
pub fn equal_frequency_bins(values: &[f64], n_bins: usize) -> Vec<usize> {
    if values.is_empty() || n_bins < 2 {
        return vec![0; values.len()];
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut cuts: Vec<f64> = (1..n_bins).map(|k| sorted[k * n / n_bins]).collect();
    cuts.dedup();
    values
        .iter()
        .map(|v| cuts.partition_point(|c| c.total_cmp(v).is_le()))
        .collect()
}

/// Observed counts, bins by classes, with empty bins removed.
pub fn contingency_table(bins: &[usize], labels: &[usize], n_classes: usize) -> Vec<Vec<f64>> {
    let n_bins = bins.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0.0; n_classes]; n_bins];
    for (&b, &c) in bins.iter().zip(labels) {
        table[b][c] += 1.0;
    }
    table.retain(|row| row.iter().sum::<f64>() > 0.0);
    table
}

/// Pearson's statistic, the sum of `(O - E)^2 / E` with `E = row * col / total`.
/// Cells with zero expectation contribute nothing.
pub fn chi_squared_statistic(table: &[Vec<f64>]) -> f64 {
    let n_cols = table.first().map_or(0, Vec::len);
    let row_sums: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<f64> = (0..n_cols).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let total: f64 = row_sums.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut stat = 0.0;
    for (row, rs) in table.iter().zip(&row_sums) {
        for (obs, cs) in row.iter().zip(&col_sums) {
            let expected = rs * cs / total;
            if expected > 0.0 {
                stat += (obs - expected).powi(2) / expected;
            }
        }
    }
    stat
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    /// `(feature name, chi-squared score)`, highest score first.
    pub entries: Vec<(String, f64)>,
}

impl FeatureRanking {
    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|(n, _)| n == name)
    }
}

/// Ranks named feature columns against class labels.
pub fn rank_columns(names: &[&str], columns: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<FeatureRanking> {
    if names.is_empty() || names.len() != columns.len() {
        return Err(Error::invalid("need one name per feature column and at least one column"));
    }
    let mut seen = vec![false; n_classes];
    for &l in labels {
        if l >= n_classes {
            return Err(Error::invalid(format!("label {l} outside {n_classes} classes")));
        }
        seen[l] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(Error::insufficient("chi-squared ranking needs at least two classes"));
    }
    let mut entries = Vec::with_capacity(names.len());
    for (name, col) in names.iter().zip(columns) {
        if col.len() != labels.len() {
            return Err(Error::invalid(format!("column `{name}` length differs from labels")));
        }
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature `{name}`")));
        }
        let bins = equal_frequency_bins(col, CHI_SQUARED_BINS);
        let score = chi_squared_statistic(&contingency_table(&bins, labels, n_classes));
        entries.push((name.to_string(), score));
    }
    entries.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(FeatureRanking { entries })
}

/// Chi-squared importance of all 21 features over a labelled dataset.
pub fn chi_squared_scores(dataset: &[FeatureVector]) -> Result<FeatureRanking> {
    let columns: Vec<Vec<f64>> = (0..FEATURE_COUNT)
        .map(|j| dataset.iter().map(|fv| fv.values[j]).collect())
        .collect();
    let labels: Vec<usize> = dataset.iter().map(|fv| fv.label.index()).collect();
    rank_columns(&FEATURE_NAMES, &columns, &labels, Activity::ALL.len())
}

/// Which of the 21 features are used for training.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMask {
    pub active: [bool; FEATURE_COUNT],
}

impl FeatureMask {
    pub fn all() -> FeatureMask {
        FeatureMask {
            active: [true; FEATURE_COUNT],
        }
    }

    pub fn count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn names(&self) -> Vec<&'static str> {
        FEATURE_NAMES
            .iter()
            .zip(&self.active)
            .filter(|(_, &a)| a)
            .map(|(&n, _)| n)
            .collect()
    }

    pub fn apply(&self, values: &[f64; FEATURE_COUNT]) -> Vec<f64> {
        values
            .iter()
            .zip(&self.active)
            .filter(|(_, &a)| a)
            .map(|(&v, _)| v)
            .collect()
    }
}

/// Mask with the named features removed. The ranking supplies the set of known names.
pub fn select_features(ranking: &FeatureRanking, drop: &[&str]) -> Result<FeatureMask> {
    let mut mask = FeatureMask::all();
    for &name in drop {
        if ranking.position(name).is_none() {
            return Err(Error::invalid(format!("cannot drop unknown feature `{name}`")));
        }
        let idx = feature_index(name).ok_or_else(|| Error::invalid(format!("unknown feature `{name}`")))?;
        mask.active[idx] = false;
    }
    if mask.count() == 0 {
        return Err(Error::invalid("dropping every feature leaves nothing to train on"));
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lm(t: f64, m: f64) -> Landmark {
        Landmark { index: (t * 100.0).round() as usize, t, m }
    }

    fn points(onset: (f64, f64), sys: (f64, f64), dic: Option<(f64, f64)>, dia: Option<(f64, f64)>, end: (f64, f64)) -> PulsePoints {
        let poi = PointsOfInterest {
            onset: lm(onset.0, onset.1),
            end: lm(end.0, end.1),
            systolic: lm(sys.0, sys.1),
            dicrotic: dic.map(|(t, m)| lm(t, m)),
            diastolic: dia.map(|(t, m)| lm(t, m)),
            diastolic_fallback_used: false,
        };
        PulsePoints { raw: poi, detrended: poi, filtered: poi }
    }

    #[test]
    fn constructed_pulse_arithmetic() {
        let p = points((0.0, 0.0), (0.25, 100.0), Some((0.4, 30.0)), Some((0.6, 50.0)), (1.0, 0.0));
        let fv = extract_features(&p, Orthostatic::default(), Activity::Stationary, 0);
        assert_eq!(fv.get("pulse_width"), Some(1.0));
        assert_eq!(fv.get("systolic_amplitude"), Some(100.0));
        assert_eq!(fv.get("systolic_rise_gradient"), Some(400.0));
        assert_eq!(fv.get("offset"), Some(0.0));
        assert_eq!(fv.get("peak_difference"), Some(50.0));
        assert_eq!(fv.get("systolic_phase"), Some(0.4));
        assert!((fv.get("diastolic_phase").unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(fv.get("dicrotic_magnitude"), Some(30.0));
        assert_eq!(fv.quality, QualityFlags::default());
    }

    #[test]
    fn absent_landmarks_fall_back() {
        let p = points((0.0, 0.0), (0.25, 100.0), None, None, (1.0, 10.0));
        let fv = extract_features(&p, Orthostatic::default(), Activity::Stationary, 3);
        assert!(fv.quality.contains(QualityFlags::DIASTOLIC_ABSENT));
        assert!(fv.quality.contains(QualityFlags::DICROTIC_ABSENT));
        for name in ["diastolic_amplitude", "raw_diastolic_amplitude", "detrended_diastolic_amplitude", "diastolic_magnitude", "peak_difference", "dicrotic_magnitude"] {
            assert_eq!(fv.get(name), Some(0.0), "{name}");
        }
        assert_eq!(fv.get("systolic_phase"), Some(0.25));
        assert!(fv.values.iter().all(|v| v.is_finite()));

        let p = points((0.0, 0.0), (0.25, 100.0), None, Some((0.6, 50.0)), (1.0, 10.0));
        let fv = extract_features(&p, Orthostatic::default(), Activity::Stationary, 3);
        assert_eq!(fv.get("systolic_phase"), Some(0.6));
        assert_eq!(fv.quality.0, QualityFlags::DICROTIC_ABSENT);
    }

    #[test]
    fn zero_rise_time_is_flagged() {
        let p = points((0.0, 5.0), (0.0, 5.0), None, None, (1.0, 0.0));
        let fv = extract_features(&p, Orthostatic::default(), Activity::Stationary, 0);
        assert_eq!(fv.get("systolic_rise_gradient"), Some(0.0));
        assert!(fv.quality.contains(QualityFlags::ZERO_RISE_TIME));
    }

    #[test]
    fn orthostatic_hand_cases() {
        let flat = orthostatic_magnitude(&[(0.0, 10.0), (1.0, 10.0), (2.0, 10.0), (3.0, 10.0)], 20.0).unwrap();
        assert_eq!(flat, vec![0.0; 4]);
        let v = orthostatic_magnitude(&[(0.0, 10.0), (1.0, 10.0), (2.0, 10.0), (25.0, 25.0)], 20.0).unwrap();
        assert_eq!(v, vec![0.0, 0.0, 0.0, 15.0]);
        assert!(orthostatic_magnitude(&[(0.0, 1.0), (1.0, 1.0), (21.0, 1.0)], 20.0).is_err());
    }

    #[test]
    fn pulse_labels_follow_movement_window() {
        let l = |t| label_pulse(t, Activity::LieToStand, Some(30.0), 10.0);
        assert_eq!(l(29.9), Activity::Stationary);
        assert_eq!(l(30.0), Activity::LieToStand);
        assert_eq!(l(39.99), Activity::LieToStand);
        assert_eq!(l(40.0), Activity::Stationary);
        assert_eq!(label_pulse(35.0, Activity::Stationary, Some(30.0), 10.0), Activity::Stationary);
        assert_eq!(label_pulse(35.0, Activity::SitToStand, None, 10.0), Activity::Stationary);
    }

    #[test]
    fn chi_squared_hand_table() {
        let table = vec![vec![10.0, 0.0], vec![0.0, 10.0]];
        assert!((chi_squared_statistic(&table) - 20.0).abs() < 1e-12);
        // 2x3 table worked by hand: totals rows 30/30, cols 20/20/20, E = 10 everywhere
        let table = vec![vec![15.0, 10.0, 5.0], vec![5.0, 10.0, 15.0]];
        assert!((chi_squared_statistic(&table) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn identical_feature_across_classes_scores_zero() {
        let col: Vec<f64> = (0..60).map(|i| (i % 20) as f64).collect();
        let labels: Vec<usize> = (0..60).map(|i| i / 20).collect();
        let r = rank_columns(&["x"], &[col], &labels, 3).unwrap();
        assert!(r.entries[0].1 < 1e-9);

        let constant = vec![4.0; 60];
        let r = rank_columns(&["c"], &[constant], &labels, 3).unwrap();
        assert_eq!(r.entries[0].1, 0.0);
    }

    #[test]
    fn informative_feature_ranks_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let labels: Vec<usize> = (0..300).map(|i| i % 3).collect();
        let good: Vec<f64> = labels.iter().map(|&l| l as f64 + rng.random_range(-0.01..0.01)).collect();
        let noise: Vec<f64> = (0..300).map(|_| rng.random_range(0.0..1.0)).collect();
        let r = rank_columns(&["noise", "good"], &[noise, good], &labels, 3).unwrap();
        assert_eq!(r.names(), vec!["good", "noise"]);
    }

    #[test]
    fn ranking_needs_two_classes() {
        assert!(rank_columns(&["x"], &[vec![1.0, 2.0]], &[0, 0], 3).is_err());
    }

    #[test]
    fn bins_are_equal_frequency() {
        let v: Vec<f64> = (0..100).map(|i| (i * 37 % 100) as f64).collect();
        let bins = equal_frequency_bins(&v, 10);
        for b in 0..10 {
            assert_eq!(bins.iter().filter(|&&x| x == b).count(), 10);
        }
    }

    proptest! {
        #[test]
        fn bins_invariant_under_monotone_maps(xs in prop::collection::vec(-100.0f64..100.0, 1..200)) {
            let mapped: Vec<f64> = xs.iter().map(|x| (x / 10.0).exp() * 3.0 - 7.0).collect();
            prop_assert_eq!(equal_frequency_bins(&xs, 10), equal_frequency_bins(&mapped, 10));
        }
    }

    #[test]
    fn mask_selection() {
        let ranking = FeatureRanking {
            entries: FEATURE_NAMES.iter().map(|n| (n.to_string(), 1.0)).collect(),
        };
        assert_eq!(select_features(&ranking, &DEFAULT_DROP).unwrap().count(), 20);
        assert_eq!(select_features(&ranking, &[]).unwrap(), FeatureMask::all());
        let bottom: Vec<&str> = ranking.names()[18..].to_vec();
        let m = select_features(&ranking, &bottom).unwrap();
        assert_eq!(m.count(), 18);
        assert!(bottom.iter().all(|n| !m.names().contains(n)));
        assert!(select_features(&ranking, &["nope"]).is_err());
        assert!(select_features(&ranking, &FEATURE_NAMES).is_err());
    }
}
