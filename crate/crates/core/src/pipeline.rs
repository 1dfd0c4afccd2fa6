//! Recording-level processing: clean, filter, segment, locate landmarks, extract features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    extract_features, label_pulse, orthostatic_magnitude, FeatureVector, Orthostatic, DEFAULT_LABEL_WINDOW_S,
    DEFAULT_STATIONARY_WINDOW_S,
};
use crate::poi::{locate_points, PulsePoints};
use crate::preprocess::{remove_outliers, Bandpass, PreprocessConfig, SignalViews, DEFAULT_PROTOTYPE_ORDER};
use crate::recording::{Activity, Recording};
use crate::segment::{detect_onsets, slice_pulses, OnsetDetection};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    pub prototype_order: usize,
    pub stationary_window: f64,
    pub label_window: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            preprocess: PreprocessConfig::default(),
            prototype_order: DEFAULT_PROTOTYPE_ORDER,
            stationary_window: DEFAULT_STATIONARY_WINDOW_S,
            label_window: DEFAULT_LABEL_WINDOW_S,
        }
    }
}

impl PipelineConfig {
    pub fn filter(&self) -> Result<Bandpass> {
        Bandpass::design(self.preprocess.f_lo, self.preprocess.f_hi, self.prototype_order)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessedPulse {
    pub pulse_index: usize,
    pub start_index: usize,
    pub end_index: usize,
    pub start_time: f64,
    pub end_time: f64,
    pub points: PulsePoints,
}

#[derive(Debug, Clone)]
pub struct ProcessedRecording {
    pub source_id: String,
    pub label: Activity,
    pub movement_onset: Option<f64>,
    pub views: SignalViews,
    pub onsets: OnsetDetection,
    pub pulses: Vec<ProcessedPulse>,
    pub outliers_removed: usize,
    /// Pulses whose landmarks could not be located, with the reason.
    pub skipped: Vec<(usize, String)>,
}

/// Runs one recording through outlier removal, filtering, segmentation and landmark detection.
pub fn process_recording(rec: &Recording, cfg: &PipelineConfig) -> Result<ProcessedRecording> {
    process_with_filter(rec, cfg, &cfg.filter()?)
}

/// As [`process_recording`] with a pre-designed filter, for batches sharing one design.
pub fn process_with_filter(rec: &Recording, cfg: &PipelineConfig, filter: &Bandpass) -> Result<ProcessedRecording> {
    rec.validate()?;
    let (clean, outliers_removed) = remove_outliers(rec, cfg.preprocess.outlier_lo, cfg.preprocess.outlier_hi)?;
    let views = SignalViews::from_recording(&clean, filter)?;
    let onsets = detect_onsets(&views.filtered, views.sample_rate)?;
    if onsets.onsets.len() < 2 {
        return Err(Error::insufficient(format!(
            "{}: {}",
            rec.source_id,
            onsets.diagnostic.as_deref().unwrap_or("fewer than 2 pulse onsets")
        )));
    }
    let mut pulses = Vec::new();
    let mut skipped = Vec::new();
    for pulse in slice_pulses(&views, &onsets.onsets)? {
        match locate_points(&pulse) {
            Ok(points) => pulses.push(ProcessedPulse {
                pulse_index: pulse.index,
                start_index: pulse.start_index,
                end_index: pulse.end_index,
                start_time: pulse.start_time,
                end_time: pulse.end_time,
                points,
            }),
            Err(e) => skipped.push((pulse.index, e.to_string())),
        }
    }
    Ok(ProcessedRecording {
        source_id: rec.source_id.clone(),
        label: rec.label,
        movement_onset: rec.movement_onset,
        views,
        onsets,
        pulses,
        outliers_removed,
        skipped,
    })
}

/// Located pulses of one recording with the context feature extraction needs.
/// This is what the landmark CSV stores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseTable {
    pub source_id: String,
    pub label: Activity,
    pub movement_onset: Option<f64>,
    /// Time of the first sample; the stationary and label windows are measured from it.
    pub record_start: f64,
    pub pulses: Vec<ProcessedPulse>,
}

impl ProcessedRecording {
    pub fn pulse_table(&self) -> PulseTable {
        PulseTable {
            source_id: self.source_id.clone(),
            label: self.label,
            movement_onset: self.movement_onset,
            record_start: self.views.times.first().copied().unwrap_or(0.0),
            pulses: self.pulses.clone(),
        }
    }
}

/// Labelled feature vectors for every pulse of a table.
pub fn table_features(table: &PulseTable, cfg: &PipelineConfig) -> Result<Vec<FeatureVector>> {
    let t0 = table.record_start;
    let peaks = |pick: fn(&PulsePoints) -> f64| -> Vec<(f64, f64)> {
        table
            .pulses
            .iter()
            .map(|p| (p.start_time - t0, pick(&p.points)))
            .collect()
    };
    let raw = orthostatic_magnitude(&peaks(|p| p.raw.systolic.m), cfg.stationary_window)
        .map_err(|e| Error::insufficient(format!("{}: {e}", table.source_id)))?;
    let detrended = orthostatic_magnitude(&peaks(|p| p.detrended.systolic.m), cfg.stationary_window)
        .map_err(|e| Error::insufficient(format!("{}: {e}", table.source_id)))?;
    let movement = table.movement_onset.map(|m| m - t0);
    Ok(table
        .pulses
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let label = label_pulse(p.start_time - t0, table.label, movement, cfg.label_window);
            let ortho = Orthostatic {
                raw: raw[i],
                detrended: detrended[i],
            };
            extract_features(&p.points, ortho, label, p.pulse_index)
        })
        .collect())
}

/// Labelled feature vectors for every located pulse of a processed recording.
pub fn recording_features(processed: &ProcessedRecording, cfg: &PipelineConfig) -> Result<Vec<FeatureVector>> {
    table_features(&processed.pulse_table(), cfg)
}

/// Processing plus feature extraction in one call.
pub fn extract_recording(rec: &Recording, cfg: &PipelineConfig) -> Result<Vec<FeatureVector>> {
    recording_features(&process_recording(rec, cfg)?, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_recording, ScenarioSpec};

    #[test]
    fn noise_free_pulses_follow_onsets() {
        let (rec, _) = generate_recording(&ScenarioSpec::noise_free(Activity::SitToStand, 2)).unwrap();
        let p = process_recording(&rec, &PipelineConfig::default()).unwrap();
        assert_eq!(p.pulses.len() + p.skipped.len(), p.onsets.onsets.len() - 1);
        assert!(p.skipped.is_empty());
    }

    #[test]
    fn labels_cover_movement_window_only() {
        let (rec, _) = generate_recording(&ScenarioSpec::preset(Activity::LieToStand, 5)).unwrap();
        let cfg = PipelineConfig::default();
        let fv = extract_recording(&rec, &cfg).unwrap();
        let processed = process_recording(&rec, &cfg).unwrap();
        for (f, p) in fv.iter().zip(&processed.pulses) {
            let inside = (30.0..40.0).contains(&p.start_time);
            assert_eq!(f.label == Activity::LieToStand, inside);
        }
        let moving = fv.iter().filter(|f| f.label == Activity::LieToStand).count();
        assert!((9..=14).contains(&moving), "{moving}");
    }

    #[test]
    fn short_recording_is_rejected() {
        let mut spec = ScenarioSpec::preset(Activity::Stationary, 1);
        spec.duration = 2.0;
        spec.movement_onset = 1.0;
        if let Ok((rec, _)) = generate_recording(&spec) {
            assert!(process_recording(&rec, &PipelineConfig::default()).is_err());
        }
    }
}
