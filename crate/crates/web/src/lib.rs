//! Browser bindings for the posture pipeline.
//!
//! Every export returns JSON so the page stays plain JavaScript. The plain Rust
//! functions carry the logic and are tested natively; the `#[wasm_bindgen]` wrappers
//! only convert errors.

use std::cell::RefCell;

use ppg_posture::features::{FEATURE_NAMES, FeatureVector};
use ppg_posture::pipeline::{process_recording, table_features, PipelineConfig, ProcessedRecording};
use ppg_posture::poi::{Landmark, PointsOfInterest};
use ppg_posture::preprocess::Bandpass;
use ppg_posture::synth::{generate_recording, ScenarioSpec};
use ppg_posture::Activity;
use serde::Serialize;
use wasm_bindgen::prelude::*;

struct Session {
    processed: ProcessedRecording,
    features: Vec<FeatureVector>,
}

thread_local! {
    static LAST: RefCell<Option<Session>> = const { RefCell::new(None) };
}

#[derive(Serialize)]
struct PulseSummary {
    start: f64,
    end: f64,
    label: Activity,
    systolic: Landmark,
    dicrotic: Option<Landmark>,
    diastolic: Option<Landmark>,
}

#[derive(Serialize)]
struct RecordingView {
    class_label: Activity,
    movement_onset: Option<f64>,
    sample_rate: f64,
    period_samples: usize,
    times: Vec<f64>,
    raw: Vec<f64>,
    filtered: Vec<f64>,
    onsets: Vec<f64>,
    pulses: Vec<PulseSummary>,
    skipped: usize,
}

/// Generates a synthetic recording, runs the pipeline and keeps the result for
/// [`pulse_detail_json`]. `noise_scale` multiplies the preset sensor noise.
pub fn simulate_json(class: &str, seed: u64, noise_scale: f64) -> Result<String, String> {
    let class: Activity = class.parse().map_err(|e| format!("{e}"))?;
    if !(noise_scale.is_finite() && noise_scale >= 0.0) {
        return Err(format!("noise scale must be a non-negative number, got {noise_scale}"));
    }
    let mut spec = ScenarioSpec::preset(class, seed);
    spec.noise_sigma *= noise_scale;
    let (rec, _) = generate_recording(&spec).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig::default();
    let processed = process_recording(&rec, &cfg).map_err(|e| e.to_string())?;
    let features = table_features(&processed.pulse_table(), &cfg).map_err(|e| e.to_string())?;

    let v = &processed.views;
    let view = RecordingView {
        class_label: class,
        movement_onset: processed.movement_onset,
        sample_rate: v.sample_rate,
        period_samples: processed.onsets.period.samples,
        times: v.times.clone(),
        raw: v.raw.clone(),
        filtered: v.filtered.clone(),
        onsets: processed.onsets.onsets.iter().map(|&i| v.times[i]).collect(),
        pulses: processed
            .pulses
            .iter()
            .zip(&features)
            .map(|(p, f)| summary(p.start_time, p.end_time, f.label, &p.points.filtered))
            .collect(),
        skipped: processed.skipped.len(),
    };
    let json = serde_json::to_string(&view).map_err(|e| e.to_string())?;
    LAST.with(|s| *s.borrow_mut() = Some(Session { processed, features }));
    Ok(json)
}

fn summary(start: f64, end: f64, label: Activity, poi: &PointsOfInterest) -> PulseSummary {
    PulseSummary {
        start,
        end,
        label,
        systolic: poi.systolic,
        dicrotic: poi.dicrotic,
        diastolic: poi.diastolic,
    }
}

#[derive(Serialize)]
struct PulseDetail {
    index: usize,
    times: Vec<f64>,
    filtered: Vec<f64>,
    points: PointsOfInterest,
    features: Vec<(&'static str, f64)>,
}

/// Landmarks, samples and the feature vector of one pulse from the last simulation.
pub fn pulse_detail_json(index: usize) -> Result<String, String> {
    LAST.with(|s| {
        let s = s.borrow();
        let s = s.as_ref().ok_or("simulate a recording first")?;
        let p = s
            .processed
            .pulses
            .get(index)
            .ok_or_else(|| format!("pulse {index} out of range (0..{})", s.processed.pulses.len()))?;
        let range = p.start_index..=p.end_index;
        let detail = PulseDetail {
            index,
            times: s.processed.views.times[range.clone()].to_vec(),
            filtered: s.processed.views.filtered[range].to_vec(),
            points: p.points.filtered,
            features: FEATURE_NAMES.iter().copied().zip(s.features[index].values).collect(),
        };
        serde_json::to_string(&detail).map_err(|e| e.to_string())
    })
}

#[derive(Serialize)]
struct FilterView {
    band: (f64, f64),
    impulse_len: usize,
    freqs: Vec<f64>,
    gain_db: Vec<f64>,
}

/// Forward-backward magnitude response over `[0, 0.5]` cycles per sample.
pub fn filter_response_json(f_lo: f64, f_hi: f64, order: usize, points: usize) -> Result<String, String> {
    let filter = Bandpass::design(f_lo, f_hi, order).map_err(|e| e.to_string())?;
    let points = points.clamp(2, 4096);
    let freqs: Vec<f64> = (0..points).map(|i| 0.5 * i as f64 / (points - 1) as f64).collect();
    let gain_db = freqs
        .iter()
        .map(|&f| (10.0 * filter.zero_phase_gain(f).log10()).max(-200.0))
        .collect();
    let view = FilterView {
        band: filter.band(),
        impulse_len: filter.impulse_len(),
        freqs,
        gain_db,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn simulate(class: &str, seed: u64, noise_scale: f64) -> Result<String, JsError> {
    simulate_json(class, seed, noise_scale).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn pulse_detail(index: usize) -> Result<String, JsError> {
    pulse_detail_json(index).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn filter_response(f_lo: f64, f_hi: f64, order: usize, points: usize) -> Result<String, JsError> {
    filter_response_json(f_lo, f_hi, order, points).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn simulation_then_pulse_detail() {
        let v: Value = serde_json::from_str(&simulate_json("sit-to-stand", 4, 1.0).unwrap()).unwrap();
        assert_eq!(v["times"].as_array().unwrap().len(), 6000);
        let pulses = v["pulses"].as_array().unwrap();
        assert!(pulses.len() > 50);
        assert!(v["movement_onset"].is_number());

        let d: Value = serde_json::from_str(&pulse_detail_json(3).unwrap()).unwrap();
        assert_eq!(d["features"].as_array().unwrap().len(), FEATURE_NAMES.len());
        assert_eq!(d["times"][0], pulses[3]["start"]);
        assert!(pulse_detail_json(10_000).unwrap_err().contains("out of range"));
    }

    #[test]
    fn bad_inputs_are_reported() {
        assert!(simulate_json("jumping", 1, 1.0).is_err());
        assert!(simulate_json("stationary", 1, -1.0).is_err());
        assert!(filter_response_json(0.3, 0.1, 4, 64).is_err());
    }

    #[test]
    fn filter_passes_the_band_and_rejects_dc() {
        let v: Value = serde_json::from_str(&filter_response_json(0.0075, 0.2, 4, 401).unwrap()).unwrap();
        let db: Vec<f64> = v["gain_db"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert!(db[0] < -100.0);
        // 0.04 cycles/sample sits at index 32
        assert!(db[32].abs() < 0.5, "{}", db[32]);
        assert!(db[400] < -40.0);
    }
}
