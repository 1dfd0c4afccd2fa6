//! Synthetic PPG recordings with exactly known landmarks.
//!
//! A pulse is built from four shape segments joined at knots whose positions are
//! the ground-truth landmarks:
//!
//! ```text
//!  onset ──quarter-sine──▶ systolic ──half-cosine──▶ notch ──half-cosine──▶ diastolic ──quarter-cosine──▶ end
//! ```
//!
//! Every interior knot has zero slope, so the systolic peak, the dicrotic notch and the
//! diastolic peak sit exactly on their knots. The upstroke and run-off meet the onset
//! with non-zero slope, which gives the sharp pulse foot that onset detection relies on.
//!
//! Recordings add a DC level, sinusoidal baseline wander, white noise and, for the
//! movement classes, an orthostatic transient plus a short motion-artifact burst.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recording::{Activity, Recording, Sample};

/// Largest value the 31-bit wire carrier can hold.
pub const MAX_SENSOR_VALUE: i64 = (1 << 31) - 1;

/// Duration of the motion-artifact burst that follows the movement onset, seconds.
pub const ARTIFACT_BURST_S: f64 = 2.0;

/// Duration of the linear rise of the orthostatic transient, seconds.
pub const TRANSIENT_RISE_S: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseTemplate {
    /// Seconds.
    pub period: f64,
    pub systolic_amp: f64,
    pub systolic_time_frac: f64,
    pub diastolic_amp: f64,
    pub diastolic_time_frac: f64,
    /// Depth of the dicrotic notch below the diastolic peak, as a fraction of `systolic_amp`.
    pub notch_depth_frac: f64,
}

impl Default for PulseTemplate {
    fn default() -> Self {
        PulseTemplate {
            period: 0.85,
            systolic_amp: 1000.0,
            systolic_time_frac: 0.2,
            diastolic_amp: 600.0,
            diastolic_time_frac: 0.6,
            notch_depth_frac: 0.3,
        }
    }
}

impl PulseTemplate {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.period,
            self.systolic_amp,
            self.systolic_time_frac,
            self.diastolic_amp,
            self.diastolic_time_frac,
            self.notch_depth_frac,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pulse template".into()));
        }
        if self.period <= 0.0 {
            return Err(Error::invalid("pulse period must be positive"));
        }
        if !(0.0 < self.systolic_time_frac
            && self.systolic_time_frac < self.diastolic_time_frac
            && self.diastolic_time_frac < 1.0)
        {
            return Err(Error::invalid(
                "need 0 < systolic_time_frac < diastolic_time_frac < 1",
            ));
        }
        if !(self.systolic_amp > self.diastolic_amp && self.diastolic_amp > 0.0) {
            return Err(Error::invalid("need systolic_amp > diastolic_amp > 0"));
        }
        if !(0.0..1.0).contains(&self.notch_depth_frac) {
            return Err(Error::invalid("notch_depth_frac must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Fractional position of the dicrotic notch, midway between the two peaks.
    pub fn notch_time_frac(&self) -> f64 {
        0.5 * (self.systolic_time_frac + self.diastolic_time_frac)
    }

    pub fn notch_level(&self) -> f64 {
        (self.diastolic_amp - self.notch_depth_frac * self.systolic_amp).max(0.0)
    }

    /// Waveform value at fractional position `u` of the period; zero outside `[0, 1]`.
    pub fn value_at(&self, u: f64) -> f64 {
        if !(0.0..=1.0).contains(&u) {
            return 0.0;
        }
        let s = self.systolic_time_frac;
        let d = self.diastolic_time_frac;
        let n = self.notch_time_frac();
        let notch = self.notch_level();
        let half_cos = |from: f64, to: f64, x: f64| from + (to - from) * 0.5 * (1.0 - (PI * x).cos());
        if u <= s {
            self.systolic_amp * (FRAC_PI_2 * u / s).sin()
        } else if u <= n {
            half_cos(self.systolic_amp, notch, (u - s) / (n - s))
        } else if u <= d {
            half_cos(notch, self.diastolic_amp, (u - n) / (d - n))
        } else {
            self.diastolic_amp * (FRAC_PI_2 * (u - d) / (1.0 - d)).cos()
        }
    }

}

/// Renders one pulse sampled at `sample_rate`, including both zero-valued endpoints.
pub fn render_pulse(template: &PulseTemplate, sample_rate: f64) -> Result<Vec<f64>> {
    template.validate()?;
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::invalid("sample rate must be positive"));
    }
    let n = (template.period * sample_rate).round() as usize;
    if n < 20 {
        return Err(Error::invalid(format!(
            "pulse spans {n} samples, at least 20 required"
        )));
    }
    Ok((0..=n).map(|i| template.value_at(i as f64 / n as f64)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub class_label: Activity,
    /// Seconds.
    pub duration: f64,
    pub movement_onset: f64,
    pub recovery_time: f64,
    pub transient_gain: f64,
    pub artifact_amp: f64,
    pub wander_amp: f64,
    /// Hz.
    pub wander_freq: f64,
    pub noise_sigma: f64,
    pub dc_level: f64,
    pub sample_rate: f64,
    pub seed: u64,
    pub template: PulseTemplate,
    /// Beat-to-beat period variation, uniform in `±period_jitter` of the nominal period.
    pub period_jitter: f64,
    /// Fractional pulse-amplitude reduction at the peak of the orthostatic transient.
    pub amplitude_drop: f64,
}

impl ScenarioSpec {
    /// Protocol defaults: 30 s stationary, movement at 30 s, 30 s standing.
    ///
    /// Transient gains follow the systolic-peak spread reported for sit-to-stand
    /// (430) and lie-to-stand (1100) recordings; the stationary spread (about 160)
    /// comes from the baseline wander.
    pub fn preset(class_label: Activity, seed: u64) -> ScenarioSpec {
        let (transient_gain, artifact_amp) = match class_label {
            Activity::Stationary => (0.0, 0.0),
            Activity::SitToStand => (430.0, 250.0),
            Activity::LieToStand => (1100.0, 500.0),
        };
        let template = PulseTemplate::default();
        ScenarioSpec {
            class_label,
            duration: 60.0,
            movement_onset: 30.0,
            recovery_time: 10.0,
            transient_gain,
            artifact_amp,
            wander_amp: 227.0,
            wander_freq: 0.25,
            noise_sigma: 0.02 * template.systolic_amp,
            dc_level: 100_000.0,
            sample_rate: 100.0,
            seed,
            template,
            period_jitter: 0.03,
            amplitude_drop: 0.0,
        }
    }

    /// A clean periodic recording: no wander, noise, jitter or movement.
    pub fn noise_free(class_label: Activity, seed: u64) -> ScenarioSpec {
        ScenarioSpec {
            wander_amp: 0.0,
            noise_sigma: 0.0,
            period_jitter: 0.0,
            ..ScenarioSpec::preset(class_label, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.template.validate()?;
        let values = [
            self.duration,
            self.movement_onset,
            self.recovery_time,
            self.transient_gain,
            self.artifact_amp,
            self.wander_amp,
            self.wander_freq,
            self.noise_sigma,
            self.dc_level,
            self.sample_rate,
            self.period_jitter,
            self.amplitude_drop,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scenario".into()));
        }
        if self.sample_rate <= 0.0 {
            return Err(Error::invalid("sample_rate must be positive"));
        }
        let amps = [
            self.transient_gain,
            self.artifact_amp,
            self.wander_amp,
            self.noise_sigma,
            self.dc_level,
            self.wander_freq,
        ];
        if amps.iter().any(|&v| v < 0.0) {
            return Err(Error::invalid("amplitudes and frequencies must be non-negative"));
        }
        if !(0.0..0.5).contains(&self.period_jitter) {
            return Err(Error::invalid("period_jitter must lie in [0, 0.5)"));
        }
        if !(0.0..1.0).contains(&self.amplitude_drop) {
            return Err(Error::invalid("amplitude_drop must lie in [0, 1)"));
        }
        if self.template.period * self.sample_rate < 20.0 {
            return Err(Error::invalid("pulse must span at least 20 samples"));
        }
        if self.duration < self.template.period * (1.0 + self.period_jitter) {
            return Err(Error::invalid(format!(
                "duration {} s is shorter than one pulse period",
                self.duration
            )));
        }
        if self.class_label.is_movement() {
            if self.movement_onset < 0.0 || self.recovery_time <= 0.0 {
                return Err(Error::invalid("movement_onset and recovery_time must be positive"));
            }
            if self.movement_onset + self.recovery_time > self.duration {
                return Err(Error::invalid(
                    "movement_onset + recovery_time exceeds the recording duration",
                ));
            }
        }
        Ok(())
    }

    /// Orthostatic transient at time `t`: a linear rise over two seconds followed by an
    /// exponential decay with time constant `recovery_time / 3`.
    pub fn transient_at(&self, t: f64) -> f64 {
        if !self.class_label.is_movement() || self.transient_gain == 0.0 {
            return 0.0;
        }
        let tau = t - self.movement_onset;
        if tau < 0.0 {
            0.0
        } else if tau < TRANSIENT_RISE_S {
            self.transient_gain * tau / TRANSIENT_RISE_S
        } else {
            let decay = self.recovery_time / 3.0;
            self.transient_gain * (-(tau - TRANSIENT_RISE_S) / decay).exp()
        }
    }
}

/// Landmark times, in seconds, of every complete pulse in a synthetic recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub class_label: Activity,
    pub onset_times: Vec<f64>,
    pub systolic_times: Vec<f64>,
    pub notch_times: Vec<f64>,
    pub diastolic_times: Vec<f64>,
    pub end_times: Vec<f64>,
    /// Absent for stationary recordings.
    pub movement_onset: Option<f64>,
    pub recovery_time: Option<f64>,
}

impl GroundTruth {
    pub fn pulse_count(&self) -> usize {
        self.onset_times.len()
    }
}

struct PulseSlot {
    onset: f64,
    period: f64,
    scale: f64,
}

/// Generates a recording and its ground truth. Equal specs give identical output.
pub fn generate_recording(spec: &ScenarioSpec) -> Result<(Recording, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let fs = spec.sample_rate;
    let n_samples = (spec.duration * fs).round() as usize;
    let last_time = (n_samples - 1) as f64 / fs;
    let nominal = spec.template.period;

    let mut slots = Vec::new();
    let mut onset = if spec.period_jitter > 0.0 || spec.noise_sigma > 0.0 {
        -rng.random_range(0.0..nominal)
    } else {
        0.0
    };
    while onset <= last_time {
        let jitter = if spec.period_jitter > 0.0 {
            rng.random_range(-spec.period_jitter..spec.period_jitter)
        } else {
            0.0
        };
        let period = nominal * (1.0 + jitter);
        let peak_time = onset + spec.template.systolic_time_frac * period;
        let scale = if spec.transient_gain > 0.0 {
            1.0 - spec.amplitude_drop * spec.transient_at(peak_time) / spec.transient_gain
        } else {
            1.0
        };
        slots.push(PulseSlot { onset, period, scale });
        onset += period;
    }

    let wander_phase = rng.random_range(0.0..2.0 * PI);
    let burst = artifact_burst(spec, &mut rng);
    let noise = if spec.noise_sigma > 0.0 {
        Some(Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::invalid(e.to_string()))?)
    } else {
        None
    };

    let mut samples = Vec::with_capacity(n_samples);
    let mut slot = 0;
    for i in 0..n_samples {
        let t = i as f64 / fs;
        while slot + 1 < slots.len() && slots[slot + 1].onset <= t {
            slot += 1;
        }
        let s = &slots[slot];
        let pulse = s.scale * spec.template.value_at((t - s.onset) / s.period);
        let wander = spec.wander_amp * (2.0 * PI * spec.wander_freq * t + wander_phase).sin();
        let artifact = burst.as_ref().map_or(0.0, |b| b.value_at(t));
        let n = noise.as_ref().map_or(0.0, |d| d.sample(&mut rng));
        let v = spec.dc_level + pulse + wander + spec.transient_at(t) + artifact + n;
        samples.push(Sample {
            time: t,
            value: (v.round() as i64).clamp(0, MAX_SENSOR_VALUE),
        });
    }

    let tmpl = &spec.template;
    let mut truth = GroundTruth {
        class_label: spec.class_label,
        onset_times: vec![],
        systolic_times: vec![],
        notch_times: vec![],
        diastolic_times: vec![],
        end_times: vec![],
        movement_onset: spec.class_label.is_movement().then_some(spec.movement_onset),
        recovery_time: spec.class_label.is_movement().then_some(spec.recovery_time),
    };
    for s in slots.iter().filter(|s| s.onset >= 0.0 && s.onset + s.period <= last_time) {
        truth.onset_times.push(s.onset);
        truth.systolic_times.push(s.onset + tmpl.systolic_time_frac * s.period);
        truth.notch_times.push(s.onset + tmpl.notch_time_frac() * s.period);
        truth.diastolic_times.push(s.onset + tmpl.diastolic_time_frac * s.period);
        truth.end_times.push(s.onset + s.period);
    }

    let mut recording = Recording::new(
        samples,
        fs,
        spec.class_label,
        format!("synth-{}-{}", spec.class_label, spec.seed),
    )?;
    recording.movement_onset = spec.class_label.is_movement().then_some(spec.movement_onset);
    Ok((recording, truth))
}

/// Band-limited (1 to 4 Hz) noise under a Hann window, peak-normalised to `artifact_amp`.
struct ArtifactBurst {
    start: f64,
    tones: Vec<(f64, f64)>,
    norm: f64,
}

impl ArtifactBurst {
    fn raw(&self, tau: f64) -> f64 {
        let window = 0.5 * (1.0 - (2.0 * PI * tau / ARTIFACT_BURST_S).cos());
        window * self.tones.iter().map(|(f, ph)| (2.0 * PI * f * tau + ph).sin()).sum::<f64>()
    }

    fn value_at(&self, t: f64) -> f64 {
        let tau = t - self.start;
        if (0.0..ARTIFACT_BURST_S).contains(&tau) {
            self.norm * self.raw(tau)
        } else {
            0.0
        }
    }
}

fn artifact_burst(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> Option<ArtifactBurst> {
    let tones: Vec<(f64, f64)> = (0..3)
        .map(|_| (rng.random_range(1.0..4.0), rng.random_range(0.0..2.0 * PI)))
        .collect();
    if !spec.class_label.is_movement() || spec.artifact_amp == 0.0 {
        return None;
    }
    let mut burst = ArtifactBurst {
        start: spec.movement_onset,
        tones,
        norm: 1.0,
    };
    let peak = (0..2000)
        .map(|i| burst.raw(i as f64 * ARTIFACT_BURST_S / 2000.0).abs())
        .fold(0.0, f64::max);
    burst.norm = if peak > 0.0 { spec.artifact_amp / peak } else { 0.0 };
    Some(burst)
}

/// Number of recordings per class in a generated corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchShape {
    pub stationary: usize,
    pub sit_to_stand: usize,
    pub lie_to_stand: usize,
}

impl Default for BatchShape {
    /// 38 usable recordings, 24 of them sit-to-stand.
    fn default() -> Self {
        BatchShape {
            stationary: 0,
            sit_to_stand: 24,
            lie_to_stand: 14,
        }
    }
}

impl BatchShape {
    pub fn total(&self) -> usize {
        self.stationary + self.sit_to_stand + self.lie_to_stand
    }
}

/// Scenario specs for a corpus of simulated participants. Pulse morphology, heart rate,
/// DC level and transient strength vary per recording; everything derives from `seed`.
pub fn batch_specs(shape: BatchShape, seed: u64) -> Vec<ScenarioSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = std::iter::repeat_n(Activity::Stationary, shape.stationary)
        .chain(std::iter::repeat_n(Activity::SitToStand, shape.sit_to_stand))
        .chain(std::iter::repeat_n(Activity::LieToStand, shape.lie_to_stand));
    classes
        .map(|class| {
            let systolic_amp = rng.random_range(800.0..1200.0);
            let template = PulseTemplate {
                period: rng.random_range(0.75..1.0),
                systolic_amp,
                systolic_time_frac: rng.random_range(0.17..0.23),
                diastolic_amp: systolic_amp * rng.random_range(0.55..0.65),
                diastolic_time_frac: rng.random_range(0.58..0.63),
                notch_depth_frac: rng.random_range(0.25..0.35),
            };
            let base = ScenarioSpec::preset(class, rng.random::<u64>());
            ScenarioSpec {
                template,
                transient_gain: base.transient_gain * rng.random_range(0.75..1.25),
                artifact_amp: base.artifact_amp * rng.random_range(0.75..1.25),
                wander_amp: base.wander_amp,
                wander_freq: rng.random_range(0.15..0.35),
                dc_level: rng.random_range(80_000.0..120_000.0),
                noise_sigma: 0.02 * systolic_amp,
                ..base
            }
        })
        .collect()
}
