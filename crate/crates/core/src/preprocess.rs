//! Erroneous-sample removal, linear detrending and zero-phase band-pass filtering.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recording::Recording;

/// Normalised band edges in cycles per sample (Nyquist = 0.5).
pub const DEFAULT_F_LO: f64 = 0.0075;
pub const DEFAULT_F_HI: f64 = 0.2;
/// Order of the low-pass prototype; the band-pass has twice this order.
pub const DEFAULT_PROTOTYPE_ORDER: usize = 4;

pub const DEFAULT_OUTLIER_LO: i64 = 1;
pub const DEFAULT_OUTLIER_HI: i64 = (1 << 31) - 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub outlier_lo: i64,
    pub outlier_hi: i64,
    pub f_lo: f64,
    pub f_hi: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            outlier_lo: DEFAULT_OUTLIER_LO,
            outlier_hi: DEFAULT_OUTLIER_HI,
            f_lo: DEFAULT_F_LO,
            f_hi: DEFAULT_F_HI,
        }
    }
}

/// Drops samples outside `[lo, hi]`, returning the cleaned recording and the number removed.
///
/// Fails when more than half of the samples would go, which means the bounds are wrong
/// for the data rather than the data being noisy.
pub fn remove_outliers(rec: &Recording, lo: i64, hi: i64) -> Result<(Recording, usize)> {
    if lo >= hi {
        return Err(Error::invalid(format!("outlier bounds [{lo}, {hi}] are empty")));
    }
    let kept: Vec<_> = rec
        .samples
        .iter()
        .copied()
        .filter(|s| (lo..=hi).contains(&s.value))
        .collect();
    let removed = rec.samples.len() - kept.len();
    if removed * 2 > rec.samples.len() {
        return Err(Error::insufficient(format!(
            "{removed} of {} samples in {} fall outside [{lo}, {hi}]",
            rec.samples.len(),
            rec.source_id
        )));
    }
    Ok((
        Recording {
            samples: kept,
            ..rec.clone()
        },
        removed,
    ))
}

/// Subtracts the least-squares straight line (over sample index) from `series`.
pub fn detrend(series: &[f64]) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 2 {
        return Err(Error::insufficient("detrend needs at least 2 samples"));
    }
    let nf = n as f64;
    let x_mean = (nf - 1.0) / 2.0;
    let y_mean = series.iter().sum::<f64>() / nf;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, &y) in series.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    Ok(series
        .iter()
        .enumerate()
        .map(|(i, &y)| y - y_mean - slope * (i as f64 - x_mean))
        .collect())
}

/// Second-order section in transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let num = self.b[0] + self.b[1] * z_inv + self.b[2] * z_inv * z_inv;
        let den = 1.0 + self.a[0] * z_inv + self.a[1] * z_inv * z_inv;
        num / den
    }

    /// Steady-state delay-line contents for a constant input `u`.
    fn steady_state(&self, u: f64) -> [f64; 2] {
        let gain = (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1]);
        let y = gain * u;
        let z2 = self.b[2] * u - self.a[1] * y;
        let z1 = self.b[1] * u - self.a[0] * y + z2;
        [z1, z2]
    }

    fn run(&self, x: &mut [f64]) {
        let Some(&first) = x.first() else { return };
        let [mut z1, mut z2] = self.steady_state(first);
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b[0] * input + z1;
            z1 = self.b[1] * input - self.a[0] * y + z2;
            z2 = self.b[2] * input - self.a[1] * y;
            *v = y;
        }
    }
}

/// Butterworth band-pass as a cascade of biquads, applied forward then backward.
#[derive(Debug, Clone, PartialEq)]
pub struct Bandpass {
    sections: Vec<Biquad>,
    f_lo: f64,
    f_hi: f64,
    impulse_len: usize,
}

impl Bandpass {
    /// Designs the filter by bilinear transform of an analog prototype of `prototype_order`
    /// poles, with both edges pre-warped. Edges are in cycles per sample.
    pub fn design(f_lo: f64, f_hi: f64, prototype_order: usize) -> Result<Bandpass> {
        if !(f_lo.is_finite() && f_hi.is_finite() && 0.0 < f_lo && f_lo < f_hi && f_hi < 0.5) {
            return Err(Error::invalid(format!(
                "band edges must satisfy 0 < f_lo < f_hi < 0.5, got {f_lo}, {f_hi}"
            )));
        }
        if prototype_order == 0 {
            return Err(Error::invalid("filter order must be at least 1"));
        }
        let n = prototype_order;
        let w_lo = 2.0 * (PI * f_lo).tan();
        let w_hi = 2.0 * (PI * f_hi).tan();
        let w0_sq = w_lo * w_hi;
        let bw = w_hi - w_lo;

        let mut poles = Vec::with_capacity(2 * n);
        for k in 0..n {
            let theta = PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
            let p = Complex64::from_polar(1.0, theta);
            let pb = p * bw;
            let disc = (pb * pb - 4.0 * w0_sq).sqrt();
            for s in [(pb + disc) / 2.0, (pb - disc) / 2.0] {
                poles.push((2.0 + s) / (2.0 - s));
            }
        }

        let mut complex: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > 1e-12).collect();
        let mut real: Vec<f64> = poles.iter().filter(|p| p.im.abs() <= 1e-12).map(|p| p.re).collect();
        complex.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        real.sort_by(f64::total_cmp);

        let mut sections: Vec<Biquad> = complex
            .iter()
            .map(|p| Biquad {
                b: [1.0, 0.0, -1.0],
                a: [-2.0 * p.re, p.norm_sqr()],
            })
            .collect();
        for pair in real.chunks(2) {
            let (p, q) = (pair[0], pair.get(1).copied().unwrap_or(0.0));
            sections.push(Biquad {
                b: [1.0, 0.0, -1.0],
                a: [-(p + q), p * q],
            });
        }

        let mut filter = Bandpass {
            sections,
            f_lo,
            f_hi,
            impulse_len: 0,
        };
        let f_center = (w0_sq.sqrt() / 2.0).atan() / PI;
        let g = filter.response(f_center).norm();
        filter.sections[0].b.iter_mut().for_each(|b| *b /= g);
        filter.impulse_len = filter.measure_impulse_len();
        Ok(filter)
    }

    pub fn band(&self) -> (f64, f64) {
        (self.f_lo, self.f_hi)
    }

    /// Number of samples after which the single-pass impulse response stays below
    /// 1e-4 of its peak.
    pub fn impulse_len(&self) -> usize {
        self.impulse_len
    }

    fn measure_impulse_len(&self) -> usize {
        const MAX_LEN: usize = 1 << 16;
        let mut h = vec![0.0; MAX_LEN];
        h[0] = 1.0;
        for s in &self.sections {
            let [mut z1, mut z2] = [0.0, 0.0];
            for v in h.iter_mut() {
                let input = *v;
                let y = s.b[0] * input + z1;
                z1 = s.b[1] * input - s.a[0] * y + z2;
                z2 = s.b[2] * input - s.a[1] * y;
                *v = y;
            }
        }
        let peak = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let last = h.iter().rposition(|v| v.abs() > 1e-4 * peak).unwrap_or(0);
        last + 1
    }

    /// Complex single-pass response at normalised frequency `f` (cycles/sample).
    pub fn response(&self, f: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * f);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    /// Magnitude of the forward-backward response, `|H(f)|^2`.
    pub fn zero_phase_gain(&self, f: f64) -> f64 {
        self.response(f).norm_sqr()
    }

    fn run_forward(&self, x: &mut [f64]) {
        for s in &self.sections {
            s.run(x);
        }
    }

    /// Zero-phase filtering with odd reflection padding of one impulse length at each end.
    pub fn apply(&self, series: &[f64]) -> Result<Vec<f64>> {
        let n = series.len();
        let pad = self.impulse_len;
        if n < 3 * pad {
            return Err(Error::insufficient(format!(
                "band-pass needs at least {} samples, got {n}",
                3 * pad
            )));
        }
        if let Some(v) = series.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("band-pass input ({v})")));
        }
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * series[0] - series[i]));
        ext.extend_from_slice(series);
        ext.extend((1..=pad).map(|i| 2.0 * series[n - 1] - series[n - 1 - i]));

        self.run_forward(&mut ext);
        ext.reverse();
        self.run_forward(&mut ext);
        ext.reverse();
        Ok(ext[pad..pad + n].to_vec())
    }
}

/// Zero-phase band-pass of `series` with the default prototype order.
pub fn bandpass(series: &[f64], f_lo: f64, f_hi: f64) -> Result<Vec<f64>> {
    Bandpass::design(f_lo, f_hi, DEFAULT_PROTOTYPE_ORDER)?.apply(series)
}

/// Raw, detrended and filtered versions of one recording on a shared time base.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalViews {
    pub times: Vec<f64>,
    pub raw: Vec<f64>,
    pub detrended: Vec<f64>,
    pub filtered: Vec<f64>,
    pub sample_rate: f64,
}

impl SignalViews {
    pub fn from_series(times: Vec<f64>, raw: Vec<f64>, sample_rate: f64, filter: &Bandpass) -> Result<SignalViews> {
        if times.len() != raw.len() {
            return Err(Error::invalid("time base and values differ in length"));
        }
        let detrended = detrend(&raw)?;
        let filtered = filter.apply(&detrended)?;
        Ok(SignalViews {
            times,
            raw,
            detrended,
            filtered,
            sample_rate,
        })
    }

    pub fn from_recording(rec: &Recording, filter: &Bandpass) -> Result<SignalViews> {
        SignalViews::from_series(rec.times(), rec.values(), rec.sample_rate, filter)
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recording::{Activity, Sample};

    fn rec(values: &[i64]) -> Recording {
        let samples = values
            .iter()
            .enumerate()
            .map(|(i, &v)| Sample {
                time: i as f64 * 0.01,
                value: v,
            })
            .collect();
        Recording::new(samples, 100.0, Activity::Stationary, "t").unwrap()
    }

    #[test]
    fn outliers_in_range_are_untouched() {
        let r = rec(&[5, 6, 7, 8]);
        let (out, removed) = remove_outliers(&r, 1, 10).unwrap();
        assert_eq!(removed, 0);
        assert_eq!(out, r);
    }

    #[test]
    fn single_outlier_removed() {
        let r = rec(&[5, 11, 7, 8]);
        let (out, removed) = remove_outliers(&r, 1, 10).unwrap();
        assert_eq!(removed, 1);
        assert_eq!(out.values(), vec![5.0, 7.0, 8.0]);
        assert_eq!(out.samples[1].time, 0.02);
    }

    #[test]
    fn injected_spikes_counted() {
        let mut values: Vec<i64> = (0..200).map(|i| 1000 + (i % 17)).collect();
        for &i in &[13, 77, 150] {
            values[i] = 50_000;
        }
        let expected = values.iter().filter(|&&v| v > 2000).count();
        let (_, removed) = remove_outliers(&rec(&values), 1, 2000).unwrap();
        assert_eq!(removed, expected);
        assert_eq!(removed, 3);
    }

    #[test]
    fn too_many_outliers_is_error() {
        assert!(remove_outliers(&rec(&[50, 50, 50, 5]), 1, 10).is_err());
        assert!(remove_outliers(&rec(&[5]), 10, 10).is_err());
    }

    #[test]
    fn detrend_constant_and_ramp() {
        assert!(detrend(&[5.0; 10]).unwrap().iter().all(|v| v.abs() < 1e-12));
        let ramp: Vec<f64> = (0..500).map(|i| 3.5 * i as f64 - 20.0).collect();
        assert!(detrend(&ramp).unwrap().iter().all(|v| v.abs() < 1e-9));
        assert!(detrend(&[1.0]).is_err());
    }

    #[test]
    fn detrend_recovers_sine_under_ramp() {
        let fs = 100.0;
        let t: Vec<f64> = (0..1000).map(|i| i as f64 / fs).collect();
        let sine: Vec<f64> = t.iter().map(|t| (2.0 * PI * 1.2 * t).sin()).collect();
        let x: Vec<f64> = t.iter().zip(&sine).map(|(t, s)| s + 10.0 * t).collect();
        let out = detrend(&x).unwrap();

        // Oracle: the residual must equal the sine minus its own least-squares line,
        // solved here through the 2x2 normal equations.
        let n = t.len() as f64;
        let (st, ss, stt, sts) = t.iter().zip(&sine).fold((0.0, 0.0, 0.0, 0.0), |acc, (t, s)| {
            (acc.0 + t, acc.1 + s, acc.2 + t * t, acc.3 + t * s)
        });
        let slope = (n * sts - st * ss) / (n * stt - st * st);
        let icept = (ss - slope * st) / n;
        let rms = (out
            .iter()
            .zip(t.iter().zip(&sine))
            .map(|(o, (t, s))| (o - (s - slope * t - icept)).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        assert!(rms < 1e-6, "rms {rms}");
        let rms_vs_sine = (out.iter().zip(&sine).map(|(o, s)| (o - s).powi(2)).sum::<f64>() / n).sqrt();
        assert!(rms_vs_sine < 0.05);
    }

    fn sine(f: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * f * i as f64).sin()).collect()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    /// Gain measured on the middle half of the output, away from the edges.
    fn measured_gain_db(f: f64) -> f64 {
        let x = sine(f, 8000);
        let y = bandpass(&x, DEFAULT_F_LO, DEFAULT_F_HI).unwrap();
        let mid = 2000..6000;
        20.0 * (rms(&y[mid.clone()]) / rms(&x[mid])).log10()
    }

    #[test]
    fn passband_and_stopband_gains() {
        let center = (DEFAULT_F_LO * DEFAULT_F_HI).sqrt();
        assert!(measured_gain_db(center).abs() < 1.0);
        assert!(measured_gain_db(0.4) <= -20.0);
        assert!(measured_gain_db(DEFAULT_F_LO / 4.0) <= -20.0);
    }

    #[test]
    fn designed_response_matches_measured() {
        let filter = Bandpass::design(DEFAULT_F_LO, DEFAULT_F_HI, DEFAULT_PROTOTYPE_ORDER).unwrap();
        for f in [0.02, 0.0387, 0.1, 0.3, 0.4] {
            let predicted = filter.zero_phase_gain(f);
            let measured = 10f64.powf(measured_gain_db(f) / 20.0);
            assert!((predicted - measured).abs() < 1e-3, "f={f}");
        }
        // half-power edges of a Butterworth single pass
        assert!((filter.response(DEFAULT_F_LO).norm() - 0.5f64.sqrt()).abs() < 1e-9);
        assert!((filter.response(DEFAULT_F_HI).norm() - 0.5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn dc_is_rejected() {
        let x = vec![1000.0; 4000];
        let y = bandpass(&x, DEFAULT_F_LO, DEFAULT_F_HI).unwrap();
        assert!(rms(&y) < 0.01 * rms(&x));
    }

    #[test]
    fn zero_phase_lag() {
        let f = (DEFAULT_F_LO * DEFAULT_F_HI).sqrt();
        let x = sine(f, 6000);
        let y = bandpass(&x, DEFAULT_F_LO, DEFAULT_F_HI).unwrap();
        let best = (-10i64..=10)
            .map(|lag| {
                let c: f64 = (2000..4000).map(|i| x[i] * y[(i as i64 + lag) as usize]).sum();
                (lag, c)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0;
        assert!(best.abs() <= 1);
    }

    #[test]
    fn short_input_and_bad_band_rejected() {
        assert!(bandpass(&[0.0; 50], DEFAULT_F_LO, DEFAULT_F_HI).is_err());
        assert!(Bandpass::design(0.2, 0.1, 2).is_err());
        assert!(Bandpass::design(0.1, 0.5, 2).is_err());
        assert!(Bandpass::design(0.0, 0.1, 2).is_err());
    }

    #[test]
    fn odd_prototype_orders_are_stable() {
        for order in 1..=5 {
            let f = Bandpass::design(0.01, 0.2, order).unwrap();
            assert!((f.response((0.01f64 * 0.2).sqrt()).norm() - 1.0).abs() < 0.05, "order {order}");
            let y = f.apply(&sine(0.05, 20_000)).unwrap();
            assert!(y.iter().all(|v| v.is_finite()));
        }
    }
}
