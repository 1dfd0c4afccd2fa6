//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero if any fail.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ppg_posture::classify::ann::Network;
use ppg_posture::classify::{
    benchmark_grid, cross_validate, evaluate, gaussian_blobs, Classifier, GridSettings, Hyperparams, LabeledDataset,
    ModelSpec, PRESET_NAMES,
};
use ppg_posture::features::{
    chi_squared_scores, chi_squared_statistic, contingency_table, equal_frequency_bins, extract_features,
    rank_columns, select_features, Orthostatic, DEFAULT_DROP,
};
use ppg_posture::pipeline::{extract_recording, process_recording, PipelineConfig};
use ppg_posture::poi::{find_diastolic, find_systolic, PointsOfInterest};
use ppg_posture::preprocess::Bandpass;
use ppg_posture::synth::{batch_specs, generate_recording, BatchShape, ScenarioSpec};
use ppg_posture::wire::{encode, encode_into, relay, Decoder, RecordKind, WireRecord, VALUE_MASK};
use ppg_posture::Activity;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn wire_round_trip() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let records: Vec<WireRecord> = (0..10_000)
        .map(|_| WireRecord {
            kind: if rng.random_bool(0.5) { RecordKind::Time } else { RecordKind::Sensor },
            value: rng.random_range(0..=VALUE_MASK),
        })
        .collect();
    let mut bytes = Vec::new();
    for r in &records {
        encode_into(r, &mut bytes).map_err(|e| e.to_string())?;
    }
    let source = TcpListener::bind("127.0.0.1:0").map_err(|e| e.to_string())?;
    let proxy = TcpListener::bind("127.0.0.1:0").map_err(|e| e.to_string())?;
    let source_addr = source.local_addr().unwrap();
    let proxy_addr = proxy.local_addr().unwrap();
    let sender = std::thread::spawn(move || {
        let (mut s, _) = source.accept().unwrap();
        s.write_all(&bytes).unwrap();
    });
    let forwarder = std::thread::spawn(move || {
        let (client, _) = proxy.accept().unwrap();
        client.set_nodelay(true).unwrap();
        let upstream = TcpStream::connect(source_addr).unwrap();
        relay(upstream, client, 1).unwrap();
    });
    let mut stream = TcpStream::connect(proxy_addr).map_err(|e| e.to_string())?;
    let mut decoder = Decoder::new();
    let mut decoded = Vec::new();
    let mut buf = [0u8; 256];
    let mut reads = 0usize;
    loop {
        let n = stream.read(&mut buf).map_err(|e| e.to_string())?;
        if n == 0 {
            break;
        }
        reads += 1;
        decoder.feed(&buf[..n], &mut decoded);
    }
    sender.join().unwrap();
    forwarder.join().unwrap();
    let elapsed = start.elapsed();
    ensure(
        decoded == records && decoder.malformed() == 0 && elapsed < Duration::from_secs(10),
        format!(
            "{} of {} records identical over {reads} reads, {} malformed, {:.2} s",
            decoded.iter().zip(&records).filter(|(a, b)| a == b).count(),
            records.len(),
            decoder.malformed(),
            elapsed.as_secs_f64()
        ),
    )
}

fn protocol_framing() -> Outcome {
    let got = [
        encode(&WireRecord::sensor(1234).unwrap()).unwrap(),
        encode(&WireRecord::time(0).unwrap()).unwrap(),
        encode(&WireRecord::time(5000).unwrap()).unwrap(),
    ];
    let want: [&[u8]; 3] = [b"1234,", b"2147483648,", b"2147488648,"];
    let shown: Vec<String> = got.iter().map(|b| String::from_utf8_lossy(b).into_owned()).collect();
    ensure(got.iter().zip(want).all(|(g, w)| g == w), format!("{shown:?}"))
}

fn sine(f: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (2.0 * std::f64::consts::PI * f * i as f64).sin()).collect()
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

fn filter_contract() -> Outcome {
    let bp = Bandpass::design(0.0075, 0.2, 4).map_err(|e| e.to_string())?;
    let n = 6000;
    let mid = 1000..5000;
    let f_in = (0.0075f64 * 0.2).sqrt();
    let x = sine(f_in, n);
    let y = bp.apply(&x).map_err(|e| e.to_string())?;
    let gain_db = 20.0 * (rms(&y[mid.clone()]) / rms(&x[mid.clone()])).log10();
    let lag = (-5i64..=5)
        .max_by(|&a, &b| {
            let corr = |k: i64| mid.clone().map(|i| x[i] * y[(i as i64 + k) as usize]).sum::<f64>();
            corr(a).total_cmp(&corr(b))
        })
        .unwrap();
    let z = sine(0.4, n);
    let w = bp.apply(&z).map_err(|e| e.to_string())?;
    let stop_db = 20.0 * (rms(&w[mid.clone()]) / rms(&z[mid])).log10();
    ensure(
        gain_db.abs() <= 1.0 && stop_db <= -20.0 && lag.abs() <= 1,
        format!("passband {gain_db:+.3} dB at {f_in:.4} c/s, {stop_db:.1} dB at 0.4 c/s, lag {lag} samples"),
    )
}

fn near(t: f64, candidates: &[f64], tol: f64) -> bool {
    candidates.iter().any(|c| (c - t).abs() <= tol)
}

fn segmentation_recall() -> Outcome {
    let cfg = PipelineConfig::default();
    let (mut truth, mut hits, mut on_notch) = (0usize, 0usize, 0usize);
    for i in 0..20u64 {
        let class = Activity::ALL[i as usize % 3];
        let spec = ScenarioSpec::preset(class, 100 + i);
        let (rec, gt) = generate_recording(&spec).map_err(|e| e.to_string())?;
        let p = process_recording(&rec, &cfg).map_err(|e| e.to_string())?;
        let found: Vec<f64> = p.onsets.onsets.iter().map(|&k| p.views.times[k]).collect();
        truth += gt.onset_times.len();
        hits += gt.onset_times.iter().filter(|&&t| near(t, &found, 0.030)).count();
        on_notch += found.iter().filter(|&&t| near(t, &gt.notch_times, 0.030)).count();
    }
    let recall = 100.0 * hits as f64 / truth as f64;
    ensure(
        recall >= 95.0 && on_notch == 0,
        format!("recall {recall:.2}% ({hits}/{truth}) within 30 ms, {on_notch} onsets on notches"),
    )
}

fn diastolic_detection() -> Outcome {
    let cfg = PipelineConfig::default();
    let mut errors = Vec::new();
    let mut seed = 200;
    while errors.len() < 100 {
        let spec = ScenarioSpec::preset(Activity::Stationary, seed);
        seed += 1;
        let (rec, gt) = generate_recording(&spec).map_err(|e| e.to_string())?;
        let p = process_recording(&rec, &cfg).map_err(|e| e.to_string())?;
        for pulse in &p.pulses {
            let Some(d) = pulse.points.filtered.diastolic else { continue };
            let Some(j) = gt.onset_times.iter().rposition(|&t| t <= pulse.start_time + 0.03) else { continue };
            if errors.len() < 100 {
                errors.push((d.t - gt.diastolic_times[j]).abs());
            }
        }
    }
    let mae_ms = 1000.0 * errors.iter().sum::<f64>() / errors.len() as f64;

    // A parabolic cap has constant curvature, leaving no second-derivative minimum to match.
    let mut v: Vec<f64> = (0..=10).map(|i| 100.0 * i as f64).collect();
    v.extend((1..=20).map(|i| 1000.0 - 30.0 * i as f64));
    v.extend((31..=70).map(|i| 500.0 - 0.25 * (i as f64 - 50.0).powi(2)));
    let last = *v.last().unwrap();
    v.extend((1..=30).map(|i| last - last * i as f64 / 30.0));
    let (sys, _) = find_systolic(&v).map_err(|e| e.to_string())?;
    let fallback = find_diastolic(&v, 100.0, sys).map_err(|e| e.to_string())?;
    let fallback_used = fallback.is_some_and(|d| d.fallback_used);
    ensure(
        mae_ms <= 20.0 && fallback_used,
        format!("MAE {mae_ms:.2} ms over {} pulses, fallback exercised: {fallback_used}", errors.len()),
    )
}

/// Table 1 recomputed from the landmarks.
fn oracle(p: &PointsOfInterest, raw: &PointsOfInterest, det: &PointsOfInterest, ortho: Orthostatic) -> Vec<(&'static str, f64, bool)> {
    let dia_m = |q: &PointsOfInterest| q.diastolic.map_or(0.0, |d| d.m - q.onset.m);
    let split = p.dicrotic.or(p.diastolic).unwrap_or(p.systolic).t;
    vec![
        ("systolic_magnitude", p.systolic.m, false),
        ("systolic_rise_gradient", (p.systolic.m - p.onset.m) / (p.systolic.t - p.onset.t), false),
        ("raw_systolic_amplitude", raw.systolic.m - raw.onset.m, false),
        ("systolic_amplitude", p.systolic.m - p.onset.m, false),
        ("peak_difference", p.diastolic.map_or(0.0, |d| p.systolic.m - d.m), false),
        ("detrended_systolic_amplitude", det.systolic.m - det.onset.m, false),
        ("pulse_onset_magnitude", p.onset.m, false),
        ("raw_offset", raw.end.m - raw.onset.m, false),
        ("raw_orthostatic_magnitude", ortho.raw, false),
        ("pulse_width", p.end.t - p.onset.t, true),
        ("end_point_magnitude", p.end.m, false),
        ("detrended_offset", det.end.m - det.onset.m, false),
        ("diastolic_amplitude", dia_m(p), false),
        ("raw_diastolic_amplitude", dia_m(raw), false),
        ("systolic_phase", split - p.onset.t, true),
        ("diastolic_phase", p.end.t - split, true),
        ("offset", p.end.m - p.onset.m, false),
        ("detrended_orthostatic_magnitude", ortho.detrended, false),
        ("detrended_diastolic_amplitude", dia_m(det), false),
        ("diastolic_magnitude", p.diastolic.map_or(0.0, |d| d.m), false),
        ("dicrotic_magnitude", p.dicrotic.map_or(0.0, |d| d.m), false),
    ]
}

fn feature_arithmetic() -> Outcome {
    let (rec, _) = generate_recording(&ScenarioSpec::preset(Activity::SitToStand, 300)).map_err(|e| e.to_string())?;
    let p = process_recording(&rec, &PipelineConfig::default()).map_err(|e| e.to_string())?;
    let period = 1.0 / rec.sample_rate;
    let mut checked = 0;
    let mut worst = Vec::new();
    let mut additive = true;
    for (i, pulse) in p.pulses.iter().take(50).enumerate() {
        let ortho = Orthostatic {
            raw: i as f64 * 1.5,
            detrended: -(i as f64),
        };
        let pts = &pulse.points;
        let fv = extract_features(pts, ortho, Activity::SitToStand, pulse.pulse_index);
        for (name, want, is_time) in oracle(&pts.filtered, &pts.raw, &pts.detrended, ortho) {
            let got = fv.get(name).ok_or(format!("no feature {name}"))?;
            let tol = if is_time { period } else { 1e-9 * want.abs().max(1.0) };
            if (got - want).abs() > tol {
                worst.push(format!("{name} pulse {i}: {got} vs {want}"));
            }
        }
        let sum = fv.get("systolic_phase").unwrap() + fv.get("diastolic_phase").unwrap();
        additive &= (sum - fv.get("pulse_width").unwrap()).abs() < 1e-9;
        checked += 1;
    }
    ensure(
        checked == 50 && worst.is_empty() && additive,
        format!(
            "{checked} pulses x 21 features, {} mismatches{}, phase additivity {additive}",
            worst.len(),
            worst.first().map(|w| format!(" (first: {w:?})")).unwrap_or_default()
        ),
    )
}

fn chi_squared_oracle() -> Outcome {
    let hand = |t: &[Vec<f64>]| -> f64 {
        let total: f64 = t.iter().flatten().sum();
        let mut s = 0.0;
        for (i, row) in t.iter().enumerate() {
            for (j, &o) in row.iter().enumerate() {
                let e = t[i].iter().sum::<f64>() * t.iter().map(|r| r[j]).sum::<f64>() / total;
                s += (o - e).powi(2) / e;
            }
        }
        s
    };
    let tables = [
        vec![vec![10.0, 0.0], vec![0.0, 10.0]],
        vec![vec![12.0, 5.0, 3.0], vec![4.0, 9.0, 7.0], vec![1.0, 2.0, 17.0]],
        vec![vec![3.0, 3.0], vec![6.0, 6.0]],
    ];
    let worst_table = tables
        .iter()
        .map(|t| (chi_squared_statistic(t) - hand(t)).abs())
        .fold(0.0, f64::max);
    let from_bins = {
        let bins = [0, 0, 1, 1, 1, 0];
        let labels = [0, 0, 1, 1, 0, 1];
        let t = contingency_table(&bins, &labels, 2);
        (chi_squared_statistic(&t) - hand(&t)).abs()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 300;
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
    let columns: Vec<Vec<f64>> = (0..10)
        .map(|f| labels.iter().map(|&c| c as f64 * f as f64 * 0.1 + rng.random_range(-1.0..1.0)).collect())
        .collect();
    let transformed: Vec<Vec<f64>> = columns
        .iter()
        .enumerate()
        .map(|(f, col)| match f % 3 {
            0 => col.iter().map(|v| v.exp()).collect(),
            1 => col.iter().map(|v| v.powi(3) * 2.0 + 5.0).collect(),
            _ => col.iter().map(|v| 7.0 * v - 3.0).collect(),
        })
        .collect();
    let names: Vec<String> = (0..10).map(|i| format!("f{i}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let a = rank_columns(&refs, &columns, &labels, 3).map_err(|e| e.to_string())?;
    let b = rank_columns(&refs, &transformed, &labels, 3).map_err(|e| e.to_string())?;
    let invariant = a.entries.len() == 10
        && a.entries
            .iter()
            .all(|(name, s)| b.entries.iter().any(|(n2, s2)| n2 == name && (s - s2).abs() < 1e-9));
    let same_bins = columns
        .iter()
        .zip(&transformed)
        .all(|(c, t)| equal_frequency_bins(c, 10) == equal_frequency_bins(t, 10));
    ensure(
        worst_table < 1e-9 && from_bins < 1e-9 && invariant && same_bins,
        format!("hand tables max error {worst_table:.1e}, 10 features invariant under monotone maps: {invariant}"),
    )
}

fn classifier_sanity() -> Outcome {
    let (x, y) = gaussian_blobs(3, 500, 4, 6.0, 11);
    let names: Vec<String> = (0..4).map(|i| format!("x{i}")).collect();
    let classes: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
    let data = LabeledDataset::new(x.clone(), y.clone(), names.clone(), classes.clone()).map_err(|e| e.to_string())?;
    let presets = Hyperparams::default().presets(&PRESET_NAMES).map_err(|e| e.to_string())?;
    let grid = benchmark_grid(&data, &presets, GridSettings::default(), 11).map_err(|e| e.to_string())?;
    let mut weakest = (String::new(), f64::INFINITY);
    for e in &grid {
        let acc = e.outcome.as_ref().map(|r| r.test_accuracy).unwrap_or(0.0);
        if acc < weakest.1 {
            weakest = (e.model.clone(), acc);
        }
    }

    let mut fine = ModelSpec::Knn { k: 1 }.build(0);
    fine.fit(&x, &y, 3).map_err(|e| e.to_string())?;
    let self_acc = evaluate(fine.as_ref(), &x, &y, 3).map_err(|e| e.to_string())?.accuracy();

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut shuffled = y.clone();
    for i in (1..shuffled.len()).rev() {
        shuffled.swap(i, rng.random_range(0..=i));
    }
    let permuted = LabeledDataset::new(x, shuffled, names, classes).map_err(|e| e.to_string())?;
    let chance = cross_validate(&permuted, &ModelSpec::Lda, 10, 12).map_err(|e| e.to_string())?.accuracy;
    ensure(
        weakest.1 >= 95.0 && self_acc == 100.0 && (chance - 100.0 / 3.0).abs() <= 5.0,
        format!(
            "{} presets, lowest test accuracy {:.1}% ({}); fine KNN self-accuracy {self_acc:.1}%; permuted labels {chance:.1}%",
            grid.len(),
            weakest.1,
            weakest.0
        ),
    )
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let net = Network::new(6, 12, 3, &mut rng);
    let x: Vec<Vec<f64>> = (0..20).map(|_| (0..6).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let y: Vec<usize> = (0..20).map(|i| i % 3).collect();
    let (_, grad) = net.loss_and_grad(&x, &y);
    let analytic = grad.params();
    let base = net.params();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let k = rng.random_range(0..base.len());
        let mut probe = net.clone();
        let mut p = base.clone();
        p[k] += h;
        probe.set_params(&p);
        let up = probe.loss(&x, &y);
        p[k] -= 2.0 * h;
        probe.set_params(&p);
        let down = probe.loss(&x, &y);
        let numeric = (up - down) / (2.0 * h);
        let rel = (analytic[k] - numeric).abs() / analytic[k].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    ensure(worst < 1e-4, format!("max relative error {worst:.2e} at 10 coordinates"))
}

/// Predicts the class stored in the first column.
struct Echo;

impl Classifier for Echo {
    fn fit(&mut self, _: &[Vec<f64>], _: &[usize], _: usize) -> ppg_posture::Result<()> {
        Ok(())
    }

    fn predict_one(&self, x: &[f64]) -> ppg_posture::Result<usize> {
        Ok(x[0] as usize)
    }
}

fn metrics_hand_case() -> Outcome {
    // class 0 positive: 8 TP, 2 FP, 4 FN, 6 TN
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (actual, predicted, n) in [(0, 0, 8), (1, 0, 2), (0, 1, 4), (1, 1, 6)] {
        for _ in 0..n {
            rows.push(vec![predicted as f64]);
            labels.push(actual);
        }
    }
    let cm = evaluate(&Echo, &rows, &labels, 2).map_err(|e| e.to_string())?;
    let m = cm.class_metrics()[0];
    ensure(
        (m.precision - 80.0).abs() <= 0.01 && (m.sensitivity - 66.67).abs() <= 0.01 && (m.f1 - 72.73).abs() <= 0.01,
        format!("precision {:.2}%, sensitivity {:.2}%, F1 {:.2}%", m.precision, m.sensitivity, m.f1),
    )
}

fn cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ppg-posture"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("`{}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))
    }
}

/// simulate → process → features → rank → train → report, in `dir`.
fn run_pipeline(dir: &Path) -> Result<Duration, String> {
    let start = Instant::now();
    cli(dir, &["simulate", "--batch", "--out", "recs"])?;
    let mut recs: Vec<String> = std::fs::read_dir(dir.join("recs"))
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .map(|e| format!("recs/{}", e.file_name().to_string_lossy()))
        .filter(|n| n.ends_with(".csv"))
        .collect();
    recs.sort();
    let mut process = vec!["process"];
    process.extend(recs.iter().map(String::as_str));
    process.extend(["--out", "poi.csv"]);
    cli(dir, &process)?;
    cli(dir, &["features", "poi.csv", "--out", "features.csv"])?;
    cli(dir, &["rank", "features.csv", "--out", "ranking.csv"])?;
    cli(dir, &["train", "features.csv", "--ranking", "ranking.csv", "--out", "results.json"])?;
    cli(dir, &["report", "results.json", "--out-dir", "report"])?;
    Ok(start.elapsed())
}

struct ModelRow {
    f1: Vec<f64>,
    mean_f1: f64,
}

fn model_row(report: &Path, model: &str) -> Result<ModelRow, String> {
    let mut r = csv::Reader::from_path(report.join("models.csv")).map_err(|e| e.to_string())?;
    let headers = r.headers().map_err(|e| e.to_string())?.clone();
    let col = |n: &str| headers.iter().position(|h| h == n).ok_or(format!("no column {n}"));
    let cols = [col("f1_stationary")?, col("f1_sit_to_stand")?, col("f1_lie_to_stand")?, col("mean_f1")?];
    for rec in r.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        if &rec[0] == model {
            let v: Vec<f64> = cols.iter().map(|&c| rec[c].parse().unwrap_or(f64::NAN)).collect();
            return Ok(ModelRow {
                f1: v[..3].to_vec(),
                mean_f1: v[3],
            });
        }
    }
    Err(format!("{model} missing from report"))
}

/// Mean F1 of LDA and wide ANN on batches from several seeds, by library call.
fn seed_spread(seeds: std::ops::RangeInclusive<u64>) -> Result<String, String> {
    let cfg = PipelineConfig::default();
    let presets = Hyperparams::default().presets(&["lda", "wide_ann"]).map_err(|e| e.to_string())?;
    let (mut lda, mut ann, mut wins, mut runs) = (0.0, 0.0, 0, 0);
    for seed in seeds {
        let mut rows = Vec::new();
        for spec in batch_specs(BatchShape::default(), seed) {
            let (rec, _) = generate_recording(&spec).map_err(|e| e.to_string())?;
            if let Ok(f) = extract_recording(&rec, &cfg) {
                rows.extend(f);
            }
        }
        let ranking = chi_squared_scores(&rows).map_err(|e| e.to_string())?;
        let mask = select_features(&ranking, &DEFAULT_DROP).map_err(|e| e.to_string())?;
        let data = LabeledDataset::from_features(&rows, &mask).map_err(|e| e.to_string())?;
        let grid = benchmark_grid(&data, &presets, GridSettings::default(), seed).map_err(|e| e.to_string())?;
        let f1: Vec<f64> = grid
            .iter()
            .map(|e| e.outcome.as_ref().map(|r| r.mean_f1()).unwrap_or(0.0))
            .collect();
        lda += f1[0];
        ann += f1[1];
        wins += usize::from(f1[1] > f1[0]);
        runs += 1;
    }
    Ok(format!(
        "seeds 42-46: wide ANN ahead in {wins}/{runs}, mean F1 {:.2} vs LDA {:.2}",
        ann / runs as f64,
        lda / runs as f64
    ))
}

fn end_to_end(dir: &Path, runtime: Duration) -> Outcome {
    let report = dir.join("report");
    let ann = model_row(&report, "wide_ann")?;
    let lda = model_row(&report, "lda")?;
    let rows = ppg_posture::io::read_features_file(&dir.join("features.csv")).map_err(|e| e.to_string())?;
    let stationary = 100.0 * rows.iter().filter(|r| r.label == Activity::Stationary).count() as f64 / rows.len() as f64;
    let ordered = ann.f1[0] > ann.f1[2] && ann.f1[2] > ann.f1[1];
    let spread = seed_spread(42..=46)?;
    ensure(
        ordered && ann.mean_f1 > lda.mean_f1 && runtime < Duration::from_secs(300),
        format!(
            "default seed: wide ANN F1 stationary {:.1} / lie-to-stand {:.1} / sit-to-stand {:.1}, mean {:.2} vs LDA {:.2}; \
             {stationary:.1}% stationary pulses; pipeline {:.1} s. Robustness: {spread}",
            ann.f1[0],
            ann.f1[2],
            ann.f1[1],
            ann.mean_f1,
            lda.mean_f1,
            runtime.as_secs_f64()
        ),
    )
}

fn determinism(a: &Path, b: &Path) -> Outcome {
    let mut same = Vec::new();
    for name in ["models.csv", "class_metrics.csv", "confusion.csv"] {
        let x = std::fs::read(a.join("report").join(name)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.join("report").join(name)).map_err(|e| e.to_string())?;
        if x != y {
            return Err(format!("{name} differs between runs"));
        }
        same.push(format!("{name} ({} bytes)", x.len()));
    }
    Ok(format!("byte-identical: {}", same.join(", ")))
}

fn main() {
    let first = tempfile::tempdir().expect("temp dir");
    let second = tempfile::tempdir().expect("temp dir");
    let pipeline = run_pipeline(first.path());

    let checks: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("wire round-trip", Box::new(wire_round_trip)),
        ("protocol framing", Box::new(protocol_framing)),
        ("filter contract", Box::new(filter_contract)),
        ("segmentation recall", Box::new(segmentation_recall)),
        ("diastolic detection", Box::new(diastolic_detection)),
        ("feature arithmetic", Box::new(feature_arithmetic)),
        ("chi-squared oracle", Box::new(chi_squared_oracle)),
        ("classifier sanity", Box::new(classifier_sanity)),
        ("ANN gradient check", Box::new(gradient_check)),
        ("metrics hand case", Box::new(metrics_hand_case)),
        (
            "end-to-end synthetic benchmark",
            Box::new(|| end_to_end(first.path(), pipeline.clone()?)),
        ),
        (
            "determinism",
            Box::new(|| {
                pipeline.clone()?;
                run_pipeline(second.path())?;
                determinism(first.path(), second.path())
            }),
        ),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let started = Instant::now();
        let outcome = check();
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} [{secs:.1} s]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} [{secs:.1} s]: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria pass", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
