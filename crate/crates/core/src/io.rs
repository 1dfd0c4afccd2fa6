//! File formats: recording CSV (`time_s,value`) with a JSON metadata sidecar,
//! ground-truth JSON, per-pulse landmark CSV and the feature matrix CSV.
//!
//! Floats are written in Rust's shortest round-trip form, so output is byte-stable.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, QualityFlags, FEATURE_COUNT, FEATURE_NAMES};
use crate::pipeline::{ProcessedPulse, PulseTable};
use crate::poi::{Landmark, PointsOfInterest, PulsePoints};
use crate::recording::{Activity, Recording, Sample};
use crate::synth::GroundTruth;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub source_id: String,
    pub sample_rate: f64,
    pub label: Activity,
    #[serde(default)]
    pub movement_onset: Option<f64>,
    pub duration: f64,
    #[serde(default)]
    pub malformed_count: u64,
    #[serde(default)]
    pub truncated: bool,
}

impl RecordingMeta {
    pub fn of(rec: &Recording) -> RecordingMeta {
        RecordingMeta {
            source_id: rec.source_id.clone(),
            sample_rate: rec.sample_rate,
            label: rec.label,
            movement_onset: rec.movement_onset,
            duration: rec.duration(),
            malformed_count: 0,
            truncated: false,
        }
    }
}

/// Sidecar path for a recording CSV: `x.csv` → `x.json`.
pub fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Ground-truth path for a recording CSV: `x.csv` → `x.truth.json`.
pub fn truth_path(csv: &Path) -> PathBuf {
    csv.with_extension("truth.json")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let mut s = String::new();
    open(path)?.read_to_string(&mut s).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&s).map_err(|e| Error::malformed(path.display().to_string(), e.to_string()))
}

pub fn write_samples<W: Write>(w: W, samples: &[Sample]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["time_s", "value"])?;
    for s in samples {
        csv.write_record([s.time.to_string(), s.value.to_string()])?;
    }
    csv.flush().map_err(Error::Net)
}

fn column(headers: &csv::StringRecord, name: &str, context: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn {
            column: name.to_string(),
            path: context.to_string(),
        })
}

fn parse<T: std::str::FromStr>(field: Option<&str>, what: &str, context: &str, row: usize) -> Result<T> {
    let raw = field.unwrap_or("").trim();
    raw.parse()
        .map_err(|_| Error::malformed(context, format!("row {row}: bad {what} `{raw}`")))
}

pub fn read_samples<R: Read>(r: R, context: &str) -> Result<Vec<Sample>> {
    let mut csv = csv::Reader::from_reader(r);
    let headers = csv.headers()?.clone();
    let ti = column(&headers, "time_s", context)?;
    let vi = column(&headers, "value", context)?;
    let mut out = Vec::new();
    for (row, rec) in csv.records().enumerate() {
        let rec = rec.map_err(|e| Error::malformed(context, e.to_string()))?;
        out.push(Sample {
            time: parse(rec.get(ti), "time", context, row + 1)?,
            value: parse(rec.get(vi), "value", context, row + 1)?,
        });
    }
    Ok(out)
}

pub fn write_recording(path: &Path, rec: &Recording, meta: &RecordingMeta) -> Result<()> {
    let mut w = create(path)?;
    write_samples(&mut w, &rec.samples)?;
    w.flush().map_err(|e| Error::io(path, e))?;
    write_json(&meta_path(path), meta)
}

/// Reads a recording CSV and its sidecar. Without a sidecar the sample rate is taken
/// from the median sample spacing and the label defaults to stationary.
pub fn read_recording(path: &Path) -> Result<(Recording, Option<RecordingMeta>)> {
    let context = path.display().to_string();
    let samples = read_samples(open(path)?, &context)?;
    if samples.len() < 2 {
        return Err(Error::insufficient(format!("{context} holds {} samples", samples.len())));
    }
    let meta_file = meta_path(path);
    let meta: Option<RecordingMeta> = if meta_file.exists() {
        Some(read_json(&meta_file)?)
    } else {
        None
    };
    let rec = match &meta {
        Some(m) => Recording {
            samples,
            sample_rate: m.sample_rate,
            label: m.label,
            source_id: m.source_id.clone(),
            movement_onset: m.movement_onset,
        },
        None => {
            let mut gaps: Vec<f64> = samples.windows(2).map(|w| w[1].time - w[0].time).collect();
            gaps.sort_by(f64::total_cmp);
            let step = gaps[gaps.len() / 2];
            log::warn!("{context}: no metadata sidecar, assuming stationary at {} Hz", 1.0 / step);
            Recording {
                samples,
                sample_rate: 1.0 / step,
                label: Activity::Stationary,
                source_id: path.file_stem().map_or(context.clone(), |s| s.to_string_lossy().into_owned()),
                movement_onset: None,
            }
        }
    };
    rec.validate()?;
    Ok((rec, meta))
}

pub fn write_ground_truth(path: &Path, gt: &GroundTruth) -> Result<()> {
    write_json(path, gt)
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    read_json(path)
}

const VIEWS: [&str; 3] = ["raw", "detrended", "filtered"];
const LANDMARKS: [&str; 5] = ["onset", "systolic", "dicrotic", "diastolic", "end"];
const POI_LEAD: [&str; 9] = [
    "source_id",
    "label",
    "movement_onset",
    "record_start",
    "pulse_index",
    "start_index",
    "end_index",
    "start_time",
    "end_time",
];

/// Landmark CSV columns: recording context, then `_i`, `_t`, `_m` per view and
/// landmark, then a diastolic-fallback flag per view.
pub fn poi_header() -> Vec<String> {
    let mut h: Vec<String> = POI_LEAD.map(String::from).to_vec();
    for v in VIEWS {
        for l in LANDMARKS {
            for suffix in ["i", "t", "m"] {
                h.push(format!("{v}_{l}_{suffix}"));
            }
        }
    }
    for v in VIEWS {
        h.push(format!("{v}_diastolic_fallback"));
    }
    h
}

fn landmark_fields(out: &mut Vec<String>, lm: Option<Landmark>) {
    match lm {
        Some(l) => out.extend([l.index.to_string(), l.t.to_string(), l.m.to_string()]),
        None => out.extend([String::new(), String::new(), String::new()]),
    }
}

fn poi_fields(out: &mut Vec<String>, p: &PointsOfInterest) {
    for lm in [Some(p.onset), Some(p.systolic), p.dicrotic, p.diastolic, Some(p.end)] {
        landmark_fields(out, lm);
    }
}

fn opt_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes one row per pulse; absent landmarks are empty cells.
pub fn write_poi<W: Write>(w: W, tables: &[PulseTable]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(poi_header())?;
    for table in tables {
        for p in &table.pulses {
            let mut row = vec![
                table.source_id.clone(),
                table.label.to_string(),
                opt_field(table.movement_onset),
                table.record_start.to_string(),
                p.pulse_index.to_string(),
                p.start_index.to_string(),
                p.end_index.to_string(),
                p.start_time.to_string(),
                p.end_time.to_string(),
            ];
            let views = [&p.points.raw, &p.points.detrended, &p.points.filtered];
            for v in views {
                poi_fields(&mut row, v);
            }
            for v in views {
                row.push(u8::from(v.diastolic_fallback_used).to_string());
            }
            csv.write_record(&row)?;
        }
    }
    csv.flush().map_err(Error::Net)
}

struct RowReader<'a> {
    rec: &'a csv::StringRecord,
    cols: &'a [usize],
    context: &'a str,
    row: usize,
}

impl RowReader<'_> {
    fn raw(&self, col: usize) -> &str {
        self.rec.get(self.cols[col]).unwrap_or("").trim()
    }

    fn get<T: std::str::FromStr>(&self, col: usize, what: &str) -> Result<T> {
        parse(Some(self.raw(col)), what, self.context, self.row)
    }

    fn opt<T: std::str::FromStr>(&self, col: usize, what: &str) -> Result<Option<T>> {
        if self.raw(col).is_empty() {
            Ok(None)
        } else {
            self.get(col, what).map(Some)
        }
    }

    fn landmark(&self, col: usize, what: &str) -> Result<Option<Landmark>> {
        let parts = (self.opt(col, what)?, self.opt(col + 1, what)?, self.opt(col + 2, what)?);
        match parts {
            (Some(index), Some(t), Some(m)) => Ok(Some(Landmark { index, t, m })),
            (None, None, None) => Ok(None),
            _ => Err(Error::malformed(self.context, format!("row {}: partial {what} landmark", self.row))),
        }
    }

    fn required(&self, col: usize, what: &str) -> Result<Landmark> {
        self.landmark(col, what)?
            .ok_or_else(|| Error::malformed(self.context, format!("row {}: missing {what} landmark", self.row)))
    }
}

/// Reads a landmark CSV back into per-recording tables; rows of one recording must be contiguous.
pub fn read_poi<R: Read>(r: R, context: &str) -> Result<Vec<PulseTable>> {
    let mut csv = csv::Reader::from_reader(r);
    let headers = csv.headers()?.clone();
    let cols = poi_header()
        .iter()
        .map(|name| column(&headers, name, context))
        .collect::<Result<Vec<_>>>()?;
    let lead = POI_LEAD.len();
    let flags = lead + VIEWS.len() * LANDMARKS.len() * 3;
    let mut tables: Vec<PulseTable> = Vec::new();
    for (row, rec) in csv.records().enumerate() {
        let rec = rec.map_err(|e| Error::malformed(context, e.to_string()))?;
        let rr = RowReader {
            rec: &rec,
            cols: &cols,
            context,
            row: row + 1,
        };
        let mut views = Vec::with_capacity(3);
        for (vi, v) in VIEWS.iter().enumerate() {
            let at = |li: usize| lead + (vi * LANDMARKS.len() + li) * 3;
            let fallback: u8 = rr.get(flags + vi, "diastolic_fallback")?;
            views.push(PointsOfInterest {
                onset: rr.required(at(0), &format!("{v} onset"))?,
                systolic: rr.required(at(1), &format!("{v} systolic"))?,
                dicrotic: rr.landmark(at(2), &format!("{v} dicrotic"))?,
                diastolic: rr.landmark(at(3), &format!("{v} diastolic"))?,
                end: rr.required(at(4), &format!("{v} end"))?,
                diastolic_fallback_used: fallback != 0,
            });
        }
        let pulse = ProcessedPulse {
            pulse_index: rr.get(4, "pulse_index")?,
            start_index: rr.get(5, "start_index")?,
            end_index: rr.get(6, "end_index")?,
            start_time: rr.get(7, "start_time")?,
            end_time: rr.get(8, "end_time")?,
            points: PulsePoints {
                raw: views[0],
                detrended: views[1],
                filtered: views[2],
            },
        };
        let source_id = rr.raw(0).to_string();
        match tables.last_mut() {
            Some(t) if t.source_id == source_id => t.pulses.push(pulse),
            _ => {
                if tables.iter().any(|t| t.source_id == source_id) {
                    return Err(Error::malformed(context, format!("row {}: rows of `{source_id}` are not contiguous", row + 1)));
                }
                tables.push(PulseTable {
                    source_id,
                    label: rr.get(1, "label")?,
                    movement_onset: rr.opt(2, "movement_onset")?,
                    record_start: rr.get(3, "record_start")?,
                    pulses: vec![pulse],
                });
            }
        }
    }
    Ok(tables)
}

pub fn write_poi_file(path: &Path, tables: &[PulseTable]) -> Result<()> {
    let mut w = create(path)?;
    write_poi(&mut w, tables)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_poi_file(path: &Path) -> Result<Vec<PulseTable>> {
    read_poi(open(path)?, &path.display().to_string())
}

pub fn feature_header() -> Vec<&'static str> {
    let mut h = FEATURE_NAMES.to_vec();
    h.extend(["label", "pulse_index", "quality_flag"]);
    h
}

pub fn write_features<W: Write>(w: W, rows: &[FeatureVector]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(feature_header())?;
    for fv in rows {
        let mut rec: Vec<String> = fv.values.iter().map(f64::to_string).collect();
        rec.push(fv.label.to_string());
        rec.push(fv.pulse_index.to_string());
        rec.push(fv.quality.0.to_string());
        csv.write_record(&rec)?;
    }
    csv.flush().map_err(Error::Net)
}

pub fn read_features<R: Read>(r: R, context: &str) -> Result<Vec<FeatureVector>> {
    let mut csv = csv::Reader::from_reader(r);
    let headers = csv.headers()?.clone();
    let cols = feature_header()
        .into_iter()
        .map(|name| column(&headers, name, context))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for (row, rec) in csv.records().enumerate() {
        let rec = rec.map_err(|e| Error::malformed(context, e.to_string()))?;
        let mut values = [0.0; FEATURE_COUNT];
        for (j, v) in values.iter_mut().enumerate() {
            *v = parse::<f64>(rec.get(cols[j]), FEATURE_NAMES[j], context, row + 1)?;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{context} row {} `{}`", row + 1, FEATURE_NAMES[j])));
            }
        }
        let label: Activity = parse(rec.get(cols[FEATURE_COUNT]), "label", context, row + 1)?;
        out.push(FeatureVector {
            values,
            label,
            pulse_index: parse(rec.get(cols[FEATURE_COUNT + 1]), "pulse_index", context, row + 1)?,
            quality: QualityFlags(parse(rec.get(cols[FEATURE_COUNT + 2]), "quality_flag", context, row + 1)?),
        });
    }
    Ok(out)
}

pub fn write_features_file(path: &Path, rows: &[FeatureVector]) -> Result<()> {
    let mut w = create(path)?;
    write_features(&mut w, rows)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_features_file(path: &Path) -> Result<Vec<FeatureVector>> {
    read_features(open(path)?, &path.display().to_string())
}
