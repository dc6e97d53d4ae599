use std::io::{Read, Write};
use std::path::Path;

use super::write_atomic;
use crate::error::{Error, Result};
use crate::features::{segment_names_for, FeatureMode, FrameFeatures, FrameSeries};
use crate::seqnn::{Mat, SeqTensor};

pub const FRAME_CSV_HEADER: [&str; 13] = [
    "frame",
    "confidence",
    "valence",
    "arousal",
    "au45",
    "gaze_x",
    "gaze_y",
    "head_x",
    "head_y",
    "head_z",
    "pitch",
    "yaw",
    "roll",
];

/// Formats `v` with 9 significant digits in plain decimal notation,
/// trimming trailing zeros.
pub fn format_real(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { "0".into() } else { v.to_string() };
    }
    // The exponent after rounding to 9 significant digits fixes how many
    // decimals the plain rendering needs.
    let sci = format!("{v:.8e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..]
        .parse()
        .expect("integer exponent");
    let decimals = (8 - exp).max(0) as usize;
    let mut s = format!("{v:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.');
        s = trimmed.to_string();
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

fn located(source: &str, row: usize, col: &str, msg: impl std::fmt::Display) -> Error {
    Error::Format(format!("{source}: row {row}, column '{col}': {msg}"))
}

/// Parses a frame-feature CSV. `source` names the input in error messages.
pub fn parse_frame_csv<R: Read>(reader: R, source: &str, id: &str, fps: f64) -> Result<FrameSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Format(format!("{source}: unreadable header: {e}")))?
        .clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Format(format!("{source}: empty file")));
    }
    for (i, want) in FRAME_CSV_HEADER.iter().enumerate() {
        match header.get(i) {
            Some(got) if got == *want => {}
            Some(got) => {
                return Err(Error::Format(format!(
                    "{source}: header column {} is '{got}', expected '{want}'",
                    i + 1
                )))
            }
            None => {
                return Err(Error::Format(format!(
                    "{source}: header is missing column '{want}'"
                )))
            }
        }
    }
    if header.len() > FRAME_CSV_HEADER.len() {
        return Err(Error::Format(format!(
            "{source}: unexpected extra column '{}'",
            &header[FRAME_CSV_HEADER.len()]
        )));
    }

    let mut frames = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Format(format!("{source}: row {row}: {e}")))?;
        if record.len() != FRAME_CSV_HEADER.len() {
            return Err(Error::Format(format!(
                "{source}: row {row} has {} fields, expected {}",
                record.len(),
                FRAME_CSV_HEADER.len()
            )));
        }
        let frame: u64 = record[0]
            .parse()
            .map_err(|_| located(source, row, "frame", format!("'{}' is not a frame number", &record[0])))?;
        let mut vals = [0.0; 12];
        for (k, v) in vals.iter_mut().enumerate() {
            let col = FRAME_CSV_HEADER[k + 1];
            let cell = &record[k + 1];
            let parsed: f64 = cell
                .parse()
                .map_err(|_| located(source, row, col, format!("'{cell}' is not a number")))?;
            if !parsed.is_finite() {
                return Err(located(source, row, col, "value is not finite"));
            }
            *v = parsed;
        }
        let [confidence, valence, arousal, au45, gaze_x, gaze_y, head_x, head_y, head_z, pitch, yaw, roll] =
            vals;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(located(source, row, "confidence", "outside [0, 1]"));
        }
        for (name, v) in [("valence", valence), ("arousal", arousal)] {
            if !(-1.0..=1.0).contains(&v) {
                return Err(located(source, row, name, "outside [-1, 1]"));
            }
        }
        if au45 < 0.0 {
            return Err(located(source, row, "au45", "negative intensity"));
        }
        frames.push(FrameFeatures {
            frame,
            confidence,
            valence,
            arousal,
            eye_closure: au45,
            gaze_x,
            gaze_y,
            head_x,
            head_y,
            head_z,
            pitch,
            yaw,
            roll,
        });
    }
    if frames.is_empty() {
        return Err(Error::Format(format!("{source}: no data rows")));
    }
    FrameSeries::new(id, fps, frames).map_err(|e| Error::Format(format!("{source}: {e}")))
}

/// Reads a frame CSV; the series id is the file stem.
pub fn read_frame_csv(path: &Path, fps: f64) -> Result<FrameSeries> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_frame_csv(file, &path.display().to_string(), &id, fps)
}

pub fn frame_csv_string(series: &FrameSeries) -> String {
    let mut out = FRAME_CSV_HEADER.join(",");
    out.push('\n');
    for f in &series.frames {
        out.push_str(&f.frame.to_string());
        for v in std::iter::once(f.confidence).chain(f.values()) {
            out.push(',');
            out.push_str(&format_real(v));
        }
        out.push('\n');
    }
    out
}

pub fn write_frame_csv(path: &Path, series: &FrameSeries) -> Result<()> {
    write_atomic(path, frame_csv_string(series).as_bytes())
}

/// Writes a segment-level matrix with one header column per segment
/// feature kept by `mode`.
pub fn write_segment_csv(path: &Path, segments: &Mat, mode: FeatureMode) -> Result<()> {
    let names = segment_names_for(mode);
    if segments.ncols() != names.len() {
        return Err(Error::Input(format!(
            "segment matrix has {} columns, {} mode needs {}",
            segments.ncols(),
            mode,
            names.len()
        )));
    }
    let mut buf = Vec::new();
    writeln!(buf, "{}", names.join(",")).expect("write to Vec");
    for row in segments.rows() {
        let cells: Vec<String> = row.iter().map(|&v| format_real(v)).collect();
        writeln!(buf, "{}", cells.join(",")).expect("write to Vec");
    }
    write_atomic(path, &buf)
}

/// Reads a segment CSV written by [`write_segment_csv`], inferring the
/// feature mode from the header.
pub fn read_segment_csv(path: &Path) -> Result<(SeqTensor, FeatureMode)> {
    let source = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Format(format!("{source}: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let mode = [FeatureMode::BehavioralAffect, FeatureMode::Behavioral]
        .into_iter()
        .find(|m| segment_names_for(*m) == header.as_slice())
        .ok_or_else(|| Error::Format(format!("{source}: header is not a segment-feature header")))?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(format!("{source}: row {}: {e}", i + 1)))?;
        let row = rec
            .iter()
            .zip(&header)
            .map(|(cell, col)| {
                cell.parse::<f64>()
                    .map_err(|_| located(&source, i + 1, col, format!("'{cell}' is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Format(format!("{source}: no data rows")));
    }
    Ok((SeqTensor::from_rows(&rows)?, mode))
}
