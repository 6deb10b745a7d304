//! Segment CSV.
//!
//! A file starts with the column line `segment_id,fold,label,fs,n_samples`.
//! Each segment is a header row with those five values followed by
//! `n_samples` rows of 12 amplitudes in lead-ordinal order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Label, Matrix, SegmentRecord, NUM_LEADS};
use crate::error::{Error, Result};

pub const SEGMENT_HEADER: &str = "segment_id,fold,label,fs,n_samples";

pub fn write_segments_to<W: Write>(mut w: W, segments: &[SegmentRecord]) -> std::io::Result<()> {
    writeln!(w, "{SEGMENT_HEADER}")?;
    for seg in segments {
        writeln!(
            w,
            "{},{},{},{},{}",
            seg.segment_id,
            seg.fold,
            seg.label,
            seg.sampling_rate,
            seg.n_samples()
        )?;
        for row in seg.samples.data.chunks(NUM_LEADS) {
            let mut first = true;
            for v in row {
                if !first {
                    w.write_all(b",")?;
                }
                first = false;
                write!(w, "{v}")?;
            }
            w.write_all(b"\n")?;
        }
    }
    w.flush()
}

pub fn write_segments(path: impl AsRef<Path>, segments: &[SegmentRecord]) -> Result<()> {
    let path = path.as_ref();
    if let Some(seg) = segments.iter().find(|s| s.segment_id.contains([',', '\n', '\r'])) {
        return Err(Error::Param(format!("segment id {:?} contains a separator", seg.segment_id)));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_segments_to(BufWriter::new(file), segments).map_err(|e| Error::io(path, e))
}

pub fn load_segments(path: impl AsRef<Path>) -> Result<Vec<SegmentRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_segments(BufReader::new(file), path)
}

/// Parses the segment layout; `origin` is only used in error messages.
pub fn read_segments<R: BufRead>(reader: R, origin: &Path) -> Result<Vec<SegmentRecord>> {
    let err = |line: u64, msg: String| Error::Ingest {
        path: origin.to_path_buf(),
        line,
        msg,
    };

    let mut out = Vec::new();
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i as u64 + 1, l));

    while let Some((lineno, line)) = lines.next() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if line == SEGMENT_HEADER {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(err(
                lineno,
                format!("expected segment header with 5 fields, found {}", fields.len()),
            ));
        }
        let segment_id = fields[0].to_string();
        let fold: u8 = fields[1]
            .parse()
            .map_err(|_| err(lineno, format!("bad fold {:?}", fields[1])))?;
        let label: Label = fields[2]
            .parse()
            .map_err(|_| err(lineno, format!("bad label {:?}", fields[2])))?;
        let fs: f64 = fields[3]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite() && *v > 0.0)
            .ok_or_else(|| err(lineno, format!("bad sampling rate {:?}", fields[3])))?;
        let n: usize = fields[4]
            .parse()
            .map_err(|_| err(lineno, format!("bad n_samples {:?}", fields[4])))?;

        let mut data = Vec::with_capacity(n * NUM_LEADS);
        for _ in 0..n {
            let (rn, row) = match lines.next() {
                Some((rn, l)) => (rn, l.map_err(|e| Error::io(origin, e))?),
                None => {
                    return Err(err(
                        lineno,
                        format!("segment {segment_id} truncated: expected {n} sample rows"),
                    ))
                }
            };
            let vals: Vec<&str> = row.trim_end().split(',').collect();
            if vals.len() != NUM_LEADS {
                return Err(err(rn, format!("expected {NUM_LEADS} columns, found {}", vals.len())));
            }
            for v in vals {
                let x: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| err(rn, format!("malformed amplitude {v:?}")))?;
                if !x.is_finite() {
                    return Err(err(rn, format!("non-finite amplitude {v:?}")));
                }
                data.push(x);
            }
        }
        let samples = Matrix::from_vec(n, NUM_LEADS, data).expect("row count checked");
        let seg = SegmentRecord::new(segment_id, fold, label, fs, samples)
            .map_err(|e| err(lineno, e.to_string()))?;
        out.push(seg);
    }
    Ok(out)
}
