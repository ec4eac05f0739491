//! File formats: JSONL telemetry samples and persisted reference models.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::crowd::{CrowdError, ReferenceModel, REFERENCE_FORMAT_VERSION};
use crate::sim::ChargingSample;

/// Samples parsed from a JSONL file plus the count of rejected lines.
#[derive(Debug)]
pub struct SampleFile {
    pub samples: Vec<ChargingSample>,
    /// Lines that failed to parse or violated the sample invariants.
    pub malformed: usize,
}

/// Read one-sample-per-line JSON. Malformed lines (unparseable or violating
/// the sample invariants) are counted and skipped, never fatal; blank lines
/// are ignored.
pub fn read_samples_jsonl(path: &Path) -> std::io::Result<SampleFile> {
    let reader = BufReader::new(File::open(path)?);
    let mut samples = Vec::new();
    let mut malformed = 0usize;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ChargingSample>(&line) {
            Ok(s) if s.validate().is_ok() => samples.push(s),
            _ => malformed += 1,
        }
    }
    Ok(SampleFile { samples, malformed })
}

/// Write samples as compact JSON lines.
pub fn write_samples_jsonl(path: &Path, samples: &[ChargingSample]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in samples {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Persist a reference model as a versioned, pretty-printed JSON document.
pub fn write_reference_json(path: &Path, reference: &ReferenceModel) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, reference)?;
    w.write_all(b"\n")?;
    w.flush()
}

/// Load a persisted reference model, checking its format version.
pub fn read_reference_json(path: &Path) -> std::io::Result<Result<ReferenceModel, CrowdError>> {
    let reader = BufReader::new(File::open(path)?);
    let reference: ReferenceModel = match serde_json::from_reader(reader) {
        Ok(r) => r,
        Err(e) => return Err(std::io::Error::new(std::io::ErrorKind::InvalidData, e)),
    };
    if reference.format_version != REFERENCE_FORMAT_VERSION {
        return Ok(Err(CrowdError::UnsupportedVersion(reference.format_version)));
    }
    Ok(Ok(reference))
}
