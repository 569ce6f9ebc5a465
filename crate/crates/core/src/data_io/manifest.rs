//! Dataset manifests: one JSON object per line, fields in the order of
//! [`ManifestRecord`]. Unknown fields are rejected.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::artifacts::{ArtifactClass, ArtifactParams, SeverityRecord};
use crate::error::{Error, Result};

/// Longest accepted manifest line, in bytes.
pub const MAX_LINE: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Unassigned,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub id: u64,
    /// Path of the sample image, relative to the manifest's directory.
    pub image: String,
    /// Clean image or phantom the sample was derived from.
    pub source: String,
    pub sequence: usize,
    pub frame: usize,
    pub class_id: ArtifactClass,
    pub params: Option<ArtifactParams>,
    pub rng_seed: u64,
    pub domain: Option<u8>,
    pub split: Split,
}

impl ManifestRecord {
    pub fn severity(&self) -> SeverityRecord {
        SeverityRecord { class_id: self.class_id, params: self.params, rng_seed: self.rng_seed }
    }

    pub fn validate(&self) -> Result<()> {
        self.severity().validate()
    }
}

/// Streaming reader: holds one line at a time.
pub struct ManifestReader<R> {
    input: R,
    line: usize,
    buf: String,
}

impl<R: BufRead> ManifestReader<R> {
    pub fn new(input: R) -> Self {
        Self { input, line: 0, buf: String::new() }
    }

    /// Capacity of the internal line buffer (for memory checks).
    pub fn buffer_capacity(&self) -> usize {
        self.buf.capacity()
    }
}

impl<R: BufRead> Iterator for ManifestReader<R> {
    type Item = Result<ManifestRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            self.line += 1;
            let line = self.line;
            let mut limited = std::io::Read::take(&mut self.input, MAX_LINE as u64 + 1);
            match limited.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(n) if n > MAX_LINE => {
                    return Some(Err(Error::Manifest { line, msg: format!("line longer than {MAX_LINE} bytes") }))
                }
                Ok(_) => {}
                Err(e) => return Some(Err(Error::Manifest { line, msg: e.to_string() })),
            }
            let text = self.buf.trim();
            if text.is_empty() {
                continue;
            }
            let parsed = serde_json::from_str::<ManifestRecord>(text)
                .map_err(|e| Error::Manifest { line, msg: e.to_string() })
                .and_then(|r| r.validate().map(|_| r).map_err(|e| Error::Manifest { line, msg: e.to_string() }));
            if self.buf.capacity() > 1 << 16 {
                self.buf = String::new();
            }
            return Some(parsed);
        }
    }
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    ManifestReader::new(BufReader::new(File::open(path)?)).collect()
}

pub fn write_manifest_to<W: Write>(out: W, records: &[ManifestRecord]) -> Result<()> {
    let mut out = BufWriter::new(out);
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::Dataset(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_manifest(path: &Path, records: &[ManifestRecord]) -> Result<()> {
    let mut bytes = Vec::new();
    write_manifest_to(&mut bytes, records)?;
    super::image_io::write_atomic(path, &bytes)
}
