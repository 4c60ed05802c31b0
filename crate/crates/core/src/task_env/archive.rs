//! Gzip-compressed newline-delimited JSON trace archives.
//!
//! The first line is a header `{"format":"metabayes-traces","version":1,...}`,
//! followed by one [`Trace`] per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use super::Trace;
use crate::{Error, Result};

pub const ARCHIVE_FORMAT: &str = "metabayes-traces";
pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveHeader {
    pub format: String,
    pub version: u32,
    pub task_id: String,
    pub agent: String,
    pub episodes: usize,
}

impl ArchiveHeader {
    pub fn new(task_id: &str, agent: &str, episodes: usize) -> Self {
        Self {
            format: ARCHIVE_FORMAT.into(),
            version: ARCHIVE_VERSION,
            task_id: task_id.into(),
            agent: agent.into(),
            episodes,
        }
    }
}

pub fn write_archive(path: &Path, header: &ArchiveHeader, traces: &[Trace]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    // mtime 0 keeps the gzip bytes a pure function of the content
    let gz = flate2::GzBuilder::new()
        .mtime(0)
        .write(BufWriter::new(File::create(path)?), Compression::default());
    let mut w: GzEncoder<_> = gz;
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    for t in traces {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    w.finish()?.flush()?;
    Ok(())
}

pub fn read_archive(path: &Path) -> Result<(ArchiveHeader, Vec<Trace>)> {
    let fmt_err = |msg: String| Error::Format {
        path: path.to_path_buf(),
        msg,
    };
    let reader = BufReader::new(GzDecoder::new(File::open(path)?));
    let mut lines = reader.lines();
    let first = lines
        .next()
        .ok_or_else(|| fmt_err("empty archive".into()))??;
    let header: ArchiveHeader = serde_json::from_str(&first).map_err(|e| fmt_err(e.to_string()))?;
    if header.format != ARCHIVE_FORMAT || header.version != ARCHIVE_VERSION {
        return Err(fmt_err(format!(
            "unsupported archive {} v{}",
            header.format, header.version
        )));
    }
    let mut traces = Vec::new();
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        traces.push(serde_json::from_str(&line).map_err(|e| fmt_err(e.to_string()))?);
    }
    Ok((header, traces))
}
