//! Binary model snapshots: a magic line, a one-line JSON header, then a
//! bincode payload whose length and sha256 the header records.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Fitted;
use crate::sampling::sha256_hex;
use crate::types::TimeWindow;

pub const MAGIC: &str = "GHSIM-SNAPSHOT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub format_version: u32,
    pub model: String,
    pub window: TimeWindow,
    pub config_hash: String,
    pub tool_version: String,
    pub payload_len: u64,
    pub payload_sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    pub fitted: Fitted,
}

pub fn write_snapshot<W: Write>(mut w: W, model: &Fitted, window: TimeWindow, config_hash: &str) -> Result<SnapshotHeader> {
    let payload = bincode::serialize(model).map_err(|e| Error::Snapshot(e.to_string()))?;
    let header = SnapshotHeader {
        format_version: FORMAT_VERSION,
        model: model.kind().to_string(),
        window,
        config_hash: config_hash.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        payload_len: payload.len() as u64,
        payload_sha256: sha256_hex(&payload),
    };
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "{}", serde_json::to_string(&header)?)?;
    w.write_all(&payload)?;
    w.flush()?;
    Ok(header)
}

pub fn save_snapshot(path: &Path, model: &Fitted, window: TimeWindow, config_hash: &str) -> Result<SnapshotHeader> {
    write_snapshot(BufWriter::new(File::create(path)?), model, window, config_hash)
}

fn read_line<R: BufRead>(r: &mut R) -> Result<String> {
    let mut s = String::new();
    r.read_line(&mut s)?;
    Ok(s.trim_end_matches('\n').to_string())
}

/// Reads only the header.
pub fn read_header<R: BufRead>(r: &mut R) -> Result<SnapshotHeader> {
    if read_line(r)? != MAGIC {
        return Err(Error::Snapshot("not a snapshot file".into()));
    }
    let header: SnapshotHeader = serde_json::from_str(&read_line(r)?)?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Snapshot(format!(
            "format version {} is not supported (expected {FORMAT_VERSION})",
            header.format_version
        )));
    }
    Ok(header)
}

pub fn read_snapshot<R: Read>(r: R) -> Result<Snapshot> {
    let mut r = BufReader::new(r);
    let header = read_header(&mut r)?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() as u64 != header.payload_len || sha256_hex(&payload) != header.payload_sha256 {
        return Err(Error::Snapshot("payload does not match its header".into()));
    }
    let fitted: Fitted = bincode::deserialize(&payload).map_err(|e| Error::Snapshot(e.to_string()))?;
    if fitted.kind().to_string() != header.model {
        return Err(Error::Snapshot(format!("header names {} but payload holds {}", header.model, fitted.kind())));
    }
    Ok(Snapshot { header, fitted })
}

pub fn load_snapshot(path: &Path) -> Result<Snapshot> {
    read_snapshot(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{fit_model, FitConfig};
    use crate::models::ModelKind;
    use crate::types::{Event, EventLog, EventType, DAY};

    fn null_model() -> Fitted {
        let events = EventLog::from_events(vec![Event::new(5, EventType::Push, "u", "r")]);
        fit_model(ModelKind::Null, &events, TimeWindow::new(DAY, 2 * DAY), None, &FitConfig::default()).unwrap()
    }

    #[test]
    fn round_trip() {
        let mut buf = Vec::new();
        let h = write_snapshot(&mut buf, &null_model(), TimeWindow::new(0, 10), "abc").unwrap();
        let s = read_snapshot(&buf[..]).unwrap();
        assert_eq!(s.header, h);
        assert_eq!(s.fitted, null_model());
    }

    #[test]
    fn version_mismatch_is_refused() {
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &null_model(), TimeWindow::new(0, 10), "abc").unwrap();
        let text = String::from_utf8_lossy(&buf).replace("\"format_version\":1", "\"format_version\":2");
        let err = read_snapshot(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("format version 2"), "{err}");
    }

    #[test]
    fn corrupt_payload_is_refused() {
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &null_model(), TimeWindow::new(0, 10), "abc").unwrap();
        let n = buf.len();
        buf[n - 1] ^= 0xff;
        assert!(read_snapshot(&buf[..]).is_err());
        assert!(read_snapshot(&b"hello\n"[..]).is_err());
    }
}
