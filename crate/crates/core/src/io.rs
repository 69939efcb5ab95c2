//! Field snapshots (one text header line, then little-endian `f64`), the
//! CSV time series and the JSON run manifest.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const SNAPSHOT_MAGIC: &str = "polymelt-snapshot";

/// Header of a snapshot file.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotHeader {
    pub kind: String,
    pub dims: Vec<usize>,
    /// Free-form `key=value` grid metadata.
    pub meta: Vec<(String, String)>,
}

impl SnapshotHeader {
    pub fn new(kind: &str, dims: &[usize]) -> Self {
        Self { kind: kind.into(), dims: dims.to_vec(), meta: Vec::new() }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn line(&self) -> String {
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        let mut s = format!("{SNAPSHOT_MAGIC} kind={} dims={}", self.kind, dims.join(","));
        for (k, v) in &self.meta {
            s.push_str(&format!(" {k}={v}"));
        }
        s
    }

    fn parse(line: &str) -> std::io::Result<Self> {
        let bad = |m: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string());
        let mut parts = line.split_whitespace();
        if parts.next() != Some(SNAPSHOT_MAGIC) {
            return Err(bad("not a snapshot"));
        }
        let mut kind = None;
        let mut dims = None;
        let mut meta = Vec::new();
        for p in parts {
            let (k, v) = p.split_once('=').ok_or_else(|| bad("malformed header field"))?;
            match k {
                "kind" => kind = Some(v.to_string()),
                "dims" => {
                    dims = Some(
                        v.split(',')
                            .map(|d| d.parse::<usize>().map_err(|_| bad("bad dimension")))
                            .collect::<Result<Vec<_>, _>>()?,
                    )
                }
                _ => meta.push((k.to_string(), v.to_string())),
            }
        }
        Ok(Self { kind: kind.ok_or_else(|| bad("missing kind"))?, dims: dims.ok_or_else(|| bad("missing dims"))?, meta })
    }
}

pub fn write_snapshot(path: &Path, header: &SnapshotHeader, data: impl IntoIterator<Item = f64>) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.line())?;
    let mut count = 0usize;
    for x in data {
        w.write_all(&x.to_le_bytes())?;
        count += 1;
    }
    if count != header.len() {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            format!("snapshot has {count} values, header declares {}", header.len()),
        ));
    }
    w.flush()
}

pub fn read_snapshot(path: &Path) -> std::io::Result<(SnapshotHeader, Vec<f64>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header = SnapshotHeader::parse(line.trim_end())?;
    let mut bytes = Vec::with_capacity(header.len() * 8);
    r.read_to_end(&mut bytes)?;
    if bytes.len() != header.len() * 8 {
        return Err(std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "truncated snapshot"));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((header, data))
}

/// CSV writer with a fixed header and 17 significant digits.
pub struct CsvWriter<W: Write> {
    out: W,
    columns: usize,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W, header: &[&str]) -> std::io::Result<Self> {
        writeln!(out, "{}", header.join(","))?;
        Ok(Self { out, columns: header.len() })
    }

    pub fn row(&mut self, values: &[f64]) -> std::io::Result<()> {
        assert_eq!(values.len(), self.columns, "row width");
        let cells: Vec<String> = values.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(self.out, "{}", cells.join(","))
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
