//! Line-oriented text formats shared by the pipeline stages.
//!
//! All text readers skip blank lines and lines starting with `#`, so every
//! output may carry a provenance header.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Non-comment, non-blank lines with their 1-based line numbers.
pub fn data_lines(reader: impl BufRead) -> impl Iterator<Item = Result<(usize, String)>> {
    reader.lines().enumerate().filter_map(|(i, line)| match line {
        Err(e) => Some(Err(Error::Io(e))),
        Ok(l) => {
            let t = l.trim_end_matches('\r');
            if t.trim().is_empty() || t.starts_with('#') {
                None
            } else {
                Some(Ok((i + 1, t.to_string())))
            }
        }
    })
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// `id<TAB>smiles` rows.
pub fn read_molecules_tsv(path: &Path) -> Result<Vec<(String, String)>> {
    parse_molecules_tsv(open(path)?, path)
}

pub fn parse_molecules_tsv(reader: impl BufRead, path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for line in data_lines(reader) {
        let (n, line) = line?;
        let mut cols = line.split('\t');
        match (cols.next(), cols.next()) {
            (Some(id), Some(smiles)) if !id.is_empty() && !smiles.is_empty() => {
                out.push((id.to_string(), smiles.trim().to_string()))
            }
            _ => return Err(Error::parse(path, n, "expected id<TAB>smiles")),
        }
    }
    Ok(out)
}

/// `id<TAB>value` rows (score files, external screening scores).
pub fn read_scores_tsv(path: &Path) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for line in data_lines(open(path)?) {
        let (n, line) = line?;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 2 {
            return Err(Error::parse(path, n, "expected id<TAB>score"));
        }
        let v: f64 = cols[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, n, format!("not a number: {:?}", cols[1])))?;
        out.push((cols[0].to_string(), v));
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    parse_jsonl(open(path)?, path)
}

pub fn parse_jsonl<T: DeserializeOwned>(reader: impl BufRead, path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for line in data_lines(reader) {
        let (n, line) = line?;
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(path, n, e.to_string()))?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(mut w: impl Write, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub(crate) fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_f32(r: &mut impl Read) -> Result<f32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(f32::from_le_bytes(b))
}

pub(crate) fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub(crate) fn read_string(r: &mut impl Read, kind: &'static str) -> Result<String> {
    let len = read_u32(r)? as usize;
    if len > 1 << 24 {
        return Err(Error::Format {
            kind,
            msg: format!("string length {len} is implausible"),
        });
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::Format {
        kind,
        msg: "string is not UTF-8".into(),
    })
}

pub(crate) fn write_string(w: &mut impl Write, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

pub(crate) fn expect_magic(r: &mut impl Read, magic: &[u8; 4], kind: &'static str) -> Result<()> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| Error::Format {
        kind,
        msg: "file too short for header".into(),
    })?;
    if &b != magic {
        return Err(Error::Format {
            kind,
            msg: format!("bad magic {:?}", String::from_utf8_lossy(&b)),
        });
    }
    Ok(())
}
