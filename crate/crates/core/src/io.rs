//! Binary feature file (`ICHF`) and CSV ingestion.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "ICHF" | version u16 = 1 | flags u16 (bit0: labels) | n_samples u64 | n_dims u64
//! id table    n_samples x [u32 byte length | UTF-8 bytes]
//! label table (only when bit0 set), same encoding
//! payload     n_samples x n_dims f32, row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use crate::data::{FeatureMatrix, LabeledDataset};
use crate::error::{IchError, Result};

pub const MAGIC: &[u8; 4] = b"ICHF";
pub const FORMAT_VERSION: u16 = 1;
const FLAG_LABELS: u16 = 1;
/// Fixed-size prefix before the id table.
pub const HEADER_LEN: usize = 24;

pub fn write_feature_file(dataset: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let features = dataset.features();
    // Validate before touching the filesystem.
    for (r, row) in features.rows().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if !v.is_finite() || !(v as f32).is_finite() {
                return Err(IchError::NonFinite { row: r, col: c });
            }
        }
    }
    let file = File::create(path).map_err(|e| IchError::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode(dataset, &mut w).map_err(|e| IchError::io(path, e))?;
    w.flush().map_err(|e| IchError::io(path, e))
}

/// Serializes into any writer; values must already be validated.
pub fn encode<W: Write>(dataset: &LabeledDataset, w: &mut W) -> std::io::Result<()> {
    let features = dataset.features();
    let flags = if dataset.labels().is_some() {
        FLAG_LABELS
    } else {
        0
    };
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&flags.to_le_bytes())?;
    w.write_all(&(features.n_samples() as u64).to_le_bytes())?;
    w.write_all(&(features.n_dims() as u64).to_le_bytes())?;
    write_strings(w, dataset.sample_ids())?;
    if let Some(labels) = dataset.labels() {
        write_strings(w, labels)?;
    }
    for &v in features.values() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

fn write_strings<W: Write>(w: &mut W, items: &[String]) -> std::io::Result<()> {
    for s in items {
        let len = u32::try_from(s.len()).map_err(|_| {
            std::io::Error::new(ErrorKind::InvalidInput, "string longer than u32::MAX")
        })?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(s.as_bytes())?;
    }
    Ok(())
}

pub fn read_feature_file(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| IchError::io(path, e))?;
    decode(&mut BufReader::new(file)).map_err(|e| match e {
        IchError::Io { source, .. } => IchError::io(path, source),
        other => other,
    })
}

pub fn decode<R: Read>(r: &mut R) -> Result<LabeledDataset> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic, "header")?;
    if &magic != MAGIC {
        return Err(IchError::UnrecognizedFormat(format!(
            "bad magic bytes {magic:02x?}"
        )));
    }
    let version = read_u16(r, "header")?;
    if version != FORMAT_VERSION {
        return Err(IchError::UnrecognizedFormat(format!(
            "unsupported format version {version}"
        )));
    }
    let flags = read_u16(r, "header")?;
    let n_samples = usize::try_from(read_u64(r, "header")?)
        .map_err(|_| IchError::InvalidData("n_samples too large".into()))?;
    let n_dims = usize::try_from(read_u64(r, "header")?)
        .map_err(|_| IchError::InvalidData("n_dims too large".into()))?;
    if n_dims == 0 {
        return Err(IchError::InvalidData("n_dims must be at least 1".into()));
    }
    let ids = read_strings(r, n_samples, "id table")?;
    let labels = if flags & FLAG_LABELS != 0 {
        Some(read_strings(r, n_samples, "label table")?)
    } else {
        None
    };
    let total = n_samples
        .checked_mul(n_dims)
        .ok_or_else(|| IchError::InvalidData("payload size overflows".into()))?;
    let mut values = Vec::with_capacity(total.min(1 << 28));
    let mut buf = vec![0u8; 4 * n_dims];
    for row in 0..n_samples {
        read_exact(r, &mut buf, &format!("payload row {row} of {n_samples}"))?;
        values.extend(
            buf.chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64),
        );
    }
    let features = FeatureMatrix::new(n_samples, n_dims, values)?;
    LabeledDataset::new(features, ids, labels)
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == ErrorKind::UnexpectedEof {
            IchError::Truncated(format!("file ends inside {what}"))
        } else {
            IchError::io("<stream>", e)
        }
    })
}

fn read_u16<R: Read>(r: &mut R, what: &str) -> Result<u16> {
    let mut b = [0u8; 2];
    read_exact(r, &mut b, what)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

fn read_strings<R: Read>(r: &mut R, n: usize, what: &str) -> Result<Vec<String>> {
    let mut out = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let len = read_u32(r, what)? as usize;
        let mut bytes = vec![0u8; len];
        read_exact(r, &mut bytes, what)?;
        let s = String::from_utf8(bytes)
            .map_err(|_| IchError::InvalidData(format!("{what} holds invalid UTF-8")))?;
        out.push(s);
    }
    Ok(out)
}

/// Reads a CSV whose header is `id[,label],f0,f1,...`. The label column is
/// recognized by its header name `label`. Blank ids become `sample_{i}`.
pub fn read_csv(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| IchError::io(path, e))?;
    read_csv_from(file)
}

pub fn read_csv_from<R: Read>(reader: R) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let has_labels = headers
        .get(1)
        .is_some_and(|h| h.trim().eq_ignore_ascii_case("label"));
    let first_feature = if has_labels { 2 } else { 1 };
    if headers.len() <= first_feature {
        return Err(IchError::InvalidData(
            "csv needs an id column and at least one feature column".into(),
        ));
    }
    let n_dims = headers.len() - first_feature;
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(IchError::InvalidData(format!(
                "csv row {row} has {} fields, expected {}",
                record.len(),
                headers.len()
            )));
        }
        let id = record[0].trim();
        ids.push(if id.is_empty() {
            format!("sample_{row}")
        } else {
            id.to_string()
        });
        if has_labels {
            labels.push(record[1].trim().to_string());
        }
        for (col, field) in record.iter().skip(first_feature).enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                IchError::InvalidData(format!(
                    "csv row {row} column {col}: {field:?} is not a number"
                ))
            })?;
            values.push(v);
        }
    }
    let features = FeatureMatrix::new(ids.len(), n_dims, values)?;
    LabeledDataset::new(features, ids, has_labels.then_some(labels))
}

/// Dispatches on extension: `.csv` goes through [`read_csv`], anything else
/// is treated as a binary feature file.
pub fn read_any(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => read_csv(path),
        _ => read_feature_file(path),
    }
}
