//! SPEB binary container and the JSON-lines debug format.
//!
//! SPEB layout, little-endian throughout:
//!
//! ```text
//! magic      4 bytes  "SPEB"
//! version    u32      1
//! L          u32      layers per record
//! d          u32      dimension per layer
//! K          u32      number of classes
//! K times:   u16 byte length + UTF-8 class name
//! count      u64      number of records
//! per record:
//!   u16 byte length + UTF-8 id
//!   u32 label index
//!   L*d f32  layer-major
//! ```
//!
//! The JSON-lines format has one object per line. An optional first line
//! `{"class_names": [...], "num_layers": L, "dim": d}` fixes the schema;
//! every other line is `{"id": "...", "label": "<class name>", "layers": [[...], ...]}`.
//! Without the header line the class names are the sorted set of labels seen.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::{EmbeddingDataset, EmbeddingRecord, LabelSchema, StoreError};

pub const SPEB_MAGIC: &[u8; 4] = b"SPEB";
pub const SPEB_VERSION: u32 = 1;

fn is_jsonl(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("jsonl") | Some("ndjson")
    )
}

/// Reads a dataset, choosing the JSON-lines reader for `.jsonl`/`.ndjson`
/// files and the SPEB reader otherwise.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<EmbeddingDataset, StoreError> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if is_jsonl(path) {
        read_jsonl(&bytes)
    } else {
        read_speb(&bytes)
    }
}

/// Writes SPEB, or JSON lines when the extension asks for it.
pub fn write_dataset(dataset: &EmbeddingDataset, path: impl AsRef<Path>) -> Result<(), StoreError> {
    let path = path.as_ref();
    let mut out = BufWriter::new(File::create(path)?);
    if is_jsonl(path) {
        write_jsonl(dataset, &mut out)?;
    } else {
        write_speb(dataset, &mut out)?;
    }
    out.flush()?;
    Ok(())
}

fn short_len(what: &str, len: usize) -> Result<u16, StoreError> {
    u16::try_from(len).map_err(|_| StoreError::Invalid(format!("{what} is {len} bytes, the limit is 65535")))
}

fn u32_field(what: &str, value: usize) -> Result<u32, StoreError> {
    u32::try_from(value).map_err(|_| StoreError::Invalid(format!("{what} {value} does not fit in u32")))
}

pub fn write_speb<W: Write>(dataset: &EmbeddingDataset, out: &mut W) -> Result<(), StoreError> {
    out.write_all(SPEB_MAGIC)?;
    out.write_u32::<LittleEndian>(SPEB_VERSION)?;
    out.write_u32::<LittleEndian>(u32_field("layer count", dataset.num_layers())?)?;
    out.write_u32::<LittleEndian>(u32_field("dimension", dataset.dim())?)?;
    out.write_u32::<LittleEndian>(u32_field("class count", dataset.num_classes())?)?;
    for name in dataset.schema().class_names() {
        out.write_u16::<LittleEndian>(short_len("class name", name.len())?)?;
        out.write_all(name.as_bytes())?;
    }
    out.write_u64::<LittleEndian>(dataset.len() as u64)?;
    let mut floats = Vec::with_capacity(dataset.num_layers() * dataset.dim() * 4);
    for record in dataset.records() {
        out.write_u16::<LittleEndian>(short_len("record id", record.id.len())?)?;
        out.write_all(record.id.as_bytes())?;
        out.write_u32::<LittleEndian>(record.label as u32)?;
        floats.clear();
        for v in record.values() {
            floats.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&floats)?;
    }
    Ok(())
}

/// Byte cursor that reports the offset of every failure.
struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], StoreError> {
        if self.bytes.len() - self.pos < n {
            return Err(StoreError::Truncated {
                offset: self.pos as u64,
                message: format!("needed {n} bytes for {what}, {} remain", self.bytes.len() - self.pos),
            });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u16(&mut self, what: &str) -> Result<u16, StoreError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32, StoreError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, StoreError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &str) -> Result<String, StoreError> {
        let start = self.pos as u64;
        let len = self.u16(what)? as usize;
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| StoreError::Format { offset: start, message: format!("{what} is not valid UTF-8") })
    }
}

pub fn read_speb(bytes: &[u8]) -> Result<EmbeddingDataset, StoreError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let header_error = |offset: usize, message: String| StoreError::Format { offset: offset as u64, message };

    if bytes.len() < 4 || &bytes[..4] != SPEB_MAGIC {
        return Err(header_error(0, "missing SPEB magic".into()));
    }
    cur.pos = 4;
    let version = cur.u32("version")?;
    if version != SPEB_VERSION {
        return Err(header_error(4, format!("unsupported version {version}")));
    }
    let num_layers = cur.u32("layer count")? as usize;
    let dim = cur.u32("dimension")? as usize;
    if num_layers == 0 || dim == 0 {
        return Err(header_error(8, format!("layer count and dimension must be positive (L={num_layers}, d={dim})")));
    }
    let k_offset = cur.pos;
    let num_classes = cur.u32("class count")? as usize;
    if num_classes < 2 {
        return Err(header_error(k_offset, format!("class count must be at least 2, got {num_classes}")));
    }
    let mut names = Vec::with_capacity(num_classes);
    for _ in 0..num_classes {
        names.push(cur.string("class name")?);
    }
    let schema = LabelSchema::new(names).map_err(|e| header_error(k_offset, e.to_string()))?;
    let count = cur.u64("record count")?;

    let floats_per_record = num_layers * dim;
    let remaining = (bytes.len() - cur.pos) as u64;
    // Every record needs at least 2 + 4 + 4*L*d bytes.
    let min_record = 6 + 4 * floats_per_record as u64;
    if count > remaining / min_record {
        return Err(StoreError::Truncated {
            offset: cur.pos as u64,
            message: format!("header declares {count} records but only {remaining} bytes follow"),
        });
    }

    let mut records = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let record_offset = cur.pos as u64;
        let id = cur.string("record id")?;
        let label = cur.u32("label")? as u64;
        if label as usize >= num_classes {
            return Err(StoreError::LabelRange { offset: record_offset, label, num_classes });
        }
        let raw = cur.take(4 * floats_per_record, "layer values")?;
        let values: Vec<f32> = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(StoreError::Dimension {
                offset: record_offset,
                message: format!("component {i} of record {id:?} is not finite"),
            });
        }
        records.push(EmbeddingRecord { id, label: label as usize, values, dim });
    }
    if cur.pos != bytes.len() {
        return Err(header_error(cur.pos, format!("{} trailing bytes after the last record", bytes.len() - cur.pos)));
    }
    let mut dataset = EmbeddingDataset::empty(schema, num_layers, dim)?;
    dataset.records = records;
    Ok(dataset)
}

#[derive(Serialize, Deserialize)]
struct JsonHeader {
    class_names: Vec<String>,
    num_layers: usize,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct JsonRecord {
    id: String,
    label: String,
    layers: Vec<Vec<f32>>,
}

pub fn write_jsonl<W: Write>(dataset: &EmbeddingDataset, out: &mut W) -> Result<(), StoreError> {
    let header = JsonHeader {
        class_names: dataset.schema().class_names().to_vec(),
        num_layers: dataset.num_layers(),
        dim: dataset.dim(),
    };
    serde_json::to_writer(&mut *out, &header).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    for record in dataset.records() {
        let line = JsonRecord {
            id: record.id.clone(),
            label: dataset.schema().class_names()[record.label].clone(),
            layers: record.layers().map(<[f32]>::to_vec).collect(),
        };
        serde_json::to_writer(&mut *out, &line).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(bytes: &[u8]) -> Result<EmbeddingDataset, StoreError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| StoreError::Format { offset: e.valid_up_to() as u64, message: "not valid UTF-8".into() })?;

    let mut header: Option<JsonHeader> = None;
    let mut rows: Vec<(u64, JsonRecord)> = Vec::new();
    let mut offset = 0u64;
    for (line_no, line) in text.split_inclusive('\n').enumerate() {
        let line_offset = offset;
        offset += line.len() as u64;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let parse_error = |e: serde_json::Error| StoreError::Format {
            offset: line_offset,
            message: format!("line {}: {e}", line_no + 1),
        };
        if header.is_none() && rows.is_empty() && trimmed.contains("\"class_names\"") {
            header = Some(serde_json::from_str(trimmed).map_err(parse_error)?);
            continue;
        }
        rows.push((line_offset, serde_json::from_str(trimmed).map_err(parse_error)?));
    }

    let (schema, shape) = match header {
        Some(h) => (LabelSchema::new(h.class_names)?, Some((h.num_layers, h.dim))),
        None => {
            let mut names: Vec<String> = rows.iter().map(|(_, r)| r.label.clone()).collect();
            names.sort();
            names.dedup();
            let schema = LabelSchema::new(names)
                .map_err(|e| StoreError::Format { offset: 0, message: format!("cannot infer label schema: {e}") })?;
            (schema, None)
        }
    };
    let (num_layers, dim) = match (shape, rows.first()) {
        (Some(s), _) => s,
        (None, Some((_, r))) => (r.layers.len(), r.layers.first().map_or(0, Vec::len)),
        (None, None) => return Err(StoreError::Format { offset: 0, message: "no header and no records".into() }),
    };
    let mut dataset = EmbeddingDataset::empty(schema, num_layers, dim)?;
    for (line_offset, row) in rows {
        let label = dataset.schema.index_of(&row.label).ok_or_else(|| StoreError::Format {
            offset: line_offset,
            message: format!("label {:?} is not a declared class", row.label),
        })?;
        if row.layers.len() != num_layers || row.layers.iter().any(|l| l.len() != dim) {
            return Err(StoreError::Dimension {
                offset: line_offset,
                message: format!("record {:?} does not have {num_layers} layers of dimension {dim}", row.id),
            });
        }
        let record = EmbeddingRecord::new(row.id, label, row.layers)
            .map_err(|e| StoreError::Dimension { offset: line_offset, message: e.to_string() })?;
        dataset.records.push(record);
    }
    Ok(dataset)
}
