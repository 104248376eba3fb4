//! On-disk embedding files.
//!
//! `EMB1` layout, little-endian:
//!
//! ```text
//! magic "EMB1" | u32 n | u32 d | u8 has_labels
//! n × (u16 id_len, id bytes)
//! if has_labels: n × u8 code
//! n·d × f32, row-major
//! u16 provider_len, provider bytes
//! ```
//!
//! Files ending in `.jsonl` use a line-oriented twin: a header object
//! followed by one `{"id", "label", "x"}` object per row.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::EmbeddedDataset;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"EMB1";
const JSONL_FORMAT: &str = "EMB1-jsonl";

fn is_jsonl(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()) == Some("jsonl")
}

/// Serializes in the format `path`'s extension selects.
pub fn encode_for_path(dataset: &EmbeddedDataset, path: &Path) -> Result<Vec<u8>> {
    if is_jsonl(path) {
        encode_jsonl(dataset)
    } else {
        encode(dataset)
    }
}

pub fn save_embeddings(dataset: &EmbeddedDataset, path: &Path) -> Result<()> {
    let bytes = encode_for_path(dataset, path)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddedDataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    if is_jsonl(path) {
        decode_jsonl(&bytes, &name)
    } else {
        decode(&bytes, &name)
    }
}

fn encode(ds: &EmbeddedDataset) -> Result<Vec<u8>> {
    let n = u32::try_from(ds.len()).map_err(|_| Error::Input("too many rows for EMB1".into()))?;
    let d = u32::try_from(ds.dim()).map_err(|_| Error::Input("dimension too large for EMB1".into()))?;
    let mut out = Vec::with_capacity(13 + ds.len() * (ds.dim() * 4 + 16));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&d.to_le_bytes());
    out.push(ds.labels().is_some() as u8);
    for id in ds.ids() {
        put_str(&mut out, id, "row id")?;
    }
    if let Some(labels) = ds.labels() {
        out.extend_from_slice(labels);
    }
    for v in ds.features().iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    put_str(&mut out, ds.provider_id(), "provider id")?;
    Ok(out)
}

fn put_str(out: &mut Vec<u8>, s: &str, what: &str) -> Result<()> {
    let len = u16::try_from(s.len())
        .map_err(|_| Error::Input(format!("{what} longer than 65535 bytes")))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a str,
}

impl<'a> Reader<'a> {
    fn err(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::format(self.path, offset as u64, message)
    }

    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(self.err(
                self.pos,
                format!("truncated {what}: need {len} byte(s), {} left", self.bytes.len() - self.pos),
            )),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u16(what)? as usize;
        let at = self.pos;
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec()).map_err(|_| self.err(at, format!("{what} is not UTF-8")))
    }
}

fn decode(bytes: &[u8], path: &str) -> Result<EmbeddedDataset> {
    let mut r = Reader { bytes, pos: 0, path };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(r.err(0, format!("bad magic {magic:02X?}, expected {MAGIC:02X?}")));
    }
    let n = r.u32("row count")? as usize;
    let d = r.u32("dimension")? as usize;
    let has_labels = match r.u8("label flag")? {
        0 => false,
        1 => true,
        other => return Err(r.err(12, format!("label flag must be 0 or 1, got {other}"))),
    };
    let mut ids = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        ids.push(r.string("row id")?);
    }
    let labels = if has_labels {
        Some(r.take(n, "labels")?.to_vec())
    } else {
        None
    };
    let float_bytes = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| r.err(4, "n·d overflows"))?;
    let payload_at = r.pos;
    let remaining = bytes.len() - payload_at;
    if remaining < float_bytes {
        return Err(r.err(
            payload_at,
            format!("n·d = {n}·{d} needs {float_bytes} payload bytes, only {remaining} left"),
        ));
    }
    let payload = r.take(float_bytes, "payload")?;
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let provider = r.string("provider id")?;
    if r.pos != bytes.len() {
        return Err(r.err(r.pos, format!("{} trailing byte(s)", bytes.len() - r.pos)));
    }
    if d == 0 {
        return Err(r.err(8, "dimension must be positive"));
    }
    if let Some(labels) = &labels {
        if let Some(i) = labels.iter().position(|&c| c > 2) {
            return Err(r.err(payload_at - n + i, format!("label code {} out of range", labels[i])));
        }
    }
    let features = Array2::from_shape_vec((n, d), values).expect("length checked");
    EmbeddedDataset::new(ids, features, labels, provider)
}

#[derive(Serialize, Deserialize)]
struct JsonlHeader {
    format: String,
    provider_id: String,
    dim: usize,
    rows: usize,
}

#[derive(Serialize, Deserialize)]
struct JsonlRow {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<u8>,
    x: Vec<f64>,
}

fn push_json<T: Serialize>(out: &mut Vec<u8>, value: &T) {
    serde_json::to_writer(&mut *out, value).expect("plain data serializes");
    out.push(b'\n');
}

fn encode_jsonl(ds: &EmbeddedDataset) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let header = JsonlHeader {
        format: JSONL_FORMAT.into(),
        provider_id: ds.provider_id().into(),
        dim: ds.dim(),
        rows: ds.len(),
    };
    push_json(&mut out, &header);
    for i in 0..ds.len() {
        let row = JsonlRow {
            id: ds.ids()[i].clone(),
            label: ds.labels().map(|l| l[i]),
            x: ds.row(i).iter().map(|&v| v as f32 as f64).collect(),
        };
        push_json(&mut out, &row);
    }
    Ok(out)
}

fn decode_jsonl(bytes: &[u8], path: &str) -> Result<EmbeddedDataset> {
    let mut lines = BufReader::new(bytes).lines().enumerate();
    let line_err = |i: usize, m: String| Error::format(path, i as u64 + 1, m);
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::format(path, 0, "empty embedding file"))?;
    let first = first.map_err(|e| line_err(0, e.to_string()))?;
    let header: JsonlHeader =
        serde_json::from_str(&first).map_err(|e| line_err(0, e.to_string()))?;
    if header.format != JSONL_FORMAT {
        return Err(line_err(0, format!("unknown format `{}`", header.format)));
    }
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| line_err(i, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonlRow = serde_json::from_str(&line).map_err(|e| line_err(i, e.to_string()))?;
        if row.x.len() != header.dim {
            return Err(line_err(i, format!("row has {} values, expected {}", row.x.len(), header.dim)));
        }
        ids.push(row.id);
        labels.push(row.label);
        values.extend(row.x);
    }
    if ids.len() != header.rows {
        return Err(Error::format(path, 0, format!("header says {} rows, found {}", header.rows, ids.len())));
    }
    let labels = if labels.iter().all(Option::is_some) && !labels.is_empty() {
        Some(labels.into_iter().map(Option::unwrap).collect())
    } else if labels.iter().all(Option::is_none) {
        None
    } else {
        return Err(Error::format(path, 0, "labels present on some rows only"));
    };
    let features = Array2::from_shape_vec((ids.len(), header.dim), values).expect("row widths checked");
    EmbeddedDataset::new(ids, features, labels, header.provider_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn hand_encoded_minimal_file() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&[0x45, 0x4D, 0x42, 0x31]);
        bytes.extend_from_slice(&[1, 0, 0, 0]); // n = 1
        bytes.extend_from_slice(&[2, 0, 0, 0]); // d = 2
        bytes.push(0); // no labels
        bytes.extend_from_slice(&[1, 0, b'a']);
        bytes.extend_from_slice(&[0x00, 0x00, 0x00, 0x3F]); // 0.5
        bytes.extend_from_slice(&[0x00, 0x00, 0x80, 0xBE]); // -0.25
        bytes.extend_from_slice(&[1, 0, b'p']);
        let ds = decode(&bytes, "mem").unwrap();
        assert_eq!(ds.features(), &array![[0.5, -0.25]]);
        assert_eq!(ds.ids(), &["a".to_string()]);
        assert_eq!(ds.provider_id(), "p");
        assert_eq!(encode(&ds).unwrap(), bytes);
    }

    #[test]
    fn bad_magic() {
        let err = decode(b"XXX1\0\0\0\0", "f").unwrap_err();
        assert!(matches!(err, Error::Format { offset: 0, .. }), "{err}");
    }

    #[test]
    fn truncated_payload_names_offset() {
        let ds = EmbeddedDataset::new(vec!["a".into()], array![[1.0, 2.0]], Some(vec![1]), "p").unwrap();
        let bytes = encode(&ds).unwrap();
        // header 13 + id 3 + label 1 = 17: payload starts there
        let cut = &bytes[..20];
        match decode(cut, "f").unwrap_err() {
            Error::Format { offset, message, .. } => {
                assert_eq!(offset, 17);
                assert!(message.contains("n·d"), "{message}");
            }
            e => panic!("{e}"),
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(decode(&extra, "f"), Err(Error::Format { .. })));
    }

    #[test]
    fn jsonl_twin_round_trips() {
        let ds = EmbeddedDataset::new(
            vec!["a".into(), "b".into()],
            array![[0.1f32 as f64, 2.0], [-3.5, 1e-7f32 as f64]],
            Some(vec![0, 2]),
            "sbert",
        )
        .unwrap();
        let bytes = encode_jsonl(&ds).unwrap();
        assert_eq!(decode_jsonl(&bytes, "f").unwrap(), ds);
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(
            n in 0usize..8,
            d in 1usize..6,
            labelled in any::<bool>(),
            seed in any::<u64>(),
        ) {
            use rand::Rng;
            let mut rng = crate::seed::rng(seed);
            let ids = (0..n).map(|i| format!("id-{i}-{}", rng.gen::<u16>())).collect();
            let x = Array2::from_shape_fn((n, d), |_| rng.gen_range(-10.0f32..10.0) as f64);
            let labels = labelled.then(|| (0..n).map(|_| rng.gen_range(0u8..3)).collect());
            let ds = EmbeddedDataset::new(ids, x, labels, "pseudo").unwrap();
            prop_assert_eq!(decode(&encode(&ds).unwrap(), "f").unwrap(), ds);
        }
    }
}
