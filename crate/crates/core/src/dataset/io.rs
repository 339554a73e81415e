//! Dataset files.
//!
//! Binary layout (all little-endian):
//!
//! ```text
//! magic "PONDS1" | version u16 | kind u8 | num_classes u8 | records u64
//! values_len u32 | seed u64 | rejected u64 | config digest [32]
//! producer version [16] (ASCII, zero padded)
//! records...
//! ```
//!
//! Network record: `split u8 | label u8 | pnr f64 | values f64×L`.
//! Window record: `split u8 | class u8 | mask u8 | pnr f64 | start u64 |
//! positions f64×2 | levels f64×2 | values f64×L`.
//! Split code 255 marks an unsplit dataset.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::dataset::{Dataset, EventClass, NetworkSample, Record, SplitTag, WindowSample};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"PONDS1";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 6 + 2 + 1 + 1 + 8 + 4 + 8 + 8 + 32 + PRODUCER_LEN;
const PRODUCER_LEN: usize = 16;
const UNSPLIT: u8 = 255;

/// Fixed-size binary and CSV encoding of a record type.
pub trait Codec: Record + Sized {
    fn record_len(values_len: usize) -> usize;
    fn encode(&self, split: u8, out: &mut Vec<u8>);
    fn decode(bytes: &[u8], values_len: usize) -> Result<(Self, u8)>;
    fn csv_header(values_len: usize) -> Vec<String>;
    fn csv_row(&self) -> Vec<String>;
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let s = self.bytes.get(self.pos..end).ok_or_else(|| Error::format("dataset", "truncated file"))?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

fn put_f64s(out: &mut Vec<u8>, vals: &[f64]) {
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.9}")
}

impl Codec for NetworkSample {
    fn record_len(values_len: usize) -> usize {
        1 + 1 + 8 + 8 * values_len
    }

    fn encode(&self, split: u8, out: &mut Vec<u8>) {
        out.push(split);
        out.push(self.label as u8);
        out.extend_from_slice(&self.pnr_db.to_le_bytes());
        put_f64s(out, &self.values);
    }

    fn decode(bytes: &[u8], values_len: usize) -> Result<(Self, u8)> {
        let mut r = Reader { bytes, pos: 0 };
        let split = r.u8()?;
        let label = r.u8()? as usize;
        let pnr_db = r.f64()?;
        let values = r.f64s(values_len)?;
        Ok((NetworkSample { values, label, pnr_db }, split))
    }

    fn csv_header(values_len: usize) -> Vec<String> {
        let mut h: Vec<String> = (0..values_len).map(|i| format!("v{i}")).collect();
        h.extend(["label", "pnr_db"].map(String::from));
        h
    }

    fn csv_row(&self) -> Vec<String> {
        let mut row: Vec<String> = self.values.iter().map(|&v| fmt(v)).collect();
        row.push(self.label.to_string());
        row.push(fmt(self.pnr_db));
        row
    }
}

impl Codec for WindowSample {
    fn record_len(values_len: usize) -> usize {
        3 + 8 + 8 + 32 + 8 * values_len
    }

    fn encode(&self, split: u8, out: &mut Vec<u8>) {
        out.push(split);
        out.push(self.event_class.index() as u8);
        out.push(self.mask[0] as u8 | (self.mask[1] as u8) << 1);
        out.extend_from_slice(&self.pnr_db.to_le_bytes());
        out.extend_from_slice(&(self.start as u64).to_le_bytes());
        put_f64s(out, &self.positions);
        put_f64s(out, &self.levels);
        put_f64s(out, &self.values);
    }

    fn decode(bytes: &[u8], values_len: usize) -> Result<(Self, u8)> {
        let mut r = Reader { bytes, pos: 0 };
        let split = r.u8()?;
        let event_class = EventClass::from_index(r.u8()? as usize)?;
        let m = r.u8()?;
        let pnr_db = r.f64()?;
        let start = r.u64()? as usize;
        let positions = [r.f64()?, r.f64()?];
        let levels = [r.f64()?, r.f64()?];
        let values = r.f64s(values_len)?;
        let w = WindowSample {
            values,
            event_class,
            positions,
            levels,
            mask: [m & 1 != 0, m & 2 != 0],
            pnr_db,
            start,
        };
        if w.reflection_count() != event_class.reflection_count() {
            return Err(Error::format("dataset", format!("mask {m:#b} inconsistent with {event_class}")));
        }
        Ok((w, split))
    }

    fn csv_header(values_len: usize) -> Vec<String> {
        let mut h: Vec<String> = (0..values_len).map(|i| format!("v{i}")).collect();
        h.extend(
            ["event_class", "position_1", "position_2", "level_1", "level_2", "mask_1", "mask_2", "pnr_db", "start"]
                .map(String::from),
        );
        h
    }

    fn csv_row(&self) -> Vec<String> {
        let mut row: Vec<String> = self.values.iter().map(|&v| fmt(v)).collect();
        row.push(self.event_class.index().to_string());
        for k in 0..2 {
            row.push(if self.mask[k] { fmt(self.positions[k]) } else { String::new() });
        }
        for k in 0..2 {
            row.push(if self.mask[k] { fmt(self.levels[k]) } else { String::new() });
        }
        row.extend(self.mask.iter().map(|&m| (m as u8).to_string()));
        row.push(fmt(self.pnr_db));
        row.push(self.start.to_string());
        row
    }
}

fn values_len<R: Record>(ds: &Dataset<R>) -> Result<usize> {
    let n = ds.records.first().map_or(0, |r| r.values().len());
    if ds.records.iter().any(|r| r.values().len() != n) {
        return Err(Error::Dataset("records of unequal length cannot be stored".into()));
    }
    Ok(n)
}

pub fn encode_dataset<R: Codec>(ds: &Dataset<R>) -> Result<Vec<u8>> {
    let n = values_len(ds)?;
    let mut out = Vec::with_capacity(HEADER_LEN + ds.len() * R::record_len(n));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(R::KIND);
    out.push(u8::try_from(ds.num_classes).map_err(|_| Error::Dataset("too many classes".into()))?);
    out.extend_from_slice(&(ds.len() as u64).to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&ds.seed.to_le_bytes());
    out.extend_from_slice(&ds.rejected.to_le_bytes());
    out.extend_from_slice(&ds.config_digest);
    let mut producer = [0u8; PRODUCER_LEN];
    let v = crate::VERSION.as_bytes();
    producer[..v.len().min(PRODUCER_LEN)].copy_from_slice(&v[..v.len().min(PRODUCER_LEN)]);
    out.extend_from_slice(&producer);
    let split = ds.is_split();
    for (i, r) in ds.records.iter().enumerate() {
        r.encode(if split { ds.splits[i].code() } else { UNSPLIT }, &mut out);
    }
    Ok(out)
}

/// Version of the tool that wrote an encoded dataset.
pub fn producer_version(bytes: &[u8]) -> Result<String> {
    peek_kind(bytes)?;
    let raw = &bytes[HEADER_LEN - PRODUCER_LEN..HEADER_LEN];
    let end = raw.iter().position(|&b| b == 0).unwrap_or(PRODUCER_LEN);
    String::from_utf8(raw[..end].to_vec()).map_err(|_| Error::format("dataset", "producer version is not UTF-8"))
}

/// Record kind byte of an encoded dataset.
pub fn peek_kind(bytes: &[u8]) -> Result<u8> {
    if bytes.len() < HEADER_LEN || &bytes[..6] != MAGIC {
        return Err(Error::format("dataset", "missing PONDS1 header"));
    }
    Ok(bytes[8])
}

pub fn decode_dataset<R: Codec>(bytes: &[u8]) -> Result<Dataset<R>> {
    let kind = peek_kind(bytes)?;
    let mut r = Reader { bytes, pos: 6 };
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::format("dataset", format!("unsupported version {version}")));
    }
    r.u8()?;
    if kind != R::KIND {
        return Err(Error::format("dataset", format!("file holds kind {kind}, expected {} ({})", R::KIND, R::KIND_NAME)));
    }
    let num_classes = r.u8()? as usize;
    let count = r.u64()? as usize;
    let n = r.u32()? as usize;
    let seed = r.u64()?;
    let rejected = r.u64()?;
    let config_digest: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
    r.take(PRODUCER_LEN)?;
    let rec_len = R::record_len(n);
    if bytes.len() != HEADER_LEN + count * rec_len {
        return Err(Error::format("dataset", format!("{} bytes for {count} records", bytes.len())));
    }
    let mut records = Vec::with_capacity(count);
    let mut codes = Vec::with_capacity(count);
    for chunk in bytes[HEADER_LEN..].chunks(rec_len) {
        let (rec, code) = R::decode(chunk, n)?;
        if rec.class() >= num_classes {
            return Err(Error::format("dataset", format!("class {} of {num_classes}", rec.class())));
        }
        records.push(rec);
        codes.push(code);
    }
    let splits = if codes.iter().all(|&c| c == UNSPLIT) {
        Vec::new()
    } else {
        codes.into_iter().map(SplitTag::from_code).collect::<Result<_>>()?
    };
    Ok(Dataset { records, splits, num_classes, seed, config_digest, rejected })
}

pub fn write_dataset<R: Codec>(ds: &Dataset<R>, path: &Path) -> Result<()> {
    fs::write(path, encode_dataset(ds)?)?;
    Ok(())
}

pub fn read_dataset<R: Codec>(path: &Path) -> Result<Dataset<R>> {
    decode_dataset(&fs::read(path)?)
}

/// One row per record: values, labels, then the split.
pub fn write_csv<R: Codec, W: Write>(ds: &Dataset<R>, out: W) -> Result<()> {
    let n = values_len(ds)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = R::csv_header(n);
    header.push("split".into());
    w.write_record(&header)?;
    for (i, r) in ds.records.iter().enumerate() {
        let mut row = r.csv_row();
        row.push(ds.splits.get(i).map_or("", |s| s.name()).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(class: EventClass, start: usize) -> WindowSample {
        let k = class.reflection_count();
        WindowSample {
            values: vec![0.1, 0.7, -0.02],
            event_class: class,
            positions: [0.4, if k == 2 { 0.8 } else { 0.0 }],
            levels: [0.9, if k == 2 { 0.6 } else { 0.0 }],
            mask: [k >= 1, k == 2],
            pnr_db: 17.5,
            start,
        }
    }

    #[test]
    fn window_round_trip() {
        let recs = EventClass::ALL.iter().enumerate().map(|(i, &c)| window(c, 4897 + i)).collect();
        let mut ds = Dataset::new(recs, 7, 11, [7; 32]);
        ds.rejected = 3;
        let bytes = encode_dataset(&ds).unwrap();
        assert_eq!(&bytes[..6], b"PONDS1");
        let back: Dataset<WindowSample> = decode_dataset(&bytes).unwrap();
        assert_eq!(back, ds);
        assert_eq!(encode_dataset(&back).unwrap(), bytes);
        assert!(decode_dataset::<NetworkSample>(&bytes).is_err());
        assert!(decode_dataset::<WindowSample>(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn network_round_trip_with_splits() {
        let recs: Vec<NetworkSample> =
            (0..9).map(|k| NetworkSample { values: vec![k as f64 / 9.0; 4], label: k % 3, pnr_db: 5.0 + k as f64 }).collect();
        let ds = crate::dataset::split_dataset(Dataset::new(recs, 3, 1, [0; 32]), Default::default(), 5).unwrap();
        let bytes = encode_dataset(&ds).unwrap();
        let back: Dataset<NetworkSample> = decode_dataset(&bytes).unwrap();
        assert_eq!(back, ds);
        assert_eq!(producer_version(&bytes).unwrap(), crate::VERSION);
        let mut csv_out = Vec::new();
        write_csv(&ds, &mut csv_out).unwrap();
        let text = String::from_utf8(csv_out).unwrap();
        assert_eq!(text.lines().count(), 10);
        assert!(text.starts_with("v0,v1,v2,v3,label,pnr_db,split"));
    }
}
