//! Binary dataset format (little-endian):
//! `"VSNS" | version u16 | header | condition table | samples`.

use std::path::Path;

use super::{ConditionSpec, Dataset, DatasetHeader, FlameFrame, Label, Sample, Split};
use crate::error::{Error, Result};
use crate::util::write_atomic;

pub const MAGIC: &[u8; 4] = b"VSNS";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 * 9 + 8 + 32;
const CONDITION_LEN: usize = 4 + 4 * 3 + 1 + 1 + 8;

/// File size implied by the counts and dimensions in a header.
pub fn predicted_size(h: &DatasetHeader, n_conditions: usize, n_samples: usize) -> u64 {
    let sample = 4 + 4 + 1 + 4 * (h.channels * h.window_len + h.frame_height * h.frame_width);
    (HEADER_LEN + n_conditions * CONDITION_LEN) as u64 + (n_samples * sample) as u64
}

pub fn encode_dataset(ds: &Dataset) -> Vec<u8> {
    let h = &ds.header;
    let mut out = Vec::with_capacity(predicted_size(h, ds.conditions.len(), ds.samples.len()) as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [
        ds.conditions.len(),
        ds.samples.len(),
        h.window_len,
        h.stride,
        h.channels,
        h.frame_height,
        h.frame_width,
        h.pressure_rate as usize,
        h.frame_rate as usize,
    ] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&h.master_seed.to_le_bytes());
    out.extend_from_slice(&h.provenance);
    for c in &ds.conditions {
        out.extend_from_slice(&c.id.to_le_bytes());
        for v in [c.premixing_length, c.ffr, c.afr] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(c.label.as_u8());
        out.push(c.split.as_u8());
        out.extend_from_slice(&c.seed.to_le_bytes());
    }
    for s in &ds.samples {
        out.extend_from_slice(&s.condition_id.to_le_bytes());
        out.extend_from_slice(&s.frame_index.to_le_bytes());
        out.push(s.label.as_u8());
        for v in s.window.iter().chain(&s.frame.pixels) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.bytes.len() as u64,
                detail: format!("truncated while reading {what}: need {n} bytes at offset {}", self.pos),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        Ok(self.take(4 * n, what)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn bad(&self, back: usize, detail: String) -> Error {
        Error::Format { offset: (self.pos - back) as u64, detail }
    }
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Format { offset: 0, detail: "bad magic, expected VSNS".into() });
    }
    let version = u16::from_le_bytes(r.take(2, "version")?.try_into().unwrap());
    if version != VERSION {
        return Err(r.bad(2, format!("unsupported version {version}")));
    }
    let mut dims = [0usize; 9];
    for d in dims.iter_mut() {
        *d = r.u32("header")? as usize;
    }
    let [n_cond, n_samples, window_len, stride, channels, frame_height, frame_width, pressure_rate, frame_rate] = dims;
    let master_seed = r.u64("header")?;
    let provenance: [u8; 32] = r.take(32, "header")?.try_into().unwrap();
    let header = DatasetHeader {
        window_len,
        stride,
        channels,
        frame_height,
        frame_width,
        pressure_rate: pressure_rate as u32,
        frame_rate: frame_rate as u32,
        master_seed,
        provenance,
    };
    let expected = predicted_size(&header, n_cond, n_samples);
    if (bytes.len() as u64) < expected {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            detail: format!("truncated: header predicts {expected} bytes"),
        });
    }
    if bytes.len() as u64 != expected {
        return Err(Error::Format {
            offset: expected,
            detail: format!("{} trailing bytes", bytes.len() as u64 - expected),
        });
    }
    let mut conditions = Vec::with_capacity(n_cond);
    for _ in 0..n_cond {
        let id = r.u32("condition")?;
        let premixing_length = r.f32("condition")?;
        let ffr = r.f32("condition")?;
        let afr = r.f32("condition")?;
        let label = Label::from_u8(r.u8("condition")?).ok_or_else(|| r.bad(1, "bad label code".into()))?;
        let split = Split::from_u8(r.u8("condition")?).ok_or_else(|| r.bad(1, "bad split code".into()))?;
        let seed = r.u64("condition")?;
        conditions.push(ConditionSpec { id, premixing_length, ffr, afr, label, split, seed });
    }
    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let condition_id = r.u32("sample")?;
        let frame_index = r.u32("sample")?;
        let label = Label::from_u8(r.u8("sample")?).ok_or_else(|| r.bad(1, "bad label code".into()))?;
        let window = r.f32s(channels * window_len, "window")?;
        let pixels = r.f32s(frame_height * frame_width, "frame")?;
        samples.push(Sample { condition_id, frame_index, label, window, frame: FlameFrame { pixels } });
    }
    Ok(Dataset { header, conditions, samples })
}

pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    ds.validate()?;
    write_atomic(path, &encode_dataset(ds))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_dataset(&bytes)
}

/// Binary PGM (P5, 8-bit).
pub fn frame_to_pgm(frame: &FlameFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", FlameFrame::WIDTH, FlameFrame::HEIGHT).into_bytes();
    out.extend(frame.pixels.iter().map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

pub fn pgm_to_frame(bytes: &[u8]) -> Result<FlameFrame> {
    let header = format!("P5\n{} {}\n255\n", FlameFrame::WIDTH, FlameFrame::HEIGHT);
    let n = FlameFrame::WIDTH * FlameFrame::HEIGHT;
    if !bytes.starts_with(header.as_bytes()) {
        return Err(Error::Format { offset: 0, detail: "not a 64x64 8-bit P5 image".into() });
    }
    let body = &bytes[header.len()..];
    if body.len() != n {
        return Err(Error::Format { offset: bytes.len() as u64, detail: format!("expected {n} pixel bytes") });
    }
    Ok(FlameFrame { pixels: body.iter().map(|&b| b as f32 / 255.0).collect() })
}
