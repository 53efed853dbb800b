// SPDX-License-Identifier: Apache-2.0

//! `SANDMDL1` model container.
//!
//! ```text
//! magic    8 bytes  "SANDMDL1"
//! version  u32
//! count    u32
//! table    count × (name_len u16, name, offset u64, length u64)
//! payloads concatenated sections; offsets are relative to the payload start
//! trailer  32 bytes SHA-256 of everything above
//! ```
//!
//! A section is a list of records: `tag u8` (0 tensor, 1 text), `name_len u16`,
//! `name`, then either `rows u32, cols u32, rows·cols f64` (row-major, little
//! endian) or `len u32, utf8`. All integers are little endian.

use std::path::Path;

use sha2::{Digest, Sha256};

use sand_core::tensor::Matrix;

use crate::error::CliError;

pub const MAGIC: &[u8; 8] = b"SANDMDL1";
pub const VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Tensor { name: String, value: Matrix },
    Text { name: String, value: String },
}

impl Record {
    pub fn name(&self) -> &str {
        match self {
            Record::Tensor { name, .. } | Record::Text { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Section {
    pub records: Vec<Record>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Container(msg.into())
}

impl Section {
    pub fn push_tensor(&mut self, name: &str, value: &Matrix) {
        self.records.push(Record::Tensor {
            name: name.into(),
            value: value.clone(),
        });
    }

    pub fn push_text(&mut self, name: &str, value: impl Into<String>) {
        self.records.push(Record::Text {
            name: name.into(),
            value: value.into(),
        });
    }

    pub fn tensor(&self, name: &str) -> Result<&Matrix, CliError> {
        self.records
            .iter()
            .find_map(|r| match r {
                Record::Tensor { name: n, value } if n == name => Some(value),
                _ => None,
            })
            .ok_or_else(|| bad(format!("tensor `{name}` not found")))
    }

    pub fn text(&self, name: &str) -> Result<&str, CliError> {
        self.records
            .iter()
            .find_map(|r| match r {
                Record::Text { name: n, value } if n == name => Some(value.as_str()),
                _ => None,
            })
            .ok_or_else(|| bad(format!("text `{name}` not found")))
    }

    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for r in &self.records {
            let name = r.name().as_bytes();
            match r {
                Record::Tensor { value, .. } => {
                    out.push(0);
                    put_name(&mut out, name);
                    out.extend((value.rows() as u32).to_le_bytes());
                    out.extend((value.cols() as u32).to_le_bytes());
                    for x in value.data() {
                        out.extend(x.to_le_bytes());
                    }
                }
                Record::Text { value, .. } => {
                    out.push(1);
                    put_name(&mut out, name);
                    out.extend((value.len() as u32).to_le_bytes());
                    out.extend(value.as_bytes());
                }
            }
        }
        out
    }

    fn decode(bytes: &[u8]) -> Result<Self, CliError> {
        let mut r = Reader { bytes, pos: 0 };
        let mut records = Vec::new();
        while r.pos < bytes.len() {
            let tag = r.take(1)?[0];
            let name = r.name()?;
            match tag {
                0 => {
                    let rows = r.u32()? as usize;
                    let cols = r.u32()? as usize;
                    let n = rows.checked_mul(cols).ok_or_else(|| bad("tensor shape overflows"))?;
                    let raw = r.take(n.checked_mul(8).ok_or_else(|| bad("tensor shape overflows"))?)?;
                    let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
                    let value = Matrix::from_vec(rows, cols, data).map_err(|e| bad(e.to_string()))?;
                    records.push(Record::Tensor { name, value });
                }
                1 => {
                    let len = r.u32()? as usize;
                    let value = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| bad("text record is not UTF-8"))?;
                    records.push(Record::Text { name, value });
                }
                t => return Err(bad(format!("unknown record tag {t}"))),
            }
        }
        Ok(Self { records })
    }
}

fn put_name(out: &mut Vec<u8>, name: &[u8]) {
    out.extend((name.len() as u16).to_le_bytes());
    out.extend(name);
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| bad("unexpected end of data"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, CliError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CliError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn name(&mut self) -> Result<String, CliError> {
        let n = self.u16()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| bad("name is not UTF-8"))
    }
}

/// Named sections kept encoded; each is decoded on request.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Container {
    sections: Vec<(String, Vec<u8>)>,
}

impl Container {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or replaces a section.
    pub fn insert(&mut self, name: &str, section: &Section) {
        let bytes = section.encode();
        match self.sections.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = bytes,
            None => self.sections.push((name.into(), bytes)),
        }
    }

    pub fn names(&self) -> Vec<&str> {
        self.sections.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn has(&self, name: &str) -> bool {
        self.sections.iter().any(|(n, _)| n == name)
    }

    pub fn section(&self, name: &str) -> Result<Section, CliError> {
        let (_, bytes) = self
            .sections
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| bad(format!("section `{name}` not found")))?;
        Section::decode(bytes).map_err(|e| bad(format!("section `{name}`: {e}")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend(MAGIC);
        out.extend(VERSION.to_le_bytes());
        out.extend((self.sections.len() as u32).to_le_bytes());
        let mut offset = 0u64;
        for (name, bytes) in &self.sections {
            put_name(&mut out, name.as_bytes());
            out.extend(offset.to_le_bytes());
            out.extend((bytes.len() as u64).to_le_bytes());
            offset += bytes.len() as u64;
        }
        for (_, bytes) in &self.sections {
            out.extend(bytes);
        }
        let digest = Sha256::digest(&out);
        out.extend(digest.iter());
        out
    }

    /// Verifies the checksum before parsing anything else, so truncated or
    /// corrupted files report a checksum mismatch.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CliError> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(bad("not a SANDMDL1 file"));
        }
        if bytes.len() < MAGIC.len() + 8 + DIGEST_LEN {
            return Err(bad("checksum mismatch (file truncated)"));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - DIGEST_LEN);
        if Sha256::digest(body).as_slice() != trailer {
            return Err(bad("checksum mismatch"));
        }
        let mut r = Reader { bytes: body, pos: MAGIC.len() };
        let version = r.u32()?;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let count = r.u32()? as usize;
        let mut table = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name = r.name()?;
            let offset = r.u64()? as usize;
            let len = r.u64()? as usize;
            table.push((name, offset, len));
        }
        let payload = &body[r.pos..];
        let mut sections = Vec::with_capacity(table.len());
        for (name, offset, len) in table {
            let bytes = offset
                .checked_add(len)
                .and_then(|end| payload.get(offset..end))
                .ok_or_else(|| bad(format!("section `{name}` lies outside the file")))?;
            sections.push((name, bytes.to_vec()));
        }
        Ok(Self { sections })
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|_| CliError::MissingArtifact(path.to_path_buf()))?;
        Self::from_bytes(&bytes).map_err(|e| bad(format!("{}: {e}", path.display())))
    }
}
