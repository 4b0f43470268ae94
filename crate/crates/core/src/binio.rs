//! Little-endian framing shared by the snapshot and dictionary files.
//!
//! A file is `magic[4] | version: u32 | payload_len: u64 | payload | crc32(payload): u32`.

use crate::error::{Error, Result};

#[derive(Default)]
pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }

    /// Length-prefixed run of floats.
    pub fn f64s(&mut self, values: impl ExactSizeIterator<Item = f64>) {
        self.u64(values.len() as u64);
        for v in values {
            self.f64(v);
        }
    }

    pub fn finish(self, magic: &[u8; 4], version: u32) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.buf.len() + 20);
        out.extend_from_slice(magic);
        out.extend_from_slice(&version.to_le_bytes());
        out.extend_from_slice(&(self.buf.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.buf);
        out.extend_from_slice(&crc32fast::hash(&self.buf).to_le_bytes());
        out
    }
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

/// Checks magic, version, length and checksum; returns the payload reader.
pub(crate) fn open<'a>(bytes: &'a [u8], magic: &[u8; 4], what: &str, supported: u32) -> Result<Reader<'a>> {
    if bytes.len() < 16 {
        return Err(Error::Integrity(format!("{what} file is truncated ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != magic {
        return Err(Error::Integrity(format!("not a {what} file (bad magic)")));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != supported {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported,
        });
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() != len.saturating_add(4) {
        return Err(Error::Integrity(format!(
            "{what} payload should be {len} bytes plus checksum, found {} bytes",
            body.len()
        )));
    }
    let (payload, crc) = body.split_at(len);
    if crc32fast::hash(payload) != u32::from_le_bytes(crc.try_into().unwrap()) {
        return Err(Error::Integrity(format!("{what} checksum mismatch")));
    }
    Ok(Reader { bytes: payload, pos: 0 })
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Integrity("unexpected end of payload".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Integrity("length overflows usize".into()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn str(&mut self) -> Result<String> {
        let len = self.usize()?;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| Error::Integrity("string is not UTF-8".into()))
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let len = self.usize()?;
        if len > (self.bytes.len() - self.pos) / 8 {
            return Err(Error::Integrity("float run longer than payload".into()));
        }
        (0..len).map(|_| self.f64()).collect()
    }

    pub fn finish(self) -> Result<()> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(Error::Integrity(format!(
                "{} unread bytes at end of payload",
                self.bytes.len() - self.pos
            )))
        }
    }
}
