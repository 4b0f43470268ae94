//! Bag-of-words corpus files.
//!
//! Text (`bow-text`): one document per line,
//!
//! ```text
//! # comment
//! mug 3 0:2 5:1
//! ```
//!
//! i.e. `<label> <N> <wordId>:<count> ...` where `N` is the sum of the counts.
//! Anything after `#` is ignored.
//!
//! Binary (`bow-binary`): the magic `LHBW`, a format byte (`1`), the document
//! count, then per document the label length, label bytes, `N`, the number of
//! distinct words and the `(wordId, count)` pairs. Every integer is an unsigned
//! LEB128 varint.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{BowDocument, CategoryLabel, LabeledCorpus, VisualWordId};
use crate::error::{Error, Result};

const BINARY_MAGIC: &[u8; 4] = b"LHBW";
const BINARY_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    BowText,
    BowBinary,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bow-text" | "text" => Ok(Self::BowText),
            "bow-binary" | "binary" => Ok(Self::BowBinary),
            other => Err(Error::Config(format!(
                "unknown corpus format {other:?} (expected bow-text or bow-binary)"
            ))),
        }
    }
}

impl CorpusFormat {
    /// Guess from the file extension: `.bowb` is binary, everything else text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bowb") => Self::BowBinary,
            _ => Self::BowText,
        }
    }
}

pub fn load_corpus(
    path: impl AsRef<Path>,
    format: CorpusFormat,
    dictionary_size: usize,
) -> Result<LabeledCorpus> {
    let path = path.as_ref();
    let file = File::open(path)?;
    read_corpus(BufReader::new(file), format, dictionary_size, path)
}

/// Parses a corpus from `reader`; `origin` is used in error messages and
/// document source ids.
pub fn read_corpus<R: Read>(
    reader: R,
    format: CorpusFormat,
    dictionary_size: usize,
    origin: &Path,
) -> Result<LabeledCorpus> {
    let corpus = match format {
        CorpusFormat::BowText => read_text(BufReader::new(reader), dictionary_size, origin)?,
        CorpusFormat::BowBinary => read_binary(reader, dictionary_size, origin)?,
    };
    let empties = corpus.empty_documents();
    if !empties.is_empty() {
        log::warn!(
            "{}: {} empty document(s) loaded; they cannot be used for inference",
            origin.display(),
            empties.len()
        );
    }
    Ok(corpus)
}

pub fn save_corpus(corpus: &LabeledCorpus, path: impl AsRef<Path>, format: CorpusFormat) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_corpus(corpus, &mut out, format)?;
    out.flush()?;
    Ok(())
}

pub fn write_corpus<W: Write>(corpus: &LabeledCorpus, out: &mut W, format: CorpusFormat) -> Result<()> {
    match format {
        CorpusFormat::BowText => {
            for (doc, label) in &corpus.documents {
                out.write_all(format_text_line(doc, label).as_bytes())?;
            }
        }
        CorpusFormat::BowBinary => {
            let mut buf = Vec::new();
            buf.extend_from_slice(BINARY_MAGIC);
            buf.push(BINARY_VERSION);
            put_varint(&mut buf, corpus.documents.len() as u64);
            for (doc, label) in &corpus.documents {
                let name = label.as_str().as_bytes();
                put_varint(&mut buf, name.len() as u64);
                buf.extend_from_slice(name);
                put_varint(&mut buf, doc.total_words());
                put_varint(&mut buf, doc.distinct_words() as u64);
                for (word, count) in doc.iter() {
                    put_varint(&mut buf, u64::from(word.0));
                    put_varint(&mut buf, u64::from(count));
                }
            }
            out.write_all(&buf)?;
        }
    }
    Ok(())
}

/// One `bow-text` line including the trailing newline.
pub fn format_text_line(doc: &BowDocument, label: &CategoryLabel) -> String {
    let mut line = format!("{} {}", label, doc.total_words());
    for (word, count) in doc.iter() {
        let _ = write!(line, " {word}:{count}");
    }
    line.push('\n');
    line
}

fn stem(origin: &Path) -> String {
    origin
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".to_string())
}

fn read_text<R: BufRead>(reader: R, dictionary_size: usize, origin: &Path) -> Result<LabeledCorpus> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let stem = stem(origin);
    let mut corpus = LabeledCorpus::new(dictionary_size);

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line.as_str(),
        };
        let mut tokens = content.split_whitespace();
        let Some(label) = tokens.next() else {
            continue;
        };
        let label = CategoryLabel::new(label).map_err(|e| parse_err(line_no, e.to_string()))?;
        let declared: u64 = tokens
            .next()
            .ok_or_else(|| parse_err(line_no, "missing word total".into()))?
            .parse()
            .map_err(|_| parse_err(line_no, "word total is not a non-negative integer".into()))?;

        let mut pairs = Vec::new();
        for token in tokens {
            let (id, count) = token
                .split_once(':')
                .ok_or_else(|| parse_err(line_no, format!("expected <wordId>:<count>, got {token:?}")))?;
            let id: u32 = id
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad word id in {token:?}")))?;
            let count: u32 = count
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad count in {token:?}")))?;
            if count == 0 {
                return Err(parse_err(line_no, format!("zero count in {token:?}")));
            }
            pairs.push((id, count));
        }
        let doc = build_document(pairs, declared, format!("{stem}:{line_no}"))
            .map_err(|msg| parse_err(line_no, msg))?;
        corpus.push(doc, label)?;
    }
    Ok(corpus)
}

fn build_document(pairs: Vec<(u32, u32)>, declared: u64, source_id: String) -> Result<BowDocument, String> {
    let mut seen = std::collections::BTreeSet::new();
    for &(id, _) in &pairs {
        if !seen.insert(id) {
            return Err(format!("word id {id} listed twice"));
        }
    }
    let doc = BowDocument::from_counts(pairs.into_iter().map(|(w, c)| (VisualWordId(w), c)), source_id)
        .map_err(|e| e.to_string())?;
    if doc.total_words() != declared {
        return Err(format!(
            "declared {declared} words but counts sum to {}",
            doc.total_words()
        ));
    }
    Ok(doc)
}

fn read_binary<R: Read>(mut reader: R, dictionary_size: usize, origin: &Path) -> Result<LabeledCorpus> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let stem = stem(origin);
    let mut corpus = LabeledCorpus::new(dictionary_size);
    if bytes.is_empty() {
        return Ok(corpus);
    }

    let mut cur = Cursor {
        bytes: &bytes,
        pos: 0,
        origin: origin.to_path_buf(),
        record: 0,
    };
    if cur.take(4)? != BINARY_MAGIC {
        return Err(cur.error("not a bow-binary file (bad magic)"));
    }
    let version = cur.take(1)?[0];
    if version != BINARY_VERSION {
        return Err(cur.error(&format!("unsupported bow-binary version {version}")));
    }
    let n_docs = cur.varint()?;
    for index in 0..n_docs {
        cur.record = index as usize + 1;
        let label_len = cur.varint()? as usize;
        let label = std::str::from_utf8(cur.take(label_len)?)
            .map_err(|_| cur.error("label is not UTF-8"))?
            .to_string();
        let label = CategoryLabel::new(label).map_err(|e| cur.error(&e.to_string()))?;
        let declared = cur.varint()?;
        let distinct = cur.varint()?;
        let mut pairs = Vec::new();
        for _ in 0..distinct {
            let id = u32::try_from(cur.varint()?).map_err(|_| cur.error("word id overflows u32"))?;
            let count = u32::try_from(cur.varint()?).map_err(|_| cur.error("count overflows u32"))?;
            if count == 0 {
                return Err(cur.error("zero count"));
            }
            pairs.push((id, count));
        }
        let doc = build_document(pairs, declared, format!("{stem}#{}", cur.record)).map_err(|m| cur.error(&m))?;
        corpus.push(doc, label)?;
    }
    if cur.pos != bytes.len() {
        return Err(cur.error("trailing bytes after last record"));
    }
    Ok(corpus)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    origin: PathBuf,
    record: usize,
}

impl<'a> Cursor<'a> {
    fn error(&self, message: &str) -> Error {
        Error::Parse {
            path: self.origin.clone(),
            line: self.record,
            message: format!("record {}: {message}", self.record),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.error("unexpected end of file"));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn varint(&mut self) -> Result<u64> {
        get_varint(self.bytes, &mut self.pos).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => self.error("unexpected end of file"),
            _ => self.error("malformed varint"),
        })
    }
}

pub(crate) fn put_varint(buf: &mut Vec<u8>, mut value: u64) {
    loop {
        let byte = (value & 0x7f) as u8;
        value >>= 7;
        if value == 0 {
            buf.push(byte);
            return;
        }
        buf.push(byte | 0x80);
    }
}

pub(crate) fn get_varint(bytes: &[u8], pos: &mut usize) -> io::Result<u64> {
    let mut value = 0u64;
    for shift in (0..64).step_by(7) {
        let Some(&byte) = bytes.get(*pos) else {
            return Err(io::ErrorKind::UnexpectedEof.into());
        };
        *pos += 1;
        value |= u64::from(byte & 0x7f) << shift;
        if byte & 0x80 == 0 {
            return Ok(value);
        }
    }
    Err(io::ErrorKind::InvalidData.into())
}
