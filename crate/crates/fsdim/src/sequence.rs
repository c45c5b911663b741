//! Binary sequence sources: Champernowne, diluted, periodic, constant, and
//! file-backed bit streams.
//!
//! Every source is a pure description: reading `n` bits twice yields the same
//! bits, and `generate(k, n)` is always a prefix of `generate(k, n + 1)`. The
//! binary Champernowne sequence concatenates the binary numerals of
//! 0, 1, 2, 3, … (so its first bits are `0 1 10 11 100 …`); the diluted
//! source interleaves an inner sequence with zeros, placing inner bit `i/2`
//! at every even index `i` and `0` at every odd index.

use std::fmt;
use std::path::{Path, PathBuf};

use crate::{Error, Result};

/// A binary string stored one bit per byte (each entry is 0 or 1).
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Bits(Vec<u8>);

impl Bits {
    pub fn new() -> Self {
        Bits(Vec::new())
    }

    pub fn with_capacity(n: usize) -> Self {
        Bits(Vec::with_capacity(n))
    }

    pub fn push(&mut self, bit: u8) {
        debug_assert!(bit <= 1);
        self.0.push(bit);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        self.0.iter().copied()
    }

    pub fn prefix(&self, n: usize) -> Bits {
        Bits(self.0[..n].to_vec())
    }

    /// Parse ASCII '0'/'1' text; whitespace is ignored.
    pub fn parse_ascii(text: &str, context: &str) -> Result<Self> {
        let mut bits = Bits::with_capacity(text.len());
        for (offset, ch) in text.chars().enumerate() {
            match ch {
                '0' => bits.push(0),
                '1' => bits.push(1),
                c if c.is_whitespace() => {}
                c => {
                    return Err(Error::BadBitChar {
                        context: context.to_string(),
                        offset,
                        found: c,
                    })
                }
            }
        }
        Ok(bits)
    }

    pub fn to_ascii_string(&self) -> String {
        self.0
            .iter()
            .map(|&b| if b == 0 { '0' } else { '1' })
            .collect()
    }

    /// Unpack bytes into bits, most-significant bit first.
    pub fn from_packed(bytes: &[u8]) -> Self {
        let mut bits = Bits::with_capacity(bytes.len() * 8);
        for &byte in bytes {
            for shift in (0..8).rev() {
                bits.push((byte >> shift) & 1);
            }
        }
        bits
    }

    /// Pack into bytes, most-significant bit first; the final byte is
    /// zero-padded when the length is not a multiple of 8.
    pub fn to_packed(&self) -> Vec<u8> {
        let mut bytes = vec![0u8; self.0.len().div_ceil(8)];
        for (i, &bit) in self.0.iter().enumerate() {
            bytes[i / 8] |= bit << (7 - (i % 8));
        }
        bytes
    }
}

impl std::ops::Index<usize> for Bits {
    type Output = u8;
    fn index(&self, i: usize) -> &u8 {
        &self.0[i]
    }
}

impl FromIterator<u8> for Bits {
    fn from_iter<I: IntoIterator<Item = u8>>(iter: I) -> Self {
        Bits(iter.into_iter().collect())
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len() <= 64 {
            write!(f, "Bits({})", self.to_ascii_string())
        } else {
            write!(
                f,
                "Bits({}… len {})",
                self.prefix(64).to_ascii_string(),
                self.len()
            )
        }
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_ascii_string())
    }
}

/// The kinds of bit source understood by the toolkit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SourceKind {
    /// Concatenated binary numerals of 0, 1, 2, 3, …
    Champernowne,
    /// Inner sequence at even indices, zeros at odd indices.
    Diluted(Box<SourceKind>),
    /// The pattern repeated forever.
    Periodic(Bits),
    /// The all-zero sequence.
    Zeros,
    /// Bits read from a file (ASCII '0'/'1', or packed for `.bits` files).
    File(PathBuf),
}

impl SourceKind {
    /// Parse a spec string such as `champernowne`, `diluted:champernowne`,
    /// `periodic:01`, `zeros`, or `file:PATH`. `diluted:` nests.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = |reason: &str| Error::BadSourceSpec {
            spec: spec.to_string(),
            reason: reason.to_string(),
        };
        let (head, rest) = match spec.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (spec, None),
        };
        match (head, rest) {
            ("champernowne", None) => Ok(SourceKind::Champernowne),
            ("zeros", None) => Ok(SourceKind::Zeros),
            ("diluted", Some(inner)) => {
                Ok(SourceKind::Diluted(Box::new(SourceKind::parse(inner)?)))
            }
            ("diluted", None) => Err(bad(
                "diluted needs an inner source, e.g. diluted:champernowne",
            )),
            ("periodic", Some(pattern)) => {
                let bits = Bits::parse_ascii(pattern, "periodic pattern")?;
                if bits.is_empty() {
                    return Err(bad("periodic pattern must be nonempty"));
                }
                Ok(SourceKind::Periodic(bits))
            }
            ("periodic", None) => Err(bad("periodic needs a pattern, e.g. periodic:01")),
            ("file", Some(path)) => Ok(SourceKind::File(PathBuf::from(path))),
            ("file", None) => Err(bad("file needs a path")),
            _ => Err(bad("unknown source kind")),
        }
    }

    pub fn spec_string(&self) -> String {
        match self {
            SourceKind::Champernowne => "champernowne".into(),
            SourceKind::Diluted(inner) => format!("diluted:{}", inner.spec_string()),
            SourceKind::Periodic(p) => format!("periodic:{}", p.to_ascii_string()),
            SourceKind::Zeros => "zeros".into(),
            SourceKind::File(path) => format!("file:{}", path.display()),
        }
    }
}

/// A readable source of bits. File contents are loaded once at construction;
/// all other kinds are generated on the fly, so any number of independent
/// readers can stream the same source.
#[derive(Clone, Debug)]
pub struct BitSource {
    kind: SourceKind,
    file_bits: Option<Bits>,
}

impl BitSource {
    pub fn new(kind: SourceKind) -> Result<Self> {
        let file_bits = match deepest_file(&kind) {
            Some(path) => Some(load_file(path)?),
            None => None,
        };
        Ok(BitSource { kind, file_bits })
    }

    pub fn kind(&self) -> &SourceKind {
        &self.kind
    }

    /// Bits available, or `None` for unbounded sources.
    pub fn length_hint(&self) -> Option<u64> {
        fn hint(kind: &SourceKind, file_len: Option<u64>) -> Option<u64> {
            match kind {
                SourceKind::File(_) => file_len,
                SourceKind::Diluted(inner) => hint(inner, file_len).map(|n| 2 * n),
                _ => None,
            }
        }
        hint(&self.kind, self.file_bits.as_ref().map(|b| b.len() as u64))
    }

    /// Stream the source bit by bit from the beginning.
    pub fn stream(&self) -> BitStream<'_> {
        BitStream {
            node: StreamNode::build(&self.kind, self.file_bits.as_ref()),
        }
    }

    /// The first `n` bits of the source.
    pub fn generate(&self, n: usize) -> Result<Bits> {
        let mut out = Bits::with_capacity(n);
        let mut stream = self.stream();
        for _ in 0..n {
            match stream.next() {
                Some(bit) => out.push(bit),
                None => {
                    return Err(Error::SourceExhausted {
                        requested: n as u64,
                        available: out.len() as u64,
                    })
                }
            }
        }
        Ok(out)
    }
}

/// Convenience: build the source and take its first `n` bits.
pub fn generate(kind: &SourceKind, n: usize) -> Result<Bits> {
    BitSource::new(kind.clone())?.generate(n)
}

fn deepest_file(kind: &SourceKind) -> Option<&Path> {
    match kind {
        SourceKind::File(path) => Some(path),
        SourceKind::Diluted(inner) => deepest_file(inner),
        _ => None,
    }
}

fn load_file(path: &Path) -> Result<Bits> {
    let raw = std::fs::read(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    if path.extension().is_some_and(|ext| ext == "bits") {
        Ok(Bits::from_packed(&raw))
    } else {
        let text = String::from_utf8_lossy(&raw);
        Bits::parse_ascii(&text, &path.display().to_string())
    }
}

/// Streaming reader over a [`BitSource`]. Yields `None` only when a
/// file-backed source runs out of data.
pub struct BitStream<'a> {
    node: StreamNode<'a>,
}

enum StreamNode<'a> {
    Champernowne {
        numeral: u64,
        pos: u32,
    },
    Diluted {
        inner: Box<StreamNode<'a>>,
        odd: bool,
    },
    Periodic {
        pattern: &'a Bits,
        pos: usize,
    },
    Zeros,
    File {
        data: &'a Bits,
        pos: usize,
    },
}

impl<'a> StreamNode<'a> {
    fn build(kind: &'a SourceKind, file_bits: Option<&'a Bits>) -> Self {
        match kind {
            SourceKind::Champernowne => StreamNode::Champernowne { numeral: 0, pos: 0 },
            SourceKind::Diluted(inner) => StreamNode::Diluted {
                inner: Box::new(StreamNode::build(inner, file_bits)),
                odd: false,
            },
            SourceKind::Periodic(pattern) => StreamNode::Periodic { pattern, pos: 0 },
            SourceKind::Zeros => StreamNode::Zeros,
            SourceKind::File(_) => StreamNode::File {
                data: file_bits.expect("file source loaded at construction"),
                pos: 0,
            },
        }
    }

    fn next(&mut self) -> Option<u8> {
        match self {
            StreamNode::Champernowne { numeral, pos } => {
                let len = numeral_len(*numeral);
                let bit = ((*numeral >> (len - 1 - *pos)) & 1) as u8;
                *pos += 1;
                if *pos == len {
                    *numeral += 1;
                    *pos = 0;
                }
                Some(bit)
            }
            StreamNode::Diluted { inner, odd } => {
                let bit = if *odd { Some(0) } else { inner.next() };
                if bit.is_some() {
                    *odd = !*odd;
                }
                bit
            }
            StreamNode::Periodic { pattern, pos } => {
                let bit = pattern[*pos];
                *pos = (*pos + 1) % pattern.len();
                Some(bit)
            }
            StreamNode::Zeros => Some(0),
            StreamNode::File { data, pos } => {
                if *pos < data.len() {
                    let bit = data[*pos];
                    *pos += 1;
                    Some(bit)
                } else {
                    None
                }
            }
        }
    }
}

/// Number of bits in the binary numeral of `m` (the numeral of 0 is "0").
fn numeral_len(m: u64) -> u32 {
    if m == 0 {
        1
    } else {
        64 - m.leading_zeros()
    }
}

impl Iterator for BitStream<'_> {
    type Item = u8;

    fn next(&mut self) -> Option<u8> {
        self.node.next()
    }
}
