use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use super::Embedding;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SCTF";
const VERSION: u16 = 1;

/// Which stage produced a set of embeddings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    Paths,
    MultiSegment,
    /// Path-averaged scattering vectors without positions or attention.
    Baseline,
}

impl EmbeddingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingKind::Paths => "paths",
            EmbeddingKind::MultiSegment => "multiseg",
            EmbeddingKind::Baseline => "baseline",
        }
    }

    fn code(self) -> u8 {
        match self {
            EmbeddingKind::Paths => 0,
            EmbeddingKind::MultiSegment => 1,
            EmbeddingKind::Baseline => 2,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(EmbeddingKind::Paths),
            1 => Some(EmbeddingKind::MultiSegment),
            2 => Some(EmbeddingKind::Baseline),
            _ => None,
        }
    }
}

impl std::str::FromStr for EmbeddingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paths" => Ok(EmbeddingKind::Paths),
            "multiseg" => Ok(EmbeddingKind::MultiSegment),
            "baseline" => Ok(EmbeddingKind::Baseline),
            other => Err(Error::Data(format!("unknown embedding mode '{other}'"))),
        }
    }
}

/// Embeddings of one kind sharing a dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    pub kind: EmbeddingKind,
    pub embeddings: Vec<Embedding>,
}

impl EmbeddingSet {
    pub fn new(kind: EmbeddingKind, embeddings: Vec<Embedding>) -> Result<Self> {
        if let Some(first) = embeddings.first() {
            let d = first.dim();
            if let Some(e) = embeddings.iter().find(|e| e.dim() != d) {
                return Err(Error::Shape(format!(
                    "embedding '{}' has dimension {}, expected {d}",
                    e.provenance,
                    e.dim()
                )));
            }
        }
        Ok(Self { kind, embeddings })
    }

    pub fn dim(&self) -> usize {
        self.embeddings.first().map_or(0, Embedding::dim)
    }
}

/// Text export: optional `#` preamble lines, a header, then
/// `id,mode,dim,v_0..v_{dim-1}` per record with 9 significant digits.
pub fn write_embeddings_csv<W: Write>(
    set: &EmbeddingSet,
    preamble: &[String],
    mut out: W,
) -> std::io::Result<()> {
    for line in preamble {
        writeln!(out, "# {line}")?;
    }
    write!(out, "id,mode,dim")?;
    for i in 0..set.dim() {
        write!(out, ",v_{i}")?;
    }
    writeln!(out)?;
    for e in &set.embeddings {
        write!(out, "{},{},{}", e.provenance, set.kind.as_str(), e.dim())?;
        for v in &e.values {
            write!(out, ",{v:.8e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_embeddings_csv<R: BufRead>(input: R, source: &std::path::Path) -> Result<EmbeddingSet> {
    let parse_err = |line: usize, message: String| Error::Parse {
        file: source.to_path_buf(),
        line,
        message,
    };
    let mut kind = None;
    let mut embeddings = Vec::new();
    let mut seen_header = false;
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(source, e))?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            if !line.starts_with("id,mode,dim") {
                return Err(parse_err(line_no, "missing 'id,mode,dim' header".into()));
            }
            seen_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            return Err(parse_err(line_no, "expected at least 3 fields".into()));
        }
        let row_kind: EmbeddingKind = fields[1]
            .parse()
            .map_err(|e: Error| parse_err(line_no, e.to_string()))?;
        if *kind.get_or_insert(row_kind) != row_kind {
            return Err(parse_err(
                line_no,
                "mixed embedding modes in one file".into(),
            ));
        }
        let dim: usize = fields[2]
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad dim '{}'", fields[2])))?;
        if fields.len() != 3 + dim {
            return Err(parse_err(
                line_no,
                format!("dim is {dim} but {} values follow", fields.len() - 3),
            ));
        }
        let values = fields[3..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(line_no, e.to_string()))?;
        embeddings.push(
            Embedding::new(values, fields[0]).map_err(|e| parse_err(line_no, e.to_string()))?,
        );
    }
    EmbeddingSet::new(kind.unwrap_or(EmbeddingKind::Paths), embeddings)
}

/// Compact export: 16-byte header (`SCTF`, version u16, dim u32, count u32,
/// mode u8, one pad byte) followed by little-endian f32 values, row-major.
/// Identifiers are not stored.
pub fn write_embeddings_binary<W: Write>(set: &EmbeddingSet, mut out: W) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(set.dim() as u32).to_le_bytes())?;
    out.write_all(&(set.embeddings.len() as u32).to_le_bytes())?;
    out.write_all(&[set.kind.code(), 0])?;
    for e in &set.embeddings {
        for &v in &e.values {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_embeddings_binary<R: Read>(mut input: R) -> Result<EmbeddingSet> {
    let mut header = [0u8; 16];
    input
        .read_exact(&mut header)
        .map_err(|e| Error::Data(format!("truncated embedding header: {e}")))?;
    if &header[..4] != MAGIC {
        return Err(Error::Data("not an embedding file (bad magic)".into()));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != VERSION {
        return Err(Error::Data(format!(
            "unsupported embedding file version {version}"
        )));
    }
    let dim = u32::from_le_bytes(header[6..10].try_into().unwrap()) as usize;
    let count = u32::from_le_bytes(header[10..14].try_into().unwrap()) as usize;
    let kind = EmbeddingKind::from_code(header[14])
        .ok_or_else(|| Error::Data(format!("unknown mode byte {}", header[14])))?;
    let mut embeddings = Vec::with_capacity(count);
    let mut buf = vec![0u8; dim * 4];
    for i in 0..count {
        input
            .read_exact(&mut buf)
            .map_err(|e| Error::Data(format!("truncated embedding record {i}: {e}")))?;
        let values = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        embeddings.push(Embedding::new(values, String::new())?);
    }
    EmbeddingSet::new(kind, embeddings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set() -> EmbeddingSet {
        EmbeddingSet::new(
            EmbeddingKind::MultiSegment,
            vec![
                Embedding::new(vec![1.0, -0.5, 3.25e-7], "p1/0").unwrap(),
                Embedding::new(vec![0.0, 2.0, 1.0 / 3.0], "p2/1").unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn binary_header_layout() {
        let mut buf = Vec::new();
        write_embeddings_binary(&set(), &mut buf).unwrap();
        assert_eq!(&buf[..4], b"SCTF");
        assert_eq!(u16::from_le_bytes([buf[4], buf[5]]), 1);
        assert_eq!(u32::from_le_bytes(buf[6..10].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(buf[10..14].try_into().unwrap()), 2);
        assert_eq!(buf[14], 1);
        assert_eq!(buf.len(), 16 + 2 * 3 * 4);
        let back = read_embeddings_binary(buf.as_slice()).unwrap();
        assert_eq!(back.kind, EmbeddingKind::MultiSegment);
        assert_eq!(back.embeddings[1].values[2], (1.0f64 / 3.0) as f32 as f64);
    }

    #[test]
    fn csv_format() {
        let mut buf = Vec::new();
        write_embeddings_csv(&set(), &["config={}".into()], &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# config={}");
        assert_eq!(lines[1], "id,mode,dim,v_0,v_1,v_2");
        assert_eq!(
            lines[2],
            "p1/0,multiseg,3,1.00000000e0,-5.00000000e-1,3.25000000e-7"
        );
        let back = read_embeddings_csv(buf.as_slice(), std::path::Path::new("mem")).unwrap();
        assert_eq!(back.embeddings[0], set().embeddings[0]);
    }

    #[test]
    fn csv_reports_bad_line() {
        let text = "id,mode,dim,v_0\np1,paths,2,1.0\n";
        match read_embeddings_csv(text.as_bytes(), std::path::Path::new("e.csv")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn csv_round_trip_to_nine_digits(values in prop::collection::vec(-1e6f64..1e6, 1..20)) {
            let set = EmbeddingSet::new(EmbeddingKind::Paths, vec![Embedding::new(values.clone(), "x").unwrap()]).unwrap();
            let mut buf = Vec::new();
            write_embeddings_csv(&set, &[], &mut buf).unwrap();
            let back = read_embeddings_csv(buf.as_slice(), std::path::Path::new("mem")).unwrap();
            for (a, b) in values.iter().zip(&back.embeddings[0].values) {
                prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(1e-300));
            }
        }
    }
}
