//! word2vec-style text and binary embedding files.
//!
//! Text: header `V D`, then `token v_1 ... v_D` per line.
//! Binary: header `V D\n`, then per token the token bytes, a space,
//! D little-endian f32 values and a newline.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};

use super::{Embeddings, ModelError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Text,
    Binary,
}

impl EmbeddingFormat {
    pub fn extension(self) -> &'static str {
        match self {
            EmbeddingFormat::Text => "txt",
            EmbeddingFormat::Binary => "bin",
        }
    }

    /// `.bin` means binary, anything else text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => EmbeddingFormat::Binary,
            _ => EmbeddingFormat::Text,
        }
    }
}

impl FromStr for EmbeddingFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" | "txt" => Ok(EmbeddingFormat::Text),
            "binary" | "bin" => Ok(EmbeddingFormat::Binary),
            other => Err(format!("unknown embedding format `{other}` (text|binary)")),
        }
    }
}

/// `<prefix>.words.<ext>` and `<prefix>.cats.<ext>`.
pub fn embedding_paths(prefix: &Path, format: EmbeddingFormat) -> (PathBuf, PathBuf) {
    let with = |kind: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(format!(".{kind}.{}", format.extension()));
        PathBuf::from(s)
    };
    (with("words"), with("cats"))
}

pub fn write_embeddings<W: Write>(
    w: &mut W,
    labels: &[String],
    matrix: ArrayView2<'_, f64>,
    format: EmbeddingFormat,
) -> std::io::Result<()> {
    assert_eq!(labels.len(), matrix.nrows());
    writeln!(w, "{} {}", matrix.nrows(), matrix.ncols())?;
    for (label, row) in labels.iter().zip(matrix.outer_iter()) {
        w.write_all(label.as_bytes())?;
        match format {
            EmbeddingFormat::Text => {
                for v in row {
                    write!(w, " {v:.6e}")?;
                }
            }
            EmbeddingFormat::Binary => {
                w.write_all(b" ")?;
                for &v in row {
                    w.write_all(&(v as f32).to_le_bytes())?;
                }
            }
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_embeddings(
    path: &Path,
    labels: &[String],
    matrix: ArrayView2<'_, f64>,
    format: EmbeddingFormat,
) -> Result<(), ModelError> {
    let io_err = |source| ModelError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    write_embeddings(&mut w, labels, matrix, format).map_err(io_err)?;
    w.flush().map_err(io_err)
}

pub fn load_embeddings(path: &Path, format: EmbeddingFormat) -> Result<Embeddings, ModelError> {
    let file = File::open(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_embeddings(BufReader::new(file), format)
}

/// Byte-offset-tracking reader; errors carry the offset where parsing failed.
struct Tracked<R> {
    inner: R,
    offset: u64,
}

impl<R: BufRead> Tracked<R> {
    fn err(&self, reason: impl Into<String>) -> ModelError {
        ModelError::Format {
            offset: self.offset,
            reason: reason.into(),
        }
    }

    fn io(&self, e: std::io::Error) -> ModelError {
        self.err(format!("read failed: {e}"))
    }

    /// Bytes up to (not including) `delim` and whether `delim` was seen.
    /// Empty and unterminated at end of input.
    fn read_raw(&mut self, delim: u8) -> Result<(Vec<u8>, bool), ModelError> {
        let mut buf = Vec::new();
        let n = self.inner.read_until(delim, &mut buf).map_err(|e| self.io(e))?;
        self.offset += n as u64;
        let terminated = buf.last() == Some(&delim);
        if terminated {
            buf.pop();
        }
        Ok((buf, terminated))
    }

    /// Like [`Self::read_raw`] but a missing delimiter is an error; `None` at clean end of input.
    fn read_until(&mut self, delim: u8) -> Result<Option<Vec<u8>>, ModelError> {
        let (buf, terminated) = self.read_raw(delim)?;
        match (buf.is_empty(), terminated) {
            (_, true) => Ok(Some(buf)),
            (true, false) => Ok(None),
            (false, false) => Err(self.err("unexpected end of file")),
        }
    }

    fn read_exact(&mut self, buf: &mut [u8]) -> Result<(), ModelError> {
        self.inner
            .read_exact(buf)
            .map_err(|_| self.err("truncated vector payload"))?;
        self.offset += buf.len() as u64;
        Ok(())
    }
}

fn parse_header<R: BufRead>(r: &mut Tracked<R>) -> Result<(usize, usize), ModelError> {
    let line = r
        .read_until(b'\n')?
        .ok_or_else(|| r.err("empty file: missing `V D` header"))?;
    let line = String::from_utf8(line).map_err(|_| ModelError::Format {
        offset: 0,
        reason: "header is not UTF-8".into(),
    })?;
    let mut fields = line.split_ascii_whitespace();
    let parse = |f: Option<&str>| f.and_then(|s| s.parse::<usize>().ok());
    match (parse(fields.next()), parse(fields.next()), fields.next()) {
        (Some(v), Some(d), None) if d >= 1 => Ok((v, d)),
        _ => Err(ModelError::Format {
            offset: 0,
            reason: format!("bad header `{line}`, expected `V D`"),
        }),
    }
}

pub fn read_embeddings<R: BufRead>(
    reader: R,
    format: EmbeddingFormat,
) -> Result<Embeddings, ModelError> {
    let mut r = Tracked {
        inner: reader,
        offset: 0,
    };
    let (rows, dim) = parse_header(&mut r)?;
    // Header sizes are untrusted; cap the up-front reservation.
    let mut labels = Vec::with_capacity(rows.min(1 << 20));
    let mut data = Vec::with_capacity(rows.saturating_mul(dim).min(1 << 24));
    match format {
        EmbeddingFormat::Text => read_text_rows(&mut r, rows, dim, &mut labels, &mut data)?,
        EmbeddingFormat::Binary => read_binary_rows(&mut r, rows, dim, &mut labels, &mut data)?,
    }
    let mut rest = Vec::new();
    r.inner.read_to_end(&mut rest).map_err(|e| r.io(e))?;
    let trailing_ok = match format {
        EmbeddingFormat::Text => rest.iter().all(u8::is_ascii_whitespace),
        EmbeddingFormat::Binary => rest.is_empty(),
    };
    if !trailing_ok {
        return Err(r.err(format!("data beyond the {rows} declared rows")));
    }
    let matrix = Array2::from_shape_vec((rows, dim), data).expect("shape checked while reading");
    Ok(Embeddings::new(labels, matrix))
}

fn read_text_rows<R: BufRead>(
    r: &mut Tracked<R>,
    rows: usize,
    dim: usize,
    labels: &mut Vec<String>,
    data: &mut Vec<f64>,
) -> Result<(), ModelError> {
    for i in 0..rows {
        let start = r.offset;
        let (line, terminated) = r.read_raw(b'\n')?;
        if line.is_empty() && !terminated {
            return Err(r.err(format!("truncated: {i} of {rows} rows present")));
        }
        let at = |reason: String| ModelError::Format {
            offset: start,
            reason,
        };
        let line = std::str::from_utf8(&line).map_err(|_| at("row is not UTF-8".into()))?;
        let mut fields = line.split_ascii_whitespace();
        let label = fields.next().ok_or_else(|| at("empty row".into()))?;
        let before = data.len();
        for f in fields {
            let v: f64 = f
                .parse()
                .map_err(|_| at(format!("non-numeric value `{f}`")))?;
            data.push(v);
        }
        let found = data.len() - before;
        if found != dim {
            return Err(at(format!("row `{label}` has {found} values, expected {dim}")));
        }
        labels.push(label.to_owned());
    }
    Ok(())
}

fn read_binary_rows<R: BufRead>(
    r: &mut Tracked<R>,
    rows: usize,
    dim: usize,
    labels: &mut Vec<String>,
    data: &mut Vec<f64>,
) -> Result<(), ModelError> {
    let mut payload = vec![0u8; 4 * dim];
    for i in 0..rows {
        let label = r
            .read_until(b' ')?
            .ok_or_else(|| r.err(format!("truncated: {i} of {rows} rows present")))?;
        if label.is_empty() || label.contains(&b'\n') {
            return Err(r.err("malformed token"));
        }
        let label = String::from_utf8(label).map_err(|_| r.err("token is not UTF-8"))?;
        r.read_exact(&mut payload)?;
        data.extend(
            payload
                .chunks_exact(4)
                .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))),
        );
        let mut nl = [0u8; 1];
        r.read_exact(&mut nl)?;
        if nl[0] != b'\n' {
            return Err(r.err("expected newline after vector"));
        }
        labels.push(label);
    }
    Ok(())
}
