//! Reader and writer for the category-labeled corpus format.
//!
//! A record is a header line `#CATEGORIES` followed by tab-prefixed category
//! names, then one or more body lines of space-separated tokens. Records are
//! separated by exactly one blank line.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use super::CorpusError;

pub const HEADER_TAG: &str = "#CATEGORIES";

/// One record of the corpus as it appears on disk.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RawDocument {
    pub categories: Vec<String>,
    pub tokens: Vec<String>,
}

impl RawDocument {
    pub fn new<C, T>(categories: C, tokens: T) -> Self
    where
        C: IntoIterator,
        C::Item: Into<String>,
        T: IntoIterator,
        T::Item: Into<String>,
    {
        RawDocument {
            categories: categories.into_iter().map(Into::into).collect(),
            tokens: tokens.into_iter().map(Into::into).collect(),
        }
    }
}

/// Streaming record reader. Holds at most one record in memory.
pub struct CorpusReader<R> {
    reader: R,
    line: String,
    line_no: usize,
    done: bool,
}

impl<R: BufRead> CorpusReader<R> {
    pub fn new(reader: R) -> Self {
        CorpusReader {
            reader,
            line: String::new(),
            line_no: 0,
            done: false,
        }
    }

    /// Reads the next line without its terminator. `None` at end of input.
    fn next_line(&mut self) -> Result<Option<&str>, CorpusError> {
        self.line.clear();
        let n = self
            .reader
            .read_line(&mut self.line)
            .map_err(|source| CorpusError::Io {
                line: self.line_no + 1,
                source,
            })?;
        if n == 0 {
            return Ok(None);
        }
        self.line_no += 1;
        if self.line.ends_with('\n') {
            self.line.pop();
        }
        Ok(Some(&self.line))
    }

    fn read_record(&mut self) -> Result<Option<RawDocument>, CorpusError> {
        // Skip trailing blank lines at end of file; a blank line anywhere else
        // falls through to the header check and is reported as malformed.
        let mut first_blank = None;
        let header_line = loop {
            match self.next_line()? {
                None => return Ok(None),
                Some("") => {
                    first_blank.get_or_insert(self.line_no);
                }
                Some(_) => break self.line_no,
            }
        };
        if let Some(line) = first_blank {
            return Err(CorpusError::Malformed {
                line,
                reason: "expected a single blank line between records".into(),
            });
        }
        let categories = parse_header(&self.line, header_line)?;

        let mut tokens = Vec::new();
        let mut body_lines = 0usize;
        loop {
            match self.next_line()? {
                None | Some("") => break,
                Some(line) if line.starts_with(HEADER_TAG) => {
                    return Err(CorpusError::Malformed {
                        line: self.line_no,
                        reason: "header line inside a record body (missing blank separator)".into(),
                    });
                }
                Some(line) => {
                    body_lines += 1;
                    tokens.extend(line.split(' ').filter(|t| !t.is_empty()).map(str::to_owned));
                }
            }
        }
        if body_lines == 0 {
            return Err(CorpusError::Malformed {
                line: header_line,
                reason: "record has no body lines".into(),
            });
        }
        Ok(Some(RawDocument { categories, tokens }))
    }
}

fn parse_header(line: &str, line_no: usize) -> Result<Vec<String>, CorpusError> {
    let rest = line.strip_prefix(HEADER_TAG).ok_or_else(|| CorpusError::Malformed {
        line: line_no,
        reason: format!("expected `{HEADER_TAG}` header"),
    })?;
    if rest.is_empty() {
        return Ok(Vec::new());
    }
    let fields = rest.strip_prefix('\t').ok_or_else(|| CorpusError::Malformed {
        line: line_no,
        reason: format!("`{HEADER_TAG}` must be followed by a tab or end of line"),
    })?;
    fields
        .split('\t')
        .map(|f| {
            if f.is_empty() {
                Err(CorpusError::Malformed {
                    line: line_no,
                    reason: "empty category field".into(),
                })
            } else {
                Ok(f.to_owned())
            }
        })
        .collect()
}

impl<R: BufRead> Iterator for CorpusReader<R> {
    type Item = Result<RawDocument, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.read_record() {
            Ok(Some(doc)) => Some(Ok(doc)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Opens a corpus file as a stream of records.
pub fn parse_corpus<P: AsRef<Path>>(path: P) -> Result<CorpusReader<BufReader<File>>, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Open {
        path: path.display().to_string(),
        source,
    })?;
    Ok(CorpusReader::new(BufReader::new(file)))
}

/// Writes one record (header and a single body line) without the separator.
pub fn write_record<W: Write>(w: &mut W, doc: &RawDocument) -> io::Result<()> {
    w.write_all(HEADER_TAG.as_bytes())?;
    for c in &doc.categories {
        w.write_all(b"\t")?;
        w.write_all(c.as_bytes())?;
    }
    w.write_all(b"\n")?;
    w.write_all(doc.tokens.join(" ").as_bytes())?;
    w.write_all(b"\n")
}

/// Writes a whole corpus, records separated by one blank line.
pub fn write_corpus<'a, W, I>(w: &mut W, docs: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a RawDocument>,
{
    for (i, doc) in docs.into_iter().enumerate() {
        if i > 0 {
            w.write_all(b"\n")?;
        }
        write_record(w, doc)?;
    }
    Ok(())
}
