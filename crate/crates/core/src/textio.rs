//! Line-oriented reader shared by the dataset, checkpoint and metrics
//! formats. Tracks line numbers so schema errors point at the offending line.

use std::io::BufRead;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};

pub struct LineReader<R> {
    inner: R,
    path: PathBuf,
    line_no: usize,
    buf: String,
}

impl<R: BufRead> LineReader<R> {
    pub fn new(inner: R, path: impl Into<PathBuf>) -> Self {
        LineReader { inner, path: path.into(), line_no: 0, buf: String::new() }
    }

    pub fn path(&self) -> &std::path::Path {
        &self.path
    }

    /// Next line with the trailing newline stripped, or `None` at EOF.
    pub fn next_line(&mut self) -> Result<Option<String>> {
        self.buf.clear();
        let n = self
            .inner
            .read_line(&mut self.buf)
            .map_err(|e| Error::io(&self.path, e))?;
        if n == 0 {
            return Ok(None);
        }
        self.line_no += 1;
        Ok(Some(self.buf.trim_end_matches(['\n', '\r']).to_string()))
    }

    /// Next line; EOF is a schema error (truncated file).
    pub fn expect_line(&mut self) -> Result<String> {
        self.next_line()?
            .ok_or_else(|| self.schema("unexpected end of file"))
    }

    pub fn schema(&self, msg: impl Into<String>) -> Error {
        Error::Schema { path: self.path.clone(), line: self.line_no, msg: msg.into() }
    }

    pub fn parse<T: FromStr>(&self, tok: &str) -> Result<T> {
        tok.trim()
            .parse()
            .map_err(|_| self.schema(format!("cannot parse {tok:?}")))
    }

    /// Reads a `key=value` line and checks the key.
    pub fn expect_kv(&mut self, key: &str) -> Result<String> {
        let line = self.expect_line()?;
        match line.split_once('=') {
            Some((k, v)) if k.trim() == key => Ok(v.trim().to_string()),
            _ => Err(self.schema(format!("expected `{key}=...`, got {line:?}"))),
        }
    }

    pub fn expect_kv_parse<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.expect_kv(key)?;
        self.parse(&v)
    }

    pub fn expect_exact(&mut self, expected: &str) -> Result<()> {
        let line = self.expect_line()?;
        if line.trim() != expected {
            return Err(self.schema(format!("expected {expected:?}, got {line:?}")));
        }
        Ok(())
    }

    /// Parses a `<magic> v<N>` header and returns N.
    pub fn expect_header(&mut self, magic: &str) -> Result<u32> {
        let line = self.expect_line()?;
        let Some(rest) = line.strip_prefix(magic) else {
            return Err(self.schema(format!("missing {magic:?} header")));
        };
        let Some(v) = rest.trim().strip_prefix('v') else {
            return Err(self.schema("missing version in header"));
        };
        self.parse(v)
    }

    /// Whitespace-separated floats, exactly `n` of them.
    pub fn parse_floats(&self, line: &str, n: usize) -> Result<Vec<f64>> {
        let vals = line
            .split_whitespace()
            .map(|t| self.parse::<f64>(t))
            .collect::<Result<Vec<f64>>>()?;
        if vals.len() != n {
            return Err(self.schema(format!("expected {n} values, found {}", vals.len())));
        }
        Ok(vals)
    }
}

/// Formats floats so that parsing them back is bit-exact.
pub fn join_floats(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
    parts.join(" ")
}
