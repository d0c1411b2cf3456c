//! CSV emission. Every file starts with one `#` comment line carrying the
//! effective configuration, and floats are written with 17 significant
//! digits.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub struct CsvSink {
    inner: csv::Writer<Box<dyn Write>>,
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Config(format!("output: {e}"))
}

impl CsvSink {
    /// Opens `path`, or stdout when `None`, and writes the comment line and
    /// the column header.
    pub fn create(path: Option<&Path>, comment: &str, columns: &[&str]) -> Result<Self> {
        let mut w: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_err(format!("{}: {e}", p.display())))?)),
            None => Box::new(BufWriter::new(io::stdout())),
        };
        writeln!(w, "# {}", comment.replace('\n', " ")).map_err(io_err)?;
        let mut inner = csv::Writer::from_writer(w);
        inner.write_record(columns).map_err(io_err)?;
        Ok(Self { inner })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields).map_err(io_err)
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(io_err)
    }
}

/// Splits a CSV file into its comment lines and its body.
pub fn split_comment(text: &str) -> (Vec<&str>, String) {
    let mut comments = Vec::new();
    let mut body = String::new();
    for line in text.lines() {
        if line.starts_with('#') {
            comments.push(line);
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    (comments, body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, 12.286, -5.5e6, 1e-300, std::f64::consts::PI] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn writes_comment_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        let mut w = CsvSink::create(Some(&p), "cfg {\"a\":1}", &["a", "b"]).unwrap();
        w.row([fmt_f64(1.5), "x".to_string()]).unwrap();
        w.finish().unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let (c, body) = split_comment(&text);
        assert_eq!(c, vec!["# cfg {\"a\":1}"]);
        assert_eq!(body, "a,b\n1.5000000000000000e0,x\n");
    }
}
