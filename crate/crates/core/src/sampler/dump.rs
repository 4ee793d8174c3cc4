//! Raw sample dumps: a `# vars: <names>` header, then one line of
//! space-separated value indices per sample.

use std::io::{self, BufRead, Write};

use super::SampleSink;
use crate::error::{Error, Result};
use crate::model::FactorGraph;

pub struct DumpWriter<W: Write> {
    out: W,
    error: Option<io::Error>,
    line: String,
}

impl<W: Write> DumpWriter<W> {
    pub fn new(mut out: W, model: &FactorGraph) -> io::Result<Self> {
        let names: Vec<&str> = model.variables().iter().map(|v| v.name.as_str()).collect();
        writeln!(out, "# vars: {}", names.join(" "))?;
        Ok(DumpWriter {
            out,
            error: None,
            line: String::new(),
        })
    }

    pub fn write_sample(&mut self, s: &[usize]) -> io::Result<()> {
        use std::fmt::Write as _;
        self.line.clear();
        for (i, v) in s.iter().enumerate() {
            if i > 0 {
                self.line.push(' ');
            }
            let _ = write!(self.line, "{v}");
        }
        self.line.push('\n');
        self.out.write_all(self.line.as_bytes())
    }

    /// Flushes and returns the writer, or the first error met while
    /// used as a [`SampleSink`].
    pub fn finish(mut self) -> io::Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> SampleSink for DumpWriter<W> {
    fn observe(&mut self, s: &[usize]) {
        if self.error.is_none() {
            if let Err(e) = self.write_sample(s) {
                self.error = Some(e);
            }
        }
    }
}

/// Reads a dump into assignments in the model's variable order. Header
/// columns may be in any order but must name every model variable once.
pub fn read_dump<R: BufRead>(input: R, model: &FactorGraph) -> Result<Vec<Vec<usize>>> {
    let parse_err = |line: usize, message: String| Error::Parse { line, message };
    let mut lines = input.lines().enumerate();
    let columns: Vec<usize> = loop {
        let Some((i, line)) = lines.next() else {
            return Err(parse_err(1, "missing `# vars:` header".into()));
        };
        let line = line.map_err(|e| parse_err(i + 1, e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let Some(names) = trimmed.strip_prefix("# vars:") else {
            return Err(parse_err(i + 1, "expected `# vars:` header".into()));
        };
        let mut seen = vec![false; model.num_variables()];
        let mut cols = Vec::new();
        for name in names.split_whitespace() {
            let id = model
                .variable_id(name)
                .map_err(|e| parse_err(i + 1, e.to_string()))?;
            if std::mem::replace(&mut seen[id], true) {
                return Err(parse_err(i + 1, format!("variable {name} listed twice")));
            }
            cols.push(id);
        }
        if cols.len() != model.num_variables() {
            return Err(parse_err(
                i + 1,
                format!(
                    "header names {} of {} variables",
                    cols.len(),
                    model.num_variables()
                ),
            ));
        }
        break cols;
    };
    let mut samples = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| parse_err(i + 1, e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut s = vec![0; columns.len()];
        let mut count = 0;
        for (k, tok) in trimmed.split_whitespace().enumerate() {
            if k >= columns.len() {
                return Err(parse_err(i + 1, "too many values".into()));
            }
            s[columns[k]] = tok
                .parse()
                .map_err(|_| parse_err(i + 1, format!("bad value `{tok}`")))?;
            count += 1;
        }
        if count != columns.len() {
            return Err(parse_err(
                i + 1,
                format!("expected {} values, found {count}", columns.len()),
            ));
        }
        model
            .check_assignment(&s)
            .map_err(|e| parse_err(i + 1, e.to_string()))?;
        samples.push(s);
    }
    Ok(samples)
}
