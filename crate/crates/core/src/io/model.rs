//! Plain-text response model artifacts.
//!
//! ```text
//! stackmeta-model <rows> <cols>
//! <row 0 entries separated by spaces>
//! ...
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::lqg::ResponseParam;

use super::csv::format_float;

const MAGIC: &str = "stackmeta-model";

pub fn model_to_string(m: &ResponseParam) -> String {
    let (rows, cols) = m.shape();
    let mut out = format!("{MAGIC} {rows} {cols}\n");
    for r in m.matrix().row_iter() {
        let line: Vec<String> = r.iter().map(|v| format_float(*v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_model(text: &str) -> Result<ResponseParam> {
    let bad = |msg: String| Error::Config(format!("model artifact: {msg}"));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (rows, cols) = match fields.as_slice() {
        [magic, r, c] if *magic == MAGIC => (
            r.parse::<usize>().map_err(|e| bad(format!("row count: {e}")))?,
            c.parse::<usize>().map_err(|e| bad(format!("column count: {e}")))?,
        ),
        _ => return Err(bad(format!("expected header '{MAGIC} <rows> <cols>', got '{header}'"))),
    };
    let mut data = Vec::with_capacity(rows * cols);
    for (i, line) in lines.enumerate() {
        if i >= rows {
            return Err(bad(format!("more than {rows} rows")));
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            data.push(tok.parse::<f64>().map_err(|e| bad(format!("row {i}: '{tok}': {e}")))?);
        }
        if data.len() - before != cols {
            return Err(bad(format!("row {i} has {} entries, expected {cols}", data.len() - before)));
        }
    }
    if data.len() != rows * cols {
        return Err(bad(format!("found {} rows, expected {rows}", data.len() / cols.max(1))));
    }
    ResponseParam::new(Mat::from_row_slice(rows, cols, &data))
}

pub fn write_model(m: &ResponseParam, path: &Path) -> Result<()> {
    let io_err = |e| Error::Io { path: path.display().to_string(), source: e };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err)?;
    }
    std::fs::write(path, model_to_string(m)).map_err(io_err)
}

pub fn read_model(path: &Path) -> Result<ResponseParam> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    parse_model(&text)
}
