use std::path::Path;

use serde::Serialize;

use crate::{CliError, Stage};

/// Left-aligns the first column and right-aligns the rest.
pub fn text_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (j, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if j > 0 {
                s.push_str("  ");
                s.push_str(&format!("{cell:>w$}"));
            } else {
                s.push_str(&format!("{cell:<w$}"));
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(headers.to_vec());
    out.push_str(&line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect()));
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

pub fn num(v: f64) -> String {
    format!("{v:.6}")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::usage(format!("cannot serialise {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| metamodel_core::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
        .stage("write output")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_line_up() {
        let t = text_table(&["name", "v"], &[vec!["a".into(), "1.5".into()], vec!["long".into(), "10.25".into()]]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "name      v");
        assert_eq!(lines[1], "----  -----");
        assert_eq!(lines[2], "a       1.5");
        assert_eq!(lines[3], "long  10.25");
    }
}
