//! Report rendering. Both formats carry exactly the same values: text mode
//! prints human-readable lines, structured mode prints `key=value` pairs.

use crate::ReportFormat;

/// An ordered list of key/value pairs plus a text rendering.
#[derive(Debug, Default)]
pub struct Report {
    entries: Vec<(String, String)>,
    text_lines: Vec<String>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn entry(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn text_line(&mut self, line: impl Into<String>) {
        self.text_lines.push(line.into());
    }

    pub fn print(&self, format: ReportFormat) {
        match format {
            ReportFormat::Text => {
                for line in &self.text_lines {
                    println!("{line}");
                }
            }
            ReportFormat::Structured => {
                for (k, v) in &self.entries {
                    println!("{k}={v}");
                }
            }
        }
    }
}
