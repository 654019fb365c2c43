//! Plain CSV tables with leading `# key: value` metadata lines.
//!
//! Machine output prints floats with 17 significant digits in scientific
//! notation so that parsing and re-emitting a file is the identity.

use std::fmt::Write as _;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Table {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            metadata: Vec::new(),
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.metadata.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn metadata_value(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx].as_str()).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut table = Table::default();
        let mut lines = text.lines();
        let mut header = None;
        for line in lines.by_ref() {
            if let Some(meta) = line.strip_prefix("# ") {
                let (k, v) = meta
                    .split_once(": ")
                    .ok_or_else(|| CliError::Usage(format!("malformed metadata line '{line}'")))?;
                table.metadata.push((k.to_string(), v.to_string()));
            } else {
                header = Some(line);
                break;
            }
        }
        let header = header.ok_or_else(|| CliError::Usage("table has no header row".into()))?;
        table.header = header.split(',').map(str::to_string).collect();
        for line in lines {
            let row: Vec<String> = line.split(',').map(str::to_string).collect();
            if row.len() != table.header.len() {
                return Err(CliError::Usage(format!(
                    "row '{line}' does not match the header width"
                )));
            }
            table.rows.push(row);
        }
        Ok(table)
    }
}

/// 17 significant digits, scientific notation.
pub fn fmt_machine(x: f64) -> String {
    format!("{x:.16e}")
}

/// 4 significant digits for human-readable tables.
pub fn fmt_human(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if (-4..6).contains(&magnitude) {
        let decimals = (3 - magnitude).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.3e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn human_format() {
        assert_eq!(fmt_human(4.166666), "4.167");
        assert_eq!(fmt_human(0.000850288), "0.0008503");
        assert_eq!(fmt_human(1234.56), "1235");
        assert_eq!(fmt_human(1234.5), "1234");
        assert_eq!(fmt_human(1.5e-9), "1.500e-9");
        assert_eq!(fmt_human(0.0), "0");
    }

    #[test]
    fn machine_format_is_exact() {
        for x in [0.1, 1.0 / 3.0, 4.0 / 0.96, -2.5e-300, 0.0] {
            assert_eq!(fmt_machine(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn rejects_ragged_rows() {
        assert!(Table::parse("a,b\n1\n").is_err());
        assert!(Table::parse("# only: meta\n").is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trips(
            values in prop::collection::vec(prop::collection::vec(any::<f64>(), 3), 0..20),
            meta in prop::collection::vec(("[a-z_]{1,10}", "[a-z0-9 .=-]{0,12}"), 0..5),
        ) {
            let mut table = Table::new(["a", "b_plus", "b_minus"]);
            for (k, v) in &meta {
                table.meta(k.clone(), v);
            }
            for row in &values {
                table.push(row.iter().map(|x| fmt_machine(*x)).collect());
            }
            let text = table.to_csv();
            let parsed = Table::parse(&text).unwrap();
            prop_assert_eq!(&parsed, &table);
            prop_assert_eq!(parsed.to_csv(), text);
        }
    }
}
