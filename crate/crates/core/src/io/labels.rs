//! Per-point label sidecar: a one-column CSV `label` with `snow` or `object` rows.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{read_csv_table, write_csv, LoadError, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Snow,
    Object,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Snow => "snow",
            Label::Object => "object",
        }
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "snow" | "1" => Ok(Label::Snow),
            "object" | "0" => Ok(Label::Object),
            other => Err(format!("unknown label '{other}'")),
        }
    }
}

pub fn write_labels(labels: &[Label], path: impl AsRef<Path>) -> Result<(), LoadError> {
    let mut table = Table::new(["label"]);
    for l in labels {
        table.push(vec![l.as_str().into()]);
    }
    write_csv(&table, path)
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<Label>, LoadError> {
    let path = path.as_ref();
    let (header, rows) = read_csv_table(path)?;
    let col = header
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| LoadError::Usage(format!("{}: missing 'label' column", path.display())))?;
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            r.get(col)
                .ok_or_else(|| "missing field".to_string())
                .and_then(|v| v.parse())
                .map_err(|message| LoadError::Manifest { path: path.to_path_buf(), row: i + 1, message })
        })
        .collect()
}
