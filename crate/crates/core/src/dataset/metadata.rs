//! Text sidecars: per-row metadata CSV and target-name CSV.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const METADATA_HEADER: [&str; 5] = ["row", "game_id", "genre_id", "style_label", "source_frame"];
pub const TARGET_NAMES_HEADER: [&str; 2] = ["index", "variable_name"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StyleLabel {
    Retro,
    Modern,
    Photoreal,
    Unknown,
}

impl StyleLabel {
    pub const KNOWN: [StyleLabel; 3] = [StyleLabel::Retro, StyleLabel::Modern, StyleLabel::Photoreal];

    pub fn as_str(self) -> &'static str {
        match self {
            StyleLabel::Retro => "retro",
            StyleLabel::Modern => "modern",
            StyleLabel::Photoreal => "photoreal",
            StyleLabel::Unknown => "unknown",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for StyleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StyleLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "retro" => Ok(StyleLabel::Retro),
            "modern" => Ok(StyleLabel::Modern),
            "photoreal" => Ok(StyleLabel::Photoreal),
            "unknown" => Ok(StyleLabel::Unknown),
            other => Err(format!("unknown style label `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMetadata {
    pub game_id: String,
    pub genre_id: String,
    pub style_label: StyleLabel,
    pub source_frame: Option<String>,
}

fn csv_err(line: u64, message: impl Into<String>) -> Error {
    Error::Csv { line, message: message.into() }
}

fn from_csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, csv::Position::line);
    csv_err(line, e.to_string())
}

fn records(bytes: &[u8], header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(bytes);
    let mut iter = reader.records();
    let first = iter.next().ok_or_else(|| csv_err(1, "missing header"))?.map_err(from_csv_error)?;
    if first.iter().ne(header.iter().copied()) {
        return Err(csv_err(1, format!("expected header `{}`", header.join(","))));
    }
    iter.map(|r| r.map_err(from_csv_error)).collect()
}

fn check_index(record: &csv::StringRecord, expected: usize) -> Result<()> {
    let line = record.position().map_or(0, csv::Position::line);
    let got: usize = record[0].parse().map_err(|_| csv_err(line, format!("bad index `{}`", &record[0])))?;
    if got != expected {
        return Err(csv_err(line, format!("index {got} out of order, expected {expected}")));
    }
    Ok(())
}

/// Parses the metadata CSV. Rows must be numbered `0..N` in order; game and
/// genre ids must be non-empty.
pub fn parse_metadata(bytes: &[u8]) -> Result<Vec<SampleMetadata>> {
    let rows = records(bytes, &METADATA_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    for (i, record) in rows.iter().enumerate() {
        let line = record.position().map_or(0, csv::Position::line);
        check_index(record, i)?;
        let (game, genre) = (&record[1], &record[2]);
        if game.is_empty() || genre.is_empty() {
            return Err(csv_err(line, "game_id and genre_id must be non-empty"));
        }
        let style_label = record[3].parse().map_err(|e: String| csv_err(line, e))?;
        let source_frame = Some(&record[4]).filter(|s| !s.is_empty()).map(str::to_owned);
        out.push(SampleMetadata { game_id: game.to_owned(), genre_id: genre.to_owned(), style_label, source_frame });
    }
    Ok(out)
}

pub fn write_metadata(metadata: &[SampleMetadata]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(METADATA_HEADER).map_err(from_csv_error)?;
    for (i, m) in metadata.iter().enumerate() {
        w.write_record([
            i.to_string().as_str(),
            &m.game_id,
            &m.genre_id,
            m.style_label.as_str(),
            m.source_frame.as_deref().unwrap_or(""),
        ])
        .map_err(from_csv_error)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn parse_target_names(bytes: &[u8]) -> Result<Vec<String>> {
    let rows = records(bytes, &TARGET_NAMES_HEADER)?;
    let mut names = Vec::with_capacity(rows.len());
    for (i, record) in rows.iter().enumerate() {
        check_index(record, i)?;
        if record[1].is_empty() {
            let line = record.position().map_or(0, csv::Position::line);
            return Err(csv_err(line, "empty variable name"));
        }
        names.push(record[1].to_owned());
    }
    Ok(names)
}

pub fn write_target_names(names: &[String]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TARGET_NAMES_HEADER).map_err(from_csv_error)?;
    for (i, name) in names.iter().enumerate() {
        w.write_record([i.to_string().as_str(), name]).map_err(from_csv_error)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}
