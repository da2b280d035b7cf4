//! Object-count tables across dataset variants and per-class size histograms,
//! rendered as Markdown, CSV or JSON.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotations::Dataset;
use crate::error::{Error, Result};
use crate::indexer::{size_bucket, SizeBucket};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Markdown,
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Markdown => "md",
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(Format::Markdown),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Report(format!("unknown format '{other}'"))),
        }
    }
}

/// Class rows by variant columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    /// `cells[row][column]`
    pub cells: Vec<Vec<u64>>,
}

impl CountTable {
    pub fn column(&self, name: &str) -> Option<Vec<u64>> {
        let c = self.columns.iter().position(|n| n == name)?;
        Some(self.cells.iter().map(|r| r[c]).collect())
    }

    pub fn from_csv(text: &str) -> Result<CountTable> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| Error::Report(e.to_string()))?
            .clone();
        let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut rows = Vec::new();
        let mut cells = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Report(e.to_string()))?;
            rows.push(record[0].to_string());
            cells.push(
                record
                    .iter()
                    .skip(1)
                    .map(|v| {
                        v.parse::<u64>()
                            .map_err(|e| Error::Report(format!("cell '{v}': {e}")))
                    })
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        Ok(CountTable {
            rows,
            columns,
            cells,
        })
    }
}

/// Tallies annotations per class for each named variant, columns in the
/// given order.
pub fn count_table(variants: &[(&str, &Dataset)]) -> Result<CountTable> {
    let Some((_, first)) = variants.first() else {
        return Err(Error::Report("no variants given".into()));
    };
    for (name, d) in variants {
        if d.class_names != first.class_names {
            return Err(Error::Report(format!(
                "variant '{name}' has classes {:?}, expected {:?}",
                d.class_names, first.class_names
            )));
        }
    }
    let columns: Vec<Vec<u64>> = variants.iter().map(|(_, d)| d.class_counts()).collect();
    Ok(CountTable {
        rows: first.class_names.clone(),
        columns: variants.iter().map(|(n, _)| n.to_string()).collect(),
        cells: (0..first.class_names.len())
            .map(|r| columns.iter().map(|col| col[r]).collect())
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeRow {
    pub class: String,
    pub small: u64,
    pub medium: u64,
    pub large: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeHistogram {
    pub rows: Vec<SizeRow>,
}

impl SizeHistogram {
    pub fn get(&self, class: &str) -> Option<(u64, u64, u64)> {
        self.rows
            .iter()
            .find(|r| r.class == class)
            .map(|r| (r.small, r.medium, r.large))
    }
}

pub fn size_histogram(d: &Dataset) -> SizeHistogram {
    let mut counts = vec![[0u64; 3]; d.num_classes()];
    for ann in &d.annotations {
        if let Some(row) = counts.get_mut(ann.class_id) {
            row[size_bucket(&ann.bbox).index()] += 1;
        }
    }
    SizeHistogram {
        rows: d
            .class_names
            .iter()
            .zip(counts)
            .map(|(class, c)| SizeRow {
                class: class.clone(),
                small: c[SizeBucket::Small.index()],
                medium: c[SizeBucket::Medium.index()],
                large: c[SizeBucket::Large.index()],
            })
            .collect(),
    }
}

/// Header plus string rows, the common shape of every report.
pub trait Tabular: Serialize {
    fn header(&self) -> Vec<String>;
    fn body(&self) -> Vec<Vec<String>>;
}

impl Tabular for CountTable {
    fn header(&self) -> Vec<String> {
        std::iter::once("Class".to_string())
            .chain(self.columns.iter().cloned())
            .collect()
    }

    fn body(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .zip(&self.cells)
            .map(|(name, row)| {
                std::iter::once(name.clone())
                    .chain(row.iter().map(u64::to_string))
                    .collect()
            })
            .collect()
    }
}

impl Tabular for SizeHistogram {
    fn header(&self) -> Vec<String> {
        ["Class", "small", "medium", "large"]
            .map(String::from)
            .to_vec()
    }

    fn body(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.class.clone(),
                    r.small.to_string(),
                    r.medium.to_string(),
                    r.large.to_string(),
                ]
            })
            .collect()
    }
}

pub fn emit<T: Tabular>(report: &T, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(report.header()).expect("in-memory write");
            for row in report.body() {
                w.write_record(row).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
        }
        Format::Markdown => {
            let header = report.header();
            let mut s = String::new();
            let _ = writeln!(s, "| {} |", header.join(" | "));
            let align: Vec<&str> = (0..header.len())
                .map(|i| if i == 0 { "---" } else { "---:" })
                .collect();
            let _ = writeln!(s, "| {} |", align.join(" | "));
            for row in report.body() {
                let escaped: Vec<String> = row.iter().map(|c| c.replace('|', "\\|")).collect();
                let _ = writeln!(s, "| {} |", escaped.join(" | "));
            }
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::{Annotation, BoundingBox, ImageRecord, Lighting, Origin};

    fn with_boxes(classes: &[&str], boxes: &[(usize, f64)]) -> Dataset {
        let mut d = Dataset::new(classes.iter().map(|s| s.to_string()).collect());
        d.images.push(ImageRecord {
            image_id: 1,
            file_path: "c_1.png".into(),
            width: 200,
            height: 200,
            camera_id: String::new(),
            frame_index: 1,
            lighting: Lighting::Untagged,
        });
        for (i, &(class, side)) in boxes.iter().enumerate() {
            d.annotations.push(Annotation {
                image_id: 1,
                class_id: class,
                bbox: BoundingBox::new(0.0, 0.0, side, side),
                instance_id: i as u64 + 1,
                origin: Origin::Original,
            });
        }
        d
    }

    #[test]
    fn histogram_threshold_placement() {
        let h = size_histogram(&with_boxes(&["Car"], &[(0, 10.0)]));
        assert_eq!(h.get("Car"), Some((1, 0, 0)));
        let h = size_histogram(&with_boxes(&["Bus"], &[(0, 32.0), (0, 100.0)]));
        assert_eq!(h.get("Bus"), Some((0, 1, 1)));
    }

    #[test]
    fn empty_variant_is_zero_column() {
        let empty = with_boxes(&["a", "b"], &[]);
        let full = with_boxes(&["a", "b"], &[(0, 5.0), (1, 5.0), (1, 6.0)]);
        let t = count_table(&[("empty", &empty), ("full", &full)]).unwrap();
        assert_eq!(t.column("empty").unwrap(), vec![0, 0]);
        assert_eq!(t.column("full").unwrap(), vec![1, 2]);
    }

    #[test]
    fn class_mismatch_is_error() {
        let a = with_boxes(&["a"], &[]);
        let b = with_boxes(&["b"], &[]);
        assert!(count_table(&[("a", &a), ("b", &b)]).is_err());
        assert!(count_table(&[]).is_err());
    }

    #[test]
    fn one_by_one_csv_is_two_lines() {
        let d = with_boxes(&["Car"], &[(0, 5.0)]);
        let t = count_table(&[("Small Data", &d)]).unwrap();
        let csv = emit(&t, Format::Csv);
        assert_eq!(csv, "Class,Small Data\nCar,1\n");
        assert_eq!(CountTable::from_csv(&csv).unwrap(), t);
    }

    #[test]
    fn csv_quotes_awkward_names() {
        let d = with_boxes(&["Car, \"big\""], &[(0, 5.0)]);
        let t = count_table(&[("v,1", &d)]).unwrap();
        let csv = emit(&t, Format::Csv);
        assert!(csv.starts_with("Class,\"v,1\"\n\"Car, \"\"big\"\"\",1"));
        assert_eq!(CountTable::from_csv(&csv).unwrap(), t);
    }

    #[test]
    fn json_round_trip_and_markdown_shape() {
        let d = with_boxes(&["a", "b"], &[(0, 50.0)]);
        let t = count_table(&[("x", &d), ("y", &d)]).unwrap();
        let back: CountTable = serde_json::from_str(&emit(&t, Format::Json)).unwrap();
        assert_eq!(back, t);
        let md = emit(&t, Format::Markdown);
        assert_eq!(md.lines().count(), 4);
        assert!(md.starts_with("| Class | x | y |\n| --- | ---: | ---: |\n| a | 1 | 1 |"));
        let h = size_histogram(&d);
        let back: SizeHistogram = serde_json::from_str(&emit(&h, Format::Json)).unwrap();
        assert_eq!(back, h);
    }
}
