//! BAG_CSV reading and writing.
//!
//! Header `bag_id,label,f1,...,fd`, one instance per row, label in
//! `{0, 1, NA}`. Rows of a bag need not be contiguous but must agree on the
//! label.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::data::{Bag, Dataset, Instance, Label};
use crate::error::{Error, Result};

fn parse_label(field: &str, line: u64) -> Result<Option<Label>> {
    match field.trim() {
        "1" => Ok(Some(Label::Pos)),
        "0" => Ok(Some(Label::Neg)),
        "NA" => Ok(None),
        other => Err(Error::Parse {
            line,
            message: format!("label must be 0, 1 or NA, got {other:?}"),
        }),
    }
}

fn format_label(label: Option<Label>) -> &'static str {
    match label {
        Some(Label::Pos) => "1",
        Some(Label::Neg) => "0",
        None => "NA",
    }
}

/// Loads a BAG_CSV file. The dataset is named after the file stem.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_dataset(file, &name).map_err(|e| match e {
        Error::EmptyFile(_) => Error::EmptyFile(path.to_path_buf()),
        other => other,
    })
}

/// Parses BAG_CSV content from any reader.
pub fn read_dataset<R: Read>(reader: R, name: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::EmptyFile(name.into()));
    }
    if header.len() < 3 || &header[0] != "bag_id" || &header[1] != "label" {
        return Err(Error::Parse {
            line: 1,
            message: "header must be bag_id,label,f1,...,fd".into(),
        });
    }
    let d = header.len() - 2;

    // Bags in first-appearance order.
    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, (Option<Label>, Vec<Instance>)> = HashMap::new();

    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_error(e, line)
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() < 2 {
            return Err(Error::Parse {
                line,
                message: "row needs bag_id, label and features".into(),
            });
        }
        let bag_id = record[0].to_string();
        if bag_id.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty bag_id".into(),
            });
        }
        let label = parse_label(&record[1], line)?;
        let found = record.len() - 2;
        if found != d {
            return Err(Error::DimensionMismatch {
                bag_id,
                expected: d,
                found,
            });
        }
        let values = record
            .iter()
            .skip(2)
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line,
                        message: format!("invalid feature value {f:?}"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        let instance = Instance::new(values)?;

        match grouped.get_mut(&bag_id) {
            Some((existing, instances)) => {
                if *existing != label {
                    return Err(Error::ConflictingLabels { bag_id });
                }
                instances.push(instance);
            }
            None => {
                order.push(bag_id.clone());
                grouped.insert(bag_id, (label, vec![instance]));
            }
        }
    }

    if order.is_empty() {
        return Err(Error::EmptyFile(name.into()));
    }
    let bags = order
        .into_iter()
        .map(|id| {
            let (label, instances) = grouped.remove(&id).expect("grouped bag");
            Bag::new(id, instances, label)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(name, bags)
}

fn csv_error(e: csv::Error, line: u64) -> Error {
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// Writes a dataset as BAG_CSV, bags contiguous and in dataset order.
///
/// Values use Rust's shortest round-trip float formatting, so a reload is
/// bit-exact.
pub fn write_dataset<W: Write>(dataset: &Dataset, mut out: W) -> std::io::Result<()> {
    let mut header = String::from("bag_id,label");
    for j in 1..=dataset.dimension() {
        header.push_str(&format!(",f{j}"));
    }
    writeln!(out, "{header}")?;
    for bag in dataset.bags() {
        let label = format_label(bag.label());
        for x in bag.instances() {
            write!(out, "{},{}", bag.id(), label)?;
            for v in x.values() {
                write!(out, ",{v:?}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Writes a dataset to `path`, creating or truncating it.
pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = std::io::BufWriter::new(file);
    write_dataset(dataset, &mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}
