//! Diary CSV and dataset container files.
//!
//! CSV: header row of schema column names, one row per trip, person fields
//! repeated on every trip row. A person without trips has one row with empty
//! trip fields.
//!
//! Dataset file (magic `DPDS`, version 1), sections in order:
//!
//! - `schema`: UTF-8 JSON of the [`SurveySchema`] (codec ranges included);
//! - `provenance`: length-prefixed string;
//! - `agents`: u64 count, then per agent a length-prefixed id, u64 `seq_len`,
//!   `W_tab` f64 tabular values and `T·5` f64 sequence values.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::schema::{self, SurveySchema, VariableKind};
use super::{Codec, Dataset, EncodedAgent, RawRecord, Trip, Value};
use crate::container::{Container, PayloadReader, PayloadWriter};
use crate::error::{Error, Result};
use crate::nets::SEQ_FEATURES;

pub const DATASET_MAGIC: [u8; 4] = *b"DPDS";
pub const DATASET_VERSION: u16 = 1;

fn fmt_point(p: (f64, f64)) -> [String; 2] {
    [p.0.to_string(), p.1.to_string()]
}

pub fn write_csv<W: Write>(writer: W, schema: &SurveySchema, records: &[RawRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(schema.csv_columns())?;
    for r in records {
        let mut person = vec![r.person_id.clone()];
        person.extend(r.attributes.iter().map(Value::to_string));
        person.extend(fmt_point(r.home));
        if r.trips.is_empty() {
            let mut row = person.clone();
            row.extend(std::iter::repeat_n(String::new(), 5));
            w.write_record(&row)?;
        }
        for t in &r.trips {
            let mut row = person.clone();
            row.extend(fmt_point(t.origin));
            row.extend(fmt_point(t.destination));
            row.push(t.purpose.clone());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_num(column: &str, text: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| Error::schema(column, format!("`{text}` is not a number")))
}

/// Reads a diary CSV, grouping rows by person id in order of first
/// appearance. Values are parsed by kind but not range-checked.
pub fn read_csv<R: Read>(reader: R, schema: &SurveySchema) -> Result<Vec<RawRecord>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let expected = schema.csv_columns();
    let missing: Vec<&String> = expected.iter().filter(|c| !header.contains(c)).collect();
    let extra: Vec<&String> = header.iter().filter(|c| !expected.contains(c)).collect();
    if !missing.is_empty() || !extra.is_empty() {
        let names: Vec<&str> = missing.iter().chain(&extra).map(|s| s.as_str()).collect();
        return Err(Error::schema(
            names.join(", "),
            format!("CSV columns differ from the schema (missing {missing:?}, unexpected {extra:?})"),
        ));
    }
    let col: HashMap<&str, usize> = header.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let at = |name: &str| col[name];

    let mut index: HashMap<String, usize> = HashMap::new();
    let mut records: Vec<RawRecord> = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let id = row[at(schema::PERSON_ID)].to_string();
        let slot = match index.get(&id) {
            Some(&i) => i,
            None => {
                let mut attributes = Vec::with_capacity(schema.attributes.len());
                for v in &schema.attributes {
                    let text = &row[at(&v.name)];
                    attributes.push(match v.kind {
                        VariableKind::Numeric { .. } | VariableKind::Geospatial { .. } => {
                            Value::Number(parse_num(&v.name, text)?)
                        }
                        _ => Value::Label(text.to_string()),
                    });
                }
                let home = (
                    parse_num(schema::HOME_X, &row[at(schema::HOME_X)])?,
                    parse_num(schema::HOME_Y, &row[at(schema::HOME_Y)])?,
                );
                index.insert(id.clone(), records.len());
                records.push(RawRecord {
                    person_id: id,
                    attributes,
                    home,
                    trips: Vec::new(),
                });
                records.len() - 1
            }
        };
        let purpose = &row[at(schema::PURPOSE)];
        if purpose.is_empty() && row[at(schema::ORIGIN_X)].is_empty() {
            continue;
        }
        let num = |name: &str| parse_num(name, &row[at(name)]);
        records[slot].trips.push(Trip {
            origin: (num(schema::ORIGIN_X)?, num(schema::ORIGIN_Y)?),
            destination: (num(schema::DEST_X)?, num(schema::DEST_Y)?),
            purpose: purpose.to_string(),
        });
    }
    Ok(records)
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    ds.validate()?;
    let mut c = Container::new(DATASET_MAGIC, DATASET_VERSION);
    c.push("schema", serde_json::to_vec(ds.schema())?);
    let mut w = PayloadWriter::new();
    w.str(&ds.provenance);
    c.push("provenance", w.finish());
    let mut w = PayloadWriter::new();
    w.u64(ds.agents.len() as u64);
    for a in &ds.agents {
        w.str(&a.id).u64(a.seq_len as u64).f64s(&a.tabular).f64s(&a.sequence);
    }
    c.push("agents", w.finish());
    c.write_atomic(path)
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let c = Container::read(path, DATASET_MAGIC, DATASET_VERSION)?;
    let schema: SurveySchema = serde_json::from_slice(c.section("schema")?)?;
    let codec = Codec::new(schema)?;
    let provenance = PayloadReader::new(c.section("provenance")?).str()?;
    let mut r = PayloadReader::new(c.section("agents")?);
    let n = r.u64()? as usize;
    let (w, s) = (codec.tabular_width(), codec.max_len() * SEQ_FEATURES);
    let mut agents = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let id = r.str()?;
        let seq_len = r.u64()? as usize;
        let tabular = r.f64s(w)?;
        let sequence = r.f64s(s)?;
        agents.push(EncodedAgent {
            id,
            tabular,
            sequence,
            seq_len,
        });
    }
    if !r.is_done() {
        return Err(Error::Integrity {
            offset: r.offset() as u64,
            message: "trailing bytes in agents section".into(),
        });
    }
    Ok(Dataset {
        codec,
        agents,
        provenance,
    })
}
