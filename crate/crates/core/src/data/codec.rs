use serde::{Deserialize, Serialize};

use super::schema::{SurveySchema, Variable, VariableKind, END_LABEL};
use super::{EncodedAgent, RawRecord, Trip, Value};
use crate::error::{Error, Result};
use crate::nets::{HeadKind, HeadSpec, SEQ_FEATURES};

/// Reversible mapping between raw records and network inputs.
///
/// Tabular layout: one block per attribute in schema order (one-hot for
/// binary/categorical, one affine column for numeric/geospatial), then the
/// residence x and y columns. Sequence layout per trip:
/// `[orig_x, orig_y, dest_x, dest_y, purpose]`, the purpose index `k` of `L`
/// labels mapped to `-1 + 2k/(L-1)`. Ranges come from the schema, never from
/// the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codec {
    schema: SurveySchema,
}

/// Affine map of `[lo, hi]` onto `[-1, 1]`.
pub fn scale(v: f64, lo: f64, hi: f64) -> f64 {
    2.0 * (v - lo) / (hi - lo) - 1.0
}

/// Inverse of [`scale`], clamped to `[lo, hi]`.
pub fn unscale(e: f64, lo: f64, hi: f64) -> f64 {
    (lo + (e + 1.0) / 2.0 * (hi - lo)).clamp(lo, hi)
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Validates `records` against `schema` and returns the codec.
pub fn fit_codec(records: &[RawRecord], schema: &SurveySchema) -> Result<Codec> {
    if records.is_empty() {
        return Err(Error::Parameter("cannot fit a codec on zero records".into()));
    }
    let codec = Codec::new(schema.clone())?;
    for r in records {
        codec.check_record(r)?;
    }
    Ok(codec)
}

impl Codec {
    pub fn new(schema: SurveySchema) -> Result<Self> {
        schema.validate()?;
        Ok(Self { schema })
    }

    pub fn schema(&self) -> &SurveySchema {
        &self.schema
    }

    pub fn tabular_width(&self) -> usize {
        self.schema.tabular_width()
    }

    pub fn max_len(&self) -> usize {
        self.schema.max_len
    }

    /// One generator head per attribute plus one numeric head per residence
    /// coordinate, matching the tabular layout.
    pub fn head_specs(&self) -> Vec<HeadSpec> {
        let mut heads: Vec<HeadSpec> = self
            .schema
            .attributes
            .iter()
            .map(|v| HeadSpec {
                name: v.name.clone(),
                kind: if v.labels().is_some() {
                    HeadKind::Categorical
                } else {
                    HeadKind::Numeric
                },
                width: v.width(),
            })
            .collect();
        for name in [super::schema::HOME_X, super::schema::HOME_Y] {
            heads.push(HeadSpec {
                name: name.into(),
                kind: HeadKind::Numeric,
                width: 1,
            });
        }
        heads
    }

    /// Names of the encoded tabular columns (`VAR=label` for one-hot entries).
    pub fn tabular_columns(&self) -> Vec<String> {
        let mut cols = Vec::new();
        for v in &self.schema.attributes {
            match v.labels() {
                Some(labels) => cols.extend(labels.iter().map(|l| format!("{}={}", v.name, l))),
                None => cols.push(v.name.clone()),
            }
        }
        cols.push(super::schema::HOME_X.into());
        cols.push(super::schema::HOME_Y.into());
        cols
    }

    pub fn purpose_value(&self, index: usize) -> f64 {
        let l = self.schema.purposes.len();
        -1.0 + 2.0 * index as f64 / (l - 1) as f64
    }

    /// Nearest purpose index to a scaled value.
    pub fn purpose_index(&self, e: f64) -> usize {
        let l = self.schema.purposes.len();
        let k = ((e.clamp(-1.0, 1.0) + 1.0) / 2.0 * (l - 1) as f64).round();
        (k as usize).min(l - 1)
    }

    fn check_value(&self, var: &Variable, value: &Value) -> Result<()> {
        match (&var.kind, value) {
            (VariableKind::Binary { labels } | VariableKind::Categorical { labels }, Value::Label(l)) => {
                if labels.contains(l) {
                    Ok(())
                } else {
                    Err(Error::schema(&var.name, format!("unseen category label `{l}`")))
                }
            }
            (VariableKind::Numeric { min, max, .. } | VariableKind::Geospatial { min, max }, Value::Number(x)) => {
                if x.is_finite() && *min <= *x && *x <= *max {
                    Ok(())
                } else {
                    Err(Error::schema(&var.name, format!("value {x} outside [{min}, {max}]")))
                }
            }
            _ => Err(Error::schema(&var.name, format!("value {value:?} has the wrong kind"))),
        }
    }

    fn check_point(&self, name: &str, (x, y): (f64, f64)) -> Result<()> {
        let (xl, xh) = self.schema.x_range;
        let (yl, yh) = self.schema.y_range;
        if x.is_finite() && y.is_finite() && (xl..=xh).contains(&x) && (yl..=yh).contains(&y) {
            Ok(())
        } else {
            Err(Error::schema(name, format!("point ({x}, {y}) outside the coordinate range")))
        }
    }

    /// Checks that every value of `r` conforms to the schema.
    pub fn check_record(&self, r: &RawRecord) -> Result<()> {
        if r.attributes.len() != self.schema.attributes.len() {
            return Err(Error::dim(
                "record attributes",
                &[r.attributes.len()],
                &[self.schema.attributes.len()],
            ));
        }
        for (var, value) in self.schema.attributes.iter().zip(&r.attributes) {
            self.check_value(var, value)?;
        }
        self.check_point(super::schema::HOME_X, r.home)?;
        for t in &r.trips {
            self.check_point(super::schema::ORIGIN_X, t.origin)?;
            self.check_point(super::schema::DEST_X, t.destination)?;
            if t.purpose == END_LABEL || !self.schema.purposes.contains(&t.purpose) {
                return Err(Error::schema(
                    super::schema::PURPOSE,
                    format!("unseen trip purpose `{}`", t.purpose),
                ));
            }
        }
        Ok(())
    }

    /// Person attributes and residence as a `W_tab` vector.
    pub fn encode_tabular(&self, r: &RawRecord) -> Result<Vec<f64>> {
        self.check_record(r)?;
        let mut out = Vec::with_capacity(self.tabular_width());
        for (var, value) in self.schema.attributes.iter().zip(&r.attributes) {
            match (&var.kind, value) {
                (VariableKind::Binary { labels } | VariableKind::Categorical { labels }, Value::Label(l)) => {
                    let k = labels.iter().position(|x| x == l).expect("checked");
                    out.extend((0..labels.len()).map(|i| if i == k { 1.0 } else { 0.0 }));
                }
                (VariableKind::Numeric { min, max, .. } | VariableKind::Geospatial { min, max }, Value::Number(x)) => {
                    out.push(scale(*x, *min, *max));
                }
                _ => unreachable!("checked"),
            }
        }
        let (xl, xh) = self.schema.x_range;
        let (yl, yh) = self.schema.y_range;
        out.push(scale(r.home.0, xl, xh));
        out.push(scale(r.home.1, yl, yh));
        Ok(out)
    }

    fn encode_trip(&self, t: &Trip) -> [f64; SEQ_FEATURES] {
        let (xl, xh) = self.schema.x_range;
        let (yl, yh) = self.schema.y_range;
        let k = self.schema.purposes.iter().position(|p| *p == t.purpose).expect("checked");
        [
            scale(t.origin.0, xl, xh),
            scale(t.origin.1, yl, yh),
            scale(t.destination.0, xl, xh),
            scale(t.destination.1, yl, yh),
            self.purpose_value(k),
        ]
    }

    pub fn encode(&self, r: &RawRecord) -> Result<EncodedAgent> {
        let tabular = self.encode_tabular(r)?;
        let rows: Vec<[f64; SEQ_FEATURES]> = r.trips.iter().map(|t| self.encode_trip(t)).collect();
        let (sequence, seq_len) = pad_sequence(&rows, self.schema.max_len)?;
        Ok(EncodedAgent {
            id: r.person_id.clone(),
            tabular,
            sequence,
            seq_len,
        })
    }

    /// Attributes and residence from a tabular vector. One-hot blocks are
    /// read by argmax, numeric columns by the clamped affine inverse.
    pub fn decode_tabular(&self, tabular: &[f64]) -> Result<(Vec<Value>, (f64, f64))> {
        if tabular.len() != self.tabular_width() {
            return Err(Error::dim("decode tabular", &[tabular.len()], &[self.tabular_width()]));
        }
        let mut at = 0;
        let mut values = Vec::with_capacity(self.schema.attributes.len());
        for var in &self.schema.attributes {
            match &var.kind {
                VariableKind::Binary { labels } | VariableKind::Categorical { labels } => {
                    let k = argmax(&tabular[at..at + labels.len()]);
                    values.push(Value::Label(labels[k].clone()));
                    at += labels.len();
                }
                VariableKind::Numeric { min, max, .. } | VariableKind::Geospatial { min, max } => {
                    values.push(Value::Number(unscale(tabular[at], *min, *max)));
                    at += 1;
                }
            }
        }
        let (xl, xh) = self.schema.x_range;
        let (yl, yh) = self.schema.y_range;
        let home = (unscale(tabular[at], xl, xh), unscale(tabular[at + 1], yl, yh));
        Ok((values, home))
    }

    /// Trips up to the first step whose purpose decodes to the END label.
    pub fn decode_sequence(&self, sequence: &[f64]) -> Result<Vec<Trip>> {
        let t_max = self.schema.max_len;
        if sequence.len() != t_max * SEQ_FEATURES {
            return Err(Error::dim("decode sequence", &[sequence.len()], &[t_max, SEQ_FEATURES]));
        }
        let (xl, xh) = self.schema.x_range;
        let (yl, yh) = self.schema.y_range;
        let mut trips = Vec::new();
        for row in sequence.chunks_exact(SEQ_FEATURES) {
            let purpose = &self.schema.purposes[self.purpose_index(row[4])];
            if purpose == END_LABEL {
                break;
            }
            trips.push(Trip {
                origin: (unscale(row[0], xl, xh), unscale(row[1], yl, yh)),
                destination: (unscale(row[2], xl, xh), unscale(row[3], yl, yh)),
                purpose: purpose.clone(),
            });
        }
        Ok(trips)
    }

    pub fn decode(&self, agent: &EncodedAgent) -> Result<RawRecord> {
        let (attributes, home) = self.decode_tabular(&agent.tabular)?;
        let trips = self.decode_sequence(&agent.sequence)?;
        Ok(RawRecord {
            person_id: agent.id.clone(),
            attributes,
            home,
            trips,
        })
    }
}

/// Flattens `rows` into a `T × 5` row-major matrix, zero beyond the last
/// row, and returns it with the number of occupied rows.
pub fn pad_sequence(rows: &[[f64; SEQ_FEATURES]], max_len: usize) -> Result<(Vec<f64>, usize)> {
    if rows.is_empty() {
        return Err(Error::Contract("cannot pad an empty trip list".into()));
    }
    if rows.len() > max_len {
        return Err(Error::Capacity {
            len: rows.len(),
            capacity: max_len,
        });
    }
    let mut out = vec![0.0; max_len * SEQ_FEATURES];
    for (t, row) in rows.iter().enumerate() {
        out[t * SEQ_FEATURES..(t + 1) * SEQ_FEATURES].copy_from_slice(row);
    }
    Ok((out, rows.len()))
}
