use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column names of the trip-level and residence fields.
pub const PERSON_ID: &str = "PERSON_ID";
pub const HOME_X: &str = "M_DOMXCOOR";
pub const HOME_Y: &str = "M_DOMYCOOR";
pub const ORIGIN_X: &str = "D_ORIXCOOR";
pub const ORIGIN_Y: &str = "D_ORIYCOOR";
pub const DEST_X: &str = "D_DESXCOOR";
pub const DEST_Y: &str = "D_DESYCOOR";
pub const PURPOSE: &str = "D_MOTIF";

/// Reserved purpose label marking the end of a generated trip chain.
pub const END_LABEL: &str = "END";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VariableKind {
    /// Real-valued attribute in `[min, max]`; `bins` are ascending edges used
    /// by the distribution audits (the last bin is closed on the right).
    Numeric { min: f64, max: f64, bins: Vec<f64> },
    Binary { labels: Vec<String> },
    Categorical { labels: Vec<String> },
    Geospatial { min: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    #[serde(flatten)]
    pub kind: VariableKind,
}

impl Variable {
    pub fn numeric(name: &str, min: f64, max: f64, bins: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Numeric { min, max, bins },
        }
    }

    pub fn binary(name: &str, labels: [&str; 2]) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Binary {
                labels: labels.iter().map(|s| s.to_string()).collect(),
            },
        }
    }

    pub fn categorical(name: &str, labels: &[&str]) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Categorical {
                labels: labels.iter().map(|s| s.to_string()).collect(),
            },
        }
    }

    pub fn geospatial(name: &str, min: f64, max: f64) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Geospatial { min, max },
        }
    }

    pub fn labels(&self) -> Option<&[String]> {
        match &self.kind {
            VariableKind::Binary { labels } | VariableKind::Categorical { labels } => Some(labels),
            _ => None,
        }
    }

    pub fn range(&self) -> Option<(f64, f64)> {
        match &self.kind {
            VariableKind::Numeric { min, max, .. } | VariableKind::Geospatial { min, max } => Some((*min, *max)),
            _ => None,
        }
    }

    /// Labels of the audit bins: category labels, or `[lo,hi)` intervals for
    /// binned numeric variables. `None` for unbinned numeric/geospatial.
    pub fn bin_labels(&self) -> Option<Vec<String>> {
        match &self.kind {
            VariableKind::Binary { labels } | VariableKind::Categorical { labels } => Some(labels.clone()),
            VariableKind::Numeric { bins, .. } if bins.len() >= 2 => {
                let last = bins.len() - 2;
                Some(
                    bins.windows(2)
                        .enumerate()
                        .map(|(i, w)| {
                            if i == last {
                                format!("[{},{}]", w[0], w[1])
                            } else {
                                format!("[{},{})", w[0], w[1])
                            }
                        })
                        .collect(),
                )
            }
            _ => None,
        }
    }

    /// Encoded width in the tabular vector.
    pub fn width(&self) -> usize {
        self.labels().map_or(1, <[String]>::len)
    }

    fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::schema(&self.name, m));
        match &self.kind {
            VariableKind::Binary { labels } if labels.len() != 2 => fail("binary variables need exactly 2 labels"),
            VariableKind::Binary { labels } | VariableKind::Categorical { labels } => {
                if labels.is_empty() {
                    return fail("label list is empty");
                }
                let mut seen = std::collections::HashSet::new();
                if !labels.iter().all(|l| seen.insert(l)) {
                    return fail("duplicate labels");
                }
                Ok(())
            }
            VariableKind::Numeric { min, max, bins } => {
                if !(min < max) {
                    return fail("numeric range needs min < max");
                }
                if !bins.is_empty() && (bins.len() < 2 || bins.windows(2).any(|w| !(w[0] < w[1]))) {
                    return fail("bin edges must be strictly ascending");
                }
                Ok(())
            }
            VariableKind::Geospatial { min, max } => {
                if !(min < max) {
                    return fail("coordinate range needs min < max");
                }
                Ok(())
            }
        }
    }
}

/// Variables to be synthesized: person-level attributes (tabular block, in
/// column order), residence and trip coordinate ranges, trip purposes and
/// the padded sequence length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveySchema {
    pub attributes: Vec<Variable>,
    /// Projected x range in meters, shared by residence and trip ends.
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// Trip purposes, including [`END_LABEL`] at the centre index.
    pub purposes: Vec<String>,
    pub max_len: usize,
}

impl SurveySchema {
    pub fn validate(&self) -> Result<()> {
        let mut names = std::collections::HashSet::new();
        for v in &self.attributes {
            v.validate()?;
            if !names.insert(v.name.as_str()) {
                return Err(Error::schema(&v.name, "duplicate variable name"));
            }
            if [PERSON_ID, HOME_X, HOME_Y, ORIGIN_X, ORIGIN_Y, DEST_X, DEST_Y, PURPOSE].contains(&v.name.as_str()) {
                return Err(Error::schema(&v.name, "name is reserved"));
            }
        }
        for (name, (lo, hi)) in [(HOME_X, self.x_range), (HOME_Y, self.y_range)] {
            if !(lo < hi) {
                return Err(Error::schema(name, "coordinate range needs min < max"));
            }
        }
        let n = self.purposes.len();
        if n < 3 || n.is_multiple_of(2) || self.purposes[n / 2] != END_LABEL {
            return Err(Error::schema(
                PURPOSE,
                format!("purpose list must have odd length >= 3 with `{END_LABEL}` at the centre"),
            ));
        }
        if self.max_len < 3 {
            return Err(Error::schema(PURPOSE, "max sequence length must be >= 3"));
        }
        Ok(())
    }

    pub fn attribute(&self, name: &str) -> Result<(usize, &Variable)> {
        self.attributes
            .iter()
            .enumerate()
            .find(|(_, v)| v.name == name)
            .ok_or_else(|| Error::schema(name, "unknown variable"))
    }

    /// Attribute names followed by residence, trip and purpose columns: the
    /// CSV layout after the person-id column.
    pub fn csv_columns(&self) -> Vec<String> {
        let mut cols = vec![PERSON_ID.to_string()];
        cols.extend(self.attributes.iter().map(|v| v.name.clone()));
        cols.extend([HOME_X, HOME_Y, ORIGIN_X, ORIGIN_Y, DEST_X, DEST_Y, PURPOSE].map(String::from));
        cols
    }

    pub fn tabular_width(&self) -> usize {
        self.attributes.iter().map(Variable::width).sum::<usize>() + 2
    }

    /// Schema of the survey attributes listed for synthesis: age, sex,
    /// mobility, occupation status, driving permit, residence and trip
    /// coordinates, trip purpose.
    pub fn survey(max_len: usize) -> Self {
        let (cx, cy) = CITY_CENTRE;
        Self {
            attributes: vec![
                Variable::numeric("P_AGE", 5.0, 95.0, age_group_edges()),
                Variable::binary("P_SEXE", ["M", "F"]),
                Variable::categorical("P_MOBIL", &["Mobile", "NotMobile"]),
                Variable::categorical("P_STATUT", &["Worker", "Student", "Retired", "Other"]),
                Variable::categorical("PERMIT", &["None", "Licence"]),
            ],
            x_range: (cx - COORD_HALF_SPAN, cx + COORD_HALF_SPAN),
            y_range: (cy - COORD_HALF_SPAN, cy + COORD_HALF_SPAN),
            purposes: ["Home", "Work", "School", END_LABEL, "Shopping", "Leisure", "Other"]
                .map(String::from)
                .to_vec(),
            max_len,
        }
    }
}

/// Projected metres of the synthetic urban centre.
pub const CITY_CENTRE: (f64, f64) = (300_000.0, 5_040_000.0);
pub const COORD_HALF_SPAN: f64 = 40_000.0;

/// Decade age groups `[5,15), [15,25), …, [85,95]`.
pub fn age_group_edges() -> Vec<f64> {
    (0..=9).map(|i| 5.0 + 10.0 * i as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn survey_schema_is_valid() {
        let s = SurveySchema::survey(20);
        s.validate().unwrap();
        assert_eq!(s.tabular_width(), 1 + 2 + 2 + 4 + 2 + 2);
        assert_eq!(s.attributes[0].bin_labels().unwrap()[0], "[5,15)");
        assert_eq!(s.attributes[0].bin_labels().unwrap()[8], "[85,95]");
    }

    #[test]
    fn rejects_bad_schemas() {
        let mut s = SurveySchema::survey(20);
        s.attributes.push(Variable::categorical("P_SEXE", &["x"]));
        assert!(s.validate().is_err());

        let mut s = SurveySchema::survey(20);
        s.attributes.push(Variable::categorical("EMPTY", &[]));
        assert!(s.validate().is_err());

        let mut s = SurveySchema::survey(20);
        s.attributes.push(Variable::numeric("BAD", 3.0, 3.0, vec![]));
        assert!(s.validate().is_err());

        let mut s = SurveySchema::survey(20);
        s.purposes.swap(0, 3);
        assert!(s.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = SurveySchema::survey(20);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<SurveySchema>(&text).unwrap(), s);
    }
}
