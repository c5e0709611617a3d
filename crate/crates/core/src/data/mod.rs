//! Survey schema, reversible encoding, tour filtering and the synthetic
//! fixture population.

mod codec;
mod fixture;
mod io;
pub mod schema;

use serde::{Deserialize, Serialize};

pub use codec::{fit_codec, pad_sequence, scale, unscale, Codec};
pub use fixture::{
    calibrate_truncated_normal, synth_fixture, toy_fixture, toy_schema, FixtureTruth, SurveyFixture,
    ACTIVITY_RADIUS, TOY_TRIPS,
};
pub use io::{read_csv, read_dataset, write_csv, write_dataset, DATASET_MAGIC, DATASET_VERSION};
pub use schema::{SurveySchema, Variable, VariableKind};

use crate::error::{Error, Result};
use crate::nets::SEQ_FEATURES;
use crate::numcore::{SeededRng, Tensor};

/// Tolerance in meters for "starts and ends at home".
pub const HOME_TOLERANCE: f64 = 1.0;
pub const MIN_LOCATIONS: usize = 3;
pub const MAX_LOCATIONS: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Number(f64),
    Label(String),
}

impl Value {
    pub fn as_label(&self) -> Option<&str> {
        match self {
            Value::Label(l) => Some(l),
            Value::Number(_) => None,
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(x) => Some(*x),
            Value::Label(_) => None,
        }
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Number(x) => write!(f, "{x}"),
            Value::Label(l) => f.write_str(l),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub origin: (f64, f64),
    pub destination: (f64, f64),
    /// Activity at the destination.
    pub purpose: String,
}

/// One respondent: attributes in schema order, residence, ordered trips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub person_id: String,
    pub attributes: Vec<Value>,
    pub home: (f64, f64),
    pub trips: Vec<Trip>,
}

impl RawRecord {
    /// Locations visited by the tour, counting the return home:
    /// `trips + 1` for a closed chain.
    pub fn locations(&self) -> usize {
        if self.trips.is_empty() {
            0
        } else {
            self.trips.len() + 1
        }
    }

    fn is_home_based(&self) -> bool {
        let near = |p: (f64, f64)| (p.0 - self.home.0).hypot(p.1 - self.home.1) <= HOME_TOLERANCE;
        match (self.trips.first(), self.trips.last()) {
            (Some(first), Some(last)) => near(first.origin) && near(last.destination),
            _ => false,
        }
    }
}

/// Keeps tours that leave from and return to the residence (within
/// [`HOME_TOLERANCE`]) and visit between 3 and 15 locations.
pub fn filter_home_based(records: Vec<RawRecord>) -> Vec<RawRecord> {
    records
        .into_iter()
        .filter(|r| r.is_home_based() && (MIN_LOCATIONS..=MAX_LOCATIONS).contains(&r.locations()))
        .collect()
}

/// Network-ready agent. `sequence` is `T × 5` row-major; rows at and after
/// `seq_len` are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedAgent {
    pub id: String,
    pub tabular: Vec<f64>,
    pub sequence: Vec<f64>,
    pub seq_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub codec: Codec,
    pub agents: Vec<EncodedAgent>,
    /// Fixture seed or source path.
    pub provenance: String,
}

impl Dataset {
    /// Encodes `records`; every record must conform to the codec's schema.
    pub fn from_records(codec: Codec, records: &[RawRecord], provenance: impl Into<String>) -> Result<Self> {
        let agents = records.iter().map(|r| codec.encode(r)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            codec,
            agents,
            provenance: provenance.into(),
        })
    }

    pub fn schema(&self) -> &SurveySchema {
        self.codec.schema()
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.codec.tabular_width();
        let s = self.codec.max_len() * SEQ_FEATURES;
        for a in &self.agents {
            if a.tabular.len() != w || a.sequence.len() != s {
                return Err(Error::dim("dataset agent", &[a.tabular.len(), a.sequence.len()], &[w, s]));
            }
        }
        Ok(())
    }

    pub fn records(&self) -> Result<Vec<RawRecord>> {
        self.agents.iter().map(|a| self.codec.decode(a)).collect()
    }

    /// `([n, W_tab], [n, T * 5])` for the given agent indices.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Tensor)> {
        let w = self.codec.tabular_width();
        let s = self.codec.max_len() * SEQ_FEATURES;
        let mut tab = Vec::with_capacity(indices.len() * w);
        let mut seq = Vec::with_capacity(indices.len() * s);
        for &i in indices {
            let a = self
                .agents
                .get(i)
                .ok_or_else(|| Error::Parameter(format!("agent index {i} out of range")))?;
            tab.extend_from_slice(&a.tabular);
            seq.extend_from_slice(&a.sequence);
        }
        Ok((Tensor::new(vec![indices.len(), w], tab)?, Tensor::new(vec![indices.len(), s], seq)?))
    }

    pub fn all(&self) -> Result<(Tensor, Tensor)> {
        self.batch(&(0..self.len()).collect::<Vec<_>>())
    }

    fn subset(&self, indices: &[usize], tag: &str) -> Self {
        Self {
            codec: self.codec.clone(),
            agents: indices.iter().map(|&i| self.agents[i].clone()).collect(),
            provenance: format!("{} [{tag}]", self.provenance),
        }
    }

    /// Seeded shuffle split into `round(fraction · n)` training agents and
    /// the rest. Both parts keep the original relative order.
    pub fn split(&self, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::Parameter(format!("split fraction must be in (0, 1), got {fraction}")));
        }
        let n = self.len();
        let n_train = (fraction * n as f64).round() as usize;
        if n_train == 0 || n_train == n {
            return Err(Error::Parameter(format!(
                "split of {n} agents at {fraction} leaves an empty part"
            )));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        SeededRng::new(seed).shuffle(&mut idx);
        let (mut a, mut b) = (idx[..n_train].to_vec(), idx[n_train..].to_vec());
        a.sort_unstable();
        b.sort_unstable();
        Ok((self.subset(&a, "train"), self.subset(&b, "validation")))
    }
}
