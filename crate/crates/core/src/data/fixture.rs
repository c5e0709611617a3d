//! Deterministic stand-in populations with analytically known joints.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::schema::{age_group_edges, SurveySchema, Variable, CITY_CENTRE, END_LABEL};
use super::{RawRecord, Trip, Value};
use crate::error::{Error, Result};
use crate::numcore::SeededRng;

/// Target age moments on `[5, 95]`.
pub const AGE_MEAN: f64 = 43.0;
pub const AGE_SD: f64 = 20.0;
pub const AGE_MIN: f64 = 5.0;
pub const AGE_MAX: f64 = 95.0;

/// Radius in meters of the disk around home where activities fall.
pub const ACTIVITY_RADIUS: f64 = 15_000.0;
const HOME_SD: f64 = 6_000.0;
const HOME_MAX: f64 = 20_000.0;
const MIN_TRIPS: usize = 2;
const MAX_TRIPS: usize = 6;

/// Trips per toy tour (home, two stops, home).
pub const TOY_TRIPS: usize = 3;
const TOY_HALF_SPAN: f64 = 10_000.0;
const TOY_HOME_SD: f64 = 2_000.0;
const TOY_HOME_MAX: f64 = 5_000.0;
const TOY_ACTIVITY_RADIUS: f64 = 3_000.0;

/// Exact joint distribution of the categorical (or binned) fixture
/// variables. `joint` is flattened in row-major order over `labels`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureTruth {
    pub variables: Vec<String>,
    pub labels: Vec<Vec<String>>,
    pub joint: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TruthFile {
    variables: Vec<String>,
    labels: Vec<Vec<String>>,
    joint: BTreeMap<String, f64>,
}

impl FixtureTruth {
    fn from_factors(variables: Vec<String>, labels: Vec<Vec<String>>, p: impl Fn(&[usize]) -> f64) -> Self {
        let dims: Vec<usize> = labels.iter().map(Vec::len).collect();
        let total: usize = dims.iter().product();
        let mut joint = Vec::with_capacity(total);
        let mut idx = vec![0; dims.len()];
        for _ in 0..total {
            joint.push(p(&idx));
            for d in (0..dims.len()).rev() {
                idx[d] += 1;
                if idx[d] < dims[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        Self { variables, labels, joint }
    }

    /// Cell key: labels joined by `|`.
    pub fn keys(&self) -> Vec<String> {
        let dims: Vec<usize> = self.labels.iter().map(Vec::len).collect();
        (0..dims.iter().product::<usize>())
            .map(|mut flat| {
                let mut parts = vec![String::new(); dims.len()];
                for d in (0..dims.len()).rev() {
                    parts[d] = self.labels[d][flat % dims[d]].clone();
                    flat /= dims[d];
                }
                parts.join("|")
            })
            .collect()
    }

    /// Marginal probabilities of `variable`, in label order.
    pub fn marginal(&self, variable: &str) -> Result<Vec<f64>> {
        let v = self
            .variables
            .iter()
            .position(|n| n == variable)
            .ok_or_else(|| Error::schema(variable, "not part of the fixture truth"))?;
        let dims: Vec<usize> = self.labels.iter().map(Vec::len).collect();
        let stride: usize = dims[v + 1..].iter().product();
        let mut out = vec![0.0; dims[v]];
        for (flat, p) in self.joint.iter().enumerate() {
            out[(flat / stride) % dims[v]] += p;
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = TruthFile {
            variables: self.variables.clone(),
            labels: self.labels.clone(),
            joint: self.keys().into_iter().zip(self.joint.iter().copied()).collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: TruthFile = serde_json::from_str(text)?;
        let mut t = Self {
            variables: file.variables,
            labels: file.labels,
            joint: Vec::new(),
        };
        t.joint = t
            .keys()
            .iter()
            .map(|k| {
                file.joint
                    .get(k)
                    .copied()
                    .ok_or_else(|| Error::schema(k.clone(), "cell missing from truth file"))
            })
            .collect::<Result<_>>()?;
        Ok(t)
    }
}

pub struct SurveyFixture {
    pub schema: SurveySchema,
    pub records: Vec<RawRecord>,
    pub truth: FixtureTruth,
}

fn truncated_moments(mu: f64, sigma: f64, lo: f64, hi: f64) -> (f64, f64) {
    let n = Normal::standard();
    let (a, b) = ((lo - mu) / sigma, (hi - mu) / sigma);
    let z = n.cdf(b) - n.cdf(a);
    let (pa, pb) = (n.pdf(a), n.pdf(b));
    let m = (pa - pb) / z;
    let mean = mu + sigma * m;
    let var = sigma * sigma * (1.0 + (a * pa - b * pb) / z - m * m);
    (mean, var.sqrt())
}

/// Location and scale `(μ, s)` of a normal whose restriction to `[lo, hi]`
/// has the requested mean and standard deviation.
pub fn calibrate_truncated_normal(mean: f64, sd: f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let (mut mu, mut s) = (mean, sd);
    for _ in 0..500 {
        let (m, d) = truncated_moments(mu, s, lo, hi);
        if (m - mean).abs() < 1e-12 && (d - sd).abs() < 1e-12 {
            return Ok((mu, s));
        }
        mu += mean - m;
        s *= sd / d;
        if !mu.is_finite() || !s.is_finite() || s <= 0.0 {
            break;
        }
    }
    Err(Error::Parameter(format!(
        "no normal restricted to [{lo}, {hi}] has mean {mean} and sd {sd}"
    )))
}

fn uniform_in_disk(rng: &mut SeededRng, centre: (f64, f64), radius: f64) -> (f64, f64) {
    let r = radius * rng.uniform().sqrt();
    let theta = 2.0 * std::f64::consts::PI * rng.uniform();
    (centre.0 + r * theta.cos(), centre.1 + r * theta.sin())
}

fn home_point(rng: &mut SeededRng, centre: (f64, f64), sd: f64, max: f64) -> (f64, f64) {
    loop {
        let (dx, dy) = (sd * rng.normal(), sd * rng.normal());
        if dx.hypot(dy) <= max {
            return (centre.0 + dx, centre.1 + dy);
        }
    }
}

fn chain(home: (f64, f64), stops: &[((f64, f64), &str)], home_label: &str) -> Vec<Trip> {
    let mut trips = Vec::with_capacity(stops.len() + 1);
    let mut at = home;
    for &(p, purpose) in stops {
        trips.push(Trip {
            origin: at,
            destination: p,
            purpose: purpose.to_string(),
        });
        at = p;
    }
    trips.push(Trip {
        origin: at,
        destination: home,
        purpose: home_label.to_string(),
    });
    trips
}

const STATUS: [&str; 4] = ["Worker", "Student", "Retired", "Other"];

/// `p(status | age group)` over decade groups `[5,15) … [85,95]`.
fn status_given_group(g: usize) -> [f64; 4] {
    match g {
        0 => [0.0, 0.95, 0.0, 0.05],
        1 => [0.35, 0.55, 0.0, 0.10],
        2..=4 => [0.80, 0.05, 0.0, 0.15],
        5 => [0.55, 0.0, 0.30, 0.15],
        _ => [0.05, 0.0, 0.85, 0.10],
    }
}

/// `p(Mobile | status)`.
fn mobile_given_status(s: usize) -> f64 {
    [0.92, 0.90, 0.70, 0.75][s]
}

/// `p(Licence | age group, sex)`, sex 0 = M, 1 = F.
fn licence_given(g: usize, sex: usize) -> f64 {
    let (m, f) = match g {
        0 => (0.0, 0.0),
        1 => (0.55, 0.50),
        2..=5 => (0.90, 0.85),
        _ => (0.80, 0.60),
    };
    if sex == 0 {
        m
    } else {
        f
    }
}

const P_FEMALE: f64 = 0.51;

/// Age-group probabilities after rounding ages to whole years.
fn age_group_probs(mu: f64, s: f64) -> Vec<f64> {
    let n = Normal::new(mu, s).expect("valid normal");
    let z = n.cdf(AGE_MAX) - n.cdf(AGE_MIN);
    let edges = age_group_edges();
    let groups = edges.len() - 1;
    (0..groups)
        .map(|g| {
            let lo = if g == 0 { AGE_MIN } else { edges[g] - 0.5 };
            let hi = if g == groups - 1 { AGE_MAX } else { edges[g + 1] - 0.5 };
            (n.cdf(hi) - n.cdf(lo)) / z
        })
        .collect()
}

fn age_group(age: f64) -> usize {
    let edges = age_group_edges();
    let g = ((age - edges[0]) / 10.0).floor() as usize;
    g.min(edges.len() - 2)
}

/// Survey-shaped population of `n` persons.
///
/// Ages follow a normal restricted to `[5, 95]` whose restricted mean and sd
/// are 43 and 20, rounded to whole years. Occupation depends on age group,
/// mobility on occupation, and licence on age group and sex. Residences
/// scatter around a city centre; each tour visits 1 to 5 activity points
/// drawn uniformly in a 15 km disk around home and returns home.
pub fn synth_fixture(seed: u64, n: usize) -> Result<SurveyFixture> {
    if n == 0 {
        return Err(Error::Parameter("fixture size must be >= 1".into()));
    }
    let schema = SurveySchema::survey(20);
    let (mu, s) = calibrate_truncated_normal(AGE_MEAN, AGE_SD, AGE_MIN, AGE_MAX)?;
    let mut rng = SeededRng::new(seed);
    let leisure = ["Shopping", "Leisure", "Other"];
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let age = loop {
            let x = mu + s * rng.normal();
            if (AGE_MIN..=AGE_MAX).contains(&x) {
                break x.round();
            }
        };
        let g = age_group(age);
        let sex = usize::from(rng.bernoulli(P_FEMALE));
        let status = rng.categorical(&status_given_group(g));
        let mobile = rng.bernoulli(mobile_given_status(status));
        let licence = rng.bernoulli(licence_given(g, sex));
        let home = home_point(&mut rng, CITY_CENTRE, HOME_SD, HOME_MAX);

        let n_trips = MIN_TRIPS + rng.below(MAX_TRIPS - MIN_TRIPS + 1);
        let mut stops = Vec::with_capacity(n_trips - 1);
        for k in 0..n_trips - 1 {
            let p = uniform_in_disk(&mut rng, home, ACTIVITY_RADIUS);
            let purpose = match (k, status) {
                (0, 0) => "Work",
                (0, 1) => "School",
                _ => leisure[rng.below(leisure.len())],
            };
            stops.push((p, purpose));
        }
        records.push(RawRecord {
            person_id: format!("P{:06}", i + 1),
            attributes: vec![
                Value::Number(age),
                Value::Label(["M", "F"][sex].into()),
                Value::Label(if mobile { "Mobile" } else { "NotMobile" }.into()),
                Value::Label(STATUS[status].into()),
                Value::Label(if licence { "Licence" } else { "None" }.into()),
            ],
            home,
            trips: chain(home, &stops, "Home"),
        });
    }

    let groups = age_group_probs(mu, s);
    let label_sets: Vec<Vec<String>> = vec![
        schema.attributes[0].bin_labels().expect("binned age"),
        schema.attributes[1].labels().expect("labels").to_vec(),
        schema.attributes[2].labels().expect("labels").to_vec(),
        schema.attributes[3].labels().expect("labels").to_vec(),
        schema.attributes[4].labels().expect("labels").to_vec(),
    ];
    let names = schema.attributes.iter().map(|v| v.name.clone()).collect();
    let truth = FixtureTruth::from_factors(names, label_sets, |idx| {
        let (g, sex, mob, st, lic) = (idx[0], idx[1], idx[2], idx[3], idx[4]);
        let p_sex = if sex == 1 { P_FEMALE } else { 1.0 - P_FEMALE };
        let pm = mobile_given_status(st);
        let p_mob = if mob == 0 { pm } else { 1.0 - pm };
        let pl = licence_given(g, sex);
        let p_lic = if lic == 1 { pl } else { 1.0 - pl };
        groups[g] * p_sex * status_given_group(g)[st] * p_mob * p_lic
    });
    Ok(SurveyFixture { schema, records, truth })
}

/// Three categorical attributes and fixed three-trip tours.
pub fn toy_schema(max_len: usize) -> SurveySchema {
    let (cx, cy) = CITY_CENTRE;
    SurveySchema {
        attributes: vec![
            Variable::categorical("HOUSING", &["Owner", "Renter", "Other"]),
            Variable::categorical("WORKER", &["Yes", "No"]),
            Variable::categorical("TRANSIT", &["Car", "Bus", "Bike", "Walk"]),
        ],
        x_range: (cx - TOY_HALF_SPAN, cx + TOY_HALF_SPAN),
        y_range: (cy - TOY_HALF_SPAN, cy + TOY_HALF_SPAN),
        purposes: ["Home", "Work", END_LABEL, "Shop", "Other"].map(String::from).to_vec(),
        max_len,
    }
}

const TOY_HOUSING: [f64; 3] = [0.55, 0.35, 0.10];
const TOY_WORKER: [f64; 3] = [0.7, 0.5, 0.3];
const TOY_TRANSIT: [f64; 4] = [0.5, 0.25, 0.15, 0.10];

/// Toy population for fast training checks. `max_len` of the schema is
/// [`TOY_TRIPS`] + 1 so that one END step follows every tour.
pub fn toy_fixture(seed: u64, n: usize) -> SurveyFixture {
    let schema = toy_schema(TOY_TRIPS + 1);
    let mut rng = SeededRng::new(seed);
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let housing = rng.categorical(&TOY_HOUSING);
        let worker = rng.bernoulli(TOY_WORKER[housing]);
        let transit = rng.categorical(&TOY_TRANSIT);
        let home = home_point(&mut rng, CITY_CENTRE, TOY_HOME_SD, TOY_HOME_MAX);
        let first = uniform_in_disk(&mut rng, home, TOY_ACTIVITY_RADIUS);
        let second = uniform_in_disk(&mut rng, home, TOY_ACTIVITY_RADIUS);
        let second_purpose = if rng.bernoulli(0.5) { "Shop" } else { "Other" };
        let first_purpose = if worker { "Work" } else { "Shop" };
        records.push(RawRecord {
            person_id: format!("T{:06}", i + 1),
            attributes: vec![
                Value::Label(["Owner", "Renter", "Other"][housing].into()),
                Value::Label(if worker { "Yes" } else { "No" }.into()),
                Value::Label(["Car", "Bus", "Bike", "Walk"][transit].into()),
            ],
            home,
            trips: chain(home, &[(first, first_purpose), (second, second_purpose)], "Home"),
        });
    }
    let labels: Vec<Vec<String>> = schema
        .attributes
        .iter()
        .map(|v| v.labels().expect("categorical").to_vec())
        .collect();
    let names = schema.attributes.iter().map(|v| v.name.clone()).collect();
    let truth = FixtureTruth::from_factors(names, labels, |idx| {
        let pw = TOY_WORKER[idx[0]];
        TOY_HOUSING[idx[0]] * if idx[1] == 0 { pw } else { 1.0 - pw } * TOY_TRANSIT[idx[2]]
    });
    SurveyFixture { schema, records, truth }
}
