use serde::{Deserialize, Serialize};

use super::{srmse, Histogram, SrmseReport};
use crate::data::RawRecord;
use crate::error::Result;

pub const TOUR_BIN_KM: f64 = 1.0;
pub const TOUR_MAX_KM: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TourLengthReport {
    /// Segment lengths in km, in record and trip order.
    pub distances: Vec<f64>,
    pub histogram: Histogram,
    pub comparison: Option<SrmseReport>,
}

fn segment_km(records: &[RawRecord]) -> Vec<f64> {
    records
        .iter()
        .flat_map(|r| &r.trips)
        .map(|t| (t.destination.0 - t.origin.0).hypot(t.destination.1 - t.origin.1) / 1000.0)
        .collect()
}

/// 1 km bins over `[0, 30]` (the last one closed) plus an overflow bin.
pub fn tour_histogram(distances_km: &[f64]) -> Histogram {
    let regular = (TOUR_MAX_KM / TOUR_BIN_KM) as usize;
    let mut labels: Vec<String> = (0..regular)
        .map(|i| {
            let (lo, hi) = (i as f64 * TOUR_BIN_KM, (i + 1) as f64 * TOUR_BIN_KM);
            if i + 1 == regular {
                format!("[{lo},{hi}]")
            } else {
                format!("[{lo},{hi})")
            }
        })
        .collect();
    labels.push(format!(">{TOUR_MAX_KM}"));
    let mut counts = vec![0u64; regular + 1];
    for &d in distances_km {
        let i = if d > TOUR_MAX_KM {
            regular
        } else {
            ((d / TOUR_BIN_KM).floor() as usize).min(regular - 1)
        };
        counts[i] += 1;
    }
    Histogram::from_counts(vec!["segment_km".into()], labels, counts)
}

/// Segment lengths of `records`, optionally compared with a reference set.
pub fn tour_lengths(records: &[RawRecord], reference: Option<&[RawRecord]>) -> Result<TourLengthReport> {
    let distances = segment_km(records);
    let histogram = tour_histogram(&distances);
    let comparison = match reference {
        Some(r) => Some(srmse(&histogram, &tour_histogram(&segment_km(r)))?),
        None => None,
    };
    Ok(TourLengthReport {
        distances,
        histogram,
        comparison,
    })
}
