//! Decision gate selecting observed trips for dynamic stated-preference
//! scenarios.
//!
//! Eligibility combines four criteria: trip distance, observed mode class,
//! trip frequency (one prompt per cluster key per window), and trip purpose
//! (commute and regular activities only).

use chrono::{DateTime, Utc};
use std::collections::HashMap;

use crate::cluster::ClusterKey;
use modechoice_core::choice_data::Mode;

/// Scenario categories; the first four mirror the deployed share breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpCategory {
    CarOver5km,
    CarUnder5km,
    TransitOver1_5km,
    TransitUnder1_5km,
    Ineligible,
}

impl SpCategory {
    pub fn eligible(self) -> bool {
        self != SpCategory::Ineligible
    }

    pub fn name(self) -> &'static str {
        match self {
            SpCategory::CarOver5km => "car_over_5km",
            SpCategory::CarUnder5km => "car_under_5km",
            SpCategory::TransitOver1_5km => "pt_over_1_5km",
            SpCategory::TransitUnder1_5km => "pt_under_1_5km",
            SpCategory::Ineligible => "ineligible",
        }
    }
}

/// Trip purposes the gate accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TripPurpose {
    Commute,
    RegularActivity,
    Other,
}

/// Minimum days between prompts for the same cluster key.
pub const FREQUENCY_WINDOW_DAYS: i64 = 7;

/// Per-person prompt history: cluster key -> last gated departure.
#[derive(Debug, Default, Clone)]
pub struct GateHistory {
    last_gated: HashMap<String, DateTime<Utc>>,
}

impl GateHistory {
    pub fn new() -> GateHistory {
        GateHistory::default()
    }
}

/// Classify a trip for SP scenario generation and update the history when
/// the trip is eligible.
pub fn sp_gate(
    mode: Mode,
    distance_km: f64,
    purpose: TripPurpose,
    cluster: &ClusterKey,
    departure: &DateTime<Utc>,
    history: &mut GateHistory,
) -> SpCategory {
    if mode.is_active() || mode == Mode::EMobility {
        return SpCategory::Ineligible;
    }
    if purpose == TripPurpose::Other {
        return SpCategory::Ineligible;
    }
    let key = cluster.cache_key();
    if let Some(last) = history.last_gated.get(&key) {
        if (*departure - *last).num_days() < FREQUENCY_WINDOW_DAYS {
            return SpCategory::Ineligible;
        }
    }
    let category = match mode {
        Mode::Car => {
            if distance_km > 5.0 {
                SpCategory::CarOver5km
            } else {
                SpCategory::CarUnder5km
            }
        }
        Mode::Bus | Mode::Subway | Mode::Train => {
            if distance_km > 1.5 {
                SpCategory::TransitOver1_5km
            } else {
                SpCategory::TransitUnder1_5km
            }
        }
        _ => unreachable!("active modes returned above"),
    };
    history.last_gated.insert(key, *departure);
    category
}
