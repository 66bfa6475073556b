//! Trip cost estimation.
//!
//! Car operating cost is a marginal per-kilometre rate (fixed ownership
//! charges are sunk). Transit fares follow a three-tier hierarchy: the fare
//! reported by the routing provider, then a curated agency fare table, then
//! a default fallback. Multi-agency trips pay the maximum single-agency
//! fare, reflecting one-fare transfer policies. Walking and cycling are
//! free.

use std::collections::HashMap;

use modechoice_core::choice_data::Mode;

/// Marginal car operating rate, CAD per kilometre.
pub const CAR_COST_PER_KM: f64 = 0.75;
/// Default transit fare when neither the provider nor the table knows one.
pub const DEFAULT_TRANSIT_FARE: f64 = 3.50;

/// Agency name -> single-ride fare.
#[derive(Debug, Clone, Default)]
pub struct FareTable {
    fares: HashMap<String, f64>,
}

impl FareTable {
    pub fn new() -> FareTable {
        FareTable::default()
    }

    pub fn with_fare(mut self, agency: &str, fare: f64) -> FareTable {
        self.fares.insert(agency.to_string(), fare);
        self
    }

    pub fn get(&self, agency: &str) -> Option<f64> {
        self.fares.get(agency).copied()
    }

    /// Bundled fares for the two study regions' major operators.
    pub fn bundled() -> FareTable {
        FareTable::new()
            .with_fare("metro-a", 3.25)
            .with_fare("regional-b", 3.50)
            .with_fare("ttc", 3.30)
            .with_fare("go", 3.70)
            .with_fare("stm", 3.50)
            .with_fare("miway", 3.25)
            .with_fare("yrt", 3.88)
            .with_fare("brampton", 3.10)
    }
}

/// Estimate the out-of-pocket cost of one trip by one mode.
///
/// `provider_fare` is the fare reported by the routing provider, when any;
/// `agencies` lists the operators along the itinerary (transit only).
pub fn estimate_cost(
    mode: Mode,
    distance_km: f64,
    provider_fare: Option<f64>,
    agencies: &[String],
    fare_table: &FareTable,
) -> f64 {
    match mode {
        Mode::Car => CAR_COST_PER_KM * distance_km,
        Mode::Walk | Mode::Bicycle => 0.0,
        Mode::Bus | Mode::Subway | Mode::Train => {
            if let Some(fare) = provider_fare {
                return fare;
            }
            let known: Vec<f64> = agencies.iter().filter_map(|a| fare_table.get(a)).collect();
            if known.is_empty() {
                DEFAULT_TRANSIT_FARE
            } else {
                known.into_iter().fold(f64::NEG_INFINITY, f64::max)
            }
        }
        // Synthetic e-mobility pricing: unlock plus a per-minute rate is the
        // caller's concern; the cost module treats it like a provider fare.
        Mode::EMobility => provider_fare.unwrap_or(DEFAULT_TRANSIT_FARE),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn car_cost_is_the_marginal_rate() {
        assert_eq!(estimate_cost(Mode::Car, 10.0, None, &[], &FareTable::new()), 7.50);
    }

    #[test]
    fn multi_agency_trips_pay_the_maximum_single_fare() {
        let table = FareTable::new().with_fare("a", 3.25).with_fare("b", 3.50);
        let agencies = vec!["a".to_string(), "b".to_string()];
        assert_eq!(estimate_cost(Mode::Subway, 8.0, None, &agencies, &table), 3.50);
    }

    #[test]
    fn unknown_agency_without_provider_fare_falls_back_to_default() {
        let agencies = vec!["mystery".to_string()];
        assert_eq!(
            estimate_cost(Mode::Bus, 4.0, None, &agencies, &FareTable::new()),
            DEFAULT_TRANSIT_FARE
        );
    }

    #[test]
    fn provider_fare_wins_over_the_table() {
        let table = FareTable::new().with_fare("a", 3.25);
        let agencies = vec!["a".to_string()];
        assert_eq!(estimate_cost(Mode::Train, 20.0, Some(5.10), &agencies, &table), 5.10);
    }

    #[test]
    fn active_modes_are_free() {
        assert_eq!(estimate_cost(Mode::Walk, 3.0, None, &[], &FareTable::new()), 0.0);
        assert_eq!(estimate_cost(Mode::Bicycle, 3.0, Some(9.0), &[], &FareTable::new()), 0.0);
    }

    proptest! {
        #[test]
        fn cost_is_total_finite_and_nonnegative(
            dist in 0.0..300.0f64,
            fare in proptest::option::of(0.0..20.0f64),
        ) {
            for mode in Mode::ALL {
                let c = estimate_cost(mode, dist, fare, &[], &FareTable::bundled());
                prop_assert!(c.is_finite() && c >= 0.0);
            }
        }
    }
}
