//! Spatial-temporal trip clustering for alternative generation.
//!
//! Origins and destinations are rounded to three decimal places of latitude
//! and longitude (about 100 m) and departures binned into five periods.
//! Trips sharing the rounded OD pair and period form one cluster and share
//! one set of routed alternatives.

use chrono::{DateTime, Timelike, Utc};
use modechoice_core::choice_data::Period;

/// Round a coordinate to exactly three decimals (half away from zero).
pub fn round3(value: f64) -> f64 {
    (value * 1000.0).round() / 1000.0
}

/// Departure period bins. The five names are fixed; the clock boundaries
/// are conventional peak definitions for the study regions.
pub fn period_of(departure: &DateTime<Utc>) -> Period {
    let minutes = departure.hour() * 60 + departure.minute();
    match minutes {
        0..=389 => Period::Night,       // 00:00-06:29
        390..=569 => Period::AmPeak,    // 06:30-09:29
        570..=929 => Period::Midday,    // 09:30-15:29
        930..=1109 => Period::PmPeak,   // 15:30-18:29
        _ => Period::Evening,           // 18:30-23:59
    }
}

/// Cluster key: rounded origin and destination plus the departure period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterKey {
    pub origin_lat3: f64,
    pub origin_lon3: f64,
    pub dest_lat3: f64,
    pub dest_lon3: f64,
    pub period: Period,
}

impl ClusterKey {
    pub fn new(
        origin: (f64, f64),
        destination: (f64, f64),
        departure: &DateTime<Utc>,
    ) -> ClusterKey {
        ClusterKey {
            origin_lat3: round3(origin.0),
            origin_lon3: round3(origin.1),
            dest_lat3: round3(destination.0),
            dest_lon3: round3(destination.1),
            period: period_of(departure),
        }
    }

    /// Stable textual key for cache files and maps.
    pub fn cache_key(&self) -> String {
        format!(
            "{:.3},{:.3},{:.3},{:.3},{}",
            self.origin_lat3,
            self.origin_lon3,
            self.dest_lat3,
            self.dest_lon3,
            self.period.name()
        )
    }
}

impl Eq for ClusterKey {}

impl std::hash::Hash for ClusterKey {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        // Coordinates are exact multiples of 0.001 after rounding; hash the
        // integer grid.
        ((self.origin_lat3 * 1000.0).round() as i64).hash(state);
        ((self.origin_lon3 * 1000.0).round() as i64).hash(state);
        ((self.dest_lat3 * 1000.0).round() as i64).hash(state);
        ((self.dest_lon3 * 1000.0).round() as i64).hash(state);
        self.period.name().hash(state);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn at(h: u32, m: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2025, 3, 10, h, m, 0).unwrap()
    }

    #[test]
    fn rounding_keeps_exactly_three_decimals() {
        assert_eq!(round3(43.65321), 43.653);
        assert_eq!(round3(-79.38291), -79.383);
        assert_eq!(round3(43.6535), 43.654);
    }

    #[test]
    fn same_rounded_od_and_period_share_a_cluster() {
        let a = ClusterKey::new((43.65321, -79.38291), (43.7001, -79.4002), &at(8, 0));
        let b = ClusterKey::new((43.65299, -79.38311), (43.70009, -79.40018), &at(8, 45));
        assert_eq!(a, b);
        assert_eq!(a.cache_key(), b.cache_key());
    }

    #[test]
    fn different_periods_split_clusters() {
        let a = ClusterKey::new((43.653, -79.383), (43.700, -79.400), &at(8, 0));
        let b = ClusterKey::new((43.653, -79.383), (43.700, -79.400), &at(12, 0));
        assert_ne!(a, b);
    }

    #[test]
    fn period_bins_have_the_documented_boundaries() {
        assert_eq!(period_of(&at(0, 0)), Period::Night);
        assert_eq!(period_of(&at(6, 29)), Period::Night);
        assert_eq!(period_of(&at(6, 30)), Period::AmPeak);
        assert_eq!(period_of(&at(9, 29)), Period::AmPeak);
        assert_eq!(period_of(&at(9, 30)), Period::Midday);
        assert_eq!(period_of(&at(15, 29)), Period::Midday);
        assert_eq!(period_of(&at(15, 30)), Period::PmPeak);
        assert_eq!(period_of(&at(18, 29)), Period::PmPeak);
        assert_eq!(period_of(&at(18, 30)), Period::Evening);
        assert_eq!(period_of(&at(23, 59)), Period::Evening);
    }

    #[test]
    fn clustering_is_idempotent() {
        let key = ClusterKey::new((43.65321, -79.38291), (43.7001, -79.4002), &at(8, 0));
        let again = ClusterKey::new(
            (key.origin_lat3, key.origin_lon3),
            (key.dest_lat3, key.dest_lon3),
            &at(8, 0),
        );
        assert_eq!(key, again);
    }
}
