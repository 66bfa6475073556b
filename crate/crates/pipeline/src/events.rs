//! GPS event stream: parsing, validation, and episode assembly.

use std::path::Path;

use chrono::{DateTime, Utc};

use crate::error::{PipelineError, Result};

/// Kind of a recorded GPS event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Waypoint,
    Stay,
    Track,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Waypoint => "waypoint",
            EventKind::Stay => "stay",
            EventKind::Track => "track",
        }
    }

    pub fn from_name(name: &str) -> Option<EventKind> {
        match name {
            "waypoint" => Some(EventKind::Waypoint),
            "stay" => Some(EventKind::Stay),
            "track" => Some(EventKind::Track),
            _ => None,
        }
    }
}

/// One timestamped GPS event.
#[derive(Debug, Clone, PartialEq)]
pub struct GpsEvent {
    pub person_id: String,
    pub timestamp: DateTime<Utc>,
    pub latitude: f64,
    pub longitude: f64,
    pub kind: EventKind,
    /// Inferred mode for track events (e.g. "walk", "bus", "car").
    pub mode_label: Option<String>,
}

impl GpsEvent {
    pub fn validate(&self) -> Result<()> {
        if self.latitude.abs() > 90.0 || self.longitude.abs() > 180.0 {
            return Err(PipelineError::BadCoordinate {
                lat: self.latitude,
                lon: self.longitude,
            });
        }
        Ok(())
    }
}

/// Great-circle distance in metres (haversine).
pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    const R: f64 = 6_371_000.0;
    let (phi1, phi2) = (lat1.to_radians(), lat2.to_radians());
    let dphi = (lat2 - lat1).to_radians();
    let dlambda = (lon2 - lon1).to_radians();
    let a = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * R * a.sqrt().asin()
}

/// Implied speed between two events, metres per second. Zero elapsed time
/// with any displacement reads as infinite speed.
pub fn implied_speed_ms(a: &GpsEvent, b: &GpsEvent) -> f64 {
    let d = haversine_m(a.latitude, a.longitude, b.latitude, b.longitude);
    let dt = (b.timestamp - a.timestamp).num_milliseconds() as f64 / 1000.0;
    if dt <= 0.0 {
        if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        d / dt
    }
}

/// Read a GPS events file: `person_id, timestamp (ISO-8601), lat, lon, kind,
/// mode_label`. Events must be strictly increasing in time per person.
pub fn read_events(path: impl AsRef<Path>) -> Result<Vec<GpsEvent>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| PipelineError::MalformedRow {
            row: 0,
            message: format!("events file missing column '{name}'"),
        })
    };
    let c_person = col("person_id")?;
    let c_ts = col("timestamp")?;
    let c_lat = col("lat")?;
    let c_lon = col("lon")?;
    let c_kind = col("kind")?;
    let c_mode = headers.iter().position(|h| h == "mode_label");

    let mut events = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i as u64 + 2;
        let record = record?;
        let get = |c: usize| record.get(c).unwrap_or("");
        let timestamp = DateTime::parse_from_rfc3339(get(c_ts))
            .map_err(|e| PipelineError::MalformedRow {
                row,
                message: format!("timestamp: {e}"),
            })?
            .with_timezone(&Utc);
        let parse_coord = |s: &str, what: &str| {
            s.parse::<f64>().map_err(|_| PipelineError::MalformedRow {
                row,
                message: format!("{what}: expected a number, got '{s}'"),
            })
        };
        let kind =
            EventKind::from_name(get(c_kind)).ok_or_else(|| PipelineError::MalformedRow {
                row,
                message: format!("kind: unknown event kind '{}'", get(c_kind)),
            })?;
        let event = GpsEvent {
            person_id: get(c_person).to_string(),
            timestamp,
            latitude: parse_coord(get(c_lat), "lat")?,
            longitude: parse_coord(get(c_lon), "lon")?,
            kind,
            mode_label: c_mode
                .map(|c| get(c))
                .filter(|s| !s.is_empty())
                .map(|s| s.to_string()),
        };
        event.validate()?;
        events.push(event);
    }
    validate_monotone(&events)?;
    Ok(events)
}

/// Enforce strictly increasing timestamps within each person (input order).
pub fn validate_monotone(events: &[GpsEvent]) -> Result<()> {
    let mut last: std::collections::HashMap<&str, (usize, DateTime<Utc>)> =
        std::collections::HashMap::new();
    for (i, e) in events.iter().enumerate() {
        if let Some((_, t)) = last.get(e.person_id.as_str()) {
            if e.timestamp <= *t {
                return Err(PipelineError::NonMonotoneTimestamps {
                    person_id: e.person_id.clone(),
                    index: i,
                });
            }
        }
        last.insert(e.person_id.as_str(), (i, e.timestamp));
    }
    Ok(())
}

/// A maximal run of same-kind consecutive events for one person. Tracks keep
/// their mode label; a change of label starts a new episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub person_id: String,
    pub kind: EventKind,
    pub mode_label: Option<String>,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub start_lat: f64,
    pub start_lon: f64,
    pub end_lat: f64,
    pub end_lon: f64,
    /// Indices into the person's event slice.
    pub event_indices: Vec<usize>,
}

impl Episode {
    pub fn duration_min(&self) -> f64 {
        (self.end - self.start).num_milliseconds() as f64 / 60_000.0
    }
}

/// Group one person's time-ordered events into episodes.
pub fn build_episodes(events: &[GpsEvent]) -> Vec<Episode> {
    let mut episodes: Vec<Episode> = Vec::new();
    for (i, e) in events.iter().enumerate() {
        let start_new = match episodes.last() {
            None => true,
            Some(ep) => ep.kind != e.kind || ep.mode_label != e.mode_label,
        };
        if start_new {
            episodes.push(Episode {
                person_id: e.person_id.clone(),
                kind: e.kind,
                mode_label: e.mode_label.clone(),
                start: e.timestamp,
                end: e.timestamp,
                start_lat: e.latitude,
                start_lon: e.longitude,
                end_lat: e.latitude,
                end_lon: e.longitude,
                event_indices: vec![i],
            });
        } else {
            let ep = episodes.last_mut().unwrap();
            ep.end = e.timestamp;
            ep.end_lat = e.latitude;
            ep.end_lon = e.longitude;
            ep.event_indices.push(i);
        }
    }
    episodes
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    pub(crate) fn ev(
        pid: &str,
        minutes: i64,
        lat: f64,
        lon: f64,
        kind: EventKind,
        mode: Option<&str>,
    ) -> GpsEvent {
        GpsEvent {
            person_id: pid.to_string(),
            timestamp: Utc.with_ymd_and_hms(2025, 3, 10, 8, 0, 0).unwrap()
                + chrono::Duration::minutes(minutes),
            latitude: lat,
            longitude: lon,
            kind,
            mode_label: mode.map(|m| m.to_string()),
        }
    }

    #[test]
    fn haversine_matches_a_known_distance() {
        // Toronto Union Station to Toronto City Hall is roughly 1.1 km.
        let d = haversine_m(43.6453, -79.3806, 43.6534, -79.3841);
        assert!((d - 950.0).abs() < 250.0, "distance {d}");
    }

    #[test]
    fn implied_speed_handles_zero_elapsed_time() {
        let a = ev("p", 0, 43.65, -79.38, EventKind::Waypoint, None);
        let mut b = ev("p", 0, 43.66, -79.38, EventKind::Waypoint, None);
        b.timestamp = a.timestamp;
        assert!(implied_speed_ms(&a, &b).is_infinite());
        let c = a.clone();
        assert_eq!(implied_speed_ms(&a, &c), 0.0);
    }

    #[test]
    fn monotone_validation_catches_regressions() {
        let events = vec![
            ev("p", 0, 43.65, -79.38, EventKind::Waypoint, None),
            ev("p", -1, 43.65, -79.38, EventKind::Waypoint, None),
        ];
        assert!(matches!(
            validate_monotone(&events),
            Err(PipelineError::NonMonotoneTimestamps { index: 1, .. })
        ));
    }

    #[test]
    fn episodes_split_on_kind_and_mode_changes() {
        let events = vec![
            ev("p", 0, 43.650, -79.380, EventKind::Track, Some("walk")),
            ev("p", 2, 43.651, -79.381, EventKind::Track, Some("walk")),
            ev("p", 4, 43.652, -79.382, EventKind::Track, Some("bus")),
            ev("p", 9, 43.660, -79.390, EventKind::Track, Some("bus")),
            ev("p", 12, 43.660, -79.390, EventKind::Stay, None),
        ];
        let episodes = build_episodes(&events);
        assert_eq!(episodes.len(), 3);
        assert_eq!(episodes[0].mode_label.as_deref(), Some("walk"));
        assert_eq!(episodes[0].event_indices, vec![0, 1]);
        assert_eq!(episodes[1].mode_label.as_deref(), Some("bus"));
        assert!((episodes[1].duration_min() - 5.0).abs() < 1e-9);
        assert_eq!(episodes[2].kind, EventKind::Stay);
    }

    #[test]
    fn out_of_range_coordinates_are_rejected() {
        let mut e = ev("p", 0, 91.0, 0.0, EventKind::Waypoint, None);
        assert!(e.validate().is_err());
        e.latitude = 45.0;
        e.longitude = -181.0;
        assert!(e.validate().is_err());
    }
}
