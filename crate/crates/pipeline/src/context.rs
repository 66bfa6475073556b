//! Contextual enrichment: weather category and season per trip.
//!
//! Coordinates are rounded to one decimal place before querying the weather
//! provider and results are cached by (date, rounded location). WMO codes
//! map onto four categories through an exhaustive table shipped as a config
//! file; season follows the meteorological month ranges.

use std::collections::HashMap;
use std::sync::Mutex;

use chrono::{DateTime, Datelike, Timelike, Utc};
use serde::Deserialize;

use crate::error::{PipelineError, Result};
use crate::providers::WeatherProvider;
use modechoice_core::choice_data::{Season, Weather};

/// The bundled WMO code grouping table.
pub const DEFAULT_WMO_TABLE: &str = include_str!("../config/wmo_categories.toml");

/// Exhaustive WMO code -> weather category mapping.
#[derive(Debug, Clone)]
pub struct WmoTable {
    categories: HashMap<u8, Weather>,
}

#[derive(Deserialize)]
struct WmoTableFile {
    sunny: Vec<u8>,
    cloudy: Vec<u8>,
    rainy: Vec<u8>,
    snowy: Vec<u8>,
}

impl WmoTable {
    pub fn from_toml_str(text: &str) -> Result<WmoTable> {
        let raw: WmoTableFile =
            toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        let mut categories = HashMap::new();
        for (codes, category) in [
            (&raw.sunny, Weather::Sunny),
            (&raw.cloudy, Weather::Cloudy),
            (&raw.rainy, Weather::Rainy),
            (&raw.snowy, Weather::Snowy),
        ] {
            for &code in codes {
                if categories.insert(code, category).is_some() {
                    return Err(PipelineError::Config(format!(
                        "WMO code {code} assigned to two categories"
                    )));
                }
            }
        }
        Ok(WmoTable { categories })
    }

    pub fn bundled() -> WmoTable {
        WmoTable::from_toml_str(DEFAULT_WMO_TABLE).expect("bundled WMO table is valid")
    }

    pub fn category(&self, code: u8) -> Option<Weather> {
        self.categories.get(&code).copied()
    }
}

/// Season from the meteorological month ranges.
pub fn season_of(when: &DateTime<Utc>) -> Season {
    Season::from_month(when.month()).expect("chrono months are 1-12")
}

/// Round a coordinate to one decimal place for provider queries.
pub fn round1(value: f64) -> f64 {
    (value * 10.0).round() / 10.0
}

/// Weather enrichment with a (date, rounded location) cache.
pub struct ContextEnricher<'a> {
    provider: &'a dyn WeatherProvider,
    table: WmoTable,
    cache: Mutex<HashMap<(chrono::NaiveDate, i64, i64), Weather>>,
    pub provider_failures: Mutex<usize>,
}

/// Enrichment output: category, snow flag, season, and whether the provider
/// failed (category falls back to Unknown).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripContext {
    pub weather: Weather,
    pub snow: bool,
    pub season: Season,
    pub flagged: bool,
}

impl<'a> ContextEnricher<'a> {
    pub fn new(provider: &'a dyn WeatherProvider, table: WmoTable) -> ContextEnricher<'a> {
        ContextEnricher {
            provider,
            table,
            cache: Mutex::new(HashMap::new()),
            provider_failures: Mutex::new(0),
        }
    }

    /// Enrich one trip by its departure time and origin.
    pub fn enrich(&self, departure: &DateTime<Utc>, lat: f64, lon: f64) -> TripContext {
        let season = season_of(departure);
        let lat1 = round1(lat);
        let lon1 = round1(lon);
        let cache_key = (
            departure.date_naive(),
            (lat1 * 10.0).round() as i64,
            (lon1 * 10.0).round() as i64,
        );
        if let Some(weather) = self.cache.lock().unwrap().get(&cache_key) {
            return TripContext {
                weather: *weather,
                snow: *weather == Weather::Snowy,
                season,
                flagged: *weather == Weather::Unknown,
            };
        }
        let weather = match self
            .provider
            .wmo_code(departure.date_naive(), departure.hour(), lat1, lon1)
        {
            Ok(code) => self.table.category(code).unwrap_or(Weather::Unknown),
            Err(_) => {
                *self.provider_failures.lock().unwrap() += 1;
                Weather::Unknown
            }
        };
        self.cache.lock().unwrap().insert(cache_key, weather);
        TripContext {
            weather,
            snow: weather == Weather::Snowy,
            season,
            flagged: weather == Weather::Unknown,
        }
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    /// Serialize the cache: one row per (date, rounded location).
    pub fn to_cache_csv(&self) -> String {
        let mut out = String::from("date,lat1,lon1,weather\n");
        let cache = self.cache.lock().unwrap();
        let mut keys: Vec<_> = cache.keys().cloned().collect();
        keys.sort();
        for key in keys {
            let (date, lat10, lon10) = key;
            out.push_str(&format!(
                "{date},{:.1},{:.1},{}\n",
                lat10 as f64 / 10.0,
                lon10 as f64 / 10.0,
                cache[&key].name()
            ));
        }
        out
    }

    /// Preload previously saved cache contents.
    pub fn preload_cache_csv(&self, text: &str) -> Result<()> {
        let mut cache = self.cache.lock().unwrap();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let row = i as u64 + 1;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(PipelineError::MalformedRow {
                    row,
                    message: format!("weather cache: expected 4 fields, got {}", fields.len()),
                });
            }
            let date = fields[0].parse::<chrono::NaiveDate>().map_err(|e| {
                PipelineError::MalformedRow { row, message: format!("weather cache date: {e}") }
            })?;
            let coord = |s: &str| -> Result<i64> {
                s.parse::<f64>().map(|v| (v * 10.0).round() as i64).map_err(|_| {
                    PipelineError::MalformedRow {
                        row,
                        message: format!("weather cache coordinate: '{s}'"),
                    }
                })
            };
            let weather = Weather::from_name(fields[3]).ok_or_else(|| {
                PipelineError::MalformedRow {
                    row,
                    message: format!("weather cache category: '{}'", fields[3]),
                }
            })?;
            cache.insert((date, coord(fields[1])?, coord(fields[2])?), weather);
        }
        Ok(())
    }
}
