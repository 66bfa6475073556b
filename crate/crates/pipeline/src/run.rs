//! Pipeline orchestration: GPS events plus survey records in,
//! estimation-ready choice files out.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Utc};

use modechoice_core::choice_data::{
    build_availability, AlternativeAttributes, ChoiceObservation, Mode, PersonProfile,
    RoutedPresence, Source,
};

use crate::alternatives::AlternativeCache;
use crate::anchors::{infer_anchors, AnchorConfig, Anchors};
use crate::cluster::ClusterKey;
use crate::context::{ContextEnricher, WmoTable};
use crate::cost::{estimate_cost, FareTable};
use crate::decompose::decompose_transit_journey;
use crate::error::{PipelineError, Result};
use crate::events::{build_episodes, haversine_m, Episode, EventKind, GpsEvent};
use crate::providers::{RoutingProvider, TransitSubmode, WeatherProvider};
use crate::screen::{screen_trajectories, ScreenReport};
use crate::sp_gate::{sp_gate, GateHistory, TripPurpose};

/// Anchor proximity that marks a trip end as "at" the anchor, metres.
const ANCHOR_MATCH_M: f64 = 250.0;

/// Pipeline configuration.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub anchor: AnchorConfig,
    pub fare_table: FareTable,
    pub wmo_table_toml: Option<String>,
    /// Previously saved routing cache contents to preload.
    pub routing_cache_csv: Option<String>,
    /// Previously saved weather cache contents to preload.
    pub weather_cache_csv: Option<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            anchor: AnchorConfig::default(),
            fare_table: FareTable::bundled(),
            wmo_table_toml: None,
            routing_cache_csv: None,
            weather_cache_csv: None,
        }
    }
}

/// Summary of one pipeline run.
#[derive(Debug, Clone, Default)]
pub struct PipelineReport {
    pub screening: ScreenReport,
    pub persons_in: usize,
    pub persons_out: usize,
    pub trips_detected: usize,
    pub observations_out: usize,
    pub absorbed_walks: usize,
    pub skipped_trips: usize,
    pub anchor_failures: usize,
    pub weather_flags: usize,
    pub wait_clamps: usize,
    pub sp_eligible: usize,
    pub routing_clusters: usize,
    /// Persistable provider cache contents, keyed by cluster and by
    /// (date, rounded location) respectively.
    pub routing_cache_csv: String,
    pub weather_cache_csv: String,
}

fn mode_from_label(label: &str) -> Option<Mode> {
    match label.to_ascii_lowercase().as_str() {
        "car" | "drive" | "driving" => Some(Mode::Car),
        "bus" => Some(Mode::Bus),
        "subway" | "metro" => Some(Mode::Subway),
        "train" | "rail" | "commuter_rail" => Some(Mode::Train),
        "walk" | "walking" => Some(Mode::Walk),
        "bicycle" | "bike" | "cycling" => Some(Mode::Bicycle),
        _ => None,
    }
}

fn path_length_km(events: &[GpsEvent], episode: &Episode) -> f64 {
    let mut total = 0.0;
    for pair in episode.event_indices.windows(2) {
        let a = &events[pair[0]];
        let b = &events[pair[1]];
        total += haversine_m(a.latitude, a.longitude, b.latitude, b.longitude);
    }
    // Single-point tracks fall back to the straight-line OD distance.
    if total == 0.0 {
        total = haversine_m(
            episode.start_lat,
            episode.start_lon,
            episode.end_lat,
            episode.end_lon,
        );
    }
    total / 1000.0
}

fn near(anchor: &Option<crate::anchors::Anchor>, lat: f64, lon: f64) -> bool {
    anchor
        .as_ref()
        .map(|a| haversine_m(a.lat, a.lon, lat, lon) <= ANCHOR_MATCH_M)
        .unwrap_or(false)
}

fn classify_purpose(anchors: &Anchors, episode: &Episode) -> TripPurpose {
    let touches_work = near(&anchors.work, episode.start_lat, episode.start_lon)
        || near(&anchors.work, episode.end_lat, episode.end_lon);
    if touches_work {
        return TripPurpose::Commute;
    }
    let touches_home = near(&anchors.home, episode.start_lat, episode.start_lon)
        || near(&anchors.home, episode.end_lat, episode.end_lon);
    if touches_home {
        TripPurpose::RegularActivity
    } else {
        TripPurpose::Other
    }
}

/// Run the full pipeline over an event stream.
///
/// `survey_persons` supplies the person-level covariates (ownership,
/// perceptions, integration dimensions already folded into
/// `integration_raw`); persons without surviving GPS records are dropped.
/// Returns the observations, the updated person records (observed car use
/// folded in), and the run report.
pub fn run_pipeline(
    events: &[GpsEvent],
    survey_persons: &[PersonProfile],
    routing: &dyn RoutingProvider,
    weather: &dyn WeatherProvider,
    config: &PipelineConfig,
) -> Result<(Vec<ChoiceObservation>, Vec<PersonProfile>, PipelineReport)> {
    let mut report = PipelineReport { persons_in: survey_persons.len(), ..Default::default() };

    let (clean, screening) = screen_trajectories(events);
    report.screening = screening;

    let wmo = match &config.wmo_table_toml {
        Some(text) => WmoTable::from_toml_str(text)?,
        None => WmoTable::bundled(),
    };
    let alternative_cache = match &config.routing_cache_csv {
        Some(csv) => AlternativeCache::with_preloaded(routing, csv)?,
        None => AlternativeCache::new(routing),
    };
    let enricher = ContextEnricher::new(weather, wmo);
    if let Some(csv) = &config.weather_cache_csv {
        enricher.preload_cache_csv(csv)?;
    }

    let survey: BTreeMap<&str, &PersonProfile> =
        survey_persons.iter().map(|p| (p.person_id.as_str(), p)).collect();

    let mut by_person: BTreeMap<String, Vec<GpsEvent>> = BTreeMap::new();
    for e in &clean {
        by_person.entry(e.person_id.clone()).or_default().push(e.clone());
    }

    let mut observations = Vec::new();
    let mut persons_out = Vec::new();

    for (person_id, person_events) in &by_person {
        let Some(&survey_person) = survey.get(person_id.as_str()) else {
            // GPS data without a survey record cannot enter estimation.
            continue;
        };
        let episodes = build_episodes(person_events);

        let anchors = match infer_anchors(&episodes, &config.anchor) {
            Ok(anchors) => anchors,
            Err(PipelineError::InsufficientStays { .. }) => {
                report.anchor_failures += 1;
                Anchors::default()
            }
            Err(e) => return Err(e),
        };

        // Trips are track episodes with a recognized mode label.
        let trip_indices: Vec<usize> = episodes
            .iter()
            .enumerate()
            .filter(|(_, e)| {
                e.kind == EventKind::Track
                    && e.mode_label.as_deref().and_then(mode_from_label).is_some()
            })
            .map(|(i, _)| i)
            .collect();
        report.trips_detected += trip_indices.len();

        // Transit decomposition first: absorbed walk episodes never become
        // independent observations.
        let mut absorbed: std::collections::HashSet<usize> = std::collections::HashSet::new();
        let mut decompositions: BTreeMap<usize, crate::decompose::TransitDecomposition> =
            BTreeMap::new();
        for &i in &trip_indices {
            let mode = mode_from_label(episodes[i].mode_label.as_deref().unwrap()).unwrap();
            if mode.is_transit() {
                let decomposition = decompose_transit_journey(&episodes, i)?;
                for &walk_idx in &decomposition.absorbed_walk_ids {
                    absorbed.insert(walk_idx);
                }
                decompositions.insert(i, decomposition);
            }
        }
        report.absorbed_walks += absorbed.len();

        let observed_car_use =
            trip_indices.iter().any(|&i| {
                mode_from_label(episodes[i].mode_label.as_deref().unwrap()) == Some(Mode::Car)
            });
        let mut person = survey_person.clone();
        person.car_observed = person.car_observed || observed_car_use;

        let mut history = GateHistory::new();
        let mut person_obs_count = 0usize;

        for &i in &trip_indices {
            if absorbed.contains(&i) {
                report.skipped_trips += 1;
                continue;
            }
            let episode = &episodes[i];
            let chosen = mode_from_label(episode.mode_label.as_deref().unwrap()).unwrap();
            let departure: DateTime<Utc> = episode.start;
            let key = ClusterKey::new(
                (episode.start_lat, episode.start_lon),
                (episode.end_lat, episode.end_lon),
                &departure,
            );
            let routed = alternative_cache.get(&key)?;
            for t in [&routed.bus, &routed.subway, &routed.train].into_iter().flatten() {
                if t.wait_clamped {
                    report.wait_clamps += 1;
                }
            }

            let presence = RoutedPresence {
                car: routed.drive.is_some(),
                bus: routed.bus.is_some(),
                subway: routed.subway.is_some(),
                train: routed.train.is_some(),
                walk: routed.walk_viable,
            };
            let availability = match build_availability(&person, &presence) {
                Ok(flags) => flags,
                Err(_) => [false; 6],
            };

            let observed_distance = path_length_km(person_events, episode);
            let observed_time = episode.duration_min().max(0.5);
            let context = enricher.enrich(&departure, episode.start_lat, episode.start_lon);
            if context.flagged {
                report.weather_flags += 1;
            }

            let mut slots: [Option<AlternativeAttributes>; Mode::COUNT] = Default::default();
            for (mode, available) in Mode::RP_MODES.iter().zip(availability) {
                let attrs = match mode {
                    Mode::Car => routed.drive.map(|d| AlternativeAttributes {
                        cost: estimate_cost(Mode::Car, d.distance_km, None, &[], &config.fare_table),
                        ivtt: d.time_min,
                        walk_access: 0.0,
                        distance: d.distance_km,
                        available,
                    }),
                    Mode::Bus | Mode::Subway | Mode::Train => {
                        let submode = match mode {
                            Mode::Bus => TransitSubmode::Bus,
                            Mode::Subway => TransitSubmode::Subway,
                            _ => TransitSubmode::Train,
                        };
                        routed.transit(submode).map(|t| AlternativeAttributes {
                            cost: estimate_cost(
                                *mode,
                                t.distance_km,
                                t.fare_cad,
                                &t.agencies,
                                &config.fare_table,
                            ),
                            ivtt: t.in_vehicle_min,
                            walk_access: t.walk_min,
                            distance: t.distance_km,
                            available,
                        })
                    }
                    Mode::Walk => routed.walk_viable.then(|| {
                        let distance = routed
                            .drive
                            .map(|d| d.distance_km * 0.9)
                            .unwrap_or(observed_distance.max(0.1));
                        AlternativeAttributes {
                            cost: 0.0,
                            ivtt: distance / 4.8 * 60.0,
                            walk_access: 0.0,
                            distance,
                            available,
                        }
                    }),
                    Mode::Bicycle => {
                        let distance = routed
                            .drive
                            .map(|d| d.distance_km * 0.95)
                            .unwrap_or(observed_distance.max(0.1));
                        Some(AlternativeAttributes {
                            cost: 0.0,
                            ivtt: distance / 14.0 * 60.0,
                            walk_access: 0.0,
                            distance,
                            available,
                        })
                    }
                    _ => None,
                };
                slots[mode.index()] = attrs;
            }

            // The observed trip's own attributes override the routed ones
            // for the chosen mode, which is available by observation.
            let chosen_attrs = match decompositions.get(&i) {
                Some(d) => AlternativeAttributes {
                    cost: slots[chosen.index()]
                        .map(|a| a.cost)
                        .unwrap_or_else(|| {
                            estimate_cost(chosen, observed_distance, None, &[], &config.fare_table)
                        }),
                    ivtt: d.in_vehicle,
                    walk_access: d.access_walk + d.egress_walk,
                    distance: observed_distance,
                    available: true,
                },
                None => AlternativeAttributes {
                    cost: estimate_cost(chosen, observed_distance, None, &[], &config.fare_table),
                    ivtt: observed_time,
                    walk_access: 0.0,
                    distance: observed_distance,
                    available: true,
                },
            };
            slots[chosen.index()] = Some(chosen_attrs);

            let n_available = slots
                .iter()
                .filter(|s| s.map(|a| a.available).unwrap_or(false))
                .count();
            if n_available < 2 {
                report.skipped_trips += 1;
                continue;
            }

            let purpose = classify_purpose(&anchors, episode);
            let category =
                sp_gate(chosen, observed_distance, purpose, &key, &departure, &mut history);
            if category.eligible() {
                report.sp_eligible += 1;
            }

            let obs = ChoiceObservation::new(
                format!("{person_id}-t{i:04}"),
                person_id.clone(),
                Source::Rp,
                chosen,
                slots,
                purpose == TripPurpose::Commute,
                context.snow,
                context.weather,
                context.season,
                crate::cluster::period_of(&departure),
                category.eligible(),
            )?;
            observations.push(obs);
            person_obs_count += 1;
        }

        if person_obs_count > 0 {
            persons_out.push(person);
        }
    }

    report.persons_out = persons_out.len();
    report.observations_out = observations.len();
    report.routing_clusters = alternative_cache.len();
    report.routing_cache_csv = alternative_cache.to_cache_csv();
    report.weather_cache_csv = enricher.to_cache_csv();
    Ok((observations, persons_out, report))
}

/// Run the pipeline from files and write the standard choice-data files.
#[allow(clippy::too_many_arguments)]
pub fn run_pipeline_files(
    events_path: impl AsRef<Path>,
    survey_path: impl AsRef<Path>,
    observations_out: impl AsRef<Path>,
    persons_out: impl AsRef<Path>,
    routing: &dyn RoutingProvider,
    weather: &dyn WeatherProvider,
    config: &PipelineConfig,
) -> Result<PipelineReport> {
    let events = crate::events::read_events(events_path)?;
    let survey = modechoice_core::choice_data::read_persons(survey_path.as_ref())?;
    let (observations, persons, report) =
        run_pipeline(&events, &survey, routing, weather, config)?;
    if observations.is_empty() {
        return Err(PipelineError::EmptyInput("no observations produced by the pipeline"));
    }
    modechoice_core::choice_data::write_observations(&observations_out, &observations)?;
    modechoice_core::choice_data::write_persons(persons_out, &persons)?;
    if let Some(dir) = observations_out.as_ref().parent() {
        std::fs::write(dir.join("routing_cache.csv"), &report.routing_cache_csv)?;
        std::fs::write(dir.join("weather_cache.csv"), &report.weather_cache_csv)?;
    }
    Ok(report)
}
