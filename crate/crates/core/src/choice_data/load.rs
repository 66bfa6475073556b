//! Ingestion and emission of the long-format delimited files.
//!
//! Observations file: one row per observation x alternative with columns
//! `person_id, obs_id, source, alt, avail, chosen, cost_cad, ivtt_min,
//! walk_min, dist_km, purpose_ws, snow, weather, season, period[, sp_trigger]`.
//! Persons file: `person_id, migrant, full_time, student, child_0_10, safe,
//! cyc_friendly, car_owned, car_observed, bike_owned, integ_econ, integ_soc,
//! integ_civic, integ_health`. Booleans are encoded 0/1.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use super::{
    AlternativeAttributes, ChoiceObservation, Dataset, Mode, Period, PersonProfile, Season,
    Source, Weather,
};
use crate::error::{CoreError, Result};
use crate::integration::{composite_index, IntegrationDimensions};

/// Load and validate a dataset from the two long-format files.
///
/// The composite integration index is computed from the four dimension
/// columns and centred over persons.
pub fn load_dataset(
    observations_path: impl AsRef<Path>,
    persons_path: impl AsRef<Path>,
) -> Result<Dataset> {
    let persons = read_persons(persons_path)?;
    let observations = read_observations(observations_path)?;
    Dataset::from_raw_parts(persons, observations)
}

fn parse_bool(field: &str, row: u64, what: &str) -> Result<bool> {
    match field.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(CoreError::MalformedRow {
            row,
            message: format!("{what}: expected 0/1, got '{other}'"),
        }),
    }
}

fn parse_f64(field: &str, row: u64, what: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| CoreError::MalformedRow {
        row,
        message: format!("{what}: expected a number, got '{field}'"),
    })
}

/// Read the persons file. Integration dimensions are folded into the
/// composite index; centring happens at dataset assembly.
pub fn read_persons(path: impl AsRef<Path>) -> Result<Vec<PersonProfile>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let required = [
        "person_id",
        "migrant",
        "full_time",
        "student",
        "child_0_10",
        "safe",
        "cyc_friendly",
        "car_owned",
        "car_observed",
        "bike_owned",
        "integ_econ",
        "integ_soc",
        "integ_civic",
        "integ_health",
    ];
    let mut cols = HashMap::new();
    for name in required {
        match col(name) {
            Some(i) => {
                cols.insert(name, i);
            }
            None => {
                return Err(CoreError::MalformedRow {
                    row: 0,
                    message: format!("persons file missing column '{name}'"),
                })
            }
        }
    }
    let mut persons = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, record) in reader.records().enumerate() {
        let row = i as u64 + 2; // 1-based, after header
        let record = record?;
        let field = |name: &str| record.get(cols[name]).unwrap_or("");
        let person_id = field("person_id").to_string();
        if person_id.is_empty() {
            return Err(CoreError::MalformedRow { row, message: "empty person_id".into() });
        }
        if !seen.insert(person_id.clone()) {
            return Err(CoreError::MalformedRow {
                row,
                message: format!("duplicate person_id '{person_id}'"),
            });
        }
        let dims = IntegrationDimensions {
            economic: parse_f64(field("integ_econ"), row, "integ_econ")?,
            social: parse_f64(field("integ_soc"), row, "integ_soc")?,
            civic: parse_f64(field("integ_civic"), row, "integ_civic")?,
            health: parse_f64(field("integ_health"), row, "integ_health")?,
        };
        let integration_raw = composite_index(&dims)?;
        persons.push(PersonProfile {
            person_id,
            migrant: parse_bool(field("migrant"), row, "migrant")?,
            full_time: parse_bool(field("full_time"), row, "full_time")?,
            student: parse_bool(field("student"), row, "student")?,
            child_0_10: parse_bool(field("child_0_10"), row, "child_0_10")?,
            safe: parse_bool(field("safe"), row, "safe")?,
            cycling_friendly: parse_bool(field("cyc_friendly"), row, "cyc_friendly")?,
            car_owned: parse_bool(field("car_owned"), row, "car_owned")?,
            car_observed: parse_bool(field("car_observed"), row, "car_observed")?,
            bike_owned: parse_bool(field("bike_owned"), row, "bike_owned")?,
            integration_raw,
            integration_centred: 0.0,
        });
    }
    if persons.is_empty() {
        return Err(CoreError::EmptyInput("persons file"));
    }
    Ok(persons)
}

struct PendingObservation {
    first_row: u64,
    person_id: String,
    source: Source,
    chosen: Vec<Mode>,
    attributes: [Option<AlternativeAttributes>; Mode::COUNT],
    purpose_work_study: bool,
    snow: bool,
    weather: Weather,
    season: Season,
    period: Period,
    sp_trigger: bool,
}

/// Read the long-format observations file, assembling one observation per
/// distinct `obs_id`. Rows of one observation must be contiguous is NOT
/// required; grouping is by id with first-seen ordering preserved.
pub fn read_observations(path: impl AsRef<Path>) -> Result<Vec<ChoiceObservation>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let required = [
        "person_id", "obs_id", "source", "alt", "avail", "chosen", "cost_cad", "ivtt_min",
        "walk_min", "dist_km", "purpose_ws", "snow", "weather", "season", "period",
    ];
    let mut cols = HashMap::new();
    for name in required {
        match col(name) {
            Some(i) => {
                cols.insert(name, i);
            }
            None => {
                return Err(CoreError::MalformedRow {
                    row: 0,
                    message: format!("observations file missing column '{name}'"),
                })
            }
        }
    }
    let sp_trigger_col = col("sp_trigger");

    let mut order: Vec<String> = Vec::new();
    let mut pending: HashMap<String, PendingObservation> = HashMap::new();

    for (i, record) in reader.records().enumerate() {
        let row = i as u64 + 2;
        let record = record?;
        let field = |name: &str| record.get(cols[name]).unwrap_or("");

        let obs_id = field("obs_id").to_string();
        let person_id = field("person_id").to_string();
        let source = Source::from_name(field("source")).ok_or_else(|| CoreError::MalformedRow {
            row,
            message: format!("source: expected RP/SP, got '{}'", field("source")),
        })?;
        let alt_name = field("alt");
        let mode = Mode::from_name(alt_name).ok_or_else(|| CoreError::MalformedRow {
            row,
            message: format!("alt: unknown alternative '{alt_name}'"),
        })?;
        let avail = parse_bool(field("avail"), row, "avail")?;
        let chosen = parse_bool(field("chosen"), row, "chosen")?;
        let attrs = AlternativeAttributes {
            cost: parse_f64(field("cost_cad"), row, "cost_cad")?,
            ivtt: parse_f64(field("ivtt_min"), row, "ivtt_min")?,
            walk_access: parse_f64(field("walk_min"), row, "walk_min")?,
            distance: parse_f64(field("dist_km"), row, "dist_km")?,
            available: avail,
        };
        let weather =
            Weather::from_name(field("weather")).ok_or_else(|| CoreError::MalformedRow {
                row,
                message: format!("weather: unknown category '{}'", field("weather")),
            })?;
        let season = Season::from_name(field("season")).ok_or_else(|| CoreError::MalformedRow {
            row,
            message: format!("season: unknown season '{}'", field("season")),
        })?;
        let period = Period::from_name(field("period")).ok_or_else(|| CoreError::MalformedRow {
            row,
            message: format!("period: unknown period '{}'", field("period")),
        })?;
        let sp_trigger = match sp_trigger_col {
            Some(idx) => parse_bool(record.get(idx).unwrap_or("0"), row, "sp_trigger")?,
            None => false,
        };
        let purpose_ws = parse_bool(field("purpose_ws"), row, "purpose_ws")?;
        let snow = parse_bool(field("snow"), row, "snow")?;

        let entry = pending.entry(obs_id.clone()).or_insert_with(|| {
            order.push(obs_id.clone());
            PendingObservation {
                first_row: row,
                person_id: person_id.clone(),
                source,
                chosen: Vec::new(),
                attributes: Default::default(),
                purpose_work_study: purpose_ws,
                snow,
                weather,
                season,
                period,
                sp_trigger,
            }
        });
        if entry.person_id != person_id {
            return Err(CoreError::MalformedRow {
                row,
                message: format!(
                    "obs '{obs_id}' spans persons '{}' and '{person_id}'",
                    entry.person_id
                ),
            });
        }
        if entry.attributes[mode.index()].is_some() {
            return Err(CoreError::DuplicateAlternative {
                row,
                obs_id,
                alt: alt_name.to_string(),
            });
        }
        entry.attributes[mode.index()] = Some(attrs);
        if chosen {
            entry.chosen.push(mode);
        }
        entry.sp_trigger |= sp_trigger;
    }

    let mut observations = Vec::with_capacity(order.len());
    for obs_id in order {
        let entry = pending.remove(&obs_id).expect("pending entry exists");
        if entry.chosen.len() != 1 {
            return Err(CoreError::ChosenCount { obs_id, count: entry.chosen.len() });
        }
        let chosen = entry.chosen[0];
        if !entry.attributes[chosen.index()].map(|a| a.available).unwrap_or(false) {
            return Err(CoreError::ChosenUnavailable { obs_id, alt: chosen.name().to_string() });
        }
        let obs = ChoiceObservation::new(
            obs_id.clone(),
            entry.person_id,
            entry.source,
            chosen,
            entry.attributes,
            entry.purpose_work_study,
            entry.snow,
            entry.weather,
            entry.season,
            entry.period,
            entry.sp_trigger,
        )
        .map_err(|e| match e {
            CoreError::TooFewAlternatives { obs_id, available } => CoreError::MalformedRow {
                row: entry.first_row,
                message: format!("obs '{obs_id}': only {available} available alternatives"),
            },
            other => other,
        })?;
        observations.push(obs);
    }
    if observations.is_empty() {
        return Err(CoreError::EmptyInput("observations file"));
    }
    Ok(observations)
}

fn b01(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// Write observations in the long format, one row per observation x alternative.
pub fn write_observations(path: impl AsRef<Path>, observations: &[ChoiceObservation]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    writeln!(
        out,
        "person_id,obs_id,source,alt,avail,chosen,cost_cad,ivtt_min,walk_min,dist_km,purpose_ws,snow,weather,season,period,sp_trigger"
    )?;
    for obs in observations {
        for mode in Mode::ALL {
            let Some(attrs) = obs.attributes(mode) else { continue };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                obs.person_id,
                obs.obs_id,
                obs.source.name(),
                mode.name(),
                b01(attrs.available),
                b01(mode == obs.chosen),
                attrs.cost,
                attrs.ivtt,
                attrs.walk_access,
                attrs.distance,
                b01(obs.purpose_work_study),
                b01(obs.snow),
                obs.weather.name(),
                obs.season.name(),
                obs.period.name(),
                b01(obs.sp_trigger),
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Write the persons file. The four dimension columns are emitted as the
/// composite value (the file stays loadable; dimension detail is only
/// available upstream of dataset assembly).
pub fn write_persons(path: impl AsRef<Path>, persons: &[PersonProfile]) -> Result<()> {
    write_persons_with_dims(path, persons, None)
}

/// Write the persons file with explicit integration dimension scores.
/// `dims[i]` must correspond to `persons[i]`.
pub fn write_persons_with_dims(
    path: impl AsRef<Path>,
    persons: &[PersonProfile],
    dims: Option<&[IntegrationDimensions]>,
) -> Result<()> {
    if let Some(d) = dims {
        if d.len() != persons.len() {
            return Err(CoreError::LengthMismatch {
                what: "persons vs dimension scores",
                left: persons.len(),
                right: d.len(),
            });
        }
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    writeln!(
        out,
        "person_id,migrant,full_time,student,child_0_10,safe,cyc_friendly,car_owned,car_observed,bike_owned,integ_econ,integ_soc,integ_civic,integ_health"
    )?;
    for (i, p) in persons.iter().enumerate() {
        let (e, s, c, h) = match dims {
            Some(d) => (d[i].economic, d[i].social, d[i].civic, d[i].health),
            None => {
                (p.integration_raw, p.integration_raw, p.integration_raw, p.integration_raw)
            }
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            p.person_id,
            b01(p.migrant),
            b01(p.full_time),
            b01(p.student),
            b01(p.child_0_10),
            b01(p.safe),
            b01(p.cycling_friendly),
            b01(p.car_owned),
            b01(p.car_observed),
            b01(p.bike_owned),
            e,
            s,
            c,
            h,
        )?;
    }
    out.flush()?;
    Ok(())
}
