//! Alternative-mode attribute generation at the cluster level.
//!
//! For each cluster the routing provider supplies a driving itinerary and
//! candidate routes per transit sub-mode; the best route per sub-mode by
//! total journey time is decomposed into in-vehicle, walk, and residual
//! waiting time (clamped at zero). Cluster-level results are cached and
//! mapped back to the cluster's trips.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::cluster::ClusterKey;
use crate::error::Result;
use crate::providers::{DriveRoute, RoutingProvider, TransitSubmode};

/// Decomposed attributes of one routed transit alternative.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitAlternative {
    pub in_vehicle_min: f64,
    pub walk_min: f64,
    pub wait_min: f64,
    pub distance_km: f64,
    pub fare_cad: Option<f64>,
    pub agencies: Vec<String>,
    /// The residual wait came out negative and was clamped.
    pub wait_clamped: bool,
}

/// Routed attributes for every mode of one cluster.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClusterAlternatives {
    pub drive: Option<DriveRoute>,
    pub bus: Option<TransitAlternative>,
    pub subway: Option<TransitAlternative>,
    pub train: Option<TransitAlternative>,
    pub walk_viable: bool,
}

impl ClusterAlternatives {
    pub fn transit(&self, submode: TransitSubmode) -> Option<&TransitAlternative> {
        match submode {
            TransitSubmode::Bus => self.bus.as_ref(),
            TransitSubmode::Subway => self.subway.as_ref(),
            TransitSubmode::Train => self.train.as_ref(),
        }
    }
}

/// Query the provider for one cluster. Provider failure for one mode makes
/// that mode unavailable rather than failing the cluster.
pub fn generate_alternatives(
    key: &ClusterKey,
    provider: &dyn RoutingProvider,
) -> Result<ClusterAlternatives> {
    let mut out = ClusterAlternatives {
        drive: provider.drive(key).unwrap_or(None),
        walk_viable: provider.walk(key).unwrap_or(false),
        ..Default::default()
    };
    for submode in TransitSubmode::ALL {
        let routes = match provider.transit(key, submode) {
            Ok(routes) => routes,
            Err(_) => continue,
        };
        // Best route by total journey time.
        let best = routes.into_iter().min_by(|a, b| {
            a.total_min.partial_cmp(&b.total_min).expect("route times are finite")
        });
        let Some(route) = best else { continue };
        let residual = route.total_min - route.in_vehicle_min - route.walk_min;
        let alternative = TransitAlternative {
            in_vehicle_min: route.in_vehicle_min,
            walk_min: route.walk_min,
            wait_min: residual.max(0.0),
            distance_km: route.distance_km,
            fare_cad: route.fare_cad,
            agencies: route.agencies,
            wait_clamped: residual < 0.0,
        };
        match submode {
            TransitSubmode::Bus => out.bus = Some(alternative),
            TransitSubmode::Subway => out.subway = Some(alternative),
            TransitSubmode::Train => out.train = Some(alternative),
        }
    }
    Ok(out)
}

/// Cluster-keyed cache around [`generate_alternatives`], persistable to a
/// delimited cache file so live providers need not be re-queried.
pub struct AlternativeCache<'a> {
    provider: &'a dyn RoutingProvider,
    cache: Mutex<HashMap<String, ClusterAlternatives>>,
}

impl<'a> AlternativeCache<'a> {
    pub fn new(provider: &'a dyn RoutingProvider) -> AlternativeCache<'a> {
        AlternativeCache { provider, cache: Mutex::new(HashMap::new()) }
    }

    /// Start from previously saved cache contents.
    pub fn with_preloaded(
        provider: &'a dyn RoutingProvider,
        cache_csv: &str,
    ) -> Result<AlternativeCache<'a>> {
        let cache = Self::parse_cache_csv(cache_csv)?;
        Ok(AlternativeCache { provider, cache: Mutex::new(cache) })
    }

    pub fn get(&self, key: &ClusterKey) -> Result<ClusterAlternatives> {
        let cache_key = key.cache_key();
        if let Some(hit) = self.cache.lock().unwrap().get(&cache_key) {
            return Ok(hit.clone());
        }
        let fresh = generate_alternatives(key, self.provider)?;
        self.cache.lock().unwrap().insert(cache_key, fresh.clone());
        Ok(fresh)
    }

    pub fn len(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Serialize the cache, one row per cluster and mode, keyed by the
    /// cluster key. Agencies are joined with '|'.
    pub fn to_cache_csv(&self) -> String {
        let mut out = String::from(
            "cluster_key;mode;time_min;in_vehicle_min;walk_min;wait_min;distance_km;fare_cad;agencies;wait_clamped;walk_viable\n",
        );
        let cache = self.cache.lock().unwrap();
        let mut keys: Vec<&String> = cache.keys().collect();
        keys.sort();
        for key in keys {
            let entry = &cache[key];
            if let Some(d) = entry.drive {
                out.push_str(&format!(
                    "{key};drive;{};;;;{};;;;{}\n",
                    d.time_min,
                    d.distance_km,
                    entry.walk_viable as u8
                ));
            } else {
                out.push_str(&format!("{key};none;;;;;;;;;{}\n", entry.walk_viable as u8));
            }
            for (mode, alt) in [("bus", &entry.bus), ("subway", &entry.subway), ("train", &entry.train)]
            {
                if let Some(t) = alt {
                    out.push_str(&format!(
                        "{key};{mode};;{};{};{};{};{};{};{};\n",
                        t.in_vehicle_min,
                        t.walk_min,
                        t.wait_min,
                        t.distance_km,
                        t.fare_cad.map(|f| f.to_string()).unwrap_or_default(),
                        t.agencies.join("|"),
                        t.wait_clamped as u8,
                    ));
                }
            }
        }
        out
    }

    fn parse_cache_csv(text: &str) -> Result<HashMap<String, ClusterAlternatives>> {
        use crate::error::PipelineError;
        let mut cache: HashMap<String, ClusterAlternatives> = HashMap::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let row = i as u64 + 1;
            let fields: Vec<&str> = line.split(';').collect();
            if fields.len() != 11 {
                return Err(PipelineError::MalformedRow {
                    row,
                    message: format!("routing cache: expected 11 fields, got {}", fields.len()),
                });
            }
            let parse = |s: &str, what: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|_| PipelineError::MalformedRow {
                    row,
                    message: format!("routing cache {what}: '{s}'"),
                })
            };
            let entry = cache.entry(fields[0].to_string()).or_default();
            entry.walk_viable |= fields[10] == "1";
            match fields[1] {
                "drive" => {
                    entry.drive = Some(DriveRoute {
                        time_min: parse(fields[2], "time_min")?,
                        distance_km: parse(fields[6], "distance_km")?,
                    });
                }
                "none" => {}
                mode @ ("bus" | "subway" | "train") => {
                    let alt = TransitAlternative {
                        in_vehicle_min: parse(fields[3], "in_vehicle_min")?,
                        walk_min: parse(fields[4], "walk_min")?,
                        wait_min: parse(fields[5], "wait_min")?,
                        distance_km: parse(fields[6], "distance_km")?,
                        fare_cad: if fields[7].is_empty() {
                            None
                        } else {
                            Some(parse(fields[7], "fare_cad")?)
                        },
                        agencies: if fields[8].is_empty() {
                            Vec::new()
                        } else {
                            fields[8].split('|').map(|s| s.to_string()).collect()
                        },
                        wait_clamped: fields[9] == "1",
                    };
                    match mode {
                        "bus" => entry.bus = Some(alt),
                        "subway" => entry.subway = Some(alt),
                        _ => entry.train = Some(alt),
                    }
                }
                other => {
                    return Err(PipelineError::MalformedRow {
                        row,
                        message: format!("routing cache: unknown mode '{other}'"),
                    })
                }
            }
        }
        Ok(cache)
    }
}
