//! Scenario definition, JSON (de)serialization with validation, and a
//! seeded synthetic San Francisco-style instance.
//!
//! The on-disk format is versioned (`schema_version`) and uses explicit
//! units in field names. Zone and line ids, and the station lists of lines,
//! are 1-based in the file; everything is 0-based in memory.

use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::choice::{BehaviorParams, IncomeClassParams};
use crate::network::{build_network, MultimodalNetwork, NetworkError, TransitLine, Zone};

/// The newest (and only) schema version this build reads and writes.
pub const SCHEMA_VERSION: u32 = 1;

/// Regulator-controlled levers applied on top of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// Minimum service level: cap on the ride-hail pickup wait in every zone
    /// (hours). `None` leaves fleet allocation unconstrained.
    pub w_a_max: Option<f64>,
    /// Per-leg subsidy ($) on first/last-mile bundle trips whose ride-hail
    /// leg touches an underserved zone. Paid by the regulator: riders see the
    /// discount, the platform still collects the full fare.
    pub subsidy: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            w_a_max: None,
            subsidy: 0.0,
        }
    }
}

/// Agency-side economics: fare cap, service-quality cap, budget floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitEconomics {
    /// Maximum per-mile transit fare ($/mile).
    pub r_p_max: f64,
    /// Maximum route-averaged transit wait (hours).
    pub w_p_max: f64,
    /// Minimum hourly operating profit the agency must clear ($/hour).
    pub profit_floor: f64,
}

/// A complete problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub network: MultimodalNetwork,
    pub behavior: BehaviorParams,
    /// Potential demand, row-major [od][class] (trips/hour).
    pub lambda0: Vec<f64>,
    /// Platform cost per vehicle-hour ($).
    pub c_av_per_hour: f64,
    pub transit_economics: TransitEconomics,
    pub policy: PolicyConfig,
}

impl Scenario {
    pub fn num_zones(&self) -> usize {
        self.network.num_zones()
    }

    pub fn num_classes(&self) -> usize {
        self.behavior.num_classes()
    }

    pub fn lambda0(&self, i: usize, j: usize, k: usize) -> f64 {
        let m = self.network.num_zones();
        self.lambda0[(i * m + j) * self.behavior.num_classes() + k]
    }

    pub fn total_potential_demand(&self) -> f64 {
        self.lambda0.iter().sum()
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to parse scenario JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported schema_version {found}; this build reads version {SCHEMA_VERSION}")]
    SchemaVersion { found: u32 },
    #[error("invalid scenario at `{field}`: {reason}")]
    Validation { field: String, reason: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        field: field.into(),
        reason: reason.into(),
    }
}

// ---------------------------------------------------------------------------
// On-disk model.
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioFile {
    schema_version: u32,
    name: String,
    zones: Vec<ZoneFile>,
    lines: Vec<LineFile>,
    road_distances_miles: Vec<Vec<f64>>,
    transit_distances_miles: Vec<Vec<f64>>,
    behavior: BehaviorFile,
    /// Potential demand, nested [origin][destination][class] (trips/hour).
    potential_demand_trips_per_hour: Vec<Vec<Vec<f64>>>,
    c_av_per_hour: f64,
    transit_economics: TransitEconomicsFile,
    policy: PolicyFile,
}

#[derive(Debug, Serialize, Deserialize)]
struct ZoneFile {
    /// 1-based zone id; zones must appear in id order.
    id: usize,
    area_sq_miles: f64,
    /// Pickup wait with a single idle vehicle (hours); wait scales as
    /// matching_scale / sqrt(idle fleet).
    matching_scale_hours: f64,
    /// First/last-mile distance with a single station (miles); scales as
    /// firstmile_scale / sqrt(station count).
    firstmile_scale_miles: f64,
    station_count: u32,
    is_underserved: bool,
    population_split: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LineFile {
    /// 1-based line id; lines must appear in id order.
    id: usize,
    /// 1-based zone ids served, in route order.
    stations: Vec<usize>,
    op_cost_per_vehicle_hour: f64,
    f_min_per_hour: f64,
    f_max_per_hour: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct BehaviorFile {
    epsilon_per_dollar: f64,
    road_speed_mph: f64,
    transit_speed_mph: f64,
    walk_speed_mph: f64,
    classes: Vec<ClassFile>,
    /// Nested [origin][destination][class] ($).
    outside_cost_dollars: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ClassFile {
    wait_value_per_hour: f64,
    invehicle_value_per_hour: f64,
    money_weight: f64,
    walk_value_per_hour: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TransitEconomicsFile {
    fare_cap_per_mile: f64,
    wait_cap_hours: f64,
    profit_floor_per_hour: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct PolicyFile {
    min_service_wait_hours: Option<f64>,
    firstmile_subsidy_dollars: f64,
}

// ---------------------------------------------------------------------------
// Validation and conversion.
// ---------------------------------------------------------------------------

fn check_matrix(
    mat: &[Vec<f64>],
    m: usize,
    field: &str,
) -> Result<Vec<f64>, ScenarioError> {
    if mat.len() != m {
        return Err(invalid(field, format!("expected {m} rows, got {}", mat.len())));
    }
    let mut flat = Vec::with_capacity(m * m);
    for (i, row) in mat.iter().enumerate() {
        if row.len() != m {
            return Err(invalid(
                format!("{field}[{i}]"),
                format!("expected {m} columns, got {}", row.len()),
            ));
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(invalid(
                    format!("{field}[{i}][{j}]"),
                    "must be finite and nonnegative",
                ));
            }
            flat.push(v);
        }
    }
    Ok(flat)
}

fn check_od_class(
    t: &[Vec<Vec<f64>>],
    m: usize,
    kk: usize,
    field: &str,
) -> Result<Vec<f64>, ScenarioError> {
    if t.len() != m {
        return Err(invalid(field, format!("expected {m} origins, got {}", t.len())));
    }
    let mut flat = Vec::with_capacity(m * m * kk);
    for (i, by_dest) in t.iter().enumerate() {
        if by_dest.len() != m {
            return Err(invalid(
                format!("{field}[{i}]"),
                format!("expected {m} destinations, got {}", by_dest.len()),
            ));
        }
        for (j, by_class) in by_dest.iter().enumerate() {
            if by_class.len() != kk {
                return Err(invalid(
                    format!("{field}[{i}][{j}]"),
                    format!("expected {kk} classes, got {}", by_class.len()),
                ));
            }
            for (k, &v) in by_class.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(invalid(
                        format!("{field}[{i}][{j}][{k}]"),
                        "must be finite and nonnegative",
                    ));
                }
                flat.push(v);
            }
        }
    }
    Ok(flat)
}

fn scenario_from_file(file: ScenarioFile) -> Result<Scenario, ScenarioError> {
    if file.schema_version != SCHEMA_VERSION {
        return Err(ScenarioError::SchemaVersion {
            found: file.schema_version,
        });
    }
    let m = file.zones.len();
    if m == 0 {
        return Err(invalid("zones", "at least one zone is required"));
    }
    let kk = file.behavior.classes.len();
    if kk == 0 {
        return Err(invalid("behavior.classes", "at least one class is required"));
    }

    let mut zones = Vec::with_capacity(m);
    for (idx, z) in file.zones.iter().enumerate() {
        if z.id != idx + 1 {
            return Err(invalid(
                format!("zones[{idx}].id"),
                format!("ids must be 1..={m} in order; got {}", z.id),
            ));
        }
        if !(z.area_sq_miles > 0.0) {
            return Err(invalid(format!("zones[{idx}].area_sq_miles"), "must be positive"));
        }
        if !(z.matching_scale_hours > 0.0) {
            return Err(invalid(
                format!("zones[{idx}].matching_scale_hours"),
                "must be positive",
            ));
        }
        if !(z.firstmile_scale_miles >= 0.0) {
            return Err(invalid(
                format!("zones[{idx}].firstmile_scale_miles"),
                "must be nonnegative",
            ));
        }
        if z.station_count == 0 {
            return Err(invalid(format!("zones[{idx}].station_count"), "must be at least 1"));
        }
        if z.population_split.len() != kk {
            return Err(invalid(
                format!("zones[{idx}].population_split"),
                format!("expected {kk} entries, got {}", z.population_split.len()),
            ));
        }
        let total: f64 = z.population_split.iter().sum();
        if z.population_split.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(invalid(
                format!("zones[{idx}].population_split"),
                "entries must be nonnegative and sum to 1",
            ));
        }
        zones.push(Zone {
            id: z.id,
            area: z.area_sq_miles,
            matching_scale: z.matching_scale_hours,
            firstmile_scale: z.firstmile_scale_miles,
            station_count: z.station_count,
            is_underserved: z.is_underserved,
            population_split: z.population_split.clone(),
        });
    }

    let mut lines = Vec::with_capacity(file.lines.len());
    for (idx, l) in file.lines.iter().enumerate() {
        if l.id != idx + 1 {
            return Err(invalid(
                format!("lines[{idx}].id"),
                format!("ids must be 1..={} in order; got {}", file.lines.len(), l.id),
            ));
        }
        if l.stations.is_empty() {
            return Err(invalid(format!("lines[{idx}].stations"), "must be nonempty"));
        }
        let mut stations = Vec::with_capacity(l.stations.len());
        for (s, &zid) in l.stations.iter().enumerate() {
            if zid == 0 || zid > m {
                return Err(invalid(
                    format!("lines[{idx}].stations[{s}]"),
                    format!("zone id {zid} out of range 1..={m}"),
                ));
            }
            let z = zid - 1;
            if stations.contains(&z) {
                return Err(invalid(
                    format!("lines[{idx}].stations[{s}]"),
                    format!("zone id {zid} appears twice on the line"),
                ));
            }
            stations.push(z);
        }
        if !(l.f_min_per_hour > 0.0) {
            return Err(invalid(format!("lines[{idx}].f_min_per_hour"), "must be positive"));
        }
        if l.f_max_per_hour < l.f_min_per_hour {
            return Err(invalid(
                format!("lines[{idx}].f_max_per_hour"),
                "must be at least f_min_per_hour",
            ));
        }
        if !(l.op_cost_per_vehicle_hour >= 0.0) {
            return Err(invalid(
                format!("lines[{idx}].op_cost_per_vehicle_hour"),
                "must be nonnegative",
            ));
        }
        lines.push(TransitLine {
            id: l.id,
            stations,
            op_cost: l.op_cost_per_vehicle_hour,
            f_min: l.f_min_per_hour,
            f_max: l.f_max_per_hour,
        });
    }

    let road = check_matrix(&file.road_distances_miles, m, "road_distances_miles")?;
    let transit = check_matrix(&file.transit_distances_miles, m, "transit_distances_miles")?;

    let b = &file.behavior;
    if !(b.epsilon_per_dollar >= 0.0) {
        return Err(invalid("behavior.epsilon_per_dollar", "must be nonnegative"));
    }
    for (name, v) in [
        ("behavior.road_speed_mph", b.road_speed_mph),
        ("behavior.transit_speed_mph", b.transit_speed_mph),
        ("behavior.walk_speed_mph", b.walk_speed_mph),
    ] {
        if !(v > 0.0) {
            return Err(invalid(name, "must be positive"));
        }
    }
    let mut classes = Vec::with_capacity(kk);
    for (k, c) in b.classes.iter().enumerate() {
        for (suffix, v) in [
            ("wait_value_per_hour", c.wait_value_per_hour),
            ("invehicle_value_per_hour", c.invehicle_value_per_hour),
            ("money_weight", c.money_weight),
            ("walk_value_per_hour", c.walk_value_per_hour),
        ] {
            if !(v >= 0.0) {
                return Err(invalid(
                    format!("behavior.classes[{k}].{suffix}"),
                    "must be nonnegative",
                ));
            }
        }
        classes.push(IncomeClassParams {
            alpha: c.wait_value_per_hour,
            beta: c.invehicle_value_per_hour,
            gamma: c.money_weight,
            theta: c.walk_value_per_hour,
        });
    }
    let outside = check_od_class(&b.outside_cost_dollars, m, kk, "behavior.outside_cost_dollars")?;
    let lambda0 = check_od_class(
        &file.potential_demand_trips_per_hour,
        m,
        kk,
        "potential_demand_trips_per_hour",
    )?;

    if !(file.c_av_per_hour >= 0.0) {
        return Err(invalid("c_av_per_hour", "must be nonnegative"));
    }
    let te = &file.transit_economics;
    if !(te.fare_cap_per_mile >= 0.0) {
        return Err(invalid("transit_economics.fare_cap_per_mile", "must be nonnegative"));
    }
    if !(te.wait_cap_hours > 0.0) {
        return Err(invalid("transit_economics.wait_cap_hours", "must be positive"));
    }
    if !te.profit_floor_per_hour.is_finite() {
        return Err(invalid("transit_economics.profit_floor_per_hour", "must be finite"));
    }
    if let Some(w) = file.policy.min_service_wait_hours {
        if !(w > 0.0) {
            return Err(invalid("policy.min_service_wait_hours", "must be positive when set"));
        }
    }
    if !(file.policy.firstmile_subsidy_dollars >= 0.0) {
        return Err(invalid("policy.firstmile_subsidy_dollars", "must be nonnegative"));
    }

    let network = build_network(zones, lines, road, transit)?;
    Ok(Scenario {
        name: file.name,
        network,
        behavior: BehaviorParams {
            epsilon: b.epsilon_per_dollar,
            v_a: b.road_speed_mph,
            v_p: b.transit_speed_mph,
            v_w: b.walk_speed_mph,
            classes,
            outside_cost: outside,
        },
        lambda0,
        c_av_per_hour: file.c_av_per_hour,
        transit_economics: TransitEconomics {
            r_p_max: te.fare_cap_per_mile,
            w_p_max: te.wait_cap_hours,
            profit_floor: te.profit_floor_per_hour,
        },
        policy: PolicyConfig {
            w_a_max: file.policy.min_service_wait_hours,
            subsidy: file.policy.firstmile_subsidy_dollars,
        },
    })
}

fn scenario_to_file(sc: &Scenario) -> ScenarioFile {
    let m = sc.num_zones();
    let kk = sc.num_classes();
    let nest = |flat: &[f64]| -> Vec<Vec<Vec<f64>>> {
        (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| (0..kk).map(|k| flat[(i * m + j) * kk + k]).collect())
                    .collect()
            })
            .collect()
    };
    let mat = |get: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> {
        (0..m).map(|i| (0..m).map(|j| get(i, j)).collect()).collect()
    };
    ScenarioFile {
        schema_version: SCHEMA_VERSION,
        name: sc.name.clone(),
        zones: sc
            .network
            .zones
            .iter()
            .map(|z| ZoneFile {
                id: z.id,
                area_sq_miles: z.area,
                matching_scale_hours: z.matching_scale,
                firstmile_scale_miles: z.firstmile_scale,
                station_count: z.station_count,
                is_underserved: z.is_underserved,
                population_split: z.population_split.clone(),
            })
            .collect(),
        lines: sc
            .network
            .lines
            .iter()
            .map(|l| LineFile {
                id: l.id,
                stations: l.stations.iter().map(|&z| z + 1).collect(),
                op_cost_per_vehicle_hour: l.op_cost,
                f_min_per_hour: l.f_min,
                f_max_per_hour: l.f_max,
            })
            .collect(),
        road_distances_miles: mat(&|i, j| sc.network.l_a(i, j)),
        transit_distances_miles: mat(&|i, j| sc.network.l_p(i, j)),
        behavior: BehaviorFile {
            epsilon_per_dollar: sc.behavior.epsilon,
            road_speed_mph: sc.behavior.v_a,
            transit_speed_mph: sc.behavior.v_p,
            walk_speed_mph: sc.behavior.v_w,
            classes: sc
                .behavior
                .classes
                .iter()
                .map(|c| ClassFile {
                    wait_value_per_hour: c.alpha,
                    invehicle_value_per_hour: c.beta,
                    money_weight: c.gamma,
                    walk_value_per_hour: c.theta,
                })
                .collect(),
            outside_cost_dollars: nest(&sc.behavior.outside_cost),
        },
        potential_demand_trips_per_hour: nest(&sc.lambda0),
        c_av_per_hour: sc.c_av_per_hour,
        transit_economics: TransitEconomicsFile {
            fare_cap_per_mile: sc.transit_economics.r_p_max,
            wait_cap_hours: sc.transit_economics.w_p_max,
            profit_floor_per_hour: sc.transit_economics.profit_floor,
        },
        policy: PolicyFile {
            min_service_wait_hours: sc.policy.w_a_max,
            firstmile_subsidy_dollars: sc.policy.subsidy,
        },
    }
}

/// Parses and validates a scenario from a JSON string.
pub fn scenario_from_json(json: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(json)?;
    scenario_from_file(file)
}

/// Serializes a scenario to pretty-printed JSON.
pub fn scenario_to_json(sc: &Scenario) -> String {
    serde_json::to_string_pretty(&scenario_to_file(sc)).expect("scenario serialization")
}

/// Loads and validates a scenario from a JSON file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    scenario_from_json(&text)
}

/// Writes a scenario as pretty-printed JSON.
pub fn save_scenario(path: impl AsRef<Path>, sc: &Scenario) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    std::fs::write(path, scenario_to_json(sc)).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Synthetic San Francisco-style instance.
// ---------------------------------------------------------------------------

/// Tunables for the synthetic instance. Calibration targets, not behavior
/// parameters: the cost weights, speeds, and matching constants are fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct SfConfig {
    /// Target total ride-hail trips/hour under current conditions; potential
    /// demand is this divided by `amod_reference_share`.
    pub tnc_trips_per_hour: f64,
    /// Share of potential demand assumed to ride-hail today.
    pub amod_reference_share: f64,
    /// Distance-decay scale of the gravity demand model (miles).
    pub gravity_length_scale: f64,
    /// Log-normal sigma of the per-OD demand jitter.
    pub demand_jitter_sigma: f64,
    /// Population-density multiplier of core (non-underserved) zones.
    pub core_density_factor: f64,
    /// Road and transit circuity over straight-line distance.
    pub road_circuity: f64,
    pub transit_circuity: f64,
    /// Per-vehicle-hour operating costs by line type ($/hour).
    pub rail_op_cost_per_hour: f64,
    pub bus_op_cost_per_hour: f64,
    /// Outside-option cost per mile for the highest income class ($/mile).
    pub outside_rate_high_per_mile: f64,
    /// Extra outside cost per mile for trips originating in underserved
    /// zones, as a fraction (0.5 = 50% premium).
    pub outside_remote_premium: f64,
    /// Platform cost per vehicle-hour ($).
    pub c_av_per_hour: f64,
    /// Agency budget floor ($/hour).
    pub profit_floor_per_hour: f64,
    pub fare_cap_per_mile: f64,
    pub wait_cap_hours: f64,
    pub f_min_per_hour: f64,
    pub f_max_per_hour: f64,
}

impl Default for SfConfig {
    fn default() -> Self {
        SfConfig {
            tnc_trips_per_hour: 15000.0,
            amod_reference_share: 0.15,
            gravity_length_scale: 3.0,
            demand_jitter_sigma: 0.25,
            core_density_factor: 2.5,
            road_circuity: 1.2,
            transit_circuity: 1.35,
            rail_op_cost_per_hour: 1200.0,
            bus_op_cost_per_hour: 750.0,
            outside_rate_high_per_mile: 5.0,
            outside_remote_premium: 0.5,
            c_av_per_hour: 25.0,
            profit_floor_per_hour: 1.0e4,
            fare_cap_per_mile: 3.0,
            wait_cap_hours: 1.0 / 3.0,
            f_min_per_hour: 0.1,
            f_max_per_hour: 60.0,
        }
    }
}

/// Zone centroids (miles, east/north) and areas (sq miles), 18 zones laid
/// out like the San Francisco zip-code zones: a dense northeast core and
/// larger, sparser western/southern zones.
const SF_ZONES: [((f64, f64), f64); 18] = [
    ((6.3, 5.9), 1.1),
    ((5.6, 5.0), 1.7),
    ((5.3, 5.9), 1.0),
    ((4.3, 5.5), 1.3),
    ((3.0, 5.5), 1.7),
    ((5.7, 6.5), 1.0),
    ((1.2, 5.5), 3.2),
    ((5.1, 5.2), 0.6),
    ((3.8, 4.8), 1.5),
    ((2.2, 4.2), 3.3),
    ((4.5, 4.2), 1.5),
    ((6.0, 4.0), 2.3),
    ((5.2, 3.5), 2.4),
    ((4.6, 2.9), 2.0),
    ((2.2, 3.0), 2.6),
    ((5.9, 2.2), 5.0),
    ((2.6, 1.6), 3.2),
    ((4.4, 1.9), 2.5),
];

/// 0-based zone indexes of underserved (remote) zones.
const SF_UNDERSERVED: [usize; 10] = [4, 6, 8, 9, 10, 13, 14, 15, 16, 17];

/// Line routes as 0-based zone lists; `true` marks rail.
const SF_LINES: [(&[usize], bool); 8] = [
    (&[5, 0, 1, 7], true),                  // waterfront shuttle
    (&[0, 1, 10, 13, 17], true),            // north-south local
    (&[16, 14, 10, 1, 0, 11, 15], true),    // crosstown via core
    (&[0, 1, 7, 10, 14, 16, 17], true),     // southwest trunk
    (&[0, 1, 7, 8, 9], true),               // west local
    (&[0, 7, 3, 4, 6], false),              // northwest rapid bus
    (&[0, 1, 12, 15, 17], false),           // southeast rapid bus
    (&[0, 2, 3, 4, 6], false),              // north rapid bus
];

/// Builds a seeded synthetic instance of the San Francisco-style network:
/// 18 zones, 8 transit lines, 3 income classes, gravity-model demand with
/// log-normal jitter. Identical seeds produce byte-identical scenarios.
pub fn synthesize_sf_scenario(seed: u64, cfg: &SfConfig) -> Scenario {
    let m = SF_ZONES.len();
    let underserved = |i: usize| SF_UNDERSERVED.contains(&i);

    let lines: Vec<TransitLine> = SF_LINES
        .iter()
        .enumerate()
        .map(|(idx, (stations, rail))| TransitLine {
            id: idx + 1,
            stations: stations.to_vec(),
            op_cost: if *rail {
                cfg.rail_op_cost_per_hour
            } else {
                cfg.bus_op_cost_per_hour
            },
            f_min: cfg.f_min_per_hour,
            f_max: cfg.f_max_per_hour,
        })
        .collect();

    let zones: Vec<Zone> = SF_ZONES
        .iter()
        .enumerate()
        .map(|(i, &((_, _), area))| {
            // Stop density mirrors a dense urban bus/rail network in the
            // core and thinner coverage in the remote zones; the resulting
            // access walk firstmile_scale / sqrt(stations) lands near 0.2
            // miles in the core and 0.4+ miles outside it.
            let stop_density = if underserved(i) { 45.0 } else { 80.0 };
            Zone {
                id: i + 1,
                area,
                // Pickup constant in hours: a mid-size zone then needs on
                // the order of 10-100 idle vehicles for a 1-4 minute wait.
                matching_scale: 7.894 * area / 60.0,
                firstmile_scale: 1.609 * area,
                station_count: ((stop_density * area).round() as u32).max(1),
                is_underserved: underserved(i),
                population_split: if underserved(i) {
                    vec![0.4, 0.5, 0.1]
                } else {
                    vec![0.2, 0.5, 0.3]
                },
            }
        })
        .collect();

    let euclid = |i: usize, j: usize| {
        let (xi, yi) = SF_ZONES[i].0;
        let (xj, yj) = SF_ZONES[j].0;
        ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt()
    };
    let mut road = vec![0.0; m * m];
    let mut transit = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            if i == j {
                let base = 0.7 * SF_ZONES[i].1.sqrt();
                road[i * m + j] = base;
                transit[i * m + j] = base * cfg.transit_circuity / cfg.road_circuity;
            } else {
                road[i * m + j] = cfg.road_circuity * euclid(i, j);
                transit[i * m + j] = cfg.transit_circuity * euclid(i, j);
            }
        }
    }

    // Gravity demand with seeded jitter, scaled to the ride-hail trip target.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pop = |i: usize| {
        SF_ZONES[i].1 * if underserved(i) { 1.0 } else { cfg.core_density_factor }
    };
    let mut gravity = vec![0.0; m * m];
    let mut gravity_total = 0.0;
    for i in 0..m {
        for j in 0..m {
            let decay = (-road[i * m + j] / cfg.gravity_length_scale).exp();
            let jitter = (cfg.demand_jitter_sigma * standard_normal(&mut rng)).exp();
            let g = pop(i) * pop(j) * decay * jitter;
            gravity[i * m + j] = g;
            gravity_total += g;
        }
    }
    let lambda_total = cfg.tnc_trips_per_hour / cfg.amod_reference_share;
    let kk = 3;
    let mut lambda0 = vec![0.0; m * m * kk];
    for i in 0..m {
        for j in 0..m {
            let od_total = lambda_total * gravity[i * m + j] / gravity_total;
            for k in 0..kk {
                lambda0[(i * m + j) * kk + k] = od_total * zones[i].population_split[k];
            }
        }
    }

    // Outside option: proportional to road distance; low income pays 20%
    // more than middle, middle 25% more than high; remote origins pay a
    // per-mile premium.
    let mut outside = vec![0.0; m * m * kk];
    for i in 0..m {
        let rate_high = cfg.outside_rate_high_per_mile
            * if underserved(i) {
                1.0 + cfg.outside_remote_premium
            } else {
                1.0
            };
        for j in 0..m {
            let c3 = rate_high * road[i * m + j];
            let c2 = 1.25 * c3;
            let c1 = 1.2 * c2;
            let base = (i * m + j) * kk;
            outside[base] = c1;
            outside[base + 1] = c2;
            outside[base + 2] = c3;
        }
    }

    let network = build_network(zones, lines, road, transit)
        .expect("synthetic network is connected by construction");

    Scenario {
        name: format!("sf-synthetic-seed{seed}"),
        network,
        behavior: BehaviorParams {
            epsilon: 0.10,
            v_a: 17.937,
            v_p: 14.349,
            v_w: 3.48,
            // Hourly values of waiting / in-vehicle / walking time rise with
            // income while the marginal utility of money falls.
            classes: vec![
                IncomeClassParams { alpha: 30.0, beta: 9.0, gamma: 3.0, theta: 30.0 },
                IncomeClassParams { alpha: 60.0, beta: 18.0, gamma: 1.5, theta: 60.0 },
                IncomeClassParams { alpha: 120.0, beta: 39.0, gamma: 0.75, theta: 120.0 },
            ],
            outside_cost: outside,
        },
        lambda0,
        c_av_per_hour: cfg.c_av_per_hour,
        transit_economics: TransitEconomics {
            r_p_max: cfg.fare_cap_per_mile,
            w_p_max: cfg.wait_cap_hours,
            profit_floor: cfg.profit_floor_per_hour,
        },
        policy: PolicyConfig::default(),
    }
}

/// Standard normal draw via Box-Muller; avoids pulling in a distributions
/// crate for one sampler.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
