//! Multimodal network model: zones, transit lines, OD route sets, and the
//! Φ matrix that turns line frequencies into route-averaged transit waits.
//!
//! Zones are indexed 0..M internally; the 1-based `id` on [`Zone`] is only a
//! label used by scenario files and error messages. Transit routes are sets
//! of lines: a passenger boards a line serving the origin zone and transfers
//! between lines wherever they share a zone.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A demand zone with its matching and first/last-mile geometry scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    /// 1-based display id (scenario files use it; internal code is positional).
    pub id: usize,
    /// Zone area in square miles.
    pub area: f64,
    /// Matching scale A_i (hours·√vehicles): AMoD wait is A_i/√(idle fleet).
    pub matching_scale: f64,
    /// First/last-mile scale B_i (miles·√stations): d_i = B_i/√(station count).
    pub firstmile_scale: f64,
    /// Number of transit stations in the zone.
    pub station_count: u32,
    /// Membership in the underserved set (subsidy-eligible zones).
    pub is_underserved: bool,
    /// Per-income-class population fractions, summing to 1.
    pub population_split: Vec<f64>,
}

/// A transit line: an ordered list of zones it serves plus operating economics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitLine {
    /// 1-based display id.
    pub id: usize,
    /// Zones visited, as 0-based zone indices, in service order.
    pub stations: Vec<usize>,
    /// Operating cost per vehicle-hour ($/veh-hr).
    pub op_cost: f64,
    /// Lower frequency bound (runs/hour).
    pub f_min: f64,
    /// Upper frequency bound (runs/hour).
    pub f_max: f64,
}

impl TransitLine {
    /// Whether the line serves zone `z` (0-based).
    pub fn serves(&self, z: usize) -> bool {
        self.stations.contains(&z)
    }
}

/// All minimal transit routes for one OD pair; each route is a set of lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteSet {
    /// (origin, destination), 0-based.
    pub od: (usize, usize),
    /// Each route is a sorted, deduplicated list of 0-based line indices.
    pub routes: Vec<Vec<usize>>,
}

impl RouteSet {
    /// Number of routes |R_ij|.
    pub fn count(&self) -> usize {
        self.routes.len()
    }
}

/// Per-OD line-occurrence weights: wait = phi_ijᵀ · [1/f_1, …, 1/f_L].
///
/// phi_ij[l] = (occurrences of line l across routes of R_ij) / |R_ij|.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiMatrix {
    m: usize,
    l: usize,
    phi: Vec<f64>,
}

impl PhiMatrix {
    /// The L-vector of weights for OD pair (i, j).
    pub fn row(&self, i: usize, j: usize) -> &[f64] {
        let od = i * self.m + j;
        &self.phi[od * self.l..(od + 1) * self.l]
    }

    pub fn num_lines(&self) -> usize {
        self.l
    }
}

/// The full network: zones, lines, distances, derived route sets and Φ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultimodalNetwork {
    pub zones: Vec<Zone>,
    pub lines: Vec<TransitLine>,
    /// Road trip distances l^a_ij (miles), row-major M×M.
    pub road_dist: Vec<f64>,
    /// Transit trip distances l^p_ij (miles), row-major M×M.
    pub transit_dist: Vec<f64>,
    /// First/last-mile distances d_i = B_i/√(N_i^T) (miles).
    pub d: Vec<f64>,
    /// Route sets for every OD pair, row-major M×M.
    pub route_sets: Vec<RouteSet>,
    /// Line-occurrence weights for every OD pair.
    pub phi: PhiMatrix,
}

impl MultimodalNetwork {
    pub fn num_zones(&self) -> usize {
        self.zones.len()
    }

    pub fn num_lines(&self) -> usize {
        self.lines.len()
    }

    /// Road distance l^a_ij in miles.
    pub fn l_a(&self, i: usize, j: usize) -> f64 {
        self.road_dist[i * self.zones.len() + j]
    }

    /// Transit distance l^p_ij in miles.
    pub fn l_p(&self, i: usize, j: usize) -> f64 {
        self.transit_dist[i * self.zones.len() + j]
    }
}

/// A partition of the zone set into disjoint covering cells (0-based indices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub cells: Vec<Vec<usize>>,
}

/// How to partition zones for the destination-decomposed profit relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PartitionStrategy {
    /// Cells (0,1), (2,3), …; an odd leftover zone forms its own cell.
    PairwiseByIndex,
    /// One cell per zone.
    Singleton,
    /// A single cell containing every zone.
    Whole,
}

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("no transit route between zone {i} and zone {j} (1-based)")]
    UnreachableOd { i: usize, j: usize },
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("line {line} (1-based) is invalid: {reason}")]
    InvalidLine { line: usize, reason: String },
}

/// Lines through each zone, as a zone-indexed adjacency list.
fn lines_by_zone(lines: &[TransitLine], m: usize) -> Vec<Vec<usize>> {
    let mut by_zone = vec![Vec::new(); m];
    for (li, line) in lines.iter().enumerate() {
        for &z in &line.stations {
            if !by_zone[z].contains(&li) {
                by_zone[z].push(li);
            }
        }
    }
    by_zone
}

/// Whether two lines share at least one zone (a feasible transfer point).
fn lines_adjacent(a: &TransitLine, b: &TransitLine) -> bool {
    a.stations.iter().any(|z| b.stations.contains(z))
}

/// Enumerates the minimal-transfer routes between zones `i` and `j`.
///
/// Routes are line-sets found by breadth-first search on the line-adjacency
/// graph (lines adjacent iff they share a zone), keeping all routes with the
/// minimum number of lines and capping at 2 transfers (3 lines). For i = j
/// the conventional route is the single cheapest line (lowest op_cost, ties
/// by id) through the zone.
pub fn enumerate_transit_routes(
    lines: &[TransitLine],
    m: usize,
    i: usize,
    j: usize,
) -> Result<RouteSet, NetworkError> {
    let by_zone = lines_by_zone(lines, m);
    enumerate_routes_inner(lines, &by_zone, i, j)
}

fn enumerate_routes_inner(
    lines: &[TransitLine],
    by_zone: &[Vec<usize>],
    i: usize,
    j: usize,
) -> Result<RouteSet, NetworkError> {
    let unreachable = || NetworkError::UnreachableOd { i: i + 1, j: j + 1 };
    let origin_lines = &by_zone[i];
    let dest_lines = &by_zone[j];
    if origin_lines.is_empty() || dest_lines.is_empty() {
        return Err(unreachable());
    }

    if i == j {
        let cheapest = origin_lines
            .iter()
            .copied()
            .min_by(|&a, &b| {
                lines[a]
                    .op_cost
                    .partial_cmp(&lines[b].op_cost)
                    .unwrap()
                    .then(lines[a].id.cmp(&lines[b].id))
            })
            .ok_or_else(unreachable)?;
        return Ok(RouteSet {
            od: (i, j),
            routes: vec![vec![cheapest]],
        });
    }

    // Depth 0 transfers: single lines serving both zones.
    let mut routes: Vec<Vec<usize>> = origin_lines
        .iter()
        .copied()
        .filter(|&l| dest_lines.contains(&l))
        .map(|l| vec![l])
        .collect();

    // Depth 1 transfer: an origin line meeting a destination line.
    if routes.is_empty() {
        for &l1 in origin_lines {
            for &l2 in dest_lines {
                if l1 != l2 && lines_adjacent(&lines[l1], &lines[l2]) {
                    let mut r = vec![l1, l2];
                    r.sort_unstable();
                    if !routes.contains(&r) {
                        routes.push(r);
                    }
                }
            }
        }
    }

    // Depth 2 transfers: origin line → connector → destination line.
    if routes.is_empty() {
        for &l1 in origin_lines {
            for &l2 in dest_lines {
                if l1 == l2 {
                    continue;
                }
                for (mid, mid_line) in lines.iter().enumerate() {
                    if mid == l1 || mid == l2 {
                        continue;
                    }
                    if lines_adjacent(&lines[l1], mid_line)
                        && lines_adjacent(mid_line, &lines[l2])
                    {
                        let mut r = vec![l1, mid, l2];
                        r.sort_unstable();
                        if !routes.contains(&r) {
                            routes.push(r);
                        }
                    }
                }
            }
        }
    }

    if routes.is_empty() {
        return Err(unreachable());
    }
    routes.sort();
    Ok(RouteSet {
        od: (i, j),
        routes,
    })
}

/// Builds the Φ matrix from per-OD route sets.
pub fn build_phi(route_sets: &[RouteSet], m: usize, l: usize) -> PhiMatrix {
    let mut phi = vec![0.0; m * m * l];
    for rs in route_sets {
        let (i, j) = rs.od;
        let od = i * m + j;
        let count = rs.count() as f64;
        for route in &rs.routes {
            for &line in route {
                phi[od * l + line] += 1.0 / count;
            }
        }
    }
    PhiMatrix { m, l, phi }
}

/// Assembles and validates the full network from its raw parts.
///
/// Distances are row-major M×M in miles. Every zone must be served by at
/// least one line, and every OD pair must have a transit route within the
/// 2-transfer cap.
pub fn build_network(
    zones: Vec<Zone>,
    lines: Vec<TransitLine>,
    road_distances: Vec<f64>,
    transit_distances: Vec<f64>,
) -> Result<MultimodalNetwork, NetworkError> {
    let m = zones.len();
    if road_distances.len() != m * m {
        return Err(NetworkError::DimensionMismatch {
            what: "road_distances".into(),
            expected: m * m,
            got: road_distances.len(),
        });
    }
    if transit_distances.len() != m * m {
        return Err(NetworkError::DimensionMismatch {
            what: "transit_distances".into(),
            expected: m * m,
            got: transit_distances.len(),
        });
    }
    for line in &lines {
        if line.stations.is_empty() {
            return Err(NetworkError::InvalidLine {
                line: line.id,
                reason: "no stations".into(),
            });
        }
        if let Some(&z) = line.stations.iter().find(|&&z| z >= m) {
            return Err(NetworkError::InvalidLine {
                line: line.id,
                reason: format!("station references zone index {z} out of range"),
            });
        }
    }

    let by_zone = lines_by_zone(&lines, m);
    let mut route_sets = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            route_sets.push(enumerate_routes_inner(&lines, &by_zone, i, j)?);
        }
    }
    let phi = build_phi(&route_sets, m, lines.len());
    let d = zones
        .iter()
        .map(|z| z.firstmile_scale / (z.station_count as f64).sqrt())
        .collect();

    Ok(MultimodalNetwork {
        zones,
        lines,
        road_dist: road_distances,
        transit_dist: transit_distances,
        d,
        route_sets,
        phi,
    })
}

/// Splits the zone set into cells for the profit-bound relaxation.
pub fn partition_zones(m: usize, strategy: PartitionStrategy) -> Partition {
    let cells = match strategy {
        PartitionStrategy::PairwiseByIndex => {
            let mut cells = Vec::with_capacity(m.div_ceil(2));
            let mut z = 0;
            while z < m {
                if z + 1 < m {
                    cells.push(vec![z, z + 1]);
                } else {
                    cells.push(vec![z]);
                }
                z += 2;
            }
            cells
        }
        PartitionStrategy::Singleton => (0..m).map(|z| vec![z]).collect(),
        PartitionStrategy::Whole => vec![(0..m).collect()],
    };
    Partition { cells }
}
