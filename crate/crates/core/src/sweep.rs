//! Policy and cost sweeps: re-solve the game along one parameter axis,
//! warm-starting each point from its predecessor, and export the per-point
//! records as plot-ready CSV or a full-detail versioned JSON document.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::choice::{amod_waits, demand_tensor, fleet_hours, Mode};
use crate::equilibrium::{
    best_response_iterate, default_initial_strategies, expost_evaluate, EpsilonReport,
    SolverOptions,
};
use crate::equity::{evaluate_equity, TheilReport};
use crate::network::{partition_zones, PartitionStrategy};
use crate::scenario::Scenario;
use crate::tnc::TncStrategy;
use crate::transit::{transit_profit, TransitStrategy};

/// Version stamp embedded in every exported results document.
pub const RESULTS_SCHEMA_VERSION: u32 = 1;

/// The parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    /// Platform cost per vehicle-hour ($/hr).
    CAv,
    /// Cap on the ride-hail pickup wait (hours); +∞ disables the policy.
    WAMax,
    /// First/last-mile subsidy per qualifying ride-hail leg ($).
    Subsidy,
}

impl SweepAxis {
    /// Stable field name used in exports.
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::CAv => "c_av_per_hour",
            SweepAxis::WAMax => "w_a_max_hours",
            SweepAxis::Subsidy => "subsidy_per_leg",
        }
    }
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("sweep requires at least one parameter value")]
    EmptyValues,
    #[error("invalid {axis} value {value}")]
    InvalidValue { axis: &'static str, value: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Everything measured at one solved sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub tnc: TncStrategy,
    pub transit: TransitStrategy,
    pub iterations: usize,
    pub converged: bool,
    pub epsilon: EpsilonReport,
    pub theil: TheilReport,
    /// Mode shares per income class in mode order (ride-hail, transit, the
    /// three bundles, outside), each row summing to one.
    pub mode_shares: Vec<[f64; 6]>,
    /// Total vehicles the platform operates (in service plus idle).
    pub tnc_fleet: f64,
    /// Platform fare revenue per ride-hail leg served ($).
    pub avg_amod_fare: f64,
    pub transit_revenue: f64,
    pub transit_cost: f64,
    pub transit_profit: f64,
}

/// One sweep point: the parameter value and either the solved outcome or
/// the error that stopped this point (never both).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub outcome: Option<SweepOutcome>,
    pub error: Option<String>,
}

/// Sweep output, sorted by parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResults {
    pub schema_version: u32,
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
}

fn validated(axis: SweepAxis, values: &[f64]) -> Result<(), SweepError> {
    if values.is_empty() {
        return Err(SweepError::EmptyValues);
    }
    for &v in values {
        let ok = match axis {
            SweepAxis::CAv => v.is_finite() && v > 0.0,
            // +∞ means "policy disabled" and is a legitimate sweep point.
            SweepAxis::WAMax => v > 0.0 && !v.is_nan(),
            SweepAxis::Subsidy => v.is_finite() && v >= 0.0,
        };
        if !ok {
            return Err(SweepError::InvalidValue { axis: axis.label(), value: v });
        }
    }
    Ok(())
}

fn patched(scenario: &Scenario, axis: SweepAxis, v: f64) -> Scenario {
    let mut sc = scenario.clone();
    match axis {
        SweepAxis::CAv => sc.c_av_per_hour = v,
        SweepAxis::WAMax => sc.policy.w_a_max = if v.is_finite() { Some(v) } else { None },
        SweepAxis::Subsidy => sc.policy.subsidy = v,
    }
    sc
}

fn evaluate_point(
    sc: &Scenario,
    tnc0: &TncStrategy,
    transit0: &TransitStrategy,
    options: &SolverOptions,
    partition: PartitionStrategy,
    shift: Option<f64>,
) -> Result<SweepOutcome, String> {
    let c = best_response_iterate(tnc0, transit0, sc, options).map_err(|e| e.to_string())?;
    let cells = partition_zones(sc.num_zones(), partition);
    let epsilon = expost_evaluate(&c, sc, &cells, options).map_err(|e| e.to_string())?;
    let (_, theil) =
        evaluate_equity(&c.tnc, &c.transit, sc, shift).map_err(|e| e.to_string())?;

    let demand = demand_tensor(&c.tnc, &c.transit, sc).map_err(|e| e.to_string())?;
    let w_a = amod_waits(&c.tnc, &sc.network).map_err(|e| e.to_string())?;
    let tnc_fleet = fleet_hours(&demand, &c.tnc.n_idle, &w_a, &sc.network, sc.behavior.v_a);
    let tnc_revenue = epsilon.tnc_profit + sc.c_av_per_hour * tnc_fleet;
    // Each bundle rides once per leg; the round-trip bundle has two legs.
    let legs = demand.mode_total(Mode::Amod)
        + demand.mode_total(Mode::Bundle1)
        + demand.mode_total(Mode::Bundle2)
        + 2.0 * demand.mode_total(Mode::Bundle3);
    let avg_amod_fare = if legs > 1e-12 { tnc_revenue / legs } else { 0.0 };

    let m = sc.num_zones();
    let kk = sc.num_classes();
    let mut mode_shares = vec![[0.0; 6]; kk];
    for k in 0..kk {
        let mut lam0 = 0.0;
        for i in 0..m {
            for j in 0..m {
                lam0 += demand.lambda0(i, j, k);
                for (t, mode) in Mode::ALL.into_iter().enumerate() {
                    mode_shares[k][t] += demand.demand(i, j, k, mode);
                }
            }
        }
        if lam0 > 0.0 {
            for t in 0..6 {
                mode_shares[k][t] /= lam0;
            }
        }
    }

    let transit_cost: f64 = sc
        .network
        .lines
        .iter()
        .zip(&c.transit.f)
        .map(|(l, f)| l.op_cost * f)
        .sum();
    let transit_profit =
        transit_profit(&c.tnc, &c.transit, sc).map_err(|e| e.to_string())?;

    Ok(SweepOutcome {
        iterations: c.iterations,
        converged: c.converged,
        tnc: c.tnc,
        transit: c.transit,
        epsilon,
        theil,
        mode_shares,
        tnc_fleet,
        avg_amod_fare,
        transit_revenue: transit_profit + transit_cost,
        transit_cost,
        transit_profit,
    })
}

/// Solves the game at each value of `axis`, in the order given, carrying
/// the previous point's strategies forward as the next warm start and
/// holding the Theil shift fixed at the one derived on the first solved
/// point. A failed point is recorded with its error and the sweep keeps
/// going. Records come back sorted by parameter value.
pub fn run_sweep(
    scenario: &Scenario,
    axis: SweepAxis,
    values: &[f64],
    options: &SolverOptions,
    partition: PartitionStrategy,
) -> Result<SweepResults, SweepError> {
    validated(axis, values)?;
    let mut points = Vec::with_capacity(values.len());
    let mut warm: Option<(TncStrategy, TransitStrategy)> = None;
    let mut shift: Option<f64> = None;
    for &v in values {
        let sc = patched(scenario, axis, v);
        let (tnc0, transit0) = match &warm {
            Some(pair) => pair.clone(),
            None => default_initial_strategies(&sc).swap_remove(0),
        };
        match evaluate_point(&sc, &tnc0, &transit0, options, partition, shift) {
            Ok(outcome) => {
                warm = Some((outcome.tnc.clone(), outcome.transit.clone()));
                shift.get_or_insert(outcome.theil.a_shift);
                points.push(SweepPoint { value: v, outcome: Some(outcome), error: None });
            }
            Err(error) => {
                points.push(SweepPoint { value: v, outcome: None, error: Some(error) });
            }
        }
    }
    points.sort_by(|a, b| a.value.partial_cmp(&b.value).expect("values validated non-NaN"));
    Ok(SweepResults { schema_version: RESULTS_SCHEMA_VERSION, axis, points })
}

/// Export formats for sweep results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    /// One row per point, scalar summary columns only.
    Csv,
    /// Full per-point detail (strategies, per-class shares, certificate).
    Json,
}

/// The fixed CSV column set, in order.
pub const CSV_COLUMNS: [&str; 25] = [
    "axis",
    "value",
    "status",
    "error",
    "converged",
    "iterations",
    "tnc_base_fare",
    "tnc_profit",
    "tnc_upper",
    "tnc_lower",
    "epsilon_abs",
    "epsilon_rel",
    "tnc_fleet",
    "avg_amod_fare",
    "transit_fare_per_mile",
    "transit_ridership",
    "transit_resolve_ridership",
    "transit_global",
    "transit_revenue",
    "transit_cost",
    "transit_profit",
    "theil_t",
    "theil_within",
    "theil_between",
    "theil_shift",
];

fn csv_row(axis: SweepAxis, p: &SweepPoint) -> Vec<String> {
    let mut row = vec![
        axis.label().to_string(),
        p.value.to_string(),
        if p.outcome.is_some() { "ok" } else { "error" }.to_string(),
        p.error.clone().unwrap_or_default(),
    ];
    match &p.outcome {
        Some(o) => {
            row.push(o.converged.to_string());
            row.push(o.iterations.to_string());
            row.push(o.tnc.b.to_string());
            row.push(o.epsilon.tnc_profit.to_string());
            row.push(o.epsilon.tnc_upper.to_string());
            row.push(o.epsilon.tnc_lower.to_string());
            row.push(o.epsilon.epsilon_abs.to_string());
            row.push(o.epsilon.epsilon_rel.to_string());
            row.push(o.tnc_fleet.to_string());
            row.push(o.avg_amod_fare.to_string());
            row.push(o.transit.r_p.to_string());
            row.push(o.epsilon.transit_ridership.to_string());
            row.push(o.epsilon.transit_resolve_ridership.to_string());
            row.push(o.epsilon.transit_global.to_string());
            row.push(o.transit_revenue.to_string());
            row.push(o.transit_cost.to_string());
            row.push(o.transit_profit.to_string());
            row.push(o.theil.t.to_string());
            row.push(o.theil.within.to_string());
            row.push(o.theil.between.to_string());
            row.push(o.theil.a_shift.to_string());
        }
        None => row.extend(std::iter::repeat(String::new()).take(CSV_COLUMNS.len() - 4)),
    }
    row
}

/// Writes sweep results to `path`. CSV keeps one row per point under the
/// [`CSV_COLUMNS`] header (empty results give a header-only file); JSON is
/// a pretty-printed document that deserializes back to the same value.
pub fn export_results(
    results: &SweepResults,
    path: impl AsRef<Path>,
    format: ExportFormat,
) -> Result<(), SweepError> {
    match format {
        ExportFormat::Csv => {
            let mut w = csv::Writer::from_path(path.as_ref())?;
            w.write_record(CSV_COLUMNS)?;
            for p in &results.points {
                w.write_record(csv_row(results.axis, p))?;
            }
            w.flush()?;
        }
        ExportFormat::Json => {
            let mut doc = serde_json::to_string_pretty(results)?;
            doc.push('\n');
            fs::write(path.as_ref(), doc)?;
        }
    }
    Ok(())
}
