//! Alternating best-response play between the platform and the agency, and
//! the ex-post audit that turns the final iterate into a certified ε-Nash
//! statement: a relaxation bound on how much any unilateral platform
//! deviation could still gain, and a concavity certificate plus re-solve
//! establishing that the agency's side has nothing left on the table.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::choice::ChoiceError;
use crate::network::Partition;
use crate::scenario::Scenario;
use crate::tnc::{
    solve_tnc_best_response, tnc_profit, tnc_profit_bounds, TncError, TncSolveConfig, TncStrategy,
};
use crate::transit::{
    certify_concavity, fare_grid, solve_transit_best_response, transit_ridership,
    ConcavityCertificate, TransitError, TransitSolveConfig, TransitStrategy,
};

#[derive(Debug, Error)]
pub enum EquilibriumError {
    #[error("platform best response failed: {0}")]
    Tnc(#[from] TncError),
    #[error("transit best response failed: {0}")]
    Transit(#[from] TransitError),
    #[error(transparent)]
    Choice(#[from] ChoiceError),
}

/// Stopping rule and per-player solver settings for the alternating play.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Convergence threshold on both players' strategy deltas, measured by
    /// [`tnc_distance`] and [`transit_distance`].
    pub sigma: f64,
    /// Iteration cap; hitting it returns `converged = false` rather than
    /// an error, with the trajectory kept for diagnosis.
    pub max_iter: usize,
    pub tnc: TncSolveConfig,
    pub transit: TransitSolveConfig,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            sigma: 1e-3,
            max_iter: 50,
            tnc: TncSolveConfig::default(),
            // The audit is deferred to the ex-post evaluation; running it
            // every iteration would only repeat the same verdict.
            transit: TransitSolveConfig { certify: false, ..TransitSolveConfig::default() },
        }
    }
}

/// Euclidean distance between platform strategies with idle fleets scaled
/// by 1/100, so vehicle counts don't drown the fare coordinates.
pub fn tnc_distance(a: &TncStrategy, b: &TncStrategy) -> f64 {
    let mut s = (a.b - b.b) * (a.b - b.b);
    for (x, y) in a.r.iter().zip(&b.r) {
        s += (x - y) * (x - y);
    }
    for (x, y) in a.n_idle.iter().zip(&b.n_idle) {
        let d = (x - y) / 100.0;
        s += d * d;
    }
    s.sqrt()
}

/// Euclidean distance between agency strategies over the stacked fare and
/// frequency vector.
pub fn transit_distance(a: &TransitStrategy, b: &TransitStrategy) -> f64 {
    let mut s = (a.r_p - b.r_p) * (a.r_p - b.r_p);
    for (x, y) in a.f.iter().zip(&b.f) {
        s += (x - y) * (x - y);
    }
    s.sqrt()
}

/// One round of the alternating play, as recorded in the trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based round number.
    pub iteration: usize,
    /// Distance the platform strategy moved this round.
    pub tnc_delta: f64,
    /// Distance the agency strategy moved this round.
    pub transit_delta: f64,
    /// Platform profit at the end of the round ($/hr).
    pub tnc_profit: f64,
    /// Transit ridership at the end of the round (trips/hr).
    pub transit_ridership: f64,
}

/// Final iterate of the alternating play. "Candidate" because convergence
/// of the dynamics alone proves nothing; [`expost_evaluate`] quantifies how
/// far from a Nash pair this can be.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEquilibrium {
    pub tnc: TncStrategy,
    pub transit: TransitStrategy,
    /// Rounds actually played.
    pub iterations: usize,
    /// Whether both deltas fell to σ before the iteration cap.
    pub converged: bool,
    pub trajectory: Vec<IterationRecord>,
}

/// Alternates platform and agency best responses until both strategy
/// deltas drop to `options.sigma` or `options.max_iter` rounds have been
/// played. Each best response is a pure function of the opponent's current
/// strategy, so the play is a deterministic map whose fixed points are the
/// candidate equilibria. With `max_iter = 0` the initial pair is returned
/// unevaluated.
pub fn best_response_iterate(
    initial_tnc: &TncStrategy,
    initial_transit: &TransitStrategy,
    scenario: &Scenario,
    options: &SolverOptions,
) -> Result<CandidateEquilibrium, EquilibriumError> {
    let mut tnc = initial_tnc.clone();
    let mut transit = initial_transit.clone();
    let mut trajectory = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for n in 1..=options.max_iter {
        let next_tnc = solve_tnc_best_response(&transit, scenario, &options.tnc)?;
        let (next_transit, _, _) =
            solve_transit_best_response(&next_tnc, scenario, &options.transit)?;
        let tnc_delta = tnc_distance(&next_tnc, &tnc);
        let transit_delta = transit_distance(&next_transit, &transit);
        tnc = next_tnc;
        transit = next_transit;
        iterations = n;
        trajectory.push(IterationRecord {
            iteration: n,
            tnc_delta,
            transit_delta,
            tnc_profit: tnc_profit(&tnc, &transit, scenario)?,
            transit_ridership: transit_ridership(&tnc, &transit, scenario)?,
        });
        if tnc_delta <= options.sigma && transit_delta <= options.sigma {
            converged = true;
            break;
        }
    }
    Ok(CandidateEquilibrium { tnc, transit, iterations, converged, trajectory })
}

/// Everything the ex-post audit establishes about a candidate pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonReport {
    /// Platform profit at the candidate ($/hr).
    pub tnc_profit: f64,
    /// Relaxation bound no unilateral platform deviation can exceed.
    pub tnc_upper: f64,
    /// Profit of the feasible blend recovered from the relaxation.
    pub tnc_lower: f64,
    /// tnc_upper − tnc_profit: the platform's deviation headroom.
    pub epsilon_abs: f64,
    /// epsilon_abs / tnc_upper.
    pub epsilon_rel: f64,
    /// Ridership at the candidate (trips/hr).
    pub transit_ridership: f64,
    /// Ridership of a fresh agency best response against the candidate
    /// platform strategy; at most `transit_ridership` (within solver
    /// tolerance) whenever the certificate holds.
    pub transit_resolve_ridership: f64,
    /// Whether the agency's side is certified globally optimal, so it
    /// contributes nothing to ε.
    pub transit_global: bool,
    pub certificate: ConcavityCertificate,
}

/// Audits a candidate pair: sandwiches the platform's profit between the
/// destination-decomposed relaxation bound and the blend profit (with the
/// agency fixed), and re-solves the agency side under the curvature audit
/// (with the platform fixed). The two branches are independent and run
/// concurrently.
pub fn expost_evaluate(
    candidate: &CandidateEquilibrium,
    scenario: &Scenario,
    partition: &Partition,
    options: &SolverOptions,
) -> Result<EpsilonReport, EquilibriumError> {
    let (bounds, transit_side) = rayon::join(
        || tnc_profit_bounds(&candidate.tnc, &candidate.transit, scenario, partition, &options.tnc),
        || -> Result<_, EquilibriumError> {
            let grid = fare_grid(scenario, options.transit.fare_points);
            let certificate = certify_concavity(scenario, &candidate.tnc, &grid)?;
            let resolve_cfg = TransitSolveConfig { certify: false, ..options.transit.clone() };
            let (_, resolve_ridership, _) =
                solve_transit_best_response(&candidate.tnc, scenario, &resolve_cfg)?;
            let ridership = transit_ridership(&candidate.tnc, &candidate.transit, scenario)?;
            Ok((certificate, resolve_ridership, ridership))
        },
    );
    let bounds = bounds?;
    let (certificate, transit_resolve_ridership, ridership) = transit_side?;
    Ok(EpsilonReport {
        tnc_profit: bounds.upper - bounds.epsilon_abs,
        tnc_upper: bounds.upper,
        tnc_lower: bounds.lower,
        epsilon_abs: bounds.epsilon_abs,
        epsilon_rel: bounds.epsilon_rel,
        transit_ridership: ridership,
        transit_resolve_ridership,
        transit_global: certificate.holds,
        certificate,
    })
}

/// A deterministic spread of starting pairs for multi-start robustness
/// checks: mid-box, low-price/high-service, and high-price/low-service.
pub fn default_initial_strategies(scenario: &Scenario) -> Vec<(TncStrategy, TransitStrategy)> {
    let m = scenario.num_zones();
    let ll = scenario.network.lines.len();
    let r_p_max = scenario.transit_economics.r_p_max;
    let f_span: Vec<(f64, f64)> = scenario
        .network
        .lines
        .iter()
        .map(|l| (l.f_min, l.f_max))
        .collect();
    let f_at = |t: f64| -> Vec<f64> {
        f_span.iter().map(|&(lo, hi)| lo + t * (hi - lo)).collect()
    };
    let mut out = Vec::with_capacity(3);
    out.push((
        TncStrategy { b: 2.0, r: vec![1.0; m], n_idle: vec![50.0; m] },
        TransitStrategy { r_p: 0.5 * r_p_max, f: f_at(0.5) },
    ));
    out.push((
        TncStrategy { b: 0.5, r: vec![0.25; m], n_idle: vec![200.0; m] },
        TransitStrategy { r_p: 0.1 * r_p_max, f: f_at(0.9) },
    ));
    out.push((
        TncStrategy { b: 6.0, r: vec![2.5; m], n_idle: vec![10.0; m] },
        TransitStrategy { r_p: 0.9 * r_p_max, f: f_at(0.25).iter().map(|f| f.max(1.0)).collect() },
    ));
    debug_assert_eq!(out[0].1.f.len(), ll);
    out
}
