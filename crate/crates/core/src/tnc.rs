//! The ride-hail platform: strategy representation and profit accounting.
//!
//! The platform prices a base fare `b` ($/trip), a per-mile rate `r_i`
//! ($/mile) by origin zone, and stations an idle fleet `n_idle[i]`
//! (vehicles) in each zone. Profit is fare revenue minus the per-vehicle-hour
//! cost of the whole fleet, idle and busy alike.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::choice::{amod_waits, demand_tensor, fleet_hours, ChoiceError, DemandTensor, Mode};
use crate::evals::TncEval;
use crate::network::Partition;
use crate::optim::{geomspace, golden_section, linspace, solve_smooth, SmoothProblem, SolveConfig};
use crate::scenario::Scenario;
use crate::transit::TransitStrategy;

/// Platform decision variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TncStrategy {
    /// Base fare ($/trip); bundles charge it once per ride-hail leg.
    pub b: f64,
    /// Per-mile rate by origin zone of the ride-hail leg ($/mile).
    pub r: Vec<f64>,
    /// Idle vehicles stationed per zone.
    pub n_idle: Vec<f64>,
}

impl TncStrategy {
    pub fn num_zones(&self) -> usize {
        self.r.len()
    }

    /// Stacks the strategy as [b, r_1..r_M, N_1..N_M].
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(1 + 2 * self.r.len());
        v.push(self.b);
        v.extend_from_slice(&self.r);
        v.extend_from_slice(&self.n_idle);
        v
    }

    pub fn from_vec(m: usize, v: &[f64]) -> Self {
        TncStrategy {
            b: v[0],
            r: v[1..1 + m].to_vec(),
            n_idle: v[1 + m..1 + 2 * m].to_vec(),
        }
    }
}

/// Fare revenue of one trip of each ride-hail-using mode for OD (i, j):
/// base fare per leg plus the origin-zone distance rate over the leg length.
fn revenue_per_trip(
    tnc: &TncStrategy,
    l_a: f64,
    d_i: f64,
    d_j: f64,
    i: usize,
    j: usize,
) -> (f64, f64, f64, f64) {
    let direct = tnc.b + tnc.r[i] * l_a;
    let first = tnc.b + tnc.r[i] * d_i;
    let last = tnc.b + tnc.r[j] * d_j;
    let both = first + last;
    (direct, first, last, both)
}

/// Platform profit at a strategy pair, from first principles: demand, then
/// fare revenue, minus fleet cost via the vehicle-hour conservation law.
pub fn tnc_profit(
    tnc: &TncStrategy,
    transit: &TransitStrategy,
    scenario: &Scenario,
) -> Result<f64, ChoiceError> {
    let demand = demand_tensor(tnc, transit, scenario)?;
    tnc_profit_from_demand(&demand, tnc, scenario)
}

/// Profit given a demand tensor already evaluated at (tnc, transit).
pub fn tnc_profit_from_demand(
    demand: &DemandTensor,
    tnc: &TncStrategy,
    scenario: &Scenario,
) -> Result<f64, ChoiceError> {
    let net = &scenario.network;
    let m = net.num_zones();
    let kk = demand.num_classes();
    let mut revenue = 0.0;
    for i in 0..m {
        for j in 0..m {
            let (p_a, p_b1, p_b2, p_b3) =
                revenue_per_trip(tnc, net.l_a(i, j), net.d[i], net.d[j], i, j);
            for k in 0..kk {
                revenue += demand.demand(i, j, k, Mode::Amod) * p_a
                    + demand.demand(i, j, k, Mode::Bundle1) * p_b1
                    + demand.demand(i, j, k, Mode::Bundle2) * p_b2
                    + demand.demand(i, j, k, Mode::Bundle3) * p_b3;
            }
        }
    }
    let w = amod_waits(tnc, net)?;
    let fleet = fleet_hours(demand, &tnc.n_idle, &w, net, scenario.behavior.v_a);
    Ok(revenue - scenario.c_av_per_hour * fleet)
}

/// Profit in per-trip-margin form: each served trip contributes its fare
/// minus the vehicle-hours it consumes priced at the fleet cost, and the
/// idle fleet is billed separately. Algebraically identical to
/// [`tnc_profit`]; kept as an independent formulation for cross-checking
/// and as the basis of the per-OD decomposition used by the optimizer.
pub fn tnc_profit_margins(
    tnc: &TncStrategy,
    transit: &TransitStrategy,
    scenario: &Scenario,
) -> Result<f64, ChoiceError> {
    let demand = demand_tensor(tnc, transit, scenario)?;
    let net = &scenario.network;
    let m = net.num_zones();
    let kk = demand.num_classes();
    let c = scenario.c_av_per_hour;
    let v_a = scenario.behavior.v_a;
    let w = amod_waits(tnc, net)?;
    let mut total = -c * tnc.n_idle.iter().sum::<f64>();
    for i in 0..m {
        for j in 0..m {
            let l_a = net.l_a(i, j);
            let (d_i, d_j) = (net.d[i], net.d[j]);
            let m_a = tnc.b + (tnc.r[i] - c / v_a) * l_a - c * w[i];
            let m_b1 = tnc.b + (tnc.r[i] - c / v_a) * d_i - c * w[i];
            let m_b2 = tnc.b + (tnc.r[j] - c / v_a) * d_j - c * w[j];
            let m_b3 = m_b1 + m_b2;
            for k in 0..kk {
                total += demand.demand(i, j, k, Mode::Amod) * m_a
                    + demand.demand(i, j, k, Mode::Bundle1) * m_b1
                    + demand.demand(i, j, k, Mode::Bundle2) * m_b2
                    + demand.demand(i, j, k, Mode::Bundle3) * m_b3;
            }
        }
    }
    Ok(total)
}

/// Tuning for the platform-side solvers: decision boxes, multi-start count,
/// and the grid/refinement resolution of the relaxation machinery.
#[derive(Debug, Clone, PartialEq)]
pub struct TncSolveConfig {
    /// Upper box bound on the base fare ($/trip).
    pub fare_cap: f64,
    /// Upper box bound on every per-mile rate ($/mile).
    pub rate_cap: f64,
    /// Smallest ride-hail wait the idle-fleet box can express; the per-zone
    /// fleet cap is (matching_scale / wait_floor_hours)².
    pub wait_floor_hours: f64,
    /// Number of deterministic starting points for the smooth best response.
    pub starts: usize,
    /// Grid points per coordinate in master-coordinate scans and in the
    /// full-resolution per-origin subproblem grids.
    pub grid_points: usize,
    /// Cheaper per-origin grid used while exploring master coordinates.
    pub explore_points: usize,
    /// Golden-section iterations per one-dimensional refinement.
    pub refine_iters: usize,
    /// Cap on coordinate-descent sweeps over a cell's master variables.
    pub max_sweeps: usize,
    /// Settings for the projected quasi-Newton best-response solver.
    pub smooth: SolveConfig,
}

impl Default for TncSolveConfig {
    fn default() -> Self {
        TncSolveConfig {
            fare_cap: 60.0,
            rate_cap: 30.0,
            wait_floor_hours: 0.01,
            starts: 5,
            grid_points: 40,
            explore_points: 12,
            refine_iters: 32,
            max_sweeps: 10,
            smooth: SolveConfig::default(),
        }
    }
}

/// A full platform strategy earmarked for the destinations of one partition
/// cell: trips ending in the cell are priced with base fare `b`, origin-zone
/// rates `r[i]`, and idle fleets `n_idle[i]` for every origin zone `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DestinationStrategy {
    pub b: f64,
    pub r: Vec<f64>,
    pub n_idle: Vec<f64>,
}

/// Sandwich around the platform's unknown exact optimum against a fixed
/// transit strategy, plus the gap between the upper bound and the profit the
/// candidate strategy actually realizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitBounds {
    /// Sum of the per-cell relaxed optima; no platform strategy can earn more.
    pub upper: f64,
    /// Profit of the feasible blend assembled from the cell strategies.
    pub lower: f64,
    /// upper − profit(candidate): the most any unilateral platform deviation
    /// could gain over the candidate.
    pub epsilon_abs: f64,
    /// `epsilon_abs` relative to the upper bound.
    pub epsilon_rel: f64,
    /// Relaxed optimum of each partition cell, in cell order.
    pub per_cell_values: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum TncError {
    #[error("platform best-response search produced no usable iterate")]
    NotConverged,
    #[error("relaxed-cell solve requires a non-empty cell")]
    EmptyCell,
    #[error(transparent)]
    Choice(#[from] ChoiceError),
}

/// Per-zone idle-fleet box. The floor enforces any minimum-service rule
/// exactly: a wait cap w̄ binds the fleet from below at (matching_scale/w̄)².
pub(crate) fn idle_bounds(sc: &Scenario, cfg: &TncSolveConfig) -> (Vec<f64>, Vec<f64>) {
    let m = sc.num_zones();
    let mut lo: Vec<f64> = vec![1e-6; m];
    let mut hi: Vec<f64> = vec![0.0; m];
    for i in 0..m {
        let a = sc.network.zones[i].matching_scale;
        if let Some(w_max) = sc.policy.w_a_max {
            lo[i] = lo[i].max((a / w_max).powi(2));
        }
        hi[i] = ((a / cfg.wait_floor_hours).powi(2)).max(lo[i] * (1.0 + 1e-9));
    }
    (lo, hi)
}

/// Deterministic spread of starting strategies across the plausible pricing
/// range: low/medium/high fares paired with target waits for the fleet.
fn pricing_starts(sc: &Scenario, cfg: &TncSolveConfig, n_lo: &[f64], n_hi: &[f64]) -> Vec<Vec<f64>> {
    const BASE: [f64; 5] = [2.0, 5.0, 0.8, 3.5, 1.2];
    const RATE: [f64; 5] = [1.5, 3.0, 0.8, 2.2, 4.5];
    const WAIT: [f64; 5] = [0.10, 0.05, 0.20, 0.15, 0.08];
    let m = sc.num_zones();
    let mut out = Vec::new();
    for s in 0..cfg.starts.min(BASE.len()) {
        let mut x = Vec::with_capacity(1 + 2 * m);
        x.push(BASE[s].min(cfg.fare_cap));
        for _ in 0..m {
            x.push(RATE[s].min(cfg.rate_cap));
        }
        for i in 0..m {
            let a = sc.network.zones[i].matching_scale;
            x.push(((a / WAIT[s]).powi(2)).clamp(n_lo[i], n_hi[i]));
        }
        out.push(x);
    }
    out
}

/// Platform best response to a fixed transit strategy: projected
/// quasi-Newton ascent on the analytic profit gradient from several
/// deterministic starts, best value wins.
///
/// The start set is fixed, so the result is a pure function of the inputs;
/// repeated calls against the same transit strategy reproduce the same
/// strategy bit for bit, which lets alternating play settle instead of
/// chasing its own tail.
///
/// Any minimum-service wait cap in the scenario's policy is enforced exactly
/// through the idle-fleet box. Errors with [`TncError::NotConverged`] only
/// if no start produces a finite iterate.
pub fn solve_tnc_best_response(
    transit: &TransitStrategy,
    scenario: &Scenario,
    config: &TncSolveConfig,
) -> Result<TncStrategy, TncError> {
    let eval = TncEval::new(scenario, transit)?;
    let m = scenario.num_zones();
    let (n_lo, n_hi) = idle_bounds(scenario, config);
    let mut lower = Vec::with_capacity(1 + 2 * m);
    let mut upper = Vec::with_capacity(1 + 2 * m);
    lower.push(1e-6);
    upper.push(config.fare_cap);
    for _ in 0..m {
        lower.push(1e-6);
        upper.push(config.rate_cap);
    }
    lower.extend_from_slice(&n_lo);
    upper.extend_from_slice(&n_hi);

    let problem = SmoothProblem {
        lower,
        upper,
        objective: Box::new(|x: &[f64]| eval.profit(x, None)),
        gradient: Some(Box::new(|x: &[f64]| {
            let mut g = vec![0.0; x.len()];
            eval.profit(x, Some(&mut g));
            g
        })),
        constraints: Vec::new(),
    };

    let starts = pricing_starts(scenario, config, &n_lo, &n_hi);

    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in &starts {
        let Ok(report) = solve_smooth(&problem, s, &config.smooth) else {
            continue;
        };
        if report.value.is_finite()
            && best.as_ref().is_none_or(|(v, _)| report.value > *v)
        {
            best = Some((report.value, report.x));
        }
    }
    let (_, x) = best.ok_or(TncError::NotConverged)?;
    Ok(TncStrategy::from_vec(m, &x))
}

/// One destination cell's relaxed profit maximization.
///
/// Master variables are the cell-shared base fare and the (rate, fleet) pair
/// of each cell zone, stacked as [b, r.., n..] in cell order. Every origin
/// outside the cell contributes an independent two-variable subproblem; its
/// idle fleet is billed at the cell's share of the fleetwide cost.
struct CellProblem<'e, 'a> {
    eval: &'e TncEval<'a>,
    cell: &'e [usize],
    outside: Vec<usize>,
    idle_rate: f64,
    b_box: (f64, f64),
    r_box: (f64, f64),
    n_lo: Vec<f64>,
    n_hi: Vec<f64>,
    refine: usize,
    /// Optional per-origin (rate, fleet) anchors; subproblem solves never
    /// return less than the objective at the anchor, which pins the cell
    /// optimum above the anchored strategy's share of profit.
    seeds: Option<Vec<(f64, f64)>>,
}

impl CellProblem<'_, '_> {
    fn dims(&self) -> usize {
        1 + 2 * self.cell.len()
    }

    /// Box and scale of master coordinate `d`; `true` marks fleet
    /// coordinates, which grid and refine geometrically.
    fn master_box(&self, d: usize) -> (f64, f64, bool) {
        let q = self.cell.len();
        if d == 0 {
            (self.b_box.0, self.b_box.1, false)
        } else if d <= q {
            (self.r_box.0, self.r_box.1, false)
        } else {
            let z = self.cell[d - 1 - q];
            (self.n_lo[z], self.n_hi[z], true)
        }
    }

    /// Contribution of the pinned origins (the cell zones themselves).
    fn direct_part(&self, mv: &[f64]) -> f64 {
        let q = self.cell.len();
        let b = mv[0];
        let mut total = 0.0;
        for (ti, &i) in self.cell.iter().enumerate() {
            let (r_i, n_i) = (mv[1 + ti], mv[1 + q + ti]);
            for (tj, &j) in self.cell.iter().enumerate() {
                total += self
                    .eval
                    .od_profit(i, j, b, r_i, n_i, mv[1 + tj], mv[1 + q + tj]);
            }
            total -= self.idle_rate * n_i;
        }
        total
    }

    /// Subproblem objective for one outside origin at (rate, fleet).
    fn origin_objective(&self, i: usize, mv: &[f64], r: f64, n: f64) -> f64 {
        let q = self.cell.len();
        let b = mv[0];
        let mut v = -self.idle_rate * n;
        for (tj, &j) in self.cell.iter().enumerate() {
            v += self.eval.od_profit(i, j, b, r, n, mv[1 + tj], mv[1 + q + tj]);
        }
        v
    }

    /// Grid scan plus one golden pass per coordinate, then the seed anchor.
    fn solve_origin(&self, i: usize, mv: &[f64], points: usize) -> (f64, f64, f64) {
        let q = self.cell.len();
        let p = points.max(2);
        let rs = linspace(self.r_box.0, self.r_box.1, p);
        let ns = geomspace(self.n_lo[i], self.n_hi[i], p);
        let mut grid = vec![0.0; p * p];
        self.eval.origin_grid_profit(
            i,
            self.cell,
            mv[0],
            &mv[1..1 + q],
            &mv[1 + q..1 + 2 * q],
            &rs,
            &ns,
            &mut grid,
        );
        let mut best_v = f64::NEG_INFINITY;
        let (mut s_best, mut t_best) = (0, 0);
        for s in 0..p {
            for t in 0..p {
                let v = grid[s * p + t] - self.idle_rate * ns[t];
                if v > best_v {
                    best_v = v;
                    s_best = s;
                    t_best = t;
                }
            }
        }
        let (mut r_best, mut n_best) = (rs[s_best], ns[t_best]);
        let (ra, rb) = neighborhood(&rs, s_best);
        if rb > ra {
            let (x, v) =
                golden_section(&mut |r| self.origin_objective(i, mv, r, n_best), ra, rb, self.refine);
            if v > best_v {
                best_v = v;
                r_best = x;
            }
        }
        let (na, nb) = neighborhood(&ns, t_best);
        if nb > na {
            let (x, v) = golden_section(
                &mut |t: f64| self.origin_objective(i, mv, r_best, t.exp()),
                na.ln(),
                nb.ln(),
                self.refine,
            );
            if v > best_v {
                best_v = v;
                n_best = x.exp();
            }
        }
        if let Some(seeds) = &self.seeds {
            let (sr, sn) = seeds[i];
            let sr = sr.clamp(self.r_box.0, self.r_box.1);
            let sn = sn.clamp(self.n_lo[i], self.n_hi[i]);
            let v = self.origin_objective(i, mv, sr, sn);
            if v > best_v {
                best_v = v;
                r_best = sr;
                n_best = sn;
            }
        }
        (best_v, r_best, n_best)
    }

    fn value(&self, mv: &[f64], points: usize) -> f64 {
        let mut total = self.direct_part(mv);
        for &i in &self.outside {
            total += self.solve_origin(i, mv, points).0;
        }
        total
    }

    fn value_with_origins(&self, mv: &[f64], points: usize) -> (f64, Vec<(f64, f64)>) {
        let mut total = self.direct_part(mv);
        let mut origins = Vec::with_capacity(self.outside.len());
        for &i in &self.outside {
            let (v, r, n) = self.solve_origin(i, mv, points);
            total += v;
            origins.push((r, n));
        }
        (total, origins)
    }

    /// Cyclic coordinate descent on the master variables: a full grid scan
    /// plus golden refinement per coordinate, swept until a pass stops
    /// improving. Never accepts a worse point, so sweeps are monotone.
    fn optimize_master(&self, start: &[f64], cfg: &TncSolveConfig) -> (Vec<f64>, f64) {
        let mut mv = start.to_vec();
        for d in 0..self.dims() {
            let (lo, hi, _) = self.master_box(d);
            mv[d] = mv[d].clamp(lo, hi);
        }
        let p = cfg.explore_points;
        let gp = cfg.grid_points.max(2);
        let mut v = self.value(&mv, p);
        for _ in 0..cfg.max_sweeps {
            let v_sweep_start = v;
            for d in 0..self.dims() {
                let (lo, hi, log) = self.master_box(d);
                if hi <= lo {
                    continue;
                }
                let grid = if log {
                    geomspace(lo, hi, gp)
                } else {
                    linspace(lo, hi, gp)
                };
                let old = mv[d];
                let mut best_x = old;
                let mut best_v = v;
                for &t in &grid {
                    mv[d] = t;
                    let vt = self.value(&mv, p);
                    if vt > best_v {
                        best_v = vt;
                        best_x = t;
                    }
                }
                // Golden pass over one grid spacing around the winner.
                let (ba, bb) = if log {
                    let ratio = (hi / lo).powf(1.0 / (gp - 1) as f64);
                    ((best_x / ratio).max(lo), (best_x * ratio).min(hi))
                } else {
                    let h = (hi - lo) / (gp - 1) as f64;
                    ((best_x - h).max(lo), (best_x + h).min(hi))
                };
                if bb > ba {
                    let (x, vr) = if log {
                        let (t, vr) = golden_section(
                            &mut |t: f64| {
                                mv[d] = t.exp();
                                self.value(&mv, p)
                            },
                            ba.ln(),
                            bb.ln(),
                            cfg.refine_iters,
                        );
                        (t.exp(), vr)
                    } else {
                        golden_section(
                            &mut |t: f64| {
                                mv[d] = t;
                                self.value(&mv, p)
                            },
                            ba,
                            bb,
                            cfg.refine_iters,
                        )
                    };
                    if vr > best_v {
                        best_v = vr;
                        best_x = x;
                    }
                }
                mv[d] = best_x;
                v = best_v;
            }
            if v - v_sweep_start <= 1e-9 * v.abs().max(1.0) {
                break;
            }
        }
        (mv, v)
    }
}

/// Master-variable restriction of a uniform strategy to a cell.
fn restrict_to_cell(s: &TncStrategy, cell: &[usize]) -> Vec<f64> {
    let mut mv = Vec::with_capacity(1 + 2 * cell.len());
    mv.push(s.b);
    mv.extend(cell.iter().map(|&z| s.r[z]));
    mv.extend(cell.iter().map(|&z| s.n_idle[z]));
    mv
}

/// Interval one grid spacing wide around grid point `k`.
fn neighborhood(grid: &[f64], k: usize) -> (f64, f64) {
    let lo = if k == 0 { grid[0] } else { grid[k - 1] };
    let hi = if k + 1 >= grid.len() {
        grid[grid.len() - 1]
    } else {
        grid[k + 1]
    };
    (lo, hi)
}

fn solve_relaxed_cell_with(
    eval: &TncEval,
    scenario: &Scenario,
    cell: &[usize],
    config: &TncSolveConfig,
    seed: Option<&TncStrategy>,
) -> Result<(DestinationStrategy, f64), TncError> {
    if cell.is_empty() {
        return Err(TncError::EmptyCell);
    }
    let m = scenario.num_zones();
    let (n_lo, n_hi) = idle_bounds(scenario, config);
    let problem = CellProblem {
        eval,
        cell,
        outside: (0..m).filter(|z| !cell.contains(z)).collect(),
        idle_rate: scenario.c_av_per_hour * cell.len() as f64 / m as f64,
        b_box: (1e-6, config.fare_cap),
        r_box: (1e-6, config.rate_cap),
        n_lo,
        n_hi,
        refine: config.refine_iters,
        seeds: seed.map(|s| s.r.iter().copied().zip(s.n_idle.iter().copied()).collect()),
    };

    // With a seed the search starts from its restriction; unseeded solves
    // spread two deterministic starts over the pricing range.
    let mut starts = Vec::new();
    if let Some(s) = seed {
        starts.push(restrict_to_cell(s, cell));
    } else {
        for (b, r, w) in [(2.0_f64, 1.5, 0.1), (0.5, 4.0, 0.05)] {
            let mut mv = vec![b.min(config.fare_cap)];
            mv.extend(cell.iter().map(|_| r));
            mv.extend(
                cell.iter()
                    .map(|&z| (scenario.network.zones[z].matching_scale / w).powi(2)),
            );
            starts.push(mv);
        }
    }
    let mut explored: Option<(f64, Vec<f64>)> = None;
    for s in &starts {
        let (mv, v) = problem.optimize_master(s, config);
        if explored.as_ref().is_none_or(|(bv, _)| v > *bv) {
            explored = Some((v, mv));
        }
    }
    let (_, best_mv) = explored.expect("at least one master start");

    // Full-resolution comparison of the explored optimum against the raw
    // seed restriction keeps the final value anchored above the seed.
    let mut finals = vec![best_mv];
    if let Some(s) = seed {
        finals.push(restrict_to_cell(s, cell));
    }
    let mut best: Option<(f64, Vec<(f64, f64)>, Vec<f64>)> = None;
    for mv in finals {
        let (v, origins) = problem.value_with_origins(&mv, config.grid_points);
        if best.as_ref().is_none_or(|(bv, _, _)| v > *bv) {
            best = Some((v, origins, mv));
        }
    }
    let (value, origins, mv) = best.expect("at least one final point");

    let q = cell.len();
    let mut r = vec![0.0; m];
    let mut n_idle = vec![0.0; m];
    for (t, &z) in cell.iter().enumerate() {
        r[z] = mv[1 + t];
        n_idle[z] = mv[1 + q + t];
    }
    for (o, &z) in problem.outside.iter().enumerate() {
        r[z] = origins[o].0;
        n_idle[z] = origins[o].1;
    }
    Ok((DestinationStrategy { b: mv[0], r, n_idle }, value))
}

/// Relaxed profit maximization for the trips ending in one partition cell:
/// primal decomposition with a coordinate-descent master over the cell-shared
/// variables and grid-plus-refinement subproblems per outside origin.
///
/// Returns the strategy the platform would dedicate to this cell's
/// destinations and its (relaxed) hourly profit contribution.
pub fn solve_relaxed_cell(
    cell: &[usize],
    transit: &TransitStrategy,
    scenario: &Scenario,
    config: &TncSolveConfig,
) -> Result<(DestinationStrategy, f64), TncError> {
    let eval = TncEval::new(scenario, transit)?;
    solve_relaxed_cell_with(&eval, scenario, cell, config, None)
}

/// Certifies how close `candidate` is to the platform's true optimum against
/// `transit`: cell-by-cell relaxed optima sum to an upper bound, their
/// profit-weighted blend evaluates to a feasible lower bound, and the gap
/// `upper − profit(candidate)` caps what any unilateral deviation could gain.
///
/// Every cell solve is anchored at `candidate`, so `upper` can never fall
/// below the candidate's own profit (beyond floating-point noise).
pub fn tnc_profit_bounds(
    candidate: &TncStrategy,
    transit: &TransitStrategy,
    scenario: &Scenario,
    partition: &Partition,
    config: &TncSolveConfig,
) -> Result<ProfitBounds, TncError> {
    let eval = TncEval::new(scenario, transit)?;
    let m = scenario.num_zones();
    // Cells are independent subproblems; solving them in parallel keeps
    // cell order (and therefore every downstream number) intact.
    let solved: Result<Vec<_>, TncError> = partition
        .cells
        .par_iter()
        .map(|cell| solve_relaxed_cell_with(&eval, scenario, cell, config, Some(candidate)))
        .collect();
    let (cell_strategies, per_cell_values): (Vec<_>, Vec<f64>) = solved?.into_iter().unzip();
    let upper: f64 = per_cell_values.iter().sum();
    let candidate_profit = tnc_profit(candidate, transit, scenario)?;

    // Feasible blend of the cell strategies, weighted by cell profit; the
    // weighting is only meaningful when every cell is profitable, so
    // nonpositive cells flip the blend to uniform weights.
    let weights: Vec<f64> = if per_cell_values.iter().all(|&v| v > 0.0) {
        per_cell_values.clone()
    } else {
        vec![1.0; per_cell_values.len()]
    };
    let wsum: f64 = weights.iter().sum();
    let mut blend = TncStrategy {
        b: 0.0,
        r: vec![0.0; m],
        n_idle: vec![0.0; m],
    };
    for (w, dest) in weights.iter().zip(&cell_strategies) {
        let share = w / wsum;
        blend.b += share * dest.b;
        for i in 0..m {
            blend.r[i] += share * dest.r[i];
            blend.n_idle[i] += share * dest.n_idle[i];
        }
    }
    // Blending preserves the box, but re-project anyway so the lower bound
    // is always evaluated at a feasible point.
    let (n_lo, n_hi) = idle_bounds(scenario, config);
    blend.b = blend.b.clamp(1e-6, config.fare_cap);
    for i in 0..m {
        blend.r[i] = blend.r[i].clamp(1e-6, config.rate_cap);
        blend.n_idle[i] = blend.n_idle[i].clamp(n_lo[i], n_hi[i]);
    }
    let lower = tnc_profit(&blend, transit, scenario)?;
    let epsilon_abs = upper - candidate_profit;
    let epsilon_rel = if upper.abs() > 0.0 {
        epsilon_abs / upper.abs()
    } else {
        0.0
    };
    Ok(ProfitBounds {
        upper,
        lower,
        epsilon_abs,
        epsilon_rel,
        per_cell_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{partition_zones, PartitionStrategy};
    use crate::optim::grid_search;
    use crate::testutil::{toy_scenario, ToySpec};
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;

    #[test]
    fn margin_form_matches_first_principles_profit() {
        let mut spec = ToySpec::three_zone();
        spec.classes = 2;
        let sc = toy_scenario(&spec);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..25 {
            let tnc = TncStrategy {
                b: rng.gen_range(0.0..8.0),
                r: (0..3).map(|_| rng.gen_range(0.1..5.0)).collect(),
                n_idle: (0..3).map(|_| rng.gen_range(0.5..80.0)).collect(),
            };
            let transit = TransitStrategy {
                r_p: rng.gen_range(0.0..2.5),
                f: vec![rng.gen_range(1.0..40.0), rng.gen_range(1.0..40.0)],
            };
            let direct = tnc_profit(&tnc, &transit, &sc).unwrap();
            let margins = tnc_profit_margins(&tnc, &transit, &sc).unwrap();
            assert_abs_diff_eq!(direct, margins, epsilon = 1e-8 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn zero_fares_lose_the_fleet_cost() {
        let spec = ToySpec::two_zone();
        let sc = toy_scenario(&spec);
        let tnc = TncStrategy {
            b: 0.0,
            r: vec![0.0, 0.0],
            n_idle: vec![10.0, 10.0],
        };
        let transit = TransitStrategy { r_p: 0.5, f: vec![10.0] };
        let profit = tnc_profit(&tnc, &transit, &sc).unwrap();
        // No revenue; fleet cost covers at least the 20 idle vehicles.
        assert!(profit <= -sc.c_av_per_hour * 20.0);
    }

    #[test]
    fn strategy_vector_round_trip() {
        let t = TncStrategy {
            b: 2.5,
            r: vec![1.0, 2.0, 3.0],
            n_idle: vec![4.0, 5.0, 6.0],
        };
        assert_eq!(TncStrategy::from_vec(3, &t.to_vec()), t);
    }

    /// Coarser boxes keep the toy solves and their dense oracles aligned on
    /// the economically relevant region.
    fn toy_config() -> TncSolveConfig {
        TncSolveConfig {
            fare_cap: 12.0,
            rate_cap: 8.0,
            ..TncSolveConfig::default()
        }
    }

    #[test]
    fn symmetric_zones_get_symmetric_best_response() {
        let spec = ToySpec::two_zone();
        let sc = toy_scenario(&spec);
        let transit = TransitStrategy { r_p: 1.0, f: vec![12.0] };
        let tnc = solve_tnc_best_response(&transit, &sc, &toy_config()).unwrap();
        assert_abs_diff_eq!(tnc.r[0], tnc.r[1], epsilon = 1e-4 * tnc.r[0].max(1.0));
        assert_abs_diff_eq!(
            tnc.n_idle[0],
            tnc.n_idle[1],
            epsilon = 1e-4 * tnc.n_idle[0].max(1.0)
        );
    }

    /// Dense 5-variable grid over (b, r_1, r_2, N_1, N_2) of an arbitrary
    /// 2-zone objective; the independent yardstick for the smooth solver and
    /// the relaxation machinery.
    fn dense_two_zone_oracle(
        grids: &[Vec<f64>; 5],
        objective: &mut dyn FnMut(f64, f64, f64, f64, f64) -> f64,
    ) -> f64 {
        let g: Vec<Vec<f64>> = grids.to_vec();
        let (_, v) = grid_search(&g, &mut |x: &[f64]| {
            objective(x[0], x[1], x[2], x[3], x[4])
        })
        .unwrap();
        v
    }

    fn oracle_grids() -> [Vec<f64>; 5] {
        let b: Vec<f64> = (0..9).map(|t| 1e-6 + 1.25 * t as f64).collect();
        let r: Vec<f64> = (0..9).map(|t| 1e-6 + 0.9 * t as f64).collect();
        let n: Vec<f64> = (0..9).map(|t| 0.3 * 2.6_f64.powi(t)).collect();
        [b.clone(), r.clone(), r, n.clone(), n]
    }

    #[test]
    fn asymmetric_demand_concentrates_the_fleet() {
        let spec = ToySpec::two_zone();
        let mut sc = toy_scenario(&spec);
        // Trips originating in zone 1 are ten times more numerous; its OD
        // rows sit first in the [od][class] layout.
        let kk = sc.num_classes();
        for j in 0..2 {
            for k in 0..kk {
                sc.lambda0[j * kk + k] *= 10.0;
            }
        }
        let transit = TransitStrategy { r_p: 1.0, f: vec![12.0] };
        let tnc = solve_tnc_best_response(&transit, &sc, &toy_config()).unwrap();
        assert!(
            tnc.n_idle[0] > tnc.n_idle[1],
            "fleet should concentrate where demand is: {:?}",
            tnc.n_idle
        );
        // The smooth solver must not fall short of a coarse dense grid.
        let eval = TncEval::new(&sc, &transit).unwrap();
        let oracle = dense_two_zone_oracle(&oracle_grids(), &mut |b, r1, r2, n1, n2| {
            eval.profit(&[b, r1, r2, n1, n2], None)
        });
        let achieved = tnc_profit(&tnc, &transit, &sc).unwrap();
        assert!(
            achieved >= oracle - 1e-3 * oracle.abs(),
            "solver {achieved} vs dense grid {oracle}"
        );
    }

    #[test]
    fn min_service_cap_binds_the_fleet_box_exactly() {
        let spec = ToySpec::two_zone();
        let mut sc = toy_scenario(&spec);
        // Tight enough (72 s) that the profit optimum alone would not meet it.
        sc.policy.w_a_max = Some(0.02);
        let transit = TransitStrategy { r_p: 1.0, f: vec![12.0] };
        let tnc = solve_tnc_best_response(&transit, &sc, &toy_config()).unwrap();
        let waits = amod_waits(&tnc, &sc.network).unwrap();
        for (i, w) in waits.iter().enumerate() {
            assert!(
                *w <= 0.02 + 1e-12,
                "zone {i} wait {w} violates the 0.02 h cap"
            );
        }
    }

    #[test]
    fn whole_cell_solve_matches_dense_grid() {
        let spec = ToySpec::two_zone();
        let sc = toy_scenario(&spec);
        let transit = TransitStrategy { r_p: 1.0, f: vec![12.0] };
        let cfg = toy_config();
        let (dest, value) = solve_relaxed_cell(&[0, 1], &transit, &sc, &cfg).unwrap();
        // A whole-network cell is the original problem: its value must be the
        // profit of the returned strategy, and at least the dense-grid best.
        let as_uniform = TncStrategy {
            b: dest.b,
            r: dest.r.clone(),
            n_idle: dest.n_idle.clone(),
        };
        let direct = tnc_profit(&as_uniform, &transit, &sc).unwrap();
        assert_abs_diff_eq!(value, direct, epsilon = 1e-8 * direct.abs().max(1.0));
        let eval = TncEval::new(&sc, &transit).unwrap();
        let oracle = dense_two_zone_oracle(&oracle_grids(), &mut |b, r1, r2, n1, n2| {
            eval.profit(&[b, r1, r2, n1, n2], None)
        });
        assert!(
            value >= oracle - 1e-3 * oracle.abs(),
            "cell solve {value} vs dense grid {oracle}"
        );
    }

    #[test]
    fn singleton_cell_solve_matches_dense_grid() {
        let spec = ToySpec::two_zone();
        let sc = toy_scenario(&spec);
        let transit = TransitStrategy { r_p: 1.0, f: vec![12.0] };
        let cfg = toy_config();
        let (_, value) = solve_relaxed_cell(&[0], &transit, &sc, &cfg).unwrap();
        let eval = TncEval::new(&sc, &transit).unwrap();
        // Same decomposition objective, brute-forced over all five variables:
        // both origins feed destination 0 only, idle billed at half rate.
        let half_idle = sc.c_av_per_hour / 2.0;
        let oracle = dense_two_zone_oracle(&oracle_grids(), &mut |b, r0, r1, n0, n1| {
            eval.od_profit(0, 0, b, r0, n0, r0, n0) + eval.od_profit(1, 0, b, r1, n1, r0, n0)
                - half_idle * (n0 + n1)
        });
        assert!(
            value >= oracle - 1e-3 * oracle.abs(),
            "singleton cell {value} vs dense grid {oracle}"
        );
    }

    #[test]
    fn empty_cell_is_rejected() {
        let spec = ToySpec::two_zone();
        let sc = toy_scenario(&spec);
        let transit = TransitStrategy { r_p: 1.0, f: vec![12.0] };
        assert!(matches!(
            solve_relaxed_cell(&[], &transit, &sc, &toy_config()),
            Err(TncError::EmptyCell)
        ));
    }

    #[test]
    fn bound_sandwich_and_partition_monotonicity() {
        let spec = ToySpec::three_zone();
        let sc = toy_scenario(&spec);
        let transit = TransitStrategy { r_p: 1.0, f: vec![12.0, 10.0] };
        let cfg = toy_config();
        let candidate = solve_tnc_best_response(&transit, &sc, &cfg).unwrap();
        let profit = tnc_profit(&candidate, &transit, &sc).unwrap();
        let mut uppers = Vec::new();
        for strategy in [
            PartitionStrategy::Singleton,
            PartitionStrategy::PairwiseByIndex,
            PartitionStrategy::Whole,
        ] {
            let partition = partition_zones(3, strategy);
            let bounds =
                tnc_profit_bounds(&candidate, &transit, &sc, &partition, &cfg).unwrap();
            let scale = bounds.upper.abs().max(1.0);
            assert!(
                bounds.upper >= profit - 1e-9 * scale,
                "{strategy:?}: upper {} below candidate profit {profit}",
                bounds.upper
            );
            assert!(
                profit >= bounds.lower - 1e-6 * bounds.lower.abs().max(1.0),
                "{strategy:?}: candidate profit {profit} below lower {}",
                bounds.lower
            );
            assert!(bounds.epsilon_abs >= -1e-6 * scale);
            assert_abs_diff_eq!(
                bounds.per_cell_values.iter().sum::<f64>(),
                bounds.upper,
                epsilon = 1e-12 * scale
            );
            uppers.push(bounds.upper);
        }
        // Coarser partitions relax more: singleton ≥ pairwise ≥ whole.
        let scale = uppers[0].abs().max(1.0);
        assert!(
            uppers[0] >= uppers[1] - 1e-6 * scale,
            "singleton {} vs pairwise {}",
            uppers[0],
            uppers[1]
        );
        assert!(
            uppers[1] >= uppers[2] - 1e-6 * scale,
            "pairwise {} vs whole {}",
            uppers[1],
            uppers[2]
        );
    }

    #[test]
    fn relaxation_dominates_any_anchored_uniform_strategy() {
        let spec = ToySpec::three_zone();
        let sc = toy_scenario(&spec);
        let transit = TransitStrategy { r_p: 0.8, f: vec![15.0, 8.0] };
        let cfg = toy_config();
        let partition = partition_zones(3, PartitionStrategy::PairwiseByIndex);
        for (b, r, n) in [(1.0, 1.0, 10.0), (4.0, 2.5, 3.0), (0.3, 5.0, 40.0)] {
            let uniform = TncStrategy {
                b,
                r: vec![r; 3],
                n_idle: vec![n; 3],
            };
            let bounds =
                tnc_profit_bounds(&uniform, &transit, &sc, &partition, &cfg).unwrap();
            let profit = tnc_profit(&uniform, &transit, &sc).unwrap();
            assert!(
                bounds.upper >= profit - 1e-9 * bounds.upper.abs().max(1.0),
                "upper {} under anchored profit {profit}",
                bounds.upper
            );
        }
    }
}
