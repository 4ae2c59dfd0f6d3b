//! The transit agency: strategy representation, ridership and budget
//! accounting, the ridership-maximizing best response, and the concavity
//! audit that certifies the best response as globally optimal.
//!
//! The agency sets one per-mile fare `r_p` ($/mile) and a frequency `f_l`
//! (vehicles/hour) per line, maximizing ridership across all
//! transit-carrying modes subject to a minimum operating profit. The best
//! response runs a dense 1-D grid over the fare; at each fare it solves a
//! joint program in the frequencies and per-OD service levels, where each
//! service level is capped by the frequency-implied level
//! 1/(phi_odᵀ[1/f]) and floored by the admissible wait cap.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::choice::{demand_tensor, ChoiceError, DemandTensor, Mode};
use crate::evals::TransitEval;
use crate::optim::{
    golden_section, linspace, solve_smooth, Constraint, OptimError, SmoothProblem, SolveConfig,
};
use crate::scenario::Scenario;
use crate::tnc::TncStrategy;

/// Agency decision variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitStrategy {
    /// Per-mile transit fare ($/mile).
    pub r_p: f64,
    /// Frequency per line (vehicles/hour).
    pub f: Vec<f64>,
}

impl TransitStrategy {
    pub fn num_lines(&self) -> usize {
        self.f.len()
    }

    /// Stacks the strategy as [r_p, f_1..f_L].
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(1 + self.f.len());
        v.push(self.r_p);
        v.extend_from_slice(&self.f);
        v
    }

    pub fn from_vec(v: &[f64]) -> Self {
        TransitStrategy {
            r_p: v[0],
            f: v[1..].to_vec(),
        }
    }
}

/// Ridership on a demand tensor: every passenger who boards a transit
/// vehicle counts once, whether the trip is pure transit or a bundle.
pub fn ridership_from_demand(demand: &DemandTensor) -> f64 {
    demand.mode_total(Mode::Transit)
        + demand.mode_total(Mode::Bundle1)
        + demand.mode_total(Mode::Bundle2)
        + demand.mode_total(Mode::Bundle3)
}

/// Transit ridership (boardings/hour) at a strategy pair.
pub fn transit_ridership(
    tnc: &TncStrategy,
    transit: &TransitStrategy,
    scenario: &Scenario,
) -> Result<f64, ChoiceError> {
    let demand = demand_tensor(tnc, transit, scenario)?;
    Ok(ridership_from_demand(&demand))
}

/// Agency operating profit ($/hour): distance-based fare revenue over the
/// transit leg of every transit-carrying trip, minus per-line operating
/// costs proportional to frequency.
pub fn transit_profit(
    tnc: &TncStrategy,
    transit: &TransitStrategy,
    scenario: &Scenario,
) -> Result<f64, ChoiceError> {
    let demand = demand_tensor(tnc, transit, scenario)?;
    Ok(transit_profit_from_demand(&demand, transit, scenario))
}

/// Operating profit given a demand tensor already evaluated at the pair.
pub fn transit_profit_from_demand(
    demand: &DemandTensor,
    transit: &TransitStrategy,
    scenario: &Scenario,
) -> f64 {
    let net = &scenario.network;
    let m = net.num_zones();
    let kk = demand.num_classes();
    let mut revenue = 0.0;
    for i in 0..m {
        for j in 0..m {
            let l_p = net.l_p(i, j);
            for k in 0..kk {
                let boardings = demand.demand(i, j, k, Mode::Transit)
                    + demand.demand(i, j, k, Mode::Bundle1)
                    + demand.demand(i, j, k, Mode::Bundle2)
                    + demand.demand(i, j, k, Mode::Bundle3);
                revenue += transit.r_p * l_p * boardings;
            }
        }
    }
    let op_cost: f64 = net
        .lines
        .iter()
        .zip(&transit.f)
        .map(|(line, &fl)| line.op_cost * fl)
        .sum();
    revenue - op_cost
}

/// Failures of the agency-side solvers.
#[derive(Debug, Error)]
pub enum TransitError {
    /// No fare and frequency choice satisfies both the wait caps and the
    /// operating-profit floor; the scenario is over-constrained.
    #[error("no fare and frequency choice meets the service and profit requirements")]
    Infeasible,
    #[error(transparent)]
    Choice(#[from] ChoiceError),
    #[error(transparent)]
    Optim(#[from] OptimError),
}

/// Tuning knobs for the agency's best-response search.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitSolveConfig {
    /// Fare-grid resolution over [0, r_p_max].
    pub fare_points: usize,
    /// Golden-section iterations refining the best fare bracket.
    pub refine_iters: usize,
    /// Relative margin required above the service floor when screening
    /// strictly feasible starting frequencies.
    pub cap_slack: f64,
    /// Whether to run the concavity audit backing the returned
    /// global-optimality flag; with the audit off the flag is `false`.
    pub certify: bool,
    /// Inner smooth-solver settings.
    pub smooth: SolveConfig,
}

impl Default for TransitSolveConfig {
    fn default() -> Self {
        TransitSolveConfig {
            fare_points: 61,
            refine_iters: 24,
            cap_slack: 1e-3,
            certify: true,
            smooth: SolveConfig {
                mu_initial: 1e-2,
                mu_shrink: 1e-2,
                max_inner_iter: 120,
                ..SolveConfig::default()
            },
        }
    }
}

/// Result of the global-optimality audit for the agency's inner problem.
///
/// Each OD pair's ridership contribution is concave in its service level
/// wherever the level exceeds a curvature bound; `n_bar` holds the largest
/// fixed point of that bound, maximized over a fare grid. When every entry
/// sits at or below the service floor `threshold` = 1/w_p_max (the lowest
/// admissible level), the inner objective is concave on the whole feasible
/// box and any stationary point of the inner solve is a global optimum.
/// `margins` stores threshold − n_bar per OD, so nonnegative margins pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityCertificate {
    /// Largest fixed point of the curvature bound per OD (row-major).
    pub n_bar: Vec<f64>,
    /// Service floor the fixed points are compared against.
    pub threshold: f64,
    /// threshold − n_bar per OD; all nonnegative iff `holds`.
    pub margins: Vec<f64>,
    /// True when every OD's largest fixed point is at or below the floor.
    pub holds: bool,
}

/// Curvature bound for one OD of the ridership objective: the OD's
/// contribution is concave at service level `n_od` whenever `n_od` is at
/// least this value. Demand-weighted across classes; the platform's
/// strategy fixes the competing-mode weights.
///
/// Degenerate strata are handled explicitly so the fixed-point scan never
/// sees 0/0: with every share pinned at 0 (service so poor the transit
/// weight underflows) the bound tends to its vanishing-service limit
/// (ε/2)·Σα²λ/Σαλ, and with every share pinned at 1 (no competing mode)
/// the sign flips, leaving no fixed point.
pub fn concavity_rhs(
    r_p: f64,
    n_od: f64,
    od: (usize, usize),
    scenario: &Scenario,
    tnc: &TncStrategy,
) -> Result<f64, TransitError> {
    let mut eval = TransitEval::new(scenario, tnc)?;
    eval.set_fare(r_p);
    Ok(rhs_with(&eval, scenario, od.0, od.1, n_od))
}

fn rhs_with(eval: &TransitEval, sc: &Scenario, i: usize, j: usize, n_od: f64) -> f64 {
    let (m, kk) = (sc.num_zones(), sc.num_classes());
    let eps = sc.behavior.epsilon;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut lam_tot = 0.0;
    let mut riders = 0.0;
    let mut a_lam = 0.0;
    let mut a2_lam = 0.0;
    for k in 0..kk {
        let lam = sc.lambda0(i, j, k);
        if lam == 0.0 {
            continue;
        }
        let p = eval.share((i * m + j) * kk + k, k, n_od);
        if !p.is_finite() {
            continue;
        }
        let alpha = sc.behavior.classes[k].alpha;
        num += alpha * alpha * lam * p * (1.0 - p) * (1.0 - 2.0 * p);
        den += alpha * lam * p * (1.0 - p);
        lam_tot += lam;
        riders += lam * p;
        a_lam += alpha * lam;
        a2_lam += alpha * alpha * lam;
    }
    if lam_tot == 0.0 || a_lam == 0.0 {
        return 0.0;
    }
    if den == 0.0 {
        // Every class share is pinned at 0 or 1. Toward vanishing service
        // the bound tends to the demand-weighted limit below; with the
        // market fully captured the sign flips and no fixed point exists.
        let limit = 0.5 * eps * a2_lam / a_lam;
        return if riders / lam_tot >= 0.5 { -limit } else { limit };
    }
    0.5 * eps * num / den
}

/// Largest solution of n = rhs(n) on (0, n_cap], located by a descending
/// geometric scan for a sign change of rhs(n) − n followed by bisection.
/// Returns n_cap itself when the curve is still above the identity line at
/// the cap (the root lies beyond the scan window) and 0 when it is below
/// everywhere (no fixed point).
fn largest_fixed_point(rhs: &mut dyn FnMut(f64) -> f64, n_cap: f64) -> f64 {
    const SCAN_POINTS: usize = 160;
    if rhs(n_cap) - n_cap >= 0.0 {
        return n_cap;
    }
    let floor = (n_cap * 1e-10).min(1e-8);
    let ratio = (floor / n_cap).powf(1.0 / SCAN_POINTS as f64);
    let mut hi = n_cap;
    let mut bracket = None;
    for _ in 0..SCAN_POINTS {
        let lo = hi * ratio;
        if rhs(lo) - lo >= 0.0 {
            bracket = Some((lo, hi));
            break;
        }
        hi = lo;
    }
    let (mut lo, mut hi) = match bracket {
        Some(b) => b,
        None => return 0.0,
    };
    // rhs − n is nonnegative at lo and negative at hi; close in on the
    // upper crossing. Above the largest root the curve stays below the
    // identity line, so the first bracket from the top is the right one.
    for _ in 0..100 {
        if hi - lo <= 1e-13 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if rhs(mid) - mid >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Scan window for the fixed-point search: ten times the service floor,
/// clamped to stay usable for extreme wait caps.
fn scan_cap(sc: &Scenario) -> f64 {
    (10.0 / sc.transit_economics.w_p_max).clamp(1e-6, 1e12)
}

fn nhat_with(eval: &TransitEval, sc: &Scenario, i: usize, j: usize) -> f64 {
    largest_fixed_point(&mut |n| rhs_with(eval, sc, i, j, n), scan_cap(sc))
}

/// Largest fixed point of the curvature bound for one OD pair at fare
/// `r_p`. Zero means the bound lies below the identity line on the whole
/// scan window, so the OD's concavity condition holds unconditionally.
pub fn solve_nhat(
    r_p: f64,
    od: (usize, usize),
    scenario: &Scenario,
    tnc: &TncStrategy,
) -> Result<f64, TransitError> {
    let mut eval = TransitEval::new(scenario, tnc)?;
    eval.set_fare(r_p);
    Ok(nhat_with(&eval, scenario, od.0, od.1))
}

/// The fare grid the best-response sweep and the concavity audit sample:
/// `points` evenly spaced fares over [0, r_p_max].
pub fn fare_grid(scenario: &Scenario, points: usize) -> Vec<f64> {
    linspace(0.0, scenario.transit_economics.r_p_max, points.max(2))
}

/// Audits concavity of the agency's inner objective across a fare grid.
///
/// Maximizes each OD's largest fixed point over the fares and compares the
/// result against the service floor 1/w_p_max; `holds` means every inner
/// solve on the feasible box is a concave program.
pub fn certify_concavity(
    scenario: &Scenario,
    tnc: &TncStrategy,
    r_p_grid: &[f64],
) -> Result<ConcavityCertificate, TransitError> {
    let m = scenario.num_zones();
    let mut eval = TransitEval::new(scenario, tnc)?;
    let threshold = 1.0 / scenario.transit_economics.w_p_max;
    let mut n_bar = vec![0.0; m * m];
    for &r_p in r_p_grid {
        eval.set_fare(r_p);
        for i in 0..m {
            for j in 0..m {
                let nh = nhat_with(&eval, scenario, i, j);
                if nh > n_bar[i * m + j] {
                    n_bar[i * m + j] = nh;
                }
            }
        }
    }
    let margins = n_bar.iter().map(|&nb| threshold - nb).collect();
    let holds = n_bar.iter().all(|&nb| nb <= threshold);
    Ok(ConcavityCertificate {
        n_bar,
        threshold,
        margins,
        holds,
    })
}

/// Frequency-implied service level for one OD: the reciprocal of the
/// route-averaged wait.
fn cap_from(phi_row: &[f64], f: &[f64]) -> f64 {
    let s: f64 = phi_row.iter().zip(f).map(|(&p, &fl)| p / fl).sum();
    1.0 / s
}

/// Geometry shared by the fare-conditional inner solves: frequency boxes,
/// the service floor, and the frequency-to-cap map. Construction fails with
/// `Infeasible` when some OD cannot meet the wait cap even at maximum
/// frequency.
struct InnerGeometry<'a> {
    sc: &'a Scenario,
    ll: usize,
    mm: usize,
    f_lo: Vec<f64>,
    f_hi: Vec<f64>,
    n_floor: f64,
    /// Caps at maximum frequency, shaved to keep the box interior nonempty.
    n_hi: Vec<f64>,
}

impl<'a> InnerGeometry<'a> {
    fn new(sc: &'a Scenario) -> Result<Self, TransitError> {
        let net = &sc.network;
        let m = net.num_zones();
        let ll = net.num_lines();
        let f_lo: Vec<f64> = net.lines.iter().map(|l| l.f_min).collect();
        let f_hi: Vec<f64> = net.lines.iter().map(|l| l.f_max).collect();
        let n_floor = (1.0 / sc.transit_economics.w_p_max).max(1e-6);
        let mut n_hi = vec![0.0; m * m];
        for (od, slot) in n_hi.iter_mut().enumerate() {
            let cap = cap_from(net.phi.row(od / m, od % m), &f_hi);
            if cap <= n_floor * (1.0 + 1e-9) {
                return Err(TransitError::Infeasible);
            }
            *slot = cap * (1.0 - 1e-9);
        }
        Ok(InnerGeometry {
            sc,
            ll,
            mm: m * m,
            f_lo,
            f_hi,
            n_floor,
            n_hi,
        })
    }

    fn cap(&self, f: &[f64], od: usize) -> f64 {
        let m = self.sc.network.num_zones();
        cap_from(self.sc.network.phi.row(od / m, od % m), f)
    }

    fn caps_into(&self, f: &[f64], out: &mut [f64]) {
        for (od, slot) in out.iter_mut().enumerate() {
            *slot = self.cap(f, od);
        }
    }

    fn cost(&self, f: &[f64]) -> f64 {
        self.sc
            .network
            .lines
            .iter()
            .zip(f)
            .map(|(line, &fl)| line.op_cost * fl)
            .sum()
    }

}

/// One fare's inner solution, realized at the frequency-implied caps.
struct InnerSolution {
    f: Vec<f64>,
    ridership: f64,
}

/// Adds `J^T gn` to `out`, where `J` is the Jacobian of the
/// frequency-implied caps: dcap_od/df_l = cap_od^2 phi_od,l / f_l^2.
fn fold_cap_jacobian(
    geo: &InnerGeometry,
    f: &[f64],
    caps: &[f64],
    gn: &[f64],
    out: &mut [f64],
) {
    let m = geo.sc.network.num_zones();
    for od in 0..geo.mm {
        let w = gn[od] * caps[od] * caps[od];
        if w == 0.0 {
            continue;
        }
        let phi = geo.sc.network.phi.row(od / m, od % m);
        for l in 0..geo.ll {
            out[l] += w * phi[l] / (f[l] * f[l]);
        }
    }
}

/// Per-OD constraints keeping each frequency-implied service level above
/// the floor set by the wait cap.
fn service_floor_constraints<'b>(geo: &'b InnerGeometry) -> Vec<Constraint<'b>> {
    let ll = geo.ll;
    (0..geo.mm)
        .map(|od| Constraint {
            name: "service_floor",
            g: Box::new(move |f: &[f64]| geo.cap(f, od) - geo.n_floor),
            grad: Some(Box::new(move |f: &[f64]| {
                let m = geo.sc.network.num_zones();
                let phi = geo.sc.network.phi.row(od / m, od % m);
                let cap = geo.cap(f, od);
                let mut g = vec![0.0; ll];
                for l in 0..ll {
                    g[l] = cap * cap * phi[l] / (f[l] * f[l]);
                }
                g
            })),
        })
        .collect()
}

/// Operating-profit floor as a barrier constraint: fare revenue at the
/// frequency-implied service levels minus frequency costs must clear the
/// floor.
fn profit_constraint<'b>(eval: &'b TransitEval, geo: &'b InnerGeometry) -> Constraint<'b> {
    let floor = geo.sc.transit_economics.profit_floor;
    Constraint {
        name: "profit_floor",
        g: Box::new(move |f: &[f64]| {
            let mut caps = vec![0.0; geo.mm];
            geo.caps_into(f, &mut caps);
            let (_, rev) = eval.ridership_revenue(&caps, None, None);
            rev - geo.cost(f) - floor
        }),
        grad: Some(Box::new(move |f: &[f64]| {
            let mut caps = vec![0.0; geo.mm];
            geo.caps_into(f, &mut caps);
            let mut gn = vec![0.0; geo.mm];
            eval.ridership_revenue(&caps, None, Some(&mut gn));
            let mut g = vec![0.0; geo.ll];
            fold_cap_jacobian(geo, f, &caps, &gn, &mut g);
            for (gl, line) in g.iter_mut().zip(&geo.sc.network.lines) {
                *gl -= line.op_cost;
            }
            g
        })),
    }
}

/// Strictly feasible starting frequencies for one fare, or None when the
/// fare admits no profitable service plan. Tries a ladder of frequency
/// levels swept down from the box ceiling, then chases operating profit
/// directly.
fn find_start(
    eval: &TransitEval,
    geo: &InnerGeometry,
    cfg: &TransitSolveConfig,
) -> Result<Option<Vec<f64>>, TransitError> {
    let floor = geo.sc.transit_economics.profit_floor;
    let slack = cfg.cap_slack.clamp(1e-9, 0.5);
    let mut caps = vec![0.0; geo.mm];
    let mut feasible = |f: &[f64]| -> bool {
        geo.caps_into(f, &mut caps);
        if caps.iter().any(|&c| c <= geo.n_floor * (1.0 + slack)) {
            return false;
        }
        let (_, rev) = eval.ridership_revenue(&caps, None, None);
        rev - geo.cost(f) - floor > 0.0
    };
    for t in [1.0, 0.75, 0.5, 0.25, 0.0] {
        let f: Vec<f64> = geo
            .f_lo
            .iter()
            .zip(&geo.f_hi)
            .map(|(&lo, &hi)| lo * (hi / lo).powf(t))
            .collect();
        if feasible(&f) {
            return Ok(Some(f));
        }
    }
    // No profitable ladder point. A cheap bound rules most fares out: if
    // even full-cap revenue at minimal cost misses the floor, nothing can
    // reach it. Otherwise chase operating profit directly and keep the
    // result when it clears the floor strictly.
    let (_, rev_max) = eval.ridership_revenue(&geo.n_hi, None, None);
    if rev_max - geo.cost(&geo.f_lo) - floor <= 0.0 {
        return Ok(None);
    }
    let problem = SmoothProblem {
        lower: geo.f_lo.clone(),
        upper: geo.f_hi.clone(),
        objective: Box::new(move |f: &[f64]| {
            let mut caps = vec![0.0; geo.mm];
            geo.caps_into(f, &mut caps);
            let (_, rev) = eval.ridership_revenue(&caps, None, None);
            rev - geo.cost(f)
        }),
        gradient: Some(Box::new(move |f: &[f64]| {
            let mut caps = vec![0.0; geo.mm];
            geo.caps_into(f, &mut caps);
            let mut gn = vec![0.0; geo.mm];
            eval.ridership_revenue(&caps, None, Some(&mut gn));
            let mut g = vec![0.0; geo.ll];
            fold_cap_jacobian(geo, f, &caps, &gn, &mut g);
            for (gl, line) in g.iter_mut().zip(&geo.sc.network.lines) {
                *gl -= line.op_cost;
            }
            g
        })),
        constraints: service_floor_constraints(geo),
    };
    let report = match solve_smooth(&problem, &geo.f_hi, &cfg.smooth) {
        Ok(r) => r,
        Err(OptimError::InfeasibleStart { .. }) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    if feasible(&report.x) {
        Ok(Some(report.x))
    } else {
        Ok(None)
    }
}

/// Ridership-maximizing frequency choice at the evaluator's current fare,
/// or None when the fare admits no feasible plan.
///
/// Waits fall and boardings rise as the frequency-implied service caps
/// rise, so at an optimum the service levels ride the caps exactly;
/// substituting them out leaves a program in the line frequencies alone.
/// That substitution matters for more than size: in the joint
/// (frequency, service) formulation the objective ignores the frequencies
/// entirely, so whole rays of f are payoff-equivalent and the optimizer
/// would park on an arbitrary point of that plateau — tiny changes in the
/// platform strategy would teleport it along the ridge and keep
/// alternating play from ever settling. In the reduced space every
/// direction moves some cap, the optimum is unique, and the solution
/// varies smoothly with the opponent. Concavity survives the reduction:
/// each cap is a weighted harmonic mean of line frequencies (concave),
/// and ridership and revenue are concave nondecreasing in the caps
/// wherever the certificate holds.
fn inner_solve(
    eval: &TransitEval,
    geo: &InnerGeometry,
    cfg: &TransitSolveConfig,
) -> Result<Option<InnerSolution>, TransitError> {
    let (ll, mm) = (geo.ll, geo.mm);
    let start = match find_start(eval, geo, cfg)? {
        Some(s) => s,
        None => return Ok(None),
    };
    let mut constraints = service_floor_constraints(geo);
    constraints.push(profit_constraint(eval, geo));
    let problem = SmoothProblem {
        lower: geo.f_lo.clone(),
        upper: geo.f_hi.clone(),
        objective: Box::new(move |f: &[f64]| {
            let mut caps = vec![0.0; mm];
            geo.caps_into(f, &mut caps);
            eval.ridership_revenue(&caps, None, None).0
        }),
        gradient: Some(Box::new(move |f: &[f64]| {
            let mut caps = vec![0.0; mm];
            geo.caps_into(f, &mut caps);
            let mut gn = vec![0.0; mm];
            eval.ridership_revenue(&caps, Some(&mut gn), None);
            let mut g = vec![0.0; ll];
            fold_cap_jacobian(geo, f, &caps, &gn, &mut g);
            g
        })),
        constraints,
    };
    let report = match solve_smooth(&problem, &start, &cfg.smooth) {
        Ok(r) => r,
        Err(OptimError::InfeasibleStart { .. }) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let mut caps = vec![0.0; mm];
    geo.caps_into(&report.x, &mut caps);
    let (ridership, _) = eval.ridership_revenue(&caps, None, None);
    Ok(Some(InnerSolution {
        f: report.x,
        ridership,
    }))
}

/// Agency best response to a fixed platform strategy.
///
/// Sweeps a dense fare grid over [0, r_p_max] with golden-section
/// refinement around the best point; each fare solves a concave program in
/// the line frequencies (service rides the frequency-implied caps) under
/// the wait caps and the operating-profit floor. Returns the strategy, its
/// ridership, and the global-optimality flag from the concavity audit
/// (`false` when the audit is disabled in `config`).
pub fn solve_transit_best_response(
    tnc: &TncStrategy,
    scenario: &Scenario,
    config: &TransitSolveConfig,
) -> Result<(TransitStrategy, f64, bool), TransitError> {
    let geo = InnerGeometry::new(scenario)?;
    let mut eval = TransitEval::new(scenario, tnc)?;
    let fare_grid = fare_grid(scenario, config.fare_points);
    // Every inner solve starts from the same deterministic interior point,
    // so ridership-at-fare is a fixed smooth function of the opponent
    // strategy and the scan below is a pure function of its inputs.
    //
    // Ridership is often nearly flat across a band of fares: a small fare
    // increase buys revenue headroom that buys frequency back, leaving
    // ridership almost unchanged. The argmax of such a plateau is
    // ill-conditioned, so the scan maximizes ridership minus a whisper of
    // fare — "among near-tied fares, charge the least" — which lands on the
    // plateau's cheap edge where the tilted objective has honest curvature.
    // The tilt forgoes a vanishing sliver of ridership (the optimum moves
    // only where |dR/dr^p| is below the tilt slope) in exchange for a
    // response that varies smoothly with the platform's strategy.
    let tilt = 1e-3 * geo.sc.total_potential_demand()
        / scenario.transit_economics.r_p_max.max(f64::MIN_POSITIVE);
    let score_of = |ridership: f64, r_p: f64| ridership - tilt * r_p;
    let mut best: Option<(f64, InnerSolution, f64, usize)> = None;
    for (gi, &r_p) in fare_grid.iter().enumerate() {
        eval.set_fare(r_p);
        if let Some(sol) = inner_solve(&eval, &geo, config)? {
            let score = score_of(sol.ridership, r_p);
            if best.as_ref().is_none_or(|&(_, _, b, _)| score > b) {
                best = Some((r_p, sol, score, gi));
            }
        }
    }
    let (mut best_fare, mut best_sol, mut best_score, bi) =
        best.ok_or(TransitError::Infeasible)?;
    let lo = fare_grid[bi.saturating_sub(1)];
    let hi = fare_grid[(bi + 1).min(fare_grid.len() - 1)];
    if hi > lo {
        let mut failure: Option<TransitError> = None;
        let mut probe = |r_p: f64| -> f64 {
            eval.set_fare(r_p);
            match inner_solve(&eval, &geo, config) {
                Ok(Some(sol)) => {
                    let score = score_of(sol.ridership, r_p);
                    if score > best_score {
                        best_fare = r_p;
                        best_sol = sol;
                        best_score = score;
                    }
                    score
                }
                Ok(None) => f64::NEG_INFINITY,
                Err(e) => {
                    failure = Some(e);
                    f64::NEG_INFINITY
                }
            }
        };
        golden_section(&mut probe, lo, hi, config.refine_iters);
        if let Some(e) = failure {
            return Err(e);
        }
    }
    let strategy = TransitStrategy {
        r_p: best_fare,
        f: best_sol.f,
    };
    let ridership = transit_ridership(tnc, &strategy, scenario)?;
    let global = if config.certify {
        certify_concavity(scenario, tnc, &fare_grid)?.holds
    } else {
        false
    };
    Ok((strategy, ridership, global))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{toy_scenario, ToySpec};
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;

    #[test]
    fn uniform_split_puts_two_thirds_on_transit() {
        // With a zero logit scale every mode gets one sixth of demand, and
        // four of the six modes board a transit vehicle.
        let mut spec = ToySpec::two_zone();
        spec.epsilon = 0.0;
        spec.lambda0_total = 600.0;
        let sc = toy_scenario(&spec);
        let tnc = TncStrategy { b: 2.0, r: vec![1.0, 1.0], n_idle: vec![10.0, 10.0] };
        let transit = TransitStrategy { r_p: 1.0, f: vec![10.0] };
        let r = transit_ridership(&tnc, &transit, &sc).unwrap();
        assert_abs_diff_eq!(r, 400.0, epsilon = 1e-9);
    }

    #[test]
    fn raising_fare_lowers_ridership() {
        let sc = toy_scenario(&ToySpec::two_zone());
        let tnc = TncStrategy { b: 2.0, r: vec![1.0, 1.0], n_idle: vec![10.0, 10.0] };
        let lo = TransitStrategy { r_p: 0.5, f: vec![10.0] };
        let hi = TransitStrategy { r_p: 2.5, f: vec![10.0] };
        let r_lo = transit_ridership(&tnc, &lo, &sc).unwrap();
        let r_hi = transit_ridership(&tnc, &hi, &sc).unwrap();
        assert!(r_hi < r_lo);
    }

    #[test]
    fn profit_is_minus_operating_cost_when_fare_is_zero() {
        let sc = toy_scenario(&ToySpec::two_zone());
        let tnc = TncStrategy { b: 2.0, r: vec![1.0, 1.0], n_idle: vec![10.0, 10.0] };
        // One line, operating cost 100 $/veh-hr, 20 veh/hr, free fares.
        let transit = TransitStrategy { r_p: 0.0, f: vec![20.0] };
        let p = transit_profit(&tnc, &transit, &sc).unwrap();
        assert_abs_diff_eq!(p, -2000.0, epsilon = 1e-9);
    }

    /// Plain-summation restatement of revenue minus cost.
    fn oracle_profit(demand: &DemandTensor, transit: &TransitStrategy, sc: &Scenario) -> f64 {
        let m = sc.num_zones();
        let mut total = 0.0;
        for i in 0..m {
            for j in 0..m {
                for k in 0..sc.num_classes() {
                    for mode in [Mode::Transit, Mode::Bundle1, Mode::Bundle2, Mode::Bundle3] {
                        total += transit.r_p
                            * sc.network.l_p(i, j)
                            * demand.demand(i, j, k, mode);
                    }
                }
            }
        }
        for (l, line) in sc.network.lines.iter().enumerate() {
            total -= line.op_cost * transit.f[l];
        }
        total
    }

    #[test]
    fn profit_matches_summation_oracle() {
        let mut spec = ToySpec::three_zone();
        spec.classes = 3;
        let sc = toy_scenario(&spec);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        for _ in 0..20 {
            let tnc = TncStrategy {
                b: rng.gen_range(0.0..6.0),
                r: (0..3).map(|_| rng.gen_range(0.1..4.0)).collect(),
                n_idle: (0..3).map(|_| rng.gen_range(1.0..60.0)).collect(),
            };
            let transit = TransitStrategy {
                r_p: rng.gen_range(0.0..3.0),
                f: vec![rng.gen_range(0.5..50.0), rng.gen_range(0.5..50.0)],
            };
            let demand = demand_tensor(&tnc, &transit, &sc).unwrap();
            let got = transit_profit_from_demand(&demand, &transit, &sc);
            let want = oracle_profit(&demand, &transit, &sc);
            assert_abs_diff_eq!(got, want, epsilon = 1e-10 * want.abs().max(1.0));
        }
    }

    #[test]
    fn strategy_vector_round_trip() {
        let t = TransitStrategy { r_p: 1.5, f: vec![10.0, 20.0, 30.0] };
        assert_eq!(TransitStrategy::from_vec(&t.to_vec()), t);
    }

    /// Transit share of one stratum computed from mode-level demand: four
    /// of the six modes board a transit vehicle. The toy networks route
    /// every OD over a single line, so frequency n means wait 1/n and
    /// service level n for every pair at once.
    fn oracle_share(
        n: f64,
        r_p: f64,
        tnc: &TncStrategy,
        sc: &Scenario,
        i: usize,
        j: usize,
        k: usize,
    ) -> f64 {
        let transit = TransitStrategy { r_p, f: vec![n] };
        let demand = demand_tensor(tnc, &transit, sc).unwrap();
        let boarded: f64 = [Mode::Transit, Mode::Bundle1, Mode::Bundle2, Mode::Bundle3]
            .iter()
            .map(|&mode| demand.demand(i, j, k, mode))
            .sum();
        boarded / sc.lambda0(i, j, k)
    }

    #[test]
    fn curvature_bound_collapses_for_one_class() {
        // With a single class the bound reduces to eps/2 * alpha * (1 - 2P)
        // where P is the stratum's transit share.
        let sc = toy_scenario(&ToySpec::two_zone());
        let alpha = sc.behavior.classes[0].alpha;
        let eps = sc.behavior.epsilon;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(71);
        for _ in 0..20 {
            let tnc = TncStrategy {
                b: rng.gen_range(0.0..4.0),
                r: vec![rng.gen_range(0.1..3.0), rng.gen_range(0.1..3.0)],
                n_idle: vec![rng.gen_range(1.0..40.0), rng.gen_range(1.0..40.0)],
            };
            let r_p = rng.gen_range(0.0..3.0);
            let n = rng.gen_range(0.5..30.0);
            let i = rng.gen_range(0..2);
            let j = rng.gen_range(0..2);
            let p = oracle_share(n, r_p, &tnc, &sc, i, j, 0);
            let want = 0.5 * eps * alpha * (1.0 - 2.0 * p);
            let got = concavity_rhs(r_p, n, (i, j), &sc, &tnc).unwrap();
            assert_abs_diff_eq!(got, want, epsilon = 1e-9 * want.abs().max(1e-9));
        }
    }

    #[test]
    fn curvature_bound_limit_at_vanishing_service() {
        // Toward zero service every share vanishes and the bound tends to
        // eps/2 * sum(alpha^2 lam) / sum(alpha lam).
        let mut spec = ToySpec::three_zone();
        spec.classes = 3;
        let sc = toy_scenario(&spec);
        let tnc = TncStrategy { b: 2.0, r: vec![1.0; 3], n_idle: vec![10.0; 3] };
        let eps = sc.behavior.epsilon;
        for (i, j) in [(0usize, 1usize), (2, 2), (1, 0)] {
            let mut num = 0.0;
            let mut den = 0.0;
            for (k, class) in sc.behavior.classes.iter().enumerate() {
                let lam = sc.lambda0(i, j, k);
                num += class.alpha * class.alpha * lam;
                den += class.alpha * lam;
            }
            let want = 0.5 * eps * num / den;
            let got = concavity_rhs(1.5, 1e-6, (i, j), &sc, &tnc).unwrap();
            assert_abs_diff_eq!(got, want, epsilon = 1e-12 * want);
        }
    }

    #[test]
    fn curvature_bound_matches_independent_share_computation() {
        // Full multi-class bound recomputed from mode-level demand shares.
        let mut spec = ToySpec::two_zone();
        spec.classes = 3;
        let sc = toy_scenario(&spec);
        let eps = sc.behavior.epsilon;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(43);
        for _ in 0..20 {
            let tnc = TncStrategy {
                b: rng.gen_range(0.0..4.0),
                r: vec![rng.gen_range(0.1..3.0), rng.gen_range(0.1..3.0)],
                n_idle: vec![rng.gen_range(1.0..40.0), rng.gen_range(1.0..40.0)],
            };
            let r_p = rng.gen_range(0.0..3.0);
            let n = rng.gen_range(0.5..30.0);
            let i = rng.gen_range(0..2);
            let j = rng.gen_range(0..2);
            let mut num = 0.0;
            let mut den = 0.0;
            for (k, class) in sc.behavior.classes.iter().enumerate() {
                let lam = sc.lambda0(i, j, k);
                let p = oracle_share(n, r_p, &tnc, &sc, i, j, k);
                num += class.alpha * class.alpha * lam * p * (1.0 - p) * (1.0 - 2.0 * p);
                den += class.alpha * lam * p * (1.0 - p);
            }
            let want = 0.5 * eps * num / den;
            let got = concavity_rhs(r_p, n, (i, j), &sc, &tnc).unwrap();
            assert_abs_diff_eq!(got, want, epsilon = 1e-9 * want.abs().max(1e-9));
        }
    }

    #[test]
    fn fixed_point_scan_handles_synthetic_curves() {
        // Constant curve: the unique fixed point is the constant itself.
        let x = largest_fixed_point(&mut |_| 0.37, 2.0);
        assert_abs_diff_eq!(x, 0.37, epsilon = 1e-9);
        // Negative curve: no crossing anywhere.
        assert_eq!(largest_fixed_point(&mut |_| -1.0, 2.0), 0.0);
        // Strictly below the identity line: no crossing.
        assert_eq!(largest_fixed_point(&mut |n| 0.5 * n, 2.0), 0.0);
        // Still above the identity line at the cap: the cap is returned.
        assert_eq!(largest_fixed_point(&mut |_| 50.0, 30.0), 30.0);
    }

    #[test]
    fn largest_fixed_point_matches_dense_scan() {
        // Dense 1e-4-step scan with linear interpolation as an independent
        // locator of the bound's largest crossing of the identity line. The
        // bound itself stays far below 2, so scanning (0, 2] is exhaustive.
        let mut spec = ToySpec::two_zone();
        spec.classes = 3;
        let sc = toy_scenario(&spec);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for _ in 0..5 {
            let tnc = TncStrategy {
                b: rng.gen_range(0.0..4.0),
                r: vec![rng.gen_range(0.1..3.0), rng.gen_range(0.1..3.0)],
                n_idle: vec![rng.gen_range(1.0..40.0), rng.gen_range(1.0..40.0)],
            };
            let r_p = rng.gen_range(0.0..3.0);
            let i = rng.gen_range(0..2);
            let j = rng.gen_range(0..2);
            let got = solve_nhat(r_p, (i, j), &sc, &tnc).unwrap();
            let mut eval = TransitEval::new(&sc, &tnc).unwrap();
            eval.set_fare(r_p);
            assert_eq!(got.to_bits(), nhat_with(&eval, &sc, i, j).to_bits());
            let g = |n: f64| rhs_with(&eval, &sc, i, j, n) - n;
            let mut oracle = 0.0;
            let mut prev_n = 1e-6;
            let mut prev_g = g(prev_n);
            for t in 1..=20_000 {
                let n = 1e-6 + 1e-4 * t as f64;
                let gn = g(n);
                if prev_g >= 0.0 && gn < 0.0 {
                    oracle = prev_n + (n - prev_n) * prev_g / (prev_g - gn);
                }
                prev_n = n;
                prev_g = gn;
            }
            assert_abs_diff_eq!(got, oracle, epsilon = 1e-6 + 1e-3 * oracle);
        }
    }

    #[test]
    fn saturated_market_has_no_fixed_point() {
        // Price the competing modes out entirely: transit holds share one
        // everywhere, the bound turns negative, and concavity holds
        // unconditionally.
        let mut sc = toy_scenario(&ToySpec::two_zone());
        for c in sc.behavior.outside_cost.iter_mut() {
            *c = 1e7;
        }
        let tnc = TncStrategy { b: 1e9, r: vec![1.0, 1.0], n_idle: vec![10.0, 10.0] };
        for n in [0.01, 0.05, 1.0, 10.0] {
            let rhs = concavity_rhs(1.0, n, (0, 1), &sc, &tnc).unwrap();
            assert!(rhs < 0.0, "bound should be negative at n = {n}, got {rhs}");
        }
        assert_eq!(solve_nhat(1.0, (0, 1), &sc, &tnc).unwrap(), 0.0);
        let cert = certify_concavity(&sc, &tnc, &[0.0, 1.5, 3.0]).unwrap();
        assert!(cert.holds);
        assert!(cert.n_bar.iter().all(|&nb| nb == 0.0));
        assert!(cert.margins.iter().all(|&mg| mg == cert.threshold));
    }

    #[test]
    fn certificate_flips_when_wait_cap_relaxes() {
        let sc = toy_scenario(&ToySpec::two_zone());
        let tnc = TncStrategy { b: 2.0, r: vec![1.0, 1.0], n_idle: vec![10.0, 10.0] };
        let grid = [0.0, 0.75, 1.5, 2.25, 3.0];
        let cert = certify_concavity(&sc, &tnc, &grid).unwrap();
        assert_abs_diff_eq!(cert.threshold, 3.0, epsilon = 1e-12);
        assert!(cert.holds);
        assert!(cert.n_bar.iter().any(|&nb| nb > 0.0));
        assert!(cert.margins.iter().all(|&mg| mg >= 0.0));

        // An effectively unbounded wait cap drops the service floor to
        // nearly zero; the fixed points no longer fit under it.
        let mut relaxed = sc.clone();
        relaxed.transit_economics.w_p_max = 1e9;
        let cert2 = certify_concavity(&relaxed, &tnc, &grid).unwrap();
        assert!(!cert2.holds);
        assert!(cert2.margins.iter().any(|&mg| mg < 0.0));
    }

    #[test]
    fn best_response_saturates_frequency_without_budget_pressure() {
        // With a deeply negative profit floor the agency runs the line flat
        // out: more frequency means shorter waits and more riders.
        let sc = toy_scenario(&ToySpec::two_zone());
        let tnc = TncStrategy { b: 2.0, r: vec![1.0, 1.0], n_idle: vec![10.0, 10.0] };
        let cfg = TransitSolveConfig::default();
        let (strategy, ridership, _) = solve_transit_best_response(&tnc, &sc, &cfg).unwrap();
        assert_eq!(strategy.f, vec![60.0]);
        assert!(ridership > 0.0);

        // Free operation with a mild floor hits the same ceiling.
        let mut free = sc.clone();
        free.network.lines[0].op_cost = 0.0;
        free.transit_economics.profit_floor = -1.0;
        let (strategy2, _, _) = solve_transit_best_response(&tnc, &free, &cfg).unwrap();
        assert_eq!(strategy2.f, vec![60.0]);
    }

    #[test]
    fn best_response_matches_dense_strategy_grid() {
        use crate::network::{build_network, TransitLine};
        use crate::optim::geomspace;

        // Two parallel lines with different operating costs, self-financing
        // agency; a dense grid over (fare, f1, f2) is the oracle. Demand is
        // scaled up so fare revenue can actually cover the line costs, which
        // makes the zero floor binding rather than unattainable.
        let mut spec = ToySpec::two_zone();
        spec.lambda0_total = 300.0;
        let mut sc = toy_scenario(&spec);
        let zones = sc.network.zones.clone();
        let lines = vec![
            TransitLine { id: 1, stations: vec![0, 1], op_cost: 40.0, f_min: 0.1, f_max: 60.0 },
            TransitLine { id: 2, stations: vec![0, 1], op_cost: 70.0, f_min: 0.1, f_max: 60.0 },
        ];
        sc.network = build_network(
            zones,
            lines,
            sc.network.road_dist.clone(),
            sc.network.transit_dist.clone(),
        )
        .unwrap();
        sc.transit_economics.profit_floor = 0.0;
        let tnc = TncStrategy { b: 2.0, r: vec![1.0, 1.0], n_idle: vec![10.0, 10.0] };

        let cfg = TransitSolveConfig::default();
        let (strategy, ridership, _) = solve_transit_best_response(&tnc, &sc, &cfg).unwrap();

        let w_max = sc.transit_economics.w_p_max;
        let floor = sc.transit_economics.profit_floor;
        let m = sc.num_zones();
        let feasible = |t: &TransitStrategy| -> bool {
            for i in 0..m {
                for j in 0..m {
                    let w: f64 =
                        sc.network.phi.row(i, j).iter().zip(&t.f).map(|(p, f)| p / f).sum();
                    if w > w_max * (1.0 + 1e-9) {
                        return false;
                    }
                }
            }
            transit_profit(&tnc, t, &sc).unwrap() >= floor - 1e-9
        };
        assert!(feasible(&strategy));
        assert!(transit_profit(&tnc, &strategy, &sc).unwrap() >= -1e-6);

        let mut best = f64::NEG_INFINITY;
        for &r_p in &linspace(0.0, 3.0, 13) {
            for &f1 in &geomspace(0.1, 60.0, 16) {
                for &f2 in &geomspace(0.1, 60.0, 16) {
                    let t = TransitStrategy { r_p, f: vec![f1, f2] };
                    if !feasible(&t) {
                        continue;
                    }
                    let r = transit_ridership(&tnc, &t, &sc).unwrap();
                    if r > best {
                        best = r;
                    }
                }
            }
        }
        assert!(
            ridership >= best - 1e-3 * best.abs(),
            "best response {ridership} against grid best {best}"
        );
    }

    #[test]
    fn binding_profit_floor_trades_ridership() {
        use crate::optim::geomspace;

        let sc = toy_scenario(&ToySpec::two_zone());
        let tnc = TncStrategy { b: 2.0, r: vec![1.0, 1.0], n_idle: vec![10.0, 10.0] };
        let cfg = TransitSolveConfig { certify: false, ..TransitSolveConfig::default() };
        let (s1, r1, _) = solve_transit_best_response(&tnc, &sc, &cfg).unwrap();
        let p1 = transit_profit(&tnc, &s1, &sc).unwrap();

        // The most profitable strategy on a coarse wait-feasible grid
        // bounds how far the floor can rise while staying attainable; put
        // it halfway between that and the unconstrained best response.
        let mut p_max = f64::NEG_INFINITY;
        for &r_p in &linspace(0.0, 3.0, 13) {
            for &f in &geomspace(3.0, 60.0, 16) {
                let t = TransitStrategy { r_p, f: vec![f] };
                let p = transit_profit(&tnc, &t, &sc).unwrap();
                if p > p_max {
                    p_max = p;
                }
            }
        }
        assert!(p_max > p1);
        let floor = p1 + 0.5 * (p_max - p1);
        let mut constrained = sc.clone();
        constrained.transit_economics.profit_floor = floor;
        let (s2, r2, _) = solve_transit_best_response(&tnc, &constrained, &cfg).unwrap();
        let p2 = transit_profit(&tnc, &s2, &constrained).unwrap();
        assert!(p2 >= floor - 1e-6 * p_max.abs().max(1.0));
        assert!(r2 < r1, "floored ridership {r2} should drop below {r1}");
    }

    #[test]
    fn impossible_profit_floor_is_infeasible() {
        let mut sc = toy_scenario(&ToySpec::two_zone());
        sc.transit_economics.profit_floor = 1e9;
        let tnc = TncStrategy { b: 2.0, r: vec![1.0, 1.0], n_idle: vec![10.0, 10.0] };
        let err = solve_transit_best_response(&tnc, &sc, &TransitSolveConfig::default())
            .unwrap_err();
        assert!(matches!(err, TransitError::Infeasible));
    }

    #[test]
    fn ridership_is_midpoint_concave_on_feasible_segments() {
        // Above the certified service floor the objective is a sum of
        // concave per-OD terms; check midpoint concavity along random
        // segments of the certified box.
        let mut spec = ToySpec::two_zone();
        spec.classes = 3;
        let sc = toy_scenario(&spec);
        let tnc = TncStrategy { b: 2.0, r: vec![1.0, 1.0], n_idle: vec![10.0, 10.0] };
        let cert = certify_concavity(&sc, &tnc, &[1.5]).unwrap();
        assert!(cert.holds);
        let mut eval = TransitEval::new(&sc, &tnc).unwrap();
        eval.set_fare(1.5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(73);
        for _ in 0..25 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(3.0..45.0)).collect();
            let y: Vec<f64> = (0..4).map(|_| rng.gen_range(3.0..45.0)).collect();
            let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
            let rx = eval.ridership_revenue(&x, None, None).0;
            let ry = eval.ridership_revenue(&y, None, None).0;
            let rm = eval.ridership_revenue(&mid, None, None).0;
            assert!(rm >= 0.5 * (rx + ry) - 1e-9 * rm.abs().max(1.0));
        }
    }

    #[test]
    fn service_hessian_is_diagonal() {
        // Each OD's term reads only its own service level: the analytic
        // gradient must show exactly zero cross sensitivity while its
        // diagonal second difference stays live.
        let mut spec = ToySpec::two_zone();
        spec.classes = 3;
        let sc = toy_scenario(&spec);
        let tnc = TncStrategy { b: 2.0, r: vec![1.0, 1.0], n_idle: vec![10.0, 10.0] };
        let mut eval = TransitEval::new(&sc, &tnc).unwrap();
        eval.set_fare(1.0);
        let grad_at = |eval: &TransitEval, n: &[f64]| -> Vec<f64> {
            let mut g = vec![0.0; 4];
            eval.ridership_revenue(n, Some(&mut g), None);
            g
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(59);
        for _ in 0..20 {
            let n: Vec<f64> = (0..4).map(|_| rng.gen_range(1.0..40.0)).collect();
            let g = grad_at(&eval, &n);
            for od in 0..4 {
                let h = 1e-4 * n[od];
                let mut np = n.clone();
                np[od] += h;
                let mut nm = n.clone();
                nm[od] -= h;
                let fd = (eval.ridership_revenue(&np, None, None).0
                    - eval.ridership_revenue(&nm, None, None).0)
                    / (2.0 * h);
                assert_abs_diff_eq!(g[od], fd, epsilon = 1e-5 * g[od].abs().max(1e-8));
            }
            let od1 = rng.gen_range(0..4);
            let od2 = (od1 + 1 + rng.gen_range(0..3)) % 4;
            let h = 1e-5;
            let mut np = n.clone();
            np[od2] += h;
            let mut nm = n.clone();
            nm[od2] -= h;
            let gp = grad_at(&eval, &np);
            let gm = grad_at(&eval, &nm);
            let cross = (gp[od1] - gm[od1]) / (2.0 * h);
            assert!(cross.abs() <= 1e-6, "cross curvature {cross}");
            let diag = (gp[od2] - gm[od2]) / (2.0 * h);
            assert!(diag.abs() > 0.0);
        }
    }

    #[test]
    fn best_response_is_deterministic() {
        let sc = toy_scenario(&ToySpec::two_zone());
        let tnc = TncStrategy { b: 2.0, r: vec![1.0, 1.0], n_idle: vec![10.0, 10.0] };
        let cfg = TransitSolveConfig::default();
        let (s1, r1, g1) = solve_transit_best_response(&tnc, &sc, &cfg).unwrap();
        let (s2, r2, g2) = solve_transit_best_response(&tnc, &sc, &cfg).unwrap();
        assert_eq!(s1.r_p.to_bits(), s2.r_p.to_bits());
        for (a, b) in s1.f.iter().zip(&s2.f) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(r1.to_bits(), r2.to_bits());
        assert!(g1);
        assert_eq!(g1, g2);
    }
}
