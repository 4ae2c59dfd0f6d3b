//! Generalized travel costs, multiclass logit demand, and fleet-hour
//! accounting.
//!
//! Money, time, and distance are uniformly dollars, hours, and miles; demand
//! is trips/hour. Six modes compete for every OD/class: direct ride-hail
//! (`a`), transit (`p`), first-mile / last-mile / both-ends bundles
//! (`b1`/`b2`/`b3`), and an exogenous outside option (`o`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::MultimodalNetwork;
use crate::scenario::{PolicyConfig, Scenario};
use crate::tnc::TncStrategy;
use crate::transit::TransitStrategy;

/// Travel mode, in the canonical storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Amod,
    Transit,
    Bundle1,
    Bundle2,
    Bundle3,
    Outside,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::Amod,
        Mode::Transit,
        Mode::Bundle1,
        Mode::Bundle2,
        Mode::Bundle3,
        Mode::Outside,
    ];

    pub fn index(self) -> usize {
        match self {
            Mode::Amod => 0,
            Mode::Transit => 1,
            Mode::Bundle1 => 2,
            Mode::Bundle2 => 3,
            Mode::Bundle3 => 4,
            Mode::Outside => 5,
        }
    }

    /// Modes that put a passenger on a transit vehicle.
    pub fn uses_transit(self) -> bool {
        matches!(
            self,
            Mode::Transit | Mode::Bundle1 | Mode::Bundle2 | Mode::Bundle3
        )
    }

    /// Modes that put a passenger in a ride-hail vehicle.
    pub fn uses_amod(self) -> bool {
        matches!(
            self,
            Mode::Amod | Mode::Bundle1 | Mode::Bundle2 | Mode::Bundle3
        )
    }
}

/// Cost-weighting profile of one income class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncomeClassParams {
    /// $/hour weight on waiting time.
    pub alpha: f64,
    /// $/hour weight on in-vehicle time.
    pub beta: f64,
    /// Dimensionless weight on money.
    pub gamma: f64,
    /// $/hour weight on walking time.
    pub theta: f64,
}

/// Behavioral parameters shared by the whole population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorParams {
    /// Logit scale (1/cost-unit); 0 gives uniform shares.
    pub epsilon: f64,
    /// Road speed (mph).
    pub v_a: f64,
    /// Transit speed (mph).
    pub v_p: f64,
    /// Walking speed (mph).
    pub v_w: f64,
    /// One entry per income class.
    pub classes: Vec<IncomeClassParams>,
    /// Outside-option generalized cost per OD/class, row-major [od][k].
    pub outside_cost: Vec<f64>,
}

impl BehaviorParams {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Outside cost c^o for OD (i, j) and class k.
    pub fn c_o(&self, m: usize, i: usize, j: usize, k: usize) -> f64 {
        self.outside_cost[(i * m + j) * self.classes.len() + k]
    }
}

/// Generalized costs of the six modes for one OD pair and income class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostVector {
    pub a: f64,
    pub p: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub o: f64,
}

impl CostVector {
    pub fn as_array(&self) -> [f64; 6] {
        [self.a, self.p, self.b1, self.b2, self.b3, self.o]
    }
}

/// Demand by OD, class, and mode, plus the potential-demand slice.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandTensor {
    m: usize,
    k: usize,
    /// Row-major [od][class][mode].
    lambda: Vec<f64>,
    /// Row-major [od][class].
    lambda0: Vec<f64>,
}

impl DemandTensor {
    pub fn new(m: usize, k: usize) -> Self {
        DemandTensor {
            m,
            k,
            lambda: vec![0.0; m * m * k * 6],
            lambda0: vec![0.0; m * m * k],
        }
    }

    pub fn num_zones(&self) -> usize {
        self.m
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn demand(&self, i: usize, j: usize, k: usize, mode: Mode) -> f64 {
        self.lambda[((i * self.m + j) * self.k + k) * 6 + mode.index()]
    }

    pub fn set_demand(&mut self, i: usize, j: usize, k: usize, shares: &[f64; 6]) {
        let base = ((i * self.m + j) * self.k + k) * 6;
        self.lambda[base..base + 6].copy_from_slice(shares);
    }

    pub fn lambda0(&self, i: usize, j: usize, k: usize) -> f64 {
        self.lambda0[(i * self.m + j) * self.k + k]
    }

    pub fn set_lambda0(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.lambda0[(i * self.m + j) * self.k + k] = v;
    }

    /// Total trips/hr on one mode across all ODs and classes.
    pub fn mode_total(&self, mode: Mode) -> f64 {
        let mut t = 0.0;
        let mi = mode.index();
        for chunk in self.lambda.chunks_exact(6) {
            t += chunk[mi];
        }
        t
    }

    /// Total potential demand Σ λ0.
    pub fn lambda0_total(&self) -> f64 {
        self.lambda0.iter().sum()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ChoiceError {
    #[error("idle fleet must be positive in zone {zone} (1-based)")]
    NonpositiveIdleFleet { zone: usize },
    #[error("line {line} (1-based) has nonpositive frequency but appears in a route")]
    ZeroFrequencyOnUsedLine { line: usize },
}

/// Ride-hail pickup wait in zone i: A_i / √(N_i^I) hours.
pub fn amod_wait_time(matching_scale: f64, n_idle: f64) -> Result<f64, ChoiceError> {
    if n_idle <= 0.0 {
        return Err(ChoiceError::NonpositiveIdleFleet { zone: 0 });
    }
    Ok(matching_scale / n_idle.sqrt())
}

/// Route-averaged transit wait: phi_ijᵀ · [1/f_1, …, 1/f_L] hours.
pub fn transit_wait_time(phi_row: &[f64], f: &[f64]) -> Result<f64, ChoiceError> {
    let mut w = 0.0;
    for (l, (&p, &fl)) in phi_row.iter().zip(f).enumerate() {
        if p > 0.0 {
            if fl <= 0.0 {
                return Err(ChoiceError::ZeroFrequencyOnUsedLine { line: l + 1 });
            }
            w += p / fl;
        }
    }
    Ok(w)
}

/// Generalized costs of all six modes for OD (i, j) and class k.
///
/// Implements the cost rows verbatim; a positive subsidy `s` in the policy
/// lowers the money term of b1/b2/b3 by s per qualifying first/last-mile leg
/// (origin leg qualifies when zone i is underserved, destination leg when
/// zone j is).
pub fn generalized_costs(
    i: usize,
    j: usize,
    k: usize,
    tnc: &TncStrategy,
    transit: &TransitStrategy,
    network: &MultimodalNetwork,
    behavior: &BehaviorParams,
    policy: &PolicyConfig,
) -> Result<CostVector, ChoiceError> {
    let w_i = amod_wait_time(network.zones[i].matching_scale, tnc.n_idle[i])
        .map_err(|_| ChoiceError::NonpositiveIdleFleet { zone: i + 1 })?;
    let w_j = amod_wait_time(network.zones[j].matching_scale, tnc.n_idle[j])
        .map_err(|_| ChoiceError::NonpositiveIdleFleet { zone: j + 1 })?;
    let w_p = transit_wait_time(network.phi.row(i, j), &transit.f)?;

    let m = network.num_zones();
    let cls = &behavior.classes[k];
    let (v_a, v_p, v_w) = (behavior.v_a, behavior.v_p, behavior.v_w);
    let l_a = network.l_a(i, j);
    let l_p = network.l_p(i, j);
    let (d_i, d_j) = (network.d[i], network.d[j]);
    let b = tnc.b;
    let (r_i, r_j) = (tnc.r[i], tnc.r[j]);
    let r_p = transit.r_p;
    let s_i = if network.zones[i].is_underserved {
        policy.subsidy
    } else {
        0.0
    };
    let s_j = if network.zones[j].is_underserved {
        policy.subsidy
    } else {
        0.0
    };

    let a = cls.alpha * w_i + cls.beta * l_a / v_a + cls.gamma * (b + r_i * l_a);
    let p = cls.alpha * w_p
        + cls.beta * l_p / v_p
        + cls.gamma * (r_p * l_p)
        + cls.theta * (d_i / v_w + d_j / v_w);
    let b1 = cls.alpha * (w_i + w_p)
        + cls.beta * (d_i / v_a + l_p / v_p)
        + cls.gamma * (b + r_i * d_i - s_i + r_p * l_p)
        + cls.theta * (d_j / v_w);
    let b2 = cls.alpha * (w_p + w_j)
        + cls.beta * (l_p / v_p + d_j / v_a)
        + cls.gamma * (r_p * l_p + b + r_j * d_j - s_j)
        + cls.theta * (d_i / v_w);
    let b3 = cls.alpha * (w_i + w_p + w_j)
        + cls.beta * (d_i / v_a + l_p / v_p + d_j / v_a)
        + cls.gamma * (2.0 * b + r_i * d_i - s_i + r_p * l_p + r_j * d_j - s_j);
    let o = behavior.c_o(m, i, j, k);

    Ok(CostVector { a, p, b1, b2, b3, o })
}

/// Multinomial logit split of λ0 across the six modes.
///
/// Exponents are max-shifted before exponentiation so arbitrarily large
/// ε·cost cannot overflow; ε = 0 gives uniform shares.
pub fn logit_split(costs: &CostVector, epsilon: f64, lambda0: f64) -> [f64; 6] {
    let c = costs.as_array();
    let mut u = [0.0f64; 6];
    for (ut, ct) in u.iter_mut().zip(c) {
        *ut = -epsilon * ct;
    }
    let shift = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        // Every mode infinitely costly: fall back to a uniform split.
        return [lambda0 / 6.0; 6];
    }
    let mut w = [0.0f64; 6];
    let mut sum = 0.0;
    for (wt, ut) in w.iter_mut().zip(u) {
        *wt = (ut - shift).exp();
        sum += *wt;
    }
    let mut out = [0.0f64; 6];
    for (ot, wt) in out.iter_mut().zip(w) {
        *ot = lambda0 * wt / sum;
    }
    out
}

/// Total fleet vehicle-hours per hour (Little's law accounting): idle
/// vehicles, pickup hours (each ride-hail leg bills the wait at its pickup
/// zone), and occupied hours (distance over road speed per leg).
pub fn fleet_hours(
    demand: &DemandTensor,
    n_idle: &[f64],
    w_a: &[f64],
    network: &MultimodalNetwork,
    v_a: f64,
) -> f64 {
    let m = demand.num_zones();
    let kk = demand.num_classes();
    let mut total: f64 = n_idle.iter().sum();
    for i in 0..m {
        for j in 0..m {
            let l_a = network.l_a(i, j);
            let (d_i, d_j) = (network.d[i], network.d[j]);
            for k in 0..kk {
                let la_ = demand.demand(i, j, k, Mode::Amod);
                let b1 = demand.demand(i, j, k, Mode::Bundle1);
                let b2 = demand.demand(i, j, k, Mode::Bundle2);
                let b3 = demand.demand(i, j, k, Mode::Bundle3);
                total += la_ * w_a[i] + b1 * w_a[i] + b2 * w_a[j] + b3 * (w_a[i] + w_a[j]);
                total += la_ * l_a / v_a + b1 * d_i / v_a + b2 * d_j / v_a + b3 * (d_i + d_j) / v_a;
            }
        }
    }
    total
}

/// Evaluates the full demand tensor for a strategy pair on a scenario.
pub fn demand_tensor(
    tnc: &TncStrategy,
    transit: &TransitStrategy,
    scenario: &Scenario,
) -> Result<DemandTensor, ChoiceError> {
    let m = scenario.network.num_zones();
    let kk = scenario.behavior.num_classes();
    let mut out = DemandTensor::new(m, kk);
    for i in 0..m {
        for j in 0..m {
            for k in 0..kk {
                let costs = generalized_costs(
                    i,
                    j,
                    k,
                    tnc,
                    transit,
                    &scenario.network,
                    &scenario.behavior,
                    &scenario.policy,
                )?;
                let lambda0 = scenario.lambda0(i, j, k);
                let shares = logit_split(&costs, scenario.behavior.epsilon, lambda0);
                out.set_lambda0(i, j, k, lambda0);
                out.set_demand(i, j, k, &shares);
            }
        }
    }
    Ok(out)
}

/// Per-zone ride-hail waits for a strategy (helper shared by callers of
/// [`fleet_hours`]).
pub fn amod_waits(tnc: &TncStrategy, network: &MultimodalNetwork) -> Result<Vec<f64>, ChoiceError> {
    network
        .zones
        .iter()
        .zip(&tnc.n_idle)
        .enumerate()
        .map(|(z, (zone, &n))| {
            amod_wait_time(zone.matching_scale, n)
                .map_err(|_| ChoiceError::NonpositiveIdleFleet { zone: z + 1 })
        })
        .collect()
}
