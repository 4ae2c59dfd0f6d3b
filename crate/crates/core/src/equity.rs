//! Accessibility and equity metrics: the expected-maximum-utility (logsum)
//! measure per OD pair and income class, its demand-weighted aggregation to
//! origin-zone, class, and system levels, and the Theil coefficient split
//! into a spatial component (dispersion across zones within each class) and
//! a social component (dispersion between class means).
//!
//! Logsum accessibilities are typically negative — utilities are negated
//! generalized costs — while the Theil ratios need strictly positive
//! values. The convention here is an affine shift, chosen once so the
//! smallest aggregate is at least one and then held fixed across every run
//! being compared; the shift used is recorded in the report.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::choice::{generalized_costs, ChoiceError, CostVector, DemandTensor, Mode};
use crate::scenario::Scenario;
use crate::tnc::TncStrategy;
use crate::transit::TransitStrategy;

#[derive(Debug, Error)]
pub enum EquityError {
    /// Every stratum is demand-free, so no aggregate is defined. Individual
    /// empty strata are not an error: they are excluded and reported on the
    /// tensor instead.
    #[error("total demand is zero; accessibility aggregates are undefined")]
    EmptyGroup,
    /// A Theil ratio would take the log of a nonpositive value.
    #[error(
        "nonpositive shifted accessibility {value} for origin zone {zone}, \
         class {class} (1-based); raise the shift"
    )]
    NonpositiveAccessibility {
        zone: usize,
        class: usize,
        value: f64,
    },
    #[error(transparent)]
    Choice(#[from] ChoiceError),
}

/// Expected maximum utility over the six modes: (1/ε)·log Σ_t exp(ε·u_t)
/// with u_t = −cost_t. Max-shifted before exponentiation, so arbitrarily
/// large cost magnitudes cannot overflow and a single finite mode among
/// infinitely costly ones returns exactly that mode's utility. `epsilon`
/// must be positive.
pub fn accessibility(costs: &CostVector, epsilon: f64) -> f64 {
    let u_max = costs
        .as_array()
        .iter()
        .map(|c| -c)
        .fold(f64::NEG_INFINITY, f64::max);
    if !u_max.is_finite() {
        return u_max;
    }
    let mut sum = 0.0;
    for c in costs.as_array() {
        sum += (epsilon * (-c - u_max)).exp();
    }
    u_max + sum.ln() / epsilon
}

/// Logsum accessibility of every stratum under a strategy pair, row-major
/// [od][class].
pub fn accessibility_field(
    tnc: &TncStrategy,
    transit: &TransitStrategy,
    scenario: &Scenario,
) -> Result<Vec<f64>, EquityError> {
    let m = scenario.num_zones();
    let kk = scenario.num_classes();
    let eps = scenario.behavior.epsilon;
    let mut a = Vec::with_capacity(m * m * kk);
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
                a.push(accessibility(&costs, eps));
            }
        }
    }
    Ok(a)
}

/// Accessibility aggregated with trip demand as weights.
///
/// `a_od` holds the per-stratum logsums ([od][class]); the per-origin and
/// per-class aggregates are demand-weighted means over all six modes'
/// trips. Strata without any demand carry no weight; they are excluded
/// from every aggregate, listed in `empty`, and their `a_ik` slot is 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessibilityTensor {
    m: usize,
    kk: usize,
    /// Logsum per stratum, row-major [od][class].
    pub a_od: Vec<f64>,
    /// Mean accessibility of trips leaving zone i in class k, [i][k].
    pub a_ik: Vec<f64>,
    /// Mean accessibility of class k's trips.
    pub a_k: Vec<f64>,
    /// Mean accessibility over all trips.
    pub a_bar: f64,
    /// Demand leaving zone i in class k, [i][k].
    pub lambda_ik: Vec<f64>,
    /// Demand of class k.
    pub lambda_k: Vec<f64>,
    /// Total demand.
    pub lambda_bar: f64,
    /// (zone, class) strata with zero demand, 0-based.
    pub empty: Vec<(usize, usize)>,
}

impl AccessibilityTensor {
    pub fn num_zones(&self) -> usize {
        self.m
    }

    pub fn num_classes(&self) -> usize {
        self.kk
    }
}

/// Demand-weighted aggregation of per-stratum accessibilities. Weights sum
/// the trips of all six modes, outside option included, so the weight of a
/// stratum is exactly its potential demand. Fails only when the whole
/// tensor carries no demand.
pub fn aggregate_accessibility(
    demand: &DemandTensor,
    a_od: &[f64],
) -> Result<AccessibilityTensor, EquityError> {
    let m = demand.num_zones();
    let kk = demand.num_classes();
    let mut lambda_ik = vec![0.0; m * kk];
    let mut num_ik = vec![0.0; m * kk];
    for i in 0..m {
        for j in 0..m {
            for k in 0..kk {
                let trips: f64 = Mode::ALL
                    .iter()
                    .map(|&t| demand.demand(i, j, k, t))
                    .sum();
                lambda_ik[i * kk + k] += trips;
                num_ik[i * kk + k] += trips * a_od[(i * m + j) * kk + k];
            }
        }
    }
    let mut a_ik = vec![0.0; m * kk];
    let mut empty = Vec::new();
    for i in 0..m {
        for k in 0..kk {
            if lambda_ik[i * kk + k] > 0.0 {
                a_ik[i * kk + k] = num_ik[i * kk + k] / lambda_ik[i * kk + k];
            } else {
                empty.push((i, k));
            }
        }
    }
    let mut lambda_k = vec![0.0; kk];
    let mut num_k = vec![0.0; kk];
    for i in 0..m {
        for k in 0..kk {
            lambda_k[k] += lambda_ik[i * kk + k];
            num_k[k] += num_ik[i * kk + k];
        }
    }
    let a_k: Vec<f64> = lambda_k
        .iter()
        .zip(&num_k)
        .map(|(&l, &n)| if l > 0.0 { n / l } else { 0.0 })
        .collect();
    let lambda_bar: f64 = lambda_k.iter().sum();
    if lambda_bar <= 0.0 {
        return Err(EquityError::EmptyGroup);
    }
    let a_bar = num_k.iter().sum::<f64>() / lambda_bar;
    Ok(AccessibilityTensor {
        m,
        kk,
        a_od: a_od.to_vec(),
        a_ik,
        a_k,
        a_bar,
        lambda_ik,
        lambda_k,
        lambda_bar,
        empty,
    })
}

/// Shift that makes every populated aggregate at least one. Zero when the
/// accessibilities are already comfortably positive. Compute it once on a
/// baseline and reuse it for every run being compared — the Theil values
/// depend on the shift, so comparisons are only meaningful at a fixed one.
pub fn recommended_shift(tensor: &AccessibilityTensor) -> f64 {
    let mut min_a = f64::INFINITY;
    for i in 0..tensor.m {
        for k in 0..tensor.kk {
            if tensor.lambda_ik[i * tensor.kk + k] > 0.0 {
                min_a = min_a.min(tensor.a_ik[i * tensor.kk + k]);
            }
        }
    }
    if min_a.is_finite() {
        (1.0 - min_a).max(0.0)
    } else {
        0.0
    }
}

/// Theil coefficient of the accessibility distribution and its split.
///
/// `within` sums, over classes, the dispersion of origin-zone means around
/// the class mean (spatial inequity); `between` measures the dispersion of
/// class means around the overall mean (social inequity); `t` is their
/// sum. All three are computed from accessibilities shifted by `a_shift`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheilReport {
    pub t: f64,
    pub within: f64,
    pub between: f64,
    /// The affine shift the ratios were taken at.
    pub a_shift: f64,
}

/// Theil decomposition of the aggregated accessibilities at a given shift.
///
/// Every populated stratum must be strictly positive after the shift;
/// demand-free strata carry no weight and are skipped.
pub fn theil_decompose(
    tensor: &AccessibilityTensor,
    a_shift: f64,
) -> Result<TheilReport, EquityError> {
    let (m, kk) = (tensor.m, tensor.kk);
    if tensor.lambda_bar <= 0.0 {
        return Err(EquityError::EmptyGroup);
    }
    let a_bar = tensor.a_bar + a_shift;
    let mut within = 0.0;
    let mut between = 0.0;
    for k in 0..kk {
        if tensor.lambda_k[k] <= 0.0 {
            continue;
        }
        let a_k = tensor.a_k[k] + a_shift;
        for i in 0..m {
            let lam = tensor.lambda_ik[i * kk + k];
            if lam <= 0.0 {
                continue;
            }
            let a_ik = tensor.a_ik[i * kk + k] + a_shift;
            if a_ik <= 0.0 {
                return Err(EquityError::NonpositiveAccessibility {
                    zone: i + 1,
                    class: k + 1,
                    value: a_ik,
                });
            }
            let ratio = a_ik / a_k;
            within += lam / tensor.lambda_bar * ratio * ratio.ln();
        }
        let ratio = a_k / a_bar;
        between += tensor.lambda_k[k] / tensor.lambda_bar * ratio * ratio.ln();
    }
    Ok(TheilReport {
        t: within + between,
        within,
        between,
        a_shift,
    })
}

/// One-call equity evaluation of a strategy pair: demand, logsums,
/// aggregation, and the Theil split. Pass the shift from a baseline run to
/// keep a sweep comparable; `None` derives it from this tensor.
pub fn evaluate_equity(
    tnc: &TncStrategy,
    transit: &TransitStrategy,
    scenario: &Scenario,
    a_shift: Option<f64>,
) -> Result<(AccessibilityTensor, TheilReport), EquityError> {
    let demand = crate::choice::demand_tensor(tnc, transit, scenario)?;
    let a_od = accessibility_field(tnc, transit, scenario)?;
    let tensor = aggregate_accessibility(&demand, &a_od)?;
    let shift = a_shift.unwrap_or_else(|| recommended_shift(&tensor));
    let report = theil_decompose(&tensor, shift)?;
    Ok((tensor, report))
}
