//! Small hand-checkable scenarios shared by the unit tests.

use crate::choice::{BehaviorParams, IncomeClassParams};
use crate::network::{build_network, TransitLine, Zone};
use crate::scenario::{PolicyConfig, Scenario, TransitEconomics};

/// Knobs for the toy scenarios. Defaults keep every number easy to verify
/// by hand: unit areas, a 0.1-hour matching scale (one idle vehicle waits
/// 0.1 h), 0.2-mile walk legs (scale 0.4 over 4 stations).
pub(crate) struct ToySpec {
    pub zones: usize,
    pub classes: usize,
    pub epsilon: f64,
    /// Total potential demand, spread uniformly over ODs and classes.
    pub lambda0_total: f64,
    /// Road distance between adjacent zones (miles); zones sit on a line.
    pub l_a: f64,
    pub v_a: f64,
    pub underserved: Vec<bool>,
    /// Replace the class weights with all-ones (single class only).
    pub unit_weights: bool,
    pub c_av: f64,
    pub profit_floor: f64,
}

impl ToySpec {
    pub fn two_zone() -> Self {
        ToySpec {
            zones: 2,
            classes: 1,
            epsilon: 0.1,
            lambda0_total: 100.0,
            l_a: 3.0,
            v_a: 18.0,
            underserved: vec![],
            unit_weights: false,
            c_av: 20.0,
            profit_floor: -1e9,
        }
    }

    pub fn three_zone() -> Self {
        ToySpec {
            zones: 3,
            ..ToySpec::two_zone()
        }
    }
}

/// One or two chained transit lines over 2-3 zones in a row.
pub(crate) fn toy_scenario(spec: &ToySpec) -> Scenario {
    let m = spec.zones;
    let kk = spec.classes;
    assert!((2..=3).contains(&m), "toy scenarios support 2 or 3 zones");

    let zones: Vec<Zone> = (0..m)
        .map(|i| Zone {
            id: i + 1,
            area: 1.0,
            matching_scale: 0.1,
            firstmile_scale: 0.4,
            station_count: 4,
            is_underserved: spec.underserved.get(i).copied().unwrap_or(false),
            population_split: vec![1.0 / kk as f64; kk],
        })
        .collect();

    let mut lines = vec![TransitLine {
        id: 1,
        stations: vec![0, 1],
        op_cost: 100.0,
        f_min: 0.1,
        f_max: 60.0,
    }];
    if m == 3 {
        lines.push(TransitLine {
            id: 2,
            stations: vec![1, 2],
            op_cost: 120.0,
            f_min: 0.1,
            f_max: 60.0,
        });
    }

    let mut road = vec![0.0; m * m];
    let mut transit = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            let (la, lp) = if i == j {
                (0.7, 0.7)
            } else {
                let dist = spec.l_a * (i as f64 - j as f64).abs();
                (dist, 1.125 * dist)
            };
            road[i * m + j] = la;
            transit[i * m + j] = lp;
        }
    }

    let classes: Vec<IncomeClassParams> = if spec.unit_weights {
        assert_eq!(kk, 1, "unit weights are a single-class convenience");
        vec![IncomeClassParams { alpha: 1.0, beta: 1.0, gamma: 1.0, theta: 1.0 }]
    } else {
        let all = [
            IncomeClassParams { alpha: 0.5, beta: 0.15, gamma: 3.0, theta: 0.5 },
            IncomeClassParams { alpha: 1.0, beta: 0.30, gamma: 1.5, theta: 1.0 },
            IncomeClassParams { alpha: 2.0, beta: 0.65, gamma: 0.75, theta: 2.0 },
        ];
        match kk {
            1 => vec![all[1].clone()],
            2 => vec![all[0].clone(), all[2].clone()],
            3 => all.to_vec(),
            _ => panic!("toy scenarios support up to 3 classes"),
        }
    };

    // Outside costs proportional to road distance, pricier for lower
    // classes; intra-zone trips keep a positive floor.
    let class_factors: Vec<f64> = match kk {
        1 => vec![1.25],
        2 => vec![1.5, 1.0],
        _ => vec![1.5, 1.25, 1.0],
    };
    let mut outside = vec![0.0; m * m * kk];
    for i in 0..m {
        for j in 0..m {
            for k in 0..kk {
                outside[(i * m + j) * kk + k] = 2.0 + 2.5 * road[i * m + j] * class_factors[k];
            }
        }
    }

    let per_stratum = spec.lambda0_total / (m * m * kk) as f64;
    let lambda0 = vec![per_stratum; m * m * kk];

    Scenario {
        name: format!("toy-{m}-zone"),
        network: build_network(zones, lines, road, transit).expect("toy network is connected"),
        behavior: BehaviorParams {
            epsilon: spec.epsilon,
            v_a: spec.v_a,
            v_p: 14.0,
            v_w: 3.5,
            classes,
            outside_cost: outside,
        },
        lambda0,
        c_av_per_hour: spec.c_av,
        transit_economics: TransitEconomics {
            r_p_max: 3.0,
            w_p_max: 1.0 / 3.0,
            profit_floor: spec.profit_floor,
        },
        policy: PolicyConfig::default(),
    }
}
