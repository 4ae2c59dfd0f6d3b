use modalgame::*;
use modalgame::choice::{demand_tensor, Mode};

fn main() {
    let path = std::env::args().nth(1).expect("scenario path");
    let sc = load_scenario(&path).unwrap();
    let m = sc.num_zones();
    let ll = sc.network.lines.len();
    let (_tnc0, transit0) = default_initial_strategies(&sc).swap_remove(0);
    println!("initial transit r_p={} f={:?}", transit0.r_p, &transit0.f);
    let tcfg = tnc::TncSolveConfig::default();
    let tnc1 = solve_tnc_best_response(&transit0, &sc, &tcfg).unwrap();
    let prof = tnc_profit(&tnc1, &transit0, &sc).unwrap();
    println!(
        "tnc1: b={:.3} r=[{:.3},{:.3}] n=[{:.1},{:.1}] profit={:.0}",
        tnc1.b,
        tnc1.r.iter().cloned().fold(f64::INFINITY, f64::min),
        tnc1.r.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        tnc1.n_idle.iter().cloned().fold(f64::INFINITY, f64::min),
        tnc1.n_idle.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        prof
    );
    // Minimum uniform-scale frequency meeting every OD wait cap.
    let span: Vec<(f64, f64)> = sc.network.lines.iter().map(|l| (l.f_min, l.f_max)).collect();
    let f_at = |t: f64| -> Vec<f64> { span.iter().map(|&(lo, hi)| lo + t * (hi - lo)).collect() };
    let max_wait = |f: &[f64]| -> f64 {
        let mut w: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                let row = sc.network.phi.row(i, j);
                let wij: f64 = row.iter().zip(f).map(|(&p, &fl)| p / fl).sum();
                w = w.max(wij);
            }
        }
        w
    };
    let cap = sc.transit_economics.w_p_max;
    let mut t_lo = 0.0_f64;
    let mut t_hi = 1.0_f64;
    if max_wait(&f_at(1.0)) > cap {
        println!("wait cap unattainable even at f_max! max wait {:.4}", max_wait(&f_at(1.0)));
        return;
    }
    for _ in 0..60 {
        let mid = 0.5 * (t_lo + t_hi);
        if max_wait(&f_at(mid)) > cap { t_lo = mid } else { t_hi = mid }
    }
    let f_minfeas = f_at(t_hi);
    let mincost: f64 = sc.network.lines.iter().zip(&f_minfeas).map(|(l, &f)| l.op_cost * f).sum();
    println!("min uniform feasible f={:?} cost={:.0}", f_minfeas.iter().map(|f| (f * 100.0).round() / 100.0).collect::<Vec<_>>(), mincost);
    // Profit landscape over (fare, uniform frequency scale).
    println!("floor={:.0}", sc.transit_economics.profit_floor);
    let mut best = f64::NEG_INFINITY;
    let mut best_at = (0.0, 0.0);
    for gi in 0..=12 {
        let r_p = sc.transit_economics.r_p_max * gi as f64 / 12.0;
        let mut row = String::new();
        for ti in 0..=10 {
            let t = t_hi + (1.0 - t_hi) * ti as f64 / 10.0;
            let tr = TransitStrategy { r_p, f: f_at(t) };
            let p = transit_profit(&tnc1, &tr, &sc).unwrap();
            let r = transit_ridership(&tnc1, &tr, &sc).unwrap();
            if p > best {
                best = p;
                best_at = (r_p, t);
            }
            if ti % 2 == 0 {
                row.push_str(&format!(" {:>9.0}/{:>6.0}", p, r));
            }
        }
        println!("r_p={:.2}:{}", r_p, row);
    }
    println!("best profit {:.0} at r_p={:.2} t={:.2}", best, best_at.0, best_at.1);
    // Mode shares at best-profit transit point.
    let tr = TransitStrategy { r_p: best_at.0, f: f_at(best_at.1) };
    let dem = demand_tensor(&tnc1, &tr, &sc).unwrap();
    let tot = sc.total_potential_demand();
    for mode in Mode::ALL {
        println!("  share {:?} = {:.3}", mode, dem.mode_total(mode) / tot);
    }
    let _ = ll;
}
