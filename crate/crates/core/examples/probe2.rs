use modalgame::*;

fn dist_tr(a: &TransitStrategy, b: &TransitStrategy) -> f64 {
    transit_distance(a, b)
}

fn main() {
    let sc = load_scenario(std::env::args().nth(1).unwrap()).unwrap();
    let state: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(std::env::args().nth(2).unwrap()).unwrap())
            .unwrap();
    let tnc: TncStrategy = serde_json::from_value(state["tnc"].clone()).unwrap();
    let cfg = TransitSolveConfig { certify: false, ..Default::default() };

    let t0 = std::time::Instant::now();
    let (tr1, r1, _) = solve_transit_best_response(&tnc, &sc, &cfg).unwrap();
    println!("BR_transit once: {:?}  r_p={:.6} riders={:.3}", t0.elapsed(), tr1.r_p, r1);
    let (tr2, r2, _) = solve_transit_best_response(&tnc, &sc, &cfg).unwrap();
    println!("repeat: dist={:.3e} dr={:.3e} (pure fn check)", dist_tr(&tr1, &tr2), (r1 - r2).abs());

    for db in [1e-4, 1e-3, 1e-2] {
        let mut tncp = tnc.clone();
        tncp.b += db;
        let (tr3, r3, _) = solve_transit_best_response(&tncp, &sc, &cfg).unwrap();
        println!(
            "perturb b+={:.0e}: dist={:.4e} amp={:.1} dr_p={:+.2e} driders={:+.3}",
            db, dist_tr(&tr1, &tr3), dist_tr(&tr1, &tr3) / db, tr3.r_p - tr1.r_p, r3 - r1
        );
    }

    // TNC side sensitivity
    let tcfg = tnc::TncSolveConfig::default();
    let t1 = solve_tnc_best_response(&tr1, &sc, &tcfg).unwrap();
    let t1b = solve_tnc_best_response(&tr1, &sc, &tcfg).unwrap();
    println!("BR_tnc repeat dist={:.3e}", tnc_distance(&t1, &t1b));
    for dr in [1e-4, 1e-3, 1e-2] {
        let mut trp = tr1.clone();
        trp.r_p += dr;
        let t2 = solve_tnc_best_response(&trp, &sc, &tcfg).unwrap();
        println!("perturb r_p+={:.0e}: dist={:.4e} amp={:.1}", dr, tnc_distance(&t1, &t2), tnc_distance(&t1, &t2) / dr);
        let mut trf = tr1.clone();
        trf.f[2] += dr * 10.0;
        let t3 = solve_tnc_best_response(&trf, &sc, &tcfg).unwrap();
        println!("perturb f2+={:.0e}: dist={:.4e} amp={:.1}", dr * 10.0, tnc_distance(&t1, &t3), tnc_distance(&t1, &t3) / (dr * 10.0));
    }
}
