//! Fast objective evaluators used inside the best-response solvers.
//!
//! Both players' objectives are sums over OD pairs and income classes of
//! logit shares times linear payoffs. With the opponent fixed, most of every
//! exponent is constant, so each evaluator splits the mode weights
//! exp(-eps * cost) into precomputed static factors and a handful of
//! per-evaluation factors, and differentiates the logit shares analytically:
//! d P_t / d x = -eps * P_t * (D_t - sum_s P_s D_s) with D_t = d c_t / d x.
//!
//! Results agree with the first-principles paths in `tnc` and `transit` to
//! floating-point accuracy; the unit tests pin that equivalence.

use crate::choice::{amod_wait_time, transit_wait_time, ChoiceError};
use crate::scenario::Scenario;
use crate::tnc::TncStrategy;
use crate::transit::TransitStrategy;

/// Platform-profit evaluator with the agency's strategy frozen.
///
/// Strategy vectors are stacked as [b, r_1..r_M, N_1..N_M].
pub(crate) struct TncEval<'a> {
    sc: &'a Scenario,
    m: usize,
    kk: usize,
    eps: f64,
    c: f64,
    v_a: f64,
    /// Static logit weights of the pure-transit and outside modes, [od][k].
    e_p: Vec<f64>,
    e_o: Vec<f64>,
    /// Static factor of the direct mode (in-vehicle time only), [od][k].
    s_a: Vec<f64>,
    /// Static factors of the three bundles (everything except the origin or
    /// destination ride-hail wait and money terms), [od][k].
    h_b1: Vec<f64>,
    h_b2: Vec<f64>,
    h_b3: Vec<f64>,
    lambda0: Vec<f64>,
}

impl<'a> TncEval<'a> {
    pub fn new(sc: &'a Scenario, transit: &TransitStrategy) -> Result<Self, ChoiceError> {
        let net = &sc.network;
        let m = net.num_zones();
        let kk = sc.num_classes();
        let eps = sc.behavior.epsilon;
        let (v_a, v_p, v_w) = (sc.behavior.v_a, sc.behavior.v_p, sc.behavior.v_w);
        let n = m * m * kk;
        let mut e_p = vec![0.0; n];
        let mut e_o = vec![0.0; n];
        let mut s_a = vec![0.0; n];
        let mut h_b1 = vec![0.0; n];
        let mut h_b2 = vec![0.0; n];
        let mut h_b3 = vec![0.0; n];
        let mut lambda0 = vec![0.0; n];
        for i in 0..m {
            let s_i = if net.zones[i].is_underserved {
                sc.policy.subsidy
            } else {
                0.0
            };
            for j in 0..m {
                let s_j = if net.zones[j].is_underserved {
                    sc.policy.subsidy
                } else {
                    0.0
                };
                let w_p = transit_wait_time(net.phi.row(i, j), &transit.f)?;
                let l_a = net.l_a(i, j);
                let l_p = net.l_p(i, j);
                let (d_i, d_j) = (net.d[i], net.d[j]);
                for k in 0..kk {
                    let cls = &sc.behavior.classes[k];
                    let idx = (i * m + j) * kk + k;
                    let fare_p = cls.gamma * transit.r_p * l_p;
                    let c_p = cls.alpha * w_p
                        + cls.beta * l_p / v_p
                        + fare_p
                        + cls.theta * (d_i + d_j) / v_w;
                    e_p[idx] = (-eps * c_p).exp();
                    e_o[idx] = (-eps * sc.behavior.c_o(m, i, j, k)).exp();
                    s_a[idx] = (-eps * cls.beta * l_a / v_a).exp();
                    h_b1[idx] = (-eps
                        * (cls.alpha * w_p
                            + cls.beta * (d_i / v_a + l_p / v_p)
                            + fare_p
                            - cls.gamma * s_i
                            + cls.theta * d_j / v_w))
                        .exp();
                    h_b2[idx] = (-eps
                        * (cls.alpha * w_p
                            + cls.beta * (l_p / v_p + d_j / v_a)
                            + fare_p
                            - cls.gamma * s_j
                            + cls.theta * d_i / v_w))
                        .exp();
                    h_b3[idx] = (-eps
                        * (cls.alpha * w_p
                            + cls.beta * (d_i / v_a + l_p / v_p + d_j / v_a)
                            + fare_p
                            - cls.gamma * (s_i + s_j)))
                        .exp();
                    lambda0[idx] = sc.lambda0(i, j, k);
                }
            }
        }
        Ok(TncEval {
            sc,
            m,
            kk,
            eps,
            c: sc.c_av_per_hour,
            v_a,
            e_p,
            e_o,
            s_a,
            h_b1,
            h_b2,
            h_b3,
            lambda0,
        })
    }

    pub fn num_vars(&self) -> usize {
        1 + 2 * self.m
    }

    /// Profit at the stacked strategy; `grad` (same layout) is accumulated
    /// analytically when given.
    pub fn profit(&self, x: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let (m, kk, eps, c) = (self.m, self.kk, self.eps, self.c);
        let b = x[0];
        let r = &x[1..1 + m];
        let n_idle = &x[1 + m..1 + 2 * m];
        let net = &self.sc.network;

        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }

        // Per-zone waits and their N-derivatives; per (zone, class) wait and
        // bundle-money weight factors.
        let mut w = vec![0.0; m];
        let mut dw = vec![0.0; m];
        let mut xf = vec![0.0; m * kk];
        let mut yf = vec![0.0; m * kk];
        for i in 0..m {
            let wi = net.zones[i].matching_scale / n_idle[i].sqrt();
            w[i] = wi;
            dw[i] = -0.5 * wi / n_idle[i];
            for k in 0..kk {
                let cls = &self.sc.behavior.classes[k];
                xf[i * kk + k] = (-eps * cls.alpha * wi).exp();
                yf[i * kk + k] = (-eps * cls.gamma * (b + r[i] * net.d[i])).exp();
            }
        }

        let mut total = -c * n_idle.iter().sum::<f64>();
        if let Some(g) = grad.as_deref_mut() {
            for i in 0..m {
                g[1 + m + i] = -c;
            }
        }

        for i in 0..m {
            for j in 0..m {
                let l_a = net.l_a(i, j);
                let (d_i, d_j) = (net.d[i], net.d[j]);
                let (w_i, w_j) = (w[i], w[j]);
                let m_a_base = b + (r[i] - c / self.v_a) * l_a - c * w_i;
                let m_b1 = b + (r[i] - c / self.v_a) * d_i - c * w_i;
                let m_b2 = b + (r[j] - c / self.v_a) * d_j - c * w_j;
                let m_b3 = m_b1 + m_b2;
                for k in 0..kk {
                    let idx = (i * m + j) * kk + k;
                    let lam = self.lambda0[idx];
                    if lam == 0.0 {
                        continue;
                    }
                    let cls = &self.sc.behavior.classes[k];
                    let (xi, xj) = (xf[i * kk + k], xf[j * kk + k]);
                    let (yi, yj) = (yf[i * kk + k], yf[j * kk + k]);
                    let w_a = self.s_a[idx] * xi * (-eps * cls.gamma * (b + r[i] * l_a)).exp();
                    let w_b1 = self.h_b1[idx] * xi * yi;
                    let w_b2 = self.h_b2[idx] * xj * yj;
                    let w_b3 = self.h_b3[idx] * xi * xj * yi * yj;
                    let denom = w_a + self.e_p[idx] + w_b1 + w_b2 + w_b3 + self.e_o[idx];
                    if !(denom.is_finite() && denom > 0.0) {
                        // Exponent blow-up; this stratum contributes nothing
                        // it can meaningfully price.
                        continue;
                    }
                    let p_a = w_a / denom;
                    let p1 = w_b1 / denom;
                    let p2 = w_b2 / denom;
                    let p3 = w_b3 / denom;
                    total += lam * (p_a * m_a_base + p1 * m_b1 + p2 * m_b2 + p3 * m_b3);

                    let Some(g) = grad.as_deref_mut() else {
                        continue;
                    };
                    let gam = cls.gamma;
                    let alp = cls.alpha;

                    // Base fare: cost derivatives (gam, gam, gam, 2gam).
                    let s_b = gam * (p_a + p1 + p2 + 2.0 * p3);
                    let dp = |p: f64, d: f64| -eps * p * (d - s_b);
                    g[0] += lam
                        * (dp(p_a, gam) * m_a_base
                            + dp(p1, gam) * m_b1
                            + dp(p2, gam) * m_b2
                            + dp(p3, 2.0 * gam) * m_b3
                            + (p_a + p1 + p2 + 2.0 * p3));

                    // Origin rate r_i: costs move by (l_a, d_i, 0, d_i)*gam.
                    let s_ri = gam * (p_a * l_a + (p1 + p3) * d_i);
                    let dpr = |p: f64, d: f64| -eps * p * (d - s_ri);
                    g[1 + i] += lam
                        * (dpr(p_a, gam * l_a) * m_a_base
                            + dpr(p1, gam * d_i) * m_b1
                            + dpr(p2, 0.0) * m_b2
                            + dpr(p3, gam * d_i) * m_b3
                            + p_a * l_a
                            + (p1 + p3) * d_i);

                    // Destination rate r_j: costs move by (0, 0, d_j, d_j)*gam.
                    let s_rj = gam * (p2 + p3) * d_j;
                    let dprj = |p: f64, d: f64| -eps * p * (d - s_rj);
                    g[1 + j] += lam
                        * (dprj(p_a, 0.0) * m_a_base
                            + dprj(p1, 0.0) * m_b1
                            + dprj(p2, gam * d_j) * m_b2
                            + dprj(p3, gam * d_j) * m_b3
                            + (p2 + p3) * d_j);

                    // Origin fleet N_i through w_i.
                    let s_ni = alp * dw[i] * (p_a + p1 + p3);
                    let dpn = |p: f64, d: f64| -eps * p * (d - s_ni);
                    g[1 + m + i] += lam
                        * (dpn(p_a, alp * dw[i]) * m_a_base
                            + dpn(p1, alp * dw[i]) * m_b1
                            + dpn(p2, 0.0) * m_b2
                            + dpn(p3, alp * dw[i]) * m_b3
                            - (p_a + p1 + p3) * c * dw[i]);

                    // Destination fleet N_j through w_j.
                    let s_nj = alp * dw[j] * (p2 + p3);
                    let dpnj = |p: f64, d: f64| -eps * p * (d - s_nj);
                    g[1 + m + j] += lam
                        * (dpnj(p_a, 0.0) * m_a_base
                            + dpnj(p1, 0.0) * m_b1
                            + dpnj(p2, alp * dw[j]) * m_b2
                            + dpnj(p3, alp * dw[j]) * m_b3
                            - (p2 + p3) * c * dw[j]);
                }
            }
        }
        total
    }

    /// Profit contribution of the single OD pair (i, j), all classes, as a
    /// function of the base fare and both endpoint zones' local variables.
    /// Excludes the idle-fleet cost entirely; the relaxation machinery
    /// attributes that separately.
    #[allow(clippy::too_many_arguments)]
    pub fn od_profit(
        &self,
        i: usize,
        j: usize,
        b: f64,
        r_i: f64,
        n_i: f64,
        r_j: f64,
        n_j: f64,
    ) -> f64 {
        let net = &self.sc.network;
        let (m, kk, eps, c) = (self.m, self.kk, self.eps, self.c);
        let w_i = net.zones[i].matching_scale / n_i.sqrt();
        let w_j = net.zones[j].matching_scale / n_j.sqrt();
        let l_a = net.l_a(i, j);
        let (d_i, d_j) = (net.d[i], net.d[j]);
        let m_a = b + (r_i - c / self.v_a) * l_a - c * w_i;
        let m_b1 = b + (r_i - c / self.v_a) * d_i - c * w_i;
        let m_b2 = b + (r_j - c / self.v_a) * d_j - c * w_j;
        let m_b3 = m_b1 + m_b2;
        let mut total = 0.0;
        for k in 0..kk {
            let idx = (i * m + j) * kk + k;
            let lam = self.lambda0[idx];
            if lam == 0.0 {
                continue;
            }
            let cls = &self.sc.behavior.classes[k];
            let xi = (-eps * cls.alpha * w_i).exp();
            let xj = (-eps * cls.alpha * w_j).exp();
            let yi = (-eps * cls.gamma * (b + r_i * d_i)).exp();
            let yj = (-eps * cls.gamma * (b + r_j * d_j)).exp();
            let w_a = self.s_a[idx] * xi * (-eps * cls.gamma * (b + r_i * l_a)).exp();
            let w_b1 = self.h_b1[idx] * xi * yi;
            let w_b2 = self.h_b2[idx] * xj * yj;
            let w_b3 = self.h_b3[idx] * xi * xj * yi * yj;
            let denom = w_a + self.e_p[idx] + w_b1 + w_b2 + w_b3 + self.e_o[idx];
            if !(denom.is_finite() && denom > 0.0) {
                continue;
            }
            total += lam / denom * (w_a * m_a + w_b1 * m_b1 + w_b2 * m_b2 + w_b3 * m_b3);
        }
        total
    }

    /// Dense scan of [`Self::od_profit`] summed over the destinations in
    /// `cell`, over the cartesian grid of origin rates `rs` and origin idle
    /// fleets `ns`, writing into `out[s * ns.len() + t]`.
    ///
    /// Exponentials that depend on only one of the two grid coordinates (or
    /// on neither) are hoisted out of the double loop, so the cost per grid
    /// point is a handful of multiplies. The relaxation solver leans on this
    /// for its per-origin subproblems.
    #[allow(clippy::too_many_arguments)]
    pub fn origin_grid_profit(
        &self,
        i: usize,
        cell: &[usize],
        b: f64,
        dest_r: &[f64],
        dest_n: &[f64],
        rs: &[f64],
        ns: &[f64],
        out: &mut [f64],
    ) {
        let net = &self.sc.network;
        let (m, kk, eps, c) = (self.m, self.kk, self.eps, self.c);
        let classes = &self.sc.behavior.classes;
        let d_i = net.d[i];
        let a_i = net.zones[i].matching_scale;
        let waits: Vec<f64> = ns.iter().map(|&n| a_i / n.sqrt()).collect();
        // Origin wait factor per (fleet grid point, class) and origin money
        // factor per (rate grid point, class).
        let mut xi = vec![0.0; ns.len() * kk];
        for (t, &w) in waits.iter().enumerate() {
            for (k, cls) in classes.iter().enumerate() {
                xi[t * kk + k] = (-eps * cls.alpha * w).exp();
            }
        }
        let mut yi = vec![0.0; rs.len() * kk];
        for (s, &r) in rs.iter().enumerate() {
            for (k, cls) in classes.iter().enumerate() {
                yi[s * kk + k] = (-eps * cls.gamma * (b + r * d_i)).exp();
            }
        }
        out.fill(0.0);
        let mut zj = vec![0.0; kk];
        let mut money_a = vec![0.0; rs.len() * kk];
        for (jj, &j) in cell.iter().enumerate() {
            let l_a = net.l_a(i, j);
            let d_j = net.d[j];
            let w_j = net.zones[j].matching_scale / dest_n[jj].sqrt();
            let m_b2 = b + (dest_r[jj] - c / self.v_a) * d_j - c * w_j;
            for (k, cls) in classes.iter().enumerate() {
                let xj = (-eps * cls.alpha * w_j).exp();
                let yj = (-eps * cls.gamma * (b + dest_r[jj] * d_j)).exp();
                zj[k] = xj * yj;
            }
            for (s, &r) in rs.iter().enumerate() {
                for (k, cls) in classes.iter().enumerate() {
                    money_a[s * kk + k] = (-eps * cls.gamma * (b + r * l_a)).exp();
                }
            }
            for (s, &r) in rs.iter().enumerate() {
                let margin_a = b + (r - c / self.v_a) * l_a;
                let margin_b1 = b + (r - c / self.v_a) * d_i;
                for (t, &w_i) in waits.iter().enumerate() {
                    let m_a = margin_a - c * w_i;
                    let m_b1 = margin_b1 - c * w_i;
                    let m_b3 = m_b1 + m_b2;
                    let mut acc = 0.0;
                    for k in 0..kk {
                        let idx = (i * m + j) * kk + k;
                        let lam = self.lambda0[idx];
                        if lam == 0.0 {
                            continue;
                        }
                        let xik = xi[t * kk + k];
                        let yik = yi[s * kk + k];
                        let w_a = self.s_a[idx] * xik * money_a[s * kk + k];
                        let w_b1 = self.h_b1[idx] * xik * yik;
                        let w_b2 = self.h_b2[idx] * zj[k];
                        let w_b3 = self.h_b3[idx] * xik * yik * zj[k];
                        let denom = w_a + self.e_p[idx] + w_b1 + w_b2 + w_b3 + self.e_o[idx];
                        if !(denom.is_finite() && denom > 0.0) {
                            continue;
                        }
                        acc += lam / denom * (w_a * m_a + w_b1 * m_b1 + w_b2 * m_b2 + w_b3 * m_b3);
                    }
                    out[s * ns.len() + t] += acc;
                }
            }
        }
    }
}

/// Agency-objective evaluator with the platform's strategy frozen.
///
/// Works in the service-level parameterization: one variable N_od per OD
/// pair, where the route-averaged transit wait is 1/N_od. The objective and
/// fare revenue depend on frequencies only through the waits, so they are
/// functions of N alone; frequency feasibility is the caller's constraint.
pub(crate) struct TransitEval<'a> {
    sc: &'a Scenario,
    m: usize,
    kk: usize,
    eps: f64,
    /// Static transit-side numerator sum (all four transit-carrying modes,
    /// minus the wait and fare factors), [od][k].
    h1: Vec<f64>,
    /// Static non-transit numerator W_a + W_o, [od][k].
    g0: Vec<f64>,
    lambda0: Vec<f64>,
    /// Current fare and the fare-scaled numerators exp(-eps*gamma*r_p*l_p)*h1.
    r_p: f64,
    xh1: Vec<f64>,
}

impl<'a> TransitEval<'a> {
    pub fn new(sc: &'a Scenario, tnc: &TncStrategy) -> Result<Self, ChoiceError> {
        let net = &sc.network;
        let m = net.num_zones();
        let kk = sc.num_classes();
        let eps = sc.behavior.epsilon;
        let (v_a, v_p, v_w) = (sc.behavior.v_a, sc.behavior.v_p, sc.behavior.v_w);
        let n = m * m * kk;
        let mut h1 = vec![0.0; n];
        let mut g0 = vec![0.0; n];
        let mut lambda0 = vec![0.0; n];
        let mut w = vec![0.0; m];
        for i in 0..m {
            w[i] = amod_wait_time(net.zones[i].matching_scale, tnc.n_idle[i])
                .map_err(|_| ChoiceError::NonpositiveIdleFleet { zone: i + 1 })?;
        }
        for i in 0..m {
            let s_i = if net.zones[i].is_underserved {
                sc.policy.subsidy
            } else {
                0.0
            };
            for j in 0..m {
                let s_j = if net.zones[j].is_underserved {
                    sc.policy.subsidy
                } else {
                    0.0
                };
                let l_a = net.l_a(i, j);
                let l_p = net.l_p(i, j);
                let (d_i, d_j) = (net.d[i], net.d[j]);
                for k in 0..kk {
                    let cls = &sc.behavior.classes[k];
                    let idx = (i * m + j) * kk + k;
                    // Transit-carrying modes with the alpha/N and gamma*r_p*l_p
                    // terms stripped out.
                    let rest_p =
                        cls.beta * l_p / v_p + cls.theta * (d_i + d_j) / v_w;
                    let rest_b1 = cls.alpha * w[i]
                        + cls.beta * (d_i / v_a + l_p / v_p)
                        + cls.gamma * (tnc.b + tnc.r[i] * d_i - s_i)
                        + cls.theta * d_j / v_w;
                    let rest_b2 = cls.alpha * w[j]
                        + cls.beta * (l_p / v_p + d_j / v_a)
                        + cls.gamma * (tnc.b + tnc.r[j] * d_j - s_j)
                        + cls.theta * d_i / v_w;
                    let rest_b3 = cls.alpha * (w[i] + w[j])
                        + cls.beta * (d_i / v_a + l_p / v_p + d_j / v_a)
                        + cls.gamma
                            * (2.0 * tnc.b + tnc.r[i] * d_i - s_i + tnc.r[j] * d_j - s_j);
                    h1[idx] = (-eps * rest_p).exp()
                        + (-eps * rest_b1).exp()
                        + (-eps * rest_b2).exp()
                        + (-eps * rest_b3).exp();
                    let c_a = cls.alpha * w[i]
                        + cls.beta * l_a / v_a
                        + cls.gamma * (tnc.b + tnc.r[i] * l_a);
                    g0[idx] = (-eps * c_a).exp()
                        + (-eps * sc.behavior.c_o(m, i, j, k)).exp();
                    lambda0[idx] = sc.lambda0(i, j, k);
                }
            }
        }
        let mut eval = TransitEval {
            sc,
            m,
            kk,
            eps,
            h1,
            g0,
            lambda0,
            r_p: f64::NAN,
            xh1: vec![0.0; n],
        };
        eval.set_fare(0.0);
        Ok(eval)
    }

    /// Fixes the per-mile fare, refreshing the fare-scaled numerators.
    pub fn set_fare(&mut self, r_p: f64) {
        let (m, kk, eps) = (self.m, self.kk, self.eps);
        self.r_p = r_p;
        for i in 0..m {
            for j in 0..m {
                let l_p = self.sc.network.l_p(i, j);
                for k in 0..kk {
                    let idx = (i * m + j) * kk + k;
                    let gam = self.sc.behavior.classes[k].gamma;
                    self.xh1[idx] = (-eps * gam * r_p * l_p).exp() * self.h1[idx];
                }
            }
        }
    }

    pub fn fare(&self) -> f64 {
        self.r_p
    }

    /// Transit share of one stratum at service level n_od.
    pub(crate) fn share(&self, idx: usize, k: usize, n_od: f64) -> f64 {
        let alpha = self.sc.behavior.classes[k].alpha;
        let y = (-self.eps * alpha / n_od).exp();
        let num = self.xh1[idx] * y;
        num / (num + self.g0[idx])
    }

    /// Ridership and fare revenue at service levels `n` (row-major [od]),
    /// with optional analytic gradients with respect to n accumulated into
    /// the provided buffers.
    pub fn ridership_revenue(
        &self,
        n: &[f64],
        mut grad_ridership: Option<&mut [f64]>,
        mut grad_revenue: Option<&mut [f64]>,
    ) -> (f64, f64) {
        let (m, kk, eps) = (self.m, self.kk, self.eps);
        if let Some(g) = grad_ridership.as_deref_mut() {
            g.fill(0.0);
        }
        if let Some(g) = grad_revenue.as_deref_mut() {
            g.fill(0.0);
        }
        let mut ridership = 0.0;
        let mut revenue = 0.0;
        for od in 0..m * m {
            let l_p = self.sc.network.l_p(od / m, od % m);
            let n_od = n[od];
            for k in 0..kk {
                let idx = od * kk + k;
                let lam = self.lambda0[idx];
                if lam == 0.0 {
                    continue;
                }
                let p = self.share(idx, k, n_od);
                ridership += lam * p;
                revenue += self.r_p * lam * l_p * p;
                let alpha = self.sc.behavior.classes[k].alpha;
                let dp = eps * alpha / (n_od * n_od) * p * (1.0 - p);
                if let Some(g) = grad_ridership.as_deref_mut() {
                    g[od] += lam * dp;
                }
                if let Some(g) = grad_revenue.as_deref_mut() {
                    g[od] += self.r_p * lam * l_p * dp;
                }
            }
        }
        (ridership, revenue)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice::transit_wait_time;
    use crate::optim::finite_diff_gradient;
    use crate::testutil::{toy_scenario, ToySpec};
    use crate::tnc::tnc_profit;
    use crate::transit::{transit_profit, transit_ridership};
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;

    fn random_pair(rng: &mut impl Rng, m: usize, lines: usize) -> (TncStrategy, TransitStrategy) {
        (
            TncStrategy {
                b: rng.gen_range(0.5..6.0),
                r: (0..m).map(|_| rng.gen_range(0.2..4.0)).collect(),
                n_idle: (0..m).map(|_| rng.gen_range(2.0..80.0)).collect(),
            },
            TransitStrategy {
                r_p: rng.gen_range(0.1..2.5),
                f: (0..lines).map(|_| rng.gen_range(2.0..40.0)).collect(),
            },
        )
    }

    #[test]
    fn factored_profit_matches_first_principles() {
        let mut spec = ToySpec::three_zone();
        spec.classes = 3;
        let mut sc = toy_scenario(&spec);
        sc.policy.subsidy = 1.0;
        sc.network.zones[2].is_underserved = true;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for _ in 0..15 {
            let (tnc, transit) = random_pair(&mut rng, 3, 2);
            let eval = TncEval::new(&sc, &transit).unwrap();
            let fast = eval.profit(&tnc.to_vec(), None);
            let cold = tnc_profit(&tnc, &transit, &sc).unwrap();
            assert_abs_diff_eq!(fast, cold, epsilon = 1e-9 * cold.abs().max(1.0));
        }
    }

    #[test]
    fn profit_gradient_matches_finite_differences() {
        let mut spec = ToySpec::three_zone();
        spec.classes = 2;
        let sc = toy_scenario(&spec);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(43);
        for _ in 0..10 {
            let (tnc, transit) = random_pair(&mut rng, 3, 2);
            let eval = TncEval::new(&sc, &transit).unwrap();
            let x = tnc.to_vec();
            let mut grad = vec![0.0; eval.num_vars()];
            eval.profit(&x, Some(&mut grad));
            let fd = finite_diff_gradient(&|p: &[f64]| eval.profit(p, None), &x, 1e-5);
            for v in 0..x.len() {
                assert_abs_diff_eq!(
                    grad[v],
                    fd[v],
                    epsilon = 1e-5 * grad[v].abs().max(1.0)
                );
            }
        }
    }

    #[test]
    fn od_profit_sums_to_total_profit() {
        let mut spec = ToySpec::three_zone();
        spec.classes = 2;
        let sc = toy_scenario(&spec);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(47);
        for _ in 0..10 {
            let (tnc, transit) = random_pair(&mut rng, 3, 2);
            let eval = TncEval::new(&sc, &transit).unwrap();
            let mut total = -sc.c_av_per_hour * tnc.n_idle.iter().sum::<f64>();
            for i in 0..3 {
                for j in 0..3 {
                    total += eval.od_profit(
                        i,
                        j,
                        tnc.b,
                        tnc.r[i],
                        tnc.n_idle[i],
                        tnc.r[j],
                        tnc.n_idle[j],
                    );
                }
            }
            let whole = eval.profit(&tnc.to_vec(), None);
            assert_abs_diff_eq!(total, whole, epsilon = 1e-9 * whole.abs().max(1.0));
        }
    }

    #[test]
    fn origin_grid_matches_pointwise_od_profit() {
        let mut spec = ToySpec::three_zone();
        spec.classes = 2;
        let sc = toy_scenario(&spec);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(59);
        let (_, transit) = random_pair(&mut rng, 3, 2);
        let eval = TncEval::new(&sc, &transit).unwrap();
        let cell = [0usize, 2];
        let (b, dest_r, dest_n) = (1.8, [1.2, 3.1], [14.0, 6.5]);
        let rs = [0.3, 1.0, 2.4, 4.0, 5.5];
        let ns = [0.8, 5.0, 22.0, 90.0];
        let mut grid = vec![0.0; rs.len() * ns.len()];
        for i in 0..3 {
            eval.origin_grid_profit(i, &cell, b, &dest_r, &dest_n, &rs, &ns, &mut grid);
            for (s, &r) in rs.iter().enumerate() {
                for (t, &n) in ns.iter().enumerate() {
                    let direct: f64 = cell
                        .iter()
                        .enumerate()
                        .map(|(jj, &j)| {
                            eval.od_profit(i, j, b, r, n, dest_r[jj], dest_n[jj])
                        })
                        .sum();
                    assert_abs_diff_eq!(
                        grid[s * ns.len() + t],
                        direct,
                        epsilon = 1e-12 * direct.abs().max(1.0)
                    );
                }
            }
        }
    }

    /// Service levels implied by actual line frequencies: one over the
    /// route-averaged wait.
    fn service_from_frequencies(sc: &Scenario, f: &[f64]) -> Vec<f64> {
        let m = sc.num_zones();
        (0..m * m)
            .map(|od| {
                1.0 / transit_wait_time(sc.network.phi.row(od / m, od % m), f).unwrap()
            })
            .collect()
    }

    #[test]
    fn service_parameterization_reproduces_frequency_objective() {
        let mut spec = ToySpec::three_zone();
        spec.classes = 3;
        let sc = toy_scenario(&spec);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(53);
        for _ in 0..15 {
            let (tnc, transit) = random_pair(&mut rng, 3, 2);
            let mut eval = TransitEval::new(&sc, &tnc).unwrap();
            eval.set_fare(transit.r_p);
            let n = service_from_frequencies(&sc, &transit.f);
            let (ridership, revenue) = eval.ridership_revenue(&n, None, None);
            let cold_r = transit_ridership(&tnc, &transit, &sc).unwrap();
            assert_abs_diff_eq!(ridership, cold_r, epsilon = 1e-10 * cold_r.max(1.0));
            let cold_profit = transit_profit(&tnc, &transit, &sc).unwrap();
            let op_cost: f64 = sc
                .network
                .lines
                .iter()
                .zip(&transit.f)
                .map(|(l, &fl)| l.op_cost * fl)
                .sum();
            assert_abs_diff_eq!(
                revenue - op_cost,
                cold_profit,
                epsilon = 1e-10 * cold_profit.abs().max(1.0)
            );
        }
    }

    #[test]
    fn ridership_gradients_match_finite_differences() {
        let mut spec = ToySpec::three_zone();
        spec.classes = 2;
        let sc = toy_scenario(&spec);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(59);
        let (tnc, transit) = random_pair(&mut rng, 3, 2);
        let mut eval = TransitEval::new(&sc, &tnc).unwrap();
        eval.set_fare(transit.r_p);
        for _ in 0..10 {
            let n: Vec<f64> = (0..9).map(|_| rng.gen_range(1.0..30.0)).collect();
            let mut gr = vec![0.0; 9];
            let mut gv = vec![0.0; 9];
            eval.ridership_revenue(&n, Some(&mut gr), Some(&mut gv));
            let fd_r = finite_diff_gradient(
                &|p: &[f64]| eval.ridership_revenue(p, None, None).0,
                &n,
                1e-5,
            );
            let fd_v = finite_diff_gradient(
                &|p: &[f64]| eval.ridership_revenue(p, None, None).1,
                &n,
                1e-5,
            );
            for od in 0..9 {
                assert_abs_diff_eq!(gr[od], fd_r[od], epsilon = 1e-6 * gr[od].abs().max(1.0));
                assert_abs_diff_eq!(gv[od], fd_v[od], epsilon = 1e-6 * gv[od].abs().max(1.0));
            }
        }
    }

    #[test]
    fn transit_weight_derivative_identity() {
        // The transit-side logit weight of a stratum is a static factor times
        // exp(-eps*alpha/n), so its derivative in n is (eps*alpha/n^2) times
        // itself. Checked against central differences.
        let mut spec = ToySpec::three_zone();
        spec.classes = 3;
        let sc = toy_scenario(&spec);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(67);
        let (tnc, transit) = random_pair(&mut rng, 3, 2);
        let mut eval = TransitEval::new(&sc, &tnc).unwrap();
        eval.set_fare(transit.r_p);
        let eps = sc.behavior.epsilon;
        for _ in 0..50 {
            let od = rng.gen_range(0..9);
            let k = rng.gen_range(0..3);
            let idx = od * 3 + k;
            let alpha = sc.behavior.classes[k].alpha;
            let n = rng.gen_range(0.5..40.0);
            let weight = |n: f64| eval.xh1[idx] * (-eps * alpha / n).exp();
            let analytic = eps * alpha / (n * n) * weight(n);
            let h = 1e-5 * n;
            let fd = (weight(n + h) - weight(n - h)) / (2.0 * h);
            assert_abs_diff_eq!(analytic, fd, epsilon = 1e-7 * analytic.abs().max(1e-12));
        }
    }

    #[test]
    fn set_fare_matches_fresh_evaluator() {
        let spec = ToySpec::three_zone();
        let sc = toy_scenario(&spec);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(61);
        let (tnc, transit) = random_pair(&mut rng, 3, 2);
        let mut eval = TransitEval::new(&sc, &tnc).unwrap();
        eval.set_fare(1.7);
        eval.set_fare(transit.r_p);
        let n = service_from_frequencies(&sc, &transit.f);
        let (r1, v1) = eval.ridership_revenue(&n, None, None);
        let mut fresh = TransitEval::new(&sc, &tnc).unwrap();
        fresh.set_fare(transit.r_p);
        let (r2, v2) = fresh.ridership_revenue(&n, None, None);
        assert_eq!(r1, r2);
        assert_eq!(v1, v2);
    }
}
