//! Numerical optimization toolbox: box-projected L-BFGS with a log-barrier
//! for nonlinear inequality constraints, deterministic grid search, and
//! finite-difference helpers.
//!
//! Everything here MAXIMIZES. Objectives are expected to be smooth inside
//! the box; callers normalize their objective scale so the shared tolerances
//! are meaningful.

use thiserror::Error;

/// Inequality constraint, feasible iff g(x) >= 0.
pub struct Constraint<'a> {
    pub name: &'static str,
    pub g: Box<dyn Fn(&[f64]) -> f64 + 'a>,
    /// Analytic gradient of g; finite differences when absent.
    pub grad: Option<Box<dyn Fn(&[f64]) -> Vec<f64> + 'a>>,
}

/// A smooth box-constrained maximization problem with optional nonlinear
/// inequality constraints.
pub struct SmoothProblem<'a> {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub objective: Box<dyn Fn(&[f64]) -> f64 + 'a>,
    /// Analytic gradient of the objective; finite differences when absent.
    pub gradient: Option<Box<dyn Fn(&[f64]) -> Vec<f64> + 'a>>,
    pub constraints: Vec<Constraint<'a>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    /// Projected-gradient sup-norm at which a barrier stage stops.
    pub tol: f64,
    /// Iteration cap per barrier stage.
    pub max_inner_iter: usize,
    /// Number of curvature pairs kept by L-BFGS.
    pub memory: usize,
    /// Barrier weight schedule: start, floor, shrink factor per stage.
    pub mu_initial: f64,
    pub mu_final: f64,
    pub mu_shrink: f64,
    /// Step used by finite-difference gradients.
    pub fd_step: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            tol: 1e-8,
            max_inner_iter: 200,
            memory: 8,
            mu_initial: 1.0,
            mu_final: 1e-8,
            mu_shrink: 0.1,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub x: Vec<f64>,
    /// Raw objective at `x` (barrier terms excluded).
    pub value: f64,
    /// Total inner iterations across all barrier stages.
    pub iterations: usize,
    /// True iff the final stage met the gradient tolerance.
    pub converged: bool,
    /// Constraint values g_i(x) at the solution.
    pub constraint_residuals: Vec<f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum OptimError {
    #[error("constraint `{constraint}` is violated at the starting point (g = {value})")]
    InfeasibleStart { constraint: String, value: f64 },
    #[error("grid search needs at least one point per dimension")]
    EmptyGrid,
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((xi, &lo), &hi) in x.iter_mut().zip(lower).zip(upper) {
        *xi = xi.clamp(lo, hi);
    }
}

/// Central-difference gradient with per-coordinate O(h^2) accuracy.
pub fn finite_diff_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let orig = xp[i];
        xp[i] = orig + h;
        let fp = f(&xp);
        xp[i] = orig - h;
        let fm = f(&xp);
        xp[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Four-point cross second derivative d²f/(dx_i dx_j).
pub fn finite_diff_cross(f: &dyn Fn(&[f64]) -> f64, x: &[f64], i: usize, j: usize, h: f64) -> f64 {
    let mut xp = x.to_vec();
    let mut at = |di: f64, dj: f64| {
        xp[i] = x[i] + di;
        xp[j] = x[j] + dj;
        // When i == j the second write wins, which is wrong for diagonal
        // entries; callers use this for mixed partials only.
        let v = f(&xp);
        xp[i] = x[i];
        xp[j] = x[j];
        v
    };
    (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h)
}

/// Evenly spaced grid from `lo` to `hi` inclusive.
pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 || hi <= lo {
        return vec![lo; n.max(1)];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|t| lo + step * t as f64).collect()
}

/// Geometric grid from `lo` to `hi`; both must be positive.
pub(crate) fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 || hi <= lo {
        return vec![lo; n.max(1)];
    }
    let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
    (0..n).map(|t| lo * ratio.powi(t as i32)).collect()
}

/// Deterministic multi-start points: a centered start plus spread-out
/// fractions per coordinate. Coordinates with a positive lower bound and a
/// wide range are spread geometrically.
pub fn default_starts(lower: &[f64], upper: &[f64], count: usize) -> Vec<Vec<f64>> {
    const FRACTIONS: [f64; 5] = [0.5, 0.15, 0.85, 0.3, 0.7];
    (0..count)
        .map(|s| {
            let frac = FRACTIONS[s % FRACTIONS.len()];
            lower
                .iter()
                .zip(upper)
                .map(|(&lo, &hi)| {
                    if lo > 0.0 && hi / lo > 100.0 {
                        lo * (hi / lo).powf(frac)
                    } else {
                        lo + frac * (hi - lo)
                    }
                })
                .collect()
        })
        .collect()
}

/// Exhaustive maximization over the cartesian product of per-coordinate
/// grids, visited in lexicographic order. Ties keep the first point
/// encountered, so results are insensitive to floating-point tie noise.
pub fn grid_search(
    grids: &[Vec<f64>],
    eval: &mut dyn FnMut(&[f64]) -> f64,
) -> Result<(Vec<f64>, f64), OptimError> {
    if grids.is_empty() || grids.iter().any(|g| g.is_empty()) {
        return Err(OptimError::EmptyGrid);
    }
    let n = grids.len();
    let mut idx = vec![0usize; n];
    let mut point: Vec<f64> = grids.iter().map(|g| g[0]).collect();
    let mut best_x = point.clone();
    let mut best_v = eval(&point);
    loop {
        // Advance the rightmost coordinate, carrying leftward.
        let mut dim = n;
        while dim > 0 {
            dim -= 1;
            idx[dim] += 1;
            if idx[dim] < grids[dim].len() {
                point[dim] = grids[dim][idx[dim]];
                break;
            }
            idx[dim] = 0;
            point[dim] = grids[dim][0];
            if dim == 0 {
                return Ok((best_x, best_v));
            }
        }
        let v = eval(&point);
        if v > best_v {
            best_v = v;
            best_x = point.clone();
        }
    }
}

/// Golden-section maximization of a unimodal function on [lo, hi].
pub(crate) fn golden_section(
    f: &mut dyn FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    iters: usize,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Maximizes a smooth problem by projected L-BFGS, wrapping nonlinear
/// constraints in a logarithmic barrier driven along a fixed schedule.
///
/// The starting point is projected into the box; with constraints present it
/// must satisfy g_i(x0) > 0 strictly or the solve aborts with
/// [`OptimError::InfeasibleStart`]. `converged` reports whether the final
/// stage reached the projected-gradient tolerance — a `false` does not
/// invalidate `x`, which is always the best point seen.
pub fn solve_smooth(
    problem: &SmoothProblem,
    x0: &[f64],
    config: &SolveConfig,
) -> Result<SolveReport, OptimError> {
    let n = problem.lower.len();
    if problem.upper.len() != n {
        return Err(OptimError::DimensionMismatch {
            what: "upper",
            expected: n,
            got: problem.upper.len(),
        });
    }
    if x0.len() != n {
        return Err(OptimError::DimensionMismatch {
            what: "x0",
            expected: n,
            got: x0.len(),
        });
    }

    let mut x = x0.to_vec();
    project(&mut x, &problem.lower, &problem.upper);

    if !problem.constraints.is_empty() {
        for c in &problem.constraints {
            let g0 = (c.g)(&x);
            if g0 <= 0.0 {
                return Err(OptimError::InfeasibleStart {
                    constraint: c.name.to_string(),
                    value: g0,
                });
            }
        }
    }

    // Merit value with barrier; -inf outside the barrier domain.
    let merit = |x: &[f64], mu: f64| -> f64 {
        let mut v = (problem.objective)(x);
        if mu > 0.0 {
            for c in &problem.constraints {
                let g = (c.g)(x);
                if g <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                v += mu * g.ln();
            }
        } else {
            for c in &problem.constraints {
                if (c.g)(x) <= 0.0 {
                    return f64::NEG_INFINITY;
                }
            }
        }
        v
    };

    let grad_objective = |x: &[f64]| -> Vec<f64> {
        match &problem.gradient {
            Some(g) => g(x),
            None => finite_diff_gradient(problem.objective.as_ref(), x, config.fd_step),
        }
    };
    let grad_constraint = |c: &Constraint, x: &[f64]| -> Vec<f64> {
        match &c.grad {
            Some(g) => g(x),
            None => finite_diff_gradient(c.g.as_ref(), x, config.fd_step),
        }
    };
    let merit_grad = |x: &[f64], mu: f64| -> Vec<f64> {
        let mut g = grad_objective(x);
        if mu > 0.0 {
            for c in &problem.constraints {
                let gv = (c.g)(x);
                let cg = grad_constraint(c, x);
                for (gi, ci) in g.iter_mut().zip(cg) {
                    *gi += mu * ci / gv;
                }
            }
        }
        g
    };

    // Stage schedule: a single unconstrained stage when there is nothing to
    // relax, otherwise the geometric barrier schedule.
    let mut stages = Vec::new();
    if problem.constraints.is_empty() {
        stages.push(0.0);
    } else {
        let mut mu = config.mu_initial;
        while mu > config.mu_final {
            stages.push(mu);
            mu *= config.mu_shrink;
        }
        stages.push(config.mu_final);
    }

    let mut total_iters = 0usize;
    let mut converged = false;

    for (stage_idx, &mu) in stages.iter().enumerate() {
        let last_stage = stage_idx + 1 == stages.len();
        let mut f_x = merit(&x, mu);
        // L-BFGS memory, newest pair last.
        let mut s_list: Vec<Vec<f64>> = Vec::new();
        let mut y_list: Vec<Vec<f64>> = Vec::new();
        let mut g_x = merit_grad(&x, mu);

        for _ in 0..config.max_inner_iter {
            total_iters += 1;
            // Projected-gradient optimality measure.
            let mut pg: f64 = 0.0;
            for i in 0..n {
                let stepped = (x[i] + g_x[i]).clamp(problem.lower[i], problem.upper[i]);
                pg = pg.max((stepped - x[i]).abs());
            }
            if pg <= config.tol {
                if last_stage {
                    converged = true;
                }
                break;
            }

            // Two-loop recursion on the ascent direction.
            let mut q = g_x.clone();
            let pairs = s_list.len();
            let mut alphas = vec![0.0; pairs];
            for p in (0..pairs).rev() {
                let rho = 1.0 / dot(&y_list[p], &s_list[p]);
                let a = rho * dot(&s_list[p], &q);
                alphas[p] = a;
                for (qi, yi) in q.iter_mut().zip(&y_list[p]) {
                    *qi -= a * yi;
                }
            }
            if let (Some(s_last), Some(y_last)) = (s_list.last(), y_list.last()) {
                let scale = dot(s_last, y_last) / dot(y_last, y_last);
                for qi in q.iter_mut() {
                    *qi *= scale;
                }
            }
            for p in 0..pairs {
                let rho = 1.0 / dot(&y_list[p], &s_list[p]);
                let beta = rho * dot(&y_list[p], &q);
                for (qi, si) in q.iter_mut().zip(&s_list[p]) {
                    *qi += (alphas[p] - beta) * si;
                }
            }
            // q approximates H * grad; for maximization step along +q when it
            // is an ascent direction, otherwise fall back to the gradient.
            let direction = if dot(&q, &g_x) > 0.0 { q } else { g_x.clone() };

            // Projected backtracking line search with an Armijo ascent test
            // against the actually-achieved (projected) displacement.
            let line_search = |dir: &[f64], g_x: &[f64], f_x: f64| -> Option<(Vec<f64>, f64)> {
                let mut t = 1.0;
                for _ in 0..50 {
                    let mut xt = vec![0.0; n];
                    let mut moved = false;
                    let mut directional = 0.0;
                    for i in 0..n {
                        xt[i] = (x[i] + t * dir[i]).clamp(problem.lower[i], problem.upper[i]);
                        moved |= xt[i] != x[i];
                        directional += g_x[i] * (xt[i] - x[i]);
                    }
                    if !moved {
                        return None;
                    }
                    let ft = merit(&xt, mu);
                    if ft.is_finite() && ft > f_x && ft >= f_x + 1e-4 * directional.max(0.0) {
                        return Some((xt, ft));
                    }
                    t *= 0.5;
                }
                None
            };

            let step = match line_search(&direction, &g_x, f_x) {
                Some(v) => Some(v),
                // L-BFGS direction stalled; retry along the raw gradient.
                None if direction != g_x => line_search(&g_x, &g_x, f_x),
                None => None,
            };
            let Some((x_new, f_new)) = step else {
                // No progress possible from here at this barrier weight.
                break;
            };
            let x_old = std::mem::replace(&mut x, x_new);
            f_x = f_new;

            let g_new = merit_grad(&x, mu);
            let s: Vec<f64> = x.iter().zip(&x_old).map(|(a, b)| a - b).collect();
            // For maximization the curvature pair uses the NEGATED gradient
            // change so that s.y > 0 near a maximum.
            let y: Vec<f64> = g_x.iter().zip(&g_new).map(|(a, b)| a - b).collect();
            if dot(&s, &y) > 1e-12 * norm(&s) * norm(&y) {
                s_list.push(s);
                y_list.push(y);
                if s_list.len() > config.memory {
                    s_list.remove(0);
                    y_list.remove(0);
                }
            }
            g_x = g_new;
        }
    }

    let value = (problem.objective)(&x);
    let constraint_residuals = problem.constraints.iter().map(|c| (c.g)(&x)).collect();
    Ok(SolveReport {
        x,
        value,
        iterations: total_iters,
        converged,
        constraint_residuals,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unconstrained<'a>(
        lower: Vec<f64>,
        upper: Vec<f64>,
        f: impl Fn(&[f64]) -> f64 + 'a,
    ) -> SmoothProblem<'a> {
        SmoothProblem {
            lower,
            upper,
            objective: Box::new(f),
            gradient: None,
            constraints: Vec::new(),
        }
    }

    #[test]
    fn quadratic_peak_found() {
        let p = unconstrained(vec![-10.0], vec![10.0], |x| -(x[0] - 3.0).powi(2));
        let r = solve_smooth(&p, &[0.0], &SolveConfig::default()).unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.x[0], 3.0, epsilon = 1e-6);
    }

    #[test]
    fn anisotropic_quadratic_converges() {
        let p = unconstrained(vec![-5.0, -5.0], vec![5.0, 5.0], |x| {
            -((x[0] - 1.0).powi(2) + 10.0 * (x[1] - 1.0).powi(2))
        });
        let r = solve_smooth(&p, &[-4.0, 4.0], &SolveConfig::default()).unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.x[0], 1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(r.x[1], 1.0, epsilon = 1e-5);
    }

    #[test]
    fn active_box_bound_is_respected() {
        let p = unconstrained(vec![0.0], vec![2.0], |x| x[0]);
        let r = solve_smooth(&p, &[0.5], &SolveConfig::default()).unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.x[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn analytic_gradient_agrees_with_finite_difference_path() {
        let obj = |x: &[f64]| -(x[0] - 2.0).powi(2) - 3.0 * (x[1] + 1.0).powi(2);
        let with_grad = SmoothProblem {
            lower: vec![-10.0, -10.0],
            upper: vec![10.0, 10.0],
            objective: Box::new(obj),
            gradient: Some(Box::new(|x: &[f64]| {
                vec![-2.0 * (x[0] - 2.0), -6.0 * (x[1] + 1.0)]
            })),
            constraints: Vec::new(),
        };
        let without = unconstrained(vec![-10.0, -10.0], vec![10.0, 10.0], obj);
        let a = solve_smooth(&with_grad, &[5.0, 5.0], &SolveConfig::default()).unwrap();
        let b = solve_smooth(&without, &[5.0, 5.0], &SolveConfig::default()).unwrap();
        assert_abs_diff_eq!(a.x[0], b.x[0], epsilon = 1e-6);
        assert_abs_diff_eq!(a.x[1], b.x[1], epsilon = 1e-6);
        assert_abs_diff_eq!(a.x[0], 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(a.x[1], -1.0, epsilon = 1e-6);
    }

    #[test]
    fn barrier_handles_circular_constraint() {
        // max x + y subject to x^2 + y^2 <= 2: optimum at (1, 1).
        let p = SmoothProblem {
            lower: vec![-5.0, -5.0],
            upper: vec![5.0, 5.0],
            objective: Box::new(|x: &[f64]| x[0] + x[1]),
            gradient: Some(Box::new(|_: &[f64]| vec![1.0, 1.0])),
            constraints: vec![Constraint {
                name: "disc",
                g: Box::new(|x: &[f64]| 2.0 - x[0] * x[0] - x[1] * x[1]),
                grad: Some(Box::new(|x: &[f64]| vec![-2.0 * x[0], -2.0 * x[1]])),
            }],
        };
        let r = solve_smooth(&p, &[0.0, 0.0], &SolveConfig::default()).unwrap();
        assert_abs_diff_eq!(r.x[0], 1.0, epsilon = 1e-3);
        assert_abs_diff_eq!(r.x[1], 1.0, epsilon = 1e-3);
        assert!(r.constraint_residuals[0] >= 0.0);
    }

    #[test]
    fn infeasible_start_is_reported() {
        let p = SmoothProblem {
            lower: vec![-5.0],
            upper: vec![5.0],
            objective: Box::new(|x: &[f64]| x[0]),
            gradient: None,
            constraints: vec![Constraint {
                name: "halfline",
                g: Box::new(|x: &[f64]| -1.0 - x[0]),
                grad: None,
            }],
        };
        match solve_smooth(&p, &[0.0], &SolveConfig::default()) {
            Err(OptimError::InfeasibleStart { constraint, value }) => {
                assert_eq!(constraint, "halfline");
                assert!(value <= 0.0);
            }
            other => panic!("expected InfeasibleStart, got {other:?}"),
        }
    }

    #[test]
    fn solve_is_deterministic() {
        let make = || {
            unconstrained(vec![-3.0, -3.0, -3.0], vec![3.0, 3.0, 3.0], |x| {
                -(x[0].powi(2) + 0.5 * (x[1] - 1.0).powi(2) + 2.0 * (x[2] + 0.5).powi(2))
                    - 0.1 * (x[0] * x[1]).sin()
            })
        };
        let a = solve_smooth(&make(), &[2.0, -2.0, 2.0], &SolveConfig::default()).unwrap();
        let b = solve_smooth(&make(), &[2.0, -2.0, 2.0], &SolveConfig::default()).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.value, b.value);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn grid_search_finds_max_and_keeps_first_tie() {
        let grids = vec![vec![0.0, 1.0, 2.0], vec![0.0, 1.0]];
        // Symmetric in x around 1: ties at x = 0 and x = 2.
        let (x, v) = grid_search(&grids, &mut |p: &[f64]| {
            -((p[0] - 1.0).abs() - 1.0).abs() + p[1]
        })
        .unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(x, vec![0.0, 1.0]);

        assert_eq!(
            grid_search(&[vec![], vec![1.0]], &mut |_: &[f64]| 0.0),
            Err(OptimError::EmptyGrid)
        );
    }

    #[test]
    fn golden_section_peak() {
        let (x, v) = golden_section(&mut |t| -(t - 2.5) * (t - 2.5), 0.0, 10.0, 60);
        assert_abs_diff_eq!(x, 2.5, epsilon = 1e-6);
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn finite_differences_match_analytic_derivatives() {
        let f = |x: &[f64]| x[0].powi(3) + 2.0 * x[0] * x[1] + x[1].powi(2);
        let g = finite_diff_gradient(&f, &[1.5, -0.5], 1e-5);
        assert_abs_diff_eq!(g[0], 3.0 * 1.5 * 1.5 + 2.0 * -0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(g[1], 2.0 * 1.5 + 2.0 * -0.5, epsilon = 1e-8);
        let cross = finite_diff_cross(&f, &[1.5, -0.5], 0, 1, 1e-4);
        assert_abs_diff_eq!(cross, 2.0, epsilon = 1e-6);
    }

    proptest! {
        #[test]
        fn grid_search_dominates_sampled_points(
            a in -5.0f64..5.0, b in -5.0f64..5.0, pick in 0usize..16,
        ) {
            let grids: Vec<Vec<f64>> = vec![
                (0..4).map(|i| -2.0 + i as f64).collect(),
                (0..4).map(|i| -2.0 + i as f64).collect(),
            ];
            let f = move |p: &[f64]| -(p[0] - a).powi(2) - (p[1] - b).powi(2);
            let (_, best) = grid_search(&grids, &mut { f }).unwrap();
            let pi = pick / 4;
            let pj = pick % 4;
            let sampled = f(&[grids[0][pi], grids[1][pj]]);
            prop_assert!(best >= sampled);
        }
    }
}
