//! Infeasible primal-dual interior-point method with Mehrotra's
//! predictor-corrector and Gondzio centrality correctors.
//!
//! The problem is `min c^T x  s.t.  A x = b,  l <= x <= u` in the flat layout
//! of [`StandardArrowhead`]. Each finite bound carries its own slack and dual:
//! `s_l = x - l`, `s_u = u - x`, `z_l, z_u > 0`. The Newton system reduces
//! to the augmented system with `Sigma = -(Z_l S_l^{-1} + Z_u S_u^{-1})`,
//! factored once per iteration by the supplied [`KktSolver`].

use std::time::Instant;

use serde::Serialize;

use crate::kkt::{KktError, KktSolver, KktStats};
use crate::problem::StandardArrowhead;

pub const FRACTION_TO_BOUNDARY: f64 = 0.99995;
pub const MAX_GONDZIO: usize = 3;
/// A corrector is kept only if both steps grow by this fraction of `1 - alpha`.
pub const GONDZIO_ACCEPT: f64 = 0.1;
/// `Sigma` entry of a variable without finite bounds.
pub const FREE_SIGMA: f64 = -1e-10;
/// Residual growth over the best seen so far that counts as divergence.
pub const DIVERGENCE_FACTOR: f64 = 1e4;

#[derive(Debug, Clone, PartialEq)]
pub struct IpmOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_gondzio: usize,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 200, max_gondzio: MAX_GONDZIO }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Optimal,
    MaxIterations,
    Diverged,
    NumericalFailure,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Optimal => "optimal",
            Status::MaxIterations => "max-iter",
            Status::Diverged => "diverged",
            Status::NumericalFailure => "numerical-failure",
        })
    }
}

/// Finite-bound masks of the flat primal vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn of(p: &StandardArrowhead) -> Self {
        Self { lower: p.flat_lower(), upper: p.flat_upper() }
    }

    pub fn has_lower(&self, j: usize) -> bool {
        self.lower[j].is_finite()
    }

    pub fn has_upper(&self, j: usize) -> bool {
        self.upper[j].is_finite()
    }

    /// Number of finite bounds, i.e. complementary pairs.
    pub fn pairs(&self) -> usize {
        (0..self.lower.len()).map(|j| usize::from(self.has_lower(j)) + usize::from(self.has_upper(j))).sum()
    }
}

/// Current point. `z_l[j]` (`z_u[j]`) is zero and unused when the lower
/// (upper) bound of `x_j` is infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z_l: Vec<f64>,
    pub z_u: Vec<f64>,
}

impl IterateState {
    pub fn slack_lower(&self, b: &Bounds) -> Vec<f64> {
        self.x.iter().zip(&b.lower).map(|(x, l)| if l.is_finite() { x - l } else { 0.0 }).collect()
    }

    pub fn slack_upper(&self, b: &Bounds) -> Vec<f64> {
        self.x.iter().zip(&b.upper).map(|(x, u)| if u.is_finite() { u - x } else { 0.0 }).collect()
    }

    /// Strictly inside every finite bound with positive bound duals.
    pub fn is_interior(&self, b: &Bounds) -> bool {
        (0..self.x.len()).all(|j| {
            (!b.has_lower(j) || (self.x[j] - b.lower[j] > 0.0 && self.z_l[j] > 0.0))
                && (!b.has_upper(j) || (b.upper[j] - self.x[j] > 0.0 && self.z_u[j] > 0.0))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    /// `c - A^T y - z_l + z_u`
    pub r_x: Vec<f64>,
    /// `b - A x`
    pub r_y: Vec<f64>,
    /// `s_l^T z_l + s_u^T z_u`
    pub complementarity: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub rel_primal: f64,
    pub rel_dual: f64,
    pub rel_gap: f64,
    /// Average complementarity.
    pub mu: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Problem data reused across iterations.
#[derive(Debug, Clone)]
pub struct Data<'a> {
    pub problem: &'a StandardArrowhead,
    pub c: Vec<f64>,
    pub b: Vec<f64>,
    pub bounds: Bounds,
    c_norm: f64,
    b_norm: f64,
}

impl<'a> Data<'a> {
    pub fn new(problem: &'a StandardArrowhead) -> Self {
        let c = problem.flat_obj();
        let b = problem.flat_rhs();
        let c_norm = inf_norm(&c);
        let b_norm = inf_norm(&b);
        Self { problem, c, b, bounds: Bounds::of(problem), c_norm, b_norm }
    }

    pub fn nx(&self) -> usize {
        self.c.len()
    }

    pub fn ny(&self) -> usize {
        self.b.len()
    }
}

pub fn residuals(d: &Data, it: &IterateState) -> Residuals {
    let aty = d.problem.mul_t(&it.y);
    let r_x: Vec<f64> = (0..d.nx()).map(|j| d.c[j] - aty[j] - it.z_l[j] + it.z_u[j]).collect();
    let ax = d.problem.mul(&it.x);
    let r_y: Vec<f64> = d.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let sl = it.slack_lower(&d.bounds);
    let su = it.slack_upper(&d.bounds);
    let complementarity = dot(&sl, &it.z_l) + dot(&su, &it.z_u);
    let primal_objective = dot(&d.c, &it.x);
    let mut dual_objective = dot(&d.b, &it.y);
    for j in 0..d.nx() {
        if d.bounds.has_lower(j) {
            dual_objective += d.bounds.lower[j] * it.z_l[j];
        }
        if d.bounds.has_upper(j) {
            dual_objective -= d.bounds.upper[j] * it.z_u[j];
        }
    }
    let pairs = d.bounds.pairs();
    Residuals {
        rel_primal: inf_norm(&r_y) / (1.0 + d.b_norm),
        rel_dual: inf_norm(&r_x) / (1.0 + d.c_norm),
        rel_gap: complementarity / (1.0 + primal_objective.abs()),
        mu: if pairs == 0 { 0.0 } else { complementarity / pairs as f64 },
        r_x,
        r_y,
        complementarity,
        primal_objective,
        dual_objective,
    }
}

/// `Sigma = -(z_l / s_l + z_u / s_u)`; free variables get [`FREE_SIGMA`].
pub fn assemble_sigma(b: &Bounds, it: &IterateState) -> Vec<f64> {
    (0..it.x.len())
        .map(|j| {
            let mut s = 0.0;
            let mut bounded = false;
            if b.has_lower(j) {
                s -= it.z_l[j] / (it.x[j] - b.lower[j]);
                bounded = true;
            }
            if b.has_upper(j) {
                s -= it.z_u[j] / (b.upper[j] - it.x[j]);
                bounded = true;
            }
            if bounded {
                s
            } else {
                FREE_SIGMA
            }
        })
        .collect()
}

/// A Newton direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub dz_l: Vec<f64>,
    pub dz_u: Vec<f64>,
}

/// `alpha = min(1, 0.99995 * largest step keeping strict interiority)`,
/// separately for primal and dual.
pub fn step_lengths(b: &Bounds, it: &IterateState, d: &Direction) -> (f64, f64) {
    let mut ap = f64::INFINITY;
    let mut ad = f64::INFINITY;
    for j in 0..it.x.len() {
        if b.has_lower(j) {
            if d.dx[j] < 0.0 {
                ap = ap.min(-(it.x[j] - b.lower[j]) / d.dx[j]);
            }
            if d.dz_l[j] < 0.0 {
                ad = ad.min(-it.z_l[j] / d.dz_l[j]);
            }
        }
        if b.has_upper(j) {
            if d.dx[j] > 0.0 {
                ap = ap.min((b.upper[j] - it.x[j]) / d.dx[j]);
            }
            if d.dz_u[j] < 0.0 {
                ad = ad.min(-it.z_u[j] / d.dz_u[j]);
            }
        }
    }
    ((FRACTION_TO_BOUNDARY * ap).min(1.0), (FRACTION_TO_BOUNDARY * ad).min(1.0))
}

/// Termination test: relative primal, dual and gap measures all within `tol`.
pub fn check_termination(r: &Residuals, tol: f64) -> bool {
    r.rel_primal <= tol && r.rel_dual <= tol && r.rel_gap <= tol
}

/// Solves the Newton system for the complementarity targets `r_l`, `r_u`
/// (`S_l dz_l + Z_l dx = r_l`, `S_u dz_u - Z_u dx = r_u`).
fn newton(d: &Data, it: &IterateState, res: &Residuals, r_l: &[f64], r_u: &[f64], kkt: &mut dyn KktSolver) -> Result<Direction, KktError> {
    let n = d.nx();
    let sl = it.slack_lower(&d.bounds);
    let su = it.slack_upper(&d.bounds);
    let mut rhs = Vec::with_capacity(n + d.ny());
    for j in 0..n {
        let mut v = res.r_x[j];
        if d.bounds.has_lower(j) {
            v -= r_l[j] / sl[j];
        }
        if d.bounds.has_upper(j) {
            v += r_u[j] / su[j];
        }
        rhs.push(v);
    }
    rhs.extend_from_slice(&res.r_y);
    let sol = kkt.solve(&rhs)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(KktError::Numerical("non-finite Newton direction".into()));
    }
    let dx = sol[..n].to_vec();
    let dy = sol[n..].to_vec();
    let mut dz_l = vec![0.0; n];
    let mut dz_u = vec![0.0; n];
    for j in 0..n {
        if d.bounds.has_lower(j) {
            dz_l[j] = (r_l[j] - it.z_l[j] * dx[j]) / sl[j];
        }
        if d.bounds.has_upper(j) {
            dz_u[j] = (r_u[j] + it.z_u[j] * dx[j]) / su[j];
        }
    }
    Ok(Direction { dx, dy, dz_l, dz_u })
}

/// Complementarity products after taking the given steps.
fn products(b: &Bounds, it: &IterateState, d: &Direction, ap: f64, ad: f64) -> (Vec<f64>, Vec<f64>) {
    let n = it.x.len();
    let mut pl = vec![0.0; n];
    let mut pu = vec![0.0; n];
    for j in 0..n {
        if b.has_lower(j) {
            pl[j] = (it.x[j] + ap * d.dx[j] - b.lower[j]) * (it.z_l[j] + ad * d.dz_l[j]);
        }
        if b.has_upper(j) {
            pu[j] = (b.upper[j] - it.x[j] - ap * d.dx[j]) * (it.z_u[j] + ad * d.dz_u[j]);
        }
    }
    (pl, pu)
}

/// What one iteration did.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepInfo {
    pub alpha_primal: f64,
    pub alpha_dual: f64,
    /// Centering parameter of the corrector.
    pub sigma: f64,
    pub correctors: usize,
}

/// One predictor-corrector step from `it`, with `kkt` factored for
/// `assemble_sigma(it)`. `res` must be the residuals at `it`.
pub fn predictor_corrector_iteration(
    d: &Data,
    it: &IterateState,
    res: &Residuals,
    kkt: &mut dyn KktSolver,
    max_gondzio: usize,
) -> Result<(IterateState, StepInfo), KktError> {
    let n = d.nx();
    let b = &d.bounds;
    let pairs = b.pairs().max(1) as f64;
    let sl = it.slack_lower(b);
    let su = it.slack_upper(b);
    let mu = res.mu;

    // predictor
    let r_l: Vec<f64> = (0..n).map(|j| -sl[j] * it.z_l[j]).collect();
    let r_u: Vec<f64> = (0..n).map(|j| -su[j] * it.z_u[j]).collect();
    let aff = newton(d, it, res, &r_l, &r_u, kkt)?;
    let (ap, ad) = step_lengths(b, it, &aff);
    let (pl, pu) = products(b, it, &aff, ap, ad);
    let mu_aff = (pl.iter().sum::<f64>() + pu.iter().sum::<f64>()) / pairs;
    let sigma = if mu > 0.0 { (mu_aff / mu).powi(3).min(1.0) } else { 0.0 };

    // corrector
    let target = sigma * mu;
    let mut c_l: Vec<f64> = (0..n).map(|j| if b.has_lower(j) { target - sl[j] * it.z_l[j] - aff.dx[j] * aff.dz_l[j] } else { 0.0 }).collect();
    let mut c_u: Vec<f64> = (0..n).map(|j| if b.has_upper(j) { target - su[j] * it.z_u[j] + aff.dx[j] * aff.dz_u[j] } else { 0.0 }).collect();
    let mut dir = newton(d, it, res, &c_l, &c_u, kkt)?;
    let (mut ap, mut ad) = step_lengths(b, it, &dir);

    // Gondzio correctors: push outlying products back into [0.1, 10] * target
    let mut correctors = 0;
    if target > 0.0 {
        for _ in 0..max_gondzio {
            let tp = (ap + 0.1).min(1.0);
            let td = (ad + 0.1).min(1.0);
            let (pl, pu) = products(b, it, &dir, tp, td);
            let lo = 0.1 * target;
            let hi = 10.0 * target;
            let fix = |v: f64| -> f64 {
                if v < lo {
                    lo - v
                } else if v > hi {
                    (hi - v).max(-hi)
                } else {
                    0.0
                }
            };
            let mut t_l = c_l.clone();
            let mut t_u = c_u.clone();
            for j in 0..n {
                if b.has_lower(j) {
                    t_l[j] += fix(pl[j]);
                }
                if b.has_upper(j) {
                    t_u[j] += fix(pu[j]);
                }
            }
            let cand = newton(d, it, res, &t_l, &t_u, kkt)?;
            let (cp, cd) = step_lengths(b, it, &cand);
            if cp >= ap + GONDZIO_ACCEPT * (1.0 - ap) && cd >= ad + GONDZIO_ACCEPT * (1.0 - ad) {
                dir = cand;
                ap = cp;
                ad = cd;
                c_l = t_l;
                c_u = t_u;
                correctors += 1;
            } else {
                break;
            }
        }
    }

    let next = IterateState {
        x: it.x.iter().zip(&dir.dx).map(|(x, dx)| x + ap * dx).collect(),
        y: it.y.iter().zip(&dir.dy).map(|(y, dy)| y + ad * dy).collect(),
        z_l: (0..n).map(|j| if b.has_lower(j) { it.z_l[j] + ad * dir.dz_l[j] } else { 0.0 }).collect(),
        z_u: (0..n).map(|j| if b.has_upper(j) { it.z_u[j] + ad * dir.dz_u[j] } else { 0.0 }).collect(),
    };
    Ok((next, StepInfo { alpha_primal: ap, alpha_dual: ad, sigma, correctors }))
}

/// Mehrotra-style starting point: least-norm `x` with `A x = b`,
/// least-squares `y`, then shifts that make slacks and duals positive and
/// balanced.
pub fn starting_point(d: &Data, kkt: &mut dyn KktSolver) -> Result<IterateState, KktError> {
    let n = d.nx();
    let b = &d.bounds;
    kkt.factor(&vec![-1.0; n])?;
    let mut rhs = vec![0.0; n];
    rhs.extend_from_slice(&d.b);
    let sol = kkt.solve(&rhs)?;
    let x0 = sol[..n].to_vec();
    let mut rhs = d.c.clone();
    rhs.extend(std::iter::repeat_n(0.0, d.ny()));
    let sol = kkt.solve(&rhs)?;
    let y = sol[n..].to_vec();
    if x0.iter().chain(&y).any(|v| !v.is_finite()) {
        return Err(KktError::Numerical("non-finite starting point".into()));
    }
    let aty = d.problem.mul_t(&y);
    let r: Vec<f64> = (0..n).map(|j| d.c[j] - aty[j]).collect();

    let mut sl = vec![0.0; n];
    let mut su = vec![0.0; n];
    let mut zl = vec![0.0; n];
    let mut zu = vec![0.0; n];
    for j in 0..n {
        match (b.has_lower(j), b.has_upper(j)) {
            (true, true) => {
                sl[j] = x0[j] - b.lower[j];
                su[j] = b.upper[j] - x0[j];
                zl[j] = r[j].max(0.0);
                zu[j] = (-r[j]).max(0.0);
            }
            (true, false) => {
                sl[j] = x0[j] - b.lower[j];
                zl[j] = r[j];
            }
            (false, true) => {
                su[j] = b.upper[j] - x0[j];
                zu[j] = -r[j];
            }
            (false, false) => {}
        }
    }
    let mask = |j: usize, lower: bool| if lower { b.has_lower(j) } else { b.has_upper(j) };
    let pick = |v: &[f64], w: &[f64]| -> Vec<f64> {
        (0..n).filter(|&j| mask(j, true)).map(|j| v[j]).chain((0..n).filter(|&j| mask(j, false)).map(|j| w[j])).collect()
    };
    let mut s = pick(&sl, &su);
    let mut z = pick(&zl, &zu);
    if !s.is_empty() {
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let dp = (-1.5 * min(&s)).max(0.0);
        let dd = (-1.5 * min(&z)).max(0.0);
        s.iter_mut().for_each(|v| *v += dp);
        z.iter_mut().for_each(|v| *v += dd);
        let prod = dot(&s, &z);
        let (ss, zs): (f64, f64) = (s.iter().sum(), z.iter().sum());
        let bp = if zs > 0.0 { 0.5 * prod / zs } else { 0.0 };
        let bd = if ss > 0.0 { 0.5 * prod / ss } else { 0.0 };
        for v in &mut s {
            *v += bp;
            if *v <= 0.0 {
                *v = 1.0;
            }
        }
        for v in &mut z {
            *v += bd;
            if *v <= 0.0 {
                *v = 1.0;
            }
        }
    }
    let mut k = 0;
    for j in 0..n {
        if b.has_lower(j) {
            sl[j] = s[k];
            zl[j] = z[k];
            k += 1;
        }
    }
    for j in 0..n {
        if b.has_upper(j) {
            su[j] = s[k];
            zu[j] = z[k];
            k += 1;
        }
    }
    let x = (0..n)
        .map(|j| match (b.has_lower(j), b.has_upper(j)) {
            (true, true) => b.lower[j] + (b.upper[j] - b.lower[j]) * sl[j] / (sl[j] + su[j]),
            (true, false) => b.lower[j] + sl[j],
            (false, true) => b.upper[j] - su[j],
            (false, false) => x0[j],
        })
        .collect();
    Ok(IterateState { x, y, z_l: zl, z_u: zu })
}

/// One line of the iteration log; contains no timings so that logs of
/// identical runs compare equal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub rel_primal: f64,
    pub rel_dual: f64,
    pub rel_gap: f64,
    pub mu: f64,
    pub alpha_primal: f64,
    pub alpha_dual: f64,
    pub sigma: f64,
    pub correctors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: Status,
    pub iterations: usize,
    pub objective: f64,
    pub dual_objective: f64,
    pub rel_primal: f64,
    pub rel_dual: f64,
    pub rel_gap: f64,
    pub iterate: IterateState,
    pub history: Vec<IterationRecord>,
    pub kkt: KktStats,
    pub total_seconds: f64,
    /// Why the run stopped early, if it did.
    pub message: Option<String>,
}

impl SolveReport {
    /// Primal point split per block (standard form, including slacks).
    pub fn blocks(&self, p: &StandardArrowhead) -> Vec<Vec<f64>> {
        p.split_x(&self.iterate.x)
    }
}

pub fn solve(problem: &StandardArrowhead, kkt: &mut dyn KktSolver, opts: &IpmOptions) -> SolveReport {
    solve_with(problem, kkt, opts, &mut |_| {})
}

/// Runs the method, calling `on_iter` after every iteration.
pub fn solve_with(problem: &StandardArrowhead, kkt: &mut dyn KktSolver, opts: &IpmOptions, on_iter: &mut dyn FnMut(&IterationRecord)) -> SolveReport {
    let start = Instant::now();
    let d = Data::new(problem);
    let mut history = Vec::new();
    let fail = |status, message: String, it: IterateState, res: Option<Residuals>, history: Vec<IterationRecord>, kkt: &dyn KktSolver| {
        let (obj, dobj, p, du, g) = res.map_or((f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN), |r| {
            (r.primal_objective, r.dual_objective, r.rel_primal, r.rel_dual, r.rel_gap)
        });
        SolveReport {
            status,
            iterations: history.len(),
            objective: obj,
            dual_objective: dobj,
            rel_primal: p,
            rel_dual: du,
            rel_gap: g,
            iterate: it,
            history,
            kkt: kkt.stats(),
            total_seconds: start.elapsed().as_secs_f64(),
            message: Some(message),
        }
    };
    let empty = IterateState { x: vec![0.0; d.nx()], y: vec![0.0; d.ny()], z_l: vec![0.0; d.nx()], z_u: vec![0.0; d.nx()] };
    let mut it = match starting_point(&d, kkt) {
        Ok(it) => it,
        Err(e) => return fail(Status::NumericalFailure, format!("starting point: {e}"), empty, None, history, kkt),
    };
    let mut best = f64::INFINITY;
    loop {
        let res = residuals(&d, &it);
        let finite = res.rel_primal.is_finite() && res.rel_dual.is_finite() && res.rel_gap.is_finite();
        if !finite {
            return fail(Status::NumericalFailure, "non-finite residuals".into(), it, Some(res), history, kkt);
        }
        if check_termination(&res, opts.tol) {
            return SolveReport {
                status: Status::Optimal,
                iterations: history.len(),
                objective: res.primal_objective,
                dual_objective: res.dual_objective,
                rel_primal: res.rel_primal,
                rel_dual: res.rel_dual,
                rel_gap: res.rel_gap,
                iterate: it,
                history,
                kkt: kkt.stats(),
                total_seconds: start.elapsed().as_secs_f64(),
                message: None,
            };
        }
        let worst = res.rel_primal.max(res.rel_dual);
        best = best.min(worst);
        if worst > DIVERGENCE_FACTOR * best.max(opts.tol) {
            let msg = format!("residual {worst:e} grew over {DIVERGENCE_FACTOR:e} times its minimum {best:e}");
            return fail(Status::Diverged, msg, it, Some(res), history, kkt);
        }
        if history.len() >= opts.max_iter {
            return fail(Status::MaxIterations, format!("no convergence in {} iterations", opts.max_iter), it, Some(res), history, kkt);
        }
        let sigma = assemble_sigma(&d.bounds, &it);
        let step = kkt.factor(&sigma).and_then(|_| predictor_corrector_iteration(&d, &it, &res, kkt, opts.max_gondzio));
        let (next, info) = match step {
            Ok(v) => v,
            Err(e) => return fail(Status::NumericalFailure, e.to_string(), it, Some(res), history, kkt),
        };
        let rec = IterationRecord {
            iteration: history.len() + 1,
            primal_objective: res.primal_objective,
            dual_objective: res.dual_objective,
            rel_primal: res.rel_primal,
            rel_dual: res.rel_dual,
            rel_gap: res.rel_gap,
            mu: res.mu,
            alpha_primal: info.alpha_primal,
            alpha_dual: info.alpha_dual,
            sigma: info.sigma,
            correctors: info.correctors,
        };
        on_iter(&rec);
        history.push(rec);
        it = next;
    }
}
