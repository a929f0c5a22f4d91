//! Sensing policies for CSMA/CA secondaries.
//!
//! Under CSMA/CA an idle channel is lost only when no user senses it, since
//! contention among the users that do is resolved without collisions. The
//! capacity left unused is therefore `Σ_i C_i θ̄_i (1 − c_i)^M`, where `c_i`
//! is the probability that a single user senses channel `i`. Everything here
//! minimizes that quantity, or its counterpart with detection errors, over
//! the probability simplex of the group catalog.
//!
//! When the catalog holds every `S`-subset the objective and constraints
//! depend on the scheme only through the coverages, which range over
//! exactly `{0 ≤ c ≤ 1, Σc = S}`. The solvers then search that
//! `N`-dimensional set and split the optimal coverages back into group
//! probabilities by systematic sampling.

use std::borrow::Cow;
use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::scheme::{GroupCatalog, SensingScheme};
use crate::simplex;

/// Smallest access probability after an idle detection.
pub const DEFAULT_F_MIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    /// Miss-detection probability: busy channel reported idle.
    pub alpha: f64,
    /// Probability an idle channel is reported idle.
    pub beta: f64,
    /// Access probability after an idle report.
    pub f0: f64,
    /// Access probability after a busy report. Always 0.
    pub f1: f64,
}

impl DetectorModel {
    pub fn new(alpha: f64, beta: f64, f0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::param("alpha", format!("{alpha} outside [0, 1]")));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::param("beta", format!("{beta} outside (0, 1]")));
        }
        if !(f0 > 0.0 && f0 <= 1.0) {
            return Err(Error::param("f0", format!("{f0} outside (0, 1]")));
        }
        Ok(DetectorModel { alpha, beta, f0, f1: 0.0 })
    }

    pub fn perfect() -> Self {
        DetectorModel {
            alpha: 0.0,
            beta: 1.0,
            f0: 1.0,
            f1: 0.0,
        }
    }

    pub fn with_f0(self, f0: f64) -> Result<Self> {
        Self::new(self.alpha, self.beta, f0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub scheme: SensingScheme,
    pub f0: f64,
    /// Multiplier of the simplex constraint.
    pub nu: f64,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    /// Objective after every accepted step of the final descent.
    pub objective_trace: Vec<f64>,
    /// Largest constraint value `g_k(P, f⁰)` (nonpositive when feasible);
    /// `-inf` when the problem has no inequality constraints.
    pub max_constraint: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub obj_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 100_000,
            grad_tol: 1e-8,
            obj_tol: 1e-12,
        }
    }
}

fn check_population(m: u32, least: u32) -> Result<()> {
    if m < least {
        return Err(Error::param("m", format!("population {m} below {least}")));
    }
    Ok(())
}

fn check_dims(cs: &ChannelSet, catalog: &GroupCatalog) -> Result<()> {
    if catalog.n() != cs.n() {
        return Err(Error::Dimension(format!(
            "catalog over {} channels, channel set has {}",
            catalog.n(),
            cs.n()
        )));
    }
    Ok(())
}

fn overlooked(weights: &[f64], cov: &[f64], m: u32) -> f64 {
    weights
        .iter()
        .zip(cov)
        .map(|(w, c)| w * (1.0 - c.min(1.0)).powi(m as i32))
        .sum()
}

/// Expected idle capacity that no user senses.
pub fn unutilized_capacity(cs: &ChannelSet, scheme: &SensingScheme, m: u32) -> Result<f64> {
    check_population(m, 1)?;
    check_dims(cs, scheme.catalog())?;
    Ok(overlooked(&cs.idle_rates(), &scheme.coverages(), m))
}

/// Error-free CSMA throughput `C_t − unutilized_capacity`.
pub fn csma_throughput(cs: &ChannelSet, scheme: &SensingScheme, m: u32) -> Result<f64> {
    Ok(cs.residual_capacity() - unutilized_capacity(cs, scheme, m)?)
}

fn infeasible(catalog: Arc<GroupCatalog>, f0: f64) -> SolverReport {
    SolverReport {
        scheme: SensingScheme::uniform(catalog),
        f0,
        nu: 0.0,
        objective: 0.0,
        kkt_residual: 0.0,
        iterations: 0,
        status: SolveStatus::Infeasible,
        objective_trace: Vec::new(),
        max_constraint: f64::INFINITY,
    }
}

/// Closed-form optimum for single-channel sensing. The multiplier is found
/// by bisection on the decreasing map `ν ↦ Σ_j p_j(ν)`.
pub fn optimal_single(cs: &ChannelSet, m: u32) -> Result<SolverReport> {
    check_population(m, 2)?;
    let catalog = Arc::new(GroupCatalog::singletons(cs.n())?);
    let w = cs.idle_rates();
    let mf = m as f64;
    let w_max = w.iter().copied().fold(0.0, f64::max);
    if w_max <= 0.0 {
        return Ok(infeasible(catalog, 1.0));
    }
    let probs_at = |nu: f64| -> Vec<f64> {
        w.iter()
            .map(|&wj| {
                if wj <= 0.0 {
                    0.0
                } else {
                    (1.0 - (nu / (mf * wj)).powf(1.0 / (mf - 1.0))).max(0.0)
                }
            })
            .collect()
    };
    let (mut lo, mut hi) = (0.0, mf * w_max);
    let mut iterations = 0;
    let mut nu = 0.5 * (lo + hi);
    while iterations < 300 {
        nu = 0.5 * (lo + hi);
        let total: f64 = probs_at(nu).iter().sum();
        iterations += 1;
        if (total - 1.0).abs() <= 1e-13 || hi - lo <= f64::EPSILON * hi {
            break;
        }
        if total > 1.0 {
            lo = nu;
        } else {
            hi = nu;
        }
    }
    let raw = probs_at(nu);
    let total: f64 = raw.iter().sum();
    let scheme = SensingScheme::new(catalog, raw.iter().map(|p| p / total).collect())?;
    let p = scheme.probs();
    let kkt_residual = w
        .iter()
        .zip(p)
        .map(|(&wj, &pj)| {
            let g = mf * wj * (1.0 - pj).powi(m as i32 - 1);
            (pj * (nu - g)).abs().max(g - nu)
        })
        .fold(0.0, f64::max);
    Ok(SolverReport {
        objective: overlooked(&w, p, m),
        scheme,
        f0: 1.0,
        nu,
        kkt_residual,
        iterations,
        status: SolveStatus::Optimal,
        objective_trace: Vec::new(),
        max_constraint: f64::NEG_INFINITY,
    })
}

struct Descent {
    x: Vec<f64>,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
    pg_norm: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Search space of the policy solvers.
#[derive(Clone, Copy)]
enum Domain<'a> {
    /// Probabilities over the groups of an arbitrary catalog.
    Groups(&'a GroupCatalog),
    /// Coverages of a catalog that holds every `S`-subset.
    Coverage(&'a GroupCatalog),
}

impl<'a> Domain<'a> {
    fn of(catalog: &'a GroupCatalog) -> Self {
        if catalog.is_full() && catalog.kappa() > catalog.n() {
            Domain::Coverage(catalog)
        } else {
            Domain::Groups(catalog)
        }
    }

    fn start(&self) -> Vec<f64> {
        match self {
            Domain::Groups(c) => vec![1.0 / c.kappa() as f64; c.kappa()],
            Domain::Coverage(c) => vec![c.group_size() as f64 / c.n() as f64; c.n()],
        }
    }

    fn project(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Domain::Groups(_) => simplex::project(v),
            Domain::Coverage(c) => simplex::project_capped(v, c.group_size() as f64),
        }
    }

    fn coverage<'x>(&self, x: &'x [f64]) -> Cow<'x, [f64]> {
        match self {
            Domain::Groups(c) => Cow::Owned(c.coverage_of(x)),
            Domain::Coverage(_) => Cow::Borrowed(x),
        }
    }

    /// Gradient in the search space from the gradient in the coverages.
    fn pull_back(&self, dc: Vec<f64>) -> Vec<f64> {
        match self {
            Domain::Groups(c) => c.pull_back(&dc),
            Domain::Coverage(_) => dc,
        }
    }

    fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Domain::Groups(_) => x.to_vec(),
            Domain::Coverage(c) => split_coverage(c, x),
        }
    }
}

/// Group probabilities of a full catalog reproducing the coverages `cov`.
/// A uniform offset `u` selects channel `i` when some `u + k`, `k` integer,
/// falls in `[C_{i-1}, C_i)` of the cumulative coverages; each offset
/// interval between breakpoints yields one group.
fn split_coverage(catalog: &GroupCatalog, cov: &[f64]) -> Vec<f64> {
    let s = catalog.group_size() as f64;
    let total: f64 = cov.iter().sum();
    let mut cumulative = Vec::with_capacity(cov.len() + 1);
    cumulative.push(0.0);
    let mut acc = 0.0;
    for c in cov {
        acc += c * s / total;
        cumulative.push(acc);
    }
    *cumulative.last_mut().expect("nonempty") = s;
    let mut breaks: Vec<f64> = cumulative.iter().map(|c| c - c.floor()).collect();
    breaks.push(1.0);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let index: HashMap<&[usize], usize> = catalog
        .groups()
        .iter()
        .enumerate()
        .map(|(g, members)| (members.as_slice(), g))
        .collect();
    let mut probs = vec![0.0; catalog.kappa()];
    for w in breaks.windows(2) {
        let width = w[1] - w[0];
        if width <= 0.0 {
            continue;
        }
        let u = 0.5 * (w[0] + w[1]);
        let group: Vec<usize> = (0..cov.len())
            .filter(|&i| (cumulative[i + 1] - u).ceil() - (cumulative[i] - u).ceil() >= 1.0)
            .collect();
        if let Some(&g) = index.get(group.as_slice()) {
            probs[g] += width;
        }
    }
    probs
}

fn pg_norm(domain: &Domain, x: &[f64], g: &[f64]) -> f64 {
    let shifted: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - b).collect();
    let p = domain.project(&shifted);
    x.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

/// Projected gradient with Barzilai–Borwein steps and Armijo backtracking.
/// `f` may return `+inf` outside its domain; the start point must lie
/// inside it.
fn descend(
    domain: &Domain,
    x0: Vec<f64>,
    f: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64]) -> Vec<f64>,
    opts: &SolverOptions,
    budget: usize,
) -> Descent {
    let mut x = x0;
    let mut fx = f(&x);
    let mut g = grad(&x);
    let g_scale = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut step = if g_scale > 0.0 { 1.0 / g_scale } else { 1.0 };
    let mut trace = vec![fx];
    let mut quiet = 0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < budget.min(opts.max_iter) {
        if pg_norm(domain, &x, &g) <= opts.grad_tol {
            converged = true;
            break;
        }
        let mut t = step;
        let accepted = loop {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - t * b).collect();
            let y = domain.project(&trial);
            let fy = f(&y);
            let d: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            if fy.is_finite() && fy <= fx + 1e-4 * dot(&g, &d) {
                break Some((y, fy, d));
            }
            t *= 0.5;
            if t < 1e-30 {
                break None;
            }
        };
        iterations += 1;
        let Some((y, fy, s)) = accepted else {
            // no descent direction left at floating-point resolution
            converged = true;
            break;
        };
        let gy = grad(&y);
        let yv: Vec<f64> = gy.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        step = if sy > 0.0 { (dot(&s, &s) / sy).clamp(1e-20, 1e20) } else { (2.0 * t).min(1e20) };
        let change = fx - fy;
        x = y;
        fx = fy;
        g = gy;
        trace.push(fx);
        if change <= opts.obj_tol * fx.abs().max(1.0) {
            quiet += 1;
            if quiet >= 3 {
                converged = true;
                break;
            }
        } else {
            quiet = 0;
        }
    }
    let pg = pg_norm(domain, &x, &g);
    Descent {
        x,
        iterations,
        converged,
        trace,
        pg_norm: pg,
    }
}

/// Multiplier estimate `Σ_g P_g (−∂f/∂P_g)`, exact at a KKT point.
fn multiplier(x: &[f64], g: &[f64]) -> f64 {
    -dot(x, g)
}

/// Minimizes the unused capacity over an arbitrary group catalog.
pub fn optimal_multi(cs: &ChannelSet, catalog: Arc<GroupCatalog>, m: u32, opts: &SolverOptions) -> Result<SolverReport> {
    check_population(m, 2)?;
    check_dims(cs, &catalog)?;
    let w = cs.idle_rates();
    if w.iter().all(|&x| x <= 0.0) {
        return Ok(infeasible(catalog, 1.0));
    }
    let mf = m as f64;
    let dc = |cov: &[f64]| -> Vec<f64> {
        w.iter()
            .zip(cov)
            .map(|(wi, c)| -mf * wi * (1.0 - c.min(1.0)).powi(m as i32 - 1))
            .collect()
    };
    let domain = Domain::of(&catalog);
    let f = |x: &[f64]| overlooked(&w, &domain.coverage(x), m);
    let grad = |x: &[f64]| domain.pull_back(dc(&domain.coverage(x)));
    let run = descend(&domain, domain.start(), f, grad, opts, usize::MAX);
    let scheme = SensingScheme::new(Arc::clone(&catalog), domain.probabilities(&run.x))?;
    let cov = scheme.coverages();
    Ok(SolverReport {
        objective: overlooked(&w, &cov, m),
        nu: multiplier(scheme.probs(), &catalog.pull_back(&dc(&cov))),
        scheme,
        f0: 1.0,
        kkt_residual: run.pg_norm,
        iterations: run.iterations,
        status: if run.converged {
            SolveStatus::Optimal
        } else {
            SolveStatus::MaxIter
        },
        objective_trace: run.trace,
        max_constraint: f64::NEG_INFINITY,
    })
}

/// Objective of the detection-error program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorObjective {
    /// Sum of the three overlooked-opportunity cases as published:
    /// `(1 − βc)^M + (1 − (1 − β(1 − f⁰))c)^M` per channel.
    Paper,
    /// Probability that no user both senses, detects and accesses an idle
    /// channel: `(1 − βf⁰c)^M`.
    Exact,
}

/// Which collision constraints accompany the convexity constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionBound {
    /// Only `θ_i(1 − c_i + αf⁰)^M ≤ ξ`.
    Restricted,
    /// Additionally bound the probability that any user accesses a busy
    /// channel, `θ_i(1 − (1 − αf⁰c_i)^M) ≤ ξ`.
    RestrictedAndAnyAccess,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorAwareOptions {
    pub objective: ErrorObjective,
    pub collision: CollisionBound,
    pub f_min: f64,
    pub solver: SolverOptions,
    /// Barrier weight is reduced until `μ · (#constraints)` drops below this.
    pub barrier_gap: f64,
}

impl Default for ErrorAwareOptions {
    fn default() -> Self {
        ErrorAwareOptions {
            objective: ErrorObjective::Paper,
            collision: CollisionBound::RestrictedAndAnyAccess,
            f_min: DEFAULT_F_MIN,
            solver: SolverOptions::default(),
            barrier_gap: 1e-10,
        }
    }
}

/// Per-channel objective term and its derivative in the coverage.
fn error_term(mode: ErrorObjective, beta: f64, f0: f64, m: u32, c: f64) -> (f64, f64) {
    let mf = m as f64;
    let c = c.min(1.0);
    let pow = |a: f64| ((1.0 - a * c).powi(m as i32), -mf * a * (1.0 - a * c).powi(m as i32 - 1));
    match mode {
        ErrorObjective::Paper => {
            let (v1, d1) = pow(beta);
            let (v2, d2) = pow(1.0 - beta * (1.0 - f0));
            (v1 + v2, d1 + d2)
        }
        ErrorObjective::Exact => pow(beta * f0),
    }
}

/// Objective of the detection-error program for a given scheme and `f⁰`.
pub fn error_aware_objective(
    cs: &ChannelSet,
    scheme: &SensingScheme,
    m: u32,
    det: &DetectorModel,
    mode: ErrorObjective,
) -> Result<f64> {
    check_population(m, 1)?;
    check_dims(cs, scheme.catalog())?;
    Ok(cs
        .idle_rates()
        .iter()
        .zip(scheme.coverages())
        .map(|(w, c)| w * error_term(mode, det.beta, det.f0, m, c).0)
        .sum())
}

#[derive(Debug, Clone, Copy)]
enum Constraint {
    Convexity { i: usize },
    Restricted { i: usize },
    AnyAccess { i: usize, bound: f64 },
}

struct ErrorProblem<'a> {
    domain: Domain<'a>,
    weights: Vec<f64>,
    thetas: &'a [f64],
    m: u32,
    alpha: f64,
    beta: f64,
    xi: f64,
    mode: ErrorObjective,
    constraints: Vec<Constraint>,
}

impl ErrorProblem<'_> {
    fn objective(&self, cov: &[f64], f0: f64) -> f64 {
        self.weights
            .iter()
            .zip(cov)
            .map(|(w, &c)| w * error_term(self.mode, self.beta, f0, self.m, c).0)
            .sum()
    }

    fn objective_grad(&self, cov: &[f64], f0: f64) -> Vec<f64> {
        self.weights
            .iter()
            .zip(cov)
            .map(|(w, &c)| w * error_term(self.mode, self.beta, f0, self.m, c).1)
            .collect()
    }

    /// Constraint value and derivative in its channel's coverage.
    fn constraint(&self, k: Constraint, cov: &[f64], f0: f64) -> (usize, f64, f64) {
        let mf = self.m as f64;
        let mi = self.m as i32;
        match k {
            Constraint::Convexity { i } => {
                let a = 1.0 - self.beta;
                let c = cov[i].min(1.0);
                let v = (1.0 - a * c).powi(mi) - 2.0 * (mf - 1.0) * a * c;
                let d = -mf * a * (1.0 - a * c).powi(mi - 1) - 2.0 * (mf - 1.0) * a;
                (i, v, d)
            }
            Constraint::Restricted { i } => {
                let base = (1.0 - cov[i].min(1.0) + self.alpha * f0).max(0.0);
                let th = self.thetas[i];
                (i, th * base.powi(mi) - self.xi, -mf * th * base.powi(mi - 1))
            }
            Constraint::AnyAccess { i, bound } => {
                let a = self.alpha * f0;
                (i, a * cov[i].min(1.0) - bound, a)
            }
        }
    }

    fn max_constraint(&self, cov: &[f64], f0: f64) -> f64 {
        self.constraints
            .iter()
            .map(|&k| self.constraint(k, cov, f0).1)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn barrier(&self, x: &[f64], f0: f64, mu: f64) -> f64 {
        let cov = self.domain.coverage(x);
        let mut total = self.objective(&cov, f0);
        for &k in &self.constraints {
            let (_, v, _) = self.constraint(k, &cov, f0);
            if v >= 0.0 {
                return f64::INFINITY;
            }
            total -= mu * (-v).ln();
        }
        total
    }

    /// Barrier gradient with respect to the coverages.
    fn barrier_dc(&self, cov: &[f64], f0: f64, mu: f64) -> Vec<f64> {
        let mut dc = self.objective_grad(cov, f0);
        if mu > 0.0 {
            for &k in &self.constraints {
                let (i, v, d) = self.constraint(k, cov, f0);
                dc[i] += mu * d / -v;
            }
        }
        dc
    }

    fn barrier_grad(&self, x: &[f64], f0: f64, mu: f64) -> Vec<f64> {
        self.domain.pull_back(self.barrier_dc(&self.domain.coverage(x), f0, mu))
    }

    /// Squared-hinge penalty driving every constraint below `-margin`.
    fn phase_one(&self, start: Vec<f64>, f0: f64, opts: &SolverOptions) -> Option<Vec<f64>> {
        let margin = 1e-9;
        let target = 2.0 * margin;
        let pen = |x: &[f64]| {
            let cov = self.domain.coverage(x);
            self.constraints
                .iter()
                .map(|&k| (self.constraint(k, &cov, f0).1 + target).max(0.0).powi(2))
                .sum::<f64>()
        };
        let pen_grad = |x: &[f64]| {
            let cov = self.domain.coverage(x);
            let mut dc = vec![0.0; cov.len()];
            for &k in &self.constraints {
                let (i, v, d) = self.constraint(k, &cov, f0);
                dc[i] += 2.0 * (v + target).max(0.0) * d;
            }
            self.domain.pull_back(dc)
        };
        let strictly = |x: &[f64]| self.max_constraint(&self.domain.coverage(x), f0) < -margin;
        if strictly(&start) {
            return Some(start);
        }
        let tight = SolverOptions {
            grad_tol: 0.0,
            obj_tol: 0.0,
            ..*opts
        };
        let run = descend(&self.domain, start, pen, pen_grad, &tight, 20_000);
        strictly(&run.x).then_some(run.x)
    }
}

struct InnerSolve {
    p: Vec<f64>,
    objective: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
    kkt: f64,
    mu: f64,
}

fn solve_fixed_f0(prob: &ErrorProblem, start: Vec<f64>, f0: f64, opts: &ErrorAwareOptions) -> Option<InnerSolve> {
    let p0 = prob.phase_one(start, f0, &opts.solver)?;
    let count = prob.constraints.len();
    if count == 0 {
        let run = descend(
            &prob.domain,
            p0,
            |x| prob.barrier(x, f0, 0.0),
            |x| prob.barrier_grad(x, f0, 0.0),
            &opts.solver,
            usize::MAX,
        );
        return Some(InnerSolve {
            objective: prob.objective(&prob.domain.coverage(&run.x), f0),
            mu: 0.0,
            p: run.x,
            iterations: run.iterations,
            converged: run.converged,
            trace: run.trace,
            kkt: run.pg_norm,
        });
    }
    let scale = prob.objective(&prob.domain.coverage(&p0), f0).abs().max(1e-3);
    let mut mu = 1e-2 * scale;
    let mut p = p0;
    let mut iterations = 0;
    let mut converged = true;
    let mut trace;
    let mut kkt;
    loop {
        let run = descend(
            &prob.domain,
            p,
            |x| prob.barrier(x, f0, mu),
            |x| prob.barrier_grad(x, f0, mu),
            &opts.solver,
            opts.solver.max_iter.saturating_sub(iterations).max(1),
        );
        iterations += run.iterations;
        converged &= run.converged;
        p = run.x;
        trace = run.trace;
        kkt = run.pg_norm;
        if mu * count as f64 <= opts.barrier_gap * scale || iterations >= opts.solver.max_iter {
            break;
        }
        mu *= 0.1;
    }
    Some(InnerSolve {
        objective: prob.objective(&prob.domain.coverage(&p), f0),
        mu,
        p,
        iterations,
        converged: converged && iterations < opts.solver.max_iter,
        trace,
        kkt,
    })
}

/// Jointly chooses the sensing scheme and the access probability `f⁰`
/// under detection errors, subject to the convexity and collision
/// constraints. For fixed `f⁰` the program is convex in the scheme and is
/// solved with a logarithmic barrier; `f⁰` is then chosen by a grid scan
/// refined with golden-section search. `det.f0` is ignored.
pub fn optimal_with_errors(
    cs: &ChannelSet,
    catalog: Arc<GroupCatalog>,
    m: u32,
    det: &DetectorModel,
    xi: f64,
    opts: &ErrorAwareOptions,
) -> Result<SolverReport> {
    check_population(m, 2)?;
    check_dims(cs, &catalog)?;
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::param("xi", format!("{xi} outside [0, 1]")));
    }
    if !(opts.f_min > 0.0 && opts.f_min <= 1.0) {
        return Err(Error::param("f_min", format!("{} outside (0, 1]", opts.f_min)));
    }
    let weights = cs.idle_rates();
    if weights.iter().all(|&w| w <= 0.0) {
        return Ok(infeasible(catalog, opts.f_min));
    }
    let mf = m as f64;
    let mut constraints = Vec::new();
    for i in 0..cs.n() {
        // the convexity condition is void at β = 1 and for weightless channels
        if det.beta < 1.0 && weights[i] > 0.0 {
            constraints.push(Constraint::Convexity { i });
        }
    }
    let thetas = cs.thetas();
    if xi < 1.0 {
        for (i, &th) in thetas.iter().enumerate() {
            if th > 0.0 {
                constraints.push(Constraint::Restricted { i });
            }
            if opts.collision == CollisionBound::RestrictedAndAnyAccess && det.alpha > 0.0 && th > xi {
                let rate = (-xi / th).ln_1p() / mf;
                constraints.push(Constraint::AnyAccess { i, bound: -rate.exp_m1() });
            }
        }
    }
    let prob = ErrorProblem {
        domain: Domain::of(&catalog),
        weights,
        thetas,
        m,
        alpha: det.alpha,
        beta: det.beta,
        xi,
        mode: opts.objective,
        constraints,
    };

    let uniform = prob.domain.start();
    let mut best: Option<(f64, InnerSolve)> = None;
    let mut total_iterations = 0;
    let mut warm = uniform.clone();
    let mut evaluate = |f0: f64, best: &mut Option<(f64, InnerSolve)>, warm: &mut Vec<f64>| -> f64 {
        match solve_fixed_f0(&prob, warm.clone(), f0, opts).or_else(|| solve_fixed_f0(&prob, uniform.clone(), f0, opts)) {
            Some(sol) => {
                total_iterations += sol.iterations;
                let v = sol.objective;
                *warm = sol.p.clone();
                if best.as_ref().is_none_or(|(_, b)| v < b.objective) {
                    *best = Some((f0, sol));
                }
                v
            }
            None => f64::INFINITY,
        }
    };

    if evaluate(opts.f_min, &mut best, &mut warm).is_infinite() {
        return Ok(infeasible(catalog, opts.f_min));
    }
    let mut grid: Vec<f64> = vec![opts.f_min];
    grid.extend((1..=12).map(|i| opts.f_min.max(1.0) * 0.5f64.powi(12 - i) ).filter(|&f| f > opts.f_min));
    grid.extend((1..=10).map(|i| i as f64 / 10.0).filter(|&f| f > opts.f_min));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let values: Vec<f64> = grid.iter().map(|&f| evaluate(f, &mut best, &mut warm)).collect();
    let (bi, _) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is not empty");
    let (mut a, mut b) = (grid[bi.saturating_sub(1)], grid[(bi + 1).min(grid.len() - 1)]);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut v1 = evaluate(x1, &mut best, &mut warm);
    let mut v2 = evaluate(x2, &mut best, &mut warm);
    while b - a > 1e-7 * b.max(1e-6) {
        if v1 <= v2 {
            b = x2;
            x2 = x1;
            v2 = v1;
            x1 = b - ratio * (b - a);
            v1 = evaluate(x1, &mut best, &mut warm);
        } else {
            a = x1;
            x1 = x2;
            v1 = v2;
            x2 = a + ratio * (b - a);
            v2 = evaluate(x2, &mut best, &mut warm);
        }
    }

    let (f0, sol) = best.expect("feasible at f_min");
    let scheme = SensingScheme::new(Arc::clone(&catalog), prob.domain.probabilities(&sol.p))?;
    let cov = scheme.coverages();
    let group_grad = catalog.pull_back(&prob.barrier_dc(&cov, f0, sol.mu));
    Ok(SolverReport {
        objective: prob.objective(&cov, f0),
        max_constraint: prob.max_constraint(&cov, f0),
        nu: multiplier(scheme.probs(), &group_grad),
        scheme,
        f0,
        kkt_residual: sol.kkt,
        iterations: total_iterations,
        status: if sol.converged {
            SolveStatus::Optimal
        } else {
            SolveStatus::MaxIter
        },
        objective_trace: sol.trace,
    })
}

fn coverage_for(cs: &ChannelSet, scheme: &SensingScheme, m: u32, i: usize) -> Result<f64> {
    check_population(m, 1)?;
    check_dims(cs, scheme.catalog())?;
    scheme.channel_coverage(i)
}

/// Collision probability on channel `i` from the binomial sum over users
/// that miss-detect and access: `θ_i([αf⁰c + (1 − c)]^M − (1 − c)^M)`.
pub fn collision_probability_exact(
    cs: &ChannelSet,
    scheme: &SensingScheme,
    m: u32,
    det: &DetectorModel,
    i: usize,
) -> Result<f64> {
    let c = coverage_for(cs, scheme, m, i)?;
    let mi = m as i32;
    let v = cs.thetas()[i] * ((det.alpha * det.f0 * c + 1.0 - c).powi(mi) - (1.0 - c).powi(mi));
    Ok(v.max(0.0))
}

/// Probability that channel `i` is busy and at least one user accesses it:
/// `θ_i(1 − (1 − αf⁰c)^M)`.
pub fn collision_probability_any_access(
    cs: &ChannelSet,
    scheme: &SensingScheme,
    m: u32,
    det: &DetectorModel,
    i: usize,
) -> Result<f64> {
    let c = coverage_for(cs, scheme, m, i)?;
    Ok(cs.thetas()[i] * -((-det.alpha * det.f0 * c).ln_1p() * m as f64).exp_m1())
}

/// Percentage of the optimal error-free throughput lost by `heuristic`.
/// `None` when the optimal throughput is zero.
pub fn loss_percentage(cs: &ChannelSet, m: u32, heuristic: &SensingScheme, optimal: &SensingScheme) -> Result<Option<f64>> {
    if heuristic.catalog() != optimal.catalog() {
        return Err(Error::Dimension("schemes are defined on different catalogs".into()));
    }
    let best = csma_throughput(cs, optimal, m)?;
    if best <= 0.0 {
        return Ok(None);
    }
    let other = csma_throughput(cs, heuristic, m)?;
    Ok(Some(100.0 * (best - other) / best))
}
