//! Control problem definitions.
//!
//! A [`Problem`] bundles dynamics `f(y, u)`, running cost `g(y, u)`, the
//! discount rate `lambda`, the box domain and a sampled control set. All
//! closed-form pieces are [`Expression`]s, so manufactured benchmarks with
//! an exactly known value function can be generated symbolically: picking a
//! smooth `v*` and setting
//!
//! ```text
//! g(y, u) = lambda * v*(y) - f(y, u) . grad v*(y)
//! ```
//!
//! makes every admissible control optimal and `v*` the exact value function
//! of the continuous problem, which is what refinement studies measure
//! against.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::{Expression, Var};
use crate::mesh::{BoxDomain, SimplicialMesh};

/// A shareable closed-form value function.
pub type ExactFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Finite sample of a compact box of admissible controls.
#[derive(Debug, Clone)]
pub struct ControlSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
    counts: Vec<usize>,
    samples: Vec<Vec<f64>>,
}

impl ControlSet {
    /// Tensor grid over `[lower, upper]` with `counts[d]` samples per
    /// dimension, endpoints included; a single sample sits at the midpoint.
    pub fn tensor(lower: &[f64], upper: &[f64], counts: &[usize]) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() || lower.len() != counts.len() {
            return Err(Error::InvalidArgument(
                "control bounds and counts must be nonempty and of equal length".into(),
            ));
        }
        for d in 0..lower.len() {
            if !lower[d].is_finite() || !upper[d].is_finite() || lower[d] > upper[d] {
                return Err(Error::InvalidArgument(format!(
                    "invalid control bounds [{}, {}] in dimension {d}",
                    lower[d], upper[d]
                )));
            }
            if counts[d] == 0 {
                return Err(Error::InvalidArgument(format!(
                    "control sample count must be at least 1 (dimension {d})"
                )));
            }
        }

        let axes: Vec<Vec<f64>> = (0..lower.len())
            .map(|d| {
                if counts[d] == 1 {
                    vec![0.5 * (lower[d] + upper[d])]
                } else {
                    (0..counts[d])
                        .map(|i| {
                            if i + 1 == counts[d] {
                                upper[d]
                            } else {
                                lower[d]
                                    + (upper[d] - lower[d]) * i as f64
                                        / (counts[d] - 1) as f64
                            }
                        })
                        .collect()
                }
            })
            .collect();

        let total: usize = counts.iter().product();
        let mut samples = Vec::with_capacity(total);
        let mut idx = vec![0usize; lower.len()];
        for _ in 0..total {
            samples.push(idx.iter().enumerate().map(|(d, &i)| axes[d][i]).collect());
            for d in (0..lower.len()).rev() {
                idx[d] += 1;
                if idx[d] < counts[d] {
                    break;
                }
                idx[d] = 0;
            }
        }

        Ok(Self {
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            counts: counts.to_vec(),
            samples,
        })
    }

    /// Control dimension m.
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i]
    }

    pub fn samples(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.iter().map(|s| s.as_slice())
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Membership in the underlying compact box (not just the sample grid).
    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() == self.dim()
            && u.iter()
                .zip(&self.lower)
                .zip(&self.upper)
                .all(|((&x, &lo), &hi)| x >= lo && x <= hi)
    }
}

/// Optional problem constants: Lipschitz constants and sup bounds of the
/// data, plus the Lipschitz constant of admissible control paths. Supplied
/// by the user or estimated by [`validate_problem`]; truncation tail bounds
/// require `sup_g`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ProblemBounds {
    pub lip_f: Option<f64>,
    pub lip_g: Option<f64>,
    pub sup_f: Option<f64>,
    pub sup_g: Option<f64>,
    pub lip_u: Option<f64>,
}

/// An infinite-horizon discounted control problem on a box domain.
///
/// Immutable after construction; evaluation of `f` and `g` is reentrant.
#[derive(Debug, Clone)]
pub struct Problem {
    state_dim: usize,
    control_dim: usize,
    dynamics: Vec<Expression>,
    running_cost: Expression,
    lambda: f64,
    domain: BoxDomain,
    controls: ControlSet,
    bounds: ProblemBounds,
}

impl Problem {
    pub fn new(
        dynamics: Vec<Expression>,
        running_cost: Expression,
        lambda: f64,
        domain: BoxDomain,
        controls: ControlSet,
    ) -> Result<Self> {
        let n = domain.dim();
        let m = controls.dim();
        if dynamics.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: dynamics.len(),
            });
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        for (j, f) in dynamics.iter().enumerate() {
            if f.state_dim() > n || f.control_dim() > m {
                return Err(Error::InvalidArgument(format!(
                    "dynamics component {} uses variables beyond y1..y{n}, u1..u{m}",
                    j + 1
                )));
            }
        }
        if running_cost.state_dim() > n || running_cost.control_dim() > m {
            return Err(Error::InvalidArgument(format!(
                "running cost uses variables beyond y1..y{n}, u1..u{m}"
            )));
        }

        let problem = Self {
            state_dim: n,
            control_dim: m,
            dynamics,
            running_cost,
            lambda,
            domain,
            controls,
            bounds: ProblemBounds::default(),
        };
        problem.check_finite_on_samples()?;
        Ok(problem)
    }

    /// Attaches known constants (see [`ProblemBounds`]).
    pub fn with_bounds(mut self, bounds: ProblemBounds) -> Self {
        self.bounds = bounds;
        self
    }

    /// Spot-checks that f and g are finite on the domain corners, the
    /// midpoint and a few interior points, across all sampled controls.
    fn check_finite_on_samples(&self) -> Result<()> {
        let n = self.state_dim;
        let mut points: Vec<Vec<f64>> = Vec::new();
        let mid: Vec<f64> = (0..n)
            .map(|d| 0.5 * (self.domain.lower()[d] + self.domain.upper()[d]))
            .collect();
        points.push(mid);
        if n <= 12 {
            for mask in 0..(1usize << n) {
                points.push(
                    (0..n)
                        .map(|d| {
                            if mask >> d & 1 == 1 {
                                self.domain.upper()[d]
                            } else {
                                self.domain.lower()[d]
                            }
                        })
                        .collect(),
                );
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..8 {
            points.push(
                (0..n)
                    .map(|d| rng.gen_range(self.domain.lower()[d]..=self.domain.upper()[d]))
                    .collect(),
            );
        }

        let mut fbuf = vec![0.0; n];
        for y in &points {
            for u in self.controls.samples() {
                self.dynamics_into(y, u, &mut fbuf);
                let g = self.running_cost.eval(y, u);
                if fbuf.iter().any(|v| !v.is_finite()) || !g.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "dynamics or cost non-finite at y={y:?}, u={u:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn controls(&self) -> &ControlSet {
        &self.controls
    }

    pub fn bounds(&self) -> &ProblemBounds {
        &self.bounds
    }

    pub fn dynamics_exprs(&self) -> &[Expression] {
        &self.dynamics
    }

    pub fn running_cost_expr(&self) -> &Expression {
        &self.running_cost
    }

    /// Evaluates the state velocity f(y, u) into `out`.
    pub fn dynamics_into(&self, y: &[f64], u: &[f64], out: &mut [f64]) {
        for (o, f) in out.iter_mut().zip(&self.dynamics) {
            *o = f.eval(y, u);
        }
    }

    pub fn dynamics(&self, y: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim];
        self.dynamics_into(y, u, &mut out);
        out
    }

    /// Evaluates the running cost g(y, u).
    pub fn running_cost(&self, y: &[f64], u: &[f64]) -> f64 {
        self.running_cost.eval(y, u)
    }

    /// One-step discount factor `1 - lambda * h`.
    pub fn delta(&self, h: f64) -> f64 {
        1.0 - self.lambda * h
    }

    /// The scheme requires `0 < h < 1/lambda`.
    pub fn validate_time_step(&self, h: f64) -> Result<()> {
        if !(h.is_finite() && h > 0.0 && h < 1.0 / self.lambda) {
            return Err(Error::InvalidTimeStep {
                h,
                lambda: self.lambda,
            });
        }
        Ok(())
    }

    /// `sup_g`, required by truncation tail bounds.
    pub fn sup_g(&self) -> Result<f64> {
        self.bounds
            .sup_g
            .ok_or(Error::MissingBound { name: "sup_g" })
    }
}

/// A problem whose exact value function is known in closed form.
#[derive(Debug, Clone)]
pub struct ManufacturedProblem {
    problem: Problem,
    vstar: Expression,
    gradient: Vec<Expression>,
}

impl ManufacturedProblem {
    /// Builds the problem with running cost
    /// `g = lambda * v* - f . grad v*`, which makes `v*` the exact value
    /// function (the quantity inside the Hamiltonian minimum is independent
    /// of the control, so every control is optimal).
    pub fn new(
        vstar: Expression,
        dynamics: Vec<Expression>,
        lambda: f64,
        domain: BoxDomain,
        controls: ControlSet,
    ) -> Result<Self> {
        let n = domain.dim();
        if vstar.control_dim() > 0 {
            return Err(Error::InvalidArgument(
                "the exact value function must depend on state variables only".into(),
            ));
        }
        if vstar.state_dim() > n {
            return Err(Error::InvalidArgument(format!(
                "the exact value function uses variables beyond y1..y{n}"
            )));
        }
        let gradient: Vec<Expression> = (0..n)
            .map(|d| vstar.differentiate(Var::State(d)))
            .collect::<Result<_>>()?;

        let mut g = Expression::constant(lambda) * vstar.clone();
        for (f_j, dv_j) in dynamics.iter().zip(&gradient) {
            g = g - f_j.clone() * dv_j.clone();
        }
        let g = g.simplify();

        let problem = Problem::new(dynamics, g, lambda, domain, controls)?;
        Ok(Self {
            problem,
            vstar,
            gradient,
        })
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn into_problem(self) -> Problem {
        self.problem
    }

    /// Attaches known constants to the underlying problem.
    pub fn with_bounds(mut self, bounds: ProblemBounds) -> Self {
        self.problem = self.problem.with_bounds(bounds);
        self
    }

    pub fn vstar(&self) -> &Expression {
        &self.vstar
    }

    pub fn exact_value(&self, y: &[f64]) -> f64 {
        self.vstar.eval(y, &[])
    }

    /// The exact value function as a shareable closure (for study
    /// references).
    pub fn exact_value_fn(&self) -> ExactFn {
        let vstar = self.vstar.clone();
        Arc::new(move |y| vstar.eval(y, &[]))
    }

    /// `lambda v*(y) - f(y,u) . grad v*(y) - g(y,u)`; zero up to rounding by
    /// construction, for every control.
    pub fn hjb_residual(&self, y: &[f64], u: &[f64]) -> f64 {
        let lambda_v = self.problem.lambda() * self.vstar.eval(y, &[]);
        let advection: f64 = self
            .problem
            .dynamics
            .iter()
            .zip(&self.gradient)
            .map(|(f, dv)| f.eval(y, u) * dv.eval(y, &[]))
            .sum();
        lambda_v - advection - self.problem.running_cost(y, u)
    }
}

/// Report of [`validate_problem`]: data bounds over the sampled grid, the
/// worst violation of the one-step invariance condition
/// `y + h f(y,u)` in the domain, and Lipschitz estimates from random pairs.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    /// max over (vertex, control) of `max_i |f_i(y, u)|`.
    pub sup_f_inf: f64,
    /// max over (vertex, control) of `|g(y, u)|`.
    pub sup_g_abs: f64,
    /// Number of (vertex, control) pairs whose Euler foot leaves the box.
    pub invariance_violations: usize,
    /// Largest distance (inf norm) an offending foot pokes out of the box.
    pub worst_violation: f64,
    /// Lipschitz-in-state estimate of f from random point pairs.
    pub lip_f_est: f64,
    /// Lipschitz-in-state estimate of g from random point pairs.
    pub lip_g_est: f64,
    pub pairs_sampled: usize,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "sup |f|_inf over grid: {:.6e}", self.sup_f_inf)?;
        writeln!(f, "sup |g| over grid:     {:.6e}", self.sup_g_abs)?;
        writeln!(
            f,
            "invariance violations: {} (worst excursion {:.3e})",
            self.invariance_violations, self.worst_violation
        )?;
        writeln!(
            f,
            "Lipschitz estimates ({} random pairs): L_f ~ {:.6e}, L_g ~ {:.6e}",
            self.pairs_sampled, self.lip_f_est, self.lip_g_est
        )
    }
}

/// Checks the standing assumptions over all (vertex, control) pairs of a
/// mesh and estimates Lipschitz constants. Report-only: violations are
/// counted, never fatal.
pub fn validate_problem(
    problem: &Problem,
    mesh: &SimplicialMesh,
    h: f64,
    seed: u64,
) -> ValidationReport {
    let n = problem.state_dim();
    let domain = problem.domain();
    let mut sup_f_inf = 0.0f64;
    let mut sup_g_abs = 0.0f64;
    let mut violations = 0usize;
    let mut worst = 0.0f64;
    let mut fbuf = vec![0.0; n];

    for v in 0..mesh.n_vertices() {
        let y = mesh.vertex(v);
        for u in problem.controls().samples() {
            problem.dynamics_into(y, u, &mut fbuf);
            sup_f_inf = sup_f_inf.max(fbuf.iter().fold(0.0f64, |m, x| m.max(x.abs())));
            sup_g_abs = sup_g_abs.max(problem.running_cost(y, u).abs());

            let mut excursion = 0.0f64;
            for d in 0..n {
                let foot = y[d] + h * fbuf[d];
                if foot < domain.lower()[d] {
                    excursion = excursion.max(domain.lower()[d] - foot);
                } else if foot > domain.upper()[d] {
                    excursion = excursion.max(foot - domain.upper()[d]);
                }
            }
            if excursion > 0.0 {
                violations += 1;
                worst = worst.max(excursion);
            }
        }
    }

    const PAIRS: usize = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lip_f = 0.0f64;
    let mut lip_g = 0.0f64;
    let mut fa = vec![0.0; n];
    let mut fb = vec![0.0; n];
    for _ in 0..PAIRS {
        let a: Vec<f64> = (0..n)
            .map(|d| rng.gen_range(domain.lower()[d]..=domain.upper()[d]))
            .collect();
        let b: Vec<f64> = (0..n)
            .map(|d| rng.gen_range(domain.lower()[d]..=domain.upper()[d]))
            .collect();
        let dist: f64 = a
            .iter()
            .zip(&b)
            .map(|(x, z)| (x - z) * (x - z))
            .sum::<f64>()
            .sqrt();
        if dist < 1e-12 {
            continue;
        }
        let ci = rng.gen_range(0..problem.controls().len());
        let u = problem.controls().sample(ci);
        problem.dynamics_into(&a, u, &mut fa);
        problem.dynamics_into(&b, u, &mut fb);
        let df: f64 = fa
            .iter()
            .zip(&fb)
            .map(|(x, z)| (x - z) * (x - z))
            .sum::<f64>()
            .sqrt();
        lip_f = lip_f.max(df / dist);
        let dg = (problem.running_cost(&a, u) - problem.running_cost(&b, u)).abs();
        lip_g = lip_g.max(dg / dist);
    }

    ValidationReport {
        sup_f_inf,
        sup_g_abs,
        invariance_violations: violations,
        worst_violation: worst,
        lip_f_est: lip_f,
        lip_g_est: lip_g,
        pairs_sampled: PAIRS,
    }
}

/// Compiled-in benchmark problems, selected by name.
pub mod benchmarks {
    use super::*;

    pub const NAMES: &[&str] = &["manufactured_1d", "manufactured_2d"];

    /// `v*(y) = y^2` on `[-1, 1]` with `f = u (1 - y^2)`, `U = [-1, 1]`,
    /// `lambda = 1`. The box is invariant under `y + h f(y, u)` for
    /// `h <= 1/2`.
    pub fn manufactured_1d(control_counts: &[usize]) -> Result<ManufacturedProblem> {
        let domain = BoxDomain::new(vec![-1.0], vec![1.0])?;
        let controls = ControlSet::tensor(&[-1.0], &[1.0], control_counts)?;
        let vstar = Expression::parse("y1^2")?;
        let dynamics = vec![Expression::parse("u1*(1-y1^2)")?];
        // Analytic constants: |f'| <= 2, |f| <= 1, |g_y| <= 6,
        // |g| <= 1 + 4/(3 sqrt 3).
        let m_g = 1.0 + 4.0 / (3.0 * 3.0f64.sqrt());
        ManufacturedProblem::new(vstar, dynamics, 1.0, domain, controls).map(|p| {
            p.with_bounds(ProblemBounds {
                lip_f: Some(2.0),
                lip_g: Some(6.0),
                sup_f: Some(1.0),
                sup_g: Some(m_g),
                lip_u: None,
            })
        })
    }

    /// `v*(y) = y1^2 + y2^2` on `[-1, 1]^2` with decoupled dynamics
    /// `f_j = u_j (1 - y_j^2)`, `U = [-1, 1]^2`, `lambda = 1`.
    pub fn manufactured_2d(control_counts: &[usize]) -> Result<ManufacturedProblem> {
        let domain = BoxDomain::new(vec![-1.0, -1.0], vec![1.0, 1.0])?;
        let controls = ControlSet::tensor(&[-1.0, -1.0], &[1.0, 1.0], control_counts)?;
        let vstar = Expression::parse("y1^2 + y2^2")?;
        let dynamics = vec![
            Expression::parse("u1*(1-y1^2)")?,
            Expression::parse("u2*(1-y2^2)")?,
        ];
        let m_g_1d = 1.0 + 4.0 / (3.0 * 3.0f64.sqrt());
        ManufacturedProblem::new(vstar, dynamics, 1.0, domain, controls).map(|p| {
            p.with_bounds(ProblemBounds {
                lip_f: Some(2.0),
                lip_g: Some(6.0 * 2.0f64.sqrt()),
                sup_f: Some(1.0),
                sup_g: Some(2.0 * m_g_1d),
                lip_u: None,
            })
        })
    }

    /// Looks a benchmark up by name. `control_counts` defaults to 21
    /// samples per control dimension.
    pub fn by_name(
        name: &str,
        control_counts: Option<&[usize]>,
    ) -> Result<ManufacturedProblem> {
        match name {
            "manufactured_1d" => manufactured_1d(control_counts.unwrap_or(&[21])),
            "manufactured_2d" => manufactured_2d(control_counts.unwrap_or(&[21, 21])),
            _ => Err(Error::InvalidArgument(format!(
                "unknown benchmark '{name}' (available: {})",
                NAMES.join(", ")
            ))),
        }
    }
}
