//! Discounted cost functionals.
//!
//! Three evaluations of the infinite-horizon cost live here:
//!
//! * [`continuous_cost_oracle`] integrates the true dynamics with a
//!   classical 4th-order one-step method and accumulates
//!   `integral g(y(t), u(t)) e^(-lambda t) dt` by the trapezoid rule — the
//!   high-accuracy reference.
//! * [`discrete_cost`] evaluates the fully discrete functional
//!   `h * sum_n delta^n I_k g(y_n, u_n)` along the interpolated Euler
//!   recursion `y_{n+1} = y_n + h I_k f(y_n, u_n)`, truncated with the
//!   analytic geometric tail `sup_g * delta^N / lambda`.
//! * [`brute_force_value`] minimizes the truncated discrete cost over every
//!   control sequence of a given length — the independent oracle for the
//!   characterization of the discrete value function as an infimum over
//!   sequences.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::interp::NodalField;
use crate::mesh::SimplicialMesh;
use crate::problem::Problem;

/// A finite control sequence `u_0, ..., u_{N-1}` with step size `h`.
/// Queries past the end repeat the final control.
#[derive(Debug, Clone)]
pub struct ControlSequence {
    controls: Vec<Vec<f64>>,
    h: f64,
}

impl ControlSequence {
    pub fn new(controls: Vec<Vec<f64>>, h: f64) -> Result<Self> {
        if controls.is_empty() {
            return Err(Error::InvalidArgument(
                "control sequence must contain at least one control".into(),
            ));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sequence step must be positive, got {h}"
            )));
        }
        let m = controls[0].len();
        if controls.iter().any(|u| u.len() != m) {
            return Err(Error::InvalidArgument(
                "all controls in a sequence must have the same dimension".into(),
            ));
        }
        Ok(Self { controls, h })
    }

    /// Samples a control path at `t_i = i h`, the construction used when
    /// comparing the discrete functional against the continuous one.
    pub fn sampled<F>(control_fn: F, h: f64, len: usize) -> Result<Self>
    where
        F: Fn(f64) -> Vec<f64>,
    {
        if len == 0 {
            return Err(Error::InvalidArgument(
                "control sequence must contain at least one control".into(),
            ));
        }
        let controls = (0..len).map(|i| control_fn(i as f64 * h)).collect();
        Self::new(controls, h)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    /// Control applied at step `n`; the final control repeats forever.
    pub fn get(&self, n: usize) -> &[f64] {
        &self.controls[n.min(self.controls.len() - 1)]
    }

    pub fn controls(&self) -> &[Vec<f64>] {
        &self.controls
    }
}

/// Discrete states visited by the interpolated Euler recursion.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `y_0, ..., y_N` (one more state than steps).
    pub states: Vec<Vec<f64>>,
    /// Steps that had to be projected back into the box.
    pub clamp_events: usize,
}

/// A cost value together with the analytic bound on what truncation
/// discarded.
#[derive(Debug, Clone, Copy)]
pub struct CostEstimate {
    pub value: f64,
    pub tail_bound: f64,
    /// Number of steps (discrete) or integration steps (continuous).
    pub steps: usize,
}

/// Nodal tabulations of `f(., u)` and `g(., u)` for the controls a rollout
/// actually uses, so the interpolated recursion touches each control's
/// fields once. Keyed by the control's bit pattern; shared across threads.
/// Tabulated (I_k f(., u), I_k g(., u)) for one control.
type FieldPair = Arc<(NodalField, NodalField)>;

pub struct ControlFieldCache<'p> {
    problem: &'p Problem,
    mesh: Arc<SimplicialMesh>,
    map: Mutex<HashMap<Vec<u64>, FieldPair>>,
}

impl<'p> ControlFieldCache<'p> {
    pub fn new(problem: &'p Problem, mesh: &Arc<SimplicialMesh>) -> Self {
        Self {
            problem,
            mesh: Arc::clone(mesh),
            map: Mutex::new(HashMap::new()),
        }
    }

    /// Interpolants (I_k f(., u), I_k g(., u)).
    pub fn fields_for(&self, u: &[f64]) -> Result<FieldPair> {
        let key: Vec<u64> = u.iter().map(|x| x.to_bits()).collect();
        if let Some(hit) = self.map.lock().unwrap().get(&key) {
            return Ok(Arc::clone(hit));
        }
        let n = self.problem.state_dim();
        let f = NodalField::sample(&self.mesh, n, |y, out| {
            self.problem.dynamics_into(y, u, out)
        })?;
        let g = NodalField::sample_scalar(&self.mesh, |y| self.problem.running_cost(y, u))?;
        let entry = Arc::new((f, g));
        self.map
            .lock()
            .unwrap()
            .entry(key)
            .or_insert_with(|| Arc::clone(&entry));
        Ok(entry)
    }
}

fn check_control_admissible(problem: &Problem, u: &[f64]) -> Result<()> {
    if !problem.controls().contains(u) {
        return Err(Error::InvalidArgument(format!(
            "control {u:?} lies outside the admissible box"
        )));
    }
    Ok(())
}

/// Runs the interpolated Euler recursion
/// `y_{n+1} = y_n + h I_k f(y_n, u_n)` for `seq.len()` steps. Out-of-box
/// steps are projected and counted.
pub fn euler_rollout(
    problem: &Problem,
    mesh: &Arc<SimplicialMesh>,
    y0: &[f64],
    seq: &ControlSequence,
) -> Result<Trajectory> {
    if !problem.domain().contains(y0) {
        return Err(Error::OutOfDomain { point: y0.to_vec() });
    }
    let cache = ControlFieldCache::new(problem, mesh);
    let h = seq.h();
    let n = problem.state_dim();
    let mut states = Vec::with_capacity(seq.len() + 1);
    let mut y = y0.to_vec();
    states.push(y.clone());
    let mut clamp_events = 0usize;
    let mut velocity = vec![0.0; n];
    for step in 0..seq.len() {
        let u = seq.get(step);
        check_control_admissible(problem, u)?;
        let fields = cache.fields_for(u)?;
        fields.0.interpolate_into(&y, &mut velocity)?;
        for d in 0..n {
            y[d] += h * velocity[d];
        }
        if problem.domain().clamp_in_place(&mut y) {
            clamp_events += 1;
        }
        states.push(y.clone());
    }
    Ok(Trajectory {
        states,
        clamp_events,
    })
}

/// Smallest horizon N with `sup_g * delta^N / lambda <= tail_tol`.
pub fn horizon_for_tail(sup_g: f64, lambda: f64, h: f64, tail_tol: f64) -> Result<usize> {
    if !(tail_tol.is_finite() && tail_tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tail tolerance must be positive, got {tail_tol}"
        )));
    }
    let delta = 1.0 - lambda * h;
    debug_assert!((0.0..1.0).contains(&delta));
    if sup_g == 0.0 || tail_tol >= sup_g / lambda {
        return Ok(0);
    }
    let needed = ((tail_tol * lambda / sup_g).ln() / delta.ln()).ceil();
    Ok(needed as usize)
}

/// Geometric tail `sup_g * delta^N / lambda` of the truncated series.
pub fn tail_bound(sup_g: f64, lambda: f64, h: f64, steps: usize) -> f64 {
    let delta = 1.0 - lambda * h;
    sup_g * delta.powi(steps as i32) / lambda
}

/// Evaluates the fully discrete cost functional along `seq`, truncated at a
/// horizon whose geometric tail is below `tail_tol` (requires the `sup_g`
/// bound). Sequences shorter than the horizon repeat their last control.
pub fn discrete_cost(
    problem: &Problem,
    mesh: &Arc<SimplicialMesh>,
    y0: &[f64],
    seq: &ControlSequence,
    tail_tol: f64,
) -> Result<CostEstimate> {
    let h = seq.h();
    problem.validate_time_step(h)?;
    if !problem.domain().contains(y0) {
        return Err(Error::OutOfDomain { point: y0.to_vec() });
    }
    let sup_g = problem.sup_g()?;
    let horizon = horizon_for_tail(sup_g, problem.lambda(), h, tail_tol)?.max(seq.len());

    let cache = ControlFieldCache::new(problem, mesh);
    let delta = problem.delta(h);
    let n = problem.state_dim();
    let mut y = y0.to_vec();
    let mut velocity = vec![0.0; n];
    let mut value = 0.0f64;
    let mut discount = 1.0f64;
    for step in 0..horizon {
        let u = seq.get(step);
        check_control_admissible(problem, u)?;
        let fields = cache.fields_for(u)?;
        let stage = fields.1.interpolate_scalar(&y)?;
        value += h * discount * stage;
        fields.0.interpolate_into(&y, &mut velocity)?;
        for d in 0..n {
            y[d] += h * velocity[d];
        }
        problem.domain().clamp_in_place(&mut y);
        discount *= delta;
    }

    Ok(CostEstimate {
        value,
        tail_bound: tail_bound(sup_g, problem.lambda(), h, horizon),
        steps: horizon,
    })
}

/// High-accuracy reference for the continuous reduced cost: 4th-order
/// integration of the true dynamics plus trapezoid accumulation of the
/// discounted running cost on the same grid. The returned tail bound is
/// `sup_g * e^(-lambda T) / lambda`.
pub fn continuous_cost_oracle<F>(
    problem: &Problem,
    y0: &[f64],
    control_fn: F,
    t_end: f64,
    dt: f64,
) -> Result<CostEstimate>
where
    F: Fn(f64) -> Vec<f64>,
{
    if !problem.domain().contains(y0) {
        return Err(Error::OutOfDomain { point: y0.to_vec() });
    }
    if !(t_end.is_finite() && t_end > 0.0 && dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(
            "horizon and step must be positive".into(),
        ));
    }
    let sup_g = problem.sup_g()?;
    let lambda = problem.lambda();
    let steps = (t_end / dt).ceil() as usize;
    let dt = t_end / steps as f64;
    let n = problem.state_dim();

    let eval_u = |t: f64| -> Result<Vec<f64>> {
        let u = control_fn(t);
        check_control_admissible(problem, &u)?;
        Ok(u)
    };

    let mut y = y0.to_vec();
    let mut value = 0.0f64;
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut stage = vec![0.0; n];

    let u0 = eval_u(0.0)?;
    let mut integrand_prev = problem.running_cost(&y, &u0);
    for step in 0..steps {
        let t = step as f64 * dt;
        let u_t = eval_u(t)?;
        let u_mid = eval_u(t + 0.5 * dt)?;
        let u_next = eval_u(t + dt)?;

        problem.dynamics_into(&y, &u_t, &mut k1);
        for d in 0..n {
            stage[d] = y[d] + 0.5 * dt * k1[d];
        }
        problem.dynamics_into(&stage, &u_mid, &mut k2);
        for d in 0..n {
            stage[d] = y[d] + 0.5 * dt * k2[d];
        }
        problem.dynamics_into(&stage, &u_mid, &mut k3);
        for d in 0..n {
            stage[d] = y[d] + dt * k3[d];
        }
        problem.dynamics_into(&stage, &u_next, &mut k4);
        for d in 0..n {
            y[d] += dt / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
        }

        let t_next = t + dt;
        let integrand_next =
            problem.running_cost(&y, &u_next) * (-lambda * t_next).exp();
        value += 0.5 * dt * (integrand_prev + integrand_next);
        integrand_prev = integrand_next;
    }

    Ok(CostEstimate {
        value,
        tail_bound: sup_g * (-lambda * t_end).exp() / lambda,
        steps,
    })
}

/// Result of the exhaustive sequence search.
#[derive(Debug, Clone)]
pub struct BruteForceResult {
    /// Minimum truncated discrete cost over all enumerated sequences.
    pub value: f64,
    /// `sup_g * delta^N / lambda`; the minimum over infinite sequences lies
    /// within this bound of `value`.
    pub tail_bound: f64,
    /// Number of sequences enumerated (`|U|^N`).
    pub sequences: u128,
    /// Control indices of the (lexicographically first) minimizer.
    pub best_controls: Vec<usize>,
}

const ENUMERATION_GUARD: u128 = 10_000_000;

/// Minimizes the truncated discrete cost over every control sequence of
/// length `n_steps` drawn from the sampled control set.
///
/// Enumeration is refused beyond 10^7 sequences, and the horizon must be
/// long enough that the geometric tail stays below `tail_tol`. Workers
/// split the search at the first step; the min-reduction is exact, with
/// ties resolved toward the lexicographically first sequence.
pub fn brute_force_value(
    problem: &Problem,
    mesh: &Arc<SimplicialMesh>,
    h: f64,
    y0: &[f64],
    n_steps: usize,
    tail_tol: f64,
) -> Result<BruteForceResult> {
    problem.validate_time_step(h)?;
    if !problem.domain().contains(y0) {
        return Err(Error::OutOfDomain { point: y0.to_vec() });
    }
    if n_steps == 0 {
        return Err(Error::InvalidArgument(
            "sequence length must be at least 1".into(),
        ));
    }
    let nu = problem.controls().len() as u128;
    let sequences = nu
        .checked_pow(n_steps as u32)
        .ok_or(Error::EnumerationGuard { sequences: u128::MAX })?;
    if sequences > ENUMERATION_GUARD {
        return Err(Error::EnumerationGuard { sequences });
    }
    let sup_g = problem.sup_g()?;
    let tail = tail_bound(sup_g, problem.lambda(), h, n_steps);
    if tail > tail_tol {
        return Err(Error::TailExceedsTolerance {
            tail,
            tolerance: tail_tol,
            needed: horizon_for_tail(sup_g, problem.lambda(), h, tail_tol)?,
        });
    }

    // Tabulate I_k f and I_k g once per control.
    let cache = ControlFieldCache::new(problem, mesh);
    let fields: Vec<FieldPair> = problem
        .controls()
        .samples()
        .map(|u| cache.fields_for(u))
        .collect::<Result<_>>()?;

    let delta = problem.delta(h);
    let n = problem.state_dim();

    struct Search<'a> {
        fields: &'a [FieldPair],
        domain: &'a crate::mesh::BoxDomain,
        h: f64,
        delta: f64,
        n: usize,
        n_steps: usize,
    }

    struct Best {
        value: f64,
        controls: Vec<usize>,
    }

    impl Search<'_> {
        fn run(
            &self,
            depth: usize,
            y: &[f64],
            acc: f64,
            discount: f64,
            path: &mut Vec<usize>,
            best: &mut Best,
        ) -> Result<()> {
            if depth == self.n_steps {
                // Strict comparison keeps the lexicographically first
                // minimizer (depth-first order is lexicographic).
                if acc < best.value {
                    best.value = acc;
                    best.controls = path.clone();
                }
                return Ok(());
            }
            let mut foot = vec![0.0; self.n];
            let mut velocity = vec![0.0; self.n];
            for (c, fields) in self.fields.iter().enumerate() {
                let stage = fields.1.interpolate_scalar(y)?;
                fields.0.interpolate_into(y, &mut velocity)?;
                for d in 0..self.n {
                    foot[d] = y[d] + self.h * velocity[d];
                }
                self.domain.clamp_in_place(&mut foot);
                path.push(c);
                self.run(
                    depth + 1,
                    &foot,
                    acc + self.h * discount * stage,
                    discount * self.delta,
                    path,
                    best,
                )?;
                path.pop();
            }
            Ok(())
        }
    }

    let search = Search {
        fields: &fields,
        domain: problem.domain(),
        h,
        delta,
        n,
        n_steps,
    };

    // Parallelize over the first control choice; combine in index order so
    // ties still resolve to the lexicographically first sequence.
    let branches: Vec<Result<Best>> = (0..fields.len())
        .into_par_iter()
        .map(|c| {
            let mut best = Best {
                value: f64::INFINITY,
                controls: Vec::new(),
            };
            let mut path = vec![c];
            let stage = fields[c].1.interpolate_scalar(y0)?;
            let mut velocity = vec![0.0; n];
            fields[c].0.interpolate_into(y0, &mut velocity)?;
            let mut foot = vec![0.0; n];
            for d in 0..n {
                foot[d] = y0[d] + h * velocity[d];
            }
            problem.domain().clamp_in_place(&mut foot);
            search.run(1, &foot, h * stage, delta, &mut path, &mut best)?;
            Ok(best)
        })
        .collect();

    let mut best = Best {
        value: f64::INFINITY,
        controls: Vec::new(),
    };
    for branch in branches {
        let branch = branch?;
        if branch.value < best.value {
            best = branch;
        }
    }

    Ok(BruteForceResult {
        value: best.value,
        tail_bound: tail,
        sequences,
        best_controls: best.controls,
    })
}
