//! Feedback control synthesis from a solved value function.
//!
//! The greedy policy at a point `y` picks the sampled control minimizing
//! `(1 - lambda h) I_k v(y + h f(y, u)) + h g(y, u)` — the same minimand the
//! Bellman operator uses at vertices, evaluated with the true dynamics and
//! cost. Closed-loop trajectories advance with the interpolated dynamics,
//! so their realized cost is exactly the discrete cost functional of the
//! greedy control sequence.

use crate::cost::{tail_bound, ControlFieldCache, Trajectory};
use crate::error::{Error, Result};
use crate::problem::Problem;
use crate::solver::ValueFunction;

/// A closed-loop rollout: states, applied controls, and the truncated
/// discounted cost with its geometric tail bound.
#[derive(Debug, Clone)]
pub struct ClosedLoopRun {
    pub trajectory: Trajectory,
    pub controls: Vec<Vec<f64>>,
    pub control_indices: Vec<usize>,
    /// Discounted stage costs `h delta^n I_k g(y_n, u_n)`; they sum to the
    /// realized cost.
    pub stage_costs: Vec<f64>,
    pub realized_cost: f64,
    pub tail_bound: f64,
}

fn check_compatible(v: &ValueFunction, problem: &Problem) -> Result<()> {
    if v.mesh().domain() != problem.domain() {
        return Err(Error::InvalidArgument(
            "value function was solved on a different domain".into(),
        ));
    }
    Ok(())
}

/// Index of the greedy control at `y` (ties go to the lowest index).
pub fn greedy_control_index(
    v: &ValueFunction,
    problem: &Problem,
    y: &[f64],
) -> Result<usize> {
    check_compatible(v, problem)?;
    if !problem.domain().contains(y) {
        return Err(Error::OutOfDomain { point: y.to_vec() });
    }
    let h = v.h();
    let delta = problem.delta(h);
    let n = problem.state_dim();
    let mut velocity = vec![0.0; n];
    let mut foot = vec![0.0; n];
    let mut best = f64::INFINITY;
    let mut best_index = 0usize;
    for (c, u) in problem.controls().samples().enumerate() {
        problem.dynamics_into(y, u, &mut velocity);
        for d in 0..n {
            foot[d] = y[d] + h * velocity[d];
        }
        problem.domain().clamp_in_place(&mut foot);
        let continuation = v.field().interpolate_scalar(&foot)?;
        let candidate = delta * continuation + h * problem.running_cost(y, u);
        if candidate < best {
            best = candidate;
            best_index = c;
        }
    }
    Ok(best_index)
}

/// The greedy control itself.
pub fn greedy_control(v: &ValueFunction, problem: &Problem, y: &[f64]) -> Result<Vec<f64>> {
    let index = greedy_control_index(v, problem, y)?;
    Ok(problem.controls().sample(index).to_vec())
}

/// Rolls the greedy policy forward for `steps` steps of the interpolated
/// Euler recursion, accumulating `h * sum delta^n I_k g(y_n, u_n)`.
///
/// The realized cost of the generated sequence can undershoot the solved
/// value at the start point by no more than tail + solver tolerance (the
/// value function is the infimum over sequences); requires the `sup_g`
/// bound for the tail.
pub fn synthesize_trajectory(
    v: &ValueFunction,
    problem: &Problem,
    y0: &[f64],
    steps: usize,
) -> Result<ClosedLoopRun> {
    check_compatible(v, problem)?;
    if steps == 0 {
        return Err(Error::InvalidArgument(
            "rollout needs at least one step".into(),
        ));
    }
    if !problem.domain().contains(y0) {
        return Err(Error::OutOfDomain { point: y0.to_vec() });
    }
    let sup_g = problem.sup_g()?;
    let h = v.h();
    let delta = problem.delta(h);
    let n = problem.state_dim();
    let mesh = v.mesh();
    let cache = ControlFieldCache::new(problem, mesh);

    let mut states = Vec::with_capacity(steps + 1);
    let mut controls = Vec::with_capacity(steps);
    let mut control_indices = Vec::with_capacity(steps);
    let mut stage_costs = Vec::with_capacity(steps);
    let mut y = y0.to_vec();
    states.push(y.clone());
    let mut clamp_events = 0usize;
    let mut velocity = vec![0.0; n];
    let mut realized = 0.0f64;
    let mut discount = 1.0f64;

    for _ in 0..steps {
        let c = greedy_control_index(v, problem, &y)?;
        let u = problem.controls().sample(c).to_vec();
        let fields = cache.fields_for(&u)?;
        let stage = h * discount * fields.1.interpolate_scalar(&y)?;
        realized += stage;
        fields.0.interpolate_into(&y, &mut velocity)?;
        for d in 0..n {
            y[d] += h * velocity[d];
        }
        if problem.domain().clamp_in_place(&mut y) {
            clamp_events += 1;
        }
        states.push(y.clone());
        controls.push(u);
        control_indices.push(c);
        stage_costs.push(stage);
        discount *= delta;
    }

    Ok(ClosedLoopRun {
        trajectory: Trajectory {
            states,
            clamp_events,
        },
        controls,
        control_indices,
        stage_costs,
        realized_cost: realized,
        tail_bound: tail_bound(sup_g, problem.lambda(), h, steps),
    })
}
