//! The discrete Bellman operator and its fixed point.
//!
//! At every mesh vertex `y_i` the operator evaluates
//!
//! ```text
//! (T v)(y_i) = min_u { (1 - lambda h) * I_k v(y_i + h f(y_i, u)) + h g(y_i, u) }
//! ```
//!
//! with `I_k` the piecewise affine interpolant. Foot points and stage costs
//! do not change between sweeps, so the operator pre-locates all
//! `y_i + h f(y_i, u)` once; each sweep is then a pure gather-and-minimize
//! per vertex. T is a `(1 - lambda h)`-contraction in the sup norm, so
//! plain fixed-point iteration converges to the unique discrete value
//! function from any initial guess.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::interp::NodalField;
use crate::mesh::SimplicialMesh;
use crate::problem::Problem;

/// What to do when a foot point `y_i + h f(y_i, u)` leaves the closed box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutOfDomainPolicy {
    /// Project onto the box and count the event. The benchmark problems
    /// satisfy the invariance condition, but rounding can land feet
    /// marginally outside.
    #[default]
    Clamp,
    /// Fail, naming the offending vertex and control.
    Reject,
}

/// Starting point of the fixed-point iteration; any bounded guess converges.
#[derive(Debug, Clone, Default)]
pub enum InitialGuess {
    #[default]
    Zeros,
    Constant(f64),
    Field(NodalField),
}

/// Solver configuration.
///
/// `tolerance` bounds the sup-norm distance to the exact discrete fixed
/// point, not the update size: iteration stops once the update falls below
/// `tolerance * (1 - delta) / delta`, which by the contraction estimate
/// guarantees the stated accuracy.
#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub policy: OutOfDomainPolicy,
    pub initial: InitialGuess,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 200_000,
            policy: OutOfDomainPolicy::Clamp,
            initial: InitialGuess::Zeros,
        }
    }
}

impl SolveConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// The solved discrete value function together with its solve diagnostics.
#[derive(Debug, Clone)]
pub struct ValueFunction {
    field: NodalField,
    h: f64,
    lambda: f64,
    residual: f64,
    iterations: usize,
    clamp_events: usize,
}

impl ValueFunction {
    pub fn field(&self) -> &NodalField {
        &self.field
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Sup norm of the last fixed-point update.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Number of (vertex, control) feet that were projected back into the
    /// box while assembling the operator.
    pub fn clamp_events(&self) -> usize {
        self.clamp_events
    }

    pub fn mesh(&self) -> &Arc<SimplicialMesh> {
        self.field.mesh()
    }

    /// Nodal value at vertex `i`.
    pub fn value(&self, i: usize) -> f64 {
        self.field.scalar(i)
    }

    /// Interpolated value anywhere in the domain.
    pub fn interpolate(&self, point: &[f64]) -> Result<f64> {
        self.field.interpolate_scalar(point)
    }
}

/// One sweep of the Bellman operator: updated values plus the index of the
/// minimizing control per vertex (ties go to the lowest index).
#[derive(Debug, Clone)]
pub struct BellmanSweep {
    pub values: NodalField,
    pub argmin: Vec<usize>,
}

/// The Bellman operator with pre-located foot points and stage costs.
///
/// Construction walks all (vertex, control) pairs once; `apply` is then
/// embarrassingly parallel over vertices and bit-deterministic regardless
/// of worker count (each vertex minimizes over controls sequentially).
#[derive(Debug, Clone)]
pub struct BellmanOperator {
    mesh: Arc<SimplicialMesh>,
    h: f64,
    lambda: f64,
    delta: f64,
    n_controls: usize,
    /// Simplex of the foot of (vertex, control), vertex-major.
    foot_simplex: Vec<usize>,
    /// Barycentric coordinates of the feet, stride dim+1.
    foot_coords: Vec<f64>,
    /// `h * g(y_i, u_c)`, vertex-major.
    stage_cost: Vec<f64>,
    clamp_events: usize,
}

impl BellmanOperator {
    pub fn new(
        problem: &Problem,
        mesh: &Arc<SimplicialMesh>,
        h: f64,
        policy: OutOfDomainPolicy,
    ) -> Result<Self> {
        problem.validate_time_step(h)?;
        if problem.domain() != mesh.domain() {
            return Err(Error::InvalidArgument(
                "mesh domain does not match the problem domain".into(),
            ));
        }
        let n = mesh.dim();
        let nu = problem.controls().len();
        let stride = n + 1;

        struct VertexPrep {
            simplices: Vec<usize>,
            coords: Vec<f64>,
            stage: Vec<f64>,
            clamps: usize,
        }

        let prep: Vec<Result<VertexPrep>> = (0..mesh.n_vertices())
            .into_par_iter()
            .map(|i| {
                let y = mesh.vertex(i);
                let mut simplices = vec![0usize; nu];
                let mut coords = vec![0.0f64; nu * stride];
                let mut stage = vec![0.0f64; nu];
                let mut clamps = 0usize;
                let mut foot = vec![0.0f64; n];
                let mut velocity = vec![0.0f64; n];
                for (c, u) in problem.controls().samples().enumerate() {
                    problem.dynamics_into(y, u, &mut velocity);
                    for d in 0..n {
                        foot[d] = y[d] + h * velocity[d];
                    }
                    if !problem.domain().contains(&foot) {
                        match policy {
                            OutOfDomainPolicy::Reject => {
                                return Err(Error::FootOutsideDomain {
                                    vertex: i,
                                    control: c,
                                    foot: foot.clone(),
                                });
                            }
                            OutOfDomainPolicy::Clamp => {
                                problem.domain().clamp_in_place(&mut foot);
                                clamps += 1;
                            }
                        }
                    }
                    simplices[c] = mesh
                        .locate_into(&foot, &mut coords[c * stride..(c + 1) * stride])?;
                    let g = problem.running_cost(y, u);
                    if !g.is_finite() {
                        return Err(Error::NonFinite {
                            vertex: i,
                            coords: y.to_vec(),
                            context: format!("running cost under control {c}"),
                        });
                    }
                    stage[c] = h * g;
                }
                Ok(VertexPrep {
                    simplices,
                    coords,
                    stage,
                    clamps,
                })
            })
            .collect();

        let mut foot_simplex = Vec::with_capacity(mesh.n_vertices() * nu);
        let mut foot_coords = Vec::with_capacity(mesh.n_vertices() * nu * stride);
        let mut stage_cost = Vec::with_capacity(mesh.n_vertices() * nu);
        let mut clamp_events = 0usize;
        for entry in prep {
            let entry = entry?;
            foot_simplex.extend_from_slice(&entry.simplices);
            foot_coords.extend_from_slice(&entry.coords);
            stage_cost.extend_from_slice(&entry.stage);
            clamp_events += entry.clamps;
        }

        Ok(Self {
            mesh: Arc::clone(mesh),
            h,
            lambda: problem.lambda(),
            delta: problem.delta(h),
            n_controls: nu,
            foot_simplex,
            foot_coords,
            stage_cost,
            clamp_events,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// One-step discount factor `1 - lambda h`.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn clamp_events(&self) -> usize {
        self.clamp_events
    }

    pub fn mesh(&self) -> &Arc<SimplicialMesh> {
        &self.mesh
    }

    /// Raw sweep over preallocated buffers.
    pub fn apply_values(&self, v: &[f64], out: &mut [f64], argmin: &mut [usize]) {
        let stride = self.mesh.dim() + 1;
        let nu = self.n_controls;
        let delta = self.delta;
        out.par_iter_mut()
            .zip(argmin.par_iter_mut())
            .enumerate()
            .for_each(|(i, (out_i, arg_i))| {
                let mut best = f64::INFINITY;
                let mut best_c = 0usize;
                for c in 0..nu {
                    let slot = i * nu + c;
                    let verts = self.mesh.simplex_vertices(self.foot_simplex[slot]);
                    let coords = &self.foot_coords[slot * stride..(slot + 1) * stride];
                    let mut interp = 0.0;
                    for (&vtx, &w) in verts.iter().zip(coords) {
                        interp += w * v[vtx];
                    }
                    let candidate = delta * interp + self.stage_cost[slot];
                    if candidate < best {
                        best = candidate;
                        best_c = c;
                    }
                }
                *out_i = best;
                *arg_i = best_c;
            });
    }

    /// Applies the operator to a scalar field on the same mesh.
    pub fn apply(&self, v: &NodalField) -> Result<BellmanSweep> {
        if v.width() != 1 || v.n_vertices() != self.mesh.n_vertices() {
            return Err(Error::InvalidArgument(
                "value field must be scalar on the operator's mesh".into(),
            ));
        }
        let mut out = vec![0.0; v.n_vertices()];
        let mut argmin = vec![0usize; v.n_vertices()];
        self.apply_values(v.scalars(), &mut out, &mut argmin);
        Ok(BellmanSweep {
            values: NodalField::from_scalars(Arc::clone(&self.mesh), out)?,
            argmin,
        })
    }
}

/// Single application of the Bellman operator (see [`BellmanOperator`]).
pub fn bellman_apply(
    problem: &Problem,
    v: &NodalField,
    h: f64,
    policy: OutOfDomainPolicy,
) -> Result<BellmanSweep> {
    BellmanOperator::new(problem, v.mesh(), h, policy)?.apply(v)
}

/// Iterates the Bellman operator to its fixed point.
pub fn solve_fixed_point(
    problem: &Problem,
    mesh: &Arc<SimplicialMesh>,
    h: f64,
    config: &SolveConfig,
) -> Result<ValueFunction> {
    config.validate()?;
    let op = BellmanOperator::new(problem, mesh, h, config.policy)?;

    let mut v: Vec<f64> = match &config.initial {
        InitialGuess::Zeros => vec![0.0; mesh.n_vertices()],
        InitialGuess::Constant(c) => {
            if !c.is_finite() {
                return Err(Error::InvalidArgument(
                    "initial guess must be finite".into(),
                ));
            }
            vec![*c; mesh.n_vertices()]
        }
        InitialGuess::Field(field) => {
            if field.width() != 1 || field.n_vertices() != mesh.n_vertices() {
                return Err(Error::InvalidArgument(
                    "initial field must be scalar on the solve mesh".into(),
                ));
            }
            field.scalars().to_vec()
        }
    };

    // Stop when the update guarantees |v - v*| <= tolerance via the
    // contraction bound |v_t - v*| <= delta/(1-delta) * |v_t - v_{t-1}|.
    let delta = op.delta();
    let threshold = config.tolerance * (1.0 - delta) / delta;

    let mut next = vec![0.0; v.len()];
    let mut argmin = vec![0usize; v.len()];
    let mut residual = f64::INFINITY;
    for iteration in 1..=config.max_iterations {
        op.apply_values(&v, &mut next, &mut argmin);
        residual = v
            .iter()
            .zip(&next)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if !residual.is_finite() {
            return Err(Error::NonFinite {
                vertex: 0,
                coords: mesh.vertex(0).to_vec(),
                context: "fixed-point update".into(),
            });
        }
        std::mem::swap(&mut v, &mut next);
        if residual <= threshold {
            return Ok(ValueFunction {
                field: NodalField::from_scalars(Arc::clone(mesh), v)?,
                h,
                lambda: problem.lambda(),
                residual,
                iterations: iteration,
                clamp_events: op.clamp_events(),
            });
        }
    }

    Err(Error::NonConvergence {
        iterations: config.max_iterations,
        residual,
    })
}

/// Largest nodal slope over mesh edges, `max |v_i - v_j| / |y_i - y_j|`.
pub fn lipschitz_estimate(v: &ValueFunction) -> f64 {
    let mesh = v.mesh();
    let n = mesh.dim();
    let mut lip = 0.0f64;
    for s in 0..mesh.n_simplices() {
        let verts = mesh.simplex_vertices(s);
        for a in 0..verts.len() {
            for b in (a + 1)..verts.len() {
                let pa = mesh.vertex(verts[a]);
                let pb = mesh.vertex(verts[b]);
                let dist: f64 = (0..n).map(|d| (pa[d] - pb[d]).powi(2)).sum::<f64>().sqrt();
                let dv = (v.value(verts[a]) - v.value(verts[b])).abs();
                lip = lip.max(dv / dist);
            }
        }
    }
    lip
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expression;
    use crate::mesh::BoxDomain;
    use crate::problem::{benchmarks, ControlSet, Problem};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn simple_problem(g_text: &str, lambda: f64) -> Problem {
        let domain = BoxDomain::new(vec![0.0], vec![1.0]).unwrap();
        Problem::new(
            vec![Expression::parse("u1 * y1 * (1 - y1)").unwrap()],
            Expression::parse(g_text).unwrap(),
            lambda,
            domain,
            ControlSet::tensor(&[-1.0], &[1.0], &[3]).unwrap(),
        )
        .unwrap()
    }

    fn mesh_1d(cells: usize) -> Arc<SimplicialMesh> {
        let domain = BoxDomain::new(vec![0.0], vec![1.0]).unwrap();
        Arc::new(SimplicialMesh::uniform(domain, &[cells]).unwrap())
    }

    #[test]
    fn single_sweep_from_zero_is_stage_cost() {
        let problem = simple_problem("1", 1.0);
        let mesh = mesh_1d(4);
        let v = NodalField::constant(Arc::clone(&mesh), 1, 0.0).unwrap();
        let sweep = bellman_apply(&problem, &v, 0.1, OutOfDomainPolicy::Clamp).unwrap();
        for i in 0..mesh.n_vertices() {
            assert!((sweep.values.scalar(i) - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_one_is_a_fixed_point() {
        let problem = simple_problem("1", 1.0);
        let mesh = mesh_1d(4);
        let v = NodalField::constant(Arc::clone(&mesh), 1, 1.0).unwrap();
        let sweep = bellman_apply(&problem, &v, 0.1, OutOfDomainPolicy::Clamp).unwrap();
        for i in 0..mesh.n_vertices() {
            assert!((sweep.values.scalar(i) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sweep_matches_exhaustive_enumeration() {
        // Independent oracle: hand-rolled 1-d linear interpolation on the
        // three-vertex mesh {0, 0.5, 1} and a direct minimum over controls.
        let domain = BoxDomain::new(vec![0.0], vec![1.0]).unwrap();
        let problem = Problem::new(
            vec![Expression::parse("u1").unwrap()],
            Expression::parse("y1^2 + u1^2").unwrap(),
            1.0,
            domain,
            ControlSet::tensor(&[-0.5], &[0.5], &[2]).unwrap(),
        )
        .unwrap();
        let mesh = mesh_1d(2);
        let nodal = vec![0.3, -0.2, 0.8];
        let v = NodalField::from_scalars(Arc::clone(&mesh), nodal.clone()).unwrap();
        let h = 0.2;

        let interp1d = |x: f64| -> f64 {
            let x = x.clamp(0.0, 1.0);
            if x <= 0.5 {
                let t = x / 0.5;
                nodal[0] * (1.0 - t) + nodal[1] * t
            } else {
                let t = (x - 0.5) / 0.5;
                nodal[1] * (1.0 - t) + nodal[2] * t
            }
        };

        let sweep = bellman_apply(&problem, &v, h, OutOfDomainPolicy::Clamp).unwrap();
        for (i, &y) in [0.0f64, 0.5, 1.0].iter().enumerate() {
            let mut expected = f64::INFINITY;
            for &u in &[-0.5f64, 0.5] {
                let candidate =
                    (1.0 - h) * interp1d(y + h * u) + h * (y * y + u * u);
                expected = expected.min(candidate);
            }
            assert!(
                (sweep.values.scalar(i) - expected).abs() < 1e-14,
                "vertex {i}: {} vs {expected}",
                sweep.values.scalar(i)
            );
        }
    }

    #[test]
    fn constant_cost_solves_to_c_over_lambda() {
        for (lambda, c, h, cells) in [(1.0, 1.0, 0.1, 4), (2.0, 3.0, 0.2, 7), (0.5, -1.0, 0.9, 11)]
        {
            let domain = BoxDomain::new(vec![0.0], vec![1.0]).unwrap();
            let problem = Problem::new(
                vec![Expression::parse("u1 * y1 * (1 - y1)").unwrap()],
                Expression::parse(&format!("{c}")).unwrap(),
                lambda,
                domain.clone(),
                ControlSet::tensor(&[-1.0], &[1.0], &[3]).unwrap(),
            )
            .unwrap();
            let mesh = Arc::new(SimplicialMesh::uniform(domain, &[cells]).unwrap());
            let config = SolveConfig {
                tolerance: 1e-12,
                ..SolveConfig::default()
            };
            let v = solve_fixed_point(&problem, &mesh, h, &config).unwrap();
            for i in 0..mesh.n_vertices() {
                assert!(
                    (v.value(i) - c / lambda).abs() < 1e-10,
                    "lambda={lambda} h={h}: {}",
                    v.value(i)
                );
            }
        }
    }

    #[test]
    fn initial_guess_variants() {
        let problem = simple_problem("2", 1.0);
        let mesh = mesh_1d(6);
        let config = SolveConfig {
            tolerance: 1e-12,
            ..SolveConfig::default()
        };

        // Starting at the fixed point converges immediately.
        let warm = SolveConfig {
            initial: InitialGuess::Constant(2.0),
            ..config.clone()
        };
        let v = solve_fixed_point(&problem, &mesh, 0.1, &warm).unwrap();
        assert_eq!(v.iterations(), 1);
        assert_eq!(v.residual(), 0.0);

        // A supplied field works as a warm start and agrees with the cold
        // solve.
        let cold = solve_fixed_point(&problem, &mesh, 0.1, &config).unwrap();
        let warm_field = SolveConfig {
            initial: InitialGuess::Field(cold.field().clone()),
            ..config.clone()
        };
        let v = solve_fixed_point(&problem, &mesh, 0.1, &warm_field).unwrap();
        assert!(v.field().sup_diff(cold.field()) <= 1e-12);

        // Mismatched field dimensions are rejected.
        let other = mesh_1d(9);
        let bad = SolveConfig {
            initial: InitialGuess::Field(
                NodalField::constant(Arc::clone(&other), 1, 0.0).unwrap(),
            ),
            ..config
        };
        assert!(matches!(
            solve_fixed_point(&problem, &mesh, 0.1, &bad),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn invalid_time_steps_are_rejected() {
        let problem = simple_problem("1", 1.0);
        let mesh = mesh_1d(4);
        for h in [1.0, 0.0, -0.1, 1.5] {
            let err =
                solve_fixed_point(&problem, &mesh, h, &SolveConfig::default()).unwrap_err();
            assert!(matches!(err, Error::InvalidTimeStep { .. }), "h={h}");
        }
    }

    #[test]
    fn reject_policy_names_the_offender() {
        let domain = BoxDomain::new(vec![0.0], vec![1.0]).unwrap();
        let problem = Problem::new(
            vec![Expression::parse("1").unwrap()],
            Expression::parse("1").unwrap(),
            1.0,
            domain.clone(),
            ControlSet::tensor(&[0.0], &[1.0], &[1]).unwrap(),
        )
        .unwrap();
        let mesh = mesh_1d(4);
        let err = BellmanOperator::new(&problem, &mesh, 0.1, OutOfDomainPolicy::Reject)
            .unwrap_err();
        match err {
            Error::FootOutsideDomain { vertex, control, .. } => {
                assert_eq!(vertex, 4);
                assert_eq!(control, 0);
            }
            other => panic!("unexpected error {other:?}"),
        }

        let op = BellmanOperator::new(&problem, &mesh, 0.1, OutOfDomainPolicy::Clamp)
            .unwrap();
        assert_eq!(op.clamp_events(), 1);
    }

    #[test]
    fn non_convergence_carries_residual() {
        let problem = simple_problem("y1", 1.0);
        let mesh = mesh_1d(8);
        let config = SolveConfig {
            tolerance: 1e-12,
            max_iterations: 2,
            ..SolveConfig::default()
        };
        let err = solve_fixed_point(&problem, &mesh, 0.1, &config).unwrap_err();
        match err {
            Error::NonConvergence { iterations, residual } => {
                assert_eq!(iterations, 2);
                assert!(residual > 0.0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn contraction_and_monotonicity() {
        let problem = simple_problem("y1 + u1^2", 1.0);
        let mesh = mesh_1d(6);
        let op = BellmanOperator::new(&problem, &mesh, 0.25, OutOfDomainPolicy::Clamp)
            .unwrap();
        let delta = op.delta();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let a: Vec<f64> = (0..mesh.n_vertices())
                .map(|_| rng.gen_range(-5.0..5.0))
                .collect();
            let b: Vec<f64> = (0..mesh.n_vertices())
                .map(|_| rng.gen_range(-5.0..5.0))
                .collect();
            let fa = NodalField::from_scalars(Arc::clone(&mesh), a.clone()).unwrap();
            let fb = NodalField::from_scalars(Arc::clone(&mesh), b.clone()).unwrap();
            let ta = op.apply(&fa).unwrap().values;
            let tb = op.apply(&fb).unwrap().values;

            let dist = fa.sup_diff(&fb);
            assert!(ta.sup_diff(&tb) <= delta * dist + 1e-12);

            // Ordered pair a <= a + |b| nodally.
            let c: Vec<f64> = a.iter().zip(&b).map(|(x, z)| x + z.abs()).collect();
            let fc = NodalField::from_scalars(Arc::clone(&mesh), c).unwrap();
            let tc = op.apply(&fc).unwrap().values;
            for i in 0..mesh.n_vertices() {
                assert!(ta.scalar(i) <= tc.scalar(i) + 1e-12);
            }
        }
    }

    #[test]
    fn residual_after_solve_is_within_tolerance() {
        let p = benchmarks::manufactured_1d(&[5]).unwrap();
        let mesh = Arc::new(
            SimplicialMesh::uniform(p.problem().domain().clone(), &[20]).unwrap(),
        );
        let config = SolveConfig {
            tolerance: 1e-9,
            ..SolveConfig::default()
        };
        let v = solve_fixed_point(p.problem(), &mesh, 0.1, &config).unwrap();
        let sweep = bellman_apply(p.problem(), v.field(), 0.1, OutOfDomainPolicy::Clamp)
            .unwrap();
        assert!(sweep.values.sup_diff(v.field()) <= 1e-9);
    }

    #[test]
    fn solve_is_deterministic_across_worker_counts() {
        let p = benchmarks::manufactured_1d(&[11]).unwrap();
        let domain = p.problem().domain().clone();
        let solve_with = |threads: usize| -> Vec<f64> {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                let mesh =
                    Arc::new(SimplicialMesh::uniform(domain.clone(), &[40]).unwrap());
                let v = solve_fixed_point(
                    p.problem(),
                    &mesh,
                    0.05,
                    &SolveConfig::default(),
                )
                .unwrap();
                v.field().scalars().to_vec()
            })
        };
        let a = solve_with(1);
        let b = solve_with(4);
        assert_eq!(a, b);
    }

    #[test]
    fn lipschitz_estimate_examples() {
        let p = benchmarks::manufactured_1d(&[5]).unwrap();
        let mesh = Arc::new(
            SimplicialMesh::uniform(p.problem().domain().clone(), &[10]).unwrap(),
        );
        let constant = ValueFunction {
            field: NodalField::constant(Arc::clone(&mesh), 1, 2.0).unwrap(),
            h: 0.1,
            lambda: 1.0,
            residual: 0.0,
            iterations: 1,
            clamp_events: 0,
        };
        assert_eq!(lipschitz_estimate(&constant), 0.0);

        let identity = ValueFunction {
            field: NodalField::sample_scalar(&mesh, |p| p[0]).unwrap(),
            h: 0.1,
            lambda: 1.0,
            residual: 0.0,
            iterations: 1,
            clamp_events: 0,
        };
        assert!((lipschitz_estimate(&identity) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_bound_holds_when_lambda_dominates() {
        // v* = y^2 with lambda = 5 > L_f = 2: the discrete value function
        // inherits the bound L_g / (lambda - L_f) up to O(h + k).
        let domain = BoxDomain::new(vec![-1.0], vec![1.0]).unwrap();
        let p = crate::problem::ManufacturedProblem::new(
            Expression::parse("y1^2").unwrap(),
            vec![Expression::parse("u1*(1-y1^2)").unwrap()],
            5.0,
            domain.clone(),
            ControlSet::tensor(&[-1.0], &[1.0], &[9]).unwrap(),
        )
        .unwrap();
        let mesh = Arc::new(SimplicialMesh::uniform(domain, &[50]).unwrap());
        let v = solve_fixed_point(p.problem(), &mesh, 0.02, &SolveConfig::default())
            .unwrap();
        // L_g = 14 analytically: sup |dg/dy| for g = 5y^2 - 2uy(1-y^2).
        let bound = 14.0 / (5.0 - 2.0);
        let slack = 1.0 * (0.02 + mesh.k());
        assert!(lipschitz_estimate(&v) <= bound + slack);
    }
}
