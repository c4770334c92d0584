//! Acceptance suite: end-to-end checks of the solver's convergence
//! behavior, its characterization as a sequence-space infimum, operator
//! properties, and CLI determinism. Each test prints one pass line; run
//! with `--nocapture` to see them.

use std::process::Command;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hjb_core::cost::{
    brute_force_value, continuous_cost_oracle, discrete_cost, euler_rollout,
    horizon_for_tail, ControlSequence,
};
use hjb_core::expr::{Expression, Var};
use hjb_core::mesh::{BoxDomain, SimplicialMesh};
use hjb_core::problem::{benchmarks, ControlSet, Problem, ProblemBounds};
use hjb_core::solver::{
    solve_fixed_point, BellmanOperator, OutOfDomainPolicy, SolveConfig,
};
use hjb_core::study::{
    fixed_k_sweep, run_refinement_study, RefinementSchedule, ScheduleEntry,
    StudyReference,
};
use hjb_core::NodalField;

fn pass(line: &str) {
    println!("[PASS] {line}");
}

fn solve_config(tolerance: f64) -> SolveConfig {
    SolveConfig {
        tolerance,
        ..SolveConfig::default()
    }
}

/// Joint h = k refinement on the manufactured benchmarks reaches first
/// order: fitted slope >= 0.8 with R^2 >= 0.98.
#[test]
fn a01_joint_refinement_is_first_order() {
    // 1D: v* = y^2, f = u (1 - y^2), 21 controls, lambda = 1.
    let p = benchmarks::manufactured_1d(&[21]).unwrap();
    let entries = [0.1f64, 0.05, 0.025, 0.0125]
        .iter()
        .map(|&h| ScheduleEntry {
            h,
            cells_per_dim: vec![(2.0 / h).round() as usize],
        })
        .collect();
    let schedule = RefinementSchedule {
        entries,
        reference: StudyReference::Exact(p.exact_value_fn()),
    };
    let run = run_refinement_study(p.problem(), &schedule, &solve_config(1e-9)).unwrap();
    let fit = run.fit.unwrap();
    assert!(fit.slope >= 0.8, "1D slope {} below 0.8", fit.slope);
    assert!(fit.r_squared >= 0.98, "1D R^2 {} below 0.98", fit.r_squared);
    // Monotone refinement: single-step increases above 5% would flag noise.
    for w in run.records.windows(2) {
        assert!(w[1].sup_error <= 1.05 * w[0].sup_error);
    }

    // 2D: v* = y1^2 + y2^2, three coarsest levels.
    let p2 = benchmarks::manufactured_2d(&[5, 5]).unwrap();
    let entries = [0.1f64, 0.05, 0.025]
        .iter()
        .map(|&h| {
            let cells = (2.0 * 2.0f64.sqrt() / h).ceil() as usize;
            ScheduleEntry {
                h,
                cells_per_dim: vec![cells, cells],
            }
        })
        .collect();
    let schedule = RefinementSchedule {
        entries,
        reference: StudyReference::Exact(p2.exact_value_fn()),
    };
    let started = std::time::Instant::now();
    let run2 = run_refinement_study(p2.problem(), &schedule, &solve_config(1e-9)).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    let fit2 = run2.fit.unwrap();
    assert!(fit2.slope >= 0.8, "2D slope {} below 0.8", fit2.slope);
    assert!(fit2.r_squared >= 0.98, "2D R^2 {} below 0.98", fit2.r_squared);
    assert!(elapsed <= 120.0, "2D study took {elapsed:.1}s (budget 120s)");

    pass(&format!(
        "a01 joint refinement first order: 1D slope {:.3} (R^2 {:.4}), \
         2D slope {:.3} (R^2 {:.4}) in {elapsed:.1}s",
        fit.slope, fit.r_squared, fit2.slope, fit2.r_squared
    ));
}

/// At fixed k, shrinking h does not blow the error up: consecutive ratios
/// stay at or below 1.1 where a k/h bound would predict ~2 per halving.
#[test]
fn a02_no_blowup_at_fixed_k() {
    let p = benchmarks::manufactured_1d(&[21]).unwrap();
    let sweep = fixed_k_sweep(
        p.problem(),
        &[200],
        &[0.05, 0.025, 0.0125, 0.00625],
        &StudyReference::Exact(p.exact_value_fn()),
        &solve_config(1e-9),
    )
    .unwrap();
    assert!((sweep.k - 0.01).abs() < 1e-12);
    let max_ratio = sweep.max_ratio.unwrap();
    assert!(
        max_ratio <= 1.1,
        "error grew by {max_ratio} under h-halving at fixed k"
    );
    pass(&format!(
        "a02 fixed-k sweep: max error ratio {max_ratio:.3} (<= 1.1, no 1/h growth)"
    ));
}

/// The solved value matches the brute-force minimum over control sequences
/// within tail + solver tolerance, on randomized tiny instances.
#[test]
fn a03_sequence_infimum_characterization() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let h = 0.2;
    let tolerance = 1e-12;
    let mut worst: f64 = 0.0;
    for instance in 0..5 {
        let cells = rng.gen_range(3..=4usize);
        let n_controls = rng.gen_range(2..=3usize);
        // Depth under the 10^7 guard; amplitude scaled so the geometric
        // tail of that depth is already below 1e-6.
        let n_steps = if n_controls == 2 { 10 } else { 9 };
        let a: f64 = rng.gen_range(0.5..1.0);
        let b: f64 = rng.gen_range(-1.0..1.0);
        let c: f64 = rng.gen_range(-1.0..1.0);
        let sup_g_unit = a + b.abs() + c.abs();
        let delta: f64 = 1.0 - h;
        let amplitude = 0.9e-6 / (sup_g_unit * delta.powi(n_steps as i32));
        let drift: f64 = rng.gen_range(0.3..0.7);

        let domain = BoxDomain::new(vec![-1.0], vec![1.0]).unwrap();
        let problem = Problem::new(
            vec![Expression::parse(&format!("{drift}*u1*(1-y1^2)")).unwrap()],
            Expression::parse(&format!(
                "{amplitude}*({a}*sin(3*y1) + {b}*cos(2*u1) + {c}*u1*y1)"
            ))
            .unwrap(),
            1.0,
            domain.clone(),
            ControlSet::tensor(&[-1.0], &[1.0], &[n_controls]).unwrap(),
        )
        .unwrap()
        .with_bounds(ProblemBounds {
            sup_g: Some(amplitude * sup_g_unit),
            ..ProblemBounds::default()
        });
        let mesh = Arc::new(SimplicialMesh::uniform(domain, &[cells]).unwrap());
        let v = solve_fixed_point(&problem, &mesh, h, &solve_config(tolerance)).unwrap();

        for vertex in 0..mesh.n_vertices() {
            let y0 = mesh.vertex(vertex).to_vec();
            let result =
                brute_force_value(&problem, &mesh, h, &y0, n_steps, 1e-6).unwrap();
            assert!(result.tail_bound <= 1e-6);
            let gap = (result.value - v.value(vertex)).abs();
            let budget = result.tail_bound + tolerance;
            assert!(
                gap <= budget,
                "instance {instance}, vertex {vertex}: gap {gap:e} > budget {budget:e}"
            );
            worst = worst.max(gap / budget);
        }
    }
    pass(&format!(
        "a03 sequence-infimum oracle: 5 instances, worst gap/budget = {worst:.3}"
    ));
}

/// The Bellman operator contracts with factor (1 - lambda h) and preserves
/// nodal order.
#[test]
fn a04_contraction_and_monotonicity() {
    let p = benchmarks::manufactured_1d(&[11]).unwrap();
    let mesh = Arc::new(
        SimplicialMesh::uniform(p.problem().domain().clone(), &[25]).unwrap(),
    );
    let h = 0.1;
    let op =
        BellmanOperator::new(p.problem(), &mesh, h, OutOfDomainPolicy::Clamp).unwrap();
    let delta = op.delta();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let random_field = |rng: &mut ChaCha8Rng| {
        let vals: Vec<f64> = (0..mesh.n_vertices())
            .map(|_| rng.gen_range(-10.0..10.0))
            .collect();
        NodalField::from_scalars(Arc::clone(&mesh), vals).unwrap()
    };

    for _ in 0..100 {
        let v = random_field(&mut rng);
        let w = random_field(&mut rng);
        let tv = op.apply(&v).unwrap().values;
        let tw = op.apply(&w).unwrap().values;
        assert!(tv.sup_diff(&tw) <= delta * v.sup_diff(&w) + 1e-12);
    }

    for _ in 0..100 {
        let v = random_field(&mut rng);
        let bump: Vec<f64> = (0..mesh.n_vertices())
            .map(|i| v.scalar(i) + rng.gen_range(0.0..5.0))
            .collect();
        let w = NodalField::from_scalars(Arc::clone(&mesh), bump).unwrap();
        let tv = op.apply(&v).unwrap().values;
        let tw = op.apply(&w).unwrap().values;
        for i in 0..mesh.n_vertices() {
            assert!(tv.scalar(i) <= tw.scalar(i) + 1e-12);
        }
    }
    pass("a04 contraction (factor 1 - lambda h) and monotonicity on 100 random pairs each");
}

/// Constant running cost solves to the exact geometric series c / lambda.
#[test]
fn a05_constant_cost_exact_solution() {
    for (lambda, c, h, cells) in [(1.0, 1.0, 0.1, 16usize), (2.0, -0.7, 0.2, 9), (0.5, 3.0, 1.2, 31)]
    {
        let domain = BoxDomain::new(vec![-1.0], vec![1.0]).unwrap();
        let problem = Problem::new(
            vec![Expression::parse("u1*(1-y1^2)").unwrap()],
            Expression::parse(&format!("{c}")).unwrap(),
            lambda,
            domain.clone(),
            ControlSet::tensor(&[-1.0], &[1.0], &[5]).unwrap(),
        )
        .unwrap();
        let mesh = Arc::new(SimplicialMesh::uniform(domain, &[cells]).unwrap());
        let v = solve_fixed_point(&problem, &mesh, h, &solve_config(1e-12)).unwrap();
        for i in 0..mesh.n_vertices() {
            assert!(
                (v.value(i) - c / lambda).abs() <= 1e-10,
                "lambda={lambda}, h={h}, cells={cells}"
            );
        }
    }
    pass("a05 constant cost solves to c/lambda within 1e-10 on 3 (h, mesh) combinations");
}

/// The discrete cost functional of a sampled Lipschitz control converges to
/// the continuous cost at first order: differences halve per joint (h, k)
/// halving.
#[test]
fn a06_cost_functional_consistency() {
    let p = benchmarks::manufactured_1d(&[21]).unwrap();
    let problem = p.problem();
    let y0 = [0.5];
    let control = |t: f64| vec![0.5 * t.cos()];

    let reference = continuous_cost_oracle(problem, &y0, control, 21.0, 5e-4).unwrap();

    let mut diffs = Vec::new();
    for &h in &[0.1f64, 0.05, 0.025] {
        let cells = (2.0 / h).round() as usize;
        let mesh = Arc::new(
            SimplicialMesh::uniform(problem.domain().clone(), &[cells]).unwrap(),
        );
        let len =
            horizon_for_tail(problem.bounds().sup_g.unwrap(), 1.0, h, 1e-9).unwrap();
        let seq = ControlSequence::sampled(control, h, len).unwrap();
        let cost = discrete_cost(problem, &mesh, &y0, &seq, 1e-9).unwrap();
        diffs.push((reference.value - cost.value).abs());
    }
    for w in diffs.windows(2) {
        let ratio = w[0] / w[1];
        assert!(
            (1.6..=2.6).contains(&ratio),
            "cost difference ratio {ratio} outside [1.6, 2.6] ({diffs:?})"
        );
    }
    pass(&format!(
        "a06 cost-functional consistency: |J - J_hk| = {:.3e} -> {:.3e} -> {:.3e} \
         (halving per level)",
        diffs[0], diffs[1], diffs[2]
    ));
}

/// The interpolated Euler rollout tracks a high-order reference trajectory
/// at first order in (h, k).
#[test]
fn a07_trajectory_error_halves() {
    let p = benchmarks::manufactured_1d(&[21]).unwrap();
    let problem = p.problem();
    let y0 = 0.5f64;
    let control = |t: f64| vec![0.5 * t.cos()];
    let horizon = 2.0f64;

    let mut errors = Vec::new();
    for &h in &[0.1f64, 0.05, 0.025] {
        let cells = (2.0 / h).round() as usize;
        let mesh = Arc::new(
            SimplicialMesh::uniform(problem.domain().clone(), &[cells]).unwrap(),
        );
        let steps = (horizon / h).round() as usize;
        let seq = ControlSequence::sampled(control, h, steps).unwrap();
        let traj = euler_rollout(problem, &mesh, &[y0], &seq).unwrap();

        // Reference: classical 4th-order steps of the true dynamics at
        // h/100, compared at the coarse times.
        let refine = 100usize;
        let dt = h / refine as f64;
        let f = |y: f64, t: f64| control(t)[0] * (1.0 - y * y);
        let mut y = y0;
        let mut sup = 0.0f64;
        for step in 0..(steps * refine) {
            let t = step as f64 * dt;
            let k1 = f(y, t);
            let k2 = f(y + 0.5 * dt * k1, t + 0.5 * dt);
            let k3 = f(y + 0.5 * dt * k2, t + 0.5 * dt);
            let k4 = f(y + dt * k3, t + dt);
            y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (step + 1) % refine == 0 {
                let n = (step + 1) / refine;
                sup = sup.max((y - traj.states[n][0]).abs());
            }
        }
        errors.push(sup);
    }
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!(
            (1.6..=2.6).contains(&ratio),
            "trajectory error ratio {ratio} outside [1.6, 2.6] ({errors:?})"
        );
    }
    pass(&format!(
        "a07 rollout vs reference on T=2: sup errors {:.3e} -> {:.3e} -> {:.3e}",
        errors[0], errors[1], errors[2]
    ));
}

/// Interpolation reproduces affine data exactly, never overshoots nodal
/// bounds, and point location is a partition of unity.
#[test]
fn a08_interpolant_properties() {
    let domain = BoxDomain::new(vec![-1.0, 0.0], vec![1.0, 2.0]).unwrap();
    let mesh = Arc::new(SimplicialMesh::uniform(domain.clone(), &[9, 7]).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(55);

    let (a1, a2, b) = (1.25, -0.75, 0.3);
    let affine =
        NodalField::sample_scalar(&mesh, |p| a1 * p[0] + a2 * p[1] + b).unwrap();
    let wavy = NodalField::sample_scalar(&mesh, |p| {
        (5.0 * p[0]).sin() * (3.0 * p[1]).cos() + 0.2 * p[0]
    })
    .unwrap();
    let bound = wavy.sup_norm();

    for _ in 0..10_000 {
        let p = [rng.gen_range(-1.0..=1.0), rng.gen_range(0.0..=2.0)];

        let exact = a1 * p[0] + a2 * p[1] + b;
        assert!((affine.interpolate_scalar(&p).unwrap() - exact).abs() <= 1e-12);

        assert!(wavy.interpolate_scalar(&p).unwrap().abs() <= bound + 1e-12);

        let loc = mesh.locate(&p).unwrap();
        assert!(loc.coords.iter().all(|&c| c >= 0.0));
        assert!((loc.coords.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let verts = mesh.simplex_vertices(loc.simplex_index);
        for (d, &coord) in p.iter().enumerate() {
            let rebuilt: f64 = verts
                .iter()
                .zip(&loc.coords)
                .map(|(&v, &c)| c * mesh.vertex(v)[d])
                .sum();
            assert!((rebuilt - coord).abs() <= 1e-10 * mesh.k());
        }
    }
    pass("a08 interpolant: affine reproduction 1e-12, sup stability, partition of unity on 10^4 points");
}

/// Symbolic derivatives agree with central finite differences on a
/// 50-expression corpus, and manufactured problems have vanishing
/// Hamiltonian residuals.
#[test]
fn a09_dsl_correctness() {
    let corpus: [&str; 50] = [
        "y1^2",
        "y1^3 - 2*y1",
        "sin(y1)",
        "cos(y1)",
        "exp(y1)",
        "sin(3*y1) + cos(2*y1)",
        "exp(0.5*y1) * sin(y1)",
        "y1*y2",
        "y1^2 * y2",
        "y1 / (2 + y1^2)",
        "(y1 + y2)^2",
        "sin(y1*y2)",
        "cos(y1 - y2)",
        "exp(y1 + 0.1*y2)",
        "y1^2 + y2^2 + y1*y2",
        "2*y1 - 3*y2 + 0.5",
        "sin(y1)^2",
        "cos(y1)^3",
        "(1 - y1^2) * u1",
        "u1^2 * y1",
        "sin(y1 + u1)",
        "exp(-y1^2)",
        "y1 * exp(-y1)",
        "(y1^2 + 1)^2",
        "1 / (1 + y1^2)",
        "y2 / (1 + y1^2)",
        "sin(2*y1) * cos(3*y2)",
        "y1^4",
        "0.5 * y1^2 - 0.25 * y1^4",
        "exp(sin(y1))",
        "sin(exp(0.3*y1))",
        "cos(y1^2)",
        "(y1 - y2) * (y1 + y2)",
        "y1^2 * sin(y2)",
        "u1 * y1 + u1^2",
        "3.5",
        "y1",
        "-y1^2",
        "-sin(y1)",
        "y2^2 * cos(y1)",
        "(2 + sin(y1)) ^ 2",
        "y1 * y2 * u1",
        "exp(0.2*y1) - exp(-0.2*y1)",
        "sin(y1) * sin(y2) * 0.5",
        "(y1 + 1) / (y2 + 3)",
        "y1^2 / (1 + y2^2)",
        "cos(2*y1 + 0.5)",
        "0.1 * exp(y1) * cos(y2)",
        "(sin(y1) + cos(y2))^2",
        "y1^3 * y2^2",
    ];
    assert_eq!(corpus.len(), 50);

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let step = 1e-5;
    for text in corpus {
        let expr = Expression::parse(text).unwrap();
        for var in [Var::State(0), Var::State(1)] {
            let sym = expr.differentiate(var).unwrap();
            for _ in 0..5 {
                let mut y = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let u = [rng.gen_range(-1.0..1.0)];
                let exact = sym.eval(&y, &u);
                let d = match var {
                    Var::State(i) => i,
                    _ => unreachable!(),
                };
                let base = y[d];
                y[d] = base + step;
                let plus = expr.eval(&y, &u);
                y[d] = base - step;
                let minus = expr.eval(&y, &u);
                let fd = (plus - minus) / (2.0 * step);
                assert!(
                    (fd - exact).abs() <= 1e-6 * exact.abs().max(1.0),
                    "{text} d/d{var:?}: fd {fd} vs symbolic {exact}"
                );
            }
        }
    }

    // Manufactured Hamiltonian residuals vanish at random points.
    let p1 = benchmarks::manufactured_1d(&[9]).unwrap();
    let p2 = benchmarks::manufactured_2d(&[3, 3]).unwrap();
    for _ in 0..1000 {
        let y = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let u = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        assert!(p1.hjb_residual(&y[..1], &u[..1]).abs() <= 1e-10);
        assert!(p2.hjb_residual(&y, &u).abs() <= 1e-10);
    }
    pass("a09 DSL: 50-expression derivative corpus vs finite differences; manufactured residual <= 1e-10");
}

/// Identical configs produce bit-identical CSV regardless of worker count.
#[test]
fn a10_deterministic_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.json");
    std::fs::write(
        &config_path,
        r#"{
  "problem": {"name": "manufactured_1d"},
  "controls": {"counts": [21]},
  "h": 0.05,
  "cells_per_dim": [40],
  "solver": {"tolerance": 1e-10, "max_iterations": 100000, "out_of_domain_policy": "clamp"}
}"#,
    )
    .unwrap();

    let run_with = |workers: usize, sub: &str| -> Vec<u8> {
        let out = dir.path().join(format!("out_{sub}_{workers}"));
        let status = Command::new(env!("CARGO_BIN_EXE_hjb"))
            .args([
                "solve",
                "--config",
                config_path.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--workers",
                &workers.to_string(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out.join("value_function.csv")).unwrap()
    };

    let one = run_with(1, "a");
    let four = run_with(4, "b");
    let again = run_with(4, "c");
    assert_eq!(one, four, "CSV differs between 1 and 4 workers");
    assert_eq!(four, again, "CSV differs between identical runs");
    pass("a10 solve CSV is bit-identical across --workers 1/4 and across reruns");
}
