//! Subcommand implementations.

use std::path::Path;
use std::sync::Arc;

use hjb_core::cost::brute_force_value;
use hjb_core::mesh::SimplicialMesh;
use hjb_core::policy::synthesize_trajectory;
use hjb_core::problem::validate_problem;
use hjb_core::solver::{solve_fixed_point, ValueFunction};
use hjb_core::study::{
    error_against_reference, fixed_k_sweep, full_precision, run_refinement_study,
    write_fixed_k_csv, write_study_csv, RefinementSchedule, ScheduleEntry, StudyFailure,
};

use crate::config::{resolve_reference, BuiltProblem, RunConfig};
use crate::output::{write_trajectory, write_value_function};
use crate::CliError;

fn input(message: impl Into<String>) -> CliError {
    CliError::Input(message.into())
}

/// Writes the effective configuration back out so a run can be reproduced
/// bit for bit.
fn write_effective_config(out: &Path, config: &RunConfig) -> Result<(), CliError> {
    let path = out.join("config.json");
    let text = serde_json::to_string_pretty(config)
        .map_err(|e| input(format!("cannot serialize config: {e}")))?;
    std::fs::write(&path, text + "\n")
        .map_err(|e| input(format!("cannot write {}: {e}", path.display())))
}

fn ensure_out(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| input(format!("cannot create {}: {e}", out.display())))
}

struct Solved {
    built: BuiltProblem,
    mesh: Arc<SimplicialMesh>,
    value: ValueFunction,
}

/// Shared solve path: problem + mesh + fixed point.
fn solve_from_config(config: &RunConfig) -> Result<Solved, CliError> {
    let built = config.build_problem()?;
    let h = config.require_h()?;
    // Validate the step before building a potentially large mesh.
    built.problem.validate_time_step(h)?;
    let cells = config.require_cells()?;
    let mesh = Arc::new(SimplicialMesh::uniform(
        built.problem.domain().clone(),
        cells,
    )?);
    let solve_config = config.solve_config()?;
    let value = solve_fixed_point(&built.problem, &mesh, h, &solve_config)?;
    Ok(Solved { built, mesh, value })
}

pub fn cmd_solve(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    ensure_out(out)?;
    let solved = solve_from_config(config)?;
    write_effective_config(out, config)?;
    let csv = out.join("value_function.csv");
    write_value_function(&csv, &solved.value)?;

    println!("solve: {} vertices, k = {}", solved.mesh.n_vertices(), solved.mesh.k());
    println!("iterations:   {}", solved.value.iterations());
    println!("residual:     {}", full_precision(solved.value.residual()));
    println!("clamp_events: {}", solved.value.clamp_events());
    if let Some(exact) = &solved.built.exact {
        let err = error_against_reference(&solved.value, |y| exact(y));
        println!("sup_error_vs_exact: {}", full_precision(err));
    }
    println!("wrote {}", csv.display());
    Ok(())
}

pub fn cmd_study(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    ensure_out(out)?;
    let built = config.build_problem()?;
    let spec = config
        .study
        .as_ref()
        .ok_or_else(|| input("config field 'study' is required for the study subcommand"))?;
    let has_schedule = spec.schedule.as_ref().is_some_and(|s| !s.is_empty());
    let has_fixed_k = spec.fixed_k.is_some();
    if !has_schedule && !has_fixed_k {
        return Err(input(
            "study needs a nonempty 'schedule' and/or a 'fixed_k' sweep",
        ));
    }
    let reference = resolve_reference(&built, &spec.reference)?;
    let solve_config = config.solve_config()?;
    write_effective_config(out, config)?;

    if let Some(entries) = spec.schedule.as_ref().filter(|s| !s.is_empty()) {
        let schedule = RefinementSchedule {
            entries: entries
                .iter()
                .map(|e| ScheduleEntry {
                    h: e.h,
                    cells_per_dim: e.cells_per_dim.clone(),
                })
                .collect(),
            reference: reference.clone(),
        };
        let path = out.join("study.csv");
        match run_refinement_study(&built.problem, &schedule, &solve_config) {
            Ok(run) => {
                let mut file = std::fs::File::create(&path)
                    .map_err(|e| input(format!("cannot create {}: {e}", path.display())))?;
                write_study_csv(&run, &mut file)
                    .map_err(|e| input(format!("cannot write {}: {e}", path.display())))?;
                if let Some(fit) = &run.fit {
                    println!(
                        "refinement: slope = {:.4}, intercept = {:.4}, R^2 = {:.6}",
                        fit.slope, fit.intercept, fit.r_squared
                    );
                }
                for warning in &run.warnings {
                    eprintln!("warning: {warning}");
                }
                println!("wrote {}", path.display());
            }
            Err(failure) => return Err(study_failure(failure, &path)),
        }
    }

    if let Some(fixed) = &spec.fixed_k {
        let path = out.join("fixed_k.csv");
        match fixed_k_sweep(
            &built.problem,
            &fixed.cells_per_dim,
            &fixed.h_list,
            &reference,
            &solve_config,
        ) {
            Ok(sweep) => {
                let mut file = std::fs::File::create(&path)
                    .map_err(|e| input(format!("cannot create {}: {e}", path.display())))?;
                write_fixed_k_csv(&sweep, &mut file)
                    .map_err(|e| input(format!("cannot write {}: {e}", path.display())))?;
                match sweep.max_ratio {
                    Some(r) => println!(
                        "fixed k = {}: max error ratio under h-halving = {:.4}",
                        sweep.k, r
                    ),
                    None => println!("fixed k = {}: single row, no ratios", sweep.k),
                }
                for warning in &sweep.warnings {
                    eprintln!("warning: {warning}");
                }
                println!("wrote {}", path.display());
            }
            Err(failure) => return Err(study_failure(failure, &path)),
        }
    }

    Ok(())
}

/// Preserves partial study records on failure, then reports the error.
fn study_failure(failure: StudyFailure, path: &Path) -> CliError {
    if !failure.partial.is_empty() {
        let run = hjb_core::study::ConvergenceRun {
            records: failure.partial.clone(),
            fit: None,
            warnings: vec![format!("aborted at schedule entry {}", failure.entry)],
        };
        if let Ok(mut file) = std::fs::File::create(path) {
            let _ = write_study_csv(&run, &mut file);
        }
    }
    if failure.source.is_numerical() {
        CliError::Numerical(failure.to_string())
    } else {
        CliError::Input(failure.to_string())
    }
}

pub fn cmd_oracle(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    ensure_out(out)?;
    let spec = config
        .oracle
        .clone()
        .ok_or_else(|| input("config field 'oracle' is required for the oracle subcommand"))?;
    let solved = solve_from_config(config)?;
    write_effective_config(out, config)?;

    // The comparison runs at a mesh vertex so the nodal value is exact.
    let vertex = nearest_vertex(&solved.mesh, &spec.y0)?;
    let y0 = solved.mesh.vertex(vertex).to_vec();
    let h = config.require_h()?;
    let result = brute_force_value(
        &solved.built.problem,
        &solved.mesh,
        h,
        &y0,
        spec.n,
        spec.tail_tol,
    )?;

    let nodal = solved.value.value(vertex);
    let gap = (nodal - result.value).abs();
    let budget = result.tail_bound + config.solve_config()?.tolerance;
    println!("vertex {vertex} at {y0:?}");
    println!("fixed_point_value: {}", full_precision(nodal));
    println!("brute_force_value: {}", full_precision(result.value));
    println!("sequences_enumerated: {}", result.sequences);
    println!("gap:    {}", full_precision(gap));
    println!("budget: {} (tail + solver tolerance)", full_precision(budget));
    if gap <= budget {
        println!("oracle check passed");
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "oracle gap {gap:e} exceeds budget {budget:e}"
        )))
    }
}

fn nearest_vertex(mesh: &SimplicialMesh, y0: &[f64]) -> Result<usize, CliError> {
    if y0.len() != mesh.dim() {
        return Err(input(format!(
            "oracle.y0 has dimension {}, expected {}",
            y0.len(),
            mesh.dim()
        )));
    }
    let mut best = (f64::INFINITY, 0usize);
    for i in 0..mesh.n_vertices() {
        let d: f64 = mesh
            .vertex(i)
            .iter()
            .zip(y0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if d < best.0 {
            best = (d, i);
        }
    }
    if best.0.sqrt() > 1e-9 * mesh.k().max(1.0) {
        return Err(input(format!(
            "oracle.y0 {:?} is not a mesh vertex (closest is {:?})",
            y0,
            mesh.vertex(best.1)
        )));
    }
    Ok(best.1)
}

pub fn cmd_rollout(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    ensure_out(out)?;
    let spec = config
        .rollout
        .clone()
        .ok_or_else(|| input("config field 'rollout' is required for the rollout subcommand"))?;
    let solved = solve_from_config(config)?;
    write_effective_config(out, config)?;

    let run = synthesize_trajectory(&solved.value, &solved.built.problem, &spec.y0, spec.steps)?;
    let path = out.join("trajectory.csv");
    write_trajectory(&path, &solved.built.problem, &run)?;
    println!("steps:        {}", spec.steps);
    println!("clamp_events: {}", run.trajectory.clamp_events);
    println!("realized_cost: {}", full_precision(run.realized_cost));
    println!("tail_bound:    {}", full_precision(run.tail_bound));
    println!("wrote {}", path.display());
    Ok(())
}

pub fn cmd_validate(config: &RunConfig, out: &Path, seed: u64) -> Result<(), CliError> {
    ensure_out(out)?;
    let built = config.build_problem()?;
    let h = config.require_h()?;
    let cells = config.require_cells()?;
    let mesh = SimplicialMesh::uniform(built.problem.domain().clone(), cells)?;
    write_effective_config(out, config)?;

    let report = validate_problem(&built.problem, &mesh, h, seed);
    println!(
        "problem: n = {}, m = {}, lambda = {}, |controls| = {}",
        built.problem.state_dim(),
        built.problem.control_dim(),
        built.problem.lambda(),
        built.problem.controls().len()
    );
    println!("mesh: {} vertices, k = {}", mesh.n_vertices(), mesh.k());
    println!("h = {h}");
    print!("{report}");
    Ok(())
}
