//! CSV writers for nodal value functions and trajectories.
//!
//! All floating-point columns carry 17 significant digits so downstream
//! rate fits reconstruct the exact binary values.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use hjb_core::policy::ClosedLoopRun;
use hjb_core::solver::ValueFunction;
use hjb_core::study::full_precision;
use hjb_core::Problem;

use crate::CliError;

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", path.display())))
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Input(format!("cannot write {}: {e}", path.display()))
}

/// `y1,...,yn,value` with one row per mesh vertex, in vertex order.
pub fn write_value_function(path: &Path, v: &ValueFunction) -> Result<(), CliError> {
    let mut w = create(path)?;
    let err = |e| io_err(path, e);
    let mesh = v.mesh();
    let n = mesh.dim();
    let mut header: Vec<String> = (1..=n).map(|d| format!("y{d}")).collect();
    header.push("value".into());
    writeln!(w, "{}", header.join(",")).map_err(err)?;
    for i in 0..mesh.n_vertices() {
        let mut row: Vec<String> = mesh.vertex(i).iter().map(|&x| full_precision(x)).collect();
        row.push(full_precision(v.value(i)));
        writeln!(w, "{}", row.join(",")).map_err(err)?;
    }
    w.flush().map_err(err)
}

/// `step,y1..,u1..,stage_cost`: one row per step holding the state, the
/// applied control and the discounted stage cost `h delta^n I_k g`; the
/// final state closes the file with empty control fields. Stage costs sum
/// to the realized cost.
pub fn write_trajectory(
    path: &Path,
    problem: &Problem,
    run: &ClosedLoopRun,
) -> Result<(), CliError> {
    let mut w = create(path)?;
    let err = |e| io_err(path, e);
    let n = problem.state_dim();
    let m = problem.control_dim();
    let mut header: Vec<String> = vec!["step".into()];
    header.extend((1..=n).map(|d| format!("y{d}")));
    header.extend((1..=m).map(|d| format!("u{d}")));
    header.push("stage_cost".into());
    writeln!(w, "{}", header.join(",")).map_err(err)?;

    let steps = run.trajectory.states.len() - 1;
    debug_assert_eq!(run.controls.len(), steps);
    for (step, state) in run.trajectory.states.iter().enumerate() {
        let mut row: Vec<String> = vec![step.to_string()];
        row.extend(state.iter().map(|&x| full_precision(x)));
        if step < steps {
            row.extend(run.controls[step].iter().map(|&x| full_precision(x)));
            row.push(full_precision(run.stage_costs[step]));
        } else {
            row.extend(std::iter::repeat_n(String::new(), m + 1));
        }
        writeln!(w, "{}", row.join(",")).map_err(err)?;
    }
    w.flush().map_err(err)
}
