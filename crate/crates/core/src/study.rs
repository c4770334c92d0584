//! Convergence-rate studies.
//!
//! A refinement schedule solves the same problem at a list of `(h, mesh)`
//! resolutions, measures vertex sup errors against an exact or fine-solve
//! reference, and fits `log(error)` against `log(h + k)`. A fixed-k sweep
//! instead shrinks only `h` on a frozen mesh and reports consecutive error
//! ratios: if the error behaved like `k/h`, halving `h` would roughly
//! double it, while a bound of the form `C (h + k)` predicts a plateau at
//! the `O(k)` level.

use std::fmt;
use std::io::Write as IoWrite;
use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::mesh::SimplicialMesh;
use crate::problem::Problem;
use crate::solver::{solve_fixed_point, SolveConfig, ValueFunction};

pub use crate::problem::ExactFn;

/// What to measure errors against.
#[derive(Clone)]
pub enum StudyReference {
    /// A closed-form value function (manufactured benchmarks).
    Exact(ExactFn),
    /// A solve at the given fine resolution, interpolated at coarse
    /// vertices. Should be at least 4x finer (in h + k) than the finest
    /// schedule entry; the study warns otherwise.
    FineSolve { h: f64, cells_per_dim: Vec<usize> },
}

impl fmt::Debug for StudyReference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StudyReference::Exact(_) => write!(f, "Exact(..)"),
            StudyReference::FineSolve { h, cells_per_dim } => f
                .debug_struct("FineSolve")
                .field("h", h)
                .field("cells_per_dim", cells_per_dim)
                .finish(),
        }
    }
}

/// One resolution of a refinement schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleEntry {
    pub h: f64,
    pub cells_per_dim: Vec<usize>,
}

/// A refinement schedule plus its error reference.
#[derive(Debug, Clone)]
pub struct RefinementSchedule {
    pub entries: Vec<ScheduleEntry>,
    pub reference: StudyReference,
}

/// Measurements of one solve in a study.
#[derive(Debug, Clone)]
pub struct StudyRecord {
    pub h: f64,
    pub k: f64,
    pub sup_error: f64,
    /// Root-mean-square vertex error, reported for diagnostics only.
    pub l2_error: f64,
    pub iterations: usize,
    pub clamp_events: usize,
    pub wall_seconds: f64,
}

/// Least-squares fit of `log(error) = slope * log(x) + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fit quality below this R^2 marks a rate estimate as unreliable.
pub const FIT_RELIABLE_R2: f64 = 0.98;

/// Results of a joint refinement study, sorted by `h + k` descending.
#[derive(Debug, Clone)]
pub struct ConvergenceRun {
    pub records: Vec<StudyRecord>,
    /// Fit of log(sup_error) vs log(h + k); absent with fewer than two
    /// records.
    pub fit: Option<RateFit>,
    pub warnings: Vec<String>,
}

/// A study failure that preserves the records gathered so far.
#[derive(Debug)]
pub struct StudyFailure {
    /// Index of the schedule entry that failed.
    pub entry: usize,
    pub source: Error,
    pub partial: Vec<StudyRecord>,
}

impl fmt::Display for StudyFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "solve failed at schedule entry {} ({} records kept): {}",
            self.entry,
            self.partial.len(),
            self.source
        )
    }
}

impl std::error::Error for StudyFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Largest vertex error `max_i |v(y_i) - reference(y_i)|`.
pub fn error_against_reference<F>(v: &ValueFunction, reference: F) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let mesh = v.mesh();
    (0..mesh.n_vertices())
        .map(|i| (v.value(i) - reference(mesh.vertex(i))).abs())
        .fold(0.0f64, f64::max)
}

fn l2_error_against_reference<F>(v: &ValueFunction, reference: F) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let mesh = v.mesh();
    let sum: f64 = (0..mesh.n_vertices())
        .map(|i| (v.value(i) - reference(mesh.vertex(i))).powi(2))
        .sum();
    (sum / mesh.n_vertices() as f64).sqrt()
}

/// Least-squares regression of `ln(errors)` on `ln(sizes)`.
pub fn fit_log_log(sizes: &[f64], errors: &[f64]) -> Result<RateFit> {
    if sizes.len() != errors.len() || sizes.len() < 2 {
        return Err(Error::InvalidArgument(
            "rate fit needs at least two (size, error) pairs".into(),
        ));
    }
    if sizes.iter().chain(errors).any(|&x| x <= 0.0 || !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "rate fit requires positive finite sizes and errors".into(),
        ));
    }
    let xs: Vec<f64> = sizes.iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(Error::InvalidArgument(
            "rate fit requires at least two distinct sizes".into(),
        ));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let mean = sy / n;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
    })
}

fn resolve_reference(
    problem: &Problem,
    reference: &StudyReference,
    config: &SolveConfig,
    warnings: &mut Vec<String>,
    finest_schedule_size: f64,
) -> Result<ExactFn> {
    match reference {
        StudyReference::Exact(f) => Ok(Arc::clone(f)),
        StudyReference::FineSolve { h, cells_per_dim } => {
            let mesh = Arc::new(SimplicialMesh::uniform(
                problem.domain().clone(),
                cells_per_dim,
            )?);
            if h + mesh.k() > 0.25 * finest_schedule_size {
                warnings.push(format!(
                    "fine-solve reference (h + k = {:.3e}) is not at least 4x finer \
                     than the finest schedule entry (h + k = {:.3e}); errors near the \
                     reference resolution are unreliable",
                    h + mesh.k(),
                    finest_schedule_size
                ));
            }
            let v = solve_fixed_point(problem, &mesh, *h, config)?;
            let field = v.field().clone();
            Ok(Arc::new(move |y: &[f64]| {
                field.interpolate_scalar(y).unwrap_or(f64::NAN)
            }))
        }
    }
}

/// Runs one solve per schedule entry and fits the error decay against
/// `h + k`. A failing solve aborts but keeps the records gathered so far.
pub fn run_refinement_study(
    problem: &Problem,
    schedule: &RefinementSchedule,
    config: &SolveConfig,
) -> std::result::Result<ConvergenceRun, StudyFailure> {
    let fail = |entry: usize, source: Error, partial: Vec<StudyRecord>| StudyFailure {
        entry,
        source,
        partial,
    };

    if schedule.entries.is_empty() {
        return Err(fail(
            0,
            Error::InvalidArgument("refinement schedule is empty".into()),
            Vec::new(),
        ));
    }

    let mut warnings = Vec::new();

    // The reference must out-resolve the finest entry.
    let mut finest = f64::INFINITY;
    for (i, entry) in schedule.entries.iter().enumerate() {
        let mesh = SimplicialMesh::uniform(problem.domain().clone(), &entry.cells_per_dim)
            .map_err(|e| fail(i, e, Vec::new()))?;
        finest = finest.min(entry.h + mesh.k());
    }
    let reference = resolve_reference(problem, &schedule.reference, config, &mut warnings, finest)
        .map_err(|e| fail(0, e, Vec::new()))?;

    let mut records: Vec<StudyRecord> = Vec::with_capacity(schedule.entries.len());
    for (i, entry) in schedule.entries.iter().enumerate() {
        let started = Instant::now();
        let solved = SimplicialMesh::uniform(problem.domain().clone(), &entry.cells_per_dim)
            .map(Arc::new)
            .and_then(|mesh| solve_fixed_point(problem, &mesh, entry.h, config));
        let v = match solved {
            Ok(v) => v,
            Err(e) => return Err(fail(i, e, records)),
        };
        records.push(StudyRecord {
            h: entry.h,
            k: v.mesh().k(),
            sup_error: error_against_reference(&v, |y| reference(y)),
            l2_error: l2_error_against_reference(&v, |y| reference(y)),
            iterations: v.iterations(),
            clamp_events: v.clamp_events(),
            wall_seconds: started.elapsed().as_secs_f64(),
        });
    }

    records.sort_by(|a, b| (b.h + b.k).partial_cmp(&(a.h + a.k)).unwrap());

    let fit = if records.len() >= 2 {
        let sizes: Vec<f64> = records.iter().map(|r| r.h + r.k).collect();
        let errors: Vec<f64> = records
            .iter()
            .map(|r| r.sup_error.max(f64::MIN_POSITIVE))
            .collect();
        match fit_log_log(&sizes, &errors) {
            Ok(fit) => {
                if fit.r_squared < FIT_RELIABLE_R2 {
                    warnings.push(format!(
                        "rate fit R^2 = {:.4} is below {FIT_RELIABLE_R2}; the slope \
                         estimate is unreliable",
                        fit.r_squared
                    ));
                }
                Some(fit)
            }
            Err(e) => {
                warnings.push(format!("rate fit failed: {e}"));
                None
            }
        }
    } else {
        None
    };

    Ok(ConvergenceRun {
        records,
        fit,
        warnings,
    })
}

/// One row of a fixed-k sweep.
#[derive(Debug, Clone)]
pub struct FixedKRow {
    pub h: f64,
    pub sup_error: f64,
    pub iterations: usize,
    /// `error(h_i) / error(h_{i-1})` against the previous (larger) h.
    pub ratio: Option<f64>,
}

/// Errors on a frozen mesh as h decreases.
#[derive(Debug, Clone)]
pub struct FixedKSweep {
    pub k: f64,
    pub rows: Vec<FixedKRow>,
    /// Largest consecutive ratio; growth beyond ~1 as h shrinks would
    /// vindicate a k/h-type bound.
    pub max_ratio: Option<f64>,
    /// Fit of log(sup_error) vs log(h), when at least two rows exist.
    pub fit: Option<RateFit>,
    pub warnings: Vec<String>,
}

/// Solves on one mesh for each h in `h_list` (strictly decreasing) and
/// reports consecutive error ratios.
pub fn fixed_k_sweep(
    problem: &Problem,
    cells_per_dim: &[usize],
    h_list: &[f64],
    reference: &StudyReference,
    config: &SolveConfig,
) -> std::result::Result<FixedKSweep, StudyFailure> {
    let fail = |entry: usize, source: Error, partial: Vec<StudyRecord>| StudyFailure {
        entry,
        source,
        partial,
    };
    if h_list.is_empty() {
        return Err(fail(
            0,
            Error::InvalidArgument("h list is empty".into()),
            Vec::new(),
        ));
    }
    if h_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(fail(
            0,
            Error::InvalidArgument("h list must be strictly decreasing".into()),
            Vec::new(),
        ));
    }

    let mesh = SimplicialMesh::uniform(problem.domain().clone(), cells_per_dim)
        .map(Arc::new)
        .map_err(|e| fail(0, e, Vec::new()))?;
    let mut warnings = Vec::new();
    let finest = h_list[h_list.len() - 1] + mesh.k();
    let reference = resolve_reference(problem, reference, config, &mut warnings, finest)
        .map_err(|e| fail(0, e, Vec::new()))?;

    let mut rows: Vec<FixedKRow> = Vec::with_capacity(h_list.len());
    for (i, &h) in h_list.iter().enumerate() {
        let v = match solve_fixed_point(problem, &mesh, h, config) {
            Ok(v) => v,
            Err(e) => {
                let partial = rows
                    .iter()
                    .map(|r| StudyRecord {
                        h: r.h,
                        k: mesh.k(),
                        sup_error: r.sup_error,
                        l2_error: f64::NAN,
                        iterations: r.iterations,
                        clamp_events: 0,
                        wall_seconds: f64::NAN,
                    })
                    .collect();
                return Err(fail(i, e, partial));
            }
        };
        let sup_error = error_against_reference(&v, |y| reference(y));
        let ratio = rows.last().map(|prev| sup_error / prev.sup_error);
        rows.push(FixedKRow {
            h,
            sup_error,
            iterations: v.iterations(),
            ratio,
        });
    }

    let max_ratio = rows.iter().filter_map(|r| r.ratio).fold(None, |m, r| {
        Some(match m {
            None => r,
            Some(m) => f64::max(m, r),
        })
    });
    let fit = if rows.len() >= 2 {
        let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
        let errors: Vec<f64> = rows
            .iter()
            .map(|r| r.sup_error.max(f64::MIN_POSITIVE))
            .collect();
        fit_log_log(&hs, &errors).ok()
    } else {
        None
    };

    Ok(FixedKSweep {
        k: mesh.k(),
        rows,
        max_ratio,
        fit,
        warnings,
    })
}

/// Full round-trip decimal formatting (17 significant digits) so CSV
/// consumers reconstruct the exact binary values.
pub fn full_precision(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes study records as CSV followed by a `#`-commented summary block.
pub fn write_study_csv<W: IoWrite>(run: &ConvergenceRun, w: &mut W) -> std::io::Result<()> {
    writeln!(
        w,
        "h,k,sup_error,l2_error,iterations,clamp_events,wall_seconds"
    )?;
    for r in &run.records {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            full_precision(r.h),
            full_precision(r.k),
            full_precision(r.sup_error),
            full_precision(r.l2_error),
            r.iterations,
            r.clamp_events,
            full_precision(r.wall_seconds)
        )?;
    }
    if let Some(fit) = &run.fit {
        writeln!(w, "# slope,{}", full_precision(fit.slope))?;
        writeln!(w, "# intercept,{}", full_precision(fit.intercept))?;
        writeln!(w, "# r_squared,{}", full_precision(fit.r_squared))?;
    }
    for warning in &run.warnings {
        writeln!(w, "# warning,{warning}")?;
    }
    Ok(())
}

/// Writes a fixed-k sweep as CSV followed by a `#`-commented summary block.
pub fn write_fixed_k_csv<W: IoWrite>(sweep: &FixedKSweep, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "h,sup_error,iterations,ratio")?;
    for r in &sweep.rows {
        writeln!(
            w,
            "{},{},{},{}",
            full_precision(r.h),
            full_precision(r.sup_error),
            r.iterations,
            r.ratio.map(full_precision).unwrap_or_default()
        )?;
    }
    writeln!(w, "# k,{}", full_precision(sweep.k))?;
    if let Some(max_ratio) = sweep.max_ratio {
        writeln!(w, "# max_ratio,{}", full_precision(max_ratio))?;
    }
    if let Some(fit) = &sweep.fit {
        writeln!(w, "# slope_vs_h,{}", full_precision(fit.slope))?;
        writeln!(w, "# r_squared,{}", full_precision(fit.r_squared))?;
    }
    for warning in &sweep.warnings {
        writeln!(w, "# warning,{warning}")?;
    }
    Ok(())
}
