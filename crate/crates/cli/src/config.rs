//! Run configuration: a JSON file selecting the problem, discretization and
//! per-subcommand parameters.
//!
//! Problems come either from the compiled-in benchmark registry
//! (`{"problem": {"name": "manufactured_1d"}}`) or inline from expression
//! strings (`{"problem": {"dsl": {...}}}`). There are no defaults for `h`,
//! `lambda` or the mesh size: every run states its discretization
//! explicitly.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use hjb_core::expr::Expression;
use hjb_core::mesh::BoxDomain;
use hjb_core::problem::{benchmarks, ControlSet, ManufacturedProblem, Problem, ProblemBounds};
use hjb_core::solver::{InitialGuess, OutOfDomainPolicy, SolveConfig};
use hjb_core::study::ExactFn;

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub controls: Option<ControlSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSpec>,
    /// Time step for solve / oracle / rollout / validate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    /// Mesh cells for solve / oracle / rollout / validate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells_per_dim: Option<Vec<usize>>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub study: Option<StudySpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rollout: Option<RolloutSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// A compiled-in benchmark.
    Name(String),
    /// Inline expression strings.
    Dsl(DslSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DslSpec {
    /// One expression per state dimension.
    pub dynamics: Vec<String>,
    /// Running cost; exactly one of `running_cost` / `vstar`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub running_cost: Option<String>,
    /// Exact value function; the running cost is derived so that this is
    /// the solution.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vstar: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    /// Bounds may be omitted for registry problems (the benchmark fixes
    /// them).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lip_f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lip_g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sup_f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sup_g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lip_u: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub out_of_domain_policy: PolicySpec,
    /// Constant initial guess (zeros when absent).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_guess: Option<f64>,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let d = SolveConfig::default();
        Self {
            tolerance: d.tolerance,
            max_iterations: d.max_iterations,
            out_of_domain_policy: PolicySpec::Clamp,
            initial_guess: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum PolicySpec {
    Clamp,
    Reject,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<ScheduleEntrySpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_k: Option<FixedKSpec>,
    pub reference: ReferenceSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntrySpec {
    pub h: f64,
    pub cells_per_dim: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedKSpec {
    pub cells_per_dim: Vec<usize>,
    pub h_list: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSpec {
    /// The problem's exact value function (manufactured problems only).
    Exact,
    /// A fine solve at the given resolution.
    FineSolve(ScheduleEntrySpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutSpec {
    pub y0: Vec<f64>,
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub y0: Vec<f64>,
    /// Sequence length for the exhaustive search.
    pub n: usize,
    pub tail_tol: f64,
}

/// A problem ready to run, together with its exact value function when one
/// is known.
pub struct BuiltProblem {
    pub problem: Problem,
    pub exact: Option<ExactFn>,
}

fn input(message: impl Into<String>) -> CliError {
    CliError::Input(message.into())
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| input(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| input(format!("invalid config {}: {e}", path.display())))
    }

    pub fn solve_config(&self) -> Result<SolveConfig, CliError> {
        let spec = &self.solver;
        if !(spec.tolerance.is_finite() && spec.tolerance > 0.0) {
            return Err(input(format!(
                "solver.tolerance must be positive, got {}",
                spec.tolerance
            )));
        }
        if spec.max_iterations == 0 {
            return Err(input("solver.max_iterations must be at least 1"));
        }
        Ok(SolveConfig {
            tolerance: spec.tolerance,
            max_iterations: spec.max_iterations,
            policy: match spec.out_of_domain_policy {
                PolicySpec::Clamp => OutOfDomainPolicy::Clamp,
                PolicySpec::Reject => OutOfDomainPolicy::Reject,
            },
            initial: match spec.initial_guess {
                None => InitialGuess::Zeros,
                Some(c) => InitialGuess::Constant(c),
            },
        })
    }

    /// `h` for the single-solve subcommands.
    pub fn require_h(&self) -> Result<f64, CliError> {
        self.h
            .ok_or_else(|| input("config field 'h' is required for this subcommand"))
    }

    pub fn require_cells(&self) -> Result<&[usize], CliError> {
        self.cells_per_dim
            .as_deref()
            .ok_or_else(|| input("config field 'cells_per_dim' is required for this subcommand"))
    }

    /// Builds the problem, resolving registry names or parsing DSL strings.
    pub fn build_problem(&self) -> Result<BuiltProblem, CliError> {
        let built = match &self.problem {
            ProblemSpec::Name(name) => self.build_registry(name)?,
            ProblemSpec::Dsl(dsl) => self.build_dsl(dsl)?,
        };
        Ok(built)
    }

    fn build_registry(&self, name: &str) -> Result<BuiltProblem, CliError> {
        let counts = self.controls.as_ref().map(|c| c.counts.as_slice());
        let manufactured = benchmarks::by_name(name, counts)
            .map_err(|e| input(e.to_string()))?;

        if let Some(lambda) = self.lambda {
            if lambda != manufactured.problem().lambda() {
                return Err(input(format!(
                    "lambda {lambda} conflicts with benchmark '{name}' (lambda = {})",
                    manufactured.problem().lambda()
                )));
            }
        }
        if let Some(domain) = &self.domain {
            let expected = manufactured.problem().domain();
            if expected.lower() != domain.lower || expected.upper() != domain.upper {
                return Err(input(format!(
                    "domain conflicts with benchmark '{name}' (expected {expected})"
                )));
            }
        }
        if let Some(controls) = &self.controls {
            let expected = manufactured.problem().controls();
            if let Some(lower) = &controls.lower {
                if lower != expected.lower() {
                    return Err(input(format!(
                        "control bounds conflict with benchmark '{name}'"
                    )));
                }
            }
            if let Some(upper) = &controls.upper {
                if upper != expected.upper() {
                    return Err(input(format!(
                        "control bounds conflict with benchmark '{name}'"
                    )));
                }
            }
        }

        let manufactured = match self.bounds {
            Some(spec) => {
                let mut bounds = *manufactured.problem().bounds();
                apply_bounds(&mut bounds, spec);
                manufactured.with_bounds(bounds)
            }
            None => manufactured,
        };
        let exact = manufactured.exact_value_fn();
        Ok(BuiltProblem {
            problem: manufactured.into_problem(),
            exact: Some(exact),
        })
    }

    fn build_dsl(&self, dsl: &DslSpec) -> Result<BuiltProblem, CliError> {
        let lambda = self
            .lambda
            .ok_or_else(|| input("config field 'lambda' is required for DSL problems"))?;
        let domain_spec = self
            .domain
            .as_ref()
            .ok_or_else(|| input("config field 'domain' is required for DSL problems"))?;
        let domain = BoxDomain::new(domain_spec.lower.clone(), domain_spec.upper.clone())
            .map_err(|e| input(e.to_string()))?;
        let controls_spec = self
            .controls
            .as_ref()
            .ok_or_else(|| input("config field 'controls' is required for DSL problems"))?;
        let (lower, upper) = match (&controls_spec.lower, &controls_spec.upper) {
            (Some(lower), Some(upper)) => (lower.clone(), upper.clone()),
            _ => {
                return Err(input(
                    "controls.lower and controls.upper are required for DSL problems",
                ))
            }
        };
        let controls = ControlSet::tensor(&lower, &upper, &controls_spec.counts)
            .map_err(|e| input(e.to_string()))?;

        let dynamics: Vec<Expression> = dsl
            .dynamics
            .iter()
            .enumerate()
            .map(|(i, text)| {
                Expression::parse(text).map_err(|e| {
                    input(format!("dynamics[{i}] '{text}': {e}"))
                })
            })
            .collect::<Result<_, _>>()?;

        let mut bounds = ProblemBounds::default();
        if let Some(spec) = self.bounds {
            apply_bounds(&mut bounds, spec);
        }

        match (&dsl.running_cost, &dsl.vstar) {
            (Some(_), Some(_)) | (None, None) => Err(input(
                "DSL problems need exactly one of 'running_cost' or 'vstar'",
            )),
            (Some(text), None) => {
                let g = Expression::parse(text)
                    .map_err(|e| input(format!("running_cost '{text}': {e}")))?;
                let problem = Problem::new(dynamics, g, lambda, domain, controls)
                    .map_err(|e| input(e.to_string()))?
                    .with_bounds(bounds);
                Ok(BuiltProblem {
                    problem,
                    exact: None,
                })
            }
            (None, Some(text)) => {
                let vstar = Expression::parse(text)
                    .map_err(|e| input(format!("vstar '{text}': {e}")))?;
                let manufactured =
                    ManufacturedProblem::new(vstar, dynamics, lambda, domain, controls)
                        .map_err(|e| input(e.to_string()))?
                        .with_bounds(bounds);
                let exact = manufactured.exact_value_fn();
                Ok(BuiltProblem {
                    problem: manufactured.into_problem(),
                    exact: Some(exact),
                })
            }
        }
    }
}

fn apply_bounds(bounds: &mut ProblemBounds, spec: BoundsSpec) {
    if spec.lip_f.is_some() {
        bounds.lip_f = spec.lip_f;
    }
    if spec.lip_g.is_some() {
        bounds.lip_g = spec.lip_g;
    }
    if spec.sup_f.is_some() {
        bounds.sup_f = spec.sup_f;
    }
    if spec.sup_g.is_some() {
        bounds.sup_g = spec.sup_g;
    }
    if spec.lip_u.is_some() {
        bounds.lip_u = spec.lip_u;
    }
}

/// Exact-reference closure for study configs, failing when the problem has
/// no known exact solution.
pub fn resolve_reference(
    built: &BuiltProblem,
    spec: &ReferenceSpec,
) -> Result<hjb_core::study::StudyReference, CliError> {
    match spec {
        ReferenceSpec::Exact => built
            .exact
            .as_ref()
            .map(|f| hjb_core::study::StudyReference::Exact(Arc::clone(f)))
            .ok_or_else(|| {
                input(
                    "reference 'exact' needs a manufactured problem (registry \
                     benchmark or DSL with vstar)",
                )
            }),
        ReferenceSpec::FineSolve(entry) => Ok(hjb_core::study::StudyReference::FineSolve {
            h: entry.h,
            cells_per_dim: entry.cells_per_dim.clone(),
        }),
    }
}
