//! The JSON problem-file schema and its resolution into a validated
//! [`ProblemSpec`].
//!
//! Unknown keys are rejected everywhere (fail closed). Resolution fills in
//! every documented default — the terminal box, kernel families and shape
//! parameters, the center strategy, the solver options — and returns the
//! fully resolved file alongside the spec, so a report's configuration echo
//! can be fed back in and reproduce the run exactly.

use serde::{Deserialize, Serialize};

use okoc_core::assembly::{median_heuristic_shape, BoxDomain, CenterStrategy, ProblemSpec};
use okoc_core::exprlang::{Expr, ParseError};
use okoc_core::kernels::KernelConfig;
use okoc_core::solver::SolveOptions;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub x0: Vec<f64>,
    #[serde(rename = "X")]
    pub x_box: BoxFile,
    #[serde(rename = "U")]
    pub u_box: BoxFile,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d_box: Option<BoxFile>,
    pub dynamics: Vec<String>,
    pub running_cost: String,
    pub terminal_cost: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSection>,
    pub centers: CentersSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxFile {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub s: Option<KernelFile>,
    #[serde(rename = "Sigma", default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<KernelFile>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<KernelFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelFile {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CentersSection {
    #[serde(rename = "M_S")]
    pub m_s: usize,
    #[serde(rename = "M_D")]
    pub m_d: usize,
    #[serde(rename = "M_b")]
    pub m_b: usize,
    #[serde(default = "default_strategy")]
    pub strategy: String,
    #[serde(default)]
    pub seed: u64,
}

fn default_strategy() -> String {
    "halton".to_string()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eq_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stat_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty_init: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty_growth: Option<f64>,
}

/// A problem file with every default materialized, plus the validated spec
/// and solver options derived from it.
#[derive(Debug)]
pub struct Resolved {
    pub file: ProblemFile,
    pub spec: ProblemSpec,
    pub strategy: CenterStrategy,
    pub solve_options: SolveOptions,
}

pub fn load(path: &std::path::Path) -> Result<ProblemFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Schema(format!("cannot read {}: {e}", path.display())))?;
    parse_problem(&text)
}

pub fn parse_problem(text: &str) -> Result<ProblemFile, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))
}

fn expr_err(role: &str, err: ParseError) -> CliError {
    CliError::Expr(format!("{role}: {err}"))
}

/// Validate and fill in the documented defaults. A resolved file resolves
/// to itself, bit for bit.
pub fn resolve(file: &ProblemFile) -> Result<Resolved, CliError> {
    let n = file.n;
    let m = file.m;
    let schema = |msg: String| CliError::Schema(msg);

    if file.dynamics.len() != n {
        return Err(schema(format!(
            "key `dynamics`: expected {n} entries, got {}",
            file.dynamics.len()
        )));
    }
    let x_box = BoxDomain::new(file.x_box.lower.clone(), file.x_box.upper.clone())
        .map_err(|e| schema(format!("key `X`: {e}")))?;
    let u_box = BoxDomain::new(file.u_box.lower.clone(), file.u_box.upper.clone())
        .map_err(|e| schema(format!("key `U`: {e}")))?;
    if x_box.dim() != n {
        return Err(schema(format!("key `X`: has {} coordinates, n = {n}", x_box.dim())));
    }
    if u_box.dim() != m {
        return Err(schema(format!("key `U`: has {} coordinates, m = {m}", u_box.dim())));
    }
    let d_file = file.d_box.clone().unwrap_or_else(|| file.x_box.clone());
    let d_box = BoxDomain::new(d_file.lower.clone(), d_file.upper.clone())
        .map_err(|e| schema(format!("key `D`: {e}")))?;
    if d_box.dim() != n {
        return Err(schema(format!("key `D`: has {} coordinates, n = {n}", d_box.dim())));
    }

    let dynamics: Vec<Expr> = file
        .dynamics
        .iter()
        .enumerate()
        .map(|(i, src)| Expr::parse(src, n, m).map_err(|e| expr_err(&format!("dynamics[{i}]"), e)))
        .collect::<Result<_, _>>()?;
    let running_cost =
        Expr::parse(&file.running_cost, n, m).map_err(|e| expr_err("running_cost", e))?;
    let terminal_cost =
        Expr::parse(&file.terminal_cost, n, 0).map_err(|e| expr_err("terminal_cost", e))?;
    if terminal_cost.references_t() {
        return Err(CliError::Expr(
            "terminal_cost: must be a function of the state alone, found `t`".into(),
        ));
    }

    let horizon = file.horizon;
    let sigma_box = x_box.with_time(horizon);
    let s_box = sigma_box.product(&u_box);
    let kernel_section = file.kernel.clone().unwrap_or_default();
    let (kernel_s, s_file) = resolve_kernel("S", kernel_section.s, &s_box, 1 + n + m)?;
    let (kernel_sigma, sigma_file) =
        resolve_kernel("Sigma", kernel_section.sigma, &sigma_box, 1 + n)?;
    let (kernel_d, d_kernel_file) = resolve_kernel("D", kernel_section.d, &d_box, n)?;

    let strategy = match file.centers.strategy.as_str() {
        "halton" => CenterStrategy::Halton,
        "grid" => CenterStrategy::Grid,
        other => {
            return Err(schema(format!(
                "key `centers.strategy`: unknown strategy `{other}` (use `halton` or `grid`)"
            )))
        }
    };

    let solver_section = file.solver.clone().unwrap_or_default();
    let defaults = SolveOptions::default();
    let solve_options = SolveOptions {
        eq_tol: solver_section.eq_tol.unwrap_or(defaults.eq_tol),
        stat_tol: solver_section.stat_tol.unwrap_or(defaults.stat_tol),
        max_iters: solver_section.max_iters.unwrap_or(defaults.max_iters),
        penalty_init: solver_section.penalty_init.unwrap_or(defaults.penalty_init),
        penalty_growth: solver_section.penalty_growth.unwrap_or(defaults.penalty_growth),
    };

    let spec = ProblemSpec::new(
        horizon,
        file.x0.clone(),
        x_box,
        u_box,
        d_box,
        dynamics,
        running_cost,
        terminal_cost,
        kernel_s,
        kernel_sigma,
        kernel_d,
    )
    .map_err(|e| schema(e.to_string()))?;

    let resolved_file = ProblemFile {
        d_box: Some(d_file),
        kernel: Some(KernelSection {
            s: Some(s_file),
            sigma: Some(sigma_file),
            d: Some(d_kernel_file),
        }),
        centers: CentersSection {
            strategy: file.centers.strategy.clone(),
            ..file.centers.clone()
        },
        solver: Some(SolverSection {
            eq_tol: Some(solve_options.eq_tol),
            stat_tol: Some(solve_options.stat_tol),
            max_iters: Some(solve_options.max_iters),
            penalty_init: Some(solve_options.penalty_init),
            penalty_growth: Some(solve_options.penalty_growth),
        }),
        ..file.clone()
    };

    Ok(Resolved { file: resolved_file, spec, strategy, solve_options })
}

/// Kernel defaults: family `gaussian` with the median-heuristic shape for
/// the space's box; Wendland support radii default to the box diameter.
/// The bare family name `wendland` picks C4 on `Sigma` (the space whose
/// sections are differentiated) and C2 elsewhere.
fn resolve_kernel(
    space: &str,
    entry: Option<KernelFile>,
    domain: &BoxDomain,
    dim: usize,
) -> Result<(KernelConfig, KernelFile), CliError> {
    let entry = entry.unwrap_or_else(|| KernelFile {
        family: "gaussian".to_string(),
        shape: None,
        support_radius: None,
    });
    let schema = |msg: String| CliError::Schema(msg);
    let family = match entry.family.as_str() {
        "gaussian" => "gaussian",
        "wendland_c2" => "wendland_c2",
        "wendland_c4" => "wendland_c4",
        "wendland" => {
            if space == "Sigma" {
                "wendland_c4"
            } else {
                "wendland_c2"
            }
        }
        other => {
            return Err(schema(format!(
                "kernel.{space}: unknown family `{other}` \
                 (use gaussian, wendland, wendland_c2, or wendland_c4)"
            )))
        }
    };
    match family {
        "gaussian" => {
            if entry.support_radius.is_some() {
                return Err(schema(format!(
                    "kernel.{space}: `support_radius` does not apply to the gaussian family"
                )));
            }
            let shape = entry.shape.unwrap_or_else(|| median_heuristic_shape(domain));
            let config = KernelConfig::gaussian(shape, dim)
                .map_err(|e| schema(format!("kernel.{space}: {e}")))?;
            Ok((
                config,
                KernelFile {
                    family: "gaussian".to_string(),
                    shape: Some(shape),
                    support_radius: None,
                },
            ))
        }
        wendland => {
            if entry.shape.is_some() {
                return Err(schema(format!(
                    "kernel.{space}: `shape` does not apply to wendland families \
                     (use `support_radius`)"
                )));
            }
            let radius = entry.support_radius.unwrap_or_else(|| domain.diameter());
            let config = if wendland == "wendland_c2" {
                KernelConfig::wendland_c2(radius, dim)
            } else {
                KernelConfig::wendland_c4(radius, dim)
            }
            .map_err(|e| schema(format!("kernel.{space}: {e}")))?;
            Ok((
                config,
                KernelFile {
                    family: wendland.to_string(),
                    shape: None,
                    support_radius: Some(radius),
                },
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> serde_json::Value {
        serde_json::json!({
            "n": 1,
            "m": 1,
            "T": 1.0,
            "x0": [1.0],
            "X": {"lower": [-2.0], "upper": [2.0]},
            "U": {"lower": [-1.0], "upper": [1.0]},
            "dynamics": ["-x1+u1"],
            "running_cost": "x1^2+u1^2",
            "terminal_cost": "0",
            "centers": {"M_S": 20, "M_D": 4, "M_b": 8}
        })
    }

    #[test]
    fn minimal_file_resolves_with_defaults() {
        let file = parse_problem(&minimal_json().to_string()).unwrap();
        let resolved = resolve(&file).unwrap();
        assert_eq!(resolved.file.centers.strategy, "halton");
        assert_eq!(resolved.file.centers.seed, 0);
        let kernel = resolved.file.kernel.as_ref().unwrap();
        assert_eq!(kernel.s.as_ref().unwrap().family, "gaussian");
        assert!(kernel.s.as_ref().unwrap().shape.unwrap() > 0.0);
        assert!(resolved.file.d_box.is_some());
        assert_eq!(resolved.solve_options.eq_tol, 1e-6);
    }

    #[test]
    fn resolution_is_idempotent() {
        let file = parse_problem(&minimal_json().to_string()).unwrap();
        let once = resolve(&file).unwrap();
        let twice = resolve(&once.file).unwrap();
        assert_eq!(once.file, twice.file);
        // round trip through JSON keeps every bit
        let json = serde_json::to_string(&once.file).unwrap();
        let back: ProblemFile = serde_json::from_str(&json).unwrap();
        assert_eq!(once.file, back);
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut v = minimal_json();
        v["surprise"] = serde_json::json!(1);
        let err = parse_problem(&v.to_string()).unwrap_err();
        assert_eq!(err.exit_code(), 64);
        assert!(err.to_string().contains("surprise"), "{err}");
    }

    #[test]
    fn out_of_signature_dynamics_is_expr_error() {
        let mut v = minimal_json();
        v["dynamics"] = serde_json::json!(["x9"]);
        let file = parse_problem(&v.to_string()).unwrap();
        let err = resolve(&file).unwrap_err();
        assert_eq!(err.exit_code(), 65);
        assert!(err.to_string().contains("x9"), "{err}");
    }

    #[test]
    fn terminal_cost_with_time_rejected() {
        let mut v = minimal_json();
        v["terminal_cost"] = serde_json::json!("t+x1");
        let file = parse_problem(&v.to_string()).unwrap();
        let err = resolve(&file).unwrap_err();
        assert_eq!(err.exit_code(), 65);
    }

    #[test]
    fn wendland_alias_picks_order_per_space() {
        let mut v = minimal_json();
        v["kernel"] = serde_json::json!({
            "S": {"family": "wendland"},
            "Sigma": {"family": "wendland"}
        });
        let file = parse_problem(&v.to_string()).unwrap();
        let resolved = resolve(&file).unwrap();
        let kernel = resolved.file.kernel.unwrap();
        assert_eq!(kernel.s.unwrap().family, "wendland_c2");
        assert_eq!(kernel.sigma.unwrap().family, "wendland_c4");
        assert_eq!(kernel.d.unwrap().family, "gaussian");
    }

    #[test]
    fn gaussian_with_support_radius_fails_closed() {
        let mut v = minimal_json();
        v["kernel"] = serde_json::json!({"S": {"family": "gaussian", "support_radius": 1.0}});
        let file = parse_problem(&v.to_string()).unwrap();
        assert_eq!(resolve(&file).unwrap_err().exit_code(), 64);
    }

    #[test]
    fn bad_strategy_rejected() {
        let mut v = minimal_json();
        v["centers"]["strategy"] = serde_json::json!("sobol");
        let file = parse_problem(&v.to_string()).unwrap();
        assert_eq!(resolve(&file).unwrap_err().exit_code(), 64);
    }
}
