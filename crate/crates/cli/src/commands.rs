//! The three pipelines behind the `okoc` subcommands. Each returns the
//! process exit code; reports and tables go to files, whose paths are
//! printed on stdout by the binary.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use okoc_core::assembly::{assemble, generate_centers, BoxDomain, CenterSet};
use okoc_core::occupation::{
    boundary_difference, occupation_norm_sq, total_derivative_integral_segment,
};
use okoc_core::oracle::{brute_force_cost, riccati_lq_cost, simulate, PiecewiseControl};
use okoc_core::solver::{solve, SolveStatus};

use crate::problem::{load, resolve, Resolved};
use crate::report::Report;
use crate::{CliError, EXIT_INFEASIBLE, EXIT_OK, EXIT_TOLERANCE};

pub struct SolveArgs {
    pub problem: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub emit_weights: bool,
    pub emit_plot_data: Option<PathBuf>,
}

pub struct SolveOutcome {
    pub report_path: PathBuf,
    pub report: Report,
    pub exit_code: i32,
}

fn default_out(problem: &Path, suffix: &str) -> PathBuf {
    let stem = problem
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "problem".to_string());
    problem.with_file_name(format!("{stem}.{suffix}"))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::OutputIo(format!("cannot write {}: {e}", path.display())))
}

/// `okoc solve`: generate centers, assemble, solve, write the report.
pub fn cmd_solve(args: &SolveArgs) -> Result<SolveOutcome, CliError> {
    let started = std::time::Instant::now();
    let mut file = load(&args.problem)?;
    if let Some(seed) = args.seed {
        file.centers.seed = seed;
    }
    let Resolved { file: resolved, spec, strategy, solve_options } = resolve(&file)?;

    let centers = generate_centers(
        &spec,
        resolved.centers.m_s,
        resolved.centers.m_d,
        resolved.centers.m_b,
        strategy,
        resolved.centers.seed,
    )
    .map_err(|e| CliError::Schema(format!("centers: {e}")))?;
    let program = assemble(&spec, &centers).map_err(|e| CliError::Numeric(e.to_string()))?;
    let result = solve(&program, &solve_options).map_err(|e| CliError::Numeric(e.to_string()))?;

    if let Some(dir) = &args.emit_plot_data {
        emit_center_scatter(dir, &centers, spec.state_dim(), spec.control_dim())?;
    }

    let report = Report::new(
        resolved,
        &result,
        program.diagnostics().far_sigma_rows.clone(),
        started.elapsed().as_secs_f64(),
        args.emit_weights,
    )?;
    let report_path = args.out.clone().unwrap_or_else(|| default_out(&args.problem, "report.json"));
    write_file(&report_path, &report.to_json()?)?;

    let exit_code = match result.status {
        SolveStatus::Optimal => EXIT_OK,
        SolveStatus::ToleranceNotMet => EXIT_TOLERANCE,
        SolveStatus::Infeasible => EXIT_INFEASIBLE,
    };
    Ok(SolveOutcome { report_path, report, exit_code })
}

fn emit_center_scatter(
    dir: &Path,
    centers: &CenterSet,
    n: usize,
    m: usize,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::OutputIo(format!("cannot create {}: {e}", dir.display())))?;
    let table = |points: &[Vec<f64>], header: &[String]| -> String {
        let mut out = header.join(",");
        out.push('\n');
        for p in points {
            let row: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    };
    let s_header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("x{i}")))
        .chain((1..=m).map(|i| format!("u{i}")))
        .collect();
    let sigma_header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("x{i}")))
        .collect();
    let d_header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    write_file(&dir.join("s_centers.csv"), &table(centers.s_centers(), &s_header))?;
    write_file(&dir.join("sigma_centers.csv"), &table(centers.sigma_centers(), &sigma_header))?;
    write_file(&dir.join("d_centers.csv"), &table(centers.d_centers(), &d_header))?;
    Ok(())
}

pub struct ValidateArgs {
    pub problem: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub trajectories: usize,
    pub sigma_samples: usize,
    pub steps: usize,
    pub segments: usize,
    pub adjoint_tol: f64,
    pub emit_plot_data: Option<PathBuf>,
}

pub struct ValidateOutcome {
    pub table_path: PathBuf,
    pub max_adjoint_residual: f64,
    pub all_passed: bool,
    pub exit_code: i32,
}

fn sample_box(rng: &mut ChaCha8Rng, domain: &BoxDomain) -> Vec<f64> {
    (0..domain.dim())
        .map(|i| rng.gen_range(domain.lower()[i]..=domain.upper()[i]))
        .collect()
}

/// `okoc validate`: simulate random piecewise-constant controls and check
/// the adjoint identity against random test-function centers, plus the
/// occupation-norm bound. The integral is evaluated segment by segment so
/// control discontinuities cost no quadrature order.
pub fn cmd_validate(args: &ValidateArgs) -> Result<ValidateOutcome, CliError> {
    let file = load(&args.problem)?;
    let Resolved { spec, .. } = resolve(&file)?;
    if args.segments == 0
        || args.steps % args.segments != 0
        || (args.steps / args.segments) % 2 != 0
    {
        return Err(CliError::Schema(format!(
            "steps ({}) must split into {} segments with an even node count each",
            args.steps, args.segments
        )));
    }
    if args.trajectories == 0 || args.sigma_samples == 0 {
        return Err(CliError::Schema("trajectories and sigma-samples must be positive".into()));
    }
    let seed = args.seed.unwrap_or(file.centers.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma_box = spec.sigma_box();
    let steps_per_segment = args.steps / args.segments;
    let norm_bound =
        spec.horizon() * spec.horizon() * spec.kernel_s().phi0() * (1.0 + 1e-8);

    let mut rows = Vec::new();
    let mut all_passed = true;
    let mut max_adjoint_residual: f64 = 0.0;
    let mut residuals = Vec::new();
    for traj_idx in 0..args.trajectories {
        let values: Vec<Vec<f64>> = (0..args.segments)
            .map(|_| sample_box(&mut rng, spec.u_box()))
            .collect();
        let control = PiecewiseControl::uniform_segments(values.clone(), spec.horizon())
            .map_err(|e| CliError::Numeric(e.to_string()))?;
        let traj = simulate(spec.dynamics(), spec.x0(), &control, spec.horizon(), args.steps)
            .map_err(|e| CliError::Numeric(e.to_string()))?;

        for center_idx in 0..args.sigma_samples {
            let center = sample_box(&mut rng, &sigma_box);
            let mut integral = 0.0;
            for (seg, seg_control) in values.iter().enumerate() {
                integral += total_derivative_integral_segment(
                    spec.kernel_sigma(),
                    spec.dynamics(),
                    &traj,
                    &center,
                    seg * steps_per_segment,
                    (seg + 1) * steps_per_segment,
                    seg_control,
                )
                .map_err(|e| CliError::Numeric(e.to_string()))?;
            }
            let boundary = boundary_difference(spec.kernel_sigma(), &traj, &center)
                .map_err(|e| CliError::Numeric(e.to_string()))?;
            let residual = (integral - boundary).abs();
            let passed = residual <= args.adjoint_tol;
            all_passed &= passed;
            max_adjoint_residual = max_adjoint_residual.max(residual);
            residuals.push(residual);
            rows.push(format!(
                "{traj_idx},adjoint_residual,{center_idx},{residual},{},{passed}",
                args.adjoint_tol
            ));
        }

        let norm_sq = occupation_norm_sq(spec.kernel_s(), &traj)
            .map_err(|e| CliError::Numeric(e.to_string()))?;
        let passed = norm_sq <= norm_bound;
        all_passed &= passed;
        rows.push(format!("{traj_idx},occupation_norm_sq,,{norm_sq},{norm_bound},{passed}"));
    }

    let mut table = String::from("trajectory,check,center,value,threshold,passed\n");
    for row in &rows {
        table.push_str(row);
        table.push('\n');
    }
    let table_path = args.out.clone().unwrap_or_else(|| default_out(&args.problem, "validate.csv"));
    write_file(&table_path, &table)?;

    if let Some(dir) = &args.emit_plot_data {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::OutputIo(format!("cannot create {}: {e}", dir.display())))?;
        write_file(&dir.join("residual_histogram.csv"), &histogram_csv(&residuals, 20))?;
    }

    Ok(ValidateOutcome {
        table_path,
        max_adjoint_residual,
        all_passed,
        exit_code: if all_passed { EXIT_OK } else { EXIT_TOLERANCE },
    })
}

fn histogram_csv(values: &[f64], bins: usize) -> String {
    let mut out = String::from("bin_lower,bin_upper,count\n");
    if values.is_empty() {
        return out;
    }
    let max = values.iter().copied().fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    let width = max / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let mut bin = (v / width) as usize;
        if bin >= bins {
            bin = bins - 1;
        }
        counts[bin] += 1;
    }
    for (i, count) in counts.iter().enumerate() {
        let lo = i as f64 * width;
        let hi = (i + 1) as f64 * width;
        out.push_str(&format!("{lo},{hi},{count}\n"));
    }
    out
}

pub struct OracleArgs {
    pub problem: PathBuf,
    pub out: Option<PathBuf>,
    /// `key=value` pairs: a, b, q, r.
    pub riccati: Option<Vec<String>>,
    /// `key=value` pairs: levels (comma separated), segments,
    /// steps_per_segment.
    pub brute: Option<Vec<String>>,
}

pub struct OracleOutcome {
    pub table_path: PathBuf,
    pub cost: f64,
    pub exit_code: i32,
}

fn parse_kv(pairs: &[String]) -> Result<std::collections::BTreeMap<String, String>, CliError> {
    let mut map = std::collections::BTreeMap::new();
    for pair in pairs {
        let (key, value) = pair.split_once('=').ok_or_else(|| {
            CliError::Schema(format!("expected key=value, got `{pair}`"))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_num<T: std::str::FromStr>(
    map: &std::collections::BTreeMap<String, String>,
    key: &str,
    default: T,
) -> Result<T, CliError> {
    match map.get(key) {
        None => Ok(default),
        Some(raw) => raw
            .parse()
            .map_err(|_| CliError::Schema(format!("oracle flag `{key}`: cannot parse `{raw}`"))),
    }
}

/// `okoc oracle`: ground-truth costs. `--riccati` integrates the scalar
/// Riccati equation for the LQ instance; `--brute` enumerates
/// piecewise-constant controls.
pub fn cmd_oracle(args: &OracleArgs) -> Result<OracleOutcome, CliError> {
    let file = load(&args.problem)?;
    let Resolved { spec, .. } = resolve(&file)?;
    let table_path = args.out.clone().unwrap_or_else(|| default_out(&args.problem, "oracle.csv"));
    match (&args.riccati, &args.brute) {
        (Some(pairs), None) => {
            if spec.state_dim() != 1 {
                return Err(CliError::Schema(
                    "the riccati oracle applies to scalar problems (n = 1)".into(),
                ));
            }
            let map = parse_kv(pairs)?;
            for key in map.keys() {
                if !matches!(key.as_str(), "a" | "b" | "q" | "r") {
                    return Err(CliError::Schema(format!("unknown riccati flag `{key}`")));
                }
            }
            let a = parse_num(&map, "a", 0.0)?;
            let b = parse_num(&map, "b", 1.0)?;
            let q = parse_num(&map, "q", 1.0)?;
            let r = parse_num(&map, "r", 1.0)?;
            if r <= 0.0 || q < 0.0 {
                return Err(CliError::Schema("riccati needs r > 0 and q >= 0".into()));
            }
            let cost = riccati_lq_cost(a, b, q, r, spec.horizon(), spec.x0()[0]);
            write_file(&table_path, &format!("kind,cost\nriccati,{cost}\n"))?;
            Ok(OracleOutcome { table_path, cost, exit_code: EXIT_OK })
        }
        (None, Some(pairs)) => {
            let map = parse_kv(pairs)?;
            for key in map.keys() {
                if !matches!(key.as_str(), "levels" | "segments" | "steps_per_segment") {
                    return Err(CliError::Schema(format!("unknown brute flag `{key}`")));
                }
            }
            let levels_raw = map
                .get("levels")
                .ok_or_else(|| CliError::Schema("brute oracle needs `levels=v1,v2,..`".into()))?;
            let levels: Vec<f64> = levels_raw
                .split(',')
                .map(|s| {
                    s.trim().parse().map_err(|_| {
                        CliError::Schema(format!("brute levels: cannot parse `{s}`"))
                    })
                })
                .collect::<Result<_, _>>()?;
            let segments: usize = parse_num(&map, "segments", 2)?;
            let steps_per_segment: usize = parse_num(&map, "steps_per_segment", 100)?;
            let (cost, control) = brute_force_cost(&spec, &levels, segments, steps_per_segment)
                .map_err(|e| match e {
                    okoc_core::oracle::OracleError::EnumerationGuard { .. }
                    | okoc_core::oracle::OracleError::EmptyEnumeration => {
                        CliError::Schema(e.to_string())
                    }
                    other => CliError::Numeric(other.to_string()),
                })?;
            let mut table = String::from("cost,segment");
            for j in 1..=spec.control_dim() {
                table.push_str(&format!(",u{j}"));
            }
            table.push('\n');
            if let PiecewiseControl::Piecewise { values, .. } = &control {
                for (seg, value) in values.iter().enumerate() {
                    table.push_str(&format!("{cost},{seg}"));
                    for v in value {
                        table.push_str(&format!(",{v}"));
                    }
                    table.push('\n');
                }
            }
            write_file(&table_path, &table)?;
            Ok(OracleOutcome { table_path, cost, exit_code: EXIT_OK })
        }
        _ => Err(CliError::Schema(
            "oracle needs exactly one of --riccati or --brute".into(),
        )),
    }
}
