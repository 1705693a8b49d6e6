//! Command-line front end: `decompose`, `laws`, `dbar`, `converge`.
//!
//! Exit codes: 0 on success with all gates passing, 1 on contract/gate
//! failures (a report is still written), 2 on usage or configuration errors.
//! `KOSZUL_THREADS` caps the worker pool; reports are bitwise reproducible
//! for identical configurations regardless of thread count.

mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use num::complex::Complex64;
use num::Zero;

use koszul::dbar::{solve_dbar_polydisc, DbarError, DbarProblem};
use koszul::exterior::{ConjIndex, ExteriorIndex, KoszulForm};
use koszul::gleason::{
    gleason_decompose, CutoffSpec, Evaluator, GateCheck, GleasonConfig, HolomorphicInput,
    Tolerances,
};
use koszul::grid::{
    form_interior_max, l2_norm, read_csv, sample_poly, write_csv, GridField,
    GridGeometry, PolydiscSpec,
};
use koszul::registry::{builtin, REGISTRY_NAMES};
use koszul::symbolic::parse_poly;
use koszul::verify::{convergence_csv, convergence_study, run_law_suite, verify_decomposition};

use config::{parse_complex_list, parse_f64_list, parse_usize_list, ConfigFile};

#[derive(Parser)]
#[command(
    name = "koszul",
    about = "Gleason decompositions and dbar solves on polydiscs",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose g = Σ (z_j − α_j) g_j and report residuals and norms.
    Decompose(DecomposeArgs),
    /// Run the exact Koszul law suite on random polynomial forms.
    Laws(LawsArgs),
    /// Solve a dbar problem on a polydisc from a potential or CSV fields.
    Dbar(DbarArgs),
    /// Convergence study of the decomposition over a grid-size list.
    Converge(ConvergeArgs),
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Config file with `key = value` lines; explicit flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of complex variables (1..=3).
    #[arg(long)]
    n: Option<usize>,
    /// Interior evaluation shrink factor in (0,1).
    #[arg(long)]
    rho: Option<f64>,
    /// Disc centers, comma-separated complex numbers (default all 0).
    #[arg(long)]
    centers: Option<String>,
    /// Disc radii, comma-separated positive reals (default all 1).
    #[arg(long)]
    radii: Option<String>,
    /// Report path for the JSON output (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DecomposeArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Grid points per real axis (even, at least 8).
    #[arg(long = "M")]
    m: Option<usize>,
    /// Registry function name (z1, zero, bilinear, expsum, sinpoly).
    #[arg(long = "fn")]
    function: Option<String>,
    /// Path to a polynomial text file defining g.
    #[arg(long = "poly-file")]
    poly_file: Option<PathBuf>,
    /// Basepoint α, comma-separated complex numbers (default all 0).
    #[arg(long)]
    alpha: Option<String>,
    /// Cutoff radius where χ ≡ 1 (relative).
    #[arg(long = "r-in")]
    r_in: Option<f64>,
    /// Cutoff radius where χ ≡ 0 (relative).
    #[arg(long = "r-out")]
    r_out: Option<f64>,
    /// Identity-residual gate as a multiple of sup|g| (default 5e-3).
    #[arg(long = "tol-id")]
    tol_id: Option<f64>,
    /// Holomorphy-residual gate as a multiple of the measured FD floor
    /// (default 10).
    #[arg(long = "tol-hol")]
    tol_hol: Option<f64>,
    /// Prefix for CSV field dumps (g and every g_j).
    #[arg(long = "fields-out")]
    fields_out: Option<String>,
}

#[derive(Args)]
struct LawsArgs {
    /// Number of randomized trials.
    #[arg(long)]
    trials: Option<u64>,
    /// Seed for the trial-indexed generators.
    #[arg(long)]
    seed: Option<u64>,
    /// Config file with `key = value` lines; explicit flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report path for the JSON output (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Deliberately flip the anti-derivation sign to self-test the harness.
    #[arg(long = "inject-sign-error", hide = true)]
    inject_sign_error: bool,
}

#[derive(Args)]
struct DbarArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Grid points per real axis (even, at least 8).
    #[arg(long = "M")]
    m: Option<usize>,
    /// Polynomial potential file: one polynomial per non-comment line.
    /// A single line is a scalar potential (β = ∂̄u has degree (0,1));
    /// n lines are the dz̄_1..dz̄_n components of a (0,1) potential
    /// (β has degree (0,2)).
    #[arg(long = "poly-file")]
    poly_file: Option<PathBuf>,
    /// Comma-separated CSV field files for the dz̄_1..dz̄_n components of β.
    #[arg(long = "beta-csv")]
    beta_csv: Option<String>,
    /// Residual gate as a multiple of max|β| (default 5e-2).
    #[arg(long)]
    tol: Option<f64>,
    /// Prefix for CSV dumps of the solution components.
    #[arg(long = "fields-out")]
    fields_out: Option<String>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Ascending comma-separated list of grid sizes, e.g. 16,32.
    #[arg(long = "M")]
    m: Option<String>,
    /// Registry function name.
    #[arg(long = "fn")]
    function: Option<String>,
    /// Path to a polynomial text file defining g.
    #[arg(long = "poly-file")]
    poly_file: Option<PathBuf>,
    /// Basepoint α (default all 0).
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long = "r-in")]
    r_in: Option<f64>,
    #[arg(long = "r-out")]
    r_out: Option<f64>,
    /// CSV table path (stdout when omitted).
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Usage/config error (exit 2).
struct UsageError(String);

impl<T: Into<String>> From<T> for UsageError {
    fn from(t: T) -> Self {
        UsageError(t.into())
    }
}

fn main() -> ExitCode {
    if let Ok(v) = std::env::var("KOSZUL_THREADS") {
        if let Ok(k) = v.parse::<usize>() {
            if k >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            }
        }
    }
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Decompose(args) => cmd_decompose(args),
        Command::Laws(args) => cmd_laws(args),
        Command::Dbar(args) => cmd_dbar(args),
        Command::Converge(args) => cmd_converge(args),
    };
    match outcome {
        Ok(code) => code,
        Err(UsageError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<ConfigFile, UsageError> {
    match path {
        None => Ok(ConfigFile::empty()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| UsageError(format!("config {}: {e}", p.display())))?;
            ConfigFile::parse(&text)
                .map_err(|e| UsageError(format!("config {}: {e}", p.display())))
        }
    }
}

struct ResolvedGrid {
    geom: Arc<GridGeometry>,
}

fn resolve_spec(
    grid: &GridArgs,
    cfg: &ConfigFile,
    m_flag: Option<usize>,
) -> Result<PolydiscSpec, UsageError> {
    let n = cfg.resolve(grid.n, "n")?.unwrap_or(2);
    if n == 0 || n > 3 {
        return Err(format!("n = {n} out of range 1..=3").into());
    }
    let m = cfg.resolve(m_flag, "M")?.unwrap_or(32);
    let rho = cfg.resolve(grid.rho, "rho")?.unwrap_or(0.9);
    let centers = match cfg.resolve_string(grid.centers.clone(), "centers") {
        Some(text) => parse_complex_list(&text, n, "centers")?,
        None => vec![Complex64::zero(); n],
    };
    let radii = match cfg.resolve_string(grid.radii.clone(), "radii") {
        Some(text) => parse_f64_list(&text, n, "radii")?,
        None => vec![1.0; n],
    };
    let spec = PolydiscSpec {
        n,
        centers,
        radii,
        m,
        shrink: rho,
    };
    spec.validate().map_err(|e| UsageError(e.to_string()))?;
    Ok(spec)
}

fn resolve_grid(
    grid: &GridArgs,
    cfg: &ConfigFile,
    m_flag: Option<usize>,
) -> Result<ResolvedGrid, UsageError> {
    let spec = resolve_spec(grid, cfg, m_flag)?;
    let geom = GridGeometry::new(spec).map_err(|e| UsageError(e.to_string()))?;
    Ok(ResolvedGrid { geom })
}

fn resolve_input(
    function: &Option<String>,
    poly_file: &Option<PathBuf>,
    alpha: &Option<String>,
    cfg: &ConfigFile,
    n: usize,
) -> Result<HolomorphicInput, UsageError> {
    let alpha = match cfg.resolve_string(alpha.clone(), "alpha") {
        Some(text) => parse_complex_list(&text, n, "alpha")?,
        None => vec![Complex64::zero(); n],
    };
    let function = cfg.resolve_string(function.clone(), "fn");
    let poly_file = match poly_file {
        Some(p) => Some(p.clone()),
        None => cfg.get("poly_file").map(PathBuf::from),
    };
    match (function, poly_file) {
        (Some(name), None) => {
            let mut input = builtin(&name, n).ok_or_else(|| {
                UsageError(format!(
                    "unknown registry function `{name}` for n = {n}; available: {}",
                    REGISTRY_NAMES.join(", ")
                ))
            })?;
            input.alpha = alpha;
            Ok(input)
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(&path)
                .map_err(|e| UsageError(format!("poly file {}: {e}", path.display())))?;
            let poly = parse_poly(&text, n)
                .map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
            Ok(HolomorphicInput::new(Evaluator::Poly(poly), alpha))
        }
        (Some(_), Some(_)) => Err("choose one of --fn and --poly-file".into()),
        (None, None) => Err("one of --fn or --poly-file is required".into()),
    }
}

fn resolve_gleason_config(
    r_in: Option<f64>,
    r_out: Option<f64>,
    tol_id: Option<f64>,
    tol_hol: Option<f64>,
    cfg: &ConfigFile,
) -> Result<GleasonConfig, UsageError> {
    let mut cutoff = CutoffSpec::default();
    if let Some(v) = cfg.resolve(r_in, "r_in")? {
        cutoff.r_in = v;
    }
    if let Some(v) = cfg.resolve(r_out, "r_out")? {
        cutoff.r_out = v;
    }
    let mut tol = Tolerances::default();
    if let Some(v) = cfg.resolve(tol_id, "tol_id")? {
        tol.tol_id_rel = v;
    }
    if let Some(v) = cfg.resolve(tol_hol, "tol_hol")? {
        tol.tol_hol_rel = v;
    }
    Ok(GleasonConfig { cutoff, tol })
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), UsageError> {
    match out {
        None => {
            println!("{content}");
            Ok(())
        }
        Some(path) => {
            if let Some(dir) = path.parent() {
                if !dir.as_os_str().is_empty() {
                    fs::create_dir_all(dir)
                        .map_err(|e| UsageError(format!("{}: {e}", dir.display())))?;
                }
            }
            fs::write(path, content).map_err(|e| UsageError(format!("{}: {e}", path.display())))
        }
    }
}

fn dump_field(prefix: &str, name: &str, field: &GridField) -> Result<(), UsageError> {
    let path = PathBuf::from(format!("{prefix}{name}.csv"));
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| UsageError(format!("{}: {e}", dir.display())))?;
        }
    }
    let mut buf = Vec::new();
    write_csv(field, &mut buf).map_err(|e| UsageError(e.to_string()))?;
    fs::write(&path, buf).map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------------------

fn cmd_decompose(args: DecomposeArgs) -> Result<ExitCode, UsageError> {
    let cfg = load_config(&args.grid.config)?;
    let grid = resolve_grid(&args.grid, &cfg, args.m)?;
    let input = resolve_input(
        &args.function,
        &args.poly_file,
        &args.alpha,
        &cfg,
        grid.geom.n(),
    )?;
    let gleason_cfg =
        resolve_gleason_config(args.r_in, args.r_out, args.tol_id, args.tol_hol, &cfg)?;

    match gleason_decompose(&input, &grid.geom, &gleason_cfg) {
        Ok(result) => {
            let report = verify_decomposition(&input, &result, &grid.geom, &gleason_cfg)
                .map_err(|e| UsageError(e.to_string()))?;
            report.assert_finite().map_err(UsageError)?;
            let text = serde_json::to_string_pretty(&report).expect("serialize report");
            emit(&args.grid.out, &text)?;
            if let Some(prefix) = &args.fields_out {
                dump_field(prefix, "g", &result.g_field)?;
                for (j, gj) in result.g_components.iter().enumerate() {
                    dump_field(prefix, &format!("g{}", j + 1), gj)?;
                }
            }
            Ok(if report.pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Err(err) => {
            // pipeline stage failure: report what is known and exit 1
            let mut obj = serde_json::Map::new();
            obj.insert(
                "error".to_string(),
                serde_json::Value::String(err.to_string()),
            );
            obj.insert(
                "grid".to_string(),
                serde_json::to_value(&grid.geom.spec).unwrap(),
            );
            let text = serde_json::to_string_pretty(&serde_json::Value::Object(obj)).unwrap();
            emit(&args.grid.out, &text)?;
            eprintln!("pipeline failure: {err}");
            Ok(ExitCode::from(1))
        }
    }
}

fn cmd_laws(args: LawsArgs) -> Result<ExitCode, UsageError> {
    let cfg = load_config(&args.config)?;
    let trials = cfg.resolve(args.trials, "trials")?.unwrap_or(200);
    let seed = cfg.resolve(args.seed, "seed")?.unwrap_or(1);
    let report = run_law_suite(seed, trials, args.inject_sign_error);
    let text = serde_json::to_string_pretty(&report).expect("serialize law report");
    emit(&args.out, &text)?;
    if report.pass() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "law suite: {} violation(s) in {} trials",
            report.violations.len(),
            report.trials
        );
        Ok(ExitCode::from(1))
    }
}

fn grid_echo_json(geom: &GridGeometry, alpha: Option<&[Complex64]>) -> serde_json::Value {
    let mut grid = serde_json::Map::new();
    grid.insert("n".into(), geom.n().into());
    grid.insert("m".into(), geom.m().into());
    grid.insert(
        "centers".into(),
        serde_json::to_value(
            geom.spec
                .centers
                .iter()
                .map(|c| [c.re, c.im])
                .collect::<Vec<_>>(),
        )
        .unwrap(),
    );
    grid.insert("radii".into(), serde_json::to_value(&geom.spec.radii).unwrap());
    grid.insert("rho".into(), serde_json::to_value(geom.spec.shrink).unwrap());
    if let Some(a) = alpha {
        grid.insert(
            "alpha".into(),
            serde_json::to_value(a.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>()).unwrap(),
        );
    }
    serde_json::Value::Object(grid)
}

fn cmd_dbar(args: DbarArgs) -> Result<ExitCode, UsageError> {
    let cfg = load_config(&args.grid.config)?;
    let grid = resolve_grid(&args.grid, &cfg, args.m)?;
    let geom = &grid.geom;
    let n = geom.n();
    let tol_rel = cfg.resolve(args.tol, "tol")?.unwrap_or(5e-2);

    let poly_file = match &args.poly_file {
        Some(p) => Some(p.clone()),
        None => cfg.get("poly_file").map(PathBuf::from),
    };
    let beta_csv = cfg.resolve_string(args.beta_csv.clone(), "beta_csv");

    let beta: KoszulForm<GridField> = match (poly_file, beta_csv) {
        (Some(path), None) => {
            let text = fs::read_to_string(&path)
                .map_err(|e| UsageError(format!("poly file {}: {e}", path.display())))?;
            let lines: Vec<&str> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .collect();
            let mut potential = match lines.len() {
                1 => {
                    let p = parse_poly(lines[0], n)
                        .map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
                    KoszulForm::from_component(n, ExteriorIndex::empty(), ConjIndex::empty(), p)
                        .map_err(|e| UsageError(e.to_string()))?
                }
                k if k == n => {
                    let mut form = KoszulForm::zero(n, 0, 1);
                    for (j, line) in lines.iter().enumerate() {
                        let p = parse_poly(line, n).map_err(|e| {
                            UsageError(format!("{} line {}: {e}", path.display(), j + 1))
                        })?;
                        form.accumulate(
                            ExteriorIndex::empty(),
                            ConjIndex::single(j as u8 + 1),
                            p,
                        );
                    }
                    form
                }
                k => {
                    return Err(format!(
                        "potential file must have 1 line (scalar) or n = {n} lines, found {k}"
                    )
                    .into())
                }
            };
            // β = ∂̄(potential), differentiated exactly then sampled
            potential = std::mem::replace(&mut potential, KoszulForm::zero(n, 0, 0)).dbar_form();
            let mut beta = KoszulForm::zero(n, 0, potential.conj_degree());
            for (e, k, p) in potential.iter() {
                let field = sample_poly(geom, p).map_err(|e| UsageError(e.to_string()))?;
                beta.accumulate(e.clone(), k.clone(), field);
            }
            beta
        }
        (None, Some(spec_text)) => {
            let paths: Vec<&str> = spec_text.split(',').collect();
            if paths.len() != n {
                return Err(format!(
                    "--beta-csv needs {n} files for the dz̄_1..dz̄_{n} components, found {}",
                    paths.len()
                )
                .into());
            }
            let mut form = KoszulForm::zero(n, 0, 1);
            for (j, path) in paths.iter().enumerate() {
                let file = fs::File::open(path.trim())
                    .map_err(|e| UsageError(format!("{path}: {e}")))?;
                let field = read_csv(geom, std::io::BufReader::new(file))
                    .map_err(|e| UsageError(format!("{path}: {e}")))?;
                form.accumulate(ExteriorIndex::empty(), ConjIndex::single(j as u8 + 1), field);
            }
            form
        }
        (Some(_), Some(_)) => return Err("choose one of --poly-file and --beta-csv".into()),
        (None, None) => return Err("one of --poly-file or --beta-csv is required".into()),
    };

    let beta_scale =
        form_interior_max(&beta, geom.spec.shrink).map_err(|e| UsageError(e.to_string()))?;
    let closedness_tolerance = (1e-2 * beta_scale).max(1e-6);
    let problem = DbarProblem {
        beta,
        geom: geom.clone(),
        closedness_tolerance,
    };
    match solve_dbar_polydisc(&problem) {
        Ok(solution) => {
            let tolerance = tol_rel * beta_scale.max(1e-300);
            let pass = solution.report.residual <= tolerance;
            let mut residuals = serde_json::Map::new();
            residuals.insert(
                "solver".into(),
                serde_json::to_value(&solution.report).unwrap(),
            );
            let mut norms = serde_json::Map::new();
            norms.insert("beta_scale".into(), solution.report.beta_scale.into());
            let u_sup = form_interior_max(&solution.u, geom.spec.shrink)
                .map_err(|e| UsageError(e.to_string()))?;
            norms.insert("u_sup".into(), u_sup.into());
            let mut u_l2 = serde_json::Map::new();
            for (_, k, c) in solution.u.iter() {
                u_l2.insert(format!("dzb{:?}", k.indices()), l2_norm(c).into());
            }
            norms.insert("u_l2".into(), serde_json::Value::Object(u_l2));
            let mut gates = BTreeMap::new();
            gates.insert(
                "residual".to_string(),
                GateCheck {
                    value: solution.report.residual,
                    tolerance,
                    pass,
                },
            );
            gates.insert(
                "closedness".to_string(),
                GateCheck {
                    value: solution.report.closedness,
                    tolerance: closedness_tolerance,
                    pass: true,
                },
            );
            let mut obj = serde_json::Map::new();
            obj.insert("grid".into(), grid_echo_json(geom, None));
            obj.insert("residuals".into(), serde_json::Value::Object(residuals));
            obj.insert("norms".into(), serde_json::Value::Object(norms));
            obj.insert("gates".into(), serde_json::to_value(&gates).unwrap());
            obj.insert(
                "order_estimates".into(),
                serde_json::Value::Object(serde_json::Map::new()),
            );
            let text = serde_json::to_string_pretty(&serde_json::Value::Object(obj)).unwrap();
            emit(&args.grid.out, &text)?;
            if let Some(prefix) = &args.fields_out {
                for (_, k, c) in solution.u.iter() {
                    let name = if k.is_empty() {
                        "u".to_string()
                    } else {
                        format!(
                            "u_dzb{}",
                            k.indices()
                                .iter()
                                .map(|j| j.to_string())
                                .collect::<String>()
                        )
                    };
                    dump_field(prefix, &name, c)?;
                }
            }
            Ok(if pass {
                ExitCode::SUCCESS
            } else {
                eprintln!(
                    "dbar: residual {} exceeds tolerance {tolerance}",
                    solution.report.residual
                );
                ExitCode::from(1)
            })
        }
        Err(err @ DbarError::Closedness { .. }) => {
            let mut obj = serde_json::Map::new();
            obj.insert("error".into(), err.to_string().into());
            obj.insert("grid".into(), grid_echo_json(geom, None));
            let text = serde_json::to_string_pretty(&serde_json::Value::Object(obj)).unwrap();
            emit(&args.grid.out, &text)?;
            eprintln!("dbar: {err}");
            Ok(ExitCode::from(1))
        }
        Err(err) => Err(UsageError(err.to_string())),
    }
}

fn cmd_converge(args: ConvergeArgs) -> Result<ExitCode, UsageError> {
    let cfg = load_config(&args.grid.config)?;
    let m_text = cfg
        .resolve_string(args.m.clone(), "M")
        .ok_or_else(|| UsageError("--M with at least two comma-separated levels".into()))?;
    let m_list = parse_usize_list(&m_text)?;
    if m_list.len() < 2 {
        return Err(format!("need at least 2 grid levels, got {m_list:?}").into());
    }
    if m_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(format!("grid levels must be strictly ascending, got {m_list:?}").into());
    }
    let base_spec = resolve_spec(&args.grid, &cfg, Some(m_list[0]))?;
    let n = base_spec.n;
    let input = resolve_input(&args.function, &args.poly_file, &args.alpha, &cfg, n)?;
    let gleason_cfg = resolve_gleason_config(args.r_in, args.r_out, None, None, &cfg)?;
    let study = convergence_study(
        &input,
        |m| {
            let mut spec = base_spec.clone();
            spec.m = m;
            spec
        },
        &m_list,
        &gleason_cfg,
    );
    let csv = convergence_csv(&study);
    match &args.csv {
        Some(path) => emit(&Some(path.clone()), &csv)?,
        None => print!("{csv}"),
    }
    if let Some(out) = &args.grid.out {
        let mut obj = serde_json::Map::new();
        obj.insert(
            "grid".into(),
            serde_json::to_value(&base_spec).unwrap(),
        );
        obj.insert("residuals".into(), serde_json::to_value(&study.rows).unwrap());
        obj.insert(
            "norms".into(),
            serde_json::Value::Object(serde_json::Map::new()),
        );
        let mut gates = BTreeMap::new();
        gates.insert("r_id_ratio".to_string(), study.r_id_gate.clone());
        obj.insert("gates".into(), serde_json::to_value(&gates).unwrap());
        obj.insert(
            "order_estimates".into(),
            serde_json::to_value(&study.order_estimates).unwrap(),
        );
        let text = serde_json::to_string_pretty(&serde_json::Value::Object(obj)).unwrap();
        emit(&Some(out.clone()), &text)?;
    }
    let rows_ok = study.rows.iter().all(|r| r.error.is_none());
    Ok(if study.r_id_gate.pass && rows_ok {
        ExitCode::SUCCESS
    } else {
        eprintln!("converge: gate failed (worst ratio {})", study.r_id_gate.value);
        ExitCode::from(1)
    })
}
