//! Command-line front end: argument types, scenario resolution and the
//! `solve`, `verify`, `sweep` and `list` commands.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::acceptance::run_suite;
use crate::analysis::{ConvergenceEntry, MONOTONE_TOL};
use crate::error::{Error, Result};
use crate::export::{sweep_csv, to_csv, to_mtz_text, SvgScene};
use crate::nlp_solver::{solve_self_referential, SolveOptions, Solution};
use crate::order_search::{MtzModel, Strategy};
use crate::scenario::{build_instance, Catalog, Instance, Mode, ScenarioConfig, ScenarioSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "ESCAPE_SOLVER_THREADS";

#[derive(Debug, Parser)]
#[command(name = "forest-escape", version, about = "Shortest escape paths through rotated boundary families")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one scenario and write the requested artifacts.
    Solve(RunArgs),
    /// Run the verification suite and print one line per check.
    Verify {
        /// Run only the checks whose id, name or scenario matches.
        #[arg(long, value_name = "NAME")]
        only: Option<String>,
    },
    /// Solve a scenario once per value of theta, N or M.
    Sweep(SweepArgs),
    /// List the catalog scenarios with their defaults.
    List,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Svg,
    Csv,
    Mtz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    Theta,
    #[value(name = "n", alias = "N")]
    N,
    #[value(name = "m", alias = "M")]
    M,
}

impl SweepParam {
    fn as_str(self) -> &'static str {
        match self {
            SweepParam::Theta => "theta",
            SweepParam::N => "N",
            SweepParam::M => "M",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Catalog scenario name, or a path to a JSON scenario file.
    pub scenario: String,
    /// Number of orientations.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of start points.
    #[arg(long)]
    pub m: Option<usize>,
    /// Value of the scenario's `theta` parameter.
    #[arg(long, value_parser = parse_value, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    /// Visiting-order strategy; defaults to `hint` when the scenario has an
    /// assumed order and `alternating` otherwise.
    #[arg(long)]
    pub strategy: Option<Strategy>,
    /// Seed for every random choice.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Require the path to return to its start.
    #[arg(long)]
    pub closed: bool,
    /// Override a named scenario parameter.
    #[arg(long = "param", value_name = "KEY=VALUE", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    /// Output directory for artifacts.
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    /// Artifact formats to write.
    #[arg(long, value_delimiter = ',', default_values_t = [Format::Csv, Format::Svg])]
    pub format: Vec<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Parameter to vary.
    #[arg(long, value_enum)]
    pub vary: SweepParam,
    /// Values to solve for; `pi` multiples such as `pi/6` or `5pi/6` are accepted.
    #[arg(long, value_delimiter = ',', required = true, value_parser = parse_value)]
    pub values: Vec<f64>,
    #[command(flatten)]
    pub run: RunArgs,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Svg => "svg",
            Format::Csv => "csv",
            Format::Mtz => "mtz",
        })
    }
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))?;
    Ok((k.trim().to_string(), parse_value(v)?))
}

/// Parses a real number or a rational multiple of pi: `0.5`, `pi`, `-pi/3`, `5pi/6`, `2*pi`.
pub fn parse_value(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim().to_ascii_lowercase();
    let Some(idx) = t.find("pi") else {
        return t.parse::<f64>().map_err(|e| format!("`{s}`: {e}"));
    };
    let coeff = t[..idx].trim_end_matches('*').trim();
    let coeff = match coeff {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().map_err(|e| format!("`{s}`: {e}"))?,
    };
    let rest = t[idx + 2..].trim();
    let div = match rest.strip_prefix('/') {
        Some(d) => d.trim().parse::<f64>().map_err(|e| format!("`{s}`: {e}"))?,
        None if rest.is_empty() => 1.0,
        None => return Err(format!("`{s}`: unexpected `{rest}`")),
    };
    Ok(coeff * std::f64::consts::PI / div)
}

/// A fully resolved solve request.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub strategy: Option<Strategy>,
    pub seed: u64,
    pub out: PathBuf,
    pub formats: Vec<Format>,
}

impl RunConfig {
    /// Reads the scenario file when `args.scenario` names one, then applies
    /// the command-line overrides.
    pub fn from_args(args: &RunArgs) -> Result<RunConfig> {
        let path = Path::new(&args.scenario);
        let mut scenario = if args.scenario.ends_with(".json") || path.is_file() {
            ScenarioConfig::from_json(&fs::read_to_string(path)?)?
        } else {
            ScenarioConfig {
                name: args.scenario.clone(),
                n: None,
                m: None,
                mode: None,
                params: BTreeMap::new(),
                order: Default::default(),
                angle_range: None,
            }
        };
        if args.n.is_some() {
            scenario.n = args.n;
        }
        if args.m.is_some() {
            scenario.m = args.m;
        }
        if let Some(theta) = args.theta {
            scenario.params.insert("theta".into(), theta);
        }
        for (k, v) in &args.params {
            scenario.params.insert(k.clone(), *v);
        }
        if args.closed {
            scenario.mode = Some(Mode::EscapeClosed);
        }
        if scenario.n == Some(0) {
            return Err(Error::InvalidSpec("N must be at least 1".into()));
        }
        Ok(RunConfig {
            scenario,
            strategy: args.strategy,
            seed: args.seed,
            out: args.out.clone(),
            formats: args.format.clone(),
        })
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions::default().with_seed(self.seed)
    }
}

/// Outcome of one solve with its inputs.
#[derive(Clone, Debug)]
pub struct SolveRun {
    pub spec: ScenarioSpec,
    pub instance: Instance,
    pub solution: Solution,
    pub strategy: Strategy,
    pub m: usize,
    pub seconds: f64,
}

impl SolveRun {
    /// `scenario, N, M, strategy, length, residual, seconds`
    pub fn summary(&self) -> String {
        format!(
            "{}, {}, {}, {}, {:.9}, {:.3e}, {:.3}",
            self.spec.name,
            self.spec.n_orientations,
            self.m,
            self.strategy,
            self.solution.length,
            self.solution.max_residual,
            self.seconds
        )
    }

    fn stem(&self) -> String {
        format!("{}_N{}_M{}", self.spec.name, self.spec.n_orientations, self.m)
    }
}

/// Resolves and solves a request. Scenarios whose boundaries depend on the
/// solved path (a parameter named `estimate`) run a fixed-point loop in their
/// assumed order.
pub fn run_solve(catalog: &Catalog, config: &RunConfig) -> Result<SolveRun> {
    let entry = catalog.get(&config.scenario.name)?;
    let spec = config.scenario.to_spec(catalog)?;
    let strategy = config.strategy.unwrap_or_else(|| Strategy::default_for(spec.order_hint.as_ref()));
    let m = config.scenario.m.unwrap_or(entry.default_m);
    let opts = config.solve_options();
    let clock = Instant::now();
    let (spec, instance, solution) = if let Some(&initial) = spec.params.get("estimate") {
        if strategy != Strategy::Hint {
            return Err(Error::InvalidSpec(format!(
                "scenario {} depends on its own solution and only runs with strategy hint",
                spec.name
            )));
        }
        let build_spec = |estimate: f64| {
            let mut sc = config.scenario.clone();
            sc.params.insert("estimate".into(), estimate);
            sc.to_spec(catalog)
        };
        let (solution, estimate) = solve_self_referential(
            |e| build_instance(&build_spec(e)?),
            spec.order_hint.as_ref(),
            initial,
            &opts,
        )?;
        let spec = build_spec(estimate)?;
        let instance = build_instance(&spec)?;
        (spec, instance, solution)
    } else {
        let instance = build_instance(&spec)?;
        let solution = strategy.solve(&instance, spec.order_hint.as_ref(), &opts)?;
        (spec, instance, solution)
    };
    Ok(SolveRun { spec, instance, solution, strategy, m, seconds: clock.elapsed().as_secs_f64() })
}

fn header_comment(run: &SolveRun, seed: u64) -> String {
    format!(
        "scenario {} N {} M {} strategy {} seed {}",
        run.spec.name, run.spec.n_orientations, run.m, run.strategy, seed
    )
}

/// Writes the requested artifacts and returns their paths.
pub fn write_artifacts(run: &SolveRun, seed: u64, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for format in formats {
        let path = dir.join(format!("{}.{format}", run.stem()));
        let text = match format {
            Format::Csv => to_csv(&run.solution)?,
            Format::Svg => SvgScene::new(&run.instance, Some(&run.solution))
                .with_comment(header_comment(run, seed))
                .render(),
            Format::Mtz => {
                let model = MtzModel::from_solution(&run.instance, &run.solution)?;
                format!("# {}\n{}", header_comment(run, seed), to_mtz_text(&model, &run.instance)?)
            }
        };
        fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergence { .. } => EXIT_NONCONVERGENCE,
        Error::Io(_) | Error::ModelInvariant(_) => EXIT_FAILED,
        _ => EXIT_INVALID,
    }
}

/// `solve`: prints the summary line, writes artifacts, exits 0 on
/// convergence, 2 on an invalid request and 3 on non-convergence.
pub fn cmd_solve(catalog: &Catalog, args: &RunArgs) -> i32 {
    let outcome = RunConfig::from_args(args).and_then(|config| {
        let run = run_solve(catalog, &config)?;
        let paths = write_artifacts(&run, config.seed, &config.out, &config.formats)?;
        Ok((run, paths))
    });
    match outcome {
        Ok((run, paths)) => {
            println!("{}", run.summary());
            for p in paths {
                log::info!("wrote {}", p.display());
            }
            if run.solution.converged {
                EXIT_OK
            } else {
                eprintln!("error: solver did not reach the feasibility tolerance");
                EXIT_NONCONVERGENCE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// `verify`: one line per check, exit 0 iff every selected check passes.
pub fn cmd_verify(catalog: &Catalog, only: Option<&str>) -> i32 {
    match run_suite(catalog, only, |o| println!("{o}")) {
        Ok(outcomes) => {
            let passed = outcomes.iter().filter(|o| o.passed).count();
            println!("{passed}/{} checks pass", outcomes.len());
            if passed == outcomes.len() {
                EXIT_OK
            } else {
                EXIT_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}

/// Runs one solve per value and returns the `(value, length)` rows.
pub fn run_sweep(catalog: &Catalog, args: &SweepArgs) -> Result<Vec<(f64, SolveRun)>> {
    let base = RunConfig::from_args(&args.run)?;
    let mut runs = Vec::with_capacity(args.values.len());
    for &value in &args.values {
        let mut config = base.clone();
        match args.vary {
            SweepParam::Theta => {
                config.scenario.params.insert("theta".into(), value);
            }
            SweepParam::N | SweepParam::M => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::InvalidSpec(format!("{} must be a positive integer, got {value}", args.vary.as_str())));
                }
                if args.vary == SweepParam::N {
                    config.scenario.n = Some(value as usize);
                } else {
                    config.scenario.m = Some(value as usize);
                }
            }
        }
        runs.push((value, run_solve(catalog, &config)?));
    }
    Ok(runs)
}

/// `sweep`: prints a summary line per value, writes the `(value, length)`
/// CSV and, when `svg` is among the formats, one figure per value.
pub fn cmd_sweep(catalog: &Catalog, args: &SweepArgs) -> i32 {
    let outcome = run_sweep(catalog, args).and_then(|runs| {
        let dir = &args.run.out;
        fs::create_dir_all(dir)?;
        let rows: Vec<(f64, f64)> = runs.iter().map(|(v, r)| (*v, r.solution.length)).collect();
        let name = runs.first().map(|(_, r)| r.spec.name.clone()).unwrap_or_default();
        let csv_path = dir.join(format!("{name}_sweep_{}.csv", args.vary.as_str()));
        fs::write(&csv_path, sweep_csv(args.vary.as_str(), &rows)?)?;
        if args.run.format.contains(&Format::Svg) {
            for (i, (v, run)) in runs.iter().enumerate() {
                let path = dir.join(format!("{name}_sweep_{}_{i}.svg", args.vary.as_str()));
                let comment = format!("{} {} {v}", header_comment(run, args.run.seed), args.vary.as_str());
                fs::write(path, SvgScene::new(&run.instance, Some(&run.solution)).with_comment(comment).render())?;
            }
        }
        Ok(runs)
    });
    match outcome {
        Ok(runs) => {
            for (_, run) in &runs {
                println!("{}", run.summary());
            }
            if args.vary == SweepParam::N {
                let entries: Vec<ConvergenceEntry> = runs
                    .iter()
                    .map(|(_, r)| ConvergenceEntry {
                        n: r.spec.n_orientations,
                        length: r.solution.length,
                        max_residual: r.solution.max_residual,
                        seconds: r.seconds,
                    })
                    .collect();
                for w in entries.windows(2) {
                    if w[1].length < w[0].length - MONOTONE_TOL {
                        eprintln!("warning: length decreases from N={} to N={}", w[0].n, w[1].n);
                    }
                }
            }
            if runs.iter().all(|(_, r)| r.solution.converged) {
                EXIT_OK
            } else {
                EXIT_NONCONVERGENCE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn cmd_list(catalog: &Catalog) -> i32 {
    for e in catalog.entries() {
        let params: Vec<String> = e.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!("{:<28} N={:<4} M={:<3} {:<40} {}", e.name, e.default_n, e.default_m, params.join(" "), e.summary);
    }
    EXIT_OK
}

/// Parses `ESCAPE_SOLVER_THREADS` into a positive worker count.
pub fn thread_cap(value: Option<&str>) -> Result<Option<usize>> {
    match value.map(str::trim) {
        None | Some("") => Ok(None),
        Some(v) => match v.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::InvalidInput(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
    }
}

pub fn run(cli: Cli) -> i32 {
    let catalog = Catalog::standard();
    match &cli.command {
        Command::Solve(args) => cmd_solve(&catalog, args),
        Command::Verify { only } => cmd_verify(&catalog, only.as_deref()),
        Command::Sweep(args) => cmd_sweep(&catalog, args),
        Command::List => cmd_list(&catalog),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn values_accept_pi_multiples() {
        assert_eq!(parse_value("0.25").unwrap(), 0.25);
        assert_eq!(parse_value("pi").unwrap(), PI);
        assert!((parse_value("5pi/6").unwrap() - 5.0 * PI / 6.0).abs() < 1e-15);
        assert!((parse_value("-pi/3").unwrap() + PI / 3.0).abs() < 1e-15);
        assert!((parse_value("2*pi").unwrap() - 2.0 * PI).abs() < 1e-15);
        assert!(parse_value("pi/x").is_err());
        assert!(parse_value("abc").is_err());
    }

    #[test]
    fn thread_cap_rejects_zero_and_garbage() {
        assert_eq!(thread_cap(None).unwrap(), None);
        assert_eq!(thread_cap(Some("3")).unwrap(), Some(3));
        assert!(thread_cap(Some("0")).is_err());
        assert!(thread_cap(Some("many")).is_err());
    }

    #[test]
    fn flags_override_the_scenario() {
        let cli = Cli::try_parse_from([
            "forest-escape", "solve", "bisector_angle", "--n", "36", "--theta", "pi/6", "--closed", "--seed", "7",
            "--format", "svg,mtz",
        ])
        .unwrap();
        let Command::Solve(args) = cli.command else { panic!("expected solve") };
        let config = RunConfig::from_args(&args).unwrap();
        assert_eq!(config.scenario.n, Some(36));
        assert!((config.scenario.params["theta"] - PI / 6.0).abs() < 1e-15);
        assert_eq!(config.scenario.mode, Some(Mode::EscapeClosed));
        assert_eq!(config.seed, 7);
        assert_eq!(config.formats, vec![Format::Svg, Format::Mtz]);
    }

    #[test]
    fn unknown_strategy_is_a_parse_error() {
        assert!(Cli::try_parse_from(["forest-escape", "solve", "point_unit", "--strategy", "greedy"]).is_err());
    }

    #[test]
    fn point_unit_with_one_orientation_has_length_one() {
        let args = RunArgs {
            scenario: "point_unit".into(),
            n: Some(1),
            m: None,
            theta: None,
            strategy: None,
            seed: 0,
            closed: false,
            params: vec![],
            out: PathBuf::from("."),
            format: vec![],
        };
        let run = run_solve(&Catalog::standard(), &RunConfig::from_args(&args).unwrap()).unwrap();
        assert!((run.solution.length - 1.0).abs() < 1e-9);
        assert!(run.summary().starts_with("point_unit, 1, 1, hint, 1.000000000, "));
    }

    #[test]
    fn theta_on_a_scenario_without_theta_is_invalid() {
        let args = Cli::try_parse_from(["forest-escape", "solve", "point_unit", "--theta", "1"]).unwrap();
        let Command::Solve(args) = args.command else { panic!("expected solve") };
        assert_eq!(cmd_solve(&Catalog::standard(), &args), EXIT_INVALID);
    }
}
