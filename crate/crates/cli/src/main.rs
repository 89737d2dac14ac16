use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::json;

use tsmkit_core::coords::{parse_complex, parse_complex_list};
use tsmkit_core::error::TsmError;
use tsmkit_core::group::{validate, GroupMode, GroupSpec, StepTwoGroup, SPECTRAL_TOL};
use tsmkit_core::mean::{reduced_tsm, tsm, Evaluable};
use tsmkit_core::quadrature::{init_threads_from_env, QuadratureRule};
use tsmkit_core::radial::{
    annihilation_check, build_stack, chain_schedule, coupled_kernel_family, solution_family, TypeFunction,
    ANNIHILATION_TOL,
};
use tsmkit_core::reduce::reduce_group;
use tsmkit_core::verify::{run_suite_in, Expectation, GroupRef, SuiteConfig, SuiteName};

#[derive(Parser)]
#[command(name = "tsmkit", version, about = "Twisted spherical means on step-two nilpotent groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the structural conditions of a group
    Validate(ValidateArgs),
    /// Reduce V_lambda to canonical block form and print mu
    Reduce(ReduceArgs),
    /// Evaluate a twisted spherical mean
    Mean(MeanArgs),
    /// Apply a radial operator stack to a solution family
    OdeCheck(OdeArgs),
    /// Run a verification suite and write its report
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Args)]
struct Output {
    /// Write the result here instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct ValidateArgs {
    /// Group JSON file, or a builtin: heisenberg[:N], quaternionic
    #[arg(long, value_name = "PATH")]
    group: String,
    /// Override the mode stored in the spec
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Metivier,
    Htype,
    Heisenberg,
}

impl From<ModeArg> for GroupMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Metivier => GroupMode::Metivier,
            ModeArg::Htype => GroupMode::Htype,
            ModeArg::Heisenberg => GroupMode::Heisenberg,
        }
    }
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long, value_name = "PATH")]
    group: String,
    /// Central parameter, comma separated
    #[arg(long, value_name = "CSV", allow_hyphen_values = true)]
    lambda: String,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct MeanArgs {
    #[arg(long, value_name = "PATH")]
    group: String,
    #[arg(long, value_name = "CSV", allow_hyphen_values = true)]
    lambda: String,
    /// Type function as JSON (a list of {"radial", "poly"} summands) or a path to one
    #[arg(long, value_name = "JSON|PATH")]
    f: String,
    /// Center, e.g. "0.3+0.1i,-0.2"
    #[arg(long, value_name = "CSV", allow_hyphen_values = true)]
    z: String,
    /// Radius
    #[arg(long)]
    s: f64,
    /// angles:K, mc:N or exact:N
    #[arg(long, value_name = "KIND:ORDER", default_value = "angles:64")]
    quad: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use the reduced mean with the frame's mu instead of the group mean
    #[arg(long)]
    reduced: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StackArg {
    Default,
    Chain,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    /// A and B terms as written for the monomial case
    Stated,
    /// Kernel of the chain stack
    Coupled,
}

#[derive(Args)]
struct OdeArgs {
    #[arg(long)]
    p: usize,
    #[arg(long)]
    q: usize,
    #[arg(long)]
    n: usize,
    /// Twist coefficient; defaults to -mu_1 of the given group and lambda, else -1
    #[arg(long, allow_hyphen_values = true)]
    nu: Option<String>,
    #[arg(long, value_name = "PATH")]
    group: Option<String>,
    #[arg(long, value_name = "CSV", allow_hyphen_values = true)]
    lambda: Option<String>,
    #[arg(long, value_enum, default_value = "default")]
    stack: StackArg,
    #[arg(long, value_enum, default_value = "stated")]
    family: FamilyArg,
    /// A coefficients (p of them); default all 1
    #[arg(long, value_name = "CSV", allow_hyphen_values = true)]
    a: Option<String>,
    /// B coefficients (q of them); default all 1
    #[arg(long, value_name = "CSV", allow_hyphen_values = true)]
    b: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct VerifyArgs {
    /// structure, reduce, harmonics, ode, th42, lemma32, hecke or boundary
    #[arg(long)]
    suite: Option<String>,
    /// Suite config JSON; flags given here override it
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    group: Option<String>,
    /// One lambda as CSV; separate several with ';'
    #[arg(long, value_name = "CSV", allow_hyphen_values = true)]
    lambda: Option<String>,
    #[arg(long, value_name = "KIND:ORDER")]
    quad: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of sampled cases
    #[arg(long)]
    cases: Option<usize>,
    /// Skip the negative controls
    #[arg(long)]
    no_controls: bool,
    /// Include the wall clock in the JSON report
    #[arg(long)]
    timing: bool,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

/// Bad input or an operation that could not run; exits with 2.
struct Failure(String);

impl From<TsmError> for Failure {
    fn from(e: TsmError) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads_from_env();
    let outcome = match cli.command {
        Command::Validate(a) => run_validate(a),
        Command::Reduce(a) => run_reduce(a),
        Command::Mean(a) => run_mean(a),
        Command::OdeCheck(a) => run_ode(a),
        Command::Verify(a) => run_verify(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn emit(output: &Output, text: &str) -> Result<(), Failure> {
    match &output.out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn load_group(reference: &str) -> Result<(GroupSpec, StepTwoGroup), Failure> {
    let spec = GroupRef::Name(reference.to_string()).resolve(None)?;
    let group = spec.build()?;
    Ok((spec, group))
}

fn parse_reals(text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Failure(format!("'{t}' is not a number")))
        })
        .collect()
}

/// Shortest decimal that survives rounding to 12 significant digits.
fn num(x: f64) -> String {
    let r: f64 = format!("{x:.12e}").parse().unwrap_or(x);
    if r == 0.0 {
        "0".into()
    } else if r.abs() < 1e-4 || r.abs() >= 1e15 {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

fn num_list(xs: &[f64]) -> String {
    format!("[{}]", xs.iter().map(|x| num(*x)).collect::<Vec<_>>().join(", "))
}

fn complex_text(c: Complex64) -> String {
    if c.im >= 0.0 {
        format!("{}+{}i", num(c.re), num(c.im))
    } else {
        format!("{}-{}i", num(c.re), num(-c.im))
    }
}

fn json_text(v: &serde_json::Value) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Failure(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn run_validate(a: ValidateArgs) -> Outcome {
    let (spec, group) = load_group(&a.group)?;
    let mode = a.mode.map(GroupMode::from).unwrap_or(spec.mode);
    let report = validate(&group, mode);
    let text = match a.output.format {
        Format::Json => json_text(&serde_json::to_value(&report).map_err(|e| Failure(e.to_string()))?)?,
        Format::Csv => {
            let mut s = String::from("condition,passed,residual,tolerance\n");
            for c in &report.conditions {
                let _ = writeln!(s, "{},{},{:e},{:e}", c.name, c.passed, c.residual, c.tolerance);
            }
            s
        }
        Format::Text => {
            let mut s = String::new();
            for c in &report.conditions {
                let mark = if c.passed { "ok  " } else { "FAIL" };
                let _ = writeln!(s, "{mark} {:<22} residual {:.3e} (tol {:.1e})", c.name, c.residual, c.tolerance);
            }
            if let Some(m) = &report.metivier {
                let _ = writeln!(s, "metivier: {:?}, min |det V| = {:.3e} over {} directions", m.status, m.min_abs_det, m.samples);
            }
            let _ = writeln!(s, "{}", if report.passed() { "valid" } else { "invalid" });
            s
        }
    };
    emit(&a.output, &text)?;
    Ok(report.passed())
}

fn run_reduce(a: ReduceArgs) -> Outcome {
    let (_, group) = load_group(&a.group)?;
    let lambda = parse_reals(&a.lambda)?;
    let frame = reduce_group(&group, &lambda)?;
    let (orth, conj, cong) = (
        frame.orthogonality_residual(),
        frame.conjugation_residual(),
        frame.congruence_residual(),
    );
    let ok = orth.max(conj).max(cong) <= SPECTRAL_TOL;
    let text = match a.output.format {
        Format::Json => {
            let rows: Vec<Vec<f64>> = (0..frame.a.nrows()).map(|i| frame.a.row(i).iter().copied().collect()).collect();
            json_text(&json!({
                "lambda": lambda,
                "mu": frame.mu,
                "A": rows,
                "orthogonality": orth,
                "conjugation": conj,
                "congruence": cong,
            }))?
        }
        Format::Csv => {
            let mut s = String::from("j,mu\n");
            for (j, m) in frame.mu.iter().enumerate() {
                let _ = writeln!(s, "{},{}", j + 1, num(*m));
            }
            s
        }
        Format::Text => format!(
            "mu = {}\n|A^T A - I| = {orth:.3e}\n|V A - A U| = {conj:.3e}\n",
            num_list(&frame.mu)
        ),
    };
    emit(&a.output, &text)?;
    Ok(ok)
}

fn load_function(n: usize, arg: &str) -> Result<TypeFunction, Failure> {
    let trimmed = arg.trim_start();
    let text = if trimmed.starts_with('[') || trimmed.starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| Failure(format!("{arg}: {e}")))?
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Failure(format!("--f: {e}")))?;
    // a single summand object is accepted as well
    let value = if value.is_object() { json!([value]) } else { value };
    Ok(TypeFunction::from_json_value(n, &value)?)
}

fn run_mean(a: MeanArgs) -> Outcome {
    let (_, group) = load_group(&a.group)?;
    let lambda = parse_reals(&a.lambda)?;
    let f: Evaluable = load_function(group.n(), &a.f)?.into();
    let z = parse_complex_list(&a.z).map_err(Failure)?;
    let rule = QuadratureRule::parse(&a.quad, a.seed)?;
    let est = if a.reduced {
        let frame = reduce_group(&group, &lambda)?;
        reduced_tsm(&frame.mu, &f, &z, a.s, &rule)?
    } else {
        tsm(&group, &lambda, &f, &z, a.s, &rule)?
    };
    let text = match a.output.format {
        Format::Json => json_text(&json!({
            "value": [est.value.re, est.value.im],
            "err_estimate": est.err_estimate,
            "quad": a.quad,
            "reduced": a.reduced,
        }))?,
        Format::Csv => format!("re,im,err_estimate\n{:e},{:e},{:e}\n", est.value.re, est.value.im, est.err_estimate),
        Format::Text => format!("mean = {} (error estimate {:.1e})\n", complex_text(est.value), est.err_estimate),
    };
    emit(&a.output, &text)?;
    Ok(true)
}

fn coefficients(arg: &Option<String>, count: usize, name: &str) -> Result<Vec<Complex64>, Failure> {
    match arg {
        None => Ok(vec![Complex64::new(1.0, 0.0); count]),
        Some(_) if count == 0 => Ok(Vec::new()),
        Some(text) => {
            let v = parse_complex_list(text).map_err(Failure)?;
            if v.len() != count {
                return Err(Failure(format!("--{name} needs {count} values, got {}", v.len())));
            }
            Ok(v)
        }
    }
}

fn run_ode(a: OdeArgs) -> Outcome {
    let nu = match (&a.nu, &a.group) {
        (Some(text), _) => parse_complex(text).map_err(Failure)?,
        (None, Some(g)) => {
            let (_, group) = load_group(g)?;
            let lambda = match &a.lambda {
                Some(l) => parse_reals(l)?,
                None => return Err(Failure("--group needs --lambda".into())),
            };
            Complex64::new(-reduce_group(&group, &lambda)?.mu[0], 0.0)
        }
        (None, None) => Complex64::new(-1.0, 0.0),
    };
    let av = coefficients(&a.a, a.p, "a")?;
    let bv = coefficients(&a.b, a.q, "b")?;
    let family = match a.family {
        FamilyArg::Stated => solution_family(a.p, a.q, a.n, nu, nu, &av, &bv)?,
        FamilyArg::Coupled => coupled_kernel_family(a.p, a.q, a.n, nu, nu, &av, &bv)?,
    };
    let schedule = match a.stack {
        StackArg::Default => None,
        StackArg::Chain => Some(chain_schedule(a.p, a.q, a.n)),
    };
    let stack = build_stack(a.p, a.q, a.n, schedule.as_deref(), nu, nu)?;
    let scale = family.max_abs_coeff().max(1.0);
    let mut report = annihilation_check(&stack, &family.scale(Complex64::new(1.0 / scale, 0.0)));
    report.tolerance = a.tol.unwrap_or(ANNIHILATION_TOL);
    report.passed = report.residual <= report.tolerance;
    let text = match a.output.format {
        Format::Json => json_text(&json!({
            "n": a.n, "p": a.p, "q": a.q, "nu": [nu.re, nu.im],
            "residual": report.residual, "tolerance": report.tolerance,
            "passed": report.passed, "surviving_terms": report.surviving_terms,
            "family_scale": scale,
        }))?,
        Format::Csv => format!(
            "n,p,q,residual,tolerance,passed\n{},{},{},{:e},{:e},{}\n",
            a.n, a.p, a.q, report.residual, report.tolerance, report.passed
        ),
        Format::Text => format!(
            "{} residual {:.3e} (tol {:.1e}), {} surviving terms\n",
            if report.passed { "PASS" } else { "FAIL" },
            report.residual,
            report.tolerance,
            report.surviving_terms
        ),
    };
    emit(&a.output, &text)?;
    Ok(report.passed)
}

fn run_verify(a: VerifyArgs) -> Outcome {
    let (mut cfg, base) = match &a.config {
        Some(path) => (SuiteConfig::load(path)?, path.parent().map(Path::to_path_buf)),
        None => {
            let name = a
                .suite
                .as_deref()
                .ok_or_else(|| Failure("--suite or --config is required".into()))?;
            (SuiteConfig::new(SuiteName::parse(name)?), None)
        }
    };
    if let Some(name) = &a.suite {
        cfg.suite = SuiteName::parse(name)?;
    }
    if let Some(g) = &a.group {
        cfg.group = Some(GroupRef::Name(g.clone()));
    }
    if let Some(l) = &a.lambda {
        cfg.lambdas = l.split(';').map(parse_reals).collect::<Result<_, _>>()?;
    }
    if a.quad.is_some() {
        cfg.quad = a.quad.clone();
    }
    if a.tol.is_some() {
        cfg.tol = a.tol;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if a.cases.is_some() {
        cfg.cases = a.cases;
    }
    if a.no_controls {
        cfg.negative_controls = false;
    }
    if a.out.is_some() {
        cfg.out = a.out.clone();
    }
    // a CLI group path is relative to the working directory
    let base = if a.group.is_some() { None } else { base };
    let report = run_suite_in(&cfg, base.as_deref())?;
    let text = match a.format {
        Format::Csv => report.to_csv()?,
        Format::Json => {
            let mut s = report.to_json(a.timing)?;
            s.push('\n');
            s
        }
        Format::Text => report
            .records
            .iter()
            .map(|r| {
                let status = if r.error.is_some() {
                    "ERR "
                } else if r.as_expected {
                    "ok  "
                } else {
                    "FAIL"
                };
                let control = if r.expect == Expectation::Fail { " (control)" } else { "" };
                let residual = r.residual.map_or("n/a".into(), |x| format!("{x:.3e}"));
                format!("{status} {}{control} residual {residual} (tol {:.1e})\n", r.key, r.tolerance)
            })
            .collect(),
    };
    match &cfg.out {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    let s = &report.summary;
    eprintln!(
        "{}: {} cases, {} passed, {} controls, {} unexpected, worst residual {} -> {}",
        cfg.suite.as_str(),
        s.total,
        s.passed,
        s.controls,
        s.unexpected,
        s.worst_residual.map_or("n/a".into(), |w| format!("{w:.3e}")),
        if s.ok { "PASS" } else { "FAIL" }
    );
    for r in report.records.iter().filter(|r| !r.as_expected).take(10) {
        match &r.error {
            Some(e) => eprintln!("  {}: error: {e}", r.key),
            None => eprintln!("  {}: residual {:.3e} vs {:.1e}", r.key, r.residual.unwrap_or(f64::NAN), r.tolerance),
        }
    }
    Ok(s.ok)
}
