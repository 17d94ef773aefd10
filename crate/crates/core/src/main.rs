use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use odeinv::canonical::{canonical_form, decide_equivalence, EquivalenceStatus, DEFAULT_TOL};
use odeinv::invariants::{classify_orbit, InvariantBundle, Locus, OrbitClass, OrbitLevel};
use odeinv::ode::{pushforward_ode, CubicOde, Domain, PointMap};
use odeinv::report::{self, document, to_pretty};
use odeinv::suite::{run_all, SuiteSizes};
use odeinv::{Error, Point2};

const EXIT_NOT_EQUIVALENT: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;
const EXIT_INCONCLUSIVE: u8 = 4;
const EXIT_INTERNAL: u8 = 5;

/// Point-transformation invariants and equivalence of y'' = a3 y'^3 + a2 y'^2 + a1 y' + a0.
#[derive(Parser, Debug)]
#[command(name = "odeinv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Parse an ODE file and/or a map file and echo them normalized.
    ParseCheck,
    /// Symbolic invariants, orbit class and optional values at a point.
    Invariants,
    /// Orbit class on the whole plane and optionally at a point.
    Classify,
    /// Push an ODE forward along a point map.
    Transform,
    /// Sample the canonical form on a grid.
    Canonical,
    /// Decide point equivalence of two ODEs.
    Equiv,
    /// Run the seeded property suites.
    Selftest,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Args, Debug)]
struct Opts {
    /// ODE file (`a0 = ...` through `a3 = ...`).
    #[arg(long, global = true)]
    ode: Option<PathBuf>,
    /// Second ODE file for `equiv`.
    #[arg(long, global = true)]
    ode2: Option<PathBuf>,
    /// Point-map file (`fx`, `fy`, `invx`, `invy`, `domain`).
    #[arg(long, global = true)]
    map: Option<PathBuf>,
    /// Sampling rectangle.
    #[arg(long, global = true, num_args = 4, value_names = ["X0", "X1", "Y0", "Y1"], allow_negative_numbers = true)]
    domain: Option<Vec<f64>>,
    /// Sampling rectangle of the second ODE for `equiv` (defaults to --domain).
    #[arg(long, global = true, num_args = 4, value_names = ["X0", "X1", "Y0", "Y1"], allow_negative_numbers = true)]
    domain2: Option<Vec<f64>>,
    /// Lattice size per side.
    #[arg(long, global = true, default_value_t = 41, value_parser = clap::value_parser!(u32).range(5..))]
    grid: u32,
    /// Evaluation point.
    #[arg(long, global = true, num_args = 2, value_names = ["X", "Y"], allow_negative_numbers = true)]
    at: Option<Vec<f64>>,
    /// Relative tolerance of the canonical-coefficient comparison.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL, value_parser = positive)]
    tol: f64,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Cases per suite for `selftest` (default: full sizes).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    trials: Option<u64>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(_) => Err("must be a positive number".into()),
        Err(e) => Err(e.to_string()),
    }
}

/// A failed run: exit code, message and an optional report still worth emitting.
struct Failure {
    code: u8,
    message: String,
    report: Option<Map<String, Value>>,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure { code: EXIT_INPUT, message: message.into(), report: None }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match e {
            Error::Parse(_) | Error::Format { .. } | Error::MapInvalid(_) => EXIT_INPUT,
            Error::DegenerateOrbit(_) | Error::NowhereGeneralPosition => EXIT_DEGENERATE,
            _ => EXIT_INTERNAL,
        };
        Failure { code, message: e.to_string(), report: None }
    }
}

/// Rendered output and exit code of a successful run.
struct Output {
    text: String,
    code: u8,
}

type Run = Result<Output, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out_path = cli.opts.out.clone();
    let (text, code) = match run(&cli) {
        Ok(o) => (Some(o.text), o.code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            (f.report.map(to_pretty), f.code)
        }
    };
    if let Some(text) = text {
        let written = match &out_path {
            Some(p) => fs::write(p, text).map_err(|e| format!("cannot write {}: {e}", p.display())),
            None => {
                use std::io::Write;
                std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string())
            }
        };
        if let Err(msg) = written {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_INTERNAL);
        }
    }
    ExitCode::from(code)
}

fn run(cli: &Cli) -> Run {
    let o = &cli.opts;
    match cli.command {
        Command::ParseCheck => parse_check(o),
        Command::Invariants => invariants(o),
        Command::Classify => classify(o),
        Command::Transform => transform(o),
        Command::Canonical => canonical(o),
        Command::Equiv => equiv(o),
        Command::Selftest => selftest(o),
    }
}

fn format_for(o: &Opts, default: Format, allowed: &[Format]) -> Result<Format, Failure> {
    let f = o.format.unwrap_or(default);
    if allowed.contains(&f) {
        Ok(f)
    } else {
        Err(Failure::usage(format!("--format {f:?} is not supported here").to_lowercase()))
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

fn load_ode(path: Option<&PathBuf>, flag: &str) -> Result<CubicOde, Failure> {
    let path = path.ok_or_else(|| Failure::usage(format!("{flag} is required")))?;
    Ok(CubicOde::parse_file(&read(path)?, &path.display().to_string())?)
}

fn load_map(path: Option<&PathBuf>) -> Result<PointMap, Failure> {
    let path = path.ok_or_else(|| Failure::usage("--map is required"))?;
    Ok(PointMap::parse_file(&read(path)?, &path.display().to_string())?)
}

fn domain_of(v: Option<&Vec<f64>>) -> Result<Domain, Failure> {
    match v.map(Vec::as_slice) {
        None => Ok(Domain::new(-1.0, 1.0, -1.0, 1.0).expect("unit square is valid")),
        Some(&[x0, x1, y0, y1]) => Domain::new(x0, x1, y0, y1).map_err(|e| Failure::usage(e.to_string())),
        Some(_) => Err(Failure::usage("--domain needs four numbers")),
    }
}

fn point_of(o: &Opts) -> Option<Point2> {
    o.at.as_deref().map(|v| Point2::new(v[0], v[1]))
}

fn json_output(m: Map<String, Value>) -> Run {
    Ok(Output { text: to_pretty(m), code: 0 })
}

fn degenerate(e: &CubicOde) -> Option<OrbitClass> {
    let c = classify_orbit(e, Locus::Identically);
    matches!(c.level, OrbitLevel::Degenerate2 | OrbitLevel::Degenerate3).then_some(c)
}

fn degenerate_failure(kind: &str, which: &str, class: OrbitClass) -> Failure {
    let mut m = document(kind);
    let message = format!("{which} is {}: the operation requires general position (L3 != 0)", class.level);
    m.insert("error".into(), json!(message));
    m.insert("orbit".into(), report::orbit_json(class));
    Failure { code: EXIT_DEGENERATE, message, report: Some(m) }
}

fn parse_check(o: &Opts) -> Run {
    format_for(o, Format::Json, &[Format::Json])?;
    if o.ode.is_none() && o.map.is_none() {
        return Err(Failure::usage("parse-check needs --ode and/or --map"));
    }
    let mut m = document("parse-check");
    if o.ode.is_some() {
        m.insert("ode".into(), report::ode_json(&load_ode(o.ode.as_ref(), "--ode")?));
    }
    if o.map.is_some() {
        let f = load_map(o.map.as_ref())?;
        m.insert(
            "map".into(),
            json!({
                "fx": f.fwd()[0].to_string(),
                "fy": f.fwd()[1].to_string(),
                "invx": f.inv()[0].to_string(),
                "invy": f.inv()[1].to_string(),
                "domain": report::domain_json(f.domain()),
            }),
        );
    }
    m.insert("ok".into(), json!(true));
    json_output(m)
}

fn invariants(o: &Opts) -> Run {
    format_for(o, Format::Json, &[Format::Json])?;
    let e = load_ode(o.ode.as_ref(), "--ode")?;
    let class = classify_orbit(&e, Locus::Identically);
    let bundle = match InvariantBundle::new(&e) {
        Ok(b) => b,
        Err(Error::DegenerateOrbit(_)) => return Err(degenerate_failure("invariants", "the equation", class)),
        Err(err) => return Err(err.into()),
    };
    let mut m = document("invariants");
    m.insert("ode".into(), report::ode_json(&e));
    m.insert("orbit".into(), report::orbit_json(class));
    m.insert("invariants".into(), report::bundle_json(&bundle));
    if let Some(p) = point_of(o) {
        m.insert("orbitAt".into(), report::orbit_json(classify_orbit(&e, Locus::At(p))));
        let values = bundle.eval(p)?;
        m.insert("values".into(), report::values_json(p, &values));
    }
    json_output(m)
}

fn classify(o: &Opts) -> Run {
    format_for(o, Format::Json, &[Format::Json])?;
    let e = load_ode(o.ode.as_ref(), "--ode")?;
    let mut m = document("classify");
    m.insert("orbit".into(), report::orbit_json(classify_orbit(&e, Locus::Identically)));
    if let Some(p) = point_of(o) {
        m.insert("point".into(), json!([report::num(p.x), report::num(p.y)]));
        m.insert("orbitAt".into(), report::orbit_json(classify_orbit(&e, Locus::At(p))));
    }
    json_output(m)
}

fn transform(o: &Opts) -> Run {
    let format = format_for(o, Format::Text, &[Format::Text, Format::Json])?;
    let e = load_ode(o.ode.as_ref(), "--ode")?;
    let f = load_map(o.map.as_ref())?;
    let pushed = pushforward_ode(&e, &f)?;
    let text = match format {
        Format::Json => {
            let mut m = document("transform");
            m.insert("ode".into(), report::ode_json(&e));
            m.insert("pushed".into(), report::ode_json(&pushed));
            to_pretty(m)
        }
        _ => pushed.to_file_string(),
    };
    Ok(Output { text, code: 0 })
}

fn canonical(o: &Opts) -> Run {
    let format = format_for(o, Format::Csv, &[Format::Csv, Format::Json])?;
    let e = load_ode(o.ode.as_ref(), "--ode")?;
    if let Some(c) = degenerate(&e) {
        return Err(degenerate_failure("canonical", "the equation", c));
    }
    let form = canonical_form(&e, domain_of(o.domain.as_ref())?, o.grid as usize)?;
    let text = match format {
        Format::Json => to_pretty(report::canonical_json(&form)),
        _ => report::canonical_csv(&form),
    };
    Ok(Output { text, code: 0 })
}

fn equiv(o: &Opts) -> Run {
    format_for(o, Format::Json, &[Format::Json])?;
    let e1 = load_ode(o.ode.as_ref(), "--ode")?;
    let e2 = load_ode(o.ode2.as_ref(), "--ode2")?;
    for (e, which) in [(&e1, "--ode"), (&e2, "--ode2")] {
        if let Some(c) = degenerate(e) {
            return Err(degenerate_failure("equiv", which, c));
        }
    }
    let dom1 = domain_of(o.domain.as_ref())?;
    let dom2 = match &o.domain2 {
        Some(_) => domain_of(o.domain2.as_ref())?,
        None => dom1,
    };
    let n = o.grid as usize;
    let v = decide_equivalence(&e1, &e2, dom1, dom2, n, o.tol);
    let code = match v.status {
        EquivalenceStatus::Equivalent => 0,
        EquivalenceStatus::NotEquivalent => EXIT_NOT_EQUIVALENT,
        EquivalenceStatus::Inconclusive => EXIT_INCONCLUSIVE,
    };
    let mut m = report::verdict_json(&v, o.tol, n);
    m.insert("domain".into(), report::domain_json(dom1));
    m.insert("domain2".into(), report::domain_json(dom2));
    Ok(Output { text: to_pretty(m), code })
}

fn selftest(o: &Opts) -> Run {
    let format = format_for(o, Format::Text, &[Format::Text, Format::Json])?;
    let grid = o.grid as usize;
    let sizes = match o.trials {
        Some(t) => SuiteSizes::uniform(t as usize, grid),
        None => SuiteSizes { grid, ..SuiteSizes::FULL },
    };
    let results = run_all(o.seed, sizes);
    let code = if results.iter().all(|r| r.passed) { 0 } else { 1 };
    let text = match format {
        Format::Json => to_pretty(report::suites_json(o.seed, &results)),
        _ => report::suites_table(o.seed, &results),
    };
    Ok(Output { text, code })
}
