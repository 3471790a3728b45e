use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use serde_json::{json, Value};

use erdos_selfridge::bounds::{
    difference_threshold_row, faltings_row, mordell_ball_row, BallRowInput, BoundTable,
};
use erdos_selfridge::candidate::parse_candidate;
use erdos_selfridge::config::{parse_rational, Config};
use erdos_selfridge::es_model::{sander_catalog, search_points_sharded, EsCurve, RationalPoint};
use erdos_selfridge::lemmas::{run_lemmas, SELECTORS};
use erdos_selfridge::mordell::WeierstrassCurve;
use erdos_selfridge::pipeline::run_audit;
use erdos_selfridge::Error;

const EXIT_CONTRADICTION: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_INPUT: u8 = 65;

#[derive(Parser, Debug)]
#[command(name = "es-audit", version, about = "Exact searches and audits for y^l = x(x+1)...(x+k-1)")]
struct Cli {
    /// Seed for randomized suites.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker count for sharded searches; results do not depend on it.
    #[arg(long, global = true)]
    shards: Option<usize>,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rational points in a box, or the known family points when no box is given.
    Search {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        l: u32,
        /// Largest x-denominator.
        #[arg(long, requires = "numers")]
        denoms: Option<u64>,
        /// Largest |x-numerator|.
        #[arg(long, requires = "denoms")]
        numers: Option<u64>,
        /// Parameter range for the (2, 2) family.
        #[arg(long, default_value_t = 50)]
        family_bound: u32,
    },
    /// Run the audit pipeline on a candidate file and print the certificate.
    Audit {
        candidate: PathBuf,
        /// Write the certificate here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded property suites.
    Lemmas {
        #[arg(long = "run", value_parser = clap::builder::PossibleValuesParser::new(SELECTORS))]
        selector: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Bound evaluations.
    Bounds {
        #[arg(long)]
        l: u32,
        /// Height of the auxiliary curve.
        #[arg(long = "H", default_value = "17000")]
        h: BigInt,
        /// Mordell curve y^2 = x^3 + gamma for the ball row.
        #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["a", "b"])]
        gamma: Option<i64>,
        /// Curve y^2 = x^3 + a x + b for the ball row.
        #[arg(long, allow_hyphen_values = true, requires = "b")]
        a: Option<i64>,
        #[arg(long, allow_hyphen_values = true, requires = "a")]
        b: Option<i64>,
        /// Ball radius as a multiple of L.
        #[arg(long, default_value_t = 5.0)]
        ball_mult: f64,
        /// Minimum positive canonical height; estimated when absent.
        #[arg(long = "ball-L")]
        ball_l: Option<f64>,
        /// Rank; a lower bound is computed when absent.
        #[arg(long)]
        rank: Option<usize>,
        /// k and c for the threshold row.
        #[arg(long)]
        k: Option<BigInt>,
        #[arg(long, requires = "k")]
        c: Option<String>,
    },
    /// Render a certificate as a table.
    Report { certificate: PathBuf },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: EXIT_INPUT, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Input { .. } => EXIT_INPUT,
            Error::Precondition(_) | Error::Domain(_) => EXIT_USAGE,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn load_config(cli: &Cli) -> Result<Config, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => toml::from_str::<Config>(&read(p)?)
            .map_err(|e| Failure::input(format!("config {}: {}", p.display(), e.message())))?,
        None => Config::default(),
    };
    if let Some(s) = cli.shards {
        cfg.shards = s;
    }
    cfg.check()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::Search { k, l, denoms, numers, family_bound } => {
            search(*k, *l, denoms.zip(*numers), *family_bound, cfg.shards, cli.format)
        }
        Command::Audit { candidate, out } => audit(candidate, out.as_deref(), &cfg),
        Command::Lemmas { selector, trials } => lemmas(selector, *trials, cli.seed, cli.format),
        Command::Bounds { l, h, gamma, a, b, ball_mult, ball_l, rank, k, c } => {
            let curve = match (gamma, a, b) {
                (Some(g), _, _) => Some(WeierstrassCurve::mordell(*g)?),
                (None, Some(a), Some(b)) => Some(WeierstrassCurve::new(*a, *b)?),
                _ => None,
            };
            let mut table = BoundTable { rows: vec![faltings_row(*l, h, cfg.precision)] };
            if let Some(curve) = curve {
                let over = cfg.curve_override(
                    i64::try_from(&curve.a).unwrap_or(i64::MAX),
                    i64::try_from(&curve.b).unwrap_or(i64::MAX),
                );
                let input = BallRowInput {
                    curve: curve.clone(),
                    multiplier: *ball_mult,
                    l: ball_l.or(over.and_then(|o| o.l)),
                    r: rank.or(over.and_then(|o| o.rank_upper)),
                };
                table.rows.push(mordell_ball_row(&input)?);
            }
            if let Some(k) = k {
                let c = match c {
                    Some(c) => parse_rational(c).map_err(|e| Failure { code: EXIT_USAGE, message: e })?,
                    None => parse_rational("1").expect("literal"),
                };
                table.rows.push(difference_threshold_row(k, &c, cfg.precision)?);
            }
            match cli.format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&table).expect("serializes")),
                Format::Text => print!("{}", table.render()),
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(std::io::stdout());
                    w.write_record(["row", "status", "label", "value"]).map_err(io)?;
                    for r in &table.rows {
                        let status = serde_json::to_value(&r.status).expect("serializes");
                        let status = status.as_str().unwrap_or("?");
                        for (label, value) in &r.values {
                            w.write_record([r.name, status, label, value]).map_err(io)?;
                        }
                        if r.values.is_empty() {
                            w.write_record([r.name, status, "note", r.note.as_deref().unwrap_or("")]).map_err(io)?;
                        }
                    }
                    w.flush().map_err(|e| Failure { code: 1, message: e.to_string() })?;
                }
            }
            Ok(0)
        }
        Command::Report { certificate } => report(certificate),
    }
}

fn search(
    k: u32,
    l: u32,
    bounds: Option<(u64, u64)>,
    family_bound: u32,
    shards: usize,
    format: Format,
) -> Result<u8, Failure> {
    let curve = EsCurve::new(k, l).map_err(|e| Failure { code: EXIT_USAGE, message: e.to_string() })?;
    let (mode, points, diagnostic) = match bounds {
        Some((d, n)) => ("box", search_points_sharded(&curve, d, n, shards), None),
        None => {
            let cat = sander_catalog(&curve, family_bound);
            ("family", cat.points, cat.diagnostic)
        }
    };
    match format {
        Format::Csv | Format::Text => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            w.write_record(["k", "l", "x_num", "x_den", "y_num", "y_den", "trivial"]).map_err(io)?;
            for p in &points {
                w.write_record([
                    k.to_string(),
                    l.to_string(),
                    p.x.numer().to_string(),
                    p.x.denom().to_string(),
                    p.y.numer().to_string(),
                    p.y.denom().to_string(),
                    p.is_trivial().to_string(),
                ])
                .map_err(io)?;
            }
            w.flush().map_err(|e| Failure { code: 1, message: e.to_string() })?;
        }
        Format::Json => {
            let rows: Vec<Value> = points
                .iter()
                .map(|p| json!({ "x": p.x.to_string(), "y": p.y.to_string(), "trivial": p.is_trivial() }))
                .collect();
            let doc = json!({ "k": k, "l": l, "mode": mode, "points": rows, "diagnostic": diagnostic });
            println!("{}", serde_json::to_string_pretty(&doc).expect("serializes"));
        }
    }
    let nontrivial: Vec<&RationalPoint> = points.iter().filter(|p| !p.is_trivial()).collect();
    if nontrivial.is_empty() {
        eprintln!("trivial-only");
    } else {
        let shown: Vec<String> = nontrivial.iter().take(8).map(|p| p.to_string()).collect();
        let more = if nontrivial.len() > 8 { format!(" and {} more", nontrivial.len() - 8) } else { String::new() };
        eprintln!("{} nontrivial: {}{more}", nontrivial.len(), shown.join(" "));
    }
    if let Some(d) = diagnostic {
        eprintln!("{d}");
    }
    Ok(0)
}

fn io(e: csv::Error) -> Failure {
    Failure { code: 1, message: e.to_string() }
}

fn audit(path: &Path, out: Option<&Path>, cfg: &Config) -> Result<u8, Failure> {
    let candidate = parse_candidate(&read(path)?)?;
    let cert = run_audit(&candidate, cfg)?;
    let text = cert.to_json();
    match out {
        Some(p) => std::fs::write(p, &text).map_err(|e| Failure { code: 1, message: format!("{}: {e}", p.display()) })?,
        None => print!("{text}"),
    }
    Ok(if cert.is_contradiction() { EXIT_CONTRADICTION } else { 0 })
}

fn lemmas(selector: &str, trials: usize, seed: u64, format: Format) -> Result<u8, Failure> {
    let report = run_lemmas(selector, trials, seed)?;
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report).expect("serializes")),
        Format::Text => print!("{}", report.render()),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            w.write_record(["suite", "trials", "passed", "failed"]).map_err(io)?;
            for s in &report.suites {
                w.write_record([s.name.to_string(), s.trials.to_string(), s.passed().to_string(), s.failed.to_string()])
                    .map_err(io)?;
            }
            w.flush().map_err(|e| Failure { code: 1, message: e.to_string() })?;
        }
    }
    Ok(if report.all_pass() { 0 } else { 1 })
}

fn stage_summary(stage: &Value) -> String {
    if let Some(f) = stage.get("failure").filter(|f| !f.is_null()) {
        return format!("{}: {}", f["assertion"].as_str().unwrap_or("?"), f["values"]);
    }
    let d = &stage["details"];
    if let Some(r) = d.get("reason").and_then(Value::as_str) {
        return r.to_string();
    }
    let keys = ["count", "pairs", "total_points", "fired", "lnln_bound", "rounds_run", "x"];
    keys.iter()
        .filter_map(|k| d.get(*k).map(|v| (k, v)))
        .map(|(k, v)| match v {
            Value::Array(a) => format!("{k}={}", a.len()),
            Value::String(s) => format!("{k}={s}"),
            other => format!("{k}={other}"),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn report(path: &Path) -> Result<u8, Failure> {
    let doc: Value = serde_json::from_str(&read(path)?).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let stages = doc["stages"].as_array().ok_or_else(|| Failure::input("certificate has no stages array"))?;
    let input = &doc["input"];
    println!(
        "candidate n={} d={} t={} k={} l={}",
        input["n"], input["d"], input["t"], input["k"], input["l"]
    );
    println!("{:<16} {:<15} summary", "stage", "status");
    for s in stages {
        println!(
            "{:<16} {:<15} {}",
            s["name"].as_str().unwrap_or("?"),
            s["status"].as_str().unwrap_or("?"),
            stage_summary(s)
        );
    }
    let v = &doc["verdict"];
    match v["status"].as_str() {
        Some("consistent") => println!("verdict: consistent"),
        Some("contradiction") => println!(
            "verdict: contradiction at {}: {}",
            v["stage"].as_str().unwrap_or("?"),
            v["assertion"].as_str().unwrap_or("?")
        ),
        _ => return Err(Failure::input("certificate has no verdict")),
    }
    Ok(0)
}
