use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ewlab_core::error::Error;
use ewlab_core::report::{export_grid, parse_params, run, CheckKind, Command, Format, Report, RunConfig};
use ewlab_core::ward::{catalog, LABELS};

#[derive(Parser)]
#[command(name = "ewlab", version, about = "Einstein-Weyl and Toda numerical checks")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Catalog of built-in spaces.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
    /// Run one family of pointwise checks over seeded probes.
    Verify {
        check: Check,
        #[command(flatten)]
        common: Common,
    },
    /// Count Toda structures.
    Structures {
        #[command(flatten)]
        common: Common,
    },
    /// Obstruction identities for the confirmed structures or a given congruence.
    Obstruct {
        #[command(flatten)]
        common: Common,
        /// Unit congruence as three comma-separated component expressions.
        #[arg(long)]
        congruence: Option<String>,
    },
    /// Write metric, Weyl form and residuals on a grid as CSV.
    Export {
        #[command(flatten)]
        common: Common,
        /// Grid size, e.g. 10x10x1.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum CatalogAction {
    List {
        #[arg(long, value_enum, default_value = "text")]
        format: OutFormat,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Check {
    Ew,
    Toda,
    Harmonic,
    Crosscheck,
    Killing,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Json,
    Text,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    space: Option<String>,
    /// Catalog parameters, e.g. a=1,b=1,c=1.
    #[arg(long)]
    params: Option<String>,
    /// Toda potential u(x, y, z).
    #[arg(long)]
    u: Option<String>,
    /// Axial harmonic profile V(rho, eta).
    #[arg(long = "V")]
    v: Option<String>,
    /// Chart domain override, e.g. 0.2:3,-2:2,0:6.
    #[arg(long, allow_hyphen_values = true)]
    domain: Option<String>,
    #[arg(long)]
    probes: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = ewlab_core::charts::field::DEFAULT_FD_STEP)]
    fd_step: f64,
    #[arg(long, value_enum, default_value = "json")]
    format: OutFormat,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Precondition(_) | Error::NotEinsteinWeyl { .. } | Error::InsufficientOrder { .. } => 3,
            Error::NonFinite { .. }
            | Error::NotPositiveDefinite { .. }
            | Error::StepUnderflow { .. } => 1,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn config_error(message: String) -> Failure {
    Failure { code: 2, message }
}

fn parse_domain(text: &str) -> Result<[(f64, f64); 3], Failure> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(config_error(format!("domain `{text}` needs three lo:hi ranges")));
    }
    let mut out = [(0.0, 0.0); 3];
    for (slot, part) in out.iter_mut().zip(parts) {
        let (lo, hi) = part
            .split_once(':')
            .ok_or_else(|| config_error(format!("range `{part}` is not lo:hi")))?;
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| config_error(format!("`{s}` is not a number")))
        };
        *slot = (num(lo)?, num(hi)?);
    }
    Ok(out)
}

/// Splits at commas outside parentheses.
fn split_components(text: &str) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut depth = 0i32;
    for ch in text.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(String::new());
                continue;
            }
            _ => {}
        }
        out.last_mut().expect("nonempty").push(ch);
    }
    out.into_iter().map(|s| s.trim().to_string()).collect()
}

fn parse_grid(text: &str) -> Result<[usize; 3], Failure> {
    let dims: Vec<usize> = text
        .split(['x', 'X'])
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| config_error(format!("grid `{text}` is not NxMxK")))?;
    match dims[..] {
        [a, b, c] if a > 0 && b > 0 && c > 0 => Ok([a, b, c]),
        _ => Err(config_error(format!("grid `{text}` is not NxMxK with positive sizes"))),
    }
}

fn config(command: &str, c: &Common, default_probes: usize) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::new(command);
    cfg.space = c.space.clone();
    cfg.params = match &c.params {
        Some(p) => parse_params(p)?,
        None => Vec::new(),
    };
    cfg.u = c.u.clone();
    cfg.v = c.v.clone();
    cfg.domain = c.domain.as_deref().map(parse_domain).transpose()?;
    cfg.probes = c.probes.unwrap_or(default_probes);
    cfg.seed = c.seed;
    cfg.tol = c.tol;
    cfg.fd_step = c.fd_step;
    cfg.format = match c.format {
        OutFormat::Json => Format::Json,
        OutFormat::Text => Format::Text,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn emit(report: &Report) -> u8 {
    match report.config.format {
        Format::Json => println!("{}", report.to_json()),
        Format::Text => print!("{}", report.to_text()),
    }
    if report.gated() {
        3
    } else if report.passed() {
        0
    } else {
        1
    }
}

fn list(format: OutFormat) -> Result<u8, Failure> {
    let mut rows = Vec::new();
    for label in LABELS {
        let e = catalog(label, &[])?;
        rows.push((label, e.params));
    }
    match format {
        OutFormat::Json => {
            let v: Vec<_> = rows
                .iter()
                .map(|(l, p)| serde_json::json!({ "label": l, "params": p }))
                .collect();
            println!("{}", serde_json::to_string_pretty(&v).expect("serializes"));
        }
        OutFormat::Text => {
            for (l, p) in rows {
                let p: Vec<String> = p.iter().map(|(k, v)| format!("{k}={v}")).collect();
                println!("{l:<18} {}", p.join(","));
            }
        }
    }
    Ok(0)
}

fn execute(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Cmd::Catalog {
            action: CatalogAction::List { format },
        } => list(format),
        Cmd::Verify { check, common } => {
            let kind = match check {
                Check::Ew => CheckKind::Ew,
                Check::Toda => CheckKind::Toda,
                Check::Harmonic => CheckKind::Harmonic,
                Check::Crosscheck => CheckKind::Crosscheck,
                Check::Killing => CheckKind::Killing,
            };
            let cfg = config("verify", &common, 20)?;
            Ok(emit(&run(&Command::Verify(kind), &cfg)?))
        }
        Cmd::Structures { common } => {
            let cfg = config("structures", &common, 6)?;
            Ok(emit(&run(&Command::Structures, &cfg)?))
        }
        Cmd::Obstruct { common, congruence } => {
            let cfg = config("obstruct", &common, 6)?;
            let congruence = match congruence {
                Some(text) => {
                    let parts = split_components(&text);
                    let parts: [String; 3] = parts.try_into().map_err(|_| {
                        config_error(format!("congruence `{text}` needs three components"))
                    })?;
                    Some(parts)
                }
                None => None,
            };
            Ok(emit(&run(&Command::Obstruct { congruence }, &cfg)?))
        }
        Cmd::Export { common, grid, out } => {
            let dims = parse_grid(&grid)?;
            let cfg = config("export", &common, 1)?;
            let (csv, report) = export_grid(&cfg, dims)?;
            let write = |path: &PathBuf, text: &str| {
                std::fs::write(path, text)
                    .map_err(|e| config_error(format!("cannot write {}: {e}", path.display())))
            };
            write(&out, &csv)?;
            write(&out.with_extension("json"), &report.to_json())?;
            Ok(if report.passed() { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
