//! The `subh` command line: subcommands, run manifests and artifacts.

use std::fs::{self, File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::action::grad_check_random;
use crate::audit::audit;
use crate::config::{Resolved, RunConfig};
use crate::error::{Error, Result};
use crate::expr::parse_expression;
use crate::plot;
use crate::saddle::{solve, SolveStatus};
use crate::scan::{primes_up_to, scan, ScanReport};
use crate::spectral::SpectralLoop;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

pub const LOCK_FILE: &str = ".subh.lock";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "subh", version, about = "Subharmonic orbits of periodic Hamiltonian systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "SUBH_OUT_DIR", default_value = "subh_out")]
    pub out: PathBuf,
    /// Overrides the solver seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; more than one runs scans in parallel cold-start mode.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find one kT-periodic solution.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        k: u32,
    },
    /// Solve over a range of k and report trends.
    Scan {
        #[command(flatten)]
        common: Common,
        /// Inclusive range `A..B`.
        #[arg(long, conflicts_with = "primes_up_to")]
        k_range: Option<String>,
        #[arg(long)]
        primes_up_to: Option<u32>,
    },
    /// Sample the growth hypotheses on H and gamma.
    Audit {
        #[command(flatten)]
        common: Common,
    },
    /// Compare the action gradient with central differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 8)]
        n_max: usize,
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
    /// Parse an expression and print its syntax tree.
    ParseCheck { expression: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub arguments: Vec<String>,
    pub seed: u64,
    pub started_unix: f64,
    pub complete: bool,
    pub config: RunConfig,
    pub inputs: Vec<InputHash>,
    pub outputs: Vec<String>,
    pub timings: Vec<Timing>,
}

/// Parses `A..B` (inclusive).
pub fn parse_k_range(s: &str) -> Result<Vec<u32>> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| Error::Config(format!("k-range `{s}` is not of the form A..B")))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<u32>()
            .map_err(|_| Error::Config(format!("k-range `{s}`: `{v}` is not a positive integer")))
    };
    let (a, b) = (parse(a)?, parse(b)?);
    if a == 0 || a > b {
        return Err(Error::Config(format!("k-range `{s}` is empty")));
    }
    Ok((a..=b).collect())
}

/// An output directory held for the duration of a run.
struct Output {
    dir: PathBuf,
    manifest: RunManifest,
    clock: Instant,
}

impl Output {
    fn open(dir: &Path, manifest: RunManifest) -> Result<Self> {
        fs::create_dir_all(dir)?;
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(dir.join(LOCK_FILE))
            .map_err(|e| {
                Error::Config(format!(
                    "output directory {} is in use ({LOCK_FILE}): {e}",
                    dir.display()
                ))
            })?
            .write_all(std::process::id().to_string().as_bytes())?;
        let out = Self {
            dir: dir.to_path_buf(),
            manifest,
            clock: Instant::now(),
        };
        out.write_manifest()?;
        Ok(out)
    }

    fn write_manifest(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.manifest)?;
        let mut f = File::create(self.dir.join(MANIFEST_FILE))?;
        f.write_all(text.as_bytes())?;
        Ok(())
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents)?;
        self.manifest.outputs.push(name.to_string());
        Ok(path)
    }

    fn time(&mut self, stage: &str) {
        self.manifest.timings.push(Timing {
            stage: stage.into(),
            seconds: self.clock.elapsed().as_secs_f64(),
        });
        self.clock = Instant::now();
    }

    fn finish(mut self) -> Result<()> {
        self.manifest.complete = true;
        self.write_manifest()
    }
}

impl Drop for Output {
    fn drop(&mut self) {
        let _ = fs::remove_file(self.dir.join(LOCK_FILE));
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn load(common: &Common) -> Result<(Resolved, Vec<InputHash>)> {
    let (mut cfg, inputs) = match &common.config {
        Some(path) => {
            let bytes = fs::read(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            let text = String::from_utf8(bytes.clone())
                .map_err(|_| Error::Config(format!("{} is not UTF-8", path.display())))?;
            (
                RunConfig::from_json(&text)?,
                vec![InputHash {
                    path: path.display().to_string(),
                    sha256: sha256_hex(&bytes),
                }],
            )
        }
        None => (RunConfig::default(), vec![]),
    };
    if let Some(seed) = common.seed {
        cfg.solver.seed = seed;
    }
    if let Some(threads) = common.threads {
        if threads == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        cfg.scan.parallel = threads > 1;
    }
    Ok((cfg.resolve()?, inputs))
}

fn manifest(sub: &str, args: &[String], r: &Resolved, inputs: Vec<InputHash>) -> RunManifest {
    RunManifest {
        tool: "subh".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: sub.into(),
        arguments: args.to_vec(),
        seed: r.config.solver.seed,
        started_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0),
        complete: false,
        config: r.config.clone(),
        inputs,
        outputs: vec![],
        timings: vec![],
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) if n > 1 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::Config(format!("thread pool: {e}"))),
        _ => Ok(f()),
    }
}

fn cmd_solve(common: &Common, k: u32, args: &[String]) -> Result<i32> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let (r, inputs) = load(common)?;
    let mut out = Output::open(&common.out, manifest("solve", args, &r, inputs))?;
    let result = solve(&r.hamiltonian, k, &r.config.solver, None)?;
    out.time("solve");
    out.write(&format!("result_k{k}.json"), &result.to_json())?;
    let loop_path = out.write(&format!("loop_k{k}.json"), &result.loop_().to_json())?;
    let written = SpectralLoop::from_json(&fs::read_to_string(loop_path)?)?;
    out.write(
        &format!("orbit_k{k}.svg"),
        &plot::orbit_svg(&written, 1024, &format!("{}, k = {k}", r.hamiltonian.describe()))?,
    )?;
    out.time("write");
    out.finish()?;
    println!(
        "k = {k}: status {:?}, C_k = {:.16e}, residual = {:.3e}",
        result.status, result.level_ck, result.residual
    );
    println!("{}", result.note);
    Ok(if result.status == SolveStatus::Converged {
        EXIT_OK
    } else {
        EXIT_FAILED
    })
}

/// Reads `(k, value, minimal_r)` columns back from a scan CSV.
fn csv_columns(text: &str, col: usize) -> Result<Vec<(f64, f64, String)>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let idx = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::Config(format!("scan CSV lacks column {name}")))
    };
    let (ik, ir) = (idx("k")?, idx("minimal_r")?);
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let num = |i: usize| {
                f.get(i)
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("malformed CSV line `{l}`")))
            };
            Ok((num(ik)?, num(col)?, format!(" r={}", f.get(ir).unwrap_or(&"?"))))
        })
        .collect()
}

fn cmd_scan(common: &Common, k_range: Option<&str>, primes: Option<u32>, args: &[String]) -> Result<i32> {
    let (mut r, inputs) = load(common)?;
    if let Some(s) = k_range {
        r.config.scan.k_values = parse_k_range(s)?;
    } else if let Some(p) = primes {
        r.config.scan.k_values = primes_up_to(p);
    }
    r.config.scan.validate()?;
    let mut out = Output::open(&common.out, manifest("scan", args, &r, inputs))?;
    let report: ScanReport = with_threads(common.threads, || scan(&r.hamiltonian, &r.config.scan))??;
    out.time("scan");
    let csv_path = out.write("scan.csv", &report.to_csv())?;
    out.write("scan.json", &serde_json::to_string_pretty(&report)?)?;
    for (rec, res) in report.records.iter().zip(&report.results) {
        if let Some(res) = res {
            out.write(&format!("loops/loop_k{}.json", rec.k), &res.loop_().to_json())?;
        }
    }
    let csv = fs::read_to_string(csv_path)?;
    for (col, file, title, y) in [
        (2, "level_per_k.svg", "C_k / k", "C_k/k"),
        (3, "sup_norm.svg", "sup norm of x_k", "sup |x_k|"),
    ] {
        let rows = csv_columns(&csv, col)?;
        let pts: Vec<(f64, f64)> = rows.iter().map(|(k, v, _)| (*k, *v)).collect();
        let labels: Vec<String> = rows.into_iter().map(|(_, _, l)| l).collect();
        out.write(file, &plot::trend_svg(&pts, &labels, title, y)?)?;
    }
    out.time("write");
    out.finish()?;
    print!("{}", report.to_csv());
    println!("{}", report.summary.caveat);
    Ok(if report.summary.all_converged {
        EXIT_OK
    } else {
        EXIT_FAILED
    })
}

fn cmd_audit(common: &Common, args: &[String]) -> Result<i32> {
    let (r, inputs) = load(common)?;
    let mut out = Output::open(&common.out, manifest("audit", args, &r, inputs))?;
    let report = audit(&r.hamiltonian, &r.gamma, &r.config.audit)?;
    out.time("audit");
    out.write("audit.json", &report.to_json())?;
    out.write("audit.txt", &report.to_text())?;
    out.write("audit_trends.csv", &report.trends_csv())?;
    out.finish()?;
    print!("{}", report.to_text());
    Ok(if report.any_violated() { EXIT_FAILED } else { EXIT_OK })
}

#[derive(Debug, Serialize)]
struct GradcheckOutput {
    k_values: Vec<u32>,
    n_max: usize,
    trials: usize,
    max_rel_error: f64,
    worst_k: u32,
    threshold: f64,
}

const GRADCHECK_LIMIT: f64 = 1e-5;

fn cmd_gradcheck(common: &Common, n_max: usize, trials: usize, args: &[String]) -> Result<i32> {
    let (r, inputs) = load(common)?;
    let mut out = Output::open(&common.out, manifest("gradcheck", args, &r, inputs))?;
    let ks = r.config.scan.k_values.clone();
    let rep = grad_check_random(&r.hamiltonian, &ks, n_max, trials, r.config.solver.seed)?;
    out.time("gradcheck");
    let result = GradcheckOutput {
        k_values: ks,
        n_max,
        trials: rep.trials,
        max_rel_error: rep.max_rel_error,
        worst_k: rep.worst_k,
        threshold: GRADCHECK_LIMIT,
    };
    out.write("gradcheck.json", &serde_json::to_string_pretty(&result)?)?;
    out.finish()?;
    println!(
        "max relative error {:.3e} over {} trials (worst k = {})",
        rep.max_rel_error, rep.trials, rep.worst_k
    );
    Ok(if rep.max_rel_error <= GRADCHECK_LIMIT {
        EXIT_OK
    } else {
        EXIT_FAILED
    })
}

fn cmd_parse_check(expression: &str) -> Result<i32> {
    let e = parse_expression(expression)?;
    println!("{:#?}", e.root);
    Ok(EXIT_OK)
}

/// Runs the CLI on `args` (including the program name) and returns the
/// exit code.
pub fn run(args: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let rest = &args[1.min(args.len())..];
    let res = match &cli.command {
        Command::Solve { common, k } => cmd_solve(common, *k, rest),
        Command::Scan {
            common,
            k_range,
            primes_up_to,
        } => cmd_scan(common, k_range.as_deref(), *primes_up_to, rest),
        Command::Audit { common } => cmd_audit(common, rest),
        Command::Gradcheck {
            common,
            n_max,
            trials,
        } => cmd_gradcheck(common, *n_max, *trials, rest),
        Command::ParseCheck { expression } => cmd_parse_check(expression),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_)
                | Error::Syntax { .. }
                | Error::UnknownIdentifier { .. }
                | Error::Arity { .. }
                | Error::Aliasing { .. }
                | Error::Json(_) => EXIT_CONFIG,
                _ => EXIT_FAILED,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_ranges() {
        assert_eq!(parse_k_range("1..3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_k_range("5..5").unwrap(), vec![5]);
        assert!(parse_k_range("3..1").is_err());
        assert!(parse_k_range("0..2").is_err());
        assert!(parse_k_range("1-3").is_err());
    }

    #[test]
    fn unknown_flags_are_config_errors() {
        assert_eq!(run(vec!["subh".into(), "solve".into(), "--bogus".into()]), EXIT_CONFIG);
    }
}
