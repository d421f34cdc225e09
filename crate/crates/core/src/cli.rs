//! Command-line front end. `run` returns the process exit code:
//! 0 success, 1 verification failure, 2 usage or configuration error,
//! 3 internal error.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use serde_json::json;

use crate::calu::{calu, mlcalu_1d, mlcalu_2d, LuResult};
use crate::cannon::ml_cannon;
use crate::caqr::{caqr, ml_caqr};
use crate::cost::{default_blocks, model, sweep_with, write_csv, Algorithm, ModelInputs};
use crate::dense::{householder_qr, Mat};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::platform::Platform;
use crate::schedule::BlockSchedule;
use crate::stability::{self, Generator, StudyAlgorithm, StudyConfig};
use crate::vm::{Ledger, LEDGER_SCHEMA_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hcpfactor", version, about = "Multilevel communication-avoiding factorizations on hierarchical machines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the analytical cost models and write per-level rows.
    Predict(PredictArgs),
    /// Run a factorization on a random matrix and report its ledger.
    Simulate(SimulateArgs),
    /// Compare tournament-pivoting LU against GEPP on test matrices.
    Stability(StabilityArgs),
    /// Check the algorithms against reference computations.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
struct MachineArgs {
    /// Platform JSON file, or one of the built-ins `hopper`, `exascale`.
    #[arg(long)]
    platform: Option<String>,
    /// Synthetic grids, deepest level first, e.g. `2x2,4x4`.
    #[arg(long, value_delimiter = ',', conflicts_with = "platform")]
    grid: Vec<String>,
    /// Block sizes `b_1,..,b_l`.
    #[arg(long, value_delimiter = ',')]
    blocks: Vec<usize>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    machine: MachineArgs,
    #[arg(long, default_value = "mlcaqr")]
    algo: String,
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// Top-level node counts to sweep over.
    #[arg(long, value_delimiter = ',')]
    top_nodes: Vec<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    machine: MachineArgs,
    #[arg(long, default_value = "mlcaqr")]
    algo: String,
    #[arg(long, default_value = "64")]
    n: usize,
    #[arg(long, default_value = "1")]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Debug, Args)]
struct StabilityArgs {
    #[command(flatten)]
    machine: MachineArgs,
    #[arg(long, default_value = "mlcalu2d")]
    algo: String,
    /// Generator names; defaults to the twelve standard ones.
    #[arg(long, value_delimiter = ',')]
    gens: Vec<String>,
    #[arg(long, default_value = "256")]
    n: usize,
    #[arg(long, default_value = "2024")]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value = "7")]
    seed: u64,
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::EmptyPlatform
        | Error::InvalidLevel { .. }
        | Error::BufferConstraintViolation { .. }
        | Error::NetworkKindMismatch { .. }
        | Error::LevelOutOfRange { .. }
        | Error::ShapeError(_)
        | Error::PlatformTooDeep { .. }
        | Error::NonSquareGrid { .. }
        | Error::UnsupportedOrder { .. }
        | Error::UnknownGenerator(_)
        | Error::Config(_)
        | Error::Parse(_) => EXIT_CONFIG,
        _ => EXIT_INTERNAL,
    }
}

pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("HCPFACTOR_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).try_init();
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let out = match cli.command {
        Command::Predict(a) => predict(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Stability(a) => run_stability(&a),
        Command::Verify(a) => verify(&a),
    };
    match out {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn parse_grid(items: &[String]) -> Result<Vec<(usize, usize)>> {
    items
        .iter()
        .map(|s| {
            let (r, c) = s
                .split_once('x')
                .ok_or_else(|| Error::Parse(format!("grid '{s}' is not of the form RxC")))?;
            let num = |t: &str| t.trim().parse::<usize>().map_err(|e| Error::Parse(format!("grid '{s}': {e}")));
            Ok((num(r)?, num(c)?))
        })
        .collect()
}

impl MachineArgs {
    fn platform(&self, fallback: impl FnOnce() -> Result<Platform>) -> Result<Platform> {
        match (&self.platform, self.grid.is_empty()) {
            (Some(name), _) if name == "hopper" => Ok(Platform::hopper()),
            (Some(name), _) if name == "exascale" => Ok(Platform::exascale()),
            (Some(path), _) => Platform::from_path(path),
            (None, false) => Platform::synthetic(&parse_grid(&self.grid)?),
            (None, true) => fallback(),
        }
    }

    fn schedule(&self) -> Result<Option<BlockSchedule>> {
        if self.blocks.is_empty() {
            Ok(None)
        } else {
            BlockSchedule::new(self.blocks.clone()).map(Some)
        }
    }
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(
            File::create(p).map_err(|e| Error::Config(format!("cannot create {}: {e}", p.display())))?,
        ),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json(out: &Option<PathBuf>, value: &serde_json::Value) -> Result<()> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Config(format!("json: {e}")))?;
    writeln!(w).map_err(|e| Error::Config(format!("write: {e}")))
}

fn predict(a: &PredictArgs) -> Result<i32> {
    let algo: Algorithm = a.algo.parse()?;
    let platform = a.machine.platform(|| Ok(Platform::exascale()))?;
    let schedule = a.machine.schedule()?;
    let reports = match schedule {
        Some(s) => a
            .n
            .iter()
            .map(|&n| {
                model(
                    algo,
                    &ModelInputs {
                        n,
                        platform: platform.clone(),
                        schedule: Some(s.clone()),
                    },
                )
            })
            .collect::<Result<Vec<_>>>()?,
        None => sweep_with(algo, &platform, &a.n, &a.top_nodes, Exec::default())?,
    };
    log::info!("{} model rows for {algo}", reports.len());
    match a.format {
        Format::Csv => write_csv(sink(&a.out)?, &reports),
        Format::Json => write_json(&a.out, &json!({"schema_version": 1, "reports": reports})),
    }?;
    Ok(EXIT_OK)
}

fn random_matrix(n: usize, seed: u64) -> Mat {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
}

fn lu_residual(a: &Mat, f: &LuResult) -> f64 {
    f.perm.apply_rows(a).sub(&f.l.matmul(&f.u)).frobenius() / a.frobenius()
}

fn simulate(a: &SimulateArgs) -> Result<i32> {
    let algo: Algorithm = a.algo.parse()?;
    let platform = a.machine.platform(|| Platform::synthetic(&[(2, 2), (2, 2)]))?;
    let n = a.n;
    let schedule = match a.machine.schedule()? {
        Some(s) => s,
        None => default_blocks(n.max(1), &platform),
    };
    let mat = random_matrix(n, a.seed);
    let (ledger, extra): (Ledger, serde_json::Value) = match algo {
        Algorithm::Caqr | Algorithm::Mlcaqr => {
            let res = if algo == Algorithm::Caqr {
                caqr(&mat, &platform, schedule.block(1))?
            } else {
                ml_caqr(&mat, &platform, &schedule)?
            };
            let q = res.q()?;
            let resid = mat.sub(&q.matmul(&res.r)).frobenius() / mat.frobenius();
            let orth = q.transpose().matmul(&q).sub(&Mat::identity(n)).frobenius();
            (res.ledger, json!({"residual": resid, "orthogonality": orth}))
        }
        Algorithm::Calu | Algorithm::Mlcalu1d | Algorithm::Mlcalu2d => {
            let f = match algo {
                Algorithm::Calu => calu(&mat, &platform, schedule.block(1))?,
                Algorithm::Mlcalu1d => mlcalu_1d(&mat, &platform, &schedule)?,
                _ => mlcalu_2d(&mat, &platform, &schedule)?,
            };
            let q = crate::calu::pivot_quality(&f);
            let resid = lu_residual(&mat, &f);
            (f.ledger, json!({"residual": resid, "pivots": q}))
        }
        Algorithm::Mlcannon => {
            let b = random_matrix(n, a.seed.wrapping_add(1));
            let c = Mat::zeros(n, n);
            let mut ledger = Ledger::new(&platform);
            let out = ml_cannon(&c, &mat, &b, &platform, platform.depth(), &mut ledger)?;
            let resid = out.sub(&mat.matmul(&b)).frobenius() / (mat.frobenius() * b.frobenius());
            (ledger, json!({"residual": resid}))
        }
    };
    let cost = ledger.price()?;
    let doc = json!({
        "schema_version": LEDGER_SCHEMA_VERSION,
        "algo": algo.name(),
        "n": n,
        "seed": a.seed,
        "blocks": schedule.as_slice(),
        "ledger": ledger.to_json()?,
        "cost": cost,
        "checks": extra,
    });
    match a.format {
        Format::Json => write_json(&a.out, &doc)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(sink(&a.out)?);
            let c = ledger.counts()?;
            w.write_record(["level", "words", "messages", "aggregate_words"])
                .map_err(|e| Error::Config(format!("csv: {e}")))?;
            for k in 0..c.words.len() {
                w.write_record([
                    (k + 1).to_string(),
                    c.words[k].to_string(),
                    c.messages[k].to_string(),
                    c.aggregate_words[k].to_string(),
                ])
                .map_err(|e| Error::Config(format!("csv: {e}")))?;
            }
            w.flush().map_err(|e| Error::Config(format!("csv: {e}")))?;
        }
    }
    Ok(EXIT_OK)
}

fn run_stability(a: &StabilityArgs) -> Result<i32> {
    let algorithm = match a.algo.as_str() {
        "calu" => StudyAlgorithm::Calu,
        "mlcalu1d" => StudyAlgorithm::Mlcalu1d,
        "mlcalu2d" => StudyAlgorithm::Mlcalu2d,
        other => return Err(Error::Config(format!("stability needs an LU algorithm, got '{other}'"))),
    };
    let gens: Vec<Generator> = if a.gens.is_empty() {
        Generator::standard()
    } else {
        a.gens.iter().map(|g| g.parse()).collect::<Result<_>>()?
    };
    let desk = StudyConfig::desk();
    let platform = a.machine.platform(|| Ok(desk.platform.clone()))?;
    let schedule = a.machine.schedule()?.unwrap_or(desk.schedule);
    let cfg = StudyConfig {
        n: a.n,
        seed: a.seed,
        algorithm,
        platform,
        schedule,
    };
    let exec = if a.sequential { Exec::Sequential } else { Exec::Parallel };
    let rows = stability::ratio_study_with(&gens, &cfg, exec)?;
    let tau = stability::tau_summary(&rows);
    eprintln!(
        "pivots: {} steps, fraction tau = 1: {:.3}, tau_min: {:.3}",
        tau.steps, tau.fraction_tau_eq_one, tau.tau_min
    );
    match a.format {
        Format::Csv => stability::write_csv(sink(&a.out)?, &rows)?,
        Format::Json => write_json(&a.out, &json!({"schema_version": 1, "rows": rows, "tau": tau}))?,
    }
    Ok(EXIT_OK)
}

fn check(name: &str, ok: bool, detail: String) -> bool {
    if ok {
        println!("PASS {name}");
    } else {
        println!("FAIL {name}: {detail}");
    }
    ok
}

fn verify(a: &VerifyArgs) -> Result<i32> {
    let mut all = true;

    let two = Platform::synthetic(&[(2, 2), (2, 2)])?;
    let s = BlockSchedule::new(vec![4, 8])?;
    let mut worst = 0.0f64;
    let mut same = true;
    for i in 0..5 {
        let m = random_matrix(64, a.seed + i);
        let ml = mlcalu_1d(&m, &two, &s)?;
        let flat = calu(&m, &Platform::synthetic(&[(4, 1)])?, 4)?;
        same &= ml.perm == flat.perm;
        let d = ml.l.sub(&flat.l).max_abs().max(ml.u.sub(&flat.u).max_abs()) / m.frobenius();
        worst = worst.max(d);
    }
    all &= check(
        "mlcalu_1d_flattening",
        same && worst <= 1e-12,
        format!("same perm {same}, max diff {worst:e}"),
    );

    let (x, y, z) = (random_matrix(16, a.seed), random_matrix(16, a.seed + 1), random_matrix(16, a.seed + 2));
    let mut ledger = Ledger::new(&two);
    let got = ml_cannon(&z, &x, &y, &two, 2, &mut ledger)?;
    let diff = got.sub(&z.add(&x.matmul(&y))).frobenius();
    let tol = 1e-12 * 16.0 * x.frobenius() * y.frobenius();
    all &= check("ml_cannon_vs_gemm", diff <= tol, format!("diff {diff:e}"));

    let m = random_matrix(64, a.seed + 10);
    let res = ml_caqr(&m, &two, &s)?;
    let q = res.q()?;
    let resid = m.sub(&q.matmul(&res.r)).frobenius() / m.frobenius();
    let orth = q.transpose().matmul(&q).sub(&Mat::identity(64)).frobenius();
    let reference = householder_qr(&m).r;
    let rdiff = res.r.sub(&reference).max_abs() / m.frobenius();
    all &= check(
        "ml_caqr_vs_householder",
        resid <= 1e-12 && orth <= 1e-12 && rdiff <= 1e-12,
        format!("residual {resid:e}, orthogonality {orth:e}, R diff {rdiff:e}"),
    );

    let one = Platform::synthetic(&[(4, 2)])?;
    let ml = ml_caqr(&m, &one, &BlockSchedule::new(vec![8])?)?;
    let base = caqr(&m, &one, 8)?;
    all &= check(
        "one_level_collapse",
        ml.r == base.r && ml.ledger.counts()? == base.ledger.counts()?,
        "ML-CAQR with one level differs from CAQR".into(),
    );

    Ok(if all { EXIT_OK } else { EXIT_VERIFY })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid(&["2x2".into(), "4x8".into()]).unwrap(), vec![(2, 2), (4, 8)]);
        assert!(matches!(parse_grid(&["22".into()]), Err(Error::Parse(_))));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["hcpfactor", "predict", "--platform", "/nonexistent.json", "--n", "64"]), EXIT_CONFIG);
        assert_eq!(run(["hcpfactor", "frobnicate"]), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::SingularPanel { column: 0 }), EXIT_INTERNAL);
    }
}
