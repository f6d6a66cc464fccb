use std::ops::Range;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::info;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde_json::json;

use secctl::adversary::{synth_bias_2norm, synth_bias_infnorm, BiasSolution};
use secctl::numerics::transmission_zeros;
use secctl::scenario::{self, prepare, Prepared, ScenarioConfig};

/// Like `println!`, but a closed pipe (`secctl ... | head`) is not an error:
/// output stops and the exit code still reports the outcome.
macro_rules! out {
    ($($t:tt)*) => { emit(format_args!("{}\n", format_args!($($t)*))) };
}

macro_rules! out_raw {
    ($($t:tt)*) => { emit(format_args!($($t)*)) };
}

fn emit(args: std::fmt::Arguments) {
    use std::io::Write;
    if let Err(e) = std::io::stdout().write_fmt(args) {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            panic!("writing to stdout: {e}");
        }
    }
}


#[derive(Parser)]
#[command(name = "secctl", version, about = "Attack scenarios on a networked control loop")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone)]
struct Source {
    /// Scenario TOML file.
    config: Option<PathBuf>,
    /// Built-in scenario instead of a file.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
}

impl Source {
    fn load(&self) -> anyhow::Result<ScenarioConfig> {
        match (&self.config, &self.preset) {
            (Some(path), None) => Ok(ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()))?),
            (None, Some(name)) => Ok(scenario::preset(name)?),
            _ => Err(secctl::Error::ConfigInvalid("give a config file or --preset".into()).into()),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario; the exit code reports alarm (2), unsafe (3) or both (4).
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        seed: Option<u64>,
        /// Trace CSV path (overrides the config).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Summary JSON path (overrides the config).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Print synthesis artifacts.
    Synth {
        #[command(subcommand)]
        what: Synth,
    },
    /// Check the bias of a bias scenario; exits 2 when it is not alpha-stealthy.
    VerifyStealth {
        #[command(flatten)]
        source: Source,
        /// Multiplies the scenario's a∞.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        json: bool,
    },
    /// Run a range of seeds in parallel and tabulate the outcomes.
    Sweep {
        #[command(flatten)]
        source: Source,
        /// Half-open range, e.g. `0..100`.
        #[arg(long, value_parser = parse_range)]
        seeds: Range<u64>,
        #[arg(long)]
        json: bool,
    },
    /// List the built-in scenarios, or print one.
    Presets { name: Option<String> },
}

#[derive(Subcommand)]
enum Synth {
    /// Transmission zeros of the plant and their directions.
    Zeros {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        json: bool,
    },
    /// Bias maximizing ‖x∞‖₂.
    Bias2(BiasArgs),
    /// Bias maximizing ‖x∞‖∞.
    Biasinf(BiasArgs),
}

#[derive(Args)]
struct BiasArgs {
    #[command(flatten)]
    source: Source,
    /// Steady-state state gain as a JSON row-major matrix, instead of a config.
    #[arg(long, requires = "gra")]
    gxa: Option<String>,
    /// Steady-state residual gain as a JSON row-major matrix.
    #[arg(long, requires = "gxa")]
    gra: Option<String>,
    /// Needed with explicit gains; otherwise taken from the config.
    #[arg(long)]
    delta_alpha: Option<f64>,
    #[arg(long)]
    json: bool,
}

fn parse_range(s: &str) -> Result<Range<u64>, String> {
    let (a, b) = s.split_once("..").ok_or("expected a..b")?;
    let a: u64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if a >= b {
        return Err("empty seed range".into());
    }
    Ok(a..b)
}

fn parse_matrix(text: &str, what: &str) -> anyhow::Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> =
        serde_json::from_str(text).map_err(|e| secctl::Error::ConfigInvalid(format!("{what}: {e}")))?;
    let n = rows.first().map_or(0, |r| r.len());
    if rows.is_empty() || n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(secctl::Error::ConfigInvalid(format!("{what} must be a nonempty rectangular matrix")).into());
    }
    Ok(DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]))
}

fn vec_of(v: impl IntoIterator<Item = f64>) -> Vec<f64> {
    v.into_iter().collect()
}

fn run(source: &Source, seed: Option<u64>, trace: Option<PathBuf>, summary: Option<PathBuf>) -> anyhow::Result<i32> {
    let cfg = source.load()?;
    let prepared = prepare(&cfg)?;
    let out = prepared.run(seed.unwrap_or(cfg.seed))?;
    let trace = trace.or(cfg.output.trace.clone());
    let summary = summary.or(cfg.output.summary.clone());
    if let Some(t) = &trace {
        let f = std::io::BufWriter::new(std::fs::File::create(t).with_context(|| format!("creating {}", t.display()))?);
        scenario::write_trace_csv(&out.trace, f)?;
        info!("trace written to {}", t.display());
    }
    let text = serde_json::to_string_pretty(&out.summary)?;
    if let Some(s) = &summary {
        std::fs::write(s, format!("{text}\n")).with_context(|| format!("writing {}", s.display()))?;
        info!("summary written to {}", s.display());
    }
    out!("{text}");
    Ok(out.exit_code())
}

fn zeros(source: &Source, as_json: bool) -> anyhow::Result<i32> {
    let cfg = source.load()?;
    let p = prepare(&cfg)?;
    let m = p.plant.model();
    let set = transmission_zeros(&m.a, &m.b, &m.c)?;
    if as_json {
        let list: Vec<_> = set
            .zeros
            .iter()
            .map(|z| {
                json!({
                    "re": z.value.re,
                    "im": z.value.im,
                    "modulus": z.value.norm(),
                    "stable": z.is_stable(),
                    "x0": z.direction.as_ref().map(|d| vec_of(d.x0.iter().cloned())),
                    "g": z.direction.as_ref().map(|d| vec_of(d.g.iter().cloned())),
                })
            })
            .collect();
        out!("{}", serde_json::to_string_pretty(&json!({ "zeros": list }))?);
    } else if set.zeros.is_empty() {
        out!("no finite transmission zeros");
    } else {
        for z in &set.zeros {
            let kind = if z.is_stable() { "stable" } else { "unstable" };
            match &z.direction {
                Some(d) => out!(
                    "nu = {:.6} ({kind})  x0 = {:?}  g = {:?}",
                    z.value.re,
                    d.x0.as_slice(),
                    d.g.as_slice()
                ),
                None => out!("nu = {:.6} {:+.6}i ({kind})", z.value.re, z.value.im),
            }
        }
    }
    Ok(0)
}

fn bias(args: &BiasArgs, inf: bool) -> anyhow::Result<i32> {
    let (g_xa, g_ra, delta_alpha) = match (&args.gxa, &args.gra) {
        (Some(x), Some(r)) => {
            let Some(da) = args.delta_alpha else {
                bail!(secctl::Error::ConfigInvalid("--delta-alpha is required with explicit gains".into()));
            };
            (parse_matrix(x, "--gxa")?, parse_matrix(r, "--gra")?, da)
        }
        _ => {
            let p = prepare(&args.source.load()?)?;
            let (g_ra, g_xa) = scenario::gains(&p)?;
            (g_xa, g_ra, args.delta_alpha.unwrap_or(p.detector.delta_alpha))
        }
    };
    let sol: BiasSolution = if inf {
        synth_bias_infnorm(&g_xa, &g_ra, delta_alpha)?
    } else {
        synth_bias_2norm(&g_xa, &g_ra, delta_alpha)?
    };
    let x_inf = &g_xa * &sol.a_infinity;
    let objective = if inf { x_inf.amax() } else { x_inf.norm() };
    if args.json {
        let v = json!({
            "norm": if inf { "inf" } else { "2" },
            "delta_alpha": delta_alpha,
            "a_infinity": vec_of(sol.a_infinity.iter().cloned()),
            "lambda_star": sol.lambda_star,
            "row": sol.row.map(|r| r + 1),
            "objective": objective,
            "x_infinity": vec_of(x_inf.iter().cloned()),
        });
        out!("{}", serde_json::to_string_pretty(&v)?);
    } else {
        out!("lambda* = {}", sol.lambda_star);
        out!("a_inf   = {:?}", sol.a_infinity.as_slice());
        if let Some(r) = sol.row {
            out!("row     = {}", r + 1);
        }
        out!("x_inf   = {:?}  (objective {objective})", x_inf.as_slice());
    }
    Ok(0)
}

fn verify(source: &Source, scale: f64, horizon: Option<usize>, tol: f64, as_json: bool) -> anyhow::Result<i32> {
    let p = prepare(&source.load()?)?;
    let cert = scenario::bias_certificate(&p, scale, horizon, tol)?;
    if as_json {
        let v = json!({
            "pass": cert.pass,
            "max_residual": cert.max_residual,
            "argmax": cert.argmax,
            "horizon": cert.horizon,
            "delta_alpha": cert.delta_alpha,
            "scale": scale,
        });
        out!("{}", serde_json::to_string_pretty(&v)?);
    } else {
        out!(
            "{}: max ‖r‖ = {:.6} at step {} of {} (δα = {})",
            if cert.pass { "pass" } else { "FAIL" },
            cert.max_residual,
            cert.argmax,
            cert.horizon,
            cert.delta_alpha
        );
    }
    Ok(if cert.pass { 0 } else { 2 })
}

fn sweep(source: &Source, seeds: Range<u64>, as_json: bool) -> anyhow::Result<i32> {
    let cfg = source.load()?;
    let p: Prepared = prepare(&cfg)?;
    let rows: Vec<_> = seeds
        .into_par_iter()
        .map(|seed| p.run(seed).map(|o| o.summary))
        .collect::<secctl::Result<_>>()?;
    let mut counts = [0usize; 5];
    for s in &rows {
        counts[s.exit_code as usize] += 1;
    }
    if as_json {
        let runs: Vec<_> = rows
            .iter()
            .map(|s| {
                json!({
                    "seed": s.seed,
                    "exit_code": s.exit_code,
                    "first_alarm": s.first_alarm,
                    "first_unsafe": s.first_unsafe,
                    "max_residual": s.stealth.max_residual,
                })
            })
            .collect();
        let v = json!({
            "name": cfg.name,
            "config_hash": p.hash,
            "runs": runs,
            "counts": { "clean": counts[0], "alarm": counts[2], "unsafe": counts[3], "both": counts[4] },
        });
        out!("{}", serde_json::to_string_pretty(&v)?);
    } else {
        out!("seed  exit  first_alarm  first_unsafe  max_r");
        let show = |v: Option<usize>| v.map_or("-".to_string(), |k| k.to_string());
        for s in &rows {
            out!(
                "{:<5} {:<5} {:<12} {:<13} {:.4}",
                s.seed,
                s.exit_code,
                show(s.first_alarm),
                show(s.first_unsafe),
                s.stealth.max_residual
            );
        }
        out!(
            "clean {}  alarm {}  unsafe {}  both {}",
            counts[0], counts[2], counts[3], counts[4]
        );
    }
    Ok(0)
}

fn presets(name: Option<&str>) -> anyhow::Result<i32> {
    match name {
        Some(n) => match scenario::preset_source(n) {
            Some(src) => out_raw!("{src}"),
            None => bail!(secctl::Error::ConfigInvalid(format!("unknown preset {n:?}"))),
        },
        None => {
            for n in scenario::preset_names() {
                let cfg = scenario::preset(n)?;
                out!("{n:<16} {}", cfg.description.unwrap_or_default());
            }
        }
    }
    Ok(0)
}

fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    match cli.cmd {
        Command::Run { source, seed, trace, summary } => run(&source, seed, trace, summary),
        Command::Synth { what } => match what {
            Synth::Zeros { source, json } => zeros(&source, json),
            Synth::Bias2(a) => bias(&a, false),
            Synth::Biasinf(a) => bias(&a, true),
        },
        Command::VerifyStealth { source, scale, horizon, tol, json } => verify(&source, scale, horizon, tol, json),
        Command::Sweep { source, seeds, json } => sweep(&source, seeds, json),
        Command::Presets { name } => presets(name.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SECCTL_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            // 2 is taken by "alarm raised"
            return ExitCode::from(if usage { 64 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .chain()
                .find_map(|c| {
                    c.downcast_ref::<secctl::Error>()
                        .map(|se| se.exit_code())
                        .or_else(|| c.downcast_ref::<std::io::Error>().map(|_| 74))
                })
                .unwrap_or(1);
            ExitCode::from(code as u8)
        }
    }
}
