//! `slackpack` command-line entry point.
//!
//! Exit codes: 0 on a completed (or deliberately stopped) run, 2 when Step 4
//! fails, 1 on any operational error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use slackpack::appendix::MixtureModel;
use slackpack::baselines::{paulhus_run, stack_run};
use slackpack::engine::{RunStatus, RunSummary};
use slackpack::exec::Execution;
use slackpack::geometry::Layout;
use slackpack::output::{
    parse_critical_events, parse_snapshots, resume_dir, run_to_dir, SummaryFile, CRITICAL_FILE, SNAPSHOT_FILE,
    SUMMARY_FILE,
};
use slackpack::render::{render_svg, Palette, RenderOptions};
use slackpack::stats::{
    decade_samples, last_decade_mean, monitor_shape_bound, monitor_ep2_ratio, monitor_lrp_ratio, MonitorConfig,
};
use slackpack::verify::{verify_area_identity, verify_layout, verify_wtcrit};
use slackpack::{DetailKind, Engine, EngineConfig, Gamma};

/// Runs above this many details need `--big`.
const DESK_MAX_DETAILS: u64 = 200_000_000;
/// Peak resident bytes per detail, measured on stats-mode runs.
const BYTES_PER_DETAIL: u64 = 90;
/// Extra bytes per detail when positions are kept.
const LAYOUT_BYTES_PER_DETAIL: u64 = 180;
const LAYOUT_FILE: &str = "layout.json";
const INDEX_FILE: &str = "index.json";

#[derive(Parser)]
#[command(name = "slackpack", version, about = "Slack-Pack perfect-packing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pack details into a sheet and stream statistics into a directory.
    Run(RunArgs),
    /// Check a layout for overlaps, containment and the area identity.
    Verify(VerifyArgs),
    /// Evaluate the monitors over a finished run directory.
    Stats(StatsArgs),
    /// Tabulate the endpoint mixture model over a grid of times.
    Appendix(AppendixArgs),
    /// Write an SVG picture of a layout.
    Render(RenderArgs),
    /// Run a kind x n0 x gamma matrix, one directory per cell.
    Sweep(SweepArgs),
}

#[derive(Args, Clone)]
struct PackArgs {
    #[arg(long, default_value = "rect")]
    kind: DetailKind,
    #[arg(long, default_value_t = 10_000)]
    n0: u64,
    /// Rational exponent such as 4/3.
    #[arg(long, default_value = "4/3")]
    gamma: Gamma,
    /// Number of details to pack.
    #[arg(long = "max", default_value_t = 1_000_000)]
    max_details: u64,
    #[arg(long)]
    allow_gamma_out_of_range: bool,
    /// Permit runs above the desk-scale size guard.
    #[arg(long)]
    big: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    pack: PackArgs,
    /// Keep detail positions and write layout.json at the end.
    #[arg(long)]
    layout: bool,
    #[arg(long, default_value = "run")]
    out: PathBuf,
    #[arg(long, default_value_t = slackpack::engine::DEFAULT_STATS_STRIDE)]
    stats_stride: u64,
    #[arg(long, default_value_t = slackpack::engine::DEFAULT_CHECKPOINT_EVERY)]
    checkpoint_every: u64,
    /// Stop before packing detail `t`, leaving a checkpoint.
    #[arg(long)]
    stop_at: Option<u64>,
    /// Continue the run in --out from its checkpoint.
    #[arg(long)]
    resume: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Algorithm {
    Slack,
    Paulhus,
    Stack,
}

#[derive(Args)]
struct SourceArgs {
    /// Read the layout from this file instead of running a packing.
    #[arg(long)]
    layout_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "slack")]
    algorithm: Algorithm,
    #[command(flatten)]
    pack: PackArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Also check the critical events and snapshots of a run directory.
    #[arg(long)]
    run_dir: Option<PathBuf>,
    /// Write the JSON report here rather than to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    dir: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
}

#[derive(Args)]
struct AppendixArgs {
    #[arg(long, value_delimiter = ',', default_value = "4/3")]
    gamma: Vec<Gamma>,
    #[arg(long, value_delimiter = ',', default_value = "1e4,1e6,1e8,1e10")]
    t: Vec<f64>,
    /// Monte Carlo samples per row; 0 skips the estimate.
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, default_value = "layout.svg")]
    out: PathBuf,
    #[arg(long, default_value_t = 800)]
    size_px: u32,
    #[arg(long)]
    no_labels: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "rect")]
    kinds: Vec<DetailKind>,
    #[arg(long, value_delimiter = ',', default_value = "10000")]
    n0s: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "4/3")]
    gammas: Vec<Gamma>,
    #[arg(long = "max", default_value_t = 1_000_000)]
    max_details: u64,
    #[arg(long, default_value_t = slackpack::engine::DEFAULT_STATS_STRIDE)]
    stats_stride: u64,
    #[arg(long, default_value = "sweep")]
    out: PathBuf,
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    big: bool,
}

fn memory_estimate(max_details: u64, layout: bool) -> u64 {
    max_details * (BYTES_PER_DETAIL + if layout { LAYOUT_BYTES_PER_DETAIL } else { 0 })
}

fn guard(max_details: u64, layout: bool, big: bool) -> Result<()> {
    if max_details <= DESK_MAX_DETAILS {
        return Ok(());
    }
    let gib = memory_estimate(max_details, layout) as f64 / (1u64 << 30) as f64;
    eprintln!("estimated peak memory for {max_details} details: {gib:.1} GiB");
    if !big {
        bail!("--max {max_details} exceeds the desk-scale limit of {DESK_MAX_DETAILS}; pass --big to run it anyway");
    }
    Ok(())
}

fn engine_config(p: &PackArgs) -> EngineConfig {
    EngineConfig {
        allow_gamma_out_of_range: p.allow_gamma_out_of_range,
        ..EngineConfig::new(p.kind, p.n0, p.gamma, p.max_details)
    }
}

fn status_code(status: RunStatus) -> ExitCode {
    match status {
        RunStatus::FailedStep4 => ExitCode::from(2),
        RunStatus::Completed | RunStatus::BudgetExhausted => ExitCode::SUCCESS,
    }
}

fn write_json<T: Serialize>(path: &Path, v: &T, pretty: bool) -> Result<()> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = std::io::BufWriter::new(f);
    if pretty {
        serde_json::to_writer_pretty(&mut w, v)?;
    } else {
        serde_json::to_writer(&mut w, v)?;
    }
    writeln!(w)?;
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn print_summary(s: &RunSummary) {
    eprintln!(
        "status={} last_t={} t0={} k0={} stripes={} rows={}",
        s.status.as_str(),
        s.last_t,
        s.t0.map_or("-".into(), |v| v.to_string()),
        s.k0.map_or("-".into(), |v| v.to_string()),
        s.stripes,
        s.rows
    );
}

fn cmd_run(a: RunArgs) -> Result<ExitCode> {
    let stop_at = a.stop_at;
    if a.resume {
        let s = resume_dir(&a.out, stop_at).with_context(|| format!("resuming {}", a.out.display()))?;
        print_summary(&s);
        return Ok(status_code(s.status));
    }
    guard(a.pack.max_details, a.layout, a.pack.big)?;
    let cfg = EngineConfig {
        stats_stride: a.stats_stride,
        checkpoint_every: a.checkpoint_every,
        ..engine_config(&a.pack)
    }
    .layout(a.layout);
    cfg.validate()?;
    let s = if a.layout {
        // Positions live only in memory, so layout runs are not resumable.
        let mut engine = Engine::new(EngineConfig { checkpoint_every: 0, ..cfg })?;
        let mut w = slackpack::output::RunWriter::create(&a.out)?;
        let s = engine.drive(stop_at, &mut w)?;
        w.finish(&cfg, &s)?;
        write_json(&a.out.join(LAYOUT_FILE), &engine.layout()?, false)?;
        s
    } else {
        run_to_dir(cfg, &a.out, stop_at)?
    };
    print_summary(&s);
    Ok(status_code(s.status))
}

/// A layout from a file or from a fresh packing, plus the run status that produced it.
fn load_layout(src: &SourceArgs) -> Result<(Layout, Option<RunStatus>)> {
    if let Some(path) = &src.layout_file {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        return Ok((serde_json::from_str(&text).context("parsing layout")?, None));
    }
    let p = &src.pack;
    guard(p.max_details, true, p.big)?;
    match src.algorithm {
        Algorithm::Slack => {
            let mut e = Engine::new(engine_config(p).layout(true))?;
            let s = e.drive(None, &mut ())?;
            Ok((e.layout()?, Some(s.status)))
        }
        Algorithm::Paulhus => {
            let out = paulhus_run(p.kind, p.n0, p.max_details, true)?;
            Ok((out.layout.expect("layout requested"), Some(out.summary.status)))
        }
        Algorithm::Stack => {
            let (out, l) = stack_run(p.kind, p.n0, p.max_details, p.gamma, true)?;
            Ok((l.expect("layout requested"), Some(out.summary.status)))
        }
    }
}

#[derive(Serialize)]
struct RunDirCheck {
    critical_events: usize,
    wtcrit_violations: Vec<u64>,
    snapshots: usize,
    max_abs_area_residual: f64,
}

fn check_run_dir(dir: &Path) -> Result<RunDirCheck> {
    let summary: SummaryFile = serde_json::from_str(&fs::read_to_string(dir.join(SUMMARY_FILE))?)?;
    let events = parse_critical_events(&fs::read_to_string(dir.join(CRITICAL_FILE))?)?;
    let snaps = parse_snapshots(&fs::read_to_string(dir.join(SNAPSHOT_FILE))?)?;
    let residual = snaps.iter().map(|s| verify_area_identity(s).abs()).fold(0.0, f64::max);
    Ok(RunDirCheck {
        critical_events: events.len(),
        wtcrit_violations: verify_wtcrit(&events, summary.config.gamma),
        snapshots: snaps.len(),
        max_abs_area_residual: residual,
    })
}

fn cmd_verify(a: VerifyArgs) -> Result<ExitCode> {
    #[derive(Serialize)]
    struct Report {
        passed: bool,
        layout: slackpack::verify::VerifyReport,
        run_dir: Option<RunDirCheck>,
    }
    let (layout, _) = load_layout(&a.source)?;
    let report = verify_layout(&layout);
    let run_dir = a.run_dir.as_deref().map(check_run_dir).transpose()?;
    let dir_ok = run_dir
        .as_ref()
        .is_none_or(|r| r.wtcrit_violations.is_empty() && r.max_abs_area_residual <= slackpack::verify::AREA_TOL);
    let passed = report.passed() && dir_ok;
    let text = serde_json::to_string_pretty(&Report { passed, layout: report, run_dir })? + "\n";
    match &a.out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(if passed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_stats(a: StatsArgs) -> Result<ExitCode> {
    #[derive(Serialize)]
    struct Report {
        summary: RunSummary,
        lrp: slackpack::stats::LrpReport,
        last_decade_mean_ratio: Option<f64>,
        shape_bound: Option<slackpack::stats::ShapeBoundReport>,
        shape_bound_error: Option<String>,
        ep2_ratio_last: Option<f64>,
        ep2_ratio_decades: Vec<(u64, f64)>,
        ep2_reference: f64,
    }
    let file: SummaryFile = serde_json::from_str(&fs::read_to_string(a.dir.join(SUMMARY_FILE))?)?;
    let events = parse_critical_events(&fs::read_to_string(a.dir.join(CRITICAL_FILE))?)?;
    let snaps = parse_snapshots(&fs::read_to_string(a.dir.join(SNAPSHOT_FILE))?)?;
    let gamma = file.config.gamma.value();
    let t0 = file.summary.t0.unwrap_or(file.config.n0);
    let mc = MonitorConfig { delta: a.delta, ..MonitorConfig::default() };
    let lrp = monitor_lrp_ratio(&events, gamma, 2.0 * t0 as f64, mc.delta);
    let (shape_bound, shape_bound_error) = match monitor_shape_bound(&snaps, file.summary.creation_bound_violations) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let a2 = monitor_ep2_ratio(&snaps, gamma, t0);
    let report = Report {
        last_decade_mean_ratio: last_decade_mean(&events, file.summary.last_t),
        summary: file.summary,
        lrp,
        shape_bound,
        shape_bound_error,
        ep2_ratio_last: a2.last,
        ep2_ratio_decades: decade_samples(&a2.series),
        ep2_reference: a2.reference,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(ExitCode::SUCCESS)
}

const APPENDIX_HEADER: &str = "# appendix v1\ngamma,t,e_numeric,e_closed,mc_mean,mc_ci95,ratio_to_log_t,error\n";

fn csv_cell(v: Option<f64>) -> String {
    v.map_or(String::new(), slackpack::output::fmt_f64)
}

fn appendix_row(gamma: Gamma, t: f64, samples: u64, seed: u64, exec: Execution) -> String {
    let mut errors = Vec::new();
    let mut keep = |r: slackpack::Result<f64>| r.map_err(|e| errors.push(e.to_string())).ok();
    let (num, closed, mc) = match MixtureModel::new(gamma.value(), t) {
        Ok(m) => {
            let num = keep(m.mixture_mean_numeric());
            let closed = keep(m.mixture_mean_closed());
            let mc = if samples == 0 {
                None
            } else {
                match m.monte_carlo(samples, seed, exec) {
                    Ok(e) => Some(e),
                    Err(e) => {
                        errors.push(e.to_string());
                        None
                    }
                }
            };
            (num, closed, mc)
        }
        Err(e) => {
            errors.push(e.to_string());
            (None, None, None)
        }
    };
    let ratio = num.map(|v| v / t.ln());
    format!(
        "{gamma},{},{},{},{},{},{},{}\n",
        slackpack::output::fmt_f64(t),
        csv_cell(num),
        csv_cell(closed),
        csv_cell(mc.map(|e| e.mean)),
        csv_cell(mc.map(|e| e.ci95)),
        csv_cell(ratio),
        errors.join("; ").replace(',', ";")
    )
}

fn cmd_appendix(a: AppendixArgs) -> Result<ExitCode> {
    let exec = if a.sequential { Execution::Sequential } else { Execution::Parallel };
    let mut text = String::from(APPENDIX_HEADER);
    for &g in &a.gamma {
        for &t in &a.t {
            text.push_str(&appendix_row(g, t, a.samples, a.seed, exec));
        }
    }
    match &a.out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_render(a: RenderArgs) -> Result<ExitCode> {
    let (layout, _) = load_layout(&a.source)?;
    let opts = RenderOptions { size_px: a.size_px, labels: !a.no_labels, ..RenderOptions::default() };
    let svg = render_svg(&layout, &Palette::default(), &opts);
    fs::write(&a.out, svg).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct Cell {
    dir: String,
    kind: DetailKind,
    n0: u64,
    gamma: String,
    status: Option<RunStatus>,
    t0: Option<u64>,
    last_t: Option<u64>,
    error: Option<String>,
}

fn cmd_sweep(a: SweepArgs) -> Result<ExitCode> {
    guard(a.max_details, false, a.big)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut matrix = Vec::new();
    for &kind in &a.kinds {
        for &n0 in &a.n0s {
            for &g in &a.gammas {
                matrix.push((kind, n0, g));
            }
        }
    }
    let exec = if a.sequential { Execution::Sequential } else { Execution::Parallel };
    let cells = exec.map_slice(&matrix, |&(kind, n0, g)| {
        let name = format!("{kind}_n{n0}_g{}-{}", g.num, g.den);
        let cfg = EngineConfig { stats_stride: a.stats_stride, ..EngineConfig::new(kind, n0, g, a.max_details) };
        let result = run_to_dir(cfg, &a.out.join(&name), None);
        let (status, t0, last_t, error) = match result {
            Ok(s) => (Some(s.status), s.t0, Some(s.last_t), None),
            Err(e) => (None, None, None, Some(e.to_string())),
        };
        Cell { dir: name, kind, n0, gamma: g.to_string(), status, t0, last_t, error }
    });
    write_json(&a.out.join(INDEX_FILE), &cells, true)?;
    let errors = cells.iter().filter(|c| c.error.is_some()).count();
    eprintln!("{} cells, {errors} errors", cells.len());
    Ok(if errors == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Code 2 is reserved for a Step 4 failure.
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Appendix(a) => cmd_appendix(a),
        Command::Render(a) => cmd_render(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
