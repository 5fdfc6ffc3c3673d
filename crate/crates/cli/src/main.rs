mod plot;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use dpl_core::dde::{default_dt, integrate, InitialHistory, IntegratorConfig, SlPair};
use dpl_core::reduction::{integrate_phase, PhasePoint, ReductionOrder};
use dpl_core::stability::{boundary_curves, write_curves_csv, LockedState};
use dpl_core::sweep::{
    classify, compare_results, run_sweep_with_threads, threads_from_env, Engine, IcMode, RunManifest, SweepConfig,
    SweepResult,
};
use dpl_core::verify::run_suite;
use dpl_core::{ComplexState, SLParams};
use serde::Deserialize;

use plot::{Curve, Heatmap, PlotKind, PlotSpec};

#[derive(Parser, Debug)]
#[command(name = "dpl", version, about = "Delay-coupled Stuart-Landau pairs: simulation, phase reduction and sweeps")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Integrate one trajectory of the full system or a phase model.
    Simulate(SimulateArgs),
    /// Classify long-time behaviour on a (tau, rho) grid.
    Sweep(SweepArgs),
    /// Zero-level curves of the locking exponents.
    Boundary(BoundaryArgs),
    /// Run the closed-form verification suite.
    Verify(VerifyArgs),
    /// Cell-by-cell agreement of the full system with both phase models.
    Compare(SweepArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for output files (created if missing).
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// JSON configuration; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
struct ParamArgs {
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    rho: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    eps: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    tau: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EngineArg {
    Dde,
    Phase1,
    Phase2,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Dde => Engine::Dde,
            EngineArg::Phase1 => Engine::Phase1,
            EngineArg::Phase2 => Engine::Phase2,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    #[value(name = "fixed_ic")]
    FixedIc,
    #[value(name = "random_ic")]
    RandomIc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WhichArg {
    In,
    Anti,
    Both,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
    /// Time horizon.
    #[arg(long = "T")]
    t_end: Option<f64>,
    /// Step size (default: tau-aligned step for dde, 0.01 for phase models).
    #[arg(long)]
    dt: Option<f64>,
    /// Initial phases of the two oscillators (on the limit cycle).
    #[arg(long, allow_negative_numbers = true)]
    theta1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    theta2: Option<f64>,
    /// Keep every n-th step in the CSV.
    #[arg(long, default_value_t = 10)]
    stride: usize,
    /// Also write an SVG of psi(t).
    #[arg(long)]
    svg: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateFile {
    a: Option<f64>,
    b: Option<f64>,
    rho: Option<f64>,
    eps: Option<f64>,
    tau: Option<f64>,
    #[serde(rename = "T")]
    t_end: Option<f64>,
    engine: Option<Engine>,
    ic: Option<ComplexState>,
    dt: Option<f64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    engine: Option<EngineArg>,
    /// Grid size as N_TAUxN_RHO, e.g. 81x81.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    #[arg(long = "T")]
    t_end: Option<f64>,
    /// Delay window LO:HI.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    tau_range: Option<(f64, f64)>,
    /// Coupling-phase window LO:HI.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    rho_range: Option<(f64, f64)>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    classify_tol: Option<f64>,
    #[arg(long)]
    radial_jitter: bool,
    /// Overlay the locking boundaries of this reduction order on the SVG.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    overlay: Option<u8>,
}

#[derive(Args, Debug)]
struct BoundaryArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_enum, default_value = "both")]
    which: WhichArg,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    order: u8,
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    tau_range: Option<(f64, f64)>,
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    rho_range: Option<(f64, f64)>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected NxM, got `{s}`"))?;
    let n = a.trim().parse().map_err(|_| format!("bad grid size `{a}`"))?;
    let m = b.trim().parse().map_err(|_| format!("bad grid size `{b}`"))?;
    Ok((n, m))
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected LO:HI, got `{s}`"))?;
    let lo = a.trim().parse().map_err(|_| format!("bad number `{a}`"))?;
    let hi = b.trim().parse().map_err(|_| format!("bad number `{b}`"))?;
    Ok((lo, hi))
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Integration(String),
    Verification,
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Outcome {
    let mut w = create(dir, name)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn apply_params(base: &mut SLParams, p: &ParamArgs) {
    if let Some(v) = p.a {
        base.a = v;
    }
    if let Some(v) = p.b {
        base.b = v;
    }
    if let Some(v) = p.rho {
        base.rho = v;
    }
    if let Some(v) = p.eps {
        base.eps = v;
    }
    if let Some(v) = p.tau {
        base.tau = v;
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Outcome {
    let file: SimulateFile = match &args.common.config {
        Some(p) => read_json(p)?,
        None => SimulateFile::default(),
    };
    let pick = |flag: Option<f64>, from_file: Option<f64>, name: &str| {
        flag.or(from_file).ok_or_else(|| usage(format!("missing required parameter --{name}")))
    };
    let params = SLParams::new(
        pick(args.params.a, file.a, "a")?,
        pick(args.params.b, file.b, "b")?,
        pick(args.params.rho, file.rho, "rho")?,
        pick(args.params.eps, file.eps, "eps")?,
        pick(args.params.tau, file.tau, "tau")?,
    )
    .map_err(|e| usage(e.to_string()))?;
    let t_end = pick(args.t_end, file.t_end, "T")?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(usage(format!("--T must be positive, got {t_end}")));
    }
    let engine = args.engine.map(Engine::from).or(file.engine).unwrap_or(Engine::Dde);
    let ic = match (args.theta1, args.theta2, file.ic) {
        (None, None, Some(ic)) => ic,
        (t1, t2, _) => ComplexState::from_polar(params.radius(), t1.unwrap_or(0.0), t2.unwrap_or(0.01)),
    };
    if args.stride == 0 {
        return Err(usage("--stride must be positive"));
    }
    let dt = args.dt.or(file.dt);
    let out = &args.common.out_dir;

    let (times, psis): (Vec<f64>, Vec<f64>) = match engine {
        Engine::Dde => {
            let dt = dt.unwrap_or_else(|| default_dt(params.tau));
            let config = IntegratorConfig::new(dt, t_end).with_stride(args.stride);
            let traj = integrate(&SlPair::new(params), &InitialHistory::constant_sl(&ic), &config)
                .map_err(|e| Failure::Integration(e.to_string()))?;
            let mut w = create(out, "simulate.csv")?;
            traj.write_sl_csv(&mut w)?;
            w.flush()?;
            traj.iter().map(|(t, x)| (t, ComplexState::from_real(x).phase_difference())).unzip()
        }
        Engine::Phase1 | Engine::Phase2 => {
            let order = if engine == Engine::Phase1 { ReductionOrder::First } else { ReductionOrder::Second };
            let phi0 = PhasePoint::from_state(&ic);
            let traj = integrate_phase(&params, &phi0, order, t_end, dt.unwrap_or(0.01), args.stride)
                .map_err(|e| Failure::Integration(e.to_string()))?;
            let mut w = create(out, "simulate.csv")?;
            traj.write_csv(&mut w)?;
            w.flush()?;
            let psis = traj.phases().iter().map(|p| dpl_core::wrap_pi(p.psi())).collect();
            (traj.times().to_vec(), psis)
        }
    };
    let psi_final = *psis.last().expect("trajectory has at least one point");
    println!(
        "engine={} T={} psi_final={} label={:?}",
        engine.name(),
        t_end,
        psi_final,
        classify(psi_final, SweepConfig::default().classify_tol)
    );
    if args.svg {
        let mut spec = PlotSpec::new(PlotKind::Curves, (0.0, t_end), (-std::f64::consts::PI, std::f64::consts::PI));
        spec.x_label = "t".into();
        spec.y_label = "psi".into();
        spec.title = format!("phase difference ({})", engine.name());
        let pts: Vec<(f64, f64)> = times.iter().copied().zip(psis.iter().copied()).collect();
        // split at wrap-around jumps so the path does not draw vertical bars
        let mut pieces: Vec<&[(f64, f64)]> = Vec::new();
        let mut start = 0;
        for k in 1..pts.len() {
            if (pts[k].1 - pts[k - 1].1).abs() > std::f64::consts::PI {
                pieces.push(&pts[start..k]);
                start = k;
            }
        }
        pieces.push(&pts[start..]);
        let curves: Vec<Curve> = pieces.into_iter().map(|p| Curve { points: p, color: "black" }).collect();
        let svg = plot::render(&spec, None, &curves).map_err(|e| Failure::Other(anyhow::anyhow!(e)))?;
        write_text(out, "simulate.svg", &svg)?;
    }
    Ok(())
}

fn sweep_config(args: &SweepArgs) -> Result<SweepConfig, Failure> {
    let mut c: SweepConfig = match &args.common.config {
        Some(p) => read_json(p)?,
        None => SweepConfig::default(),
    };
    apply_params(&mut c.base, &args.params);
    if let Some(m) = args.mode {
        c.mode = match m {
            ModeArg::FixedIc => IcMode::FixedIc,
            ModeArg::RandomIc => IcMode::RandomIc,
        };
    }
    if let Some(e) = args.engine {
        c.engine = e.into();
    }
    if let Some(g) = args.grid {
        c.grid = g;
    }
    if let Some(t) = args.t_end {
        c.t_end = t;
    }
    if let Some(r) = args.tau_range {
        c.tau_range = r;
    }
    if let Some(r) = args.rho_range {
        c.rho_range = r;
    }
    if let Some(n) = args.n_samples {
        c.n_samples = n;
    }
    if let Some(t) = args.classify_tol {
        c.classify_tol = t;
    }
    if args.radial_jitter {
        c.radial_jitter = true;
    }
    if let Some(s) = args.common.seed {
        c.seed = s;
    }
    c.validate().map_err(|e| usage(e.to_string()))?;
    Ok(c)
}

fn threads() -> Result<usize, Failure> {
    threads_from_env().map_err(|e| usage(e.to_string()))
}

fn run(config: &SweepConfig) -> Result<SweepResult, Failure> {
    run_sweep_with_threads(config, threads()?).map_err(|e| Failure::Other(e.into()))
}

fn swap(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    points.iter().map(|&(t, r)| (r, t)).collect()
}

fn boundary_polylines(
    config: &SweepConfig,
    which: LockedState,
    order: u8,
    grid: (usize, usize),
) -> Result<Vec<Vec<(f64, f64)>>, Failure> {
    let order = ReductionOrder::try_from(order).map_err(|e| usage(e.to_string()))?;
    boundary_curves(&config.base, config.tau_range, config.rho_range, grid, which, order)
        .map_err(|e| usage(e.to_string()))
}

fn sweep_svg(config: &SweepConfig, result: &SweepResult, overlay: Option<u8>, title: String) -> Result<String, Failure> {
    let values: Vec<f64> = result
        .cells
        .iter()
        .map(|c| c.outcomes.first().map_or(f64::NAN, |o| o.psi_final))
        .collect();
    let kind = if overlay.is_some() { PlotKind::Overlay } else { PlotKind::Heatmap };
    let mut spec = PlotSpec::new(kind, config.rho_range, config.tau_range);
    spec.title = title;
    let mut owned = Vec::new();
    if let Some(order) = overlay {
        for (which, color) in [(LockedState::InPhase, "black"), (LockedState::AntiPhase, "#00a000")] {
            for c in boundary_polylines(config, which, order, (201, 201))? {
                owned.push((swap(&c), color));
            }
        }
    }
    let curves: Vec<Curve> = owned.iter().map(|(p, c)| Curve { points: p, color: c }).collect();
    let hm = Heatmap { xs: &result.rhos, ys: &result.taus, values: &values };
    plot::render(&spec, Some(&hm), &curves).map_err(|e| Failure::Other(anyhow::anyhow!(e)))
}

fn cmd_sweep(args: &SweepArgs) -> Outcome {
    let config = sweep_config(args)?;
    let started = Instant::now();
    let result = run(&config)?;
    let wall = started.elapsed().as_secs_f64();
    let out = &args.common.out_dir;

    let mut w = create(out, "sweep.csv")?;
    result.write_csv(&mut w)?;
    w.flush()?;
    let title = format!("final psi, engine {}", config.engine.name());
    write_text(out, "sweep.svg", &sweep_svg(&config, &result, args.overlay, title)?)?;
    let manifest = serde_json::to_string_pretty(&RunManifest::new(&config, wall)).context("serialising manifest")?;
    write_text(out, "sweep_manifest.json", &(manifest + "\n"))?;

    let bistable = result.cells.iter().filter(|c| c.bistable).count();
    let notes = result.cells.iter().flat_map(|c| &c.outcomes).filter(|o| o.note.is_some()).count();
    println!(
        "cells={} bistable={} failed_runs={} wall={:.1}s",
        result.cells.len(),
        bistable,
        notes,
        wall
    );
    Ok(())
}

fn cmd_boundary(args: &BoundaryArgs) -> Outcome {
    let mut config: SweepConfig = match &args.common.config {
        Some(p) => read_json(p)?,
        None => SweepConfig::default(),
    };
    apply_params(&mut config.base, &args.params);
    if let Some(r) = args.tau_range {
        config.tau_range = r;
    }
    if let Some(r) = args.rho_range {
        config.rho_range = r;
    }
    config.base.validate().map_err(|e| usage(e.to_string()))?;
    let grid = args.grid.unwrap_or((201, 201));
    let out = &args.common.out_dir;

    let mut spec = PlotSpec::new(PlotKind::Curves, config.rho_range, config.tau_range);
    spec.title = format!("locking boundaries, order {}", args.order);
    let mut owned = Vec::new();
    let wanted: &[(LockedState, &str, &str)] = match args.which {
        WhichArg::In => &[(LockedState::InPhase, "in", "black")],
        WhichArg::Anti => &[(LockedState::AntiPhase, "anti", "#00a000")],
        WhichArg::Both => &[(LockedState::InPhase, "in", "black"), (LockedState::AntiPhase, "anti", "#00a000")],
    };
    for &(which, tag, color) in wanted {
        let curves = boundary_polylines(&config, which, args.order, grid)?;
        let mut w = create(out, &format!("boundary_{tag}.csv"))?;
        write_curves_csv(&curves, &mut w)?;
        w.flush()?;
        println!("{tag}: {} curve(s)", curves.len());
        owned.extend(curves.iter().map(|c| (swap(c), color)));
    }
    let curves: Vec<Curve> = owned.iter().map(|(p, c)| Curve { points: p, color: c }).collect();
    let svg = plot::render(&spec, None, &curves).map_err(|e| Failure::Other(anyhow::anyhow!(e)))?;
    write_text(out, "boundary.svg", &svg)?;
    Ok(())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyFile {
    seed: Option<u64>,
}

fn cmd_verify(args: &VerifyArgs) -> Outcome {
    let file: VerifyFile = match &args.common.config {
        Some(p) => read_json(p)?,
        None => VerifyFile::default(),
    };
    let seed = args.common.seed.or(file.seed).unwrap_or(0);
    let report = run_suite(seed).map_err(|e| Failure::Other(e.into()))?;
    for c in &report.checks {
        println!(
            "{:<32} {:>12.3e}  tol {:>8.1e}  {}",
            c.name,
            c.value,
            c.tolerance,
            if c.passed { "PASS" } else { "FAIL" }
        );
    }
    let json = serde_json::to_string_pretty(&report).context("serialising report")?;
    write_text(&args.common.out_dir, "verify_report.json", &(json + "\n"))?;
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn cmd_compare(args: &SweepArgs) -> Outcome {
    let config = sweep_config(args)?;
    let n = threads()?;
    let run = |engine| {
        run_sweep_with_threads(&SweepConfig { engine, ..config.clone() }, n).map_err(|e| Failure::Other(e.into()))
    };
    let dde = run(Engine::Dde)?;
    let p1 = run(Engine::Phase1)?;
    let p2 = run(Engine::Phase2)?;
    let cmp = compare_results(&dde, &p1, &p2).map_err(|e| Failure::Other(e.into()))?;
    let out = &args.common.out_dir;
    let mut w = create(out, "compare.csv")?;
    cmp.write_csv(&mut w)?;
    w.flush()?;
    for (engine, result) in [(Engine::Dde, &dde), (Engine::Phase1, &p1), (Engine::Phase2, &p2)] {
        let mut w = create(out, &format!("sweep_{}.csv", engine.name()))?;
        result.write_csv(&mut w)?;
        w.flush()?;
        let title = format!("final psi, engine {}", engine.name());
        write_text(out, &format!("sweep_{}.svg", engine.name()), &sweep_svg(&config, result, args.overlay, title)?)?;
    }
    println!("agreement dde/phase1={:.4} dde/phase2={:.4}", cmp.rate_phase1, cmp.rate_phase2);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::Boundary(a) => cmd_boundary(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Compare(a) => cmd_compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            let sub = match &cli.cmd {
                Cmd::Simulate(_) => "simulate",
                Cmd::Sweep(_) => "sweep",
                Cmd::Boundary(_) => "boundary",
                Cmd::Verify(_) => "verify",
                Cmd::Compare(_) => "compare",
            };
            let mut cmd = Cli::command();
            cmd.build();
            let usage = cmd
                .find_subcommand_mut(sub)
                .map(|c| c.render_usage().to_string())
                .unwrap_or_default();
            eprintln!("error: {msg}\n\n{usage}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(Failure::Integration(msg)) => {
            eprintln!("integration failed: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Verification) => {
            eprintln!("verification failed");
            ExitCode::from(1)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
