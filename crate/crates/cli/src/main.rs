//! `servo-sysid` command-line front end.
//!
//! Every run prints exactly one JSON summary line on stdout. Exit codes:
//! 0 success, 1 usage or validation error, 2 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use servo_sysid::actuator::{simulate_tracking, LoadConfig, PdGains};
use servo_sysid::gait::{
    com_trajectory, phase_signal, plan_footsteps, zmp_reference, VelocityCommand, DEFAULT_DOUBLE_SUPPORT,
    DEFAULT_STANCE_WIDTH, DEFAULT_STEP_DURATION, DEFAULT_Z_COM,
};
use servo_sysid::io::{self, ParamFile, Table};
use servo_sysid::metrics::{power_factor_report, toddlerbot_inventory};
use servo_sysid::sysid::{default_bounds, fit_parameters, FitConfig};
use servo_sysid::testbed::{
    default_backdrive_speeds, estimate_armature, fit_friction_damping, gen_chirp, run_backdrive,
    run_spindown, ChirpSpec, SENSOR_NOISE_STD,
};
use servo_sysid::{Error, MotorFamily};

#[derive(Parser, Debug)]
#[command(
    name = "servo-sysid",
    version,
    about = "Servo actuator simulation and identification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate PD tracking of a chirp and write the trace.
    Simulate(SimulateArgs),
    /// Run a simulated test-bed experiment.
    Testbed {
        #[command(subcommand)]
        experiment: Experiment,
    },
    /// Fit actuation parameters to a tracking trace.
    Fit(FitArgs),
    /// Humanoid capability metrics.
    Metrics {
        #[command(subcommand)]
        metric: Metric,
    },
    /// Generate a ZMP reference and centre-of-mass trajectory.
    Gait(GaitArgs),
    /// Write the bundled motor presets to a directory.
    Presets {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct ParamSource {
    /// Parameter file.
    #[arg(long, conflicts_with = "family")]
    params: Option<PathBuf>,
    /// Bundled preset name, e.g. XC330.
    #[arg(long)]
    family: Option<String>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    source: ParamSource,
    /// f0,f1,amplitude,duration (Hz, Hz, rad, s).
    #[arg(long, default_value = "0.2,4,0.5,10")]
    chirp: String,
    /// Sample interval of the output trace, s.
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Proportional gain, N·m/rad.
    #[arg(long, default_value_t = 6.0)]
    kp: f64,
    #[arg(long, default_value_t = 0.0)]
    kd: f64,
    /// Extra load inertia, kg·m².
    #[arg(long, default_value_t = 0.0)]
    load_inertia: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Experiment {
    /// Constant-speed backdrive with a torque sensor, then a line fit.
    Backdrive {
        #[command(flatten)]
        source: ParamSource,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = SENSOR_NOISE_STD)]
        noise_std: f64,
        #[arg(long, default_value_t = 8)]
        speeds: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Unpowered spin-down, then the armature estimate.
    Spindown {
        #[command(flatten)]
        source: ParamSource,
        /// Accepted for a uniform interface; the spin-down is noise free.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10.0)]
        omega0: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Bounds file.
    #[arg(long, conflicts_with = "family")]
    bounds: Option<PathBuf>,
    /// Use the default bounds around a bundled preset.
    #[arg(long)]
    family: Option<String>,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long, default_value_t = 4000)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Overrides the `kp` recorded in the trace.
    #[arg(long)]
    kp: Option<f64>,
    /// Overrides the `kd` recorded in the trace.
    #[arg(long)]
    kd: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Metric {
    /// Power factor split by upper and lower body.
    PowerFactor {
        /// Inventory file; the bundled ToddlerBot inventory when omitted.
        #[arg(long)]
        inventory: Option<PathBuf>,
        #[arg(long)]
        include_end_effectors: bool,
    },
}

#[derive(Args, Debug)]
struct GaitArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    vx: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    vy: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    wz: f64,
    #[arg(long, default_value_t = 8)]
    steps: usize,
    #[arg(long, default_value_t = DEFAULT_STEP_DURATION)]
    step_duration: f64,
    #[arg(long, default_value_t = DEFAULT_DOUBLE_SUPPORT)]
    double_support: f64,
    #[arg(long, default_value_t = DEFAULT_STANCE_WIDTH)]
    stance_width: f64,
    #[arg(long, default_value_t = DEFAULT_Z_COM)]
    z_com: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            println!("{}", json!({ "status": "error", "message": e.to_string() }));
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

fn load_params(source: &ParamSource) -> Result<ParamFile, Error> {
    match (&source.params, &source.family) {
        (Some(path), _) => io::read_params(path),
        (None, Some(name)) => io::load_preset(name.parse()?),
        (None, None) => Err(Error::MissingField("params".into())),
    }
}

fn parse_chirp(text: &str, dt: f64) -> Result<ChirpSpec, Error> {
    let parts = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| Error::invariant("chirp", format!("not a number list: `{text}`")))?;
    let [f0, f1, amplitude, duration] = parts[..] else {
        return Err(Error::invariant("chirp", "expected f0,f1,amplitude,duration"));
    };
    Ok(ChirpSpec {
        f0,
        f1,
        amplitude,
        offset: 0.0,
        duration,
        dt,
    })
}

fn run(command: Command) -> Result<Value, Error> {
    match command {
        Command::Simulate(args) => simulate(args),
        Command::Testbed { experiment } => testbed(experiment),
        Command::Fit(args) => fit(args),
        Command::Metrics { metric } => metrics(metric),
        Command::Gait(args) => gait(args),
        Command::Presets { out } => {
            let written = io::export_presets(&out)?;
            Ok(json!({ "status": "ok", "command": "presets", "files": written.len() }))
        }
    }
}

fn simulate(args: SimulateArgs) -> Result<Value, Error> {
    let file = load_params(&args.source)?;
    let spec = parse_chirp(&args.chirp, args.dt)?;
    let setpoints = gen_chirp(&spec)?;
    let gains = PdGains::physical(args.kp, args.kd);
    let load = LoadConfig::with_inertia(args.load_inertia);
    let mut trace = simulate_tracking(&setpoints, gains, &load, &file.params)?;
    if let Some(f) = &file.family {
        trace.set_meta("family", f);
    }
    trace.set_meta("kp", args.kp);
    trace.set_meta("kd", args.kd);
    trace.set_meta("load_inertia", args.load_inertia);
    trace.set_meta("chirp", &args.chirp);
    io::write_trace(&trace, &args.out)?;
    let max_lag = trace
        .rows
        .iter()
        .map(|r| (r.setpoint - r.q).abs())
        .fold(0.0, f64::max);
    Ok(json!({
        "status": "ok",
        "command": "simulate",
        "rows": trace.len(),
        "dt": trace.dt,
        "max_abs_error_deg": max_lag.to_degrees(),
        "out": args.out,
    }))
}

fn testbed(experiment: Experiment) -> Result<Value, Error> {
    match experiment {
        Experiment::Backdrive {
            source,
            seed,
            noise_std,
            speeds,
            out,
        } => {
            let file = load_params(&source)?;
            let omegas = default_backdrive_speeds(&file.params, speeds);
            let samples = run_backdrive(&file.params, &omegas, noise_std, seed)?;
            let fit = fit_friction_damping(&samples)?;
            let mut table = Table::new(["omega", "tau_resist"]);
            table.comments = vec![format!("seed = {seed}"), format!("noise_std = {noise_std}")];
            table.rows = samples.iter().map(|s| vec![s.omega, s.tau_resist]).collect();
            io::write_table(&table, &out)?;
            Ok(json!({
                "status": "ok",
                "command": "testbed backdrive",
                "samples": samples.len(),
                "friction_loss": fit.friction_loss,
                "damping": fit.damping,
                "intercept_clamped": fit.intercept_clamped,
                "out": out,
            }))
        }
        Experiment::Spindown {
            source,
            seed,
            omega0,
            dt,
            out,
        } => {
            let file = load_params(&source)?;
            let p = &file.params;
            let trace = run_spindown(p, omega0, dt)?;
            let armature = estimate_armature(&trace, p.friction_loss, p.damping)?;
            let mut table = Table::new(["t", "omega"]);
            table.comments = vec![
                format!("seed = {seed}"),
                format!("dt = {}", io::format_number(dt)),
            ];
            table.rows = trace
                .omega_series
                .iter()
                .enumerate()
                .map(|(i, w)| vec![i as f64 * dt, *w])
                .collect();
            io::write_table(&table, &out)?;
            Ok(json!({
                "status": "ok",
                "command": "testbed spindown",
                "samples": trace.omega_series.len(),
                "reached_rest": trace.reached_rest,
                "armature_estimate": armature,
                "armature_true": p.armature,
                "out": out,
            }))
        }
    }
}

fn meta_f64(trace: &servo_sysid::Trace, key: &str) -> Result<Option<f64>, Error> {
    trace
        .meta(key)
        .map(|v| {
            v.parse::<f64>()
                .map_err(|_| Error::invariant("metadata", format!("bad `{key}` value `{v}`")))
        })
        .transpose()
}

fn fit(args: FitArgs) -> Result<Value, Error> {
    let trace = io::read_trace(&args.trace)?;
    let bounds = match (&args.bounds, &args.family) {
        (Some(path), _) => io::read_bounds(path)?,
        (None, family) => default_bounds(family.as_deref().map(str::parse::<MotorFamily>).transpose()?),
    };
    let kp = match args.kp {
        Some(v) => v,
        None => meta_f64(&trace, "kp")?.ok_or_else(|| Error::MissingField("kp".into()))?,
    };
    let kd = match args.kd {
        Some(v) => v,
        None => meta_f64(&trace, "kd")?.unwrap_or(0.0),
    };
    let load = LoadConfig::with_inertia(meta_f64(&trace, "load_inertia")?.unwrap_or(0.0));
    let config = FitConfig {
        restarts: args.restarts,
        max_iters: args.max_iters,
        seed: args.seed,
        ..Default::default()
    };
    let result = fit_parameters(&trace, PdGains::physical(kp, kd), &load, &bounds, &config)?;
    io::write_params(&ParamFile::new(args.family.as_deref(), result.params), &args.out)?;
    Ok(json!({
        "status": "ok",
        "command": "fit",
        "mae_deg": result.mae_deg,
        "iterations": result.iterations,
        "restarts_used": result.restarts_used,
        "converged": result.converged,
        "out": args.out,
    }))
}

fn metrics(metric: Metric) -> Result<Value, Error> {
    match metric {
        Metric::PowerFactor {
            inventory,
            include_end_effectors,
        } => {
            let inv = match &inventory {
                Some(path) => io::read_inventory(path)?,
                None => toddlerbot_inventory(),
            };
            let r = power_factor_report(&inv, include_end_effectors)?;
            Ok(json!({
                "status": "ok",
                "command": "metrics power-factor",
                "torque_sum": r.torque_sum,
                "power_factor": r.total,
                "upper": r.upper,
                "lower": r.lower,
            }))
        }
    }
}

fn gait(args: GaitArgs) -> Result<Value, Error> {
    let cmd = VelocityCommand {
        vx: args.vx,
        vy: args.vy,
        wz: args.wz,
    };
    let plan = plan_footsteps(cmd, args.steps, args.step_duration, args.stance_width)?
        .with_double_support(args.double_support)?;
    let zmp = zmp_reference(&plan, args.dt)?;
    let com = com_trajectory(&zmp, args.z_com)?;
    let period = 2.0 * args.step_duration;

    let mut table = Table::new([
        "t",
        "zmp_x",
        "zmp_y",
        "com_x",
        "com_y",
        "com_vx",
        "com_vy",
        "com_ax",
        "com_ay",
        "phase_sin",
        "phase_cos",
    ]);
    table.comments = vec![
        format!("dt = {}", io::format_number(args.dt)),
        format!("z_com = {}", args.z_com),
        format!("vx = {}, vy = {}, wz = {}", args.vx, args.vy, args.wz),
    ];
    for (i, (p, s)) in zmp.zmp.iter().zip(&com.samples).enumerate() {
        let t = i as f64 * args.dt;
        let phase = phase_signal(t, period)?;
        table.rows.push(vec![
            t,
            p[0],
            p[1],
            s.position[0],
            s.position[1],
            s.velocity[0],
            s.velocity[1],
            s.acceleration[0],
            s.acceleration[1],
            phase.sin,
            phase.cos,
        ]);
    }
    io::write_table(&table, &args.out)?;
    Ok(json!({
        "status": "ok",
        "command": "gait",
        "samples": table.rows.len(),
        "steps": plan.steps.len(),
        "max_lipm_residual": com.max_residual(&zmp),
        "out": args.out,
    }))
}
