//! Command-line front end: configuration, commands and file output.
//!
//! Exit codes: 0 success, 1 verification or runtime failure, 2 configuration
//! error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::cycle::{
    build_cycle, conventions_report, efficiency_map, entropy_surface, find_max_efficiency,
    state_surfaces, MaxEfficiency, DEFAULT_POINTS_PER_STROKE, DEFAULT_RESOLUTION,
};
use crate::error::{EngineError, Result};
use crate::model::{
    bloch_vector, cavity_amplitude, mhz_to_rad_s, rad_s_to_mhz, steady_state_analytic, reference_raw,
    to_internal_units, EngineParameters, FreqInterpretation, GammaConvention, Knobs, RawTable,
    ThermalGap, RAW_KEYS,
};
use crate::oracle::run_oracle_check;
use crate::quadrature::QuadratureOptions;
use crate::thermo::{cycle_energetics, internal_energy, von_neumann_entropy};

/// Environment variables `TRANSMON_ENGINE_<KEY>` override config keys.
pub const ENV_PREFIX: &str = "TRANSMON_ENGINE_";

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;

/// Reference efficiency and tolerance the conventions report checks for.
pub const TARGET_ETA: f64 = 0.47;
pub const TARGET_TOLERANCE: f64 = 0.05;

#[derive(Debug, Parser)]
#[command(
    name = "transmon-engine",
    version,
    about = "Driven-transmon heat engine simulator"
)]
pub struct Cli {
    /// Flat TOML configuration; built-in parameter table when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the configuration and print derived quantities.
    Validate,
    /// Closed-form steady state at one knob point.
    SteadyState {
        #[arg(long, value_name = "F")]
        omega_mhz: f64,
        #[arg(long, value_name = "F")]
        drive_mhz: f64,
    },
    /// Per-stroke energetics of one cycle.
    Cycle {
        /// Upper ω corner (ω₁/2π), default: top of the window.
        #[arg(long, value_name = "F")]
        omega1_mhz: Option<f64>,
        /// Upper drive corner (E₁/2πħ), default: top of the window.
        #[arg(long, value_name = "F")]
        e1_mhz: Option<f64>,
        #[arg(long, value_name = "N")]
        points_per_stroke: Option<usize>,
    },
    /// Entropy, population, coherence and efficiency surfaces.
    Sweep {
        #[arg(long, value_name = "N")]
        resolution: Option<usize>,
        #[arg(long, value_name = "N")]
        points_per_stroke: Option<usize>,
        /// Also sweep every convention combination and write conventions.json.
        #[arg(long)]
        conventions_report: bool,
    },
    /// Compare the closed form against the Liouvillian null space.
    OracleCheck {
        #[arg(long, value_name = "N", default_value_t = 200)]
        samples: usize,
        #[arg(long, value_name = "N", default_value_t = 1)]
        seed: u64,
        /// Also run the qubit+cavity reduction at scaled coupling.
        #[arg(long)]
        joint_check: bool,
    },
}

/// Parsed configuration file plus overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub raw: RawTable,
    pub freq_interpretation: FreqInterpretation,
    pub thermal_gap: ThermalGap,
    pub gamma_convention: GammaConvention,
    pub resolution: usize,
    pub points_per_stroke: usize,
    pub out_dir: Option<PathBuf>,
}

const SETTING_KEYS: [&str; 6] = [
    "freq_interpretation",
    "thermal_gap",
    "gamma_convention",
    "resolution",
    "points_per_stroke",
    "out_dir",
];

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            raw: reference_raw(),
            freq_interpretation: FreqInterpretation::Detuning,
            thermal_gap: ThermalGap::RotatingFrame,
            gamma_convention: GammaConvention::NetDecay,
            resolution: DEFAULT_RESOLUTION,
            points_per_stroke: DEFAULT_POINTS_PER_STROKE,
            out_dir: None,
        }
    }
}

fn typed<T: DeserializeOwned>(key: &str, value: toml::Value) -> Result<T> {
    value
        .clone()
        .try_into()
        .map_err(|_| EngineError::config(key, format!("invalid value {value}")))
}

fn env_value(key: &str, text: &str) -> toml::Value {
    if RAW_KEYS.contains(&key) {
        if let Ok(x) = text.trim().parse::<f64>() {
            return toml::Value::Float(x);
        }
    } else if key == "resolution" || key == "points_per_stroke" {
        if let Ok(n) = text.trim().parse::<i64>() {
            return toml::Value::Integer(n);
        }
    }
    toml::Value::String(text.to_string())
}

impl RunConfig {
    /// Builds a config from TOML text (if any) and `PREFIX_KEY=value`
    /// overrides. Raw parameter keys absent from the file keep their
    /// built-in values.
    pub fn load(text: Option<&str>, env: &[(String, String)]) -> Result<Self> {
        let mut entries: BTreeMap<String, toml::Value> = BTreeMap::new();
        if let Some(text) = text {
            let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
                EngineError::config("<file>", e.message().to_string())
            })?;
            entries.extend(table);
        }
        for (name, value) in env {
            if let Some(key) = name.strip_prefix(ENV_PREFIX) {
                let key = key.to_ascii_lowercase();
                let v = env_value(&key, value);
                entries.insert(key, v);
            }
        }

        let mut config = RunConfig::default();
        for (key, value) in entries {
            let k = key.as_str();
            if RAW_KEYS.contains(&k) {
                let x = match value {
                    toml::Value::Float(x) => x,
                    toml::Value::Integer(n) => n as f64,
                    other => {
                        return Err(EngineError::config(
                            k,
                            format!("expected a number, got {other}"),
                        ))
                    }
                };
                config.raw.insert(key, x);
                continue;
            }
            match k {
                "freq_interpretation" => config.freq_interpretation = typed(k, value)?,
                "thermal_gap" => config.thermal_gap = typed(k, value)?,
                "gamma_convention" => config.gamma_convention = typed(k, value)?,
                "resolution" => config.resolution = typed(k, value)?,
                "points_per_stroke" => config.points_per_stroke = typed(k, value)?,
                "out_dir" => config.out_dir = Some(PathBuf::from(typed::<String>(k, value)?)),
                _ => {
                    return Err(EngineError::config(
                        k,
                        format!("unknown key; expected one of {RAW_KEYS:?} or {SETTING_KEYS:?}"),
                    ))
                }
            }
        }
        if config.resolution < 2 {
            return Err(EngineError::config("resolution", "must be at least 2"));
        }
        if config.points_per_stroke < 2 {
            return Err(EngineError::config(
                "points_per_stroke",
                "must be at least 2",
            ));
        }
        Ok(config)
    }

    pub fn params(&self) -> Result<EngineParameters> {
        let mut p = to_internal_units(&self.raw)?
            .with_conventions(self.freq_interpretation, self.thermal_gap);
        p.gamma_convention = self.gamma_convention;
        p.validate()?;
        Ok(p)
    }
}

/// Exit code for an error: configuration problems are 2, everything else 1.
pub fn exit_code(err: &EngineError) -> u8 {
    match err {
        EngineError::Config { .. } | EngineError::KnobOutOfRange { .. } => EXIT_CONFIG,
        _ => EXIT_FAILED,
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_error(path: &Path, err: std::io::Error) -> EngineError {
    EngineError::config("out", format!("{}: {err}", path.display()))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io_error(&path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct ValidateReport<'a> {
    parameters: &'a EngineParameters,
    beta_hbar_omega_at_omega0: f64,
    beta_hbar_omega_at_omega1_max: f64,
    cavity_amplitude_at_e1_max: f64,
    cavity_amplitude_at_e0: f64,
}

fn cmd_validate(params: &EngineParameters) -> Result<String> {
    let (w0, w1) = params.omega_knob_range;
    let (e0, e1) = params.drive_knob_range;
    Ok(to_json(&ValidateReport {
        parameters: params,
        beta_hbar_omega_at_omega0: params.thermal_gap_at(w0) / params.temperature_freq,
        beta_hbar_omega_at_omega1_max: params.thermal_gap_at(w1) / params.temperature_freq,
        cavity_amplitude_at_e1_max: cavity_amplitude(params, e1)?.norm(),
        cavity_amplitude_at_e0: cavity_amplitude(params, e0)?.norm(),
    }))
}

fn cmd_steady_state(params: &EngineParameters, omega_mhz: f64, drive_mhz: f64) -> Result<String> {
    let knobs = Knobs::new(mhz_to_rad_s(omega_mhz), mhz_to_rad_s(drive_mhz));
    params.check_knobs(&knobs)?;
    let rho = steady_state_analytic(params, &knobs)?;
    let [bx, by, bz] = bloch_vector(&rho);
    let mut out = String::from(
        "omega,drive,rho_ee,rho_gg,re_rho_eg,im_rho_eg,entropy,bloch_x,bloch_y,bloch_z\n",
    );
    let fields = [
        knobs.omega_t,
        knobs.drive,
        rho.ee(),
        rho.gg(),
        rho.eg().re,
        rho.eg().im,
        von_neumann_entropy(&rho),
        bx,
        by,
        bz,
    ];
    out.push_str(&fields.map(num).join(","));
    out.push('\n');
    Ok(out)
}

fn cmd_cycle(
    params: &EngineParameters,
    omega1: f64,
    e1: f64,
    points_per_stroke: usize,
) -> Result<String> {
    let (_, strokes) = build_cycle(params, omega1, e1, points_per_stroke)?;
    let c = cycle_energetics(params, &strokes, &QuadratureOptions::default())?;
    let mut out = String::from(
        "stroke,axis,fixed,from,to,work,heat,positive_heat,passive_heat,ergotropy_change,\
         work_mhz,heat_mhz,positive_heat_mhz,passive_heat_mhz,ergotropy_change_mhz,efficiency,first_law_residual\n",
    );
    let energies = |v: [f64; 5]| {
        let mut cols: Vec<String> = v.iter().map(|&x| num(x)).collect();
        // ħ·rad/s to ħ·2π·MHz is the same scaling as rad/s to MHz.
        cols.extend(v.iter().map(|&x| num(rad_s_to_mhz(x))));
        cols.join(",")
    };
    for (i, (s, e)) in strokes.iter().zip(&c.per_stroke).enumerate() {
        let delta = internal_energy(params, &s.end())? - internal_energy(params, &s.start())?;
        let axis = match s.axis {
            crate::model::KnobAxis::OmegaT => "omega",
            crate::model::KnobAxis::Drive => "drive",
        };
        writeln!(
            out,
            "{},{axis},{},{},{},{},,{}",
            i + 1,
            num(s.fixed),
            num(s.from),
            num(s.to),
            energies([
                e.work,
                e.heat,
                e.positive_heat,
                e.passive_heat,
                e.ergotropy_change
            ]),
            num(e.work + e.heat - delta),
        )
        .expect("writing to a String");
    }
    let eta = c.efficiency.map(num).unwrap_or_default();
    writeln!(
        out,
        "total,,,,,{},{eta},{}",
        energies([
            c.total_work,
            c.total_heat,
            c.q_plus,
            c.total_passive_heat,
            c.total_ergotropy_change
        ]),
        num(c.total_work + c.total_heat),
    )
    .expect("writing to a String");
    Ok(out)
}

#[derive(Serialize)]
struct SweepSummary {
    resolution: usize,
    points_per_stroke: usize,
    present_nodes: usize,
    max: MaxEfficiency,
    omega1_mhz: f64,
    e1_mhz: f64,
    corner_eta: Option<f64>,
}

fn cmd_sweep(
    params: &EngineParameters,
    resolution: usize,
    pps: usize,
    dir: &Path,
    conventions: bool,
) -> Result<String> {
    let entropy = entropy_surface(params, resolution)?;
    let (ee, coherence) = state_surfaces(params, resolution)?;
    let eta = efficiency_map(params, resolution, pps)?;
    let max = find_max_efficiency(&eta)?;
    let (nw, nd) = eta.shape();
    let summary = SweepSummary {
        resolution,
        points_per_stroke: pps,
        present_nodes: eta.values.iter().filter(|v| v.is_ok()).count(),
        max,
        omega1_mhz: rad_s_to_mhz(max.omega1),
        e1_mhz: rad_s_to_mhz(max.e1),
        corner_eta: eta.get(nw - 1, nd - 1).ok(),
    };
    write_file(dir, "entropy.csv", &entropy.to_csv())?;
    write_file(dir, "rho_ee.csv", &ee.to_csv())?;
    write_file(dir, "abs_rho_eg.csv", &coherence.to_csv())?;
    write_file(dir, "efficiency.csv", &eta.to_csv())?;
    let summary_json = to_json(&summary);
    write_file(dir, "max_efficiency.json", &summary_json)?;
    if conventions {
        let report = conventions_report(params, resolution, pps, TARGET_ETA, TARGET_TOLERANCE)?;
        write_file(dir, "conventions.json", &to_json(&report))?;
    }
    Ok(summary_json)
}

/// Result of running one command: text for stdout, diagnostics for stderr,
/// and the exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: u8,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome {
            stdout,
            stderr: String::new(),
            code: EXIT_OK,
        }
    }

    fn error(err: &EngineError) -> Self {
        Outcome {
            stdout: String::new(),
            stderr: format!("error: {err}\n"),
            code: exit_code(err),
        }
    }
}

fn dispatch(cli: &Cli, config: &RunConfig) -> Result<Outcome> {
    let params = config.params()?;
    let out_dir = cli.out.clone().or_else(|| config.out_dir.clone());
    let emit = |name: &str, text: String| -> Result<Outcome> {
        if let Some(dir) = &out_dir {
            write_file(dir, name, &text)?;
        }
        Ok(Outcome::ok(text))
    };
    match &cli.command {
        Command::Validate => emit("validate.json", cmd_validate(&params)?),
        Command::SteadyState {
            omega_mhz,
            drive_mhz,
        } => emit(
            "steady_state.csv",
            cmd_steady_state(&params, *omega_mhz, *drive_mhz)?,
        ),
        Command::Cycle {
            omega1_mhz,
            e1_mhz,
            points_per_stroke,
        } => {
            let omega1 = omega1_mhz
                .map(mhz_to_rad_s)
                .unwrap_or(params.omega_knob_range.1);
            let e1 = e1_mhz
                .map(mhz_to_rad_s)
                .unwrap_or(params.drive_knob_range.1);
            let pps = points_per_stroke.unwrap_or(config.points_per_stroke);
            emit("cycle.csv", cmd_cycle(&params, omega1, e1, pps)?)
        }
        Command::Sweep {
            resolution,
            points_per_stroke,
            conventions_report,
        } => {
            let dir = out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
            let res = resolution.unwrap_or(config.resolution);
            let pps = points_per_stroke.unwrap_or(config.points_per_stroke);
            Ok(Outcome::ok(cmd_sweep(
                &params,
                res,
                pps,
                &dir,
                *conventions_report,
            )?))
        }
        Command::OracleCheck {
            samples,
            seed,
            joint_check,
        } => {
            let report = run_oracle_check(&params, *samples, *seed, *joint_check)?;
            let text = to_json(&report);
            let mut outcome = emit("oracle_report.json", text)?;
            if !report.passed {
                let w = report.worst;
                outcome.stderr = format!(
                    "verification failed: distance {:e} at omega = {} MHz, drive = {} MHz; gamma verdict {:?}\n",
                    w.distance,
                    rad_s_to_mhz(w.knobs.omega_t),
                    rad_s_to_mhz(w.knobs.drive),
                    report.gamma_verdict,
                );
                outcome.code = EXIT_FAILED;
            }
            Ok(outcome)
        }
    }
}

/// Runs a parsed command line against `env` (name, value) pairs.
pub fn run(cli: &Cli, env: &[(String, String)]) -> Outcome {
    let text = match &cli.config {
        Some(path) => match fs::read_to_string(path) {
            Ok(t) => Some(t),
            Err(e) => {
                return Outcome::error(&EngineError::config(
                    "config",
                    format!("{}: {e}", path.display()),
                ))
            }
        },
        None => None,
    };
    let result = RunConfig::load(text.as_deref(), env).and_then(|config| dispatch(cli, &config));
    result.unwrap_or_else(|e| Outcome::error(&e))
}

/// Entry point used by the binary.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let env: Vec<(String, String)> = std::env::vars().collect();
    let outcome = run(&cli, &env);
    let _ = std::io::stdout().write_all(outcome.stdout.as_bytes());
    let _ = std::io::stderr().write_all(outcome.stderr.as_bytes());
    outcome.code
}
