//! Command-line front end: run configuration, validation and dispatch.
//!
//! Every subcommand is first turned into a [`RunConfig`], which is also what
//! `--config` reads back (either a bare config or a previous run's
//! `manifest.json`). Exit codes: 0 success, 1 numerical-validation or
//! runtime failure, 2 configuration error.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::asymptotics::{self, Verdict};
use crate::contrasts::{self, parse_test_function};
use crate::cumulant3::{self, GridMetadata};
use crate::error::{ConfigViolation, Error, Result};
use crate::kernels::Kernel;
use crate::matching::{self, MatchSpec, MatchedKernel};
use crate::montecarlo::{self, Level, Suite};
use crate::rng::Streams;
use crate::simulate::{self, ModelParams, SimOptions};
use crate::spectra::{self, BispectrumKind, Form, SpectralGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum KindArg {
    Complete,
    Factorial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FormArg {
    R,
    Q,
}

/// Model parameters as written in a config, before validation. Missing
/// fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamsConfig {
    pub kernel: String,
    pub nu: f64,
    pub m: f64,
    pub theta: f64,
    pub pad_tol: f64,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self {
            kernel: "exp:1".into(),
            nu: 1.0,
            m: 0.5,
            theta: 1.0,
            pad_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum CommandConfig {
    Simulate {
        t_end: f64,
    },
    Spectrum {
        omega_max: f64,
        n: usize,
    },
    Bispectrum {
        kind: KindArg,
        form: FormArg,
        omega_max: f64,
        n: usize,
    },
    Invert {
        half_width: Option<f64>,
        n: usize,
    },
    Match {
        eps: f64,
        spacing: Option<f64>,
        x_max: Option<f64>,
        out: Option<PathBuf>,
    },
    ContrastRun {
        events: PathBuf,
        t_end: Option<f64>,
        g: String,
        h: Option<f64>,
    },
    ContrastScan {
        thetas: Vec<f64>,
        replicates: usize,
        t_end: f64,
        g: String,
        h: Option<f64>,
        exact: bool,
    },
    McValidate {
        suite: Suite,
        level: Level,
    },
    AsymCheck {
        t_min: f64,
        tolerance: f64,
        per_decade: usize,
    },
}

impl CommandConfig {
    pub fn name(&self) -> &'static str {
        match self {
            CommandConfig::Simulate { .. } => "simulate",
            CommandConfig::Spectrum { .. } => "spectrum",
            CommandConfig::Bispectrum { .. } => "bispectrum",
            CommandConfig::Invert { .. } => "invert",
            CommandConfig::Match { .. } => "match",
            CommandConfig::ContrastRun { .. } => "contrast-run",
            CommandConfig::ContrastScan { .. } => "contrast-scan",
            CommandConfig::McValidate { .. } => "mc-validate",
            CommandConfig::AsymCheck { .. } => "asym-check",
        }
    }
}

/// A complete, serialisable description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
    #[serde(default)]
    pub params: ParamsConfig,
    pub command: CommandConfig,
}

/// Written next to every run's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub seed: u64,
    pub package: String,
    pub version: String,
    pub wall_time_secs: f64,
    pub exit_code: i32,
    pub outputs: Vec<String>,
}

fn violation(field: &str, message: impl Into<String>) -> ConfigViolation {
    ConfigViolation {
        field: field.into(),
        message: message.into(),
    }
}

fn positive(v: &mut Vec<ConfigViolation>, field: &str, x: f64) {
    if !(x > 0.0 && x.is_finite()) {
        v.push(violation(field, format!("must be positive and finite, got {x}")));
    }
}

impl RunConfig {
    /// All violations, in field order.
    pub fn violations(&self) -> Vec<ConfigViolation> {
        let mut v = Vec::new();
        let p = &self.params;
        let kernel = match p.kernel.parse::<Kernel>() {
            Ok(k) => Some(k),
            Err(e) => {
                v.push(violation("params.kernel", e.to_string()));
                None
            }
        };
        positive(&mut v, "params.nu", p.nu);
        if !(p.m > 0.0 && p.m < 1.0) {
            v.push(violation(
                "params.m",
                format!("branching ratio must lie in (0, 1), got {}", p.m),
            ));
        }
        if !(-1.0..=1.0).contains(&p.theta) {
            v.push(violation("params.theta", format!("must lie in [-1, 1], got {}", p.theta)));
        }
        if !(p.pad_tol > 0.0 && p.pad_tol < 1.0) {
            v.push(violation("params.pad_tol", format!("must lie in (0, 1), got {}", p.pad_tol)));
        }
        if self.threads == Some(0) {
            v.push(violation("threads", "must be at least 1"));
        }
        match &self.command {
            CommandConfig::Simulate { t_end } => positive(&mut v, "command.t_end", *t_end),
            CommandConfig::Spectrum { omega_max, n } => {
                positive(&mut v, "command.omega_max", *omega_max);
                if *n == 0 {
                    v.push(violation("command.n", "must be at least 1"));
                }
            }
            CommandConfig::Bispectrum { omega_max, n, .. } => {
                positive(&mut v, "command.omega_max", *omega_max);
                if *n < 2 || n % 2 == 1 {
                    v.push(violation("command.n", format!("must be even and ≥ 2, got {n}")));
                }
            }
            CommandConfig::Invert { half_width, n } => {
                if let Some(h) = half_width {
                    positive(&mut v, "command.half_width", *h);
                }
                if *n < 64 || !n.is_power_of_two() {
                    v.push(violation("command.n", format!("must be a power of two ≥ 64, got {n}")));
                }
            }
            CommandConfig::Match {
                eps, spacing, x_max, ..
            } => {
                if !(*eps > 0.0 && *eps < 1.0) {
                    v.push(violation("command.eps", format!("must lie in (0, 1), got {eps}")));
                }
                if let Some(s) = spacing {
                    positive(&mut v, "command.spacing", *s);
                }
                if let Some(x) = x_max {
                    positive(&mut v, "command.x_max", *x);
                }
                if let Some(k) = &kernel {
                    if !matches!(
                        k,
                        Kernel::Exponential { .. } | Kernel::Lomax { .. } | Kernel::UniformHalf { .. }
                    ) {
                        v.push(violation(
                            "params.kernel",
                            format!("base kernel `{k}` must be monotone and one-sided (exp, lomax, uhalf)"),
                        ));
                    }
                }
            }
            CommandConfig::ContrastRun { t_end, g, h, .. } => {
                if let Some(t) = t_end {
                    positive(&mut v, "command.t_end", *t);
                }
                if let Err(e) = parse_test_function(g, *h) {
                    v.push(violation("command.g", e.to_string()));
                }
            }
            CommandConfig::ContrastScan {
                thetas,
                replicates,
                t_end,
                g,
                h,
                ..
            } => {
                if thetas.len() < 3 {
                    v.push(violation("command.thetas", "need at least three values"));
                }
                for (i, t) in thetas.iter().enumerate() {
                    if !(-1.0..=1.0).contains(t) {
                        v.push(violation(
                            &format!("command.thetas[{i}]"),
                            format!("must lie in [-1, 1], got {t}"),
                        ));
                    }
                }
                if *replicates < 2 {
                    v.push(violation("command.replicates", "must be at least 2"));
                }
                positive(&mut v, "command.t_end", *t_end);
                if let Err(e) = parse_test_function(g, *h) {
                    v.push(violation("command.g", e.to_string()));
                }
            }
            CommandConfig::McValidate { .. } => {}
            CommandConfig::AsymCheck {
                t_min,
                tolerance,
                per_decade,
            } => {
                if !(*t_min > 0.0 && *t_min < 0.1) {
                    v.push(violation("command.t_min", format!("must lie in (0, 0.1), got {t_min}")));
                }
                positive(&mut v, "command.tolerance", *tolerance);
                if *per_decade == 0 {
                    v.push(violation("command.per_decade", "must be at least 1"));
                }
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    /// Validated model parameters. Call after [`RunConfig::validate`].
    pub fn model_params(&self) -> Result<ModelParams> {
        let p = &self.params;
        ModelParams::new(p.nu, p.m, p.theta, p.kernel.parse()?)
    }

    fn sim_options(&self) -> SimOptions {
        SimOptions {
            pad_tol: self.params.pad_tol,
            ..SimOptions::default()
        }
    }
}

/// Parses and validates a config from JSON. A manifest is accepted and its
/// embedded config is used.
pub fn parse_config(json: &str) -> Result<RunConfig> {
    let mut value: serde_json::Value = serde_json::from_str(json)
        .map_err(|e| Error::Config(vec![violation("<document>", e.to_string())]))?;
    if let Some(inner) = value.get_mut("config") {
        value = inner.take();
    }
    let cfg: RunConfig = serde_json::from_value(value)
        .map_err(|e| Error::Config(vec![violation("<document>", e.to_string())]))?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Parser)]
#[command(name = "cluster-orient", version, about = "Orientation analysis for branching-cluster point processes")]
struct Cli {
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Run from a config or manifest JSON instead of a subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Option<Cmd>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Kernel spec: exp:β, lomax:α, uhalf:a, slap:β, match:<base>:<m>, tab:<path>.
    #[arg(long, default_value = "exp:1")]
    kernel: String,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long, default_value_t = 0.5)]
    m: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    theta: f64,
    #[arg(long, default_value_t = 1e-6)]
    pad_tol: f64,
}

impl ModelArgs {
    fn config(&self) -> ParamsConfig {
        ParamsConfig {
            kernel: self.kernel.clone(),
            nu: self.nu,
            m: self.m,
            theta: self.theta,
            pad_tol: self.pad_tol,
        }
    }
}

#[derive(Debug, Args)]
struct McArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value = "bispectrum")]
    suite: Suite,
    #[arg(long, value_enum, default_value = "quick")]
    level: Level,
}

#[derive(Debug, Args)]
struct AsymArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1e-4)]
    tmin: f64,
    /// Relative band on the ratio at the smallest t.
    #[arg(long, default_value_t = 0.05)]
    tol: f64,
    #[arg(long, default_value_t = 1)]
    per_decade: usize,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Simulate events on [0, T].
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "T", default_value_t = 1000.0)]
        t_end: f64,
    },
    /// Bartlett spectrum at n frequencies up to omega-max.
    Spectrum {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 10.0)]
        omega_max: f64,
        #[arg(long, default_value_t = 200)]
        n: usize,
    },
    /// Bispectrum on an n×n lattice covering [-omega-max, omega-max)².
    Bispectrum {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value = "complete")]
        kind: KindArg,
        #[arg(long, value_enum, default_value = "r")]
        form: FormArg,
        #[arg(long, default_value_t = 5.0)]
        omega_max: f64,
        #[arg(long, default_value_t = 32)]
        n: usize,
    },
    /// Third cumulant density by lattice inversion.
    Invert {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        half_width: Option<f64>,
        #[arg(long, default_value_t = 256)]
        n: usize,
    },
    /// Matched-kernel construction.
    Match {
        #[command(subcommand)]
        cmd: MatchCmd,
    },
    /// Contrast statistics.
    Contrast {
        #[command(subcommand)]
        cmd: ContrastCmd,
    },
    /// Monte-Carlo validation suites.
    McValidate(McArgs),
    Mc {
        #[command(subcommand)]
        cmd: McCmd,
    },
    /// Small-frequency limit check.
    AsymCheck(AsymArgs),
    Asym {
        #[command(subcommand)]
        cmd: AsymCmd,
    },
}

#[derive(Debug, Subcommand)]
enum MatchCmd {
    /// Build a matched kernel for a monotone base and write it as JSON.
    Build {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1e-12)]
        eps: f64,
        #[arg(long)]
        spacing: Option<f64>,
        #[arg(long)]
        x_max: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum ContrastCmd {
    /// Statistic on an event file.
    Run {
        #[arg(long)]
        events: PathBuf,
        #[arg(long = "T")]
        t_end: Option<f64>,
        /// bump[:H] or quadrant[:H].
        #[arg(long, default_value = "bump")]
        g: String,
        #[arg(long = "H")]
        h: Option<f64>,
    },
    /// Sign-family linearity scan over θ.
    Scan {
        #[arg(long, default_value = "exp:1")]
        kernel: String,
        #[arg(long, default_value_t = 1.0)]
        nu: f64,
        #[arg(long, default_value_t = 0.5)]
        m: f64,
        #[arg(long, default_value_t = 1e-6)]
        pad_tol: f64,
        #[arg(long = "theta", value_delimiter = ',', allow_hyphen_values = true,
              default_value = "-1,-0.5,0,0.5,1")]
        thetas: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long = "T", default_value_t = 1000.0)]
        t_end: f64,
        #[arg(long, default_value = "bump")]
        g: String,
        #[arg(long = "H", default_value_t = 5.0)]
        h: f64,
        /// Also compute the exact mean by cumulant inversion.
        #[arg(long)]
        exact: bool,
    },
}

#[derive(Debug, Subcommand)]
enum McCmd {
    Validate(McArgs),
}

#[derive(Debug, Subcommand)]
enum AsymCmd {
    Check(AsymArgs),
}

fn mc_command(a: McArgs) -> (ParamsConfig, CommandConfig) {
    (
        a.model.config(),
        CommandConfig::McValidate {
            suite: a.suite,
            level: a.level,
        },
    )
}

fn asym_command(a: AsymArgs) -> (ParamsConfig, CommandConfig) {
    (
        a.model.config(),
        CommandConfig::AsymCheck {
            t_min: a.tmin,
            tolerance: a.tol,
            per_decade: a.per_decade,
        },
    )
}

fn command_of(cmd: Cmd) -> (ParamsConfig, CommandConfig) {
    match cmd {
        Cmd::Simulate { model, t_end } => (model.config(), CommandConfig::Simulate { t_end }),
        Cmd::Spectrum { model, omega_max, n } => {
            (model.config(), CommandConfig::Spectrum { omega_max, n })
        }
        Cmd::Bispectrum {
            model,
            kind,
            form,
            omega_max,
            n,
        } => (
            model.config(),
            CommandConfig::Bispectrum {
                kind,
                form,
                omega_max,
                n,
            },
        ),
        Cmd::Invert {
            model,
            half_width,
            n,
        } => (model.config(), CommandConfig::Invert { half_width, n }),
        Cmd::Match {
            cmd:
                MatchCmd::Build {
                    model,
                    eps,
                    spacing,
                    x_max,
                    out,
                },
        } => (
            model.config(),
            CommandConfig::Match {
                eps,
                spacing,
                x_max,
                out,
            },
        ),
        Cmd::Contrast {
            cmd: ContrastCmd::Run { events, t_end, g, h },
        } => (
            ParamsConfig::default(),
            CommandConfig::ContrastRun { events, t_end, g, h },
        ),
        Cmd::Contrast {
            cmd:
                ContrastCmd::Scan {
                    kernel,
                    nu,
                    m,
                    pad_tol,
                    thetas,
                    reps,
                    t_end,
                    g,
                    h,
                    exact,
                },
        } => (
            ParamsConfig {
                kernel,
                nu,
                m,
                theta: 1.0,
                pad_tol,
            },
            CommandConfig::ContrastScan {
                thetas,
                replicates: reps,
                t_end,
                g,
                h: Some(h),
                exact,
            },
        ),
        Cmd::McValidate(a) | Cmd::Mc { cmd: McCmd::Validate(a) } => mc_command(a),
        Cmd::AsymCheck(a) | Cmd::Asym { cmd: AsymCmd::Check(a) } => asym_command(a),
    }
}

/// Builds and validates a [`RunConfig`] from command-line arguments
/// (including the program name).
pub fn config_from_args<I, S>(args: I) -> std::result::Result<RunConfig, ArgsError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(ArgsError::Clap)?;
    let mut cfg = match (&cli.config, cli.cmd) {
        (Some(_), Some(_)) => {
            return Err(ArgsError::Run(Error::Config(vec![violation(
                "config",
                "give either --config or a subcommand, not both",
            )])))
        }
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                ArgsError::Run(Error::Config(vec![violation(
                    "config",
                    format!("cannot read {}: {e}", path.display()),
                )]))
            })?;
            parse_config(&text).map_err(ArgsError::Run)?
        }
        (None, Some(cmd)) => {
            let (params, command) = command_of(cmd);
            RunConfig {
                seed: 1,
                threads: None,
                out_dir: PathBuf::from("out"),
                format: OutputFormat::Csv,
                params,
                command,
            }
        }
        (None, None) => {
            return Err(ArgsError::Run(Error::Config(vec![violation(
                "command",
                "no subcommand given (see --help)",
            )])))
        }
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(d) = cli.out_dir {
        cfg.out_dir = d;
    }
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    cfg.validate().map_err(ArgsError::Run)?;
    Ok(cfg)
}

#[derive(Debug)]
pub enum ArgsError {
    Clap(clap::Error),
    Run(Error),
}

/// Result of [`run`]: exit code and the files written (relative to the
/// output directory).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub outputs: Vec<String>,
}

struct Out<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Out<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let p = self.path(name);
        std::fs::write(p, serde_json::to_string_pretty(v)?)?;
        Ok(())
    }
}

#[derive(Serialize)]
struct BispectrumMeta<'a> {
    params: &'a ModelParams,
    kind: KindArg,
    form: FormArg,
    n: usize,
    omega_max: f64,
    max_abs_im: f64,
}

#[derive(Serialize)]
struct ContrastRunReport {
    source: String,
    window_end: f64,
    n_events: usize,
    g: String,
    support_radius: f64,
    statistic: f64,
}

#[derive(Serialize)]
struct ScanReport {
    params: ModelParams,
    g: String,
    t_end: f64,
    scan: contrasts::ScanResult,
    exact: Option<contrasts::ExactMean>,
    /// `(slope − μ_T)/se` when the exact mean was computed.
    slope_z: Option<f64>,
    /// `intercept/se`.
    intercept_z: f64,
}

#[derive(Serialize)]
struct CumulantDump<'a> {
    metadata: GridMetadata,
    grid: &'a cumulant3::CumulantGrid,
}

fn execute(cfg: &RunConfig, out: &mut Out) -> Result<i32> {
    let ext = match cfg.format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    let json = cfg.format == OutputFormat::Json;
    let streams = Streams::new(cfg.seed);
    match &cfg.command {
        CommandConfig::Simulate { t_end } => {
            let p = cfg.model_params()?;
            let e = simulate::simulate_window(&p, *t_end, cfg.seed, &cfg.sim_options())?;
            log::info!("simulated {} events on [0, {t_end}]", e.len());
            let path = out.path(&format!("events.{ext}"));
            if json {
                std::fs::write(path, serde_json::to_string_pretty(&e)?)?;
            } else {
                e.write_csv(&path)?;
            }
        }
        CommandConfig::Spectrum { omega_max, n } => {
            let p = cfg.model_params()?;
            let ws: Vec<f64> = (1..=*n).map(|i| i as f64 * omega_max / *n as f64).collect();
            let g = spectra::bartlett_grid(&p, &ws)?;
            g.write(&out.path(&format!("spectrum.{ext}")), json)?;
        }
        CommandConfig::Bispectrum {
            kind,
            form,
            omega_max,
            n,
        } => {
            let p = cfg.model_params()?;
            let dw = 2.0 * omega_max / *n as f64;
            let k = match kind {
                KindArg::Complete => BispectrumKind::Complete,
                KindArg::Factorial => BispectrumKind::Factorial,
            };
            let (axis, vals) = match form {
                FormArg::R => spectra::bispectrum_lattice(&p, dw, *n, k)?,
                FormArg::Q => {
                    let half = (*n / 2) as i64;
                    let axis: Vec<f64> = (-half..half).map(|i| i as f64 * dw).collect();
                    let pairs: Vec<(f64, f64)> = axis
                        .iter()
                        .flat_map(|&a| axis.iter().map(move |&b| (a, b)))
                        .collect();
                    (axis, spectra::bispectrum_at(&p, &pairs, k, Form::Q)?)
                }
            };
            let pairs: Vec<(f64, f64)> = axis
                .iter()
                .flat_map(|&a| axis.iter().map(move |&b| (a, b)))
                .collect();
            let grid = SpectralGrid::two_d(&pairs, &vals);
            grid.write(&out.path(&format!("bispectrum.{ext}")), json)?;
            out.json(
                "bispectrum_meta.json",
                &BispectrumMeta {
                    params: &p,
                    kind: *kind,
                    form: *form,
                    n: *n,
                    omega_max: *omega_max,
                    max_abs_im: grid.max_abs_im(),
                },
            )?;
        }
        CommandConfig::Invert { half_width, n } => {
            let p = cfg.model_params()?;
            let lam = half_width.unwrap_or_else(|| cumulant3::default_half_width(&p));
            let g = cumulant3::invert_bispectrum(&p, lam, *n)?;
            if g.alias_warning {
                log::warn!("boundary mass above 1%; consider a larger half-width");
            }
            let meta = GridMetadata::new(&g, &p);
            if json {
                out.json(
                    "c3.json",
                    &CumulantDump {
                        metadata: meta.clone(),
                        grid: &g,
                    },
                )?;
            } else {
                g.write_csv(&out.path("c3.csv"))?;
            }
            out.json("c3_meta.json", &meta)?;
        }
        CommandConfig::Match {
            eps,
            spacing,
            x_max,
            out: target,
        } => {
            let base: Kernel = cfg.params.kernel.parse()?;
            let x_max = x_max.unwrap_or_else(|| base.abs_quantile(1e-6).min(100.0));
            let spacing = spacing.unwrap_or(x_max / 2000.0);
            let mk = MatchedKernel::build(MatchSpec::with_eps(base, cfg.params.m, *eps)?)?;
            let file = matching::matched_kernel_file(&mk, spacing, x_max)?;
            let text = serde_json::to_string_pretty(&file)?;
            match target {
                Some(path) => {
                    std::fs::write(path, text)?;
                    out.files.push(path.display().to_string());
                }
                None => std::fs::write(out.path("matched_kernel.json"), text)?,
            }
        }
        CommandConfig::ContrastRun { events, t_end, g, h } => {
            let e = simulate::ingest_events(events, *t_end)?;
            let f = parse_test_function(g, *h)?;
            out.json(
                "contrast.json",
                &ContrastRunReport {
                    source: events.display().to_string(),
                    window_end: e.window_end,
                    n_events: e.len(),
                    g: f.label().to_string(),
                    support_radius: f.support_radius(),
                    statistic: contrasts::contrast_statistic(&e, &f),
                },
            )?;
        }
        CommandConfig::ContrastScan {
            thetas,
            replicates,
            t_end,
            g,
            h,
            exact,
        } => {
            let p = cfg.model_params()?;
            let f = parse_test_function(g, *h)?;
            let scan = contrasts::linearity_scan(
                &p,
                &f,
                *t_end,
                thetas,
                *replicates,
                &streams,
                &cfg.sim_options(),
            )?;
            let exact = if *exact {
                let q = p.with_theta(1.0);
                let lam = cumulant3::default_half_width(&q).max(1.5 * f.support_radius());
                let grid = cumulant3::invert_bispectrum(&q, lam, 512)?;
                Some(contrasts::exact_mean(&q, &f, *t_end, &grid)?)
            } else {
                None
            };
            let slope_z = exact.map(|e| (scan.slope - e.mu_t) / scan.slope_stderr);
            let intercept_z = scan.intercept / scan.intercept_stderr;
            out.json(
                "scan.json",
                &ScanReport {
                    params: p,
                    g: f.label().to_string(),
                    t_end: *t_end,
                    scan,
                    exact,
                    slope_z,
                    intercept_z,
                },
            )?;
        }
        CommandConfig::McValidate { suite, level } => {
            let p = cfg.model_params()?;
            let report = montecarlo::validate_suite(*suite, *level, &p, cfg.seed)?;
            out.json("mc_validate.json", &report)?;
            if !report.pass {
                return Ok(1);
            }
        }
        CommandConfig::AsymCheck {
            t_min,
            tolerance,
            per_decade,
        } => {
            let p = cfg.model_params()?;
            let ts = asymptotics::default_t_list(*t_min, *per_decade);
            let report = asymptotics::diag_limit_check(&p, p.kernel.tail_class(), &ts, *tolerance)?;
            out.json("asym_check.json", &report)?;
            if matches!(report.verdict, Verdict::NotConverged | Verdict::NotDiverging) {
                return Ok(1);
            }
        }
    }
    Ok(0)
}

/// Runs a validated config, writing outputs and `manifest.json` into
/// `cfg.out_dir`.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let start = Instant::now();
    let mut out = Out {
        dir: &cfg.out_dir,
        files: Vec::new(),
    };
    let code = match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(|| execute(cfg, &mut out))?,
        None => execute(cfg, &mut out)?,
    };
    let manifest = Manifest {
        config: cfg.clone(),
        seed: cfg.seed,
        package: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        exit_code: code,
        outputs: out.files.clone(),
    };
    std::fs::write(
        cfg.out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(RunOutcome {
        exit_code: code,
        outputs: out.files,
    })
}

/// Parses `args`, runs, and returns the process exit code.
pub fn run_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cfg = match config_from_args(args) {
        Ok(c) => c,
        Err(ArgsError::Clap(e)) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
        Err(ArgsError::Run(e)) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match run(&cfg) {
        Ok(o) => o.exit_code,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {}: {e}", cfg.command.name());
            2
        }
        Err(e) => {
            eprintln!("error: {}: {e}", cfg.command.name());
            1
        }
    }
}

pub fn main_from_args() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    run_args(std::env::args_os())
}
