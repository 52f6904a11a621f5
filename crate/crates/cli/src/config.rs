//! Command-line flags, `key=value` config files and their resolution into a
//! [`RunConfig`].
//!
//! A config file holds one `key = value` pair per line, keys spelled like the
//! long flags without the leading dashes (`fss-uev = 0,1.5`). Blank lines and
//! lines starting with `#` are skipped. Values set on the command line win
//! over the file, which wins over the defaults.

use std::fmt;
use std::path::PathBuf;

use cascade_core::model::PULSE_WINDOW;
use cascade_core::propagator::DEFAULT_DT_PULSE;
use cascade_core::{Method, PulseShape, QdParams};
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Pulsed two-photon excitation from the ground state.
    Tpe,
    /// Prepared biexciton, no drive.
    InitialValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Polarization {
    H,
    V,
    D,
    A,
}

impl Polarization {
    pub fn alpha_h(self) -> f64 {
        use std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Polarization::H => 1.0,
            Polarization::V => 0.0,
            Polarization::D => FRAC_1_SQRT_2,
            Polarization::A => -FRAC_1_SQRT_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShapeArg {
    Gaussian,
    SmoothedRectangular,
}

impl From<ShapeArg> for PulseShape {
    fn from(s: ShapeArg) -> Self {
        match s {
            ShapeArg::Gaussian => PulseShape::Gaussian,
            ShapeArg::SmoothedRectangular => PulseShape::SmoothedRectangular,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Spectral,
    BruteForce,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Spectral => Method::SpectralFast,
            MethodArg::BruteForce => Method::BruteForce,
        }
    }
}

/// Inclusive `start:stop:step` grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.start + self.step * k as f64).collect()
    }
}

fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, step] = parts[..] else {
        return Err(format!("expected start:stop:step, got {s:?}"));
    };
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    let g = Grid { start: num(a)?, stop: num(b)?, step: num(step)? };
    if !(g.step > 0.0 && g.start.is_finite() && g.stop >= g.start && g.stop.is_finite()) {
        return Err(format!("grid {s:?} needs finite start <= stop and step > 0"));
    }
    Ok(g)
}

#[derive(Parser, Debug, Clone, Default)]
#[command(name = "cascade", version, about = "Concurrence of photon pairs from a biexciton cascade under two-photon excitation")]
pub struct Cli {
    /// `key=value` file with defaults for any of the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Pulse FWHM values (ps), comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "fwhm_grid")]
    pub fwhm: Option<Vec<f64>>,
    /// Inclusive FWHM grid `start:stop:step` (ps).
    #[arg(long, value_parser = parse_grid)]
    pub fwhm_grid: Option<Grid>,
    /// Fine-structure splittings (μeV), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub fss_uev: Option<Vec<f64>>,
    /// Horizontal components of the laser polarization, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, conflicts_with = "polarization")]
    pub alpha_h: Option<Vec<f64>>,
    #[arg(long, value_enum, value_delimiter = ',', ignore_case = true)]
    pub polarization: Option<Vec<Polarization>>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub pulse_shape: Option<Vec<ShapeArg>>,
    /// Pulse area (rad); skips the π-pulse calibration.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Delay-time window (ps); unbounded when absent.
    #[arg(long)]
    pub tau_window_ps: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Same as `--method brute-force`.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", conflicts_with = "method")]
    pub brute_force: Option<bool>,
    /// Integration step while the pulse is on (ps).
    #[arg(long)]
    pub dt_pulse: Option<f64>,
    /// Real-time horizon (ps).
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write zero for runtime_ms so reruns are byte-identical.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub omit_timing: Option<bool>,
    /// Exit with status 2 when |numeric − estimate| exceeds this anywhere.
    #[arg(long)]
    pub max_deviation: Option<f64>,
    /// Exciton decay rate (ps⁻¹).
    #[arg(long)]
    pub gamma_x: Option<f64>,
    /// Biexciton decay rate (ps⁻¹).
    #[arg(long)]
    pub gamma_b: Option<f64>,
    /// Biexciton binding energy (meV).
    #[arg(long)]
    pub e_b: Option<f64>,
}

impl Cli {
    /// Fields set here replace those of `base`. The FWHM, polarization and
    /// method pairs are taken as units so a file setting never outlives a CLI
    /// one.
    fn over(self, base: Cli) -> Cli {
        let (fwhm, fwhm_grid) = if self.fwhm.is_some() || self.fwhm_grid.is_some() {
            (self.fwhm, self.fwhm_grid)
        } else {
            (base.fwhm, base.fwhm_grid)
        };
        let (alpha_h, polarization) = if self.alpha_h.is_some() || self.polarization.is_some() {
            (self.alpha_h, self.polarization)
        } else {
            (base.alpha_h, base.polarization)
        };
        let (method, brute_force) = if self.method.is_some() || self.brute_force.is_some() {
            (self.method, self.brute_force)
        } else {
            (base.method, base.brute_force)
        };
        Cli {
            config: self.config,
            mode: self.mode.or(base.mode),
            fwhm,
            fwhm_grid,
            fss_uev: self.fss_uev.or(base.fss_uev),
            alpha_h,
            polarization,
            pulse_shape: self.pulse_shape.or(base.pulse_shape),
            theta: self.theta.or(base.theta),
            tau_window_ps: self.tau_window_ps.or(base.tau_window_ps),
            method,
            brute_force,
            dt_pulse: self.dt_pulse.or(base.dt_pulse),
            t_max: self.t_max.or(base.t_max),
            threads: self.threads.or(base.threads),
            out: self.out.or(base.out),
            omit_timing: self.omit_timing.or(base.omit_timing),
            max_deviation: self.max_deviation.or(base.max_deviation),
            gamma_x: self.gamma_x.or(base.gamma_x),
            gamma_b: self.gamma_b.or(base.gamma_b),
            e_b: self.e_b.or(base.e_b),
        }
    }
}

/// Parses config file text through the same flag definitions as the
/// command line.
pub fn parse_config_text(text: &str) -> Result<Cli, ConfigError> {
    let mut args = vec!["cascade".to_string()];
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Usage(format!("config line {}: expected key=value", n + 1)));
        };
        let key = key.trim().replace('_', "-");
        if key == "config" {
            return Err(ConfigError::Usage(format!("config line {}: nested config files are not supported", n + 1)));
        }
        args.push(format!("--{key}={}", value.trim()));
    }
    Cli::try_parse_from(args).map_err(|e| ConfigError::Usage(format!("config file: {}", e.kind())))
}

#[derive(Debug)]
pub enum ConfigError {
    Usage(String),
    Io(PathBuf, std::io::Error),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Usage(m) => f.write_str(m),
            ConfigError::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    /// Ignored in initial-value mode.
    pub fwhm: Vec<f64>,
    pub fss_uev: Vec<f64>,
    pub alpha_h: Vec<f64>,
    pub shapes: Vec<PulseShape>,
    pub theta: Option<f64>,
    pub tau_window_ps: Option<f64>,
    pub method: Method,
    pub dt_pulse: f64,
    pub t_max: Option<f64>,
    pub threads: Option<usize>,
    pub out: PathBuf,
    pub omit_timing: bool,
    pub max_deviation: Option<f64>,
    pub params: QdParams,
    pub window: f64,
}

pub const DEFAULT_FWHM_GRID: Grid = Grid { start: 1.0, stop: 25.0, step: 2.0 };
pub const DEFAULT_FSS: [f64; 3] = [0.0, 1.5, 3.0];
pub const DEFAULT_OUT: &str = "cascade-out";

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Tpe,
            fwhm: DEFAULT_FWHM_GRID.values(),
            fss_uev: DEFAULT_FSS.to_vec(),
            alpha_h: vec![Polarization::H.alpha_h(), Polarization::D.alpha_h()],
            shapes: vec![PulseShape::Gaussian],
            theta: None,
            tau_window_ps: None,
            method: Method::SpectralFast,
            dt_pulse: DEFAULT_DT_PULSE,
            t_max: None,
            threads: None,
            out: PathBuf::from(DEFAULT_OUT),
            omit_timing: false,
            max_deviation: None,
            params: QdParams::default(),
            window: PULSE_WINDOW,
        }
    }
}

/// Reads the config file named by `cli`, if any, and applies the precedence
/// CLI > file > defaults.
pub fn resolve(cli: Cli) -> Result<RunConfig, ConfigError> {
    let merged = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.clone(), e))?;
            cli.over(parse_config_text(&text)?)
        }
        None => cli,
    };
    build(merged)
}

fn usage<T>(msg: String) -> Result<T, ConfigError> {
    Err(ConfigError::Usage(msg))
}

fn build(c: Cli) -> Result<RunConfig, ConfigError> {
    let d = RunConfig::default();
    let mode = c.mode.unwrap_or(d.mode);
    let fwhm = match (c.fwhm, c.fwhm_grid) {
        (Some(v), _) => v,
        (None, Some(g)) => g.values(),
        (None, None) => d.fwhm,
    };
    if mode == Mode::Tpe && fwhm.is_empty() {
        return usage("empty FWHM grid".into());
    }
    if let Some(x) = fwhm.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        return usage(format!("FWHM must be positive, got {x}"));
    }
    let fss_uev = c.fss_uev.unwrap_or(d.fss_uev);
    if let Some(x) = fss_uev.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
        return usage(format!("fine-structure splitting must be >= 0, got {x}"));
    }
    let alpha_h = match (c.alpha_h, c.polarization) {
        (Some(v), _) => v,
        (None, Some(p)) => p.into_iter().map(Polarization::alpha_h).collect(),
        (None, None) if mode == Mode::InitialValue => vec![1.0],
        (None, None) => d.alpha_h,
    };
    if let Some(x) = alpha_h.iter().find(|x| !(-1.0..=1.0).contains(*x)) {
        return usage(format!("alpha-h must lie in [-1, 1], got {x}"));
    }
    if fss_uev.is_empty() || alpha_h.is_empty() {
        return usage("empty splitting or polarization list".into());
    }
    let shapes: Vec<PulseShape> = match c.pulse_shape {
        Some(v) => v.into_iter().map(Into::into).collect(),
        None => d.shapes,
    };
    if shapes.is_empty() {
        return usage("empty pulse-shape list".into());
    }
    let positive = |name: &str, v: Option<f64>, allow_zero: bool| -> Result<(), ConfigError> {
        match v {
            Some(x) if !(x.is_finite() && (x > 0.0 || (allow_zero && x == 0.0))) => {
                usage(format!("{name} must be {}, got {x}", if allow_zero { ">= 0" } else { "> 0" }))
            }
            _ => Ok(()),
        }
    };
    positive("theta", c.theta, true)?;
    positive("tau-window-ps", c.tau_window_ps, true)?;
    positive("dt-pulse", c.dt_pulse, false)?;
    positive("t-max", c.t_max, false)?;
    positive("max-deviation", c.max_deviation, true)?;
    positive("gamma-x", c.gamma_x, true)?;
    positive("gamma-b", c.gamma_b, true)?;
    positive("e-b", c.e_b, false)?;
    if c.threads == Some(0) {
        return usage("threads must be >= 1".into());
    }
    let mut params = d.params;
    if let Some(e_b) = c.e_b {
        params.e_b = e_b;
        params.delta_xl = e_b / 2.0;
    }
    params.gamma_x = c.gamma_x.unwrap_or(params.gamma_x);
    params.gamma_b = c.gamma_b.unwrap_or(params.gamma_b);
    Ok(RunConfig {
        mode,
        fwhm,
        fss_uev,
        alpha_h,
        shapes,
        theta: c.theta,
        tau_window_ps: c.tau_window_ps,
        method: match (c.method, c.brute_force) {
            (Some(m), _) => m.into(),
            (None, Some(true)) => Method::BruteForce,
            (None, _) => d.method,
        },
        dt_pulse: c.dt_pulse.unwrap_or(d.dt_pulse),
        t_max: c.t_max,
        threads: c.threads,
        out: c.out.unwrap_or(d.out),
        omit_timing: c.omit_timing.unwrap_or(false),
        max_deviation: c.max_deviation,
        params,
        window: d.window,
    })
}
