//! Run configuration: defaults, config file, command-line flags, and the
//! provenance hash stamped into every output table.
//!
//! Precedence: command-line flags override config-file values, which
//! override built-in defaults.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Preprocess,
    Fit,
    Network,
    Simulate,
}

impl Command {
    fn parse(s: &str) -> CliResult<Self> {
        match s {
            "preprocess" => Ok(Command::Preprocess),
            "fit" => Ok(Command::Fit),
            "network" => Ok(Command::Network),
            "simulate" => Ok(Command::Simulate),
            _ => Err(CliError::Config(format!("unknown command {s:?}; {USAGE}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Formats {
    pub dot: bool,
    pub json: bool,
    pub csv: bool,
}

impl Default for Formats {
    fn default() -> Self {
        Formats {
            dot: true,
            json: true,
            csv: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub p: Option<usize>,
    pub p_max: usize,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub lambda3: Option<f64>,
    pub lambda4: Option<f64>,
    pub grid: bool,
    pub forward_fill: bool,
    /// Cap on the ADF augmentation order (defaults to the Schwert rule).
    pub adf_max_lag: Option<usize>,
    pub threads: usize,
    pub seed: u64,
    pub tol_outer: f64,
    pub outer_max: usize,
    pub mu: f64,
    pub formats: Formats,
    pub sim_classes: usize,
    pub sim_series: usize,
    pub sim_obs: usize,
    pub sim_density: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            out_dir: PathBuf::from("mcvar_out"),
            p: None,
            p_max: 5,
            lambda1: None,
            lambda2: None,
            lambda3: None,
            lambda4: None,
            grid: false,
            forward_fill: false,
            adf_max_lag: None,
            threads: 1,
            seed: 0,
            tol_outer: 1e-4,
            outer_max: 25,
            mu: 1e-4,
            formats: Formats::default(),
            sim_classes: 3,
            sim_series: 10,
            sim_obs: 500,
            sim_density: 0.1,
        }
    }
}

pub const USAGE: &str = "usage: mcvar <preprocess|fit|network|simulate> [--config FILE] \
[--input FILE] [--out-dir DIR] [--p N] [--p-max N] [--lambda1 X] [--lambda2 X] [--lambda3 X] \
[--lambda4 X] [--grid] [--forward-fill] [--adf-max-lag N] [--threads N] [--seed N] [--tol-outer X] [--mu X] \
[--outer-max N] [--format dot,json,csv] [--classes K] [--series J] [--obs T] [--density X]";

impl RunConfig {
    /// Parses the command line: subcommand first, then flags. A
    /// `--config FILE` flag loads key=value pairs before flags are applied.
    pub fn from_args(args: &[String]) -> CliResult<(Command, RunConfig)> {
        let mut iter = args.iter().peekable();
        let first = iter
            .next()
            .ok_or_else(|| CliError::Config(format!("missing command; {USAGE}")))?;
        if first == "--help" || first == "-h" {
            return Err(CliError::Config(USAGE.to_string()));
        }
        let command = Command::parse(first)?;

        // collect raw flag assignments first so --config is applied below them
        let mut pairs: Vec<(String, String)> = Vec::new();
        let mut config_file: Option<PathBuf> = None;
        while let Some(arg) = iter.next() {
            let (key, inline_value) = match arg.strip_prefix("--") {
                Some(rest) => match rest.split_once('=') {
                    Some((k, v)) => (k.to_string(), Some(v.to_string())),
                    None => (rest.to_string(), None),
                },
                None => {
                    return Err(CliError::Config(format!(
                        "unexpected argument {arg:?}; {USAGE}"
                    )))
                }
            };
            let boolean = matches!(key.as_str(), "grid" | "forward-fill" | "help");
            let value = match inline_value {
                Some(v) => v,
                None if boolean => "true".to_string(),
                None => iter
                    .next()
                    .cloned()
                    .ok_or_else(|| CliError::Config(format!("flag --{key} needs a value")))?,
            };
            if key == "help" {
                return Err(CliError::Config(USAGE.to_string()));
            }
            if key == "config" {
                config_file = Some(PathBuf::from(value));
            } else {
                pairs.push((key, value));
            }
        }

        let mut config = RunConfig::default();
        if let Some(path) = config_file {
            let text = std::fs::read_to_string(&path).map_err(|e| {
                CliError::Config(format!("cannot read config file {}: {e}", path.display()))
            })?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    CliError::Config(format!(
                        "config file {} line {}: expected key=value",
                        path.display(),
                        lineno + 1
                    ))
                })?;
                config.apply(key.trim(), value.trim())?;
            }
        }
        for (key, value) in &pairs {
            config.apply(key, value)?;
        }
        config.validate(command)?;
        Ok((command, config))
    }

    fn apply(&mut self, key: &str, value: &str) -> CliResult<()> {
        let bad_num =
            |key: &str, value: &str| CliError::Config(format!("invalid value {value:?} for {key}"));
        match key {
            "input" => self.input = Some(PathBuf::from(value)),
            "out-dir" | "out_dir" => self.out_dir = PathBuf::from(value),
            "p" => self.p = Some(value.parse().map_err(|_| bad_num(key, value))?),
            "p-max" | "p_max" => self.p_max = value.parse().map_err(|_| bad_num(key, value))?,
            "lambda1" => self.lambda1 = Some(value.parse().map_err(|_| bad_num(key, value))?),
            "lambda2" => self.lambda2 = Some(value.parse().map_err(|_| bad_num(key, value))?),
            "lambda3" => self.lambda3 = Some(value.parse().map_err(|_| bad_num(key, value))?),
            "lambda4" => self.lambda4 = Some(value.parse().map_err(|_| bad_num(key, value))?),
            "grid" => self.grid = value.parse().map_err(|_| bad_num(key, value))?,
            "forward-fill" | "forward_fill" => {
                self.forward_fill = value.parse().map_err(|_| bad_num(key, value))?
            }
            "adf-max-lag" | "adf_max_lag" => {
                self.adf_max_lag = Some(value.parse().map_err(|_| bad_num(key, value))?)
            }
            "threads" => self.threads = value.parse().map_err(|_| bad_num(key, value))?,
            "seed" => self.seed = value.parse().map_err(|_| bad_num(key, value))?,
            "tol-outer" | "tol_outer" => {
                self.tol_outer = value.parse().map_err(|_| bad_num(key, value))?
            }
            "outer-max" | "outer_max" => {
                self.outer_max = value.parse().map_err(|_| bad_num(key, value))?
            }
            "mu" => self.mu = value.parse().map_err(|_| bad_num(key, value))?,
            "format" => {
                let mut formats = Formats {
                    dot: false,
                    json: false,
                    csv: false,
                };
                for part in value.split(',') {
                    match part.trim() {
                        "dot" => formats.dot = true,
                        "json" => formats.json = true,
                        "csv" => formats.csv = true,
                        other => {
                            return Err(CliError::Config(format!(
                                "unknown format {other:?} (expected dot, json or csv)"
                            )))
                        }
                    }
                }
                self.formats = formats;
            }
            "classes" => self.sim_classes = value.parse().map_err(|_| bad_num(key, value))?,
            "series" => self.sim_series = value.parse().map_err(|_| bad_num(key, value))?,
            "obs" => self.sim_obs = value.parse().map_err(|_| bad_num(key, value))?,
            "density" => self.sim_density = value.parse().map_err(|_| bad_num(key, value))?,
            other => {
                return Err(CliError::Config(format!(
                    "unknown option --{other}; {USAGE}"
                )))
            }
        }
        Ok(())
    }

    fn validate(&self, command: Command) -> CliResult<()> {
        let any_lambda = self.lambda1.is_some()
            || self.lambda2.is_some()
            || self.lambda3.is_some()
            || self.lambda4.is_some();
        if self.grid && any_lambda {
            return Err(CliError::Config(
                "--grid and explicit --lambda1..4 are mutually exclusive".to_string(),
            ));
        }
        if command == Command::Fit && !self.grid && !any_lambda {
            return Err(CliError::Config(
                "fit needs either explicit penalties (--lambda1..4) or --grid".to_string(),
            ));
        }
        if self.threads == 0 {
            return Err(CliError::Config("--threads must be at least 1".to_string()));
        }
        if self.p == Some(0) || self.p_max == 0 {
            return Err(CliError::Config(
                "lag orders must be at least 1".to_string(),
            ));
        }
        if self.tol_outer.is_nan() || self.tol_outer <= 0.0 || self.mu.is_nan() || self.mu <= 0.0 {
            return Err(CliError::Config(
                "--tol-outer and --mu must be positive".to_string(),
            ));
        }
        if matches!(
            command,
            Command::Preprocess | Command::Fit | Command::Network
        ) && self.input.is_none()
        {
            return Err(CliError::Config(
                "--input is required for this command".to_string(),
            ));
        }
        if command == Command::Simulate {
            if self.sim_classes == 0 || self.sim_series == 0 || self.sim_obs < 10 {
                return Err(CliError::Config(
                    "simulate needs --classes >= 1, --series >= 1, --obs >= 10".to_string(),
                ));
            }
            if !(0.0..=1.0).contains(&self.sim_density) {
                return Err(CliError::Config("--density must lie in [0, 1]".to_string()));
            }
        }
        Ok(())
    }

    /// Resolved penalties for a direct (non-grid) fit; unset weights are 0.
    pub fn penalties(&self) -> mcvar::Result<mcvar::PenaltyConfig> {
        mcvar::PenaltyConfig::new(
            self.lambda1.unwrap_or(0.0),
            self.lambda2.unwrap_or(0.0),
            self.lambda3.unwrap_or(0.0),
            self.lambda4.unwrap_or(0.0),
        )
    }

    pub fn fit_options(&self) -> mcvar::estimator::FitOptions {
        mcvar::estimator::FitOptions {
            outer_tol: self.tol_outer,
            outer_max: self.outer_max,
            spg: mcvar::spg::SpgOptions {
                mu: self.mu,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    /// Hash of the semantic configuration (paths excluded), stamped into
    /// output headers for provenance.
    pub fn hash(&self) -> String {
        let mut fields = BTreeMap::new();
        fields.insert("p", format!("{:?}", self.p));
        fields.insert("p_max", self.p_max.to_string());
        fields.insert("lambda1", format!("{:?}", self.lambda1));
        fields.insert("lambda2", format!("{:?}", self.lambda2));
        fields.insert("lambda3", format!("{:?}", self.lambda3));
        fields.insert("lambda4", format!("{:?}", self.lambda4));
        fields.insert("grid", self.grid.to_string());
        fields.insert("forward_fill", self.forward_fill.to_string());
        fields.insert("adf_max_lag", format!("{:?}", self.adf_max_lag));
        fields.insert("seed", self.seed.to_string());
        fields.insert("tol_outer", format!("{:e}", self.tol_outer));
        fields.insert("outer_max", self.outer_max.to_string());
        fields.insert("mu", format!("{:e}", self.mu));
        fields.insert("sim_classes", self.sim_classes.to_string());
        fields.insert("sim_series", self.sim_series.to_string());
        fields.insert("sim_obs", self.sim_obs.to_string());
        fields.insert("sim_density", format!("{:e}", self.sim_density));
        let canonical: String = fields.iter().map(|(k, v)| format!("{k}={v};")).collect();
        // FNV-1a 64
        let mut hash: u64 = 0xcbf29ce484222325;
        for byte in canonical.bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
        format!("{hash:016x}")
    }

    /// Header comment stamped as the first line of every output table.
    pub fn header_comment(&self) -> String {
        format!(
            "# mcvar {} config={}",
            env!("CARGO_PKG_VERSION"),
            self.hash()
        )
    }
}
