//! Command-line flags, the optional JSON config file, and their merge.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::CliError;

pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Parser)]
#[command(name = "qgpart", version, about = "Quasi-Gaussian mixtures and optimal partition rules")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Command {
    /// Fit a mixture to CSV data and select the number of components.
    Fit(Flags),
    /// Label CSV points with the optimal rule.
    Classify(Flags),
    /// Error matrix and weighted risk of a rule.
    Risk(Flags),
    /// Grid discretization solved as a linear program.
    GridLp(Flags),
    /// Draw a sample from a model.
    Simulate(Flags),
    /// Repeated fits on fresh samples from a known model.
    Recovery(Flags),
    /// Chi-square test of radius/angle independence.
    PolarTest(Flags),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fit(_) => "fit",
            Command::Classify(_) => "classify",
            Command::Risk(_) => "risk",
            Command::GridLp(_) => "grid-lp",
            Command::Simulate(_) => "simulate",
            Command::Recovery(_) => "recovery",
            Command::PolarTest(_) => "polar-test",
        }
    }

    pub fn flags(&self) -> &Flags {
        match self {
            Command::Fit(f)
            | Command::Classify(f)
            | Command::Risk(f)
            | Command::GridLp(f)
            | Command::Simulate(f)
            | Command::Recovery(f)
            | Command::PolarTest(f) => f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

/// Every flag any command accepts. Commands ignore flags they do not use.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Flags {
    /// JSON file supplying any of these flags; flags given on the command line win.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// CSV of observations, one per row.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Model JSON; repeat once per hypothesis.
    #[arg(long)]
    #[serde(default)]
    pub model: Vec<PathBuf>,
    /// Weight matrix JSON `{"v": [[...]]}`; unit weights when absent.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sample size (simulate) or draws per hypothesis (Monte Carlo risk).
    #[arg(long)]
    pub n: Option<usize>,
    /// Grid points per axis.
    #[arg(long)]
    pub grid_resolution: Option<usize>,
    /// Grid box as `lo:hi` per axis, comma separated.
    #[arg(long)]
    pub bounds: Option<String>,
    #[arg(long)]
    pub n_min: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Relative log-likelihood gain below which EM stops.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Disable point-mass detection in `fit`.
    #[arg(long)]
    #[serde(default)]
    pub no_atom_detection: bool,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub significance: Option<f64>,
    /// `optimal` or `constant:<label>`.
    #[arg(long)]
    pub rule: Option<String>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Sample sizes for `recovery`, comma separated.
    #[arg(long)]
    pub n_grid: Option<String>,
}

fn read_config(path: &Path) -> Result<Flags, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

impl Flags {
    /// Fills every flag left unset on the command line from the config file.
    pub fn resolve(&self) -> Result<Flags, CliError> {
        let Some(path) = &self.config else {
            return Ok(self.clone());
        };
        let file = read_config(path)?;
        Ok(Flags {
            config: None,
            input: self.input.clone().or(file.input),
            model: if self.model.is_empty() { file.model } else { self.model.clone() },
            weights: self.weights.clone().or(file.weights),
            output: self.output.clone().or(file.output),
            seed: self.seed.or(file.seed),
            n: self.n.or(file.n),
            grid_resolution: self.grid_resolution.or(file.grid_resolution),
            bounds: self.bounds.clone().or(file.bounds),
            n_min: self.n_min.or(file.n_min),
            n_max: self.n_max.or(file.n_max),
            restarts: self.restarts.or(file.restarts),
            max_iterations: self.max_iterations.or(file.max_iterations),
            tolerance: self.tolerance.or(file.tolerance),
            no_atom_detection: self.no_atom_detection || file.no_atom_detection,
            bins: self.bins.or(file.bins),
            significance: self.significance.or(file.significance),
            rule: self.rule.clone().or(file.rule),
            method: self.method.or(file.method),
            format: self.format.or(file.format),
            trials: self.trials.or(file.trials),
            n_grid: self.n_grid.clone().or(file.n_grid),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn input(&self) -> Result<&Path, CliError> {
        self.input.as_deref().ok_or_else(|| CliError::usage("--input: required"))
    }
}

/// Shell-quotes `arg` when it contains anything beyond a safe character set.
fn quote(arg: &str) -> String {
    let safe = !arg.is_empty() && arg.chars().all(|c| c.is_ascii_alphanumeric() || "-_./:,=+@%".contains(c));
    if safe {
        arg.to_string()
    } else {
        format!("'{}'", arg.replace('\'', r"'\''"))
    }
}

/// Builds the command line that reproduces a run, one resolved flag at a time.
pub struct Reproduction {
    parts: Vec<String>,
}

impl Reproduction {
    pub fn new(command: &str) -> Self {
        Reproduction {
            parts: vec!["qgpart".into(), command.into()],
        }
    }

    pub fn flag(&mut self, name: &str, value: impl ToString) -> &mut Self {
        self.parts.push(format!("--{name}"));
        self.parts.push(quote(&value.to_string()));
        self
    }

    pub fn path(&mut self, name: &str, value: &Path) -> &mut Self {
        self.flag(name, value.display())
    }

    pub fn switch(&mut self, name: &str) -> &mut Self {
        self.parts.push(format!("--{name}"));
        self
    }

    pub fn line(&self) -> String {
        self.parts.join(" ")
    }
}
