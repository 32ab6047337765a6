//! Command-line flags, the optional TOML config file, and state descriptors.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eit_core::sweep::{Axis, GridRange, Outputs, Preset, Spacing};
use eit_core::{Complex64, CouplingState, EitError, ProbeState, Result};
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(
    name = "eit",
    version,
    about = "Probe transmittance and fidelity in an EIT medium with a quantized coupling field"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one parameter point and print the result as JSON.
    Compute(ComputeArgs),
    /// Evaluate a grid along omega or gamma0 and emit CSV or JSON.
    Sweep(SweepArgs),
    /// Compare the analytic engine against the truncated-Fock-space oracle.
    Validate(ValidateArgs),
}

/// Model parameters shared by `compute` and `sweep`. Every field may also come
/// from the config file; flags win.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// Ground-state dephasing rate γ₀ (units of Γ).
    #[arg(long, allow_hyphen_values = true)]
    pub gamma0: Option<f64>,
    /// Two-photon detuning ω (units of Γ).
    #[arg(long, allow_hyphen_values = true)]
    pub omega: Option<f64>,
    /// Optical depth α.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Coupling Rabi frequency, `re` or `re,im` (units of Γ).
    #[arg(long)]
    pub omega_c: Option<String>,
    /// Single-photon coupling constant g.
    #[arg(long, allow_hyphen_values = true)]
    pub g: Option<f64>,
    /// Probe state: `coherent:β`, `coherent:re,im` or `fock:n`.
    #[arg(long)]
    pub probe: Option<String>,
    /// Coupling state: `coherent`, `coherent:β_c` or `squeezed:r,θ`.
    #[arg(long)]
    pub coupling: Option<String>,
    /// Fixed probe basis size instead of the automatic choice.
    #[arg(long)]
    pub dim: Option<usize>,
}

impl ModelArgs {
    pub fn or(self, other: ModelArgs) -> ModelArgs {
        ModelArgs {
            gamma0: self.gamma0.or(other.gamma0),
            omega: self.omega.or(other.omega),
            alpha: self.alpha.or(other.alpha),
            omega_c: self.omega_c.or(other.omega_c),
            g: self.g.or(other.g),
            probe: self.probe.or(other.probe),
            coupling: self.coupling.or(other.coupling),
            dim: self.dim.or(other.dim),
        }
    }
}

#[derive(Debug, Args)]
pub struct ComputeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// TOML file with default values for any of the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Include the output density matrix in the JSON.
    #[arg(long)]
    pub rho: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GridArgs {
    /// Swept parameter: `omega` or `gamma0`.
    #[arg(long)]
    pub axis: Option<String>,
    /// Grid as `start:stop:points`.
    #[arg(long, allow_hyphen_values = true)]
    pub range: Option<String>,
    /// Logarithmic spacing (a γ₀ grid also gets a leading 0).
    #[arg(long)]
    pub log: bool,
    /// Named preset: fig2a, fig2b, ..., fig6b.
    #[arg(long)]
    pub preset: Option<String>,
    /// Columns to fill, comma separated from T,F,dT,dF.
    #[arg(long)]
    pub outputs: Option<String>,
    /// Output format.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl GridArgs {
    pub fn or(self, other: GridArgs) -> GridArgs {
        GridArgs {
            axis: self.axis.or(other.axis),
            range: self.range.or(other.range),
            log: self.log || other.log,
            preset: self.preset.or(other.preset),
            outputs: self.outputs.or(other.outputs),
            format: self.format.or(other.format),
            out: self.out.or(other.out),
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// TOML file with default values for any of the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Optical depth α of the validation instances.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Coupling Rabi frequency of the validation instances.
    #[arg(long)]
    pub omega_c: Option<f64>,
    /// Single-photon coupling constant g.
    #[arg(long)]
    pub g: Option<f64>,
    /// Deviation bound on T and F (default 1e-3).
    #[arg(long)]
    pub strict: Option<f64>,
    /// Force both oracle basis sizes.
    #[arg(long)]
    pub dims: Option<usize>,
    /// Print the full report as JSON.
    #[arg(long)]
    pub json: bool,
}

/// Config file layout: one top-level key per long flag name.
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConfigFile {
    gamma0: Option<f64>,
    omega: Option<f64>,
    alpha: Option<f64>,
    omega_c: Option<String>,
    g: Option<f64>,
    probe: Option<String>,
    coupling: Option<String>,
    dim: Option<usize>,
    axis: Option<String>,
    range: Option<String>,
    #[serde(default)]
    log: bool,
    preset: Option<String>,
    outputs: Option<String>,
    format: Option<Format>,
    out: Option<PathBuf>,
}

impl ConfigFile {
    pub fn split(self) -> (ModelArgs, GridArgs) {
        let model = ModelArgs {
            gamma0: self.gamma0,
            omega: self.omega,
            alpha: self.alpha,
            omega_c: self.omega_c,
            g: self.g,
            probe: self.probe,
            coupling: self.coupling,
            dim: self.dim,
        };
        let grid = GridArgs {
            axis: self.axis,
            range: self.range,
            log: self.log,
            preset: self.preset,
            outputs: self.outputs,
            format: self.format,
            out: self.out,
        };
        (model, grid)
    }
}

fn bad(what: &str, got: &str) -> EitError {
    EitError::Domain(format!("cannot parse {what} '{got}'"))
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| bad(what, s))
}

/// `re` or `re,im`.
pub fn parse_complex(s: &str, what: &str) -> Result<Complex64> {
    match s.split_once(',') {
        Some((re, im)) => Ok(Complex64::new(parse_f64(re, what)?, parse_f64(im, what)?)),
        None => Ok(Complex64::new(parse_f64(s, what)?, 0.0)),
    }
}

pub fn parse_probe(s: &str) -> Result<ProbeState> {
    let (kind, value) = s.split_once(':').ok_or_else(|| bad("probe", s))?;
    match kind {
        "coherent" => Ok(ProbeState::coherent(parse_complex(
            value,
            "probe amplitude",
        )?)),
        "fock" => value
            .trim()
            .parse()
            .map(ProbeState::fock)
            .map_err(|_| bad("photon number", value)),
        _ => Err(bad("probe", s)),
    }
}

/// `beta_c` is used when the descriptor does not carry its own amplitude.
pub fn parse_coupling(s: &str, beta_c: Complex64) -> Result<CouplingState> {
    let (kind, value) = match s.split_once(':') {
        Some((k, v)) => (k, Some(v)),
        None => (s, None),
    };
    match (kind, value) {
        ("coherent", None) => Ok(CouplingState::coherent(beta_c)),
        ("coherent", Some(v)) => Ok(CouplingState::coherent(parse_complex(
            v,
            "coupling amplitude",
        )?)),
        ("squeezed", Some(v)) => {
            let (r, theta) = match v.split_once(',') {
                Some((r, t)) => (
                    parse_f64(r, "squeeze parameter")?,
                    parse_f64(t, "squeeze phase")?,
                ),
                None => (parse_f64(v, "squeeze parameter")?, 0.0),
            };
            CouplingState::squeezed(beta_c, r, theta)
        }
        _ => Err(bad("coupling", s)),
    }
}

pub fn parse_outputs(s: &str) -> Result<Outputs> {
    let mut o = Outputs {
        t: false,
        f: false,
        dt: false,
        df: false,
    };
    for item in s.split(',').map(str::trim) {
        match item {
            "T" => o.t = true,
            "F" => o.f = true,
            "dT" => o.dt = true,
            "dF" => o.df = true,
            _ => return Err(bad("output column", item)),
        }
    }
    Ok(o)
}

pub fn parse_preset(s: &str) -> Result<Preset> {
    s.parse()
}

pub fn parse_axis(s: &str) -> Result<Axis> {
    s.parse()
}

/// Grid for `axis` when no range is given.
pub fn default_range(axis: Axis, log: bool) -> GridRange {
    match (axis, log) {
        (Axis::Omega, false) => GridRange::linear(0.0, 0.05, 51),
        (Axis::Omega, true) => GridRange::log_with_zero(1e-6, 0.05, 51),
        (Axis::Gamma0, _) => GridRange::log_with_zero(1e-6, 1e-1, 51),
    }
}

pub fn parse_range(s: &str, axis: Axis, log: bool) -> Result<GridRange> {
    let mut range = GridRange::parse_linear(s)?;
    if log {
        range.spacing = Spacing::Log;
        range.prepend_zero = axis == Axis::Gamma0;
    }
    Ok(range)
}
