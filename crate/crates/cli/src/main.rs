mod args;

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use eit_core::sweep::{run_sweep, Axis, SweepSpec};
use eit_core::validate::{run_validation, ValidationSettings};
use eit_core::{evaluate, Complex64, CouplingState, EitConfig, EitError, TruncationPolicy};

use args::{Cli, Command, ComputeArgs, ConfigFile, Format, ModelArgs, SweepArgs, ValidateArgs};

const EXIT_INVALID: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_VALIDATION: u8 = 4;
const EXIT_IO: u8 = 1;

#[derive(Debug)]
enum Failure {
    Model(EitError),
    Io(String),
    Validation,
}

impl From<EitError> for Failure {
    fn from(e: EitError) -> Self {
        Failure::Model(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Compute(a) => compute(a),
        Command::Sweep(a) => sweep(a),
        Command::Validate(a) => validate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Model(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_INVALID
            })
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_IO)
        }
        Err(Failure::Validation) => ExitCode::from(EXIT_VALIDATION),
    }
}

fn read_config(path: Option<&Path>) -> Result<ConfigFile, Failure> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| EitError::Domain(format!("bad config {}: {e}", path.display())).into())
}

/// Fully resolved model: fixed parameters plus probe/coupling states.
struct Model {
    cfg: EitConfig,
    omega: f64,
    probe: eit_core::ProbeState,
    coupling: CouplingState,
    trunc: TruncationPolicy,
}

fn resolve_model(m: &ModelArgs, base: Option<&SweepSpec>) -> Result<Model, EitError> {
    let base_cfg = base.map(|s| s.cfg);
    let omega_c = match &m.omega_c {
        Some(s) => args::parse_complex(s, "omega-c")?,
        None => base_cfg.map_or(Complex64::new(0.5, 0.0), |c| c.omega_c),
    };
    let g =
        m.g.or(base_cfg.map(|c| c.g))
            .unwrap_or(EitConfig::DEFAULT_G);
    let cfg = EitConfig::new(
        m.gamma0.or(base_cfg.map(|c| c.gamma0)).unwrap_or(0.0),
        omega_c,
        m.alpha.or(base_cfg.map(|c| c.alpha)).unwrap_or(200.0),
        g,
    )?;
    let probe = match (&m.probe, base) {
        (Some(s), _) => args::parse_probe(s)?,
        (None, Some(spec)) => spec.probe,
        (None, None) => eit_core::ProbeState::coherent(Complex64::new(1.0, 0.0)),
    };
    let beta_c = omega_c / g;
    let coupling = match (&m.coupling, base) {
        (Some(s), _) => args::parse_coupling(s, beta_c)?,
        (None, Some(spec)) => match spec.coupling {
            CouplingState::Coherent { .. } => CouplingState::coherent(beta_c),
            CouplingState::SqueezedCoherent { r, theta, .. } => {
                CouplingState::squeezed(beta_c, r, theta)?
            }
        },
        (None, None) => CouplingState::coherent(beta_c),
    };
    let trunc = match m.dim {
        Some(d) => TruncationPolicy::with_dim(d),
        None => TruncationPolicy::default(),
    };
    Ok(Model {
        cfg,
        omega: m.omega.or(base.map(|s| s.omega)).unwrap_or(0.0),
        probe,
        coupling,
        trunc,
    })
}

fn compute(a: ComputeArgs) -> Result<(), Failure> {
    let (file_model, _) = read_config(a.config.as_deref())?.split();
    let model = resolve_model(&a.model.or(file_model), None)?;
    let mut result = evaluate(
        &model.cfg,
        model.omega,
        &model.probe,
        &model.coupling,
        &model.trunc,
    )?;
    if !a.rho {
        result.rho = None;
    }
    emit(&to_json(&result)?)
}

fn to_json(value: &impl serde::Serialize) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes to standard output; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<(), Failure> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(Failure::Io(e.to_string())),
        _ => Ok(()),
    }
}

fn build_sweep(a: SweepArgs) -> Result<(SweepSpec, Format, Option<std::path::PathBuf>), Failure> {
    let (file_model, file_grid) = read_config(a.config.as_deref())?.split();
    let model_args = a.model.or(file_model);
    let grid = a.grid.or(file_grid);

    let preset = grid.preset.as_deref().map(args::parse_preset).transpose()?;
    let base = preset.map(|p| p.spec_with_g(model_args.g.unwrap_or(EitConfig::DEFAULT_G)));
    let model = resolve_model(&model_args, base.as_ref())?;

    let axis = match (&grid.axis, &base) {
        (Some(s), _) => args::parse_axis(s)?,
        (None, Some(spec)) => spec.axis,
        (None, None) => Axis::Omega,
    };
    let range = match (&grid.range, &base) {
        (Some(s), _) => args::parse_range(s, axis, grid.log)?,
        (None, Some(spec)) if spec.axis == axis && !grid.log => spec.range,
        _ => args::default_range(axis, grid.log),
    };
    let outputs = match &grid.outputs {
        Some(s) => args::parse_outputs(s)?,
        None => Default::default(),
    };
    let spec = SweepSpec {
        axis,
        range,
        cfg: model.cfg,
        omega: model.omega,
        probe: model.probe,
        coupling: model.coupling,
        outputs,
        trunc: model.trunc,
        preset: preset.map(|p| p.name().to_string()),
    };
    Ok((spec, grid.format.unwrap_or(Format::Csv), grid.out))
}

fn sweep(a: SweepArgs) -> Result<(), Failure> {
    let (spec, format, out) = build_sweep(a)?;
    let result = run_sweep(&spec)?;
    let text = match format {
        Format::Csv => result.to_csv(),
        Format::Json => to_json(&result)?,
    };
    match out {
        Some(path) => write_whole(&path, &text),
        None => emit(&text),
    }
}

/// Writes `text` to `path`, leaving no partial file behind on failure.
fn write_whole(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| {
        let _ = fs::remove_file(path);
        Failure::Io(format!("cannot write {}: {e}", path.display()))
    })
}

fn validate(a: ValidateArgs) -> Result<(), Failure> {
    let defaults = ValidationSettings::default();
    let settings = ValidationSettings {
        alpha: a.alpha.unwrap_or(defaults.alpha),
        omega_c: a.omega_c.unwrap_or(defaults.omega_c),
        g: a.g.unwrap_or(defaults.g),
        tol: a.strict.unwrap_or(defaults.tol),
        dims: a.dims,
    };
    if settings.tol.is_nan() || settings.tol <= 0.0 {
        return Err(EitError::Domain(format!("--strict must be > 0, got {}", settings.tol)).into());
    }
    let report = run_validation(&settings)?;
    if a.json {
        emit(&to_json(&report)?)?;
    } else {
        let mut text = String::new();
        let _ = writeln!(
            text,
            "alpha={} omega_c={} g={} tol={:e}",
            settings.alpha, settings.omega_c, settings.g, settings.tol
        );
        let _ = writeln!(
            text,
            "{:<14} {:<16} {:>8} {:>6} {:>11} {:>11} {:>11} {:>11}",
            "probe", "coupling", "gamma0", "omega", "|T dev|", "|F dev|", "|dT dev|", "|dF dev|"
        );
        for o in &report.outcomes {
            let _ = writeln!(
                text,
                "{:<14} {:<16} {:>8} {:>6} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e}",
                eit_core::sweep::describe_probe(&o.case.probe),
                eit_core::sweep::describe_coupling(&o.case.coupling),
                o.case.gamma0,
                o.case.omega,
                o.t_dev(),
                o.f_dev(),
                o.dt_dev,
                o.df_dev
            );
        }
        let _ = writeln!(
            text,
            "max |T dev| = {:.3e}, max |F dev| = {:.3e}, max |dT dev| = {:.3e}, max |dF dev| = {:.3e}",
            report.max_t_dev, report.max_f_dev, report.max_dt_dev, report.max_df_dev
        );
        let _ = writeln!(text, "{}", if report.passed { "PASS" } else { "FAIL" });
        emit(&text)?;
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Validation)
    }
}
