//! Parameter sweeps and the named presets.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::coefficients::EitConfig;
use crate::engine::{self, ProbeState, TruncationPolicy};
use crate::error::{EitError, Result};
use crate::moments::CouplingState;
use crate::Complex64;

/// CSV column header, in output order.
pub const CSV_HEADER: &str = "omega,gamma0,T,F,dT,dF,c1_re,c1_im,g,n_p0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Axis {
    Omega,
    Gamma0,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Omega => "omega",
            Axis::Gamma0 => "gamma0",
        })
    }
}

impl FromStr for Axis {
    type Err = EitError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "omega" => Ok(Axis::Omega),
            "gamma0" => Ok(Axis::Gamma0),
            other => Err(EitError::Sweep(format!("unknown axis '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Spacing {
    Linear,
    Log,
}

/// Grid along the sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridRange {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub spacing: Spacing,
    /// Put an extra 0 in front of the grid (used with log spacing).
    pub prepend_zero: bool,
}

impl GridRange {
    pub fn linear(start: f64, stop: f64, points: usize) -> Self {
        GridRange {
            start,
            stop,
            points,
            spacing: Spacing::Linear,
            prepend_zero: false,
        }
    }

    pub fn log_with_zero(start: f64, stop: f64, points: usize) -> Self {
        GridRange {
            start,
            stop,
            points,
            spacing: Spacing::Log,
            prepend_zero: true,
        }
    }

    /// Parses `start:stop:points`.
    pub fn parse_linear(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || EitError::Sweep(format!("range must be start:stop:points, got '{s}'"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let start = parts[0].trim().parse().map_err(|_| bad())?;
        let stop = parts[1].trim().parse().map_err(|_| bad())?;
        let points = parts[2].trim().parse().map_err(|_| bad())?;
        Ok(GridRange::linear(start, stop, points))
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(EitError::Sweep(format!(
                "need at least 2 points, got {}",
                self.points
            )));
        }
        if !(self.start.is_finite() && self.stop.is_finite() && self.start < self.stop) {
            return Err(EitError::Sweep(format!(
                "range start {} must be below stop {}",
                self.start, self.stop
            )));
        }
        if self.spacing == Spacing::Log && self.start <= 0.0 {
            return Err(EitError::Sweep("log spacing needs start > 0".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let last = (self.points - 1) as f64;
        let mut out = Vec::with_capacity(self.points + 1);
        if self.prepend_zero {
            out.push(0.0);
        }
        for i in 0..self.points {
            let frac = i as f64 / last;
            let v = match self.spacing {
                Spacing::Linear => self.start + (self.stop - self.start) * frac,
                Spacing::Log => {
                    let (a, b) = (self.start.log10(), self.stop.log10());
                    10f64.powf(a + (b - a) * frac)
                }
            };
            out.push(v);
        }
        // pin the end points exactly
        let n = out.len();
        out[n - 1] = self.stop;
        out[n - self.points] = self.start;
        out
    }
}

/// Which quantities end up in the output rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Outputs {
    pub t: bool,
    pub f: bool,
    pub dt: bool,
    pub df: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs {
            t: true,
            f: true,
            dt: true,
            df: true,
        }
    }
}

/// A complete sweep description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub axis: Axis,
    pub range: GridRange,
    /// Fixed parameters; the swept one is overwritten per point.
    pub cfg: EitConfig,
    /// Two-photon detuning used when sweeping γ₀.
    pub omega: f64,
    pub probe: ProbeState,
    pub coupling: CouplingState,
    pub outputs: Outputs,
    pub trunc: TruncationPolicy,
    /// Preset name, when the sweep came from one.
    pub preset: Option<String>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.range.validate()?;
        self.cfg.validate()?;
        if self.axis == Axis::Gamma0 && self.range.start < 0.0 {
            return Err(EitError::Sweep("gamma0 grid must be non-negative".into()));
        }
        if self.probe.mean_photons() <= 0.0 {
            return Err(EitError::Sweep("probe must carry photons".into()));
        }
        Ok(())
    }

    /// (ω, γ₀) at every grid point, in output order.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.range
            .values()
            .into_iter()
            .map(|v| match self.axis {
                Axis::Omega => (v, self.cfg.gamma0),
                Axis::Gamma0 => (self.omega, v),
            })
            .collect()
    }

    /// One-line `key=value` summary of every resolved parameter.
    pub fn describe(&self) -> String {
        let r = &self.range;
        let mut s = String::new();
        if let Some(p) = &self.preset {
            let _ = write!(s, "preset={p} ");
        }
        let spacing = match r.spacing {
            Spacing::Linear => "linear",
            Spacing::Log => "log",
        };
        let _ = write!(
            s,
            "axis={} range={}:{}:{} spacing={} prepend_zero={} ",
            self.axis, r.start, r.stop, r.points, spacing, r.prepend_zero
        );
        match self.axis {
            Axis::Omega => {
                let _ = write!(s, "gamma0={} ", self.cfg.gamma0);
            }
            Axis::Gamma0 => {
                let _ = write!(s, "omega={} ", self.omega);
            }
        }
        let _ = write!(
            s,
            "alpha={} omega_c={}{:+}i g={} gamma={} probe={} coupling={}",
            self.cfg.alpha,
            self.cfg.omega_c.re,
            self.cfg.omega_c.im,
            self.cfg.g,
            EitConfig::GAMMA,
            describe_probe(&self.probe),
            describe_coupling(&self.coupling),
        );
        s
    }
}

pub fn describe_probe(probe: &ProbeState) -> String {
    match *probe {
        ProbeState::Coherent { beta_p } if beta_p.im == 0.0 => format!("coherent:{}", beta_p.re),
        ProbeState::Coherent { beta_p } => format!("coherent:{},{}", beta_p.re, beta_p.im),
        ProbeState::Fock { n_p0 } => format!("fock:{n_p0}"),
    }
}

pub fn describe_coupling(coupling: &CouplingState) -> String {
    match *coupling {
        CouplingState::Coherent { .. } => "coherent".to_string(),
        CouplingState::SqueezedCoherent { r, theta, .. } => format!("squeezed:{r},{theta}"),
    }
}

/// One output row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub omega: f64,
    pub gamma0: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "dT")]
    pub dt: f64,
    #[serde(rename = "dF")]
    pub df: f64,
    pub c1_re: f64,
    pub c1_im: f64,
    pub g: f64,
    pub n_p0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn column(&self, pick: impl Fn(&SweepRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(pick).collect()
    }

    /// CSV text: a `#` provenance line, the header, then one row per point.
    pub fn to_csv(&self) -> String {
        let o = self.spec.outputs;
        let cell = |on: bool, v: f64| if on { v.to_string() } else { String::new() };
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.spec.describe());
        let _ = writeln!(out, "{CSV_HEADER}");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.omega,
                r.gamma0,
                cell(o.t, r.t),
                cell(o.f, r.f),
                cell(o.dt, r.dt),
                cell(o.df, r.df),
                r.c1_re,
                r.c1_im,
                r.g,
                r.n_p0
            );
        }
        out
    }
}

/// Evaluates every grid point (in parallel) and returns rows in grid order.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let rows = spec
        .points()
        .into_par_iter()
        .map(|(omega, gamma0)| evaluate_row(spec, omega, gamma0))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        spec: spec.clone(),
        rows,
    })
}

fn evaluate_row(spec: &SweepSpec, omega: f64, gamma0: f64) -> Result<SweepRow> {
    let cfg = EitConfig { gamma0, ..spec.cfg };
    let r = engine::evaluate_point(&cfg, omega, &spec.probe, &spec.coupling, &spec.trunc)?;
    Ok(SweepRow {
        omega,
        gamma0,
        t: r.t,
        f: r.f,
        dt: r.delta_t,
        df: r.delta_f,
        c1_re: r.coefficients.c1.re,
        c1_im: r.coefficients.c1.im,
        g: cfg.g,
        n_p0: spec.probe.mean_photons(),
    })
}

/// Named reference sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig2a,
    Fig2b,
    Fig3a,
    Fig3b,
    Fig4a,
    Fig4b,
    Fig5a,
    Fig5b,
    Fig6a,
    Fig6b,
}

impl Preset {
    pub const ALL: [Preset; 10] = [
        Preset::Fig2a,
        Preset::Fig2b,
        Preset::Fig3a,
        Preset::Fig3b,
        Preset::Fig4a,
        Preset::Fig4b,
        Preset::Fig5a,
        Preset::Fig5b,
        Preset::Fig6a,
        Preset::Fig6b,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Fig2a => "fig2a",
            Preset::Fig2b => "fig2b",
            Preset::Fig3a => "fig3a",
            Preset::Fig3b => "fig3b",
            Preset::Fig4a => "fig4a",
            Preset::Fig4b => "fig4b",
            Preset::Fig5a => "fig5a",
            Preset::Fig5b => "fig5b",
            Preset::Fig6a => "fig6a",
            Preset::Fig6b => "fig6b",
        }
    }

    /// (α, Ω_c, mean probe photons, Fock probe?) for the preset.
    pub fn preset_values(&self) -> (f64, f64, f64, bool) {
        match self {
            Preset::Fig2a | Preset::Fig2b => (200.0, 0.5, 1.0, false),
            Preset::Fig3a | Preset::Fig3b => (200.0, 0.5, 1.0, true),
            Preset::Fig4a => (200.0, 0.5, 1.0, false),
            Preset::Fig4b => (200.0, 0.25, 1.0, false),
            Preset::Fig5a => (200.0, 0.5, 1.0, false),
            Preset::Fig5b => (1000.0, 0.5, 1.0, false),
            Preset::Fig6a => (200.0, 0.5, 1.0, false),
            Preset::Fig6b => (200.0, 0.5, 10.0, false),
        }
    }

    /// The sweep, with single-photon coupling constant `g`.
    pub fn spec_with_g(&self, g: f64) -> SweepSpec {
        let (alpha, omega_c, n, fock) = self.preset_values();
        let probe = if fock {
            ProbeState::fock(n as usize)
        } else {
            ProbeState::coherent_with_mean(n)
        };
        let (axis, range) = match self {
            Preset::Fig2a | Preset::Fig3a => (Axis::Omega, GridRange::linear(0.0, 0.05, 51)),
            Preset::Fig2b | Preset::Fig3b => (Axis::Gamma0, GridRange::linear(0.0, 0.05, 51)),
            _ => (Axis::Gamma0, GridRange::log_with_zero(1e-6, 1e-1, 51)),
        };
        let omega_c = Complex64::new(omega_c, 0.0);
        SweepSpec {
            axis,
            range,
            cfg: EitConfig {
                gamma0: 0.0,
                omega_c,
                alpha,
                g,
            },
            omega: 0.0,
            probe,
            coupling: CouplingState::coherent(omega_c / g),
            outputs: Outputs::default(),
            trunc: TruncationPolicy::default(),
            preset: Some(self.name().to_string()),
        }
    }

    pub fn spec(&self) -> SweepSpec {
        self.spec_with_g(EitConfig::DEFAULT_G)
    }
}

impl FromStr for Preset {
    type Err = EitError;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| EitError::Sweep(format!("unknown preset '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_values() {
        let g = GridRange::linear(0.0, 0.02, 5);
        assert_eq!(g.values(), vec![0.0, 0.005, 0.01, 0.015, 0.02]);
        let l = GridRange::log_with_zero(1e-6, 1e-1, 6);
        let v = l.values();
        assert_eq!(v.len(), 7);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[1], 1e-6);
        assert_eq!(v[6], 1e-1);
        assert!((v[3] - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn grid_validation() {
        assert!(GridRange::linear(0.0, 1.0, 1).validate().is_err());
        assert!(GridRange::linear(1.0, 0.0, 5).validate().is_err());
        assert!(GridRange::log_with_zero(0.0, 1.0, 5).validate().is_err());
        assert!(GridRange::parse_linear("0:0.02:5")
            .unwrap()
            .validate()
            .is_ok());
        assert!(GridRange::parse_linear("0:0.02").is_err());
    }

    #[test]
    fn preset_parameters() {
        let s = Preset::Fig2a.spec();
        assert_eq!((s.cfg.alpha, s.cfg.omega_c.re), (200.0, 0.5));
        assert_eq!(Preset::Fig4b.spec().cfg.omega_c.re, 0.25);
        assert_eq!(Preset::Fig5b.spec().cfg.alpha, 1000.0);
        assert!((Preset::Fig6b.spec().probe.mean_photons() - 10.0).abs() < 1e-12);
        assert_eq!(Preset::Fig3a.spec().probe, ProbeState::fock(1));
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
    }

    #[test]
    fn omega_sweep_rows() {
        let mut spec = Preset::Fig2a.spec();
        spec.range = GridRange::parse_linear("0:0.02:5").unwrap();
        let res = run_sweep(&spec).unwrap();
        assert_eq!(res.rows.len(), 5);
        for w in res.rows.windows(2) {
            assert!(w[1].t < w[0].t);
        }
        let csv = res.to_csv();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("# preset=fig2a"));
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        assert_eq!(lines.count(), 5);
    }

    #[test]
    fn fock_preset_has_no_deltas() {
        let res = run_sweep(&Preset::Fig3a.spec()).unwrap();
        assert!(res.rows.iter().all(|r| r.dt == 0.0 && r.df == 0.0));
    }
}
