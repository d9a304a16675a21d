//! Config-file front end: parse experiment descriptions, run them, and write
//! CSV/JSON outputs plus simple SVG line plots.
//!
//! The config format is flat `key=value` tokens separated by whitespace
//! (newlines included), with `#` starting a comment that runs to end of
//! line. Schedules are encoded inline as `kind:arg1:arg2[:...]`, e.g.
//! `omega=cosine:1:0.2:3` or `drive=sinusoid:1:2:0`. The full key set with
//! defaults is what [`default_config_text`] prints.
//!
//! Every output is byte-deterministic for a fixed config and build: floats
//! are formatted with 17 significant digits, key order is fixed, and no
//! collection with nondeterministic iteration order is involved anywhere.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::dynamics::{self, Controls, EnvelopeSolution};
use crate::error::{Result, SimError};
use crate::packet::{self, PacketField, SpatialGrid};
use crate::params::{
    self, DriveSchedule, FrequencySchedule, InitialConditions, Measurement, PhysicalParams,
};
use crate::trajectories::{self, Method, TrajectoryBundle};
use crate::verify::{self, EquationTag};

/// Which artifact families a run should produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputKind {
    /// envelope.csv + center/width plots
    Envelope,
    /// packet_t<stamp>.csv per requested packet time
    Packet,
    /// trajectories.csv + fan plot
    Trajectories,
    /// residuals.json residual suite
    Residuals,
    /// spectral free-particle cross-check folded into residuals.json
    FourierCheck,
}

impl OutputKind {
    pub fn name(self) -> &'static str {
        match self {
            OutputKind::Envelope => "envelope",
            OutputKind::Packet => "packet",
            OutputKind::Trajectories => "trajectories",
            OutputKind::Residuals => "residuals",
            OutputKind::FourierCheck => "fourier_check",
        }
    }
}

/// A fully resolved experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: PhysicalParams,
    pub ic: InitialConditions,
    pub t_end: f64,
    /// rows in envelope.csv / trajectories.csv (equispaced times, >= 2)
    pub samples: usize,
    /// spatial window half-width in units of delta at the evaluation time
    pub grid_mult: f64,
    /// spatial grid point count
    pub grid_n: usize,
    pub controls: Controls,
    pub outputs: Vec<OutputKind>,
    /// trajectory starting points
    pub seeds: Vec<f64>,
    /// times at which packet snapshots are written
    pub packet_times: Vec<f64>,
    pub out_dir: String,
}

/// How [`execute`] interprets the config's output list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// honor `outputs` as configured
    Simulate,
    /// force the verification set: residuals, plus the spectral cross-check
    /// when the parameters describe a free particle
    Verify,
}

// ---------------------------------------------------------------------------
// parsing

struct RawEntry<'a> {
    line: usize,
    key_col: usize,
    value_col: usize,
    key: &'a str,
    value: &'a str,
}

fn tokenize(text: &str) -> Result<Vec<RawEntry<'_>>> {
    let mut entries = Vec::new();
    for (li, raw_line) in text.lines().enumerate() {
        let line = li + 1;
        let body = match raw_line.find('#') {
            Some(i) => &raw_line[..i],
            None => raw_line,
        };
        let mut rest = body;
        let mut offset = 0usize;
        loop {
            let trimmed = rest.trim_start();
            if trimmed.is_empty() {
                break;
            }
            let start = offset + (rest.len() - trimmed.len());
            let end_rel = trimmed.find(char::is_whitespace).unwrap_or(trimmed.len());
            let token = &trimmed[..end_rel];
            let key_col = start + 1; // 1-based
            match token.find('=') {
                Some(eq) if eq > 0 => entries.push(RawEntry {
                    line,
                    key_col,
                    value_col: key_col + eq + 1,
                    key: &token[..eq],
                    value: &token[eq + 1..],
                }),
                _ => {
                    return Err(SimError::ParseError {
                        line,
                        col: key_col,
                        msg: format!("expected key=value, got {token:?}"),
                    })
                }
            }
            offset = start + end_rel;
            rest = &body[offset..];
        }
    }
    Ok(entries)
}

fn parse_f64(line: usize, col: usize, s: &str) -> Result<f64> {
    s.parse().map_err(|_| SimError::ParseError {
        line,
        col,
        msg: format!("invalid number {s:?}"),
    })
}

fn parse_usize(line: usize, col: usize, s: &str) -> Result<usize> {
    s.parse().map_err(|_| SimError::ParseError {
        line,
        col,
        msg: format!("invalid integer {s:?}"),
    })
}

fn parse_bool(line: usize, col: usize, s: &str) -> Result<bool> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(SimError::ParseError {
            line,
            col,
            msg: format!("expected true or false, got {s:?}"),
        }),
    }
}

fn parse_f64_list(line: usize, col: usize, s: &str) -> Result<Vec<f64>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|item| parse_f64(line, col, item))
        .collect()
}

fn parse_table_pairs(line: usize, col: usize, args: &[&str]) -> Result<Vec<(f64, f64)>> {
    if args.is_empty() || !args.len().is_multiple_of(2) {
        return Err(SimError::ParseError {
            line,
            col,
            msg: "table needs one or more time:value pairs".into(),
        });
    }
    args.chunks_exact(2)
        .map(|pair| {
            Ok((
                parse_f64(line, col, pair[0])?,
                parse_f64(line, col, pair[1])?,
            ))
        })
        .collect()
}

fn parse_frequency(line: usize, col: usize, s: &str) -> Result<FrequencySchedule> {
    let parts: Vec<&str> = s.split(':').collect();
    match (parts[0], parts.len() - 1) {
        ("constant", 1) => Ok(FrequencySchedule::Constant(parse_f64(line, col, parts[1])?)),
        ("cosine", 3) => Ok(FrequencySchedule::CosineModulated {
            omega0: parse_f64(line, col, parts[1])?,
            epsilon: parse_f64(line, col, parts[2])?,
            omega_d: parse_f64(line, col, parts[3])?,
        }),
        ("table", _) => Ok(FrequencySchedule::Table(parse_table_pairs(line, col, &parts[1..])?)),
        _ => Err(SimError::ParseError {
            line,
            col,
            msg: format!(
                "unknown frequency schedule {s:?} (want constant:w, cosine:w0:eps:wd, or table:t:w[:t:w...])"
            ),
        }),
    }
}

fn parse_drive(line: usize, col: usize, s: &str) -> Result<DriveSchedule> {
    let parts: Vec<&str> = s.split(':').collect();
    match (parts[0], parts.len() - 1) {
        ("zero", 0) => Ok(DriveSchedule::Zero),
        ("constant", 1) => Ok(DriveSchedule::Constant(parse_f64(line, col, parts[1])?)),
        ("sinusoid", 3) => Ok(DriveSchedule::Sinusoid {
            amplitude: parse_f64(line, col, parts[1])?,
            omega_x: parse_f64(line, col, parts[2])?,
            phase: parse_f64(line, col, parts[3])?,
        }),
        ("table", _) => Ok(DriveSchedule::Table(parse_table_pairs(line, col, &parts[1..])?)),
        _ => Err(SimError::ParseError {
            line,
            col,
            msg: format!(
                "unknown drive schedule {s:?} (want zero, constant:c, sinusoid:a:w:p, or table:t:x[:t:x...])"
            ),
        }),
    }
}

fn parse_outputs(line: usize, col: usize, s: &str) -> Result<Vec<OutputKind>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|item| match item {
            "envelope" => Ok(OutputKind::Envelope),
            "packet" => Ok(OutputKind::Packet),
            "trajectories" => Ok(OutputKind::Trajectories),
            "residuals" => Ok(OutputKind::Residuals),
            "fourier_check" => Ok(OutputKind::FourierCheck),
            _ => Err(SimError::ParseError {
                line,
                col,
                msg: format!("unknown output kind {item:?}"),
            }),
        })
        .collect()
}

/// Parse a config document into a validated [`ExperimentConfig`] with all
/// defaults applied. See the module docs for the format.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let entries = tokenize(text)?;

    let mut m = None;
    let mut hbar = None;
    let mut measurement_off = None;
    let mut tau = None;
    let mut lambda = None;
    let mut omega = None;
    let mut drive = None;
    let mut x0 = None;
    let mut v0 = None;
    let mut a0 = None;
    let mut b0 = None;
    let mut t_end = None;
    let mut samples = None;
    let mut grid_mult = None;
    let mut grid_n = None;
    let mut rtol = None;
    let mut atol = None;
    let mut outputs = None;
    let mut seeds = None;
    let mut packet_times = None;
    let mut out_dir = None;

    let mut seen: Vec<&str> = Vec::new();
    for e in &entries {
        if seen.contains(&e.key) {
            return Err(SimError::ParseError {
                line: e.line,
                col: e.key_col,
                msg: format!("duplicate key {:?}", e.key),
            });
        }
        let (line, vcol, val) = (e.line, e.value_col, e.value);
        match e.key {
            "m" => m = Some(parse_f64(line, vcol, val)?),
            "hbar" => hbar = Some(parse_f64(line, vcol, val)?),
            "measurement_off" => measurement_off = Some(parse_bool(line, vcol, val)?),
            "tau" => tau = Some(parse_f64(line, vcol, val)?),
            "lambda" => lambda = Some(parse_f64(line, vcol, val)?),
            "omega" => omega = Some(parse_frequency(line, vcol, val)?),
            "drive" => drive = Some(parse_drive(line, vcol, val)?),
            "x0" => x0 = Some(parse_f64(line, vcol, val)?),
            "v0" => v0 = Some(parse_f64(line, vcol, val)?),
            "a0" => a0 = Some(parse_f64(line, vcol, val)?),
            "b0" => b0 = Some(parse_f64(line, vcol, val)?),
            "t_end" => t_end = Some(parse_f64(line, vcol, val)?),
            "samples" => samples = Some(parse_usize(line, vcol, val)?),
            "grid_mult" => grid_mult = Some(parse_f64(line, vcol, val)?),
            "grid_n" => grid_n = Some(parse_usize(line, vcol, val)?),
            "rtol" => rtol = Some(parse_f64(line, vcol, val)?),
            "atol" => atol = Some(parse_f64(line, vcol, val)?),
            "outputs" => outputs = Some(parse_outputs(line, vcol, val)?),
            "seeds" => seeds = Some(parse_f64_list(line, vcol, val)?),
            "packet_times" => packet_times = Some(parse_f64_list(line, vcol, val)?),
            "out_dir" => out_dir = Some(val.to_string()),
            _ => {
                return Err(SimError::UnknownKey {
                    line,
                    key: e.key.to_string(),
                });
            }
        }
        seen.push(e.key);
    }

    let measurement = match (measurement_off, tau) {
        (Some(true), Some(_)) => {
            return Err(SimError::ValidationError(
                "tau given although measurement_off=true".into(),
            ))
        }
        (Some(true), None) => Measurement::Off,
        (_, Some(tau)) => Measurement::On { tau },
        (_, None) => return Err(SimError::MissingKey { key: "tau" }),
    };
    let params = PhysicalParams {
        m: m.unwrap_or(1.0),
        hbar: hbar.unwrap_or(1.0),
        measurement,
        lambda: lambda.unwrap_or(0.0),
        omega: omega.unwrap_or(FrequencySchedule::Constant(0.0)),
        drive: drive.unwrap_or(DriveSchedule::Zero),
    };
    // default initial width: the stationary width when the trap/measurement
    // balance defines one, otherwise 1 natural unit
    let a0 = a0.unwrap_or_else(|| dynamics::steady_width(&params).unwrap_or(1.0));
    let ic = InitialConditions {
        x0: x0.unwrap_or(0.0),
        v0: v0.unwrap_or(0.0),
        a0,
        b0: b0.unwrap_or(0.0),
    };
    params::validate(&params, &ic)?;

    let t_end = t_end.ok_or(SimError::MissingKey { key: "t_end" })?;
    if !t_end.is_finite() || t_end <= 0.0 {
        return Err(SimError::ValidationError(format!(
            "t_end must be finite and positive, got {t_end}"
        )));
    }
    let samples = samples.unwrap_or(501);
    if samples < 2 {
        return Err(SimError::ValidationError(format!(
            "samples must be at least 2, got {samples}"
        )));
    }
    let grid_mult = grid_mult.unwrap_or(10.0);
    if !grid_mult.is_finite() || grid_mult <= 0.0 {
        return Err(SimError::ValidationError(format!(
            "grid_mult must be finite and positive, got {grid_mult}"
        )));
    }
    let grid_n = grid_n.unwrap_or(2001);
    if grid_n < 8 {
        return Err(SimError::ValidationError(format!(
            "grid_n must be at least 8, got {grid_n}"
        )));
    }
    let defaults = Controls::default_run();
    let rtol = rtol.unwrap_or(defaults.step.rtol);
    let atol = atol.unwrap_or(defaults.step.atol);
    for (v, name) in [(rtol, "rtol"), (atol, "atol")] {
        if !v.is_finite() || v <= 0.0 {
            return Err(SimError::ValidationError(format!(
                "{name} must be finite and positive, got {v}"
            )));
        }
    }
    let controls = Controls {
        step: crate::ode::StepControls {
            rtol,
            atol,
            ..defaults.step
        },
        ..defaults
    };
    let outputs = match outputs {
        None => vec![OutputKind::Envelope],
        Some(v) if v.is_empty() => {
            return Err(SimError::ValidationError(
                "outputs must be non-empty".into(),
            ))
        }
        Some(v) => v,
    };
    let seeds = match seeds {
        // a symmetric fan of five starting points across the initial packet
        None => (-2..=2).map(|k| ic.x0 + k as f64 * ic.a0).collect(),
        Some(v) if v.is_empty() => {
            return Err(SimError::ValidationError("seeds must be non-empty".into()))
        }
        Some(v) => v,
    };
    for &s in &seeds {
        if !s.is_finite() {
            return Err(SimError::ValidationError(format!(
                "seed must be finite, got {s}"
            )));
        }
    }
    let packet_times = match packet_times {
        None => vec![t_end],
        Some(v) if v.is_empty() => {
            return Err(SimError::ValidationError(
                "packet_times must be non-empty".into(),
            ))
        }
        Some(v) => v,
    };
    for &t in &packet_times {
        if !t.is_finite() || !(0.0..=t_end).contains(&t) {
            return Err(SimError::ValidationError(format!(
                "packet_times entries must lie in [0, t_end] = [0, {t_end}], got {t}"
            )));
        }
    }
    let out_dir = out_dir.unwrap_or_else(|| "out".to_string());

    Ok(ExperimentConfig {
        params,
        ic,
        t_end,
        samples,
        grid_mult,
        grid_n,
        controls,
        outputs,
        seeds,
        packet_times,
        out_dir,
    })
}

// ---------------------------------------------------------------------------
// serialization back to config text

fn frequency_text(s: &FrequencySchedule) -> String {
    match s {
        FrequencySchedule::Constant(w) => format!("constant:{w}"),
        FrequencySchedule::CosineModulated {
            omega0,
            epsilon,
            omega_d,
        } => {
            format!("cosine:{omega0}:{epsilon}:{omega_d}")
        }
        FrequencySchedule::Table(pairs) => {
            let mut out = String::from("table");
            for (t, w) in pairs {
                let _ = write!(out, ":{t}:{w}");
            }
            out
        }
    }
}

fn drive_text(s: &DriveSchedule) -> String {
    match s {
        DriveSchedule::Zero => "zero".into(),
        DriveSchedule::Constant(c) => format!("constant:{c}"),
        DriveSchedule::Sinusoid {
            amplitude,
            omega_x,
            phase,
        } => {
            format!("sinusoid:{amplitude}:{omega_x}:{phase}")
        }
        DriveSchedule::Table(pairs) => {
            let mut out = String::from("table");
            for (t, x) in pairs {
                let _ = write!(out, ":{t}:{x}");
            }
            out
        }
    }
}

fn join_f64(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Serialize a config to the canonical document form. Parsing the result
/// yields an equal config (floats use Rust's shortest exact representation).
pub fn to_config_text(config: &ExperimentConfig) -> String {
    let mut out = String::new();
    let p = &config.params;
    let _ = writeln!(out, "m={}", p.m);
    let _ = writeln!(out, "hbar={}", p.hbar);
    match p.measurement {
        Measurement::Off => {
            let _ = writeln!(out, "measurement_off=true");
        }
        Measurement::On { tau } => {
            let _ = writeln!(out, "measurement_off=false");
            let _ = writeln!(out, "tau={tau}");
        }
    }
    let _ = writeln!(out, "lambda={}", p.lambda);
    let _ = writeln!(out, "omega={}", frequency_text(&p.omega));
    let _ = writeln!(out, "drive={}", drive_text(&p.drive));
    let _ = writeln!(out, "x0={}", config.ic.x0);
    let _ = writeln!(out, "v0={}", config.ic.v0);
    let _ = writeln!(out, "a0={}", config.ic.a0);
    let _ = writeln!(out, "b0={}", config.ic.b0);
    let _ = writeln!(out, "t_end={}", config.t_end);
    let _ = writeln!(out, "samples={}", config.samples);
    let _ = writeln!(out, "grid_mult={}", config.grid_mult);
    let _ = writeln!(out, "grid_n={}", config.grid_n);
    let _ = writeln!(out, "rtol={}", config.controls.step.rtol);
    let _ = writeln!(out, "atol={}", config.controls.step.atol);
    let names: Vec<&str> = config.outputs.iter().map(|k| k.name()).collect();
    let _ = writeln!(out, "outputs={}", names.join(","));
    let _ = writeln!(out, "seeds={}", join_f64(&config.seeds));
    let _ = writeln!(out, "packet_times={}", join_f64(&config.packet_times));
    let _ = writeln!(out, "out_dir={}", config.out_dir);
    out
}

/// The default experiment: natural units, measurement with tau = 1, width
/// started at its stationary value.
pub fn default_config() -> ExperimentConfig {
    let params = PhysicalParams::natural(Measurement::On { tau: 1.0 });
    let a0 = dynamics::steady_width(&params).expect("constant frequency");
    let ic = InitialConditions::at_rest(a0);
    let t_end = 5.0;
    ExperimentConfig {
        seeds: (-2..=2).map(|k| ic.x0 + k as f64 * ic.a0).collect(),
        params,
        ic,
        t_end,
        samples: 501,
        grid_mult: 10.0,
        grid_n: 2001,
        controls: Controls::default_run(),
        outputs: vec![OutputKind::Envelope],
        packet_times: vec![t_end],
        out_dir: "out".to_string(),
    }
}

/// Canonical text of [`default_config`]; suitable as a starting config file.
pub fn default_config_text() -> String {
    to_config_text(&default_config())
}

// ---------------------------------------------------------------------------
// execution

/// 17-significant-digit float formatting used in every CSV/JSON output; fixed
/// so equal configs give byte-identical files.
fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn linspace(t_end: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect()
}

fn is_free_particle(params: &PhysicalParams) -> bool {
    params.measurement_off()
        && params.lambda == 0.0
        && matches!(params.omega, FrequencySchedule::Constant(w) if w == 0.0)
}

/// Run a config and write its outputs under the output directory
/// (`out_dir_override`, when given, wins over the config's own `out_dir`;
/// the binary passes the `WAVEPACKET_OUT_DIR` environment variable through
/// here). Returns the written file paths in a fixed order.
pub fn execute(
    config: &ExperimentConfig,
    mode: RunMode,
    out_dir_override: Option<&str>,
) -> Result<Vec<PathBuf>> {
    let out_dir = PathBuf::from(out_dir_override.unwrap_or(config.out_dir.as_str()));
    let outputs: Vec<OutputKind> = match mode {
        RunMode::Simulate => config.outputs.clone(),
        RunMode::Verify => {
            let mut v = vec![OutputKind::Residuals];
            if is_free_particle(&config.params) {
                v.push(OutputKind::FourierCheck);
            }
            v
        }
    };
    let wants = |k: OutputKind| outputs.contains(&k);
    fs::create_dir_all(&out_dir)?;
    let mut written = Vec::new();

    let times = linspace(config.t_end, config.samples);
    if wants(OutputKind::Envelope) || wants(OutputKind::Packet) || wants(OutputKind::Trajectories) {
        let mut mandatory = times.clone();
        mandatory.extend_from_slice(&config.packet_times);
        mandatory.sort_by(f64::total_cmp);
        let sol = dynamics::integrate_sampled(
            &config.params,
            &config.ic,
            config.t_end,
            &config.controls,
            &mandatory,
        )?;
        if wants(OutputKind::Envelope) {
            written.push(write_envelope_csv(&out_dir, &sol, &times)?);
            written.extend(write_envelope_plots(&out_dir, &sol, &times)?);
        }
        if wants(OutputKind::Packet) {
            for &tp in &config.packet_times {
                written.push(write_packet_csv(&out_dir, &sol, tp, config)?);
            }
        }
        if wants(OutputKind::Trajectories) {
            let bundle = trajectories::bundle(&sol, &config.seeds, &times, Method::ClosedForm)?;
            written.push(write_trajectories_csv(&out_dir, &bundle)?);
            written.push(write_trajectories_plot(&out_dir, &bundle)?);
        }
    }

    if wants(OutputKind::Residuals) || wants(OutputKind::FourierCheck) {
        // the verification suite integrates at its own (tight) tolerances so
        // that interpolation noise stays far below stencil truncation error;
        // the config's rtol/atol apply to the simulation outputs only
        let vsol = dynamics::integrate(
            &config.params,
            &config.ic,
            config.t_end,
            &Controls::verification(),
        )?;
        let json = verification_json(
            &vsol,
            config,
            wants(OutputKind::Residuals),
            wants(OutputKind::FourierCheck),
        )?;
        let path = out_dir.join("residuals.json");
        fs::write(&path, json)?;
        written.push(path);
    }
    Ok(written)
}

fn write_envelope_csv(out_dir: &Path, sol: &EnvelopeSolution, times: &[f64]) -> Result<PathBuf> {
    let mut csv = String::from("t,q,qdot,delta,deltadot,s0\n");
    for &t in times {
        let s = sol.state_at(t)?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            fmt_f(s.t),
            fmt_f(s.q),
            fmt_f(s.qdot),
            fmt_f(s.delta),
            fmt_f(s.deltadot),
            fmt_f(s.s0)
        );
    }
    let path = out_dir.join("envelope.csv");
    fs::write(&path, csv)?;
    Ok(path)
}

fn write_envelope_plots(
    out_dir: &Path,
    sol: &EnvelopeSolution,
    times: &[f64],
) -> Result<Vec<PathBuf>> {
    let plots = out_dir.join("plots");
    fs::create_dir_all(&plots)?;
    let mut center = Vec::with_capacity(times.len());
    let mut width = Vec::with_capacity(times.len());
    for &t in times {
        let s = sol.state_at(t)?;
        center.push((t, s.q));
        width.push((t, s.delta));
    }
    let center_path = plots.join("center.svg");
    fs::write(
        &center_path,
        svg_line_chart("packet center q(t)", &[(PALETTE[0], &center)]),
    )?;
    let width_path = plots.join("width.svg");
    fs::write(
        &width_path,
        svg_line_chart("packet width delta(t)", &[(PALETTE[1], &width)]),
    )?;
    Ok(vec![center_path, width_path])
}

fn write_packet_csv(
    out_dir: &Path,
    sol: &EnvelopeSolution,
    t: f64,
    config: &ExperimentConfig,
) -> Result<PathBuf> {
    let state = sol.state_at(t)?;
    let grid = SpatialGrid::windowed(&state, config.grid_mult, config.grid_n)?;
    let params = &sol.params;
    let mut csv = String::from("x,re,im,rho,S,v_qu,V_qu\n");
    for x in grid.points() {
        let psi = packet::psi(&state, x, params);
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            fmt_f(x),
            fmt_f(psi.re),
            fmt_f(psi.im),
            fmt_f(packet::density(&state, x)),
            fmt_f(packet::phase(&state, x, params)),
            fmt_f(packet::velocity_field(&state, x, params)),
            fmt_f(packet::quantum_potential_closed(&state, x, params))
        );
    }
    let path = out_dir.join(format!("packet_t{t:.6}.csv"));
    fs::write(&path, csv)?;
    Ok(path)
}

fn write_trajectories_csv(out_dir: &Path, bundle: &TrajectoryBundle) -> Result<PathBuf> {
    let mut csv = String::from("t");
    for seed in &bundle.seeds {
        let _ = write!(csv, ",x_{seed}");
    }
    csv.push('\n');
    for (k, &t) in bundle.times.iter().enumerate() {
        let _ = write!(csv, "{}", fmt_f(t));
        for path in &bundle.paths {
            let _ = write!(csv, ",{}", fmt_f(path[k]));
        }
        csv.push('\n');
    }
    let path = out_dir.join("trajectories.csv");
    fs::write(&path, csv)?;
    Ok(path)
}

fn write_trajectories_plot(out_dir: &Path, bundle: &TrajectoryBundle) -> Result<PathBuf> {
    let plots = out_dir.join("plots");
    fs::create_dir_all(&plots)?;
    let series: Vec<Vec<(f64, f64)>> = bundle
        .paths
        .iter()
        .map(|path| {
            bundle
                .times
                .iter()
                .copied()
                .zip(path.iter().copied())
                .collect()
        })
        .collect();
    let colored: Vec<(&str, &[(f64, f64)])> = series
        .iter()
        .enumerate()
        .map(|(i, s)| (PALETTE[i % PALETTE.len()], s.as_slice()))
        .collect();
    let path = plots.join("trajectories.svg");
    fs::write(&path, svg_line_chart("trajectory fan x(t)", &colored))?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// verification report

fn json_array(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|v| fmt_f(*v)).collect();
    format!("[{}]", items.join(", "))
}

fn verification_json(
    sol: &EnvelopeSolution,
    config: &ExperimentConfig,
    residuals: bool,
    fourier: bool,
) -> Result<String> {
    let mut out = String::from("{\n");
    let _ = writeln!(out, "  \"t_end\": {},", fmt_f(config.t_end));
    let _ = writeln!(out, "  \"grid_n\": {},", config.grid_n);
    let _ = writeln!(out, "  \"grid_mult\": {},", fmt_f(config.grid_mult));

    let mut sections: Vec<String> = Vec::new();
    if residuals {
        let t_mid = 0.5 * config.t_end;
        let grid = SpatialGrid::windowed(&sol.state_at(t_mid)?, config.grid_mult, config.grid_n)?;
        let mut eq_blocks = Vec::new();
        for tag in [
            EquationTag::Schrodinger,
            EquationTag::Continuity,
            EquationTag::Euler,
            EquationTag::MadelungImaginary,
            EquationTag::MadelungReal,
        ] {
            let study = verify::residual_convergence(sol, tag, &grid, t_mid, 3)?;
            let base = &study.reports[0];
            let levels: Vec<f64> = study.reports.iter().map(|r| r.l2_abs).collect();
            let mut block = String::from("    {\n");
            let _ = writeln!(block, "      \"equation\": \"{}\",", tag.name());
            let _ = writeln!(block, "      \"h\": {},", fmt_f(base.h));
            let _ = writeln!(block, "      \"h_t\": {},", fmt_f(base.h_t));
            let _ = writeln!(block, "      \"l2_rel\": {},", fmt_f(base.l2_rel));
            let _ = writeln!(block, "      \"max_rel\": {},", fmt_f(base.max_rel));
            let _ = writeln!(block, "      \"l2_abs_levels\": {},", json_array(&levels));
            let _ = writeln!(
                block,
                "      \"l2_ratios\": {},",
                json_array(&study.l2_ratios)
            );
            let _ = writeln!(
                block,
                "      \"overall_order\": {}",
                fmt_f(study.overall_order())
            );
            block.push_str("    }");
            eq_blocks.push(block);
        }
        sections.push(format!(
            "  \"residual_time\": {},\n  \"equations\": [\n{}\n  ]",
            fmt_f(t_mid),
            eq_blocks.join(",\n")
        ));

        // source neutrality and norm conservation at 11 equispaced times
        let check_times = linspace(config.t_end, 11);
        let mut source_max = 0.0_f64;
        let mut norm_err_max = 0.0_f64;
        for &t in &check_times {
            let state = sol.state_at(t)?;
            let g = SpatialGrid::windowed(&state, config.grid_mult, config.grid_n)?;
            source_max = source_max.max(verify::source_term_integral(sol, t, &g)?.abs());
            let field = PacketField::sample(&state, &g, &sol.params);
            norm_err_max = norm_err_max.max((field.norm_sq_integral() - 1.0).abs());
        }
        sections.push(format!(
            "  \"source_integral_max_abs\": {}",
            fmt_f(source_max)
        ));
        sections.push(format!("  \"norm_error_max_abs\": {}", fmt_f(norm_err_max)));
    }
    if fourier {
        let t_f = 2.0_f64.min(config.t_end);
        let s0 = sol.state_at(0.0)?;
        let sf = sol.state_at(t_f)?;
        // window wide enough for both endpoint packets plus the drift
        let c = 0.5 * (s0.q + sf.q);
        let w = 16.0 * s0.delta.max(sf.delta) + 0.5 * (sf.q - s0.q).abs();
        let grid = SpatialGrid::new(c - w, c + w, 4096)?;
        let psi0 = PacketField::sample(&s0, &grid, &sol.params);
        let evolved = verify::fourier_free_packet(&psi0, t_f, &sol.params)?;
        let closed = PacketField::sample(&sf, &grid, &sol.params);
        sections.push(format!("  \"fourier_time\": {}", fmt_f(t_f)));
        sections.push(format!(
            "  \"fourier_l2_diff\": {}",
            fmt_f(evolved.l2_distance(&closed))
        ));
    }
    out.push_str(&sections.join(",\n"));
    out.push_str("\n}\n");
    Ok(out)
}

// ---------------------------------------------------------------------------
// SVG line charts

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

const SVG_W: f64 = 800.0;
const SVG_H: f64 = 600.0;
const PLOT_L: f64 = 80.0;
const PLOT_R: f64 = 770.0;
const PLOT_T: f64 = 50.0;
const PLOT_B: f64 = 540.0;

fn fmt_label(v: f64) -> String {
    format!("{v:.4e}")
}

/// Fixed-size 800x600 line chart with min/max axis labels; no external
/// assets, deterministic text output.
fn svg_line_chart(title: &str, series: &[(&str, &[(f64, f64)])]) -> String {
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for (_, points) in series {
        for &(x, y) in *points {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if x_min >= x_max {
        x_min -= 0.5;
        x_max += 0.5;
    }
    if y_min >= y_max {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let px = |x: f64| PLOT_L + (x - x_min) / (x_max - x_min) * (PLOT_R - PLOT_L);
    let py = |y: f64| PLOT_B - (y - y_min) / (y_max - y_min) * (PLOT_B - PLOT_T);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {SVG_W} {SVG_H}\">\n\
         <rect width=\"{SVG_W}\" height=\"{SVG_H}\" fill=\"#ffffff\"/>\n\
         <text x=\"400\" y=\"30\" font-family=\"monospace\" font-size=\"16\" text-anchor=\"middle\">{title}</text>\n"
    );
    // axes
    let _ = writeln!(
        svg,
        "<line x1=\"{PLOT_L}\" y1=\"{PLOT_B}\" x2=\"{PLOT_R}\" y2=\"{PLOT_B}\" stroke=\"#333333\" stroke-width=\"1\"/>"
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{PLOT_L}\" y1=\"{PLOT_T}\" x2=\"{PLOT_L}\" y2=\"{PLOT_B}\" stroke=\"#333333\" stroke-width=\"1\"/>"
    );
    // min/max labels
    let _ = writeln!(
        svg,
        "<text x=\"{PLOT_L}\" y=\"560\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"start\">{}</text>",
        fmt_label(x_min)
    );
    let _ = writeln!(
        svg,
        "<text x=\"{PLOT_R}\" y=\"560\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"end\">{}</text>",
        fmt_label(x_max)
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"end\">{}</text>",
        PLOT_L - 6.0,
        PLOT_B,
        fmt_label(y_min)
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\" text-anchor=\"end\">{}</text>",
        PLOT_L - 6.0,
        PLOT_T + 10.0,
        fmt_label(y_max)
    );
    for (color, points) in series {
        let coords: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            coords.join(" ")
        );
    }
    svg.push_str("</svg>\n");
    svg
}
