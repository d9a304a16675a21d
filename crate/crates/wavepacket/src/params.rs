//! Physical parameters, time-dependent schedules, and initial conditions.
//!
//! Everything here is immutable after validation and shared read-only by the
//! other modules. The measurement strength enters every formula through 1/τ
//! terms; the `Measurement::Off` variant replaces each of them by exactly 0
//! (and the trajectory stretch factor e^{t/2τ} by exactly 1) instead of
//! relying on a large τ, so limit checks are free of overflow and rounding.

use crate::error::{Result, SimError};

/// Harmonic confinement frequency Ω(t).
#[derive(Debug, Clone, PartialEq)]
pub enum FrequencySchedule {
    /// Ω(t) = ω₀ for all t.
    Constant(f64),
    /// Ω(t) = ω₀·√(max(0, 1 + ε·cos(ω_d·t))). The clamp at zero keeps Ω real
    /// for |ε| > 1; that corner is a modeling choice, not physics.
    CosineModulated {
        omega0: f64,
        epsilon: f64,
        omega_d: f64,
    },
    /// Piecewise-linear in t, clamped to the end values outside the knots.
    Table(Vec<(f64, f64)>),
}

/// Classical drive coordinate X(t).
#[derive(Debug, Clone, PartialEq)]
pub enum DriveSchedule {
    Zero,
    Constant(f64),
    /// X(t) = amplitude·sin(ω_x·t + phase).
    Sinusoid {
        amplitude: f64,
        omega_x: f64,
        phase: f64,
    },
    Table(Vec<(f64, f64)>),
}

/// Linear interpolation over sorted knots, clamped at the ends and exact at
/// the knots themselves.
fn table_eval(knots: &[(f64, f64)], t: f64) -> f64 {
    debug_assert!(!knots.is_empty());
    if t <= knots[0].0 {
        return knots[0].1;
    }
    if t >= knots[knots.len() - 1].0 {
        return knots[knots.len() - 1].1;
    }
    // index of the first knot with t_i > t; the segment is [i-1, i]
    let i = knots.partition_point(|&(tk, _)| tk <= t);
    let (t0, w0) = knots[i - 1];
    let (t1, w1) = knots[i];
    if t == t0 {
        return w0;
    }
    let theta = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
    w0 + theta * (w1 - w0)
}

fn validate_knots(knots: &[(f64, f64)], what: &str, nonnegative: bool) -> Result<()> {
    if knots.is_empty() {
        return Err(SimError::ValidationError(format!(
            "{what} table has no knots"
        )));
    }
    for &(tk, wk) in knots {
        if !tk.is_finite() || !wk.is_finite() {
            return Err(SimError::ValidationError(format!(
                "{what} table knot not finite"
            )));
        }
        if nonnegative && wk < 0.0 {
            return Err(SimError::ValidationError(format!(
                "{what} table value must be >= 0"
            )));
        }
    }
    for w in knots.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(SimError::ValidationError(format!(
                "{what} table knots must be strictly increasing in t"
            )));
        }
    }
    Ok(())
}

impl FrequencySchedule {
    /// Evaluate Ω(t). Deterministic and finite for every valid schedule.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            FrequencySchedule::Constant(w0) => *w0,
            FrequencySchedule::CosineModulated {
                omega0,
                epsilon,
                omega_d,
            } => omega0 * (1.0 + epsilon * (omega_d * t).cos()).max(0.0).sqrt(),
            FrequencySchedule::Table(knots) => table_eval(knots, t),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            FrequencySchedule::Constant(w0) => {
                if !w0.is_finite() {
                    return Err(SimError::NonFiniteParameter { field: "omega" });
                }
                if *w0 < 0.0 {
                    return Err(SimError::ValidationError("omega must be >= 0".into()));
                }
            }
            FrequencySchedule::CosineModulated {
                omega0,
                epsilon,
                omega_d,
            } => {
                for (v, field) in [
                    (omega0, "omega0"),
                    (epsilon, "epsilon"),
                    (omega_d, "omega_d"),
                ] {
                    if !v.is_finite() {
                        return Err(SimError::NonFiniteParameter { field });
                    }
                }
                if *omega0 < 0.0 {
                    return Err(SimError::ValidationError("omega0 must be >= 0".into()));
                }
            }
            FrequencySchedule::Table(knots) => validate_knots(knots, "omega", true)?,
        }
        Ok(())
    }
}

impl DriveSchedule {
    /// Evaluate X(t). Deterministic and finite for every valid schedule.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            DriveSchedule::Zero => 0.0,
            DriveSchedule::Constant(xc) => *xc,
            DriveSchedule::Sinusoid {
                amplitude,
                omega_x,
                phase,
            } => amplitude * (omega_x * t + phase).sin(),
            DriveSchedule::Table(knots) => table_eval(knots, t),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            DriveSchedule::Zero => {}
            DriveSchedule::Constant(xc) => {
                if !xc.is_finite() {
                    return Err(SimError::NonFiniteParameter { field: "drive" });
                }
            }
            DriveSchedule::Sinusoid {
                amplitude,
                omega_x,
                phase,
            } => {
                for (v, field) in [
                    (amplitude, "amplitude"),
                    (omega_x, "omega_x"),
                    (phase, "phase"),
                ] {
                    if !v.is_finite() {
                        return Err(SimError::NonFiniteParameter { field });
                    }
                }
            }
            DriveSchedule::Table(knots) => validate_knots(knots, "drive", false)?,
        }
        Ok(())
    }
}

/// Continuous position measurement: on with resolution time τ, or explicitly off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Measurement {
    /// Every 1/τ term is exactly 0, the stretch factor e^{t/2τ} exactly 1.
    Off,
    On {
        tau: f64,
    },
}

/// Physical parameters of the measured oscillator.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams {
    pub m: f64,
    pub hbar: f64,
    pub measurement: Measurement,
    /// Linear coupling strength to the classical drive; any sign.
    pub lambda: f64,
    pub omega: FrequencySchedule,
    pub drive: DriveSchedule,
}

impl PhysicalParams {
    /// Natural units m = ħ = 1, measurement on with τ = 1, free and undriven.
    pub fn natural(measurement: Measurement) -> Self {
        PhysicalParams {
            m: 1.0,
            hbar: 1.0,
            measurement,
            lambda: 0.0,
            omega: FrequencySchedule::Constant(0.0),
            drive: DriveSchedule::Zero,
        }
    }

    pub fn measurement_off(&self) -> bool {
        self.measurement == Measurement::Off
    }

    /// 1/τ, or exactly 0 with measurement off. All measurement terms in the
    /// dynamics and fields are built from this so the off-limit is exact.
    pub fn inv_tau(&self) -> f64 {
        match self.measurement {
            Measurement::Off => 0.0,
            Measurement::On { tau } => 1.0 / tau,
        }
    }

    pub fn omega_at(&self, t: f64) -> f64 {
        self.omega.eval(t)
    }

    pub fn drive_at(&self, t: f64) -> f64 {
        self.drive.eval(t)
    }

    /// Trajectory stretch factor e^{t/2τ}; exactly 1 with measurement off.
    /// Exponents past 700 would overflow f64 and are reported as errors.
    pub fn stretch_factor(&self, t: f64) -> Result<f64> {
        match self.measurement {
            Measurement::Off => Ok(1.0),
            Measurement::On { tau } => {
                let exponent = t / (2.0 * tau);
                if exponent > 700.0 {
                    Err(SimError::Overflow { t, exponent })
                } else {
                    Ok(exponent.exp())
                }
            }
        }
    }
}

/// Initial envelope data: center, center velocity, width, width rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialConditions {
    pub x0: f64,
    pub v0: f64,
    pub a0: f64,
    pub b0: f64,
}

impl InitialConditions {
    /// Packet at rest at the origin with unit width.
    pub fn at_rest(a0: f64) -> Self {
        InitialConditions {
            x0: 0.0,
            v0: 0.0,
            a0,
            b0: 0.0,
        }
    }

    /// Initial phase offset S₀(0) = m·v₀·x₀/ħ. Computed, never user-supplied.
    pub fn s0_init(&self, params: &PhysicalParams) -> f64 {
        params.m * self.v0 * self.x0 / params.hbar
    }
}

/// Check every invariant; the configuration itself is left untouched.
pub fn validate(params: &PhysicalParams, ic: &InitialConditions) -> Result<()> {
    for (v, field) in [
        (params.m, "m"),
        (params.hbar, "hbar"),
        (params.lambda, "lambda"),
    ] {
        if !v.is_finite() {
            return Err(SimError::NonFiniteParameter { field });
        }
    }
    if params.m <= 0.0 {
        return Err(SimError::NonPositiveMass);
    }
    if params.hbar <= 0.0 {
        return Err(SimError::NonPositiveHbar);
    }
    if let Measurement::On { tau } = params.measurement {
        if !tau.is_finite() {
            return Err(SimError::NonFiniteParameter { field: "tau" });
        }
        if tau <= 0.0 {
            return Err(SimError::NonPositiveTau);
        }
    }
    params.omega.validate()?;
    params.drive.validate()?;
    for (v, field) in [(ic.x0, "x0"), (ic.v0, "v0"), (ic.a0, "a0"), (ic.b0, "b0")] {
        if !v.is_finite() {
            return Err(SimError::NonFiniteParameter { field });
        }
    }
    if ic.a0 <= 0.0 {
        return Err(SimError::NonPositiveInitialWidth);
    }
    Ok(())
}
