//! The reduced envelope system.
//!
//! A continuously measured Gaussian packet is fully described by five numbers:
//! center q, center velocity q̇, width δ, width rate δ̇, and the global phase
//! offset S₀. They obey
//!
//! ```text
//! q̈  = -Ω²(t)·q - (λ/m)·X(t)
//! δ̈  = -δ̇/τ - [Ω²(t) + 1/(4τ²)]·δ + ħ²/(4m²δ³)
//! Ṡ₀ = (1/ħ)·[½m q̇² - ½m Ω²(t) q² - λ q X(t) - ħ²/(4mδ²)]
//! ```
//!
//! S₀ rides along as a fifth component so it shares the integrator's error
//! control; the equivalent integral form stays available as a quadrature
//! oracle in the tests. With measurement off, every 1/τ term above is exactly
//! zero, not merely small.

use crate::error::{Result, SimError};
use crate::ode::{self, DenseOutput, StepControls};
use crate::params::{self, InitialConditions, PhysicalParams};

/// Width floor: below this the 1/δ³ term is considered a collapse and the
/// integration aborts rather than stepping through the singularity.
pub const DELTA_MIN_DEFAULT: f64 = 1e-8;

/// Envelope state at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeState {
    pub t: f64,
    pub q: f64,
    pub qdot: f64,
    pub delta: f64,
    pub deltadot: f64,
    pub s0: f64,
}

/// Time derivative of an [`EnvelopeState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeRates {
    pub qdot: f64,
    pub qddot: f64,
    pub deltadot: f64,
    pub deltaddot: f64,
    pub s0dot: f64,
}

/// Integration controls for the envelope system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controls {
    pub step: StepControls,
    pub delta_min: f64,
}

impl Controls {
    /// Everyday accuracy: plenty for envelope output and trajectories.
    pub fn default_run() -> Self {
        Controls {
            step: StepControls::default(),
            delta_min: DELTA_MIN_DEFAULT,
        }
    }

    /// Residual-verification grade. The tight tolerances are not about the
    /// envelope values themselves: the short max_step keeps the Hermite
    /// interpolation error (and its time derivative) far below the truncation
    /// error of the central time differences taken on top of the solution.
    pub fn verification() -> Self {
        Controls {
            step: StepControls {
                rtol: 1e-12,
                atol: 1e-14,
                max_step: 5e-4,
                ..StepControls::default()
            },
            delta_min: DELTA_MIN_DEFAULT,
        }
    }
}

impl Default for Controls {
    fn default() -> Self {
        Controls::default_run()
    }
}

fn rates_from(t: f64, y: &[f64; 5], params: &PhysicalParams) -> [f64; 5] {
    let [q, qdot, delta, deltadot, _s0] = *y;
    let omega = params.omega_at(t);
    let omega2 = omega * omega;
    let x_drive = params.drive_at(t);
    let inv_tau = params.inv_tau();
    let (m, hbar, lambda) = (params.m, params.hbar, params.lambda);

    let qddot = -omega2 * q - (lambda / m) * x_drive;
    let deltaddot = -deltadot * inv_tau - (omega2 + 0.25 * inv_tau * inv_tau) * delta
        + hbar * hbar / (4.0 * m * m * delta * delta * delta);
    let s0dot = (0.5 * m * qdot * qdot
        - 0.5 * m * omega2 * q * q
        - lambda * q * x_drive
        - hbar * hbar / (4.0 * m * delta * delta))
        / hbar;
    [qdot, qddot, deltadot, deltaddot, s0dot]
}

/// Right-hand side of the envelope system at one state.
pub fn rhs(state: &EnvelopeState, params: &PhysicalParams) -> Result<EnvelopeRates> {
    if state.delta <= DELTA_MIN_DEFAULT {
        return Err(SimError::WidthUnderflow {
            t: state.t,
            delta: state.delta,
            delta_min: DELTA_MIN_DEFAULT,
        });
    }
    let y = [state.q, state.qdot, state.delta, state.deltadot, state.s0];
    let f = rates_from(state.t, &y, params);
    Ok(EnvelopeRates {
        qdot: f[0],
        qddot: f[1],
        deltadot: f[2],
        deltaddot: f[3],
        s0dot: f[4],
    })
}

/// Stationary width for constant Ω: δ_ss = [ħ²/(4m²(Ω² + 1/4τ²))]^{1/4}.
/// `None` when no stationary width exists (free packet with measurement off)
/// or when Ω is not a constant schedule.
pub fn steady_width(params: &PhysicalParams) -> Option<f64> {
    let omega0 = match params.omega {
        params::FrequencySchedule::Constant(w0) => w0,
        _ => return None,
    };
    let inv_tau = params.inv_tau();
    let denom = omega0 * omega0 + 0.25 * inv_tau * inv_tau;
    if denom <= 0.0 {
        return None;
    }
    let expr = params.hbar * params.hbar / (4.0 * params.m * params.m * denom);
    expr.is_finite().then(|| expr.powf(0.25))
}

/// Dense, interpolable solution of the envelope system on [0, t_end].
#[derive(Debug, Clone)]
pub struct EnvelopeSolution {
    pub params: PhysicalParams,
    pub ic: InitialConditions,
    dense: DenseOutput<5>,
}

impl EnvelopeSolution {
    pub fn t_end(&self) -> f64 {
        self.dense.t_end()
    }

    /// Node times chosen by the integrator (plus any requested sample times).
    pub fn times(&self) -> &[f64] {
        &self.dense.t
    }

    pub fn len(&self) -> usize {
        self.dense.t.len()
    }

    pub fn is_empty(&self) -> bool {
        false // a solution always holds at least the initial state
    }

    fn state_from(&self, t: f64, y: &[f64; 5]) -> EnvelopeState {
        EnvelopeState {
            t,
            q: y[0],
            qdot: y[1],
            delta: y[2],
            deltadot: y[3],
            s0: y[4],
        }
    }

    pub fn sample(&self, i: usize) -> EnvelopeState {
        self.state_from(self.dense.t[i], &self.dense.y[i])
    }

    /// Stored right-hand side at node `i` (the same values the step used).
    pub fn sample_rates(&self, i: usize) -> EnvelopeRates {
        let f = &self.dense.f[i];
        EnvelopeRates {
            qdot: f[0],
            qddot: f[1],
            deltadot: f[2],
            deltaddot: f[3],
            s0dot: f[4],
        }
    }

    /// Interpolated state; bitwise-exact at node times.
    pub fn state_at(&self, t: f64) -> Result<EnvelopeState> {
        let y = self.dense.eval(t)?;
        Ok(self.state_from(t, &y))
    }
}

/// Integrate the envelope system from the validated initial conditions.
pub fn integrate(
    params: &PhysicalParams,
    ic: &InitialConditions,
    t_end: f64,
    controls: &Controls,
) -> Result<EnvelopeSolution> {
    integrate_sampled(params, ic, t_end, controls, &[])
}

/// Like [`integrate`], additionally forcing the integrator to land exactly on
/// each of `sample_times`, which then appear among the solution nodes.
pub fn integrate_sampled(
    params: &PhysicalParams,
    ic: &InitialConditions,
    t_end: f64,
    controls: &Controls,
    sample_times: &[f64],
) -> Result<EnvelopeSolution> {
    params::validate(params, ic)?;
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(SimError::ValidationError(
            "t_end must be positive and finite".into(),
        ));
    }
    let mut mandatory: Vec<f64> = sample_times.to_vec();
    mandatory.sort_by(|a, b| a.partial_cmp(b).unwrap());
    mandatory.dedup();

    let y0 = [ic.x0, ic.v0, ic.a0, ic.b0, ic.s0_init(params)];
    let delta_min = controls.delta_min;
    let f = |t: f64, y: &[f64; 5]| -> Result<[f64; 5]> {
        if y[2] <= delta_min {
            return Err(SimError::WidthUnderflow {
                t,
                delta: y[2],
                delta_min,
            });
        }
        Ok(rates_from(t, y, params))
    };
    let dense = ode::integrate_dp45(f, 0.0, y0, t_end, &mandatory, &controls.step)?;
    Ok(EnvelopeSolution {
        params: params.clone(),
        ic: *ic,
        dense,
    })
}
