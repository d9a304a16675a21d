//! Closed-form fields of the measured Gaussian packet.
//!
//! Every field below is reconstructed from one envelope state (q, q̇, δ, δ̇, S₀)
//! with u = x - q:
//!
//! ```text
//! ρ(x,t)   = (2πδ²)^{-1/2} · exp(-u²/2δ²)
//! S(x,t)   = S₀ + (m q̇/ħ)·u + (m/2ħ)·[δ̇/δ + 1/2τ]·u²
//! Ψ(x,t)   = (2πδ²)^{-1/4} · exp(-u²/4δ²) · e^{iS}
//! v_qu     = [δ̇/δ + 1/2τ]·u + q̇                      (= (ħ/m)·∂S/∂x)
//! V_qu     = ħ²/4mδ² - ħ²u²/8mδ⁴
//! V        = ½ m Ω²(t) x² + λ x X(t)
//! ```
//!
//! The phase is kept unwrapped: residual verification differentiates S and
//! needs it smooth. Only plot output ever reduces it mod 2π.

use crate::dynamics::EnvelopeState;
use crate::error::{Result, SimError};
use crate::params::PhysicalParams;
use num_complex::Complex64;

/// Uniform spatial grid, inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    x_min: f64,
    x_max: f64,
    n: usize,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(SimError::ValidationError(
                "grid needs finite x_min < x_max".into(),
            ));
        }
        if n < 8 {
            return Err(SimError::ValidationError(
                "grid needs at least 8 points".into(),
            ));
        }
        Ok(SpatialGrid { x_min, x_max, n })
    }

    /// Default evaluation window around one state: q ± 10δ, 2001 points.
    /// Gaussian tails are below 1e-21 there, beyond every tolerance in play.
    pub fn around(state: &EnvelopeState) -> Self {
        SpatialGrid::windowed(state, 10.0, 2001).unwrap()
    }

    /// Window q ± mult·δ with `n` points.
    pub fn windowed(state: &EnvelopeState, mult: f64, n: usize) -> Result<Self> {
        SpatialGrid::new(
            state.q - mult * state.delta,
            state.q + mult * state.delta,
            n,
        )
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false // constructor enforces n >= 8
    }

    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.x(i))
    }

    /// Same window with the spacing halved (point count 2n-1).
    pub fn refined(&self) -> Self {
        SpatialGrid {
            x_min: self.x_min,
            x_max: self.x_max,
            n: 2 * self.n - 1,
        }
    }
}

/// Probability density ρ(x); normalized Gaussian with peak at x = q.
pub fn density(state: &EnvelopeState, x: f64) -> f64 {
    let u = x - state.q;
    let two_d2 = 2.0 * state.delta * state.delta;
    (std::f64::consts::PI * two_d2).sqrt().recip() * (-u * u / two_d2).exp()
}

/// Width-rate coefficient of the quadratic phase term: δ̇/δ + 1/2τ.
/// Also the slope of the affine velocity field.
fn phase_curvature_rate(state: &EnvelopeState, params: &PhysicalParams) -> f64 {
    state.deltadot / state.delta + 0.5 * params.inv_tau()
}

/// Full unwrapped phase S(x).
pub fn phase(state: &EnvelopeState, x: f64, params: &PhysicalParams) -> f64 {
    let u = x - state.q;
    let tilt = params.m * state.qdot / params.hbar;
    let curve = 0.5 * params.m / params.hbar * phase_curvature_rate(state, params);
    state.s0 + tilt * u + curve * u * u
}

/// Complex wave function Ψ(x) = (2πδ²)^{-1/4} e^{-u²/4δ²} e^{iS}.
pub fn psi(state: &EnvelopeState, x: f64, params: &PhysicalParams) -> Complex64 {
    let u = x - state.q;
    let d2 = state.delta * state.delta;
    let amp = (2.0 * std::f64::consts::PI * d2).powf(-0.25) * (-u * u / (4.0 * d2)).exp();
    Complex64::from_polar(amp, phase(state, x, params))
}

/// Bohmian velocity field; affine in x with slope δ̇/δ + 1/2τ.
pub fn velocity_field(state: &EnvelopeState, x: f64, params: &PhysicalParams) -> f64 {
    phase_curvature_rate(state, params) * (x - state.q) + state.qdot
}

/// Quantum potential in closed form: a downward parabola crossing zero at
/// |x - q| = δ√2.
pub fn quantum_potential_closed(state: &EnvelopeState, x: f64, params: &PhysicalParams) -> f64 {
    let u = x - state.q;
    let d2 = state.delta * state.delta;
    let h2_m = params.hbar * params.hbar / params.m;
    h2_m / (4.0 * d2) - h2_m * u * u / (8.0 * d2 * d2)
}

/// External potential ½mΩ²(t)x² + λxX(t).
pub fn classical_potential(x: f64, t: f64, params: &PhysicalParams) -> f64 {
    let omega = params.omega_at(t);
    0.5 * params.m * omega * omega * x * x + params.lambda * x * params.drive_at(t)
}

/// -(ħ²/2m)·φ''/φ by central second differences on amplitude samples φ.
/// Boundary entries use one-sided stencils: fine for plots, excluded from
/// comparisons and norms.
pub(crate) fn vqu_fd_from_amplitude(phi: &[f64], h: f64, params: &PhysicalParams) -> Vec<f64> {
    let n = phi.len();
    let coef = -params.hbar * params.hbar / (2.0 * params.m * h * h);
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = coef * (phi[i - 1] - 2.0 * phi[i] + phi[i + 1]) / phi[i];
    }
    if n >= 4 {
        out[0] = coef * (2.0 * phi[0] - 5.0 * phi[1] + 4.0 * phi[2] - phi[3]) / phi[0];
        out[n - 1] = coef * (2.0 * phi[n - 1] - 5.0 * phi[n - 2] + 4.0 * phi[n - 3] - phi[n - 4])
            / phi[n - 1];
    }
    out
}

/// Quantum potential from finite differences of √ρ on the grid. The grid must
/// span at least q ± 6δ with spacing h ≤ δ/10, or the stencil error swamps
/// the comparison the caller is presumably about to make.
pub fn quantum_potential_fd(
    state: &EnvelopeState,
    grid: &SpatialGrid,
    params: &PhysicalParams,
) -> Result<Vec<f64>> {
    let h_max = state.delta / 10.0;
    if grid.h() > h_max {
        return Err(SimError::GridTooCoarse(format!(
            "spacing {:e} exceeds delta/10 = {:e}",
            grid.h(),
            h_max
        )));
    }
    let (lo, hi) = (state.q - 6.0 * state.delta, state.q + 6.0 * state.delta);
    if grid.x_min() > lo || grid.x_max() < hi {
        return Err(SimError::GridTooCoarse(format!(
            "window [{}, {}] does not cover q +/- 6 delta = [{lo}, {hi}]",
            grid.x_min(),
            grid.x_max()
        )));
    }
    let phi: Vec<f64> = grid.points().map(|x| density(state, x).sqrt()).collect();
    Ok(vqu_fd_from_amplitude(&phi, grid.h(), params))
}

/// Complex Ψ samples on a grid at one time.
#[derive(Debug, Clone)]
pub struct PacketField {
    pub grid: SpatialGrid,
    pub t: f64,
    pub values: Vec<Complex64>,
}

impl PacketField {
    /// Evaluate the closed-form packet on a grid.
    pub fn sample(state: &EnvelopeState, grid: &SpatialGrid, params: &PhysicalParams) -> Self {
        let values = grid.points().map(|x| psi(state, x, params)).collect();
        PacketField {
            grid: *grid,
            t: state.t,
            values,
        }
    }

    /// Trapezoid ∫|Ψ|² dx over the grid.
    pub fn norm_sq_integral(&self) -> f64 {
        let h = self.grid.h();
        let mut acc = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let w = if i == 0 || i == self.values.len() - 1 {
                0.5
            } else {
                1.0
            };
            acc += w * v.norm_sqr();
        }
        acc * h
    }

    /// L2 distance sqrt(∫|Ψ - Φ|² dx) to another field on the same grid.
    pub fn l2_distance(&self, other: &PacketField) -> f64 {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let h = self.grid.h();
        let mut acc = 0.0;
        for (i, (a, b)) in self.values.iter().zip(&other.values).enumerate() {
            let w = if i == 0 || i == self.values.len() - 1 {
                0.5
            } else {
                1.0
            };
            acc += w * (a - b).norm_sqr();
        }
        (acc * h).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{DriveSchedule, FrequencySchedule, Measurement, PhysicalParams};
    use proptest::prelude::*;

    fn natural_on() -> PhysicalParams {
        PhysicalParams::natural(Measurement::On { tau: 1.0 })
    }

    fn state(q: f64, qdot: f64, delta: f64, deltadot: f64, s0: f64) -> EnvelopeState {
        EnvelopeState {
            t: 0.0,
            q,
            qdot,
            delta,
            deltadot,
            s0,
        }
    }

    #[test]
    fn density_peak_and_one_sigma_values() {
        let s = state(0.3, 0.0, 1.0, 0.0, 0.0);
        assert!((density(&s, 0.3) - 0.3989422804014327).abs() < 1e-15);
        assert!((density(&s, 1.3) - 0.24197072451914337).abs() < 1e-15);
    }

    #[test]
    fn density_integrates_to_one() {
        let s = state(-0.7, 0.0, 2.5, 0.0, 0.0);
        let grid = SpatialGrid::around(&s);
        let h = grid.h();
        let integral: f64 = grid
            .points()
            .enumerate()
            .map(|(i, x)| {
                let w = if i == 0 || i + 1 == grid.len() {
                    0.5
                } else {
                    1.0
                };
                w * density(&s, x)
            })
            .sum::<f64>()
            * h;
        assert!((integral - 1.0).abs() < 1e-10);
    }

    #[test]
    fn phase_at_center_is_the_offset() {
        let p = natural_on();
        let s = state(0.4, 1.7, 0.9, 0.2, -0.55);
        assert_eq!(phase(&s, 0.4, &p), -0.55);
    }

    #[test]
    fn phase_quadratic_term() {
        // m=hbar=1, qdot=0, deltadot=0, tau=1, u=2: S = s0 + (1/2)(1/2)(4)
        let p = natural_on();
        let s = state(0.0, 0.0, 1.0, 0.0, 0.7);
        assert!((phase(&s, 2.0, &p) - 1.7).abs() < 1e-15);
    }

    #[test]
    fn phase_plane_wave_tilt_without_measurement() {
        let p = PhysicalParams::natural(Measurement::Off);
        let s = state(1.0, 0.8, 1.3, 0.0, 0.25);
        let d = 1.9;
        assert!((phase(&s, 1.0 + d, &p) - (0.25 + 0.8 * d)).abs() < 1e-15);
    }

    #[test]
    fn phase_at_time_zero_is_quarter_x_squared() {
        // x0=v0=0, a0=1, b0=0, m=hbar=tau=1: S(x,0) = x²/4 from the 1/2tau term
        let p = natural_on();
        let s = state(0.0, 0.0, 1.0, 0.0, 0.0);
        for x in [0.5, 1.0, 2.0] {
            assert!((phase(&s, x, &p) - x * x / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn psi_is_real_positive_at_center_with_zero_offset() {
        let p = natural_on();
        let s = state(0.0, 0.3, 1.4, -0.1, 0.0);
        let v = psi(&s, 0.0, &p);
        let expected = (2.0 * std::f64::consts::PI * 1.4f64.powi(2)).powf(-0.25);
        assert!((v.re - expected).abs() < 1e-15);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn modulus_squared_reproduces_density() {
        let p = natural_on();
        let s = state(0.2, -0.4, 0.8, 0.3, 1.1);
        let grid = SpatialGrid::windowed(&s, 8.0, 1001).unwrap();
        for x in grid.points() {
            let rho = density(&s, x);
            let mod2 = psi(&s, x, &p).norm_sqr();
            if rho > 1e-290 {
                assert!(((mod2 - rho) / rho).abs() < 1e-12, "x = {x}");
            }
        }
    }

    #[test]
    fn velocity_examples() {
        let p = natural_on();
        let s = state(1.0, 0.7, 1.0, 0.5, 0.0);
        assert_eq!(velocity_field(&s, 1.0, &p), 0.7);
        // delta=1, deltadot=0.5, tau=1, qdot=0, u=2 -> (0.5+0.5)*2
        let s2 = state(0.0, 0.0, 1.0, 0.5, 0.0);
        assert_eq!(velocity_field(&s2, 2.0, &p), 2.0);
        // measurement off, deltadot=0: rigid translation at qdot
        let off = PhysicalParams::natural(Measurement::Off);
        let s3 = state(0.0, 0.7, 2.0, 0.0, 0.0);
        for x in [-3.0, 0.0, 5.0] {
            assert_eq!(velocity_field(&s3, x, &off), 0.7);
        }
    }

    #[test]
    fn velocity_is_scaled_phase_gradient() {
        // central difference of the quadratic S is exact up to roundoff
        let p = natural_on();
        let s = state(0.3, -0.6, 1.2, 0.4, 0.9);
        let h = 1e-3;
        for x in [-2.0, 0.3, 1.7, 4.2] {
            let fd = (phase(&s, x + h, &p) - phase(&s, x - h, &p)) / (2.0 * h);
            let v = velocity_field(&s, x, &p);
            assert!((p.hbar / p.m * fd - v).abs() < 1e-9, "x = {x}");
        }
        // affine slope from two-point differencing matches the coefficient
        let slope = (velocity_field(&s, 2.0, &p) - velocity_field(&s, -1.0, &p)) / 3.0;
        let expected = s.deltadot / s.delta + 0.5;
        assert!((slope - expected).abs() < 1e-13);
    }

    #[test]
    fn quantum_potential_closed_examples() {
        let p = natural_on();
        let s = state(0.0, 0.0, 1.0, 0.0, 0.0);
        assert_eq!(quantum_potential_closed(&s, 0.0, &p), 0.25);
        assert!(quantum_potential_closed(&s, 2.0f64.sqrt(), &p).abs() < 1e-15);
        let wide = state(0.0, 0.0, 2.0, 0.0, 0.0);
        assert_eq!(quantum_potential_closed(&wide, 0.0, &p), 1.0 / 16.0);
    }

    #[test]
    fn quantum_potential_fd_matches_closed_form() {
        let p = natural_on();
        let s = state(0.0, 0.0, 1.0, 0.0, 0.0);
        let grid = SpatialGrid::windowed(&s, 6.0, 1201).unwrap(); // h = 0.01
        let fd = quantum_potential_fd(&s, &grid, &p).unwrap();
        let max_err = |grid: &SpatialGrid, fd: &[f64]| {
            let mut m = 0.0f64;
            for (i, &v) in fd.iter().enumerate().take(grid.len() - 1).skip(1) {
                let closed = quantum_potential_closed(&s, grid.x(i), &p);
                m = m.max((v - closed).abs());
            }
            m
        };
        let e0 = max_err(&grid, &fd);
        assert!(e0 < 1e-3, "coarse error {e0:e}");

        let g1 = grid.refined();
        let e1 = max_err(&g1, &quantum_potential_fd(&s, &g1, &p).unwrap());
        let ratio = e0 / e1;
        assert!((3.5..=4.5).contains(&ratio), "refinement ratio {ratio}");
    }

    #[test]
    fn quantum_potential_fd_zero_for_flat_amplitude() {
        let p = natural_on();
        let phi = vec![0.5; 64];
        let out = vqu_fd_from_amplitude(&phi, 0.01, &p);
        assert!(out.iter().all(|&v| v == 0.0));
        // non-dyadic amplitudes leave only boundary-stencil rounding
        let phi = vec![0.7; 64];
        let out = vqu_fd_from_amplitude(&phi, 0.01, &p);
        for v in &out[1..63] {
            assert_eq!(*v, 0.0);
        }
        assert!(out[0].abs() < 1e-11 && out[63].abs() < 1e-11);
    }

    #[test]
    fn quantum_potential_fd_rejects_bad_grids() {
        let p = natural_on();
        let s = state(0.0, 0.0, 1.0, 0.0, 0.0);
        let coarse = SpatialGrid::new(-6.0, 6.0, 60).unwrap(); // h ~ 0.2 > 0.1
        assert!(matches!(
            quantum_potential_fd(&s, &coarse, &p),
            Err(SimError::GridTooCoarse(_))
        ));
        let narrow = SpatialGrid::new(-3.0, 3.0, 1201).unwrap(); // spans only 3 delta
        assert!(matches!(
            quantum_potential_fd(&s, &narrow, &p),
            Err(SimError::GridTooCoarse(_))
        ));
    }

    #[test]
    fn classical_potential_examples() {
        let mut p = natural_on();
        assert_eq!(classical_potential(7.0, 0.0, &p), 0.0);
        p.omega = FrequencySchedule::Constant(2.0);
        assert_eq!(classical_potential(3.0, 0.0, &p), 18.0);
        let mut q = natural_on();
        q.lambda = 1.0;
        q.drive = DriveSchedule::Constant(0.5);
        assert_eq!(classical_potential(2.0, 0.0, &q), 1.0);
    }

    #[test]
    fn classical_potential_equals_its_expansion_about_q() {
        // both sides are the same quadratic; agreement is exact up to rounding
        let mut p = natural_on();
        p.omega = FrequencySchedule::Constant(1.7);
        p.lambda = 0.4;
        p.drive = DriveSchedule::Sinusoid {
            amplitude: 0.9,
            omega_x: 2.0,
            phase: 0.3,
        };
        let (q, t) = (0.6, 1.3);
        let omega2 = p.omega_at(t).powi(2);
        let x_drive = p.drive_at(t);
        for x in [-4.0, -0.5, 0.6, 2.9] {
            let u = x - q;
            let expanded = 0.5 * p.m * omega2 * q * q
                + p.lambda * q * x_drive
                + (p.m * omega2 * q + p.lambda * x_drive) * u
                + 0.5 * p.m * omega2 * u * u;
            let direct = classical_potential(x, t, &p);
            assert!((expanded - direct).abs() < 1e-13 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn packet_field_normalization() {
        let p = natural_on();
        for (delta, q) in [(0.3, -2.0), (1.0, 0.0), (4.0, 1.5)] {
            let s = state(q, 0.2, delta, -0.1, 0.4);
            let field = PacketField::sample(&s, &SpatialGrid::around(&s), &p);
            assert!((field.norm_sq_integral() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn grid_refinement_preserves_window() {
        let g = SpatialGrid::new(-1.0, 3.0, 101).unwrap();
        let r = g.refined();
        assert_eq!(r.len(), 201);
        assert_eq!(r.x_min(), -1.0);
        assert_eq!(r.x_max(), 3.0);
        assert!((r.h() - g.h() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn grid_rejects_degenerate_inputs() {
        assert!(SpatialGrid::new(1.0, 1.0, 100).is_err());
        assert!(SpatialGrid::new(0.0, 1.0, 7).is_err());
        assert!(SpatialGrid::new(f64::NAN, 1.0, 100).is_err());
    }

    proptest! {
        #[test]
        fn modulus_identity_holds_for_random_states(
            q in -3.0..3.0f64,
            qdot in -2.0..2.0f64,
            delta in 0.1..4.0f64,
            deltadot in -1.0..1.0f64,
            s0 in -10.0..10.0f64,
            x in -5.0..5.0f64,
        ) {
            let p = natural_on();
            let s = state(q, qdot, delta, deltadot, s0);
            let rho = density(&s, x);
            let mod2 = psi(&s, x, &p).norm_sqr();
            if rho > 1e-200 {
                prop_assert!(((mod2 - rho) / rho).abs() < 1e-12);
            }
        }

        #[test]
        fn velocity_affinity_three_point_collinearity(
            q in -2.0..2.0f64,
            delta in 0.2..3.0f64,
            deltadot in -1.0..1.0f64,
            x0 in -4.0..4.0f64,
            dx in 0.1..2.0f64,
        ) {
            let p = natural_on();
            let s = state(q, 0.3, delta, deltadot, 0.0);
            let (v0, v1, v2) = (
                velocity_field(&s, x0, &p),
                velocity_field(&s, x0 + dx, &p),
                velocity_field(&s, x0 + 2.0 * dx, &p),
            );
            // equal spacing in x must give equal spacing in v
            let bend = (v2 - v1) - (v1 - v0);
            let scale = v0.abs().max(v1.abs()).max(v2.abs()).max(1.0);
            prop_assert!(bend.abs() <= 1e-12 * scale);
        }
    }
}
