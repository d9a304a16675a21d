//! Continuous-measurement Gaussian wave-packet simulator.
//!
//! A wave packet monitored by a continuous position measurement stays Gaussian;
//! its entire evolution reduces to five envelope variables: the center q, the
//! center velocity q̇, the width δ, the width rate δ̇, and a global phase S₀.
//! This crate integrates that reduced ODE system, rebuilds the closed-form
//! packet and its Bohmian hydrodynamic fields (density, phase, velocity,
//! quantum potential), propagates quantum trajectory bundles two independent
//! ways, and verifies by independent finite-difference residuals that the
//! reconstructed packet actually solves the measurement PDE
//!
//! ```text
//! iħ ∂Ψ/∂t = -(ħ²/2m) ∂²Ψ/∂x² + [½mΩ²(t)x² + λxX(t)]Ψ - (iħ/4τ)[(x-q)²/δ² - 1]Ψ
//! ```
//!
//! Module map:
//! - [`params`]: physical parameters, Ω(t)/X(t) schedules, initial conditions.
//! - [`ode`]: embedded Dormand-Prince 5(4) with dense output, fixed-step RK4.
//! - [`dynamics`]: the five-variable envelope system and its integrator.
//! - [`packet`]: closed-form fields reconstructed from an envelope state.
//! - [`trajectories`]: Bohmian trajectory bundles, closed form vs integrated.
//! - [`verify`]: finite-difference PDE residuals and a Fourier free-packet oracle.
//! - [`cli`]: config parsing, simulation driver, CSV/JSON/SVG output.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod ode;
pub mod packet;
pub mod params;
pub mod trajectories;
pub mod verify;

pub use error::SimError;
