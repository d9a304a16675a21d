//! Independent numerical verification of the reconstructed packet.
//!
//! The closed-form packet built by the `packet` module is supposed to solve
//! the measurement-modified Schrödinger equation and the hydrodynamic
//! equations derived from it. Nothing in the construction guarantees that the
//! code implements those formulas correctly, so this module checks them the
//! hard way: evaluate the fields on a grid, form each equation's residual
//! with central finite differences in x and t, and confirm the residual is
//! small and shrinks at second order under joint (h, h_t) refinement.
//!
//! Five residuals are available: the complex Schrödinger equation itself, its
//! polar split into an amplitude-transport (imaginary part) and phase
//! (real part) equation, the probability continuity equation with its
//! measurement source, and the hydrodynamic Euler equation with the quantum
//! potential force.
//!
//! A second, fully independent oracle covers the free-particle limit: evolve
//! the initial field spectrally (FFT, multiply by the free dispersion phase
//! e^{-i omega(k) t}, inverse FFT) and compare against the closed form.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::dynamics::{EnvelopeSolution, EnvelopeState};
use crate::error::{Result, SimError};
use crate::packet::{self, PacketField, SpatialGrid};
use crate::params::{FrequencySchedule, PhysicalParams};

/// Which equation a residual report refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquationTag {
    Schrodinger,
    Continuity,
    Euler,
    MadelungImaginary,
    MadelungReal,
}

impl EquationTag {
    /// Stable lowercase name used in serialized reports.
    pub fn name(self) -> &'static str {
        match self {
            EquationTag::Schrodinger => "schrodinger",
            EquationTag::Continuity => "continuity",
            EquationTag::Euler => "euler",
            EquationTag::MadelungImaginary => "madelung_imaginary",
            EquationTag::MadelungReal => "madelung_real",
        }
    }
}

/// Norms of one equation's residual on one grid at one time.
///
/// Absolute norms are the interior L2 norm `sqrt(h * sum R^2)` and the
/// interior max norm. Relative norms divide by `scale`, the largest single
/// term magnitude seen anywhere on the interior — this keeps "relative"
/// meaningful across resolutions and scenarios without inventing a physical
/// normalization. (`l2_rel` uses the pointwise RMS rather than the
/// h-weighted L2 so that it is dimensionless against `scale`.)
#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub equation: EquationTag,
    pub t: f64,
    pub h: f64,
    pub h_t: f64,
    /// number of interior points the norms run over
    pub interior_points: usize,
    pub l2_abs: f64,
    pub max_abs: f64,
    pub l2_rel: f64,
    pub max_rel: f64,
    /// largest single-term magnitude over the interior
    pub scale: f64,
}

/// Residual reports at successive (h, h_t) refinements plus the observed
/// convergence orders between consecutive levels.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    /// coarsest first
    pub reports: Vec<ResidualReport>,
    /// `l2_abs[k] / l2_abs[k+1]` for each refinement; ~4 for a second-order
    /// stencil
    pub l2_ratios: Vec<f64>,
    /// `log2` of each ratio; ~2 for a second-order stencil
    pub orders: Vec<f64>,
}

impl ConvergenceStudy {
    /// Order fitted across the whole refinement span:
    /// `log2(l2_first / l2_last) / refinements`. More robust than a single
    /// step because interpolation noise in the envelope lookup (~1e-12) can
    /// partially cancel the finest level's tiny truncation error.
    pub fn overall_order(&self) -> f64 {
        let first = self.reports.first().expect("at least two levels").l2_abs;
        let last = self.reports.last().expect("at least two levels").l2_abs;
        (first / last).log2() / (self.reports.len() - 1) as f64
    }
}

/// Time step for the temporal central difference: `min(1e-4, h^2/delta * m/hbar)`.
///
/// Both stencils are second order, so balancing their truncation terms wants
/// h_t ~ h^2 in natural units; the 1e-4 cap keeps the step sane on coarse
/// grids.
pub fn default_time_step(h: f64, delta: f64, params: &PhysicalParams) -> f64 {
    (1e-4_f64).min(h * h / delta * params.m / params.hbar)
}

// two-point margin per side: central differences need one point, and keeping
// a second out of the norms avoids any boundary contamination
const MARGIN: usize = 2;

fn check_grid(state: &EnvelopeState, grid: &SpatialGrid) -> Result<()> {
    if grid.h() > state.delta / 10.0 {
        return Err(SimError::GridTooCoarse(format!(
            "spacing {:e} exceeds delta/10 = {:e}",
            grid.h(),
            state.delta / 10.0
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
    Ok(())
}

/// Envelope states at t - h_t, t, t + h_t for the temporal stencil.
fn tri_state(sol: &EnvelopeSolution, t: f64, h_t: f64) -> Result<[EnvelopeState; 3]> {
    Ok([
        sol.state_at(t - h_t)?,
        sol.state_at(t)?,
        sol.state_at(t + h_t)?,
    ])
}

/// Assemble a report from pointwise interior residual magnitudes and the
/// matching largest-term magnitudes.
pub(crate) fn report_from_pointwise(
    equation: EquationTag,
    t: f64,
    h: f64,
    h_t: f64,
    residual_mag: &[f64],
    term_mag: &[f64],
) -> ResidualReport {
    debug_assert_eq!(residual_mag.len(), term_mag.len());
    let n = residual_mag.len();
    let sum_sq: f64 = residual_mag.iter().map(|r| r * r).sum();
    let l2_abs = (h * sum_sq).sqrt();
    let max_abs = residual_mag.iter().copied().fold(0.0_f64, f64::max);
    let scale = term_mag.iter().copied().fold(0.0_f64, f64::max);
    let rms = (sum_sq / n.max(1) as f64).sqrt();
    let (l2_rel, max_rel) = if scale > 0.0 {
        (rms / scale, max_abs / scale)
    } else {
        (0.0, 0.0)
    };
    ResidualReport {
        equation,
        t,
        h,
        h_t,
        interior_points: n,
        l2_abs,
        max_abs,
        l2_rel,
        max_rel,
        scale,
    }
}

/// Pointwise Schrödinger residual over the interior of raw field samples:
/// `R = i hbar dPsi/dt + (hbar^2/2m) d2Psi/dx2 - V Psi + (i hbar/4 tau) g Psi`
/// with `g = (x-q)^2/delta^2 - 1`. Returns (|R|, largest |term|) per interior
/// point. Exposed at crate level so synthetic fields can exercise the stencil
/// directly.
#[allow(clippy::too_many_arguments)]
pub(crate) fn schrodinger_pointwise(
    psi_prev: &[Complex64],
    psi_mid: &[Complex64],
    psi_next: &[Complex64],
    v_class: &[f64],
    sink_gain: &[f64],
    h: f64,
    h_t: f64,
    params: &PhysicalParams,
) -> (Vec<f64>, Vec<f64>) {
    let n = psi_mid.len();
    let hbar = params.hbar;
    let kin = hbar * hbar / (2.0 * params.m);
    let i_hbar = Complex64::new(0.0, hbar);
    let mut res = Vec::with_capacity(n.saturating_sub(2 * MARGIN));
    let mut mag = Vec::with_capacity(n.saturating_sub(2 * MARGIN));
    for i in MARGIN..n - MARGIN {
        let t1 = i_hbar * (psi_next[i] - psi_prev[i]) / (2.0 * h_t);
        let t2 = kin * (psi_mid[i - 1] - 2.0 * psi_mid[i] + psi_mid[i + 1]) / (h * h);
        let t3 = -v_class[i] * psi_mid[i];
        let t4 = Complex64::new(0.0, 0.25 * hbar * sink_gain[i]) * psi_mid[i];
        let r = t1 + t2 + t3 + t4;
        res.push(r.norm());
        mag.push(t1.norm().max(t2.norm()).max(t3.norm()).max(t4.norm()));
    }
    (res, mag)
}

/// Pointwise continuity residual:
/// `R = drho/dt + d(rho v)/dx + (rho/2 tau) g`.
pub(crate) fn continuity_pointwise(
    rho_prev: &[f64],
    rho_mid: &[f64],
    rho_next: &[f64],
    flux_mid: &[f64],
    source_gain: &[f64],
    h: f64,
    h_t: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rho_mid.len();
    let mut res = Vec::with_capacity(n.saturating_sub(2 * MARGIN));
    let mut mag = Vec::with_capacity(n.saturating_sub(2 * MARGIN));
    for i in MARGIN..n - MARGIN {
        let t1 = (rho_next[i] - rho_prev[i]) / (2.0 * h_t);
        let t2 = (flux_mid[i + 1] - flux_mid[i - 1]) / (2.0 * h);
        let t3 = source_gain[i] * rho_mid[i];
        res.push((t1 + t2 + t3).abs());
        mag.push(t1.abs().max(t2.abs()).max(t3.abs()));
    }
    (res, mag)
}

/// Pointwise Euler residual:
/// `R = dv/dt + v dv/dx + Omega^2 x + (lambda/m) X + (1/m) dV_qu/dx`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn euler_pointwise(
    v_prev: &[f64],
    v_mid: &[f64],
    v_next: &[f64],
    vqu_mid: &[f64],
    force_ext: &[f64],
    h: f64,
    h_t: f64,
    params: &PhysicalParams,
) -> (Vec<f64>, Vec<f64>) {
    let n = v_mid.len();
    let inv_m = 1.0 / params.m;
    let mut res = Vec::with_capacity(n.saturating_sub(2 * MARGIN));
    let mut mag = Vec::with_capacity(n.saturating_sub(2 * MARGIN));
    for i in MARGIN..n - MARGIN {
        let t1 = (v_next[i] - v_prev[i]) / (2.0 * h_t);
        let t2 = v_mid[i] * (v_mid[i + 1] - v_mid[i - 1]) / (2.0 * h);
        let t3 = force_ext[i];
        let t4 = inv_m * (vqu_mid[i + 1] - vqu_mid[i - 1]) / (2.0 * h);
        res.push((t1 + t2 + t3 + t4).abs());
        mag.push(t1.abs().max(t2.abs()).max(t3.abs()).max(t4.abs()));
    }
    (res, mag)
}

/// Pointwise amplitude-transport (imaginary part of the polar split)
/// residual: `R = dphi/dt + (hbar/2m)(2 S_x phi_x + phi S_xx) + (g/4 tau) phi`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn madelung_imaginary_pointwise(
    phi_prev: &[f64],
    phi_mid: &[f64],
    phi_next: &[f64],
    s_mid: &[f64],
    sink_gain: &[f64],
    h: f64,
    h_t: f64,
    params: &PhysicalParams,
) -> (Vec<f64>, Vec<f64>) {
    let n = phi_mid.len();
    let half_diff = params.hbar / (2.0 * params.m);
    let mut res = Vec::with_capacity(n.saturating_sub(2 * MARGIN));
    let mut mag = Vec::with_capacity(n.saturating_sub(2 * MARGIN));
    for i in MARGIN..n - MARGIN {
        let t1 = (phi_next[i] - phi_prev[i]) / (2.0 * h_t);
        let s_x = (s_mid[i + 1] - s_mid[i - 1]) / (2.0 * h);
        let phi_x = (phi_mid[i + 1] - phi_mid[i - 1]) / (2.0 * h);
        let s_xx = (s_mid[i - 1] - 2.0 * s_mid[i] + s_mid[i + 1]) / (h * h);
        let t2 = half_diff * (2.0 * s_x * phi_x + phi_mid[i] * s_xx);
        let t3 = 0.25 * sink_gain[i] * phi_mid[i];
        res.push((t1 + t2 + t3).abs());
        mag.push(t1.abs().max(t2.abs()).max(t3.abs()));
    }
    (res, mag)
}

/// Pointwise phase (real part of the polar split) residual:
/// `R = -hbar phi S_t + (hbar^2/2m)(phi_xx - phi S_x^2) - V phi`.
/// The measurement term is purely imaginary, so it does not appear here.
#[allow(clippy::too_many_arguments)]
pub(crate) fn madelung_real_pointwise(
    phi_mid: &[f64],
    s_prev: &[f64],
    s_mid: &[f64],
    s_next: &[f64],
    v_class: &[f64],
    h: f64,
    h_t: f64,
    params: &PhysicalParams,
) -> (Vec<f64>, Vec<f64>) {
    let n = phi_mid.len();
    let hbar = params.hbar;
    let kin = hbar * hbar / (2.0 * params.m);
    let mut res = Vec::with_capacity(n.saturating_sub(2 * MARGIN));
    let mut mag = Vec::with_capacity(n.saturating_sub(2 * MARGIN));
    for i in MARGIN..n - MARGIN {
        let s_t = (s_next[i] - s_prev[i]) / (2.0 * h_t);
        let t1 = -hbar * phi_mid[i] * s_t;
        let s_x = (s_mid[i + 1] - s_mid[i - 1]) / (2.0 * h);
        let phi_xx = (phi_mid[i - 1] - 2.0 * phi_mid[i] + phi_mid[i + 1]) / (h * h);
        let t2 = kin * (phi_xx - phi_mid[i] * s_x * s_x);
        let t3 = -v_class[i] * phi_mid[i];
        res.push((t1 + t2 + t3).abs());
        mag.push(t1.abs().max(t2.abs()).max(t3.abs()));
    }
    (res, mag)
}

/// `(x - q)^2 / delta^2 - 1` at the mid-time state, per grid point.
fn sink_bracket(state: &EnvelopeState, grid: &SpatialGrid) -> Vec<f64> {
    let d2 = state.delta * state.delta;
    grid.points()
        .map(|x| {
            let u = x - state.q;
            u * u / d2 - 1.0
        })
        .collect()
}

/// Residual of the full complex Schrödinger equation at time `t`.
pub fn schrodinger_residual(
    sol: &EnvelopeSolution,
    grid: &SpatialGrid,
    t: f64,
    h_t: f64,
) -> Result<ResidualReport> {
    let [prev, mid, next] = tri_state(sol, t, h_t)?;
    check_grid(&mid, grid)?;
    let params = &sol.params;
    let eval = |s: &EnvelopeState| -> Vec<Complex64> {
        grid.points().map(|x| packet::psi(s, x, params)).collect()
    };
    let psi_prev = eval(&prev);
    let psi_mid = eval(&mid);
    let psi_next = eval(&next);
    let v_class: Vec<f64> = grid
        .points()
        .map(|x| packet::classical_potential(x, t, params))
        .collect();
    let inv_tau = params.inv_tau();
    let sink: Vec<f64> = sink_bracket(&mid, grid)
        .into_iter()
        .map(|g| g * inv_tau)
        .collect();
    let (res, mag) = schrodinger_pointwise(
        &psi_prev,
        &psi_mid,
        &psi_next,
        &v_class,
        &sink,
        grid.h(),
        h_t,
        params,
    );
    Ok(report_from_pointwise(
        EquationTag::Schrodinger,
        t,
        grid.h(),
        h_t,
        &res,
        &mag,
    ))
}

/// Residual of the continuity equation with measurement source at time `t`.
pub fn continuity_residual(
    sol: &EnvelopeSolution,
    grid: &SpatialGrid,
    t: f64,
    h_t: f64,
) -> Result<ResidualReport> {
    let [prev, mid, next] = tri_state(sol, t, h_t)?;
    check_grid(&mid, grid)?;
    let params = &sol.params;
    let rho =
        |s: &EnvelopeState| -> Vec<f64> { grid.points().map(|x| packet::density(s, x)).collect() };
    let rho_prev = rho(&prev);
    let rho_mid = rho(&mid);
    let rho_next = rho(&next);
    let flux_mid: Vec<f64> = grid
        .points()
        .zip(&rho_mid)
        .map(|(x, &r)| r * packet::velocity_field(&mid, x, params))
        .collect();
    let half_inv_tau = 0.5 * params.inv_tau();
    let source: Vec<f64> = sink_bracket(&mid, grid)
        .into_iter()
        .map(|g| g * half_inv_tau)
        .collect();
    let (res, mag) = continuity_pointwise(
        &rho_prev,
        &rho_mid,
        &rho_next,
        &flux_mid,
        &source,
        grid.h(),
        h_t,
    );
    Ok(report_from_pointwise(
        EquationTag::Continuity,
        t,
        grid.h(),
        h_t,
        &res,
        &mag,
    ))
}

/// Residual of the hydrodynamic Euler equation at time `t`, with the quantum
/// potential force taken from the closed form and differenced centrally.
pub fn euler_residual(
    sol: &EnvelopeSolution,
    grid: &SpatialGrid,
    t: f64,
    h_t: f64,
) -> Result<ResidualReport> {
    let [prev, mid, next] = tri_state(sol, t, h_t)?;
    check_grid(&mid, grid)?;
    let params = &sol.params;
    let vel = |s: &EnvelopeState| -> Vec<f64> {
        grid.points()
            .map(|x| packet::velocity_field(s, x, params))
            .collect()
    };
    let v_prev = vel(&prev);
    let v_mid = vel(&mid);
    let v_next = vel(&next);
    let vqu_mid: Vec<f64> = grid
        .points()
        .map(|x| packet::quantum_potential_closed(&mid, x, params))
        .collect();
    let omega = params.omega_at(t);
    let drive = params.lambda / params.m * params.drive_at(t);
    let force_ext: Vec<f64> = grid.points().map(|x| omega * omega * x + drive).collect();
    let (res, mag) = euler_pointwise(
        &v_prev,
        &v_mid,
        &v_next,
        &vqu_mid,
        &force_ext,
        grid.h(),
        h_t,
        params,
    );
    Ok(report_from_pointwise(
        EquationTag::Euler,
        t,
        grid.h(),
        h_t,
        &res,
        &mag,
    ))
}

/// Residuals of both halves of the polar split at time `t`: the
/// amplitude-transport equation (imaginary part) and the phase equation
/// (real part).
pub fn madelung_split_check(
    sol: &EnvelopeSolution,
    grid: &SpatialGrid,
    t: f64,
    h_t: f64,
) -> Result<(ResidualReport, ResidualReport)> {
    let [prev, mid, next] = tri_state(sol, t, h_t)?;
    check_grid(&mid, grid)?;
    let params = &sol.params;
    let amp = |s: &EnvelopeState| -> Vec<f64> {
        grid.points()
            .map(|x| packet::density(s, x).sqrt())
            .collect()
    };
    let phase = |s: &EnvelopeState| -> Vec<f64> {
        grid.points().map(|x| packet::phase(s, x, params)).collect()
    };
    let phi_prev = amp(&prev);
    let phi_mid = amp(&mid);
    let phi_next = amp(&next);
    let s_prev = phase(&prev);
    let s_mid = phase(&mid);
    let s_next = phase(&next);
    let inv_tau = params.inv_tau();
    let sink: Vec<f64> = sink_bracket(&mid, grid)
        .into_iter()
        .map(|g| g * inv_tau)
        .collect();
    let v_class: Vec<f64> = grid
        .points()
        .map(|x| packet::classical_potential(x, t, params))
        .collect();

    let (res_im, mag_im) = madelung_imaginary_pointwise(
        &phi_prev,
        &phi_mid,
        &phi_next,
        &s_mid,
        &sink,
        grid.h(),
        h_t,
        params,
    );
    let imag = report_from_pointwise(
        EquationTag::MadelungImaginary,
        t,
        grid.h(),
        h_t,
        &res_im,
        &mag_im,
    );

    let (res_re, mag_re) = madelung_real_pointwise(
        &phi_mid,
        &s_prev,
        &s_mid,
        &s_next,
        &v_class,
        grid.h(),
        h_t,
        params,
    );
    let real = report_from_pointwise(
        EquationTag::MadelungReal,
        t,
        grid.h(),
        h_t,
        &res_re,
        &mag_re,
    );
    Ok((imag, real))
}

/// Dispatch a single residual evaluation by equation tag.
pub fn residual(
    sol: &EnvelopeSolution,
    equation: EquationTag,
    grid: &SpatialGrid,
    t: f64,
    h_t: f64,
) -> Result<ResidualReport> {
    match equation {
        EquationTag::Schrodinger => schrodinger_residual(sol, grid, t, h_t),
        EquationTag::Continuity => continuity_residual(sol, grid, t, h_t),
        EquationTag::Euler => euler_residual(sol, grid, t, h_t),
        EquationTag::MadelungImaginary => madelung_split_check(sol, grid, t, h_t).map(|p| p.0),
        EquationTag::MadelungReal => madelung_split_check(sol, grid, t, h_t).map(|p| p.1),
    }
}

/// Evaluate one residual at `levels` successive refinements, halving the grid
/// spacing and the time step together, and report the observed convergence
/// orders. The coarsest time step follows [`default_time_step`].
pub fn residual_convergence(
    sol: &EnvelopeSolution,
    equation: EquationTag,
    grid: &SpatialGrid,
    t: f64,
    levels: usize,
) -> Result<ConvergenceStudy> {
    assert!(levels >= 2, "need at least two levels to estimate an order");
    let state = sol.state_at(t)?;
    let mut h_t = default_time_step(grid.h(), state.delta, &sol.params);
    let mut g = *grid;
    let mut reports = Vec::with_capacity(levels);
    for _ in 0..levels {
        reports.push(residual(sol, equation, &g, t, h_t)?);
        g = g.refined();
        h_t *= 0.5;
    }
    let l2_ratios: Vec<f64> = reports
        .windows(2)
        .map(|w| w[0].l2_abs / w[1].l2_abs)
        .collect();
    let orders: Vec<f64> = l2_ratios.iter().map(|r| r.log2()).collect();
    Ok(ConvergenceStudy {
        reports,
        l2_ratios,
        orders,
    })
}

/// Trapezoid integral of the continuity source term
/// `(rho/2 tau)((x-q)^2/delta^2 - 1)` over the grid at time `t`.
///
/// The bracket has zero mean against the Gaussian (its second moment is
/// exactly delta^2), so this integral vanishes analytically; measuring it
/// checks that the source only redistributes probability.
pub fn source_term_integral(sol: &EnvelopeSolution, t: f64, grid: &SpatialGrid) -> Result<f64> {
    let state = sol.state_at(t)?;
    let params = &sol.params;
    let half_inv_tau = 0.5 * params.inv_tau();
    let n = grid.len();
    let mut acc = 0.0;
    for (i, x) in grid.points().enumerate() {
        let u = x - state.q;
        let g = u * u / (state.delta * state.delta) - 1.0;
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        acc += w * half_inv_tau * g * packet::density(&state, x);
    }
    Ok(acc * grid.h())
}

/// Momentum-space view of a packet field.
///
/// The wavenumber grid is uniform with spacing `2 pi/(n h)`, sorted
/// ascending, and symmetric about zero; for even n the lone Nyquist bin has
/// no positive-k partner and is omitted (the aliasing precondition requires
/// it to be empty anyway). Amplitudes follow the unitary convention
/// `phi(k) = (2 pi)^{-1/2} integral psi(x) e^{-i k x} dx`, and `omega` holds
/// the free dispersion `hbar k^2 / 2m`.
#[derive(Debug, Clone)]
pub struct FourierSpectrum {
    pub k: Vec<f64>,
    pub amplitudes: Vec<Complex64>,
    pub omega: Vec<f64>,
}

/// Discrete Fourier transform of a packet field, reported in continuum
/// normalization. Power-of-two grid sizes are the intended (fastest) path.
pub fn spectrum(field: &PacketField, params: &PhysicalParams) -> FourierSpectrum {
    let n = field.values.len();
    let h = field.grid.h();
    let dk = 2.0 * std::f64::consts::PI / (n as f64 * h);
    let mut buf = field.values.clone();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    // j indexes the DFT bin; signed index maps bins above n/2 to negative k
    let j_max = if n.is_multiple_of(2) {
        n as i64 / 2 - 1
    } else {
        (n as i64 - 1) / 2
    };
    let norm = h / (2.0 * std::f64::consts::PI).sqrt();
    let mut k = Vec::with_capacity(2 * j_max as usize + 1);
    let mut amplitudes = Vec::with_capacity(k.capacity());
    let mut omega = Vec::with_capacity(k.capacity());
    for j in -j_max..=j_max {
        let bin = if j >= 0 {
            j as usize
        } else {
            (j + n as i64) as usize
        };
        let kj = j as f64 * dk;
        // the DFT sums over m with x_m = x_min + m h; restore the x_min phase
        let phase = Complex64::from_polar(1.0, -kj * field.grid.x_min());
        k.push(kj);
        amplitudes.push(norm * phase * buf[bin]);
        omega.push(params.hbar * kj * kj / (2.0 * params.m));
    }
    FourierSpectrum {
        k,
        amplitudes,
        omega,
    }
}

const EDGE_LIMIT: f64 = 1e-12;
const ALIAS_LIMIT: f64 = 1e-10;

/// Spectral evolution oracle for the free particle: FFT the field, advance
/// every mode by `e^{-i omega(k) dt}` with `omega = hbar k^2/2m`, and
/// transform back. `t` is the absolute target time; the evolution spans
/// `t - psi0.t`.
///
/// This path shares no code with the closed-form packet, so agreement
/// between the two is a real check. It requires genuinely free parameters
/// (no trap, no coupling, no measurement), a field that has decayed below
/// 1e-12 at the grid edges (the DFT is periodic), and a spectrum that is
/// empty near the Nyquist frequency (no aliasing).
pub fn fourier_free_packet(
    psi0: &PacketField,
    t: f64,
    params: &PhysicalParams,
) -> Result<PacketField> {
    let free_omega = matches!(params.omega, FrequencySchedule::Constant(w) if w == 0.0);
    if !params.measurement_off() || params.lambda != 0.0 || !free_omega {
        return Err(SimError::NotFreeParticle);
    }
    let n = psi0.values.len();
    let edge = psi0.values[0].norm().max(psi0.values[n - 1].norm());
    if edge >= EDGE_LIMIT {
        return Err(SimError::EdgeNotNegligible {
            value: edge,
            limit: EDGE_LIMIT,
        });
    }

    let mut buf = psi0.values.clone();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);

    let peak = buf.iter().map(|c| c.norm()).fold(0.0_f64, f64::max);
    // tail = the few highest-|k| bins, not just bin n/2: a packet sampled
    // symmetrically about a midpoint has an exact null at the lone Nyquist
    // bin even when the surrounding spectrum is fat
    let mut tail = 0.0_f64;
    for off in 0..=2_usize.min(n / 2) {
        tail = tail.max(buf[n / 2 - off].norm());
        tail = tail.max(buf[(n / 2 + off) % n].norm());
    }
    if peak > 0.0 && tail > ALIAS_LIMIT * peak {
        return Err(SimError::AliasingRisk {
            tail_ratio: tail / peak,
            limit: ALIAS_LIMIT,
        });
    }

    let h = psi0.grid.h();
    let dk = 2.0 * std::f64::consts::PI / (n as f64 * h);
    let dt = t - psi0.t;
    for (bin, value) in buf.iter_mut().enumerate() {
        let j = if bin <= n / 2 {
            bin as i64
        } else {
            bin as i64 - n as i64
        };
        let k = j as f64 * dk;
        let omega = params.hbar * k * k / (2.0 * params.m);
        *value *= Complex64::from_polar(1.0, -omega * dt);
    }

    planner.plan_fft_inverse(n).process(&mut buf);
    let inv_n = 1.0 / n as f64;
    for value in buf.iter_mut() {
        *value *= inv_n;
    }
    Ok(PacketField {
        grid: psi0.grid,
        t,
        values: buf,
    })
}
