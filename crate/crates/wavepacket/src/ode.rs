//! Embedded Dormand-Prince 5(4) integration with cubic Hermite dense output,
//! and a fixed-step classical RK4 for convergence studies.
//!
//! The adaptive driver accepts a list of mandatory times and lands on each of
//! them exactly, so solution nodes double as output samples. The right-hand
//! side returns a `Result`, letting callers abort mid-step (width collapse in
//! the envelope system reports `WidthUnderflow` this way).

use crate::error::{Result, SimError};

/// Adaptive step-size knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControls {
    /// Relative tolerance of the local error test.
    pub rtol: f64,
    /// Absolute tolerance of the local error test.
    pub atol: f64,
    /// Hard cap on the step size; also bounds the dense-output segment length.
    pub max_step: f64,
    /// Below this the controller gives up with `StepSizeUnderflow`.
    pub h_min: f64,
    /// Safety cap on the number of accepted steps.
    pub max_steps: usize,
}

impl Default for StepControls {
    fn default() -> Self {
        StepControls {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: 1e-2,
            h_min: 1e-14,
            max_steps: 20_000_000,
        }
    }
}

/// Accepted nodes (t, y, f(t, y)) of one integration, interpolable between
/// nodes by cubic Hermite polynomials built from the stored derivatives.
#[derive(Debug, Clone)]
pub struct DenseOutput<const N: usize> {
    pub t: Vec<f64>,
    pub y: Vec<[f64; N]>,
    pub f: Vec<[f64; N]>,
}

impl<const N: usize> DenseOutput<N> {
    pub fn t_start(&self) -> f64 {
        self.t[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.t.last().unwrap()
    }

    /// Index of the node with time exactly `t`, if one exists.
    pub fn node_at(&self, t: f64) -> Option<usize> {
        self.t
            .binary_search_by(|probe| probe.partial_cmp(&t).unwrap())
            .ok()
    }

    /// Interpolated state. Exact (bitwise) at node times.
    pub fn eval(&self, t: f64) -> Result<[f64; N]> {
        let (y, _) = self.eval_with_index(t)?;
        Ok(y)
    }

    fn eval_with_index(&self, t: f64) -> Result<([f64; N], usize)> {
        if !(t >= self.t_start() && t <= self.t_end()) {
            return Err(SimError::OutOfRange {
                t,
                t_min: self.t_start(),
                t_max: self.t_end(),
            });
        }
        if let Some(i) = self.node_at(t) {
            return Ok((self.y[i], i));
        }
        // first node strictly past t; segment is [i-1, i]
        let i = self.t.partition_point(|&tk| tk <= t);
        let (t0, t1) = (self.t[i - 1], self.t[i]);
        let dt = t1 - t0;
        let theta = (t - t0) / dt;
        let (y0, y1, f0, f1) = (&self.y[i - 1], &self.y[i], &self.f[i - 1], &self.f[i]);
        let one_m = 1.0 - theta;
        let h00 = (1.0 + 2.0 * theta) * one_m * one_m;
        let h10 = theta * one_m * one_m;
        let h01 = theta * theta * (3.0 - 2.0 * theta);
        let h11 = theta * theta * (theta - 1.0);
        let mut out = [0.0; N];
        for k in 0..N {
            out[k] = h00 * y0[k] + h10 * dt * f0[k] + h01 * y1[k] + h11 * dt * f1[k];
        }
        Ok((out, i - 1))
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// 5th-order weights equal the last A row (FSAL); these are the embedded
// 4th-order weights used for the error estimate.
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate y' = f(t, y) from `t0` to `t_end`, landing exactly on every time
/// in `mandatory` (which must be sorted; entries outside (t0, t_end) are
/// ignored). Nodes are the accepted steps.
pub fn integrate_dp45<const N: usize, F>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    mandatory: &[f64],
    ctrl: &StepControls,
) -> Result<DenseOutput<N>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    assert!(t_end > t0, "integration span must be forward and nonempty");
    debug_assert!(
        mandatory.windows(2).all(|w| w[0] <= w[1]),
        "mandatory times must be sorted"
    );

    let mut out = DenseOutput {
        t: Vec::with_capacity(1024),
        y: Vec::with_capacity(1024),
        f: Vec::with_capacity(1024),
    };
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y)?;
    out.t.push(t);
    out.y.push(y);
    out.f.push(k1);

    let mut interior: Vec<f64> = mandatory
        .iter()
        .copied()
        .filter(|&tm| tm > t0 && tm < t_end)
        .collect();
    interior.dedup();
    let mut mand_iter = interior.into_iter();
    let mut next_mand = mand_iter.next();

    let mut h = ctrl.max_step.min(t_end - t0);
    let mut steps = 0usize;
    let mut ks = [[0.0; N]; 7];

    while t < t_end {
        steps += 1;
        if steps > ctrl.max_steps {
            return Err(SimError::StepSizeUnderflow {
                t,
                h_min: ctrl.h_min,
            });
        }

        // aim for the next mandatory time or the end, whichever comes first
        let mut h_try = h.min(ctrl.max_step);
        let mut target: Option<f64> = None;
        if let Some(tm) = next_mand {
            if t + h_try >= tm {
                h_try = tm - t;
                target = Some(tm);
            }
        }
        if target.is_none() && t + h_try >= t_end {
            h_try = t_end - t;
            target = Some(t_end);
        }

        // one DP45 attempt
        ks[0] = k1;
        let mut reject = false;
        let mut y5 = [0.0; N];
        let mut err_norm = 0.0f64;
        {
            for s in 1..7 {
                let mut ys = y;
                for (j, ksj) in ks.iter().enumerate().take(s) {
                    let a = A[s - 1][j];
                    if a != 0.0 {
                        for i in 0..N {
                            ys[i] += h_try * a * ksj[i];
                        }
                    }
                }
                ks[s] = f(t + C[s] * h_try, &ys)?;
            }
            // stage 7 state is the 5th-order solution (FSAL)
            for i in 0..N {
                let mut acc = y[i];
                for (j, ksj) in ks.iter().enumerate().take(6) {
                    let a = A[5][j];
                    if a != 0.0 {
                        acc += h_try * a * ksj[i];
                    }
                }
                y5[i] = acc;
            }
            for i in 0..N {
                let mut y4 = y[i];
                for (j, ksj) in ks.iter().enumerate() {
                    if B4[j] != 0.0 {
                        y4 += h_try * B4[j] * ksj[i];
                    }
                }
                let scale = ctrl.atol + ctrl.rtol * y[i].abs().max(y5[i].abs());
                err_norm = err_norm.max(((y5[i] - y4) / scale).abs());
            }
            if !err_norm.is_finite() {
                reject = true;
                err_norm = f64::MAX;
            } else if err_norm > 1.0 {
                reject = true;
            }
        }

        if reject {
            let shrink = (0.9 * err_norm.powf(-0.2)).max(0.2);
            h = h_try * shrink;
            if h < ctrl.h_min {
                return Err(SimError::StepSizeUnderflow {
                    t,
                    h_min: ctrl.h_min,
                });
            }
            continue;
        }

        // accept: land exactly on the target when one was clamped to
        t = match target {
            Some(tm) if h_try == tm - t => tm,
            _ => t + h_try,
        };
        y = y5;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFiniteState { t });
        }
        k1 = ks[6]; // FSAL: stage 7 derivative is f(t_new, y_new)
        out.t.push(t);
        out.y.push(y);
        out.f.push(k1);
        if Some(t) == next_mand {
            next_mand = mand_iter.next();
        }

        let grow = if err_norm == 0.0 {
            5.0
        } else {
            (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
        };
        // A step artificially shortened to land on a target says nothing
        // about the step the error controller actually wants; resume from
        // the natural proposal (a clamped landing can be arbitrarily short,
        // e.g. when the previous step stopped one rounding error before a
        // node, and must not collapse the controller).
        let basis = if target.is_some() {
            (h_try * grow).max(h.min(ctrl.max_step))
        } else {
            h_try * grow
        };
        h = basis.min(ctrl.max_step);
        if h < ctrl.h_min {
            return Err(SimError::StepSizeUnderflow {
                t,
                h_min: ctrl.h_min,
            });
        }
    }

    Ok(out)
}

/// Classical fixed-step RK4 over `n_steps` equal steps; nodes at every step.
pub fn integrate_rk4<const N: usize, F>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    n_steps: usize,
) -> Result<DenseOutput<N>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    assert!(t_end > t0 && n_steps > 0);
    let h = (t_end - t0) / n_steps as f64;
    let mut out = DenseOutput {
        t: Vec::with_capacity(n_steps + 1),
        y: Vec::with_capacity(n_steps + 1),
        f: Vec::with_capacity(n_steps + 1),
    };
    let mut t = t0;
    let mut y = y0;
    let mut fy = f(t, &y)?;
    out.t.push(t);
    out.y.push(y);
    out.f.push(fy);
    for step in 1..=n_steps {
        let k1 = fy;
        let mut y2 = [0.0; N];
        for i in 0..N {
            y2[i] = y[i] + 0.5 * h * k1[i];
        }
        let k2 = f(t + 0.5 * h, &y2)?;
        let mut y3 = [0.0; N];
        for i in 0..N {
            y3[i] = y[i] + 0.5 * h * k2[i];
        }
        let k3 = f(t + 0.5 * h, &y3)?;
        let mut y4 = [0.0; N];
        for i in 0..N {
            y4[i] = y[i] + h * k3[i];
        }
        let k4 = f(t + h, &y4)?;
        for i in 0..N {
            y[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t = t0 + step as f64 * h;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFiniteState { t });
        }
        fy = f(t, &y)?;
        out.t.push(t);
        out.y.push(y);
        out.f.push(fy);
    }
    Ok(out)
}
