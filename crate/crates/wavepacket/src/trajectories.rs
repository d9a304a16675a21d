//! Trajectory bundles transported by the packet's velocity field.
//!
//! A trajectory x(t) solves dx/dt = v(x, t) where v is the hydrodynamic
//! velocity of the evolving packet. Because v is affine in x, the flow map is
//! affine in the starting point and has a closed form built from the envelope
//! solution:
//!
//! ```text
//!   x(t) = q(t) + e^{t/(2 tau)} * (delta(t) / delta(0)) * (x(0) - q(0))
//! ```
//!
//! (the exponential factor is 1 when measurement is off). The module computes
//! bundles of trajectories both ways — the closed form above, and direct
//! numerical integration of dx/dt = v(x, t) — so the two can be checked
//! against each other.

use crate::dynamics::EnvelopeSolution;
use crate::error::{Result, SimError};
use crate::ode::{self, StepControls};
use crate::packet;

/// How a trajectory bundle was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Closed-form affine flow map built from the envelope solution.
    ClosedForm,
    /// Adaptive numerical integration of dx/dt = v(x, t).
    Integrated,
}

/// A family of trajectories sampled on a common time grid.
///
/// `paths[i][k]` is the position of the trajectory started at `seeds[i]`,
/// evaluated at `times[k]`. Row order matches seed order.
#[derive(Debug, Clone)]
pub struct TrajectoryBundle {
    pub seeds: Vec<f64>,
    pub times: Vec<f64>,
    pub paths: Vec<Vec<f64>>,
    pub method: Method,
}

impl TrajectoryBundle {
    /// Half the spread of the bundle at time index `k`:
    /// `(max_i paths[i][k] - min_i paths[i][k]) / 2`.
    ///
    /// Because the flow map is affine and order-preserving, this tracks how
    /// the packet stretches any initial interval of starting points.
    pub fn half_width(&self, k: usize) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for path in &self.paths {
            let x = path[k];
            lo = lo.min(x);
            hi = hi.max(x);
        }
        0.5 * (hi - lo)
    }
}

/// Closed-form trajectory position at time `t` for a trajectory started at
/// `seed` when the envelope was at its initial state.
///
/// Errors with `OutOfRange` if `t` is outside the envelope solution's span
/// and with `Overflow` if the measurement stretch factor e^{t/(2 tau)}
/// overflows.
pub fn trajectory_closed(sol: &EnvelopeSolution, seed: f64, t: f64) -> Result<f64> {
    if !(0.0..=sol.t_end()).contains(&t) {
        return Err(SimError::OutOfRange {
            t,
            t_min: 0.0,
            t_max: sol.t_end(),
        });
    }
    // at t = 0 the flow map is the identity; return the seed bitwise rather
    // than round-tripping through q(0) + (seed - q(0))
    if t == 0.0 {
        return Ok(seed);
    }
    let state = sol.state_at(t)?;
    let stretch = sol.params.stretch_factor(t)?;
    let factor = stretch * (state.delta / sol.ic.a0);
    Ok(state.q + factor * (seed - sol.ic.x0))
}

/// Trajectory positions at each requested time, produced by adaptive
/// integration of dx/dt = v(x, t) with the packet's velocity field.
///
/// `times` must be sorted ascending and lie within the envelope solution's
/// span; every requested time is hit exactly by the integrator (no
/// interpolation error on the reported samples).
pub fn trajectory_integrated(sol: &EnvelopeSolution, seed: f64, times: &[f64]) -> Result<Vec<f64>> {
    check_times(sol, times)?;
    if times.is_empty() {
        return Ok(Vec::new());
    }
    let t_max = *times.last().expect("non-empty");
    if t_max == 0.0 {
        return Ok(vec![seed; times.len()]);
    }
    let params = &sol.params;
    let rhs = |t: f64, y: &[f64; 1]| -> Result<[f64; 1]> {
        // internal stages may poke an ulp past the final time; clamp so the
        // envelope lookup stays in range
        let tc = t.clamp(0.0, sol.t_end());
        let state = sol.state_at(tc)?;
        Ok([packet::velocity_field(&state, y[0], params)])
    };
    let ctrl = StepControls {
        rtol: 1e-10,
        atol: 1e-12,
        ..StepControls::default()
    };
    let dense = ode::integrate_dp45(rhs, 0.0, [seed], t_max, times, &ctrl)?;
    times
        .iter()
        .map(|&t| {
            if t == 0.0 {
                return Ok(seed);
            }
            let i = dense
                .node_at(t)
                .expect("requested times are mandatory integration nodes");
            Ok(dense.y[i][0])
        })
        .collect()
}

/// Computes a bundle of trajectories, one per seed, sampled at `times`.
pub fn bundle(
    sol: &EnvelopeSolution,
    seeds: &[f64],
    times: &[f64],
    method: Method,
) -> Result<TrajectoryBundle> {
    check_times(sol, times)?;
    for &s in seeds {
        if !s.is_finite() {
            return Err(SimError::ValidationError(format!(
                "trajectory seed must be finite, got {s}"
            )));
        }
    }
    let mut paths = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let path = match method {
            Method::ClosedForm => times
                .iter()
                .map(|&t| trajectory_closed(sol, seed, t))
                .collect::<Result<Vec<f64>>>()?,
            Method::Integrated => trajectory_integrated(sol, seed, times)?,
        };
        paths.push(path);
    }
    Ok(TrajectoryBundle {
        seeds: seeds.to_vec(),
        times: times.to_vec(),
        paths,
        method,
    })
}

fn check_times(sol: &EnvelopeSolution, times: &[f64]) -> Result<()> {
    for &t in times {
        if !(0.0..=sol.t_end()).contains(&t) {
            return Err(SimError::OutOfRange {
                t,
                t_min: 0.0,
                t_max: sol.t_end(),
            });
        }
    }
    if times.windows(2).any(|w| w[0] > w[1]) {
        return Err(SimError::ValidationError(
            "trajectory sample times must be sorted ascending".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{self, Controls};
    use crate::params::{
        DriveSchedule, FrequencySchedule, InitialConditions, Measurement, PhysicalParams,
    };

    fn solve(params: PhysicalParams, ic: InitialConditions, t_end: f64) -> EnvelopeSolution {
        dynamics::integrate(&params, &ic, t_end, &Controls::default_run()).expect("integrates")
    }

    /// steady packet (width pinned at the fixed point): the closed map is a
    /// pure exponential stretch about the resting center
    #[test]
    fn closed_steady_packet_stretches_exponentially() {
        let params = PhysicalParams::natural(Measurement::On { tau: 1.0 });
        let ic = InitialConditions::at_rest(1.0);
        let sol = solve(params, ic, 4.0);
        // delta stays exactly at the fixed point, so x(t) = e^{t/2} * seed
        let x = trajectory_closed(&sol, 0.1, 2.0).unwrap();
        assert!((x - 0.1 * std::f64::consts::E).abs() < 1e-12, "x = {x}");
        let x = trajectory_closed(&sol, -0.3, 2.0).unwrap();
        assert!((x + 0.3 * std::f64::consts::E).abs() < 1e-12, "x = {x}");
    }

    /// at t = 0 the map is the identity, bitwise, even with a moving center
    #[test]
    fn closed_time_zero_is_identity() {
        let params = PhysicalParams::natural(Measurement::Off);
        let ic = InitialConditions {
            x0: 0.1,
            v0: 0.7,
            a0: 1.0,
            b0: 0.0,
        };
        let sol = solve(params, ic, 1.0);
        for seed in [0.3, -2.5, 0.1, 1e-17, 0.0] {
            let x = trajectory_closed(&sol, seed, 0.0).unwrap();
            assert_eq!(x, seed);
        }
    }

    /// a trajectory seeded at the packet center rides the center exactly
    #[test]
    fn closed_center_seed_follows_center() {
        let params = PhysicalParams::natural(Measurement::Off);
        let ic = InitialConditions {
            x0: 0.5,
            v0: 0.3,
            a0: 1.0,
            b0: 0.0,
        };
        let sol = solve(params, ic, 3.0);
        for &t in &[0.5, 1.0, 2.0, 3.0] {
            let x = trajectory_closed(&sol, 0.5, t).unwrap();
            let q = sol.state_at(t).unwrap().q;
            assert_eq!(x, q, "center seed must track q bitwise at t = {t}");
        }
    }

    /// free spreading packet: the map scales offsets by delta(t)/delta(0)
    #[test]
    fn closed_free_spreading_scales_by_width_ratio() {
        let params = PhysicalParams::natural(Measurement::Off);
        let ic = InitialConditions::at_rest(1.0);
        let sol = solve(params, ic, 2.0);
        // delta(2) = sqrt(2) in these units, stretch factor is exactly 1
        let x = trajectory_closed(&sol, 0.4, 2.0).unwrap();
        assert!((x - 0.4 * 2.0_f64.sqrt()).abs() < 1e-8, "x = {x}");
    }

    /// with measurement off the stretch factor is exactly one, so the spread
    /// of a bundle is exactly the width ratio
    #[test]
    fn bundle_half_width_tracks_width_ratio_measurement_off() {
        let params = PhysicalParams::natural(Measurement::Off);
        let ic = InitialConditions::at_rest(1.0);
        let sol = solve(params, ic, 2.0);
        let seeds = [-0.2, -0.1, 0.0, 0.1, 0.2];
        let times = [0.0, 0.5, 1.0, 1.5, 2.0];
        let b = bundle(&sol, &seeds, &times, Method::ClosedForm).unwrap();
        let w0 = b.half_width(0);
        assert_eq!(w0, 0.2);
        for (k, &t) in times.iter().enumerate() {
            let ratio = b.half_width(k) / w0;
            let delta_ratio = sol.state_at(t).unwrap().delta / 1.0;
            assert!(
                (ratio - delta_ratio).abs() < 1e-12,
                "t = {t}: bundle ratio {ratio} vs width ratio {delta_ratio}"
            );
        }
    }

    /// measurement on at the width fixed point: bundle spread grows as
    /// e^{t/(2 tau)} to high accuracy
    #[test]
    fn bundle_stretch_is_exponential_at_fixed_point() {
        let params = PhysicalParams::natural(Measurement::On { tau: 1.0 });
        let ic = InitialConditions::at_rest(1.0);
        let sol = solve(params, ic, 5.0);
        let seeds = [-0.2, -0.1, 0.0, 0.1, 0.2];
        let times: Vec<f64> = (0..=10).map(|k| 0.5 * k as f64).collect();
        for method in [Method::ClosedForm, Method::Integrated] {
            let b = bundle(&sol, &seeds, &times, method).unwrap();
            let w0 = b.half_width(0);
            for (k, &t) in times.iter().enumerate() {
                let expected = (t / 2.0).exp();
                let got = b.half_width(k) / w0;
                assert!(
                    (got - expected).abs() / expected < 1e-6,
                    "{method:?} at t = {t}: stretch {got} vs e^(t/2) = {expected}"
                );
            }
        }
    }

    /// the numerically integrated trajectory agrees with the closed form
    #[test]
    fn integrated_matches_closed_form() {
        let cases: Vec<(PhysicalParams, InitialConditions, f64)> = vec![
            (
                PhysicalParams::natural(Measurement::On { tau: 1.0 }),
                InitialConditions::at_rest(1.1),
                5.0,
            ),
            (
                PhysicalParams::natural(Measurement::Off),
                InitialConditions::at_rest(1.0),
                5.0,
            ),
            (
                PhysicalParams {
                    omega: FrequencySchedule::Constant(1.0),
                    ..PhysicalParams::natural(Measurement::Off)
                },
                InitialConditions {
                    x0: 1.0,
                    v0: 0.0,
                    a0: (0.5_f64).sqrt(),
                    b0: 0.0,
                },
                5.0,
            ),
        ];
        let times: Vec<f64> = (0..=20).map(|k| 0.25 * k as f64).collect();
        let seeds = [-0.5, -0.1, 0.0, 0.3, 0.8];
        for (params, ic, t_end) in cases {
            let sol = solve(params, ic, t_end);
            for &seed in &seeds {
                let integ = trajectory_integrated(&sol, seed, &times).unwrap();
                for (k, &t) in times.iter().enumerate() {
                    let closed = trajectory_closed(&sol, seed, t).unwrap();
                    assert!(
                        (integ[k] - closed).abs() < 1e-6,
                        "seed {seed} at t = {t}: integrated {} vs closed {closed}",
                        integ[k]
                    );
                }
            }
        }
    }

    /// integrated path seeded at the center stays on the center
    #[test]
    fn integrated_center_seed_follows_center() {
        let params = PhysicalParams::natural(Measurement::Off);
        let ic = InitialConditions {
            x0: 0.5,
            v0: 0.3,
            a0: 1.0,
            b0: 0.0,
        };
        let sol = solve(params, ic, 3.0);
        let times: Vec<f64> = (0..=12).map(|k| 0.25 * k as f64).collect();
        let path = trajectory_integrated(&sol, 0.5, &times).unwrap();
        for (k, &t) in times.iter().enumerate() {
            let q = sol.state_at(t).unwrap().q;
            assert!(
                (path[k] - q).abs() < 1e-9,
                "t = {t}: path {} vs center {q}",
                path[k]
            );
        }
    }

    /// the first sample of an integrated path reproduces the seed bitwise
    #[test]
    fn integrated_time_zero_is_identity() {
        let params = PhysicalParams::natural(Measurement::Off);
        let ic = InitialConditions {
            x0: 0.1,
            v0: 0.7,
            a0: 1.0,
            b0: 0.0,
        };
        let sol = solve(params, ic, 1.0);
        let times = [0.0, 0.5, 1.0];
        for seed in [0.3, -2.5, 1e-17] {
            let path = trajectory_integrated(&sol, seed, &times).unwrap();
            assert_eq!(path[0], seed);
        }
    }

    /// symmetric seeds about a resting center give mirror-image paths
    #[test]
    fn symmetric_seeds_give_symmetric_paths() {
        let params = PhysicalParams::natural(Measurement::On { tau: 1.0 });
        let ic = InitialConditions::at_rest(1.3);
        let sol = solve(params, ic, 4.0);
        let times: Vec<f64> = (0..=8).map(|k| 0.5 * k as f64).collect();
        for method in [Method::ClosedForm, Method::Integrated] {
            let b = bundle(&sol, &[-0.7, 0.7], &times, method).unwrap();
            for (k, &t) in times.iter().enumerate() {
                let asym = (b.paths[0][k] + b.paths[1][k]).abs();
                assert!(asym < 1e-9, "{method:?} at t = {t}: asymmetry {asym}");
            }
        }
    }

    /// the flow map is affine in the seed: equispaced seeds stay equispaced
    #[test]
    fn closed_map_is_affine_in_seed() {
        let params = PhysicalParams {
            omega: FrequencySchedule::Constant(2.0),
            lambda: 0.5,
            drive: DriveSchedule::Sinusoid {
                amplitude: 1.0,
                omega_x: 1.0,
                phase: 0.0,
            },
            ..PhysicalParams::natural(Measurement::On { tau: 1.0 })
        };
        let ic = InitialConditions::at_rest(1.0);
        let sol = solve(params, ic, 5.0);
        for &t in &[0.7, 2.3, 5.0] {
            let x0 = trajectory_closed(&sol, -0.4, t).unwrap();
            let x1 = trajectory_closed(&sol, 0.1, t).unwrap();
            let x2 = trajectory_closed(&sol, 0.6, t).unwrap();
            let span = (x2 - x0).abs().max(1e-300);
            let deviation = (x2 - 2.0 * x1 + x0).abs() / span;
            assert!(
                deviation < 1e-10,
                "t = {t}: collinearity deviation {deviation}"
            );
        }
    }

    /// seed order is preserved along every trajectory (paths never cross)
    #[test]
    fn paths_preserve_seed_order() {
        let params = PhysicalParams::natural(Measurement::On { tau: 0.5 });
        let ic = InitialConditions::at_rest(0.9);
        let sol = solve(params, ic, 3.0);
        let seeds = [-1.0, -0.2, 0.05, 0.4, 1.5];
        let times: Vec<f64> = (0..=6).map(|k| 0.5 * k as f64).collect();
        for method in [Method::ClosedForm, Method::Integrated] {
            let b = bundle(&sol, &seeds, &times, method).unwrap();
            for k in 0..times.len() {
                for i in 1..seeds.len() {
                    assert!(
                        b.paths[i - 1][k] < b.paths[i][k],
                        "{method:?}: order violated at time index {k}"
                    );
                }
            }
        }
    }

    #[test]
    fn out_of_range_time_is_rejected() {
        let params = PhysicalParams::natural(Measurement::Off);
        let ic = InitialConditions::at_rest(1.0);
        let sol = solve(params, ic, 1.0);
        assert!(matches!(
            trajectory_closed(&sol, 0.1, 1.5),
            Err(SimError::OutOfRange { .. })
        ));
        assert!(matches!(
            trajectory_closed(&sol, 0.1, -0.1),
            Err(SimError::OutOfRange { .. })
        ));
        assert!(matches!(
            trajectory_integrated(&sol, 0.1, &[0.0, 2.0]),
            Err(SimError::OutOfRange { .. })
        ));
        assert!(matches!(
            bundle(&sol, &[0.1], &[0.5, 0.25], Method::ClosedForm),
            Err(SimError::ValidationError(_))
        ));
    }

    /// a very small measurement time makes the stretch factor overflow
    #[test]
    fn stretch_overflow_is_reported() {
        let params = PhysicalParams::natural(Measurement::On { tau: 1e-3 });
        // seed the width at its fixed point so the envelope itself stays tame
        let a0 = dynamics::steady_width(&params).expect("constant frequency");
        let ic = InitialConditions::at_rest(a0);
        let sol = solve(params, ic, 2.0);
        assert!(matches!(
            trajectory_closed(&sol, 0.1, 2.0),
            Err(SimError::Overflow { .. })
        ));
    }

    #[test]
    fn non_finite_seed_is_rejected() {
        let params = PhysicalParams::natural(Measurement::Off);
        let ic = InitialConditions::at_rest(1.0);
        let sol = solve(params, ic, 1.0);
        assert!(matches!(
            bundle(&sol, &[0.1, f64::NAN], &[0.0, 1.0], Method::ClosedForm),
            Err(SimError::ValidationError(_))
        ));
    }

    /// duplicate requested times are tolerated and give identical samples
    #[test]
    fn duplicate_times_are_tolerated() {
        let params = PhysicalParams::natural(Measurement::Off);
        let ic = InitialConditions::at_rest(1.0);
        let sol = solve(params, ic, 1.0);
        let path = trajectory_integrated(&sol, 0.3, &[0.0, 0.5, 0.5, 1.0]).unwrap();
        assert_eq!(path.len(), 4);
        assert_eq!(path[1], path[2]);
    }
}
