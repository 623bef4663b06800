//! Dormand–Prince 5(4) integrator on complex state vectors.

use crate::{Error, Result, C64};
use alloc::vec::Vec;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// First trial step as a fraction of the interval.
    pub initial_step: f64,
    /// Steps below this (relative to the interval) count as a collapse.
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-11,
            atol: 1e-13,
            initial_step: 0.01,
            min_step: 1e-12,
            max_steps: 200_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
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
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand–Prince step; returns the fifth-order solution and the error estimate.
fn dp_step<F>(f: &mut F, t: f64, y: &[C64], h: f64) -> Result<(Vec<C64>, Vec<C64>)>
where
    F: FnMut(f64, &[C64]) -> Result<Vec<C64>>,
{
    let mut k: Vec<Vec<C64>> = Vec::with_capacity(7);
    for s in 0..7 {
        let mut ys = y.to_vec();
        for (j, kj) in k.iter().enumerate() {
            let a = A[s][j];
            if a != 0.0 {
                for (yi, ki) in ys.iter_mut().zip(kj) {
                    *yi += ki * (a * h);
                }
            }
        }
        k.push(f(t + C[s] * h, &ys)?);
    }
    let mut high = y.to_vec();
    let mut err = alloc::vec![C64::new(0.0, 0.0); y.len()];
    for s in 0..7 {
        for i in 0..y.len() {
            high[i] += k[s][i] * (B5[s] * h);
            err[i] += k[s][i] * ((B5[s] - B4[s]) * h);
        }
    }
    Ok((high, err))
}

fn error_norm(err: &[C64], y0: &[C64], y1: &[C64], opts: &OdeOptions) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..err.len() {
        let scale = opts.atol + opts.rtol * y0[i].norm().max(y1[i].norm());
        worst = worst.max(err[i].norm() / scale);
    }
    worst
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` with adaptive steps.
///
/// `observer` sees every accepted step. If it returns a monitor breach the
/// step is retried with half the size; the breach is reported once the step
/// collapses. Any other error aborts.
pub fn integrate<F, O>(
    mut f: F,
    y0: Vec<C64>,
    t0: f64,
    t1: f64,
    opts: &OdeOptions,
    mut observer: O,
) -> Result<(Vec<C64>, OdeStats)>
where
    F: FnMut(f64, &[C64]) -> Result<Vec<C64>>,
    O: FnMut(f64, &[C64]) -> Result<()>,
{
    let span = t1 - t0;
    let mut stats = OdeStats::default();
    if span == 0.0 {
        return Ok((y0, stats));
    }
    let dir = span.signum();
    let min_step = opts.min_step * span.abs();
    let mut h = opts.initial_step * span.abs();
    let mut t = t0;
    let mut y = y0;
    while (t1 - t) * dir > 0.0 {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::StepUnderflow {
                t,
                step: h,
                norm: crate::numeric::max_abs(&y),
            });
        }
        let last = h >= (t1 - t).abs();
        let step = if last { t1 - t } else { h * dir };
        let (y_new, err) = dp_step(&mut f, t, &y, step)?;
        stats.evaluations += 7;
        let e = error_norm(&err, &y, &y_new, opts);
        let finite = y_new.iter().all(|z| z.re.is_finite() && z.im.is_finite()) && e.is_finite();
        if finite && e <= 1.0 {
            let t_new = if last { t1 } else { t + step };
            match observer(t_new, &y_new) {
                Ok(()) => {}
                Err(breach @ Error::MonitorBreach { .. }) => {
                    stats.rejected += 1;
                    h = step.abs() / 2.0;
                    if h < min_step {
                        return Err(breach);
                    }
                    continue;
                }
                Err(other) => return Err(other),
            }
            stats.accepted += 1;
            t = t_new;
            y = y_new;
            let factor = if e == 0.0 {
                5.0
            } else {
                (0.9 * e.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = step.abs() * factor;
        } else {
            stats.rejected += 1;
            let factor = if finite {
                (0.9 * e.powf(-0.2)).clamp(0.1, 0.5)
            } else {
                0.25
            };
            h = step.abs() * factor;
            if h < min_step {
                return Err(Error::StepUnderflow {
                    t,
                    step: h,
                    norm: crate::numeric::max_abs(&y),
                });
            }
        }
    }
    Ok((y, stats))
}

/// Fixed-step Dormand–Prince (fifth-order solution), used for order checks.
pub fn integrate_fixed<F>(
    mut f: F,
    y0: Vec<C64>,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<Vec<C64>>
where
    F: FnMut(f64, &[C64]) -> Result<Vec<C64>>,
{
    let h = (t1 - t0) / steps as f64;
    let mut y = y0;
    for s in 0..steps {
        y = dp_step(&mut f, t0 + s as f64 * h, &y, h)?.0;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rotation(_t: f64, y: &[C64]) -> Result<Vec<C64>> {
        Ok(vec![y[0] * C64::new(0.0, 1.0)])
    }

    #[test]
    fn exponential_to_tolerance() {
        let (y, stats) = integrate(
            rotation,
            vec![C64::new(1.0, 0.0)],
            0.0,
            3.0,
            &OdeOptions::default(),
            |_, _| Ok(()),
        )
        .unwrap();
        assert!((y[0] - C64::new(0.0, 3.0).exp()).norm() < 1e-9);
        assert!(stats.accepted > 0);
    }

    #[test]
    fn backward_integration() {
        let (y, _) = integrate(
            rotation,
            vec![C64::new(1.0, 0.0)],
            1.0,
            -1.0,
            &OdeOptions::default(),
            |_, _| Ok(()),
        )
        .unwrap();
        assert!((y[0] - C64::new(0.0, -2.0).exp()).norm() < 1e-9);
    }

    #[test]
    fn fifth_order_convergence() {
        let exact = C64::new(0.0, 2.0).exp();
        let err = |n| {
            (integrate_fixed(rotation, vec![C64::new(1.0, 0.0)], 0.0, 2.0, n).unwrap()[0] - exact)
                .norm()
        };
        let ratio = err(10) / err(20);
        assert!(ratio > 24.0 && ratio < 48.0, "ratio {ratio}");
    }

    #[test]
    fn blow_up_is_reported() {
        // y' = y^2 from y(0) = 1 explodes at t = 1.
        let f = |_t: f64, y: &[C64]| Ok(vec![y[0] * y[0]]);
        let err = integrate(
            f,
            vec![C64::new(1.0, 0.0)],
            0.0,
            2.0,
            &OdeOptions::default(),
            |_, _| Ok(()),
        )
        .unwrap_err();
        assert!(matches!(err, Error::StepUnderflow { .. }));
    }

    #[test]
    fn monitor_breach_aborts() {
        let observer = |t: f64, _y: &[C64]| {
            if t > 0.5 {
                Err(Error::MonitorBreach {
                    t,
                    monitor: "test".into(),
                    value: 1.0,
                })
            } else {
                Ok(())
            }
        };
        let err = integrate(
            rotation,
            vec![C64::new(1.0, 0.0)],
            0.0,
            1.0,
            &OdeOptions::default(),
            observer,
        )
        .unwrap_err();
        assert!(matches!(err, Error::MonitorBreach { .. }));
    }
}
