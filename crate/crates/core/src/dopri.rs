//! Dormand–Prince 5(4) stepper for first-order systems `y' = g(t, y)`.
//!
//! Step-size control follows the classic PI controller (safety 0.9, step
//! ratio clamped to [0.2, 5]). Every accepted step keeps the coefficients of
//! the method's 4th-order continuous extension.

use crate::ode::{IntegratorConfig, OdeError};
use crate::scalar::Real;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// difference between the 5th and embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// continuous extension
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const MIN_RATIO: f64 = 0.2;
const MAX_RATIO: f64 = 5.0;
const PI_BETA: f64 = 0.04;

/// One accepted step with its continuous extension.
#[derive(Debug, Clone)]
pub(crate) struct Segment<T> {
    pub t_a: T,
    pub t_b: T,
    pub h: T,
    pub y_a: Vec<T>,
    pub y_b: Vec<T>,
    /// `y_b - y_a`, then the three higher Hermite-like coefficients.
    pub r: [Vec<T>; 4],
}

impl<T: Real> Segment<T> {
    pub fn hi(&self) -> T {
        self.t_a.max(self.t_b)
    }

    pub fn eval(&self, t: T) -> Vec<T> {
        if t == self.t_a {
            return self.y_a.clone();
        }
        if t == self.t_b {
            return self.y_b.clone();
        }
        self.eval_theta((t - self.t_a) / self.h)
    }

    /// Continuous extension at `theta` in [0, 1] along the step.
    pub fn eval_theta(&self, theta: T) -> Vec<T> {
        let theta1 = T::one() - theta;
        (0..self.y_a.len())
            .map(|i| {
                self.y_a[i]
                    + theta
                        * (self.r[0][i]
                            + theta1
                                * (self.r[1][i] + theta * (self.r[2][i] + theta1 * self.r[3][i])))
            })
            .collect()
    }
}

pub(crate) struct SystemSolution<T> {
    pub segments: Vec<Segment<T>>,
    pub y_end: Vec<T>,
}

/// Integrates `y' = g(t, y)` from `t0` to `t_end`.
///
/// `rhs` must fill its output slice and report failures itself; the stepper
/// rejects non-finite derivatives with [`OdeError::NonFiniteRhs`].
pub(crate) fn integrate_system<T, G>(
    mut rhs: G,
    t0: T,
    y0: &[T],
    t_end: T,
    cfg: &IntegratorConfig<T>,
    keep_dense: bool,
) -> Result<SystemSolution<T>, OdeError>
where
    T: Real,
    G: FnMut(T, &[T], &mut [T]) -> Result<(), OdeError>,
{
    let n = y0.len();
    let mut segments = Vec::new();
    if t_end == t0 {
        return Ok(SystemSolution {
            segments,
            y_end: y0.to_vec(),
        });
    }

    let c = T::lit;
    let direction = (t_end - t0).signum();
    let span = (t_end - t0).abs();

    let mut eval = |t: T, y: &[T], out: &mut [T]| -> Result<(), OdeError> {
        rhs(t, y, out)?;
        if out.iter().any(|d| !d.is_finite()) {
            return Err(OdeError::NonFiniteRhs { tau: t.as_f64() });
        }
        Ok(())
    };

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![T::zero(); n];
    let mut k2 = vec![T::zero(); n];
    let mut k3 = vec![T::zero(); n];
    let mut k4 = vec![T::zero(); n];
    let mut k5 = vec![T::zero(); n];
    let mut k6 = vec![T::zero(); n];
    let mut k7 = vec![T::zero(); n];
    let mut stage = vec![T::zero(); n];
    let mut y_new = vec![T::zero(); n];
    eval(t, &y, &mut k1)?;

    let mut h = cfg.h_init.min(span) * direction;
    let mut fac_old = c(1e-4);
    let expo = c(0.2 - PI_BETA * 0.75);
    let mut last_rejected = false;
    let mut attempts = 0usize;

    loop {
        attempts += 1;
        if attempts > cfg.max_steps {
            return Err(OdeError::MaxStepsExceeded {
                tau: t.as_f64(),
                max_steps: cfg.max_steps,
            });
        }

        // clip onto the endpoint; a step within 1% of it lands exactly
        let remaining = t_end - t;
        let last = (h * c(1.01)).abs() >= remaining.abs();
        if last {
            h = remaining;
        }

        for i in 0..n {
            stage[i] = y[i] + h * c(A21) * k1[i];
        }
        eval(t + c(C2) * h, &stage, &mut k2)?;
        for i in 0..n {
            stage[i] = y[i] + h * (c(A31) * k1[i] + c(A32) * k2[i]);
        }
        eval(t + c(C3) * h, &stage, &mut k3)?;
        for i in 0..n {
            stage[i] = y[i] + h * (c(A41) * k1[i] + c(A42) * k2[i] + c(A43) * k3[i]);
        }
        eval(t + c(C4) * h, &stage, &mut k4)?;
        for i in 0..n {
            stage[i] = y[i]
                + h * (c(A51) * k1[i] + c(A52) * k2[i] + c(A53) * k3[i] + c(A54) * k4[i]);
        }
        eval(t + c(C5) * h, &stage, &mut k5)?;
        for i in 0..n {
            stage[i] = y[i]
                + h * (c(A61) * k1[i]
                    + c(A62) * k2[i]
                    + c(A63) * k3[i]
                    + c(A64) * k4[i]
                    + c(A65) * k5[i]);
        }
        let t_new = if last { t_end } else { t + h };
        eval(t_new, &stage, &mut k6)?;
        for i in 0..n {
            y_new[i] = y[i]
                + h * (c(A71) * k1[i]
                    + c(A73) * k3[i]
                    + c(A74) * k4[i]
                    + c(A75) * k5[i]
                    + c(A76) * k6[i]);
        }
        eval(t_new, &y_new, &mut k7)?;

        let mut sum = T::zero();
        for i in 0..n {
            let e = h
                * (c(E1) * k1[i]
                    + c(E3) * k3[i]
                    + c(E4) * k4[i]
                    + c(E5) * k5[i]
                    + c(E6) * k6[i]
                    + c(E7) * k7[i]);
            let sk = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y_new[i].abs());
            sum = sum + (e / sk) * (e / sk);
        }
        let err = (sum / T::from_usize(n.max(1)).unwrap()).sqrt();

        if err.is_finite() && err <= T::one() {
            let fac11 = err.powf(expo);
            let mut fac = fac11 / fac_old.powf(c(PI_BETA));
            fac = (fac / c(SAFETY)).min(c(1.0 / MIN_RATIO)).max(c(1.0 / MAX_RATIO));
            fac_old = err.max(c(1e-4));

            if keep_dense {
                let mut r = [
                    vec![T::zero(); n],
                    vec![T::zero(); n],
                    vec![T::zero(); n],
                    vec![T::zero(); n],
                ];
                for i in 0..n {
                    let dy = y_new[i] - y[i];
                    let bspl = h * k1[i] - dy;
                    r[0][i] = dy;
                    r[1][i] = bspl;
                    r[2][i] = dy - h * k7[i] - bspl;
                    r[3][i] = h
                        * (c(D1) * k1[i]
                            + c(D3) * k3[i]
                            + c(D4) * k4[i]
                            + c(D5) * k5[i]
                            + c(D6) * k6[i]
                            + c(D7) * k7[i]);
                }
                segments.push(Segment {
                    t_a: t,
                    t_b: t_new,
                    h,
                    y_a: y.clone(),
                    y_b: y_new.clone(),
                    r,
                });
            }

            std::mem::swap(&mut k1, &mut k7);
            std::mem::swap(&mut y, &mut y_new);
            t = t_new;
            if last {
                break;
            }

            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.abs().min(h.abs()) * direction;
            }
            last_rejected = false;
            if h_new.abs() < cfg.h_min && (t_end - t).abs() > h_new.abs() {
                return Err(OdeError::StepSizeUnderflow {
                    tau: t.as_f64(),
                    h: h_new.abs().as_f64(),
                });
            }
            h = h_new;
        } else {
            let shrink = if err.is_finite() {
                (err.powf(expo) / c(SAFETY)).min(c(1.0 / MIN_RATIO))
            } else {
                c(1.0 / MIN_RATIO)
            };
            h = h / shrink;
            last_rejected = true;
            if h.abs() < cfg.h_min {
                return Err(OdeError::StepSizeUnderflow {
                    tau: t.as_f64(),
                    h: h.abs().as_f64(),
                });
            }
        }
    }

    Ok(SystemSolution { segments, y_end: y })
}
