//! Adaptive Dormand-Prince 5(4) stepping with dense output.
//!
//! One explicit Runge-Kutta core serves both wave functions and density matrices: the
//! stepper is generic over the ndarray dimension of the integrated quantity, and the
//! right-hand side is any fallible closure. The last accepted step keeps a fifth-order
//! interpolant so callers can sample the solution anywhere inside that step -- used to
//! locate quantum jumps without re-integrating -- and `reset` restarts the stepper from
//! a modified state (after a jump) while keeping the adapted step size.
//!
//! Step-size control is the classic I-controller with safety factor 0.9 and a
//! weighted-RMS error norm over complex components. A collapsing step size or an
//! exhausted step budget is reported as a stiffness error rather than looping forever.

use ndarray::{Array, Dimension, Zip};

use crate::error::{Error, Result};
use crate::C64;

// Dormand-Prince tableau.
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

// Difference between the fifth-order solution and the embedded fourth-order one.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Dense-output weights for the fifth-order interpolant.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;
const MAX_CONSECUTIVE_REJECTIONS: usize = 60;

/// Error-control settings for the adaptive stepper.
#[derive(Debug, Clone)]
pub struct StepControl {
    /// Relative tolerance, applied per component in the weighted-RMS norm.
    pub rtol: f64,
    /// Absolute tolerance floor per component.
    pub atol: f64,
    /// Hard upper bound on the step size.
    pub h_max: f64,
    /// Starting step size; estimated from the initial derivative when absent.
    pub h_init: Option<f64>,
    /// Bound on attempted steps (accepted + rejected) since construction or the last
    /// `reset`; exceeding it is reported as stiffness.
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            rtol: 1e-8,
            atol: 1e-10,
            h_max: f64::INFINITY,
            h_init: None,
            max_steps: 2_000_000,
        }
    }
}

/// `out = base + h * sum(coeff_i * k_i)`.
fn lincomb<D: Dimension>(
    out: &mut Array<C64, D>,
    base: &Array<C64, D>,
    h: f64,
    terms: &[(f64, &Array<C64, D>)],
) {
    out.assign(base);
    for (a, k) in terms {
        let s = h * a;
        Zip::from(&mut *out).and(*k).for_each(|o, v| *o += *v * s);
    }
}

/// `out = h * sum(coeff_i * k_i)` (no base term).
fn scaled_sum<D: Dimension>(out: &mut Array<C64, D>, h: f64, terms: &[(f64, &Array<C64, D>)]) {
    out.fill(C64::new(0.0, 0.0));
    for (a, k) in terms {
        let s = h * a;
        Zip::from(&mut *out).and(*k).for_each(|o, v| *o += *v * s);
    }
}

/// Weighted-RMS norm of `err` with per-component scale `atol + rtol * max(|a|, |b|)`.
fn wrms<D: Dimension>(
    err: &Array<C64, D>,
    a: &Array<C64, D>,
    b: &Array<C64, D>,
    atol: f64,
    rtol: f64,
) -> f64 {
    let mut acc = 0.0;
    Zip::from(err).and(a).and(b).for_each(|e, x, y| {
        let sc = atol + rtol * x.norm().max(y.norm());
        let q = e.norm() / sc;
        acc += q * q;
    });
    (acc / err.len() as f64).sqrt()
}

/// Adaptive Dormand-Prince 5(4) stepper over complex ndarray states.
pub struct Dopri5<D, F>
where
    D: Dimension,
    F: FnMut(f64, &Array<C64, D>, &mut Array<C64, D>) -> Result<()>,
{
    f: F,
    ctrl: StepControl,
    /// Start of the last accepted step (dense output is valid on [t_prev, t]).
    t_prev: f64,
    /// Current time.
    t: f64,
    /// Proposed size for the next step.
    h: f64,
    y: Array<C64, D>,
    y_new: Array<C64, D>,
    y_stage: Array<C64, D>,
    err_buf: Array<C64, D>,
    /// Stage derivatives of the step in progress; `k[0]` is `f(t, y)` (FSAL).
    k: Vec<Array<C64, D>>,
    /// Interpolant coefficients of the last accepted step.
    rcont: Vec<Array<C64, D>>,
    have_step: bool,
    last_rejected: bool,
    nsteps: usize,
    naccept: usize,
    nreject: usize,
}

impl<D, F> Dopri5<D, F>
where
    D: Dimension,
    F: FnMut(f64, &Array<C64, D>, &mut Array<C64, D>) -> Result<()>,
{
    pub fn new(mut f: F, t0: f64, y0: Array<C64, D>, ctrl: StepControl) -> Result<Self> {
        let dim = y0.raw_dim();
        let mut k: Vec<Array<C64, D>> = (0..7).map(|_| Array::zeros(dim.clone())).collect();
        f(t0, &y0, &mut k[0])?;
        let h = match ctrl.h_init {
            Some(h) => h.min(ctrl.h_max),
            None => initial_step(&mut f, t0, &y0, &k[0], &ctrl)?,
        };
        if !(h > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "initial step size must be positive, got {h}"
            )));
        }
        let rcont = (0..5).map(|_| Array::zeros(dim.clone())).collect();
        Ok(Dopri5 {
            f,
            ctrl,
            t_prev: t0,
            t: t0,
            h,
            y_new: Array::zeros(dim.clone()),
            y_stage: Array::zeros(dim.clone()),
            err_buf: Array::zeros(dim),
            y: y0,
            k,
            rcont,
            have_step: false,
            last_rejected: false,
            nsteps: 0,
            naccept: 0,
            nreject: 0,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Start of the last accepted step.
    pub fn t_prev(&self) -> f64 {
        self.t_prev
    }

    /// State at `t()`.
    pub fn y(&self) -> &Array<C64, D> {
        &self.y
    }

    pub fn accepted_steps(&self) -> usize {
        self.naccept
    }

    pub fn rejected_steps(&self) -> usize {
        self.nreject
    }

    /// Restart from a modified state (e.g. after a quantum jump). Keeps the adapted
    /// step size, recomputes the stored derivative, and invalidates dense output.
    pub fn reset(&mut self, t: f64, y: &Array<C64, D>) -> Result<()> {
        self.y.assign(y);
        self.t = t;
        self.t_prev = t;
        self.have_step = false;
        self.nsteps = 0;
        (self.f)(t, &self.y, &mut self.k[0])
    }

    /// Recompute the stored derivative at the current state. Needed when the caller
    /// changes the right-hand side between steps (e.g. updating a reference-energy
    /// shift), which silently invalidates the FSAL stage.
    pub fn refresh_derivative(&mut self) -> Result<()> {
        (self.f)(self.t, &self.y, &mut self.k[0])
    }

    /// The derivative `f(t, y)` at the current state, as last evaluated.
    pub fn derivative(&self) -> &Array<C64, D> {
        &self.k[0]
    }

    /// Take one accepted step, clipped so it never passes `t_limit`. Returns true when
    /// the limit has been reached (inclusive). Rejected attempts are retried internally.
    pub fn step_toward(&mut self, t_limit: f64) -> Result<bool> {
        if t_limit - self.t <= 0.0 {
            return Ok(true);
        }
        let mut consecutive = 0usize;
        let mut err_was_finite = true;
        let mut h = self.h.min(self.ctrl.h_max);
        loop {
            self.nsteps += 1;
            if self.nsteps > self.ctrl.max_steps {
                return Err(Error::Stiffness {
                    t: self.t,
                    h,
                    detail: format!("step budget of {} exhausted", self.ctrl.max_steps),
                });
            }
            if h < 1e-14 * self.t.abs().max(1.0) {
                return Err(Error::Stiffness {
                    t: self.t,
                    h,
                    detail: if err_was_finite {
                        "step size underflow".to_string()
                    } else {
                        "step size underflow (error norm not finite)".to_string()
                    },
                });
            }
            // stretch slightly instead of leaving a sliver, and land exactly
            let clipped = self.t + 1.01 * h >= t_limit;
            if clipped {
                h = t_limit - self.t;
            }

            let t = self.t;
            lincomb(&mut self.y_stage, &self.y, h, &[(A21, &self.k[0])]);
            (self.f)(t + C2 * h, &self.y_stage, &mut self.k[1])?;
            lincomb(
                &mut self.y_stage,
                &self.y,
                h,
                &[(A31, &self.k[0]), (A32, &self.k[1])],
            );
            (self.f)(t + C3 * h, &self.y_stage, &mut self.k[2])?;
            lincomb(
                &mut self.y_stage,
                &self.y,
                h,
                &[(A41, &self.k[0]), (A42, &self.k[1]), (A43, &self.k[2])],
            );
            (self.f)(t + C4 * h, &self.y_stage, &mut self.k[3])?;
            lincomb(
                &mut self.y_stage,
                &self.y,
                h,
                &[
                    (A51, &self.k[0]),
                    (A52, &self.k[1]),
                    (A53, &self.k[2]),
                    (A54, &self.k[3]),
                ],
            );
            (self.f)(t + C5 * h, &self.y_stage, &mut self.k[4])?;
            let t1 = if clipped { t_limit } else { t + h };
            lincomb(
                &mut self.y_stage,
                &self.y,
                h,
                &[
                    (A61, &self.k[0]),
                    (A62, &self.k[1]),
                    (A63, &self.k[2]),
                    (A64, &self.k[3]),
                    (A65, &self.k[4]),
                ],
            );
            (self.f)(t1, &self.y_stage, &mut self.k[5])?;
            lincomb(
                &mut self.y_new,
                &self.y,
                h,
                &[
                    (A71, &self.k[0]),
                    (A73, &self.k[2]),
                    (A74, &self.k[3]),
                    (A75, &self.k[4]),
                    (A76, &self.k[5]),
                ],
            );
            (self.f)(t1, &self.y_new, &mut self.k[6])?;

            scaled_sum(
                &mut self.err_buf,
                h,
                &[
                    (E1, &self.k[0]),
                    (E3, &self.k[2]),
                    (E4, &self.k[3]),
                    (E5, &self.k[4]),
                    (E6, &self.k[5]),
                    (E7, &self.k[6]),
                ],
            );
            let err = wrms(
                &self.err_buf,
                &self.y,
                &self.y_new,
                self.ctrl.atol,
                self.ctrl.rtol,
            );

            if !err.is_finite() {
                err_was_finite = false;
                h *= 0.1;
                self.nreject += 1;
                consecutive += 1;
                self.last_rejected = true;
                if consecutive > MAX_CONSECUTIVE_REJECTIONS {
                    return Err(Error::Stiffness {
                        t: self.t,
                        h,
                        detail: "error norm repeatedly not finite".to_string(),
                    });
                }
                continue;
            }

            if err <= 1.0 {
                self.build_interpolant(h);
                let fac = (SAFETY * err.powf(-0.2))
                    .min(if self.last_rejected { 1.0 } else { FAC_MAX })
                    .max(FAC_MIN);
                // a boundary-clipped step says nothing about the error scale, so keep
                // the unclipped proposal in that case
                if !clipped {
                    self.h = (h * fac).min(self.ctrl.h_max);
                }
                self.t_prev = self.t;
                self.t = t1;
                std::mem::swap(&mut self.y, &mut self.y_new);
                self.k.swap(0, 6); // FSAL: f(t1, y1) becomes the next first stage
                self.have_step = true;
                self.last_rejected = false;
                self.naccept += 1;
                return Ok(self.t >= t_limit);
            }

            let fac = (SAFETY * err.powf(-0.2)).max(FAC_MIN);
            h *= fac;
            self.nreject += 1;
            consecutive += 1;
            self.last_rejected = true;
            if consecutive > MAX_CONSECUTIVE_REJECTIONS {
                return Err(Error::Stiffness {
                    t: self.t,
                    h,
                    detail: format!("{MAX_CONSECUTIVE_REJECTIONS} consecutive step rejections"),
                });
            }
        }
    }

    /// Step until `t_end` is reached exactly.
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        while !self.step_toward(t_end)? {}
        Ok(())
    }

    /// Interpolate the solution at `t` inside the last accepted step, writing into
    /// `out`. Valid for `t` in `[t_prev(), t()]`; the argument is clamped to that span.
    pub fn dense_at(&self, t: f64, out: &mut Array<C64, D>) {
        assert!(
            self.have_step,
            "dense output requested before any accepted step"
        );
        let span = self.t - self.t_prev;
        let theta = ((t - self.t_prev) / span).clamp(0.0, 1.0);
        let theta1 = 1.0 - theta;
        Zip::from(out)
            .and(&self.rcont[0])
            .and(&self.rcont[1])
            .and(&self.rcont[2])
            .and(&self.rcont[3])
            .and(&self.rcont[4])
            .for_each(|o, r0, r1, r2, r3, r4| {
                *o = *r0 + (*r1 + (*r2 + (*r3 + *r4 * theta1) * theta) * theta1) * theta;
            });
    }

    /// Fill the interpolant buffers from the just-computed stages. Called with `y`
    /// still holding the step's starting state and `y_new` the accepted end state.
    fn build_interpolant(&mut self, h: f64) {
        let k = &self.k;
        let (head, rest) = self.rcont.split_at_mut(2);
        let (r0, r1) = head.split_at_mut(1);
        let (r2, rest) = rest.split_at_mut(1);
        let (r3, r4) = rest.split_at_mut(1);
        let (r0, r1, r2, r3, r4) = (
            &mut r0[0],
            &mut r1[0],
            &mut r2[0],
            &mut r3[0],
            &mut r4[0],
        );
        r0.assign(&self.y);
        // r1 = y1 - y0
        Zip::from(&mut *r1)
            .and(&self.y_new)
            .and(&self.y)
            .for_each(|o, a, b| *o = *a - *b);
        // r2 = h k1 - (y1 - y0)
        Zip::from(&mut *r2)
            .and(&k[0])
            .and(&*r1)
            .for_each(|o, k1, d| *o = *k1 * h - *d);
        // r3 = (y1 - y0) - h k7 - r2
        Zip::from(&mut *r3)
            .and(&*r1)
            .and(&k[6])
            .and(&*r2)
            .for_each(|o, d, k7, b| *o = *d - *k7 * h - *b);
        // r4 = h (d1 k1 + d3 k3 + d4 k4 + d5 k5 + d6 k6 + d7 k7)
        scaled_sum(
            r4,
            h,
            &[
                (D1, &k[0]),
                (D3, &k[2]),
                (D4, &k[3]),
                (D5, &k[4]),
                (D6, &k[5]),
                (D7, &k[6]),
            ],
        );
    }
}

/// Standard starting-step heuristic: balance the initial derivative against the state
/// scale, probe with one Euler step, and bound by the implied second derivative.
fn initial_step<D, F>(
    f: &mut F,
    t0: f64,
    y0: &Array<C64, D>,
    f0: &Array<C64, D>,
    ctrl: &StepControl,
) -> Result<f64>
where
    D: Dimension,
    F: FnMut(f64, &Array<C64, D>, &mut Array<C64, D>) -> Result<()>,
{
    let weight = |v: &Array<C64, D>| -> f64 {
        let mut acc = 0.0;
        Zip::from(v).and(y0).for_each(|x, y| {
            let sc = ctrl.atol + ctrl.rtol * y.norm();
            let q = x.norm() / sc;
            acc += q * q;
        });
        (acc / v.len() as f64).sqrt()
    };
    let d0 = weight(y0);
    let d1 = weight(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * (d0 / d1)
    }
    .min(ctrl.h_max);

    let mut y1 = y0.clone();
    Zip::from(&mut y1).and(f0).for_each(|y, k| *y += *k * h0);
    let mut f1 = Array::zeros(y0.raw_dim());
    if f(t0 + h0, &y1, &mut f1).is_err() {
        // the probe left the right-hand side's domain (finite schedules reject times
        // past their end); start conservatively and let the controller grow the step
        return Ok(h0.min(1e-6));
    }
    Zip::from(&mut f1).and(f0).for_each(|a, b| *a -= *b);
    let d2 = weight(&f1) / h0;

    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(ctrl.h_max))
}
