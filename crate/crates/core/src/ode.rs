//! Adaptive Dormand-Prince 5(4) integration for small fixed-size systems.

use nalgebra::SVector;
use std::ops::{Add, Mul};

/// A state vector the integrator can combine linearly and measure.
pub trait OdeState: Copy + Add<Output = Self> + Mul<f64, Output = Self> {
    /// Root-mean-square of `err` scaled by `atol + rtol * max(|a|, |b|)`.
    fn error_norm(err: &Self, a: &Self, b: &Self, opts: &OdeOptions) -> f64;
    fn is_finite(&self) -> bool;
}

impl<const N: usize> OdeState for SVector<f64, N> {
    fn error_norm(err: &Self, a: &Self, b: &Self, opts: &OdeOptions) -> f64 {
        let mut acc = 0.0;
        for i in 0..N {
            let sc = opts.atol + opts.rtol * a[i].abs().max(b[i].abs());
            acc += (err[i] / sc).powi(2);
        }
        (acc / N as f64).sqrt()
    }
    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub h_init: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            h_max: 0.1,
            h_init: 1e-3,
            max_steps: 200_000,
        }
    }
}

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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// difference between the 5th and embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// One Dormand-Prince step of size `h` from `(t, y)` with `f0 = f(t, y)`.
/// Returns the new state, its derivative (reused by the next step) and the
/// scaled error norm.
pub fn dopri_step<S: OdeState, F>(
    f: &F,
    t: f64,
    y: &S,
    f0: &S,
    h: f64,
    opts: &OdeOptions,
) -> (S, S, f64)
where
    F: Fn(f64, &S) -> S,
{
    let y = *y;
    let k1 = *f0;
    let k2 = f(t + C2 * h, &(y + k1 * (h * A21)));
    let k3 = f(t + C3 * h, &(y + (k1 * A31 + k2 * A32) * h));
    let k4 = f(t + C4 * h, &(y + (k1 * A41 + k2 * A42 + k3 * A43) * h));
    let k5 = f(
        t + C5 * h,
        &(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h),
    );
    let k6 = f(
        t + h,
        &(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h),
    );
    let y1 = y + (k1 * B1 + k3 * B3 + k4 * B4 + k5 * B5 + k6 * B6) * h;
    let k7 = f(t + h, &y1);
    let err = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
    (y1, k7, S::error_norm(&err, &y, &y1, opts))
}

/// Stateful adaptive integrator that advances one accepted step at a time.
pub struct Dopri5<S, F> {
    f: F,
    opts: OdeOptions,
    pub t: f64,
    pub y: S,
    pub dy: S,
    h: f64,
    pub steps: usize,
}

impl<S: OdeState, F> Dopri5<S, F>
where
    F: Fn(f64, &S) -> S,
{
    pub fn new(f: F, t0: f64, y0: S, opts: OdeOptions) -> Self {
        let dy = f(t0, &y0);
        Self {
            f,
            h: opts.h_init.min(opts.h_max),
            opts,
            t: t0,
            y: y0,
            dy,
            steps: 0,
        }
    }

    pub fn rhs(&self) -> &F {
        &self.f
    }

    pub fn options(&self) -> &OdeOptions {
        &self.opts
    }

    /// Takes one accepted step. Returns `false` once `max_steps` is exhausted.
    pub fn advance(&mut self) -> bool {
        if self.steps >= self.opts.max_steps {
            return false;
        }
        loop {
            let (y1, dy1, err) = dopri_step(&self.f, self.t, &self.y, &self.dy, self.h, &self.opts);
            let ok = err <= 1.0 && y1.is_finite();
            let fac = if err == 0.0 || !err.is_finite() {
                if err.is_finite() { 5.0 } else { 0.2 }
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if ok {
                self.t += self.h;
                self.y = y1;
                self.dy = dy1;
                self.h = (self.h * fac).min(self.opts.h_max);
                self.steps += 1;
                return true;
            }
            self.h *= fac.min(1.0);
            if self.h < 1e-14 * (1.0 + self.t.abs()) {
                self.steps = self.opts.max_steps;
                return false;
            }
        }
    }

    /// Single unchecked step of size `h` from the current state.
    pub fn trial(&self, h: f64) -> (S, S) {
        let (y1, dy1, _) = dopri_step(&self.f, self.t, &self.y, &self.dy, h, &self.opts);
        (y1, dy1)
    }
}

/// Root of `f` in `[lo, hi]` by the Illinois variant of regula falsi, given
/// `f(lo)` and `f(hi)` of opposite signs. Stops once `|f| <= ftol` or the
/// bracket is narrower than `xtol`.
pub fn illinois(
    mut f: impl FnMut(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    mut flo: f64,
    mut fhi: f64,
    ftol: f64,
    xtol: f64,
) -> f64 {
    if flo.abs() <= ftol {
        return lo;
    }
    if fhi.abs() <= ftol {
        return hi;
    }
    let mut side = 0i8;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        x = (lo * fhi - hi * flo) / (fhi - flo);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x);
        if fx.abs() <= ftol || hi - lo <= xtol {
            break;
        }
        if (fx > 0.0) == (fhi > 0.0) {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        } else {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        }
    }
    x
}
