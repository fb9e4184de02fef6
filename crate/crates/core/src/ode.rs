//! Dormand–Prince 5(4) integrator with continuous (dense) output.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions<T> {
    pub rtol: T,
    pub atol: T,
    pub max_steps: usize,
    /// Initial step; chosen automatically when `None`.
    pub h0: Option<T>,
}

impl<T: Scalar> SolverOptions<T> {
    pub fn with_tol(tol: T) -> Self {
        SolverOptions { rtol: tol, atol: tol, max_steps: 2_000_000, h0: None }
    }
}

/// Result of a guard check after each accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Guard {
    Continue,
    Singular,
}

#[derive(Debug, Clone)]
struct Segment<T> {
    t0: T,
    h: T,
    // contd5 coefficients, each of length dim
    r: [Vec<T>; 5],
}

/// Piecewise-polynomial solution produced by [`solve`].
#[derive(Debug, Clone)]
pub struct DenseSolution<T> {
    dim: usize,
    t_start: T,
    t_end: T,
    segments: Vec<Segment<T>>,
    pub steps: usize,
    pub rejected: usize,
    pub rtol: T,
}

impl<T: Scalar> DenseSolution<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_start(&self) -> T {
        self.t_start
    }

    pub fn t_end(&self) -> T {
        self.t_end
    }

    pub fn t_min(&self) -> T {
        self.t_start.min(self.t_end)
    }

    pub fn t_max(&self) -> T {
        self.t_start.max(self.t_end)
    }

    pub fn contains(&self, t: T) -> bool {
        let slack = T::lit(1e-12) * (T::one() + t.abs());
        t >= self.t_min() - slack && t <= self.t_max() + slack
    }

    /// Accepted step nodes, in integration order.
    pub fn nodes(&self) -> Vec<T> {
        let mut v: Vec<T> = self.segments.iter().map(|s| s.t0).collect();
        v.push(self.t_end);
        v
    }

    pub fn eval(&self, t: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: T, out: &mut [T]) {
        let forward = self.t_end >= self.t_start;
        // segments are ordered along the integration direction
        let idx = if forward {
            self.segments.partition_point(|s| s.t0 <= t).saturating_sub(1)
        } else {
            self.segments.partition_point(|s| s.t0 >= t).saturating_sub(1)
        };
        let s = &self.segments[idx.min(self.segments.len() - 1)];
        let theta = (t - s.t0) / s.h;
        let theta1 = T::one() - theta;
        for i in 0..self.dim {
            out[i] = s.r[0][i]
                + theta * (s.r[1][i] + theta1 * (s.r[2][i] + theta * (s.r[3][i] + theta1 * s.r[4][i])));
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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
///
/// `guard` is called on every accepted state; returning [`Guard::Singular`]
/// aborts with [`Error::SingularityReached`].
pub fn solve<T, F, G>(f: F, t0: T, y0: &[T], t1: T, opts: &SolverOptions<T>, guard: G) -> Result<DenseSolution<T>>
where
    T: Scalar,
    F: Fn(T, &[T], &mut [T]),
    G: Fn(T, &[T]) -> Guard,
{
    let dim = y0.len();
    let dir = if t1 >= t0 { T::one() } else { -T::one() };
    let span = (t1 - t0).abs();
    let mut sol = DenseSolution {
        dim,
        t_start: t0,
        t_end: t1,
        segments: Vec::new(),
        steps: 0,
        rejected: 0,
        rtol: opts.rtol,
    };
    if span == T::zero() {
        sol.segments.push(Segment {
            t0,
            h: T::one(),
            r: [y0.to_vec(), vec![T::zero(); dim], vec![T::zero(); dim], vec![T::zero(); dim], vec![T::zero(); dim]],
        });
        return Ok(sol);
    }

    let c = T::lit;
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![T::zero(); dim];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut k5 = k1.clone();
    let mut k6 = k1.clone();
    let mut k7 = k1.clone();
    let mut ytmp = k1.clone();
    let mut ynew = k1.clone();
    f(t, &y, &mut k1);

    let sc = |a: T, b: T| opts.atol + opts.rtol * a.abs().max(b.abs());
    let mut h = match opts.h0 {
        Some(h) => h.abs().min(span),
        None => initial_step(&f, t, &y, &k1, dir, span, opts),
    };
    let mut err_prev = T::lit(1e-4);
    let mut last_rejected = false;

    loop {
        if sol.steps + sol.rejected >= opts.max_steps {
            return Err(Error::StepFailure { t: t.to_f64_lossy(), reason: "maximum step count exceeded".into() });
        }
        let remaining = (t1 - t) * dir;
        if remaining <= T::lit(1e-14) * (T::one() + t1.abs()) {
            break;
        }
        if h >= remaining {
            h = remaining;
        }
        if h <= T::lit(1e-15) * (T::one() + t.abs()) {
            return Err(Error::StepFailure { t: t.to_f64_lossy(), reason: "step size underflow".into() });
        }
        let hs = h * dir;

        for i in 0..dim {
            ytmp[i] = y[i] + hs * c(A21) * k1[i];
        }
        f(t + hs * c(C2), &ytmp, &mut k2);
        for i in 0..dim {
            ytmp[i] = y[i] + hs * (c(A31) * k1[i] + c(A32) * k2[i]);
        }
        f(t + hs * c(C3), &ytmp, &mut k3);
        for i in 0..dim {
            ytmp[i] = y[i] + hs * (c(A41) * k1[i] + c(A42) * k2[i] + c(A43) * k3[i]);
        }
        f(t + hs * c(C4), &ytmp, &mut k4);
        for i in 0..dim {
            ytmp[i] = y[i] + hs * (c(A51) * k1[i] + c(A52) * k2[i] + c(A53) * k3[i] + c(A54) * k4[i]);
        }
        f(t + hs * c(C5), &ytmp, &mut k5);
        for i in 0..dim {
            ytmp[i] = y[i]
                + hs * (c(A61) * k1[i] + c(A62) * k2[i] + c(A63) * k3[i] + c(A64) * k4[i] + c(A65) * k5[i]);
        }
        f(t + hs, &ytmp, &mut k6);
        for i in 0..dim {
            ynew[i] = y[i]
                + hs * (c(A71) * k1[i] + c(A73) * k3[i] + c(A74) * k4[i] + c(A75) * k5[i] + c(A76) * k6[i]);
        }
        f(t + hs, &ynew, &mut k7);

        let mut err = T::zero();
        for i in 0..dim {
            let e = hs
                * (c(E1) * k1[i] + c(E3) * k3[i] + c(E4) * k4[i] + c(E5) * k5[i] + c(E6) * k6[i] + c(E7) * k7[i]);
            let r = e / sc(y[i], ynew[i]);
            err += r * r;
        }
        err = (err / T::from_usize(dim.max(1)).unwrap()).sqrt();

        if !err.is_finite() || ynew.iter().any(|v| !v.is_finite()) {
            sol.rejected += 1;
            h = h * c(0.2);
            last_rejected = true;
            continue;
        }

        if err <= T::one() {
            // Lund-stabilised PI controller
            let fac = err.powf(c(0.17)) / err_prev.powf(c(0.04));
            let mut scale = (c(0.9) / fac.max(c(1e-10))).min(c(10.0)).max(c(0.2));
            if last_rejected {
                scale = scale.min(T::one());
            }
            err_prev = err.max(c(1e-4));

            let mut r = [y.clone(), vec![T::zero(); dim], vec![T::zero(); dim], vec![T::zero(); dim], vec![T::zero(); dim]];
            for i in 0..dim {
                let ydiff = ynew[i] - y[i];
                let bspl = hs * k1[i] - ydiff;
                r[1][i] = ydiff;
                r[2][i] = bspl;
                r[3][i] = ydiff - hs * k7[i] - bspl;
                r[4][i] = hs
                    * (c(D1) * k1[i] + c(D3) * k3[i] + c(D4) * k4[i] + c(D5) * k5[i] + c(D6) * k6[i] + c(D7) * k7[i]);
            }
            sol.segments.push(Segment { t0: t, h: hs, r });
            sol.steps += 1;
            t = t + hs;
            y.copy_from_slice(&ynew);
            k1.copy_from_slice(&k7);
            if guard(t, &y) == Guard::Singular {
                return Err(Error::SingularityReached { t: t.to_f64_lossy() });
            }
            h = h * scale;
            last_rejected = false;
        } else {
            sol.rejected += 1;
            let scale = (c(0.9) / err.powf(c(0.2))).max(c(0.2));
            h = h * scale;
            last_rejected = true;
        }
    }
    sol.t_end = t1;
    Ok(sol)
}

fn initial_step<T, F>(f: &F, t: T, y: &[T], f0: &[T], dir: T, span: T, opts: &SolverOptions<T>) -> T
where
    T: Scalar,
    F: Fn(T, &[T], &mut [T]),
{
    let dim = y.len();
    let sc: Vec<T> = y.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let rms = |v: &[T]| {
        (v.iter().zip(&sc).map(|(a, s)| (*a / *s) * (*a / *s)).sum::<T>() / T::from_usize(dim.max(1)).unwrap()).sqrt()
    };
    let d0 = rms(y);
    let d1 = rms(f0);
    let mut h0 = if d0 < T::lit(1e-5) || d1 < T::lit(1e-5) { T::lit(1e-6) } else { T::lit(0.01) * d0 / d1 };
    h0 = h0.min(span);
    let y1: Vec<T> = y.iter().zip(f0).map(|(a, b)| *a + h0 * dir * *b).collect();
    let mut f1 = vec![T::zero(); dim];
    f(t + h0 * dir, &y1, &mut f1);
    let diff: Vec<T> = f1.iter().zip(f0).map(|(a, b)| *a - *b).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= T::lit(1e-15) {
        (h0 * T::lit(1e-3)).max(T::lit(1e-6))
    } else {
        (T::lit(0.01) / d1.max(d2)).powf(T::lit(0.2))
    };
    (h0 * T::lit(100.0)).min(h1).min(span)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_guard<T: Scalar>(_: T, _: &[T]) -> Guard {
        Guard::Continue
    }

    #[test]
    fn exponential_growth() {
        let sol = solve(|_, y: &[f64], dy: &mut [f64]| dy[0] = y[0], 0.0, &[1.0], 2.0, &SolverOptions::with_tol(1e-11), no_guard)
            .unwrap();
        assert!((sol.eval(2.0)[0] - 2f64.exp()).abs() < 1e-9);
        // dense output between nodes
        for k in 0..50 {
            let t = 0.04 * k as f64;
            assert!((sol.eval(t)[0] - t.exp()).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn backward_integration() {
        let f = |_: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        };
        let sol = solve(f, 1.0, &[1f64.sin(), 1f64.cos()], -2.0, &SolverOptions::with_tol(1e-11), no_guard).unwrap();
        for k in 0..31 {
            let t = 1.0 - 0.1 * k as f64;
            let y = sol.eval(t);
            assert!((y[0] - t.sin()).abs() < 1e-9);
            assert!((y[1] - t.cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn guard_aborts() {
        let r = solve(
            |_, _: &[f64], dy: &mut [f64]| dy[0] = -1.0,
            0.0,
            &[1.0],
            5.0,
            &SolverOptions::with_tol(1e-8),
            |_, y: &[f64]| if y[0] < 0.0 { Guard::Singular } else { Guard::Continue },
        );
        assert!(matches!(r, Err(Error::SingularityReached { .. })));
    }

    #[test]
    fn single_precision_oscillator() {
        let f = |_: f32, y: &[f32], dy: &mut [f32]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        };
        let sol = solve(f, 0.0f32, &[0.0, 1.0], 3.0, &SolverOptions::with_tol(1e-5), no_guard).unwrap();
        assert!((sol.eval(3.0)[0] - 3f32.sin()).abs() < 1e-3);
    }
}
