//! Linearly damped motion ẍ + Γẋẋ + φ(t)ẋ + V' = 0 and undamped motion with
//! a time-dependent coefficient, s'' + Γs's' + ω(s)V' = 0, are related by
//! the change of parameter s = S(t) with S'' + φS' = 0.
//!
//! Both integration constants are anchored at the left end t₀ of the
//! interval: ∫φ vanishes there and S(t₀) = t₀.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{MonotoneCubic, OmegaFamily, OmegaProfile, TimeProfile};
use crate::conditions::raised_gradient;
use crate::geometry::christoffel;
use crate::ode::{self, DenseSolution, Guard, SolverOptions};
use crate::verifier::{self, System, Trajectory};

const MAP_TOL: f64 = 1e-13;
const BISECT_ITERS: usize = 200;
const BISECT_TOL: f64 = 1e-12;

#[derive(Clone)]
pub enum DampingFamily {
    Constant(f64),
    /// φ = b/t.
    PowerLaw { b: f64 },
    Tabulated(MonotoneCubic<f64>),
    /// φ = ½(ln ω),s/√ω at s = S(t), the damping paired with a given ω.
    FromOmega { omega: OmegaProfile<f64>, map: Arc<TimeMap> },
}

/// φ(t) with its validity interval.
#[derive(Clone)]
pub struct DampingProfile {
    family: DampingFamily,
    lo: f64,
    hi: f64,
}

impl fmt::Debug for DampingProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DampingProfile({}, [{}, {}])", self.name(), self.lo, self.hi)
    }
}

impl DampingProfile {
    pub fn constant(c: f64) -> Self {
        DampingProfile { family: DampingFamily::Constant(c), lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    pub fn power_law(b: f64) -> Self {
        DampingProfile { family: DampingFamily::PowerLaw { b }, lo: 0.0, hi: f64::INFINITY }
    }

    pub fn tabulated(t: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        let c = MonotoneCubic::new(t, phi)?;
        let (lo, hi) = (c.lo(), c.hi());
        Ok(DampingProfile { family: DampingFamily::Tabulated(c), lo, hi })
    }

    pub fn family(&self) -> &DampingFamily {
        &self.family
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn name(&self) -> String {
        match &self.family {
            DampingFamily::Constant(c) => format!("{c}"),
            DampingFamily::PowerLaw { b } => format!("{b}/t"),
            DampingFamily::Tabulated(c) => format!("tabulated({} samples)", c.knots().len()),
            DampingFamily::FromOmega { omega, .. } => format!("paired with ω = {}", omega.name()),
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let slack = 1e-12 * (1.0 + t.abs());
        if !(t >= self.lo - slack && t <= self.hi + slack) || (matches!(self.family, DampingFamily::PowerLaw { .. }) && t <= 0.0) {
            return Err(Error::OutOfDomain { t, lo: self.lo, hi: self.hi });
        }
        Ok(match &self.family {
            DampingFamily::Constant(c) => *c,
            DampingFamily::PowerLaw { b } => b / t,
            DampingFamily::Tabulated(c) => c.eval(t.clamp(c.lo(), c.hi())).0,
            DampingFamily::FromOmega { omega, map } => {
                let s = map.s(t)?;
                0.5 * omega.log_deriv(s)? / omega.eval(s)?.sqrt()
            }
        })
    }
}

#[derive(Clone)]
enum MapKind {
    /// S = t₀ + k(t − t₀).
    Linear { rate: f64 },
    /// φ = c: S' = e^{−c(t−t₀)}.
    Exponential { c: f64 },
    /// φ = b/t: S' = (t/t₀)^{−b}.
    Power { b: f64 },
    /// y = (∫φ, S) over t.
    Damped { sol: DenseSolution<f64> },
    /// t(s) = t₀ + ∫√ω ds over s.
    Undamped { sol: DenseSolution<f64>, omega: OmegaProfile<f64> },
}

/// s = S(t) from damped time t to undamped time s, with its inverse.
#[derive(Clone)]
pub struct TimeMap {
    kind: MapKind,
    t0: f64,
    t_range: (f64, f64),
    s_range: (f64, f64),
}

impl fmt::Debug for TimeMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TimeMap(t ∈ [{}, {}] → s ∈ [{}, {}])", self.t_range.0, self.t_range.1, self.s_range.0, self.s_range.1)
    }
}

fn check(v: f64, r: (f64, f64)) -> Result<()> {
    let slack = 1e-10 * (1.0 + v.abs());
    if v < r.0 - slack || v > r.1 + slack {
        return Err(Error::OutOfDomain { t: v, lo: r.0, hi: r.1 });
    }
    Ok(())
}

impl TimeMap {
    pub fn identity(lo: f64, hi: f64) -> Self {
        TimeMap { kind: MapKind::Linear { rate: 1.0 }, t0: lo, t_range: (lo, hi), s_range: (lo, hi) }
    }

    fn with_kind(kind: MapKind, t0: f64, t1: f64) -> Result<Self> {
        let mut m = TimeMap { kind, t0, t_range: (t0, t1), s_range: (t0, t0) };
        m.s_range = (t0, m.s_unchecked(t1)?);
        Ok(m)
    }

    pub fn t_range(&self) -> (f64, f64) {
        self.t_range
    }

    pub fn s_range(&self) -> (f64, f64) {
        self.s_range
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Whether S and S⁻¹ are both closed-form.
    pub fn is_closed_form(&self) -> bool {
        matches!(self.kind, MapKind::Linear { .. } | MapKind::Exponential { .. } | MapKind::Power { .. })
    }

    fn s_unchecked(&self, t: f64) -> Result<f64> {
        let t0 = self.t0;
        Ok(match &self.kind {
            MapKind::Linear { rate } => t0 + rate * (t - t0),
            MapKind::Exponential { c } => t0 - (-c * (t - t0)).exp_m1() / c,
            MapKind::Power { b } if (*b - 1.0).abs() < 1e-14 => t0 + t0 * (t / t0).ln(),
            MapKind::Power { b } => t0 + t0.powf(*b) * (t.powf(1.0 - b) - t0.powf(1.0 - b)) / (1.0 - b),
            MapKind::Damped { sol } => sol.eval(t)[1],
            MapKind::Undamped { sol, .. } => {
                let (a, b) = (sol.t_start(), sol.t_end());
                bisect(|s| sol.eval(s)[0], t, a, b)?
            }
        })
    }

    /// S(t).
    pub fn s(&self, t: f64) -> Result<f64> {
        check(t, self.t_range)?;
        self.s_unchecked(t)
    }

    /// dS/dt.
    pub fn ds_dt(&self, t: f64) -> Result<f64> {
        check(t, self.t_range)?;
        let t0 = self.t0;
        Ok(match &self.kind {
            MapKind::Linear { rate } => *rate,
            MapKind::Exponential { c } => (-c * (t - t0)).exp(),
            MapKind::Power { b } => (t / t0).powf(-b),
            MapKind::Damped { sol } => (-sol.eval(t)[0]).exp(),
            MapKind::Undamped { omega, .. } => 1.0 / omega.eval(self.s_unchecked(t)?)?.sqrt(),
        })
    }

    /// S⁻¹(s).
    pub fn t_of_s(&self, s: f64) -> Result<f64> {
        check(s, self.s_range)?;
        let t0 = self.t0;
        Ok(match &self.kind {
            MapKind::Linear { rate } => t0 + (s - t0) / rate,
            MapKind::Exponential { c } => t0 - (-c * (s - t0)).ln_1p() / c,
            MapKind::Power { b } if (*b - 1.0).abs() < 1e-14 => t0 * ((s - t0) / t0).exp(),
            MapKind::Power { b } => (t0.powf(1.0 - b) + (1.0 - b) * (s - t0) * t0.powf(-b)).powf(1.0 / (1.0 - b)),
            MapKind::Damped { sol } => bisect(|t| sol.eval(t)[1], s, self.t_range.0, self.t_range.1)?,
            MapKind::Undamped { sol, .. } => sol.eval(s)[0],
        })
    }

    /// dS⁻¹/ds.
    pub fn dt_ds(&self, s: f64) -> Result<f64> {
        match &self.kind {
            MapKind::Undamped { omega, .. } => {
                check(s, self.s_range)?;
                Ok(omega.eval(s)?.sqrt())
            }
            _ => Ok(1.0 / self.ds_dt(self.t_of_s(s)?)?),
        }
    }
}

/// Root of the increasing function `f` at `target` on [lo, hi].
fn bisect(f: impl Fn(f64) -> f64, target: f64, lo: f64, hi: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a) - target, f(b) - target);
    let scale = 1.0 + target.abs();
    if fa.abs() <= BISECT_TOL * scale {
        return Ok(a);
    }
    if fb.abs() <= BISECT_TOL * scale {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NonInvertible(format!("{target} outside the image [{}, {}]", fa + target, fb + target)));
    }
    let rising = fb > fa;
    for _ in 0..BISECT_ITERS {
        let m = 0.5 * (a + b);
        let fm = f(m) - target;
        if fm == 0.0 || (b - a) <= 1e-15 * (1.0 + m.abs()) {
            return Ok(m);
        }
        if (fm < 0.0) == rising {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

// ω(s) = 1/S'(t(s))², (ln ω),s = 2φ(t)/S'(t)
struct MappedOmega {
    damping: DampingProfile,
    map: Arc<TimeMap>,
}

impl TimeProfile<f64> for MappedOmega {
    fn value(&self, s: f64) -> f64 {
        self.map.dt_ds(s).map_or(f64::NAN, |d| d * d)
    }

    fn log_deriv(&self, s: f64) -> f64 {
        let Ok(t) = self.map.t_of_s(s) else { return f64::NAN };
        match (self.damping.eval(t), self.map.ds_dt(t)) {
            (Ok(phi), Ok(sp)) => 2.0 * phi / sp,
            _ => f64::NAN,
        }
    }

    fn label(&self) -> String {
        format!("paired with φ = {}", self.damping.name())
    }
}

/// Undamped form of damped motion on `interval`: the time map and ω(s).
pub fn damped_to_timedep(phi: &DampingProfile, interval: (f64, f64)) -> Result<(TimeMap, OmegaProfile<f64>)> {
    let (t0, t1) = interval;
    if !(t0 < t1) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidProfile(format!("damping interval [{t0}, {t1}] must be finite and nonempty")));
    }
    phi.eval(t0)?;
    phi.eval(t1)?;
    let kind = match phi.family() {
        DampingFamily::Constant(c) if *c == 0.0 => MapKind::Linear { rate: 1.0 },
        DampingFamily::Constant(c) => MapKind::Exponential { c: *c },
        DampingFamily::PowerLaw { b } => MapKind::Power { b: *b },
        _ => {
            let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
                dy[0] = phi.eval(t).unwrap_or(f64::NAN);
                dy[1] = (-y[0]).exp();
            };
            let sol = ode::solve(rhs, t0, &[0.0, t0], t1, &SolverOptions::with_tol(MAP_TOL), |_, y| {
                if y.iter().all(|v| v.is_finite()) {
                    Guard::Continue
                } else {
                    Guard::Singular
                }
            })
            .map_err(|e| Error::NonInvertible(format!("time map integration failed: {e}")))?;
            MapKind::Damped { sol }
        }
    };
    let map = TimeMap::with_kind(kind, t0, t1)?;
    let (s0, s1) = map.s_range();
    let omega = match phi.family() {
        DampingFamily::Constant(c) if *c == 0.0 => OmegaProfile::constant(1.0),
        // 1/S'² = 1/(1 − c(s − t₀))²
        DampingFamily::Constant(c) => OmegaProfile::inverse_square_affine(-c, 1.0 + c * t0)?.with_interval(s0, s1)?,
        _ => OmegaProfile::custom(Arc::new(MappedOmega { damping: phi.clone(), map: Arc::new(map.clone()) }), s0, s1),
    };
    Ok((map, omega))
}

// ω̃(s') = ω(s)/ω(s₀) with s = s₀ + (s' − s₀)/√ω(s₀)
struct Normalized {
    omega: OmegaProfile<f64>,
    s0: f64,
    w0: f64,
}

impl Normalized {
    fn s(&self, sp: f64) -> f64 {
        let (lo, hi) = self.omega.interval();
        (self.s0 + (sp - self.s0) / self.w0.sqrt()).clamp(lo, hi)
    }
}

impl TimeProfile<f64> for Normalized {
    fn value(&self, sp: f64) -> f64 {
        self.omega.eval(self.s(sp)).map_or(f64::NAN, |w| w / self.w0)
    }

    fn log_deriv(&self, sp: f64) -> f64 {
        self.omega.log_deriv(self.s(sp)).map_or(f64::NAN, |d| d / self.w0.sqrt())
    }

    fn label(&self) -> String {
        format!("{} normalized at s = {}", self.omega.name(), self.s0)
    }
}

/// The representative of ω on [s₀, s₁] that [`damped_to_timedep`] returns:
/// the undamped time is rescaled about s₀ so that ω̃(s₀) = 1. The damping
/// paired with ω by [`timedep_to_damped`] maps back to this profile, not to
/// ω itself, unless ω(s₀) = 1 already.
pub fn normalized_omega(omega: &OmegaProfile<f64>, interval: (f64, f64)) -> Result<OmegaProfile<f64>> {
    let (s0, s1) = interval;
    let w0 = omega.eval(s0)?;
    if !(w0 > 0.0) {
        return Err(Error::NegativeOmega { s: s0 });
    }
    if w0 == 1.0 {
        return omega.clone().with_interval(s0, s1);
    }
    let hi = s0 + w0.sqrt() * (s1 - s0);
    Ok(OmegaProfile::custom(Arc::new(Normalized { omega: omega.clone(), s0, w0 }), s0, hi))
}

/// Damped form of undamped motion with coefficient ω(s) on `interval`.
pub fn timedep_to_damped(omega: &OmegaProfile<f64>, interval: (f64, f64)) -> Result<(TimeMap, DampingProfile)> {
    let (s0, s1) = interval;
    if !(s0 < s1) || !s0.is_finite() || !s1.is_finite() {
        return Err(Error::InvalidProfile(format!("interval [{s0}, {s1}] must be finite and nonempty")));
    }
    for k in 0..=200 {
        let s = (s0 + (s1 - s0) * k as f64 / 200.0).min(s1);
        if omega.eval(s)? <= 0.0 {
            return Err(Error::NegativeOmega { s });
        }
    }
    if let OmegaFamily::Constant(c) = omega.family() {
        let map = TimeMap { kind: MapKind::Linear { rate: 1.0 / c.sqrt() }, t0: s0, t_range: (s0, s0 + c.sqrt() * (s1 - s0)), s_range: (s0, s1) };
        let (lo, hi) = map.t_range();
        return Ok((map, DampingProfile { family: DampingFamily::Constant(0.0), lo, hi }));
    }
    let rhs = |s: f64, _: &[f64], dy: &mut [f64]| dy[0] = omega.eval(s).map_or(f64::NAN, f64::sqrt);
    let sol = ode::solve(rhs, s0, &[s0], s1, &SolverOptions::with_tol(MAP_TOL), |_, y| {
        if y[0].is_finite() {
            Guard::Continue
        } else {
            Guard::Singular
        }
    })
    .map_err(|e| Error::NonInvertible(format!("time map integration failed: {e}")))?;
    let t1 = sol.eval(s1)[0];
    let map = TimeMap { kind: MapKind::Undamped { sol, omega: omega.clone() }, t0: s0, t_range: (s0, t1), s_range: (s0, s1) };
    let damping = DampingProfile { family: DampingFamily::FromOmega { omega: omega.clone(), map: Arc::new(map.clone()) }, lo: s0, hi: t1 };
    Ok((map, damping))
}

/// Sampled states (time, x, dx/dtime) of a curve.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub points: Vec<(f64, Vec<f64>, Vec<f64>)>,
}

impl Path {
    pub fn from_trajectory(traj: &Trajectory, samples: usize) -> Self {
        Path {
            points: traj
                .sample_times(samples)
                .into_iter()
                .map(|t| {
                    let (x, v) = traj.state(t);
                    (t, x, v)
                })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// damped time t → undamped time s
    DampedToTimeDep,
    /// undamped time s → damped time t
    TimeDepToDamped,
}

/// Reparametrizes a curve through the time map; velocities pick up the
/// chain-rule factor.
pub fn map_trajectory(path: &Path, map: &TimeMap, direction: Direction) -> Result<Path> {
    let points = path
        .points
        .iter()
        .map(|(time, x, v)| {
            let (new_time, factor) = match direction {
                Direction::DampedToTimeDep => (map.s(*time)?, 1.0 / map.ds_dt(*time)?),
                Direction::TimeDepToDamped => (map.t_of_s(*time)?, 1.0 / map.dt_ds(*time)?),
            };
            Ok((new_time, x.clone(), v.iter().map(|c| c * factor).collect()))
        })
        .collect::<Result<_>>()?;
    Ok(Path { points })
}

/// Dense solution of damped motion; state (x, ẋ).
#[derive(Clone, Debug)]
pub struct DampedTrajectory {
    sol: DenseSolution<f64>,
    n: usize,
}

impl DampedTrajectory {
    pub fn state(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let y = self.sol.eval(t);
        (y[..self.n].to_vec(), y[self.n..].to_vec())
    }

    pub fn to_path(&self, samples: usize) -> Path {
        let (a, b) = (self.sol.t_start(), self.sol.t_end());
        let m = samples.max(2) - 1;
        Path {
            points: (0..=m)
                .map(|k| {
                    let t = a + (b - a) * k as f64 / m as f64;
                    let (x, v) = self.state(t);
                    (t, x, v)
                })
                .collect(),
        }
    }
}

/// Integrates ẍ + Γẋẋ + φ(t)ẋ + V' = 0.
pub fn integrate_damped(system: &System, phi: &DampingProfile, x0: &[f64], v0: &[f64], span: (f64, f64), tol: f64) -> Result<DampedTrajectory> {
    let n = system.dim();
    let accel = |t: f64, x: &[f64], xd: &[f64]| -> Result<Vec<f64>> {
        let f = phi.eval(t)?;
        let vp = raised_gradient(&system.space, &system.v, x)?;
        let mut a: Vec<f64> = vp.iter().zip(xd).map(|(g, v)| -g - f * v).collect();
        if !system.space.is_euclidean() {
            let gam = christoffel(&system.space, x)?;
            for (i, ai) in a.iter_mut().enumerate() {
                for j in 0..n {
                    for k in 0..n {
                        *ai -= gam[i][j][k] * xd[j] * xd[k];
                    }
                }
            }
        }
        Ok(a)
    };
    accel(span.0, x0, v0)?;
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let (x, xd) = y.split_at(n);
        dy[..n].copy_from_slice(xd);
        match accel(t, x, xd) {
            Ok(a) => dy[n..].copy_from_slice(&a),
            Err(_) => dy[n..].iter_mut().for_each(|v| *v = f64::NAN),
        }
    };
    let y0: Vec<f64> = x0.iter().chain(v0).copied().collect();
    let opts = SolverOptions { rtol: tol, atol: tol, max_steps: 5_000_000, h0: None };
    let sol = ode::solve(rhs, span.0, &y0, span.1, &opts, |_, y| if y.iter().all(|v| v.is_finite()) { Guard::Continue } else { Guard::Singular })?;
    Ok(DampedTrajectory { sol, n })
}

/// Largest relative gap between `path` and a fresh undamped integration
/// with the system's ω, started from the path's first point.
pub fn timedep_residual(path: &Path, system: &System, tol: f64) -> Result<f64> {
    let (s0, x0, v0) = &path.points[0];
    let s1 = path.points.last().map_or(*s0, |p| p.0);
    let traj = verifier::integrate(system, x0, v0, (*s0, s1), tol)?;
    Ok(gap(path, |s| traj.state(s)))
}

/// Largest relative gap between `path` and a fresh damped integration.
pub fn damped_residual(path: &Path, system: &System, phi: &DampingProfile, tol: f64) -> Result<f64> {
    let (t0, x0, v0) = &path.points[0];
    let t1 = path.points.last().map_or(*t0, |p| p.0);
    let traj = integrate_damped(system, phi, x0, v0, (*t0, t1), tol)?;
    Ok(gap(path, |t| traj.state(t)))
}

fn gap(path: &Path, exact: impl Fn(f64) -> (Vec<f64>, Vec<f64>)) -> f64 {
    path.points
        .iter()
        .map(|(t, x, v)| {
            let (xe, ve) = exact(*t);
            let d = x.iter().chain(v).zip(xe.iter().chain(&ve)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            d / (1.0 + xe.iter().chain(&ve).map(|c| c * c).sum::<f64>().sqrt())
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ScalarField;
    use crate::geometry::MetricSpace;

    fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect()
    }

    #[test]
    fn constant_damping_gives_inverse_square() {
        let gamma = 2.0;
        let (map, omega) = damped_to_timedep(&DampingProfile::constant(-1.0 / gamma), (1.0, 5.0)).unwrap();
        for s in grid(map.s_range().0, map.s_range().1, 20) {
            // γ²/(s − t₀ + γ)²
            let expect = gamma * gamma / (s - 1.0 + gamma).powi(2);
            assert!((omega.eval(s).unwrap() - expect).abs() < 1e-12 * expect);
        }
    }

    #[test]
    fn zero_damping_is_identity() {
        let (map, omega) = damped_to_timedep(&DampingProfile::constant(0.0), (0.5, 3.0)).unwrap();
        assert_eq!(map.s(2.2).unwrap(), 2.2);
        assert!(omega.is_constant() && omega.eval(1.0).unwrap() == 1.0);
        let (_, phi) = timedep_to_damped(&OmegaProfile::constant(1.0), (0.5, 3.0)).unwrap();
        assert_eq!(phi.eval(1.3).unwrap(), 0.0);
    }

    #[test]
    fn inverse_square_profile_gives_constant_damping() {
        let (_, phi) = timedep_to_damped(&OmegaProfile::inverse_square_scaled(2.0).unwrap(), (1.0, 8.0)).unwrap();
        let (lo, hi) = phi.interval();
        for t in grid(lo, hi, 15) {
            assert!((phi.eval(t).unwrap() + 0.5).abs() < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn negative_omega_rejected() {
        let w = OmegaProfile::tabulated(vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]).unwrap();
        assert!(timedep_to_damped(&w, (1.0, 3.0)).is_ok());
        let bad = OmegaProfile::power_law(1.0).unwrap();
        assert!(matches!(timedep_to_damped(&bad, (-1.0, 2.0)), Err(_)));
    }

    #[test]
    fn map_inverts() {
        for phi in [DampingProfile::constant(0.7), DampingProfile::power_law(2.0), DampingProfile::power_law(1.0), DampingProfile::tabulated(grid(1.0, 10.0, 9), grid(1.0, 10.0, 9).iter().map(|t| 2.0 / t).collect()).unwrap()] {
            let (map, _) = damped_to_timedep(&phi, (1.0, 10.0)).unwrap();
            for t in grid(1.0, 10.0, 37) {
                let s = map.s(t).unwrap();
                assert!((map.t_of_s(s).unwrap() - t).abs() < 1e-10, "{phi:?} t = {t}");
                assert!(map.ds_dt(t).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn round_trip_power_law_profile() {
        let w = OmegaProfile::power_law(1.0).unwrap();
        let (map, phi) = timedep_to_damped(&w, (1.0, 4.0)).unwrap();
        let (back_map, back) = damped_to_timedep(&phi, map.t_range()).unwrap();
        let (lo, hi) = back_map.s_range();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 4.0).abs() < 1e-8);
        for s in grid(lo, hi, 30) {
            assert!((back.eval(s).unwrap() - s).abs() < 1e-8 * s, "s = {s}");
        }
    }

    #[test]
    fn round_trip_reaches_normalized_profile() {
        let w = OmegaProfile::inverse_square_scaled(2.0).unwrap();
        let (map, phi) = timedep_to_damped(&w, (1.0, 6.0)).unwrap();
        let (back_map, back) = damped_to_timedep(&phi, map.t_range()).unwrap();
        let norm = normalized_omega(&w, (1.0, 6.0)).unwrap();
        let (lo, hi) = back_map.s_range();
        // ω(1) = 4 so the undamped time doubles about s₀
        assert!((hi - 11.0).abs() < 1e-9, "{hi}");
        let hi = hi.min(norm.interval().1);
        for s in grid(lo, hi, 40) {
            let s = s.min(hi);
            // 4/s² rescaled: 1/(1 + (s − 1)/2)² = 4/(s + 1)²
            let expect = 4.0 / (s + 1.0).powi(2);
            assert!((norm.eval(s).unwrap() - expect).abs() < 1e-12);
            assert!((back.eval(s).unwrap() - expect).abs() < 1e-8 * expect, "s = {s}");
        }
        assert!((norm.log_deriv(3.0).unwrap() + 2.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn trajectory_maps_to_damped_oscillator() {
        let gamma = 2.0;
        let sys = System::new(MetricSpace::euclidean(1), ScalarField::quadratic(), OmegaProfile::inverse_square_scaled(gamma).unwrap());
        let traj = verifier::integrate(&sys, &[1.0], &[0.3], (1.0, 9.0), 1e-11).unwrap();
        let (map, phi) = timedep_to_damped(&sys.omega, (1.0, 9.0)).unwrap();
        let damped = map_trajectory(&Path::from_trajectory(&traj, 200), &map, Direction::TimeDepToDamped).unwrap();
        let free = System::new(MetricSpace::euclidean(1), ScalarField::quadratic(), OmegaProfile::constant(1.0));
        assert!(damped_residual(&damped, &free, &phi, 1e-11).unwrap() < 1e-6);
        let back = map_trajectory(&damped, &map, Direction::DampedToTimeDep).unwrap();
        assert!(timedep_residual(&back, &sys, 1e-11).unwrap() < 1e-6);
    }
}
