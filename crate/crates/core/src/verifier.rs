//! Numeric checks: trajectories, determining equations, the Noether
//! condition, first-integral drift, and pushing solutions along a symmetry.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::conditions::{raised_gradient, raised_gradient_jacobian};
use crate::engine::RankProbe;
use crate::error::{Error, Result};
use crate::fields::{OmegaProfile, ScalarField};
use crate::geometry::{christoffel, christoffel_derivatives, MetricSpace};
use crate::noether::{FirstIntegral, NoetherSymmetry};
use crate::ode::{self, DenseSolution, Guard, SolverOptions};
use crate::poly::Poly;
use crate::symmetry::{Generator, PointSymmetry, TimeFunction};

/// Integration stops when r drops below this.
pub const R_GUARD: f64 = 1e-4;
pub const DEFAULT_SEED: u64 = 20_240_601;
pub const SYMMETRY_TOL: f64 = 1e-6;

/// (space, V, ω): everything needed to write the equations of motion.
#[derive(Clone, Debug)]
pub struct System {
    pub space: MetricSpace<f64>,
    pub v: ScalarField<f64>,
    pub omega: OmegaProfile<f64>,
}

impl System {
    pub fn new(space: MetricSpace<f64>, v: ScalarField<f64>, omega: OmegaProfile<f64>) -> Self {
        System { space, v, omega }
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// ẍⁱ = −Γⁱⱼₖẋʲẋᵏ − ωV'ⁱ.
    pub fn acceleration(&self, t: f64, x: &[f64], xd: &[f64]) -> Result<Vec<f64>> {
        let w = self.omega.eval(t)?;
        let vp = raised_gradient(&self.space, &self.v, x)?;
        let mut a: Vec<f64> = vp.iter().map(|g| -w * g).collect();
        if !self.space.is_euclidean() {
            let gam = christoffel(&self.space, x)?;
            for (i, ai) in a.iter_mut().enumerate() {
                for j in 0..x.len() {
                    for k in 0..x.len() {
                        *ai -= gam[i][j][k] * xd[j] * xd[k];
                    }
                }
            }
        }
        Ok(a)
    }
}

/// Dense solution of the equations of motion; state (x, ẋ).
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub system: System,
    sol: DenseSolution<f64>,
    pub tol: f64,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn span(&self) -> (f64, f64) {
        (self.sol.t_start(), self.sol.t_end())
    }

    pub fn steps(&self) -> usize {
        self.sol.steps
    }

    /// (x, ẋ) at `t`.
    pub fn state(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let y = self.sol.eval(t);
        let n = self.dim();
        (y[..n].to_vec(), y[n..].to_vec())
    }

    /// `count` equally spaced times over the span, endpoints included.
    pub fn sample_times(&self, count: usize) -> Vec<f64> {
        let (a, b) = self.span();
        let m = count.max(2) - 1;
        (0..=m).map(|k| a + (b - a) * k as f64 / m as f64).collect()
    }

    /// CSV with columns t, x1..xn, xd1..xdn.
    pub fn write_csv<W: Write>(&self, w: W, samples: usize) -> Result<()> {
        let n = self.dim();
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=n).map(|i| format!("xd{i}")));
        let io = |e: csv::Error| Error::OdeSolveFailure(format!("csv export: {e}"));
        wr.write_record(&header).map_err(io)?;
        for t in self.sample_times(samples) {
            let (x, xd) = self.state(t);
            let row: Vec<String> = std::iter::once(t).chain(x).chain(xd).map(|v| format!("{v:.17e}")).collect();
            wr.write_record(&row).map_err(io)?;
        }
        wr.flush().map_err(|e| Error::OdeSolveFailure(format!("csv export: {e}")))?;
        Ok(())
    }
}

/// Integrates the equations of motion from (t₀, x₀, v₀) to t₁.
pub fn integrate(system: &System, x0: &[f64], v0: &[f64], span: (f64, f64), tol: f64) -> Result<Trajectory> {
    let n = system.dim();
    if x0.len() != n || v0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x0.len().min(v0.len()) });
    }
    system.omega.eval(span.0)?;
    system.omega.eval(span.1)?;
    system.acceleration(span.0, x0, v0)?;
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let (x, xd) = y.split_at(n);
        dy[..n].copy_from_slice(xd);
        match system.acceleration(t, x, xd) {
            Ok(a) => dy[n..].copy_from_slice(&a),
            Err(_) => dy[n..].iter_mut().for_each(|v| *v = f64::NAN),
        }
    };
    let singular = system.v.is_singular();
    let guard = |_: f64, y: &[f64]| {
        let r = y[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
        if y.iter().any(|v| !v.is_finite()) || (singular && r < R_GUARD) {
            Guard::Singular
        } else {
            Guard::Continue
        }
    };
    let y0: Vec<f64> = x0.iter().chain(v0).copied().collect();
    let opts = SolverOptions { rtol: tol, atol: tol, max_steps: 5_000_000, h0: None };
    let sol = ode::solve(rhs, span.0, &y0, span.1, &opts, guard)?;
    Ok(Trajectory { system: system.clone(), sol, tol })
}

/// Largest terminal-state difference between tolerance `tol` and `tol/10`,
/// relative to 1 + |y|∞ like the solver's mixed error control.
pub fn refinement_gap(system: &System, x0: &[f64], v0: &[f64], span: (f64, f64), tol: f64) -> Result<f64> {
    let a = integrate(system, x0, v0, span, tol)?;
    let b = integrate(system, x0, v0, span, tol / 10.0)?;
    let (xa, va) = a.state(span.1);
    let (xb, vb) = b.state(span.1);
    let scale = 1.0 + xb.iter().chain(&vb).map(|v| v.abs()).fold(0.0, f64::max);
    Ok(xa.iter().chain(&va).zip(xb.iter().chain(&vb)).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max) / scale)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    pub check: String,
    pub max: f64,
    pub mean: f64,
    pub p95: f64,
    pub samples: usize,
    pub tolerance: f64,
    pub pass: bool,
    pub seed: u64,
    /// Per-part maxima, e.g. the powers of ẋ in the determining equations.
    pub parts: BTreeMap<String, f64>,
}

impl ResidualReport {
    pub fn from_values(check: impl Into<String>, values: &[f64], tolerance: f64, seed: u64) -> Self {
        let mut sorted: Vec<f64> = values.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let max = sorted.last().copied().unwrap_or(0.0);
        let mean = if values.is_empty() { 0.0 } else { values.iter().sum::<f64>() / values.len() as f64 };
        let p95 = if sorted.is_empty() { 0.0 } else { sorted[((sorted.len() - 1) as f64 * 0.95).round() as usize] };
        ResidualReport {
            check: check.into(),
            max,
            mean,
            p95,
            samples: values.len(),
            tolerance,
            pass: max < tolerance && max.is_finite(),
            seed,
            parts: BTreeMap::new(),
        }
    }
}

/// Where random jets are drawn from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleSpec {
    pub count: usize,
    pub seed: u64,
    pub t_range: (f64, f64),
    pub x_half_width: f64,
    pub v_half_width: f64,
    pub r_min: f64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec { count: 100, seed: DEFAULT_SEED, t_range: (1.0, 5.0), x_half_width: 3.0, v_half_width: 2.0, r_min: 0.5 }
    }
}

impl SampleSpec {
    /// (t, x, ẋ) jets inside the chart of `space`.
    pub fn jets(&self, space: &MetricSpace<f64>) -> Result<Vec<(f64, Vec<f64>, Vec<f64>)>> {
        let n = space.dim();
        let (lo, hi) = if space.is_euclidean() {
            (-self.x_half_width, self.x_half_width)
        } else {
            let (a, b) = space.sample_box();
            (a.max(-self.x_half_width), b.min(self.x_half_width))
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.count);
        let mut tries = 0;
        while out.len() < self.count {
            tries += 1;
            if tries > 1000 * self.count.max(1) {
                return Err(Error::OutOfChart("could not draw jet samples inside the chart".into()));
            }
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-self.v_half_width..self.v_half_width)).collect();
            let t = rng.gen_range(self.t_range.0..=self.t_range.1);
            if x.iter().map(|c| c * c).sum::<f64>().sqrt() < self.r_min || space.metric(&x).is_err() {
                continue;
            }
            out.push((t, x, v));
        }
        Ok(out)
    }
}

// value and first/second partials of a scalar Σ τ(t)p(x)
struct Jet {
    v: f64,
    t: f64,
    tt: f64,
    x: Vec<f64>,
    tx: Vec<f64>,
    xx: Vec<Vec<f64>>,
}

impl Jet {
    fn zero(n: usize) -> Self {
        Jet { v: 0.0, t: 0.0, tt: 0.0, x: vec![0.0; n], tx: vec![0.0; n], xx: vec![vec![0.0; n]; n] }
    }

    fn add(&mut self, tau: &TimeFunction, p: &Poly<f64>, t: f64, x: &[f64]) -> Result<()> {
        let n = x.len();
        let j = tau.jet(t)?;
        let pv = p.eval(x);
        self.v += j[0] * pv;
        self.t += j[1] * pv;
        self.tt += j[2] * pv;
        if p.degree() == 0 {
            return Ok(());
        }
        for k in 0..n {
            let pk = p.partial(k);
            let d = pk.eval(x);
            self.x[k] += j[0] * d;
            self.tx[k] += j[1] * d;
            for l in 0..n {
                self.xx[k][l] += j[0] * pk.partial(l).eval(x);
            }
        }
        Ok(())
    }

    /// D = ∂t + ẋᵏ∂ₖ applied once, and twice with ẍ = `acc`.
    fn total(&self, xd: &[f64], acc: &[f64]) -> (f64, f64) {
        let n = xd.len();
        let mut d1 = self.t;
        let mut d2 = self.tt;
        for k in 0..n {
            d1 += self.x[k] * xd[k];
            d2 += 2.0 * self.tx[k] * xd[k] + self.x[k] * acc[k];
            for l in 0..n {
                d2 += self.xx[k][l] * xd[k] * xd[l];
            }
        }
        (d1, d2)
    }
}

fn generator_jets(g: &Generator, t: f64, x: &[f64]) -> Result<(Jet, Vec<Jet>)> {
    let n = x.len();
    let mut xi = Jet::zero(n);
    for (tau, p) in &g.xi {
        xi.add(tau, p, t, x)?;
    }
    let mut eta: Vec<Jet> = (0..n).map(|_| Jet::zero(n)).collect();
    for (tau, q) in &g.eta {
        for (i, qi) in q.iter().enumerate() {
            if !qi.is_zero() {
                eta[i].add(tau, qi, t, x)?;
            }
        }
    }
    Ok((xi, eta))
}

/// Second prolongation condition Rⁱ(t, x, ẋ), scaled by 1 + |ξ| + |η|.
fn lie_residual(system: &System, g: &Generator, t: f64, x: &[f64], xd: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    let space = &system.space;
    let (w, wt) = (system.omega.eval(t)?, system.omega.deriv(t)?);
    let vp = raised_gradient(space, &system.v, x)?;
    let jac = raised_gradient_jacobian(space, &system.v, x)?;
    let flat = space.is_euclidean();
    let gam = if flat { vec![] } else { christoffel(space, x)? };
    let dgam = if flat { vec![] } else { christoffel_derivatives(space, x)? };
    let acc = system.acceleration(t, x, xd)?;
    let (xi, eta) = generator_jets(g, t, x)?;
    let (dxi, ddxi) = xi.total(xd, &acc);
    let mut out = vec![0.0; n];
    let mut eta1 = vec![0.0; n];
    for i in 0..n {
        eta1[i] = eta[i].total(xd, &acc).0 - xd[i] * dxi;
    }
    for i in 0..n {
        let (_, ddeta) = eta[i].total(xd, &acc);
        let eta2 = ddeta - xd[i] * ddxi - 2.0 * acc[i] * dxi;
        let mut r = eta2 + xi.v * wt * vp[i];
        for k in 0..n {
            // ∂ₖFⁱ
            let mut fk = -w * jac[i][k];
            // ∂Fⁱ/∂ẋᵏ
            let mut fv = 0.0;
            if !flat {
                for j in 0..n {
                    fv -= 2.0 * gam[i][k][j] * xd[j];
                    for l in 0..n {
                        fk -= dgam[k][i][j][l] * xd[j] * xd[l];
                    }
                }
            }
            r -= eta[k].v * fk + eta1[k] * fv;
        }
        out[i] = r;
    }
    let scale = 1.0 + xi.v.abs() + eta.iter().map(|e| e.v * e.v).sum::<f64>().sqrt();
    Ok(out.into_iter().map(|r| r / scale).collect())
}

// Vandermonde nodes for splitting a cubic in ẋ
const SPLIT_NODES: [f64; 4] = [-1.0, 1.0, 2.0, -2.0];

/// Residuals of the Lie symmetry condition at random jets. The residual is
/// cubic in ẋ; its parts of order 0..3 are separated by evaluating at λẋ.
pub fn check_determining_eqs(sym: &Generator, system: &System, spec: &SampleSpec) -> Result<ResidualReport> {
    let jets = spec.jets(&system.space)?;
    let vand = DMatrix::from_fn(4, 4, |a, k| SPLIT_NODES[a].powi(k as i32));
    let inv = vand.try_inverse().expect("distinct nodes");
    let per: Vec<[f64; 5]> = jets
        .par_iter()
        .map(|(t, x, xd)| {
            let mut vals = DMatrix::zeros(4, x.len());
            for (a, lam) in SPLIT_NODES.iter().enumerate() {
                let v: Vec<f64> = xd.iter().map(|c| c * lam).collect();
                let r = lie_residual(system, sym, *t, x, &v)?;
                for (i, ri) in r.into_iter().enumerate() {
                    vals[(a, i)] = ri;
                }
            }
            let coeffs = &inv * vals;
            let mut out = [0.0; 5];
            for k in 0..4 {
                out[k] = coeffs.row(k).norm();
            }
            out[4] = lie_residual(system, sym, *t, x, xd)?.iter().map(|r| r * r).sum::<f64>().sqrt();
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let totals: Vec<f64> = per.iter().map(|p| p[..4].iter().copied().fold(p[4], f64::max)).collect();
    let mut report = ResidualReport::from_values("lie_determining_equations", &totals, SYMMETRY_TOL, spec.seed);
    for k in 0..4 {
        report.parts.insert(format!("order{k}"), per.iter().map(|p| p[k]).fold(0.0, f64::max));
    }
    Ok(report)
}

/// X⁽¹⁾L + (Dξ)L − Df at a jet, scaled by 1 + |ξ| + |η|.
fn noether_residual(sym: &NoetherSymmetry, system: &System, t: f64, x: &[f64], xd: &[f64]) -> Result<f64> {
    let n = x.len();
    let space = &system.space;
    let g = space.metric(x)?;
    let dg = space.metric_partials(x);
    let (w, wt) = (system.omega.eval(t)?, system.omega.deriv(t)?);
    let v = system.v.eval(x)?;
    let grad = system.v.grad(x)?;
    let acc = system.acceleration(t, x, xd)?;
    let (xi, eta) = generator_jets(sym.generator(), t, x)?;
    let dxi = xi.total(xd, &acc).0;
    let mut kin = 0.0;
    for i in 0..n {
        for j in 0..n {
            kin += 0.5 * g[i][j] * xd[i] * xd[j];
        }
    }
    let lag = kin - w * v;
    let mut r = -xi.v * wt * v + dxi * lag;
    for k in 0..n {
        let mut lk = -w * grad[k];
        for i in 0..n {
            for j in 0..n {
                lk += 0.5 * dg[k][i][j] * xd[i] * xd[j];
            }
        }
        let eta1 = eta[k].total(xd, &acc).0 - xd[k] * dxi;
        let pk: f64 = (0..n).map(|j| g[k][j] * xd[j]).sum();
        r += eta[k].v * lk + eta1 * pk;
    }
    let (_, ft, fx) = sym.gauge_jet(t, x)?;
    r -= ft + fx.iter().zip(xd).map(|(a, b)| a * b).sum::<f64>();
    let scale = 1.0 + xi.v.abs() + eta.iter().map(|e| e.v * e.v).sum::<f64>().sqrt();
    Ok(r / scale)
}

pub fn check_noether_condition(sym: &NoetherSymmetry, system: &System, spec: &SampleSpec) -> Result<ResidualReport> {
    let jets = spec.jets(&system.space)?;
    let vals: Vec<f64> = jets
        .par_iter()
        .map(|(t, x, xd)| noether_residual(sym, system, *t, x, xd).map(f64::abs))
        .collect::<Result<_>>()?;
    Ok(ResidualReport::from_values("noether_condition", &vals, SYMMETRY_TOL, spec.seed))
}

/// Relative drift |I(t) − I(t₀)| / (1 + |I(t₀)|) along a trajectory.
pub fn check_integral_drift(integral: &FirstIntegral, traj: &Trajectory, samples: usize, tolerance: f64) -> Result<ResidualReport> {
    let ts = traj.sample_times(samples);
    let (x0, v0) = traj.state(ts[0]);
    let i0 = integral.eval(ts[0], &x0, &v0)?;
    let vals: Vec<f64> = ts
        .par_iter()
        .map(|&t| {
            let (x, v) = traj.state(t);
            Ok((integral.eval(t, &x, &v)? - i0).abs() / (1.0 + i0.abs()))
        })
        .collect::<Result<_>>()?;
    let mut r = ResidualReport::from_values(format!("integral_drift[{}]", integral.source), &vals, tolerance, 0);
    r.parts.insert("initial_value".into(), i0);
    Ok(r)
}

/// Image of a trajectory under exp(εX), with its residual against a fresh
/// integration and, when the symmetry carries one, the invariant change.
#[derive(Clone, Debug)]
pub struct PushResult {
    pub image: Trajectory,
    pub report: ResidualReport,
    /// Image points (t̃, x̃, ẋ̃).
    pub points: Vec<(f64, Vec<f64>, Vec<f64>)>,
}

// d(t, x, ẋ)/dε = (ξ, η, η⁽¹⁾)
fn prolonged_field(g: &Generator, system: &System, y: &[f64]) -> Result<Vec<f64>> {
    let n = system.dim();
    let (t, x, xd) = (y[0], &y[1..=n], &y[n + 1..]);
    let acc = vec![0.0; n];
    let (xi, eta) = generator_jets(g, t, x)?;
    let dxi = xi.total(xd, &acc).0;
    let mut out = Vec::with_capacity(2 * n + 1);
    out.push(xi.v);
    out.extend(eta.iter().map(|e| e.v));
    for i in 0..n {
        out.push(eta[i].total(xd, &acc).0 - xd[i] * dxi);
    }
    Ok(out)
}

fn flow_point(g: &Generator, system: &System, state: Vec<f64>, eps: f64) -> Result<Vec<f64>> {
    if eps == 0.0 {
        return Ok(state);
    }
    let escaped = std::sync::atomic::AtomicBool::new(false);
    let rhs = |_: f64, y: &[f64], dy: &mut [f64]| match prolonged_field(g, system, y) {
        Ok(v) => dy.copy_from_slice(&v),
        Err(_) => {
            escaped.store(true, std::sync::atomic::Ordering::Relaxed);
            dy.iter_mut().for_each(|v| *v = f64::NAN);
        }
    };
    let guard = |_: f64, y: &[f64]| if y.iter().all(|v| v.is_finite()) { Guard::Continue } else { Guard::Singular };
    let sol = ode::solve(rhs, 0.0, &state, eps, &SolverOptions::with_tol(1e-12), guard).map_err(|_| Error::FlowEscape { eps })?;
    if escaped.load(std::sync::atomic::Ordering::Relaxed) {
        return Err(Error::FlowEscape { eps });
    }
    Ok(sol.eval(eps))
}

/// Maps `traj` by the finite transformation exp(εX) and checks that the
/// image is again a solution.
pub fn push_solution(sym: &PointSymmetry, traj: &Trajectory, eps: f64, samples: usize) -> Result<PushResult> {
    let system = &traj.system;
    let n = system.dim();
    let ts = traj.sample_times(samples);
    let originals: Vec<(f64, Vec<f64>, Vec<f64>)> = ts
        .iter()
        .map(|&t| {
            let (x, v) = traj.state(t);
            (t, x, v)
        })
        .collect();
    let images: Vec<Vec<f64>> = originals
        .par_iter()
        .map(|(t, x, v)| {
            let state: Vec<f64> = std::iter::once(*t).chain(x.iter().copied()).chain(v.iter().copied()).collect();
            flow_point(&sym.generator, system, state, eps)
        })
        .collect::<Result<_>>()?;
    if images.windows(2).any(|w| w[1][0] <= w[0][0]) {
        return Err(Error::FlowEscape { eps });
    }
    let first = &images[0];
    let last = images.last().unwrap();
    let image = if eps == 0.0 {
        traj.clone()
    } else {
        integrate(system, &first[1..=n], &first[n + 1..], (first[0], last[0]), traj.tol).map_err(|_| Error::FlowEscape { eps })?
    };
    let vals: Vec<f64> = images
        .iter()
        .map(|y| {
            let (x, v) = image.state(y[0]);
            let d = x.iter().chain(&v).zip(&y[1..]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            d / (1.0 + y[1..].iter().map(|c| c * c).sum::<f64>().sqrt())
        })
        .collect();
    let mut report = ResidualReport::from_values(format!("push_solution[{}]", sym.label()), &vals, 1e-6, 0);
    report.parts.insert("epsilon".into(), eps);
    if let Some(inv) = sym.invariant {
        let change = originals
            .iter()
            .zip(&images)
            .map(|((t, x, _), y)| {
                let before = inv.eval(*t, x);
                ((inv.eval(y[0], &y[1..=n]) - before) / before).abs()
            })
            .fold(0.0, f64::max);
        report.parts.insert("invariant_change".into(), change);
    }
    let points = images.into_iter().map(|y| (y[0], y[1..=n].to_vec(), y[n + 1..].to_vec())).collect();
    Ok(PushResult { image, report, points })
}

/// Numeric rank of a generator list over ≥ 3·len fixed sample points.
pub fn independence_rank(gens: &[&Generator], seed: u64) -> Result<usize> {
    let Some(first) = gens.first() else { return Ok(0) };
    let probe = RankProbe::new(first.n, (3 * gens.len()).max(40), (1.0, 5.0), seed);
    probe.rank(gens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ClassifyOptions;
    use crate::geometry::euclidean_catalog;
    use crate::lie::classify_lie;
    use crate::noether::{classify_noether, noether_integral};

    fn system(n: usize, v: ScalarField<f64>, w: OmegaProfile<f64>) -> System {
        System::new(MetricSpace::euclidean(n), v, w)
    }

    fn lie(sys: &System) -> Vec<PointSymmetry> {
        classify_lie(&sys.space, &sys.v, &sys.omega, &euclidean_catalog(sys.dim()), &ClassifyOptions::default()).unwrap().symmetries
    }

    #[test]
    fn euler_equation_oracle() {
        let sys = system(1, ScalarField::quadratic(), OmegaProfile::inverse_square_scaled(2.0).unwrap());
        let traj = integrate(&sys, &[1.0], &[0.0], (1.0, 10.0), 1e-11).unwrap();
        let beta = 15f64.sqrt() / 2.0;
        for t in [2.0f64, 5.5, 10.0] {
            let exact = t.sqrt() * ((beta * t.ln()).cos() - (beta * t.ln()).sin() / (2.0 * beta));
            assert!((traj.state(t).0[0] - exact).abs() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn equilibrium_stays_put() {
        let sys = system(1, ScalarField::quadratic(), OmegaProfile::power_law(1.0).unwrap());
        let traj = integrate(&sys, &[0.0], &[0.0], (1.0, 4.0), 1e-10).unwrap();
        assert_eq!(traj.state(3.0).0[0], 0.0);
    }

    #[test]
    fn classified_generators_pass() {
        for sys in [
            system(1, ScalarField::quadratic(), OmegaProfile::power_law(1.0).unwrap()),
            system(3, ScalarField::kepler(), OmegaProfile::power_law(1.0).unwrap()),
            system(2, ScalarField::quadratic(), OmegaProfile::inverse_square_affine(2.0, 3.0).unwrap()),
        ] {
            for s in lie(&sys) {
                let r = check_determining_eqs(&s.generator, &sys, &SampleSpec::default()).unwrap();
                assert!(r.pass, "{} {}: {:?}", s.label(), s.describe(), r);
            }
        }
    }

    #[test]
    fn corrupted_generator_fails() {
        let sys = system(3, ScalarField::kepler(), OmegaProfile::power_law(1.0).unwrap());
        let h = lie(&sys).into_iter().find(|s| s.source.as_deref() == Some("H")).unwrap();
        let mut g = h.generator.clone();
        for (_, q) in g.eta.iter_mut() {
            *q = q.iter().map(|c| c.scale(1.0 + 1e-3)).collect();
        }
        let r = check_determining_eqs(&g, &sys, &SampleSpec::default()).unwrap();
        assert!(!r.pass && r.max > 1e-5 && r.max < 1e-2, "{r:?}");
    }

    #[test]
    fn noether_condition_and_drift() {
        let sys = system(3, ScalarField::kepler(), OmegaProfile::power_law(-0.5).unwrap());
        let out = classify_noether(&sys.space, &sys.v, &sys.omega, &euclidean_catalog(3), &ClassifyOptions::default()).unwrap();
        let traj = integrate(&sys, &[1.0, 0.2, 0.0], &[0.1, 0.9, 0.3], (1.0, 6.0), 1e-11).unwrap();
        for s in &out.symmetries {
            let r = check_noether_condition(s, &sys, &SampleSpec::default()).unwrap();
            assert!(r.pass, "{}: {r:?}", s.label());
            let d = check_integral_drift(&noether_integral(s, &sys.space, &sys.v, &sys.omega), &traj, 200, 1e-7).unwrap();
            assert!(d.pass, "{}: {d:?}", s.label());
        }
        // the same generator with the wrong profile
        let wrong = system(3, ScalarField::kepler(), OmegaProfile::power_law(1.0).unwrap());
        let h = out.symmetries.iter().find(|s| s.symmetry.source.as_deref() == Some("H")).unwrap();
        assert!(!check_noether_condition(h, &wrong, &SampleSpec::default()).unwrap().pass);
    }

    #[test]
    fn push_kepler_scaling() {
        let sys = system(3, ScalarField::kepler(), OmegaProfile::power_law(1.0).unwrap());
        let h = lie(&sys).into_iter().find(|s| s.source.as_deref() == Some("H")).unwrap();
        let traj = integrate(&sys, &[1.0, 0.0, 0.0], &[0.0, 1.1, 0.2], (1.0, 3.0), 1e-11).unwrap();
        let zero = push_solution(&h, &traj, 0.0, 21).unwrap();
        assert_eq!(zero.report.max, 0.0);
        let p = push_solution(&h, &traj, 0.3, 21).unwrap();
        assert!(p.report.pass, "{:?}", p.report);
        assert!(p.report.parts["invariant_change"] < 1e-8);
    }

    #[test]
    fn rank_of_colinear_pair() {
        let sys = system(3, ScalarField::kepler(), OmegaProfile::power_law(1.0).unwrap());
        let h = lie(&sys).into_iter().find(|s| s.source.as_deref() == Some("H")).unwrap();
        let mut g2 = h.generator.clone();
        for (_, q) in g2.eta.iter_mut() {
            *q = q.iter().map(|c| c.scale(2.0)).collect();
        }
        for (_, p) in g2.xi.iter_mut() {
            *p = p.scale(2.0);
        }
        assert_eq!(independence_rank(&[&h.generator, &g2], 7).unwrap(), 1);
    }
}
