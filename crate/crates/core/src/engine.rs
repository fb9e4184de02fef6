//! Shared machinery for the case analyses: the time window, linear systems
//! with pointwise constraints, and rank-based de-duplication.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fields::OmegaProfile;
use crate::linalg;
use crate::symmetry::{FlowMatrix, Generator, LinearFlow};

/// Default time window and anchor for the time coefficients.
pub const DEFAULT_WINDOW: (f64, f64) = (0.5, 16.0);
pub const DEFAULT_T0: f64 = 1.0;
const CHEBYSHEV_SAMPLES: usize = 64;
const NULLSPACE_TOL: f64 = 1e-7;
/// Relative singular-value threshold for generator independence.
pub const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    pub seed: u64,
    /// Requested window; intersected with the domain of ω.
    pub window: (f64, f64),
    pub t0: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { seed: 0x5eed, window: DEFAULT_WINDOW, t0: DEFAULT_T0 }
    }
}

/// Closed window inside the domain of ω plus the anchor t₀.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeWindow {
    pub lo: f64,
    pub hi: f64,
    pub t0: f64,
}

impl TimeWindow {
    pub fn new(omega: &OmegaProfile<f64>, opts: &ClassifyOptions) -> Result<Self> {
        let (a, b) = omega.interval();
        let (mut lo, mut hi) = (opts.window.0.max(a), opts.window.1.min(b));
        if !(lo < hi) {
            // requested window misses the domain: take a stretch of the domain
            let span = opts.window.1 - opts.window.0;
            lo = if a.is_finite() { a } else { b - span };
            hi = if b.is_finite() { b } else { a + span };
            hi = hi.min(lo + span);
        }
        // stay off open singular endpoints
        let pad = 1e-3 * (hi - lo);
        if lo == a && omega.eval(lo).map_or(true, |v| !v.is_finite()) {
            lo += pad;
        }
        if hi == b && omega.eval(hi).map_or(true, |v| !v.is_finite()) {
            hi -= pad;
        }
        if !(lo < hi) || omega.eval(lo).is_err() || omega.eval(hi).is_err() {
            return Err(Error::UnsupportedOmega(format!("no usable time window inside {:?}", omega.interval())));
        }
        let t0 = if opts.t0 >= lo && opts.t0 <= hi { opts.t0 } else { 0.5 * (lo + hi) };
        Ok(TimeWindow { lo, hi, t0 })
    }

    /// Chebyshev points of the first kind on the window.
    pub fn chebyshev(&self, count: usize) -> Vec<f64> {
        let (mid, half) = (0.5 * (self.lo + self.hi), 0.5 * (self.hi - self.lo));
        (0..count)
            .map(|k| mid + half * (std::f64::consts::PI * (k as f64 + 0.5) / count as f64).cos())
            .collect()
    }

    /// Sample times for verification: [1, 5] when it fits, else the window.
    pub fn sample_range(&self) -> (f64, f64) {
        let (lo, hi) = (self.lo.max(1.0), self.hi.min(5.0));
        if lo < hi {
            (lo, hi)
        } else {
            (self.lo, self.hi)
        }
    }
}

type RowFn = Box<dyn Fn(f64) -> Result<DVector<f64>> + Send + Sync>;

/// z' = A(t)z subject to c(t)·z = 0 for every listed row and all t.
pub struct ConstrainedSystem {
    pub matrix: FlowMatrix,
    rows: Vec<RowFn>,
    initial: Vec<usize>,
}

/// Solution space of a [`ConstrainedSystem`]: admissible z(t₀) as columns.
pub struct SolutionSpace {
    pub flow: Arc<LinearFlow>,
    pub basis: DMatrix<f64>,
}

impl ConstrainedSystem {
    pub fn new(matrix: FlowMatrix) -> Self {
        ConstrainedSystem { matrix, rows: vec![], initial: vec![] }
    }

    pub fn constrain(mut self, row: impl Fn(f64) -> Result<DVector<f64>> + Send + Sync + 'static) -> Self {
        self.rows.push(Box::new(row));
        self
    }

    /// Fixes component `c` to vanish identically.
    pub fn vanish(self, c: usize) -> Self {
        let d = self.matrix.dim();
        self.constrain(move |_| {
            let mut r = DVector::zeros(d);
            r[c] = 1.0;
            Ok(r)
        })
    }

    /// Fixes component `c` to vanish at t₀ only.
    pub fn fix_initial(mut self, c: usize) -> Self {
        self.initial.push(c);
        self
    }

    pub fn solve(self, w: &TimeWindow) -> Result<SolutionSpace> {
        let d = self.matrix.dim();
        let flow = Arc::new(LinearFlow::new(self.matrix, w.t0, w.lo, w.hi)?);
        let basis = if self.rows.is_empty() && self.initial.is_empty() {
            DMatrix::identity(flow.dim(), flow.dim())
        } else {
            let mut stacked: Vec<DVector<f64>> = self
                .initial
                .iter()
                .map(|&c| {
                    let mut r = DVector::zeros(d);
                    r[c] = 1.0;
                    r
                })
                .collect();
            for t in w.chebyshev(CHEBYSHEV_SAMPLES) {
                let phi = flow.phi(t)?;
                for row in &self.rows {
                    let r = phi.transpose() * row(t)?;
                    let nrm = r.norm();
                    if nrm > 0.0 {
                        stacked.push(r / nrm);
                    }
                }
            }
            if stacked.is_empty() {
                DMatrix::identity(flow.dim(), flow.dim())
            } else {
                let m = DMatrix::from_fn(stacked.len(), flow.dim(), |i, j| stacked[i][j]);
                linalg::nullspace(&m, NULLSPACE_TOL)
            }
        };
        Ok(SolutionSpace { flow, basis })
    }
}

impl SolutionSpace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Subspace on which component `c` vanishes identically.
    pub fn vanishing(&self, c: usize, w: &TimeWindow) -> Result<DMatrix<f64>> {
        if self.dim() == 0 {
            return Ok(self.basis.clone());
        }
        let ts = w.chebyshev(CHEBYSHEV_SAMPLES);
        let mut m = DMatrix::zeros(ts.len(), self.dim());
        for (i, &t) in ts.iter().enumerate() {
            let row = self.flow.phi(t)?.row(c) * &self.basis;
            m.row_mut(i).copy_from(&row);
        }
        let scale = m.amax();
        if scale == 0.0 {
            return Ok(self.basis.clone());
        }
        let coords = linalg::nullspace(&(m / scale), NULLSPACE_TOL);
        Ok(&self.basis * coords)
    }

    /// Drops the part of the space on which component `c` vanishes identically.
    pub fn reject_vanishing(mut self, c: usize, w: &TimeWindow) -> Result<(Self, usize)> {
        let sub = self.vanishing(c, w)?;
        let dropped = sub.ncols();
        self.basis = linalg::complement_in(&self.basis, &sub);
        Ok((self, dropped))
    }

    /// Canonical initial data, one vector per independent solution.
    pub fn initial_data(&self) -> Vec<DVector<f64>> {
        if self.dim() == 0 {
            return vec![];
        }
        linalg::canonical_basis(&self.basis, 1e-9)
    }
}

/// Fixed (t, x) points for comparing generators.
#[derive(Debug, Clone)]
pub struct RankProbe {
    points: Vec<(f64, Vec<f64>)>,
}

impl RankProbe {
    pub fn new(n: usize, count: usize, t_range: (f64, f64), seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut points = Vec::with_capacity(count);
        while points.len() < count {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            if x.iter().map(|v| v * v).sum::<f64>().sqrt() < 0.5 {
                continue;
            }
            let t = if t_range.0 < t_range.1 { rng.gen_range(t_range.0..t_range.1) } else { t_range.0 };
            points.push((t, x));
        }
        RankProbe { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// (ξ, η¹..ηⁿ) stacked over the probe points, scaled to unit norm.
    pub fn evaluate(&self, g: &Generator) -> Result<DVector<f64>> {
        let n = g.n;
        let mut v = DVector::zeros(self.points.len() * (n + 1));
        for (k, (t, x)) in self.points.iter().enumerate() {
            v[k * (n + 1)] = g.xi(*t, x)?;
            for (i, e) in g.eta(*t, x)?.into_iter().enumerate() {
                v[k * (n + 1) + 1 + i] = e;
            }
        }
        let nrm = v.norm();
        Ok(if nrm > 0.0 { v / nrm } else { v })
    }

    /// Numeric rank of a set of generators.
    pub fn rank(&self, gens: &[&Generator]) -> Result<usize> {
        if gens.is_empty() {
            return Ok(0);
        }
        let cols: Vec<DVector<f64>> = gens.iter().map(|g| self.evaluate(g)).collect::<Result<_>>()?;
        Ok(linalg::rank(&DMatrix::from_columns(&cols), RANK_TOL))
    }
}

/// Greedy span builder: keeps a candidate only if it raises the rank.
pub struct Deduper {
    probe: RankProbe,
    cols: Vec<DVector<f64>>,
}

impl Deduper {
    pub fn new(probe: RankProbe) -> Self {
        Deduper { probe, cols: vec![] }
    }

    pub fn offer(&mut self, g: &Generator) -> Result<bool> {
        let v = self.probe.evaluate(g)?;
        if v.norm() == 0.0 {
            return Ok(false);
        }
        self.cols.push(v);
        let m = DMatrix::from_columns(&self.cols);
        if linalg::rank(&m, RANK_TOL) == self.cols.len() {
            Ok(true)
        } else {
            self.cols.pop();
            Ok(false)
        }
    }

    pub fn rank(&self) -> usize {
        self.cols.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_clips_to_domain() {
        let w = TimeWindow::new(&OmegaProfile::power_law(1.0).unwrap(), &ClassifyOptions::default()).unwrap();
        assert_eq!((w.lo, w.hi, w.t0), (0.5, 16.0, 1.0));
        let tab = OmegaProfile::tabulated(vec![2.0, 3.0, 4.0], vec![1.0, 2.0, 4.0]).unwrap();
        let w = TimeWindow::new(&tab, &ClassifyOptions::default()).unwrap();
        assert_eq!((w.lo, w.hi, w.t0), (2.0, 4.0, 3.0));
    }

    #[test]
    fn constrained_affine_time_function() {
        // D'' = 0 with 2D' + (ln ω)'D = 0 for ω = 1/(2t+3)² gives D ∝ 2t + 3
        let w = OmegaProfile::inverse_square_affine(2.0, 3.0).unwrap();
        let win = TimeWindow::new(&w, &ClassifyOptions::default()).unwrap();
        let mut m = FlowMatrix::new(2, &w);
        m.a0[(0, 1)] = 1.0;
        let w2 = w.clone();
        let sys = ConstrainedSystem::new(m).constrain(move |t| Ok(DVector::from_vec(vec![w2.log_deriv(t)?, 2.0])));
        let space = sys.solve(&win).unwrap();
        assert_eq!(space.dim(), 1);
        let z0 = &space.initial_data()[0];
        let poly = space.flow.polynomial(z0, 0).unwrap();
        assert!((poly[1] / poly[0] - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn generic_omega_has_no_affine_solution() {
        let w = OmegaProfile::power_law(1.5).unwrap();
        let win = TimeWindow::new(&w, &ClassifyOptions::default()).unwrap();
        let mut m = FlowMatrix::new(2, &w);
        m.a0[(0, 1)] = 1.0;
        let w2 = w.clone();
        let sys = ConstrainedSystem::new(m).constrain(move |t| Ok(DVector::from_vec(vec![w2.log_deriv(t)?, 2.0])));
        assert_eq!(sys.solve(&win).unwrap().dim(), 0);
    }
}
