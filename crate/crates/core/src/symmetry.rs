//! Time-coefficient functions and symmetry generators.
//!
//! Every case of the classification reduces the time dependence of a
//! generator to a linear system z' = A(t)z. [`LinearFlow`] holds the
//! fundamental matrix of that system, either in closed form (A constant and
//! nilpotent, so entries are polynomials in t) or as a dense numeric
//! solution. A [`TimeFunction`] picks one component of one solution.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fields::OmegaProfile;
use crate::ode::{self, DenseSolution, Guard, SolverOptions};
use crate::poly::{eval_field, Poly, PolyField};

/// Relative tolerance for numeric fundamental matrices.
pub const FLOW_RTOL: f64 = 1e-11;

/// A(t) = A₀ + ω(t)A₁ + ω'(t)A₂.
#[derive(Clone)]
pub struct FlowMatrix {
    pub a0: DMatrix<f64>,
    pub a1: DMatrix<f64>,
    pub a2: DMatrix<f64>,
    pub omega: OmegaProfile<f64>,
}

impl FlowMatrix {
    pub fn new(dim: usize, omega: &OmegaProfile<f64>) -> Self {
        FlowMatrix {
            a0: DMatrix::zeros(dim, dim),
            a1: DMatrix::zeros(dim, dim),
            a2: DMatrix::zeros(dim, dim),
            omega: omega.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.a0.nrows()
    }

    pub fn is_constant(&self) -> bool {
        self.a1.iter().all(|v| *v == 0.0) && self.a2.iter().all(|v| *v == 0.0)
    }

    pub fn at(&self, t: f64) -> Result<DMatrix<f64>> {
        let mut a = self.a0.clone();
        if !self.a1.iter().all(|v| *v == 0.0) {
            a += &self.a1 * self.omega.eval(t)?;
        }
        if !self.a2.iter().all(|v| *v == 0.0) {
            a += &self.a2 * self.omega.deriv(t)?;
        }
        Ok(a)
    }

    /// A'(t); ω'' by a central difference of the analytic ω'.
    pub fn deriv_at(&self, t: f64) -> Result<DMatrix<f64>> {
        let mut a = DMatrix::zeros(self.dim(), self.dim());
        if !self.a1.iter().all(|v| *v == 0.0) {
            a += &self.a1 * self.omega.deriv(t)?;
        }
        if !self.a2.iter().all(|v| *v == 0.0) {
            let h = 1e-5 * (1.0 + t.abs());
            let (lo, hi) = self.omega.interval();
            let (tp, tm) = ((t + h).min(hi), (t - h).max(lo));
            let w2 = (self.omega.deriv(tp)? - self.omega.deriv(tm)?) / (tp - tm);
            a += &self.a2 * w2;
        }
        Ok(a)
    }
}

enum FlowKind {
    /// Φ(t) = Σ Aᵏ (t−t₀)ᵏ / k!
    Nilpotent { powers: Vec<DMatrix<f64>> },
    Numeric { forward: Option<DenseSolution<f64>>, backward: Option<DenseSolution<f64>> },
}

/// Fundamental matrix of z' = A(t)z with Φ(t₀) = I on a window.
pub struct LinearFlow {
    matrix: FlowMatrix,
    t0: f64,
    lo: f64,
    hi: f64,
    kind: FlowKind,
}

impl fmt::Debug for LinearFlow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            FlowKind::Nilpotent { .. } => "closed-form",
            FlowKind::Numeric { .. } => "numeric",
        };
        write!(f, "LinearFlow(dim={}, t0={}, [{}, {}], {kind})", self.matrix.dim(), self.t0, self.lo, self.hi)
    }
}

impl LinearFlow {
    pub fn new(matrix: FlowMatrix, t0: f64, lo: f64, hi: f64) -> Result<Self> {
        let d = matrix.dim();
        if matrix.is_constant() {
            let mut powers = vec![DMatrix::identity(d, d)];
            for _ in 0..d {
                let next = powers.last().unwrap() * &matrix.a0;
                if next.iter().all(|v| v.abs() == 0.0) {
                    let kind = FlowKind::Nilpotent { powers };
                    return Ok(LinearFlow { matrix, t0, lo, hi, kind });
                }
                powers.push(next);
            }
        }
        let opts = SolverOptions { rtol: FLOW_RTOL, atol: FLOW_RTOL * 1e-2, max_steps: 2_000_000, h0: None };
        let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
            let a = match matrix.at(t) {
                Ok(a) => a,
                Err(_) => {
                    dy.iter_mut().for_each(|v| *v = f64::NAN);
                    return;
                }
            };
            let phi = DMatrix::from_column_slice(d, d, y);
            dy.copy_from_slice((a * phi).as_slice());
        };
        let id: Vec<f64> = DMatrix::<f64>::identity(d, d).as_slice().to_vec();
        let solve = |t1: f64| -> Result<Option<DenseSolution<f64>>> {
            if t1 == t0 {
                return Ok(None);
            }
            ode::solve(rhs, t0, &id, t1, &opts, |_, _| Guard::Continue)
                .map(Some)
                .map_err(|e| Error::OdeSolveFailure(format!("fundamental matrix on [{lo}, {hi}]: {e}")))
        };
        let forward = solve(hi)?;
        let backward = solve(lo)?;
        Ok(LinearFlow { matrix, t0, lo, hi, kind: FlowKind::Numeric { forward, backward } })
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn window(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self.kind, FlowKind::Nilpotent { .. })
    }

    pub fn matrix(&self) -> &FlowMatrix {
        &self.matrix
    }

    fn check(&self, t: f64) -> Result<()> {
        if self.is_closed_form() {
            return Ok(());
        }
        let slack = 1e-12 * (1.0 + self.hi.abs());
        if t < self.lo - slack || t > self.hi + slack {
            return Err(Error::OutOfDomain { t, lo: self.lo, hi: self.hi });
        }
        Ok(())
    }

    /// Φ(t).
    pub fn phi(&self, t: f64) -> Result<DMatrix<f64>> {
        self.check(t)?;
        let d = self.dim();
        match &self.kind {
            FlowKind::Nilpotent { powers } => {
                let dt = t - self.t0;
                let mut out = DMatrix::zeros(d, d);
                let mut c = 1.0;
                for (k, p) in powers.iter().enumerate() {
                    if k > 0 {
                        c *= dt / k as f64;
                    }
                    out += p * c;
                }
                Ok(out)
            }
            FlowKind::Numeric { forward, backward } => {
                let sol = if t >= self.t0 { forward.as_ref() } else { backward.as_ref() };
                match sol {
                    None => Ok(DMatrix::identity(d, d)),
                    Some(s) => {
                        let tt = t.clamp(s.t_min(), s.t_max());
                        Ok(DMatrix::from_column_slice(d, d, &s.eval(tt)))
                    }
                }
            }
        }
    }

    /// (z, z', z'') at `t` for z(t₀) = `z0`.
    pub fn jet(&self, t: f64, z0: &DVector<f64>) -> Result<[DVector<f64>; 3]> {
        let z = self.phi(t)? * z0;
        let a = self.matrix.at(t)?;
        let dz = &a * &z;
        let ddz = self.matrix.deriv_at(t)? * &z + &a * &dz;
        Ok([z, dz, ddz])
    }

    /// Whether component `c` of Φ(t)z₀ can be nonzero, from the sparsity of A.
    pub fn reaches(&self, z0: &DVector<f64>, c: usize) -> bool {
        let d = self.dim();
        let m = &self.matrix;
        let edge = |i: usize, j: usize| m.a0[(i, j)] != 0.0 || m.a1[(i, j)] != 0.0 || m.a2[(i, j)] != 0.0;
        let mut seen: Vec<bool> = z0.iter().map(|v| *v != 0.0).collect();
        let mut stack: Vec<usize> = (0..d).filter(|&j| seen[j]).collect();
        while let Some(j) = stack.pop() {
            for i in 0..d {
                if !seen[i] && edge(i, j) {
                    seen[i] = true;
                    stack.push(i);
                }
            }
        }
        seen[c]
    }

    /// Component `c` of Φ(t)z₀ as polynomial coefficients in t (closed form only).
    pub fn polynomial(&self, z0: &DVector<f64>, c: usize) -> Option<Vec<f64>> {
        let FlowKind::Nilpotent { powers } = &self.kind else { return None };
        // Σ_k (Aᵏz₀)[c] (t−t₀)ᵏ/k!, expanded in powers of t
        let mut coeffs = vec![0.0; powers.len()];
        let mut fact = 1.0;
        for (k, p) in powers.iter().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            let a = (p * z0)[c] / fact;
            // (t − t₀)ᵏ = Σ_j C(k,j) tʲ (−t₀)^{k−j}
            let mut binom = 1.0;
            for j in 0..=k {
                if j > 0 {
                    binom = binom * (k - j + 1) as f64 / j as f64;
                }
                coeffs[j] += a * binom * (-self.t0).powi((k - j) as i32);
            }
        }
        while coeffs.len() > 1 && coeffs.last().map_or(false, |v| v.abs() < 1e-14) {
            coeffs.pop();
        }
        Some(coeffs.into_iter().map(|v| if v.abs() < 1e-14 { 0.0 } else { v }).collect())
    }
}

/// A scalar function of t with exact first and second derivatives.
#[derive(Clone)]
pub enum TimeFunction {
    /// Σ cₖ tᵏ
    Polynomial(Vec<f64>),
    /// Component of a solution of a linear flow.
    Flow { flow: Arc<LinearFlow>, z0: DVector<f64>, component: usize },
    /// scale · ∫ω dt (antiderivative of the profile).
    OmegaIntegral { omega: OmegaProfile<f64>, scale: f64 },
}

impl fmt::Debug for TimeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.describe())
    }
}

impl TimeFunction {
    pub fn constant(c: f64) -> Self {
        TimeFunction::Polynomial(vec![c])
    }

    /// Solution component, collapsed to a polynomial when the flow is closed-form.
    pub fn from_flow(flow: &Arc<LinearFlow>, z0: &DVector<f64>, component: usize) -> Self {
        if !flow.reaches(z0, component) {
            return TimeFunction::constant(0.0);
        }
        match flow.polynomial(z0, component) {
            Some(c) => TimeFunction::Polynomial(c),
            None => TimeFunction::Flow { flow: flow.clone(), z0: z0.clone(), component },
        }
    }

    /// (f, f', f'').
    pub fn jet(&self, t: f64) -> Result<[f64; 3]> {
        match self {
            TimeFunction::Polynomial(c) => {
                let mut v = [0.0; 3];
                // Horner on value and derivatives
                for &ck in c.iter().rev() {
                    v[2] = v[2] * t + 2.0 * v[1];
                    v[1] = v[1] * t + v[0];
                    v[0] = v[0] * t + ck;
                }
                Ok(v)
            }
            TimeFunction::Flow { flow, z0, component } => {
                let [z, dz, ddz] = flow.jet(t, z0)?;
                Ok([z[*component], dz[*component], ddz[*component]])
            }
            TimeFunction::OmegaIntegral { omega, scale } => {
                if *scale == 0.0 {
                    return Ok([0.0; 3]);
                }
                Ok([scale * omega.antiderivative(t)?, scale * omega.eval(t)?, scale * omega.deriv(t)?])
            }
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        Ok(self.jet(t)?[0])
    }

    pub fn is_closed_form(&self) -> bool {
        !matches!(self, TimeFunction::Flow { .. })
    }

    pub fn is_zero(&self) -> bool {
        match self {
            TimeFunction::Polynomial(c) => c.iter().all(|v| *v == 0.0),
            TimeFunction::OmegaIntegral { scale, .. } => *scale == 0.0,
            TimeFunction::Flow { .. } => false,
        }
    }

    /// Readable form: a polynomial in t, `c·∫ω dt`, or a numeric marker.
    pub fn describe(&self) -> String {
        match self {
            TimeFunction::Polynomial(c) => format_poly_t(c),
            TimeFunction::OmegaIntegral { scale, .. } => format!("{}*∫ω dt", fmt_num(*scale)),
            TimeFunction::Flow { flow, z0, component } => {
                let init: Vec<String> = z0.iter().map(|v| fmt_num(*v)).collect();
                format!("numeric[z{component}; z(t0={})=({})]", fmt_num(flow.t0()), init.join(", "))
            }
        }
    }
}

pub(crate) fn fmt_num(v: f64) -> String {
    let r = (v * 1e9).round() / 1e9;
    let r = if r == 0.0 { 0.0 } else { r };
    format!("{r}")
}

fn format_poly_t(c: &[f64]) -> String {
    let mut parts = vec![];
    for (k, &v) in c.iter().enumerate().rev() {
        if v == 0.0 {
            continue;
        }
        let mag = fmt_num(v.abs());
        let mono = match k {
            0 => mag,
            1 if mag == "1" => "t".into(),
            1 => format!("{mag}*t"),
            _ if mag == "1" => format!("t^{k}"),
            _ => format!("{mag}*t^{k}"),
        };
        if parts.is_empty() {
            parts.push(if v < 0.0 { format!("-{mono}") } else { mono });
        } else {
            parts.push(format!("{} {mono}", if v < 0.0 { '-' } else { '+' }));
        }
    }
    if parts.is_empty() {
        "0".into()
    } else {
        parts.join(" ")
    }
}

/// X = ξ∂t + ηⁱ∂ᵢ with ξ = Σ αₐ(t)pₐ(x) and η = Σ β_b(t)Q_b(x).
#[derive(Clone, Debug)]
pub struct Generator {
    pub n: usize,
    pub xi: Vec<(TimeFunction, Poly<f64>)>,
    pub eta: Vec<(TimeFunction, PolyField<f64>)>,
    /// Readable names of the spatial factors, parallel to `xi` and `eta`.
    pub xi_labels: Vec<String>,
    pub eta_labels: Vec<String>,
}

/// ξ, η and their t-derivatives at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorJet {
    pub xi: [f64; 3],
    pub eta: [Vec<f64>; 3],
}

impl Generator {
    pub fn new(n: usize) -> Self {
        Generator { n, xi: vec![], eta: vec![], xi_labels: vec![], eta_labels: vec![] }
    }

    pub fn with_xi(mut self, f: TimeFunction, p: Poly<f64>, label: impl Into<String>) -> Self {
        if !f.is_zero() && !p.is_zero() {
            self.xi.push((f, p));
            self.xi_labels.push(label.into());
        }
        self
    }

    pub fn with_eta(mut self, f: TimeFunction, q: PolyField<f64>, label: impl Into<String>) -> Self {
        if !f.is_zero() && q.iter().any(|c| !c.is_zero()) {
            self.eta.push((f, q));
            self.eta_labels.push(label.into());
        }
        self
    }

    pub fn xi(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.xi.iter().map(|(f, p)| Ok(f.eval(t)? * p.eval(x))).sum()
    }

    pub fn eta(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n];
        for (f, q) in &self.eta {
            let a = f.eval(t)?;
            for (o, v) in out.iter_mut().zip(eval_field(q, x)) {
                *o += a * v;
            }
        }
        Ok(out)
    }

    /// ξ, η with exact first and second t-derivatives.
    pub fn jet(&self, t: f64, x: &[f64]) -> Result<GeneratorJet> {
        let mut xi = [0.0; 3];
        for (f, p) in &self.xi {
            let j = f.jet(t)?;
            let v = p.eval(x);
            for k in 0..3 {
                xi[k] += j[k] * v;
            }
        }
        let mut eta = [vec![0.0; self.n], vec![0.0; self.n], vec![0.0; self.n]];
        for (f, q) in &self.eta {
            let j = f.jet(t)?;
            let v = eval_field(q, x);
            for k in 0..3 {
                for i in 0..self.n {
                    eta[k][i] += j[k] * v[i];
                }
            }
        }
        Ok(GeneratorJet { xi, eta })
    }

    /// ξ depends on t only.
    pub fn xi_is_time_only(&self) -> bool {
        self.xi.iter().all(|(_, p)| p.degree() == 0)
    }

    pub fn is_closed_form(&self) -> bool {
        self.xi.iter().all(|(f, _)| f.is_closed_form()) && self.eta.iter().all(|(f, _)| f.is_closed_form())
    }

    /// e.g. `(0.6*t)∂t + (1)H`.
    pub fn describe(&self) -> String {
        let mut parts = vec![];
        for ((f, _), l) in self.xi.iter().zip(&self.xi_labels) {
            let s = if l.is_empty() || l == "1" { format!("({})∂t", f.describe()) } else { format!("({})·{l}∂t", f.describe()) };
            parts.push(s);
        }
        for ((f, _), l) in self.eta.iter().zip(&self.eta_labels) {
            parts.push(format!("({}){l}", f.describe()));
        }
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" + ")
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum CaseTag {
    #[serde(rename = "I.1")]
    I1,
    #[serde(rename = "I.2")]
    I2,
    #[serde(rename = "II")]
    II,
    #[serde(rename = "III")]
    III,
    #[serde(rename = "IV")]
    IV,
    #[serde(rename = "NoetherI")]
    NoetherI,
    #[serde(rename = "NoetherII.a")]
    NoetherIIa,
    #[serde(rename = "NoetherII.b")]
    NoetherIIb,
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseTag::I1 => "I.1",
            CaseTag::I2 => "I.2",
            CaseTag::II => "II",
            CaseTag::III => "III",
            CaseTag::IV => "IV",
            CaseTag::NoetherI => "NoetherI",
            CaseTag::NoetherIIa => "NoetherII.a",
            CaseTag::NoetherIIb => "NoetherII.b",
        };
        f.write_str(s)
    }
}

/// A Lie point symmetry together with the data that produced it.
#[derive(Clone, Debug)]
pub struct PointSymmetry {
    pub case: CaseTag,
    /// Collineation the generator was built from, if any.
    pub source: Option<String>,
    pub generator: Generator,
    pub constants: BTreeMap<String, f64>,
    /// D(t), T(t), C(t), ξ(t), K(t) as applicable.
    pub functions: BTreeMap<String, TimeFunction>,
    /// Invariant quantity preserved by the flow, as a readable formula.
    pub invariant: Option<Invariant>,
}

/// r^p · t^q, preserved by scaling generators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Invariant {
    pub r_power: f64,
    pub t_power: f64,
}

impl Invariant {
    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        r.powf(self.r_power) * t.powf(self.t_power)
    }

    pub fn describe(&self) -> String {
        format!("r^({}) / t^({})", fmt_num(self.r_power), fmt_num(-self.t_power))
    }
}

impl PointSymmetry {
    pub fn label(&self) -> String {
        match &self.source {
            Some(s) => format!("{}[{s}]", self.case),
            None => self.case.to_string(),
        }
    }

    pub fn describe(&self) -> String {
        self.generator.describe()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn omega_t() -> OmegaProfile<f64> {
        OmegaProfile::power_law(1.0).unwrap()
    }

    #[test]
    fn nilpotent_flow_is_polynomial() {
        // z = (D, D'), D'' = 0
        let mut m = FlowMatrix::new(2, &omega_t());
        m.a0[(0, 1)] = 1.0;
        let flow = Arc::new(LinearFlow::new(m, 1.0, 0.5, 16.0).unwrap());
        assert!(flow.is_closed_form());
        let z0 = DVector::from_vec(vec![2.0, 3.0]);
        // D = 2 + 3(t − 1) = 3t − 1
        assert_eq!(flow.polynomial(&z0, 0).unwrap(), vec![-1.0, 3.0]);
        let f = TimeFunction::from_flow(&flow, &z0, 0);
        assert_eq!(f.jet(2.0).unwrap(), [5.0, 3.0, 0.0]);
        assert_eq!(f.describe(), "3*t - 1");
    }

    #[test]
    fn numeric_flow_matches_cosine() {
        // T'' = −ωT with ω ≡ 1 written through a constant profile
        let w = OmegaProfile::constant(1.0);
        let mut m = FlowMatrix::new(2, &w);
        m.a0[(0, 1)] = 1.0;
        m.a1[(1, 0)] = -1.0;
        let flow = Arc::new(LinearFlow::new(m, 1.0, 0.5, 16.0).unwrap());
        assert!(!flow.is_closed_form());
        let z0 = DVector::from_vec(vec![1.0, 0.0]);
        let f = TimeFunction::from_flow(&flow, &z0, 0);
        for &t in &[0.5, 1.0, 3.3, 15.9] {
            let j = f.jet(t).unwrap();
            let c = (t - 1.0f64).cos();
            let s = (t - 1.0f64).sin();
            assert!((j[0] - c).abs() < 1e-9, "{t}");
            assert!((j[1] + s).abs() < 1e-9);
            assert!((j[2] + c).abs() < 1e-9);
        }
    }

    #[test]
    fn polynomial_jets() {
        let f = TimeFunction::Polynomial(vec![1.0, 0.0, 2.0]);
        assert_eq!(f.jet(3.0).unwrap(), [19.0, 12.0, 4.0]);
    }

    #[test]
    fn omega_integral_jets() {
        let f = TimeFunction::OmegaIntegral { omega: OmegaProfile::power_law(2.0).unwrap(), scale: 3.0 };
        let j = f.jet(2.0).unwrap();
        assert!((j[0] - 8.0).abs() < 1e-14 && (j[1] - 12.0).abs() < 1e-14 && (j[2] - 12.0).abs() < 1e-14);
    }

    #[test]
    fn generator_evaluation() {
        let x = Poly::var(2, 0);
        let y = Poly::var(2, 1);
        let g = Generator::new(2)
            .with_xi(TimeFunction::Polynomial(vec![0.0, 1.0]), Poly::constant(2, 1.0), "1")
            .with_eta(TimeFunction::constant(1.0), vec![x, y], "H");
        assert_eq!(g.xi(2.0, &[1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(g.eta(2.0, &[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(g.describe(), "(t)∂t + (1)H");
        assert!(g.xi_is_time_only());
    }
}
