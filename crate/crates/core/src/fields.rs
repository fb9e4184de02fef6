//! Closed-form potentials V(x) and time coefficients ω(t).

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::quad;
use crate::scalar::{norm, Scalar};

/// Default lower radius for singular potential families.
pub const DEFAULT_R_MIN: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialFamily<T> {
    /// V = rⁿ/n.
    CentralPower { n: T },
    /// V = −1/r.
    Kepler,
    /// V = −½ r⁻².
    Exceptional,
    /// V = ½ xᵢxⁱ.
    Quadratic,
    /// Arbitrary polynomial in the Cartesian coordinates.
    PolynomialGeneric(Poly<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T> {
    family: PotentialFamily<T>,
    r_min: T,
}

impl<T: Scalar> ScalarField<T> {
    pub fn new(family: PotentialFamily<T>) -> Self {
        ScalarField { family, r_min: T::lit(DEFAULT_R_MIN) }
    }

    pub fn central_power(n: T) -> Result<Self> {
        if n == T::zero() {
            return Err(Error::InvalidProfile("central power exponent must be nonzero".into()));
        }
        Ok(Self::new(PotentialFamily::CentralPower { n }))
    }

    pub fn kepler() -> Self {
        Self::new(PotentialFamily::Kepler)
    }

    pub fn exceptional() -> Self {
        Self::new(PotentialFamily::Exceptional)
    }

    pub fn quadratic() -> Self {
        Self::new(PotentialFamily::Quadratic)
    }

    pub fn polynomial(p: Poly<T>) -> Self {
        Self::new(PotentialFamily::PolynomialGeneric(p))
    }

    pub fn with_r_min(mut self, r_min: T) -> Self {
        self.r_min = r_min;
        self
    }

    pub fn family(&self) -> &PotentialFamily<T> {
        &self.family
    }

    pub fn r_min(&self) -> T {
        self.r_min
    }

    pub fn name(&self) -> String {
        match &self.family {
            PotentialFamily::CentralPower { n } => format!("CentralPower(n={n})"),
            PotentialFamily::Kepler => "Kepler".into(),
            PotentialFamily::Exceptional => "Exceptional".into(),
            PotentialFamily::Quadratic => "Quadratic".into(),
            PotentialFamily::PolynomialGeneric(p) => format!("PolynomialGeneric({p})"),
        }
    }

    /// `(c, p)` when V = c·rᵖ.
    pub fn radial_power(&self) -> Option<(T, T)> {
        match &self.family {
            PotentialFamily::CentralPower { n } => Some((T::one() / *n, *n)),
            PotentialFamily::Kepler => Some((-T::one(), -T::one())),
            PotentialFamily::Exceptional => Some((T::lit(-0.5), T::lit(-2.0))),
            PotentialFamily::Quadratic => Some((T::lit(0.5), T::lit(2.0))),
            PotentialFamily::PolynomialGeneric(_) => None,
        }
    }

    /// Whether the family needs r ≥ r_min.
    pub fn is_singular(&self) -> bool {
        match self.radial_power() {
            Some((_, p)) => p < T::lit(2.0),
            None => false,
        }
    }

    fn check(&self, x: &[T]) -> Result<T> {
        let r = norm(x);
        if self.is_singular() && r < self.r_min {
            return Err(Error::SingularPoint { radius: r.to_f64_lossy(), r_min: self.r_min.to_f64_lossy() });
        }
        Ok(r)
    }

    pub fn eval(&self, x: &[T]) -> Result<T> {
        let r = self.check(x)?;
        Ok(match &self.family {
            PotentialFamily::PolynomialGeneric(p) => p.eval(x),
            _ => {
                let (c, p) = self.radial_power().unwrap();
                c * r.powf(p)
            }
        })
    }

    /// Analytic gradient V'ⁱ (Cartesian components).
    pub fn grad(&self, x: &[T]) -> Result<Vec<T>> {
        let r = self.check(x)?;
        Ok(match &self.family {
            PotentialFamily::PolynomialGeneric(p) => p.gradient().iter().map(|q| q.eval(x)).collect(),
            _ => {
                let (c, p) = self.radial_power().unwrap();
                if r == T::zero() {
                    return Ok(vec![T::zero(); x.len()]);
                }
                let s = c * p * r.powf(p - T::lit(2.0));
                x.iter().map(|&xi| s * xi).collect()
            }
        })
    }

    /// Analytic Hessian ∂ᵢ∂ⱼV.
    pub fn hessian(&self, x: &[T]) -> Result<Vec<Vec<T>>> {
        let r = self.check(x)?;
        let n = x.len();
        Ok(match &self.family {
            PotentialFamily::PolynomialGeneric(p) => {
                let g = p.gradient();
                (0..n).map(|i| (0..n).map(|j| g[i].partial(j).eval(x)).collect()).collect()
            }
            _ => {
                let (c, p) = self.radial_power().unwrap();
                let two = T::lit(2.0);
                if r == T::zero() {
                    // only the regular families reach here
                    let d = if p == two { c * p } else { T::zero() };
                    return Ok((0..n).map(|i| (0..n).map(|j| if i == j { d } else { T::zero() }).collect()).collect());
                }
                let a = c * p * r.powf(p - two);
                let b = if p == two { T::zero() } else { c * p * (p - two) * r.powf(p - T::lit(4.0)) };
                (0..n)
                    .map(|i| (0..n).map(|j| (if i == j { a } else { T::zero() }) + b * x[i] * x[j]).collect())
                    .collect()
            }
        })
    }

    /// Central-difference gradient; the oracle for [`ScalarField::grad`].
    pub fn fd_grad(&self, x: &[T], h: T) -> Result<Vec<T>> {
        let mut xp = x.to_vec();
        let mut out = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            xp[i] = x[i] + h;
            let fp = self.eval(&xp)?;
            xp[i] = x[i] - h;
            let fm = self.eval(&xp)?;
            xp[i] = x[i];
            out.push((fp - fm) / (T::lit(2.0) * h));
        }
        Ok(out)
    }
}

/// User-supplied time coefficient with an analytic log-derivative.
pub trait TimeProfile<T>: Send + Sync {
    fn value(&self, t: T) -> T;
    fn log_deriv(&self, t: T) -> T;
    fn label(&self) -> String;
}

/// Monotonicity-preserving cubic Hermite interpolant (Fritsch–Carlson).
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic<T> {
    t: Vec<T>,
    y: Vec<T>,
    m: Vec<T>,
}

impl<T: Scalar> MonotoneCubic<T> {
    pub fn new(t: Vec<T>, y: Vec<T>) -> Result<Self> {
        if t.len() != y.len() || t.len() < 2 {
            return Err(Error::InvalidProfile("tabulated profile needs ≥ 2 matching samples".into()));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidProfile("tabulated time grid must be strictly increasing".into()));
        }
        let k = t.len();
        let delta: Vec<T> = (0..k - 1).map(|i| (y[i + 1] - y[i]) / (t[i + 1] - t[i])).collect();
        let mut m = vec![T::zero(); k];
        m[0] = delta[0];
        m[k - 1] = delta[k - 2];
        for i in 1..k - 1 {
            m[i] = if delta[i - 1] * delta[i] <= T::zero() {
                T::zero()
            } else {
                T::lit(0.5) * (delta[i - 1] + delta[i])
            };
        }
        for i in 0..k - 1 {
            if delta[i] == T::zero() {
                m[i] = T::zero();
                m[i + 1] = T::zero();
                continue;
            }
            let a = m[i] / delta[i];
            let b = m[i + 1] / delta[i];
            let s = a * a + b * b;
            if s > T::lit(9.0) {
                let tau = T::lit(3.0) / s.sqrt();
                m[i] = tau * a * delta[i];
                m[i + 1] = tau * b * delta[i];
            }
        }
        Ok(MonotoneCubic { t, y, m })
    }

    pub fn lo(&self) -> T {
        self.t[0]
    }

    pub fn hi(&self) -> T {
        *self.t.last().unwrap()
    }

    pub fn knots(&self) -> &[T] {
        &self.t
    }

    pub fn values(&self) -> &[T] {
        &self.y
    }

    /// Value and first derivative of the interpolant.
    pub fn eval(&self, x: T) -> (T, T) {
        let i = self.t.partition_point(|&ti| ti <= x).clamp(1, self.t.len() - 1) - 1;
        let h = self.t[i + 1] - self.t[i];
        let s = (x - self.t[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let h00 = two * s3 - three * s2 + T::one();
        let h10 = s3 - two * s2 + s;
        let h01 = -two * s3 + three * s2;
        let h11 = s3 - s2;
        let v = h00 * self.y[i] + h10 * h * self.m[i] + h01 * self.y[i + 1] + h11 * h * self.m[i + 1];
        let d00 = (T::lit(6.0) * s2 - T::lit(6.0) * s) / h;
        let d10 = three * s2 - T::lit(4.0) * s + T::one();
        let d01 = -d00;
        let d11 = three * s2 - two * s;
        let d = d00 * self.y[i] + d10 * self.m[i] + d01 * self.y[i + 1] + d11 * self.m[i + 1];
        (v, d)
    }
}

#[derive(Clone)]
pub enum OmegaFamily<T> {
    /// ω = tᵃ.
    PowerLaw { a: T },
    /// ω = 1/(d₁t + d₂)².
    InverseSquareAffine { d1: T, d2: T },
    /// ω = γ²/t².
    InverseSquareScaled { gamma: T },
    Tabulated(MonotoneCubic<T>),
    /// Constant ω; produced only by reparametrizing undamped motion.
    Constant(T),
    Custom(Arc<dyn TimeProfile<T>>),
}

impl<T: Scalar> fmt::Debug for OmegaFamily<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OmegaFamily::PowerLaw { a } => write!(f, "PowerLaw(a={a})"),
            OmegaFamily::InverseSquareAffine { d1, d2 } => write!(f, "InverseSquareAffine(d1={d1}, d2={d2})"),
            OmegaFamily::InverseSquareScaled { gamma } => write!(f, "InverseSquareScaled(gamma={gamma})"),
            OmegaFamily::Tabulated(c) => write!(f, "Tabulated({} samples)", c.t.len()),
            OmegaFamily::Constant(c) => write!(f, "Constant({c})"),
            OmegaFamily::Custom(p) => write!(f, "Custom({})", p.label()),
        }
    }
}

/// Time coefficient ω(t) with its validity interval.
#[derive(Clone)]
pub struct OmegaProfile<T> {
    family: OmegaFamily<T>,
    lo: T,
    hi: T,
}

impl<T: Scalar> fmt::Debug for OmegaProfile<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} on [{}, {}]", self.family, self.lo, self.hi)
    }
}

impl<T: Scalar> OmegaProfile<T> {
    pub fn power_law(a: T) -> Result<Self> {
        if a == T::zero() {
            return Err(Error::InvalidProfile("ω = t⁰ is constant; ω,t ≠ 0 is required".into()));
        }
        Ok(OmegaProfile { family: OmegaFamily::PowerLaw { a }, lo: T::zero(), hi: T::infinity() })
    }

    pub fn inverse_square_affine(d1: T, d2: T) -> Result<Self> {
        if d1 == T::zero() {
            return Err(Error::InvalidProfile("d₁ = 0 makes ω constant; ω,t ≠ 0 is required".into()));
        }
        // the branch to the right of the pole for d₁ > 0, to the left otherwise
        let pole = -d2 / d1;
        let (lo, hi) = if d1 > T::zero() { (pole, T::infinity()) } else { (T::neg_infinity(), pole) };
        Ok(OmegaProfile { family: OmegaFamily::InverseSquareAffine { d1, d2 }, lo, hi })
    }

    pub fn inverse_square_scaled(gamma: T) -> Result<Self> {
        if gamma == T::zero() {
            return Err(Error::InvalidProfile("γ = 0 makes ω vanish identically".into()));
        }
        Ok(OmegaProfile { family: OmegaFamily::InverseSquareScaled { gamma }, lo: T::zero(), hi: T::infinity() })
    }

    pub fn tabulated(t: Vec<T>, values: Vec<T>) -> Result<Self> {
        if values.windows(2).all(|w| w[0] == w[1]) {
            return Err(Error::InvalidProfile("tabulated ω is constant; ω,t ≠ 0 is required".into()));
        }
        if values.iter().any(|&v| v == T::zero()) || values.windows(2).any(|w| w[0] * w[1] < T::zero()) {
            return Err(Error::InvalidProfile("tabulated ω must not vanish or change sign".into()));
        }
        let c = MonotoneCubic::new(t, values)?;
        let (lo, hi) = (c.lo(), c.hi());
        Ok(OmegaProfile { family: OmegaFamily::Tabulated(c), lo, hi })
    }

    /// Constant profile. Valid input for reparametrization only; the
    /// classifiers reject it.
    pub fn constant(c: T) -> Self {
        OmegaProfile { family: OmegaFamily::Constant(c), lo: T::neg_infinity(), hi: T::infinity() }
    }

    pub fn custom(profile: Arc<dyn TimeProfile<T>>, lo: T, hi: T) -> Self {
        OmegaProfile { family: OmegaFamily::Custom(profile), lo, hi }
    }

    /// Restricts the validity interval.
    pub fn with_interval(mut self, lo: T, hi: T) -> Result<Self> {
        let (nlo, nhi) = (self.lo.max(lo), self.hi.min(hi));
        if !(nlo < nhi) {
            return Err(Error::InvalidProfile(format!("empty validity interval [{nlo}, {nhi}]")));
        }
        if let OmegaFamily::InverseSquareAffine { d1, d2 } = self.family {
            let pole = -d2 / d1;
            if nlo < pole && pole < nhi {
                return Err(Error::InvalidProfile("interval contains the pole of 1/(d₁t+d₂)²".into()));
            }
        }
        self.lo = nlo;
        self.hi = nhi;
        Ok(self)
    }

    pub fn family(&self) -> &OmegaFamily<T> {
        &self.family
    }

    pub fn interval(&self) -> (T, T) {
        (self.lo, self.hi)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.family, OmegaFamily::Constant(_))
    }

    pub fn name(&self) -> String {
        format!("{:?}", self.family)
    }

    fn check(&self, t: T) -> Result<()> {
        if !(t > self.lo || (t == self.lo && self.lo.is_finite() && self.closed_lo())) || t > self.hi {
            return Err(Error::OutOfDomain { t: t.to_f64_lossy(), lo: self.lo.to_f64_lossy(), hi: self.hi.to_f64_lossy() });
        }
        Ok(())
    }

    fn closed_lo(&self) -> bool {
        match &self.family {
            OmegaFamily::Tabulated(_) | OmegaFamily::Custom(_) | OmegaFamily::Constant(_) => true,
            OmegaFamily::PowerLaw { a } => *a > T::zero(),
            _ => self.lo != self.singular_point().unwrap_or(T::nan()),
        }
    }

    fn singular_point(&self) -> Option<T> {
        match self.family {
            OmegaFamily::InverseSquareAffine { d1, d2 } => Some(-d2 / d1),
            OmegaFamily::InverseSquareScaled { .. } => Some(T::zero()),
            _ => None,
        }
    }

    pub fn eval(&self, t: T) -> Result<T> {
        self.check(t)?;
        Ok(match &self.family {
            OmegaFamily::PowerLaw { a } => t.powf(*a),
            OmegaFamily::InverseSquareAffine { d1, d2 } => {
                let u = *d1 * t + *d2;
                T::one() / (u * u)
            }
            OmegaFamily::InverseSquareScaled { gamma } => *gamma * *gamma / (t * t),
            OmegaFamily::Tabulated(c) => c.eval(t).0,
            OmegaFamily::Constant(c) => *c,
            OmegaFamily::Custom(p) => p.value(t),
        })
    }

    /// (ln ω),t
    pub fn log_deriv(&self, t: T) -> Result<T> {
        self.check(t)?;
        Ok(match &self.family {
            OmegaFamily::PowerLaw { a } => *a / t,
            OmegaFamily::InverseSquareAffine { d1, d2 } => -T::lit(2.0) * *d1 / (*d1 * t + *d2),
            OmegaFamily::InverseSquareScaled { .. } => -T::lit(2.0) / t,
            OmegaFamily::Tabulated(c) => {
                let (v, d) = c.eval(t);
                d / v
            }
            OmegaFamily::Constant(_) => T::zero(),
            OmegaFamily::Custom(p) => p.log_deriv(t),
        })
    }

    /// ω,t
    pub fn deriv(&self, t: T) -> Result<T> {
        Ok(self.eval(t)? * self.log_deriv(t)?)
    }

    /// An antiderivative of ω. Closed forms carry no integration constant;
    /// numeric profiles are anchored at t = 1 (clamped into the interval).
    pub fn antiderivative(&self, t: T) -> Result<T> {
        self.check(t)?;
        Ok(match &self.family {
            OmegaFamily::PowerLaw { a } => {
                if *a == -T::one() {
                    t.ln()
                } else {
                    t.powf(*a + T::one()) / (*a + T::one())
                }
            }
            OmegaFamily::InverseSquareAffine { d1, d2 } => -T::one() / (*d1 * (*d1 * t + *d2)),
            OmegaFamily::InverseSquareScaled { gamma } => -*gamma * *gamma / t,
            OmegaFamily::Constant(c) => *c * t,
            OmegaFamily::Tabulated(_) | OmegaFamily::Custom(_) => {
                let anchor = T::one().max(self.lo).min(self.hi);
                let f = |s: T| self.eval(s).unwrap_or(T::nan());
                quad::integrate(f, anchor, t, T::lit(1e-13), T::lit(1e-12))?
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn potential_values() {
        assert!(close(ScalarField::kepler().eval(&[3.0, 4.0, 0.0]).unwrap(), -0.2, 1e-15));
        assert!(close(ScalarField::quadratic().eval(&[1.0, 1.0]).unwrap(), 1.0, 1e-15));
        let cp = ScalarField::central_power(3.0).unwrap();
        assert!(close(cp.eval(&[0.0, 2.0, 0.0]).unwrap(), 8.0 / 3.0, 1e-14));
    }

    #[test]
    fn potential_gradients() {
        let g = ScalarField::kepler().grad(&[3.0, 4.0, 0.0]).unwrap();
        assert!(close(g[0], 0.024, 1e-15) && close(g[1], 0.032, 1e-15) && g[2] == 0.0);
        let g = ScalarField::quadratic().grad(&[0.3, -2.0]).unwrap();
        assert_eq!(g, vec![0.3, -2.0]);
        let g = ScalarField::central_power(1.0).unwrap().grad(&[3.0, 4.0, 0.0]).unwrap();
        assert!(close(g[0], 0.6, 1e-15) && close(g[1], 0.8, 1e-15));
    }

    #[test]
    fn central_power_one_is_radius() {
        let f = ScalarField::central_power(1.0).unwrap();
        let x = [1.2, -0.7, 2.0];
        assert!(close(f.eval(&x).unwrap(), norm(&x), 1e-15));
    }

    #[test]
    fn fd_oracle_examples() {
        let q = ScalarField::quadratic().fd_grad(&[1.0, 0.0], 1e-5).unwrap();
        assert!(close(q[0], 1.0, 1e-10) && close(q[1], 0.0, 1e-10));
        let x = [3.0, 4.0, 0.0];
        let k = ScalarField::kepler();
        let (a, b) = (k.grad(&x).unwrap(), k.fd_grad(&x, 1e-5).unwrap());
        assert!(a.iter().zip(&b).all(|(u, v)| close(*u, *v, 1e-8)));
        let c = ScalarField::central_power(3.0).unwrap().fd_grad(&[1.0, 0.0, 0.0], 1e-5).unwrap();
        assert!(close(c[0], 1.0, 1e-8) && close(c[1], 0.0, 1e-8));
    }

    #[test]
    fn hessian_matches_differenced_gradient() {
        let fields = [
            ScalarField::kepler(),
            ScalarField::exceptional(),
            ScalarField::quadratic(),
            ScalarField::central_power(3.0).unwrap(),
            ScalarField::polynomial(Poly::from_terms(2, [(1.0, vec![3, 1]), (-2.0, vec![0, 2])])),
        ];
        for f in &fields {
            let x = if matches!(f.family(), PotentialFamily::PolynomialGeneric(_)) { vec![0.7, -1.1] } else { vec![0.7, -1.1, 0.4] };
            let hess = f.hessian(&x).unwrap();
            let h = 1e-6;
            for j in 0..x.len() {
                let mut xp = x.clone();
                xp[j] += h;
                let mut xm = x.clone();
                xm[j] -= h;
                let (gp, gm) = (f.grad(&xp).unwrap(), f.grad(&xm).unwrap());
                for i in 0..x.len() {
                    let fd = (gp[i] - gm[i]) / (2.0 * h);
                    assert!(close(hess[i][j], fd, 1e-6 * (1.0 + fd.abs())), "{} H[{i}][{j}]", f.name());
                }
            }
        }
    }

    #[test]
    fn singular_point_rejected() {
        let e = ScalarField::kepler().eval(&[0.0, 0.0, 1e-9]).unwrap_err();
        assert!(matches!(e, Error::SingularPoint { .. }));
        // the oscillator is regular at the origin
        assert_eq!(ScalarField::quadratic().grad(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn omega_examples() {
        let w = OmegaProfile::power_law(1.0).unwrap();
        assert_eq!((w.eval(2.0).unwrap(), w.log_deriv(2.0).unwrap()), (2.0, 0.5));
        let w = OmegaProfile::inverse_square_affine(1.0, 0.0).unwrap();
        assert!(close(w.eval(3.0).unwrap(), 1.0 / 9.0, 1e-15));
        assert!(close(w.log_deriv(3.0).unwrap(), -2.0 / 3.0, 1e-15));
        let w = OmegaProfile::inverse_square_scaled(2.0).unwrap();
        assert_eq!((w.eval(2.0).unwrap(), w.log_deriv(2.0).unwrap()), (1.0, -1.0));
    }

    #[test]
    fn constants_rejected() {
        assert!(OmegaProfile::power_law(0.0).is_err());
        assert!(OmegaProfile::inverse_square_affine(0.0, 2.0).is_err());
        assert!(OmegaProfile::tabulated(vec![0.0, 1.0, 2.0], vec![3.0, 3.0, 3.0]).is_err());
    }

    #[test]
    fn out_of_domain() {
        let w = OmegaProfile::power_law(-0.5).unwrap();
        assert!(matches!(w.eval(-1.0), Err(Error::OutOfDomain { .. })));
        let w = OmegaProfile::tabulated(vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 5.0]).unwrap();
        assert!(w.eval(3.5).is_err());
        assert!(w.eval(1.0).is_ok());
    }

    #[test]
    fn tabulated_is_monotone_and_consistent() {
        let ts: Vec<f64> = (0..11).map(|i| 1.0 + 0.3 * i as f64).collect();
        let vs: Vec<f64> = ts.iter().map(|t| t * t).collect();
        let w = OmegaProfile::tabulated(ts, vs).unwrap();
        let mut prev = 0.0;
        for k in 0..300 {
            let t = 1.0 + 3.0 * k as f64 / 299.0;
            let v = w.eval(t).unwrap();
            assert!(v >= prev);
            prev = v;
            let h = 1e-6;
            if t - h >= 1.0 && t + h <= 4.0 {
                let fd = (w.eval(t + h).unwrap().ln() - w.eval(t - h).unwrap().ln()) / (2.0 * h);
                assert!(close(fd, w.log_deriv(t).unwrap(), 1e-6));
            }
        }
    }

    #[test]
    fn antiderivatives() {
        let w = OmegaProfile::power_law(2.0).unwrap();
        assert!(close(w.antiderivative(3.0).unwrap(), 9.0, 1e-14));
        let tab = OmegaProfile::tabulated(vec![0.5, 1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0, 5.0]).unwrap();
        let h = 1e-5;
        let d = (tab.antiderivative(2.5 + h).unwrap() - tab.antiderivative(2.5 - h).unwrap()) / (2.0 * h);
        assert!(close(d, tab.eval(2.5).unwrap(), 1e-8));
        assert!(close(tab.antiderivative(1.0).unwrap(), 0.0, 1e-15));
    }

    #[test]
    fn generic_over_f32() {
        let f = ScalarField::<f32>::kepler();
        let g = f.grad(&[3.0, 4.0, 0.0]).unwrap();
        assert!((g[0] - 0.024).abs() < 1e-7);
        let w = OmegaProfile::<f32>::power_law(1.0).unwrap();
        assert_eq!(w.log_deriv(2.0).unwrap(), 0.5);
    }
}
